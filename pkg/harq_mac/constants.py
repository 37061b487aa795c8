STATIC_TDMA = "static_tdma"
JOINT_DECODING = "joint_decoding"
JOINT_PLUS_TDMA = "joint_plus_tdma"
CDTDMA_ON = "cdtdma_on"
CDTDMA_ONOFF = "cdtdma_onoff"
MULTILEVEL_CDTDMA = "multilevel_cdtdma"
CDTDMA_ALO = "cdtdma_alo"
CDTDMA_INR = "cdtdma_inr"

POLICIES = [
    STATIC_TDMA,
    JOINT_DECODING,
    JOINT_PLUS_TDMA,
    CDTDMA_ON,
    CDTDMA_ONOFF,
    MULTILEVEL_CDTDMA,
    CDTDMA_ALO,
    CDTDMA_INR,
]

STANDARD = "standard"
PAPER = "paper"
# Alias of PAPER
LITERAL = "literal"
CONVENTIONS = [STANDARD, PAPER, LITERAL]

UNIT_RAYLEIGH = "unit_rayleigh"

# Deep-fade behaviour of the incremental redundancy quantizer
ACCUMULATE = "accumulate"
SILENT = "silent"
LAST_CHANCE = "last_chance"
DEEP_FADE_MODES = [ACCUMULATE, SILENT, LAST_CHANCE]
