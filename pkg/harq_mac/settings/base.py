import os

PROJECT_NAME = "harq_mac"

POLICY_MODULES = ["harq_mac.policies"]

# Run environment
HARQ_MAC_ENV = os.getenv("HARQ_MAC_ENV", "dev")

LOG_LEVEL = os.getenv("LOG_LEVEL", "INFO")
LOG_FORMAT = "%(asctime)s [%(name)s] %(levelname)s: %(message)s"

# Normalization benchmark, see capacity.ewfc_power_of_level
CAPACITY_CONVENTION = os.getenv("CAPACITY_CONVENTION", "standard")
CAPACITY_BRACKET = (1e-8, 50.0)
CAPACITY_RTOL = 1e-9

# Derivative-free search
OPTIMIZER_GRID_POINTS = int(os.getenv("OPTIMIZER_GRID_POINTS", 400))
OPTIMIZER_REFINE_TOL = float(os.getenv("OPTIMIZER_REFINE_TOL", 1e-9))
OPTIMIZER_ND_RESTARTS = int(os.getenv("OPTIMIZER_ND_RESTARTS", 8))
OPTIMIZER_ND_MAX_ITERS = int(os.getenv("OPTIMIZER_ND_MAX_ITERS", 2000))
OPTIMIZER_SEED = 20110605

# Unit-exponential mass beyond 60 is below 1e-26
THRESHOLD_DOMAIN = (1e-6, 60.0)

# Monte Carlo
SIM_SLOTS = int(os.getenv("SIM_SLOTS", 1_000_000))
SIM_SEED = int(os.getenv("SIM_SEED", 2011))
SIM_CHUNK_SLOTS = 100_000
SIM_BATCHES = 50
CONFIDENCE_SIGMAS = 3.0
JOINT_MC_SAMPLES = int(os.getenv("JOINT_MC_SAMPLES", 1_000_000))

# Incremental redundancy level search
INR_SIM_BUDGET = int(os.getenv("INR_SIM_BUDGET", 100_000))
INR_DEEP_FADE = os.getenv("INR_DEEP_FADE", "last_chance")
INR_PENALTY = 50.0
INR_RESTARTS = int(os.getenv("INR_RESTARTS", 4))
INR_MAX_ITERS = int(os.getenv("INR_MAX_ITERS", 600))

SWEEP_WORKERS = int(os.getenv("SWEEP_WORKERS", os.cpu_count() or 1))
