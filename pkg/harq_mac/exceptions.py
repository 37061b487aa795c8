"""
Exceptions raised by harq_mac. The CLI maps them to exit codes.
"""


class HarqMacError(Exception):
    """Base class for all harq_mac errors"""

    exit_code = 1


class DomainError(HarqMacError, ValueError):
    """Argument outside the domain of a function"""


class RangeError(HarqMacError, ValueError):
    """Target value outside the achievable range"""

    def __init__(self, message, interval=None):
        super().__init__(message)
        self.interval = interval


class ArgumentError(HarqMacError, ValueError):
    """Invalid size or count argument"""


class ConfigurationError(HarqMacError):
    """Policy parameters inconsistent with the system description"""


class EvaluationError(HarqMacError, ArithmeticError):
    """Objective returned a non-finite value"""

    exit_code = 2

    def __init__(self, message, argument=None):
        super().__init__(message)
        self.argument = argument


class ModelError(HarqMacError):
    """Finite-state model is not a valid irreducible aperiodic chain"""

    exit_code = 2


class VerificationError(HarqMacError):
    """Analytic and simulated values disagree"""

    exit_code = 2
