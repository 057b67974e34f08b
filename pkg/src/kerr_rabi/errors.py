"""Exception hierarchy shared by all modules."""


class KerrRabiError(Exception):
    """Base class for every error raised by the package."""


class DegenerateLevels(KerrRabiError):
    """A perturbative denominator fell below the degeneracy tolerance."""


class NoRoot(KerrRabiError):
    """A resonance search bracket contained no admissible sign change."""


class NoTransfer(KerrRabiError):
    """No detuning in the bracket gives more than 50% population transfer."""


class CutoffTooSmall(KerrRabiError):
    """A tracked eigenstate carries weight on the top Fock levels."""


class InvalidStep(KerrRabiError, ValueError):
    """Non-positive time step."""


class PathTooShort(KerrRabiError, ValueError):
    """Noise path too short for the requested estimator."""


class ResonantTarget(KerrRabiError):
    """Escape target level is resonant with the initial level."""


class KerrDegenerate(KerrRabiError):
    """Correction difference vanishes, so no overdamping bound exists."""


class ConfigError(KerrRabiError, ValueError):
    """Experiment configuration violates the schema."""


class NumericalGuardError(KerrRabiError):
    """A runtime numerical guard tripped during propagation."""


class NormDrift(NumericalGuardError):
    """State norm drifted beyond tolerance."""


class CutoffLeak(NumericalGuardError):
    """Population reached the top of the truncated Fock space."""
