"""Exception types raised across the package."""


class HKLabError(Exception):
    """Base class for all errors raised by hklab."""


class ComputeError(HKLabError):
    """A numerical precondition failed inside a module pipeline."""


class DegenerateTriple(ComputeError):
    pass


class IncompatibleTriple(ComputeError):
    pass


class NotSO3(ComputeError):
    pass


class OutOfChart(ComputeError):
    pass


class SingularLattice(ComputeError):
    pass


class DegeneratePeriods(ComputeError):
    pass


class NonconstantRatio(ComputeError):
    pass


class NondegeneracyFailure(ComputeError):
    pass


class NotClosed(ComputeError):
    pass


class ConstantMismatch(ComputeError):
    pass


class DegenerateGram(ComputeError):
    def __init__(self, message, worst_index=None, worst_value=None):
        super().__init__(message)
        self.worst_index = worst_index
        self.worst_value = worst_value


class HarmonicComponent(ComputeError):
    pass


class NotSPD(ComputeError):
    pass


class FarFromIdentity(ComputeError):
    pass


class DivergenceDetected(ComputeError):
    pass


class MaxIterations(ComputeError):
    pass


class SingularPairing(ComputeError):
    pass


class RankDeficient(ComputeError):
    pass


class EmptySeries(HKLabError):
    pass


class ConfigError(HKLabError):
    """Scenario file failed schema validation."""
