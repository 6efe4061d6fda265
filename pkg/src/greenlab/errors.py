"""Exception hierarchy shared by all greenlab modules."""


class GreenlabError(Exception):
    """Base class for every error raised by greenlab."""


class InvalidDomain(GreenlabError):
    pass


class InvalidParameter(GreenlabError, ValueError):
    pass


class FlatnessViolation(GreenlabError):
    """No admissible frame exists at a requested (x0, R)."""


class GeometryContractViolation(GreenlabError):
    """A constructive geometric lemma produced output violating its guarantees."""


class OutOfScale(GreenlabError, ValueError):
    pass


class TooClose(GreenlabError, ValueError):
    pass


class MeshFailure(GreenlabError):
    pass


class CompatibilityError(GreenlabError, ValueError):
    pass


class SolveFailure(GreenlabError):
    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class ResolutionError(GreenlabError):
    pass


class InvalidPairing(GreenlabError):
    pass


class FitError(GreenlabError, ValueError):
    pass
