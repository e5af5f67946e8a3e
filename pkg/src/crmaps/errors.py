"""Exception hierarchy shared by all modules."""


class CRMapsError(Exception):
    """Base class for domain errors (CLI exit code 1)."""


class DenominatorVanishes(CRMapsError):
    pass


class OrderExceeded(CRMapsError):
    pass


class OrderMismatch(CRMapsError):
    pass


class EvaluationFailed(CRMapsError):
    pass


class SelfCheckFailed(CRMapsError):
    pass


class NotOnHypersurface(CRMapsError):
    pass


class ConstraintViolated(CRMapsError):
    pass


class InvalidSignature(CRMapsError):
    pass


class SolveFailed(CRMapsError):
    pass


class NotInF2(CRMapsError):
    pass


class NoConvergence(CRMapsError):
    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = residuals


class Unclassifiable(CRMapsError):
    def __init__(self, message, certificate=None):
        super().__init__(message)
        self.certificate = certificate


class Inconsistent(CRMapsError):
    pass


class SearchStalled(CRMapsError):
    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report
