"""Exception hierarchy."""


class QubitBathError(Exception):
    pass


class InvalidParameterError(QubitBathError, ValueError):
    pass


class DegenerateGroundStateError(QubitBathError):
    """The bath sits at a level crossing; the initial state is not unique."""


class ResourceError(QubitBathError):
    def __init__(self, message, estimate_bytes=None):
        super().__init__(message)
        self.estimate_bytes = estimate_bytes


class IntegrationError(QubitBathError):
    def __init__(self, message, drift=None):
        super().__init__(message)
        self.drift = drift


class PreconditionError(QubitBathError):
    pass


class SizeError(QubitBathError, ValueError):
    pass
