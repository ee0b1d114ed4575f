"""Exception types shared across the package."""


class KacLabError(Exception):
    """Base class for all errors raised by kaclab."""


class ParameterDomainError(KacLabError, ValueError):
    """A parameter lies outside the domain where the formula is defined."""


class ScheduleOutOfRangeError(ParameterDomainError):
    """delta_N = N^-(1-eta) is not below 1/2 for the requested N."""

    def __init__(self, N, eta, min_N):
        self.N = N
        self.eta = eta
        self.min_N = min_N
        super().__init__(
            f"N^-(1-eta) >= 1/2 for N={N}, eta={eta}; smallest admissible N is {min_N}"
        )


class GridTooSmallError(KacLabError):
    """The Fourier truncation box leaves more tail mass than allowed."""

    def __init__(self, message, suggested_t_max=None):
        self.suggested_t_max = suggested_t_max
        super().__init__(message)
