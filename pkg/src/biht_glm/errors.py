"""Exception hierarchy shared by all modules."""


class BihtError(Exception):
    """Base class for package errors."""


class DegenerateIterate(BihtError, ArithmeticError):
    """A thresholded/normalized vector collapsed to zero.

    ``iteration`` is set by the solver when the failure happens inside a run.
    """

    def __init__(self, message="vector is zero and cannot be normalized", iteration=None):
        self.iteration = iteration
        if iteration is not None:
            message = f"{message} (iteration {iteration})"
        super().__init__(message)


class DegenerateDirection(BihtError, ValueError):
    """The pair (u, v) has u = +/-v, so a removed direction is undefined."""


class InvalidLink(BihtError, ValueError):
    """A link model is malformed or returns probabilities outside [0, 1]."""


class UnsupportedLink(BihtError, ValueError):
    """The requested computation is not defined for this link model."""


class InvalidParams(BihtError, ValueError):
    """Recurrence parameters violate their constraints."""


class ExperimentFailed(BihtError, RuntimeError):
    """Every trial of an experiment degenerated."""
