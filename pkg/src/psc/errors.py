"""Exception hierarchy.

Validation problems subclass :class:`ValueError`; numerical failures subclass
:class:`PscNumericalError`. The CLI maps the two families onto exit codes 2 and 3.
"""


class ValidationError(ValueError):
    """Malformed input: shapes, non-finite values, out-of-range parameters."""


class ParseError(ValidationError):
    """A CSV file could not be read as a numeric matrix."""

    def __init__(self, message, row=None, column=None):
        where = []
        if row is not None:
            where.append(f"row {row}")
        if column is not None:
            where.append(f"column {column}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)
        self.row = row
        self.column = column


class RankError(ValidationError):
    """Requested number of components is not supported by the data."""


class PscNumericalError(ArithmeticError):
    """Base class for failures that arise during computation."""


class SparsityError(PscNumericalError):
    def __init__(self, component, gamma):
        super().__init__(
            f"soft thresholding with gamma={gamma:g} removed every coefficient "
            f"of component {component}"
        )
        self.component = component
        self.gamma = gamma


class DegenerateComponentError(PscNumericalError):
    """A component has all-zero scores, so leverages are undefined."""


class LeverageSingularityError(PscNumericalError):
    def __init__(self, point, component, leverage):
        super().__init__(
            f"leverage of point {point} on component {component} is {leverage:.15g}; "
            "leave-one-out error is singular"
        )
        self.point = point
        self.component = component
        self.leverage = leverage


class AssignmentError(PscNumericalError):
    def __init__(self, point):
        super().__init__(f"no finite predictive influence for point {point}")
        self.point = point


class ClusteringError(PscNumericalError):
    """Every restart failed to produce a valid partition."""
