"""Exception types shared across the package."""


class FormdeckError(Exception):
    """Base class for all package errors."""


class InvalidDegreeError(FormdeckError, ValueError):
    pass


class IllConditionedBasisError(FormdeckError):
    def __init__(self, message, cell=None, condition=None):
        super().__init__(message)
        self.cell = cell
        self.condition = condition


class MeshParseError(FormdeckError):
    """Malformed mesh file (bad JSON, missing keys, wrong shapes)."""


class MeshInvariantError(FormdeckError):
    """A structural invariant of the polytopal mesh is violated."""

    def __init__(self, message, cells=()):
        super().__init__(message)
        self.cells = tuple(cells)


class NonConformingError(MeshInvariantError):
    pass


class OrientationError(MeshInvariantError):
    pass


class NonBallCellError(MeshInvariantError):
    pass


class DegenerateCellError(MeshInvariantError):
    pass


class NotABoundaryError(FormdeckError):
    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class NotACoboundaryError(FormdeckError):
    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class FeasibilityError(FormdeckError):
    """Rank test and least-norm solve disagree in the spanning-set loop."""


class SolveResidualError(FormdeckError):
    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual
