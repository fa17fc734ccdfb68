"""Exception types shared across the package."""


class RelugenError(Exception):
    """Base class for all package errors."""


class DimensionMismatch(RelugenError, ValueError):
    pass


class EmptyMeasure(RelugenError, ValueError):
    pass


class DomainError(RelugenError, ValueError):
    pass


class ParseError(RelugenError, ValueError):
    def __init__(self, message, row=None, column=None):
        loc = ""
        if row is not None:
            loc = f" (row {row}" + (f", column {column})" if column is not None else ")")
        super().__init__(message + loc)
        self.row = row
        self.column = column


class RaggedRows(ParseError):
    pass


class ShapeMismatch(RelugenError, ValueError):
    pass


class BudgetTooSmall(RelugenError, ValueError):
    pass


class TooManyBreakpoints(RelugenError, ValueError):
    def __init__(self, n_breakpoints, budget):
        super().__init__(f"{n_breakpoints} interior breakpoints exceed the budget of {budget}")
        self.n_breakpoints = n_breakpoints
        self.budget = budget


class NonzeroBoundary(RelugenError, ValueError):
    pass


class InfeasibleEpsilon(RelugenError, ValueError):
    def __init__(self, index, sup_epsilon, epsilon):
        super().__init__(
            f"epsilon={epsilon!r} violates feasibility at ordered atom {index}; "
            f"feasible epsilon must be < {sup_epsilon!r}"
        )
        self.index = index
        self.sup_epsilon = sup_epsilon
        self.epsilon = epsilon


class QuantileResolution(RelugenError, ValueError):
    """Ramp intervals too thin to place distinct breakpoints in floating point."""


class CapacityExceeded(RelugenError, ValueError):
    def __init__(self, n_atoms, n_max):
        super().__init__(f"target has {n_atoms} atoms but the budget supports at most {n_max}")
        self.n_atoms = n_atoms
        self.n_max = n_max


class InfeasibleBudget(RelugenError, ValueError):
    pass


class SizeLimit(RelugenError, ValueError):
    pass


class NotSingular(RelugenError, ValueError):
    pass


class DegenerateGrid(RelugenError, ValueError):
    pass


class ConfigError(RelugenError, ValueError):
    """Invalid experiment configuration; message names the offending field."""
