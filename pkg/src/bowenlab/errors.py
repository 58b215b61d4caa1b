"""Exception hierarchy. The CLI maps each family onto an exit code."""


class BowenLabError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class InputError(BowenLabError, ValueError):
    """Malformed arguments, configs or dimension mismatches."""


class DomainError(BowenLabError, ValueError):
    """A point or matrix lies outside the domain of an operation."""


class ModelRejected(BowenLabError):
    """A model failed the expansion check."""

    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


class EmptySubshiftError(BowenLabError):
    """A subshift has no admissible bi-infinite sequence."""


class BudgetError(BowenLabError):
    """A cylinder enumeration would exceed the configured budget."""


class PreconditionError(BowenLabError):
    """An operation's geometric precondition does not hold."""


class ReducibleError(BowenLabError):
    """An operation needs an irreducible transition matrix."""


class PropertyFailure(BowenLabError):
    """A sampled inequality (sub-additivity and friends) was violated."""

    exit_code = 2

    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


class TheoremCheckFailure(BowenLabError):
    """A row of a theorem series broke one of the proved bounds."""

    exit_code = 2

    def __init__(self, message, row=None):
        super().__init__(message)
        self.row = row


class ConsistencyError(BowenLabError):
    """Internal numerical consistency violated (signals a bug)."""

    exit_code = 3
