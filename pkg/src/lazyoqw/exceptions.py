"""Exception hierarchy.

Each error carries an ``exit_code`` so the command line front end can map
failures onto its stable exit-status contract without a lookup table.
"""


class OQWError(Exception):
    """Base class for every error raised by this package."""

    exit_code = 1


class StructureError(OQWError, ValueError):
    """Operators have the wrong count, shape or dimension."""

    exit_code = 2


class NormalizationError(OQWError, ValueError):
    """The Kraus completeness relation is violated beyond tolerance."""

    exit_code = 2

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class InvalidStateError(OQWError, ValueError):
    """A coin or lattice state is not a valid (sub-)density matrix."""

    exit_code = 2


class NonUniqueSteadyState(OQWError):
    """The coin map has more than one fixed point."""

    exit_code = 3

    def __init__(self, message, multiplicity=None):
        super().__init__(message)
        self.multiplicity = multiplicity


class NoPhysicalFixedPoint(OQWError):
    """No eigenvector of the coin map can be normalised to a density matrix."""

    exit_code = 4


class InconsistentSystem(OQWError):
    """The degenerate linear system for the L operators has no solution."""

    exit_code = 4

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class NumericalFailure(OQWError):
    """A sampled or evolved quantity left the physical domain."""

    exit_code = 4


class BudgetExceeded(OQWError, ValueError):
    """An exhaustive enumeration would exceed its size budget."""

    exit_code = 1
