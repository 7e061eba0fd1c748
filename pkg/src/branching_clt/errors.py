"""Exception hierarchy.

Every error raised on purpose by the package derives from
:class:`BranchingError`, so callers (the CLI in particular) can map them to
exit codes without catching unrelated failures.
"""


class BranchingError(Exception):
    """Base class for all package errors."""

    #: exit status used by the command line front end
    exit_code = 2


class ConfigError(BranchingError, ValueError):
    """Malformed or inconsistent configuration."""

    exit_code = 1


class NonGenerator(ConfigError):
    """Negative off-diagonal rate or positive row sum in a generator."""


class InvalidLaw(ConfigError):
    """Offspring law that is not a finite probability vector."""


class EmptyState(ConfigError):
    """Model with no states."""


class InfeasibleDesign(ConfigError):
    """Jordan design whose matrix has a negative off-diagonal entry."""


class UnrealizableMechanism(ConfigError):
    """No offspring law reproduces the requested drift and A under the policy."""


class NegativeTime(BranchingError, ValueError):
    pass


class NegativeInput(BranchingError, ValueError):
    pass


class Reducible(BranchingError):
    """Leading eigenvalue not simple or its eigenfunction not strictly positive."""


class TieUnresolved(BranchingError):
    pass


class WrongRegime(BranchingError, ValueError):
    pass


class MissingBlock(BranchingError, KeyError):
    pass


class QuadratureFailure(BranchingError):
    pass


class StiffnessFailure(BranchingError):
    pass


class PopulationCap(BranchingError):
    pass


class InvalidCheckpoint(BranchingError, ValueError):
    pass


class TooFewSurvivors(BranchingError):
    pass


class DegenerateVariance(BranchingError, ValueError):
    pass


class HorizonTooShort(BranchingError, ValueError):
    pass
