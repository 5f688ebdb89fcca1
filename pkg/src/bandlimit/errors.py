"""Exception hierarchy. Each family carries the process exit code used by the CLI."""


class BandlimitError(Exception):
    exit_code = 1


class UsageError(BandlimitError, ValueError):
    """Arguments are inconsistent (wrong manifold, wrong lengths, unknown names)."""

    exit_code = 2


class ConfigError(UsageError):
    exit_code = 3


class ResolutionError(BandlimitError):
    """The discretization cannot resolve the requested scale or bandwidth."""

    exit_code = 4


class MeshError(BandlimitError):
    exit_code = 5


class MeshNotClosedError(MeshError):
    pass


class DegenerateMeshError(MeshError):
    pass


class SolverError(BandlimitError):
    exit_code = 6


class PreconditionError(BandlimitError, ValueError):
    """A mathematical precondition of the operation is violated."""

    exit_code = 7


class UndefinedRatioError(PreconditionError):
    pass
