"""Exception hierarchy shared by the qsurf modules."""


class QsurfError(Exception):
    """Base class for all qsurf failures."""


class DataError(QsurfError, ValueError):
    """Malformed or unusable input data."""


class SolverError(QsurfError, RuntimeError):
    """A numerical solver could not produce a usable answer."""
