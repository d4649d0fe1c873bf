"""Exception hierarchy shared by all modules."""


class CMError(Exception):
    """Base class for every error raised by this package."""


class InvalidGrid(CMError, ValueError):
    pass


class InvalidParams(CMError, ValueError):
    pass


class GridMismatch(CMError, ValueError):
    pass


class MarginViolation(CMError, ValueError):
    """A cell on the outermost ring of the grid is marked inside."""

    def __init__(self, cell, message=None):
        self.cell = tuple(int(c) for c in cell)
        super().__init__(message or f"margin cell {self.cell} is inside the domain")


class EmptyDomain(CMError, ValueError):
    pass


class EmptySet(CMError, ValueError):
    pass


class NotContained(CMError, ValueError):
    pass


class OutsideDomain(CMError, ValueError):
    pass


class NotConnected(CMError, ValueError):
    pass


class NotTubeConnected(CMError, ValueError):
    pass


class NotCompactlyInside(CMError, ValueError):
    pass


class RepairFailed(CMError, RuntimeError):
    pass


class NoConvergence(CMError, RuntimeError):
    pass


class SupportViolation(CMError, ValueError):
    def __init__(self, cell, value):
        self.cell = tuple(int(c) for c in cell)
        self.value = float(value)
        super().__init__(f"field is {self.value!r} at cell {self.cell} outside the domain")


class InfeasibleInit(CMError, ValueError):
    pass


class TraceCorrupt(CMError, RuntimeError):
    pass


class FormatError(CMError, ValueError):
    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        where = ""
        if line is not None:
            where = f"line {line}" + (f", column {column}" if column is not None else "") + ": "
        super().__init__(where + message)


class UnknownKey(CMError, KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else "unknown key"


class MissingKey(CMError, KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else "missing key"
