"""Exception hierarchy shared by every morphprobe module.

File-system failures are left as the builtin ``OSError`` family.
"""


class ProbingError(Exception):
    """Base class for all morphprobe errors."""


class FormatError(ProbingError, ValueError):
    def __init__(self, message, line=None, path=None):
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where += f"{path}"
        if line is not None:
            where += f":{line}" if where else f"line {line}"
        super().__init__(f"{where}: {message}" if where else message)


class MalformedBundle(FormatError):
    pass


class EmptyBundle(FormatError):
    pass


class DimensionMismatch(FormatError):
    pass


class SchemaError(ProbingError, ValueError):
    pass


class InsufficientData(ProbingError):
    def __init__(self, count, needed, what="samples"):
        self.count = count
        self.needed = needed
        super().__init__(f"only {count} {what}, need at least {needed}")


class DegenerateFeature(ProbingError):
    def __init__(self, labels):
        self.labels = sorted(labels)
        super().__init__(f"feature has fewer than two distinct values: {self.labels}")


class DegenerateDataset(ProbingError, ValueError):
    pass


class EmptyLexicon(ProbingError, ValueError):
    pass


class MismatchedSubjects(ProbingError, ValueError):
    pass


class ZeroVariance(ProbingError, ValueError):
    pass
