"""Exception hierarchy shared by the parser, the jet engine and the pipeline."""


class SubmanifoldError(Exception):
    """Base class for every error raised by this package."""


class DslError(SubmanifoldError):
    """An error tied to a position in embedding source text.

    ``pos`` is a 0-based character offset; ``line`` and ``col`` are 1-based
    and are filled in when the source text is known.
    """

    def __init__(self, message, pos=None, source=None):
        self.message = message
        self.pos = pos
        self.line = self.col = None
        if pos is not None and source is not None:
            head = source[:pos]
            self.line = head.count("\n") + 1
            self.col = pos - (head.rfind("\n") + 1) + 1
        super().__init__(str(self))

    def __str__(self):
        if self.line is not None:
            return f"{self.line}:{self.col}: {self.message}"
        if self.pos is not None:
            return f"offset {self.pos}: {self.message}"
        return self.message


class DslSyntaxError(DslError):
    pass


class DimensionError(DslError):
    pass


class UnknownIdentifier(DslError):
    def __init__(self, name, pos=None, source=None):
        self.name = name
        super().__init__(f"unknown identifier {name!r}", pos, source)


class DomainError(DslError):
    pass


class EvalError(SubmanifoldError):
    """Evaluation left the domain of an operation (log, sqrt, pow, division)."""

    def __init__(self, message, pos=None):
        self.pos = pos
        super().__init__(message if pos is None else f"{message} (at offset {pos})")


class DivisionByZeroJet(EvalError):
    pass


class DegenerateMetric(SubmanifoldError):
    """The induced metric is singular: the map is not an immersion here."""


class NullNormalDirection(SubmanifoldError):
    """No orthonormal normal frame could be built from the coordinate seeds."""


class InputError(SubmanifoldError):
    pass


class ConfigError(SubmanifoldError):
    pass
