"""Exception types shared across the engine."""


class DomainError(ArithmeticError):
    """A candidate expression is undefined at a data point.

    ``kind`` is one of ``sqrt_negative``, ``div_by_zero``, ``overflow`` or
    ``zero_to_negative_power``.
    """

    KINDS = ("sqrt_negative", "div_by_zero", "overflow", "zero_to_negative_power")

    def __init__(self, kind: str, detail: str = ""):
        if kind not in self.KINDS:
            raise ValueError(f"unknown domain error kind {kind!r}")
        self.kind = kind
        super().__init__(f"{kind}: {detail}" if detail else kind)


class ConfigError(ValueError):
    pass


class ParseError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class ShapeError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class UnknownLabel(KeyError):
    pass
