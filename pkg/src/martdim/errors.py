"""Exception types shared across the package."""


class MartdimError(Exception):
    """Base class."""


class InvalidArgument(MartdimError, ValueError):
    pass


class IndexOutOfRange(InvalidArgument, IndexError):
    """A step, path or frame index outside its valid range."""


class DimensionMismatch(MartdimError, ValueError):
    pass


class FormatError(MartdimError):
    """Corrupt or truncated serialized data; ``offset`` is the byte offset of the problem."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


class RankMismatch(MartdimError):
    def __init__(self, expected: int, actual: int):
        super().__init__(f"expected rank {expected}, found rank {actual}")
        self.expected = expected
        self.actual = actual


class OrthonormalityError(MartdimError):
    pass


class ConfigError(MartdimError):
    """Invalid experiment configuration; ``key`` names the offending entry."""

    def __init__(self, message: str, key: str | None = None):
        super().__init__(message)
        self.key = key
