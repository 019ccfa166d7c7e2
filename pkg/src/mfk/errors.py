"""Exception types shared across the toolkit."""


class MfkError(Exception):
    """Base class for all toolkit errors."""


class ParseError(MfkError):
    """A file could not be parsed (carries line context when available)."""


class StructuralError(MfkError):
    """Parsed data violates the expected structure (person/frame/joint layout)."""


class DimensionError(MfkError, ValueError):
    """Array shapes are inconsistent with the operation's contract."""


class ConfigError(MfkError, ValueError):
    """A configuration value violates its invariants."""


class NumericError(MfkError, ArithmeticError):
    """A non-finite value appeared; message names the offending stage."""


class GenerationError(MfkError):
    """The synthetic scene generator could not satisfy its constraints."""


class FormatError(MfkError):
    """A serialized artifact has the wrong magic, version, or schema."""
