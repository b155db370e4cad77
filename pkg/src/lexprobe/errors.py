"""Exception types shared across the library."""


class LexprobeError(Exception):
    """Base class for all library errors."""


class DimensionError(LexprobeError):
    """Operand shapes are incompatible for the requested operation."""


class LabelError(LexprobeError):
    """A label index or label name is outside the declared label set."""


class ContractError(LexprobeError):
    """A caller violated an operation's precondition."""


class FormatError(LexprobeError):
    """An input file does not conform to its documented format."""


class MissingEmbeddingError(LexprobeError):
    """A sentence is absent from the contextual store; re-export it."""


class ConfigError(LexprobeError):
    """A run configuration is invalid for the given data or model."""


class SplitError(LexprobeError):
    """The lexical split constraints cannot be satisfied."""
