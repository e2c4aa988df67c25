"""Exception taxonomy shared by all croprl modules."""


class CropRlError(Exception):
    """Base class for every error raised by this package."""


class ConfigurationError(CropRlError):
    """A config invariant is violated (names the offending constraint)."""


class ParseError(CropRlError):
    """A config file or CLI value could not be parsed (names the key)."""


class DomainError(CropRlError):
    """An argument is outside its documented domain."""


class StateError(CropRlError):
    """An operation was called in an invalid lifecycle state."""


class EncodingError(CropRlError):
    """A state vector cannot be tokenized (names the feature index)."""


class TrainingError(CropRlError):
    """Training produced a non-finite quantity (names the parameter)."""


class FormatError(CropRlError):
    """A checkpoint file is corrupt, truncated or has a bad magic/version."""


class CompatibilityError(CropRlError):
    """A checkpoint does not match the expected architecture (names the tensor)."""
