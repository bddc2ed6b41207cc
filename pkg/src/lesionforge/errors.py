"""Exception taxonomy shared by every lesionforge module.

Message prefixes are stable so that downstream wrappers (CLI, bindings)
can surface core diagnostics verbatim.
"""


class LesionForgeError(Exception):
    """Base class for all errors raised by this package."""


class InvalidInputError(LesionForgeError):
    """A volume, mask, or study violates a structural precondition."""


class InvalidParameterError(LesionForgeError):
    """A scalar parameter (gamma, sigma, probability, ...) is out of range."""


class NonBinaryMaskError(InvalidInputError):
    """A mask candidate holds a value other than exactly 0 or 1."""

    def __init__(self, index: int, value: float):
        self.index = index
        self.value = value
        super().__init__(
            f"non-binary mask: value {value!r} at linear index {index} "
            "(only exact 0 and 1 are allowed)"
        )


class EmptyForegroundError(LesionForgeError):
    """An operation needing foreground voxels received an all-zero mask."""


class ConfigError(LesionForgeError):
    """A pipeline or run configuration is malformed or inconsistent."""


class DuplicateIdError(LesionForgeError):
    """The same study id appeared more than once where ids must be unique."""


class NiftiError(LesionForgeError):
    """Base class for NIfTI-1 read/write failures."""


class CorruptHeaderError(NiftiError):
    """The 348-byte header is unreadable under either byte order."""


class CorruptFileError(NiftiError):
    """The voxel payload is truncated or otherwise unusable."""


class UnsupportedDatatypeError(NiftiError):
    """The file uses a datatype code outside the supported set."""

    def __init__(self, code: int):
        self.code = code
        super().__init__(f"unsupported datatype: NIfTI-1 code {code}")


class FormatError(NiftiError):
    """The file is structurally valid but not a supported NIfTI-1 variant."""
