"""Deterministic, mask-aware 3D intensity augmentation for MRI studies.

The core transform renormalizes gamma curves to the intensity range of
a lesion's foreground voxels and mixes the result back through the
binary mask, leaving background bit-identical.  Around it: a seeded
baseline augmentation pipeline, NIfTI-1 I/O, image-level metrics, and a
batch CLI whose outputs are reproducible at the byte level.
"""

from .errors import (
    ConfigError,
    CorruptFileError,
    CorruptHeaderError,
    DuplicateIdError,
    EmptyForegroundError,
    FormatError,
    InvalidInputError,
    InvalidParameterError,
    LesionForgeError,
    NiftiError,
    NonBinaryMaskError,
    UnsupportedDatatypeError,
)
from .gamma import (
    DEFAULT_GAMMA_SPEC,
    GAMMA_COMPRESSION,
    GAMMA_EXPANSION,
    GAMMA_IDENTITY,
    BetaIntervalSpec,
    GammaSampler,
    LogNormalSpec,
    MixtureUniformSpec,
    classify_gamma,
    gamma_foreground_normalized,
    gamma_global,
    gamma_local,
    make_sampler,
    sample_gamma,
    spec_from_dict,
    spec_to_dict,
)
from .metrics import (
    ConfusionCounts,
    ImageLevelOutcome,
    confusion,
    image_level_positive,
    sensitivity,
    specificity,
)
from .nifti import NiftiHeader, parse_header, read_volume, write_volume
from .pipeline import (
    AugmentOpSpec,
    PipelineConfig,
    apply_pipeline,
    apply_pipeline_recorded,
    op_brightness,
    op_contrast,
    op_gaussian_blur,
    op_gaussian_noise,
    op_mirror,
    op_random_patch,
    op_rician_noise,
)
from .rng import derive_seed, make_stream
from .volume import (
    Mask3D,
    Study,
    Volume3D,
    extract_patch,
    minmax,
    minmax_masked,
    pointwise_mix,
    validate_mask,
)

__version__ = "0.1.0"

__all__ = [
    "AugmentOpSpec",
    "BetaIntervalSpec",
    "ConfigError",
    "ConfusionCounts",
    "CorruptFileError",
    "CorruptHeaderError",
    "DEFAULT_GAMMA_SPEC",
    "DuplicateIdError",
    "EmptyForegroundError",
    "FormatError",
    "GAMMA_COMPRESSION",
    "GAMMA_EXPANSION",
    "GAMMA_IDENTITY",
    "GammaSampler",
    "ImageLevelOutcome",
    "InvalidInputError",
    "InvalidParameterError",
    "LesionForgeError",
    "LogNormalSpec",
    "Mask3D",
    "MixtureUniformSpec",
    "NiftiError",
    "NiftiHeader",
    "NonBinaryMaskError",
    "PipelineConfig",
    "Study",
    "UnsupportedDatatypeError",
    "Volume3D",
    "apply_pipeline",
    "apply_pipeline_recorded",
    "classify_gamma",
    "confusion",
    "derive_seed",
    "extract_patch",
    "gamma_foreground_normalized",
    "gamma_global",
    "gamma_local",
    "image_level_positive",
    "make_sampler",
    "make_stream",
    "minmax",
    "minmax_masked",
    "op_brightness",
    "op_contrast",
    "op_gaussian_blur",
    "op_gaussian_noise",
    "op_mirror",
    "op_random_patch",
    "op_rician_noise",
    "parse_header",
    "pointwise_mix",
    "read_volume",
    "sample_gamma",
    "sensitivity",
    "specificity",
    "spec_from_dict",
    "spec_to_dict",
    "validate_mask",
    "write_volume",
    "__version__",
]
