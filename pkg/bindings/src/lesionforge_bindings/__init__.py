"""Thin in-process bindings for training loops that work on raw arrays.

The core package traffics in immutable ``Volume3D``/``Mask3D``/``Study``
containers. Code feeding a training loop usually holds plain contiguous
buffers instead, so this layer wraps those buffers read-only, routes them
through the core transforms, and hands back newly allocated arrays. Input
buffers are never copied except as part of producing an output, and never
written to. Errors are the core package's own exception types, so callers
can match on one taxonomy across both layers.

All functions here are stateless and safe to call from multiple threads;
the numeric kernels underneath release the interpreter lock. Sampler
state never crosses a call boundary.

Flat buffers are interpreted x-fastest, the core's voxel order. A study
dict may carry its mask under the ``"mask"`` key, mirroring the CLI's
manifest channel of the same name; a missing mask gets an all-zero
stand-in so foreground-normalized ops fall back to their whole-volume
form, and no mask appears among the outputs.
"""

import json

import numpy as np

from lesionforge import (
    BetaIntervalSpec,
    ConfigError,
    DEFAULT_GAMMA_SPEC,
    InvalidInputError,
    InvalidParameterError,
    LogNormalSpec,
    Mask3D,
    MixtureUniformSpec,
    PipelineConfig,
    Study,
    Volume3D,
    apply_pipeline_recorded,
    make_sampler,
    spec_from_dict,
)
from lesionforge import gamma_local as _core_gamma_local

__version__ = "0.1.0"

__all__ = [
    "ArrayView3D",
    "MASK_KEY",
    "apply_pipeline_config",
    "local_gamma",
    "sample_gammas",
]

MASK_KEY = "mask"

_SPEC_TYPES = (MixtureUniformSpec, LogNormalSpec, BetaIntervalSpec)


class ArrayView3D:
    """Read-only 3D view over a contiguous 32- or 64-bit real buffer.

    Wrapping aliases the caller's memory; nothing is copied. A 3D numpy
    array is taken as-is (C or Fortran order, either works). Any other
    buffer-protocol object must be flat and needs an explicit ``shape``.
    """

    __slots__ = ("array", "shape")

    def __init__(self, buffer, shape=None):
        if isinstance(buffer, ArrayView3D):
            arr = buffer.array
        elif isinstance(buffer, np.ndarray):
            arr = buffer
        else:
            try:
                mv = memoryview(buffer)
            except TypeError:
                raise InvalidInputError(
                    "invalid input: object does not expose a buffer; "
                    f"got {type(buffer).__name__}"
                ) from None
            if not mv.contiguous:
                raise InvalidInputError("invalid input: buffer must be contiguous")
            arr = np.asarray(mv)

        if arr.dtype not in (np.float32, np.float64):
            raise InvalidInputError(
                f"invalid input: element type must be a 32- or 64-bit real, got {arr.dtype}"
            )
        if not (arr.flags["C_CONTIGUOUS"] or arr.flags["F_CONTIGUOUS"]):
            raise InvalidInputError("invalid input: buffer must be contiguous")

        if shape is not None:
            shape = _check_shape(shape)
        if arr.ndim == 3:
            if shape is not None and tuple(arr.shape) != shape:
                raise InvalidInputError(
                    f"invalid input: array has shape {tuple(arr.shape)}, expected {shape}"
                )
        elif arr.ndim == 1:
            if shape is None:
                raise InvalidInputError(
                    "invalid input: flat buffers need an explicit (nx, ny, nz) shape"
                )
            need = shape[0] * shape[1] * shape[2]
            if arr.size != need:
                raise InvalidInputError(
                    f"invalid input: buffer holds {arr.size} elements "
                    f"but shape {shape} needs {need}"
                )
            arr = arr.reshape(shape, order="F")
        else:
            raise InvalidInputError(
                f"invalid input: expected a 3D or flat buffer, got {arr.ndim} dimensions"
            )

        view = arr.view()
        view.flags.writeable = False
        object.__setattr__(self, "array", view)
        object.__setattr__(self, "shape", tuple(view.shape))

    def __setattr__(self, name, value):
        raise AttributeError("ArrayView3D is read-only")

    def __repr__(self):
        return f"ArrayView3D(shape={self.shape}, dtype={self.array.dtype})"


def _check_shape(shape):
    try:
        shape = tuple(int(s) for s in shape)
    except (TypeError, ValueError):
        raise InvalidInputError(f"invalid input: bad shape {shape!r}") from None
    if len(shape) != 3 or any(s < 1 for s in shape):
        raise InvalidInputError(
            f"invalid input: shape must be three positive extents, got {shape}"
        )
    return shape


def _as_view(obj, what):
    if isinstance(obj, ArrayView3D):
        return obj
    try:
        return ArrayView3D(obj)
    except InvalidInputError as e:
        raise InvalidInputError(f"{e} (while wrapping {what})") from None


def local_gamma(image, mask, gamma):
    """Foreground-normalized gamma remap of ``image`` through ``mask``.

    Returns a newly allocated float64 array; the inputs are untouched.
    Values agree bit-for-bit with the core transform on the same data
    (32-bit inputs are promoted to float64 first).
    """
    img = _as_view(image, "image")
    msk = _as_view(mask, "mask")
    vol = Volume3D(np.asarray(img.array, dtype=np.float64))
    binary = Mask3D(np.asarray(msk.array, dtype=np.float64))
    out = _core_gamma_local(vol, binary, gamma)
    return out.data.copy(order="C")


def sample_gammas(spec, n, seed):
    """Draw ``n`` gamma values from ``spec`` (None for the default mixture).

    ``spec`` may be a spec object or the dict form the config files use.
    The sequence is exactly what the CLI's sample-gamma command prints
    for the same spec and seed.
    """
    if spec is None:
        resolved = DEFAULT_GAMMA_SPEC
    elif isinstance(spec, _SPEC_TYPES):
        resolved = spec
    elif isinstance(spec, dict):
        resolved = spec_from_dict(spec)
    else:
        raise InvalidParameterError(
            f"invalid parameter: spec must be a sampler spec or dict, got {type(spec).__name__}"
        )
    return make_sampler(resolved, int(seed)).sample_many(int(n))


def apply_pipeline_config(study, config, sample_index):
    """Run a JSON pipeline config over a dict of channel arrays.

    ``study`` maps channel names to 3D arrays, optionally with the mask
    under ``"mask"``. Returns a new dict of newly allocated float64
    arrays, keyed like the input; the mask key is present only when one
    was supplied. Identical seeds and configs reproduce the augment
    command's outputs number-for-number.
    """
    if not isinstance(config, str):
        raise ConfigError(
            f"config error: config must be a JSON string, got {type(config).__name__}"
        )
    try:
        doc = json.loads(config)
    except json.JSONDecodeError as e:
        raise ConfigError(f"config error: config is not valid JSON ({e})") from e
    pipeline = PipelineConfig.from_dict(doc)

    if not isinstance(study, dict) or not study:
        raise InvalidInputError("invalid input: study must be a non-empty dict of arrays")
    views = {str(name): _as_view(arr, f"channel {name!r}") for name, arr in study.items()}
    mask_view = views.pop(MASK_KEY, None)
    if not views:
        raise InvalidInputError(
            "invalid input: study needs at least one image channel besides the mask"
        )

    channels = {
        name: Volume3D(np.asarray(v.array, dtype=np.float64)) for name, v in views.items()
    }
    if mask_view is None:
        dims = next(iter(channels.values())).dims
        binary = Mask3D(np.zeros(dims, dtype=np.uint8))
    else:
        binary = Mask3D(np.asarray(mask_view.array, dtype=np.float64))

    out_study, _ = apply_pipeline_recorded(Study(channels, binary), pipeline, sample_index)

    out = {name: out_study.channels[name].data.copy(order="C") for name in views}
    if mask_view is not None:
        out[MASK_KEY] = np.ascontiguousarray(out_study.mask.data, dtype=np.float64)
    return out
