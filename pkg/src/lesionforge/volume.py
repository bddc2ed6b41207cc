"""Grid-aligned volume, mask, and study containers plus pointwise primitives.

Conventions
-----------
* Voxel data live in numpy arrays of shape ``(nx, ny, nz)`` stored
  x-fastest (Fortran order), matching the NIfTI-1 on-disk layout.
* All arithmetic is double precision regardless of on-disk storage.
* Containers are immutable: arrays are made read-only at construction
  and every operation returns a new value, so instances are safe to
  share across threads.
"""

from __future__ import annotations

from dataclasses import dataclass
from types import MappingProxyType
from typing import Iterable, Mapping

import numpy as np

from .errors import EmptyForegroundError, InvalidInputError, NonBinaryMaskError

Triple = tuple[int, int, int]
Spacing = tuple[float, float, float]


def _freeze(arr: np.ndarray) -> np.ndarray:
    """Snapshot caller-supplied data: copy unless already immutable."""
    out = np.asfortranarray(arr)
    if out is arr and arr.flags.writeable:
        out = arr.copy(order="F")
    out.flags.writeable = False
    return out


def _freeze_owned(arr: np.ndarray) -> np.ndarray:
    """Freeze a freshly computed, unaliased array without copying."""
    out = np.asfortranarray(arr)
    out.flags.writeable = False
    return out


def _as_dims(shape: Iterable[int]) -> Triple:
    dims = tuple(int(n) for n in shape)
    if len(dims) != 3:
        raise InvalidInputError(f"invalid input: expected 3 dims, got {dims}")
    if any(n <= 0 for n in dims):
        raise InvalidInputError(f"invalid input: dims must be positive, got {dims}")
    return dims  # type: ignore[return-value]


@dataclass(frozen=True, eq=False)
class Volume3D:
    """Dense real-valued scalar field on a 3D voxel grid.

    ``data`` is coerced to float64, shape ``(nx, ny, nz)``, Fortran
    order, read-only.  ``spacing`` is millimetres per voxel along each
    axis and must be strictly positive.
    """

    data: np.ndarray
    spacing: Spacing = (1.0, 1.0, 1.0)

    def __post_init__(self):
        arr = np.asfortranarray(self.data, dtype=np.float64)
        _as_dims(arr.shape)
        if not np.isfinite(arr).all():
            raise InvalidInputError("invalid input: volume data must be finite (no NaN/Inf)")
        spacing = tuple(float(s) for s in self.spacing)
        if len(spacing) != 3 or any(s <= 0 for s in spacing):
            raise InvalidInputError(
                f"invalid input: spacing must be 3 strictly positive reals, got {self.spacing}"
            )
        object.__setattr__(self, "data", _freeze(arr))
        object.__setattr__(self, "spacing", spacing)

    @classmethod
    def from_flat(cls, values, dims: Triple, spacing: Spacing = (1.0, 1.0, 1.0)) -> "Volume3D":
        """Build a volume from x-fastest linear values."""
        dims = _as_dims(dims)
        arr = np.asarray(values, dtype=np.float64)
        if arr.ndim != 1 or arr.size != int(np.prod(dims)):
            raise InvalidInputError(
                f"invalid input: flat data of length {arr.size} does not fill dims {dims}"
            )
        return cls(arr.reshape(dims, order="F"), spacing)

    @property
    def dims(self) -> Triple:
        return self.data.shape  # type: ignore[return-value]

    @property
    def nvox(self) -> int:
        return self.data.size

    def flat(self) -> np.ndarray:
        """Values in x-fastest linear order."""
        return self.data.ravel(order="F")


def _wrap(arr: np.ndarray, spacing: Spacing) -> Volume3D:
    """Internal constructor for freshly computed float64 arrays."""
    vol = object.__new__(Volume3D)
    if not np.isfinite(arr).all():
        raise InvalidInputError("invalid input: operation produced non-finite values")
    object.__setattr__(vol, "data", _freeze_owned(arr))
    object.__setattr__(vol, "spacing", spacing)
    return vol


@dataclass(frozen=True, eq=False)
class Mask3D:
    """Binary field on a voxel grid; every element is exactly 0 or 1."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data)
        _as_dims(arr.shape)
        if arr.dtype != np.uint8:
            bad = _first_non_binary(arr)
            if bad is not None:
                raise NonBinaryMaskError(*bad)
            arr = arr.astype(np.uint8)
        elif arr.size and int(arr.max(initial=0)) > 1:
            bad = _first_non_binary(arr)
            raise NonBinaryMaskError(*bad)  # type: ignore[misc]
        object.__setattr__(self, "data", _freeze(arr))

    @property
    def dims(self) -> Triple:
        return self.data.shape  # type: ignore[return-value]

    @property
    def foreground_count(self) -> int:
        return int(np.count_nonzero(self.data))

    def foreground(self) -> np.ndarray:
        """Boolean array marking the foreground set."""
        return self.data != 0

    def flat(self) -> np.ndarray:
        return self.data.ravel(order="F")


def _first_non_binary(arr: np.ndarray):
    """Return (x-fastest linear index, value) of the first element not in {0, 1}."""
    flat = arr.ravel(order="F")
    ok = (flat == 0) | (flat == 1)
    if ok.all():
        return None
    idx = int(np.argmin(ok))
    return idx, flat[idx].item()


def validate_mask(raw: Volume3D) -> Mask3D:
    """Convert a volume to a mask, requiring every value to be exactly 0 or 1."""
    bad = _first_non_binary(raw.data)
    if bad is not None:
        raise NonBinaryMaskError(*bad)
    return Mask3D(raw.data.astype(np.uint8))


def _check_same_dims(*dims: Triple):
    if any(d != dims[0] for d in dims[1:]):
        raise InvalidInputError(f"invalid input: dims mismatch {dims}")


def minmax(vol: Volume3D) -> tuple[float, float]:
    """Global minimum and maximum of a volume."""
    if vol.nvox == 0:
        raise InvalidInputError("invalid input: empty volume")
    return float(vol.data.min()), float(vol.data.max())


def minmax_masked(vol: Volume3D, mask: Mask3D) -> tuple[float, float]:
    """Extrema of the volume restricted to the mask foreground."""
    _check_same_dims(vol.dims, mask.dims)
    fg = mask.foreground()
    if not fg.any():
        raise EmptyForegroundError("empty foreground: mask has no voxel equal to 1")
    vals = vol.data[fg]
    return float(vals.min()), float(vals.max())


def pointwise_mix(a: Volume3D, b: Volume3D, mask: Mask3D) -> Volume3D:
    """Select ``b`` where the mask is 1 and ``a`` elsewhere, bit-exactly."""
    _check_same_dims(a.dims, b.dims, mask.dims)
    out = np.where(mask.foreground(), b.data, a.data)
    return _wrap(out, a.spacing)


@dataclass(frozen=True, eq=False)
class Study:
    """Named co-registered channels plus an optional lesion mask.

    All channels must share dims and spacing; the mask, when present,
    shares the dims.
    """

    channels: Mapping[str, Volume3D]
    mask: Mask3D | None = None

    def __post_init__(self):
        chans = dict(self.channels)
        if not chans:
            raise InvalidInputError("invalid input: study needs at least one channel")
        first = next(iter(chans.values()))
        for name, vol in chans.items():
            if not isinstance(vol, Volume3D):
                raise InvalidInputError(f"invalid input: channel {name!r} is not a Volume3D")
            if vol.dims != first.dims:
                raise InvalidInputError(
                    f"invalid input: channel {name!r} dims {vol.dims} != {first.dims}"
                )
            if vol.spacing != first.spacing:
                raise InvalidInputError(
                    f"invalid input: channel {name!r} spacing {vol.spacing} != {first.spacing}"
                )
        if self.mask is not None and self.mask.dims != first.dims:
            raise InvalidInputError(
                f"invalid input: mask dims {self.mask.dims} != channel dims {first.dims}"
            )
        object.__setattr__(self, "channels", MappingProxyType(chans))

    @property
    def dims(self) -> Triple:
        return next(iter(self.channels.values())).dims

    @property
    def spacing(self) -> Spacing:
        return next(iter(self.channels.values())).spacing

    @property
    def channel_names(self) -> tuple[str, ...]:
        return tuple(self.channels)

    def with_channels(self, channels: Mapping[str, Volume3D], mask: Mask3D | None = None) -> "Study":
        return Study(channels, self.mask if mask is None else mask)


def extract_patch(study: Study, origin: Triple, size: Triple) -> Study:
    """Crop all channels (and mask) identically to ``size`` at ``origin``."""
    origin = tuple(int(v) for v in origin)
    size = tuple(int(v) for v in size)
    dims = study.dims
    if len(origin) != 3 or len(size) != 3 or any(s <= 0 for s in size):
        raise InvalidInputError(f"invalid input: bad origin {origin} or size {size}")
    for o, s, d in zip(origin, size, dims):
        if o < 0 or o + s > d:
            raise InvalidInputError(
                f"invalid input: patch origin {origin} size {size} out of bounds for dims {dims}"
            )
    sl = tuple(slice(o, o + s) for o, s in zip(origin, size))
    channels = {
        name: _wrap(vol.data[sl].copy(order="F"), vol.spacing)
        for name, vol in study.channels.items()
    }
    mask = Mask3D(study.mask.data[sl]) if study.mask is not None else None
    return Study(channels, mask)
