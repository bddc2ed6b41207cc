"""Shared synthetic-data builders for the test suite."""

import numpy as np

from lesionforge import Mask3D, Study, Volume3D


def random_volume(rng, dims, lo=0.0, hi=1.0, spacing=(1.0, 1.0, 1.0)):
    data = lo + (hi - lo) * rng.random(dims)
    return Volume3D(data, spacing=spacing)


def random_mask(rng, dims, p=0.3, nonempty=True):
    data = (rng.random(dims) < p).astype(np.uint8)
    if nonempty and data.sum() == 0:
        ix = tuple(rng.integers(0, d) for d in dims)
        data[ix] = 1
    return Mask3D(data)


def empty_mask(dims):
    return Mask3D(np.zeros(dims, dtype=np.uint8))


def random_dims(rng, lo=2, hi=8):
    return tuple(int(rng.integers(lo, hi + 1)) for _ in range(3))


def make_study(rng, dims, channels=("b0", "b1000", "adc", "flair"), with_mask=True,
               spacing=(1.0, 1.0, 1.0)):
    vols = {name: random_volume(rng, dims, spacing=spacing) for name in channels}
    mask = random_mask(rng, dims) if with_mask else None
    return Study(vols, mask)


def smooth_volume(dims, spacing=(1.0, 1.0, 1.0), phase=0.0):
    """Deterministic smooth field; compresses well, so file tests stay fast."""
    nx, ny, nz = dims
    x = np.linspace(0.0, 1.0, nx).reshape(nx, 1, 1)
    y = np.linspace(0.0, 1.0, ny).reshape(1, ny, 1)
    z = np.linspace(0.0, 1.0, nz).reshape(1, 1, nz)
    data = (
        100.0 * np.sin(2.0 * np.pi * (x + phase))
        + 50.0 * np.cos(2.0 * np.pi * (y + 0.5 * phase))
        + 25.0 * z
        + 200.0
    )
    return Volume3D(np.ascontiguousarray(data), spacing=spacing)


def box_mask(dims, lo_frac=0.3, hi_frac=0.6):
    """Axis-aligned box of foreground in the volume interior."""
    data = np.zeros(dims, dtype=np.uint8)
    sl = tuple(slice(int(d * lo_frac), max(int(d * lo_frac) + 1, int(d * hi_frac)))
               for d in dims)
    data[sl] = 1
    return Mask3D(data)
