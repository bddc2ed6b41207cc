"""Axial slice previews as 8-bit grayscale PGM images.

Renders an original slice next to global- and local-gamma transforms of
the same slice, one PGM per image.  The slice is chosen at the axial
index with the most foreground voxels (mid-lesion); with no usable mask
the volume midpoint is used and flagged in the returned metadata.  PGM
(binary P5) keeps the goldens bit-stable without compression libraries.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .errors import InvalidParameterError
from .gamma import gamma_global, gamma_local
from .volume import Mask3D, Volume3D


def window_slice(slab: np.ndarray) -> np.ndarray:
    """Min-max window a 2-D float slice to uint8 [0, 255]."""
    slab = np.asarray(slab, dtype=np.float64)
    mn = float(slab.min())
    mx = float(slab.max())
    if mx - mn <= 0.0:
        return np.zeros(slab.shape, dtype=np.uint8)
    scaled = np.rint((slab - mn) * (255.0 / (mx - mn)))
    return np.clip(scaled, 0, 255).astype(np.uint8)


def write_pgm(path, img: np.ndarray) -> None:
    """Write a 2-D uint8 array as binary PGM (P5)."""
    img = np.asarray(img)
    if img.ndim != 2 or img.dtype != np.uint8:
        raise InvalidParameterError(
            f"invalid parameter: PGM image must be 2-D uint8, got "
            f"ndim={img.ndim} dtype={img.dtype}"
        )
    nx, ny = img.shape
    header = f"P5\n{nx} {ny}\n255\n".encode("ascii")
    # raster rows run along y, columns along x
    Path(path).write_bytes(header + img.T.tobytes(order="C"))


def mid_lesion_z(mask: Mask3D | None, nz: int) -> tuple[int, bool]:
    """Pick the axial index with most foreground; (nz//2, True) if none."""
    if mask is None:
        return nz // 2, True
    counts = mask.data.sum(axis=(0, 1))
    if counts.sum() == 0:
        return nz // 2, True
    return int(np.argmax(counts)), False


def axial_slice(vol: Volume3D, z: int) -> np.ndarray:
    return np.asarray(vol.data[:, :, z])


def generate_previews(
    vol: Volume3D,
    mask: Mask3D | None,
    gammas,
    out_dir,
    stem: str,
) -> dict:
    """Write original/global/local preview PGMs for each gamma.

    Returns metadata: slice index, whether the midpoint fallback fired,
    and the written file paths in order (original, then global/local per
    gamma).
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    gammas = [float(g) for g in gammas]

    z, used_midpoint = mid_lesion_z(mask, vol.dims[2])
    files: list[str] = []

    def emit(name: str, volume: Volume3D) -> None:
        path = out_dir / f"{stem}_{name}.pgm"
        write_pgm(path, window_slice(axial_slice(volume, z)))
        files.append(str(path))

    emit("original", vol)
    if mask is None:
        # no mask on disk: the foreground rule treats this as all-ones,
        # collapsing local to global
        mask = Mask3D(np.zeros(vol.dims, dtype=np.uint8))
    for g in gammas:
        emit(f"global_g{g:g}", gamma_global(vol, g))
    for g in gammas:
        emit(f"local_g{g:g}", gamma_local(vol, mask, g))

    return {"z": z, "used_midpoint_fallback": used_midpoint, "files": files}


def read_pgm(path) -> np.ndarray:
    """Read a binary P5 PGM back into a 2-D uint8 array (x, y indexed)."""
    raw = Path(path).read_bytes()
    if not raw.startswith(b"P5"):
        raise InvalidParameterError(f"invalid parameter: {path} is not a binary PGM")
    # header: magic, width, height, maxval, single whitespace, raster
    parts = raw.split(b"\n", 3)
    nx, ny = (int(t) for t in parts[1].split())
    maxval = int(parts[2])
    if maxval != 255:
        raise InvalidParameterError(f"invalid parameter: unsupported PGM maxval {maxval}")
    img = np.frombuffer(parts[3][: nx * ny], dtype=np.uint8).reshape(ny, nx)
    return img.T.copy()
