"""NIfTI-1 single-file reader/writer.

Supports ``.nii`` and ``.nii.gz`` single-file volumes (magic ``n+1\\0``)
with the standard 348-byte header.  Header endianness is detected from
``dim[0]``; voxel payloads are decoded from ``vox_offset`` in x-fastest
order and mapped to float64 working precision, applying the
slope/intercept scaling when ``scl_slope`` is set.  Orientation fields
(qform/sform) are carried through verbatim and never interpreted: all
processing downstream is voxel-space.

The writer always emits little-endian files with ``scl_slope=1`` and
``scl_inter=0`` so float64 payloads round-trip bit-identically.
"""

from __future__ import annotations

import gzip
import io
import struct
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import (
    CorruptFileError,
    CorruptHeaderError,
    FormatError,
    InvalidParameterError,
    UnsupportedDatatypeError,
)
from .volume import Volume3D, _wrap

HEADER_SIZE = 348
MAGIC_SINGLE = b"n+1\x00"
MAGIC_PAIR = b"ni1\x00"

# supported NIfTI-1 datatype codes
DT_UINT8 = 2
DT_INT16 = 4
DT_INT32 = 8
DT_FLOAT32 = 16
DT_FLOAT64 = 64

_DTYPES = {
    DT_UINT8: np.dtype(np.uint8),
    DT_INT16: np.dtype(np.int16),
    DT_INT32: np.dtype(np.int32),
    DT_FLOAT32: np.dtype(np.float32),
    DT_FLOAT64: np.dtype(np.float64),
}

_WRITE_CODES = {"float32": (DT_FLOAT32, 32), "float64": (DT_FLOAT64, 64)}

# field layout of the 348-byte header, in order
_STRUCT_FIELDS = (
    ("sizeof_hdr", "i"),
    ("data_type", "10s"),
    ("db_name", "18s"),
    ("extents", "i"),
    ("session_error", "h"),
    ("regular", "B"),
    ("dim_info", "B"),
    ("dim", "8h"),
    ("intent_p1", "f"),
    ("intent_p2", "f"),
    ("intent_p3", "f"),
    ("intent_code", "h"),
    ("datatype", "h"),
    ("bitpix", "h"),
    ("slice_start", "h"),
    ("pixdim", "8f"),
    ("vox_offset", "f"),
    ("scl_slope", "f"),
    ("scl_inter", "f"),
    ("slice_end", "h"),
    ("slice_code", "B"),
    ("xyzt_units", "B"),
    ("cal_max", "f"),
    ("cal_min", "f"),
    ("slice_duration", "f"),
    ("toffset", "f"),
    ("glmax", "i"),
    ("glmin", "i"),
    ("descrip", "80s"),
    ("aux_file", "24s"),
    ("qform_code", "h"),
    ("sform_code", "h"),
    ("quatern_b", "f"),
    ("quatern_c", "f"),
    ("quatern_d", "f"),
    ("qoffset_x", "f"),
    ("qoffset_y", "f"),
    ("qoffset_z", "f"),
    ("srow_x", "4f"),
    ("srow_y", "4f"),
    ("srow_z", "4f"),
    ("intent_name", "16s"),
    ("magic", "4s"),
)

_STRUCT_FORMAT = "".join(fmt for _, fmt in _STRUCT_FIELDS)
assert struct.calcsize("<" + _STRUCT_FORMAT) == HEADER_SIZE

_DIM0_OFFSET = 40  # byte offset of dim[0] within the header


@dataclass(eq=True)
class NiftiHeader:
    """Parsed NIfTI-1 header with orientation fields preserved verbatim."""

    sizeof_hdr: int = HEADER_SIZE
    dim: tuple[int, ...] = (3, 1, 1, 1, 1, 1, 1, 1)
    datatype: int = DT_FLOAT64
    bitpix: int = 64
    pixdim: tuple[float, ...] = (1.0, 1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0)
    vox_offset: float = 352.0
    scl_slope: float = 1.0
    scl_inter: float = 0.0
    magic: bytes = MAGIC_SINGLE
    endianness: str = "little"
    dim_info: int = 0
    intent_p1: float = 0.0
    intent_p2: float = 0.0
    intent_p3: float = 0.0
    intent_code: int = 0
    slice_start: int = 0
    slice_end: int = 0
    slice_code: int = 0
    xyzt_units: int = 2  # millimetres
    cal_max: float = 0.0
    cal_min: float = 0.0
    slice_duration: float = 0.0
    toffset: float = 0.0
    descrip: bytes = b""
    aux_file: bytes = b""
    qform_code: int = 0
    sform_code: int = 0
    quatern_b: float = 0.0
    quatern_c: float = 0.0
    quatern_d: float = 0.0
    qoffset_x: float = 0.0
    qoffset_y: float = 0.0
    qoffset_z: float = 0.0
    srow_x: tuple[float, ...] = (0.0, 0.0, 0.0, 0.0)
    srow_y: tuple[float, ...] = (0.0, 0.0, 0.0, 0.0)
    srow_z: tuple[float, ...] = (0.0, 0.0, 0.0, 0.0)
    intent_name: bytes = b""

    @property
    def shape3d(self) -> tuple[int, int, int]:
        return tuple(int(d) for d in self.dim[1:4])

    @property
    def spacing3d(self) -> tuple[float, float, float]:
        # pixdim entries can legally be 0 or carry the qfac sign; spacing
        # used for processing must be strictly positive.
        return tuple(abs(float(p)) if p != 0 else 1.0 for p in self.pixdim[1:4])


def parse_header(buf: bytes) -> NiftiHeader:
    """Parse a 348-byte NIfTI-1 header, detecting endianness from dim[0]."""
    if len(buf) < HEADER_SIZE:
        raise CorruptHeaderError(
            f"corrupt header: need {HEADER_SIZE} bytes, got {len(buf)}"
        )
    endianness = None
    for prefix, name in (("<", "little"), (">", "big")):
        dim0 = struct.unpack_from(prefix + "h", buf, _DIM0_OFFSET)[0]
        if 1 <= dim0 <= 7:
            endianness = (prefix, name)
            break
    if endianness is None:
        raise CorruptHeaderError(
            "corrupt header: dim[0] not in [1, 7] under either byte order"
        )
    prefix, name = endianness
    values = struct.unpack_from(prefix + _STRUCT_FORMAT, buf, 0)

    fields: dict = {}
    pos = 0
    for field_name, fmt in _STRUCT_FIELDS:
        n = struct.calcsize(fmt) // struct.calcsize(fmt[-1])
        if fmt[-1] == "s":
            n = 1
        chunk = values[pos : pos + n]
        fields[field_name] = chunk[0] if n == 1 else tuple(chunk)
        pos += n

    if fields["sizeof_hdr"] != HEADER_SIZE:
        raise CorruptHeaderError(
            f"corrupt header: sizeof_hdr is {fields['sizeof_hdr']}, must be {HEADER_SIZE}"
        )
    magic = fields["magic"]
    if magic == MAGIC_PAIR:
        raise FormatError("format error: two-file NIfTI-1 (.hdr/.img pairs) is not supported")
    if magic != MAGIC_SINGLE:
        raise FormatError(f"format error: unsupported magic {magic!r}")

    return NiftiHeader(
        sizeof_hdr=fields["sizeof_hdr"],
        dim=fields["dim"],
        datatype=fields["datatype"],
        bitpix=fields["bitpix"],
        pixdim=fields["pixdim"],
        vox_offset=fields["vox_offset"],
        scl_slope=fields["scl_slope"],
        scl_inter=fields["scl_inter"],
        magic=magic,
        endianness=name,
        dim_info=fields["dim_info"],
        intent_p1=fields["intent_p1"],
        intent_p2=fields["intent_p2"],
        intent_p3=fields["intent_p3"],
        intent_code=fields["intent_code"],
        slice_start=fields["slice_start"],
        slice_end=fields["slice_end"],
        slice_code=fields["slice_code"],
        xyzt_units=fields["xyzt_units"],
        cal_max=fields["cal_max"],
        cal_min=fields["cal_min"],
        slice_duration=fields["slice_duration"],
        toffset=fields["toffset"],
        descrip=fields["descrip"].rstrip(b"\x00"),
        aux_file=fields["aux_file"].rstrip(b"\x00"),
        qform_code=fields["qform_code"],
        sform_code=fields["sform_code"],
        quatern_b=fields["quatern_b"],
        quatern_c=fields["quatern_c"],
        quatern_d=fields["quatern_d"],
        qoffset_x=fields["qoffset_x"],
        qoffset_y=fields["qoffset_y"],
        qoffset_z=fields["qoffset_z"],
        srow_x=fields["srow_x"],
        srow_y=fields["srow_y"],
        srow_z=fields["srow_z"],
        intent_name=fields["intent_name"].rstrip(b"\x00"),
    )


def _read_bytes(path) -> bytes:
    path = Path(path)
    if path.suffix == ".gz":
        with gzip.open(path, "rb") as f:
            return f.read()
    with open(path, "rb") as f:
        return f.read()


def read_volume(path) -> tuple[Volume3D, NiftiHeader]:
    """Read a single-file NIfTI-1 volume into float64 working precision."""
    raw = _read_bytes(path)
    header = parse_header(raw[:HEADER_SIZE] if len(raw) >= HEADER_SIZE else raw)

    ndim = header.dim[0]
    if not (ndim == 3 or (ndim == 4 and header.dim[4] == 1)):
        raise FormatError(
            f"format error: need a 3D volume (or 4D with a singleton 4th axis), got dim {header.dim}"
        )
    dtype = _DTYPES.get(header.datatype)
    if dtype is None:
        raise UnsupportedDatatypeError(header.datatype)

    shape = header.shape3d
    count = int(np.prod(shape))
    offset = int(round(header.vox_offset))
    if offset < HEADER_SIZE:
        raise CorruptFileError(f"corrupt file: vox_offset {offset} overlaps the header")
    nbytes = count * dtype.itemsize
    payload = raw[offset : offset + nbytes]
    if len(payload) < nbytes:
        raise CorruptFileError(
            f"corrupt file: payload truncated, need {nbytes} bytes at offset {offset}, "
            f"got {len(payload)}"
        )

    byte_order = "<" if header.endianness == "little" else ">"
    arr = np.frombuffer(payload, dtype=dtype.newbyteorder(byte_order)).astype(np.float64)
    slope, inter = float(header.scl_slope), float(header.scl_inter)
    if slope != 0.0 and not (slope == 1.0 and inter == 0.0):
        arr = arr * slope + inter
    if not np.isfinite(arr).all():
        raise CorruptFileError(f"corrupt file: non-finite voxel values in {path}")
    vol = _wrap(arr.reshape(shape, order="F"), header.spacing3d)
    return vol, header


def _orientation_fields(header: NiftiHeader) -> dict:
    names = (
        "dim_info", "intent_p1", "intent_p2", "intent_p3", "intent_code",
        "xyzt_units", "cal_max", "cal_min", "toffset", "descrip", "aux_file",
        "qform_code", "sform_code", "quatern_b", "quatern_c", "quatern_d",
        "qoffset_x", "qoffset_y", "qoffset_z", "srow_x", "srow_y", "srow_z",
        "intent_name",
    )
    return {name: getattr(header, name) for name in names}


def write_volume(
    vol: Volume3D,
    path,
    datatype: str = "float64",
    header: NiftiHeader | None = None,
    gzip_level: int = 6,
) -> None:
    """Write a little-endian single-file NIfTI-1 volume.

    ``datatype`` is ``"float32"`` or ``"float64"``.  When ``header`` is
    given its orientation fields are copied verbatim onto the output.
    ``.gz`` paths are gzip-compressed with a pinned mtime of 0 so equal
    inputs produce byte-identical files.
    """
    code_bitpix = _WRITE_CODES.get(datatype)
    if code_bitpix is None:
        raise InvalidParameterError(
            f"invalid parameter: datatype must be one of {sorted(_WRITE_CODES)}, got {datatype!r}"
        )
    code, bitpix = code_bitpix

    out = NiftiHeader(
        dim=(3, *vol.dims, 1, 1, 1, 1),
        datatype=code,
        bitpix=bitpix,
        pixdim=(1.0, *(float(s) for s in vol.spacing), 0.0, 0.0, 0.0, 0.0),
        vox_offset=float(HEADER_SIZE + 4),
        scl_slope=1.0,
        scl_inter=0.0,
        magic=MAGIC_SINGLE,
        endianness="little",
    )
    if header is not None:
        out = replace(out, **_orientation_fields(header))

    np_dtype = "<f4" if datatype == "float32" else "<f8"
    payload = vol.data.astype(np_dtype).tobytes(order="F")
    blob = _pack_header(out) + b"\x00\x00\x00\x00" + payload

    path = Path(path)
    if path.suffix == ".gz":
        buf = io.BytesIO()
        with gzip.GzipFile(fileobj=buf, mode="wb", compresslevel=gzip_level, mtime=0) as gz:
            gz.write(blob)
        path.write_bytes(buf.getvalue())
    else:
        path.write_bytes(blob)


def _pack_header(h: NiftiHeader) -> bytes:
    values = []
    for name, fmt in _STRUCT_FIELDS:
        if name in ("data_type", "db_name"):
            values.append(b"")
        elif name in ("extents", "session_error", "regular", "glmax", "glmin"):
            # ANALYZE-7.5 relics; always zero on output
            values.append(0)
        else:
            v = getattr(h, name)
            if isinstance(v, tuple):
                values.extend(v)
            else:
                values.append(v)
    return struct.pack("<" + _STRUCT_FORMAT, *values)
