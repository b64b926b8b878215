"""Minimal NIfTI-1 reader/writer.

Covers exactly what the rest of the package needs: single-file little-endian
NIfTI-1 (.nii / .nii.gz), 3D volumes, datatypes uint8/int16/int32/float32/
float64. The voxel->world affine is taken from the qform when present,
otherwise the sform, otherwise a diagonal built from pixdim. The writer emits
the affine as an sform only (a quaternion round-trip is not bit-exact).
"""
from __future__ import annotations

import gzip
from pathlib import Path

import numpy as np

HEADER_SIZE = 348
MAGIC_SINGLE = b"n+1\x00"
MAGIC_PAIR = b"ni1\x00"

# NIfTI datatype code <-> numpy dtype (little-endian)
DTYPE_FROM_CODE = {
    2: np.dtype("<u1"),
    4: np.dtype("<i2"),
    8: np.dtype("<i4"),
    16: np.dtype("<f4"),
    64: np.dtype("<f8"),
}
CODE_FROM_KIND = {
    ("u", 1): 2,
    ("i", 2): 4,
    ("i", 4): 8,
    ("f", 4): 16,
    ("f", 8): 64,
}

_HEADER_DTYPE = np.dtype(
    [
        ("sizeof_hdr", "<i4"),
        ("data_type", "S10"),
        ("db_name", "S18"),
        ("extents", "<i4"),
        ("session_error", "<i2"),
        ("regular", "S1"),
        ("dim_info", "u1"),
        ("dim", "<i2", 8),
        ("intent_p1", "<f4"),
        ("intent_p2", "<f4"),
        ("intent_p3", "<f4"),
        ("intent_code", "<i2"),
        ("datatype", "<i2"),
        ("bitpix", "<i2"),
        ("slice_start", "<i2"),
        ("pixdim", "<f4", 8),
        ("vox_offset", "<f4"),
        ("scl_slope", "<f4"),
        ("scl_inter", "<f4"),
        ("slice_end", "<i2"),
        ("slice_code", "u1"),
        ("xyzt_units", "u1"),
        ("cal_max", "<f4"),
        ("cal_min", "<f4"),
        ("slice_duration", "<f4"),
        ("toffset", "<f4"),
        ("glmax", "<i4"),
        ("glmin", "<i4"),
        ("descrip", "S80"),
        ("aux_file", "S24"),
        ("qform_code", "<i2"),
        ("sform_code", "<i2"),
        ("quatern_b", "<f4"),
        ("quatern_c", "<f4"),
        ("quatern_d", "<f4"),
        ("qoffset_x", "<f4"),
        ("qoffset_y", "<f4"),
        ("qoffset_z", "<f4"),
        ("srow_x", "<f4", 4),
        ("srow_y", "<f4", 4),
        ("srow_z", "<f4", 4),
        ("intent_name", "S16"),
        ("magic", "S4"),
    ]
)
assert _HEADER_DTYPE.itemsize == HEADER_SIZE


class NiftiError(ValueError):
    """Malformed or unsupported NIfTI file."""


def _read_raw(path: str | Path) -> bytes:
    path = Path(path)
    with open(path, "rb") as f:
        head = f.read(2)
    if head == b"\x1f\x8b":
        with gzip.open(path, "rb") as f:
            return f.read()
    with open(path, "rb") as f:
        return f.read()


def _quaternion_affine(hdr) -> np.ndarray:
    b = float(hdr["quatern_b"])
    c = float(hdr["quatern_c"])
    d = float(hdr["quatern_d"])
    a = np.sqrt(max(0.0, 1.0 - (b * b + c * c + d * d)))
    rot = np.array(
        [
            [a * a + b * b - c * c - d * d, 2 * (b * c - a * d), 2 * (b * d + a * c)],
            [2 * (b * c + a * d), a * a + c * c - b * b - d * d, 2 * (c * d - a * b)],
            [2 * (b * d - a * c), 2 * (c * d + a * b), a * a + d * d - b * b - c * c],
        ]
    )
    pixdim = np.asarray(hdr["pixdim"], dtype=np.float64)
    qfac = -1.0 if pixdim[0] == -1.0 else 1.0
    scales = np.array([pixdim[1], pixdim[2], pixdim[3] * qfac])
    affine = np.eye(4)
    affine[:3, :3] = rot * scales
    affine[:3, 3] = [hdr["qoffset_x"], hdr["qoffset_y"], hdr["qoffset_z"]]
    return affine


def read_nifti(path: str | Path) -> tuple[np.ndarray, np.ndarray]:
    """Read a 3D NIfTI-1 file.

    Returns (data, affine): data indexed [x, y, z] with the on-disk dtype
    (scl slope/intercept applied if non-trivial, which promotes to float64),
    affine the 4x4 voxel->world map in mm. qform is preferred over sform
    when both are present.
    """
    raw = _read_raw(path)
    if len(raw) < HEADER_SIZE:
        raise NiftiError(f"{path}: file shorter than a NIfTI-1 header")
    hdr = np.frombuffer(raw[:HEADER_SIZE], dtype=_HEADER_DTYPE)[0]
    if int(hdr["sizeof_hdr"]) != HEADER_SIZE:
        raise NiftiError(f"{path}: bad magic number (not little-endian NIfTI-1)")
    magic = bytes(hdr["magic"])  # numpy strips the trailing NUL from S4 fields
    if magic == MAGIC_PAIR.rstrip(b"\x00"):
        raise NiftiError(f"{path}: two-file (.hdr/.img) NIfTI is not supported")
    if magic != MAGIC_SINGLE.rstrip(b"\x00"):
        raise NiftiError(f"{path}: bad magic number {magic!r}")
    code = int(hdr["datatype"])
    if code not in DTYPE_FROM_CODE:
        raise NiftiError(f"{path}: unsupported datatype code {code}")
    dim = np.asarray(hdr["dim"], dtype=int)
    ndim = dim[0]
    if ndim < 3 or any(d != 1 for d in dim[4 : 1 + ndim]):
        raise NiftiError(f"{path}: only 3D volumes are supported (dim={dim.tolist()})")
    shape = tuple(int(d) for d in dim[1:4])
    if any(d < 1 for d in shape):
        raise NiftiError(f"{path}: non-positive dimension in {shape}")

    dtype = DTYPE_FROM_CODE[code]
    offset = int(hdr["vox_offset"])
    count = int(np.prod(shape))
    if offset + count * dtype.itemsize > len(raw):
        raise NiftiError(f"{path}: file truncated (expected {count} voxels)")
    data = np.frombuffer(raw, dtype=dtype, count=count, offset=offset)
    data = data.reshape(shape, order="F").copy()

    slope = float(hdr["scl_slope"])
    inter = float(hdr["scl_inter"])
    if slope not in (0.0, 1.0) or inter != 0.0:
        data = data.astype(np.float64) * slope + inter

    if int(hdr["qform_code"]) > 0:
        affine = _quaternion_affine(hdr)
    elif int(hdr["sform_code"]) > 0:
        affine = np.eye(4)
        affine[0] = hdr["srow_x"]
        affine[1] = hdr["srow_y"]
        affine[2] = hdr["srow_z"]
    else:
        affine = np.diag([hdr["pixdim"][1], hdr["pixdim"][2], hdr["pixdim"][3], 1.0])
    affine = affine.astype(np.float64)
    if abs(np.linalg.det(affine[:3, :3])) < 1e-12:
        raise NiftiError(f"{path}: non-invertible affine")
    return data, affine


def write_nifti(path: str | Path, data: np.ndarray, affine: np.ndarray) -> None:
    """Write a 3D array as single-file NIfTI-1 (.nii, or .nii.gz if the path
    ends in .gz). The affine is stored as float32 sform rows; dtype is kept."""
    path = Path(path)
    data = np.asarray(data)
    if data.ndim != 3:
        raise NiftiError(f"expected 3D data, got shape {data.shape}")
    key = (data.dtype.kind, data.dtype.itemsize)
    if key not in CODE_FROM_KIND:
        raise NiftiError(f"unsupported dtype {data.dtype} for NIfTI output")
    code = CODE_FROM_KIND[key]
    affine = np.asarray(affine, dtype=np.float64)
    spacing = np.linalg.norm(affine[:3, :3], axis=0)

    hdr = np.zeros(1, dtype=_HEADER_DTYPE)[0]
    hdr["sizeof_hdr"] = HEADER_SIZE
    hdr["regular"] = b"r"
    hdr["dim"] = [3, data.shape[0], data.shape[1], data.shape[2], 1, 1, 1, 1]
    hdr["datatype"] = code
    hdr["bitpix"] = data.dtype.itemsize * 8
    hdr["pixdim"] = [1.0, spacing[0], spacing[1], spacing[2], 0, 0, 0, 0]
    hdr["vox_offset"] = 352.0
    hdr["scl_slope"] = 1.0
    hdr["xyzt_units"] = 2  # mm
    hdr["qform_code"] = 0
    hdr["sform_code"] = 2
    hdr["srow_x"] = affine[0]
    hdr["srow_y"] = affine[1]
    hdr["srow_z"] = affine[2]
    hdr["magic"] = MAGIC_SINGLE

    data_le = data.astype(DTYPE_FROM_CODE[code], copy=False)
    payload = hdr.tobytes() + b"\x00\x00\x00\x00" + np.asfortranarray(data_le).tobytes(order="F")
    if path.name.endswith(".gz"):
        with open(path, "wb") as f:
            # fixed mtime keeps the output byte-reproducible
            with gzip.GzipFile(fileobj=f, mode="wb", mtime=0) as gz:
                gz.write(payload)
    else:
        with open(path, "wb") as f:
            f.write(payload)
