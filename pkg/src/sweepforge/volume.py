"""Volumetric image types: loading, resampling, normalization, point sampling.

Conventions used throughout the package:
  * volumes are indexed data[x, y, z] (x fastest on disk, NIfTI order);
  * the affine maps voxel indices (i, j, k, 1) to world mm;
  * trilinear sampling is defined on the voxel-center hull [0, n-1] per axis,
    nearest sampling on the voxel-cell hull [-0.5, n-0.5), ties at half a
    voxel rounding toward -inf;
  * out-of-grid fill defaults: -1 for images (the post-normalization
    background), 0 for labels.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .nifti import read_nifti, write_nifti

CHANNEL_NAMES = ("ceT1", "T2", "FLAIR")

CASE_FILES = {
    "tumor": "tumor.nii.gz",
    "brain_mask": "brain_mask.nii.gz",
}


def _check_grid(data: np.ndarray, affine: np.ndarray) -> np.ndarray:
    if data.ndim != 3:
        raise ValueError(f"expected 3D data, got shape {data.shape}")
    affine = np.asarray(affine, dtype=np.float64)
    if affine.shape != (4, 4) or not np.all(np.isfinite(affine)):
        raise ValueError("affine must be a finite 4x4 matrix")
    if abs(np.linalg.det(affine[:3, :3])) < 1e-12:
        raise ValueError("non-invertible affine")
    return affine


class _Grid:
    """Shared voxel-grid geometry for Volume3D / LabelVolume."""

    data: np.ndarray
    affine: np.ndarray

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.data.shape

    @property
    def spacing(self) -> np.ndarray:
        """Voxel size in mm per axis (column norms of the affine)."""
        return np.linalg.norm(self.affine[:3, :3], axis=0)

    def voxel_to_world(self, ijk: np.ndarray) -> np.ndarray:
        ijk = np.asarray(ijk, dtype=np.float64)
        return ijk @ self.affine[:3, :3].T + self.affine[:3, 3]

    def world_to_voxel(self, xyz: np.ndarray) -> np.ndarray:
        xyz = np.asarray(xyz, dtype=np.float64)
        inv = np.linalg.inv(self.affine)
        return xyz @ inv[:3, :3].T + inv[:3, 3]


@dataclass
class Volume3D(_Grid):
    """Scalar 3D image on a regular grid with a voxel->world affine (mm)."""

    data: np.ndarray
    affine: np.ndarray
    channel_name: str = "other"

    def __post_init__(self):
        self.data = np.asarray(self.data)
        if self.data.dtype.kind != "f":
            self.data = self.data.astype(np.float32)
        self.affine = _check_grid(self.data, self.affine)
        if self.channel_name not in CHANNEL_NAMES + ("other",):
            raise ValueError(f"unknown channel name {self.channel_name!r}")


@dataclass
class LabelVolume(_Grid):
    """Integer label volume; 0 is background, label_set declares valid labels."""

    data: np.ndarray
    affine: np.ndarray
    label_set: frozenset = None

    def __post_init__(self):
        self.data = np.asarray(self.data)
        if self.data.dtype.kind not in "iu":
            raise ValueError(f"label data must be integer-typed, got {self.data.dtype}")
        if self.data.min(initial=0) < 0:
            raise ValueError("negative label values")
        self.affine = _check_grid(self.data, self.affine)
        present = set(np.unique(self.data).tolist()) - {0}
        if self.label_set is None:
            self.label_set = frozenset(present)
        else:
            self.label_set = frozenset(int(v) for v in self.label_set)
            extra = present - self.label_set
            if extra:
                raise ValueError(f"voxel values {sorted(extra)} outside label_set")


@dataclass
class CaseData:
    """Co-registered multi-channel MR + tumor segmentation + brain mask."""

    channels: dict
    tumor: LabelVolume
    brain_mask: LabelVolume
    case_id: str = "case"

    def __post_init__(self):
        if not 1 <= len(self.channels) <= 3:
            raise ValueError("a case needs 1-3 MR channels")
        ref = self.tumor
        for name, vol in self.channels.items():
            if name not in CHANNEL_NAMES:
                raise ValueError(f"unknown channel {name!r}")
            if vol.channel_name != name:
                raise ValueError(f"channel {name!r} holds a volume named {vol.channel_name!r}")
            _check_same_grid(vol, ref, name)
        _check_same_grid(self.brain_mask, ref, "brain_mask")
        if not np.any(self.tumor.data):
            raise ValueError("tumor segmentation is empty")
        if not np.any(self.brain_mask.data):
            raise ValueError("brain mask is empty")


def _check_same_grid(a: _Grid, b: _Grid, name: str) -> None:
    if a.dims != b.dims or not np.allclose(a.affine, b.affine, atol=1e-5):
        raise ValueError(f"{name}: grid mismatch (volumes must be co-registered)")


# ---------------------------------------------------------------------------
# file I/O

def load_volume(path: str | Path, as_label: bool = False,
                channel_name: str = "other"):
    """Load a NIfTI-1 volume. Label loading rejects non-integer data."""
    data, affine = read_nifti(path)
    if as_label:
        if data.dtype.kind not in "iu":
            raise ValueError(f"{path}: label volume has non-integer data ({data.dtype})")
        return LabelVolume(data, affine)
    return Volume3D(data.astype(np.float32) if data.dtype.kind != "f" else data,
                    affine, channel_name=channel_name)


def save_volume(vol, path: str | Path) -> None:
    write_nifti(path, vol.data, vol.affine)


def save_case(case: CaseData, out_dir: str | Path) -> None:
    """Write a case directory: <channel>.nii.gz per channel + tumor/brain_mask."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, vol in case.channels.items():
        save_volume(vol, out_dir / f"{name}.nii.gz")
    save_volume(case.tumor, out_dir / CASE_FILES["tumor"])
    save_volume(case.brain_mask, out_dir / CASE_FILES["brain_mask"])


def load_case(case_dir: str | Path, case_id: str | None = None) -> CaseData:
    """Load a case directory written by save_case / the phantom CLI."""
    case_dir = Path(case_dir)
    channels = {}
    for name in CHANNEL_NAMES:
        for suffix in (".nii.gz", ".nii"):
            p = case_dir / f"{name}{suffix}"
            if p.exists():
                channels[name] = load_volume(p, channel_name=name)
                break
    tumor = load_volume(case_dir / CASE_FILES["tumor"], as_label=True)
    brain = load_volume(case_dir / CASE_FILES["brain_mask"], as_label=True)
    return CaseData(channels, tumor, brain, case_id=case_id or case_dir.name)


# ---------------------------------------------------------------------------
# sampling

def _voxel_coords(vol: _Grid, points: np.ndarray) -> tuple[np.ndarray, bool]:
    points = np.asarray(points, dtype=np.float64)
    single = points.ndim == 1
    return vol.world_to_voxel(points.reshape(-1, 3)), single


def _trilinear_at(data: np.ndarray, xyz: np.ndarray) -> np.ndarray:
    """8-corner interpolation at voxel coordinates, clamped to the grid.

    Weights are float64 regardless of the data dtype, so float32 volumes
    interpolate with full double precision on their exactly-converted values.
    Corner gathers go through one flattened index plus constant offsets,
    which is markedly faster than repeated fancy indexing at dataset scale.
    """
    nx, ny, nz = data.shape
    i0 = np.clip(np.floor(xyz).astype(np.intp), 0,
                 [max(nx - 2, 0), max(ny - 2, 0), max(nz - 2, 0)])
    f = xyz - i0
    fx, fy, fz = f[:, 0], f[:, 1], f[:, 2]
    flat = np.ascontiguousarray(data).ravel()
    base = (i0[:, 0] * ny + i0[:, 1]) * nz + i0[:, 2]
    # single-voxel axes keep a zero stride (both corners coincide)
    dx = ny * nz if nx > 1 else 0
    dy = nz if ny > 1 else 0
    dz = 1 if nz > 1 else 0
    c00 = flat[base] * (1 - fx) + flat[base + dx] * fx
    c10 = flat[base + dy] * (1 - fx) + flat[base + dx + dy] * fx
    c01 = flat[base + dz] * (1 - fx) + flat[base + dx + dz] * fx
    c11 = flat[base + dy + dz] * (1 - fx) + flat[base + dx + dy + dz] * fx
    c0 = c00 * (1 - fy) + c10 * fy
    c1 = c01 * (1 - fy) + c11 * fy
    return c0 * (1 - fz) + c1 * fz


def _trilinear_vox(data: np.ndarray, xyz: np.ndarray, fill: float) -> np.ndarray:
    """Trilinear sampling at voxel coordinates with out-of-hull fill."""
    n = np.array(data.shape, dtype=np.float64)
    inside = np.all((xyz >= 0.0) & (xyz <= n - 1.0), axis=1)
    out = np.full(xyz.shape[0], float(fill), dtype=np.float64)
    if np.any(inside):
        out[inside] = _trilinear_at(data, xyz[inside])
    return out


def _nearest_vox(data: np.ndarray, xyz: np.ndarray, fill: int) -> np.ndarray:
    """Nearest-voxel lookup at voxel coordinates; ties round half toward -inf."""
    idx = np.ceil(xyz - 0.5).astype(np.intp)
    n = np.array(data.shape)
    inside = np.all((idx >= 0) & (idx < n), axis=1)
    out = np.full(xyz.shape[0], int(fill), dtype=data.dtype)
    if np.any(inside):
        ii = idx[inside]
        flat = np.ascontiguousarray(data).ravel()
        out[inside] = flat[(ii[:, 0] * n[1] + ii[:, 1]) * n[2] + ii[:, 2]]
    return out


def sample_trilinear(vol: Volume3D, points: np.ndarray, fill: float = -1.0):
    """Trilinear interpolation at world points; outside the voxel-center hull
    returns `fill`. Accepts a single (3,) point or an (N, 3) array."""
    xyz, single = _voxel_coords(vol, points)
    out = _trilinear_vox(vol.data, xyz, fill)
    return float(out[0]) if single else out


def sample_nearest(vol: LabelVolume, points: np.ndarray, fill: int = 0):
    """Nearest-voxel label lookup; ties round half toward -inf per axis."""
    xyz, single = _voxel_coords(vol, points)
    out = _nearest_vox(vol.data, xyz, fill)
    return int(out[0]) if single else out


# ---------------------------------------------------------------------------
# resampling / normalization / 2D framing

def resample_isotropic(vol, target: float, interp: str | None = None):
    """Resample to isotropic `target` mm spacing, preserving world extent
    within one voxel. Volumes use trilinear, labels nearest (enforced)."""
    if target <= 0:
        raise ValueError("target spacing must be positive")
    is_label = isinstance(vol, LabelVolume)
    if interp is None:
        interp = "nearest" if is_label else "trilinear"
    if interp not in ("trilinear", "nearest"):
        raise ValueError(f"unknown interpolation {interp!r}")
    if is_label and interp == "trilinear":
        raise ValueError("trilinear interpolation is invalid for label volumes")

    old_spacing = vol.spacing
    dims = np.array(vol.dims)
    new_dims = np.maximum(1, np.rint(dims * old_spacing / target).astype(int))

    # edge-aligned index map: x_old = (x_new + 0.5) * r - 0.5, r = target/spacing
    r = target / old_spacing
    axes = [(np.arange(n) + 0.5) * r[a] - 0.5 for a, n in enumerate(new_dims)]
    gx, gy, gz = np.meshgrid(*axes, indexing="ij")
    xyz = np.stack([gx.ravel(), gy.ravel(), gz.ravel()], axis=1)

    if interp == "trilinear":
        coords = np.clip(xyz, 0.0, dims - 1.0)
        new_data = _trilinear_at(vol.data, coords).reshape(tuple(new_dims))
        new_data = new_data.astype(vol.data.dtype, copy=False)
    else:
        idx = np.clip(np.ceil(xyz - 0.5).astype(np.intp), 0, dims - 1)
        new_data = vol.data[idx[:, 0], idx[:, 1], idx[:, 2]].reshape(tuple(new_dims))

    # new affine: same directions scaled to target, origin shifted so voxel
    # centers follow the edge-aligned map above
    direction = vol.affine[:3, :3] / old_spacing
    new_affine = np.eye(4)
    new_affine[:3, :3] = direction * target
    shift = vol.affine[:3, :3] @ (0.5 * r - 0.5)
    new_affine[:3, 3] = vol.affine[:3, 3] + shift

    if is_label:
        return LabelVolume(new_data, new_affine, label_set=vol.label_set)
    return Volume3D(new_data, new_affine, channel_name=vol.channel_name)


def normalize_intensity(vol: Volume3D, mode: str = "minmax",
                        p_lo: float = 0.5, p_hi: float = 99.5) -> Volume3D:
    """Map intensities affinely into [-1, 1]. minmax sends min->-1, max->+1;
    percentile clips to the [p_lo, p_hi] quantiles first. A constant volume
    maps to all zeros."""
    data = vol.data.astype(np.float64)
    if mode == "minmax":
        lo, hi = float(data.min()), float(data.max())
    elif mode == "percentile":
        lo, hi = np.percentile(data, [p_lo, p_hi])
        data = np.clip(data, lo, hi)
    else:
        raise ValueError(f"unknown normalization mode {mode!r}")
    if hi - lo < 1e-12:
        out = np.zeros_like(data)
    else:
        out = (data - lo) / (hi - lo) * 2.0 - 1.0
    return Volume3D(out.astype(np.float32), vol.affine, channel_name=vol.channel_name)


def pad_crop_2d(img: np.ndarray, shape: tuple[int, int] = (192, 192), fill=0):
    """Center-pad/crop a 2D array to `shape` (pad low side gets the smaller
    half when the difference is odd, mirrored by the crop convention)."""
    img = np.asarray(img)
    if img.ndim != 2:
        raise ValueError("pad_crop_2d expects a 2D array")
    if max(img.shape) > 4096:
        raise ValueError("input exceeds 4096 pixels per side")
    out = np.full(shape, fill, dtype=img.dtype)
    src = []
    dst = []
    for a in range(2):
        if img.shape[a] >= shape[a]:
            start = (img.shape[a] - shape[a]) // 2
            src.append(slice(start, start + shape[a]))
            dst.append(slice(0, shape[a]))
        else:
            start = (shape[a] - img.shape[a]) // 2
            src.append(slice(0, img.shape[a]))
            dst.append(slice(start, start + img.shape[a]))
    out[dst[0], dst[1]] = img[src[0], src[1]]
    return out
