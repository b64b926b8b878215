"""Reference-sweep templates, probe placement, and oblique slice generation.

Sweep-local frame convention (canonical template):
  * median imaging plane = xy-plane, L1 = (-width/2, 0, 0), R1 = (+width/2, 0, 0);
  * trajectory direction n1 = (0, 0, 1), frame f sits at
    z_f = (f - (F-1)/2) * frame_spacing;
  * pixel (u, v) of a frame samples at its center:
    local (u*px - extent/2 + px/2, v*px - extent/2 + px/2, z_f) with px the
    pixel size and extent = shape*px (for 192 px at 0.5 mm: u*0.5 - 48 + 0.25);
  * the probe face is the image top edge (local y = -extent/2), so
    depth(v) = v*px + px/2 >= 0 and frame arrays are indexed [v (depth), u].
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .geometry import (RigidTransform, estimate_rigid, extract_surface, fit_rms,
                       sample_contact_point, solve_extremities, tumor_stats)
from .volume import CaseData, sample_nearest, sample_trilinear

DEFAULT_FRAME_SHAPE = (192, 192)
DEFAULT_FRAME_PIXEL = 0.5
DEFAULT_WIDTH = 60.0
DEFAULT_FRAME_COUNT = 70
DEFAULT_FRAME_SPACING = 0.5
DEFAULT_FOV_DEPTH = 96.0

_SWEEP_KEYS = {"id", "width_mm", "frame_count", "frame_spacing_mm", "fov",
               "L1", "R1", "n1"}
_FOV_KEYS = {"rect": {"kind", "width_mm", "depth_mm"},
             "fan": {"kind", "apex_offset_mm", "half_angle_deg", "depth_mm"}}


@dataclass(frozen=True)
class FovRect:
    width: float
    depth: float
    kind: str = "rect"


@dataclass(frozen=True)
class FovFan:
    apex_offset: float
    half_angle_deg: float
    depth: float
    kind: str = "fan"


@dataclass
class ReferenceSweep:
    """Probe geometry and trajectory template for one virtual acquisition."""

    width: float
    frame_count: int
    frame_spacing: float
    fov: object = None
    frame_shape: tuple[int, int] = DEFAULT_FRAME_SHAPE
    frame_pixel: float = DEFAULT_FRAME_PIXEL
    L1: np.ndarray = None
    R1: np.ndarray = None
    n1: np.ndarray = None
    sweep_id: str = "default"

    def __post_init__(self):
        if self.width <= 0 or self.frame_spacing <= 0 or self.frame_pixel <= 0:
            raise ValueError("sweep parameters must be positive")
        if self.frame_count < 1:
            raise ValueError("frame_count must be >= 1")
        if self.fov is None:
            self.fov = FovRect(width=self.width, depth=DEFAULT_FOV_DEPTH)
        if isinstance(self.fov, FovRect):
            if not (self.fov.width > 0 and self.fov.depth > 0):
                raise ValueError("rect fov needs positive width and depth")
        elif isinstance(self.fov, FovFan):
            if not (self.fov.apex_offset >= 0 and 0 < self.fov.half_angle_deg <= 90
                    and self.fov.depth > 0):
                raise ValueError("fan fov parameters out of range")
        else:
            raise ValueError(f"unknown fov {self.fov!r}")
        if self.L1 is None:
            self.L1 = np.array([-self.width / 2.0, 0.0, 0.0])
            self.R1 = np.array([+self.width / 2.0, 0.0, 0.0])
            self.n1 = np.array([0.0, 0.0, 1.0])
        self.L1 = np.asarray(self.L1, dtype=np.float64)
        self.R1 = np.asarray(self.R1, dtype=np.float64)
        self.n1 = np.asarray(self.n1, dtype=np.float64)
        if abs(np.linalg.norm(self.n1) - 1.0) > 1e-9:
            raise ValueError("non-unit trajectory direction")
        if abs(np.dot(self.n1, self.R1 - self.L1)) > 1e-9 * max(self.width, 1.0):
            raise ValueError("trajectory direction not orthogonal to the probe line")
        if abs(np.linalg.norm(self.R1 - self.L1) - self.width) > 1e-6:
            raise ValueError("width_mm inconsistent with ||L1 - R1||")

    def frame_offsets(self) -> np.ndarray:
        """Per-frame z offsets along the trajectory, centered on the median plane."""
        f = np.arange(self.frame_count, dtype=np.float64)
        return (f - (self.frame_count - 1) / 2.0) * self.frame_spacing


@dataclass
class SweepPlacement:
    """Solved placement of a reference sweep in patient space."""

    transform: RigidTransform
    C2: np.ndarray
    L2: np.ndarray
    R2: np.ndarray
    n2: np.ndarray
    contact_index: int
    residual: float

    def to_dict(self) -> dict:
        return {
            "transform": self.transform.to_dict(),
            "C2": self.C2.tolist(),
            "L2": self.L2.tolist(),
            "R2": self.R2.tolist(),
            "n2": self.n2.tolist(),
            "contact_index": self.contact_index,
            "residual_mm": self.residual,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SweepPlacement":
        return cls(
            transform=RigidTransform.from_dict(d["transform"]),
            C2=np.array(d["C2"]), L2=np.array(d["L2"]), R2=np.array(d["R2"]),
            n2=np.array(d["n2"]), contact_index=int(d["contact_index"]),
            residual=float(d["residual_mm"]),
        )


@dataclass
class SliceSeries:
    """Multi-channel MR slices + labels sampled along a placed sweep."""

    frames: np.ndarray        # (F, C, nv, nu) float in [-1, 1]
    labels: np.ndarray        # (F, nv, nu) int
    fov_mask: np.ndarray      # (nv, nu) bool
    depth_map: np.ndarray     # (nv, nu) mm from the probe face
    origins: np.ndarray       # (F, 3) world position of pixel (u=0, v=0)
    u_dir: np.ndarray         # (3,) world step per +u pixel
    v_dir: np.ndarray         # (3,) world step per +v pixel
    channel_names: tuple
    pixel_mm: float = DEFAULT_FRAME_PIXEL


def synth_reference_sweep(width: float = DEFAULT_WIDTH,
                          frame_count: int = DEFAULT_FRAME_COUNT,
                          frame_spacing: float = DEFAULT_FRAME_SPACING,
                          fov=None,
                          frame_shape: tuple[int, int] = DEFAULT_FRAME_SHAPE,
                          frame_pixel: float = DEFAULT_FRAME_PIXEL,
                          sweep_id: str = "default") -> ReferenceSweep:
    """Build the canonical parametric template (see module docstring)."""
    return ReferenceSweep(width=width, frame_count=frame_count,
                          frame_spacing=frame_spacing, fov=fov,
                          frame_shape=frame_shape, frame_pixel=frame_pixel,
                          sweep_id=sweep_id)


def _fov_from_dict(d: dict) -> object:
    if not isinstance(d, dict) or "kind" not in d:
        raise ValueError("fov must be an object with a 'kind' key")
    kind = d["kind"]
    if kind not in _FOV_KEYS:
        raise ValueError(f"unknown fov kind {kind!r}")
    unknown = set(d) - _FOV_KEYS[kind]
    if unknown:
        raise ValueError(f"unknown fov keys: {sorted(unknown)}")
    missing = _FOV_KEYS[kind] - set(d) - {"kind"}
    if kind == "rect":
        missing -= {"width_mm"}  # defaults to the probe width
    if missing:
        raise ValueError(f"missing fov keys: {sorted(missing)}")
    if kind == "rect":
        return FovRect(width=float(d.get("width_mm", np.nan)), depth=float(d["depth_mm"]))
    return FovFan(apex_offset=float(d["apex_offset_mm"]),
                  half_angle_deg=float(d["half_angle_deg"]),
                  depth=float(d["depth_mm"]))


def _fov_to_dict(fov) -> dict:
    if isinstance(fov, FovRect):
        return {"kind": "rect", "width_mm": fov.width, "depth_mm": fov.depth}
    return {"kind": "fan", "apex_offset_mm": fov.apex_offset,
            "half_angle_deg": fov.half_angle_deg, "depth_mm": fov.depth}


def parse_reference_sweep(doc: dict, origin: str = "sweep template") -> ReferenceSweep:
    """Validate a reference-sweep JSON document. Unknown keys are rejected;
    all geometric invariants are checked."""
    if not isinstance(doc, dict):
        raise ValueError(f"{origin}: sweep template must be a JSON object")
    unknown = set(doc) - _SWEEP_KEYS
    if unknown:
        raise ValueError(f"{origin}: unknown keys: {sorted(unknown)}")
    missing = {"width_mm", "frame_count", "frame_spacing_mm", "fov"} - set(doc)
    if missing:
        raise ValueError(f"{origin}: missing keys: {sorted(missing)}")
    has_frame = [k for k in ("L1", "R1", "n1") if k in doc]
    if has_frame and len(has_frame) != 3:
        raise ValueError(f"{origin}: L1, R1, n1 must be given together")
    fov = _fov_from_dict(doc["fov"])
    if isinstance(fov, FovRect) and np.isnan(fov.width):
        fov = FovRect(width=float(doc["width_mm"]), depth=fov.depth)
    kwargs = {}
    if has_frame:
        kwargs = {k: np.asarray(doc[k], dtype=np.float64) for k in ("L1", "R1", "n1")}
        for k in ("L1", "R1", "n1"):
            if kwargs[k].shape != (3,):
                raise ValueError(f"{origin}: {k} must be a 3-vector")
    return ReferenceSweep(width=float(doc["width_mm"]),
                          frame_count=int(doc["frame_count"]),
                          frame_spacing=float(doc["frame_spacing_mm"]),
                          fov=fov, sweep_id=str(doc.get("id", origin)),
                          **kwargs)


def load_reference_sweep(path: str | Path) -> ReferenceSweep:
    with open(path) as f:
        doc = json.load(f)
    if isinstance(doc, dict) and "id" not in doc:
        doc["id"] = Path(path).stem
    return parse_reference_sweep(doc, origin=str(path))


def sweep_to_dict(ref: ReferenceSweep) -> dict:
    return {
        "id": ref.sweep_id,
        "width_mm": ref.width,
        "frame_count": ref.frame_count,
        "frame_spacing_mm": ref.frame_spacing,
        "fov": _fov_to_dict(ref.fov),
        "L1": ref.L1.tolist(),
        "R1": ref.R1.tolist(),
        "n1": ref.n1.tolist(),
    }


def save_reference_sweep(ref: ReferenceSweep, path: str | Path) -> None:
    with open(path, "w") as f:
        json.dump(sweep_to_dict(ref), f, indent=2)
        f.write("\n")


# ---------------------------------------------------------------------------
# placement

def place_sweep(case: CaseData, ref: ReferenceSweep, lam: float,
                rng: np.random.Generator, beta: float = 0.0,
                surface: np.ndarray | None = None,
                stats=None) -> SweepPlacement:
    """Run the full placement pipeline: cortical surface -> tumor statistics
    -> stochastic contact point -> extremity selection -> rigid fit.

    The left/right assignment of the extremities is the one with the lower
    rigid-fit RMS residual (ties keep the as-computed order). `surface` and
    `stats` may be passed in to amortize extraction across placements.
    """
    if surface is None:
        surface = extract_surface(case.brain_mask)
    if stats is None:
        stats = tumor_stats(case.tumor)
    contact, idx = sample_contact_point(surface, stats.centroid, lam, rng)
    left, right = solve_extremities(surface, contact, ref.width, beta=beta)
    n2 = stats.principal_axis

    mid1 = (ref.L1 + ref.R1) / 2.0
    delta = ref.width  # scales the direction constraint to the probe size
    src = np.stack([ref.L1, ref.R1, mid1, mid1 + delta * ref.n1])
    best = None
    for a, b in ((left, right), (right, left)):
        mid2 = (a + b) / 2.0
        dst = np.stack([a, b, mid2, mid2 + delta * n2])
        t = estimate_rigid(src, dst)
        rms = fit_rms(t, src, dst)
        if best is None or rms < best[0]:
            best = (rms, t, a, b)
    rms, transform, left, right = best
    return SweepPlacement(transform=transform, C2=contact, L2=left, R2=right,
                          n2=n2, contact_index=idx, residual=rms)


# ---------------------------------------------------------------------------
# slicing

def frame_grid_local(ref: ReferenceSweep) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Pixel-center coordinates of one frame in the sweep-local xy-plane.

    Returns (x_u, y_v, depth_v): x per u column, y per v row, and the depth of
    each row from the probe face (image top edge)."""
    nv, nu = ref.frame_shape
    px = ref.frame_pixel
    x_u = (np.arange(nu) + 0.5) * px - nu * px / 2.0
    y_v = (np.arange(nv) + 0.5) * px - nv * px / 2.0
    depth_v = (np.arange(nv) + 0.5) * px
    return x_u, y_v, depth_v


def rasterize_fov(ref: ReferenceSweep) -> np.ndarray:
    """Boolean (nv, nu) mask of pixels the probe can image."""
    x_u, y_v, depth_v = frame_grid_local(ref)
    x = x_u[None, :]
    depth = depth_v[:, None]
    fov = ref.fov
    if isinstance(fov, FovRect):
        return (np.abs(x) <= fov.width / 2.0) & (depth <= fov.depth)
    if isinstance(fov, FovFan):
        # apex sits apex_offset behind the probe face, on the probe axis
        dy = depth + fov.apex_offset
        r = np.hypot(x, dy)
        ang = np.degrees(np.arctan2(np.abs(x), dy))
        return (ang <= fov.half_angle_deg) & (r >= fov.apex_offset) & (r <= fov.apex_offset + fov.depth)
    raise ValueError(f"unknown fov {fov!r}")


def slice_series(case: CaseData, placement: SweepPlacement, ref: ReferenceSweep,
                 channels=None) -> SliceSeries:
    """Sample MR channels (trilinear, fill -1) and tumor labels (nearest,
    fill 0) over every frame of the placed sweep."""
    if channels is None:
        channels = tuple(sorted(case.channels, key=_channel_order))
    channels = tuple(channels)
    if not channels:
        raise ValueError("no channels requested")
    for name in channels:
        if name not in case.channels:
            raise ValueError(f"channel {name!r} not present in case")

    nv, nu = ref.frame_shape
    x_u, y_v, depth_v = frame_grid_local(ref)
    offsets = ref.frame_offsets()
    f_count = ref.frame_count

    # local pixel-center coordinates for the whole series, frame-major
    xs = np.broadcast_to(x_u[None, None, :], (f_count, nv, nu))
    ys = np.broadcast_to(y_v[None, :, None], (f_count, nv, nu))
    zs = np.broadcast_to(offsets[:, None, None], (f_count, nv, nu))
    local = np.stack([xs, ys, zs], axis=-1).reshape(-1, 3)

    # all case members are co-registered, so one local -> voxel map serves
    # every channel and the labels: voxel = A^-1 (R local + t)
    inv = np.linalg.inv(case.tumor.affine)
    m = inv[:3, :3] @ placement.transform.rotation
    off = inv[:3, :3] @ placement.transform.translation + inv[:3, 3]
    xyz = local @ m.T + off

    from .volume import _nearest_vox, _trilinear_vox
    fov = rasterize_fov(ref)
    frames = np.empty((f_count, len(channels), nv, nu), dtype=np.float64)
    for c, name in enumerate(channels):
        vals = _trilinear_vox(case.channels[name].data, xyz, fill=-1.0)
        frames[:, c] = vals.reshape(f_count, nv, nu)
    frames[:, :, ~fov] = -1.0

    labels = _nearest_vox(case.tumor.data, xyz, fill=0).reshape(f_count, nv, nu)
    labels = labels.astype(np.int32)
    labels[:, ~fov] = 0

    rot = placement.transform.rotation
    u_dir = rot @ np.array([ref.frame_pixel, 0.0, 0.0])
    v_dir = rot @ np.array([0.0, ref.frame_pixel, 0.0])
    first_px = np.stack([np.full(f_count, x_u[0]), np.full(f_count, y_v[0]), offsets], axis=1)
    origins = placement.transform.apply(first_px)

    depth_map = np.broadcast_to(depth_v[:, None], (nv, nu)).copy()
    return SliceSeries(frames=frames, labels=labels, fov_mask=fov,
                       depth_map=depth_map, origins=origins,
                       u_dir=u_dir, v_dir=v_dir, channel_names=channels,
                       pixel_mm=ref.frame_pixel)


def _channel_order(name: str) -> int:
    from .volume import CHANNEL_NAMES
    return CHANNEL_NAMES.index(name)
