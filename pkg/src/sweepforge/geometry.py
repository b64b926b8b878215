"""Cortical-surface extraction, tumor statistics, contact-point sampling,
extremity selection, and rigid transform estimation.

Point sets are plain (N, 3) float64 arrays of world coordinates in mm.
All argmin tie-breaks take the lowest point index, and surfaces are
enumerated in x-fastest voxel-scan order, so the whole placement pipeline is
deterministic for a fixed seed.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .volume import LabelVolume


@dataclass
class TumorStats:
    """Centroid (mm), unit principal axis and descending covariance eigenvalues
    of a tumor's foreground voxel distribution."""

    centroid: np.ndarray
    principal_axis: np.ndarray
    eigenvalues: np.ndarray


@dataclass
class RigidTransform:
    """Proper rigid motion: world' = rotation @ world + translation."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        self.rotation = np.asarray(self.rotation, dtype=np.float64)
        self.translation = np.asarray(self.translation, dtype=np.float64)
        if self.rotation.shape != (3, 3) or self.translation.shape != (3,):
            raise ValueError("rotation must be 3x3, translation length 3")
        err = np.abs(self.rotation.T @ self.rotation - np.eye(3)).max()
        if err > 1e-6:
            raise ValueError(f"rotation is not orthonormal (error {err:.2e})")
        if abs(np.linalg.det(self.rotation) - 1.0) > 1e-6:
            raise ValueError("rotation must be proper (det +1)")

    @classmethod
    def identity(cls) -> "RigidTransform":
        return cls(np.eye(3), np.zeros(3))

    @property
    def matrix(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = self.rotation
        m[:3, 3] = self.translation
        return m

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Apply to a (3,) point or (N, 3) point set."""
        points = np.asarray(points, dtype=np.float64)
        return points @ self.rotation.T + self.translation

    def compose(self, other: "RigidTransform") -> "RigidTransform":
        """self after other: (self.compose(other)).apply(p) = self.apply(other.apply(p))."""
        return RigidTransform(self.rotation @ other.rotation,
                              self.rotation @ other.translation + self.translation)

    def invert(self) -> "RigidTransform":
        rt = self.rotation.T
        return RigidTransform(rt, -rt @ self.translation)

    def to_dict(self) -> dict:
        return {"rotation": self.rotation.tolist(), "translation": self.translation.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "RigidTransform":
        return cls(np.array(d["rotation"]), np.array(d["translation"]))


def extract_surface(mask: LabelVolume) -> np.ndarray:
    """World coordinates of foreground voxels with at least one background
    6-neighbor; the volume border counts as background. Points are ordered by
    an x-fastest voxel scan."""
    fg = mask.data > 0
    if not fg.any():
        raise ValueError("empty mask")
    padded = np.pad(fg, 1)
    interior = np.ones_like(fg)
    for axis in range(3):
        lo = [slice(1, -1)] * 3
        hi = [slice(1, -1)] * 3
        lo[axis] = slice(0, -2)
        hi[axis] = slice(2, None)
        interior &= padded[tuple(lo)] & padded[tuple(hi)]
    surface = fg & ~interior
    # argwhere on the transposed mask yields (z, y, x) rows with x fastest
    zyx = np.argwhere(surface.transpose(2, 1, 0))
    ijk = zyx[:, ::-1].astype(np.float64)
    return mask.voxel_to_world(ijk)


def tumor_stats(tumor: LabelVolume) -> TumorStats:
    """Mean and principal component of the tumor's foreground voxel positions.

    The covariance is the population covariance (divide by N) of world
    coordinates. The axis sign is fixed deterministically: the component of
    largest magnitude (first on ties) is made positive. A degenerate
    distribution (single voxel) gets the +x axis.
    """
    ijk = np.argwhere(tumor.data > 0).astype(np.float64)
    if ijk.shape[0] == 0:
        raise ValueError("empty tumor segmentation")
    pts = tumor.voxel_to_world(ijk)
    centroid = pts.mean(axis=0)
    centered = pts - centroid
    cov = centered.T @ centered / pts.shape[0]
    evals, evecs = np.linalg.eigh(cov)
    order = np.argsort(evals)[::-1]
    evals = np.clip(evals[order], 0.0, None)
    axis = evecs[:, order[0]]
    if evals[0] < 1e-12:
        axis = np.array([1.0, 0.0, 0.0])
    else:
        k = int(np.argmax(np.abs(axis)))
        if axis[k] < 0:
            axis = -axis
        axis = axis / np.linalg.norm(axis)
    return TumorStats(centroid=centroid, principal_axis=axis, eigenvalues=evals)


def sample_contact_point(surface: np.ndarray, centroid: np.ndarray,
                         lam: float, rng: np.random.Generator):
    """Draw a cortical contact point with probability proportional to
    exp(-||S_i - M2||^2 / lam). Computed in log space with a max shift, so no
    exponent underflows. Returns (point, index)."""
    surface = np.asarray(surface, dtype=np.float64)
    if surface.shape[0] == 0:
        raise ValueError("empty surface")
    if lam <= 0:
        raise ValueError("lambda must be positive")
    logits = contact_log_weights(surface, centroid, lam)
    p = np.exp(logits - logits.max())
    p /= p.sum()
    idx = int(rng.choice(surface.shape[0], p=p))
    return surface[idx].copy(), idx


def contact_log_weights(surface: np.ndarray, centroid: np.ndarray, lam: float) -> np.ndarray:
    """Unnormalized log probabilities of the contact-point distribution."""
    d2 = np.sum((np.asarray(surface) - np.asarray(centroid)) ** 2, axis=1)
    return -d2 / lam


def solve_extremities(surface: np.ndarray, contact: np.ndarray, width: float,
                      beta: float = 0.0) -> tuple[np.ndarray, np.ndarray]:
    """Pick the two probe extremities on the surface.

    L2 minimizes | ||S_i - C2|| - width/2 |; R2 then minimizes
    | ||S_i - L2|| - width | + beta * | ||S_i - C2|| - width/2 | over the
    remaining points. Ties take the lowest index.
    """
    surface = np.asarray(surface, dtype=np.float64)
    if width <= 0:
        raise ValueError("width must be positive")
    if surface.shape[0] < 2:
        raise ValueError("need at least two surface points")
    d_c = np.linalg.norm(surface - np.asarray(contact, dtype=np.float64), axis=1)
    half_term = np.abs(d_c - 0.5 * width)
    i_l = int(np.argmin(half_term))
    left = surface[i_l]
    cost = np.abs(np.linalg.norm(surface - left, axis=1) - width) + beta * half_term
    cost[i_l] = np.inf
    i_r = int(np.argmin(cost))
    return left.copy(), surface[i_r].copy()


def estimate_rigid(src: np.ndarray, dst: np.ndarray) -> RigidTransform:
    """Least-squares proper rigid fit (centroid subtraction + SVD of the 3x3
    cross-covariance, reflection corrected by the determinant sign) minimizing
    sum ||R src_i + t - dst_i||^2."""
    src = np.asarray(src, dtype=np.float64)
    dst = np.asarray(dst, dtype=np.float64)
    if src.shape != dst.shape:
        raise ValueError(f"point set size mismatch: {src.shape} vs {dst.shape}")
    if src.ndim != 2 or src.shape[1] != 3 or src.shape[0] < 3:
        raise ValueError("need matching (N, 3) point sets with N >= 3")
    src_c = src - src.mean(axis=0)
    sv = np.linalg.svd(src_c, compute_uv=False)
    if sv[1] < 1e-9 * max(sv[0], 1.0):
        raise ValueError("source points are collinear (rank < 2)")
    dst_c = dst - dst.mean(axis=0)
    h = src_c.T @ dst_c
    u, _, vt = np.linalg.svd(h)
    v = vt.T
    d = np.sign(np.linalg.det(v @ u.T))
    rot = v @ np.diag([1.0, 1.0, d]) @ u.T
    t = dst.mean(axis=0) - rot @ src.mean(axis=0)
    return RigidTransform(rot, t)


def fit_rms(transform: RigidTransform, src: np.ndarray, dst: np.ndarray) -> float:
    """Root-mean-square residual of a rigid fit, in mm."""
    res = transform.apply(src) - np.asarray(dst, dtype=np.float64)
    return float(np.sqrt(np.mean(np.sum(res ** 2, axis=1))))
