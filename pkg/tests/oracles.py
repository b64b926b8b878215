"""Independent oracle implementations used to cross-check the package.

Everything here is deliberately written as straightforward, loop-heavy code
with no calls into sweepforge's sampling/metric internals, so a bug cannot
cancel out between implementation and oracle.
"""
from __future__ import annotations

import math

import numpy as np


def trilinear_oracle(data: np.ndarray, affine: np.ndarray, point, fill=-1.0) -> float:
    """8-corner weighted sum at one world point, with explicit inversion."""
    inv = np.linalg.inv(np.asarray(affine, dtype=np.float64))
    hom = np.array([point[0], point[1], point[2], 1.0])
    x, y, z = (inv @ hom)[:3]
    nx, ny, nz = data.shape
    if x < 0 or y < 0 or z < 0 or x > nx - 1 or y > ny - 1 or z > nz - 1:
        return float(fill)
    i = min(int(math.floor(x)), max(nx - 2, 0))
    j = min(int(math.floor(y)), max(ny - 2, 0))
    k = min(int(math.floor(z)), max(nz - 2, 0))
    fx, fy, fz = x - i, y - j, z - k
    total = 0.0
    for di in (0, 1):
        for dj in (0, 1):
            for dk in (0, 1):
                ii = min(i + di, nx - 1)
                jj = min(j + dj, ny - 1)
                kk = min(k + dk, nz - 1)
                w = ((fx if di else 1 - fx)
                     * (fy if dj else 1 - fy)
                     * (fz if dk else 1 - fz))
                total += w * float(data[ii, jj, kk])
    return total


def slice_oracle(vol_data, vol_affine, rotation, translation, ref, fill=-1.0):
    """Per-pixel resampling of a whole placed sweep, frame by frame."""
    f_count = ref.frame_count
    nv, nu = ref.frame_shape
    px = ref.frame_pixel
    out = np.empty((f_count, nv, nu), dtype=np.float64)
    rotation = np.asarray(rotation, dtype=np.float64)
    translation = np.asarray(translation, dtype=np.float64)
    for f in range(f_count):
        zf = (f - (f_count - 1) / 2.0) * ref.frame_spacing
        for v in range(nv):
            yv = (v + 0.5) * px - nv * px / 2.0
            for u in range(nu):
                xu = (u + 0.5) * px - nu * px / 2.0
                local = np.array([xu, yv, zf])
                world = rotation @ local + translation
                out[f, v, u] = trilinear_oracle(vol_data, vol_affine, world, fill)
    return out


def covariance_oracle(points: np.ndarray) -> np.ndarray:
    """Population covariance by explicit sums."""
    points = np.asarray(points, dtype=np.float64)
    n = points.shape[0]
    mean = np.array([points[:, a].sum() / n for a in range(3)])
    cov = np.zeros((3, 3))
    for p in points:
        d = p - mean
        for a in range(3):
            for b in range(3):
                cov[a, b] += d[a] * d[b]
    return cov / n


def top_eigenvector_oracle(cov: np.ndarray, iters: int = 5000) -> np.ndarray:
    """Power iteration for the dominant eigenvector."""
    v = np.array([1.0, 0.7, 0.3])
    for _ in range(iters):
        v = cov @ v
        nrm = np.linalg.norm(v)
        if nrm == 0:
            return np.array([1.0, 0.0, 0.0])
        v = v / nrm
    return v


def extremities_oracle(surface, contact, width, beta=0.0):
    """Two-stage greedy selection by explicit scan; returns (L2, R2)."""
    surface = np.asarray(surface, dtype=np.float64)
    best_i, best_cost = 0, float("inf")
    for i, p in enumerate(surface):
        cost = abs(np.linalg.norm(p - contact) - 0.5 * width)
        if cost < best_cost:
            best_i, best_cost = i, cost
    left = surface[best_i]
    best_j, best_cost = -1, float("inf")
    for j, p in enumerate(surface):
        if j == best_i:
            continue
        cost = (abs(np.linalg.norm(p - left) - width)
                + beta * abs(np.linalg.norm(p - contact) - 0.5 * width))
        if cost < best_cost:
            best_j, best_cost = j, cost
    return left, surface[best_j]


def best_proper_rotation_oracle(src, dst):
    """Brute force over the 4 proper sign combinations of the SVD basis."""
    src = np.asarray(src, dtype=np.float64)
    dst = np.asarray(dst, dtype=np.float64)
    sc = src - src.mean(axis=0)
    dc = dst - dst.mean(axis=0)
    u, _, vt = np.linalg.svd(sc.T @ dc)
    v = vt.T
    best = None
    for sx in (1, -1):
        for sy in (1, -1):
            for sz in (1, -1):
                rot = v @ np.diag([sx, sy, sz]) @ u.T
                if np.linalg.det(rot) < 0:
                    continue
                t = dst.mean(axis=0) - rot @ src.mean(axis=0)
                sse = np.sum((src @ rot.T + t - dst) ** 2)
                if best is None or sse < best[0] - 1e-12:
                    best = (sse, rot, t)
    return best


def boundary_oracle(mask: np.ndarray) -> list:
    """(row, col) boundary pixels by explicit 4-neighbor scan."""
    m = np.asarray(mask) != 0
    h, w = m.shape
    out = []
    for r in range(h):
        for c in range(w):
            if not m[r, c]:
                continue
            for dr, dc in ((-1, 0), (1, 0), (0, -1), (0, 1)):
                rr, cc = r + dr, c + dc
                if rr < 0 or rr >= h or cc < 0 or cc >= w or not m[rr, cc]:
                    out.append((r, c))
                    break
    return out


def assd_oracle(a, b, spacing=1.0) -> float:
    """All-pairs average symmetric surface distance."""
    ba = boundary_oracle(a)
    bb = boundary_oracle(b)
    if not ba or not bb:
        raise ValueError("empty mask")
    total = 0.0
    for p in ba:
        total += min(math.hypot(p[0] - q[0], p[1] - q[1]) for q in bb)
    for q in bb:
        total += min(math.hypot(p[0] - q[0], p[1] - q[1]) for p in ba)
    return total / (len(ba) + len(bb)) * spacing


def dice_oracle(a, b) -> float:
    a = np.asarray(a) != 0
    b = np.asarray(b) != 0
    inter = 0
    na = nb = 0
    for r in range(a.shape[0]):
        for c in range(a.shape[1]):
            if a[r, c]:
                na += 1
            if b[r, c]:
                nb += 1
            if a[r, c] and b[r, c]:
                inter += 1
    if na + nb == 0:
        return 1.0
    return 2.0 * inter / (na + nb)
