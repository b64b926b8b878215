"""Segmentation evaluation: Dice and average symmetric surface distance.

Boundaries use 4-connectivity with the image border counting as background.
Distances are Euclidean between pixel centers, scaled by the pixel spacing.
Empty-mask conventions: Dice(empty, empty) = 1, Dice(empty, non-empty) = 0;
ASSD is undefined when either mask is empty.
"""
from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np
from scipy.ndimage import distance_transform_edt

from .pngio import read_mask


def _as_mask(a) -> np.ndarray:
    a = np.asarray(a)
    if a.ndim != 2:
        raise ValueError("masks must be 2D")
    return a != 0


def boundary_pixels(mask) -> np.ndarray:
    """Foreground pixels with at least one background 4-neighbor (the image
    border counts as background)."""
    m = _as_mask(mask)
    padded = np.pad(m, 1)
    interior = (padded[:-2, 1:-1] & padded[2:, 1:-1]
                & padded[1:-1, :-2] & padded[1:-1, 2:])
    return m & ~interior


def dice(a, b) -> float:
    """2|A n B| / (|A| + |B|); both empty -> 1.0, exactly one empty -> 0.0."""
    a = _as_mask(a)
    b = _as_mask(b)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    na, nb = int(a.sum()), int(b.sum())
    if na + nb == 0:
        return 1.0
    return 2.0 * int((a & b).sum()) / (na + nb)


def assd(a, b, spacing: float = 1.0) -> float:
    """Average symmetric surface distance in mm (distance-transform fast path)."""
    a = _as_mask(a)
    b = _as_mask(b)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    if spacing <= 0:
        raise ValueError("spacing must be positive")
    if not a.any() or not b.any():
        raise ValueError("undefined surface distance: empty mask")
    ba = boundary_pixels(a)
    bb = boundary_pixels(b)
    # EDT of the boundary complement = distance to the nearest boundary pixel
    d_to_b = distance_transform_edt(~bb)
    d_to_a = distance_transform_edt(~ba)
    total = d_to_b[ba].sum() + d_to_a[bb].sum()
    return float(total / (ba.sum() + bb.sum()) * spacing)


def summarize(values) -> dict:
    """Median and inter-quartile range, quartiles by linear interpolation."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.size == 0:
        return {"median": None, "iqr": None}
    q25, q50, q75 = np.quantile(arr, [0.25, 0.5, 0.75])
    return {"median": float(q50), "iqr": float(q75 - q25)}


def evaluate_dirs(pred_dir: str | Path, gt_dir: str | Path, spacing: float,
                  out_dir: str | Path | None = None) -> tuple[list[dict], dict]:
    """Compare per-slice PNG masks of two directories.

    Returns (rows, summary); rows carry slice name, dice, assd_mm and an
    assd_defined flag. Slices with an undefined ASSD are excluded from the
    ASSD summary. When out_dir is given, writes metrics.csv + summary.json.
    """
    pred_dir = Path(pred_dir)
    gt_dir = Path(gt_dir)
    pred_names = {p.name for p in pred_dir.glob("*.png")}
    gt_names = {p.name for p in gt_dir.glob("*.png")}
    if pred_names != gt_names:
        only_pred = sorted(pred_names - gt_names)
        only_gt = sorted(gt_names - pred_names)
        raise ValueError(
            f"slice name sets differ; only in pred: {only_pred}, only in gt: {only_gt}")
    if not pred_names:
        raise ValueError("no PNG slices found")

    rows = []
    for name in sorted(pred_names):
        pred = read_mask(pred_dir / name)
        gt = read_mask(gt_dir / name)
        row = {"slice": name, "dice": dice(pred, gt)}
        try:
            row["assd_mm"] = assd(pred, gt, spacing)
            row["assd_defined"] = True
        except ValueError:
            row["assd_mm"] = float("nan")
            row["assd_defined"] = False
        rows.append(row)

    dice_summary = summarize([r["dice"] for r in rows])
    assd_values = [r["assd_mm"] for r in rows if r["assd_defined"]]
    assd_summary = summarize(assd_values)
    summary = {
        "n_slices": len(rows),
        "spacing_mm": spacing,
        "dice_median": dice_summary["median"],
        "dice_iqr": dice_summary["iqr"],
        "assd_median_mm": assd_summary["median"],
        "assd_iqr_mm": assd_summary["iqr"],
        "n_assd_undefined": len(rows) - len(assd_values),
    }

    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        with open(out_dir / "metrics.csv", "w", newline="") as f:
            writer = csv.DictWriter(f, fieldnames=["slice", "dice", "assd_mm", "assd_defined"])
            writer.writeheader()
            writer.writerows(rows)
        with open(out_dir / "summary.json", "w") as f:
            json.dump(summary, f, indent=2)
            f.write("\n")
    return rows, summary
