"""Fully synthetic desk-scale test cases: ellipsoid brain + tumor with
closed-form geometry, plus simple per-channel MR intensity recipes
(piecewise-constant tissue values + smooth gradient + seeded noise),
normalized into [-1, 1]."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .volume import CaseData, LabelVolume, Volume3D, normalize_intensity

DEFAULT_RECIPES = {
    "ceT1": {"background": 0.05, "brain": 0.40, "tumor": 0.90,
             "gradient": 0.10, "noise": 0.02},
    "T2": {"background": 0.05, "brain": 0.60, "tumor": 0.30,
           "gradient": 0.08, "noise": 0.02},
    "FLAIR": {"background": 0.05, "brain": 0.50, "tumor": 0.80,
              "gradient": 0.12, "noise": 0.02},
}


@dataclass
class PhantomSpec:
    """Geometry + intensity recipe for a synthetic case. Semi-axes are in mm;
    the tumor is anisotropic so its principal axis is well defined."""

    dims: tuple[int, int, int] = (128, 128, 128)
    spacing: float = 0.5
    brain_semiaxes: tuple[float, float, float] = (28.0, 26.0, 24.0)
    tumor_center: tuple[float, float, float] = (6.0, 4.0, 0.0)
    tumor_semiaxes: tuple[float, float, float] = (10.0, 4.0, 4.0)
    channels: dict = field(default_factory=lambda: dict(DEFAULT_RECIPES))

    def __post_init__(self):
        if any(a <= 0 for a in self.brain_semiaxes + self.tumor_semiaxes):
            raise ValueError("semi-axes must be positive")
        if self.spacing <= 0:
            raise ValueError("spacing must be positive")
        unknown = set(self.channels) - set(DEFAULT_RECIPES)
        if unknown:
            raise ValueError(f"unknown channels in spec: {sorted(unknown)}")
        if not self.channels:
            raise ValueError("at least one channel recipe required")

    @classmethod
    def from_json(cls, path: str | Path) -> "PhantomSpec":
        with open(path) as f:
            doc = json.load(f)
        kwargs = {}
        for key in ("dims", "brain_semiaxes", "tumor_center", "tumor_semiaxes"):
            if key in doc:
                kwargs[key] = tuple(doc.pop(key))
        for key in ("spacing", "channels"):
            if key in doc:
                kwargs[key] = doc.pop(key)
        if doc:
            raise ValueError(f"unknown phantom spec keys: {sorted(doc)}")
        return cls(**kwargs)


def _ellipsoid_mask(coords: np.ndarray, center, semiaxes) -> np.ndarray:
    rel = (coords - np.asarray(center, dtype=np.float64)) / np.asarray(semiaxes)
    return np.sum(rel ** 2, axis=-1) <= 1.0


def make_phantom(spec: PhantomSpec, seed: int = 0, case_id: str = "phantom") -> CaseData:
    """Build a deterministic CaseData whose tumor principal axis and brain
    surface are analytically known. Raises if the tumor ellipsoid is not
    strictly inside the brain ellipsoid."""
    # closed-form containment: max over the tumor surface of the brain quadric
    worst = np.sqrt(sum(
        ((abs(c) + s) / b) ** 2
        for c, s, b in zip(spec.tumor_center, spec.tumor_semiaxes, spec.brain_semiaxes)))
    if worst >= 1.0:
        raise ValueError("tumor not inside brain")

    nx, ny, nz = spec.dims
    affine = np.diag([spec.spacing] * 3 + [1.0])
    affine[:3, 3] = -(np.array(spec.dims) - 1) / 2.0 * spec.spacing

    idx = np.stack(np.meshgrid(np.arange(nx), np.arange(ny), np.arange(nz),
                               indexing="ij"), axis=-1).astype(np.float64)
    coords = idx * spec.spacing + affine[:3, 3]

    brain = _ellipsoid_mask(coords, (0.0, 0.0, 0.0), spec.brain_semiaxes)
    tumor = _ellipsoid_mask(coords, spec.tumor_center, spec.tumor_semiaxes)
    tumor &= brain
    if not tumor.any():
        raise ValueError("tumor ellipsoid contains no voxels at this resolution")

    brain_vol = LabelVolume(brain.astype(np.uint8), affine, label_set=frozenset({1}))
    tumor_vol = LabelVolume(tumor.astype(np.uint8), affine, label_set=frozenset({1}))

    rng = np.random.default_rng(seed)
    extent = np.max(np.array(spec.dims) * spec.spacing)
    channels = {}
    for name in sorted(spec.channels, key=list(DEFAULT_RECIPES).index):
        recipe = spec.channels[name]
        img = np.full(spec.dims, recipe["background"], dtype=np.float64)
        img[brain] = recipe["brain"]
        img[tumor] = recipe["tumor"]
        # smooth diagonal gradient, then noise, so geometry stays exact
        ramp = coords.sum(axis=-1) / (3.0 * extent)
        img += recipe["gradient"] * ramp
        img += rng.normal(0.0, recipe["noise"], size=spec.dims)
        vol = Volume3D(img.astype(np.float32), affine, channel_name=name)
        channels[name] = normalize_intensity(vol)

    return CaseData(channels, tumor_vol, brain_vol, case_id=case_id)
