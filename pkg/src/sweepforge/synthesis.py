"""Ultrasound-like image synthesis from MR slice stacks.

The built-in synthesizer is procedural: channel fusion, per-tissue gain,
multiplicative lognormal speckle whose log-sigma scales with the sampling
temperature, exponential depth attenuation, and a Gaussian blur. It is a
deliberately simple stand-in wired behind the same interface as the
external-process bridge, which hands the slice stack to an arbitrary
synthesis executable via a PNG + JSON exchange directory.
"""
from __future__ import annotations

import json
import shutil
import subprocess
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.ndimage import gaussian_filter

from .pngio import read_image16, write_image16
from .sweep import SliceSeries
from .volume import CHANNEL_NAMES

DEFAULT_TEMPERATURES = (0.3, 0.5, 0.7, 1.0)


@dataclass(frozen=True)
class ModalityCombo:
    """A non-empty subset of MR channels used as synthesis input."""

    members: tuple

    def __post_init__(self):
        members = tuple(sorted(set(self.members), key=CHANNEL_NAMES.index))
        if not members:
            raise ValueError("a modality combination cannot be empty")
        object.__setattr__(self, "members", members)

    @property
    def name(self) -> str:
        return "+".join(self.members)

    @classmethod
    def parse(cls, text: str) -> "ModalityCombo":
        return cls(tuple(text.split("+")))


@dataclass
class SynthesisParams:
    """Knobs of the procedural synthesizer; temperature is the paper-facing
    variability control (higher tau -> more speckle)."""

    temperature: float = 1.0
    seed: int = 0
    attenuation: float = 0.01          # per mm
    blur_sigma: float = 0.75           # mm
    speckle_base_sigma: float = 0.3    # log-sigma at tau = 1
    tissue_gain: dict = field(default_factory=lambda: {0: 0.2})
    foreground_gain: float = 0.8       # gain for labels not listed in tissue_gain

    def __post_init__(self):
        if not 0 < self.temperature <= 2:
            raise ValueError("temperature must be in (0, 2]")
        if self.attenuation < 0 or self.speckle_base_sigma < 0 or self.blur_sigma < 0:
            raise ValueError("attenuation, blur and speckle sigmas must be >= 0")


def enumerate_combos(available, policy: str = "all_nonempty",
                     listed=None) -> list[ModalityCombo]:
    """Deterministically ordered modality combinations (by size, then by
    canonical channel order ceT1 < T2 < FLAIR)."""
    avail = tuple(sorted(set(available), key=CHANNEL_NAMES.index))
    if not avail:
        raise ValueError("no channels available")
    if policy == "all_nonempty":
        combos = []
        for size in range(1, len(avail) + 1):
            combos.extend(_subsets(avail, size))
        return [ModalityCombo(c) for c in combos]
    if policy == "listed":
        if not listed:
            raise ValueError("listed policy needs an explicit combination list")
        out = []
        for item in listed:
            combo = item if isinstance(item, ModalityCombo) else ModalityCombo(tuple(item))
            for m in combo.members:
                if m not in avail:
                    raise ValueError(f"combo {combo.name!r} references unavailable channel {m!r}")
            out.append(combo)
        return out
    raise ValueError(f"unknown combo policy {policy!r}")


def _subsets(items: tuple, size: int):
    from itertools import combinations
    return list(combinations(items, size))


def synthesize(stack: SliceSeries, params: SynthesisParams) -> np.ndarray:
    """Procedural MR -> ultrasound-like stack, deterministic under the seed.

    Per pixel: fuse channels (mean of intensities remapped to [0, 1]), apply
    the tissue gain of its label, multiply by lognormal speckle with
    log-sigma tau * sigma0, attenuate exponentially with depth, blur, then
    remap to [-1, 1]. Pixels outside the field of view are exactly -1.
    """
    if stack.frames.shape[1] == 0:
        raise ValueError("empty channel selection")
    f_count, _, nv, nu = stack.frames.shape
    base = (stack.frames.mean(axis=1) + 1.0) / 2.0

    gain = np.full(stack.labels.max() + 1, params.foreground_gain, dtype=np.float64)
    gain[0] = params.tissue_gain.get(0, 0.2)
    for label, g in params.tissue_gain.items():
        if 0 <= label < gain.size:
            gain[label] = g
    signal = base * gain[stack.labels]

    log_sigma = params.temperature * params.speckle_base_sigma
    rng = np.random.default_rng(params.seed)
    speckle = np.exp(rng.normal(0.0, log_sigma, size=signal.shape))
    signal = signal * speckle

    signal *= np.exp(-params.attenuation * stack.depth_map)[None, :, :]

    if params.blur_sigma > 0:
        sigma_px = params.blur_sigma / stack.pixel_mm
        # in-plane blur only: sigma 0 along the frame axis
        signal = gaussian_filter(signal, sigma=(0.0, sigma_px, sigma_px),
                                 mode="nearest")

    out = 2.0 * np.clip(signal, 0.0, 1.0) - 1.0
    out[:, ~stack.fov_mask] = -1.0
    return out


# ---------------------------------------------------------------------------
# external bridge

def external_synthesize(command: str | Path, stack: SliceSeries,
                        params: SynthesisParams, timeout: float = 300.0) -> np.ndarray:
    """Hand the stack to an external synthesis executable.

    The stack is written to a fresh exchange directory (meta.json +
    frame_####_<channel>.png, 16-bit gray, linear [-1,1] map), the command is
    invoked as `command <in_dir> <out_dir>`, and out_####.png frames of
    matching shape are read back and clamped to [-1, 1].
    """
    command = Path(command)
    if not command.exists():
        raise FileNotFoundError(f"synthesizer command not found: {command}")
    if not (command.stat().st_mode & 0o111):
        raise PermissionError(f"synthesizer command not executable: {command}")

    f_count, _, nv, nu = stack.frames.shape
    exchange = Path(tempfile.mkdtemp(prefix="sweepforge-synth-"))
    try:
        in_dir = exchange / "in"
        out_dir = exchange / "out"
        in_dir.mkdir()
        out_dir.mkdir()
        meta = {
            "frame_count": f_count,
            "channels": list(stack.channel_names),
            "shape": [nv, nu],
            "spacing_mm": stack.pixel_mm,
            "temperature": params.temperature,
        }
        with open(in_dir / "meta.json", "w") as f:
            json.dump(meta, f, indent=2)
        for f_idx in range(f_count):
            for c, name in enumerate(stack.channel_names):
                write_image16(in_dir / f"frame_{f_idx:04d}_{name}.png",
                              stack.frames[f_idx, c])

        try:
            proc = subprocess.run([str(command), str(in_dir), str(out_dir)],
                                  capture_output=True, text=True, timeout=timeout)
        except subprocess.TimeoutExpired as e:
            raise RuntimeError(
                f"external synthesizer timed out after {timeout:g}s") from e
        if proc.returncode != 0:
            raise RuntimeError(
                f"external synthesizer failed (exit {proc.returncode}): {proc.stderr.strip()}")

        produced = sorted(out_dir.glob("out_*.png"))
        if len(produced) != f_count:
            raise RuntimeError(f"expected {f_count} frames, found {len(produced)}")
        frames = np.empty((f_count, nv, nu), dtype=np.float64)
        for f_idx in range(f_count):
            p = out_dir / f"out_{f_idx:04d}.png"
            if not p.exists():
                raise RuntimeError(f"missing output frame {p.name}")
            img = read_image16(p)
            if img.shape != (nv, nu):
                raise RuntimeError(
                    f"{p.name}: wrong shape {img.shape}, expected {(nv, nu)}")
            frames[f_idx] = img
        return np.clip(frames, -1.0, 1.0)
    finally:
        shutil.rmtree(exchange, ignore_errors=True)
