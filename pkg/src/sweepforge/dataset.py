"""Training-set construction: modality combos x K placements x temperatures.

Layout (frozen contract with downstream trainers):
    <out>/manifest.json
    <out>/series_<combo>_<k>_<tau>/img_####.png   16-bit gray, linear [-1,1]
    <out>/series_<combo>_<k>_<tau>/lbl_####.png   8-bit raw label values
    <out>/series_<combo>_<k>_<tau>/meta.json      placement + frame geometry

Seeding: every job derives its generator from job_seed(), a frozen blake2b
hash of (master_seed, case_id, combo_index, k, tau_index). Placement jobs use
tau_index = 0 so all temperatures of a (combo, k) pair share one placement;
synthesis jobs use tau_index = 1 + position of tau in the temperature list.
Shared reference-sweep choice uses combo_index = -1; per-temperature
placements (optional) use tau_index = -(1 + position). The dataset bytes are
a pure function of (case, config), independent of the worker count.
"""
from __future__ import annotations

import hashlib
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
from PIL import Image

from . import __version__
from .pngio import read_label8, write_image16, write_label8
from .sweep import (ReferenceSweep, SweepPlacement, load_reference_sweep,
                    parse_reference_sweep, place_sweep, slice_series,
                    sweep_to_dict, synth_reference_sweep)
from .synthesis import (DEFAULT_TEMPERATURES, ModalityCombo, SynthesisParams,
                        enumerate_combos, external_synthesize, synthesize)
from .volume import CaseData
from .geometry import extract_surface, tumor_stats


def job_seed(master_seed: int, case_id: str, combo_index: int, k: int,
             tau_index: int) -> int:
    """Stable 64-bit per-job seed. The encoding below is a frozen format
    detail: changing it changes every generated dataset."""
    text = f"{master_seed}|{case_id}|{combo_index}|{k}|{tau_index}"
    digest = hashlib.blake2b(text.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


@dataclass
class GenerationConfig:
    """Everything generate_dataset needs besides the case itself."""

    K: int = 10
    temperatures: tuple = DEFAULT_TEMPERATURES
    combo_policy: str = "all_nonempty"
    combos: tuple = ()                  # combo names, for the listed policy
    lambda_mm2: float = 100.0
    beta: float = 0.0
    master_seed: int = 0
    reference_sweeps: tuple = ()        # ReferenceSweep objects; empty -> default template
    sweep_choice: str = "per_combo"     # or "shared"
    per_tau_placements: bool = False
    synthesizer: str = "procedural"     # or "exec:<path>"
    synthesis: dict = field(default_factory=dict)
    output_dir: str | None = None

    def __post_init__(self):
        if self.K < 1:
            raise ValueError("K must be >= 1")
        self.temperatures = tuple(float(t) for t in self.temperatures)
        if not self.temperatures or any(t <= 0 for t in self.temperatures):
            raise ValueError("temperatures must be non-empty and positive")
        if self.combo_policy not in ("all_nonempty", "listed"):
            raise ValueError(f"unknown combo policy {self.combo_policy!r}")
        if self.sweep_choice not in ("per_combo", "shared"):
            raise ValueError(f"unknown sweep_choice {self.sweep_choice!r}")
        if not (self.synthesizer == "procedural" or self.synthesizer.startswith("exec:")):
            raise ValueError(f"unknown synthesizer {self.synthesizer!r}")
        if not self.reference_sweeps:
            self.reference_sweeps = (synth_reference_sweep(),)
        self.combos = tuple(self.combos)

    @classmethod
    def from_json(cls, path: str | Path) -> "GenerationConfig":
        with open(path) as f:
            doc = json.load(f)
        return cls.from_dict(doc, base_dir=Path(path).parent)

    @classmethod
    def from_dict(cls, doc: dict, base_dir: Path | None = None) -> "GenerationConfig":
        doc = dict(doc)
        refs = []
        for item in doc.pop("reference_sweeps", []):
            if isinstance(item, str):
                p = Path(item)
                if base_dir is not None and not p.is_absolute():
                    p = base_dir / p
                refs.append(load_reference_sweep(p))
            else:
                refs.append(parse_reference_sweep(item, origin="config"))
        known = {f.name for f in cls.__dataclass_fields__.values()}
        unknown = set(doc) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(reference_sweeps=tuple(refs), **doc)

    def to_dict(self) -> dict:
        return {
            "K": self.K,
            "temperatures": list(self.temperatures),
            "combo_policy": self.combo_policy,
            "combos": list(self.combos),
            "lambda_mm2": self.lambda_mm2,
            "beta": self.beta,
            "master_seed": self.master_seed,
            "reference_sweeps": [sweep_to_dict(r) for r in self.reference_sweeps],
            "sweep_choice": self.sweep_choice,
            "per_tau_placements": self.per_tau_placements,
            "synthesizer": self.synthesizer,
            "synthesis": dict(self.synthesis),
        }

    def synthesis_params(self, temperature: float, seed: int) -> SynthesisParams:
        over = dict(self.synthesis)
        gains = {int(k): float(v) for k, v in over.pop("tissue_gain", {}).items()}
        params = SynthesisParams(temperature=temperature, seed=seed, **over)
        if gains:
            params.tissue_gain.update(gains)
        return params


def series_dir_name(combo: ModalityCombo, k: int, tau: float) -> str:
    return f"series_{combo.name}_{k}_{tau:g}"


# ---------------------------------------------------------------------------
# generation

_WORKER_CASE: CaseData | None = None
_STACK_CACHE: dict = {}


def _init_worker(case: CaseData) -> None:
    global _WORKER_CASE
    _WORKER_CASE = case


def _sliced_stack(case, placement, ref, combo):
    """Memoize the most recent MR slice stack: the temperatures of one
    (combo, k) pair arrive back to back and share identical slices. The key
    is exactly the set of slicing inputs, so a hit is always equivalent to
    recomputing."""
    key = (combo.members, ref.width, ref.frame_count, ref.frame_spacing,
           ref.frame_shape, ref.frame_pixel, repr(ref.fov),
           placement.transform.rotation.tobytes(),
           placement.transform.translation.tobytes())
    cached = _STACK_CACHE.get("entry")
    if cached is not None and cached[0] is case and cached[1] == key:
        return cached[2]
    stack = slice_series(case, placement, ref, channels=combo.members)
    _STACK_CACHE["entry"] = (case, key, stack)
    return stack


def _run_series_job(job: dict, case: CaseData | None = None) -> dict:
    """Slice, synthesize and write one series. Pure function of its job dict
    plus the (read-only) case; safe to run in any process."""
    case = case if case is not None else _WORKER_CASE
    ref: ReferenceSweep = job["ref"]
    combo: ModalityCombo = job["combo"]
    placement: SweepPlacement = job["placement"]
    out_dir = Path(job["out_dir"])
    series_dir = out_dir / job["series"]
    series_dir.mkdir(parents=True, exist_ok=True)

    stack = _sliced_stack(case, placement, ref, combo)
    params: SynthesisParams = job["params"]
    if job["synthesizer"] == "procedural":
        images = synthesize(stack, params)
    else:
        images = external_synthesize(job["synthesizer"][len("exec:"):], stack, params)

    img_files, lbl_files = [], []
    for f_idx in range(ref.frame_count):
        img_name = f"img_{f_idx:04d}.png"
        lbl_name = f"lbl_{f_idx:04d}.png"
        write_image16(series_dir / img_name, images[f_idx])
        write_label8(series_dir / lbl_name, stack.labels[f_idx])
        img_files.append(f"{job['series']}/{img_name}")
        lbl_files.append(f"{job['series']}/{lbl_name}")

    meta = {
        "combo": combo.name,
        "k": job["k"],
        "tau": job["tau"],
        "sweep_id": ref.sweep_id,
        "frame_count": ref.frame_count,
        "frame_shape": list(ref.frame_shape),
        "pixel_mm": ref.frame_pixel,
        "channel_names": list(stack.channel_names),
        "job_seed": job["synth_seed"],
        "placement_seed": job["placement_seed"],
        "placement": placement.to_dict(),
        "geometry": {
            "origins": stack.origins.tolist(),
            "u_dir": stack.u_dir.tolist(),
            "v_dir": stack.v_dir.tolist(),
        },
    }
    with open(series_dir / "meta.json", "w") as f:
        json.dump(meta, f, indent=2)
        f.write("\n")

    return {
        "series": job["series"],
        "combo": combo.name,
        "combo_index": job["combo_index"],
        "k": job["k"],
        "tau": job["tau"],
        "sweep_id": ref.sweep_id,
        "frame_count": ref.frame_count,
        "placement_seed": job["placement_seed"],
        "job_seed": job["synth_seed"],
        "placement": placement.to_dict(),
        "files": {"images": img_files, "labels": lbl_files,
                  "meta": f"{job['series']}/meta.json"},
    }


def generate_dataset(case: CaseData, config: GenerationConfig,
                     out_dir: str | Path | None = None, jobs: int = 1) -> dict:
    """Generate the full |combos| x K x |temperatures| dataset and return the
    manifest (also written to <out>/manifest.json, atomically, last)."""
    out_dir = Path(out_dir if out_dir is not None else config.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    available = tuple(case.channels)
    listed = [ModalityCombo.parse(c) for c in config.combos] if config.combos else None
    combos = enumerate_combos(available, config.combo_policy, listed)

    surface = extract_surface(case.brain_mask)
    stats = tumor_stats(case.tumor)
    refs = config.reference_sweeps

    job_list = []
    for ci, combo in enumerate(combos):
        for k in range(1, config.K + 1):
            placement_seed = job_seed(config.master_seed, case.case_id, ci, k, 0)
            rng = np.random.default_rng(placement_seed)
            if config.sweep_choice == "shared":
                shared_rng = np.random.default_rng(
                    job_seed(config.master_seed, case.case_id, -1, k, 0))
                ref = refs[int(shared_rng.integers(len(refs)))]
            else:
                ref = refs[int(rng.integers(len(refs)))] if len(refs) > 1 else refs[0]
            placement = place_sweep(case, ref, config.lambda_mm2, rng,
                                    beta=config.beta, surface=surface, stats=stats)
            for ti, tau in enumerate(config.temperatures):
                if config.per_tau_placements:
                    p_seed = job_seed(config.master_seed, case.case_id, ci, k, -(ti + 1))
                    p_rng = np.random.default_rng(p_seed)
                    if len(refs) > 1 and config.sweep_choice == "per_combo":
                        ref = refs[int(p_rng.integers(len(refs)))]
                    placement = place_sweep(case, ref, config.lambda_mm2, p_rng,
                                            beta=config.beta, surface=surface,
                                            stats=stats)
                    placement_seed = p_seed
                synth_seed = job_seed(config.master_seed, case.case_id, ci, k, ti + 1)
                job_list.append({
                    "series": series_dir_name(combo, k, tau),
                    "combo": combo,
                    "combo_index": ci,
                    "k": k,
                    "tau": tau,
                    "ref": ref,
                    "placement": placement,
                    "placement_seed": placement_seed,
                    "synth_seed": synth_seed,
                    "params": config.synthesis_params(tau, synth_seed),
                    "synthesizer": config.synthesizer,
                    "out_dir": str(out_dir),
                })

    if jobs <= 1:
        try:
            records = [_run_series_job(job, case) for job in job_list]
        finally:
            _STACK_CACHE.clear()
    else:
        with ProcessPoolExecutor(max_workers=jobs, initializer=_init_worker,
                                 initargs=(case,)) as pool:
            futures = [pool.submit(_run_series_job, job) for job in job_list]
            records = [f.result() for f in futures]

    manifest = {
        "case_id": case.case_id,
        "tool": "sweepforge",
        "version": __version__,
        "created": datetime.now(timezone.utc).isoformat(),
        "config": config.to_dict(),
        "combos": [c.name for c in combos],
        "label_set": sorted(case.tumor.label_set),
        "records": records,
    }
    tmp = out_dir / "manifest.json.tmp"
    with open(tmp, "w") as f:
        json.dump(manifest, f, indent=2)
        f.write("\n")
    os.replace(tmp, out_dir / "manifest.json")
    return manifest


# ---------------------------------------------------------------------------
# inspection

def load_manifest(path: str | Path) -> dict:
    path = Path(path)
    if path.is_dir():
        path = path / "manifest.json"
    with open(path) as f:
        return json.load(f)


@dataclass
class ValidationReport:
    violations: list
    checked_files: int

    @property
    def ok(self) -> bool:
        return not self.violations


def validate_dataset(dataset_dir: str | Path) -> ValidationReport:
    """Re-check manifest invariants, file presence, image shapes and label
    value sets of a generated dataset directory."""
    dataset_dir = Path(dataset_dir)
    violations = []
    checked = 0
    try:
        manifest = load_manifest(dataset_dir)
    except (OSError, json.JSONDecodeError) as e:
        return ValidationReport([f"manifest.json: {e}"], 0)

    config = manifest.get("config", {})
    combos = manifest.get("combos", [])
    expected = len(combos) * config.get("K", 0) * len(config.get("temperatures", []))
    records = manifest.get("records", [])
    if len(records) != expected:
        violations.append(
            f"manifest.json: {len(records)} records, expected "
            f"{len(combos)} combos x K={config.get('K')} x "
            f"{len(config.get('temperatures', []))} temperatures = {expected}")

    label_set = set(manifest.get("label_set", [])) | {0}
    by_placement_key = {}
    for rec in records:
        key = (rec["combo"], rec["k"])
        by_placement_key.setdefault(key, []).append(rec)
        frame_count = rec.get("frame_count", 0)
        files = rec.get("files", {})
        images = files.get("images", [])
        labels = files.get("labels", [])
        if len(images) != frame_count or len(labels) != frame_count:
            violations.append(f"{rec['series']}: frame file count != frame_count")
        for rel in images + labels + [files.get("meta")]:
            if rel is None:
                continue
            p = dataset_dir / rel
            if not p.exists():
                violations.append(f"{rel}: missing file")
        for rel in images:
            p = dataset_dir / rel
            if not p.exists():
                continue
            checked += 1
            with Image.open(p) as im:
                if im.mode != "I;16":
                    violations.append(f"{rel}: not a 16-bit grayscale PNG ({im.mode})")
                w, h = im.size
            meta_shape = _record_shape(dataset_dir, rec)
            if meta_shape is not None and (h, w) != meta_shape:
                violations.append(f"{rel}: shape {(h, w)}, expected {meta_shape}")
        for rel in labels:
            p = dataset_dir / rel
            if not p.exists():
                continue
            checked += 1
            values = set(np.unique(read_label8(p)).tolist())
            bad = values - label_set
            if bad:
                violations.append(f"{rel}: invalid label value(s) {sorted(bad)}")

    if not config.get("per_tau_placements", False):
        for key, group in by_placement_key.items():
            first = group[0].get("placement")
            for rec in group[1:]:
                if rec.get("placement") != first:
                    violations.append(
                        f"{rec['series']}: placement differs across temperatures "
                        f"for combo={key[0]} k={key[1]}")
    return ValidationReport(violations, checked)


_SHAPE_CACHE_KEY = "_frame_shape"


def _record_shape(dataset_dir: Path, rec: dict):
    if _SHAPE_CACHE_KEY in rec:
        return rec[_SHAPE_CACHE_KEY]
    shape = None
    meta_rel = rec.get("files", {}).get("meta")
    if meta_rel and (dataset_dir / meta_rel).exists():
        try:
            with open(dataset_dir / meta_rel) as f:
                meta = json.load(f)
            shape = tuple(meta.get("frame_shape", ())) or None
        except (OSError, json.JSONDecodeError):
            shape = None
    rec[_SHAPE_CACHE_KEY] = shape
    return shape
