"""sweepforge: virtual ultrasound sweep simulation over pre-operative MR,
patient-specific paired training data generation, and segmentation metrics."""

__version__ = "0.1.0"

from .geometry import RigidTransform, TumorStats, estimate_rigid, extract_surface, tumor_stats
from .metrics import assd, dice, evaluate_dirs
from .phantom import PhantomSpec, make_phantom
from .sweep import ReferenceSweep, SliceSeries, SweepPlacement, place_sweep, slice_series, synth_reference_sweep
from .synthesis import ModalityCombo, SynthesisParams, enumerate_combos, synthesize
from .volume import CaseData, LabelVolume, Volume3D, load_case, load_volume, normalize_intensity, resample_isotropic, save_case, save_volume

__all__ = [
    "CaseData", "LabelVolume", "ModalityCombo", "PhantomSpec", "ReferenceSweep",
    "RigidTransform", "SliceSeries", "SweepPlacement", "SynthesisParams",
    "TumorStats", "Volume3D", "assd", "dice", "enumerate_combos",
    "estimate_rigid", "evaluate_dirs", "extract_surface", "load_case",
    "load_volume", "make_phantom", "normalize_intensity", "place_sweep",
    "resample_isotropic", "save_case", "save_volume", "slice_series",
    "synth_reference_sweep", "synthesize", "tumor_stats",
]
