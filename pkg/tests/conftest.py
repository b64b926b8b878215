import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from sweepforge.phantom import PhantomSpec, make_phantom
from sweepforge.sweep import synth_reference_sweep


@pytest.fixture(scope="session")
def small_case():
    """64^3 @ 1 mm phantom: fast, with a clearly x-elongated tumor."""
    spec = PhantomSpec(dims=(64, 64, 64), spacing=1.0,
                       brain_semiaxes=(28.0, 26.0, 24.0),
                       tumor_center=(6.0, 4.0, 0.0),
                       tumor_semiaxes=(10.0, 4.0, 4.0))
    return make_phantom(spec, seed=1, case_id="small")


@pytest.fixture(scope="session")
def small_ref():
    return synth_reference_sweep(width=40.0, frame_count=4, frame_spacing=1.0,
                                 frame_shape=(64, 64), frame_pixel=0.5,
                                 sweep_id="small")


@pytest.fixture(scope="session")
def small_case_dir(small_case, tmp_path_factory):
    from sweepforge.volume import save_case
    d = tmp_path_factory.mktemp("case") / "small"
    save_case(small_case, d)
    return d
