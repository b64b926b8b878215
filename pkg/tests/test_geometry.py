import numpy as np
import pytest
from scipy.stats import chi2

from sweepforge.geometry import (RigidTransform, contact_log_weights,
                                 estimate_rigid, extract_surface, fit_rms,
                                 sample_contact_point, solve_extremities,
                                 tumor_stats)
from sweepforge.volume import LabelVolume

from oracles import (best_proper_rotation_oracle, covariance_oracle,
                     extremities_oracle, top_eigenvector_oracle)


def label_from_mask(mask, spacing=1.0):
    affine = np.diag([spacing, spacing, spacing, 1.0])
    return LabelVolume(np.asarray(mask, dtype=np.uint8), affine)


def random_rotation(rng):
    q = rng.normal(size=4)
    q /= np.linalg.norm(q)
    w, x, y, z = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


class TestExtractSurface:
    def test_single_voxel(self):
        mask = np.zeros((5, 5, 5))
        mask[2, 3, 1] = 1
        pts = extract_surface(label_from_mask(mask))
        assert pts.shape == (1, 3)
        assert np.allclose(pts[0], [2, 3, 1])

    def test_cube_3(self):
        mask = np.zeros((5, 5, 5))
        mask[1:4, 1:4, 1:4] = 1
        pts = extract_surface(label_from_mask(mask))
        assert pts.shape[0] == 26  # everything but the center voxel

    def test_cube_10(self):
        mask = np.zeros((12, 12, 12))
        mask[1:11, 1:11, 1:11] = 1
        pts = extract_surface(label_from_mask(mask))
        assert pts.shape[0] == 10 ** 3 - 8 ** 3

    def test_border_voxels_included(self):
        mask = np.ones((4, 4, 4))  # touches every border
        pts = extract_surface(label_from_mask(mask))
        assert pts.shape[0] == 4 ** 3 - 2 ** 3

    def test_empty_rejected(self):
        lab = LabelVolume(np.zeros((3, 3, 3), dtype=np.uint8), np.eye(4),
                          label_set=frozenset({1}))
        with pytest.raises(ValueError, match="empty"):
            extract_surface(lab)

    def test_x_fastest_order(self):
        mask = np.zeros((3, 3, 3))
        mask[0, 0, 0] = 1
        mask[1, 0, 0] = 1
        mask[0, 1, 0] = 1
        mask[0, 0, 1] = 1
        pts = extract_surface(label_from_mask(mask))
        # x varies fastest, then y, then z
        assert np.allclose(pts, [[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]])


class TestTumorStats:
    def test_single_voxel(self):
        mask = np.zeros((5, 5, 5))
        mask[1, 2, 3] = 1
        st = tumor_stats(label_from_mask(mask))
        assert np.allclose(st.centroid, [1, 2, 3])
        assert np.allclose(st.eigenvalues, 0.0)
        assert np.allclose(st.principal_axis, [1, 0, 0])

    def test_axis_aligned_box(self):
        mask = np.zeros((26, 10, 10))
        mask[2:22, 3:7, 3:7] = 1
        st = tumor_stats(label_from_mask(mask))
        assert np.allclose(st.principal_axis, [1, 0, 0], atol=1e-12)
        assert np.allclose(st.centroid, [11.5, 4.5, 4.5])
        assert st.eigenvalues[0] > st.eigenvalues[1]

    def test_blob_against_oracle(self):
        rng = np.random.default_rng(11)
        mask = np.zeros((20, 20, 20))
        base = np.array([10, 10, 10])
        direction = np.array([2.0, 1.0, 0.5])
        for t in np.linspace(-4, 4, 50):
            ijk = np.round(base + t * direction + rng.normal(0, 0.8, 3)).astype(int)
            ijk = np.clip(ijk, 0, 19)
            mask[tuple(ijk)] = 1
        lab = label_from_mask(mask, spacing=0.7)
        st = tumor_stats(lab)
        pts = lab.voxel_to_world(np.argwhere(lab.data > 0))
        cov = covariance_oracle(pts)
        axis = top_eigenvector_oracle(cov)
        dot = abs(float(np.dot(axis, st.principal_axis)))
        assert dot == pytest.approx(1.0, abs=1e-6)
        assert np.allclose(st.centroid, pts.mean(axis=0), atol=1e-9)

    def test_unit_axis_and_sorted_eigenvalues(self):
        rng = np.random.default_rng(12)
        mask = (rng.random((8, 8, 8)) < 0.3)
        mask[0, 0, 0] = True
        st = tumor_stats(label_from_mask(mask))
        assert abs(np.linalg.norm(st.principal_axis) - 1.0) < 1e-9
        assert st.eigenvalues[0] >= st.eigenvalues[1] >= st.eigenvalues[2] >= 0


class TestContactSampling:
    def test_single_point(self):
        s = np.array([[1.0, 2.0, 3.0]])
        rng = np.random.default_rng(0)
        pt, idx = sample_contact_point(s, np.zeros(3), 100.0, rng)
        assert idx == 0
        assert np.allclose(pt, s[0])

    def test_symmetric_pair(self):
        s = np.array([[5.0, 0.0, 0.0], [-5.0, 0.0, 0.0]])
        rng = np.random.default_rng(1)
        n = 10000
        hits = sum(sample_contact_point(s, np.zeros(3), 50.0, rng)[1] for _ in range(n))
        # 3 sigma around p = 0.5
        assert abs(hits / n - 0.5) < 3 * 0.5 / np.sqrt(n)

    def test_nine_to_one_ratio(self):
        lam = 30.0
        d2 = lam * np.log(9.0)
        s = np.array([[0.0, 0.0, 0.0], [np.sqrt(d2), 0.0, 0.0]])
        rng = np.random.default_rng(2)
        n = 10000
        far = sum(sample_contact_point(s, np.zeros(3), lam, rng)[1] for _ in range(n))
        p = 0.1
        assert abs(far / n - p) < 3 * np.sqrt(p * (1 - p) / n)

    def test_no_underflow_far_geometry(self):
        # realistic mm^2 distances underflow exp() without the log-space shift
        s = np.array([[200.0, 0.0, 0.0], [205.0, 0.0, 0.0]])
        rng = np.random.default_rng(3)
        pt, idx = sample_contact_point(s, np.zeros(3), 1.0, rng)
        assert idx == 0  # overwhelmingly the closer point
        w = contact_log_weights(s, np.zeros(3), 1.0)
        assert np.all(np.isfinite(w))

    def test_chisquare_small_surface(self):
        rng_pts = np.random.default_rng(4)
        s = rng_pts.uniform(-20, 20, size=(10, 3))
        m2 = np.array([2.0, -3.0, 1.0])
        lam = 150.0
        logits = contact_log_weights(s, m2, lam)
        p = np.exp(logits - logits.max())
        p /= p.sum()
        rng = np.random.default_rng(5)
        n = 10000
        counts = np.zeros(10)
        for _ in range(n):
            _, idx = sample_contact_point(s, m2, lam, rng)
            counts[idx] += 1
        stat = float(np.sum((counts - n * p) ** 2 / (n * p)))
        assert stat < chi2.ppf(0.999, df=9)


class TestExtremities:
    def test_circle(self):
        ang = np.linspace(0, 2 * np.pi, 60, endpoint=False)
        s = np.stack([5 * np.cos(ang), 5 * np.sin(ang), np.zeros_like(ang)], axis=1)
        left, right = solve_extremities(s, np.zeros(3), 10.0)
        assert np.allclose(left, s[0])  # all tie at |5 - 5| = 0 -> lowest index
        assert np.linalg.norm(left - right) == pytest.approx(10.0, abs=1e-9)

    def test_two_points(self):
        s = np.array([[5.0, 0.0, 0.0], [-5.0, 0.0, 0.0]])
        left, right = solve_extremities(s, np.zeros(3), 10.0)
        assert {tuple(left), tuple(right)} == {(5.0, 0.0, 0.0), (-5.0, 0.0, 0.0)}

    def test_against_bruteforce(self):
        rng = np.random.default_rng(6)
        for trial in range(20):
            s = rng.normal(scale=30.0, size=(500, 3))
            contact = s[int(rng.integers(500))]
            w = float(rng.uniform(10, 60))
            beta = 0.0 if trial % 2 == 0 else float(rng.uniform(0, 1))
            got = solve_extremities(s, contact, w, beta=beta)
            want = extremities_oracle(s, contact, w, beta=beta)
            assert np.array_equal(got[0], want[0])
            assert np.array_equal(got[1], want[1])

    def test_pairwise_optimality(self):
        # |  ||L2-R2|| - w | is minimal among pairs reachable by the greedy scheme
        rng = np.random.default_rng(7)
        s = rng.normal(scale=20.0, size=(200, 3))
        contact = s[0]
        w = 25.0
        left, right = solve_extremities(s, contact, w)
        d_c = np.linalg.norm(s - contact, axis=1)
        i_l = int(np.argmin(np.abs(d_c - w / 2)))
        best_gap = min(abs(np.linalg.norm(s[j] - s[i_l]) - w)
                       for j in range(len(s)) if j != i_l)
        assert abs(np.linalg.norm(left - right) - w) <= best_gap + 1e-12

    def test_too_few_points(self):
        with pytest.raises(ValueError):
            solve_extremities(np.zeros((1, 3)), np.zeros(3), 10.0)


class TestEstimateRigid:
    def test_identity(self):
        rng = np.random.default_rng(8)
        pts = rng.normal(size=(5, 3))
        t = estimate_rigid(pts, pts)
        assert np.allclose(t.rotation, np.eye(3), atol=1e-12)
        assert np.allclose(t.translation, 0.0, atol=1e-12)

    def test_known_transform(self):
        th = np.radians(30.0)
        rot = np.array([[np.cos(th), -np.sin(th), 0],
                        [np.sin(th), np.cos(th), 0],
                        [0, 0, 1.0]])
        trans = np.array([1.0, 2.0, 3.0])
        src = np.array([[0.0, 0, 0], [10, 0, 0], [0, 7, 0]])
        dst = src @ rot.T + trans
        got = estimate_rigid(src, dst)
        assert np.allclose(got.rotation, rot, atol=1e-9)
        assert np.allclose(got.translation, trans, atol=1e-9)

    def test_reflection_fixed(self):
        src = np.array([[0.0, 0, 0], [10, 0, 0], [0, 7, 0], [0, 0, 4]])
        dst = src.copy()
        dst[:, 0] *= -1  # mirror
        got = estimate_rigid(src, dst)
        assert np.linalg.det(got.rotation) == pytest.approx(1.0, abs=1e-9)
        sse_got = np.sum((got.apply(src) - dst) ** 2)
        sse_best, _, _ = best_proper_rotation_oracle(src, dst)
        assert sse_got == pytest.approx(sse_best, abs=1e-9)

    def test_size_mismatch(self):
        with pytest.raises(ValueError, match="mismatch"):
            estimate_rigid(np.zeros((3, 3)), np.zeros((4, 3)))

    def test_collinear_rejected(self):
        src = np.array([[0.0, 0, 0], [1, 0, 0], [2, 0, 0], [3, 0, 0]])
        with pytest.raises(ValueError, match="collinear"):
            estimate_rigid(src, src)

    def test_recovery_property(self):
        rng = np.random.default_rng(9)
        for _ in range(50):
            rot = random_rotation(rng)
            trans = rng.normal(scale=20, size=3)
            src = rng.normal(scale=10, size=(4, 3))
            dst = src @ rot.T + trans
            got = estimate_rigid(src, dst)
            assert np.linalg.norm(got.rotation - rot) < 1e-9
            assert np.linalg.norm(got.translation - trans) < 1e-9
            assert np.linalg.det(got.rotation) == pytest.approx(1.0, abs=1e-9)


class TestTransformAlgebra:
    def test_identity_apply(self):
        p = np.array([1.0, 2.0, 3.0])
        assert np.allclose(RigidTransform.identity().apply(p), p)

    def test_compose_invert(self):
        rng = np.random.default_rng(10)
        t = RigidTransform(random_rotation(rng), rng.normal(size=3))
        ident = t.compose(t.invert())
        assert np.allclose(ident.rotation, np.eye(3), atol=1e-12)
        assert np.allclose(ident.translation, 0.0, atol=1e-12)

    def test_distances_preserved(self):
        rng = np.random.default_rng(11)
        t = RigidTransform(random_rotation(rng), rng.normal(size=3))
        pts = rng.normal(size=(20, 3))
        moved = t.apply(pts)
        d0 = np.linalg.norm(pts[:, None] - pts[None, :], axis=-1)
        d1 = np.linalg.norm(moved[:, None] - moved[None, :], axis=-1)
        assert np.allclose(d0, d1, atol=1e-9)

    def test_compose_order(self):
        rng = np.random.default_rng(12)
        a = RigidTransform(random_rotation(rng), rng.normal(size=3))
        b = RigidTransform(random_rotation(rng), rng.normal(size=3))
        p = rng.normal(size=3)
        assert np.allclose(a.compose(b).apply(p), a.apply(b.apply(p)), atol=1e-12)

    def test_invalid_rotation_rejected(self):
        with pytest.raises(ValueError, match="orthonormal"):
            RigidTransform(np.eye(3) * 2.0, np.zeros(3))
        with pytest.raises(ValueError, match="proper"):
            RigidTransform(np.diag([1.0, 1.0, -1.0]), np.zeros(3))

    def test_fit_rms(self):
        t = RigidTransform.identity()
        src = np.zeros((2, 3))
        dst = np.array([[3.0, 0, 0], [0, 4.0, 0]])
        assert fit_rms(t, src, dst) == pytest.approx(np.sqrt((9 + 16) / 2))
