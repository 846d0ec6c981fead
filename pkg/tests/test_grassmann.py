"""Plane geometry: the angle metric, perturbed orthonormalization, slab
strips and projected measures, with their guaranteed constants."""

import math

import numpy as np
import pytest

from helpers import (
    basis_perturbation_trials,
    gram_schmidt_trials,
    projected_measure_trials,
    random_plane,
    rotated_plane,
    strip_ball_trials,
)
from tpsurf.errors import (
    DimensionMismatchError,
    InvalidArgumentError,
    PreconditionError,
    RankDeficiencyError,
)
from tpsurf.grassmann import (
    LemmaConstants,
    Plane,
    Slab,
    angle,
    gram_schmidt_perturbed,
    projected_measure_ratio,
    slab_sample_points,
    slab_strip_width,
)


def test_plane_invariants():
    p = Plane.coordinate(4, [0, 2])
    assert p.ambient_dim == 4 and p.dim == 2
    proj = p.projector()
    assert np.max(np.abs(proj - proj.T)) < 1e-12
    assert np.max(np.abs(proj @ proj - proj)) < 1e-10
    with pytest.raises(InvalidArgumentError):
        Plane(np.array([[1.0, 1.0], [0.0, 1.0]]))


def test_angle_identity_is_zero():
    p = Plane.coordinate(3, [0, 1])
    assert angle(p, p) == 0.0


def test_angle_tilted_lines_in_plane():
    # lines spanned by (1,0) and (cos t, sin t): distance |sin t|
    t = math.pi / 6
    p1 = Plane(np.array([[1.0], [0.0]]))
    p2 = Plane(np.array([[math.cos(t)], [math.sin(t)]]))
    assert abs(angle(p1, p2) - 0.5) < 1e-14


def test_angle_orthogonal_axes():
    p1 = Plane.coordinate(2, [0])
    p2 = Plane.coordinate(2, [1])
    assert abs(angle(p1, p2) - 1.0) < 1e-14


def test_angle_matches_projector_norm():
    rng = np.random.default_rng(3)
    for _ in range(200):
        n = int(rng.integers(2, 6))
        m = int(rng.integers(1, n))
        p1, p2 = random_plane(rng, n, m), random_plane(rng, n, m)
        direct = np.linalg.norm(p1.projector() - p2.projector(), ord=2)
        assert abs(angle(p1, p2) - direct) < 1e-10


def test_angle_small_angles_not_lost():
    rng = np.random.default_rng(4)
    base = random_plane(rng, 4, 2)
    tilted = rotated_plane(rng, base, 1e-9)
    a = angle(base, tilted)
    assert abs(a - 1e-9) < 1e-12


def test_angle_dimension_mismatch():
    with pytest.raises(DimensionMismatchError):
        angle(Plane.coordinate(3, [0]), Plane.coordinate(3, [0, 1]))


def test_angle_metric_properties_random_triples():
    rng = np.random.default_rng(5)
    for _ in range(10_000):
        n, m = 3, 1
        a, b, c = (random_plane(rng, n, m) for _ in range(3))
        ab, bc, ac = angle(a, b), angle(b, c), angle(a, c)
        assert 0.0 <= ab <= 1.0
        assert abs(ab - angle(b, a)) < 1e-12
        assert ac <= ab + bc + 1e-9


def test_bases_angle_bound_on_random_trials():
    assert basis_perturbation_trials(10_000) == 0


def test_recursion_bound_pure_arithmetic():
    # s_{k+1} <= a k + b sum s_j with s_1 <= 1 implies s_k < A^k for
    # A >= 1 + max(2a, 2b)
    rng = np.random.default_rng(6)
    for _ in range(10_000):
        a, b = rng.uniform(0.01, 4.0, 2)
        big_a = 1.0 + max(2 * a, 2 * b)
        s = [rng.uniform(0.0, 1.0)]
        ok = True
        for k in range(1, 50):
            nxt = rng.uniform(0.0, 1.0) * (a * k + b * sum(s))
            s.append(nxt)
        for k, val in enumerate(s, start=1):
            if not val < big_a**k:
                ok = False
        assert ok


def test_lemma_constants_values_and_order():
    c = LemmaConstants(2, 6.0)
    assert c.eps1 == pytest.approx(0.1 / 101.0)
    assert c.c1 == pytest.approx(2 * 101.0)
    assert c.c2 == pytest.approx(8 * 101.0)
    assert c.c3 == pytest.approx(14 * 2 * 400.0)
    assert c.c4 == pytest.approx(3 * (c.c3 + 1))
    assert c.c5 == pytest.approx(16 * 2 * 9.0**6 / c.omega_m**2)
    assert c.kappa == pytest.approx(2.0 / 14.0)
    assert c.mu == pytest.approx(1.0 - 4.0 / 6.0)
    for q in (4.2, 5.0, 9.0):
        cc = LemmaConstants(2, q)
        assert cc.kappa < cc.mu
        assert all(v > 0 for v in (cc.eps1, cc.c1, cc.c2, cc.c3, cc.c4, cc.c5))


class TestGramSchmidt:
    def test_identity_input(self):
        base = Plane.coordinate(3, [0, 1])
        out, log = gram_schmidt_perturbed(base, base.frame.T)
        assert angle(base, out) < 1e-14
        assert np.all(log["dev_v_minus_h"] == 0)
        assert np.all(log["dev_norm"] == 0)

    def test_small_perturbation_angle_bound(self):
        # eps = 9e-4 stays below eps1(m=2) = 9.901e-4
        base = Plane.coordinate(3, [0, 1])
        h = base.frame.T.copy()
        h[0, 2] += 9e-4  # e1 + eps e3
        out, log = gram_schmidt_perturbed(base, h)
        consts = LemmaConstants(2, 5)
        assert log["angle"] <= consts.c2 * 9e-4
        assert angle(base, out) == log["angle"]

    def test_precondition_eps(self):
        base = Plane.coordinate(3, [0, 1])
        h = base.frame.T.copy()
        h[0, 2] += 0.5
        with pytest.raises(PreconditionError):
            gram_schmidt_perturbed(base, h)

    def test_rank_deficiency(self):
        base = Plane.coordinate(2, [0, 1])
        h = np.array([[1.0, 0.0], [1.0, 0.0]])
        with pytest.raises((PreconditionError, RankDeficiencyError)):
            gram_schmidt_perturbed(base, h)

    def test_randomized_bounds_suite(self):
        assert gram_schmidt_trials(10_000) == 0


class TestSlab:
    def test_slab_contains(self):
        s = Slab(Plane.coordinate(3, [0, 1]), 1.0)
        assert s.contains([0.5, -2.0, 0.9])
        assert not s.contains([0.0, 0.0, 1.5])
        with pytest.raises(InvalidArgumentError):
            Slab(Plane.coordinate(3, [0]), -1.0)

    def test_strip_width_lines_m1(self):
        # two lines in R^2 at a tiny angle: strip degenerates to {0}
        alpha = 0.001
        h1 = Plane(np.array([[1.0], [0.0]]))
        h2 = Plane(np.array([[math.cos(alpha)], [math.sin(alpha)]]))
        w, width, log = slab_strip_width(h1, h2, sample_target=20_000)
        assert w is None  # zero-dimensional
        consts = LemmaConstants(1, 3)
        assert width <= 5 * consts.c2 / log["alpha"]
        # the projected slab really is an interval of roughly 2/alpha
        assert width > 0.5 / log["alpha"]

    def test_strip_width_near_eps1(self):
        consts = LemmaConstants(2, 5)
        alpha = consts.eps1 * 0.9
        rng = np.random.default_rng(11)
        h1 = random_plane(rng, 3, 2)
        h2 = rotated_plane(rng, h1, math.asin(alpha))
        w, width, log = slab_strip_width(h1, h2, sample_target=50_000)
        assert w is not None and w.dim == 1
        assert width <= 5 * consts.c2 / log["alpha"]

    def test_strip_contains_samples(self):
        rng = np.random.default_rng(12)
        h1 = random_plane(rng, 3, 2)
        h2 = rotated_plane(rng, h1, 4e-4)
        w, width, _ = slab_strip_width(h1, h2, sample_target=30_000)
        alpha = angle(h1, h2)
        pts, h1c = slab_sample_points(h1, h2, 10.0 / alpha, 30_000)
        # distance within H1 to the strip axis W
        w0 = h1.frame.T @ (h1.frame @ np.linalg.svd(w.frame.T @ h1.frame)[2][-1])
        coords = h1c - (h1c @ (w.frame.T @ h1.frame).T) @ (w.frame.T @ h1.frame)
        assert np.max(np.linalg.norm(coords, axis=1)) <= width * (1 + 1e-9)

    def test_strip_rejects_equal_planes(self):
        p = Plane.coordinate(3, [0, 1])
        with pytest.raises(PreconditionError):
            slab_strip_width(p, p)

    def test_strip_ball_measure_suite(self):
        assert strip_ball_trials(10_000) == 0


class TestProjectedMeasure:
    def test_equal_planes(self):
        p = Plane.coordinate(3, [0, 1])
        assert projected_measure_ratio(p, p) == pytest.approx(1.0)

    def test_tilted_planes_cosine(self):
        tilt = 0.01
        h2 = Plane.coordinate(3, [0, 1])
        h1 = Plane(
            np.array(
                [[1.0, 0.0], [0.0, math.cos(tilt)], [0.0, math.sin(tilt)]]
            )
        )
        ratio = projected_measure_ratio(h1, h2)
        assert ratio == pytest.approx(math.cos(tilt), abs=1e-12)
        assert ratio >= 1.0 - 2 * math.sin(tilt) * 4

    def test_angle_too_large(self):
        p1 = Plane.coordinate(2, [0])
        p2 = Plane.coordinate(2, [1])
        with pytest.raises(PreconditionError):
            projected_measure_ratio(p1, p2)

    def test_randomized_suite(self):
        assert projected_measure_trials(10_000) == 0
