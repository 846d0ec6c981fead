"""Shared randomized-trial helpers used by module tests and the
acceptance suite."""

from __future__ import annotations

import math

import numpy as np

from tpsurf.grassmann import LemmaConstants, Plane, angle, gram_schmidt_perturbed
from tpsurf.simplicial import QuadratureCloud


def random_plane(rng, n, m):
    q, _ = np.linalg.qr(rng.standard_normal((n, m)))
    return Plane(q[:, :m])


def rotated_plane(rng, base: Plane, tilt: float) -> Plane:
    """Rotate one frame vector of `base` out of plane by `tilt` radians;
    the projector-norm angle to `base` is exactly sin(tilt)."""
    n, m = base.frame.shape
    comp = base.orthogonal_complement().frame
    u = base.frame[:, 0]
    v = comp @ _unit(rng.standard_normal(comp.shape[1]))
    f = base.frame.copy()
    f[:, 0] = math.cos(tilt) * u + math.sin(tilt) * v
    return Plane(f)


def _unit(v):
    return v / np.linalg.norm(v)


def random_rotation(rng, n):
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    return q * np.sign(np.diag(r))


def basis_perturbation_trials(trials: int, seed: int = 0):
    """Pairs of orthonormal bases at controlled pairwise distance; checks
    ang(X, Y) <= 2 l alpha.  Returns the number of violations."""
    rng = np.random.default_rng(seed)
    violations = 0
    for _ in range(trials):
        n = rng.integers(2, 6)
        l = rng.integers(1, n + 1)
        x = random_plane(rng, n, l)
        rot = _small_rotation(rng, n, rng.uniform(0.0, 0.15))
        y_frame = rot @ x.frame
        alpha = float(np.max(np.linalg.norm(y_frame - x.frame, axis=0)))
        if angle(x, Plane(y_frame)) > 2.0 * l * alpha + 1e-12:
            violations += 1
    return violations


def _small_rotation(rng, n, scale):
    a = rng.standard_normal((n, n)) * scale
    skew = (a - a.T) / 2.0
    from scipy.linalg import expm

    return expm(skew)


def gram_schmidt_trials(trials: int, seed: int = 0):
    """Random perturbed-basis runs; counts violations of the logged
    per-step bounds and the output-angle bound."""
    rng = np.random.default_rng(seed)
    violations = 0
    for _ in range(trials):
        n = int(rng.integers(2, 6))
        m = int(rng.integers(1, min(n, 3) + 1))
        base = random_plane(rng, n, m)
        consts = LemmaConstants(m, 2 * m + 1)
        eps = consts.eps1 / 2.0
        h = base.frame.T + rng.uniform(-1.0, 1.0, (m, n)) * (eps / math.sqrt(n)) * 0.99
        _, log = gram_schmidt_perturbed(base, h)
        if np.any(log["dev_v_minus_h"] >= log["bound_v_minus_h"]):
            violations += 1
        if np.any(log["dev_norm"] >= log["bound_norm"]):
            violations += 1
        if log["angle"] > log["angle_bound"] + 1e-12:
            violations += 1
    return violations


def strip_ball_trials(trials: int, seed: int = 0):
    """Random strips inside a plane intersected with random balls; checks
    the exact intersection measure against 2^m s^(m-1) d."""
    from tpsurf.simplicial import _circle_polygon_area

    rng = np.random.default_rng(seed)
    violations = 0
    for _ in range(trials):
        m = int(rng.integers(1, 3))
        d = float(rng.uniform(0.01, 2.0))
        s = float(rng.uniform(0.05, 3.0))
        a = rng.standard_normal(m) * 2.0
        if m == 1:
            # strip around the origin of width 2d on a line; ball = interval
            lo, hi = max(-d, a[0] - s), min(d, a[0] + s)
            measure = max(0.0, hi - lo)
        else:
            box = np.array(
                [[-3.0 * s - 5.0, -d], [3.0 * s + 5.0, -d], [3.0 * s + 5.0, d], [-3.0 * s - 5.0, d]]
            )
            measure = _circle_polygon_area(box, a, s)
        if measure > 2.0**m * s ** (m - 1) * d + 1e-9:
            violations += 1
    return violations


def projected_measure_trials(trials: int, seed: int = 0):
    """Random plane pairs at half the admissible angle; checks the
    projected-measure lower bound through the library routine."""
    from tpsurf.grassmann import projected_measure_ratio

    rng = np.random.default_rng(seed)
    violations = 0
    for _ in range(trials):
        n = int(rng.integers(2, 6))
        m = int(rng.integers(1, n))
        eps_max = 1.0 / (m * 2.0**m)
        tilt = math.asin(eps_max * 0.5)
        h2 = random_plane(rng, n, m)
        h1 = rotated_plane(rng, h2, tilt * rng.uniform(0.1, 1.0))
        try:
            projected_measure_ratio(h1, h2)
        except Exception:
            violations += 1
    return violations


def subset_cloud(cloud: QuadratureCloud, idx) -> QuadratureCloud:
    sub = QuadratureCloud.__new__(QuadratureCloud)
    sub.points = cloud.points[idx]
    sub.weights = cloud.weights[idx]
    sub.frames = cloud.frames[idx]
    sub.parents = cloud.parents[idx]
    sub.source_total_measure = float(np.sum(sub.weights))
    sub.max_parent_diameter = cloud.max_parent_diameter
    sub.intrinsic_dim = cloud.intrinsic_dim
    sub.plane_rule = cloud.plane_rule
    return sub


def transformed_cloud(cloud: QuadratureCloud, rotation=None, translation=None, scale=None):
    pts = cloud.points
    frames = cloud.frames
    weights = cloud.weights
    m = cloud.intrinsic_dim
    if scale is not None:
        pts = pts * scale
        weights = weights * scale**m
    if rotation is not None:
        pts = pts @ rotation.T
        frames = np.einsum("ab,kbm->kam", rotation, frames)
    if translation is not None:
        pts = pts + translation
    sub = QuadratureCloud.__new__(QuadratureCloud)
    sub.points = pts
    sub.weights = weights
    sub.frames = frames
    sub.parents = cloud.parents
    sub.source_total_measure = float(np.sum(weights))
    sub.max_parent_diameter = cloud.max_parent_diameter * (scale or 1.0)
    sub.intrinsic_dim = m
    sub.plane_rule = cloud.plane_rule
    return sub
