"""Tangent-point repulsion energies of quadrature clouds.

The kernel between cloud points x (with plane H_x) and y is
inv_rtp(x, H_x, y) = 2 |Q_{H_x}(y - x)| / |y - x|^2, the reciprocal of
the radius of the smallest sphere through y tangent to x + H_x.  The
global energy is the double sum of inv_rtp^q weighted by the quadrature
measure, over ordered pairs from distinct parent simplices.
"""

from __future__ import annotations

import math
import time
import warnings
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass

import numpy as np

from . import _kernels
from ._reduction import reproducible_sum
from .errors import InvalidArgumentError, PreconditionError
from .grassmann import Plane
from .simplicial import QuadratureCloud, SimplicialSet, quadrature

ROW_CHUNK = 256


def inv_rtp(x, plane: Plane, y) -> float:
    """Reciprocal tangent-point radius 2 dist(y, x+H_x) / |y-x|^2.

    Returns 0 when y lies in the affine plane x + H_x (within a relative
    1e-14 of |y - x|).  The diagonal x == y is not in the domain.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    d = y - x
    r2 = float(d @ d)
    if r2 == 0.0:
        raise InvalidArgumentError("inv_rtp is undefined on the diagonal x == y")
    u = d - plane.frame @ (plane.frame.T @ d)
    s = float(np.linalg.norm(u))
    if s <= 1e-14 * math.sqrt(r2):
        return 0.0
    return 2.0 * s / r2


@dataclass
class EnergyReport:
    """Total energy of a cloud plus bookkeeping of the summation."""

    q: float
    total_energy: float
    pair_count: int
    excluded_pairs: int
    acceleration_error_bound: float
    elapsed: float
    mode: str = "exact"
    backend: str = ""
    critical_exponent: bool = False

    def as_dict(self) -> dict:
        return {
            "q": self.q,
            "total_energy": self.total_energy,
            "pair_count": self.pair_count,
            "excluded_pairs": self.excluded_pairs,
            "acceleration_error_bound": self.acceleration_error_bound,
            "elapsed": self.elapsed,
            "mode": self.mode,
            "backend": self.backend,
            "critical_exponent": self.critical_exponent,
        }


@dataclass
class LocalEnergy:
    center: np.ndarray
    radius: float
    value: float


def _check_q(q: float, m: int):
    if q <= 0:
        raise InvalidArgumentError("q must be positive")
    if q < 2 * m:
        warnings.warn(
            f"q={q} is below the scale-invariant exponent 2m={2 * m}; "
            "regularity guarantees do not apply",
            stacklevel=3,
        )
    return q == 2 * m


def _chunk_ranges(n: int, chunk: int = ROW_CHUNK):
    return [(i, min(i + chunk, n)) for i in range(0, n, chunk)]


def _exact_sum(cloud: QuadratureCloud, q, symmetrize, threads, deterministic, backend):
    pts = np.ascontiguousarray(cloud.points)
    wts = np.ascontiguousarray(cloud.weights)
    frames = np.ascontiguousarray(cloud.frames)
    parents = np.ascontiguousarray(cloud.parents, dtype=np.int64)
    n = cloud.size
    rows = np.zeros(n)
    counts = [0, 0]

    def run(rng):
        i0, i1 = rng
        r, inc, exc = _kernels.energy_rows(
            pts, wts, frames, parents, q, i0, i1, symmetrize, backend=backend
        )
        return rng, r, inc, exc

    ranges = _chunk_ranges(n)
    if threads <= 1 or len(ranges) == 1:
        results = map(run, ranges)
        for (i0, i1), r, inc, exc in results:
            rows[i0:i1] = r
            counts[0] += inc
            counts[1] += exc
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futures = [pool.submit(run, rng) for rng in ranges]
            for fut in as_completed(futures):
                (i0, i1), r, inc, exc = fut.result()
                rows[i0:i1] = r
                counts[0] += inc
                counts[1] += exc
    if deterministic:
        total = reproducible_sum(rows)
    else:
        total = float(np.sum(rows))
    return total, counts[0], counts[1]


def energy(
    cloud: QuadratureCloud,
    q: float,
    mode: str = "exact",
    theta: float = 0.5,
    symmetrize: bool = False,
    threads: int = 1,
    deterministic: bool = True,
    backend: str | None = None,
) -> EnergyReport:
    """Total repulsion energy of the cloud.

    `exact` visits every ordered pair from distinct parent simplices;
    `bvh` clusters well-separated groups and carries a certified
    first-order error bound (see tpsurf.bvh).  With `deterministic`
    (default) the reduction is order-invariant, so reports are
    byte-identical across thread counts.
    """
    critical = _check_q(q, cloud.intrinsic_dim)
    t0 = time.perf_counter()
    if mode == "exact":
        total, included, excluded = _exact_sum(
            cloud, q, symmetrize, threads, deterministic, backend
        )
        bound = 0.0
    elif mode == "bvh":
        from .bvh import bvh_energy

        if symmetrize:
            raise InvalidArgumentError("bvh mode supports the asymmetric kernel only")
        total, included, excluded, bound = bvh_energy(cloud, q, theta)
    else:
        raise InvalidArgumentError(f"unknown energy mode {mode!r}")
    elapsed = time.perf_counter() - t0
    return EnergyReport(
        q=q,
        total_energy=total,
        pair_count=included,
        excluded_pairs=excluded,
        acceleration_error_bound=bound,
        elapsed=0.0 if deterministic else elapsed,
        mode=mode,
        backend=_kernels.backend_name() if backend is None else backend,
        critical_exponent=critical,
    )


def _subset_cloud(cloud: QuadratureCloud, idx) -> QuadratureCloud | None:
    if len(idx) == 0:
        return None
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


def local_energy(cloud: QuadratureCloud, x, r: float, q: float, threads: int = 1) -> LocalEnergy:
    """Energy restricted to pairs inside the closed ball B(x, r); exact mode."""
    if r <= 0:
        raise InvalidArgumentError("radius must be positive")
    x = np.asarray(x, dtype=np.float64)
    idx = cloud.subset_in_ball(x, r)
    sub = _subset_cloud(cloud, idx)
    if sub is None or sub.size < 2:
        return LocalEnergy(center=x, radius=r, value=0.0)
    total, _, _ = _exact_sum(sub, q, False, threads, True, None)
    return LocalEnergy(center=x, radius=r, value=total)


def pair_stats(cloud: QuadratureCloud, threads: int = 1, backend: str | None = None):
    """(max inv_rtp, min separation) over ordered cross-parent pairs."""
    pts = np.ascontiguousarray(cloud.points)
    frames = np.ascontiguousarray(cloud.frames)
    parents = np.ascontiguousarray(cloud.parents, dtype=np.int64)
    kmax, dmin = 0.0, math.inf
    for i0, i1 in _chunk_ranges(cloud.size):
        k, d = _kernels.pair_stats_rows(pts, frames, parents, i0, i1, backend=backend)
        kmax = max(kmax, float(np.max(k)))
        dmin = min(dmin, float(np.min(d)))
    return kmax, dmin


def scaling_check(cloud: QuadratureCloud, q: float, lambdas, threads: int = 1):
    """Least-squares slope of log E_q(lambda * cloud) against log lambda.

    The discrete sum obeys E(lambda) = lambda^(2m - q) E(1) exactly, so
    the fitted slope equals 2m - q to rounding.
    """
    lambdas = [float(v) for v in lambdas]
    if len(lambdas) < 3:
        raise InvalidArgumentError("need at least 3 scale factors")
    if any(v <= 0 for v in lambdas):
        raise InvalidArgumentError("scale factors must be positive")
    m = cloud.intrinsic_dim
    logs = []
    for lam in lambdas:
        scaled = QuadratureCloud.__new__(QuadratureCloud)
        scaled.points = cloud.points * lam
        scaled.weights = cloud.weights * lam**m
        scaled.frames = cloud.frames
        scaled.parents = cloud.parents
        scaled.source_total_measure = cloud.source_total_measure * lam**m
        scaled.max_parent_diameter = cloud.max_parent_diameter * lam
        scaled.intrinsic_dim = m
        scaled.plane_rule = cloud.plane_rule
        rep = energy(scaled, q, threads=threads)
        if rep.total_energy <= 0:
            raise PreconditionError("scaling fit needs strictly positive energies")
        logs.append(math.log(rep.total_energy))
    x = np.log(lambdas)
    y = np.array(logs)
    slope = float(np.polyfit(x, y, 1)[0])
    return slope


# ---------------------------------------------------------------------------
# analytic gradient (centroid rule)


def _centroid_cloud_arrays(sset: SimplicialSet):
    cloud = quadrature(sset, "centroid")
    edges = np.ascontiguousarray(sset.edge_matrices)
    gram = np.einsum("tnk,tnl->tkl", edges, edges)
    gram_inv = np.linalg.inv(gram)
    return cloud, edges, gram_inv


def energy_of_vertices(sset: SimplicialSet, q: float, threads: int = 1) -> float:
    """Energy of the centroid-rule cloud of the given mesh."""
    cloud = quadrature(sset, "centroid")
    return energy(cloud, q, threads=threads).total_energy


def gradient(
    sset: SimplicialSet,
    q: float,
    scheme: str = "analytic",
    fd_step: float = 1e-5,
    threads: int = 1,
) -> np.ndarray:
    """Derivative of the centroid-rule energy with respect to vertices.

    The analytic scheme backpropagates through the kernel, the simplex
    centroids, the Gram-determinant measures and the edge-matrix
    orthonormalization (via the projector it spans).  `central-diff`
    differentiates numerically with step fd_step * (mean incident edge
    length) per vertex and serves as the oracle.
    """
    if scheme == "central-diff":
        return _fd_gradient(sset, q, fd_step, threads)
    if scheme != "analytic":
        raise InvalidArgumentError(f"unknown gradient scheme {scheme!r}")
    cloud, edges, gram_inv = _centroid_cloud_arrays(sset)
    pts = np.ascontiguousarray(cloud.points)
    wts = np.ascontiguousarray(cloud.weights)
    frames = np.ascontiguousarray(cloud.frames)
    parents = np.ascontiguousarray(cloud.parents, dtype=np.int64)
    n_pts = cloud.size
    gpos = np.zeros_like(pts)
    gw = np.zeros(n_pts)
    gedge = np.zeros_like(edges)
    for i0, i1 in _chunk_ranges(n_pts, 128):
        gp, gww, ge = _kernels.gradient_rows(
            pts, wts, frames, edges, gram_inv, parents, q, i0, i1
        )
        gpos += gp
        gw += gww
        gedge += ge

    # chain rule through the measure: dw/dE = w * E * gram_inv
    gedge += gw[:, None, None] * wts[:, None, None] * np.einsum(
        "tnk,tkl->tnl", edges, gram_inv
    )

    m = sset.intrinsic_dim
    vgrad = np.zeros_like(sset.vertices)
    simp = sset.simplices
    # centroid dependence: every vertex of the simplex moves the point
    for k in range(m + 1):
        np.add.at(vgrad, simp[:, k], gpos / (m + 1))
    # edge-matrix dependence: column k is v_{k+1} - v_0
    col_sum = np.sum(gedge, axis=2)
    np.add.at(vgrad, simp[:, 0], -col_sum)
    for k in range(m):
        np.add.at(vgrad, simp[:, k + 1], gedge[:, :, k])
    return vgrad


def _fd_gradient(sset: SimplicialSet, q: float, rel_step: float, threads: int) -> np.ndarray:
    verts = sset.vertices
    simp = sset.simplices
    # mean incident edge length per vertex sets the step scale
    edge_len = np.zeros(len(verts))
    edge_cnt = np.zeros(len(verts))
    m = sset.intrinsic_dim
    for a in range(m + 1):
        for b in range(a + 1, m + 1):
            lengths = np.linalg.norm(verts[simp[:, a]] - verts[simp[:, b]], axis=1)
            for col, other in ((a, lengths), (b, lengths)):
                np.add.at(edge_len, simp[:, col], other)
                np.add.at(edge_cnt, simp[:, col], 1.0)
    steps = rel_step * edge_len / np.maximum(edge_cnt, 1.0)

    grad = np.zeros_like(verts)
    for vi in range(len(verts)):
        h = steps[vi]
        for c in range(verts.shape[1]):
            for sgn in (+1.0, -1.0):
                moved = verts.copy()
                moved[vi, c] += sgn * h
                e = energy_of_vertices(
                    SimplicialSet(moved, simp, m), q, threads=threads
                )
                grad[vi, c] += sgn * e
            grad[vi, c] /= 2.0 * h
    return grad
