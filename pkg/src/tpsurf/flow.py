"""Projected gradient descent on the repulsion energy under a total
measure constraint.

Steps follow the negative energy gradient with its measure-changing
component projected out, then rescale uniformly about the area centroid
to restore the target measure exactly (the constraint that prevents the
trivial energy decrease by inflation).  Armijo backtracking guarantees
accepted steps strictly decrease the energy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgumentError, PreconditionError
from .simplicial import SimplicialSet, quadrature
from .tpe import energy, gradient, pair_stats

SERIES_COLUMNS = ("step", "energy", "measure", "max_inv_rtp", "min_sep", "step_size")


@dataclass
class FlowPolicy:
    armijo_c: float = 1e-4
    shrink: float = 0.5
    max_backtracks: int = 30
    grow: float = 2.0
    min_aspect: float = 0.02
    audit_every: int = 10
    audit_vertices: int = 5
    audit_tol: float = 1e-5


@dataclass
class FlowState:
    mesh: SimplicialSet
    step: int
    step_size: float
    energy_history: list
    measure_target: float
    status: str = "running"
    series: list = field(default_factory=list)
    audits: list = field(default_factory=list)
    critical_exponent: bool = False
    prev_vertices: np.ndarray | None = None
    prev_gradient: np.ndarray | None = None


def _area_centroid(mesh: SimplicialSet) -> np.ndarray:
    w = mesh.per_simplex_measure
    c = mesh.centroids()
    return (w[:, None] * c).sum(axis=0) / np.sum(w)


def _rescaled(mesh: SimplicialSet, target: float) -> SimplicialSet:
    lam = (target / mesh.total_measure) ** (1.0 / mesh.intrinsic_dim)
    c = _area_centroid(mesh)
    verts = c + lam * (mesh.vertices - c)
    return SimplicialSet(verts, mesh.simplices, mesh.intrinsic_dim)


def _measure_gradient(mesh: SimplicialSet) -> np.ndarray:
    """Gradient of the total measure with respect to vertex positions."""
    edges = mesh.edge_matrices
    gram = np.einsum("tnk,tnl->tkl", edges, edges)
    gram_inv = np.linalg.inv(gram)
    w = mesh.per_simplex_measure
    ge = w[:, None, None] * np.einsum("tnk,tkl->tnl", edges, gram_inv)
    out = np.zeros_like(mesh.vertices)
    m = mesh.intrinsic_dim
    np.add.at(out, mesh.simplices[:, 0], -np.sum(ge, axis=2))
    for k in range(m):
        np.add.at(out, mesh.simplices[:, k + 1], ge[:, :, k])
    return out


def _mesh_energy(mesh: SimplicialSet, q: float, threads: int) -> float:
    return energy(quadrature(mesh, "centroid"), q, threads=threads).total_energy


def _min_aspect(mesh: SimplicialSet) -> float:
    if mesh.intrinsic_dim != 2:
        return math.inf
    pts = mesh.vertices[mesh.simplices]
    e = np.stack(
        [pts[:, 1] - pts[:, 0], pts[:, 2] - pts[:, 1], pts[:, 0] - pts[:, 2]], axis=1
    )
    longest = np.max(np.linalg.norm(e, axis=2), axis=1)
    return float(np.min(2.0 * mesh.per_simplex_measure / longest**2))


def flow_step(
    state: FlowState, q: float, policy: FlowPolicy | None = None, threads: int = 1
) -> FlowState:
    """One projected, measure-preserving Armijo descent step.

    Trial points are rescaled to the target measure before the Armijo
    test, so accepted energies decrease monotonically along the
    constraint manifold.  Exhausted backtracking sets status
    `stagnated` (not an error).
    """
    policy = policy or FlowPolicy()
    mesh = state.mesh
    e0 = (
        state.energy_history[-1]
        if state.energy_history
        else _mesh_energy(mesh, q, threads)
    )
    g = gradient(mesh, q, "analytic", threads=threads)
    gm = _measure_gradient(mesh)
    gm_norm2 = float(np.sum(gm * gm))
    if gm_norm2 > 0:
        coef = float(np.sum(g * gm)) / gm_norm2
        g_tan = g - coef * gm
    else:
        g_tan = g
    slope = -float(np.sum(g * g_tan))  # directional derivative along -g_tan

    if not np.any(g_tan):
        state.energy_history.append(e0)
        state.step += 1
        return state

    # Barzilai-Borwein step proposal, safeguarded by the Armijo test below
    t = state.step_size
    if state.prev_vertices is not None and state.prev_gradient is not None:
        dx = (mesh.vertices - state.prev_vertices).ravel()
        dg = (g_tan - state.prev_gradient).ravel()
        dgg = float(dg @ dg)
        if dgg > 0:
            bb = float(dx @ dg) / dgg
            if bb > 0 and math.isfinite(bb):
                t = min(max(bb, 1e-6 * state.step_size), 1e6 * state.step_size)
    accepted = False
    for _ in range(policy.max_backtracks):
        trial_raw = SimplicialSet(
            mesh.vertices - t * g_tan, mesh.simplices, mesh.intrinsic_dim
        )
        try:
            trial = _rescaled(trial_raw, state.measure_target)
        except Exception:
            t *= policy.shrink
            continue
        e_t = _mesh_energy(trial, q, threads)
        if math.isnan(e_t):
            state.status = "nan-abort"
            return state
        if e_t <= e0 + policy.armijo_c * t * slope:
            accepted = True
            break
        t *= policy.shrink
    if not accepted:
        state.status = "stagnated"
        state.step_size = t
        return state

    if not e_t < e0:
        raise PreconditionError("accepted step failed to decrease the energy")
    state.prev_vertices = mesh.vertices.copy()
    state.prev_gradient = g_tan
    state.mesh = trial
    state.energy_history.append(e_t)
    state.step += 1
    state.step_size = t * policy.grow
    if _min_aspect(trial) < policy.min_aspect:
        state.status = "quality-stop"
    return state


def _audit_gradient(mesh: SimplicialSet, q: float, rng, policy: FlowPolicy, threads: int):
    """Spot check: analytic vs central-difference on a few vertices."""
    g = gradient(mesh, q, "analytic", threads=threads)
    scale = float(np.max(np.abs(g)))
    if scale == 0.0:
        return 0.0
    verts = mesh.vertices
    pick = rng.choice(len(verts), size=min(policy.audit_vertices, len(verts)), replace=False)
    h_base = 1e-5 * float(np.mean(mesh.simplex_diameters))
    worst = 0.0
    for vi in pick:
        for c in range(verts.shape[1]):
            moved = verts.copy()
            moved[vi, c] += h_base
            ep = _mesh_energy(SimplicialSet(moved, mesh.simplices, mesh.intrinsic_dim), q, threads)
            moved[vi, c] -= 2 * h_base
            em = _mesh_energy(SimplicialSet(moved, mesh.simplices, mesh.intrinsic_dim), q, threads)
            fd = (ep - em) / (2 * h_base)
            worst = max(worst, abs(fd - g[vi, c]) / scale)
    return worst


def flow_run(
    mesh: SimplicialSet,
    q: float,
    steps: int,
    policy: FlowPolicy | None = None,
    threads: int = 1,
    audit: bool = True,
    seed: int = 0,
    initial_step: float | None = None,
    callbacks=None,
) -> FlowState:
    """Run the constrained descent, recording the per-step series
    (energy, measure, max inv_rtp, min separation, step size)."""
    if steps < 1:
        raise InvalidArgumentError("steps must be >= 1")
    policy = policy or FlowPolicy()
    rng = np.random.default_rng(seed)
    m = mesh.intrinsic_dim
    critical = q == 2 * m

    cloud = quadrature(mesh, "centroid")
    e0 = energy(cloud, q, threads=threads).total_energy
    if initial_step is None:
        g = gradient(mesh, q, "analytic", threads=threads)
        gmax = float(np.max(np.abs(g)))
        initial_step = 0.01 * mesh.diameter() / gmax if gmax > 0 else 1.0
    state = FlowState(
        mesh=mesh,
        step=0,
        step_size=initial_step,
        energy_history=[e0],
        measure_target=mesh.total_measure,
        critical_exponent=critical,
    )

    def record():
        cl = quadrature(state.mesh, "centroid")
        kmax, dmin = pair_stats(cl, threads=threads)
        state.series.append(
            (
                state.step,
                state.energy_history[-1],
                state.mesh.total_measure,
                kmax,
                dmin,
                state.step_size,
            )
        )

    record()
    for _ in range(steps):
        state = flow_step(state, q, policy, threads)
        if state.status in ("nan-abort",):
            break
        record()
        if audit and policy.audit_every and state.step % policy.audit_every == 0:
            err = _audit_gradient(state.mesh, q, rng, policy, threads)
            state.audits.append((state.step, err))
            if err > policy.audit_tol:
                raise PreconditionError(
                    f"gradient audit failed at step {state.step}: rel err {err:.3e}"
                )
        if callbacks:
            for cb in callbacks:
                cb(state)
        if state.status in ("stagnated", "quality-stop"):
            break
    if state.status == "running":
        state.status = "done"
    return state


def save_series(state: FlowState, path):
    """CSV time series with 17-significant-digit floats."""
    with open(path, "w") as fh:
        if state.critical_exponent:
            fh.write("# warning: critical exponent q = 2m (outside the guaranteed range)\n")
        fh.write(",".join(SERIES_COLUMNS) + "\n")
        for row in state.series:
            fh.write(
                ",".join(
                    str(int(v)) if i == 0 else f"{v:.17g}" for i, v in enumerate(row)
                )
                + "\n"
            )
