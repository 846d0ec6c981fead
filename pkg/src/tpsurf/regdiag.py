"""Regularity diagnostics: plane-fit beta numbers, density-ratio curves,
good couples, the stopping-distance construction, and the exponent fits
for tangent-plane oscillation.

All thresholds derive from a resolved constant set (delta, eta, lambda,
and the plane-cover size J); the resolved values are echoed into every
report so runs are self-describing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .errors import (
    InsufficientDataError,
    InvalidArgumentError,
    IterationLimitError,
    PreconditionError,
)
from .grassmann import LemmaConstants, Plane, unit_ball_volume
from .simplicial import QuadratureCloud, SimplicialSet, local_measure
from .tpe import local_energy

DEFAULT_DELTA = 0.05


# ---------------------------------------------------------------------------
# resolved constants


def _batch_plane_angles(frames, ref_frame):
    """sin(largest principal angle) between each frame and the reference."""
    m = ref_frame.shape[1]
    g = np.einsum("jnk,nl->jkl", frames, ref_frame)
    if m == 1:
        smin = np.abs(g[:, 0, 0])
    elif m == 2:
        a, b = g[:, 0, 0], g[:, 0, 1]
        c, d = g[:, 1, 0], g[:, 1, 1]
        q1 = a * a + b * b + c * c + d * d
        q2 = np.sqrt(
            np.clip((a * a + b * b - c * c - d * d) ** 2 + 4.0 * (a * c + b * d) ** 2, 0.0, None)
        )
        smin = np.sqrt(np.clip(0.5 * (q1 - q2), 0.0, None))
    else:
        smin = np.linalg.svd(g, compute_uv=False)[:, -1]
    return np.sqrt(np.clip(1.0 - smin * smin, 0.0, None))


def build_plane_net(frames, eps: float):
    """Greedy cover of the given planes by angle-balls of radius eps.

    Returns (center_indices, assignment): each input plane is within eps
    of its assigned center, and centers are pairwise more than eps apart.
    Deterministic: planes are scanned in index order.
    """
    count = len(frames)
    centers: list[int] = []
    assignment = np.full(count, -1, dtype=np.int64)
    for t in range(count):
        if centers:
            angles = _batch_plane_angles(frames[np.array(centers)], frames[t])
            k = int(np.argmin(angles))
            if angles[k] <= eps:
                assignment[t] = k
                continue
        centers.append(t)
        assignment[t] = len(centers) - 1
    return np.array(centers, dtype=np.int64), assignment


@dataclass
class RegularityConstants:
    """Resolved diagnostic constants for one (m, n, q) configuration.

    delta/eta are the cone-opening and flatness tolerances (defaults
    delta=0.05, eta=delta/5, the desk-scale choice; the far smaller value
    closing 6 c3 (delta+eta) < eps1 is reported as delta_strict and can
    be requested with strict=True).  J is the size of the greedy
    eta^2-cover of the cloud's plane set and lambda = 1/(3J).
    """

    m: int
    n: int
    q: float
    delta: float
    eta: float
    lam: float
    J: int
    delta_strict: float
    strict_satisfied: bool
    lemma: LemmaConstants
    net_centers: np.ndarray | None = None
    net_assignment: np.ndarray | None = None

    @property
    def omega_m(self) -> float:
        return self.lemma.omega_m

    def log_a1(self) -> float:
        """log of the density-radius coefficient a_1 (computed in log space;
        the value itself underflows for small eta)."""
        q, m = self.q, self.m
        return (
            math.log(self.lam)
            + 2.0 * math.log(self.omega_m)
            + (4.0 * m + q) * math.log(self.eta)
            - math.log(2.0)
            - q * math.log(9.0)
        ) / (q - 2.0 * m)

    def a1(self) -> float:
        return math.exp(self.log_a1())

    def r1(self, energy_value: float) -> float:
        """Radius up to which the half-density bound is guaranteed, given
        the measured energy: R_1 = a_1 / E^(1/(q-2m))."""
        if energy_value <= 0.0:
            return math.inf
        return math.exp(self.log_a1() - math.log(energy_value) / (self.q - 2.0 * self.m))

    def as_dict(self) -> dict:
        return {
            "m": self.m,
            "n": self.n,
            "q": self.q,
            "delta": self.delta,
            "eta": self.eta,
            "lambda": self.lam,
            "J": self.J,
            "delta_strict": self.delta_strict,
            "strict_satisfied": self.strict_satisfied,
            "log_a1": self.log_a1(),
            "lemma": self.lemma.as_dict(),
        }


def resolve_constants(
    cloud: QuadratureCloud,
    q: float,
    delta: float | None = None,
    eta: float | None = None,
    strict: bool = False,
) -> RegularityConstants:
    m = cloud.intrinsic_dim
    n = cloud.ambient_dim
    lemma = LemmaConstants(m, q)
    # largest delta satisfying 6 c3 (delta + delta/5) < eps1
    delta_strict = 5.0 * lemma.eps1 / (36.0 * lemma.c3) * (1.0 - 1e-9)
    if delta is None:
        delta = delta_strict if strict else DEFAULT_DELTA
    if eta is None:
        eta = delta / 5.0
    if not (0.0 < delta < 1.0 / 9.0):
        raise InvalidArgumentError("delta must lie in (0, 1/9)")
    if eta > delta / 5.0 * (1.0 + 1e-12):
        raise PreconditionError("need eta <= delta/5")
    strict_ok = 6.0 * lemma.c3 * (delta + eta) < lemma.eps1
    centers, assignment = build_plane_net(cloud.frames, eta * eta)
    J = len(centers)
    return RegularityConstants(
        m=m,
        n=n,
        q=q,
        delta=delta,
        eta=eta,
        lam=1.0 / (3.0 * J),
        J=J,
        delta_strict=delta_strict,
        strict_satisfied=bool(strict_ok),
        lemma=lemma,
        net_centers=centers,
        net_assignment=assignment,
    )


# ---------------------------------------------------------------------------
# beta numbers


@dataclass
class BetaFit:
    """Certified upper bound on the plane-fit beta number at one scale.

    `value` is the achieved max-distance ratio of the best plane found
    (an upper bound on the true infimum); `lower_bound` is the PCA
    residual RMS bound (max >= rms, valid for every plane); the best of
    the random restarts is recorded to gauge the bracket width.
    """

    value: float
    plane: Plane
    lower_bound: float
    restart_best: float

    def __iter__(self):
        yield self.value
        yield self.plane


def _beta_objective(rel, d, frame):
    rej = rel - (rel @ frame) @ frame.T
    return float(np.max(np.linalg.norm(rej, axis=1))) / d


def _descend_plane(rel, d, frame0, iters=200, tol=1e-10):
    """Pattern-search descent over the plane's tangent chart."""
    n, m = frame0.shape
    comp = Plane(frame0).orthogonal_complement().frame  # (n, n-m)
    codim = comp.shape[1]

    def make_frame(tilt):
        raw = frame0 + comp @ tilt
        q, r = np.linalg.qr(raw)
        signs = np.sign(np.diag(r))
        signs[signs == 0] = 1.0
        return q * signs

    tilt = np.zeros((codim, m))
    best = _beta_objective(rel, d, frame0)
    step = 0.25
    for _ in range(iters):
        improved = False
        for a in range(codim):
            for b in range(m):
                for sgn in (1.0, -1.0):
                    cand = tilt.copy()
                    cand[a, b] += sgn * step
                    val = _beta_objective(rel, d, make_frame(cand))
                    if val < best - 1e-16:
                        best, tilt = val, cand
                        improved = True
        if not improved:
            step *= 0.5
            if step < tol:
                break
    return best, make_frame(tilt)


def beta(cloud: QuadratureCloud, x, d: float, restarts: int = 32, seed: int = 0) -> BetaFit:
    """Scale-normalized minimax distance of the local cloud to a plane
    through x: inf over m-planes P of max_{y in B(x,d)} dist(y, x+P)/d.

    Initialized from weighted PCA and refined by pattern-search descent;
    the result is a certified upper bound with a PCA-residual lower
    bound bracketing the true value.
    """
    x = np.asarray(x, dtype=np.float64)
    idx = cloud.subset_in_ball(x, d)
    m = cloud.intrinsic_dim
    if len(idx) < m + 1:
        raise InsufficientDataError(
            f"ball of radius {d} holds {len(idx)} points; need at least {m + 1}"
        )
    rel = cloud.points[idx] - x
    w = cloud.weights[idx]

    # weighted (uncentered: the plane is pinned at x) second-moment PCA
    moment = np.einsum("k,kn,kl->nl", w, rel, rel)
    eigval, eigvec = np.linalg.eigh(moment)
    frame0 = eigvec[:, -m:][:, ::-1]

    # certified lower bound: max >= weighted rms, and the pca residual
    # minimizes the rms over all planes
    total_w = float(np.sum(w))
    rms = math.sqrt(max(float(np.sum(eigval[: rel.shape[1] - m])), 0.0) / total_w)
    lower = rms / d

    value, frame = _descend_plane(rel, d, frame0)
    rng = np.random.default_rng(seed)
    restart_best = math.inf
    n = rel.shape[1]
    for _ in range(restarts):
        raw = rng.standard_normal((n, m))
        q, _ = np.linalg.qr(raw)
        val, fr = _descend_plane(rel, d, q[:, :m], iters=40)
        restart_best = min(restart_best, val)
        if val < value:
            value, frame = val, fr
    return BetaFit(value=value, plane=Plane(frame), lower_bound=min(lower, value), restart_best=restart_best)


@dataclass
class BetaCurve:
    center: np.ndarray
    samples: list  # (radius, beta, plane)


def beta_curve(cloud: QuadratureCloud, x, radii, restarts: int = 8, seed: int = 0) -> BetaCurve:
    samples = []
    for d in radii:
        fit = beta(cloud, x, float(d), restarts=restarts, seed=seed)
        samples.append((float(d), fit.value, fit.plane))
    return BetaCurve(center=np.asarray(x, dtype=np.float64), samples=samples)


@dataclass
class ExponentFit:
    pairs: list  # (log scale, log quantity)
    slope: float
    intercept: float
    r_squared: float
    extras: dict = field(default_factory=dict)
    flat_input: bool = False


def _fit_loglog(pairs) -> tuple[float, float, float]:
    xs = np.array([p[0] for p in pairs])
    ys = np.array([p[1] for p in pairs])
    slope, intercept = np.polyfit(xs, ys, 1)
    pred = slope * xs + intercept
    ss_res = float(np.sum((ys - pred) ** 2))
    ss_tot = float(np.sum((ys - np.mean(ys)) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return float(slope), float(intercept), r2


def beta_decay_fit(
    cloud: QuadratureCloud,
    probes,
    radii,
    q: float,
    energy_value: float,
    restarts: int = 8,
) -> ExponentFit:
    """Slope of log(max-over-probes beta) against log radius.

    Smooth inputs decay at least linearly, well above the guaranteed
    exponent kappa = (q-2m)/(q+4m).  The empirical balance constant
    A2_hat = max beta^(4m+q) d^(2m-q) / E is recorded in extras.
    """
    radii = sorted(float(r) for r in radii)
    if radii[-1] / radii[0] < 10.0 * (1.0 - 1e-9):
        raise PreconditionError("radii must span at least one decade")
    m = cloud.intrinsic_dim
    curve = []
    for d in radii:
        worst = 0.0
        usable = 0
        for x in probes:
            try:
                fit = beta(cloud, x, d, restarts=restarts)
            except InsufficientDataError:
                continue
            usable += 1
            worst = max(worst, fit.value)
        if usable:
            curve.append((d, worst))
    if len(curve) < 3:
        raise InsufficientDataError("too few usable radii for a decay fit")
    if all(b < 1e-12 for _, b in curve):
        return ExponentFit(pairs=[], slope=math.nan, intercept=math.nan, r_squared=math.nan, flat_input=True)
    pairs = [(math.log(d), math.log(b)) for d, b in curve if b > 0]
    slope, intercept, r2 = _fit_loglog(pairs)
    a2_hat = max(
        (b ** (4 * m + q)) * d ** (2 * m - q) / energy_value for d, b in curve if b > 0
    ) if energy_value > 0 else math.nan
    return ExponentFit(
        pairs=pairs,
        slope=slope,
        intercept=intercept,
        r_squared=r2,
        extras={"A2_hat": a2_hat, "curve": curve},
    )


# ---------------------------------------------------------------------------
# density-ratio curves


@dataclass
class AhlforsCurve:
    entries: list  # (x, r, ratio)
    r1: float
    witnesses: list  # entries with ratio < 1/2 at radii at or below ~R1


def ahlfors_curve(
    source,
    probes,
    radii,
    constants: RegularityConstants | None = None,
    energy_value: float | None = None,
    cloud: QuadratureCloud | None = None,
) -> AhlforsCurve:
    """Density ratios measure(B(x, r)) / (omega_m r^m) at every probe and
    radius.  Ratios below 1/2 within the guaranteed radius R_1 (computed
    from the measured energy and the resolved constants, with 5% slack)
    are flagged as witnesses; they must not occur on admissible inputs.
    """
    if isinstance(source, SimplicialSet):
        m = source.intrinsic_dim
        measure = lambda x, r: local_measure(source, x, r)
    else:
        m = source.intrinsic_dim
        cl = source

        def measure(x, r):
            idx = cl.subset_in_ball(x, r)
            return float(np.sum(cl.weights[idx]))

    om = unit_ball_volume(m)
    r1 = math.inf
    if constants is not None and energy_value is not None:
        r1 = constants.r1(energy_value)
    entries = []
    witnesses = []
    for x in probes:
        x = np.asarray(x, dtype=np.float64)
        for r in radii:
            ratio = measure(x, float(r)) / (om * float(r) ** m)
            entries.append((x.tolist(), float(r), ratio))
            if ratio < 0.5 and float(r) <= r1 * 1.05:
                witnesses.append((x.tolist(), float(r), ratio))
    return AhlforsCurve(entries=entries, r1=r1, witnesses=witnesses)


# ---------------------------------------------------------------------------
# good couples


@dataclass
class GoodCoupleCertificate:
    x: np.ndarray
    y: np.ndarray
    lam: float
    alpha: float
    d: float
    s_measure: float
    required: float
    member_points: np.ndarray


def good_couple_search(
    cloud: QuadratureCloud, x, y, lam: float, alpha: float
) -> GoodCoupleCertificate | None:
    """Certify (x, y) as a good couple at separation d = |x - y|.

    The witness set S collects cloud points z within alpha^2 d of x whose
    plane rejects y - z by at least alpha d; the certificate requires
    weight(S) >= lam * omega_m * alpha^(2m) * d^m.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if alpha >= 0.5 or alpha <= 0.0:
        raise InvalidArgumentError("alpha must lie in (0, 1/2)")
    d = float(np.linalg.norm(y - x))
    if d == 0.0:
        raise InvalidArgumentError("good couples need distinct points")
    m = cloud.intrinsic_dim
    near = cloud.subset_in_ball(x, alpha * alpha * d)
    if len(near) == 0:
        return None
    rel = y - cloud.points[near]  # y - z
    fr = cloud.frames[near]
    proj = np.einsum("kn,knm->km", rel, fr)
    rej = rel - np.einsum("km,knm->kn", proj, fr)
    qnorm = np.linalg.norm(rej, axis=1)
    members = near[qnorm >= alpha * d]
    s_measure = float(np.sum(cloud.weights[members]))
    required = lam * unit_ball_volume(m) * alpha ** (2 * m) * d**m
    if s_measure >= required and len(members) > 0:
        return GoodCoupleCertificate(
            x=x, y=y, lam=lam, alpha=alpha, d=d,
            s_measure=s_measure, required=required, member_points=members,
        )
    return None


def couple_kernel_floor(cert: GoodCoupleCertificate) -> float:
    """Guaranteed inv_rtp floor (alpha / 9d) for pairs (z in S, w near y)."""
    return cert.alpha / (9.0 * cert.d)


# ---------------------------------------------------------------------------
# stopping distances


@dataclass
class StoppingResult:
    x: np.ndarray
    d_s: float
    case: str  # good-couple-case1 | good-couple-case2
    partner: np.ndarray
    plane_history: list
    radii_history: list
    uncertainty: float
    couple: GoodCoupleCertificate | None = None


def _median_spacing(points) -> float:
    tree = cKDTree(points)
    dist, _ = tree.query(points, k=2)
    return float(np.median(dist[:, 1]))


def stopping_distance(
    cloud: QuadratureCloud,
    x_index: int,
    constants: RegularityConstants,
    max_rounds: int | None = None,
) -> StoppingResult:
    """Discrete cone-growing construction of the stopping distance.

    Starting from the point's own plane, grow the double cone of opening
    delta until it first meets the cloud; if the hit certifies a good
    couple (case 1) or some annulus point sits far from the dominant
    local plane (case 2), stop; otherwise adopt the dominant plane and
    continue (flat position).  Consecutive radii grow by more than a
    factor 2 by construction.
    """
    delta, eta, lam = constants.delta, constants.eta, constants.lam
    if eta > delta / 5.0 * (1.0 + 1e-12):
        raise PreconditionError("need eta <= delta / 5")
    pts = cloud.points
    x = pts[x_index]
    rel = pts - x
    dist = np.linalg.norm(rel, axis=1)
    dist[x_index] = 0.0
    spacing = _median_spacing(pts)
    m = cloud.intrinsic_dim
    om = unit_ball_volume(m)

    frame = cloud.frames[x_index]
    rho_prev = 0.0
    plane_history: list[Plane] = []
    radii_history: list[float] = []
    if max_rounds is None:
        max_rounds = 64

    assignment = constants.net_assignment
    centers = constants.net_centers

    for _ in range(max_rounds):
        qn = np.linalg.norm(rel - (rel @ frame) @ frame.T, axis=1)
        in_cone = (qn >= delta * dist) & (dist > max(rho_prev, 0.0) * (1.0 + 1e-12)) & (dist > 0)
        if not np.any(in_cone):
            raise PreconditionError(
                "growth cone never meets the cloud (flat input at all probed scales)"
            )
        rho = float(np.min(dist[in_cone]))
        plane_history.append(Plane(frame))
        radii_history.append(rho)

        hit_shell = in_cone & (dist <= rho + spacing)
        hit_indices = np.nonzero(hit_shell)[0]
        hit_indices = hit_indices[np.argsort(dist[hit_indices], kind="stable")]

        # case 1: a hit certifies a good couple directly
        for yi in hit_indices:
            cert = good_couple_search(cloud, x, pts[yi], lam, eta)
            if cert is not None and rho / 2.0 <= cert.d <= 2.0 * rho:
                return StoppingResult(
                    x=x, d_s=rho, case="good-couple-case1", partner=pts[yi],
                    plane_history=plane_history, radii_history=radii_history,
                    uncertainty=spacing, couple=cert,
                )

        # dominant plane of the eta^2-ball via the plane cover
        ball = dist <= eta * eta * rho
        ball[x_index] = True
        cells = assignment[ball]
        weights = cloud.weights[ball]
        cell_weight = np.zeros(len(centers))
        np.add.at(cell_weight, cells, weights)
        k0 = int(np.argmax(cell_weight))
        h_star = cloud.frames[centers[k0]]

        # case 2: some annulus point sits far from the dominant plane
        annulus = (dist >= rho / 2.0) & (dist <= 2.0 * rho)
        if np.any(annulus):
            qn_star = np.linalg.norm(
                rel[annulus] - (rel[annulus] @ h_star) @ h_star.T, axis=1
            )
            far = qn_star >= 2.0 * eta * rho
            if np.any(far):
                cand = np.nonzero(annulus)[0][far]
                yi = cand[int(np.argmin(dist[cand]))]
                cert = good_couple_search(cloud, x, pts[yi], lam, eta)
                return StoppingResult(
                    x=x, d_s=rho, case="good-couple-case2", partner=pts[yi],
                    plane_history=plane_history, radii_history=radii_history,
                    uncertainty=spacing, couple=cert,
                )

        # case 3: flat position, adopt the dominant plane and continue
        frame = h_star
        rho_prev = rho
    raise IterationLimitError(f"stopping construction exceeded {max_rounds} rounds")


# ---------------------------------------------------------------------------
# Hoelder exponent of the tangent-plane gradient


@dataclass
class GraphPatch:
    center_index: int
    radius: float
    plane: Plane | None = None  # default: the center point's own plane


def _graph_gradients(rel, frames, base: Plane):
    """Per-point gradient of the local graph over the base plane.

    The tangent plane at a point, read as a linear graph over `base`,
    has gradient B A^{-1} with A/B the in-plane/off-plane components of
    the tangent frame.
    """
    fp = base.frame
    comp = base.orthogonal_complement().frame
    grads = []
    for fr in frames:
        a = fp.T @ fr
        b = comp.T @ fr
        det = np.linalg.det(a)
        if abs(det) < 1e-12:
            return None, None
        grads.append(b @ np.linalg.inv(a))
    return np.stack(grads), comp


def holder_fit(
    cloud: QuadratureCloud,
    patches,
    q: float,
    bins: int = 12,
) -> ExponentFit:
    """Largest oscillation exponent of the graph gradient over patches.

    Per patch, gradients of the local graph are read off the tangent
    planes; pairwise oscillations are normalized by E(x, r)^{1/q} and
    binned by in-plane separation; the fitted upper-envelope slope is the
    reported exponent, with the implied constant and the s=1 (Lipschitz)
    ratio recorded in extras.
    """
    all_sep: list[np.ndarray] = []
    all_osc: list[np.ndarray] = []
    rejected = []
    lipschitz = 0.0
    a3_scale = None
    for patch in patches:
        x = cloud.points[patch.center_index]
        base = patch.plane or Plane(cloud.frames[patch.center_index])
        idx = cloud.subset_in_ball(x, patch.radius)
        if len(idx) < 3:
            continue
        rel = cloud.points[idx] - x
        # graphicality: reject patches holding a nearly vertical pair
        proj = rel @ base.frame
        dmat = rel[:, None, :] - rel[None, :, :]
        pmat = proj[:, None, :] - proj[None, :, :]
        dn = np.linalg.norm(dmat, axis=2)
        pn = np.linalg.norm(pmat, axis=2)
        iu = np.triu_indices(len(idx), k=1)
        vertical = pn[iu] < 0.1 * dn[iu]
        if np.any(vertical):
            k = int(np.argmax(vertical))
            rejected.append(
                {"center_index": patch.center_index,
                 "witness_pair": [int(idx[iu[0][k]]), int(idx[iu[1][k]])]}
            )
            continue
        grads, _ = _graph_gradients(rel, cloud.frames[idx], base)
        if grads is None:
            rejected.append({"center_index": patch.center_index, "witness_pair": None})
            continue
        e_loc = local_energy(cloud, x, patch.radius, q).value
        norm = e_loc ** (1.0 / q) if e_loc > 0 else 1.0
        if a3_scale is None:
            a3_scale = norm
        gd = grads[:, None, :, :] - grads[None, :, :, :]
        osc = np.sqrt(np.einsum("ijab,ijab->ij", gd, gd))[iu]
        sep = pn[iu]
        keep = sep > 1e-12
        all_sep.append(sep[keep])
        all_osc.append(osc[keep] / norm)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratios = osc[keep] / (norm * sep[keep])
        if ratios.size:
            lipschitz = max(lipschitz, float(np.max(ratios)))

    if not all_sep:
        raise InsufficientDataError("no usable graph patches")
    sep = np.concatenate(all_sep)
    osc = np.concatenate(all_osc)
    if np.max(osc) < 1e-12:
        return ExponentFit(pairs=[], slope=math.nan, intercept=math.nan,
                           r_squared=math.nan, flat_input=True,
                           extras={"rejected": rejected})
    # upper envelope over log-spaced separation bins
    lo, hi = float(np.min(sep)), float(np.max(sep))
    edges = np.geomspace(lo * (1 - 1e-12), hi * (1 + 1e-12), bins + 1)
    pairs = []
    for b in range(bins):
        sel = (sep >= edges[b]) & (sep < edges[b + 1])
        if np.any(sel) and np.max(osc[sel]) > 0:
            mid = math.sqrt(edges[b] * edges[b + 1])
            pairs.append((math.log(mid), math.log(float(np.max(osc[sel])))))
    if len(pairs) < 3:
        raise InsufficientDataError("too few oscillation bins for a fit")
    slope, intercept, r2 = _fit_loglog(pairs)
    return ExponentFit(
        pairs=pairs, slope=slope, intercept=intercept, r_squared=r2,
        extras={
            "A3_hat": math.exp(intercept),
            "lipschitz_ratio": lipschitz,
            "rejected": rejected,
        },
    )
