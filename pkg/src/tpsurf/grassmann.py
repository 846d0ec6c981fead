"""Linear algebra of m-dimensional planes in R^n.

Planes are stored as orthonormal frames (n x m column matrices); the
metric on the space of planes is the operator norm of the difference of
orthogonal projectors, computed stably from principal angles so that
nearly-equal planes do not lose precision to cancellation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatchError, InvalidArgumentError, PreconditionError, RankDeficiencyError

FRAME_ORTHO_TOL = 1e-12
PROJECTOR_TOL = 1e-10
EQUAL_PLANE_TOL = 1e-12


def unit_ball_volume(m: int) -> float:
    """Volume of the unit ball in R^m."""
    return math.pi ** (m / 2.0) / math.gamma(m / 2.0 + 1.0)


@dataclass(frozen=True)
class Plane:
    """An m-dimensional linear subspace of R^n, held as an orthonormal frame."""

    frame: np.ndarray  # (n, m), orthonormal columns

    def __post_init__(self):
        f = np.asarray(self.frame, dtype=np.float64)
        if f.ndim != 2:
            raise InvalidArgumentError("frame must be a 2-d array of column vectors")
        n, m = f.shape
        if not (1 <= m <= n):
            raise InvalidArgumentError(f"need 1 <= dim <= ambient_dim, got m={m}, n={n}")
        gram = f.T @ f
        if np.max(np.abs(gram - np.eye(m))) > FRAME_ORTHO_TOL:
            raise InvalidArgumentError("frame columns are not orthonormal to 1e-12")
        f = f.copy()
        f.setflags(write=False)
        object.__setattr__(self, "frame", f)

    @property
    def ambient_dim(self) -> int:
        return self.frame.shape[0]

    @property
    def dim(self) -> int:
        return self.frame.shape[1]

    def projector(self) -> np.ndarray:
        """Orthogonal projector onto the plane (symmetric, idempotent)."""
        return self.frame @ self.frame.T

    def project(self, v):
        """Orthogonal projection of vectors (..., n) onto the plane."""
        v = np.asarray(v, dtype=np.float64)
        return (v @ self.frame) @ self.frame.T

    def reject(self, v):
        """Component of vectors orthogonal to the plane (Q_P v)."""
        v = np.asarray(v, dtype=np.float64)
        return v - self.project(v)

    def orthogonal_complement(self) -> "Plane":
        if self.dim == self.ambient_dim:
            raise PreconditionError("complement of the full space is trivial")
        full = np.eye(self.ambient_dim)
        q, _ = np.linalg.qr(np.hstack([self.frame, full]))
        return Plane(q[:, self.dim :])

    @classmethod
    def from_spanning(cls, vectors) -> "Plane":
        """Plane spanned by the rows of `vectors` (need not be orthonormal)."""
        v = np.asarray(vectors, dtype=np.float64)
        if v.ndim == 1:
            v = v[None, :]
        q, r = np.linalg.qr(v.T)
        if np.min(np.abs(np.diag(r))) < 1e-13 * max(1.0, np.max(np.abs(v))):
            raise RankDeficiencyError("spanning vectors are numerically dependent")
        # fix signs so the frame is deterministic
        signs = np.sign(np.diag(r))
        signs[signs == 0] = 1.0
        return cls(q * signs)

    @classmethod
    def coordinate(cls, n: int, axes) -> "Plane":
        """Coordinate plane spanned by the given axes of R^n."""
        f = np.zeros((n, len(axes)))
        for k, a in enumerate(axes):
            f[a, k] = 1.0
        return cls(f)


@dataclass(frozen=True)
class Slab:
    """Points within `half_width` of a plane: {y : dist(y, plane) <= half_width}."""

    plane: Plane
    half_width: float = 1.0

    def __post_init__(self):
        if self.half_width < 0:
            raise InvalidArgumentError("half_width must be nonnegative")

    def contains(self, y, tol: float = 0.0):
        y = np.asarray(y, dtype=np.float64)
        d = np.linalg.norm(self.plane.reject(y), axis=-1)
        return d <= self.half_width + tol


@dataclass(frozen=True)
class LemmaConstants:
    """Explicit constants of the plane-perturbation estimates, plus the two
    Hoelder exponents attached to an energy exponent q.

    All constants depend only on the intrinsic dimension m (and q where
    noted); they are deliberately far from optimal.
    """

    m: int
    q: float
    eps1: float = field(init=False)
    c1: float = field(init=False)
    c2: float = field(init=False)
    c3: float = field(init=False)
    c4: float = field(init=False)
    c5: float = field(init=False)
    kappa: float = field(init=False)
    mu: float = field(init=False)
    omega_m: float = field(init=False)

    def __post_init__(self):
        m, q = self.m, self.q
        if m < 1:
            raise InvalidArgumentError("m must be >= 1")
        if q <= 0:
            raise InvalidArgumentError("q must be positive")
        object.__setattr__(self, "eps1", 0.1 / (10.0**m + 1.0))
        object.__setattr__(self, "c1", 2.0 * (10.0**m + 1.0))
        object.__setattr__(self, "c2", 4.0 * m * (10.0**m + 1.0))
        object.__setattr__(self, "c3", 14.0 * m * 20.0**m)
        object.__setattr__(self, "c4", 3.0 * (self.c3 + 1.0))
        om = unit_ball_volume(m)
        object.__setattr__(self, "omega_m", om)
        object.__setattr__(self, "c5", 16.0 * m * 9.0**q / om**2)
        object.__setattr__(self, "kappa", (q - 2.0 * m) / (q + 4.0 * m))
        object.__setattr__(self, "mu", 1.0 - 2.0 * m / q)

    def as_dict(self) -> dict:
        return {
            "m": self.m,
            "q": self.q,
            "eps1": self.eps1,
            "c1": self.c1,
            "c2": self.c2,
            "c3": self.c3,
            "c4": self.c4,
            "c5": self.c5,
            "kappa": self.kappa,
            "mu": self.mu,
            "omega_m": self.omega_m,
        }


def _check_compatible(p1: Plane, p2: Plane):
    if p1.ambient_dim != p2.ambient_dim or p1.dim != p2.dim:
        raise DimensionMismatchError(
            f"planes have shapes {p1.frame.shape} and {p2.frame.shape}"
        )


def angle(p1: Plane, p2: Plane) -> float:
    """Operator-norm distance of the two orthogonal projectors.

    Equals the sine of the largest principal angle, in [0, 1], computed
    as the largest singular value of (I - P2) F1 (the rejection of one
    frame from the other plane).  Unlike the cosine route through
    F1^T F2 this loses no precision for nearly-identical planes.
    """
    _check_compatible(p1, p2)
    rej = p1.frame - p2.frame @ (p2.frame.T @ p1.frame)
    s = np.linalg.svd(rej, compute_uv=False)
    return float(np.clip(s[0], 0.0, 1.0))


def planes_equal(p1: Plane, p2: Plane, tol: float = EQUAL_PLANE_TOL) -> bool:
    return angle(p1, p2) <= tol


def gram_schmidt_perturbed(base: Plane, h) -> tuple[Plane, dict]:
    """Orthonormalize vectors h_i that perturb the orthonormal base frame.

    Runs the classical Gram-Schmidt recursion v_1 = h_1,
    v_{k+1} = h_{k+1} - sum_j <h_{k+1}, v_j>/|v_j|^2 v_j, u_k = v_k/|v_k|
    and logs the per-step deviations together with the guaranteed bounds:
    |v_k - h_k| < 10^k eps, ||v_k| - 1| < (10^k + 1) eps, and the angle
    between input and output spans below c2 * eps.

    Parameters
    ----------
    base : Plane whose frame columns are the unperturbed e_i.
    h : (m, n) array of perturbed vectors, |h_i - e_i| < eps < eps1.

    Returns
    -------
    (plane, log) where log records eps, per-step errors, bound arrays and
    the achieved angle.
    """
    h = np.asarray(h, dtype=np.float64)
    n, m = base.frame.shape
    if h.shape != (m, n):
        raise DimensionMismatchError(f"expected h of shape {(m, n)}, got {h.shape}")
    e = base.frame.T  # rows
    eps = float(np.max(np.linalg.norm(h - e, axis=1)))
    consts = LemmaConstants(m, 2 * m + 1)  # eps1, c1, c2 are q-independent
    if eps >= consts.eps1:
        raise PreconditionError(
            f"perturbation {eps:.3e} must be below eps1={consts.eps1:.3e}"
        )

    v = np.zeros_like(h)
    u = np.zeros_like(h)
    dev_vh = np.zeros(m)
    dev_norm = np.zeros(m)
    for k in range(m):
        vk = h[k].copy()
        for j in range(k):
            vk -= (h[k] @ v[j]) / (v[j] @ v[j]) * v[j]
        nv = np.linalg.norm(vk)
        if nv < 1e-13:
            raise RankDeficiencyError(f"vector {k} is numerically dependent")
        v[k] = vk
        u[k] = vk / nv
        dev_vh[k] = np.linalg.norm(vk - h[k])
        dev_norm[k] = abs(nv - 1.0)

    out = Plane(u.T)
    ang = angle(base, out)
    powers = 10.0 ** np.arange(1, m + 1)
    log = {
        "eps": eps,
        "dev_v_minus_h": dev_vh,
        "dev_norm": dev_norm,
        "bound_v_minus_h": powers * eps,
        "bound_norm": (powers + 1.0) * eps,
        "angle": ang,
        "angle_bound": consts.c2 * eps,
    }
    return out, log


def _support_halfwidth(pts2, direction):
    # symmetric support function of a centrally symmetric point cloud
    return float(np.max(np.abs(pts2 @ direction))) if len(pts2) else 0.0


def _golden_min(fun, a, b, tol=1e-9, iters=80):
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = fun(c), fun(d)
    for _ in range(iters):
        if b - a < tol:
            break
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = fun(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = fun(d)
    return (a + b) / 2.0


def slab_sample_points(h1: Plane, h2: Plane, radius: float, target: int = 100_000, seed: int = 0):
    """Deterministic stratified sample of the double slab S(H1, H2) near H1.

    Points are p + u with p on a grid in the H1-ball of the given radius
    and u in the unit ball of H1-perp; samples violating dist(., H2) <= 1
    are discarded.  Returns (points, h1_coordinates_of_projection).
    """
    n, m = h1.frame.shape
    codim = n - m
    if codim == 0:
        raise PreconditionError("slab geometry requires m < n")
    u_count = max(8, int(round(target ** (1.0 / 3.0))) // 2)
    p_count = max(64, target // u_count)

    rng = np.random.default_rng(seed)
    # stratified-ish deterministic fill of the m-ball
    if m == 1:
        coords = np.linspace(-1.0, 1.0, p_count)[:, None]
    else:
        grid_side = max(2, int(round(p_count ** (1.0 / m))))
        axes = [np.linspace(-1.0, 1.0, grid_side) for _ in range(m)]
        mesh = np.meshgrid(*axes, indexing="ij")
        coords = np.stack([a.ravel() for a in mesh], axis=1)
        coords = coords[np.linalg.norm(coords, axis=1) <= 1.0]
    p = coords * radius @ h1.frame.T

    if codim == 1:
        udirs = np.linspace(-1.0, 1.0, u_count)[:, None]
    else:
        udirs = rng.standard_normal((u_count, codim))
        udirs /= np.linalg.norm(udirs, axis=1, keepdims=True)
        udirs *= np.linspace(0.05, 1.0, u_count)[:, None]
    comp = h1.orthogonal_complement()
    u = udirs @ comp.frame.T

    pts = (p[:, None, :] + u[None, :, :]).reshape(-1, n)
    keep = np.linalg.norm(h2.reject(pts), axis=1) <= 1.0
    pts = pts[keep]
    h1_coords = pts @ h1.frame  # equals the grid p-coordinates, repeated
    return pts, h1_coords


def slab_strip_width(h1: Plane, h2: Plane, sample_target: int = 100_000, seed: int = 0):
    """Narrowest symmetric strip in H1 containing the projected double slab.

    Returns (W, width, log): an (m-1)-dimensional subspace W of H1 and a
    certified width such that every sampled point of S(H1, H2) projects
    within `width` of W, with width <= 5 c2 / angle.  The minimizing
    direction is found by golden-section over the exit-time/support
    functional of the sampled convex projection; ties between minimizing
    directions are broken by first hit and noted in the log.
    """
    _check_compatible(h1, h2)
    n, m = h1.frame.shape
    alpha = angle(h1, h2)
    consts = LemmaConstants(m, 2 * m + 1)
    if alpha <= 0.0:
        raise PreconditionError("planes coincide; strip direction undefined")
    if alpha >= consts.eps1:
        raise PreconditionError(f"angle {alpha:.3e} must be below eps1={consts.eps1:.3e}")

    radius = 10.0 / alpha
    _, h1c = slab_sample_points(h1, h2, radius, sample_target, seed)
    bound = 5.0 * consts.c2 / alpha

    if m == 1:
        # the strip degenerates to the origin; W is the trivial subspace
        width = float(np.max(np.abs(h1c))) if len(h1c) else 0.0
        w_frame = np.zeros((n, 0))
        log = {"alpha": alpha, "width_bound": bound, "w0": h1.frame[:, 0], "ties": False}
        return _strip_result(h1, w_frame, width, bound, log)

    if m == 2:
        def halfwidth(phi):
            d = np.array([math.cos(phi), math.sin(phi)])
            return _support_halfwidth(h1c, d)

        phis = np.linspace(0.0, math.pi, 128, endpoint=False)
        vals = np.array([halfwidth(p) for p in phis])
        k = int(np.argmin(vals))
        lo = phis[k] - math.pi / 128
        hi = phis[k] + math.pi / 128
        phi0 = _golden_min(halfwidth, lo, hi)
        width = halfwidth(phi0)
        ties = int(np.sum(vals <= vals[k] * (1.0 + 1e-9))) > 1
        w0_coords = np.array([math.cos(phi0), math.sin(phi0)])
    else:
        rng = np.random.default_rng(seed + 1)
        dirs = rng.standard_normal((512, m))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        vals = np.array([_support_halfwidth(h1c, d) for d in dirs])
        k = int(np.argmin(vals))
        w0_coords = dirs[k]
        # local refinement by coordinate-wise golden section
        for _ in range(4):
            for axis in range(m):
                def f(t, axis=axis):
                    d = w0_coords.copy()
                    d[axis] += t
                    return _support_halfwidth(h1c, d / np.linalg.norm(d))

                t0 = _golden_min(f, -0.5, 0.5, tol=1e-6)
                w0_coords[axis] += t0
                w0_coords /= np.linalg.norm(w0_coords)
        width = _support_halfwidth(h1c, w0_coords)
        ties = False

    # W = orthogonal complement of w0 inside H1
    basis = np.eye(m)
    proj = basis - np.outer(w0_coords, w0_coords)
    qy, ry = np.linalg.qr(proj)
    order = np.argsort(-np.abs(np.diag(ry)))
    w_coords = qy[:, order[: m - 1]]
    w_frame = h1.frame @ w_coords
    w0 = h1.frame @ w0_coords
    log = {"alpha": alpha, "width_bound": bound, "w0": w0, "ties": bool(ties)}
    return _strip_result(h1, w_frame, width, bound, log)


def _strip_result(h1: Plane, w_frame, width, bound, log):
    if width > bound * (1.0 + 1e-9):
        raise PreconditionError(
            f"certified strip width {width:.6g} exceeds the 5 c2/alpha bound {bound:.6g}"
        )
    w_plane = Plane(w_frame) if w_frame.shape[1] > 0 else None
    log["width"] = width
    return w_plane, width, log


def strip_ball_measure_bound(s: float, d: float, m: int) -> float:
    """Measure bound 2^m s^(m-1) d for a strip of width d inside a ball of radius s."""
    return 2.0**m * s ** (m - 1) * d


def projected_measure_ratio(h1: Plane, h2: Plane, cube_side: float = 1.0) -> float:
    """Fraction of m-measure preserved by projecting an H2 cube onto H1.

    Computed as |det(F1^T F2)|, the Jacobian of the restricted projection
    in orthonormal coordinates (independent of cube_side).  Requires the
    plane angle below 1/(m 2^m); the returned ratio is checked against
    the guaranteed lower bound 1 - m * angle * 2^m.
    """
    _check_compatible(h1, h2)
    if cube_side <= 0:
        raise InvalidArgumentError("cube_side must be positive")
    m = h1.dim
    eps_max = 1.0 / (m * 2.0**m)
    a = angle(h1, h2)
    if a >= eps_max:
        raise PreconditionError(f"angle {a:.3e} must be below 1/(m 2^m) = {eps_max:.3e}")
    ratio = abs(float(np.linalg.det(h1.frame.T @ h2.frame)))
    lower = 1.0 - m * a * 2.0**m
    if ratio < lower - 1e-12:
        raise PreconditionError(
            f"projected measure ratio {ratio:.12g} fell below the bound {lower:.12g}"
        )
    return ratio
