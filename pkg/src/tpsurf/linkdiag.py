"""Linking parity mod 2 and trapping-box certification.

Supported cases: curves in R^3 probed by polygonal circles (the parity
of crossings between the curve and the disk spanned by the probe) and
surfaces in R^3 probed by point pairs (the parity of triangle crossings
along the probe's diameter segment).  Near-degenerate intersection
configurations trigger a deterministic jitter of the probe and a
recompute, so runs are reproducible.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegeneracyError,
    InvalidArgumentError,
    PreconditionError,
    UnsupportedCaseError,
)
from .grassmann import Plane
from .simplicial import SimplicialSet

PROBE_GEOM_TOL = 1e-12
DEGENERACY_TOL = 1e-12
JITTER_SCALE = 1e-9
MAX_JITTER_RETRIES = 8


@dataclass(frozen=True)
class SphereProbe:
    """A polygonalized round (n-m-1)-sphere inside an affine normal plane.

    For curves in R^3 the probe is a k-gon approximating a circle; for
    surfaces in R^3 it is the two-point sphere {center +- radius * v}.
    """

    center: np.ndarray
    radius: float
    plane: Plane  # the (n - m)-dimensional normal plane V
    polygon: np.ndarray  # (k, n) vertices, all at distance `radius` in center+V

    def __post_init__(self):
        c = np.asarray(self.center, dtype=np.float64)
        poly = np.asarray(self.polygon, dtype=np.float64)
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "polygon", poly)
        if self.radius <= 0:
            raise InvalidArgumentError("probe radius must be positive")
        rel = poly - c
        r_err = np.abs(np.linalg.norm(rel, axis=1) - self.radius)
        if np.max(r_err) > PROBE_GEOM_TOL * max(1.0, self.radius):
            raise InvalidArgumentError("probe polygon is not on the sphere")
        off = np.linalg.norm(self.plane.reject(rel), axis=1)
        if np.max(off) > PROBE_GEOM_TOL * max(1.0, self.radius):
            raise InvalidArgumentError("probe polygon leaves the normal plane")

    @classmethod
    def circle(cls, center, radius, plane: Plane, k: int = 64) -> "SphereProbe":
        if plane.dim != 2:
            raise InvalidArgumentError("circle probes need a 2-dimensional plane")
        t = np.linspace(0.0, 2.0 * math.pi, k, endpoint=False)
        e1, e2 = plane.frame[:, 0], plane.frame[:, 1]
        poly = (
            np.asarray(center, dtype=np.float64)
            + radius * np.cos(t)[:, None] * e1
            + radius * np.sin(t)[:, None] * e2
        )
        return cls(np.asarray(center, dtype=np.float64), radius, plane, poly)

    @classmethod
    def point_pair(cls, center, radius, plane: Plane) -> "SphereProbe":
        if plane.dim != 1:
            raise InvalidArgumentError("point-pair probes need a 1-dimensional plane")
        v = plane.frame[:, 0]
        c = np.asarray(center, dtype=np.float64)
        poly = np.stack([c + radius * v, c - radius * v])
        return cls(c, radius, plane, poly)

    @classmethod
    def from_circle_mesh(cls, sset: SimplicialSet, rel_tol: float = 1e-6) -> "SphereProbe":
        """Fit a probe to a closed polygonal circle (m=1 mesh)."""
        if sset.intrinsic_dim != 1:
            raise InvalidArgumentError("need a curve mesh to fit a circle probe")
        v = sset.vertices
        c = np.mean(v, axis=0)
        rel = v - c
        _, _, vt = np.linalg.svd(rel, full_matrices=False)
        plane = Plane(vt[:2].T)
        radii = np.linalg.norm(rel, axis=1)
        r = float(np.mean(radii))
        if np.max(np.abs(radii - r)) > rel_tol * r:
            raise InvalidArgumentError("mesh vertices are not on a common circle")
        if np.max(np.linalg.norm(plane.reject(rel), axis=1)) > rel_tol * r:
            raise InvalidArgumentError("mesh vertices are not coplanar")
        # snap the polygon exactly onto the fitted circle
        inplane = rel @ plane.frame
        inplane *= r / np.linalg.norm(inplane, axis=1, keepdims=True)
        poly = c + inplane @ plane.frame.T
        return cls(c, r, plane, poly)

    def translated(self, offset) -> "SphereProbe":
        off = np.asarray(offset, dtype=np.float64)
        return SphereProbe(self.center + off, self.radius, self.plane, self.polygon + off)


@dataclass(frozen=True)
class TrappingBox:
    """Cylinder (optionally unioned with the half ball B(x, r/2)) around an
    affine plane, meant to contain the set inside B(x, r) while hosting
    linked probe spheres in the complementary gap."""

    center: np.ndarray
    radius: float
    plane: Plane
    theta: float
    shape: str = "cylinder+ball"  # or "cylinder"

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=np.float64))
        if self.radius <= 0:
            raise InvalidArgumentError("box radius must be positive")
        if not (0.0 < self.theta <= 1.0):
            raise InvalidArgumentError("theta must lie in (0, delta]")
        if self.shape not in ("cylinder+ball", "cylinder"):
            raise InvalidArgumentError(f"unknown box shape {self.shape!r}")

    def contains(self, pts) -> np.ndarray:
        rel = np.asarray(pts, dtype=np.float64) - self.center
        tube = np.linalg.norm(self.plane.reject(rel), axis=-1) <= self.theta * self.radius
        if self.shape == "cylinder+ball":
            return tube | (np.linalg.norm(rel, axis=-1) <= 0.5 * self.radius)
        return tube


# ---------------------------------------------------------------------------
# segment / triangle crossing counts


def _segment_triangle_crossings(p0, p1, tri_a, tri_b, tri_c):
    """Vectorized segment-triangle crossing test.

    Returns (crossing_count, degenerate_flag).  Any determinant or
    barycentric coordinate within the tolerance of a decision boundary
    raises the flag so the caller can jitter and retry.
    """
    d = p1 - p0
    e1 = tri_b - tri_a
    e2 = tri_c - tri_a
    h = np.cross(d, e2)
    det = np.einsum("tn,tn->t", e1, h)
    scale = (
        np.linalg.norm(e1, axis=1)
        * np.linalg.norm(e2, axis=1)
        * max(float(np.linalg.norm(d)), 1e-300)
    )
    parallel = np.abs(det) <= DEGENERACY_TOL * scale
    degenerate = False
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = 1.0 / det
        s = p0 - tri_a
        u = inv * np.einsum("tn,tn->t", s, h)
        qv = np.cross(s, e1)
        v = inv * (qv @ d)
        t = inv * np.einsum("tn,tn->t", e2, qv)
    u = np.where(parallel, -1.0, u)
    inside = (u > 0.0) & (v > 0.0) & (u + v < 1.0) & (t > 0.0) & (t < 1.0)
    margins = np.stack([np.abs(u), np.abs(v), np.abs(1.0 - u - v), np.abs(t), np.abs(1.0 - t)])
    near_boundary = np.any(margins <= DEGENERACY_TOL, axis=0) & ~parallel
    # a parallel configuration only matters when the segment passes near
    # the triangle plane
    plane_normal = np.cross(e1, e2)
    nn = np.linalg.norm(plane_normal, axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        gap0 = np.abs(np.einsum("tn,tn->t", p0 - tri_a, plane_normal)) / nn
        gap1 = np.abs(np.einsum("tn,tn->t", p1 - tri_a, plane_normal)) / nn
    seg_scale = float(np.linalg.norm(d))
    parallel_risky = parallel & (np.minimum(gap0, gap1) <= 1e-9 * max(seg_scale, 1.0))
    degenerate = bool(np.any(near_boundary) or np.any(parallel_risky))
    return int(np.count_nonzero(inside)), degenerate


def _disk_fan(probe: SphereProbe):
    """Triangulation of the disk spanned by the probe polygon (fan)."""
    poly = probe.polygon
    k = len(poly)
    a = np.repeat(probe.center[None, :], k, axis=0)
    b = poly
    c = np.roll(poly, -1, axis=0)
    return a, b, c


def _min_distance_to_set(points, sset: SimplicialSet) -> float:
    """Min distance from sample points to the mesh (exact per-simplex)."""
    pts = np.asarray(points, dtype=np.float64)
    best = math.inf
    verts = sset.vertices[sset.simplices]
    if sset.intrinsic_dim == 1:
        a, b = verts[:, 0], verts[:, 1]
        ab = b - a
        denom = np.einsum("tn,tn->t", ab, ab)
        for p in pts:
            t = np.clip(np.einsum("tn,n->t", ab, p) - np.einsum("tn,tn->t", ab, a), 0.0, denom)
            t = np.where(denom > 0, t / np.maximum(denom, 1e-300), 0.0)
            proj = a + t[:, None] * ab
            best = min(best, float(np.min(np.linalg.norm(proj - p, axis=1))))
        return best
    if sset.intrinsic_dim == 2:
        for p in pts:
            best = min(best, _point_triangles_distance(p, verts))
        return best
    # fallback: vertex distance
    for p in pts:
        best = min(best, float(np.min(np.linalg.norm(sset.vertices - p, axis=1))))
    return best


def _point_triangles_distance(p, tris) -> float:
    a, b, c = tris[:, 0], tris[:, 1], tris[:, 2]
    ab, ac, ap = b - a, c - a, p - a
    d1 = np.einsum("tn,tn->t", ab, ap)
    d2 = np.einsum("tn,tn->t", ac, ap)
    bp = p - b
    d3 = np.einsum("tn,tn->t", ab, bp)
    d4 = np.einsum("tn,tn->t", ac, bp)
    cp = p - c
    d5 = np.einsum("tn,tn->t", ab, cp)
    d6 = np.einsum("tn,tn->t", ac, cp)
    va = d3 * d6 - d5 * d4
    vb = d5 * d2 - d1 * d6
    vc = d1 * d4 - d3 * d2
    denom = np.maximum(va + vb + vc, 1e-300)
    v = np.clip(vb / denom, 0.0, 1.0)
    w = np.clip(vc / denom, 0.0, 1.0)
    # interior candidate
    cand = a + v[:, None] * ab + w[:, None] * ac
    # edge/vertex candidates via clamped barycentric projections
    def seg(p0, p1):
        e = p1 - p0
        t = np.clip(
            np.einsum("tn,tn->t", e, p - p0) / np.maximum(np.einsum("tn,tn->t", e, e), 1e-300),
            0.0,
            1.0,
        )
        return p0 + t[:, None] * e

    candidates = [cand, seg(a, b), seg(b, c), seg(a, c)]
    best = math.inf
    for q in candidates:
        best = min(best, float(np.min(np.linalg.norm(q - p, axis=1))))
    return best


def _jitter_direction(probe: SphereProbe, attempt: int) -> np.ndarray:
    payload = probe.center.tobytes() + np.float64(probe.radius).tobytes() + probe.plane.frame.tobytes()
    digest = hashlib.sha256(payload + bytes([attempt])).digest()
    seed = int.from_bytes(digest[:8], "little")
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(probe.center.shape[0])
    return v / np.linalg.norm(v)


def linking_mod2(sset: SimplicialSet, probe: SphereProbe) -> int:
    """Linking parity of the set with the probe sphere.

    Implemented as intersection parity: for curves, crossings of the
    curve with the disk spanned by the probe circle; for surfaces,
    crossings of the surface with the probe's diameter segment.
    """
    m, n = sset.intrinsic_dim, sset.ambient_dim
    if (m, n) not in ((1, 3), (2, 3)):
        raise UnsupportedCaseError(f"linking parity implemented for (m,n) in {{(1,3),(2,3)}}, got ({m},{n})")
    diam = sset.diameter()
    if _min_distance_to_set(probe.polygon, sset) <= 1e-9 * diam:
        raise PreconditionError("probe touches the set")

    current = probe
    for attempt in range(MAX_JITTER_RETRIES + 1):
        if m == 1:
            count, degenerate = _curve_disk_crossings(sset, current)
        else:
            count, degenerate = _surface_segment_crossings(sset, current)
        if not degenerate:
            return count & 1
        current = current.translated(JITTER_SCALE * probe.radius * _jitter_direction(probe, attempt))
    raise DegeneracyError("persistent degenerate intersection configuration")


def _curve_disk_crossings(sset: SimplicialSet, probe: SphereProbe):
    a, b, c = _disk_fan(probe)
    segs = sset.vertices[sset.simplices]
    total = 0
    degenerate = False
    for s0, s1 in zip(segs[:, 0], segs[:, 1]):
        cnt, deg = _segment_triangle_crossings(s0, s1, a, b, c)
        total += cnt
        degenerate = degenerate or deg
    return total, degenerate


def _surface_segment_crossings(sset: SimplicialSet, probe: SphereProbe):
    p0, p1 = probe.polygon[0], probe.polygon[1]
    tris = sset.vertices[sset.simplices]
    return _segment_triangle_crossings(p0, p1, tris[:, 0], tris[:, 1], tris[:, 2])


def disk_intersects_set(sset: SimplicialSet, probe: SphereProbe) -> bool:
    """Whether the flat disk spanned by the probe meets the set (the
    guaranteed consequence of linking parity 1)."""
    if sset.intrinsic_dim == 1:
        count, _ = _curve_disk_crossings(sset, probe)
        return count > 0
    count, _ = _surface_segment_crossings(sset, probe)
    return count > 0


@dataclass
class TrappingBoxReport:
    containment: bool
    linking_ok: bool
    witnesses: list = field(default_factory=list)


def check_trapping_box(
    sset: SimplicialSet,
    box: TrappingBox,
    probe_grid: int = 5,
    cloud=None,
    probe_segments: int = 32,
    t_samples: int = 5,
) -> TrappingBoxReport:
    """Certify the two halves of the trapping-box property.

    containment: every cloud point inside B(x, r) lies in the box.
    linking: on a grid of in-plane offsets z with |z - x| below
    sqrt(1 - theta^2) r, some admissible probe radius t (sphere inside
    the ball, clear of the box) links the set with parity 1.
    """
    from .simplicial import quadrature

    if cloud is None:
        cloud = quadrature(sset, "centroid")
    x = box.center
    r = box.radius
    rel = cloud.points - x
    inside = np.linalg.norm(rel, axis=1) <= r
    contained = box.contains(cloud.points[inside])
    witnesses = [
        {"kind": "containment", "point": p.tolist()}
        for p in cloud.points[inside][~contained][:16]
    ]
    containment_ok = bool(np.all(contained))

    m, n = sset.intrinsic_dim, sset.ambient_dim
    linking_ok = True
    if (m, n) in ((1, 3), (2, 3)):
        normal = box.plane.orthogonal_complement()
        reach = math.sqrt(max(1.0 - box.theta**2, 0.0)) * r * 0.98
        offsets = _plane_grid(box.plane, reach, probe_grid)
        for z_off in offsets:
            z = x + z_off
            rho2 = float(z_off @ z_off)
            t_hi = math.sqrt(max(r * r - rho2, 0.0))
            t_lo = box.theta * r
            if box.shape == "cylinder+ball":
                need = math.sqrt(max(0.25 * r * r - rho2, 0.0))
                t_lo = max(t_lo, need)
            if t_hi <= t_lo:
                continue
            found = False
            for frac in np.linspace(0.25, 0.9, t_samples):
                t = t_lo + (t_hi - t_lo) * frac
                try:
                    if m == 1:
                        probe = SphereProbe.circle(z, t, normal, probe_segments)
                    else:
                        probe = SphereProbe.point_pair(z, t, normal)
                    if linking_mod2(sset, probe) == 1:
                        found = True
                        break
                except (PreconditionError, DegeneracyError):
                    continue
            if not found:
                linking_ok = False
                witnesses.append({"kind": "linking", "z": z.tolist()})
    else:
        linking_ok = False
        witnesses.append({"kind": "linking-unsupported", "case": [m, n]})
    return TrappingBoxReport(containment_ok, linking_ok, witnesses)


def _plane_grid(plane: Plane, reach: float, count: int):
    m = plane.dim
    if m == 1:
        ts = np.linspace(-reach, reach, max(count, 2))
        return [t * plane.frame[:, 0] for t in ts]
    if m == 2:
        out = [np.zeros(plane.ambient_dim)]
        for rr in np.linspace(reach / count, reach, count):
            for k in range(count + 2):
                auxa = 2.0 * math.pi * k / (count + 2)
                out.append(rr * (math.cos(auxa) * plane.frame[:, 0] + math.sin(auxa) * plane.frame[:, 1]))
        return out
    axes = [np.linspace(-reach, reach, count) for _ in range(m)]
    mesh = np.meshgrid(*axes, indexing="ij")
    coords = np.stack([a.ravel() for a in mesh], axis=1)
    coords = coords[np.linalg.norm(coords, axis=1) <= reach]
    return [c @ plane.frame.T for c in coords]
