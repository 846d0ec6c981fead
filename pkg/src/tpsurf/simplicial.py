"""Discrete m-dimensional sets: simplicial complexes with measure weights
and per-element tangent planes, file I/O, quadrature clouds, and the
density/flatness diagnostics.

Supported file formats
----------------------
OBJ subset (n=3, m=2): `v x y z` and `f i j k` records, 1-based indices;
other record types are ignored with a warning.

NDMESH (any n): first line `ndmesh <m> <n>`, then `v` lines with n
floats and `s` lines with m+1 0-based indices; `#` starts a comment.
All floats are written with 17 significant digits.
"""

from __future__ import annotations

import math
import sys
import warnings
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import (
    DegeneracyError,
    InsufficientDataError,
    InvalidArgumentError,
    ParseError,
)
from .grassmann import Plane, unit_ball_volume

DEGENERACY_REL_TOL = 1e-14


def _simplex_frames_and_measures(vertices, simplices, m):
    """Orthonormal frames and Hausdorff measures of all simplices at once."""
    v0 = vertices[simplices[:, 0]]
    edges = np.stack(
        [vertices[simplices[:, k + 1]] - v0 for k in range(m)], axis=2
    )  # (T, n, m)
    gram = np.einsum("tnk,tnl->tkl", edges, edges)
    det = np.linalg.det(gram)
    measures = np.sqrt(np.clip(det, 0.0, None)) / math.factorial(m)
    q, r = np.linalg.qr(edges)
    # deterministic sign convention
    diag = np.einsum("tkk->tk", r)
    signs = np.where(diag >= 0.0, 1.0, -1.0)
    frames = q * signs[:, None, :]
    return frames, measures, edges


class SimplicialSet:
    """Vertices in R^n plus m-simplices with derived measures and planes."""

    def __init__(self, vertices, simplices, intrinsic_dim=None):
        v = np.asarray(vertices, dtype=np.float64)
        s = np.asarray(simplices, dtype=np.int64)
        if v.ndim != 2:
            raise InvalidArgumentError("vertices must be a (V, n) array")
        if s.ndim != 2 or s.shape[0] == 0:
            raise InvalidArgumentError("simplices must be a nonempty (T, m+1) array")
        m = s.shape[1] - 1 if intrinsic_dim is None else intrinsic_dim
        if s.shape[1] != m + 1:
            raise InvalidArgumentError(f"simplices must have {m + 1} vertex indices")
        if not (1 <= m <= v.shape[1]):
            raise InvalidArgumentError(f"need 1 <= m <= n, got m={m}, n={v.shape[1]}")
        if s.min() < 0 or s.max() >= len(v):
            raise InvalidArgumentError("simplex vertex index out of range")
        self.vertices = v
        self.simplices = s
        self.intrinsic_dim = m
        self._validate()

    def _validate(self):
        diam = np.max(
            np.linalg.norm(
                self.vertices[self.simplices]
                - self.vertices[self.simplices[:, :1]],
                axis=2,
            ),
            axis=1,
        )
        bad = np.nonzero(
            self.per_simplex_measure <= DEGENERACY_REL_TOL * diam**self.intrinsic_dim
        )[0]
        if len(bad):
            raise DegeneracyError(
                f"degenerate simplices (rejected, not repaired): {bad[:20].tolist()}"
            )

    @property
    def ambient_dim(self) -> int:
        return self.vertices.shape[1]

    @property
    def n_simplices(self) -> int:
        return len(self.simplices)

    @cached_property
    def _frames_measures(self):
        return _simplex_frames_and_measures(
            self.vertices, self.simplices, self.intrinsic_dim
        )

    @property
    def per_simplex_frames(self) -> np.ndarray:
        """(T, n, m) orthonormal frames of the affine hulls."""
        return self._frames_measures[0]

    @property
    def per_simplex_measure(self) -> np.ndarray:
        return self._frames_measures[1]

    @property
    def edge_matrices(self) -> np.ndarray:
        """(T, n, m) simplex edge matrices (v_k - v_0 columns)."""
        return self._frames_measures[2]

    def per_simplex_plane(self, t: int) -> Plane:
        return Plane(self.per_simplex_frames[t])

    @cached_property
    def total_measure(self) -> float:
        return float(np.sum(self.per_simplex_measure))

    @cached_property
    def simplex_diameters(self) -> np.ndarray:
        pts = self.vertices[self.simplices]  # (T, m+1, n)
        d = 0.0 * self.per_simplex_measure
        mm = self.intrinsic_dim
        for a in range(mm + 1):
            for b in range(a + 1, mm + 1):
                d = np.maximum(d, np.linalg.norm(pts[:, a] - pts[:, b], axis=1))
        return d

    def diameter(self) -> float:
        """Bounding-box diagonal; an upper bound for the true diameter."""
        span = np.max(self.vertices, axis=0) - np.min(self.vertices, axis=0)
        return float(np.linalg.norm(span))

    def centroids(self) -> np.ndarray:
        return np.mean(self.vertices[self.simplices], axis=1)

    def transformed(self, rotation=None, translation=None, scale=None) -> "SimplicialSet":
        v = self.vertices
        if scale is not None:
            v = v * float(scale)
        if rotation is not None:
            v = v @ np.asarray(rotation, dtype=np.float64).T
        if translation is not None:
            v = v + np.asarray(translation, dtype=np.float64)
        return SimplicialSet(v, self.simplices.copy(), self.intrinsic_dim)


@dataclass
class QuadratureCloud:
    """Flattened sample points driving the double integrals.

    Arrays are parallel: positions (N, n), weights (N,), frames (N, n, m)
    holding the per-point tangent plane, and the parent simplex index of
    each point.
    """

    points: np.ndarray
    weights: np.ndarray
    frames: np.ndarray
    parents: np.ndarray
    source_total_measure: float
    max_parent_diameter: float
    intrinsic_dim: int
    plane_rule: str = "flat"

    def __post_init__(self):
        if len(self.points) == 0:
            raise InsufficientDataError("empty quadrature cloud")
        total = float(np.sum(self.weights))
        if abs(total - self.source_total_measure) > 1e-10 * max(
            1.0, abs(self.source_total_measure)
        ):
            raise InvalidArgumentError(
                "quadrature weights do not sum to the source measure"
            )

    @property
    def size(self) -> int:
        return len(self.points)

    @property
    def ambient_dim(self) -> int:
        return self.points.shape[1]

    def plane(self, i: int) -> Plane:
        return Plane(self.frames[i])

    def subset_in_ball(self, x, r) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        return np.nonzero(np.linalg.norm(self.points - x, axis=1) <= r)[0]


def _smoothed_frames(sset: SimplicialSet):
    """Area-weighted neighbour averaging of simplex planes (per simplex).

    Averages the projectors of all simplices sharing a vertex, then takes
    the dominant m-dimensional eigenspace.
    """
    v_count = len(sset.vertices)
    t_count = sset.n_simplices
    n, m = sset.ambient_dim, sset.intrinsic_dim
    frames = sset.per_simplex_frames
    areas = sset.per_simplex_measure
    # vertex -> incident simplices
    incident = [[] for _ in range(v_count)]
    for t, simplex in enumerate(sset.simplices):
        for vi in simplex:
            incident[vi].append(t)
    out = np.empty_like(frames)
    for t in range(t_count):
        neigh = set()
        for vi in sset.simplices[t]:
            neigh.update(incident[vi])
        acc = np.zeros((n, n))
        for u in neigh:
            f = frames[u]
            acc += areas[u] * (f @ f.T)
        w, vec = np.linalg.eigh(acc)
        out[t] = vec[:, -m:][:, ::-1]
    return out


def quadrature(sset: SimplicialSet, order: str = "centroid", plane_rule: str = "flat") -> QuadratureCloud:
    """Build the sample cloud discretizing the product measure.

    `centroid` emits one point per simplex carrying its full measure;
    `bary3` emits three points per simplex (edge midpoints for m=2 with
    equal weights, Simpson nodes for m=1).
    """
    m = sset.intrinsic_dim
    if plane_rule not in ("flat", "smoothed"):
        raise InvalidArgumentError(f"unknown plane rule {plane_rule!r}")
    base_frames = (
        sset.per_simplex_frames if plane_rule == "flat" else _smoothed_frames(sset)
    )
    measures = sset.per_simplex_measure
    t_count = sset.n_simplices

    if order == "centroid":
        points = sset.centroids()
        weights = measures.copy()
        frames = base_frames.copy()
        parents = np.arange(t_count, dtype=np.int64)
    elif order in ("bary3", "barycentric-3"):
        pts = sset.vertices[sset.simplices]  # (T, m+1, n)
        if m == 2:
            nodes = np.stack(
                [
                    0.5 * (pts[:, 0] + pts[:, 1]),
                    0.5 * (pts[:, 1] + pts[:, 2]),
                    0.5 * (pts[:, 2] + pts[:, 0]),
                ],
                axis=1,
            )
            wts = np.repeat(measures[:, None] / 3.0, 3, axis=1)
        elif m == 1:
            nodes = np.stack(
                [pts[:, 0], 0.5 * (pts[:, 0] + pts[:, 1]), pts[:, 1]], axis=1
            )
            wts = measures[:, None] * np.array([1.0 / 6.0, 4.0 / 6.0, 1.0 / 6.0])
        else:
            raise InvalidArgumentError(f"bary3 quadrature unsupported for m={m}")
        points = nodes.reshape(-1, sset.ambient_dim)
        weights = wts.reshape(-1)
        frames = np.repeat(base_frames, 3, axis=0)
        parents = np.repeat(np.arange(t_count, dtype=np.int64), 3)
    else:
        raise InvalidArgumentError(f"unknown quadrature order {order!r}")

    return QuadratureCloud(
        points=points,
        weights=weights,
        frames=frames,
        parents=parents,
        source_total_measure=sset.total_measure,
        max_parent_diameter=float(np.max(sset.simplex_diameters)),
        intrinsic_dim=m,
        plane_rule=plane_rule,
    )


# ---------------------------------------------------------------------------
# exact ball clipping


def _circle_polygon_area(poly, center, radius):
    """Exact area of polygon (counterclockwise, (k,2)) intersected with a disk."""
    p = poly - center
    total = 0.0
    k = len(p)
    r2 = radius * radius
    for i in range(k):
        a = p[i]
        b = p[(i + 1) % k]
        d = b - a
        dd = d @ d
        if dd == 0.0:
            continue
        # segment-circle intersection parameters
        t_lo, t_hi = 0.0, 1.0
        ad = a @ d
        disc = ad * ad - dd * ((a @ a) - r2)
        pieces = []
        if disc <= 0.0:
            inside = (a @ a) <= r2 and (b @ b) <= r2
            pieces.append((0.0, 1.0, inside))
        else:
            s = math.sqrt(disc)
            t0 = (-ad - s) / dd
            t1 = (-ad + s) / dd
            t0c, t1c = max(t_lo, t0), min(t_hi, t1)
            if t0c >= t1c:
                pieces.append((0.0, 1.0, False))
            else:
                if t0c > 0.0:
                    pieces.append((0.0, t0c, False))
                pieces.append((t0c, t1c, True))
                if t1c < 1.0:
                    pieces.append((t1c, 1.0, False))
        for ta, tb, inside in pieces:
            pa = a + ta * d
            pb = a + tb * d
            if inside:
                total += 0.5 * (pa[0] * pb[1] - pa[1] * pb[0])
            else:
                ang = math.atan2(
                    pa[0] * pb[1] - pa[1] * pb[0], pa @ pb
                )
                total += 0.5 * r2 * ang
    return abs(total)


def _segment_ball_length(a, b, x, r):
    d = b - a
    dd = d @ d
    if dd == 0.0:
        return 0.0
    e = a - x
    ad = e @ d
    disc = ad * ad - dd * ((e @ e) - r * r)
    if disc <= 0.0:
        return 0.0 if (e @ e) > r * r else math.sqrt(dd)
    s = math.sqrt(disc)
    t0 = max(0.0, (-ad - s) / dd)
    t1 = min(1.0, (-ad + s) / dd)
    return max(0.0, t1 - t0) * math.sqrt(dd)


def local_measure(sset: SimplicialSet, x, r: float) -> float:
    """Measure of the set clipped to the closed ball B(x, r).

    Exact for m <= 2 (segment clipping / planar disk sections); for
    m >= 3 falls back to the centroid-cloud weight sum inside the ball,
    which is approximate at the mesh resolution.
    """
    if r <= 0:
        raise InvalidArgumentError("radius must be positive")
    x = np.asarray(x, dtype=np.float64)
    m = sset.intrinsic_dim
    pts = sset.vertices[sset.simplices]  # (T, m+1, n)
    vdist = np.linalg.norm(pts - x, axis=2)
    all_in = np.all(vdist <= r, axis=1)
    total = float(np.sum(sset.per_simplex_measure[all_in]))
    maybe = np.nonzero(~all_in & (np.min(vdist, axis=1) <= r + sset.simplex_diameters))[0]

    if m == 1:
        for t in maybe:
            total += _segment_ball_length(pts[t, 0], pts[t, 1], x, r)
        return total
    if m == 2:
        frames = sset.per_simplex_frames
        for t in maybe:
            f = frames[t]
            v0 = pts[t, 0]
            rel = x - v0
            h = rel - f @ (f.T @ rel)
            h2 = float(h @ h)
            if h2 >= r * r:
                continue
            rad = math.sqrt(r * r - h2)
            center2 = (rel - h) @ f
            tri2 = (pts[t] - v0) @ f
            # ensure counterclockwise orientation in plane coordinates
            cross = (tri2[1] - tri2[0]) @ np.array(
                [-(tri2[2] - tri2[0])[1], (tri2[2] - tri2[0])[0]]
            )
            if cross < 0:
                tri2 = tri2[::-1]
            total += _circle_polygon_area(tri2, center2, rad)
        return total
    # m >= 3: cloud weight sum (approximate)
    cloud = quadrature(sset, "centroid")
    idx = cloud.subset_in_ball(x, r)
    inexact = float(np.sum(cloud.weights[idx]))
    partial = np.sum(sset.per_simplex_measure[all_in])
    return max(inexact, float(partial))


# ---------------------------------------------------------------------------
# admissibility diagnostics


@dataclass
class AdmissibilityReport:
    """Measured density constant and flatness profile of a discrete set."""

    ahlfors_K: float
    delta_flatness: dict  # radius -> worst-case flatness ratio
    flatness_probe_count: int
    violations: list = field(default_factory=list)


def check_admissibility(
    sset: SimplicialSet,
    probe_radii,
    probe_count: int,
    seed: int = 0,
    flatness_threshold: float = 0.5,
    cloud: QuadratureCloud | None = None,
) -> AdmissibilityReport:
    """Estimate the density constant and the flatness profile.

    ahlfors_K is the minimum over probes of measure(B(x, r)) / r^m;
    delta_flatness(r) is the worst ratio |Q_{H_x}(y - x)| / |y - x| over
    probe points x and cloud points y within distance r.  Probes whose
    flatness at the smallest radius stays at or above the threshold are
    listed as violations (another sheet passes nearby at all scales).
    """
    radii = sorted(float(r) for r in probe_radii)
    if not radii or radii[0] <= 0:
        raise InvalidArgumentError("probe radii must be positive")
    if radii[-1] > sset.diameter() * (1 + 1e-9):
        raise InvalidArgumentError("probe radii must not exceed the diameter")
    if cloud is None:
        cloud = quadrature(sset, "centroid")
    rng = np.random.default_rng(seed)
    count = min(probe_count, cloud.size)
    probe_idx = rng.choice(cloud.size, size=count, replace=False)

    m = sset.intrinsic_dim
    ahlfors = math.inf
    flat = {r: 0.0 for r in radii}
    per_probe_small = {}
    for i in probe_idx:
        x = cloud.points[i]
        for r in radii:
            ahlfors = min(ahlfors, local_measure(sset, x, r) / r**m)
        d = cloud.points - x
        dist = np.linalg.norm(d, axis=1)
        f = cloud.frames[i]
        qn = np.linalg.norm(d - (d @ f) @ f.T, axis=1)
        for r in radii:
            sel = (dist > 0) & (dist <= r)
            if np.any(sel):
                worst = float(np.max(qn[sel] / dist[sel]))
                flat[r] = max(flat[r], worst)
                if r == radii[0]:
                    per_probe_small[int(i)] = worst

    violations = [
        (cloud.points[i].tolist(), radii[0], val)
        for i, val in per_probe_small.items()
        if val >= flatness_threshold
    ]
    return AdmissibilityReport(
        ahlfors_K=float(ahlfors),
        delta_flatness=flat,
        flatness_probe_count=count,
        violations=violations,
    )


# ---------------------------------------------------------------------------
# file I/O


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def load(path, fmt: str | None = None) -> SimplicialSet:
    """Load a mesh file; the format is sniffed from the extension when not given."""
    path = str(path)
    if fmt is None:
        if path.endswith(".obj"):
            fmt = "obj"
        elif path.endswith(".ndmesh"):
            fmt = "ndmesh"
        else:
            with open(path) as fh:
                first = fh.readline()
            fmt = "ndmesh" if first.strip().startswith("ndmesh") else "obj"
    if fmt == "obj":
        return _load_obj(path)
    if fmt == "ndmesh":
        return _load_ndmesh(path)
    raise InvalidArgumentError(f"unknown format {fmt!r}")


def _load_obj(path) -> SimplicialSet:
    verts, faces = [], []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            tag = parts[0]
            if tag == "v":
                if len(parts) != 4:
                    raise ParseError("vertex record needs 3 coordinates", lineno)
                try:
                    verts.append([float(p) for p in parts[1:4]])
                except ValueError as exc:
                    raise ParseError(str(exc), lineno) from exc
            elif tag == "f":
                if len(parts) != 4:
                    raise ParseError("face record needs exactly 3 indices", lineno)
                try:
                    idx = [int(p.split("/")[0]) for p in parts[1:4]]
                except ValueError as exc:
                    raise ParseError(str(exc), lineno) from exc
                if any(i < 1 for i in idx):
                    raise ParseError("OBJ indices must be positive (1-based)", lineno)
                faces.append([i - 1 for i in idx])
            else:
                warnings.warn(f"{path}:{lineno}: ignoring record {tag!r}", stacklevel=2)
    if not verts or not faces:
        raise ParseError("OBJ file has no usable v/f records")
    return SimplicialSet(np.array(verts), np.array(faces), intrinsic_dim=2)


def _load_ndmesh(path) -> SimplicialSet:
    with open(path) as fh:
        lines = fh.readlines()
    header = None
    verts, simps = [], []
    m = n = None
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if header is None:
            if parts[0] != "ndmesh" or len(parts) != 3:
                raise ParseError("expected header 'ndmesh <m> <n>'", lineno)
            try:
                m, n = int(parts[1]), int(parts[2])
            except ValueError as exc:
                raise ParseError(str(exc), lineno) from exc
            header = lineno
            continue
        if parts[0] == "v":
            if len(parts) != n + 1:
                raise ParseError(f"vertex record needs {n} coordinates", lineno)
            try:
                verts.append([float(p) for p in parts[1:]])
            except ValueError as exc:
                raise ParseError(str(exc), lineno) from exc
        elif parts[0] == "s":
            if len(parts) != m + 2:
                raise ParseError(f"simplex record needs {m + 1} indices", lineno)
            try:
                simps.append([int(p) for p in parts[1:]])
            except ValueError as exc:
                raise ParseError(str(exc), lineno) from exc
        else:
            raise ParseError(f"unknown record {parts[0]!r}", lineno)
    if header is None:
        raise ParseError("missing ndmesh header")
    if not verts or not simps:
        raise ParseError("ndmesh file has no v/s records")
    return SimplicialSet(np.array(verts), np.array(simps), intrinsic_dim=m)


def save(sset: SimplicialSet, path, fmt: str | None = None):
    path = str(path)
    if fmt is None:
        fmt = "obj" if path.endswith(".obj") else "ndmesh"
    with open(path, "w") as fh:
        if fmt == "obj":
            if sset.ambient_dim != 3 or sset.intrinsic_dim != 2:
                raise InvalidArgumentError("OBJ output requires m=2, n=3")
            for v in sset.vertices:
                fh.write("v " + " ".join(_fmt(c) for c in v) + "\n")
            for s in sset.simplices:
                fh.write("f " + " ".join(str(i + 1) for i in s) + "\n")
        elif fmt == "ndmesh":
            fh.write(f"ndmesh {sset.intrinsic_dim} {sset.ambient_dim}\n")
            for v in sset.vertices:
                fh.write("v " + " ".join(_fmt(c) for c in v) + "\n")
            for s in sset.simplices:
                fh.write("s " + " ".join(str(i) for i in s) + "\n")
        else:
            raise InvalidArgumentError(f"unknown format {fmt!r}")
