"""Deterministic synthetic meshes used by the test suite, the acceptance
battery and the benchmarks: circles, spheres, tori, tubes, capped
cylinders, parallel disks, and cone-like surfaces with a controlled
apex singularity.
"""

from __future__ import annotations

import math

import numpy as np

from .simplicial import SimplicialSet


def circle_polygon(k: int, radius: float = 1.0, center=(0.0, 0.0), seed=None, noise: float = 0.0) -> SimplicialSet:
    """Closed k-gon inscribed in a circle, optionally with a smooth radial
    perturbation of the given relative amplitude (random low harmonics)."""
    t = np.linspace(0.0, 2.0 * math.pi, k, endpoint=False)
    r = np.full(k, radius)
    if noise > 0.0:
        rng = np.random.default_rng(seed)
        bump = np.zeros(k)
        for j in range(2, 6):
            bump += rng.uniform(-1.0, 1.0) * np.cos(j * t + rng.uniform(0.0, 2.0 * math.pi))
        bump /= np.max(np.abs(bump))
        r = r * (1.0 + noise * bump)
    v = np.stack([center[0] + r * np.cos(t), center[1] + r * np.sin(t)], axis=1)
    s = np.stack([np.arange(k), (np.arange(k) + 1) % k], axis=1)
    return SimplicialSet(v, s, intrinsic_dim=1)


def circle_polygon_3d(k: int, radius: float = 1.0, center=(0.0, 0.0, 0.0), axis=(0.0, 0.0, 1.0)) -> SimplicialSet:
    """Closed k-gon in R^3 in the plane orthogonal to `axis`."""
    axis = np.asarray(axis, dtype=np.float64)
    axis = axis / np.linalg.norm(axis)
    a = np.array([1.0, 0.0, 0.0]) if abs(axis[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    e1 = np.cross(axis, a)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(axis, e1)
    t = np.linspace(0.0, 2.0 * math.pi, k, endpoint=False)
    v = (
        np.asarray(center)
        + radius * np.cos(t)[:, None] * e1
        + radius * np.sin(t)[:, None] * e2
    )
    s = np.stack([np.arange(k), (np.arange(k) + 1) % k], axis=1)
    return SimplicialSet(v, s, intrinsic_dim=1)


def unit_segment(parts: int = 1) -> SimplicialSet:
    v = np.stack([np.linspace(0.0, 1.0, parts + 1), np.zeros(parts + 1)], axis=1)
    s = np.stack([np.arange(parts), np.arange(parts) + 1], axis=1)
    return SimplicialSet(v, s, intrinsic_dim=1)


def unit_square() -> SimplicialSet:
    v = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [1.0, 1.0, 0.0], [0.0, 1.0, 0.0]])
    s = np.array([[0, 1, 2], [0, 2, 3]])
    return SimplicialSet(v, s, intrinsic_dim=2)


def icosahedron(radius: float = 1.0):
    phi = (1.0 + math.sqrt(5.0)) / 2.0
    v = np.array(
        [
            [-1, phi, 0], [1, phi, 0], [-1, -phi, 0], [1, -phi, 0],
            [0, -1, phi], [0, 1, phi], [0, -1, -phi], [0, 1, -phi],
            [phi, 0, -1], [phi, 0, 1], [-phi, 0, -1], [-phi, 0, 1],
        ],
        dtype=np.float64,
    )
    v *= radius / np.linalg.norm(v[0])
    f = np.array(
        [
            [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
            [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
            [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
            [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
        ]
    )
    return v, f


def icosphere(subdivisions: int, radius: float = 1.0) -> SimplicialSet:
    """Icosahedron subdivided `subdivisions` times, vertices on the sphere."""
    v, f = icosahedron(radius)
    verts = [tuple(p) for p in v]
    index = {p: i for i, p in enumerate(verts)}
    faces = [tuple(t) for t in f]

    def midpoint(i, j, vlist):
        p = np.asarray(vlist[i]) + np.asarray(vlist[j])
        p *= radius / np.linalg.norm(p)
        key = tuple(np.round(p, 14))
        if key not in index:
            index[key] = len(vlist)
            vlist.append(tuple(p))
        return index[key]

    vlist = list(verts)
    for _ in range(subdivisions):
        new_faces = []
        for (a, b, c) in faces:
            ab = midpoint(a, b, vlist)
            bc = midpoint(b, c, vlist)
            ca = midpoint(c, a, vlist)
            new_faces += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = new_faces
    verts_arr = np.array(vlist, dtype=np.float64)
    verts_arr *= radius / np.linalg.norm(verts_arr, axis=1, keepdims=True)
    return SimplicialSet(verts_arr, np.array(faces), intrinsic_dim=2)


def _grid_triangles(nu: int, nv: int, wrap_u: bool, wrap_v: bool):
    ui = nu if wrap_u else nu - 1
    vi = nv if wrap_v else nv - 1
    tris = []
    for i in range(ui):
        for j in range(vi):
            a = i * nv + j
            b = ((i + 1) % nu) * nv + j
            c = ((i + 1) % nu) * nv + (j + 1) % nv
            d = i * nv + (j + 1) % nv
            tris.append([a, b, c])
            tris.append([a, c, d])
    return np.array(tris)


def torus(major: float = 1.0, minor: float = 0.4, nu: int = 48, nv: int = 24) -> SimplicialSet:
    u = np.linspace(0.0, 2.0 * math.pi, nu, endpoint=False)
    v = np.linspace(0.0, 2.0 * math.pi, nv, endpoint=False)
    uu, vv = np.meshgrid(u, v, indexing="ij")
    x = (major + minor * np.cos(vv)) * np.cos(uu)
    y = (major + minor * np.cos(vv)) * np.sin(uu)
    z = minor * np.sin(vv)
    verts = np.stack([x.ravel(), y.ravel(), z.ravel()], axis=1)
    return SimplicialSet(verts, _grid_triangles(nu, nv, True, True), intrinsic_dim=2)


def clifford_torus_sample(nu: int = 24, nv: int = 24, ambient: int = 5) -> SimplicialSet:
    """Flat torus in S^3 subset R^4, zero-padded to the requested ambient dim."""
    u = np.linspace(0.0, 2.0 * math.pi, nu, endpoint=False)
    v = np.linspace(0.0, 2.0 * math.pi, nv, endpoint=False)
    uu, vv = np.meshgrid(u, v, indexing="ij")
    s = 1.0 / math.sqrt(2.0)
    verts4 = np.stack(
        [s * np.cos(uu), s * np.sin(uu), s * np.cos(vv), s * np.sin(vv)], axis=-1
    ).reshape(-1, 4)
    verts = np.zeros((len(verts4), ambient))
    verts[:, :4] = verts4
    return SimplicialSet(verts, _grid_triangles(nu, nv, True, True), intrinsic_dim=2)


def flat_disk(rings: int = 12, segments: int = 32, radius: float = 1.0, center=(0.0, 0.0, 0.0), normal_axis: int = 2) -> SimplicialSet:
    """Triangulated planar disk (fan center + concentric rings)."""
    pts = [np.zeros(3)]
    for j in range(1, rings + 1):
        r = radius * j / rings
        for k in range(segments):
            a = 2.0 * math.pi * k / segments
            pts.append(np.array([r * math.cos(a), r * math.sin(a), 0.0]))
    tris = []
    for k in range(segments):
        tris.append([0, 1 + k, 1 + (k + 1) % segments])
    for j in range(1, rings):
        base0 = 1 + (j - 1) * segments
        base1 = 1 + j * segments
        for k in range(segments):
            k1 = (k + 1) % segments
            tris.append([base0 + k, base1 + k, base1 + k1])
            tris.append([base0 + k, base1 + k1, base0 + k1])
    verts = np.array(pts)
    if normal_axis != 2:
        order = [0, 1, 2]
        order[2], order[normal_axis] = order[normal_axis], order[2]
        verts = verts[:, order]
    verts = verts + np.asarray(center, dtype=np.float64)
    return SimplicialSet(verts, np.array(tris), intrinsic_dim=2)


def parallel_disks(gap: float = 1.0, rings: int = 12, segments: int = 32, radius: float = 1.0):
    """Two coaxial unit disks separated by `gap`, merged into one set."""
    lower = flat_disk(rings, segments, radius, center=(0.0, 0.0, 0.0))
    upper = flat_disk(rings, segments, radius, center=(0.0, 0.0, gap))
    verts = np.vstack([lower.vertices, upper.vertices])
    simp = np.vstack([lower.simplices, upper.simplices + len(lower.vertices)])
    return SimplicialSet(verts, simp, intrinsic_dim=2)


def _lathe(profile_rz, n_theta: int, close_top: bool, close_bottom: bool) -> SimplicialSet:
    """Surface of revolution around the z axis.

    profile_rz: (k, 2) array of (radius, z) samples ordered along the
    surface; rows with radius 0 become pole vertices (only allowed at the
    ends).
    """
    profile = np.asarray(profile_rz, dtype=np.float64)
    verts = []
    ring_index = []
    for (r, z) in profile:
        if r <= 0.0:
            ring_index.append(("pole", len(verts)))
            verts.append(np.array([0.0, 0.0, z]))
        else:
            base = len(verts)
            for k in range(n_theta):
                a = 2.0 * math.pi * k / n_theta
                verts.append(np.array([r * math.cos(a), r * math.sin(a), z]))
            ring_index.append(("ring", base))
    tris = []
    for i in range(len(ring_index) - 1):
        kind0, b0 = ring_index[i]
        kind1, b1 = ring_index[i + 1]
        if kind0 == "ring" and kind1 == "ring":
            for k in range(n_theta):
                k1 = (k + 1) % n_theta
                tris.append([b0 + k, b1 + k, b1 + k1])
                tris.append([b0 + k, b1 + k1, b0 + k1])
        elif kind0 == "pole" and kind1 == "ring":
            for k in range(n_theta):
                tris.append([b0, b1 + k, b1 + (k + 1) % n_theta])
        elif kind0 == "ring" and kind1 == "pole":
            for k in range(n_theta):
                tris.append([b0 + k, b1, b0 + (k + 1) % n_theta])
        else:
            raise ValueError("two adjacent poles in lathe profile")
    return SimplicialSet(np.array(verts), np.array(tris), intrinsic_dim=2)


def cylinder_with_caps(radius: float = 1.0, half_length: float = 1.0, n_theta: int = 32, n_bands: int = 8, cap_bands: int = 8) -> SimplicialSet:
    """Rotational cylinder closed with two hemispherical caps (C^{1,1})."""
    prof = []
    # top pole down through the upper cap
    for j in range(cap_bands + 1):
        phi = 0.5 * math.pi * j / cap_bands
        prof.append((radius * math.sin(phi), half_length + radius * math.cos(phi)))
    # cylinder body
    for j in range(1, n_bands + 1):
        prof.append((radius, half_length - 2.0 * half_length * j / n_bands))
    # lower cap
    for j in range(1, cap_bands + 1):
        phi = 0.5 * math.pi * (1.0 + j / cap_bands)
        prof.append((radius * math.cos(phi - 0.5 * math.pi), -half_length - radius * math.sin(phi - 0.5 * math.pi)))
    # deduplicate radius-0 endpoints handled by lathe
    prof[0] = (0.0, half_length + radius)
    prof[-1] = (0.0, -half_length - radius)
    return _lathe(prof, n_theta, True, True)


def thin_finger(radius: float = 0.01, half_length: float = 0.5, n_theta: int = 16, n_bands: int = 64, cap_bands: int = 4) -> SimplicialSet:
    """Thin capped tube: the density counterexample at radii above its girth."""
    return cylinder_with_caps(radius, half_length, n_theta, n_bands, cap_bands)


def _teardrop_profile(apex_height: float, cutoff: float, n_theta: int, sphere_bands: int, rings_per_octave: float = 1.0):
    """(r, z) profile of a unit-sphere body with a tangent cone to an apex.

    The cone flank is sampled geometrically from the tangency circle down
    to `cutoff` (distance from the apex), so the energy integrand is
    resolved octave by octave toward the singular point.  The apex sits
    at the origin: ring coordinates near the singularity then keep full
    relative floating-point precision at any depth.
    """
    a = apex_height
    z_t = 1.0 / a
    r_t = math.sqrt(max(1.0 - z_t * z_t, 0.0))
    s_max = math.sqrt(a * a - 1.0)
    gen = np.array([r_t, z_t - a]) / s_max  # unit step away from the apex

    prof = [(0.0, 0.0)]
    octaves = max(1, int(math.ceil(math.log2(s_max / cutoff) * rings_per_octave)))
    for j in range(octaves + 1):
        # geometric ring spacing: s runs from cutoff (at the apex) to s_max
        s = s_max * (cutoff / s_max) ** ((octaves - j) / octaves)
        prof.append((s * gen[0], s * gen[1]))
    # sphere body below the tangency circle (center at (0, -a))
    phi_t = math.acos(z_t)
    for j in range(1, sphere_bands + 1):
        phi = phi_t + (math.pi - phi_t) * j / sphere_bands
        prof.append((math.sin(phi), math.cos(phi) - a))
    prof[-1] = (0.0, -1.0 - a)
    return prof


def teardrop(cutoff: float, apex_height: float = 6.0, n_theta: int = 24, sphere_bands: int = 10) -> SimplicialSet:
    """Sphere with a tangent cone reaching an apex point (one conical
    singularity); the flank is resolved geometrically down to `cutoff`."""
    prof = _teardrop_profile(apex_height, cutoff, n_theta, sphere_bands)
    return _lathe(prof, n_theta, True, True)


def rounded_teardrop(level: int, apex_height: float = 6.0, cap_s: float = 0.35, base_theta: int = 8, base_bands: int = 4) -> SimplicialSet:
    """Smooth control for `teardrop`: the apex is replaced by a tangent
    spherical cap at flank distance `cap_s`.  Refinement grows linearly
    with `level` so the whole ladder stays at desk scale."""
    a = apex_height
    z_t = 1.0 / a
    s_max = math.sqrt(a * a - 1.0)
    sinphi = 1.0 / a  # cone half-angle at the apex
    cosphi = s_max / a
    tanphi = sinphi / cosphi
    n_theta = base_theta * (level + 1)
    bands = base_bands * (level + 1)

    gen = np.array([math.sqrt(1.0 - z_t * z_t), z_t - a]) / s_max

    # cap sphere tangent to the cone along the circle at distance cap_s
    cap_center_z = -cap_s / cosphi
    r_cap = cap_s * tanphi

    prof = [(0.0, cap_center_z + r_cap)]
    # cap arc from its pole to the tangency with the cone
    psi_t = math.pi / 2.0 - math.asin(sinphi)
    for j in range(1, bands + 1):
        psi = psi_t * j / bands
        prof.append((r_cap * math.sin(psi), cap_center_z + r_cap * math.cos(psi)))
    # straight flank from cap_s to s_max
    for j in range(1, bands + 1):
        s = cap_s + (s_max - cap_s) * j / bands
        prof.append((s * gen[0], s * gen[1]))
    # sphere body (center at (0, -a))
    phi_t = math.acos(z_t)
    for j in range(1, 2 * bands + 1):
        phi = phi_t + (math.pi - phi_t) * j / (2 * bands)
        prof.append((math.sin(phi), math.cos(phi) - a))
    prof[-1] = (0.0, -1.0 - a)
    return _lathe(prof, n_theta, True, True)


def random_triangle_soup(n_triangles: int, seed: int, spread: float = 1.0, min_quality: float = 0.1) -> SimplicialSet:
    """Well-shaped random triangles in general position (for gradient checks)."""
    rng = np.random.default_rng(seed)
    verts = []
    while len(verts) < 3 * n_triangles:
        tri = rng.uniform(-spread, spread, size=(3, 3))
        e1, e2 = tri[1] - tri[0], tri[2] - tri[0]
        area = 0.5 * np.linalg.norm(np.cross(e1, e2))
        longest = max(np.linalg.norm(e1), np.linalg.norm(e2), np.linalg.norm(tri[2] - tri[1]))
        if 2.0 * area / longest**2 >= min_quality:
            verts.extend(tri)
    verts = np.array(verts[: 3 * n_triangles])
    simp = np.arange(3 * n_triangles).reshape(-1, 3)
    return SimplicialSet(verts, simp, intrinsic_dim=2)


def hopf_circles(k: int = 128):
    """Two unit circles in Hopf position: orthogonal planes, centers 1 apart."""
    a = circle_polygon_3d(k, radius=1.0, center=(0.0, 0.0, 0.0), axis=(0.0, 0.0, 1.0))
    b = circle_polygon_3d(k, radius=1.0, center=(1.0, 0.0, 0.0), axis=(0.0, 1.0, 0.0))
    return a, b
