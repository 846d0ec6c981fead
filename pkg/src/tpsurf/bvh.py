"""Hierarchical acceleration of the pairwise energy sum.

Median-split tree over quadrature points.  A cluster pair is evaluated
in the far field when (r_A + r_B) <= theta * dist and the gap exceeds
the largest parent-simplex diameter (so no excluded same-simplex pair
can straddle the two clusters) and the in-cluster plane spread is below
theta.  Far terms use the cluster weight totals, weighted centroids and
a representative member plane; the deviation is covered by a first-order
bound from the kernel's Lipschitz estimates on the separated region:

    |K^q(i, j) - K^q(rep)| <= q Kmax^(q-1) (6 (rA+rB)/dmin^2 + 2 spread/dmin)

with Kmax = 2/dmin and dmin = dist - rA - rB.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._kernels_numpy import PLANE_REL_TOL, _pow_q
from ._reduction import reproducible_sum

LEAF_SIZE = 16


@dataclass
class _Node:
    lo: int
    hi: int
    centroid: np.ndarray
    weight: float
    radius: float
    rep: int
    spread: float
    left: int = -1
    right: int = -1

    @property
    def is_leaf(self) -> bool:
        return self.left < 0

    @property
    def count(self) -> int:
        return self.hi - self.lo


class ClusterTree:
    def __init__(self, points, weights, frames, parents, leaf_size=LEAF_SIZE):
        self.points = points
        self.weights = weights
        self.frames = frames
        self.parents = parents
        self.perm = np.arange(len(points))
        self.nodes: list[_Node] = []
        self._build(0, len(points), leaf_size)

    def _make_node(self, lo, hi):
        idx = self.perm[lo:hi]
        pts = self.points[idx]
        w = self.weights[idx]
        total = float(np.sum(w))
        centroid = (w[:, None] * pts).sum(axis=0) / total
        radius = float(np.max(np.linalg.norm(pts - centroid, axis=1)))
        rep_local = int(np.argmin(np.linalg.norm(pts - centroid, axis=1)))
        rep = int(idx[rep_local])
        frep = self.frames[rep]
        m = frep.shape[1]
        cross = np.einsum("knm,nl->kml", self.frames[idx], frep)
        fro2 = np.einsum("kml,kml->k", cross, cross)
        spread2 = np.clip(2.0 * m - 2.0 * fro2, 0.0, None)
        spread = float(np.sqrt(np.max(spread2)))  # Frobenius bound on the angle
        return _Node(lo, hi, centroid, total, radius, rep, spread)

    def _build(self, lo, hi, leaf_size):
        stack = [(lo, hi, -1, False)]
        while stack:
            a, b, parent, is_right = stack.pop()
            node_id = len(self.nodes)
            node = self._make_node(a, b)
            self.nodes.append(node)
            if parent >= 0:
                if is_right:
                    self.nodes[parent].right = node_id
                else:
                    self.nodes[parent].left = node_id
            if b - a <= leaf_size:
                continue
            idx = self.perm[a:b]
            pts = self.points[idx]
            widths = np.max(pts, axis=0) - np.min(pts, axis=0)
            axis = int(np.argmax(widths))
            order = np.argsort(pts[:, axis], kind="stable")
            self.perm[a:b] = idx[order]
            mid = a + (b - a) // 2
            stack.append((mid, b, node_id, True))
            stack.append((a, mid, node_id, False))


def _near_terms(tree: ClusterTree, ia, ib, q):
    """Exact ordered-pair terms between member lists (both orientations)."""
    pts, wts, frames, parents = tree.points, tree.weights, tree.frames, tree.parents
    out = []
    included = excluded = 0
    pairs = ((ia, ib), (ib, ia)) if ia is not ib else ((ia, ia),)
    for src, dst in pairs:
        d = pts[dst][None, :, :] - pts[src][:, None, :]
        r2 = np.einsum("bjn,bjn->bj", d, d)
        proj = np.einsum("bjn,bnm->bjm", d, frames[src])
        u = d - np.einsum("bjm,bnm->bjn", proj, frames[src])
        s = np.sqrt(np.einsum("bjn,bjn->bj", u, u))
        excl = parents[src][:, None] == parents[dst][None, :]
        diag = len(src) == len(dst) and np.array_equal(src, dst)
        with np.errstate(divide="ignore", invalid="ignore"):
            k = 2.0 * s / r2
        k[excl] = 0.0
        k[s <= PLANE_REL_TOL * np.sqrt(r2)] = 0.0
        terms = _pow_q(k, q) * (wts[src][:, None] * wts[dst][None, :])
        terms[excl] = 0.0
        out.append(terms.ravel())
        n_excl = int(np.count_nonzero(excl)) - (len(src) if diag else 0)
        included += terms.size - int(np.count_nonzero(excl))
        excluded += n_excl
    return out, included, excluded


def bvh_energy(cloud, q: float, theta: float):
    """(total, included_pairs, excluded_pairs, certified_error_bound)."""
    if not (0.0 < theta < 1.0):
        raise ValueError("theta must lie in (0, 1)")
    pts = np.ascontiguousarray(cloud.points)
    wts = np.ascontiguousarray(cloud.weights)
    frames = np.ascontiguousarray(cloud.frames)
    parents = np.ascontiguousarray(cloud.parents, dtype=np.int64)
    tree = ClusterTree(pts, wts, frames, parents)
    hmax = float(cloud.max_parent_diameter)

    term_arrays: list[np.ndarray] = []
    bound_terms: list[float] = []
    included = excluded = 0

    stack = [(0, 0)]
    while stack:
        a_id, b_id = stack.pop()
        a, b = tree.nodes[a_id], tree.nodes[b_id]
        if a_id == b_id:
            if a.is_leaf:
                ia = tree.perm[a.lo : a.hi]
                terms, inc, exc = _near_terms(tree, ia, ia, q)
                term_arrays += terms
                included += inc
                excluded += exc
            else:
                stack.append((a.left, a.left))
                stack.append((a.left, a.right))
                stack.append((a.right, a.right))
            continue
        dist = float(np.linalg.norm(a.centroid - b.centroid))
        rsum = a.radius + b.radius
        dmin = dist - rsum
        far = (
            rsum <= theta * dist
            and dmin > hmax
            and max(a.spread, b.spread) <= theta
        )
        if far:
            # evaluate both orientations at the cluster representatives
            k_ab = _cluster_kernel(pts, frames, a, b)
            k_ba = _cluster_kernel(pts, frames, b, a)
            ww = a.weight * b.weight
            term_arrays.append(
                np.array([ww * float(_pow_q(np.array(k_ab), q)),
                          ww * float(_pow_q(np.array(k_ba), q))])
            )
            kmax = 2.0 / dmin
            lip = q * kmax ** (q - 1.0)
            move = 6.0 * rsum / (dmin * dmin)
            bound_terms.append(ww * lip * (move + 2.0 * a.spread / dmin))
            bound_terms.append(ww * lip * (move + 2.0 * b.spread / dmin))
            included += 2 * a.count * b.count
            continue
        if a.is_leaf and b.is_leaf:
            ia = tree.perm[a.lo : a.hi]
            ib = tree.perm[b.lo : b.hi]
            terms, inc, exc = _near_terms(tree, ia, ib, q)
            term_arrays += terms
            included += inc
            excluded += exc
            continue
        # split the bulkier side
        split_a = not a.is_leaf and (b.is_leaf or a.radius >= b.radius)
        if split_a:
            stack.append((a.left, b_id))
            stack.append((a.right, b_id))
        else:
            stack.append((a_id, b.left))
            stack.append((a_id, b.right))

    all_terms = np.concatenate(term_arrays) if term_arrays else np.zeros(0)
    total = reproducible_sum(all_terms)
    bound = reproducible_sum(np.asarray(bound_terms))
    return total, included, excluded, bound


def _cluster_kernel(pts, frames, src: _Node, dst: _Node) -> float:
    d = dst.centroid - src.centroid
    r2 = float(d @ d)
    f = frames[src.rep]
    u = d - f @ (f.T @ d)
    s = float(np.linalg.norm(u))
    if s <= PLANE_REL_TOL * math.sqrt(r2):
        return 0.0
    return 2.0 * s / r2
