"""Pure-numpy pairwise kernels: the import-time fallback for the compiled
extension.  Same contracts as `tpsurf._pairwise`, implemented with
blocked einsum sweeps over the row index.

Row sums use the exponent-binned reduction so results are bit-identical
under any permutation of the cloud and any thread partitioning.
"""

from __future__ import annotations

import math

import numpy as np

BACKEND_NAME = "numpy"

PLANE_REL_TOL = 1e-14
_FOLDS = 3


def _pow_q(x, q: float):
    """x**q, specialised to repeated multiplication for small integer q."""
    qi = int(round(q))
    if qi == q and 1 <= qi <= 32:
        result = None
        base = x
        e = qi
        while e:
            if e & 1:
                result = base if result is None else result * base
            e >>= 1
            if e:
                base = base * base
        return result
    return np.power(x, q)


def _row_binned_sums(terms):
    """Order-invariant per-row sums of a (B, N) term matrix."""
    t = terms
    nrows, ncols = t.shape
    total = np.zeros(nrows)
    shift = int(math.ceil(math.log2(ncols + 1))) + 1
    r = t.copy()
    for _ in range(_FOLDS):
        m = np.max(np.abs(r), axis=1)
        live = m > 0.0
        if not np.any(live):
            break
        _, exp = np.frexp(m)
        scale = np.ldexp(1.0, exp + shift)
        scale[~live] = 1.0
        chunk = (r + scale[:, None]) - scale[:, None]
        total += np.sum(chunk, axis=1)
        r -= chunk
    return total


def _pair_terms(points, weights, frames, parents, q, i0, i1, symmetrize):
    """K^q * w_i * w_j matrix for rows [i0, i1) with exclusions applied."""
    d = points[None, :, :] - points[i0:i1, None, :]  # (B, N, n)
    r2 = np.einsum("bjn,bjn->bj", d, d)
    proj = np.einsum("bjn,bnm->bjm", d, frames[i0:i1])
    u = d - np.einsum("bjm,bnm->bjn", proj, frames[i0:i1])
    s = np.sqrt(np.einsum("bjn,bjn->bj", u, u))
    excl = (parents[None, :] == parents[i0:i1, None])
    with np.errstate(divide="ignore", invalid="ignore"):
        k = 2.0 * s / r2
    k[excl] = 0.0
    k[s <= PLANE_REL_TOL * np.sqrt(r2)] = 0.0
    if symmetrize:
        proj_j = np.einsum("bjn,jnm->bjm", d, frames)
        u_j = d - np.einsum("bjm,jnm->bjn", proj_j, frames)
        s_j = np.sqrt(np.einsum("bjn,bjn->bj", u_j, u_j))
        with np.errstate(divide="ignore", invalid="ignore"):
            k_j = 2.0 * s_j / r2
        k_j[excl] = 0.0
        k_j[s_j <= PLANE_REL_TOL * np.sqrt(r2)] = 0.0
        k = 0.5 * (k + k_j)
    included = int(np.count_nonzero(~excl)) - 0  # self pairs are inside excl
    excluded = int(np.count_nonzero(excl)) - (i1 - i0)  # drop the diagonal
    terms = _pow_q(k, q) * (weights[i0:i1, None] * weights[None, :])
    terms[excl] = 0.0
    return terms, included, excluded


def energy_rows(points, weights, frames, parents, q, i0, i1, symmetrize=False):
    """Deterministic row sums of the repulsion kernel for rows [i0, i1).

    Returns (row_sums, included_pair_count, excluded_pair_count).
    """
    terms, included, excluded = _pair_terms(
        points, weights, frames, parents, q, i0, i1, symmetrize
    )
    return _row_binned_sums(terms), included, excluded


def pair_stats_rows(points, frames, parents, i0, i1):
    """Per-row (max inv_rtp, min cross-parent distance) over rows [i0, i1)."""
    d = points[None, :, :] - points[i0:i1, None, :]
    r2 = np.einsum("bjn,bjn->bj", d, d)
    proj = np.einsum("bjn,bnm->bjm", d, frames[i0:i1])
    u = d - np.einsum("bjm,bnm->bjn", proj, frames[i0:i1])
    s = np.sqrt(np.einsum("bjn,bjn->bj", u, u))
    excl = (parents[None, :] == parents[i0:i1, None])
    with np.errstate(divide="ignore", invalid="ignore"):
        k = 2.0 * s / r2
    k[excl] = 0.0
    k[s <= PLANE_REL_TOL * np.sqrt(r2)] = 0.0
    dist = np.sqrt(r2)
    dist[excl] = np.inf
    return np.max(k, axis=1), np.min(dist, axis=1)


def gradient_rows(points, weights, frames, edges, gram_inv, parents, q, i0, i1):
    """Pairwise backward pass for the energy gradient, rows [i0, i1).

    Accumulates into freshly allocated arrays and returns
    (gpos, gw, gedge): derivatives with respect to the per-point
    positions, weights, and the parent-simplex edge matrices.  Row i
    contributes both orientations' weight terms but only the i-side
    kernel (the full sum over ordered rows covers everything).
    """
    npts, n = points.shape
    m = frames.shape[2]
    gpos = np.zeros((npts, n))
    gw = np.zeros(npts)
    gedge = np.zeros((npts, n, m))

    d = points[None, :, :] - points[i0:i1, None, :]
    r2 = np.einsum("bjn,bjn->bj", d, d)
    fproj = np.einsum("bjn,bnm->bjm", d, frames[i0:i1])
    u = d - np.einsum("bjm,bnm->bjn", fproj, frames[i0:i1])
    s2 = np.einsum("bjn,bjn->bj", u, u)
    s = np.sqrt(s2)
    excl = (parents[None, :] == parents[i0:i1, None])
    dead = excl | (s <= PLANE_REL_TOL * np.sqrt(r2))
    with np.errstate(divide="ignore", invalid="ignore"):
        k = np.where(dead, 0.0, 2.0 * s / r2)
        kq = _pow_q(k, q)
        kq1 = _pow_q(np.where(dead, 1.0, k), q - 1.0)
    kq = np.where(dead, 0.0, kq)
    kq1 = np.where(dead, 0.0, kq1)

    ww = weights[i0:i1, None] * weights[None, :]
    # weight derivatives (both orientations of each ordered pair)
    gw[i0:i1] += np.sum(kq * weights[None, :], axis=1)
    gw += np.einsum("bj,b->j", kq, weights[i0:i1])

    coef = ww * q * kq1  # multiplies dK
    with np.errstate(divide="ignore", invalid="ignore"):
        uhat = np.where(dead[:, :, None], 0.0, u / s[:, :, None])
        inv_r2 = np.where(dead, 0.0, 1.0 / r2)
    dkdd = 2.0 * uhat * inv_r2[:, :, None] - (4.0 * s * inv_r2 * inv_r2)[
        :, :, None
    ] * d
    contrib = coef[:, :, None] * dkdd
    gpos += np.sum(contrib, axis=0)
    gpos[i0:i1] -= np.sum(contrib, axis=1)

    # frame part through the parent edge matrix: ds/dE = -uhat a^T,
    # a = gram_inv (E^T d)
    eproj = np.einsum("bjn,bnm->bjm", d, edges[i0:i1])
    a = np.einsum("bmk,bjk->bjm", gram_inv[i0:i1], eproj)
    w_frame = coef * (2.0 * inv_r2)
    gedge[i0:i1] -= np.einsum("bj,bjn,bjm->bnm", w_frame, uhat, a)
    return gpos, gw, gedge
