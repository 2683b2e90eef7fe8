"""Cone blocks: Euclidean projections plus the membership and support
tests used by the infeasibility certificates.

Supported kinds: zero, nonneg, box (interval, not a cone but handled like
one), second-order cone (leading entry is t), and PSD matrices stored as
scaled lower-triangle vectors.  PSD blocks use the convention that
off-diagonal entries are multiplied by sqrt(2), so the vector 2-norm
matches the matrix Frobenius norm.
"""

from __future__ import annotations

import math

import numpy as np

from .linalg import eigh_symmetric

ZERO = "zero"
NONNEG = "nonneg"
BOX = "box"
SECOND_ORDER = "soc"
PSD_TRIANGLE = "psd"

_KINDS = (ZERO, NONNEG, BOX, SECOND_ORDER, PSD_TRIANGLE)

_SQRT2 = math.sqrt(2.0)


def triangle_side(dim: int) -> int:
    """Side s of a symmetric matrix stored as an s(s+1)/2 triangle vector."""
    side = (math.isqrt(8 * dim + 1) - 1) // 2
    if side * (side + 1) // 2 != dim:
        raise ValueError(f"{dim} is not a triangular number")
    return side


class ConeBlock:
    """One block of the product cone, with bounds for box blocks."""

    def __init__(self, kind: str, dim: int, l=None, u=None):
        if kind not in _KINDS:
            raise ValueError(f"unknown cone kind {kind!r}")
        if dim < 1:
            raise ValueError("cone dimension must be positive")
        self.kind = kind
        self.dim = dim
        self.l = None
        self.u = None
        if kind == BOX:
            self.l = np.full(dim, -np.inf) if l is None else np.asarray(l, dtype=float)
            self.u = np.full(dim, np.inf) if u is None else np.asarray(u, dtype=float)
            if self.l.shape != (dim,) or self.u.shape != (dim,):
                raise ValueError("box bounds must match the block dimension")
            if np.any(self.l > self.u):
                raise ValueError("box lower bounds exceed upper bounds")
        elif l is not None or u is not None:
            raise ValueError(f"bounds only apply to box blocks, not {kind!r}")
        if kind == PSD_TRIANGLE:
            self.side = triangle_side(dim)

    def __repr__(self) -> str:
        return f"ConeBlock({self.kind!r}, dim={self.dim})"

    def __eq__(self, other) -> bool:
        if not isinstance(other, ConeBlock):
            return NotImplemented
        if (self.kind, self.dim) != (other.kind, other.dim):
            return False
        if self.kind == BOX:
            return np.array_equal(self.l, other.l) and np.array_equal(self.u, other.u)
        return True


def svec(S: np.ndarray) -> np.ndarray:
    """Scaled lower-triangle vector of a symmetric matrix (column-major)."""
    side = S.shape[0]
    out = np.empty(side * (side + 1) // 2)
    k = 0
    for j in range(side):
        out[k] = S[j, j]
        k += 1
        for i in range(j + 1, side):
            out[k] = S[i, j] * _SQRT2
            k += 1
    return out


def smat(vec: np.ndarray) -> np.ndarray:
    """Inverse of :func:`svec`."""
    vec = np.asarray(vec, dtype=float)
    side = triangle_side(vec.size)
    S = np.empty((side, side))
    k = 0
    for j in range(side):
        S[j, j] = vec[k]
        k += 1
        for i in range(j + 1, side):
            S[i, j] = S[j, i] = vec[k] / _SQRT2
            k += 1
    return S


def project_cone(block: ConeBlock, v: np.ndarray) -> np.ndarray:
    """Euclidean projection of v onto the block."""
    v = np.asarray(v, dtype=float)
    if v.shape != (block.dim,):
        raise ValueError(f"vector has shape {v.shape}, expected ({block.dim},)")
    if block.kind == ZERO:
        return np.zeros(block.dim)
    if block.kind == NONNEG:
        return np.maximum(v, 0.0)
    if block.kind == BOX:
        return np.clip(v, block.l, block.u)
    if block.kind == SECOND_ORDER:
        t, x = v[0], v[1:]
        xn = float(np.linalg.norm(x))
        if xn <= t:
            return v.copy()
        if xn <= -t:
            return np.zeros(block.dim)
        scale = 0.5 * (1.0 + t / xn)
        out = np.empty_like(v)
        out[0] = scale * xn
        out[1:] = scale * x
        return out
    # PSD: clamp negative eigenvalues.
    vals, vecs = eigh_symmetric(smat(v))
    clipped = np.maximum(vals, 0.0)
    return svec((vecs * clipped) @ vecs.T)


def in_recession_of_negation(block: ConeBlock, d: np.ndarray, tol: float) -> bool:
    """Whether d lies in the recession cone of -K, within absolute tol.

    This is the direction test for unboundedness certificates: moving the
    slack along -d forever must stay inside the block.
    """
    d = np.asarray(d, dtype=float)
    if block.kind == ZERO:
        return bool(np.abs(d).max() <= tol)
    if block.kind == NONNEG:
        return bool(d.max() <= tol)
    if block.kind == BOX:
        lo_finite = np.isfinite(block.l)
        hi_finite = np.isfinite(block.u)
        # d_i >= 0 needs l_i = -inf; d_i <= 0 needs u_i = +inf.
        ok_pos = np.all(d[lo_finite] <= tol)
        ok_neg = np.all(d[hi_finite] >= -tol)
        return bool(ok_pos and ok_neg)
    if block.kind == SECOND_ORDER:
        return bool(np.linalg.norm(d[1:]) <= -d[0] + tol)
    vals, _ = eigh_symmetric(smat(-d))
    return bool(vals.min() >= -tol)


def cone_support(block: ConeBlock, w: np.ndarray, tol: float) -> float:
    """Support function sup_{s in K} <w, s>, with absolute tolerance.

    Returns 0.0 when the supremum vanishes (w in the polar cone, within
    tol), a finite value for box blocks, and inf when unbounded.
    """
    w = np.asarray(w, dtype=float)
    if block.kind == ZERO:
        return 0.0
    if block.kind == NONNEG:
        return 0.0 if w.max() <= tol else math.inf
    if block.kind == BOX:
        total = 0.0
        for wi, lo, hi in zip(w, block.l, block.u):
            if wi > tol:
                if not np.isfinite(hi):
                    return math.inf
                total += wi * hi
            elif wi < -tol:
                if not np.isfinite(lo):
                    return math.inf
                total += wi * lo
        return total
    if block.kind == SECOND_ORDER:
        # Self-dual: the support is zero iff w is in -K.
        return 0.0 if np.linalg.norm(w[1:]) <= -w[0] + tol else math.inf
    vals, _ = eigh_symmetric(smat(w))
    return 0.0 if vals.max() <= tol else math.inf
