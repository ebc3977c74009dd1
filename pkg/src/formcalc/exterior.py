"""Exterior algebra over R^n with dense coefficient arrays.

Basis k-(co)vectors are indexed by strictly increasing 0-based index tuples in
lexicographic order, so ``dx^1 ^ dx^2`` in R^3 is the multi-index ``(0, 1)`` at
position 0 of ``multi_indices(3, 2)``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import lru_cache
from math import comb, sqrt

import numpy as np

from .errors import ComassError, DimensionError


@lru_cache(maxsize=None)
def multi_indices(n: int, k: int) -> tuple[tuple[int, ...], ...]:
    """Increasing multi-indices of length ``k`` from ``range(n)``, lexicographic."""
    if n < 1 or k < 0 or k > n:
        raise DimensionError(f"no multi-indices for n={n}, k={k}")
    return tuple(itertools.combinations(range(n), k))


@lru_cache(maxsize=None)
def _position(n: int, k: int) -> dict[tuple[int, ...], int]:
    return {idx: pos for pos, idx in enumerate(multi_indices(n, k))}


def index_of(n: int, indices) -> int:
    """Position of a strictly increasing multi-index in the lexicographic basis."""
    idx = tuple(int(i) for i in indices)
    if any(b <= a for a, b in zip(idx, idx[1:])):
        raise DimensionError(f"multi-index {idx} is not strictly increasing")
    if idx and (idx[0] < 0 or idx[-1] >= n):
        raise DimensionError(f"multi-index {idx} out of range for n={n}")
    return _position(n, len(idx))[idx]


def _perm_sign(seq) -> int:
    seq = list(seq)
    sign = 1
    for i in range(len(seq)):
        for j in range(i + 1, len(seq)):
            if seq[i] > seq[j]:
                sign = -sign
    return sign


def _check_coeffs(n: int, k: int, coeffs) -> np.ndarray:
    if n < 1 or not 0 <= k <= n:
        raise DimensionError(f"invalid order k={k} for n={n}")
    arr = np.asarray(coeffs, dtype=float).reshape(-1)
    if arr.shape[0] != comb(n, k):
        raise DimensionError(
            f"expected {comb(n, k)} coefficients for n={n}, k={k}, got {arr.shape[0]}"
        )
    if not np.all(np.isfinite(arr)):
        raise ValueError("coefficients must be finite")
    return arr


@dataclass(frozen=True)
class MultiCovector:
    """Element of the k-th exterior power of the dual of R^n."""

    n: int
    k: int
    coeffs: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "coeffs", _check_coeffs(self.n, self.k, self.coeffs))

    @classmethod
    def basis(cls, n: int, indices) -> MultiCovector:
        """``dx^{i_1} ^ ... ^ dx^{i_k}`` for 0-based increasing ``indices``."""
        k = len(tuple(indices))
        coeffs = np.zeros(comb(n, k))
        coeffs[index_of(n, indices)] = 1.0
        return cls(n, k, coeffs)

    @classmethod
    def zero(cls, n: int, k: int) -> MultiCovector:
        return cls(n, k, np.zeros(comb(n, k)))

    def __add__(self, other: MultiCovector) -> MultiCovector:
        _same_shape(self, other)
        return MultiCovector(self.n, self.k, self.coeffs + other.coeffs)

    def __sub__(self, other: MultiCovector) -> MultiCovector:
        _same_shape(self, other)
        return MultiCovector(self.n, self.k, self.coeffs - other.coeffs)

    def __mul__(self, scalar: float) -> MultiCovector:
        return MultiCovector(self.n, self.k, self.coeffs * float(scalar))

    __rmul__ = __mul__

    def __neg__(self) -> MultiCovector:
        return MultiCovector(self.n, self.k, -self.coeffs)

    def __xor__(self, other: MultiCovector) -> MultiCovector:
        return wedge(self, other)


@dataclass(frozen=True)
class MultiVector:
    """Element of the k-th exterior power of R^n."""

    n: int
    k: int
    coeffs: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "coeffs", _check_coeffs(self.n, self.k, self.coeffs))

    @classmethod
    def basis(cls, n: int, indices) -> MultiVector:
        k = len(tuple(indices))
        coeffs = np.zeros(comb(n, k))
        coeffs[index_of(n, indices)] = 1.0
        return cls(n, k, coeffs)

    @property
    def dual(self) -> MultiCovector:
        """Covector identified with this k-vector through the Euclidean structure."""
        return MultiCovector(self.n, self.k, self.coeffs.copy())


def _same_shape(a, b):
    if a.n != b.n or a.k != b.k:
        raise DimensionError(f"shape mismatch: (n={a.n}, k={a.k}) vs (n={b.n}, k={b.k})")


@lru_cache(maxsize=None)
def _wedge_table(n: int, k: int, l: int):
    left, right, out, sign = [], [], [], []
    pos = _position(n, k + l)
    for i, I in enumerate(multi_indices(n, k)):
        for j, J in enumerate(multi_indices(n, l)):
            if set(I) & set(J):
                continue
            left.append(i)
            right.append(j)
            out.append(pos[tuple(sorted(I + J))])
            sign.append(_perm_sign(I + J))
    return (np.array(left, dtype=int), np.array(right, dtype=int),
            np.array(out, dtype=int), np.array(sign, dtype=float))


def wedge(a: MultiCovector, b: MultiCovector) -> MultiCovector:
    """Exterior product of a k-covector and an l-covector."""
    if a.n != b.n:
        raise DimensionError(f"ambient dimensions differ: {a.n} vs {b.n}")
    if a.k + b.k > a.n:
        raise DimensionError(f"order overflow: {a.k} + {b.k} > n={a.n}")
    li, ri, oi, sg = _wedge_table(a.n, a.k, b.k)
    out = np.zeros(comb(a.n, a.k + b.k))
    np.add.at(out, oi, sg * a.coeffs[li] * b.coeffs[ri])
    return MultiCovector(a.n, a.k + b.k, out)


def wedge_coeffs(n: int, k: int, l: int, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Batched wedge on raw coefficient arrays of shape (..., C(n,k)) and (..., C(n,l))."""
    li, ri, oi, sg = _wedge_table(n, k, l)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    terms = sg * a[..., li] * b[..., ri]
    out = np.zeros(np.broadcast_shapes(a.shape[:-1], b.shape[:-1]) + (comb(n, k + l),))
    # scatter-add along the last axis
    for pos in np.unique(oi):
        out[..., pos] = terms[..., oi == pos].sum(axis=-1)
    return out


def pairing(omega: MultiCovector, tau: MultiVector) -> float:
    """Dual pairing of a k-covector with a k-vector."""
    _same_shape(omega, tau)
    return float(omega.coeffs @ tau.coeffs)


def minors(mat: np.ndarray, k: int) -> np.ndarray:
    """All k x k row-minors of ``mat`` (shape (..., n, k)), lexicographic in rows."""
    mat = np.asarray(mat, dtype=float)
    n = mat.shape[-2]
    if k == 0:
        return np.ones(mat.shape[:-2] + (1,))
    rows = np.array(multi_indices(n, k))
    sub = mat[..., rows, :]  # (..., C, k, k)
    return np.linalg.det(sub)


def simple_vector(vectors) -> MultiVector:
    """The k-vector ``v_1 ^ ... ^ v_k``; its coefficients are the k x k minors."""
    vecs = np.atleast_2d(np.asarray(vectors, dtype=float))
    if vecs.size == 0:
        raise DimensionError("need at least one vector")
    k, n = vecs.shape
    if k > n:
        raise DimensionError(f"{k} vectors in R^{n}")
    return MultiVector(n, k, minors(vecs.T, k))


def compound_matrix(mat: np.ndarray, k: int) -> np.ndarray:
    """k-th compound: entry (J, I) is ``det(mat[J][:, I])``; batched over leading axes."""
    mat = np.asarray(mat, dtype=float)
    n = mat.shape[-1]
    if k == 0:
        return np.ones(mat.shape[:-2] + (1, 1))
    idx = np.array(multi_indices(n, k))
    sub = mat[..., idx[:, None, :, None], idx[None, :, None, :]]  # (..., C, C, k, k)
    return np.linalg.det(sub)


def euclidean_norm(x: MultiCovector | MultiVector) -> float:
    return float(np.sqrt(np.einsum("c,c->", x.coeffs, x.coeffs)))


@dataclass(frozen=True)
class ComassOptions:
    """Multi-start block ascent over orthonormal k-frames."""

    restarts: int = 64
    rel_tol: float = 1e-10
    max_sweeps: int = 500
    seed: int = 0


def comass_is_euclidean(n: int, k: int) -> bool:
    """Orders for which every k-covector is simple."""
    return k in (0, 1, n - 1, n)


@lru_cache(maxsize=None)
def _antisym_scatter(n: int, k: int):
    flat, src, sign = [], [], []
    strides = [n ** (k - 1 - a) for a in range(k)]
    for c, I in enumerate(multi_indices(n, k)):
        for perm in itertools.permutations(range(k)):
            idx = [I[p] for p in perm]
            flat.append(sum(i * s for i, s in zip(idx, strides)))
            src.append(c)
            sign.append(_perm_sign(perm))
    return np.array(flat), np.array(src), np.array(sign, dtype=float)


def antisymmetric_tensor(coeffs: np.ndarray, n: int, k: int) -> np.ndarray:
    """Full alternating tensor (..., n, ..., n) of a batch of k-covector coefficients."""
    coeffs = np.asarray(coeffs, dtype=float)
    flat, src, sign = _antisym_scatter(n, k)
    out = np.zeros(coeffs.shape[:-1] + (n**k,))
    out[..., flat] = coeffs[..., src] * sign
    return out.reshape(coeffs.shape[:-1] + (n,) * k)


_LETTERS = "cdefghijklmnopq"


def _frame_value(tensor, frames, k, skip=None):
    """Contract the alternating tensor with frame columns (all, or all but ``skip``)."""
    axes = _LETTERS[:k]
    ops = [tensor]
    subs = ["b" + axes]
    for a in range(k):
        if a == skip:
            continue
        ops.append(frames[..., a])
        subs.append("br" + axes[a])
    out = "br" + (axes[skip] if skip is not None else "")
    return np.einsum(",".join(subs) + "->" + out, *ops, optimize=True)


def comass_batch(coeffs, n: int, k: int, opts: ComassOptions | None = None) -> np.ndarray:
    """Comass of a batch of k-covectors given as coefficient rows (B, C(n,k)).

    Exact (Euclidean) when every k-covector is simple; otherwise the best value of
    a multi-start block-coordinate ascent over orthonormal k-frames, which is a
    lower bound of the true comass.
    """
    opts = opts or ComassOptions()
    coeffs = np.atleast_2d(np.asarray(coeffs, dtype=float))
    euclid = np.sqrt(np.einsum("...c,...c->...", coeffs, coeffs))
    if comass_is_euclidean(n, k):
        return euclid
    B = coeffs.shape[0]
    rng = np.random.default_rng(opts.seed)
    tensor = antisymmetric_tensor(coeffs, n, k)

    R = max(int(opts.restarts), 1)
    frames = np.linalg.qr(rng.standard_normal((1, R, n, k)))[0]
    frames = np.repeat(frames, B, axis=0)
    # one restart sits on the dominant coordinate k-plane: certifies max|c_I|
    top = np.array(multi_indices(n, k))[np.argmax(np.abs(coeffs), axis=-1)]
    coord = np.zeros((B, n, k))
    coord[np.arange(B)[:, None], top, np.arange(k)[None, :]] = 1.0
    frames[:, 0] = coord

    value = np.abs(_frame_value(tensor, frames, k))
    active = np.arange(B)
    for _ in range(opts.max_sweeps):
        if active.size == 0:
            break
        t, f = tensor[active], frames[active]
        for j in range(k):
            g = _frame_value(t, f, k, skip=j)
            gn = np.linalg.norm(g, axis=-1, keepdims=True)
            f[..., j] = np.where(gn > 1e-300, g / np.where(gn > 0, gn, 1.0), f[..., j])
        q, r = np.linalg.qr(f)
        f = q * np.sign(np.diagonal(r, axis1=-2, axis2=-1))[..., None, :]
        new = np.abs(_frame_value(t, f, k))
        change = np.max(np.abs(new - value[active]) / np.maximum(new, 1e-300), axis=1)
        frames[active] = f
        value[active] = new
        active = active[change >= opts.rel_tol]

    best = np.minimum(value.max(axis=1), euclid)
    floor = euclid / sqrt(comb(n, k))
    if np.any(best < floor * (1 - 1e-12) - 1e-300):
        raise ComassError("comass optimizer fell below the Euclidean/sqrt(C(n,k)) floor")
    return best


def comass(omega: MultiCovector, opts: ComassOptions | None = None) -> float:
    """Comass norm: sup of |<omega, tau>| over unit simple k-vectors tau."""
    return float(comass_batch(omega.coeffs[None, :], omega.n, omega.k, opts)[0])
