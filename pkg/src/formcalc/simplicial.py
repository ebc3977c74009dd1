"""Oriented simplices, chains, bodies and the averaging currents they carry.

Integrals over a k-simplex use a conical-product Gauss-Jacobi rule on the unit
k-simplex, pushed to the simplex through barycentric coordinates. Weights are
normalized to sum to one, so a rule directly computes averages.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from math import factorial
from typing import Union

import numpy as np
from scipy.special import roots_jacobi

from .errors import DegenerateSimplexError, DimensionError, QuadratureError, SamplingError
from .exterior import minors

DEGENERACY_RTOL = 1e-12


@lru_cache(maxsize=None)
def simplex_rule(k: int, degree: int) -> tuple[np.ndarray, np.ndarray]:
    """Barycentric nodes (Q, k+1) and weights (Q,) exact for total degree ``degree``.

    Weights sum to one (the rule integrates averages over the simplex).
    """
    if k == 0:
        return np.ones((1, 1)), np.ones(1)
    m = max(1, (int(degree) + 2) // 2)
    axes = []
    for j in range(k):
        t, w = roots_jacobi(m, k - 1 - j, 0.0)  # weight (1-t)^(k-1-j)
        axes.append(((t + 1.0) / 2.0, w))
    grids = np.meshgrid(*[a[0] for a in axes], indexing="ij")
    wgrid = np.meshgrid(*[a[1] for a in axes], indexing="ij")
    u = np.stack([g.ravel() for g in grids], axis=1)
    w = np.prod(np.stack([g.ravel() for g in wgrid], axis=1), axis=1)
    # collapsed (Duffy) coordinates -> Cartesian coordinates of the unit k-simplex
    x = np.empty_like(u)
    rest = np.ones(u.shape[0])
    for j in range(k):
        x[:, j] = u[:, j] * rest
        rest = rest * (1.0 - u[:, j])
    bary = np.column_stack([1.0 - x.sum(axis=1), x])
    return bary, w / w.sum()


@dataclass(frozen=True)
class QuadratureRule:
    """Simplex quadrature of a declared polynomial exactness degree."""

    degree: int = 6

    def rule(self, k: int) -> tuple[np.ndarray, np.ndarray]:
        return simplex_rule(k, self.degree)


def gram_volume(vertices: np.ndarray) -> np.ndarray:
    """sqrt(det(V^T V)) / k! for vertex arrays of shape (..., k+1, n).

    Evaluated as |prod diag(R)| from a QR factorization of the edge matrix,
    which avoids squaring its condition number.
    """
    vertices = np.asarray(vertices, dtype=float)
    k = vertices.shape[-2] - 1
    if k == 0:
        return np.ones(vertices.shape[:-2])
    edges = np.swapaxes(vertices[..., 1:, :] - vertices[..., :1, :], -1, -2)  # (..., n, k)
    r = np.linalg.qr(edges, mode="r")
    return np.abs(np.prod(np.diagonal(r, axis1=-2, axis2=-1), axis=-1)) / factorial(k)


def degenerate_mask(vertices: np.ndarray) -> np.ndarray:
    """True where sqrt(det(V^T V)) < 1e-12 * (max edge length)^k."""
    vertices = np.asarray(vertices, dtype=float)
    k = vertices.shape[-2] - 1
    if k == 0:
        return np.zeros(vertices.shape[:-2], dtype=bool)
    diff = vertices[..., :, None, :] - vertices[..., None, :, :]
    longest = np.sqrt((diff**2).sum(axis=-1)).max(axis=(-1, -2))
    vol = gram_volume(vertices) * factorial(k)
    return ~(vol >= DEGENERACY_RTOL * longest**k) | (longest == 0)


def unit_orientation(vertices: np.ndarray) -> np.ndarray:
    """Unit simple k-vector of the edge frame, coefficient rows (..., C(n,k))."""
    vertices = np.asarray(vertices, dtype=float)
    k = vertices.shape[-2] - 1
    edges = np.swapaxes(vertices[..., 1:, :] - vertices[..., :1, :], -1, -2)
    tau = minors(edges, k)
    return tau / np.linalg.norm(tau, axis=-1, keepdims=True)


@dataclass(frozen=True)
class OrientedSimplex:
    """A k-simplex in R^n with orientation given by its edge frame times ``sign``."""

    vertices: np.ndarray
    sign: int = 1

    def __post_init__(self):
        verts = np.atleast_2d(np.asarray(self.vertices, dtype=float))
        if verts.shape[0] - 1 > verts.shape[1]:
            raise DimensionError(f"{verts.shape[0]} vertices cannot span a simplex in R^{verts.shape[1]}")
        if self.sign not in (1, -1):
            raise ValueError("sign must be +1 or -1")
        if degenerate_mask(verts):
            raise DegenerateSimplexError(f"degenerate {verts.shape[0] - 1}-simplex")
        verts.setflags(write=False)
        object.__setattr__(self, "vertices", verts)

    @property
    def n(self) -> int:
        return self.vertices.shape[1]

    @property
    def k(self) -> int:
        return self.vertices.shape[0] - 1

    @property
    def measure(self) -> float:
        return hausdorff_measure(self)

    @property
    def orientation(self) -> np.ndarray:
        """Signed unit simple k-vector coefficients."""
        if self.k == 0:
            return np.array([float(self.sign)])
        return self.sign * unit_orientation(self.vertices)

    def __neg__(self) -> OrientedSimplex:
        return OrientedSimplex(self.vertices, -self.sign)

    def to_json(self) -> dict:
        return {"vertices": self.vertices.tolist(), "sign": int(self.sign)}

    @classmethod
    def from_json(cls, data: dict) -> OrientedSimplex:
        return cls(np.asarray(data["vertices"], dtype=float), int(data.get("sign", 1)))


@dataclass(frozen=True)
class Chain:
    """Finite formal sum of oriented k-simplices with real multiplicities."""

    terms: tuple[tuple[OrientedSimplex, float], ...]

    def __post_init__(self):
        terms = tuple((s, float(m)) for s, m in self.terms)
        if not terms:
            raise ValueError("empty chain")
        n, k = terms[0][0].n, terms[0][0].k
        if any(s.n != n or s.k != k for s, _ in terms):
            raise DimensionError("chain terms must share n and k")
        object.__setattr__(self, "terms", terms)

    @property
    def n(self) -> int:
        return self.terms[0][0].n

    @property
    def k(self) -> int:
        return self.terms[0][0].k

    @property
    def mass(self) -> float:
        """Total unsigned measure sum |m_i| H^k(S_i)."""
        return float(sum(abs(m) * s.measure for s, m in self.terms))

    def to_json(self) -> dict:
        return {"terms": [{"simplex": s.to_json(), "m": m} for s, m in self.terms]}

    @classmethod
    def from_json(cls, data: dict) -> Chain:
        return cls(tuple((OrientedSimplex.from_json(t["simplex"]), float(t["m"])) for t in data["terms"]))


Support = Union[OrientedSimplex, Chain]


def hausdorff_measure(S: OrientedSimplex) -> float:
    """k-dimensional measure sqrt(det(V^T V)) / k! of a simplex (1 for a point)."""
    verts = S.vertices if isinstance(S, OrientedSimplex) else np.asarray(S, dtype=float)
    if degenerate_mask(verts):
        raise DegenerateSimplexError("degenerate simplex has no positive measure")
    return float(gram_volume(verts))


def support_from_json(data: dict) -> Support:
    if "terms" in data:
        return Chain.from_json(data)
    return OrientedSimplex.from_json(data)


# --------------------------------------------------------------------------- bodies


@dataclass(frozen=True)
class Body:
    """Compact convex body E: a full-dimensional simplex, an axis box or a polytope."""

    kind: str
    data: np.ndarray
    upper: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        data = np.atleast_2d(np.asarray(self.data, dtype=float))
        object.__setattr__(self, "data", data)
        if self.kind == "simplex":
            if data.shape[0] != data.shape[1] + 1 or degenerate_mask(data):
                raise DimensionError("body simplex needs n+1 affinely independent vertices")
            aug = np.vstack([data.T, np.ones(data.shape[0])])
            object.__setattr__(self, "_bary", np.linalg.inv(aug))
        elif self.kind == "box":
            lo = data.reshape(-1)
            hi = np.asarray(self.upper, dtype=float).reshape(-1)
            if lo.shape != hi.shape or np.any(hi <= lo):
                raise DimensionError("box needs lower < upper componentwise")
            object.__setattr__(self, "data", lo[None, :])
            object.__setattr__(self, "upper", hi)
        elif self.kind == "polytope":
            from scipy.spatial import ConvexHull

            hull = ConvexHull(data)
            object.__setattr__(self, "_hull_eq", hull.equations)
            object.__setattr__(self, "data", data[hull.vertices])
        else:
            raise ValueError(f"unknown body kind {self.kind!r}")

    @classmethod
    def reference_simplex(cls, n: int) -> Body:
        return cls("simplex", np.vstack([np.zeros(n), np.eye(n)]))

    @classmethod
    def simplex(cls, vertices) -> Body:
        return cls("simplex", vertices)

    @classmethod
    def box(cls, lower, upper) -> Body:
        return cls("box", np.asarray(lower, dtype=float), np.asarray(upper, dtype=float))

    @classmethod
    def polytope(cls, vertices) -> Body:
        return cls("polytope", vertices)

    @property
    def n(self) -> int:
        return self.data.shape[1]

    @property
    def vertices(self) -> np.ndarray:
        """Extreme points (box corners for boxes)."""
        if self.kind == "box":
            lo, hi = self.data[0], self.upper
            corners = np.array(np.meshgrid(*zip(lo, hi), indexing="ij")).reshape(self.n, -1).T
            return corners
        return self.data

    @property
    def diameter(self) -> float:
        v = self.vertices
        return float(np.sqrt(((v[:, None] - v[None]) ** 2).sum(-1)).max())

    def barycentric(self, points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        aug = np.concatenate([pts, np.ones(pts.shape[:-1] + (1,))], axis=-1)
        return aug @ self._bary.T

    def contains(self, points, tol: float = 1e-12) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        if self.kind == "simplex":
            return np.all(self.barycentric(pts) >= -tol, axis=-1)
        if self.kind == "box":
            return np.all((pts >= self.data[0] - tol) & (pts <= self.upper + tol), axis=-1)
        eq = self._hull_eq
        return np.all(pts @ eq[:, :-1].T + eq[:, -1] <= tol, axis=-1)

    def clip(self, points) -> np.ndarray:
        """Map points into E (identity on E)."""
        pts = np.array(points, dtype=float)
        if self.kind == "simplex":
            lam = np.clip(self.barycentric(pts), 0.0, None)
            lam /= lam.sum(axis=-1, keepdims=True)
            return lam @ self.data
        if self.kind == "box":
            return np.clip(pts, self.data[0], self.upper)
        # radial retraction toward the centroid
        center = self.data.mean(axis=0)
        eq = self._hull_eq
        d = pts - center
        slack = -(center @ eq[:, :-1].T + eq[:, -1])  # > 0
        rate = d @ eq[:, :-1].T
        with np.errstate(divide="ignore", invalid="ignore"):
            t = np.where(rate > 0, slack / rate, np.inf).min(axis=-1)
        t = np.clip(t, 0.0, 1.0)[..., None]
        return center + t * d

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        """Uniform points in E, shape ``size + (n,)``."""
        shape = (size,) if np.isscalar(size) else tuple(size)
        count = int(np.prod(shape))
        if self.kind == "simplex":
            lam = rng.dirichlet(np.ones(self.n + 1), size=count)
            return (lam @ self.data).reshape(shape + (self.n,))
        if self.kind == "box":
            u = rng.random((count, self.n))
            return (self.data[0] + u * (self.upper - self.data[0])).reshape(shape + (self.n,))
        lo, hi = self.data.min(axis=0), self.data.max(axis=0)
        out = np.empty((0, self.n))
        for _ in range(1000):
            cand = lo + rng.random((max(2 * count, 16), self.n)) * (hi - lo)
            out = np.vstack([out, cand[self.contains(cand)]])
            if out.shape[0] >= count:
                return out[:count].reshape(shape + (self.n,))
        raise SamplingError("polytope rejection sampling failed")

    def to_json(self) -> dict:
        if self.kind == "box":
            return {"kind": "box", "lower": self.data[0].tolist(), "upper": self.upper.tolist()}
        return {"kind": self.kind, "vertices": self.data.tolist()}

    @classmethod
    def from_json(cls, data: dict) -> Body:
        if data["kind"] == "box":
            return cls.box(data["lower"], data["upper"])
        return cls(data["kind"], np.asarray(data["vertices"], dtype=float))


# --------------------------------------------------------------------------- integration


def _check_order(form, k: int):
    if form.k != k:
        raise DimensionError(f"form of order {form.k} integrated over a {k}-simplex")


def _check_exact(form, quad: QuadratureRule, exact: bool):
    if exact and (form.degree is None or form.degree > quad.degree):
        raise QuadratureError(
            f"rule of degree {quad.degree} cannot integrate form of degree {form.degree} exactly"
        )


def simplex_averages(values_fn, vertices: np.ndarray, signs, quad: QuadratureRule) -> np.ndarray:
    """Signed averages T_S(v) for a batch of simplices.

    ``values_fn(points)`` maps (P, n) points to (P, ..., C) covector coefficients;
    ``vertices`` has shape (B, k+1, n). Returns shape (B, ...).
    """
    vertices = np.asarray(vertices, dtype=float)
    B, kp1, n = vertices.shape
    k = kp1 - 1
    signs = np.broadcast_to(np.asarray(signs, dtype=float), (B,))
    bary, w = quad.rule(k)
    pts = np.einsum("qa,ban->bqn", bary, vertices).reshape(-1, n)
    vals = values_fn(pts)
    vals = vals.reshape((B, bary.shape[0]) + vals.shape[1:])
    if k == 0:
        tau = np.ones((B, 1))
    else:
        tau = unit_orientation(vertices)
    avg = np.einsum("q,bq...c,bc->b...", w, vals, tau)
    return avg * signs.reshape((B,) + (1,) * (avg.ndim - 1))


def integrate(form, S: OrientedSimplex, quad: QuadratureRule | None = None, exact: bool = False) -> float:
    """Integral of a k-form over an oriented k-simplex."""
    quad = quad or QuadratureRule()
    _check_order(form, S.k)
    _check_exact(form, quad, exact)
    avg = simplex_averages(form.values, S.vertices[None], [S.sign], quad)[0]
    return float(avg * S.measure)


@dataclass(frozen=True)
class AveragingCurrent:
    """Integration over a simplex or chain divided by its (unsigned) measure."""

    support: Support
    measure: float = field(init=False)

    def __post_init__(self):
        sup = self.support
        m = sup.mass if isinstance(sup, Chain) else hausdorff_measure(sup)
        if not m > 0:
            raise DegenerateSimplexError("averaging current needs positive measure")
        object.__setattr__(self, "measure", float(m))

    @property
    def n(self) -> int:
        return self.support.n

    @property
    def k(self) -> int:
        return self.support.k

    @property
    def simplices(self) -> list[tuple[OrientedSimplex, float]]:
        if isinstance(self.support, Chain):
            return list(self.support.terms)
        return [(self.support, 1.0)]

    @property
    def points(self) -> np.ndarray:
        """All support vertices stacked (for containment checks)."""
        return np.vstack([s.vertices for s, _ in self.simplices])

    def values(self, values_fn, quad: QuadratureRule) -> np.ndarray:
        """T applied to every field returned by ``values_fn`` (shape of its middle axes)."""
        terms = self.simplices
        verts = np.stack([s.vertices for s, _ in terms])
        signs = np.array([s.sign for s, _ in terms], dtype=float)
        avgs = simplex_averages(values_fn, verts, signs, quad)
        weights = np.array([m * s.measure for s, m in terms]) / self.measure
        return np.tensordot(weights, avgs, axes=(0, 0))

    def to_json(self) -> dict:
        return self.support.to_json()

    @classmethod
    def from_json(cls, data: dict) -> AveragingCurrent:
        return cls(support_from_json(data))


def apply_current(T: AveragingCurrent, form, quad: QuadratureRule | None = None, exact: bool = False) -> float:
    """T(omega) for an averaging current: integral over the support / its measure."""
    quad = quad or QuadratureRule()
    _check_order(form, T.k)
    _check_exact(form, quad, exact)
    return float(T.values(form.values, quad))


# --------------------------------------------------------------------------- sampling


@dataclass(frozen=True)
class SamplingOptions:
    """How random supports are drawn inside a body."""

    shrink_prob: float = 0.5
    min_shrink: float = 1e-3
    chain_length: int = 1
    max_attempts: int = 1000


def sample_simplex_vertices(E: Body, k: int, rng: np.random.Generator, count: int,
                            opts: SamplingOptions | None = None) -> np.ndarray:
    """``count`` non-degenerate random k-simplices in E, shape (count, k+1, n).

    Vertices are uniform in E; with probability ``shrink_prob`` a simplex is
    shrunk toward its centroid by a log-uniform factor so small supports are
    represented. Convexity of E keeps every simplex inside.
    """
    opts = opts or SamplingOptions()
    if not 0 <= k <= E.n:
        raise DimensionError(f"k={k} exceeds n={E.n}")
    out = np.empty((0, k + 1, E.n))
    for _ in range(opts.max_attempts):
        need = count - out.shape[0]
        if need <= 0:
            break
        verts = E.sample(rng, (need, k + 1))
        shrink = np.where(
            rng.random(need) < opts.shrink_prob,
            10.0 ** rng.uniform(np.log10(opts.min_shrink), 0.0, need),
            1.0,
        )
        center = verts.mean(axis=1, keepdims=True)
        verts = center + shrink[:, None, None] * (verts - center)
        out = np.concatenate([out, verts[~degenerate_mask(verts)]])
    else:
        raise SamplingError("could not draw non-degenerate simplices")
    return out[:count]


def sample_averaging_current(E: Body, k: int, rng: np.random.Generator,
                             opts: SamplingOptions | None = None) -> AveragingCurrent:
    """A random averaging current on a simplex (or short chain) contained in E."""
    opts = opts or SamplingOptions()
    length = max(1, int(opts.chain_length))
    verts = sample_simplex_vertices(E, k, rng, length, opts)
    signs = rng.choice([-1, 1], size=length)
    simplices = [OrientedSimplex(v, int(s)) for v, s in zip(verts, signs)]
    if length == 1:
        return AveragingCurrent(simplices[0])
    mult = rng.uniform(-1.0, 1.0, size=length)
    mult[mult == 0] = 1.0
    return AveragingCurrent(Chain(tuple(zip(simplices, mult))))
