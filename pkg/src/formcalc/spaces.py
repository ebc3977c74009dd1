"""Finite-dimensional spaces of differential k-forms with evaluable bases.

A form field returns covector coefficients in the lexicographic multi-index basis
of :mod:`formcalc.exterior`; evaluation is vectorized over points.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from math import comb, factorial
from typing import Callable

import numpy as np

from .errors import DimensionError
from .exterior import MultiCovector, multi_indices, wedge_coeffs
from .simplicial import AveragingCurrent, Body, OrientedSimplex, gram_volume


class FormField:
    """A continuous k-form on a subset of R^n.

    Subclasses implement ``values(points)`` mapping (P, n) points to (P, C(n,k))
    coefficients. ``degree`` is the total polynomial degree, or ``None`` when the
    field is not known to be polynomial.
    """

    n: int
    k: int
    degree: int | None = None

    def values(self, points: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def __call__(self, x) -> MultiCovector:
        return evaluate(self, x)


@dataclass(frozen=True, eq=False)
class PolyForm(FormField):
    """Polynomial form: sum over monomials x^e of x^e times a constant covector.

    ``exponents`` has shape (m, n) and ``coeffs`` shape (m, C(n,k)).
    """

    n: int
    k: int
    exponents: np.ndarray
    coeffs: np.ndarray

    def __post_init__(self):
        exps = np.atleast_2d(np.asarray(self.exponents, dtype=int)).reshape(-1, self.n)
        coeffs = np.asarray(self.coeffs, dtype=float).reshape(exps.shape[0], comb(self.n, self.k))
        if np.any(exps < 0):
            raise DimensionError("negative exponent")
        object.__setattr__(self, "exponents", exps)
        object.__setattr__(self, "coeffs", coeffs)

    @property
    def degree(self) -> int:
        live = np.any(self.coeffs != 0, axis=1)
        return int(self.exponents[live].sum(axis=1).max()) if live.any() else 0

    def values(self, points):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return monomials(pts, self.exponents) @ self.coeffs

    def __add__(self, other: PolyForm) -> PolyForm:
        return PolyForm(self.n, self.k, np.vstack([self.exponents, other.exponents]),
                        np.vstack([self.coeffs, other.coeffs]))

    def __mul__(self, scalar: float) -> PolyForm:
        return PolyForm(self.n, self.k, self.exponents, self.coeffs * float(scalar))

    __rmul__ = __mul__

    @classmethod
    def constant(cls, covector: MultiCovector) -> PolyForm:
        return cls(covector.n, covector.k, np.zeros((1, covector.n), dtype=int), covector.coeffs[None])


@dataclass(frozen=True, eq=False)
class CallableForm(FormField):
    """Form given by a vectorized evaluator ``fn((P, n)) -> (P, C(n,k))``."""

    n: int
    k: int
    fn: Callable[[np.ndarray], np.ndarray]
    degree: int | None = None

    def values(self, points):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return np.asarray(self.fn(pts), dtype=float).reshape(pts.shape[0], comb(self.n, self.k))


@dataclass(frozen=True, eq=False)
class CombinationForm(FormField):
    """Linear combination of the members of a space."""

    space: FormSpace
    coeffs: np.ndarray

    @property
    def n(self):
        return self.space.n

    @property
    def k(self):
        return self.space.k

    @property
    def degree(self):
        return self.space.degree

    def values(self, points):
        return np.einsum("pnc,n->pc", self.space.values(points), self.coeffs)


def monomials(points: np.ndarray, exponents: np.ndarray) -> np.ndarray:
    """Monomial values, shape (P, m)."""
    pts = np.atleast_2d(points)
    out = np.ones((pts.shape[0], exponents.shape[0]))
    for j in range(pts.shape[1]):
        e = exponents[:, j]
        if np.any(e):
            out *= pts[:, j : j + 1] ** e[None, :]
    return out


def evaluate(form: FormField, x) -> MultiCovector:
    """The covector ``form(x)`` at a single point."""
    x = np.asarray(x, dtype=float).reshape(1, form.n)
    return MultiCovector(form.n, form.k, form.values(x)[0])


@dataclass(frozen=True, eq=False)
class FormSpace:
    """Span of ``basis``; ``values`` returns (P, N, C) coefficient arrays."""

    basis: tuple[FormField, ...]
    label: str
    domain: Body | None = None
    faces: tuple[tuple[int, ...], ...] | None = None
    frame: BarycentricFrame | None = None
    _poly: tuple | None = field(default=None, init=False, repr=False)

    def __post_init__(self):
        basis = tuple(self.basis)
        if not basis:
            raise DimensionError("empty basis")
        n, k = basis[0].n, basis[0].k
        if any(b.n != n or b.k != k for b in basis):
            raise DimensionError("basis members must share n and k")
        object.__setattr__(self, "basis", basis)
        if all(isinstance(b, PolyForm) for b in basis):
            exps = np.vstack([b.exponents for b in basis])
            uniq, inv = np.unique(exps, axis=0, return_inverse=True)
            inv = np.asarray(inv).reshape(-1)
            tensor = np.zeros((uniq.shape[0], len(basis), comb(n, k)))
            row = 0
            for j, b in enumerate(basis):
                m = b.exponents.shape[0]
                np.add.at(tensor[:, j, :], inv[row : row + m], b.coeffs)
                row += m
            object.__setattr__(self, "_poly", (uniq, tensor))

    @property
    def n(self) -> int:
        return self.basis[0].n

    @property
    def k(self) -> int:
        return self.basis[0].k

    @property
    def dim(self) -> int:
        return len(self.basis)

    def __len__(self) -> int:
        return len(self.basis)

    @property
    def degree(self) -> int | None:
        degs = [b.degree for b in self.basis]
        return None if any(d is None for d in degs) else max(degs)

    def values(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if self._poly is not None:
            exps, tensor = self._poly
            return np.einsum("pm,mnc->pnc", monomials(pts, exps), tensor)
        return np.stack([b.values(pts) for b in self.basis], axis=1)

    def form(self, coeffs) -> FormField:
        """The member with the given coefficients over ``basis``."""
        coeffs = np.asarray(coeffs, dtype=float).reshape(self.dim)
        if self._poly is not None:
            exps, tensor = self._poly
            return PolyForm(self.n, self.k, exps, np.einsum("mnc,n->mc", tensor, coeffs))
        return CombinationForm(self, coeffs)


@dataclass(frozen=True, eq=False)
class BarycentricFrame:
    """Barycentric coordinates of an n-simplex as affine maps x -> L x + c."""

    vertices: np.ndarray

    def __post_init__(self):
        verts = np.asarray(self.vertices, dtype=float)
        if verts.ndim != 2 or verts.shape[0] != verts.shape[1] + 1:
            raise DimensionError("frame needs n+1 vertices in R^n")
        aug = np.vstack([verts.T, np.ones(verts.shape[0])])
        inv = np.linalg.inv(aug)
        object.__setattr__(self, "vertices", verts)
        object.__setattr__(self, "linear", inv[:, :-1])
        object.__setattr__(self, "offset", inv[:, -1])

    @classmethod
    def reference(cls, n: int) -> BarycentricFrame:
        return cls(np.vstack([np.zeros(n), np.eye(n)]))

    @property
    def n(self) -> int:
        return self.vertices.shape[1]

    @property
    def body(self) -> Body:
        return Body.simplex(self.vertices)

    def lam(self, points) -> np.ndarray:
        """Barycentric coordinates, shape (P, n+1)."""
        return np.atleast_2d(points) @ self.linear.T + self.offset

    def dlam(self) -> np.ndarray:
        """Gradients of the barycentric coordinates as 1-covectors, shape (n+1, n)."""
        return self.linear.copy()

    def faces(self, k: int) -> tuple[tuple[int, ...], ...]:
        return tuple(itertools.combinations(range(self.n + 1), k + 1))

    def face_simplex(self, face) -> OrientedSimplex:
        return OrientedSimplex(self.vertices[list(face)], 1)


def _wedge_all(n: int, covectors: list[np.ndarray]) -> np.ndarray:
    out = np.ones(1)
    for j, c in enumerate(covectors):
        out = wedge_coeffs(n, j, 1, out, c)
    return out


def whitney_basis(frame: BarycentricFrame, k: int, normalize: bool = True) -> FormSpace:
    """Lowest-degree Whitney k-forms, one per k-face in lexicographic order.

    With ``normalize=False`` the raw forms sum_i (-1)^i lam_a(i) dlam_a(0)^..^dlam_a(k)
    (omitting index i) are returned; these integrate to 1/k! over their own face.
    With ``normalize=True`` each is scaled by k! times its face measure, so the
    averaging current of face b returns 1 on form b and 0 on the others.
    """
    n = frame.n
    if not 0 <= k <= n:
        raise DimensionError(f"no Whitney {k}-forms in R^{n}")
    dl = frame.dlam()
    exps = np.vstack([np.zeros((1, n), dtype=int), np.eye(n, dtype=int)])
    basis = []
    for face in frame.faces(k):
        coeffs = np.zeros((n + 1, comb(n, k)))
        for i, a in enumerate(face):
            rest = _wedge_all(n, [dl[b] for j, b in enumerate(face) if j != i])
            sgn = (-1) ** i
            coeffs[0] += sgn * frame.offset[a] * rest
            coeffs[1:] += sgn * np.outer(frame.linear[a], rest)
        if normalize:
            coeffs *= factorial(k) * float(gram_volume(frame.vertices[list(face)]))
        basis.append(PolyForm(n, k, exps, coeffs))
    label = f"whitney-{k}" if normalize else f"whitney-{k}-raw"
    return FormSpace(tuple(basis), label, domain=frame.body, faces=frame.faces(k), frame=frame)


def face_currents(frame: BarycentricFrame, k: int) -> list[AveragingCurrent]:
    """Averaging currents on the k-faces, oriented by increasing vertex order."""
    return [AveragingCurrent(frame.face_simplex(f)) for f in frame.faces(k)]


def graded_exponents(n: int, r: int) -> np.ndarray:
    """Exponent vectors of all monomials of degree <= r, graded then lexicographic."""
    rows = []
    for d in range(r + 1):
        for combo in itertools.combinations_with_replacement(range(n), d):
            e = np.zeros(n, dtype=int)
            for j in combo:
                e[j] += 1
            rows.append(e)
    return np.array(rows, dtype=int).reshape(-1, n)


def polynomial_basis(n: int, k: int, r: int, domain: Body | None = None) -> FormSpace:
    """All k-forms with polynomial coefficients of degree <= r.

    Ordered by covector multi-index first, then by monomial, e.g. for n=2, k=1,
    r=1: dx, x dx, y dx, dy, x dy, y dy.
    """
    if r < 0:
        raise DimensionError("degree must be non-negative")
    multi_indices(n, k)  # validates n, k
    exps = graded_exponents(n, r)
    C = comb(n, k)
    basis = []
    for c in range(C):
        for e in exps:
            coeffs = np.zeros((1, C))
            coeffs[0, c] = 1.0
            basis.append(PolyForm(n, k, e[None], coeffs))
    return FormSpace(tuple(basis), f"poly-{r}", domain=domain)


def random_polyform(n: int, k: int, r: int, rng: np.random.Generator, scale: float = 1.0) -> PolyForm:
    """Polynomial k-form of degree <= r with standard normal coefficients."""
    exps = graded_exponents(n, r)
    return PolyForm(n, k, exps, scale * rng.standard_normal((exps.shape[0], comb(n, k))))
