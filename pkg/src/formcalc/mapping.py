"""Transport of forms and currents along maps, and singular-value transfer bounds.

Pullback multiplies covector coefficients by the k-th compound of the Jacobian:
if ``c`` is a row of coefficients of omega(phi(x)), then ``c @ C_k(Dphi(x))``
are the coefficients of (phi^* omega)(x).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import DimensionError, MappingError
from .exterior import compound_matrix
from .fitting import CurrentConfig, FittedBasis, current_rows, orthonormalize
from .simplicial import AveragingCurrent, OrientedSimplex, QuadratureRule, hausdorff_measure
from .spaces import CallableForm, FormField, FormSpace

SINGULAR_RTOL = 1e-13


@dataclass(frozen=True, eq=False)
class MapSpec:
    """An affine map x -> A x + b, or a differentiable map with Jacobian and inverse."""

    kind: str
    A: np.ndarray | None = None
    b: np.ndarray | None = None
    forward: Callable[[np.ndarray], np.ndarray] | None = None
    jacobian_fn: Callable[[np.ndarray], np.ndarray] | None = None
    inverse_fn: Callable[[np.ndarray], np.ndarray] | None = None
    n_dim: int | None = None
    svd: tuple | None = field(default=None, init=False, repr=False)

    def __post_init__(self):
        if self.kind == "affine":
            A = np.atleast_2d(np.asarray(self.A, dtype=float))
            if A.shape[0] != A.shape[1]:
                raise DimensionError("affine map needs a square matrix")
            b = np.zeros(A.shape[0]) if self.b is None else np.asarray(self.b, dtype=float).reshape(-1)
            U, s, Vt = np.linalg.svd(A)
            if not s[-1] > SINGULAR_RTOL * s[0]:
                raise MappingError("affine map is not invertible")
            object.__setattr__(self, "A", A)
            object.__setattr__(self, "b", b)
            object.__setattr__(self, "svd", (U, s, Vt))
            object.__setattr__(self, "n_dim", A.shape[0])
        elif self.kind == "differentiable":
            if self.forward is None or self.jacobian_fn is None or self.inverse_fn is None:
                raise MappingError("differentiable map needs forward, jacobian and inverse")
            if self.n_dim is None:
                raise DimensionError("differentiable map needs n_dim")
        else:
            raise ValueError(f"unknown map kind {self.kind!r}")

    @classmethod
    def affine(cls, A, b=None) -> MapSpec:
        return cls("affine", A=A, b=b)

    @classmethod
    def identity(cls, n: int) -> MapSpec:
        return cls.affine(np.eye(n))

    @classmethod
    def differentiable(cls, n: int, forward, jacobian, inverse) -> MapSpec:
        return cls("differentiable", forward=forward, jacobian_fn=jacobian, inverse_fn=inverse, n_dim=n)

    @property
    def n(self) -> int:
        return int(self.n_dim)

    @property
    def is_affine(self) -> bool:
        return self.kind == "affine"

    @property
    def singular_values(self) -> np.ndarray:
        if not self.is_affine:
            raise MappingError("constant singular values only exist for affine maps")
        return self.svd[1]

    def __call__(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        if self.is_affine:
            return pts @ self.A.T + self.b
        return np.asarray(self.forward(pts), dtype=float)

    def jacobian(self, points) -> np.ndarray:
        """Jacobians at points (P, n) -> (P, n, n); singular ones raise."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if self.is_affine:
            return np.broadcast_to(self.A, (pts.shape[0],) + self.A.shape)
        J = np.asarray(self.jacobian_fn(pts), dtype=float).reshape(pts.shape[0], self.n, self.n)
        s = np.linalg.svd(J, compute_uv=False)
        if np.any(~(s[:, -1] > SINGULAR_RTOL * s[:, 0])):
            raise MappingError("singular Jacobian at an evaluation point")
        return J

    def inverse(self) -> MapSpec:
        if self.is_affine:
            Ainv = np.linalg.inv(self.A)
            return MapSpec.affine(Ainv, -Ainv @ self.b)

        def inv_jac(pts):
            return np.linalg.inv(self.jacobian(self.inverse_fn(pts)))

        return MapSpec.differentiable(self.n, self.inverse_fn, inv_jac, self.forward)

    def compose(self, inner: MapSpec) -> MapSpec:
        """self o inner."""
        if self.is_affine and inner.is_affine:
            return MapSpec.affine(self.A @ inner.A, self.A @ inner.b + self.b)
        outer = self
        return MapSpec.differentiable(
            self.n,
            lambda x: outer(inner(x)),
            lambda x: outer.jacobian(inner(x)) @ inner.jacobian(x),
            lambda y: inner.inverse()(outer.inverse()(y)),
        )

    def to_json(self) -> dict:
        if not self.is_affine:
            raise MappingError("only affine maps serialize")
        return {"A": self.A.tolist(), "b": self.b.tolist()}

    @classmethod
    def from_json(cls, data: dict) -> MapSpec:
        return cls.affine(np.asarray(data["A"], dtype=float), data.get("b"))


def pullback(phi: MapSpec, omega: FormField) -> FormField:
    """phi^* omega as a form on the source side of phi."""
    if phi.n != omega.n:
        raise DimensionError("map and form live in different dimensions")
    k = omega.k

    def values(points):
        comp = compound_matrix(phi.jacobian(points), k)  # (P, C, C)
        return np.einsum("pc,pcd->pd", omega.values(phi(points)), comp)

    return CallableForm(omega.n, k, values, degree=omega.degree if phi.is_affine else None)


def pushforward_simplex(phi: MapSpec, S: OrientedSimplex) -> OrientedSimplex:
    """Vertex-wise image of a simplex under an affine map (same sign)."""
    if not phi.is_affine:
        raise MappingError("curved images of simplices are not supported; use an affine map")
    return OrientedSimplex(phi(S.vertices), S.sign)


def pullback_space(phi: MapSpec, space: FormSpace) -> FormSpace:
    """Space whose members are phi^* v for v in ``space``."""
    return FormSpace(tuple(pullback(phi, v) for v in space.basis), f"{space.label}-pulled")


def _support_simplices(T: AveragingCurrent) -> OrientedSimplex:
    if not isinstance(T.support, OrientedSimplex):
        raise MappingError("only single-simplex supports are transported")
    return T.support


def renormalize(phi: MapSpec, cfg_ref: CurrentConfig) -> CurrentConfig:
    """Configuration on phi(E_ref) induced by ``cfg_ref``.

    Supports are mapped, weights rescaled by (H(S_i) / H(S_ref_i))^2 and the
    space realized as the pullback of the reference space through phi^{-1}.
    """
    currents, weights = [], []
    for T, w in zip(cfg_ref.currents, cfg_ref.weights):
        S_ref = _support_simplices(T)
        S = pushforward_simplex(phi, S_ref)
        currents.append(AveragingCurrent(S))
        weights.append(w * (hausdorff_measure(S) / hausdorff_measure(S_ref)) ** 2)
    space = pullback_space(phi.inverse(), cfg_ref.space)
    return CurrentConfig(tuple(currents), np.array(weights), space)


@dataclass(frozen=True)
class TransferFactors:
    """Singular-value factors controlling how the Lebesgue constant changes under a map."""

    upper: float
    lowerInv: float
    thm2factor: float
    condBound: float | None

    def to_json(self) -> dict:
        return {"upper": self.upper, "lowerInv": self.lowerInv,
                "thm2factor": self.thm2factor, "condBound": self.condBound}


def _sv_products(s: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    """(prod of the k largest, prod of inverses of the k smallest) along the last axis."""
    n = s.shape[-1]
    top = np.prod(s[..., :k], axis=-1)
    bottom_inv = np.prod(1.0 / s[..., n - k :], axis=-1)
    return top, bottom_inv


def transfer_factors(phi: MapSpec, k: int, probes: np.ndarray | None = None) -> TransferFactors:
    """Sup-norm singular-value factors; sampled at ``probes`` for non-affine maps."""
    n = phi.n
    if not 0 <= k <= n:
        raise DimensionError(f"k={k} outside 0..{n}")
    if phi.is_affine:
        s = phi.singular_values
        up, low = _sv_products(s, k)
        cond = s[0] / s[-1]
        return TransferFactors(float(up), float(low), float(up * low), float(min(cond**k, cond ** (n - k))))
    if probes is None:
        raise MappingError("differentiable maps need probe points")
    s = np.linalg.svd(phi.jacobian(probes), compute_uv=False)
    up, low = _sv_products(s, k)
    return TransferFactors(float(up.max()), float(low.max()), float(up.max() * low.max()), None)


def measure_sandwich_check(phi: MapSpec, S: OrientedSimplex) -> tuple[float, float, float]:
    """(prod of k smallest sigma * H(S), H(phi(S)), prod of k largest sigma * H(S))."""
    s = phi.singular_values
    k, n = S.k, S.n
    h = hausdorff_measure(S)
    actual = hausdorff_measure(pushforward_simplex(phi, S))
    return float(np.prod(s[n - k :]) * h), float(actual), float(np.prod(s[:k]) * h)


def theorem2_chain_check(phi: MapSpec, cfg_ref: CurrentConfig, T: AveragingCurrent,
                         quad: QuadratureRule | None = None, fb_ref: FittedBasis | None = None,
                         mapped: tuple[CurrentConfig, FittedBasis] | None = None) -> tuple[float, float]:
    """Both sides of the per-current transfer inequality for the Lebesgue function.

    lhs is the Lebesgue function of the mapped configuration (with its own
    orthonormal basis) at T; rhs is sup_i H(S_i)/H(S_ref_i) times H(S_ref)/H(S)
    times the reference Lebesgue function at the preimage of T.
    """
    q = cfg_ref.quad(quad)
    fb_ref = fb_ref or orthonormalize(cfg_ref, q)
    if mapped is None:
        cfg = renormalize(phi, cfg_ref)
        mapped = (cfg, orthonormalize(cfg, q))
    cfg, fb = mapped
    S = _support_simplices(T)
    S_ref = pushforward_simplex(phi.inverse(), S)
    T_ref = AveragingCurrent(S_ref)
    lhs = float(np.abs(fb.response @ current_rows(cfg.space, [T], q)[0]).sum())
    ref_val = float(np.abs(fb_ref.response @ current_rows(cfg_ref.space, [T_ref], q)[0]).sum())
    ratios = [hausdorff_measure(Ti.support) / hausdorff_measure(Tr.support)
              for Ti, Tr in zip(cfg.currents, cfg_ref.currents)]
    rhs = max(ratios) * (T_ref.measure / T.measure) * ref_val
    return lhs, float(rhs)
