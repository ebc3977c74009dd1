"""Generalized Vandermonde systems, weighted discrete least squares and interpolation.

Coefficient vectors always refer to the basis of ``cfg.space``. The orthonormal
basis is stored as a matrix ``H`` whose column h holds the coefficients of eta_h,
so the reproducing kernel in coefficient space is ``H @ H.T`` (= G^-1).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate as spi
from scipy import optimize

from .errors import DimensionError, NotDetermining, NotUnisolvent
from .simplicial import (
    AveragingCurrent,
    Body,
    OrientedSimplex,
    QuadratureRule,
    simplex_averages,
)
from .spaces import FormField, FormSpace, random_polyform

PD_RTOL = 1e-12


@dataclass(frozen=True, eq=False)
class CurrentConfig:
    """M averaging currents with positive weights acting on an N-dimensional space."""

    currents: tuple[AveragingCurrent, ...]
    weights: np.ndarray
    space: FormSpace

    def __post_init__(self):
        currents = tuple(self.currents)
        w = np.asarray(self.weights, dtype=float).reshape(-1)
        if len(currents) != w.size:
            raise DimensionError(f"{len(currents)} currents but {w.size} weights")
        if np.any(~(w > 0)):
            raise ValueError("weights must be strictly positive")
        if any(T.n != self.space.n or T.k != self.space.k for T in currents):
            raise DimensionError("currents and space disagree on n or k")
        object.__setattr__(self, "currents", currents)
        object.__setattr__(self, "weights", w)

    @classmethod
    def unit(cls, currents, space: FormSpace) -> CurrentConfig:
        return cls(tuple(currents), np.ones(len(currents)), space)

    @property
    def M(self) -> int:
        return len(self.currents)

    @property
    def N(self) -> int:
        return self.space.dim

    def quad(self, quad: QuadratureRule | None = None) -> QuadratureRule:
        """Given rule, or the default one raised to the space degree if needed."""
        if quad is not None:
            return quad
        deg = self.space.degree
        return QuadratureRule(max(6, deg or 0))


@dataclass(frozen=True, eq=False)
class FittedBasis:
    """Orthonormal basis of the space under the discrete scalar product.

    ``factors`` holds the thin SVD (U, s, Z) of diag(sqrt(w)) V; the kernel,
    response and projections are evaluated through it so that rounding grows
    with cond(V) rather than cond(G) = cond(V)^2.
    """

    ortho: np.ndarray  # (N, N), column h = eta_h
    gram: np.ndarray
    vandermonde: np.ndarray
    weights: np.ndarray
    factors: tuple | None = None

    def svd_factors(self):
        if self.factors is not None:
            return self.factors
        return _weighted_svd(self.vandermonde, self.weights)

    @property
    def kernel_matrix(self) -> np.ndarray:
        _, s, Z = self.svd_factors()
        return (Z / s**2) @ Z.T

    @property
    def response(self) -> np.ndarray:
        """Matrix R with (R t)_i = w_i sum_h T_i(eta_h) T(eta_h) for T-rows t."""
        U, s, Z = self.svd_factors()
        return np.sqrt(self.weights)[:, None] * ((U / s) @ Z.T)


@dataclass(frozen=True, eq=False)
class KernelRep:
    """K(x, y) = sum_h eta_h(x) (x) eta_h(y) as a symmetric matrix over the basis."""

    matrix: np.ndarray


def current_rows(space: FormSpace, currents, quad: QuadratureRule) -> np.ndarray:
    """Matrix of T_i(v_j); single-simplex currents are evaluated in one batch."""
    currents = list(currents)
    out = np.empty((len(currents), space.dim))
    simple = [i for i, T in enumerate(currents) if isinstance(T.support, OrientedSimplex)]
    if simple:
        verts = np.stack([currents[i].support.vertices for i in simple])
        signs = [currents[i].support.sign for i in simple]
        out[simple] = simplex_averages(space.values, verts, signs, quad)
    for i, T in enumerate(currents):
        if not isinstance(T.support, OrientedSimplex):
            out[i] = T.values(space.values, quad)
    return out


def simplex_rows(space: FormSpace, vertices: np.ndarray, quad: QuadratureRule, signs=1.0) -> np.ndarray:
    """Rows T(v_j) for a batch of averaging currents on simplices (B, k+1, n)."""
    return simplex_averages(space.values, vertices, signs, quad)


def form_rows(form: FormField, currents, quad: QuadratureRule) -> np.ndarray:
    """The data vector (T_i(form))_i."""
    return np.array([T.values(form.values, quad) for T in currents], dtype=float).reshape(-1)


def vandermonde(cfg: CurrentConfig, quad: QuadratureRule | None = None) -> np.ndarray:
    """Generalized Vandermonde matrix V[i, j] = T_i(v_j), shape (M, N)."""
    return current_rows(cfg.space, cfg.currents, cfg.quad(quad))


def gram(cfg: CurrentConfig, V: np.ndarray | None = None, quad: QuadratureRule | None = None) -> np.ndarray:
    """G = V^T W V."""
    V = vandermonde(cfg, quad) if V is None else V
    G = V.T @ (cfg.weights[:, None] * V)
    return 0.5 * (G + G.T)


def orthonormal_from_gram(G: np.ndarray) -> np.ndarray:
    """Symmetric inverse square root of a positive definite Gram matrix."""
    lam, U = np.linalg.eigh(G)
    if not lam[0] > PD_RTOL * max(lam[-1], 0.0):
        raise NotDetermining(f"Gram matrix not positive definite (eigenvalues {lam[0]:.3e}..{lam[-1]:.3e})")
    return (U / np.sqrt(lam)) @ U.T


def _weighted_svd(V: np.ndarray, weights: np.ndarray):
    """Thin SVD of diag(sqrt(w)) V as (U, s, Z) with Z holding right singular vectors as columns."""
    U, s, Zt = np.linalg.svd(np.sqrt(weights)[:, None] * V, full_matrices=False)
    # same relative threshold as on the eigenvalues of G = V^T W V
    if V.shape[0] < V.shape[1] or not s[-1] ** 2 > PD_RTOL * s[0] ** 2:
        lo = s[-1] ** 2 if V.shape[0] >= V.shape[1] else 0.0
        raise NotDetermining(f"Gram matrix not positive definite (eigenvalues {lo:.3e}..{s[0] ** 2:.3e})")
    return U, s, Zt.T


def orthonormalize(cfg: CurrentConfig, quad: QuadratureRule | None = None) -> FittedBasis:
    """eta = basis . G^{-1/2}; raises NotDetermining if G is not positive definite."""
    V = vandermonde(cfg, quad)
    U, s, Z = _weighted_svd(V, cfg.weights)
    return FittedBasis((Z / s) @ Z.T, gram(cfg, V), V, cfg.weights, (U, s, Z))


def kernel(fb: FittedBasis) -> KernelRep:
    return KernelRep(fb.kernel_matrix)


def project_data(fb: FittedBasis, data: np.ndarray) -> np.ndarray:
    """Least-squares coefficients from the data vector (T_i(omega))_i."""
    U, s, Z = fb.svd_factors()
    return Z @ ((U.T @ (np.sqrt(fb.weights) * np.asarray(data, dtype=float))) / s)


def project(cfg: CurrentConfig, fb: FittedBasis, omega: FormField, quad: QuadratureRule | None = None) -> np.ndarray:
    """Coefficients of the weighted discrete least-squares projection of ``omega``."""
    return project_data(fb, form_rows(omega, cfg.currents, cfg.quad(quad)))


def _square_vandermonde(cfg: CurrentConfig, quad, V=None) -> np.ndarray:
    if cfg.M != cfg.N:
        raise NotUnisolvent(f"interpolation needs M = N (got M={cfg.M}, N={cfg.N})")
    V = vandermonde(cfg, quad) if V is None else V
    s = np.linalg.svd(V, compute_uv=False)
    if not s[-1] > PD_RTOL * s[0]:
        raise NotUnisolvent("generalized Vandermonde matrix is singular")
    return V


def interpolate(cfg: CurrentConfig, omega: FormField, quad: QuadratureRule | None = None) -> np.ndarray:
    """Coefficients c with T_i(sum c_j v_j) = T_i(omega) for all i."""
    V = _square_vandermonde(cfg, quad)
    return np.linalg.solve(V, form_rows(omega, cfg.currents, cfg.quad(quad)))


def lagrange_basis(cfg: CurrentConfig, quad: QuadratureRule | None = None, V=None) -> np.ndarray:
    """Inverse Vandermonde; column i is the cardinal form dual to T_i."""
    return np.linalg.inv(_square_vandermonde(cfg, quad, V))


def riesz_representer(fb: FittedBasis, T: AveragingCurrent, space: FormSpace,
                      quad: QuadratureRule | None = None) -> np.ndarray:
    """Coefficients of K_T = sum_h T(eta_h) eta_h."""
    quad = quad or QuadratureRule(max(6, space.degree or 0))
    t = current_rows(space, [T], quad)[0]
    return fb.kernel_matrix @ t


def scalar_product(cfg: CurrentConfig, a: FormField, b: FormField, quad: QuadratureRule | None = None) -> float:
    """(a, b) = sum_i w_i T_i(a) T_i(b)."""
    q = cfg.quad(quad)
    return float(np.sum(cfg.weights * form_rows(a, cfg.currents, q) * form_rows(b, cfg.currents, q)))


# --------------------------------------------------------------------------- bump forms


def mollifier(s: np.ndarray) -> np.ndarray:
    """exp(1 - 1/(1 - s^2)) on |s| < 1, zero outside; equals 1 at 0."""
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    inside = np.abs(s) < 1
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - s[inside] ** 2))
    return out


def smooth_step(t: np.ndarray) -> np.ndarray:
    """C-infinity step: 0 for t <= 1, 1 for t >= 2."""
    t = np.asarray(t, dtype=float)

    def f(u):
        return np.where(u > 0, np.exp(-1.0 / np.where(u > 0, u, 1.0)), 0.0)

    a, b = f(t - 1.0), f(2.0 - t)
    return a / (a + b)


def core_average(k: int, delta: float) -> float:
    """Mean over a k-simplex of smooth_step(min barycentric / delta).

    Uses P(min barycentric >= t) = (1 - (k+1) t)^k for the uniform distribution.
    """
    if k == 0:
        return 1.0
    if not 2 * delta <= 1.0 / (k + 1):
        raise ValueError("delta too large for the simplex dimension")

    def density(t):
        return k * (k + 1) * (1 - (k + 1) * t) ** (k - 1)

    tail = (1 - (k + 1) * 2 * delta) ** k
    ramp, _ = spi.quad(lambda t: float(smooth_step(t / delta)) * density(t), delta, 2 * delta,
                       epsabs=1e-14, epsrel=1e-13)
    return tail + ramp


def _core_to_simplex_distance(core_verts: np.ndarray, delta: float, other: np.ndarray) -> float:
    """Distance between {barycentrics >= delta} of one simplex and another simplex."""
    a, b = core_verts.shape[0], other.shape[0]
    if a == 1:
        lo = 1.0
    else:
        lo = delta

    lower = np.r_[np.full(a, lo), np.zeros(b)]

    def split(z):
        z = np.clip(z, lower, 1.0)  # SLSQP may step slightly outside the bounds
        return z[:a] @ core_verts - z[a:] @ other

    def obj(z):
        d = split(z)
        return d @ d

    def grad(z):
        d = split(z)
        return np.concatenate([2 * core_verts @ d, -2 * other @ d])

    cons = [
        {"type": "eq", "fun": lambda z: z[:a].sum() - 1, "jac": lambda z: np.r_[np.ones(a), np.zeros(b)]},
        {"type": "eq", "fun": lambda z: z[a:].sum() - 1, "jac": lambda z: np.r_[np.zeros(a), np.ones(b)]},
    ]
    bounds = [(lo, 1.0)] * a + [(0.0, 1.0)] * b
    best = np.inf
    for start in (np.r_[np.full(a, 1 / a), np.full(b, 1 / b)],):
        with warnings.catch_warnings():
            warnings.filterwarnings("ignore", "Values in x were outside bounds", RuntimeWarning)
            res = optimize.minimize(obj, start, jac=grad, bounds=bounds, constraints=cons, method="SLSQP",
                                    options={"ftol": 1e-16, "maxiter": 500})
        best = min(best, float(np.sqrt(max(res.fun, 0.0))))
    return best


@dataclass(frozen=True, eq=False)
class BumpForm(FormField):
    """Sum of s_i phi_i(x) tau_i^* divided by max(1, sum phi_i).

    phi_i is a mollifier in the distance to the affine hull of S_i times a smooth
    cutoff in the minimum barycentric coordinate of the projected point, so it
    lives in a tube of radius ``radius`` over the core of S_i. Pointwise comass
    never exceeds 1, and on S_i it equals s_i tau_i^* times the cutoff.
    """

    n: int
    k: int
    simplices: tuple[OrientedSimplex, ...]
    signs: np.ndarray
    radius: float
    delta: float

    def __post_init__(self):
        origins, bases, pinvs, covs = [], [], [], []
        for S in self.simplices:
            v0 = S.vertices[0]
            E = (S.vertices[1:] - v0).T  # (n, k)
            origins.append(v0)
            bases.append(E)
            pinvs.append(np.linalg.pinv(E) if self.k else np.zeros((0, self.n)))
            covs.append(S.orientation)  # dual covector of the signed unit k-vector
        object.__setattr__(self, "_geom", (np.array(origins), bases, pinvs, np.array(covs)))

    degree = None

    def scalar_bumps(self, points: np.ndarray) -> np.ndarray:
        """phi_i(x), shape (P, M)."""
        pts = np.atleast_2d(points)
        origins, bases, pinvs, _ = self._geom
        out = np.empty((pts.shape[0], len(self.simplices)))
        for i in range(len(self.simplices)):
            rel = pts - origins[i]
            if self.k:
                coords = rel @ pinvs[i].T  # (P, k)
                foot = coords @ bases[i].T
                mu = np.column_stack([1 - coords.sum(axis=1), coords])
                cut = smooth_step(mu.min(axis=1) / self.delta)
            else:
                foot = np.zeros_like(rel)
                cut = 1.0
            dist = np.linalg.norm(rel - foot, axis=1)
            out[:, i] = mollifier(dist / self.radius) * cut
        return out

    def values(self, points):
        phi = self.scalar_bumps(points)
        _, _, _, covs = self._geom
        vals = (phi * self.signs) @ covs
        return vals / np.maximum(1.0, phi.sum(axis=1))[:, None]


@dataclass(frozen=True)
class OpNormOptions:
    """Trial-form settings for the operator-norm lower bound."""

    delta: float = 0.001  # in-support cutoff width; the bump bound loses O(k^2 delta)
    tube_fraction: float = 0.1
    candidates: int = 8
    random_trials: int = 8
    random_degree: int | None = None
    seed: int = 0


def bump_geometry(cfg: CurrentConfig, opts: OpNormOptions) -> tuple[float, np.ndarray] | None:
    """Tube radius and on-support averages a_i of the cutoff, or None if unusable.

    The radius is ``tube_fraction`` times the smallest distance from the core of
    one support to any other support; zero distance (overlap) disables bumps.
    """
    if any(not isinstance(T.support, OrientedSimplex) for T in cfg.currents):
        return None
    simplices = [T.support for T in cfg.currents]
    k = cfg.space.k
    lo = 1.0 if k == 0 else opts.delta
    gap = np.inf
    for i, Si in enumerate(simplices):
        for j, Sj in enumerate(simplices):
            if i != j:
                gap = min(gap, _core_to_simplex_distance(Si.vertices, lo, Sj.vertices))
    if not np.isfinite(gap):
        verts = np.vstack([S.vertices for S in simplices])
        gap = max(float(np.ptp(verts, axis=0).max()), 1.0)
    if gap <= 1e-12:
        return None
    a = np.full(len(simplices), core_average(k, opts.delta))
    return opts.tube_fraction * gap, a


def operator_norm_lower_bound(cfg: CurrentConfig, fb: FittedBasis, E: Body, opts: OpNormOptions | None = None,
                              estimator=None, estimate=None, quad: QuadratureRule | None = None) -> float:
    """Lower bound for the zero-norm operator norm of the least-squares projector.

    Trial forms: sign-matched bump forms for the best Lebesgue candidates (their
    action is known in closed form), plus random polynomial forms rescaled by
    their estimated zero norm.
    """
    from .lebesgue import EstimatorOptions, lebesgue_estimate, zero_norm_estimate

    opts = opts or OpNormOptions()
    estimator = estimator or EstimatorOptions(seed=opts.seed)
    q = cfg.quad(quad)
    if estimate is None:
        estimate = lebesgue_estimate(cfg, fb, E, estimator, quad=q)
    space = cfg.space
    R = fb.response
    best = 0.0

    geom = bump_geometry(cfg, opts)
    if geom is not None and estimate.candidates is not None:
        radius, a = geom
        cand = estimate.candidates[: max(1, opts.candidates)]
        rows = simplex_rows(space, cand, q)
        for t_T in rows:
            s = np.sign(R @ t_T)
            s[s == 0] = 1.0
            coeffs = project_data(fb, s * a)
            best = max(best, abs(float(t_T @ coeffs)))
        # zero norm of P(bump) for the top candidate
        s = np.sign(R @ rows[0])
        s[s == 0] = 1.0
        image = space.form(project_data(fb, s * a))
        best = max(best, zero_norm_estimate(image, E, estimator).value)

    rng = np.random.default_rng(opts.seed)
    deg = opts.random_degree if opts.random_degree is not None else max(space.degree or 1, 1)
    for _ in range(opts.random_trials):
        omega = random_polyform(space.n, space.k, deg, rng)
        norm = zero_norm_estimate(omega, E, estimator).value
        if norm <= 0:
            continue
        image = space.form(project(cfg, fb, omega, q))
        best = max(best, zero_norm_estimate(image, E, estimator).value / norm)
    return float(best)
