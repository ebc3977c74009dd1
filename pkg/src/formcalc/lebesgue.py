"""Lower estimates of the zero norm and of the Lebesgue constant.

Both suprema are searched by random (or low-discrepancy) sampling followed by a
derivative-free pattern search. The search is deterministic given the seed and
the budget, and a larger budget with the same seed only adds candidates, so the
reported value is monotone in the budget.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.stats import qmc

from .errors import DegenerateSimplexError, NotDetermining, NumericalFailure
from .exterior import ComassOptions, comass_batch
from .fitting import (
    CurrentConfig,
    FittedBasis,
    lagrange_basis,
    orthonormalize,
    simplex_rows,
)
from .simplicial import (
    AveragingCurrent,
    Body,
    Chain,
    OrientedSimplex,
    QuadratureRule,
    SamplingOptions,
    degenerate_mask,
    sample_simplex_vertices,
)
from .spaces import FormField


@dataclass(frozen=True)
class EstimatorOptions:
    """Budgets for the supremum searches."""

    samples: int = 2048
    chunk: int = 64
    keep_per_chunk: int = 1
    corner_seeds: int = 4
    refine_steps: int = 200
    min_step: float = 1e-9
    chains: bool = False
    chain_samples: int = 512
    chain_length: int = 4
    seed: int = 0
    path: str = "auto"
    zero_samples: int = 1024
    zero_keep: int = 8
    zero_refine_steps: int = 100
    comass: ComassOptions = field(default_factory=lambda: ComassOptions(restarts=16))
    sampling: SamplingOptions = field(default_factory=SamplingOptions)


@dataclass(frozen=True, eq=False)
class SupremumEstimate:
    """A certified-by-construction lower estimate of a supremum and where it is attained."""

    value: float
    witness: AveragingCurrent | np.ndarray | None
    samples: int
    trace: tuple[float, ...]
    candidates: np.ndarray | None = None  # refined simplices, best first

    def to_json(self) -> dict:
        if isinstance(self.witness, AveragingCurrent):
            wit = self.witness.to_json()
        elif self.witness is None:
            wit = None
        else:
            wit = np.asarray(self.witness).tolist()
        return {"value": self.value, "witness": wit, "budget": self.samples, "trace": list(self.trace)}


# --------------------------------------------------------------------------- pattern search


def pattern_search(objective, x0: np.ndarray, project, valid, step0: float, steps: int, min_step: float,
                   directions: np.ndarray | None = None, contract: bool = False,
                   anchors: np.ndarray | None = None, rotate: bool = False, seed: int = 0):
    """Batched pattern search maximizing ``objective``.

    ``x0`` has shape (B, ...). Moves are +/- ``step`` along each row of
    ``directions`` (flattened coordinates; default: the coordinate axes) and, if
    ``contract`` is set, scalings of each point set about its mean by
    (1 -/+ step / size). Each of the ``anchors`` adds moves shrinking the point
    set toward that anchor, by a step-sized amount and by half. With ``rotate``,
    every sweep also polls a fresh random orthonormal frame (shared by all
    candidates, drawn from ``seed``), which keeps the search moving along ridges
    of nonsmooth objectives. ``project`` maps trial points into the feasible set
    and ``valid`` flags acceptable trial points. Steps are per candidate and
    halve after a sweep without improvement. Returns (x, values, trace of the max).
    """
    x = np.array(x0, dtype=float)
    B = x.shape[0]
    shape = x.shape[1:]
    flat = x.reshape(B, -1)
    dim = flat.shape[1]
    D = np.eye(dim) if directions is None else np.asarray(directions, dtype=float).reshape(-1, dim)
    val = objective(x)
    step = np.full(B, float(step0))
    trace = [float(val.max())] if B else []

    def attempt(idx, trial):
        trial = project(trial.reshape((idx.size,) + shape)).reshape(idx.size, -1)
        ok = valid(trial.reshape((idx.size,) + shape))
        tv = np.full(idx.size, -np.inf)
        if ok.any():
            tv[ok] = objective(trial[ok].reshape((int(ok.sum()),) + shape))
        better = tv > val[idx]
        sel = idx[better]
        flat[sel] = trial[better]
        val[sel] = tv[better]
        return sel

    frames = np.random.default_rng([seed, 3])
    for _ in range(steps):
        live = step >= min_step
        if not live.any():
            break
        improved = np.zeros(B, dtype=bool)
        polled = np.vstack([D, np.linalg.qr(frames.standard_normal((dim, dim)))[0].T]) if rotate else D
        for d in polled:
            for sgn in (1.0, -1.0):
                idx = np.nonzero(live)[0]
                improved[attempt(idx, flat[idx] + sgn * step[idx, None] * d)] = True
        if contract and len(shape) == 2:
            for sgn in (1.0, -1.0):
                idx = np.nonzero(live)[0]
                pts = flat[idx].reshape((idx.size,) + shape)
                center = pts.mean(axis=1, keepdims=True)
                size = np.abs(pts - center).max(axis=(1, 2))
                factor = 1.0 - sgn * np.minimum(step[idx] / np.maximum(size, 1e-300), 0.5)
                trial = center + factor[:, None, None] * (pts - center)
                improved[attempt(idx, trial.reshape(idx.size, -1))] = True
        if anchors is not None and len(shape) == 2:
            for a in np.asarray(anchors, dtype=float):
                idx = np.nonzero(live)[0]
                pts = flat[idx].reshape((idx.size,) + shape)
                reach = np.linalg.norm(pts - a, axis=-1).max(axis=1)
                factor = 1.0 - np.minimum(step[idx] / np.maximum(reach, 1e-300), 0.5)
                for f in (factor[:, None, None], 0.5):
                    pts = flat[idx].reshape((idx.size,) + shape)
                    trial = a + f * (pts - a)
                    improved[attempt(idx, trial.reshape(idx.size, -1))] = True
        step[live & ~improved] *= 0.5
        trace.append(float(val.max()))
    return flat.reshape(x.shape), val, trace


def simplex_directions(k: int, n: int) -> np.ndarray:
    """Single-vertex coordinate moves followed by whole-simplex translations."""
    dim = (k + 1) * n
    moves = [np.eye(dim)]
    if k > 0:
        moves.append(np.tile(np.eye(n), (1, k + 1)))
    return np.vstack(moves)


# --------------------------------------------------------------------------- zero norm


def _qmc_points(E: Body, count: int, seed: int) -> np.ndarray:
    n = E.n
    m = int(np.ceil(np.log2(max(count, 2))))
    u = qmc.Sobol(d=n, scramble=True, seed=seed).random_base2(m)[:count]
    if E.kind == "simplex":
        s = np.sort(u, axis=1)
        lam = np.diff(np.column_stack([np.zeros(len(s)), s, np.ones(len(s))]), axis=1)
        return lam @ E.data
    if E.kind == "box":
        return E.data[0] + u * (E.upper - E.data[0])
    lo, hi = E.data.min(axis=0), E.data.max(axis=0)
    pts = lo + u * (hi - lo)
    return pts[E.contains(pts)]


def pointwise_comass(form: FormField, points: np.ndarray, opts: ComassOptions | None = None) -> np.ndarray:
    return comass_batch(form.values(points), form.n, form.k, opts)


def zero_norm_estimate(form: FormField, E: Body, opts: EstimatorOptions | None = None) -> SupremumEstimate:
    """max over E of the pointwise comass, by Sobol sampling plus pattern search."""
    opts = opts or EstimatorOptions()
    pts = np.vstack([_qmc_points(E, opts.zero_samples, opts.seed), E.vertices])
    vals = pointwise_comass(form, pts, opts.comass)
    top = np.argsort(-vals, kind="stable")[: opts.zero_keep]

    def objective(x):
        return pointwise_comass(form, x, opts.comass)

    x, v, trace = pattern_search(
        objective, pts[top], E.clip, lambda x: np.ones(x.shape[0], dtype=bool),
        0.05 * E.diameter, opts.zero_refine_steps, opts.min_step * E.diameter,
    )
    i = int(np.argmax(v))
    value = max(float(v[i]), float(vals.max()))
    wit = x[i] if v[i] >= vals.max() else pts[int(np.argmax(vals))]
    return SupremumEstimate(value, wit, int(pts.shape[0]), tuple(trace))


# --------------------------------------------------------------------------- Lebesgue constant


def _response(cfg: CurrentConfig, fb: FittedBasis, path: str, quad: QuadratureRule) -> tuple[np.ndarray, str]:
    """Matrix R with Lebesgue function l(T) = ||R t_T||_1 for T-rows t_T."""
    equal_weights = np.allclose(cfg.weights, 1.0)
    if path == "auto":
        path = "lagrange" if cfg.M == cfg.N and equal_weights else "general"
    if path == "lagrange":
        return lagrange_basis(cfg, quad, V=fb.vandermonde).T, path
    if path != "general":
        raise ValueError(f"unknown path {path!r}")
    return fb.response, path


def lebesgue_function(cfg: CurrentConfig, fb: FittedBasis, currents, quad: QuadratureRule | None = None,
                      path: str = "general") -> np.ndarray:
    """sum_i w_i |sum_h T_i(eta_h) T(eta_h)| for each given current."""
    from .fitting import current_rows

    q = cfg.quad(quad)
    R, _ = _response(cfg, fb, path, q)
    return np.abs(current_rows(cfg.space, currents, q) @ R.T).sum(axis=1)


def lebesgue_estimate(cfg: CurrentConfig, fb: FittedBasis, E: Body, opts: EstimatorOptions | None = None,
                      quad: QuadratureRule | None = None) -> SupremumEstimate:
    """Lower estimate of the Lebesgue constant over averaging currents in E."""
    opts = opts or EstimatorOptions()
    q = cfg.quad(quad)
    R, _ = _response(cfg, fb, opts.path, q)
    space = cfg.space
    k = space.k

    def objective(verts):
        return np.abs(simplex_rows(space, verts, q) @ R.T).sum(axis=1)

    # Blocks of `chunk` samples each come from their own stream and the budget is
    # rounded up to whole blocks, so a larger budget only adds candidates.
    chunk = max(1, opts.chunk)
    blocks = -(-opts.samples // chunk)
    starts = []
    for b in range(blocks):
        verts = sample_simplex_vertices(E, k, np.random.default_rng([opts.seed, 0, b]), chunk, opts.sampling)
        keep = np.argsort(-objective(verts), kind="stable")[: opts.keep_per_chunk]
        starts.append(verts[keep])
    # tiny simplices just inside each corner of E, where suprema often sit
    crng = np.random.default_rng([opts.seed, 2])
    center = E.vertices.mean(axis=0)
    for corner in E.vertices:
        inner = corner + 0.02 * (center - corner)
        for _ in range(opts.corner_seeds if k > 0 else min(opts.corner_seeds, 1)):
            tiny = inner + 1e-3 * E.diameter * crng.standard_normal((k + 1, E.n)) * (k > 0)
            starts.append(E.clip(tiny)[None])
    own = [T.support.vertices for T in cfg.currents
           if isinstance(T.support, OrientedSimplex) and np.all(E.contains(T.support.vertices, 1e-9))]
    if own:
        starts.insert(0, E.clip(np.stack(own)))
    x0 = np.concatenate(starts) if starts else np.empty((0, k + 1, E.n))

    def valid(v):
        return ~degenerate_mask(v)

    x, v, trace = pattern_search(
        objective, x0, E.clip, valid, 0.1 * E.diameter, opts.refine_steps, opts.min_step * E.diameter,
        directions=simplex_directions(k, E.n), contract=k > 0, anchors=E.vertices,
        rotate=True, seed=opts.seed,
    )
    order = np.argsort(-v, kind="stable")
    best_val = float(v[order[0]])
    witness = AveragingCurrent(OrientedSimplex(x[order[0]], 1))

    if opts.chains:
        crng = np.random.default_rng([opts.seed, 1])
        chain_opts = replace(opts.sampling, chain_length=1)
        for _ in range(opts.chain_samples):
            length = int(crng.integers(2, opts.chain_length + 1))
            verts = np.concatenate([x[order[: min(2, len(order))]],
                                    sample_simplex_vertices(E, k, crng, length, chain_opts)])[:length]
            mult = crng.uniform(-1.0, 1.0, length)
            mult[mult == 0] = 1.0
            chain = Chain(tuple((OrientedSimplex(vv, 1), m) for vv, m in zip(verts, mult)))
            T = AveragingCurrent(chain)
            val = float(lebesgue_function(cfg, fb, [T], q, _response(cfg, fb, opts.path, q)[1])[0])
            if val > best_val:
                best_val, witness = val, T
    trace.append(best_val)
    return SupremumEstimate(best_val, witness, blocks * chunk, tuple(trace), x[order])


# --------------------------------------------------------------------------- continuity


@dataclass(frozen=True)
class ProbeRow:
    eps: float
    seed: int
    value: float | None
    deviation: float | None
    status: str

    def to_json(self) -> dict:
        return {"eps": self.eps, "seed": self.seed, "value": self.value,
                "deviation": self.deviation, "status": self.status}


def perturb_config(cfg: CurrentConfig, eps: float, rng: np.random.Generator, E: Body) -> CurrentConfig:
    """Shift every support vertex by U[-eps, eps] noise and clip it into E."""
    currents = []
    for T in cfg.currents:
        sup = T.support
        if isinstance(sup, OrientedSimplex):
            v = E.clip(sup.vertices + rng.uniform(-eps, eps, sup.vertices.shape))
            currents.append(AveragingCurrent(OrientedSimplex(v, sup.sign)))
        else:
            terms = []
            for S, m in sup.terms:
                v = E.clip(S.vertices + rng.uniform(-eps, eps, S.vertices.shape))
                terms.append((OrientedSimplex(v, S.sign), m))
            currents.append(AveragingCurrent(Chain(tuple(terms))))
    return CurrentConfig(tuple(currents), cfg.weights, cfg.space)


def lebesgue_continuity_probe(cfg: CurrentConfig, E: Body, eps_grid, seeds, opts: EstimatorOptions | None = None,
                              quad: QuadratureRule | None = None, threads: int = 1) -> tuple[float, list[ProbeRow]]:
    """|L_eps - L| for each (eps, seed); failures are recorded, not raised.

    All runs share the estimator seed so sampling noise is common to both sides.
    """
    opts = opts or EstimatorOptions()
    base = lebesgue_estimate(cfg, orthonormalize(cfg, quad), E, opts, quad).value

    def run(job):
        eps, seed = job
        if eps == 0:
            return ProbeRow(float(eps), int(seed), base, 0.0, "ok")
        rng = np.random.default_rng(seed)
        try:
            pcfg = perturb_config(cfg, eps, rng, E)
            value = lebesgue_estimate(pcfg, orthonormalize(pcfg, quad), E, opts, quad).value
        except NotDetermining:
            return ProbeRow(float(eps), int(seed), None, None, "not-determining")
        except (DegenerateSimplexError, NumericalFailure) as exc:
            return ProbeRow(float(eps), int(seed), None, None, type(exc).__name__)
        return ProbeRow(float(eps), int(seed), value, abs(value - base), "ok")

    jobs = [(float(e), int(s)) for s in seeds for e in eps_grid]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(run, jobs))
    else:
        rows = [run(j) for j in jobs]
    return base, rows
