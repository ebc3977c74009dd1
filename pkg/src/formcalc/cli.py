"""Command-line experiment driver: JSON config in, JSON (+ CSV) record out.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import jsonschema
import numpy as np

from .errors import DimensionError, FormcalcError, MappingError, NumericalFailure
from .fitting import CurrentConfig, OpNormOptions, operator_norm_lower_bound, orthonormalize
from .lebesgue import EstimatorOptions, lebesgue_continuity_probe, lebesgue_estimate
from .mapping import (
    MapSpec,
    measure_sandwich_check,
    renormalize,
    theorem2_chain_check,
    transfer_factors,
)
from .simplicial import AveragingCurrent, Body, OrientedSimplex, QuadratureRule, sample_simplex_vertices
from .spaces import BarycentricFrame, face_currents, polynomial_basis, whitney_basis

_MATRIX = {"type": "array", "items": {"type": "array", "items": {"type": "number"}}}
_VECTOR = {"type": "array", "items": {"type": "number"}}
_SIMPLEX = {
    "type": "object",
    "required": ["vertices"],
    "properties": {"vertices": _MATRIX, "sign": {"enum": [1, -1]}},
}
_SUPPORT = {
    "oneOf": [
        _SIMPLEX,
        {
            "type": "object",
            "required": ["terms"],
            "properties": {
                "terms": {
                    "type": "array",
                    "minItems": 1,
                    "items": {"type": "object", "required": ["simplex", "m"],
                              "properties": {"simplex": _SIMPLEX, "m": {"type": "number"}}},
                }
            },
        },
    ]
}

CONFIG_SCHEMA = {
    "type": "object",
    "required": ["experiment", "space", "currents"],
    "properties": {
        "experiment": {"type": "string"},
        "space": {
            "type": "object",
            "required": ["family", "n", "k"],
            "properties": {
                "family": {"enum": ["whitney", "poly"]},
                "n": {"type": "integer", "minimum": 1},
                "k": {"type": "integer", "minimum": 0},
                "r": {"type": "integer", "minimum": 0},
                "simplex": _MATRIX,
            },
        },
        "body": {
            "type": "object",
            "required": ["kind"],
            "properties": {
                "kind": {"enum": ["simplex", "box", "polytope"]},
                "vertices": _MATRIX,
                "lower": _VECTOR,
                "upper": _VECTOR,
            },
        },
        "currents": {"oneOf": [{"const": "faces"}, {"type": "array", "minItems": 1, "items": _SUPPORT}]},
        "weights": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}},
        "map": {"type": "object", "required": ["A"], "properties": {"A": _MATRIX, "b": _VECTOR}},
        "estimator": {
            "type": "object",
            "properties": {
                "samples": {"type": "integer", "minimum": 1},
                "refine_steps": {"type": "integer", "minimum": 0},
                "chains": {"type": "boolean"},
                "chain_samples": {"type": "integer", "minimum": 0},
                "chain_length": {"type": "integer", "minimum": 2},
                "path": {"enum": ["auto", "general", "lagrange"]},
            },
            "additionalProperties": False,
        },
        "opnorm": {
            "type": "object",
            "properties": {
                "delta": {"type": "number", "exclusiveMinimum": 0},
                "tube_fraction": {"type": "number", "exclusiveMinimum": 0, "maximum": 0.5},
                "candidates": {"type": "integer", "minimum": 1},
                "random_trials": {"type": "integer", "minimum": 0},
            },
            "additionalProperties": False,
        },
        "perturb": {
            "type": "object",
            "properties": {
                "eps": {"type": "array", "items": {"type": "number", "minimum": 0}, "minItems": 1},
                "seeds": {"type": "array", "items": {"type": "integer", "minimum": 0}, "minItems": 1},
            },
        },
        "trials": {"type": "integer", "minimum": 1},
        "quad_degree": {"type": "integer", "minimum": 0},
        "seed": {"type": "integer", "minimum": 0},
        "tol": {"type": "number", "minimum": 0},
        "output": {"type": "string"},
    },
}


class ConfigError(FormcalcError):
    """The experiment configuration is invalid."""


@dataclass(frozen=True, eq=False)
class ExperimentConfig:
    """Validated experiment description."""

    name: str
    raw: dict
    cfg: CurrentConfig
    body: Body
    map: MapSpec | None
    estimator: EstimatorOptions
    opnorm: OpNormOptions
    quad: QuadratureRule
    seed: int
    tol: float
    output: str | None


def _build_space(desc: dict):
    n, k = desc["n"], desc["k"]
    if k > n:
        raise ConfigError(f"k={k} exceeds n={n}")
    if desc["family"] == "whitney":
        frame = BarycentricFrame(np.asarray(desc["simplex"], dtype=float)) if "simplex" in desc \
            else BarycentricFrame.reference(n)
        if frame.n != n:
            raise ConfigError("whitney simplex does not live in R^n")
        return whitney_basis(frame, k), frame
    if "r" not in desc:
        raise ConfigError("poly space needs degree r")
    return polynomial_basis(n, k, desc["r"]), None


def _build_body(raw: dict, frame, n: int) -> Body:
    if "body" in raw:
        b = raw["body"]
        if b["kind"] == "box":
            if "lower" not in b or "upper" not in b:
                raise ConfigError("box body needs lower and upper")
            return Body.box(b["lower"], b["upper"])
        if "vertices" not in b:
            raise ConfigError(f"{b['kind']} body needs vertices")
        return Body(b["kind"], np.asarray(b["vertices"], dtype=float))
    return frame.body if frame is not None else Body.reference_simplex(n)


def load_config(raw: dict, seed: int | None = None, overrides: dict | None = None) -> ExperimentConfig:
    """Validate the schema and build every object; errors become ConfigError."""
    try:
        jsonschema.validate(raw, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise ConfigError(f"schema violation at {list(exc.absolute_path)}: {exc.message}") from None
    overrides = overrides or {}
    try:
        space, frame = _build_space(raw["space"])
        body = _build_body(raw, frame, space.n)
        if body.n != space.n:
            raise ConfigError("body dimension differs from the space dimension")
        if raw["currents"] == "faces":
            if frame is None:
                raise ConfigError("'faces' currents need a whitney space")
            currents = face_currents(frame, space.k)
        else:
            currents = [AveragingCurrent.from_json(c) for c in raw["currents"]]
        weights = np.asarray(raw.get("weights", np.ones(len(currents))), dtype=float)
        cfg = CurrentConfig(tuple(currents), weights, space)
        phi = MapSpec.from_json(raw["map"]) if "map" in raw else None
        if phi is not None and phi.n != space.n:
            raise ConfigError("map dimension differs from the space dimension")
    except NumericalFailure:
        raise
    except (DimensionError, ValueError, MappingError, KeyError, np.linalg.LinAlgError) as exc:
        raise ConfigError(str(exc)) from None
    run_seed = int(seed if seed is not None else raw.get("seed", 0))
    est = dict(raw.get("estimator", {}))
    est.update({k: v for k, v in overrides.items() if v is not None and k != "tol"})
    estimator = EstimatorOptions(seed=run_seed, **est)
    opnorm = OpNormOptions(seed=run_seed, **raw.get("opnorm", {}))
    deg = raw.get("quad_degree", max(6, space.degree or 0))
    tol = overrides.get("tol")
    tol = float(raw.get("tol", 1e-6) if tol is None else tol)
    return ExperimentConfig(raw["experiment"], raw, cfg, body, phi, estimator, opnorm,
                            QuadratureRule(int(deg)), run_seed, tol, raw.get("output"))


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("FORMCALC_THREADS", "1")))
    except ValueError:
        return 1


# --------------------------------------------------------------------------- commands


def cmd_whitney_check(exp: ExperimentConfig) -> dict:
    cfg = exp.cfg
    fb = orthonormalize(cfg, exp.quad)
    V, G = fb.vandermonde, fb.gram
    out = {"gram_deviation": float(np.abs(G - np.eye(cfg.N)).max())}
    if V.shape[0] == V.shape[1]:
        out["vandermonde_deviation"] = float(np.abs(V - np.eye(cfg.N)).max())
    else:
        out["vandermonde_deviation"] = None
    return out


def cmd_lebesgue(exp: ExperimentConfig) -> dict:
    fb = orthonormalize(exp.cfg, exp.quad)
    est = lebesgue_estimate(exp.cfg, fb, exp.body, exp.estimator, exp.quad)
    return {"lebesgue": est.to_json()}


def cmd_opnorm(exp: ExperimentConfig) -> dict:
    fb = orthonormalize(exp.cfg, exp.quad)
    est = lebesgue_estimate(exp.cfg, fb, exp.body, exp.estimator, exp.quad)
    lb = operator_norm_lower_bound(exp.cfg, fb, exp.body, exp.opnorm, exp.estimator, est, exp.quad)
    return {"opnorm_lower_bound": lb, "lebesgue": est.to_json()}


def cmd_thm1(exp: ExperimentConfig) -> dict:
    out = cmd_opnorm(exp)
    L = out["lebesgue"]["value"]
    lb = out["opnorm_lower_bound"]
    out.update({"ratio": lb / L, "inequality_holds": bool(lb <= L + exp.tol)})
    return out


def _mapped_body(phi: MapSpec, E: Body) -> Body:
    if E.kind == "simplex":
        return Body.simplex(phi(E.data))
    return Body.polytope(phi(E.vertices))


def cmd_thm2(exp: ExperimentConfig) -> dict:
    if exp.map is None:
        raise ConfigError("thm2 needs a map")
    phi, cfg_ref = exp.map, exp.cfg
    factors = transfer_factors(phi, cfg_ref.space.k)
    fb_ref = orthonormalize(cfg_ref, exp.quad)
    cfg = renormalize(phi, cfg_ref)
    fb = orthonormalize(cfg, exp.quad)
    E = _mapped_body(phi, exp.body)
    L_ref = lebesgue_estimate(cfg_ref, fb_ref, exp.body, exp.estimator, exp.quad)
    L_map = lebesgue_estimate(cfg, fb, E, exp.estimator, exp.quad)
    rng = np.random.default_rng([exp.seed, 2])
    trials = int(exp.raw.get("trials", 100))
    verts = sample_simplex_vertices(E, cfg.space.k, rng, trials, exp.estimator.sampling)
    currents = [L_map.witness] + [AveragingCurrent(OrientedSimplex(v)) for v in verts]
    gaps = []
    for T in currents:
        lhs, rhs = theorem2_chain_check(phi, cfg_ref, T, exp.quad, fb_ref, (cfg, fb))
        gaps.append(lhs - rhs)
    w_lhs, w_rhs = theorem2_chain_check(phi, cfg_ref, L_map.witness, exp.quad, fb_ref, (cfg, fb))
    return {
        "factors": factors.to_json(),
        "lebesgue_reference": L_ref.value,
        "lebesgue_mapped": L_map.value,
        "witness_lhs": w_lhs,
        "witness_rhs": w_rhs,
        "chain_trials": len(currents),
        "chain_max_gap": float(max(gaps)),
        "chain_violations": int(sum(g > exp.tol for g in gaps)),
        "end_to_end_holds": bool(L_map.value <= factors.thm2factor * L_ref.value + exp.tol),
    }


def cmd_perturb(exp: ExperimentConfig) -> dict:
    params = exp.raw.get("perturb", {})
    eps = params.get("eps", [1e-1, 1e-2, 1e-3])
    seeds = params.get("seeds", [0, 1, 2, 3, 4])
    base, rows = lebesgue_continuity_probe(exp.cfg, exp.body, eps, seeds, exp.estimator, exp.quad,
                                           threads=_threads())
    return {"lebesgue": base, "table": [r.to_json() for r in rows]}


def cmd_map_bound(exp: ExperimentConfig) -> dict:
    if exp.map is None:
        raise ConfigError("map-bound needs a map")
    phi = exp.map
    rng = np.random.default_rng([exp.seed, 3])
    k = exp.cfg.space.k
    trials = int(exp.raw.get("trials", 1000))
    worst_low = worst_up = 0.0
    for v in sample_simplex_vertices(exp.body, k, rng, trials, exp.estimator.sampling):
        lo, act, up = measure_sandwich_check(phi, OrientedSimplex(v))
        worst_low = max(worst_low, (lo - act) / act)
        worst_up = max(worst_up, (act - up) / act)
    return {
        "factors": transfer_factors(phi, k).to_json(),
        "singular_values": phi.singular_values.tolist(),
        "sandwich_trials": trials,
        "lower_violation": worst_low,
        "upper_violation": worst_up,
    }


COMMANDS = {
    "whitney-check": cmd_whitney_check,
    "lebesgue": cmd_lebesgue,
    "opnorm": cmd_opnorm,
    "thm1": cmd_thm1,
    "thm2": cmd_thm2,
    "perturb": cmd_perturb,
    "map-bound": cmd_map_bound,
}


# --------------------------------------------------------------------------- output


def _scalars(prefix: str, obj, out: dict):
    if isinstance(obj, dict):
        for key, val in obj.items():
            if key in ("witness", "trace", "table"):
                continue
            _scalars(f"{prefix}.{key}" if prefix else key, val, out)
    elif isinstance(obj, (int, float, bool, str)) or obj is None:
        out[prefix] = obj


def to_csv(command: str, results: dict) -> str:
    buf = io.StringIO()
    if command == "perturb":
        writer = csv.DictWriter(buf, fieldnames=["eps", "seed", "value", "deviation", "status"],
                                lineterminator="\n")
        writer.writeheader()
        writer.writerows(results["table"])
    else:
        flat: dict = {}
        _scalars("", results, flat)
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["key", "value"])
        for key, val in flat.items():
            writer.writerow([key, val])
    return buf.getvalue()


def run(command: str, raw: dict, seed: int | None = None, overrides: dict | None = None) -> dict:
    """Execute one subcommand and return the result record."""
    exp = load_config(raw, seed, overrides)
    start = time.perf_counter()
    results = COMMANDS[command](exp)
    est = exp.estimator
    return {
        "experiment": exp.name,
        "command": command,
        "seed": exp.seed,
        "budget": {"samples": est.samples, "refine_steps": est.refine_steps, "chains": est.chains},
        "results": results,
        "wall_time": time.perf_counter() - start,
    }


def dumps(record: dict) -> str:
    return json.dumps(record, sort_keys=True, indent=2) + "\n"


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="formcalc", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", required=True, help="experiment JSON file")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--out", default=None, help="result JSON path (CSV written alongside)")
    parser.add_argument("--samples", type=int, default=None)
    parser.add_argument("--refine-steps", type=int, default=None)
    parser.add_argument("--chains", action="store_true", default=None)
    parser.add_argument("--tol", type=float, default=None)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        raw = json.loads(Path(args.config).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        print(f"formcalc: cannot read config: {exc}", file=sys.stderr)
        return 2
    overrides = {"samples": args.samples, "refine_steps": args.refine_steps,
                 "chains": args.chains, "tol": args.tol}
    try:
        record = run(args.command, raw, args.seed, overrides)
    except ConfigError as exc:
        print(f"formcalc: config error: {exc}", file=sys.stderr)
        return 2
    except NumericalFailure as exc:
        print(f"formcalc: numerical failure ({type(exc).__name__}): {exc}", file=sys.stderr)
        return 3
    text = dumps(record)
    out = args.out or (raw.get("output") if isinstance(raw, dict) else None)
    if out:
        path = Path(out)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
        path.with_suffix(".csv").write_text(to_csv(args.command, record["results"]))
    else:
        sys.stdout.write(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
