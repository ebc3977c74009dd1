"""Run every CLI command on the shipped configs and print a summary table.

Usage: python3 scripts/run_experiments.py [--out results] [--quick]
"""

import argparse
import json
import sys
from pathlib import Path

from formcalc.cli import main as formcalc

CONFIGS = Path(__file__).resolve().parent / "configs"

# (command, config stem, result key to summarize)
PLAN = [
    ("whitney-check", "whitney_triangle", "gram_deviation"),
    ("whitney-check", "whitney_tetra_k2", "gram_deviation"),
    ("lebesgue", "nodal_quadratic", "lebesgue.value"),
    ("lebesgue", "whitney_triangle", "lebesgue.value"),
    ("lebesgue", "whitney_tetra_k2", "lebesgue.value"),
    ("lebesgue", "poly_fit_box", "lebesgue.value"),
    ("opnorm", "nodal_quadratic", "opnorm_lower_bound"),
    ("thm1", "whitney_triangle", "ratio"),
    ("thm1", "whitney_tetra_k2", "ratio"),
    ("thm2", "whitney_affine_map", "end_to_end_holds"),
    ("map-bound", "whitney_affine_map", "upper_violation"),
    ("perturb", "whitney_triangle", "table"),
]


def lookup(results, dotted):
    for key in dotted.split("."):
        results = results[key]
    if isinstance(results, list):
        return f"{len(results)} rows"
    return results


def run_all(out_dir: Path, quick: bool) -> int:
    out_dir.mkdir(parents=True, exist_ok=True)
    extra = ["--samples", "256", "--refine-steps", "60"] if quick else []
    failures = 0
    print(f"{'command':<14} {'config':<20} {'exit':>4}  summary")
    for command, stem, key in PLAN:
        out = out_dir / f"{stem}.{command}.json"
        code = formcalc([command, "--config", str(CONFIGS / f"{stem}.json"), "--out", str(out), *extra])
        summary = ""
        if code == 0:
            rec = json.loads(out.read_text())
            summary = f"{key} = {lookup(rec['results'], key)}  ({rec['wall_time']:.2f}s)"
        else:
            failures += 1
        print(f"{command:<14} {stem:<20} {code:>4}  {summary}")
    return 1 if failures else 0


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", default="results", help="output directory for JSON and CSV records")
    parser.add_argument("--quick", action="store_true", help="use a small estimator budget")
    args = parser.parse_args()
    sys.exit(run_all(Path(args.out), args.quick))
