"""Tabulate Lebesgue constants and operator-norm bounds of Whitney face interpolation.

Usage: python3 scripts/whitney_lebesgue_table.py [--samples N]
"""

import argparse

from formcalc.fitting import CurrentConfig, operator_norm_lower_bound, orthonormalize
from formcalc.lebesgue import EstimatorOptions, lebesgue_estimate
from formcalc.spaces import BarycentricFrame, face_currents, whitney_basis


def main(samples: int) -> None:
    print(f"{'n':>2} {'k':>2} {'N':>3} {'Lebesgue':>12} {'op-norm lb':>12} {'ratio':>7}")
    for n in (1, 2, 3):
        for k in range(n + 1):
            frame = BarycentricFrame.reference(n)
            cfg = CurrentConfig.unit(face_currents(frame, k), whitney_basis(frame, k))
            E = frame.body
            fb = orthonormalize(cfg)
            est = lebesgue_estimate(cfg, fb, E, EstimatorOptions(samples=samples))
            lb = operator_norm_lower_bound(cfg, fb, E, estimate=est)
            print(f"{n:>2} {k:>2} {cfg.N:>3} {est.value:>12.6f} {lb:>12.6f} {lb / est.value:>7.4f}")


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--samples", type=int, default=2048)
    main(parser.parse_args().samples)
