"""Scaling exponents with random-phase and with block-normalized test fields.

usage: python scripts/norm_exponents.py [n] [seeds]
"""
import sys

import numpy as np

from paracalc import harness as H


def main(n=128, seeds=20):
    cfg = H.ExperimentConfig(kind="norms", n=n, seeds=seeds)
    plain = H.norm_suite_samples(cfg)
    normed = H.norm_suite_samples(cfg, block_normalized=True)
    print(f"{'quantity':>12} {'target':>7} {'random':>8} {'normed':>8}")
    for k, (target, tol, rel) in H.NORM_TARGETS.items():
        print(f"{k:>12} {target:7.2f} {np.mean(plain[k]):8.3f} {np.mean(normed[k]):8.3f}")


if __name__ == "__main__":
    main(*map(int, sys.argv[1:]))
