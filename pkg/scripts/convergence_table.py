"""Print the eps-ladder tables behind the convergence verdict.

usage: python scripts/convergence_table.py [n] [dt] [seeds]
"""
import sys

from paracalc import harness as H


def main(n=256, dt=5e-4, seeds=20):
    cfg = H.ExperimentConfig(kind="convergence", n=n, dt=dt)
    rep = H.run(cfg)
    print(f"{'eps':>8} {'sigma':>9} {'xi2 norm':>9} {'mean u(T)':>10} {'raw':>10}")
    for r in rep.tables["ladder"]:
        print(f"{r['eps']:8.4f} {r['sigma']:9.5f} {r['xi2_norm']:9.4f} {r['mean_u_T']:10.5f} {r['mean_u_T_raw']:10.5f}")
    print(f"\n{'k':>2} {'d_ren':>8} {'d_raw':>8} {'gap_raw':>8} {'scale':>8}")
    for r in rep.tables["differences"]:
        print(f"{r['k']:2d} {r['d_ren']:8.4f} {r['d_raw']:8.4f} {r['low_gap_raw']:8.4f} {r['drift_scale']:8.4f}")
    print(f"\nmedians over {seeds} noise samples")
    for r in H.xi2_ladder_norms(n, cfg.ladder, seeds, cfg.alpha):
        print(f"{r['eps']:8.4f} xi2 {r['xi2_norm_median']:.4f}  raw low block {r['raw_low_median']:.4f}")
    for c in rep.checks:
        print(f"{'PASS' if c.passed else 'FAIL'}  {c.name}: {c.value:.4g}")


if __name__ == "__main__":
    args = sys.argv[1:]
    main(*(int(args[0]) if i == 0 else float(a) if i == 1 else int(a) for i, a in enumerate(args)))
