"""Command-line entry point: ``paracalc <subcommand> [--config PATH] [--seed N] [--out DIR] [--quiet]``.

Exit status: 0 on success or pass, 2 when any acceptance check fails, 1 on error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import harness as H
from .noise import Mollifier, sample_white_noise, sigma_eps
from .solvers import diffusion_from_name, solve_classical

EXPERIMENTS = {"converge": "convergence", "crossval": "crossval", "wick": "wick", "norms": "norms"}
SUBCOMMANDS = ("sample", "sigma", "enhance", "solve-classical", "solve-paracontrolled",
               *EXPERIMENTS, "inspect")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="paracalc", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=SUBCOMMANDS)
    p.add_argument("path", nargs="?", help="file or directory for inspect")
    p.add_argument("--config", type=Path)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", type=Path)
    p.add_argument("--quiet", action="store_true")
    return p


def _config(args, kind: str) -> H.ExperimentConfig:
    overrides = {"kind": kind, "seed": args.seed}
    if args.out is not None:
        overrides["out"] = str(args.out)
    if args.config:
        return H.load_config(args.config, **overrides)
    return H.ExperimentConfig.from_dict({k: v for k, v in overrides.items() if v is not None})


def _emit(args, text: str) -> None:
    if not args.quiet:
        print(text)


def _run_experiment(args, kind: str) -> int:
    cfg = _config(args, kind)
    rep = H.run(cfg)
    d = rep.write(cfg.out)
    for c in rep.checks:
        _emit(args, f"{'PASS' if c.passed else 'FAIL'}  {c.name}: {c.value:.6g} ({c.threshold})")
    for note in rep.notes:
        _emit(args, f"note: {note}")
    _emit(args, f"report: {d}")
    return 2 if rep.passed is False else 0


def _outdir(cfg: H.ExperimentConfig, tag: str) -> Path:
    d = Path(cfg.out) / f"{tag}-{cfg.hash()[:10]}"
    i = 1
    base = d
    while d.exists():
        d = base.with_name(f"{base.name}-{i}")
        i += 1
    d.mkdir(parents=True)
    return d


def cmd_sample(args) -> int:
    cfg = _config(args, "sample")
    xi = sample_white_noise(cfg.n, cfg.seed)
    d = _outdir(cfg, "sample")
    H.write_slab(d / "xi.slab", xi, seed=cfg.seed, config_hash=cfg.hash())
    _emit(args, f"n={cfg.n} seed={cfg.seed} mean={xi.mean():.3e} std={xi.std():.4f} -> {d}")
    return 0


def cmd_sigma(args) -> int:
    cfg = _config(args, "sigma")
    m = Mollifier(cfg.mollifier)
    _emit(args, f"{'eps':>12} {'sigma':>14}  (n={cfg.n}, {m.kind})")
    for e in cfg.ladder:
        _emit(args, f"{e:12.6g} {sigma_eps(m, e, cfg.n):14.10f}")
    return 0


def cmd_enhance(args) -> int:
    cfg = _config(args, "enhance")
    data = H.make_data(cfg)
    d = H.save_enhanced(data, _outdir(cfg, "enhanced") / "noise")
    _emit(args, f"sigma={data.sigma:.10f} eps={data.eps} -> {d}")
    return 0


def cmd_solve_classical(args) -> int:
    cfg = _config(args, "classical")
    data = H.make_data(cfg)
    u = solve_classical(cfg.solver(), diffusion_from_name(cfg.diffusion), data.xi_eps, data.sigma,
                        H.initial_condition(cfg))
    d = _outdir(cfg, "classical")
    H.save_timeslab(d / "u.slab", u, config_hash=cfg.hash())
    diag = {"config": cfg.to_dict(), "config_hash": cfg.hash(),
            "sup_per_frame": [float(np.max(np.abs(v))) for v in u.values]}
    (d / "diagnostics.json").write_text(json.dumps(diag, indent=2))
    _emit(args, f"frames={u.frames} sup(u(T))={np.max(np.abs(u.values[-1])):.6f} -> {d}")
    return 0


def cmd_solve_paracontrolled(args) -> int:
    cfg = _config(args, "paracontrolled")
    data = H.make_data(cfg)
    st = H.solve_paracontrolled(cfg.solver(), data, diffusion_from_name(cfg.diffusion), H.initial_condition(cfg))
    d = _outdir(cfg, "paracontrolled")
    H.save_timeslab(d / "u.slab", st.u, config_hash=cfg.hash())
    H.save_param(d / "usharp.slab", st.Usharp, config_hash=cfg.hash())
    diag = {"config": cfg.to_dict(), "config_hash": cfg.hash(), "residuals": st.residuals,
            "horizon": st.u.T, "sup_per_frame": [float(np.max(np.abs(v))) for v in st.u.values]}
    (d / "diagnostics.json").write_text(json.dumps(diag, indent=2))
    _emit(args, f"iterations={len(st.residuals)} final residual={st.residuals[-1]:.3e} -> {d}")
    return 0


def cmd_inspect(args) -> int:
    if args.path is None:
        raise H.ConfigError("inspect needs a path")
    p = Path(args.path)
    if p.is_dir():
        for name in ("report.json", "manifest.json", "diagnostics.json"):
            if (p / name).exists():
                p = p / name
                break
        else:
            raise H.ConfigError(f"{p}: nothing to inspect")
    if p.suffix == ".json":
        d = json.loads(p.read_text())
        if "checks" in d:
            _emit(args, f"{d['kind']} {d['config_hash'][:10]} passed={d['passed']}")
            for c in d["checks"]:
                _emit(args, f"  {'PASS' if c['passed'] else 'FAIL'}  {c['name']}: {c['value']:.6g}")
        else:
            _emit(args, json.dumps(d, indent=2))
    else:
        v, header = H.read_slab(p)
        _emit(args, json.dumps(header))
        _emit(args, f"min={v.min():.6g} max={v.max():.6g} mean={v.mean():.6g}")
    return 0


HANDLERS = {
    "sample": cmd_sample,
    "sigma": cmd_sigma,
    "enhance": cmd_enhance,
    "solve-classical": cmd_solve_classical,
    "solve-paracontrolled": cmd_solve_paracontrolled,
    "inspect": cmd_inspect,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO, format="%(message)s")
    try:
        if args.command in EXPERIMENTS:
            return _run_experiment(args, EXPERIMENTS[args.command])
        return HANDLERS[args.command](args)
    except (H.ConfigError, OSError, ValueError, RuntimeError) as e:
        print(f"paracalc: error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
