"""Command line interface.

Verbs:
    run      one scenario at a single aspect ratio, with reports and figures
    sweep    the full aspect-ratio sweep with convergence verdicts
    verify   manufactured-solution orders plus the invariant suites
    kernels  gravity kernel-limit gap sequences against the flat oracle

Every verb writes delimited reports plus a summary JSON with one boolean per
check into the output directory, renders figures next to them, and exits 0
only if every verdict passed.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path

import numpy as np

from .figures import (figure_entropy, figure_fields, figure_kernel_gaps,
                      figure_mms, render_sweep_figures)
from .gravity import g4_sample_points, kernel_limit_g3, kernel_limit_g4
from .mms import manufactured_convergence
from .reporting import (check_booleans, config_from_file, export_sweep,
                        write_series_csv, write_summary)
from .scenarios import ScenarioConfig
from .sweep import alpha_scaling_check, run_epsilon_sweep
from .verify import specular_conservation_check, stationarity_check

log = logging.getLogger("thinlayer")

G3_SAMPLE_POINTS = ((0.1037, 0.2113, 0.37),
                    (-0.2309, 0.1117, 0.64),
                    (0.0531, -0.3141, 0.5))


def _kernel_profile(X, Y):
    """Smooth compact density bump for the kernel-limit reports."""
    return 1.0 + 0.25 * np.exp(-((X / 0.18) ** 2 + (Y / 0.18) ** 2))


# ---------------------------------------------------------------------------
# argument handling


def _parse_eps(text: str) -> tuple:
    try:
        vals = tuple(float(tok) for tok in text.split(",") if tok.strip())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad eps list {text!r}") from exc
    if not vals:
        raise argparse.ArgumentTypeError("eps list is empty")
    return vals


def _parse_grid(text: str) -> tuple:
    parts = text.split(",")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("grid must be NX,NY,NZ")
    try:
        return tuple(int(p) for p in parts)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad grid {text!r}") from exc


def _parse_levels(text: str) -> tuple:
    try:
        return tuple(int(tok) for tok in text.split(",") if tok.strip())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad level list {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(
        prog="thinlayer", description=__doc__,
        formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = top.add_subparsers(dest="verb", required=True)

    def common(p):
        p.add_argument("--config", type=Path, default=None,
                       help="JSON scenario configuration to start from")
        p.add_argument("--eps", type=_parse_eps, default=None,
                       metavar="E1,E2,...", help="aspect ratios, descending")
        p.add_argument("--regime", choices=("fr1", "freps", "both"),
                       default=None, help="gravity regime (default: both)")
        p.add_argument("--out", type=Path, default=None,
                       help="report directory (default: ./reports)")
        p.add_argument("--grid", type=_parse_grid, default=None,
                       metavar="NX,NY,NZ", help="slab resolution")
        p.add_argument("--t-end", type=float, default=None, dest="t_end",
                       help="final time of each run")
        p.add_argument("--alpha", type=float, default=None,
                       help="perturbation amplitude of the prepared data")
        p.add_argument("--verbose", action="store_true",
                       help="per-run progress on stderr")
        return p

    common(sub.add_parser("run", help="one scenario at a single eps"))
    common(sub.add_parser("sweep", help="full eps sweep with verdicts"))
    p_verify = common(sub.add_parser(
        "verify", help="manufactured solutions and invariant suites"))
    p_verify.add_argument("--levels", type=_parse_levels, default=(16, 32, 64),
                          metavar="N1,N2,...", help="refinement ladder")
    common(sub.add_parser("kernels", help="gravity kernel-limit gaps"))
    return top


def assemble_config(args) -> ScenarioConfig:
    cfg = (config_from_file(args.config) if args.config
           else ScenarioConfig(regime="both"))
    updates = {}
    if args.eps is not None:
        updates["eps_list"] = args.eps
    if args.regime is not None:
        updates["regime"] = args.regime
    if args.grid is not None:
        updates["nx"], updates["ny"], updates["nz"] = args.grid
    if args.t_end is not None:
        updates["t_end"] = args.t_end
    if args.alpha is not None:
        updates["alpha"] = args.alpha
    if args.out is not None:
        updates["out"] = str(args.out)
    return dataclasses.replace(cfg, **updates) if updates else cfg


def resolve_out(args, cfg: ScenarioConfig) -> Path:
    out = Path(args.out) if args.out is not None else Path(cfg.out or "reports")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _print_checks(checks: dict) -> bool:
    ok = True
    for name, good in checks.items():
        print(f"[{'PASS' if good else 'FAIL'}] {name}")
        ok = ok and bool(good)
    return ok


# ---------------------------------------------------------------------------
# verbs


def cmd_run(args) -> int:
    cfg = assemble_config(args)
    eps = cfg.eps_list[0] if args.eps is not None else cfg.eps_list[-1]
    single = dataclasses.replace(cfg, eps_list=(eps,))
    outdir = resolve_out(args, cfg)
    sweep = run_epsilon_sweep(single)
    files = export_sweep(sweep, outdir)
    for run in sweep.runs:
        figure_fields(run, outdir)
    figure_entropy(sweep, outdir)
    ok = _print_checks(check_booleans(sweep)) and sweep.ok
    print(f"reports: {files['summary']}")
    return 0 if ok else 1


def cmd_sweep(args) -> int:
    cfg = assemble_config(args)
    outdir = resolve_out(args, cfg)
    sweep = run_epsilon_sweep(cfg)
    alpha = alpha_scaling_check(cfg)
    extra = {"alpha_scaling": alpha["ok"]}
    files = export_sweep(sweep, outdir, extra_checks=extra)
    render_sweep_figures(sweep, outdir)
    for run in sweep.runs:
        figure_fields(run, outdir)
    checks = check_booleans(sweep)
    checks.update(extra)
    ok = _print_checks(checks) and sweep.ok
    for regime, v in sweep.verdicts.items():
        seq = ", ".join(f"{e:.3e}" for e in v["max_entropy"])
        print(f"{regime}: max entropy per eps = [{seq}], "
              f"ratio {v['entropy_ratio']:.3f}")
    print(f"alpha ratio {alpha['ratio']:.3f} against square law "
          f"{alpha['expected']:.1f}")
    print(f"reports: {files['summary']}")
    return 0 if ok else 1


def cmd_verify(args) -> int:
    cfg = assemble_config(args)
    outdir = resolve_out(args, cfg)
    levels = args.levels
    orders = [manufactured_convergence("hydro2d", levels=levels),
              manufactured_convergence("transport2d", levels=levels)]
    constants = [manufactured_convergence("hydro2d", levels=levels[:1],
                                          constant=True),
                 manufactured_convergence("transport2d", levels=levels[:1],
                                          constant=True)]
    stationary = stationarity_check()
    conserving = specular_conservation_check()
    alpha = alpha_scaling_check(cfg)

    write_series_csv(outdir / "mms_orders.csv", {
        "level": np.asarray(levels, dtype=float),
        "h": np.asarray(orders[0]["h"]),
        "err_hydro2d": np.asarray(orders[0]["errors"]),
        "err_transport2d": np.asarray(orders[1]["errors"]),
    })
    figure_mms(orders, outdir)

    checks = {
        "mms_order_hydro2d": orders[0]["ok"],
        "mms_order_transport2d": orders[1]["ok"],
        "mms_constant_hydro2d": constants[0]["ok"],
        "mms_constant_transport2d": constants[1]["ok"],
        "stationarity": stationary["ok"],
        "specular_conservation": conserving["ok"],
        "alpha_scaling": alpha["ok"],
    }
    write_summary(outdir / "verify_summary.json", {
        "checks": checks,
        "orders": orders,
        "constants": constants,
        "stationarity": stationary,
        "specular_conservation": conserving,
        "alpha_scaling": alpha,
        "ok": all(checks.values()),
    })
    ok = _print_checks(checks)
    print(f"orders: hydro2d {orders[0]['order']:.2f}, "
          f"transport2d {orders[1]['order']:.2f}")
    return 0 if ok else 1


KERNEL_GRID = (8, 8)    # coarse working grid; the v.p. oracle refines 9x


def cmd_kernels(args) -> int:
    cfg = assemble_config(args)
    outdir = resolve_out(args, cfg)
    if args.grid is not None:
        n_h, _, nz = args.grid
    else:
        n_h, nz = KERNEL_GRID
    eps_list = cfg.eps_list
    rows3 = kernel_limit_g3(_kernel_profile, eps_list, G3_SAMPLE_POINTS,
                            n_h=n_h, nz=nz)
    rows4, self_gap = kernel_limit_g4(_kernel_profile, eps_list,
                                      g4_sample_points(n_h), n_h=n_h, nz=nz)
    g3 = [g for _, g in rows3]
    g4 = [g for _, g in rows4]
    write_series_csv(outdir / "kernel_gaps.csv", {
        "eps": np.asarray(eps_list, dtype=float),
        "g3_gap": np.asarray(g3),
        "g4_gap": np.asarray(g4),
    })
    figure_kernel_gaps(rows3, rows4, self_gap, outdir)
    checks = {
        "g3_decreasing": all(b < a for a, b in zip(g3, g3[1:])),
        "g4_decreasing": all(b < a for a, b in zip(g4, g4[1:])),
        "g4_matches_oracle": abs(g4[-1] - self_gap) <= 0.05 * self_gap,
    }
    write_summary(outdir / "kernels_summary.json", {
        "checks": checks,
        "eps": list(eps_list),
        "g3_gap": g3,
        "g4_gap": g4,
        "oracle_self_gap": self_gap,
        "ok": all(checks.values()),
    })
    ok = _print_checks(checks)
    print(f"final G4 gap {g4[-1]:.3e} against oracle self gap {self_gap:.3e}")
    return 0 if ok else 1


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    handler = {"run": cmd_run, "sweep": cmd_sweep,
               "verify": cmd_verify, "kernels": cmd_kernels}[args.verb]
    return handler(args)


if __name__ == "__main__":
    sys.exit(main())
