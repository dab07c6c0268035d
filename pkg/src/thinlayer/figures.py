"""Figure rendering for the report path.

Every plot is written next to the delimited output it is drawn from; the
CSVs stay the canonical record and none of the figures feed back into any
verdict.  The Agg backend is forced so rendering works headless.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)
import numpy as np  # noqa: E402


def _finish(fig, path: Path) -> Path:
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def figure_entropy(sweep, outdir) -> list:
    """Relative entropy against time for every eps, one file per regime."""
    outdir = Path(outdir)
    paths = []
    regimes = sorted({r.regime for r in sweep.runs})
    for regime in regimes:
        runs = [r for r in sweep.runs if r.regime == regime]
        fig, ax = plt.subplots(figsize=(6.4, 4.2))
        for run in runs:
            t = run.series["t"]
            line, = ax.plot(t, run.series["E_total"],
                            label=f"eps = {run.eps:g}")
            ax.plot(t, run.series["envelope"], ls="--", lw=0.9,
                    color=line.get_color(), alpha=0.7)
        ax.set_yscale("log")
        ax.set_xlabel("t")
        ax.set_ylabel("relative entropy")
        ax.set_title(f"{regime}: entropy (solid) and envelope (dashed)")
        ax.legend(fontsize=8)
        paths.append(_finish(fig, outdir / f"entropy_{regime}.png"))
    return paths


def figure_sweep(sweep, outdir) -> Path:
    """max_t entropy and time-integrated W12 gap against eps, per regime."""
    outdir = Path(outdir)
    fig, axes = plt.subplots(1, 2, figsize=(9.0, 3.8))
    regimes = sorted({r.regime for r in sweep.runs})
    for regime in regimes:
        runs = sorted((r for r in sweep.runs if r.regime == regime),
                      key=lambda r: -r.eps)
        eps = [r.eps for r in runs]
        axes[0].loglog(eps, [r.scalars["max_entropy"] for r in runs],
                       marker="o", label=regime)
        axes[1].loglog(eps, [r.scalars["w12_integral"] for r in runs],
                       marker="s", label=regime)
    axes[0].set_xlabel("eps")
    axes[0].set_ylabel("max entropy")
    axes[1].set_xlabel("eps")
    axes[1].set_ylabel("integrated W12 gap")
    for ax in axes:
        ax.invert_xaxis()
        ax.legend(fontsize=8)
    return _finish(fig, outdir / "sweep_trends.png")


def figure_fields(run, outdir) -> Path:
    """Final densities: slab midplane, flat target, and their difference."""
    outdir = Path(outdir)
    rho = run.fields["rho_slab"]
    r = run.fields["r_flat"]
    mid = rho[:, :, rho.shape[2] // 2]
    fig, axes = plt.subplots(1, 3, figsize=(11.0, 3.4))
    for ax, (f, title) in zip(axes, [(mid, "slab midplane density"),
                                     (r, "flat density"),
                                     (mid - r, "difference")]):
        im = ax.imshow(f.T, origin="lower", cmap="viridis")
        ax.set_title(title, fontsize=9)
        fig.colorbar(im, ax=ax, shrink=0.85)
    base = f"{run.regime}_eps{run.eps:g}"
    return _finish(fig, outdir / f"fields_{base}.png")


def figure_kernel_gaps(rows3, rows4, self_gap, outdir) -> Path:
    """Gravity kernel-limit gap sequences against eps."""
    outdir = Path(outdir)
    fig, ax = plt.subplots(figsize=(5.6, 4.0))
    e3 = [e for e, _ in rows3]
    g3 = [g for _, g in rows3]
    e4 = [e for e, _ in rows4]
    g4 = [g for _, g in rows4]
    ax.loglog(e3, g3, marker="o", label="slab kernel vs v.p. limit")
    ax.loglog(e4, g4, marker="s", label="layer average vs v.p. limit")
    ax.axhline(self_gap, ls=":", color="k",
               label="v.p. self-convergence gap")
    ax.set_xlabel("eps")
    ax.set_ylabel("sup gap")
    ax.invert_xaxis()
    ax.legend(fontsize=8)
    return _finish(fig, outdir / "kernel_gaps.png")


def figure_mms(results, outdir) -> Path:
    """Manufactured-solution errors against h with the fitted order."""
    outdir = Path(outdir)
    fig, ax = plt.subplots(figsize=(5.6, 4.0))
    for res in results:
        label = f"{res['solver']} (order {res['order']:.2f})"
        ax.loglog(res["h"], res["errors"], marker="o", label=label)
    ax.set_xlabel("h")
    ax.set_ylabel("L2 error")
    ax.legend(fontsize=8)
    return _finish(fig, outdir / "mms_convergence.png")


def render_sweep_figures(sweep, outdir) -> list:
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    paths = figure_entropy(sweep, outdir)
    paths.append(figure_sweep(sweep, outdir))
    for run in sweep.runs:
        paths.append(figure_fields(run, outdir))
    return paths
