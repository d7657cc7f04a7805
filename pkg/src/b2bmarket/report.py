"""Figure rendering for simulation runs and theorem sweeps.

Everything upstream is exact rational arithmetic; this module is the one
place values are cast to float, at the edge, for plotting.  Figures are
written as PNG files next to the delimited output.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
from fractions import Fraction

from . import equilibrium as eq
from .punishment import Limited, Threshold


def render_run_figures(result, outdir: str) -> list[str]:
    """Rating trajectories and per-round sales for one scenario run."""
    import os

    n_sellers = result.config.market.n_sellers
    rounds = [o.t for o in result.outcomes]
    paths = []

    fig, ax = plt.subplots(figsize=(8, 4.5))
    for s in range(n_sellers):
        series = [float(o.ratings[s]) for o in result.outcomes]
        ax.plot(rounds, series, label=f"seller {s}", linewidth=1.6)
    ax.set_xlabel("round")
    ax.set_ylabel("public rating")
    ax.set_ylim(-0.02, 1.02)
    ax.legend(loc="best", fontsize=8)
    ax.set_title("Published ratings per round")
    fig.tight_layout()
    path = os.path.join(outdir, "ratings.png")
    fig.savefig(path, dpi=120)
    plt.close(fig)
    paths.append(path)

    fig, ax = plt.subplots(figsize=(8, 4.5))
    for s in range(n_sellers):
        counts = []
        for o in result.outcomes:
            counts.append(sum(1 for p in o.purchases if p.seller == s))
        ax.plot(rounds, counts, label=f"seller {s}", linewidth=1.6)
    ax.set_xlabel("round")
    ax.set_ylabel("sales")
    ax.legend(loc="best", fontsize=8)
    ax.set_title("Sales per seller per round")
    fig.tight_layout()
    path = os.path.join(outdir, "sales.png")
    fig.savefig(path, dpi=120)
    plt.close(fig)
    paths.append(path)
    return paths


def render_theorem_figures(outdir: str, n_buyers: int = 3, n_sellers: int = 3) -> list[str]:
    """Bound curves behind the sweep verdicts."""
    import os

    sigmas = [Fraction(n, 1000) for n in range(510, 991, 10)]
    xs = [float(s) for s in sigmas]
    paths = []

    fig, ax = plt.subplots(figsize=(8, 4.5))
    for k in (1, 2, 4, 8):
        uppers, lowers = [], []
        for sigma in sigmas:
            upper, lower = eq.periodic_bounds(Fraction(1), sigma, k, n_buyers)
            uppers.append(float(upper))
            lowers.append(float(lower))
        line, = ax.plot(xs, lowers, linewidth=1.6, label=f"floor, k={k}")
        ax.plot(xs, uppers, linewidth=1.2, linestyle="--", color=line.get_color(),
                label=f"ceiling, k={k}")
    ax.set_xlabel("seller discount")
    ax.set_ylabel("cost bound (p = 1)")
    ax.set_title("Periodic-strategy cost ceiling vs floor (ceiling always below)")
    ax.legend(loc="upper left", fontsize=7, ncol=2)
    fig.tight_layout()
    path = os.path.join(outdir, "periodic_bounds.png")
    fig.savefig(path, dpi=120)
    plt.close(fig)
    paths.append(path)

    fig, ax = plt.subplots(figsize=(8, 4.5))
    for alpha in (1, 2, 5, 10):
        diffs = [
            float(eq.compare_punishments(Fraction(1), sigma, n_buyers, n_sellers, alpha))
            for sigma in sigmas
        ]
        ax.plot(xs, diffs, linewidth=1.6, label=f"alpha={alpha}")
    ax.axhline(0.0, color="black", linewidth=0.8)
    ax.set_xlabel("seller discount")
    ax.set_ylabel("threshold bound - limited bound")
    ax.set_title("Market-wide vs per-buyer punishment headroom")
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    path = os.path.join(outdir, "punishment_comparison.png")
    fig.savefig(path, dpi=120)
    plt.close(fig)
    paths.append(path)

    fig, ax = plt.subplots(figsize=(8, 4.5))
    for policy, label in (
        (Limited(2), "limited, alpha=2"),
        (Threshold(Fraction(2, 5), 2), "threshold, alpha=2"),
    ):
        bounds = [
            float(eq.always_low_bound(policy, Fraction(1), sigma, n_buyers, n_sellers,
                                 threshold_variant="statement"))
            for sigma in sigmas
        ]
        ax.plot(xs, bounds, linewidth=1.6, label=label)
    ax.plot(xs, xs, linewidth=1.0, linestyle=":", color="gray",
            label="always-high ceiling (sigma p)")
    ax.set_xlabel("seller discount")
    ax.set_ylabel("cost level (p = 1)")
    ax.set_title("Regime boundaries: always-high below dotted, always-low above solid")
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    path = os.path.join(outdir, "regime_bounds.png")
    fig.savefig(path, dpi=120)
    plt.close(fig)
    paths.append(path)
    return paths
