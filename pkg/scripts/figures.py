"""Regenerate the reference sweeps as CSV (and PNG when matplotlib is available).

    python3 scripts/figures.py [--out figures]

* ``bsc_theta.csv``: perfect-privacy bounds ``U01 = h(theta)`` and
  ``U02 = 2 theta`` for the binary symmetric channel, in bits.
* ``matrix1_eps.csv`` / ``matrix2_eps.csv``: LP lower bounds and upper bounds
  under the unweighted and weighted per-letter criteria, in nats, for ``eps``
  up to the validity threshold ``eps2``.
"""

from __future__ import annotations

import argparse
import csv
from pathlib import Path

import numpy as np

from privfunnel.bounds import h0_report
from privfunnel.geometry import build_context
from privfunnel.instances import bsc, matrix1, matrix2
from privfunnel.lpapprox import solve_g0, solve_g_l, solve_g_wl


def bsc_sweep() -> list[dict]:
    rows = []
    for theta in np.linspace(0.01, 0.49, 49):
        r = h0_report(bsc(float(theta)), "bits")
        rows.append({"theta": float(theta), "U01": r["U01"], "U02": r["U02"]})
    return rows


def eps_sweep(make, n: int = 25) -> list[dict]:
    j = make()
    ctx = build_context(j)
    g0 = solve_g0(j).utility_lb
    rows = []
    for eps in np.linspace(0.0, ctx.eps2, n, endpoint=False):
        eps = float(eps)
        gl = solve_g_l(j, eps, ctx=ctx)
        gwl = solve_g_wl(j, eps, ctx=ctx)
        rows.append(
            {
                "eps": eps,
                "g0": g0,
                "gl_lb": gl.utility_lb,
                "gl_approx": gl.approx_utility,
                "U1_gl": gl.upper_bounds.get("U1_gl", float("nan")),
                "U2_gl": gl.upper_bounds.get("U2_gl", float("nan")),
                "gwl_lb": gwl.utility_lb,
                "regime": gl.error_bound.regime,
            }
        )
    return rows


def write_csv(rows: list[dict], path: Path) -> None:
    with path.open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        w.writerows(rows)


def plot(rows: list[dict], x: str, series: list[str], path: Path, ylabel: str) -> None:
    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        return
    fig, ax = plt.subplots(figsize=(5, 3.5))
    xs = [r[x] for r in rows]
    for s in series:
        ax.plot(xs, [r[s] for r in rows], label=s)
    ax.set_xlabel(x)
    ax.set_ylabel(ylabel)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="figures")
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    rows = bsc_sweep()
    write_csv(rows, out / "bsc_theta.csv")
    plot(rows, "theta", ["U01", "U02"], out / "bsc_theta.png", "bits")

    for name, make in (("matrix1", matrix1), ("matrix2", matrix2)):
        rows = eps_sweep(make)
        write_csv(rows, out / f"{name}_eps.csv")
        plot(rows, "eps", ["g0", "gl_lb", "gwl_lb", "U1_gl", "U2_gl"], out / f"{name}_eps.png", "nats")
    print(f"wrote sweeps to {out}/")


if __name__ == "__main__":
    main()
