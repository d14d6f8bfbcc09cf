"""Figure rendering for sweep output: one PNG per measure, plus collapses.

Reads the same aggregate rows the CSV carries, so figures can be produced
alongside a sweep or later from the file.  Each measure gets a per-size
transition plot against the effective digits, and a rescaled variant when a
critical point is supplied.
"""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .experiments import AggregateRow
from .instances import rescale

_AXIS_LABEL = "effective digits b / log10(n)"


def _series(rows: list[AggregateRow], measure: str, beta_c: float | None):
    by_size: dict[int, list[AggregateRow]] = {}
    for r in rows:
        by_size.setdefault(r.n, []).append(r)
    for n, group in sorted(by_size.items()):
        group = sorted(group, key=lambda r: r.beta)
        if beta_c is None:
            xs = [r.beta for r in group]
        else:
            xs = [rescale(r.beta, r.n, beta_c) for r in group]
        ys = [r.mean(measure) for r in group]
        errs = [r.ci95(measure) for r in group]
        yield n, xs, ys, errs


def _render(rows, measure, beta_c, path: Path) -> None:
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for n, xs, ys, errs in _series(rows, measure, beta_c):
        ax.errorbar(xs, ys, yerr=errs, marker="o", markersize=3, capsize=2, label=f"n = {n}")
    if beta_c is None:
        ax.set_xlabel(_AXIS_LABEL)
    else:
        ax.set_xlabel(f"(beta - {beta_c:g}) log10(n)")
    ax.set_ylabel(measure)
    if measure == "ap_calls":
        ax.set_yscale("log")
    ax.legend()
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_sweep_figures(
    rows: list[AggregateRow],
    measures: tuple[str, ...],
    out_dir,
    beta_c: float | None = None,
) -> list[Path]:
    """Write '<measure>_vs_beta.png' per measure, plus '<measure>_rescaled.png' with beta_c."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    for m in measures:
        path = out / f"{m}_vs_beta.png"
        _render(rows, m, None, path)
        written.append(path)
        if beta_c is not None:
            path = out / f"{m}_rescaled.png"
            _render(rows, m, beta_c, path)
            written.append(path)
    return written
