"""Ensemble sweeps over (n, digits) grids with seeded, order-independent stats.

Each grid point generates ``instances_per_point`` matrices from per-instance
substreams of one master seed, measures the requested observables, and
aggregates mean, standard error, and a 95% normal-approximation interval.
Instances can be measured on a worker pool; the reduce always runs in
instance-index order, so results are bit-identical for any worker count.
"""
from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .backbone import backbone_fraction, enumerate_optimal_tours, has_zero_cost_tour
from .instances import (
    DistanceMatrix,
    InstanceSpec,
    effective_digits,
    empirical_distinct_fraction,
    generate,
    rescale,
)
from .assignment import solve_ap
from .solver import SolveOptions, _solve

MEASURES = (
    "rho",
    "norm_ap_cost",
    "norm_atsp_cost",
    "p_ap_eq_atsp",
    "rel_ap_error",
    "backbone_fraction",
    "log_optima_count",
    "zero_cost_tour_prob",
    "ap_calls",
)

# auxiliary per-measure columns (counts, not averaged observables)
_EXTRA_KEYS = {
    "rel_ap_error": "rel_ap_error_excluded",
    "log_optima_count": "log_optima_count_saturated",
}

_NEED_SOLVE = {
    "norm_atsp_cost",
    "p_ap_eq_atsp",
    "rel_ap_error",
    "ap_calls",
    "backbone_fraction",
}
_NEED_AP = _NEED_SOLVE | {"norm_ap_cost"}


class SweepError(RuntimeError):
    """A sweep instance failed; carries the offending (n, b, index)."""


@dataclass
class SweepConfig:
    sizes: list[int]
    digits_grid: tuple[float, float, float]  # start, stop, step
    instances_per_point: int
    master_seed: int
    measures: tuple[str, ...] = ("rho",)
    optima_cap: int = 1_000_000
    workers: int = 1

    def __post_init__(self) -> None:
        if not self.sizes or any(n < 2 for n in self.sizes):
            raise ValueError("sizes must be a nonempty list of n >= 2")
        start, stop, step = self.digits_grid
        if step <= 0:
            raise ValueError(f"digits step must be positive, got {step}")
        if stop < start:
            raise ValueError(f"digits grid runs backwards: {start}..{stop}")
        if self.instances_per_point < 1:
            raise ValueError("instances_per_point must be >= 1")
        if not self.measures:
            raise ValueError("measures must be nonempty")
        unknown = [m for m in self.measures if m not in MEASURES]
        if unknown:
            raise ValueError(f"unknown measures {unknown}; choose from {MEASURES}")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")


@dataclass
class AggregateRow:
    """Per-(n, b) ensemble statistics: (mean, se, ci95) for every measure."""

    n: int
    b: float
    beta: float
    count: int
    stats: dict[str, tuple[float, float, float]]
    extras: dict[str, float] = field(default_factory=dict)
    rescaled: float | None = None

    def mean(self, measure: str) -> float:
        return self.stats[measure][0]

    def se(self, measure: str) -> float:
        return self.stats[measure][1]

    def ci95(self, measure: str) -> float:
        return self.stats[measure][2]


def grid_values(start: float, stop: float, step: float) -> list[float]:
    """The digit grid start, start+step, ..; includes stop when it lands within 1e-9."""
    count = int(math.floor((stop - start) / step + 1e-9)) + 1
    return [round(start + k * step, 9) for k in range(count)]


def table_digits(n: int) -> float:
    """Digits that pin the rescaled precision (beta - 2) * log10(n) at 2.1."""
    return 2.1 / math.log10(n) + 2.0


def _measure_instance(
    n: int, b: float, master_seed: int, index: int, measures: tuple[str, ...], optima_cap: int
) -> dict[str, float]:
    spec = InstanceSpec(n=n, digits=b, seed=master_seed, index=index)
    d = generate(spec)
    r = spec.range_size
    out: dict[str, float] = {}

    root = solve_ap(d) if any(m in _NEED_AP for m in measures) else None
    solved = (
        _solve(d, SolveOptions(), root_relaxation=root)
        if any(m in _NEED_SOLVE for m in measures)
        else None
    )

    for m in measures:
        if m == "rho":
            out[m] = empirical_distinct_fraction(d).distinct_fraction
        elif m == "norm_ap_cost":
            out[m] = root.cost / (n * (r - 1)) if r > 1 else 0.0
        elif m == "norm_atsp_cost":
            out[m] = solved.cost / (n * (r - 1)) if r > 1 else 0.0
        elif m == "p_ap_eq_atsp":
            out[m] = 1.0 if root.cost == solved.cost else 0.0
        elif m == "rel_ap_error":
            if solved.cost > 0:
                out[m] = (solved.cost - root.cost) / solved.cost
                out[_EXTRA_KEYS[m]] = 0.0
            else:
                out[m] = math.nan  # undefined on zero-cost optima; reported as excluded
                out[_EXTRA_KEYS[m]] = 1.0
        elif m == "backbone_fraction":
            out[m] = backbone_fraction(d, base_root=root, base_result=solved).fraction
        elif m == "log_optima_count":
            enum = enumerate_optimal_tours(d, cap=optima_cap, keep_tours=False)
            out[m] = math.log10(enum.count)
            out[_EXTRA_KEYS[m]] = 1.0 if enum.saturated else 0.0
        elif m == "zero_cost_tour_prob":
            if solved is not None:
                out[m] = 1.0 if solved.cost == 0 else 0.0
            else:
                out[m] = 1.0 if has_zero_cost_tour(d) else 0.0
        elif m == "ap_calls":
            out[m] = float(solved.metrics.ap_calls)
    return out


def _measure_chunk(args) -> list[dict[str, float]]:
    n, b, master_seed, lo, hi, measures, optima_cap = args
    results = []
    for index in range(lo, hi):
        try:
            results.append(_measure_instance(n, b, master_seed, index, measures, optima_cap))
        except Exception as exc:
            raise SweepError(f"instance (n={n}, b={b}, index={index}) failed: {exc}") from exc
    return results


def _aggregate_point(
    n: int, b: float, samples: list[dict[str, float]], measures: tuple[str, ...]
) -> AggregateRow:
    stats: dict[str, tuple[float, float, float]] = {}
    extras: dict[str, float] = {}
    for m in measures:
        values = np.array([s[m] for s in samples], dtype=np.float64)
        finite = values[~np.isnan(values)]
        if finite.size == 0:
            stats[m] = (math.nan, 0.0, 0.0)
        else:
            mean = float(finite.mean())
            se = float(finite.std(ddof=1) / math.sqrt(finite.size)) if finite.size > 1 else 0.0
            stats[m] = (mean, se, 1.96 * se)
        extra = _EXTRA_KEYS.get(m)
        if extra is not None:
            extras[extra] = float(sum(s[extra] for s in samples))
    return AggregateRow(
        n=n, b=b, beta=effective_digits(b, n), count=len(samples), stats=stats, extras=extras
    )


def run_sweep(cfg: SweepConfig) -> list[AggregateRow]:
    """Measure every (n, b) grid point over its instance ensemble.

    Failures abort the whole sweep identifying the offending instance.  The
    output is bit-identical for any ``workers`` setting.
    """
    grid = grid_values(*cfg.digits_grid)
    k = cfg.instances_per_point
    points = [(n, b) for n in cfg.sizes for b in grid]
    rows: list[AggregateRow] = []
    if cfg.workers == 1:
        for n, b in points:
            samples = _measure_chunk((n, b, cfg.master_seed, 0, k, cfg.measures, cfg.optima_cap))
            rows.append(_aggregate_point(n, b, samples, cfg.measures))
        return rows

    chunk = max(1, math.ceil(k / (cfg.workers * 4)))
    tasks = []
    for n, b in points:
        for lo in range(0, k, chunk):
            tasks.append((n, b, cfg.master_seed, lo, min(lo + chunk, k), cfg.measures, cfg.optima_cap))
    with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
        chunks = list(pool.map(_measure_chunk, tasks))
    at = 0
    for n, b in points:
        samples: list[dict[str, float]] = []
        while len(samples) < k:
            samples.extend(chunks[at])
            at += 1
        rows.append(_aggregate_point(n, b, samples, cfg.measures))
    return rows


def rescale_table(rows: list[AggregateRow], beta_c: float) -> list[AggregateRow]:
    """Copy of the rows with the rescaled coordinate (beta - beta_c) * log10(n) attached."""
    return [replace(r, rescaled=rescale(r.beta, r.n, beta_c)) for r in rows]


def normalize_complexity(series: list[float]) -> list[float]:
    """Affine map of one size's mean search-effort series onto [0, 1].

    The minimum maps to 0 and the maximum to 1; a constant series maps to
    all zeros.
    """
    if not series:
        raise ValueError("series must be nonempty")
    lo, hi = min(series), max(series)
    if hi == lo:
        return [0.0 for _ in series]
    return [(v - lo) / (hi - lo) for v in series]


# ---- crossover estimation -------------------------------------------------------


@dataclass
class PairCrossing:
    sizes: tuple[int, int]
    beta: float | None
    spread: float
    degenerate: bool  # curves identical over the whole overlap


@dataclass
class CrossoverEstimate:
    beta_c: float | None
    spread: float
    pairs: list[PairCrossing]
    degenerate: bool


def _sign_change_roots(xs: np.ndarray, diff: np.ndarray) -> list[float]:
    """Crossing points of a piecewise-linear diff, treating zero runs as one touch."""
    roots: list[float] = []
    sign = np.sign(diff)
    idx = 0
    m = len(xs)
    prev_sign = 0
    prev_at = -1
    while idx < m:
        s = sign[idx]
        if s == 0:
            run_start = idx
            while idx < m and sign[idx] == 0:
                idx += 1
            nxt = sign[idx] if idx < m else 0
            if prev_sign != 0 and nxt != 0 and prev_sign != nxt:
                roots.append(float((xs[run_start] + xs[idx - 1]) / 2.0))
            if nxt != 0:
                prev_sign, prev_at = nxt, idx
            idx += 1
            continue
        if prev_sign != 0 and s != prev_sign:
            x0, x1 = xs[prev_at], xs[idx]
            y0, y1 = diff[prev_at], diff[idx]
            roots.append(float(x0 + (x1 - x0) * (-y0) / (y1 - y0)))
        prev_sign, prev_at = s, idx
        idx += 1
    return roots


def estimate_crossover(curves: dict[int, list[tuple[float, float]]]) -> CrossoverEstimate:
    """Where transition curves of different sizes intersect.

    For every size pair, both piecewise-linear curves are evaluated on the
    union of their knots over the overlapping beta range and all crossings
    are averaged into one pair estimate.  Identical curves degenerate to the
    overlap midpoint with a full-range spread.  The overall estimate is the
    mean of the pair estimates; pairs without a crossing are reported but
    excluded from it.
    """
    if len(curves) < 2:
        raise ValueError("need curves for at least two sizes")
    sizes = sorted(curves)
    pairs: list[PairCrossing] = []
    for a in range(len(sizes)):
        for b in range(a + 1, len(sizes)):
            n1, n2 = sizes[a], sizes[b]
            c1 = sorted(curves[n1])
            c2 = sorted(curves[n2])
            x1 = np.array([p[0] for p in c1])
            y1 = np.array([p[1] for p in c1])
            x2 = np.array([p[0] for p in c2])
            y2 = np.array([p[1] for p in c2])
            lo, hi = max(x1[0], x2[0]), min(x1[-1], x2[-1])
            if hi <= lo:
                pairs.append(PairCrossing((n1, n2), None, 0.0, False))
                continue
            knots = np.unique(np.concatenate([x1, x2]))
            knots = knots[(knots >= lo) & (knots <= hi)]
            diff = np.interp(knots, x1, y1) - np.interp(knots, x2, y2)
            if np.all(diff == 0.0):
                pairs.append(PairCrossing((n1, n2), (lo + hi) / 2.0, (hi - lo) / 2.0, True))
                continue
            roots = _sign_change_roots(knots, diff)
            if not roots:
                pairs.append(PairCrossing((n1, n2), None, 0.0, False))
            else:
                mid = float(np.mean(roots))
                spread = max(abs(r - mid) for r in roots)
                pairs.append(PairCrossing((n1, n2), mid, spread, False))
    estimates = [p.beta for p in pairs if p.beta is not None]
    if not estimates:
        return CrossoverEstimate(None, 0.0, pairs, False)
    beta_c = float(np.mean(estimates))
    spread = max(abs(e - beta_c) for e in estimates)
    spread = max([spread] + [p.spread for p in pairs if p.beta is not None])
    return CrossoverEstimate(beta_c, spread, pairs, any(p.degenerate for p in pairs))


def level_crossings(xs: list[float], ys: list[float], level: float) -> list[float]:
    """x positions where the piecewise-linear curve crosses ``level``."""
    return _sign_change_roots(np.asarray(xs, dtype=float), np.asarray(ys, dtype=float) - level)


# ---- CSV interchange -------------------------------------------------------------


def _fmt(x: float) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{x:.6g}"


def csv_header(measures: tuple[str, ...], with_rescaled: bool = False) -> list[str]:
    cols = ["n", "b", "beta", "count"]
    for m in measures:
        cols += [f"{m}_mean", f"{m}_se", f"{m}_ci95"]
        extra = _EXTRA_KEYS.get(m)
        if extra is not None:
            cols.append(extra)
    if with_rescaled:
        cols.append("x")
    return cols


def write_rows_csv(rows: list[AggregateRow], path, measures: tuple[str, ...]) -> None:
    with_rescaled = any(r.rescaled is not None for r in rows)
    with open(path, "w", newline="", encoding="ascii") as fh:
        out = csv.writer(fh)
        out.writerow(csv_header(measures, with_rescaled))
        for r in rows:
            rec = [str(r.n), _fmt(r.b), _fmt(r.beta), str(r.count)]
            for m in measures:
                mean, se, ci = r.stats[m]
                rec += [_fmt(mean), _fmt(se), _fmt(ci)]
                extra = _EXTRA_KEYS.get(m)
                if extra is not None:
                    rec.append(_fmt(r.extras.get(extra, 0.0)))
            if with_rescaled:
                rec.append(_fmt(r.rescaled if r.rescaled is not None else math.nan))
            out.writerow(rec)


def read_rows_csv(path) -> tuple[list[AggregateRow], tuple[str, ...]]:
    with open(path, "r", newline="", encoding="ascii") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[:4] != ["n", "b", "beta", "count"]:
            raise ValueError(f"{path}: not a sweep CSV (bad header)")
        measures = tuple(c[: -len("_mean")] for c in header if c.endswith("_mean"))
        rows: list[AggregateRow] = []
        for rec in reader:
            if not rec:
                continue
            vals = dict(zip(header, rec))
            stats = {
                m: (
                    float(vals[f"{m}_mean"]),
                    float(vals[f"{m}_se"]),
                    float(vals[f"{m}_ci95"]),
                )
                for m in measures
            }
            extras = {
                k: float(vals[k]) for k in _EXTRA_KEYS.values() if k in vals
            }
            rows.append(
                AggregateRow(
                    n=int(vals["n"]),
                    b=float(vals["b"]),
                    beta=float(vals["beta"]),
                    count=int(vals["count"]),
                    stats=stats,
                    extras=extras,
                    rescaled=float(vals["x"]) if "x" in vals else None,
                )
            )
    return rows, measures
