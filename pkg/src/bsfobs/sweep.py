"""Random parameter sweeps comparing the analytic verdict with both grid oracles."""
from __future__ import annotations

import csv
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .observability import check_theorem1, condition_margin, curve_trace, injectivity_scan
from .params import LUMPED_KEYS, LumpedParameters, nominal_parameters

LOG10_RANGE = (-2.0, 2.0)  # each k_i log-uniform on [0.01, 100]
NEAR_THRESHOLD = 0.01  # |margin| <= NEAR_THRESHOLD * k6 is excluded from agreement


def random_parameter_sets(n: int, seed: int) -> list[LumpedParameters]:
    """``n`` lumped sets with every ``k_i`` drawn log-uniformly; Logan constants nominal."""
    rng = np.random.default_rng(seed)
    draws = 10.0 ** rng.uniform(*LOG10_RANGE, size=(n, len(LUMPED_KEYS)))
    base = nominal_parameters()
    return [base.with_(**dict(zip(LUMPED_KEYS, map(float, row)))) for row in draws]


def off_threshold_sets(n: int, seed: int) -> list[LumpedParameters]:
    """First ``n`` random sets (same stream as above) that are not near the threshold."""
    rng = np.random.default_rng(seed)
    base = nominal_parameters()
    out: list[LumpedParameters] = []
    while len(out) < n:
        row = 10.0 ** rng.uniform(*LOG10_RANGE, size=len(LUMPED_KEYS))
        p = base.with_(**dict(zip(LUMPED_KEYS, map(float, row))))
        if not is_near_threshold(p):
            out.append(p)
    return out


def is_near_threshold(p: LumpedParameters) -> bool:
    return abs(condition_margin(p)) <= NEAR_THRESHOLD * p.k6


@dataclass(frozen=True)
class SweepRow:
    index: int
    params: LumpedParameters
    margin: float
    condition: bool
    scan: bool
    curve: bool
    near_threshold: bool

    @property
    def agree(self) -> bool:
        return self.condition == self.scan == self.curve


def evaluate(p: LumpedParameters, n_grid: int = 10_000, index: int = 0) -> SweepRow:
    report = check_theorem1(p)
    scan = injectivity_scan(p, n_grid).injective
    curve = not curve_trace(p, n_grid).self_intersects
    return SweepRow(index, p, report.condition_margin, report.condition_holds, scan, curve, is_near_threshold(p))


def _evaluate_args(args):
    return evaluate(*args)


def run_sweep(sets: list[LumpedParameters], n_grid: int = 10_000, workers: int = 1) -> list[SweepRow]:
    jobs = [(p, n_grid, i) for i, p in enumerate(sets)]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(workers) as pool:
            rows = list(pool.map(_evaluate_args, jobs, chunksize=32))
    else:
        rows = [_evaluate_args(j) for j in jobs]
    return sorted(rows, key=lambda r: r.index)


SWEEP_COLUMNS = ["index", *LUMPED_KEYS, "margin", "condition_injective", "scan_injective",
                 "curve_injective", "near_threshold", "agree"]


def write_sweep_csv(rows: list[SweepRow], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SWEEP_COLUMNS)
        for r in rows:
            w.writerow([r.index, *(repr(getattr(r.params, k)) for k in LUMPED_KEYS), repr(r.margin),
                        int(r.condition), int(r.scan), int(r.curve), int(r.near_threshold), int(r.agree)])
