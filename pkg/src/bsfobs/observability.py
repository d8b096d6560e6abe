"""Global observability of the biomass state.

Differentiating the medium temperature once and twice gives two scalar
functions of the biomass alone,

    omega1(x1) = (k6 (1 - x1/k2) + k7) x1
    omega2(x1) = (k6 + k7 - 2 k6 x1 / k2) (k1 - k3 - k1 x1 / k2) x1

both of which can also be computed from measured signals (see
:mod:`bsfobs.estimator`).  The biomass is recoverable exactly when
``x1 -> (omega1, omega2)`` is injective, which for positive constants holds
iff ``k7 >= (1 - 2 k3/k1) k6``.  This module checks the inequality, builds
explicit colliding pairs when it fails, and provides two independent numerical
checks: a grid collision scan and a polyline self-intersection test.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass
from fractions import Fraction
from typing import Any

import numpy as np

from .model import dynamics
from .params import LumpedParameters

RANK_RTOL = 1e-8


class ContractError(ValueError):
    """Operation called outside its precondition."""


def omega1(x1, params: LumpedParameters):
    x1 = np.asarray(x1, dtype=float)
    return (params.k6 * (1.0 - x1 / params.k2) + params.k7) * x1


def omega1_slope(x1, params: LumpedParameters):
    return params.k6 + params.k7 - 2.0 * params.k6 / params.k2 * np.asarray(x1, dtype=float)


def omega2(x1, params: LumpedParameters):
    p = params
    x1 = np.asarray(x1, dtype=float)
    return (p.k6 + p.k7 - 2.0 * (p.k6 / p.k2) * x1) * (p.k1 - p.k3 - (p.k1 / p.k2) * x1) * x1


def vertex(params: LumpedParameters) -> tuple[float, float]:
    """Abscissa and value of the maximum of ``omega1``."""
    p = params
    k67 = p.k6 + p.k7
    return k67 * p.k2 / (2.0 * p.k6), k67**2 * p.k2 / (4.0 * p.k6)


def analysis_interval(params: LumpedParameters) -> tuple[float, float]:
    """``[0, k2 (1 + k7/k6)]``, between the two roots of ``omega1``.

    Beyond the upper end ``omega1`` is negative and injective on its own.
    """
    return 0.0, params.k2 * (1.0 + params.k7 / params.k6)


def condition_margin(params: LumpedParameters) -> float:
    """``k7 - (1 - 2 k3/k1) k6``; the map is injective iff this is >= 0."""
    return params.k7 - (1.0 - 2.0 * params.k3 / params.k1) * params.k6


@dataclass(frozen=True)
class NoninjectivityCertificate:
    nu_star: float
    delta: float
    k67: float
    x1_pair: tuple[float, float]
    omega1_pair: tuple[float, float]
    omega2_pair: tuple[float, float]
    # exact relative mismatch at the emitted floats
    omega1_residual: float
    omega2_residual: float


@dataclass(frozen=True)
class ObservabilityReport:
    condition_holds: bool
    condition_margin: float
    x1_star: float
    omega1_max: float
    omega1_roots: tuple[float, float]
    m: int = 2
    certificate: NoninjectivityCertificate | None = None

    def to_dict(self) -> dict[str, Any]:
        out = asdict(self)
        out["omega1_roots"] = list(self.omega1_roots)
        if self.certificate is not None:
            for key in ("x1_pair", "omega1_pair", "omega2_pair"):
                out["certificate"][key] = list(out["certificate"][key])
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def check_theorem1(params: LumpedParameters) -> ObservabilityReport:
    """Decide global injectivity of ``(omega1, omega2)`` from the constants.

    Equality in the condition counts as injective.
    """
    margin = condition_margin(params)
    x_star, top = vertex(params)
    cert = noninjective_pair(params) if margin < 0 else None
    return ObservabilityReport(
        condition_holds=margin >= 0,
        condition_margin=margin,
        x1_star=x_star,
        omega1_max=top,
        omega1_roots=analysis_interval(params),
        certificate=cert,
    )


def _exact_omegas(x: float, p: LumpedParameters) -> tuple[Fraction, Fraction]:
    """``omega1`` and ``omega2`` at float ``x`` in exact rational arithmetic."""
    X = Fraction(x)
    k1, k2, k3, k6, k7 = (Fraction(v) for v in (p.k1, p.k2, p.k3, p.k6, p.k7))
    w1 = (k6 * (1 - X / k2) + k7) * X
    w2 = (k6 + k7 - 2 * k6 / k2 * X) * (k1 - k3 - k1 / k2 * X) * X
    return w1, w2


def noninjective_pair(params: LumpedParameters, rtol1: float = 1e-12, rtol2: float = 1e-9) -> NoninjectivityCertificate:
    """Two distinct biomass values with equal ``(omega1, omega2)``.

    The pair is the two roots of ``omega1(x) = nu*`` where
    ``nu* = (k2 / 2k6) (k7 + k6 k3 / k1) (k6 + k7)`` is the only level at
    which ``omega2`` also agrees.  Residuals are evaluated exactly at the
    returned floats.  Raises :class:`ContractError` when the injectivity
    condition holds, and ``ArithmeticError`` if the pair misses the tolerances.
    """
    p = params
    margin = condition_margin(p)
    if margin >= 0:
        raise ContractError(f"injectivity condition holds (margin {margin:+.6g}); no colliding pair exists")
    k67 = p.k6 + p.k7
    nu = (p.k2 / (2.0 * p.k6)) * (p.k7 + p.k6 * p.k3 / p.k1) * k67
    # (k6+k7)^2 - 4 (k6/k2) nu simplifies to -(k6+k7) * margin; this form avoids cancellation
    delta = -k67 * margin
    root = math.sqrt(delta)
    hi = p.k2 / (2.0 * p.k6) * (k67 + root)
    lo = (p.k2 * nu / p.k6) / hi  # product of roots, stable for the small root

    # omega1 is ill-conditioned at the large root; match it with one exact
    # Newton step on the well-conditioned small root
    w1_hi, w2_hi = _exact_omegas(hi, p)
    w1_lo, _ = _exact_omegas(lo, p)
    slope_lo = Fraction(p.k6 + p.k7) - 2 * Fraction(p.k6) / Fraction(p.k2) * Fraction(lo)
    if slope_lo > 0:
        lo = float(Fraction(lo) - (w1_lo - w1_hi) / slope_lo)
    w1_lo, w2_lo = _exact_omegas(lo, p)

    r1 = float(abs(w1_lo - w1_hi) / max(abs(w1_lo), abs(w1_hi)))
    r2 = float(abs(w2_lo - w2_hi) / max(abs(w2_lo), abs(w2_hi)))
    if not (lo < hi and r1 <= rtol1 and r2 <= rtol2):
        raise ArithmeticError(f"colliding pair ({lo!r}, {hi!r}) misses tolerance: omega1 {r1:.3g}, omega2 {r2:.3g}")
    return NoninjectivityCertificate(
        nu_star=nu, delta=delta, k67=k67, x1_pair=(lo, hi),
        omega1_pair=(float(w1_lo), float(w1_hi)), omega2_pair=(float(w2_lo), float(w2_hi)),
        omega1_residual=r1, omega2_residual=r2,
    )


# ---------------------------------------------------------------------------
# grid oracles


@dataclass(frozen=True)
class ScanResult:
    injective: bool
    pair: tuple[float, float] | None  # colliding samples with the best match
    n_collisions: int


def _window_pairs(keys_sorted: np.ndarray, lo_vals: np.ndarray, hi_vals: np.ndarray):
    """All index pairs ``(i, j)``, ``i < j``, with ``keys_sorted[j]`` in ``[lo_i, hi_i]``.

    ``keys_sorted`` must be ascending; ``lo_vals <= keys_sorted <= hi_vals``.
    """
    n = len(keys_sorted)
    end = np.searchsorted(keys_sorted, hi_vals, side="right")
    start = np.arange(n) + 1
    counts = np.maximum(end - start, 0)
    i = np.repeat(np.arange(n), counts)
    offsets = np.arange(counts.sum()) - np.repeat(np.cumsum(counts) - counts, counts)
    j = np.repeat(start, counts) + offsets
    return i, j


def _local_steps(w: np.ndarray) -> np.ndarray:
    """Largest change to either neighbour at each sample."""
    step = np.abs(np.diff(w))
    out = np.empty_like(w)
    out[0], out[-1] = step[0], step[-1]
    out[1:-1] = np.maximum(step[:-1], step[1:])
    return out


def injectivity_scan(params: LumpedParameters, n_grid: int = 10_000, tol: float = 1.0,
                     separation: float = 0.05) -> ScanResult:
    """Brute-force collision search for ``(omega1, omega2)``.

    Samples ``n_grid`` equispaced points of the analysis interval.  Samples
    ``i`` and ``j`` collide when, for both components, their values differ by
    at most ``tol * (step_i + step_j) / 2``, where ``step`` is the local
    change to the neighbouring samples, and the samples are more than
    ``separation`` times the interval length apart.  Any collision means not
    injective.  Near the threshold the colliding pair approaches the vertex and
    the grid can no longer resolve it.
    """
    if n_grid < 100:
        raise ValueError("n_grid must be at least 100")
    a, b = analysis_interval(params)
    x = np.linspace(a, b, n_grid)
    w1 = omega1(x, params)
    w2 = omega2(x, params)
    e1 = 0.5 * tol * _local_steps(w1)
    e2 = 0.5 * tol * _local_steps(w2)
    min_sep = separation * (b - a)

    order = np.argsort(w1, kind="stable")
    s1 = w1[order]
    reach = e1[order] + e1.max()
    i, j = _window_pairs(s1, s1 - reach, s1 + reach)
    ii, jj = order[i], order[j]
    hit = (
        (np.abs(w1[ii] - w1[jj]) <= e1[ii] + e1[jj])
        & (np.abs(w2[ii] - w2[jj]) <= e2[ii] + e2[jj])
        & (np.abs(x[ii] - x[jj]) > min_sep)
    )
    n_hit = int(hit.sum())
    if n_hit == 0:
        return ScanResult(True, None, 0)
    ii, jj = ii[hit], jj[hit]
    score = np.abs(w1[ii] - w1[jj]) / (e1[ii] + e1[jj]) + np.abs(w2[ii] - w2[jj]) / (e2[ii] + e2[jj])
    k = int(np.argmin(score))
    pair = tuple(sorted((float(x[ii[k]]), float(x[jj[k]]))))
    return ScanResult(False, pair, n_hit)


@dataclass(frozen=True)
class CurveTrace:
    x1: np.ndarray
    omega1: np.ndarray
    omega2: np.ndarray
    self_intersects: bool
    # one entry per crossing: (x1 on first branch, x1 on second branch, omega1, omega2)
    intersections: tuple[tuple[float, float, float, float], ...]

    @property
    def locus(self) -> tuple[float, float, float, float] | None:
        return self.intersections[0] if self.intersections else None

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x1", "omega1", "omega2"])
            for row in zip(self.x1, self.omega1, self.omega2):
                w.writerow([repr(float(v)) for v in row])


def _cross(ax, ay, bx, by):
    return ax * by - ay * bx


def polyline_self_intersections(px: np.ndarray, py: np.ndarray):
    """Proper crossings between non-adjacent segments of a polyline.

    Returns ``(i, j, s, t)`` arrays: segment ``i`` (from point ``i`` to
    ``i+1``) meets segment ``j > i + 1`` at parameters ``s`` and ``t``.
    Candidate pairs come from a sweep over the segments' x-extents, so the
    cost is proportional to the number of overlapping boxes.
    """
    x0, x1 = px[:-1], px[1:]
    y0, y1 = py[:-1], py[1:]
    xmin, xmax = np.minimum(x0, x1), np.maximum(x0, x1)
    ymin, ymax = np.minimum(y0, y1), np.maximum(y0, y1)

    order = np.argsort(xmin, kind="stable")
    sorted_min = xmin[order]
    # pairs whose x-extents overlap: j sorted after i with xmin_j <= xmax_i
    a, b = _window_pairs(sorted_min, sorted_min, xmax[order])
    i, j = order[a], order[b]
    swap = i > j
    i, j = np.where(swap, j, i), np.where(swap, i, j)
    keep = (j > i + 1) & (ymin[i] <= ymax[j]) & (ymin[j] <= ymax[i])
    i, j = i[keep], j[keep]

    rx, ry = x1[i] - x0[i], y1[i] - y0[i]
    sx, sy = x1[j] - x0[j], y1[j] - y0[j]
    qx, qy = x0[j] - x0[i], y0[j] - y0[i]
    denom = _cross(rx, ry, sx, sy)
    with np.errstate(divide="ignore", invalid="ignore"):
        s = _cross(qx, qy, sx, sy) / denom
        t = _cross(qx, qy, rx, ry) / denom
    ok = (denom != 0) & (s >= 0) & (s <= 1) & (t >= 0) & (t <= 1)
    return i[ok], j[ok], s[ok], t[ok]


def curve_trace(params: LumpedParameters, n_grid: int = 10_000) -> CurveTrace:
    """Polyline of ``(omega1, omega2)`` over the analysis interval and its crossings."""
    if n_grid < 100:
        raise ValueError("n_grid must be at least 100")
    a, b = analysis_interval(params)
    x = np.linspace(a, b, n_grid)
    w1 = omega1(x, params)
    w2 = omega2(x, params)
    i, j, s, t = polyline_self_intersections(w1, w2)
    hits = []
    for ii, jj, ss, tt in zip(i, j, s, t):
        xa = x[ii] + ss * (x[ii + 1] - x[ii])
        xb = x[jj] + tt * (x[jj + 1] - x[jj])
        hits.append((float(xa), float(xb),
                     float(w1[ii] + ss * (w1[ii + 1] - w1[ii])),
                     float(w2[ii] + ss * (w2[ii + 1] - w2[ii]))))
    hits.sort()
    return CurveTrace(x, w1, w2, bool(hits), tuple(hits))


# ---------------------------------------------------------------------------
# local check


def output_derivative_map(x, u, d, params: LumpedParameters) -> np.ndarray:
    """``(y1, y2, dy1/dt, dy2/dt)`` as a function of the state."""
    f = dynamics(x, u, d, params)
    return np.array([x[1], x[2], f[1], f[2]], dtype=float)


def output_map_jacobian(x, u, d, params: LumpedParameters, fd_step: float = 1e-4) -> np.ndarray:
    """Central-difference Jacobian (4x3) of :func:`output_derivative_map`."""
    x = np.asarray(x, dtype=float)
    jac = np.empty((4, 3))
    for k in range(3):
        h = fd_step * max(1.0, abs(x[k]))
        e = np.zeros(3)
        e[k] = h
        jac[:, k] = (output_derivative_map(x + e, u, d, params) - output_derivative_map(x - e, u, d, params)) / (2 * h)
    return jac


def local_rank_check(x, u, d, params: LumpedParameters, fd_step: float = 1e-4,
                     rtol: float = RANK_RTOL) -> tuple[int, np.ndarray]:
    """Numerical rank of the output-derivative map's Jacobian.

    Returns the rank (singular values above ``rtol`` times the largest) and
    the singular values themselves.
    """
    sv = np.linalg.svd(output_map_jacobian(x, u, d, params, fd_step), compute_uv=False)
    rank = int(np.sum(sv > rtol * sv[0])) if sv[0] > 0 else 0
    return rank, sv
