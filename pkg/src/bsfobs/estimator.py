"""Open-loop reconstruction of the biomass from temperature measurements.

Pipeline per sample: differentiate the measured channels, evaluate the two
measurement-side map levels ``v1`` and ``v2``, invert the parabola
``omega1(x1) = v1`` for at most two candidates, and pick one candidate by
temporal continuity (``omega2`` breaks the tie at initialisation).
"""
from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.signal import savgol_filter

from .model import dynamics, jacobian_d, jacobian_x, temp_rate, temp_rate_derivative
from .observability import analysis_interval, condition_margin, omega2, vertex
from .params import LumpedParameters
from .sim import MeasurementSeries, Signals, Trajectory

__all__ = [
    "DifferentiatorSpec",
    "ChannelDerivatives",
    "MeasurementSeries",
    "EstimateSeries",
    "Inversion",
    "differentiate",
    "channel_derivatives",
    "analytic_derivatives",
    "omega1_from_measurements",
    "omega2_from_measurements",
    "invert_omega1",
    "disambiguate",
    "reconstruct",
    "error_metrics",
]


@dataclass(frozen=True)
class DifferentiatorSpec:
    """Local least-squares polynomial (Savitzky-Golay) differentiator."""

    window: int = 11
    order: int = 3

    def __post_init__(self):
        if self.window < 5 or self.window % 2 == 0:
            raise ValueError(f"window must be an odd integer >= 5 (got {self.window})")
        if not 2 <= self.order < self.window:
            raise ValueError(f"polynomial order must satisfy 2 <= order < window (got {self.order})")

    @property
    def half(self) -> int:
        return self.window // 2


def differentiate(values, dt: float, spec: DifferentiatorSpec = DifferentiatorSpec()):
    """First and second derivative of a uniformly sampled channel.

    Returns ``(d1, d2, reliable)``.  Interior samples use the centred window;
    the ``window // 2`` samples at each end come from the end-window fit and
    are marked unreliable.
    """
    values = np.asarray(values, dtype=float)
    if len(values) < spec.window:
        raise ValueError(f"series has {len(values)} samples, shorter than the window {spec.window}")
    d1 = savgol_filter(values, spec.window, spec.order, deriv=1, delta=dt, mode="interp")
    d2 = savgol_filter(values, spec.window, spec.order, deriv=2, delta=dt, mode="interp")
    reliable = np.ones(len(values), dtype=bool)
    reliable[: spec.half] = False
    reliable[len(values) - spec.half:] = False
    return d1, d2, reliable


@dataclass(frozen=True)
class ChannelDerivatives:
    y1_dot: np.ndarray
    y1_ddot: np.ndarray
    y2_dot: np.ndarray
    d_dot: np.ndarray
    reliable: np.ndarray


def channel_derivatives(meas: MeasurementSeries, spec: DifferentiatorSpec = DifferentiatorSpec()) -> ChannelDerivatives:
    dt = meas.dt
    y1d, y1dd, ok = differentiate(meas.y1, dt, spec)
    y2d, _, _ = differentiate(meas.y2, dt, spec)
    dd, _, _ = differentiate(meas.d, dt, spec)
    return ChannelDerivatives(y1d, y1dd, y2d, dd, ok)


def analytic_derivatives(traj: Trajectory, signals: Signals, params: LumpedParameters) -> ChannelDerivatives:
    """Exact output derivatives along a simulated trajectory, from the vector field.

    ``d2y1/dt2 = grad f2 . f + (df2/dd) dd/dt``; the medium equation does not
    depend on the inputs.
    """
    n = len(traj)
    y1d = np.empty(n)
    y1dd = np.empty(n)
    y2d = np.empty(n)
    dd = np.asarray(signals.d.derivative(traj.t), dtype=float) * np.ones(n)
    for k in range(n):
        x, u, d = traj.x[k], traj.u[k], float(traj.d[k])
        f = dynamics(x, u, d, params)
        y1d[k], y2d[k] = f[1], f[2]
        y1dd[k] = jacobian_x(x, u, d, params)[1] @ f + jacobian_d(x, u, params)[1] * dd[k]
    return ChannelDerivatives(y1d, y1dd, y2d, dd, np.ones(n, dtype=bool))


def omega1_from_measurements(y1, y1_dot, y2, d, params: LumpedParameters):
    p = params
    return (y1_dot + p.k4 * y1 - p.k5 * y2 + p.k8 * d) / temp_rate(y1, p.logan)


def omega2_from_measurements(y1, y1_dot, y1_ddot, y2, y2_dot, d, d_dot, params: LumpedParameters):
    p = params
    r = temp_rate(y1, p.logan)
    r_dot = temp_rate_derivative(y1, p.logan) * y1_dot
    first = y1_dot + p.k4 * y1 - p.k5 * y2 + p.k8 * d
    second = y1_ddot + p.k4 * y1_dot - p.k5 * y2_dot + p.k8 * d_dot
    return second / r**2 - first * r_dot / r**3


@dataclass(frozen=True)
class Inversion:
    candidates: tuple[float, ...]
    flag: str  # "two_roots", "double_root", "negative_level", "above_vertex"


def invert_omega1(v1: float, params: LumpedParameters, rtol: float = 1e-12) -> Inversion:
    """Solve ``(k6/k2) x^2 - (k6+k7) x + v1 = 0`` on the analysis interval.

    Levels within ``rtol`` of the maximum are treated as the double root.
    """
    p = params
    x_star, top = vertex(p)
    if v1 < 0:
        return Inversion((0.0,), "negative_level")
    if v1 > top * (1.0 + rtol):
        return Inversion((), "above_vertex")
    k67 = p.k6 + p.k7
    disc = k67**2 - 4.0 * (p.k6 / p.k2) * v1
    if disc <= 0 or v1 >= top:
        return Inversion((x_star,), "double_root")
    hi = p.k2 / (2.0 * p.k6) * (k67 + math.sqrt(disc))
    lo = (p.k2 * v1 / p.k6) / hi
    upper = analysis_interval(p)[1]
    return Inversion((lo, min(hi, upper)), "two_roots")


def disambiguate(candidates, v2: float, previous: float | None, params: LumpedParameters):
    """Pick one candidate; returns ``(estimate, rule, margin)``.

    With history the candidate nearest the previous estimate wins
    (``"continuity"``); without it the candidate whose ``omega2`` is closest
    to ``v2`` wins (``"omega2"``).  ``margin`` is the gap between the best and
    the runner-up score (``inf`` for a single candidate).  An empty candidate
    set holds the previous estimate.
    """
    candidates = tuple(candidates)
    if not candidates:
        if previous is None:
            raise ValueError("no candidates and no previous estimate to hold")
        return previous, "hold_last", math.nan
    if len(candidates) == 1:
        return candidates[0], "single", math.inf
    if previous is not None:
        scores = [abs(c - previous) for c in candidates]
        rule = "continuity"
    else:
        scores = [abs(float(omega2(c, params)) - v2) for c in candidates]
        rule = "omega2"
    order = sorted(range(len(candidates)), key=scores.__getitem__)
    return candidates[order[0]], rule, scores[order[1]] - scores[order[0]]


@dataclass(frozen=True)
class EstimateSeries:
    t: np.ndarray
    x1_est: np.ndarray
    cand_lo: np.ndarray  # nan when absent
    cand_hi: np.ndarray
    v1: np.ndarray
    v2: np.ndarray
    margin: np.ndarray
    flags: tuple[tuple[str, ...], ...]
    reliable: np.ndarray

    def __len__(self) -> int:
        return len(self.t)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "x1_est", "cand_lo", "cand_hi", "v1", "v2", "flags"])
            for k in range(len(self.t)):
                w.writerow([repr(float(self.t[k])), repr(float(self.x1_est[k])), repr(float(self.cand_lo[k])),
                            repr(float(self.cand_hi[k])), repr(float(self.v1[k])), repr(float(self.v2[k])),
                            ";".join(self.flags[k])])


def reconstruct(meas: MeasurementSeries, params: LumpedParameters,
                spec: DifferentiatorSpec = DifferentiatorSpec(),
                derivatives: ChannelDerivatives | None = None) -> EstimateSeries:
    """Estimate the biomass at every sample of ``meas``.

    ``derivatives`` replaces the numerical differentiator (e.g. exact
    derivatives from a replayed scenario).  The continuity rule starts at the
    first reliable sample and runs forward; leading edge samples are filled
    backwards from there.
    """
    meas.check()
    n = len(meas)
    der = derivatives if derivatives is not None else channel_derivatives(meas, spec)
    v1 = omega1_from_measurements(meas.y1, der.y1_dot, meas.y2, meas.d, params)
    v2 = omega2_from_measurements(meas.y1, der.y1_dot, der.y1_ddot, meas.y2, der.y2_dot, meas.d, der.d_dot, params)

    global_flags: tuple[str, ...] = ()
    if condition_margin(params) < 0:
        warnings.warn("injectivity condition fails for these parameters; estimates may pick the wrong branch",
                      RuntimeWarning, stacklevel=2)
        global_flags = ("condition_fails",)

    x_star = vertex(params)[0]
    est = np.empty(n)
    lo = np.full(n, np.nan)
    hi = np.full(n, np.nan)
    margin = np.full(n, np.nan)
    flags: list[tuple[str, ...]] = [()] * n

    def step(k: int, previous: float | None) -> float:
        inv = invert_omega1(float(v1[k]), params)
        tokens = [*global_flags, inv.flag]
        cands = inv.candidates
        if inv.flag == "above_vertex":
            cands = (x_star,)
            tokens.append("clamped_vertex")
        elif inv.flag == "negative_level":
            tokens.append("clamped_zero")
        if len(cands) == 2:
            lo[k], hi[k] = cands
        elif len(cands) == 1:
            lo[k] = hi[k] = cands[0]
        value, rule, gap = disambiguate(cands, float(v2[k]), previous, params)
        tokens.append(rule)
        if not der.reliable[k]:
            tokens.append("edge")
        est[k] = max(value, 0.0)
        margin[k] = gap
        flags[k] = tuple(tokens)
        return est[k]

    reliable_idx = np.flatnonzero(der.reliable)
    start = int(reliable_idx[0]) if len(reliable_idx) else 0
    prev = step(start, None)
    for k in range(start + 1, n):
        prev = step(k, prev)
    prev = est[start]
    for k in range(start - 1, -1, -1):
        prev = step(k, prev)

    return EstimateSeries(meas.t.copy(), est, lo, hi, np.asarray(v1), np.asarray(v2), margin, tuple(flags),
                          der.reliable.copy())


@dataclass(frozen=True)
class ErrorMetrics:
    max_abs: float
    max_rel: float
    rmse: float
    n: int


def error_metrics(estimates, truth, mask=None) -> ErrorMetrics:
    """Error statistics over the samples selected by ``mask``.

    ``estimates`` may be an :class:`EstimateSeries`, whose reliable mask is
    used when ``mask`` is not given.  Relative errors skip samples where the
    truth is zero.
    """
    if isinstance(estimates, EstimateSeries):
        if mask is None:
            mask = estimates.reliable
        estimates = estimates.x1_est
    est = np.asarray(estimates, dtype=float)
    ref = np.asarray(truth, dtype=float)
    if est.shape != ref.shape:
        raise ValueError(f"misaligned series: {est.shape} vs {ref.shape}")
    if mask is None:
        mask = np.ones(est.shape, dtype=bool)
    err = np.abs(est - ref)[mask]
    ref = ref[mask]
    if err.size == 0:
        return ErrorMetrics(math.nan, math.nan, math.nan, 0)
    nz = ref != 0
    max_rel = float(np.max(err[nz] / np.abs(ref[nz]))) if nz.any() else math.nan
    return ErrorMetrics(float(err.max()), max_rel, float(np.sqrt(np.mean(err**2))), int(err.size))
