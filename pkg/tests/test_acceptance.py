"""End-to-end acceptance checks; each prints one PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py`` to see the summary lines.
"""
import time
from fractions import Fraction

import numpy as np
import pytest

from bsfobs.estimator import DifferentiatorSpec, analytic_derivatives, error_metrics, omega1_from_measurements, \
    omega2_from_measurements, reconstruct
from bsfobs.model import dynamics, jacobian_x, temp_rate, temp_rate_derivative
from bsfobs.observability import analysis_interval, check_theorem1, curve_trace, injectivity_scan, local_rank_check, \
    noninjective_pair, omega1, omega2, vertex
from bsfobs.params import failing_parameters, nominal_parameters
from bsfobs.sim import Constant, MeasurementSeries, Signals, Sinusoid, integrate
from bsfobs.sweep import off_threshold_sets

P = nominal_parameters()
SWEEP_SEED = 2024


@pytest.fixture
def report(capsys):
    def emit(number, ok, detail):
        with capsys.disabled():
            print(f"\n{'PASS' if ok else 'FAIL'} criterion {number}: {detail}")
        return ok

    return emit


@pytest.fixture(scope="module")
def sweep_sets():
    return off_threshold_sets(1000, SWEEP_SEED)


def _exact_pair_diffs(p, a, b):
    """Relative gaps of both map components at ``a`` and ``b``, in rational arithmetic."""
    k1, k2, k3, k6, k7 = (Fraction(getattr(p, k)) for k in ("k1", "k2", "k3", "k6", "k7"))

    def comps(x):
        x = Fraction(x)
        w1 = (k6 * (1 - x / k2) + k7) * x
        w2 = (k6 + k7 - 2 * k6 * x / k2) * (k1 - k3 - k1 * x / k2) * x
        return w1, w2

    (a1, a2), (b1, b2) = comps(a), comps(b)
    return float(abs(a1 - b1) / abs(a1)), float(abs(a2 - b2) / abs(a2))


def test_condition_matches_both_oracles(sweep_sets, report):
    t0 = time.perf_counter()
    bad = []
    for i, p in enumerate(sweep_sets):
        verdict = check_theorem1(p).condition_holds
        scan = injectivity_scan(p, 10_000).injective
        curve = not curve_trace(p, 10_000).self_intersects
        if not verdict == scan == curve:
            bad.append(i)
    elapsed = time.perf_counter() - t0
    n_fail = sum(not check_theorem1(p).condition_holds for p in sweep_sets)
    ok = report(1, not bad, f"{1000 - len(bad)}/1000 agree ({n_fail} violating), {elapsed:.1f} s")
    assert ok, f"disagreeing set indices: {bad[:20]}"


def test_certificates_are_valid(sweep_sets, report):
    violating = [p for p in sweep_sets if not check_theorem1(p).condition_holds]
    worst1 = worst2 = 0.0
    for p in violating:
        c = noninjective_pair(p)
        assert c.x1_pair[0] != c.x1_pair[1]
        d1, d2 = _exact_pair_diffs(p, *c.x1_pair)
        worst1, worst2 = max(worst1, d1), max(worst2, d2)

    f = failing_parameters()
    c = noninjective_pair(f)
    lo, hi = c.x1_pair
    worked = (abs(lo - 0.5129) < 5e-5 and abs(hi - 0.8871) < 5e-5 and abs(c.nu_star - 0.455) < 1e-12
              and abs(c.delta - 0.14) < 1e-12)
    w1 = omega1(np.array(c.x1_pair), f)
    w2 = omega2(np.array(c.x1_pair), f)
    worked &= abs(w1[0] - w1[1]) <= 1e-12 * abs(w1[0]) and abs(w2[0] - w2[1]) <= 1e-9 * abs(w2[0])

    ok = report(2, worst1 <= 1e-12 and worst2 <= 1e-9 and worked,
                f"{len(violating)} certificates, worst rel gap omega1 {worst1:.1e}, omega2 {worst2:.1e}; "
                f"worked pair ({lo:.4f}, {hi:.4f}), nu* {c.nu_star:.6g}, delta {c.delta:.6g}")
    assert ok


def test_measurement_side_identity(report):
    signals = Signals(Constant(0.1), Sinusoid(0.5, 0.3, 12.0), Sinusoid(20.0, 4.0, 24.0))
    traj = integrate((0.05, 20.0, 20.0), signals, P, 200.0, 0.01)
    der = analytic_derivatives(traj, signals, P)
    y1, y2, x1 = traj.x[:, 1], traj.x[:, 2], traj.x[:, 0]
    v1 = omega1_from_measurements(y1, der.y1_dot, y2, traj.d, P)
    v2 = omega2_from_measurements(y1, der.y1_dot, der.y1_ddot, y2, der.y2_dot, traj.d, der.d_dot, P)
    w1, w2 = omega1(x1, P), omega2(x1, P)

    rel1 = np.max(np.abs(v1 - w1) / np.abs(w1))
    # omega2 changes sign along the trajectory; normalise by its range on the analysis interval
    grid = np.linspace(*analysis_interval(P), 10_001)
    scale2 = np.maximum(np.abs(w2), np.abs(omega2(grid, P)).max())
    rel2 = np.max(np.abs(v2 - w2) / scale2)
    away = np.abs(w2) > 1e-3
    rel2_pointwise = np.max(np.abs(v2 - w2)[away] / np.abs(w2[away]))

    ok = report(3, rel1 <= 1e-9 and rel2 <= 1e-9 and rel2_pointwise <= 1e-9,
                f"v1 rel {rel1:.1e}, v2 range-rel {rel2:.1e}, v2 rel where |omega2|>1e-3 {rel2_pointwise:.1e}, "
                f"{len(x1)} samples")
    assert ok


def test_noiseless_reconstruction(report):
    t0 = time.perf_counter()
    traj = integrate((0.05, 20.0, 20.0), Signals.constant(0.1, 0.5, 20.0), P, 200.0, 0.01)
    est = reconstruct(MeasurementSeries.from_trajectory(traj), P, DifferentiatorSpec(11, 3))
    elapsed = time.perf_counter() - t0
    m = error_metrics(est, traj.x[:, 0])
    ok = report(4, m.max_rel <= 1e-3 and elapsed < 10.0,
                f"max rel error {m.max_rel:.2e} over {m.n} interior samples, {elapsed:.2f} s")
    assert ok


def test_integrator_order(report):
    signals = Signals(Constant(0.1), Sinusoid(0.5, 0.3, 12.0), Sinusoid(20.0, 4.0, 24.0))
    x0 = (0.05, 20.0, 20.0)
    dt = 0.1
    ref = integrate(x0, signals, P, 10.0, dt / 8).x[-1]
    e1 = np.abs(integrate(x0, signals, P, 10.0, dt).x[-1] - ref).max()
    e2 = np.abs(integrate(x0, signals, P, 10.0, dt / 2).x[-1] - ref).max()
    ratio = e1 / e2
    ok = report(5, 14 <= ratio <= 18, f"endpoint error ratio {ratio:.2f} (dt {dt} -> {dt / 2})")
    assert ok


def test_derivatives_match_finite_differences(report):
    rng = np.random.default_rng(6)
    worst_r = worst_j = 0.0
    for _ in range(100):
        T = rng.uniform(0.0, 45.0)
        h = 1e-5 * max(1.0, abs(T))
        fd = (temp_rate(T + h, P.logan) - temp_rate(T - h, P.logan)) / (2 * h)
        exact = temp_rate_derivative(T, P.logan)
        worst_r = max(worst_r, abs(fd - exact) / abs(exact))

        x = np.array([rng.uniform(0, P.k2), rng.uniform(0, 45), rng.uniform(0, 45)])
        u = (rng.uniform(0, 1), rng.uniform(0, 1))
        d = rng.uniform(0, 40)
        J = jacobian_x(x, u, d, P)
        fdJ = np.empty((3, 3))
        for j in range(3):
            e = np.zeros(3)
            e[j] = 1e-5 * max(1.0, abs(x[j]))
            fdJ[:, j] = (dynamics(x + e, u, d, P) - dynamics(x - e, u, d, P)) / (2 * e[j])
        # entries are compared against the matrix scale so exact zeros do not divide
        worst_j = max(worst_j, np.abs(J - fdJ).max() / np.abs(J).max())
    ok = report(6, worst_r <= 1e-6 and worst_j <= 1e-6,
                f"worst rel error: rate derivative {worst_r:.1e}, jacobian {worst_j:.1e} (100 points)")
    assert ok


def test_forward_invariance(report):
    rng = np.random.default_rng(7)
    x1_starts = [0.0, P.k2, *rng.uniform(0, P.k2, 98)]
    lo, hi = np.inf, -np.inf
    for x10 in x1_starts:
        signals = Signals(Sinusoid(rng.uniform(0, 1), rng.uniform(0, 0.5), rng.uniform(2, 48), rng.uniform(0, 6.3)),
                          Sinusoid(rng.uniform(0, 1), rng.uniform(0, 1), rng.uniform(2, 48)),
                          Sinusoid(rng.uniform(10, 30), rng.uniform(0, 10), rng.uniform(2, 48)))
        x0 = (x10, rng.uniform(5, 40), rng.uniform(5, 40))
        x1 = integrate(x0, signals, P, 50.0, 0.05).x[:, 0]
        lo, hi = min(lo, x1.min()), max(hi, x1.max())
    ok = report(7, lo >= -1e-9 and hi <= P.k2 + 1e-6, f"x1 range over 100 scenarios [{lo:.3g}, {hi:.10g}]")
    assert ok


def test_vertex_value(report):
    from bsfobs.sweep import random_parameter_sets

    worst = 0.0
    mismatched = 0
    for p in random_parameter_sets(100, 8):
        # an even point count keeps the vertex off the grid
        grid = np.linspace(*analysis_interval(p), 10_000)
        top = omega1(grid, p).max()
        x_star, value = vertex(p)
        worst = max(worst, abs(value - top) / top)
        alternative = (p.k6 + 3 * p.k7) * (p.k6 + p.k7) * p.k2 / (4 * p.k6)
        mismatched += abs(alternative - top) / top > 1e-6
    ok = report(8, worst <= 1e-6 and mismatched == 100,
                f"vertex vs grid max worst rel {worst:.1e}; (k6+3k7)(k6+k7)k2/(4k6) off on {mismatched}/100 sets")
    assert ok


def test_local_rank(report):
    rng = np.random.default_rng(9)
    x_star = vertex(P)[0]
    ranks = []
    for _ in range(100):
        x = (rng.uniform(0.01, 0.99) * P.k2, rng.uniform(10, 35), rng.uniform(10, 35))
        ranks.append(local_rank_check(x, (rng.uniform(0, 1), rng.uniform(0, 1)), rng.uniform(10, 30), P)[0])
    rank_v, sv = local_rank_check((x_star, 25.0, 22.0), (0.1, 0.5), 20.0, P)
    full = sum(r == 3 for r in ranks)
    ok = report(9, full == 100 and rank_v == 2,
                f"rank 3 at {full}/100 interior states; rank {rank_v} at x1* = {x_star:g} "
                f"(sigma3/sigma1 = {sv[2] / sv[0]:.1e})")
    assert ok
