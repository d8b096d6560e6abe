import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bsfobs.observability import (
    ContractError,
    analysis_interval,
    check_theorem1,
    condition_margin,
    curve_trace,
    injectivity_scan,
    local_rank_check,
    noninjective_pair,
    omega1,
    omega2,
    polyline_self_intersections,
    vertex,
)
from bsfobs.params import nominal_parameters
from bsfobs.sweep import is_near_threshold, off_threshold_sets

positive = st.floats(0.01, 100.0)


@st.composite
def param_sets(draw):
    ks = {k: draw(positive) for k in ("k1", "k2", "k3", "k6", "k7")}
    return nominal_parameters().with_(**ks)


class TestOmega1:
    def test_roots(self, nominal):
        assert omega1(0.0, nominal) == 0.0
        assert omega1(2.0, nominal) == 0.0
        assert analysis_interval(nominal) == (0.0, 2.0)

    def test_nominal_closed_form(self, nominal):
        x = np.linspace(0, 2, 21)
        np.testing.assert_allclose(omega1(x, nominal), (2 - x) * x, rtol=1e-15, atol=1e-15)

    def test_vertex_by_grid_maximization(self, nominal):
        x = np.linspace(0, 2, 100_001)
        w = omega1(x, nominal)
        assert x[np.argmax(w)] == pytest.approx(1.0, abs=2e-5)
        assert w.max() == pytest.approx(1.0, rel=1e-9)
        assert vertex(nominal) == (1.0, 1.0)

    @settings(max_examples=100)
    @given(param_sets())
    def test_downward_parabola(self, p):
        a, b = analysis_interval(p)
        x = np.linspace(a, b, 50)
        second = np.diff(omega1(x, p), 2)
        assert np.all(second < 0)
        assert second / (x[1] - x[0]) ** 2 == pytest.approx(-2 * p.k6 / p.k2, rel=1e-6)

    @settings(max_examples=100)
    @given(param_sets())
    def test_roots_and_vertex(self, p):
        a, b = analysis_interval(p)
        assert abs(omega1(b, p)) <= 1e-12 * vertex(p)[1]
        assert vertex(p)[0] == pytest.approx((a + b) / 2, rel=1e-14)


class TestOmega2:
    def test_zeros(self, nominal):
        assert omega2(0.0, nominal) == 0.0
        assert omega2(vertex(nominal)[0], nominal) == 0.0
        assert omega2(0.75, nominal) == 0.0

    @settings(max_examples=100)
    @given(param_sets())
    def test_three_roots_when_k1_exceeds_k3(self, p):
        if p.k1 <= p.k3:
            return
        scale = max(abs(omega2(np.linspace(*analysis_interval(p), 101), p)).max(), 1e-300)
        for r in (0.0, vertex(p)[0], p.k2 * (1 - p.k3 / p.k1)):
            assert abs(omega2(r, p)) <= 1e-12 * scale


class TestInjectivityCondition:
    def test_nominal_holds(self, nominal):
        r = check_theorem1(nominal)
        assert r.condition_holds and r.condition_margin == 0.5 and r.certificate is None
        assert r.m == 2 and r.omega1_roots == (0.0, 2.0)

    def test_failing_set(self, failing):
        r = check_theorem1(failing)
        assert not r.condition_holds
        assert r.condition_margin == pytest.approx(-0.1, rel=1e-14)
        assert r.certificate is not None

    @settings(max_examples=100)
    @given(param_sets())
    def test_large_maintenance_ratio_always_holds(self, p):
        p = p.with_(k3=p.k1 * 0.5 + p.k3)
        assert check_theorem1(p).condition_holds

    def test_boundary_counts_as_injective(self, nominal):
        p = nominal.with_(k1=4.0, k3=1.0, k6=1.0, k7=0.5)
        assert condition_margin(p) == 0.0
        assert check_theorem1(p).condition_holds

    @settings(max_examples=100)
    @given(param_sets())
    def test_report_invariants(self, p):
        r = check_theorem1(p)
        assert r.condition_holds == (r.condition_margin >= 0)
        assert (r.certificate is not None) == (r.condition_margin < 0)

    def test_json(self, failing):
        import json

        data = json.loads(check_theorem1(failing).to_json())
        assert set(data) == {"condition_holds", "condition_margin", "x1_star", "omega1_max", "omega1_roots", "m",
                             "certificate"}
        assert data["certificate"]["x1_pair"][0] == pytest.approx(0.5129, abs=1e-4)


class TestCertificate:
    def test_worked_instance(self, failing):
        c = noninjective_pair(failing)
        assert c.nu_star == pytest.approx(0.455, rel=1e-14)
        assert c.delta == pytest.approx(0.14, rel=1e-13)
        assert c.k67 == pytest.approx(1.4)
        # oracle: roots of the quadratic by the textbook formula, then direct evaluation
        s = math.sqrt(1.4**2 - 4 * 0.455)
        assert c.x1_pair == pytest.approx(((1.4 - s) / 2, (1.4 + s) / 2), rel=1e-12)
        assert c.x1_pair == pytest.approx((0.5129, 0.8871), abs=1e-4)
        w1 = omega1(np.array(c.x1_pair), failing)
        w2 = omega2(np.array(c.x1_pair), failing)
        assert w1 == pytest.approx([0.455, 0.455], rel=1e-12)
        assert abs(w2[0] - w2[1]) <= 1e-9 * abs(w2[0])

    def test_contract(self, nominal):
        with pytest.raises(ContractError):
            noninjective_pair(nominal)

    def test_pair_collapses_near_threshold(self, failing):
        # threshold for k1=4, k3=1, k6=1 is k7 = 0.5
        gaps = []
        for k7 in (0.1, 0.3, 0.45, 0.49, 0.499, 0.4999):
            lo, hi = noninjective_pair(failing.with_(k7=k7)).x1_pair
            gaps.append(hi - lo)
        assert all(a > b for a, b in zip(gaps, gaps[1:]))
        assert gaps[-1] < 0.02
        x_star = vertex(failing.with_(k7=0.4999))[0]
        assert abs((lo + hi) / 2 - x_star) < 1e-12


class TestScan:
    def test_nominal_injective(self, nominal):
        assert injectivity_scan(nominal, 10_000).injective

    def test_failing_brackets_pair(self, failing):
        res = injectivity_scan(failing, 10_000)
        assert not res.injective
        lo, hi = res.pair
        h = 1.4 / 9999
        assert lo == pytest.approx(0.5129, abs=3 * h) and hi == pytest.approx(0.8871, abs=3 * h)

    def test_grid_minimum(self, nominal):
        with pytest.raises(ValueError):
            injectivity_scan(nominal, 99)


class TestCurve:
    def test_nominal_simple(self, nominal):
        assert not curve_trace(nominal, 10_000).self_intersects

    def test_failing_locus(self, failing):
        tr = curve_trace(failing, 10_000)
        assert tr.self_intersects
        xa, xb, w1, w2 = tr.locus
        c = noninjective_pair(failing)
        assert (xa, xb) == pytest.approx(c.x1_pair, abs=1e-5)
        assert (w1, w2) == pytest.approx((0.455, float(omega2(c.x1_pair[0], failing))), abs=1e-5)
        assert w2 == pytest.approx(0.1820, abs=1e-4)

    def test_square_polyline(self):
        # a figure-eight crosses once, a square spiral never
        t = np.linspace(0, 2 * np.pi, 400)
        i, *_ = polyline_self_intersections(np.sin(t), np.sin(t) * np.cos(t))
        assert len(i) >= 1
        r = np.linspace(1, 2, 400)
        i, *_ = polyline_self_intersections(r * np.cos(3 * t), r * np.sin(3 * t))
        assert len(i) == 0

    def test_csv(self, tmp_path, nominal):
        curve_trace(nominal, 200).to_csv(tmp_path / "c.csv")
        lines = (tmp_path / "c.csv").read_text().splitlines()
        assert lines[0] == "x1,omega1,omega2" and len(lines) == 201


def test_three_way_agreement_small_sweep():
    for p in off_threshold_sets(150, seed=99):
        verdict = check_theorem1(p).condition_holds
        assert injectivity_scan(p, 10_000).injective == verdict
        assert (not curve_trace(p, 10_000).self_intersects) == verdict
        assert not is_near_threshold(p)


class TestLocalRank:
    def test_interior_full_rank(self, nominal):
        rng = np.random.default_rng(5)
        for _ in range(20):
            x1 = rng.uniform(0.05, 0.9)
            rank, _ = local_rank_check((x1, rng.uniform(10, 35), rng.uniform(10, 35)), (0.1, 0.5), 20.0, nominal)
            assert rank == 3

    def test_vertex_drops_rank(self, nominal):
        rank, sv = local_rank_check((vertex(nominal)[0], 25.0, 22.0), (0.1, 0.5), 20.0, nominal)
        assert rank == 2
        assert sv[2] < 1e-8 * sv[0]

    @settings(max_examples=30)
    @given(st.floats(0, 2), st.floats(0, 40), st.floats(0, 40))
    def test_rank_bounded(self, x1, x2, x3):
        rank, _ = local_rank_check((x1, x2, x3), (0.1, 0.5), 20.0, nominal_parameters())
        assert 0 <= rank <= 3
