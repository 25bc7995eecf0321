import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import grid_rd, hb
from rdlattice.distortion import DistortionError, DistortionMeasure
from rdlattice.rdfinite import (blahut_arimoto, converse_cj, converse_cj_rate,
                                critical_distortion, d_tilted_information, dual_constraint,
                                slb_equality_test, tilted_info_law)
from rdlattice.sources import FiniteSource
from rdlattice.tilted import classical_slb

BIN = FiniteSource.binary(0.11)
SYM3 = FiniteSource((0.5, 0.3, 0.2), DistortionMeasure.symbol_error(3))


def _check_certificate(src, sol):
    c = dual_constraint(sol, src.distortion)
    assert np.all(c <= 1 + 1e-9)
    support = sol.output_pmf > 1e-8
    assert np.allclose(c[support], 1.0, atol=1e-6)
    assert float(sol.pmf @ sol.tilted_info) == pytest.approx(sol.rate_nats, abs=1e-9)
    assert sol.dual_gap >= 0


def test_binary_closed_form():
    sol = blahut_arimoto(BIN, 0.05)
    assert sol.rate_nats == pytest.approx(hb(0.11) - hb(0.05), abs=1e-9)
    assert sol.rate_nats == pytest.approx(0.14798, abs=5e-5)
    _check_certificate(BIN, sol)


def test_zero_rate_at_source_bias():
    sol = blahut_arimoto(FiniteSource.binary(0.5), 0.5)
    assert sol.rate_nats == 0.0 and "zero_rate" in sol.flags
    assert np.all(sol.tilted_info == 0.0)


def test_symbol_error_example_and_grid_oracle():
    sol = blahut_arimoto(SYM3, 0.1)
    expected = SYM3.entropy - hb(0.1) - 0.1 * math.log(2)
    assert sol.rate_nats == pytest.approx(expected, abs=1e-9)
    _check_certificate(SYM3, sol)
    coarse = grid_rd(SYM3.pmf, SYM3.distortion.as_matrix(), 0.1, 10)
    assert coarse >= sol.rate_nats - 1e-9


@pytest.mark.parametrize("d", [0.02, 0.06, 0.2, 0.3])
def test_binary_grid_oracle_upper_bounds(d):
    sol = blahut_arimoto(BIN, d)
    grid = grid_rd(BIN.pmf, BIN.distortion.as_matrix(), d, 60)
    assert grid >= sol.rate_nats - 1e-9
    assert grid - sol.rate_nats < 0.02


def test_unbalanced_matrix_source():
    src = FiniteSource((0.6, 0.4), DistortionMeasure.matrix([[0, 1, 0.3], [2, 0, 0.4]]))
    sol = blahut_arimoto(src, 0.15)
    _check_certificate(src, sol)
    grid = grid_rd(src.pmf, src.distortion.as_matrix(), 0.15, 40)
    assert sol.rate_nats <= grid + 1e-9


def test_tilted_information_examples():
    sol = blahut_arimoto(FiniteSource.binary(0.5), 0.1)
    for x in (0, 1):
        assert d_tilted_information(sol, x) == pytest.approx(math.log(2) - hb(0.1), abs=1e-9)
    sol = blahut_arimoto(BIN, 0.05)
    assert d_tilted_information(sol, 1) == pytest.approx(math.log(1 / 0.11) - hb(0.05), abs=1e-8)


def test_slb_equality_examples():
    res = slb_equality_test(BIN, 0.05)
    q = (0.11 - 0.05) / (1 - 0.1)
    assert res.holds and res.y_star_pmf[1] == pytest.approx(q, abs=1e-12)
    bad = slb_equality_test(BIN, 0.2)
    assert not bad.holds and bad.witness < 0
    eq = FiniteSource((0.25,) * 4, DistortionMeasure.symbol_error(4))
    res = slb_equality_test(eq, 0.3)
    assert res.holds and np.allclose(res.y_star_pmf, 0.25)
    with pytest.raises(DistortionError):
        slb_equality_test(FiniteSource((0.5, 0.5), DistortionMeasure.matrix([[0, 1], [2, 0]])), 0.1)


def test_critical_distortion_examples():
    assert critical_distortion(SYM3).d_c == pytest.approx(0.4, abs=1e-6)
    assert critical_distortion(BIN).d_c == pytest.approx(0.11, abs=1e-6)
    eq = FiniteSource((0.25,) * 4, DistortionMeasure.symbol_error(4))
    res = critical_distortion(eq)
    assert res.d_c == pytest.approx(0.75, abs=1e-6) and res.verified
    with pytest.raises(DistortionError):
        critical_distortion(FiniteSource((0.5, 0.5), DistortionMeasure.matrix([[0, 1], [2, 0]])))


def test_ba_equals_slb_below_critical_distortion():
    for d in np.linspace(0.02, 0.39, 8):
        ba = blahut_arimoto(SYM3, d).rate_nats
        slb = classical_slb(SYM3, SYM3.distortion, d).slb_rate
        assert abs(ba - slb) <= 1e-6
    # above d_c the bound is strict
    assert blahut_arimoto(SYM3, 0.45).rate_nats > classical_slb(SYM3, SYM3.distortion, 0.45).slb_rate + 1e-6


@settings(max_examples=15, deadline=None)
@given(st.floats(0.01, 0.5), st.floats(0.01, 0.3))
def test_rd_curve_nonincreasing_and_convex(p, d):
    src = FiniteSource.binary(min(p, 0.5))
    d2 = d + 0.05
    r1 = blahut_arimoto(src, d).rate_nats
    r2 = blahut_arimoto(src, d2).rate_nats
    rm = blahut_arimoto(src, (d + d2) / 2).rate_nats
    assert r2 <= r1 + 1e-9
    assert rm <= 0.5 * (r1 + r2) + 1e-9


def test_converse_cj_examples():
    sol = blahut_arimoto(FiniteSource.binary(0.5), 0.1)
    res = converse_cj(FiniteSource.binary(0.5), sol, 10, log_m=10 * sol.rate_nats)
    assert res.vacuous and res.epsilon_lb == 0.0
    sol = blahut_arimoto(BIN, 0.05)
    assert converse_cj(BIN, sol, 20, M=2 ** 20).vacuous
    V = BIN.varentropy
    from rdlattice.infomath import Qinv
    log_m = 20 * (sol.rate_nats + math.sqrt(V / 20) * Qinv(0.1))
    res = converse_cj(BIN, sol, 20, log_m=log_m)
    assert 0 < res.epsilon_lb <= 0.1 and res.exact


def test_tilted_info_law_matches_binomial():
    from scipy import stats

    sol = blahut_arimoto(BIN, 0.05)
    s, w, exact = tilted_info_law(sol, 30)
    assert exact and w.sum() == pytest.approx(1.0)
    k = np.round((s - 30 * sol.tilted_info[0]) / (sol.tilted_info[1] - sol.tilted_info[0])).astype(int)
    assert np.allclose(w, stats.binom.pmf(k, 30, 0.11))


def test_converse_rate_decreases_with_eps():
    sol = blahut_arimoto(BIN, 0.05)
    rates = [converse_cj_rate(sol, 100, e) for e in (0.01, 0.1, 0.5)]
    assert rates[0] >= rates[1] >= rates[2]
