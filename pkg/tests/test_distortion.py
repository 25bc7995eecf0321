import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from rdlattice.distortion import (DistortionError, DistortionMeasure, ball_log_volume,
                                  covering_radius_for, difference_profile, evaluate,
                                  is_balanced, radius_from_profile, radius_of_distortion)


def test_examples():
    assert evaluate(DistortionMeasure.mse(), [1.0, 2.0], [0.0, 0.0]) == 2.5
    assert evaluate(DistortionMeasure.hamming(), [0, 1, 1, 0], [0, 0, 1, 1]) == 0.5
    lp = DistortionMeasure.lp_pow(math.inf, 1.0)
    assert evaluate(lp, [0.3, -0.7], [0.0, 0.0]) == pytest.approx(0.7)


def test_json_roundtrip():
    for d in (DistortionMeasure.mse(3), DistortionMeasure.hamming(),
              DistortionMeasure.symbol_error(4), DistortionMeasure.lp_pow(math.inf, 1.0, 2),
              DistortionMeasure.weighted_mse([[2, 0], [1, 1]]),
              DistortionMeasure.matrix([[0, 1], [2, 0]])):
        assert DistortionMeasure.from_json(d.to_json()) == d


def test_validation_errors():
    with pytest.raises(DistortionError):
        DistortionMeasure.lp_pow(0.5, 1.0)
    with pytest.raises(DistortionError):
        DistortionMeasure.weighted_mse([[1, 2], [2, 4]])
    with pytest.raises(DistortionError):
        DistortionMeasure.matrix([[1, 1], [0, 1]])
    with pytest.raises(DistortionError):
        DistortionMeasure.from_json({"kind": "nope"})
    with pytest.raises(DistortionError):
        evaluate(DistortionMeasure.hamming(), [0, 2], [0, 0])


def test_radius_of_distortion_and_ball_volume():
    mse = DistortionMeasure.mse()
    assert radius_of_distortion(mse, 0.25) == pytest.approx(0.5)
    assert covering_radius_for(mse, 4, 0.01) == pytest.approx(0.2)
    # disc of radius sqrt(2 d) in the plane
    assert ball_log_volume(mse, 2, 0.5) == pytest.approx(math.log(math.pi))
    cube = DistortionMeasure.lp_pow(math.inf, 1.0)
    assert ball_log_volume(cube, 3, 0.25) == pytest.approx(3 * math.log(0.5))
    W = DistortionMeasure.weighted_mse([[2.0, 0.0], [0.0, 1.0]])
    assert ball_log_volume(W, 2, 0.5) == pytest.approx(math.log(math.pi / 2))


def test_radius_bisection_matches_closed_form():
    r = radius_from_profile(lambda t: t ** 3, 0.125, 10.0)
    assert r == pytest.approx(0.5, rel=1e-10)


def test_balance_and_group_profile():
    assert is_balanced(DistortionMeasure.symbol_error(3))
    assert not is_balanced(DistortionMeasure.matrix([[0, 1, 2], [1, 0, 1], [1, 1, 0]]))
    circ = DistortionMeasure.matrix([[0, 1, 2], [2, 0, 1], [1, 2, 0]])
    assert list(difference_profile(circ)) == [0, 2, 1]
    with pytest.raises(DistortionError):
        difference_profile(DistortionMeasure.matrix([[0, 1], [2, 0]]))


@given(arrays(float, 5, elements=st.floats(-10, 10)), arrays(float, 5, elements=st.floats(-10, 10)))
def test_mse_nonnegative_symmetric_and_zero_on_diagonal(x, y):
    d = DistortionMeasure.mse()
    assert evaluate(d, x, y) >= 0
    assert evaluate(d, x, y) == pytest.approx(evaluate(d, y, x))
    assert evaluate(d, x, x) == 0


@given(st.floats(1.0, 8.0), st.floats(0.2, 4.0), arrays(float, 4, elements=st.floats(-5, 5)))
def test_lp_pow_scaling(p, s, z):
    d = DistortionMeasure.lp_pow(p, s)
    zero = np.zeros(4)
    assert evaluate(d, 2 * z, zero) == pytest.approx(2 ** s * evaluate(d, z, zero), rel=1e-9,
                                                      abs=1e-12)
