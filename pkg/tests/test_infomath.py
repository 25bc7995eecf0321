import math

import numpy as np
from hypothesis import given, strategies as st

from oracles import hb
from rdlattice.infomath import Q, Qinv, binary_entropy, entropy, log_unit_ball_volume


def test_binary_entropy_matches_direct_formula():
    for p in (0.0, 0.05, 0.11, 0.5, 0.9, 1.0):
        assert math.isclose(binary_entropy(p), hb(p), abs_tol=1e-15)


def test_entropy_uniform():
    assert math.isclose(entropy(np.full(8, 1 / 8)), 3 * math.log(2))


def test_unit_ball_volumes():
    assert math.isclose(math.exp(log_unit_ball_volume(2)), math.pi)
    assert math.isclose(math.exp(log_unit_ball_volume(3)), 4 * math.pi / 3)
    assert math.isclose(math.exp(log_unit_ball_volume(3, 1.0)), 8 / 6)
    assert math.isclose(log_unit_ball_volume(5, math.inf), 5 * math.log(2))


def test_qinv_reference_value():
    assert abs(Qinv(0.1) - 1.2815515655446004) < 1e-12
    assert Qinv(0.5) == 0.0 or abs(Qinv(0.5)) < 1e-15


@given(st.floats(min_value=1e-12, max_value=1 - 1e-12))
def test_qinv_roundtrip(eps):
    assert abs(float(Q(Qinv(eps))) - eps) <= 1e-12 * max(eps, 1e-3)
