import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rdlattice.codec import (
    cell_hash,
    huffman_lengths,
    simulate_fixed_length,
    simulate_variable_length,
    wilson_interval,
)
from rdlattice.distortion import DistortionMeasure
from rdlattice.lattice import make_lattice, scale_to_distortion
from rdlattice.sources import ContinuousSource


def uniform_cells(K):
    width = 1.0 / K
    return make_lattice("zn", 1, scale=width, shift=0.5), width * width / 4


@settings(max_examples=60, deadline=None)
@given(st.lists(st.integers(1, 10_000), min_size=2, max_size=40))
def test_huffman_kraft_equality(weights):
    L = huffman_lengths(weights)
    assert math.isclose(np.sum(2.0 ** -L), 1.0, rel_tol=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.integers(1, 10_000), min_size=2, max_size=40))
def test_huffman_within_one_bit_of_entropy(weights):
    w = np.asarray(weights, float)
    p = w / w.sum()
    L = huffman_lengths(w)
    H = -np.sum(p * np.log2(p))
    assert H - 1e-9 <= p @ L < H + 1


def test_huffman_degenerate_inputs():
    assert huffman_lengths([]).size == 0
    assert huffman_lengths([5]).tolist() == [0]
    assert huffman_lengths([1, 1, 2]).tolist() == [2, 2, 1]


def test_cell_hash_stable():
    assert cell_hash([1, -2, 3]) == cell_hash(np.array([1, -2, 3]))
    assert cell_hash([1, 2]) != cell_hash([2, 1])


def test_uniform_eight_cells_costs_three_bits():
    lat, d = uniform_cells(8)
    st_ = simulate_variable_length(ContinuousSource.uniform(0, 1), lat, 100_000, seed=5, d=d)
    assert st_.avg_length_bits == pytest.approx(3.0, abs=1e-12)
    assert st_.violations == 0
    assert st_.escape_rate == 0.0


def test_variable_length_is_deterministic():
    lat = scale_to_distortion(make_lattice("zn", 1), DistortionMeasure.mse(), 1e-2)
    g = ContinuousSource.gaussian()
    a = simulate_variable_length(g, lat, 20_000, seed=3, d=1e-2)
    b = simulate_variable_length(g, lat, 20_000, seed=3, d=1e-2)
    assert a.to_json() == b.to_json()
    assert a.cells == b.cells


def test_two_cells_single_codeword_misses_half():
    lat, d = uniform_cells(2)
    res = simulate_fixed_length(ContinuousSource.uniform(0, 1), lat, 1, 200_000, seed=2, d=d)
    assert res.eps_hat == pytest.approx(0.5, abs=0.005)
    lo, hi = res.eps_ci
    assert lo <= res.eps_hat <= hi


def test_fixed_length_with_all_cells_never_misses():
    lat, d = uniform_cells(4)
    res = simulate_fixed_length(ContinuousSource.uniform(0, 1), lat, 4, 50_000, seed=1, d=d)
    assert res.eps_hat == 0.0
    assert res.avg_length_bits == pytest.approx(2.0)
    assert "M_exceeds_observed_cells" in res.flags


def test_fixed_length_rejects_zero_codewords():
    lat, d = uniform_cells(2)
    with pytest.raises(ValueError):
        simulate_fixed_length(ContinuousSource.uniform(0, 1), lat, 0, 100, seed=0, d=d)


def test_wilson_interval_reference_value():
    # closed-form Wilson score interval
    k, n, z = 12, 100, 1.959963984540054
    ph = k / n
    centre = (ph + z * z / (2 * n)) / (1 + z * z / n)
    half = z / (1 + z * z / n) * math.sqrt(ph * (1 - ph) / n + z * z / (4 * n * n))
    lo, hi = wilson_interval(k, n)
    assert lo == pytest.approx(centre - half, abs=1e-9)
    assert hi == pytest.approx(centre + half, abs=1e-9)


def test_codec_stats_json_round_trip_keys():
    lat, d = uniform_cells(4)
    res = simulate_fixed_length(ContinuousSource.uniform(0, 1), lat, 2, 10_000, seed=4, d=d)
    js = res.to_json()
    assert "cells" not in js
    assert isinstance(js["eps_ci"], list)
