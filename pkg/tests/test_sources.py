import math

import numpy as np
import pytest

from oracles import quad_entropy, quad_mass
from rdlattice.sources import (ContinuousSource, FiniteSource, make_rng, mc_entropy,
                               mc_varentropy, product_regularity, source_from_json, v_bound,
                               varentropy)

FAMILIES = [ContinuousSource.gaussian(1.7), ContinuousSource.laplace(0.8),
            ContinuousSource.uniform(-0.5, 2.0)]


def _support(src):
    P = dict(src.params)
    if src.family == "uniform":
        return P["a"], P["b"]
    return -60.0, 60.0


@pytest.mark.parametrize("src", FAMILIES, ids=lambda s: s.family)
def test_density_normalised_and_entropy_by_quadrature(src):
    lo, hi = _support(src)
    lp = src._letter_logpdf
    assert quad_mass(lp, lo, hi) == pytest.approx(1.0, abs=1e-6)
    assert quad_entropy(lp, lo, hi) == pytest.approx(src.letter_entropy, abs=1e-7)


@pytest.mark.parametrize("src", FAMILIES, ids=lambda s: s.family)
def test_mc_entropy_within_four_se(src):
    h, se = mc_entropy(src, 1_000_000, seed=5)
    assert abs(h - src.entropy) <= 4 * se + 1e-12


def test_varentropy_closed_forms():
    assert ContinuousSource.gaussian(9.0).varentropy == 0.5
    assert ContinuousSource.laplace(3.0).varentropy == 1.0
    assert ContinuousSource.uniform().varentropy == 0.0
    assert ContinuousSource.gaussian().product(64).varentropy == 32.0
    assert varentropy(ContinuousSource.laplace()).method == "closed_form"


def test_mc_varentropy_laplace():
    est = mc_varentropy(ContinuousSource.laplace(), 200_000, seed=1)
    assert abs(est.value - 1.0) <= 4 * est.se


def test_finite_source_varentropy():
    p = 0.11
    src = FiniteSource.binary(p)
    assert src.varentropy == pytest.approx(p * (1 - p) * math.log((1 - p) / p) ** 2)


def test_certificates():
    u = v_bound(ContinuousSource.uniform())
    g = v_bound(ContinuousSource.gaussian(1.0))
    lap = v_bound(ContinuousSource.laplace(1.0))
    assert (u.c1, u.c0) == (0.0, 0.0)
    assert (g.c1, g.c0) == (2.0, 0.0)
    assert (lap.c1, lap.c0) == (0.0, 1.0)
    prod = product_regularity([lap] * 9)
    assert prod.v(np.zeros(9))[0] == pytest.approx(3.0)
    assert product_regularity([g] * 4).c1 == 2.0


@pytest.mark.parametrize("src", FAMILIES, ids=lambda s: s.family)
def test_gradient_dominated_by_certificate(src):
    rng = make_rng(3)
    x = src.sample(10_000, rng)[:, 0]
    cert = v_bound(src)
    grad = np.abs(src.grad_log_density(x))
    assert np.all(grad <= cert.c1 * np.abs(x) + cert.c0 + 1e-12)


@pytest.mark.parametrize("src", FAMILIES[:2], ids=lambda s: s.family)
def test_gradient_matches_finite_differences(src):
    rng = make_rng(4)
    x = src.sample(1000, rng)[:, 0]
    x = x[np.abs(x) > 1e-3]  # stay off the Laplace kink
    h = 1e-5
    fd = (src.log_density(x + h, letterwise=True) - src.log_density(x - h, letterwise=True)) / (2 * h)
    an = src.grad_log_density(x)
    assert np.allclose(fd, an, rtol=1e-6, atol=1e-6)


def test_sampler_is_bit_exact_and_streams_differ():
    a = ContinuousSource.gaussian().sample(100, make_rng(7, 0))
    b = ContinuousSource.gaussian().sample(100, make_rng(7, 0))
    c = ContinuousSource.gaussian().sample(100, make_rng(7, 1))
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_json_descriptors():
    s = source_from_json({"family": "product", "n": 64, "letter": {"family": "gaussian", "var": 2.0}})
    assert s.dimension == 64 and dict(s.params)["var"] == 2.0
    assert source_from_json(s.to_json()) == s
    f = source_from_json({"pmf": [0.5, 0.5], "distortion": {"kind": "hamming"}})
    assert isinstance(f, FiniteSource)


def test_gaussian_mean_norm_exact():
    src = ContinuousSource.gaussian().product(3)
    val, exact = src.mean_norm()
    assert exact and val == pytest.approx(2 * math.sqrt(2 / math.pi))


def test_log_concave_varentropy_bound_per_letter():
    for src in FAMILIES:
        assert src.letter_varentropy <= 1.0
