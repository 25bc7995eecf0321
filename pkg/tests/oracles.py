"""Independent reference computations used to freeze expected values in tests."""

import itertools
import math

import numpy as np
from scipy import integrate


def hb(p):
    """Binary entropy in nats, written out directly."""
    if p in (0.0, 1.0):
        return 0.0
    return -p * math.log(p) - (1 - p) * math.log(1 - p)


def simplex_grid(m, res):
    pts = [c for c in itertools.product(range(res + 1), repeat=m) if sum(c) == res]
    return np.array(pts, dtype=float) / res


def grid_rd(pmf, D, d, res):
    """min I(X;Y) over conditionals on a 1/res simplex grid with E[d] <= d."""
    pmf = np.asarray(pmf, float)
    D = np.asarray(D, float)
    m = pmf.size
    rows = simplex_grid(D.shape[1], res)
    best = math.inf
    for combo in itertools.product(range(rows.shape[0]), repeat=m):
        Q = rows[list(combo)]
        if float(pmf @ np.sum(Q * D, axis=1)) > d + 1e-12:
            continue
        qy = pmf @ Q
        with np.errstate(divide="ignore", invalid="ignore"):
            t = np.where(Q > 0, Q * np.log(Q / qy[None, :]), 0.0)
        best = min(best, float(pmf @ t.sum(axis=1)))
    return best


def quad_entropy(logpdf, lo, hi):
    f = lambda x: -math.exp(logpdf(x)) * logpdf(x)  # noqa: E731
    return integrate.quad(f, lo, hi, limit=400)[0]


def quad_mass(logpdf, lo, hi):
    return integrate.quad(lambda x: math.exp(logpdf(x)), lo, hi, limit=400)[0]


def brute_nearest(G, x, center, width=2):
    """Exhaustive nearest point of the lattice G Z^n over a box of index offsets."""
    n = G.shape[0]
    offs = np.array(list(itertools.product(range(-width, width + 1), repeat=n)))
    cand = (center[None, :] + offs) @ G.T
    dist = np.sum((cand - x[None, :]) ** 2, axis=1)
    return math.sqrt(float(dist.min()))


def hexagonal_covering_radius():
    """A_2* covering radius from its Voronoi hexagon: circumradius of the cell."""
    # A_2* is similar to the hexagonal lattice; with cell area A, the regular
    # hexagon of area A has circumradius R with A = (3 sqrt 3 / 2) R^2.
    area = 3 ** -0.5
    return math.sqrt(area / (1.5 * math.sqrt(3)))
