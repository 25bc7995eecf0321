"""Tilted distributions Z_lambda and the classical Shannon lower bound.

For a difference distortion d(z) the tilted law has density (or pmf)
proportional to exp(-lambda d(z)); lambda is tuned so that E[d(Z)] equals the
target distortion.  With Sigma the normaliser, phi(d) = log Sigma + lambda d is
the entropy of Z_lambda and the Shannon lower bound is h(X) - phi(d).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import integrate, special

from .distortion import DistortionError, DistortionMeasure
from .infomath import log_unit_ball_volume


class TiltRangeError(ValueError):
    """The tilt equation E[d(Z_lambda)] = d has no positive solution."""

    def __init__(self, message, max_distortion=None):
        super().__init__(message)
        self.max_distortion = max_distortion


class NonMonotoneTiltError(RuntimeError):
    """Mean distortion was not monotone in lambda on the bracketing grid."""


@dataclass(frozen=True)
class TiltedDistribution:
    lam: float
    mean_distortion: float
    entropy: float
    log_partition: float
    kind: str  # "discrete" or "continuous"
    n: int = 1
    pmf: tuple | None = None

    @property
    def phi(self) -> float:
        return self.log_partition + self.lam * self.mean_distortion


@dataclass(frozen=True)
class SlbResult:
    lambda_star: float
    phi_d: float
    slb_rate: float
    slb_varentropy: float
    vacuous: bool = False

    def to_record(self, d: float) -> dict:
        return {
            "d": d,
            "lambda": self.lambda_star,
            "phi_nats": self.phi_d,
            "slb_nats": self.slb_rate,
            "varentropy_nats2": self.slb_varentropy,
        }


# -- discrete tilting --------------------------------------------------------

def _discrete_profile(dist: DistortionMeasure) -> np.ndarray:
    """dd(z) = d(z, 0); Sigma does not depend on the column for balanced or
    group-difference matrices."""
    return dist.as_matrix()[:, 0].copy()


def _discrete_tilt(values: np.ndarray, lam: float):
    logw = -lam * values
    logZ = special.logsumexp(logw)
    pmf = np.exp(logw - logZ)
    return pmf, float(logZ), float(pmf @ values)


def _solve_discrete(values: np.ndarray, d: float) -> float:
    """Bracketed bisection on log(lambda) in [-40, 40]."""
    mean0 = float(np.mean(values))
    if not 0.0 < d <= mean0 * (1 + 1e-12):
        raise TiltRangeError(
            f"distortion {d} outside the solvable range (0, {mean0}]", max_distortion=mean0)
    if d >= mean0:
        return 0.0
    lo, hi = -40.0, 40.0
    grid = np.linspace(lo, hi, 41)
    means = np.array([_discrete_tilt(values, math.exp(t))[2] for t in grid])
    if np.any(np.diff(means) > 1e-15):
        raise NonMonotoneTiltError("mean distortion increased with lambda")
    if means[-1] > d:
        raise TiltRangeError(f"distortion {d} below what lambda = e^40 reaches", max_distortion=mean0)
    if means[0] < d:
        # solution lies in (0, e^-40); essentially lambda = 0
        lo, hi = -700.0, lo
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        m = _discrete_tilt(values, math.exp(mid))[2]
        if abs(m - d) <= 1e-13:
            return math.exp(mid)
        if m > d:
            lo = mid
        else:
            hi = mid
    return math.exp(0.5 * (lo + hi))


def _closed_form_discrete_lambda(dist: DistortionMeasure, d: float) -> float | None:
    if dist.kind in ("hamming", "symbol_error"):
        m = dist.alphabet_size
        dmax = (m - 1) / m
        if not 0.0 < d <= dmax:
            raise TiltRangeError(
                f"distortion {d} outside the solvable range (0, {dmax}]", max_distortion=dmax)
        return max(0.0, math.log((m - 1) * (1.0 - d) / d))
    return None


# -- continuous tilting ------------------------------------------------------

def _continuous_closed_form(dist: DistortionMeasure, n: int, d: float):
    """lambda and log Sigma for d(z) = n^{-s/p} ||W z||_p^s (closed form)."""
    p, s = dist.p, dist.s
    lam = n / (s * d)
    # a = lam * n^{-s/p};  Sigma = b_{n,p} Gamma(n/s + 1) a^{-n/s} / |det W|
    log_a = math.log(lam) - (0.0 if math.isinf(p) else (s / p) * math.log(n))
    log_sigma = (log_unit_ball_volume(n, p) + special.gammaln(n / s + 1.0)
                 - (n / s) * log_a - dist.weight_logdet)
    return lam, float(log_sigma)


def radial_tilt(profile: Callable, n: int, lam: float, p: float = 2.0):
    """log Sigma and E[dd(R)] for the density exp(-lam dd(n^{-1/p} ||z||_p)).

    Reduces the n-dimensional integral to a radial one using the L^p ball
    surface factor n b_{n,p} rho^{n-1}, then substitutes rho = n^{1/p} t.
    """
    def log_g(t):
        return (n - 1) * math.log(t) - lam * float(profile(t)) if t > 0 else -math.inf

    # locate the mode of t^{n-1} exp(-lam dd(t)) to scale and split the integral
    ts = np.logspace(-12, 8, 4001)
    lg = np.array([log_g(t) for t in ts])
    k = int(np.nanargmax(lg))
    peak = lg[k]
    above = np.nonzero(lg > peak - 60.0)[0]
    a, b = ts[max(above[0] - 1, 0)], ts[min(above[-1] + 1, len(ts) - 1)]
    opts = dict(epsabs=0.0, epsrel=1e-11, limit=500)
    pts = [ts[k]] if a < ts[k] < b else None
    z0 = integrate.quad(lambda t: math.exp(log_g(t) - peak), a, b, points=pts, **opts)[0]
    z1 = integrate.quad(lambda t: float(profile(t)) * math.exp(log_g(t) - peak), a, b,
                        points=pts, **opts)[0]
    scale = 0.0 if math.isinf(p) else (n / p) * math.log(n)
    log_sigma = math.log(n) + log_unit_ball_volume(n, p) + scale + peak + math.log(z0)
    return float(log_sigma), z1 / z0


def solve_radial_lambda(profile: Callable, n: int, d: float, p: float = 2.0,
                        log_weight_det: float = 0.0) -> TiltedDistribution:
    """Tilt equation for a general scalar profile, by bisection on log lambda."""
    lo, hi = -40.0, 40.0
    m_lo = radial_tilt(profile, n, math.exp(lo), p)[1]
    m_hi = radial_tilt(profile, n, math.exp(hi), p)[1]
    if not m_hi <= d <= m_lo:
        raise TiltRangeError(f"distortion {d} outside [{m_hi}, {m_lo}] reachable by bracketing")
    prev = None
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        log_sigma, m = radial_tilt(profile, n, math.exp(mid), p)
        if prev is not None and abs(m - d) <= 1e-12 * max(1.0, d):
            break
        prev = m
        if m > d:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-15:
            break
    lam = math.exp(mid)
    log_sigma -= log_weight_det
    return TiltedDistribution(lam=lam, mean_distortion=m, entropy=log_sigma + lam * m,
                              log_partition=log_sigma, kind="continuous", n=n)


# -- public API --------------------------------------------------------------

def solve_lambda(dist: DistortionMeasure, d: float, n: int | None = None) -> TiltedDistribution:
    """Tilted distribution whose mean distortion equals ``d``.

    ``n`` is the block length for the continuous kinds (default: the
    measure's own dimension).  Finite kinds are tilted over their alphabet.
    """
    if not d > 0:
        raise TiltRangeError(f"distortion must be positive, got {d}")
    if dist.is_finite:
        values = _discrete_profile(dist)
        lam = _closed_form_discrete_lambda(dist, d)
        if lam is None:
            lam = _solve_discrete(values, d)
        pmf, logZ, mean = _discrete_tilt(values, lam)
        if abs(mean - d) > 1e-10:
            raise TiltRangeError(f"tilt equation not met: E[d(Z)] = {mean} vs {d}")
        return TiltedDistribution(
            lam=lam, mean_distortion=mean, entropy=logZ + lam * mean,
            log_partition=logZ, kind="discrete", n=1, pmf=tuple(pmf))
    n = dist.dimension if n is None else int(n)
    if dist.kind == "weighted_mse" and n != dist.dimension:
        raise DistortionError(f"weighted_mse is defined for n = {dist.dimension}")
    lam, log_sigma = _continuous_closed_form(dist, n, d)
    return TiltedDistribution(lam=lam, mean_distortion=d, entropy=log_sigma + lam * d,
                              log_partition=log_sigma, kind="continuous", n=n)


def phi_of_d(z: TiltedDistribution, d: float) -> float:
    """phi(d) = log Sigma + lambda d, in nats."""
    return z.log_partition + z.lam * d


def _source_dimension(source) -> int:
    return getattr(source, "dimension", 1)


def classical_slb(source, dist: DistortionMeasure, d: float) -> SlbResult:
    """Shannon lower bound h(X) - phi(d) (or H(X) - phi(d) for finite sources).

    ``source`` provides ``entropy`` and ``varentropy`` in nats; negative
    bounds are returned unclamped with ``vacuous=True``.
    """
    if dist.is_finite:
        m = len(getattr(source, "pmf", ()))
        if m and m != dist.alphabet_size:
            raise DistortionError(f"source alphabet {m} does not match distortion alphabet "
                                  f"{dist.alphabet_size}")
        z = solve_lambda(dist, d)
    else:
        z = solve_lambda(dist, d, n=_source_dimension(source))
    phi = phi_of_d(z, d)
    rate = source.entropy - phi
    return SlbResult(lambda_star=z.lam, phi_d=phi, slb_rate=rate,
                     slb_varentropy=source.varentropy, vacuous=rate < 0)


def tilted_information(source, dist: DistortionMeasure, d: float, x) -> float:
    """log 1/f(x) - phi(d); +inf where the density (or pmf) vanishes."""
    res = classical_slb(source, dist, d)
    logf = source.log_prob(x)
    if not np.isfinite(logf):
        return math.inf
    return float(-logf - res.phi_d)


# -- Linkov regularity -------------------------------------------------------

@dataclass(frozen=True)
class LinkovReport:
    zero_only_at_origin_and_monotone: bool
    power_bounded_near_zero: bool
    moment_integrable: bool
    nu: float | None = None

    @property
    def all_hold(self) -> bool:
        return (self.zero_only_at_origin_and_monotone and self.power_bounded_near_zero
                and self.moment_integrable)


def check_linkov_conditions(profile) -> LinkovReport:
    """Check the three regularity conditions on a scalar profile dd(r).

    (i)  dd(0) = 0, dd(r) > 0 for r > 0, nondecreasing (grid check);
    (ii) r^{-nu} dd(r) stays bounded as r -> 0 for some nu > 0, using the
         local log-log slope near the origin as the candidate nu;
    (iii) the integral of dd^2 exp(-dd) over [0, inf) is finite: quadrature on
         [0, 100] plus a tail test on r in [1e2, 1e6].
    """
    if isinstance(profile, DistortionMeasure):
        profile = profile.profile()
    f = lambda r: float(profile(r))  # noqa: E731

    grid = np.concatenate([[0.0], np.logspace(-10, 6, 801)])
    vals = np.array([f(r) for r in grid])
    cond1 = bool(vals[0] == 0.0 and np.all(vals[1:] > 0.0) and np.all(np.diff(vals) >= 0.0))

    rs = np.array([1e-6, 1e-8, 1e-10])
    ds = np.array([f(r) for r in rs])
    nu = None
    cond2 = False
    if np.all(ds > 0):
        slopes = np.diff(np.log(ds)) / np.diff(np.log(rs))
        est = float(np.min(slopes))
        if est > 1e-3:
            nu = 0.5 * est
            ratios = ds / rs ** nu
            cond2 = bool(np.all(np.isfinite(ratios)) and ratios[-1] <= ratios[0] * (1 + 1e-9))
    elif np.all(ds == 0):
        cond2 = True  # identically zero near the origin; condition (i) already fails

    g = lambda r: f(r) ** 2 * math.exp(-f(r))  # noqa: E731
    head = integrate.quad(g, 0.0, 100.0, limit=400)[0]
    tail_r = np.logspace(2, 6, 41)
    tail = np.array([r * g(r) for r in tail_r])
    cond3 = bool(np.isfinite(head) and tail[-1] < 1e-8 and np.all(np.diff(tail) <= 1e-300))
    return LinkovReport(cond1, cond2, cond3, nu)
