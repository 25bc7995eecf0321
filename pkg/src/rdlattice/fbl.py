"""Finite-blocklength bounds on the minimal rate R(n, d, eps) in nats per letter.

Converses come from the information spectrum of an i.i.d. continuous source
(exact laws for the Gaussian, Laplace and uniform families); achievability
comes from lattice quantization followed by keeping the M likeliest cells.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .distortion import DistortionMeasure, ball_log_volume
from .infomath import LN2, Qinv, log_unit_ball_volume
from .sources import ContinuousSource, FiniteSource, make_rng, v_bound
from .tilted import classical_slb, solve_lambda

LABELS = ("converse_ca", "converse_c", "converse_c_expansion", "achievability_lattice",
          "achievability_lattice_analytic", "gaussian_cont", "gaussian_disc", "slb",
          "memory_converse", "memory_achievability")


@dataclass
class BoundPoint:
    n: int
    d: float
    eps: float
    label: str
    rate_nats: float
    gamma: float = math.nan
    mc_se: float = 0.0
    flags: tuple = ()
    metadata: dict = field(default_factory=dict)

    @property
    def rate_bits(self) -> float:
        return self.rate_nats / LN2

    @property
    def vacuous(self) -> bool:
        return "vacuous" in self.flags

    def row(self) -> dict:
        return {"n": self.n, "d": self.d, "eps": self.eps, "label": self.label,
                "rate_nats": self.rate_nats, "rate_bits": self.rate_bits,
                "gamma": self.gamma, "mc_se": self.mc_se, "flags": ";".join(self.flags)}


@dataclass(frozen=True)
class ApproximationTerms:
    slb_rate: float
    varentropy: float
    qinv_eps: float
    correction_lower: float
    correction_upper: float


def _check_eps(eps):
    if not 0.0 < eps < 1.0:
        raise ValueError(f"eps must lie in (0, 1), got {eps}")


def _letter(src: ContinuousSource) -> ContinuousSource:
    if src.dimension != 1:
        raise ValueError("pass the single-letter source; blocklength is a separate argument")
    return src


def _mse_default(dist):
    return DistortionMeasure.mse() if dist is None else dist


# -- information spectrum of n i.i.d. letters ------------------------------------------

def _info_isf(src: ContinuousSource, n: int):
    """Upper quantile function q -> inf{s : P[-log f(X^n) > s] <= q}, exact per family."""
    P = dict(src.params)
    if src.family == "gaussian":
        v = P["var"]
        c = 0.5 * n * math.log(2 * math.pi * v)
        return lambda q: c + 0.5 * stats.chi2.isf(q, n)
    if src.family == "laplace":
        c = n * math.log(2 * P["b"])
        return lambda q: c + stats.gamma.isf(q, n)
    c = n * math.log(P["b"] - P["a"])
    return lambda q: np.where(np.asarray(q) <= 1.0, c, -np.inf) + 0.0 * np.asarray(q)


def _phi(dist: DistortionMeasure, n: int, d: float) -> float:
    return solve_lambda(dist, d, n=n).phi


def _gamma_grid(n: int, eps: float) -> np.ndarray:
    g0 = -math.log1p(-eps)  # need eps + exp(-gamma) < 1
    base = np.logspace(-6, math.log10(max(n, 2)), 200)
    quarter = np.arange(1, 4 * max(3, int(math.log10(max(n, 10))) + 3)) * math.log(10) / 4
    near = g0 + np.logspace(-8, math.log10(max(n, 2)), 200)
    g = np.concatenate([base, quarter, near, [g0 * (1 + 1e-9) + 1e-15]])
    return np.unique(g[g > g0])


def converse_ca(src: ContinuousSource, dist: DistortionMeasure | None, n: int, d: float,
                eps: float) -> BoundPoint:
    """Rate lower bound from the tilted-information spectrum with a free slack gamma."""
    _check_eps(eps)
    src = _letter(src)
    dist = _mse_default(dist)
    isf = _info_isf(src, n)
    phi = _phi(dist, n, d)
    gam = _gamma_grid(n, eps)
    vals = isf(eps + np.exp(-gam)) - phi - gam
    k = int(np.argmax(vals))
    log_m = float(vals[k])
    flags = ("vacuous",) if log_m <= 0 else ()
    return BoundPoint(n, d, eps, "converse_ca", max(log_m, 0.0) / n, float(gam[k]),
                      flags=flags, metadata={"log_m": log_m, "phi": phi})


def log_beta(src: ContinuousSource, n: int, eps: float) -> float:
    """log beta_{1-eps}(P_X, Lebesgue): the least volume holding probability 1 - eps."""
    P = dict(src.params)
    if src.family == "gaussian":
        rad2 = P["var"] * stats.chi2.ppf(1 - eps, n)
        return float(log_unit_ball_volume(n) + 0.5 * n * math.log(rad2))
    if src.family == "laplace":
        rho = P["b"] * stats.gamma.ppf(1 - eps, n)
        return float(n * math.log(2 * rho) - math.lgamma(n + 1))
    return float(math.log1p(-eps) + n * math.log(P["b"] - P["a"]))


def converse_c_beta(src: ContinuousSource, dist: DistortionMeasure | None, n: int, d: float,
                    eps: float) -> BoundPoint:
    """Rate lower bound log beta_{1-eps} - log(volume of the distortion-d ball), per letter."""
    _check_eps(eps)
    src = _letter(src)
    dist = _mse_default(dist)
    log_m = log_beta(src, n, eps) - ball_log_volume(dist, n, d)
    flags = ("vacuous",) if log_m <= 0 else ()
    return BoundPoint(n, d, eps, "converse_c", max(log_m, 0.0) / n, flags=flags,
                      metadata={"log_m": log_m})


def converse_c_expansion(src: ContinuousSource, dist: DistortionMeasure | None, n: int,
                         d: float, eps: float) -> BoundPoint:
    """Two-term normal expansion of log beta minus the ball volume (an approximation)."""
    _check_eps(eps)
    src = _letter(src)
    dist = _mse_default(dist)
    lb = (n * src.letter_entropy + math.sqrt(n * src.letter_varentropy) * Qinv(eps)
          - 0.5 * math.log(n))
    log_m = lb - ball_log_volume(dist, n, d)
    return BoundPoint(n, d, eps, "converse_c_expansion", log_m / n,
                      flags=("approximation",), metadata={"log_m": log_m})


# -- lattice achievability -------------------------------------------------------------

def named_lattice_geometry(family: str, n: int):
    """(log |det G|, covering radius) of the canonical named lattices."""
    if family == "zn":
        return 0.0, math.sqrt(n) / 2
    if family == "dn":
        return math.log(2.0), (1.0 if n == 1 else max(1.0, math.sqrt(n) / 2))
    if family == "an_star":
        return -0.5 * math.log(n + 1), math.sqrt(n * (n + 2) / (12.0 * (n + 1)))
    raise ValueError(f"unknown lattice family {family!r}")


def _scaled_log_volume(family: str, n: int, d: float):
    logdet, r0 = named_lattice_geometry(family, n)
    r = math.sqrt(n * d)
    return logdet + n * math.log(r / r0), r


def berry_esseen_constant(src: ContinuousSource) -> float:
    """6 E|log f + h|^3 / Var[log f]^{3/2} for one letter."""
    V = src.letter_varentropy
    if V == 0:
        return 0.0
    return 6.0 * src.letter_third_abs_moment() / V ** 1.5


def achievability_analytic(src: ContinuousSource, n: int, d: float, eps: float,
                           family: str = "an_star", cert=None) -> BoundPoint:
    """Berry-Esseen plus Chebyshev evaluation of the lattice achievability bound."""
    _check_eps(eps)
    src = _letter(src)
    cert = v_bound(src) if cert is None else cert
    logV, r = _scaled_log_volume(family, n, d)
    h = src.letter_entropy
    if src.letter_varentropy == 0:
        log_m = n * h - logV
        return BoundPoint(n, d, eps, "achievability_lattice_analytic", max(log_m, 0) / n, 0.0,
                          metadata={"log_m": log_m, "lattice": family})
    alpha = src.second_moment
    gamma = 2 * n * math.sqrt(d) * (cert.c1 * math.sqrt(alpha) + cert.c1 * math.sqrt(d) + cert.c0)
    B = berry_esseen_constant(src)
    eps_p = eps - B / math.sqrt(n) - 1.0 / n
    if eps_p <= 0:
        return BoundPoint(n, d, eps, "achievability_lattice_analytic", math.inf, gamma,
                          flags=("infeasible",), metadata={"B": B, "lattice": family})
    log_m = n * h - logV + math.sqrt(n * src.letter_varentropy) * Qinv(min(eps_p, 1 - 1e-16)) + gamma
    return BoundPoint(n, d, eps, "achievability_lattice_analytic", max(log_m, 0) / n, gamma,
                      metadata={"log_m": log_m, "B": B, "eps_prime": eps_p, "lattice": family})


def achievability_lattice(src: ContinuousSource, n: int, d: float, eps: float,
                          family: str = "an_star", cert=None, samples: int = 1_000_000,
                          seed: int = 0, analytic: bool = True) -> BoundPoint:
    """Monte-Carlo evaluation of the lattice union bound on the excess probability.

    Minimises over gamma the smallest log M with
    P[-log f(X) - log V + gamma > log M] + P[2 r v_C(X) > gamma] <= eps,
    both probabilities estimated from the same ``samples`` draws.  The analytic
    evaluation is attached under ``metadata['analytic']``.
    """
    _check_eps(eps)
    src = _letter(src)
    cert = v_bound(src) if cert is None else cert
    logV, r = _scaled_log_volume(family, n, d)
    prod = src.product(n)
    nll, norm = prod.sample_stats(samples, make_rng(seed, 51))
    A = np.sort(nll - logV)
    Bv = np.sort(2 * r * (cert.c1 * norm + cert.c1 * r + cert.c0 * math.sqrt(n)))
    N = A.size
    # gamma = Bv[k] leaves P[B > gamma] = (N - 1 - k) / N for distinct values
    above = N - np.searchsorted(Bv, Bv, side="right")
    p2 = above / N
    ok = p2 < eps
    k_ok = np.nonzero(ok)[0]
    u = 1.0 - eps + p2[k_ok]
    j = np.clip(np.ceil(N * u).astype(np.int64) - 1, 0, N - 1)
    logm = A[j] + Bv[k_ok]
    best = int(np.argmin(logm))
    log_m = float(logm[best])
    gamma = float(Bv[k_ok[best]])
    uq = float(u[best])
    delta = int(math.ceil(math.sqrt(N * uq * (1 - uq)))) + 1
    jb = int(j[best])
    se = 0.5 * float(A[min(N - 1, jb + delta)] - A[max(0, jb - delta)])
    meta = {"log_m": log_m, "lattice": family, "samples": samples, "seed": seed}
    if analytic:
        meta["analytic"] = achievability_analytic(src, n, d, eps, family, cert)
    return BoundPoint(n, d, eps, "achievability_lattice", max(log_m, 0.0) / n, gamma,
                      mc_se=se / n, metadata=meta)


# -- Gaussian approximation ----------------------------------------------------------

def gaussian_approx(src, dist: DistortionMeasure | None, n: int, d: float, eps: float,
                    mode: str | None = None, kappa: float | None = None,
                    loglog_c: float = 0.0) -> BoundPoint:
    """R_(d) + sqrt(V/n) Qinv(eps) with a band for the unresolved correction terms."""
    _check_eps(eps)
    if mode is None:
        mode = "discrete" if isinstance(src, FiniteSource) else "continuous"
    flags = []
    q = Qinv(eps)
    if mode == "discrete":
        from .rdfinite import critical_distortion

        dist = src.distortion if dist is None else dist
        dc = critical_distortion(src).d_c
        if d > dc:
            raise ValueError(f"d = {d} exceeds the critical distortion {dc:.6g}; "
                             "the discrete approximation is not established there")
        slb = classical_slb(src, dist, d).slb_rate
        V = src.varentropy
        label = "gaussian_disc"
        lo_corr, hi_corr = -1.0 / n, math.log(n) / (2 * n)
    else:
        src = _letter(src)
        dist = _mse_default(dist)
        slb = classical_slb(src, dist, d).slb_rate
        V = src.letter_varentropy
        label = "gaussian_cont"
        if kappa is None:
            cert = v_bound(src)
            kappa = 2.0 * (cert.c1 * math.sqrt(src.second_moment) + cert.c0)
        lo_corr = -1.0 / n
        hi_corr = (kappa * math.sqrt(d) + math.log2(2 * math.sqrt(math.pi * math.e)) * math.log(n) / n
                   + loglog_c * math.log(max(math.log(n), 1.0)) / n)
    if V == 0:
        flags.append("zero_varentropy")
    rate = slb + math.sqrt(V / n) * q
    terms = ApproximationTerms(slb, V, q, lo_corr, hi_corr)
    return BoundPoint(n, d, eps, label, rate, flags=tuple(flags),
                      metadata={"band": (rate + lo_corr, rate + hi_corr), "terms": terms,
                                "kappa": kappa})


# -- sources with memory ------------------------------------------------------------

@dataclass(frozen=True)
class ProcessDescriptor:
    """Block statistics of a process: h(X^n)/n, log-concavity, certificate, alpha = E[X^2]."""

    entropy_rate: float
    log_concave: bool
    c1: float
    c0: float
    alpha: float

    @classmethod
    def from_source(cls, src: ContinuousSource) -> "ProcessDescriptor":
        cert = v_bound(src.letter)
        return cls(src.letter_entropy, src.is_log_concave, cert.c1, cert.c0, src.second_moment)


def memory_bounds(proc: ProcessDescriptor, n: int, d: float, eps: float,
                  family: str = "an_star") -> dict:
    """Chebyshev-type converse and achievability for log-concave sources with memory."""
    _check_eps(eps)
    if not proc.log_concave:
        raise ValueError("memory converse needs a log-concave density (Var[log f] <= n)")
    slb = proc.entropy_rate - 0.5 * math.log(2 * math.pi * math.e * d)
    den = 1.0 - eps - 1.0 / math.sqrt(n)
    conv_flags = ()
    if den <= 0:
        conv = 0.0
        conv_flags = ("vacuous",)
    else:
        conv = slb - math.sqrt(1.0 / (den * n)) - math.log(n) / (2 * n)
        if conv <= 0:
            conv_flags = ("vacuous",)
            conv = max(conv, 0.0)
    eps_p = eps - 1.0 / n
    logV, _ = _scaled_log_volume(family, n, d)
    gamma = 2 * n * math.sqrt(d) * (proc.c1 * math.sqrt(proc.alpha) + proc.c1 * math.sqrt(d) + proc.c0)
    if eps_p <= 0:
        ach, ach_flags = math.inf, ("infeasible",)
    else:
        ach = (n * proc.entropy_rate - logV + math.sqrt(n / eps_p) + gamma) / n
        ach_flags = ()
    band = (-math.sqrt(1.0 / (1.0 - eps)), math.sqrt(1.0 / eps))
    return {
        "converse": BoundPoint(n, d, eps, "memory_converse", conv, flags=conv_flags),
        "achievability": BoundPoint(n, d, eps, "memory_achievability", ach, gamma,
                                    flags=ach_flags, metadata={"lattice": family}),
        "q_band": band,
        "slb": slb,
    }


def slb_point(src: ContinuousSource, dist, n: int, d: float, eps: float) -> BoundPoint:
    dist = _mse_default(dist)
    return BoundPoint(n, d, eps, "slb", classical_slb(_letter(src), dist, d).slb_rate)
