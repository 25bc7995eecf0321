"""Source models: finite pmfs and continuous product densities.

All entropies are in nats.  Random streams come from a counter-based Philox
generator keyed by ``(seed, stream)`` so that Monte-Carlo runs are exactly
reproducible and can be split across workers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, special

from .distortion import DistortionMeasure

FAMILIES = ("gaussian", "uniform", "laplace")


def make_rng(seed: int, stream: int = 0) -> np.random.Generator:
    """Independent reproducible substream ``stream`` of a 64-bit ``seed``."""
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, int(stream)])
    return np.random.Generator(np.random.Philox(ss))


# -- finite sources ----------------------------------------------------------

@dataclass(frozen=True)
class FiniteSource:
    pmf: tuple
    distortion: DistortionMeasure

    def __post_init__(self):
        p = np.asarray(self.pmf, dtype=float)
        if p.ndim != 1 or p.size < 2:
            raise ValueError("pmf must be a vector with at least two entries")
        if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-12:
            raise ValueError("pmf entries must be nonnegative and sum to 1")
        if not self.distortion.is_finite:
            raise ValueError("finite sources need a finite distortion measure")
        if self.distortion.as_matrix().shape[0] != p.size:
            raise ValueError("pmf length does not match the distortion matrix rows")
        object.__setattr__(self, "pmf", tuple(float(v) for v in p))

    @classmethod
    def binary(cls, p: float) -> "FiniteSource":
        return cls((1.0 - p, p), DistortionMeasure.hamming())

    @classmethod
    def from_json(cls, obj: dict) -> "FiniteSource":
        return cls(tuple(obj["pmf"]), DistortionMeasure.from_json(obj["distortion"]))

    def to_json(self) -> dict:
        return {"pmf": list(self.pmf), "distortion": self.distortion.to_json()}

    @property
    def p(self) -> np.ndarray:
        return np.asarray(self.pmf)

    @property
    def entropy(self) -> float:
        p = self.p
        return float(-np.sum(special.xlogy(p, p)))

    @property
    def varentropy(self) -> float:
        p = self.p
        logp = np.where(p > 0, np.log(np.where(p > 0, p, 1.0)), 0.0)
        mean = float(p @ logp)
        return float(p @ (logp - mean) ** 2)

    def log_prob(self, x) -> float:
        x = int(x)
        if not 0 <= x < len(self.pmf):
            raise ValueError(f"symbol {x} outside alphabet")
        return math.log(self.pmf[x]) if self.pmf[x] > 0 else -math.inf

    def sample(self, size, rng: np.random.Generator) -> np.ndarray:
        return rng.choice(len(self.pmf), size=size, p=self.p)


# -- continuous sources ------------------------------------------------------

def _abs_central_third(logpdf, lo, hi, h):
    """E|log f(X) + h|^3 by quadrature over the scalar support."""
    f = lambda x: abs(logpdf(x) + h) ** 3 * math.exp(logpdf(x))  # noqa: E731
    return integrate.quad(f, lo, hi, limit=400, epsabs=1e-13)[0]


@dataclass(frozen=True)
class ContinuousSource:
    """A scalar family or the product of ``dimension`` i.i.d. copies of it.

    Parameters live in ``params``: ``var`` (gaussian), ``a``/``b`` (uniform),
    ``b`` (laplace scale).  Moments are per letter and computed at construction.
    """

    family: str
    params: tuple
    dimension: int = 1
    letter_entropy: float = field(init=False)
    letter_varentropy: float = field(init=False)
    second_moment: float = field(init=False)
    fourth_moment: float = field(init=False)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown source family {self.family!r}")
        if self.dimension < 1:
            raise ValueError("dimension must be positive")
        P = dict(self.params)
        if self.family == "gaussian":
            v = P["var"]
            if not v > 0:
                raise ValueError("gaussian variance must be positive")
            h, V, m2, m4 = 0.5 * math.log(2 * math.pi * math.e * v), 0.5, v, 3 * v * v
        elif self.family == "uniform":
            a, b = P["a"], P["b"]
            if not b > a:
                raise ValueError("uniform needs a < b")
            h, V = math.log(b - a), 0.0
            m2 = (a * a + a * b + b * b) / 3.0
            m4 = (b ** 5 - a ** 5) / (5.0 * (b - a))
        else:
            b = P["b"]
            if not b > 0:
                raise ValueError("laplace scale must be positive")
            h, V, m2, m4 = 1.0 + math.log(2 * b), 1.0, 2 * b * b, 24 * b ** 4
        object.__setattr__(self, "letter_entropy", h)
        object.__setattr__(self, "letter_varentropy", V)
        object.__setattr__(self, "second_moment", m2)
        object.__setattr__(self, "fourth_moment", m4)

    # constructors

    @classmethod
    def gaussian(cls, var: float = 1.0, dimension: int = 1) -> "ContinuousSource":
        return cls("gaussian", (("var", float(var)),), dimension)

    @classmethod
    def uniform(cls, a: float = 0.0, b: float = 1.0, dimension: int = 1) -> "ContinuousSource":
        return cls("uniform", (("a", float(a)), ("b", float(b))), dimension)

    @classmethod
    def laplace(cls, b: float = 1.0, dimension: int = 1) -> "ContinuousSource":
        return cls("laplace", (("b", float(b)),), dimension)

    @classmethod
    def from_json(cls, obj: dict) -> "ContinuousSource":
        fam = obj.get("family")
        if fam == "product":
            letter = cls.from_json(obj["letter"])
            return letter.product(int(obj["n"]))
        if fam == "gaussian":
            return cls.gaussian(float(obj.get("var", 1.0)))
        if fam == "uniform":
            return cls.uniform(float(obj.get("a", 0.0)), float(obj.get("b", 1.0)))
        if fam == "laplace":
            return cls.laplace(float(obj.get("b", 1.0)))
        raise ValueError(f"unknown source family {fam!r}")

    def to_json(self) -> dict:
        letter = {"family": self.family, **dict(self.params)}
        if self.dimension == 1:
            return letter
        return {"family": "product", "n": self.dimension, "letter": letter}

    def product(self, n: int) -> "ContinuousSource":
        return ContinuousSource(self.family, self.params, int(n))

    @property
    def letter(self) -> "ContinuousSource":
        return self.product(1)

    # information quantities (n-letter unless noted)

    @property
    def entropy(self) -> float:
        """Differential entropy h(X^n)."""
        return self.dimension * self.letter_entropy

    diff_entropy = entropy

    @property
    def varentropy(self) -> float:
        """Var[log f(X^n)]."""
        return self.dimension * self.letter_varentropy

    @property
    def is_log_concave(self) -> bool:
        return True

    def letter_third_abs_moment(self) -> float:
        """E|log f(X) + h(X)|^3 for one letter."""
        P = dict(self.params)
        h = self.letter_entropy
        if self.family == "uniform":
            return 0.0
        if self.family == "gaussian":
            s = math.sqrt(P["var"])
            return _abs_central_third(self._letter_logpdf, -40 * s, 40 * s, h)
        b = P["b"]
        # |X|/b is Exp(1) and log f + h = 1 - |X|/b
        return integrate.quad(lambda t: abs(1.0 - t) ** 3 * math.exp(-t), 0.0, np.inf,
                              points=None, limit=200)[0] if b > 0 else 0.0

    def _letter_logpdf(self, x: float) -> float:
        return float(self.log_density(np.array([x]), letterwise=True)[0])

    def log_density(self, x, letterwise: bool = False) -> np.ndarray:
        """log f over the last axis (or per letter when ``letterwise``)."""
        x = np.asarray(x, dtype=float)
        P = dict(self.params)
        if self.family == "gaussian":
            v = P["var"]
            lp = -0.5 * math.log(2 * math.pi * v) - x * x / (2 * v)
        elif self.family == "uniform":
            a, b = P["a"], P["b"]
            inside = (x >= a) & (x <= b)
            lp = np.where(inside, -math.log(b - a), -np.inf)
        else:
            b = P["b"]
            lp = -math.log(2 * b) - np.abs(x) / b
        if letterwise:
            return lp
        if self.dimension == 1 and (x.ndim == 0 or x.shape[-1] != 1):
            return lp
        return np.sum(lp, axis=-1)

    def log_prob(self, x) -> float:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if x.size != self.dimension:
            raise ValueError(f"expected {self.dimension} coordinates, got {x.size}")
        return float(np.sum(self.log_density(x, letterwise=True)))

    def grad_log_density(self, x) -> np.ndarray:
        """Analytic gradient of log f (a.e. for Laplace; zero inside the uniform box)."""
        x = np.asarray(x, dtype=float)
        P = dict(self.params)
        if self.family == "gaussian":
            return -x / P["var"]
        if self.family == "uniform":
            return np.zeros_like(x)
        return -np.sign(x) / P["b"]

    def sample(self, size: int, rng: np.random.Generator) -> np.ndarray:
        """``size`` draws of shape (size, dimension)."""
        P = dict(self.params)
        shape = (int(size), self.dimension)
        if self.family == "gaussian":
            return rng.normal(0.0, math.sqrt(P["var"]), size=shape)
        if self.family == "uniform":
            return rng.uniform(P["a"], P["b"], size=shape)
        return rng.laplace(0.0, P["b"], size=shape)

    def sample_stats(self, size: int, rng: np.random.Generator, chunk: int = 1 << 16):
        """Draw (-log f(X), ||X||) for ``size`` independent X in R^n.

        For the Gaussian family both are functions of ||X||^2 ~ var * chi2_n,
        which is sampled directly instead of the full vector.
        """
        P = dict(self.params)
        n = self.dimension
        if self.family == "gaussian":
            v = P["var"]
            sq = v * rng.chisquare(n, size=int(size))
            nll = 0.5 * n * math.log(2 * math.pi * v) + sq / (2 * v)
            return nll, np.sqrt(sq)
        nll = np.empty(int(size))
        norm = np.empty(int(size))
        per = max(1, chunk // n)
        for start in range(0, int(size), per):
            stop = min(int(size), start + per)
            x = self.sample(stop - start, rng)
            nll[start:stop] = -np.sum(self.log_density(x, letterwise=True), axis=1)
            norm[start:stop] = np.linalg.norm(x, axis=1)
        return nll, norm

    def mean_norm(self) -> tuple[float, bool]:
        """E||X^n|| and whether the value is exact (else the Jensen bound sqrt(n E X^2))."""
        n = self.dimension
        P = dict(self.params)
        if self.family == "gaussian":
            s = math.sqrt(P["var"])
            val = s * math.sqrt(2.0) * math.exp(special.gammaln((n + 1) / 2) - special.gammaln(n / 2))
            return float(val), True
        if n == 1:
            if self.family == "laplace":
                return P["b"], True
            a, b = P["a"], P["b"]
            if a >= 0:
                return (a + b) / 2, True
            if b <= 0:
                return -(a + b) / 2, True
            return (a * a + b * b) / (2 * (b - a)), True
        return math.sqrt(n * self.second_moment), False


@dataclass(frozen=True)
class RegularityCertificate:
    """f is (c1 ||x|| + c0 sqrt(n))-regular in the gradient-of-log sense (nats)."""

    c1: float
    c0: float
    note: str = ""

    def v(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        n = x.shape[-1]
        return self.c1 * np.linalg.norm(x, axis=-1) + self.c0 * math.sqrt(n)


def v_bound(src: ContinuousSource) -> RegularityCertificate:
    """Per-letter certificate v(x) = c1 |x| + c0 for the scalar family."""
    P = dict(src.params)
    if src.family == "gaussian":
        return RegularityCertificate(2.0 / P["var"], 0.0, "v(x) = (2/var)|x|")
    if src.family == "uniform":
        return RegularityCertificate(0.0, 0.0, "flat on the interior of the support")
    return RegularityCertificate(0.0, 1.0 / P["b"], "a.e. bound; kink at 0 has measure zero")


def product_regularity(parts) -> RegularityCertificate:
    """Certificate for a product density from per-letter certificates.

    ||(c1|x_1| + c0, ..., c1|x_n| + c0)|| <= c1 ||x|| + c0 sqrt(n) by the
    triangle inequality; heterogeneous parts use the largest constants.
    """
    parts = list(parts)
    if not parts:
        raise ValueError("need at least one part")
    return RegularityCertificate(max(p.c1 for p in parts), max(p.c0 for p in parts),
                                 "product")


def certificate_for(src: ContinuousSource) -> RegularityCertificate:
    return product_regularity([v_bound(src)] * src.dimension)


@dataclass(frozen=True)
class VarentropyEstimate:
    value: float
    se: float
    method: str


def varentropy(src, mc_samples: int | None = None, seed: int = 0) -> VarentropyEstimate:
    """Closed-form varentropy, or a Monte-Carlo estimate when ``mc_samples`` is set."""
    if mc_samples is None:
        return VarentropyEstimate(float(src.varentropy), 0.0, "closed_form")
    return mc_varentropy(src, mc_samples, seed)


def mc_varentropy(src, samples: int, seed: int = 0, chunk: int = 1 << 20) -> VarentropyEstimate:
    """Sample variance of log f(X) with the standard error of a sample variance."""
    rng = make_rng(seed, 11)
    vals = []
    left = int(samples)
    while left > 0:
        k = min(left, chunk)
        if isinstance(src, FiniteSource):
            x = src.sample(k, rng)
            vals.append(np.log(src.p[x]))
        else:
            vals.append(src.log_density(src.sample(k, rng)))
        left -= k
    lf = np.concatenate(vals)
    mu = lf.mean()
    c = lf - mu
    m2 = float(np.mean(c * c))
    m4 = float(np.mean(c ** 4))
    N = lf.size
    se = math.sqrt(max(m4 - m2 * m2, 0.0) / N)
    return VarentropyEstimate(m2 * N / (N - 1), se, "monte_carlo")


def mc_entropy(src, samples: int, seed: int = 0) -> tuple[float, float]:
    """Monte-Carlo -E[log f(X)] and its standard error."""
    rng = make_rng(seed, 12)
    lf = src.log_density(src.sample(samples, rng))
    return float(-lf.mean()), float(lf.std(ddof=1) / math.sqrt(lf.size))


def source_from_json(obj: dict):
    """Finite source for ``{"pmf": ...}`` descriptors, continuous otherwise."""
    if "pmf" in obj:
        return FiniteSource.from_json(obj)
    return ContinuousSource.from_json(obj)
