"""Distortion measures, radius-of-distortion maps and distortion-ball volumes.

Supported kinds
---------------
``mse``            (1/n) ||x - y||^2
``hamming``        binary symbol mismatch
``symbol_error``   mismatch on an m-ary alphabet
``lp_pow``         n^{-s/p} ||x - y||_p^s, with 1 <= p <= inf and s > 0
``weighted_mse``   (1/n) ||W (x - y)||^2 for an invertible n x n matrix W
``matrix``         arbitrary finite distortion matrix d(x, y) = rows[x][y]

The continuous kinds are all of the form d(x, y) = dd(n^{-1/p} ||W (x - y)||_p)
with a scalar profile dd(r); MSE is p = 2, dd(r) = r^2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .infomath import log_unit_ball_volume

CONTINUOUS_KINDS = ("mse", "lp_pow", "weighted_mse")
FINITE_KINDS = ("hamming", "symbol_error", "matrix")


class DistortionError(ValueError):
    """Raised for malformed distortion measures or incompatible arguments."""


@dataclass(frozen=True)
class DistortionMeasure:
    kind: str
    dimension: int = 1
    m: int | None = None
    p: float = 2.0
    s: float = 2.0
    W: tuple | None = None
    rows: tuple | None = None

    def __post_init__(self):
        if self.kind not in CONTINUOUS_KINDS + FINITE_KINDS:
            raise DistortionError(f"unknown distortion kind {self.kind!r}")
        if self.dimension < 1:
            raise DistortionError("dimension must be a positive integer")
        if self.kind == "lp_pow":
            if not self.p >= 1.0:
                raise DistortionError(f"lp_pow needs p >= 1, got {self.p}")
            if not self.s > 0.0:
                raise DistortionError(f"lp_pow needs s > 0, got {self.s}")
        if self.kind == "symbol_error" and (self.m is None or self.m < 2):
            raise DistortionError("symbol_error needs an alphabet size m >= 2")
        if self.kind == "weighted_mse":
            W = np.asarray(self.W, dtype=float)
            if W.ndim != 2 or W.shape[0] != W.shape[1]:
                raise DistortionError("weighted_mse needs a square matrix W")
            if abs(np.linalg.det(W)) == 0.0:
                raise DistortionError("weighted_mse matrix W is singular")
            object.__setattr__(self, "dimension", W.shape[0])
        if self.kind == "matrix":
            R = np.asarray(self.rows, dtype=float)
            if R.ndim != 2 or R.size == 0:
                raise DistortionError("matrix distortion needs a 2-D array of rows")
            if np.any(R < 0) or not np.all(np.isfinite(R)):
                raise DistortionError("matrix distortion entries must be finite and nonnegative")
            if np.any(R.min(axis=1) != 0.0):
                raise DistortionError("every row of a matrix distortion needs a zero entry")

    # -- constructors -----------------------------------------------------

    @classmethod
    def mse(cls, dimension: int = 1) -> "DistortionMeasure":
        return cls("mse", dimension=dimension, p=2.0, s=2.0)

    @classmethod
    def hamming(cls) -> "DistortionMeasure":
        return cls("hamming", m=2)

    @classmethod
    def symbol_error(cls, m: int) -> "DistortionMeasure":
        return cls("symbol_error", m=m)

    @classmethod
    def lp_pow(cls, p: float, s: float, dimension: int = 1) -> "DistortionMeasure":
        return cls("lp_pow", dimension=dimension, p=float(p), s=float(s))

    @classmethod
    def weighted_mse(cls, W) -> "DistortionMeasure":
        W = np.asarray(W, dtype=float)
        return cls("weighted_mse", W=tuple(map(tuple, W)), p=2.0, s=2.0)

    @classmethod
    def matrix(cls, rows) -> "DistortionMeasure":
        R = np.asarray(rows, dtype=float)
        return cls("matrix", m=R.shape[0], rows=tuple(map(tuple, R)))

    @classmethod
    def from_json(cls, obj: dict) -> "DistortionMeasure":
        try:
            kind = obj["kind"]
        except (KeyError, TypeError):
            raise DistortionError("distortion descriptor needs a 'kind' field") from None
        if kind == "mse":
            return cls.mse(int(obj.get("n", 1)))
        if kind == "hamming":
            return cls.hamming()
        if kind == "symbol_error":
            return cls.symbol_error(int(obj["m"]))
        if kind == "lp_pow":
            p = obj.get("p", 2)
            p = math.inf if p in ("inf", "Infinity", math.inf) else float(p)
            return cls.lp_pow(p, float(obj.get("s", 2)), int(obj.get("n", 1)))
        if kind == "weighted_mse":
            return cls.weighted_mse(obj["W"])
        if kind == "matrix":
            return cls.matrix(obj["rows"])
        raise DistortionError(f"unknown distortion kind {kind!r}")

    def to_json(self) -> dict:
        if self.kind == "mse":
            return {"kind": "mse", "n": self.dimension}
        if self.kind == "hamming":
            return {"kind": "hamming"}
        if self.kind == "symbol_error":
            return {"kind": "symbol_error", "m": self.m}
        if self.kind == "lp_pow":
            p = "inf" if math.isinf(self.p) else self.p
            return {"kind": "lp_pow", "p": p, "s": self.s, "n": self.dimension}
        if self.kind == "weighted_mse":
            return {"kind": "weighted_mse", "W": [list(r) for r in self.W]}
        return {"kind": "matrix", "rows": [list(r) for r in self.rows]}

    # -- derived views ----------------------------------------------------

    @property
    def is_finite(self) -> bool:
        return self.kind in FINITE_KINDS

    @property
    def alphabet_size(self) -> int:
        if not self.is_finite:
            raise DistortionError(f"{self.kind} has no finite alphabet")
        return self.m if self.kind != "matrix" else len(self.rows)

    def as_matrix(self) -> np.ndarray:
        """Distortion matrix d[x, y] for the finite kinds."""
        if self.kind == "hamming":
            return 1.0 - np.eye(2)
        if self.kind == "symbol_error":
            return 1.0 - np.eye(self.m)
        if self.kind == "matrix":
            return np.array(self.rows, dtype=float)
        raise DistortionError(f"{self.kind} is not a finite distortion")

    @property
    def weight_logdet(self) -> float:
        """log |det W| (zero when there is no weighting)."""
        if self.kind != "weighted_mse":
            return 0.0
        return float(np.linalg.slogdet(np.asarray(self.W, dtype=float))[1])

    def profile(self) -> Callable[[np.ndarray], np.ndarray]:
        """Scalar profile dd(r) for the continuous kinds."""
        if self.kind not in CONTINUOUS_KINDS:
            raise DistortionError(f"{self.kind} has no scalar radius representation")
        s = self.s
        return lambda r: np.asarray(r, dtype=float) ** s


def _as_vectors(x, y):
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if x.shape != y.shape:
        raise DistortionError(f"shape mismatch: {x.shape} vs {y.shape}")
    return x, y


def evaluate(dist: DistortionMeasure, x, y) -> float:
    """Per-letter normalised distortion between ``x`` and ``y``.

    Single-letter kinds (dimension 1) accept vectors of any common length n
    and evaluate the n-letter extension; kinds with a fixed dimension
    (weighted MSE, or an explicit ``dimension``) require exactly that length.
    """
    if dist.is_finite:
        xs = np.atleast_1d(np.asarray(x))
        ys = np.atleast_1d(np.asarray(y))
        if xs.shape != ys.shape:
            raise DistortionError(f"shape mismatch: {xs.shape} vs {ys.shape}")
        D = dist.as_matrix()
        for v, size in ((xs, D.shape[0]), (ys, D.shape[1])):
            if np.any((v < 0) | (v >= size)) or np.any(v != np.floor(v)):
                raise DistortionError(f"symbol outside alphabet 0..{size - 1}")
        return float(np.mean(D[xs.astype(int), ys.astype(int)]))

    x, y = _as_vectors(x, y)
    n = x.size
    if dist.dimension > 1 and n != dist.dimension:
        raise DistortionError(f"expected vectors of length {dist.dimension}, got {n}")
    z = x - y
    if dist.kind == "weighted_mse":
        z = np.asarray(dist.W, dtype=float) @ z
    if dist.kind in ("mse", "weighted_mse"):
        return float(np.dot(z, z) / n)
    if math.isinf(dist.p):
        r = float(np.max(np.abs(z)))
    else:
        r = float(np.sum(np.abs(z) ** dist.p) ** (1.0 / dist.p)) * n ** (-1.0 / dist.p)
    return r ** dist.s


def radius_from_profile(profile: Callable[[float], float], threshold: float,
                        r_max: float, tol: float = 1e-12) -> float:
    """inf{r >= 0 : profile(r) <= threshold} by bisection on [0, r_max].

    The profile is assumed nondecreasing; ``r_max`` must satisfy
    ``profile(r_max) > threshold`` unless the whole interval qualifies.
    """
    if threshold < 0:
        raise DistortionError("threshold must be nonnegative")
    if profile(r_max) <= threshold:
        return float(r_max)
    lo, hi = 0.0, float(r_max)
    if profile(lo) > threshold:
        return 0.0
    # invariant: profile(lo) <= threshold < profile(hi)
    while hi - lo > tol * max(1.0, hi):
        mid = 0.5 * (lo + hi)
        if profile(mid) <= threshold:
            lo = mid
        else:
            hi = mid
    return lo


def radius_of_distortion(dist: DistortionMeasure, threshold: float) -> float:
    """r(d): the largest scalar radius whose profile value is at most ``threshold``."""
    if not threshold > 0:
        raise DistortionError(f"distortion threshold must be positive, got {threshold}")
    if dist.kind not in CONTINUOUS_KINDS:
        raise DistortionError(f"{dist.kind} has no scalar radius representation")
    return float(threshold ** (1.0 / dist.s))


def covering_radius_for(dist: DistortionMeasure, n: int, threshold: float) -> float:
    """Norm radius n^{1/p} r(d) of the distortion-d ball in R^n."""
    r = radius_of_distortion(dist, threshold)
    scale = 1.0 if math.isinf(dist.p) else n ** (1.0 / dist.p)
    return scale * r


def ball_log_volume(dist: DistortionMeasure, n: int, threshold: float) -> float:
    """log Lebesgue volume of {z in R^n : d(z, 0) <= threshold}, in nats."""
    if n < 1:
        raise DistortionError("dimension must be positive")
    if dist.kind == "weighted_mse" and n != dist.dimension:
        raise DistortionError(f"weighted_mse is defined for n = {dist.dimension}")
    radius = covering_radius_for(dist, n, threshold)
    return float(log_unit_ball_volume(n, dist.p) + n * math.log(radius) - dist.weight_logdet)


def is_balanced(dist) -> bool:
    """True when every column holds the same multiset, the diagonal is zero and
    off-diagonal entries are positive."""
    D = dist.as_matrix() if isinstance(dist, DistortionMeasure) else np.asarray(dist, dtype=float)
    if D.ndim != 2 or D.shape[0] != D.shape[1]:
        return False
    if np.any(np.diag(D) != 0.0):
        return False
    off = D[~np.eye(D.shape[0], dtype=bool)]
    if np.any(off <= 0.0):
        return False
    cols = np.sort(D, axis=0)
    return bool(np.all(cols == cols[:, :1]))


def difference_profile(dist: DistortionMeasure) -> np.ndarray:
    """dd(z), z = 0..m-1, when d(x, y) = dd((x - y) mod m); raises otherwise."""
    D = dist.as_matrix()
    m = D.shape[0]
    if D.shape[1] != m:
        raise DistortionError("group-structured distortion must be square")
    prof = D[:, 0].copy()
    idx = np.arange(m)
    expected = prof[(idx[:, None] - idx[None, :]) % m]
    if not np.array_equal(expected, D):
        raise DistortionError("distortion matrix is not of the form d((x - y) mod m)")
    return prof
