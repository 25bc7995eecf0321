"""Lattices, exact nearest-point decoders, covering geometry and output entropy.

A lattice point is ``scale * (G @ i + shift)`` for an integer index vector
``i``.  ``shift`` is a fixed offset in unscaled units; it lets the cells of a
scaled Z^1 line up with an interval such as [0, 1] and defaults to zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .distortion import DistortionError, DistortionMeasure, covering_radius_for
from .infomath import LN2, log_unit_ball_volume
from .sources import ContinuousSource, RegularityCertificate, certificate_for, make_rng

FAMILIES = ("zn", "dn", "an_star", "custom")


# -- generators ----------------------------------------------------------------

def _helmert_basis(n: int) -> np.ndarray:
    """Orthonormal (n+1) x n basis of the zero-sum hyperplane in R^{n+1}."""
    B = np.zeros((n + 1, n))
    for k in range(1, n + 1):
        B[:k, k - 1] = 1.0
        B[k, k - 1] = -float(k)
        B[:, k - 1] /= math.sqrt(k * (k + 1))
    return B


def _an_star_generator(n: int) -> np.ndarray:
    # A_n* is the dual of A_n; the dual basis of the projected A_n basis
    B = _helmert_basis(n)
    A = np.zeros((n + 1, n))
    for k in range(n):
        A[k, k], A[k + 1, k] = 1.0, -1.0
    G = B.T @ A
    return G @ np.linalg.inv(G.T @ G)


def _dn_generator(n: int) -> np.ndarray:
    if n == 1:
        return np.array([[2.0]])
    G = np.zeros((n, n))
    G[0, 0], G[1, 0] = -1.0, -1.0
    G[0, 1], G[1, 1] = 1.0, -1.0
    for k in range(2, n):
        G[k - 1, k], G[k, k] = 1.0, -1.0
    return G


def _an_star_glue(n: int) -> np.ndarray:
    """Glue vectors [i], i = 0..n, of A_n* over A_n in R^{n+1}."""
    glue = np.zeros((n + 1, n + 1))
    for i in range(n + 1):
        j = n + 1 - i
        glue[i, :j] = i / (n + 1)
        glue[i, j:] = -j / (n + 1)
    return glue


# -- the lattice object -----------------------------------------------------------

@dataclass(frozen=True)
class Lattice:
    family: str
    n: int
    generator: tuple
    scale: float = 1.0
    shift: tuple | None = None
    p: float = 2.0
    base_radius: float | None = None
    flags: tuple = ()

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown lattice family {self.family!r}")
        G = np.asarray(self.generator, dtype=float)
        if G.shape != (self.n, self.n):
            raise ValueError(f"generator must be {self.n} x {self.n}")
        if abs(np.linalg.det(G)) == 0.0:
            raise ValueError("generator matrix is singular")
        if not self.scale > 0:
            raise ValueError("scale must be positive")
        if self.p != 2.0 and self.family != "zn":
            raise ValueError("non-Euclidean nearest-point rules are only provided for Z^n")

    @property
    def G(self) -> np.ndarray:
        return np.asarray(self.generator, dtype=float)

    @property
    def shift_vec(self) -> np.ndarray:
        return np.zeros(self.n) if self.shift is None else np.asarray(self.shift, dtype=float)

    @property
    def log_cell_volume(self) -> float:
        return self.n * math.log(self.scale) + float(np.linalg.slogdet(self.G)[1])

    @property
    def cell_volume(self) -> float:
        return math.exp(self.log_cell_volume)

    def scaled(self, t: float) -> "Lattice":
        return replace(self, scale=self.scale * t)

    def to_json(self) -> dict:
        if self.family == "custom":
            return {"family": "custom", "generator": [list(r) for r in self.generator]}
        return {"family": self.family, "n": self.n}


def make_lattice(family: str, n: int, scale: float = 1.0, shift=None, p: float = 2.0) -> Lattice:
    """Named lattice in canonical coordinates."""
    family = family.lower()
    if n < 1:
        raise ValueError("dimension must be positive")
    if family == "zn":
        G = np.eye(n)
        radius = (0.5 if math.isinf(p) else 0.5 * n ** (1.0 / p))
    elif family == "dn":
        G = _dn_generator(n)
        radius = 1.0 if n == 1 else max(1.0, math.sqrt(n) / 2.0)
    elif family == "an_star":
        G = _an_star_generator(n)
        radius = math.sqrt(n * (n + 2) / (12.0 * (n + 1)))
    else:
        raise ValueError(f"unknown named lattice family {family!r}")
    if family != "zn" and p != 2.0:
        raise ValueError("non-Euclidean nearest-point rules are only provided for Z^n")
    sh = None if shift is None else tuple(np.broadcast_to(np.asarray(shift, float), (n,)))
    return Lattice(family, n, tuple(map(tuple, G)), float(scale), sh, float(p), radius)


def custom_lattice(generator, scale: float = 1.0, covering_radius: float | None = None) -> Lattice:
    G = np.asarray(generator, dtype=float)
    flags = () if covering_radius is not None else ("radius_unknown",)
    return Lattice("custom", G.shape[0], tuple(map(tuple, G)), float(scale), None, 2.0,
                   covering_radius, flags)


def lattice_from_json(obj: dict) -> Lattice:
    fam = str(obj.get("family", "")).lower()
    if fam == "custom":
        return custom_lattice(obj["generator"], covering_radius=obj.get("covering_radius"))
    return make_lattice(fam, int(obj["n"]))


# -- decoders -------------------------------------------------------------------

def _round_half_down(u):
    # ties go to the smaller integer
    return np.ceil(u - 0.5)


def _decode_an(Y):
    """Nearest point of A_n (zero-sum integer vectors) for each row of Y."""
    f = _round_half_down(Y)
    delta = f.sum(axis=1).astype(int)
    err = Y - f
    rank = np.argsort(np.argsort(err, axis=1, kind="stable"), axis=1, kind="stable")
    m = Y.shape[1]
    down = rank < delta[:, None]            # delta > 0: lower the most rounded-up coords
    up = rank >= (m + delta)[:, None]       # delta < 0: raise the most rounded-down coords
    return f - down + up


def _decode_an_star(U):
    n = U.shape[1]
    B = _helmert_basis(n)
    Ye = U @ B.T
    glue = _an_star_glue(n)
    best = None
    best_d = np.full(U.shape[0], np.inf)
    for g in glue:
        c = _decode_an(Ye - g) + g
        dist = np.sum((Ye - c) ** 2, axis=1)
        better = dist < best_d
        if best is None:
            best = c.copy()
        best[better] = c[better]
        best_d = np.where(better, dist, best_d)
    return best @ B


def _decode_dn(U):
    f = _round_half_down(U)
    odd = (f.sum(axis=1) % 2) != 0
    if np.any(odd):
        err = U[odd] - f[odd]
        k = np.argmax(np.abs(err), axis=1)
        rows = np.arange(err.shape[0])
        step = np.where(err[rows, k] >= 0, 1.0, -1.0)
        fo = f[odd]
        fo[rows, k] += step
        f[odd] = fo
    return f


def _enumerate_closest(G, U, radius2):
    """Exact closest points by breadth-first sphere enumeration, batched over rows."""
    n = G.shape[0]
    Qm, R = np.linalg.qr(G)
    Y = U @ Qm  # coordinates in the triangular frame: ||u - G i|| = ||y - R i||
    N = U.shape[0]
    pid = np.arange(N)
    idx = np.zeros((N, 0), dtype=np.int64)
    part = np.zeros(N)
    for k in range(n - 1, -1, -1):
        # idx columns hold levels n-1 .. k+1; R[k, k+1:] pairs with k+1 .. n-1
        tail = idx[:, ::-1] @ R[k, k + 1:] if idx.shape[1] else 0.0
        c = (Y[pid, k] - tail) / R[k, k]
        w = np.sqrt(np.maximum(radius2[pid] - part, 0.0)) / abs(R[k, k])
        lo = np.ceil(c - w - 1e-12).astype(np.int64)
        hi = np.floor(c + w + 1e-12).astype(np.int64)
        cnt = np.maximum(hi - lo + 1, 0)
        rep = np.repeat(np.arange(pid.size), cnt)
        offs = np.arange(rep.size) - np.repeat(np.cumsum(cnt) - cnt, cnt)
        vals = lo[rep] + offs
        part = part[rep] + (R[k, k] * (c[rep] - vals)) ** 2
        pid = pid[rep]
        idx = np.column_stack([idx[rep], vals])
    full = idx[:, ::-1]
    best = np.full(N, np.inf)
    np.minimum.at(best, pid, part)
    choose = part <= best[pid]
    out = np.zeros((N, n), dtype=np.int64)
    out[pid[choose]] = full[choose]
    return out


def _decode_custom(G, U):
    Ginv = np.linalg.inv(G)
    babai = np.rint(U @ Ginv.T)
    r2 = np.sum((U - babai @ G.T) ** 2, axis=1) * (1 + 1e-9) + 1e-12
    return _enumerate_closest(G, U, r2) @ G.T


def nearest_point(lat: Lattice, x):
    """Closest lattice point and its integer index.

    ``x`` is a vector of length n or an array of shape (N, n); the outputs
    follow the same shape.  Ties between equidistant points are resolved
    deterministically (they occur on a set of measure zero).
    """
    X = np.asarray(x, dtype=float)
    single = X.ndim == 1
    X2 = np.atleast_2d(X)
    if X2.shape[-1] != lat.n:
        raise ValueError(f"expected points of dimension {lat.n}, got {X2.shape[-1]}")
    U = X2 / lat.scale - lat.shift_vec
    if lat.family == "zn":
        C = _round_half_down(U)
    elif lat.family == "dn":
        C = _decode_dn(U)
    elif lat.family == "an_star":
        C = _decode_an_star(U)
    else:
        C = _decode_custom(lat.G, U)
    index = np.rint(np.linalg.solve(lat.G, C.T).T).astype(np.int64)
    pts = lat.scale * (index @ lat.G.T + lat.shift_vec)
    if single:
        return pts[0], index[0]
    return pts, index


def quantize_indices(lat: Lattice, X) -> np.ndarray:
    return nearest_point(lat, np.atleast_2d(X))[1]


def box_min_distance(lat: Lattice, X, center_index, half_width: int = 2) -> np.ndarray:
    """min ||x - G i|| over integer i within ``half_width`` of ``center_index`` (sup norm).

    Exhaustive over the (2 half_width + 1)^n box, with branches whose partial
    distance already exceeds ``bound`` pruned.  Used as a brute-force check.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    U = X / lat.scale - lat.shift_vec
    C0 = np.atleast_2d(center_index).astype(np.int64)
    G = lat.G
    n = lat.n
    Qm, R = np.linalg.qr(G)
    Y = U @ Qm
    N = U.shape[0]
    # start from the center itself so pruning has a finite radius
    bound = np.sum((U - C0 @ G.T) ** 2, axis=1) * (1 + 1e-9) + 1e-12
    pid = np.arange(N)
    chosen = np.zeros((N, 0), dtype=np.int64)  # levels n-1 .. k+1
    part = np.zeros(N)
    offsets = np.arange(-half_width, half_width + 1)
    for k in range(n - 1, -1, -1):
        vals = C0[pid, k][:, None] + offsets[None, :]
        tail = chosen[:, ::-1] @ R[k, k + 1:] if chosen.shape[1] else 0.0
        contrib = (Y[pid, k] - tail)[:, None] - R[k, k] * vals
        newpart = part[:, None] + contrib ** 2
        keep = newpart <= bound[pid][:, None]
        r, c = np.nonzero(keep)
        part = newpart[r, c]
        chosen = np.column_stack([chosen[r], vals[r, c]]) if chosen.shape[1] else vals[r, c][:, None]
        pid = pid[r]
    best = np.full(N, np.inf)
    np.minimum.at(best, pid, part)
    return np.sqrt(np.minimum(best, bound)) * lat.scale


# -- covering geometry --------------------------------------------------------------

@dataclass(frozen=True)
class LatticeGeometry:
    cell_volume: float
    log_cell_volume: float
    covering_radius: float
    covering_efficiency: float
    log_covering_efficiency: float
    estimated: bool = False


def estimate_covering_radius(lat: Lattice, probes: int = 1_000_000, seed: int = 0) -> float:
    """Largest quantization error over random and vertex probes of a fundamental cell."""
    rng = make_rng(seed, 41)
    G = lat.G
    n = lat.n
    corners = np.array(np.meshgrid(*[[0.0, 0.5, 1.0]] * n)).reshape(n, -1).T if n <= 8 else np.zeros((0, n))
    best = 0.0
    done = 0
    chunk = 20_000
    while done < probes:
        k = min(chunk, probes - done)
        u = rng.random((k, n))
        pts = u @ G.T
        q = _decode_custom(G, pts)
        best = max(best, float(np.sqrt(np.max(np.sum((pts - q) ** 2, axis=1)))))
        done += k
    if corners.size:
        pts = corners @ G.T
        q = _decode_custom(G, pts)
        best = max(best, float(np.sqrt(np.max(np.sum((pts - q) ** 2, axis=1)))))
    return best


def covering_geometry(lat: Lattice, probes: int = 1_000_000, seed: int = 0) -> LatticeGeometry:
    estimated = lat.base_radius is None
    base = estimate_covering_radius(lat, probes, seed) if estimated else lat.base_radius
    r = lat.scale * base
    logV = lat.log_cell_volume
    log_ratio = (logV - log_unit_ball_volume(lat.n, lat.p)) / lat.n
    log_rho = math.log(r) - log_ratio
    # the direct ratio keeps simple cases exact, e.g. rho(Z^1) = 1
    ratio = math.exp(logV) / math.exp(log_unit_ball_volume(lat.n, lat.p)) if abs(logV) < 700 else math.nan
    rho = r / ratio ** (1.0 / lat.n) if 0 < ratio < math.inf else math.exp(log_rho)
    return LatticeGeometry(math.exp(logV) if logV < 700 else math.inf, logV, r,
                           rho, log_rho, estimated)


def scale_to_distortion(lat: Lattice, dist: DistortionMeasure, d: float) -> Lattice:
    """Rescale ``lat`` so that its covering radius equals the distortion-d radius.

    Every input is then reproduced within per-letter distortion ``d``.
    """
    if not d > 0:
        raise DistortionError(f"distortion must be positive, got {d}")
    if dist.kind == "weighted_mse":
        raise DistortionError("weighted MSE scaling is not supported")
    if dist.is_finite:
        raise DistortionError("finite distortion measures cannot scale a lattice")
    if dist.kind == "lp_pow" and dist.p != 2.0:
        if lat.family != "zn":
            raise DistortionError("L^p scaling is provided for Z^n only")
        if lat.p != dist.p:
            lat = make_lattice("zn", lat.n, lat.scale, lat.shift, dist.p)
    target = covering_radius_for(dist, lat.n, d)
    flags = lat.flags
    base = lat.base_radius
    if base is None:
        base = estimate_covering_radius(lat)
        flags = tuple(sorted(set(flags) | {"radius_estimated"}))
    return replace(lat, scale=target / base, base_radius=base, flags=flags)


# -- output entropy -------------------------------------------------------------------

@dataclass
class SpectrumEstimate:
    entropy: float
    entropy_plugin: float
    se: float
    n_cells: int
    samples: int
    info_values: np.ndarray
    probs: np.ndarray
    flags: tuple = ()

    def ccdf(self):
        """(t, P[info > t]) at the distinct observed information values."""
        order = np.argsort(self.info_values)
        t = self.info_values[order]
        p = self.probs[order]
        tail = 1.0 - np.cumsum(p)
        return t, np.clip(tail, 0.0, 1.0)


def cell_counts(lat: Lattice, src: ContinuousSource, samples: int, seed: int = 0,
                stream: int = 31, chunk: int = 1 << 18):
    """Occupancy counts of quantization cells: (index rows, counts)."""
    rng = make_rng(seed, stream)
    keys, cnts = [], []
    left = int(samples)
    while left > 0:
        k = min(left, chunk)
        idx = quantize_indices(lat, src.sample(k, rng))
        u, c = np.unique(idx, axis=0, return_counts=True)
        keys.append(u)
        cnts.append(c)
        left -= k
    allk = np.concatenate(keys)
    allc = np.concatenate(cnts)
    u, inv = np.unique(allk, axis=0, return_inverse=True)
    counts = np.bincount(inv.ravel(), weights=allc).astype(np.int64)
    return u, counts


def entropy_from_counts(counts, samples=None):
    """Miller-Madow corrected plug-in entropy and its delta-method standard error."""
    counts = np.asarray(counts, dtype=float)
    N = counts.sum() if samples is None else float(samples)
    p = counts / N
    info = -np.log(p)
    H = float(p @ info)
    mm = H + (counts.size - 1) / (2.0 * N)
    var = float(p @ (info - H) ** 2)
    return mm, H, math.sqrt(var / N), info, p


def output_info_spectrum(lat: Lattice, src: ContinuousSource, samples: int = 1_000_000,
                         seed: int = 0) -> SpectrumEstimate:
    """Monte-Carlo law of the output information -log P[q(X)] and the output entropy."""
    _, counts = cell_counts(lat, src, samples, seed)
    mm, H, se, info, p = entropy_from_counts(counts, samples)
    flags = ("too_few_samples",) if samples < 10_000 else ()
    return SpectrumEstimate(mm, H, se, int(counts.size), int(samples), info, p, flags)


def exact_cell_entropy_1d(lat: Lattice, src: ContinuousSource, tail: float = 40.0) -> float:
    """Exact H(q(X)) for a scalar source from cell probabilities (CDF differences)."""
    from scipy import stats

    if lat.n != 1:
        raise ValueError("exact cell entropy is implemented for n = 1")
    P = dict(src.params)
    if src.family == "gaussian":
        dist = stats.norm(scale=math.sqrt(P["var"]))
        lo_x, hi_x = -tail * math.sqrt(P["var"]), tail * math.sqrt(P["var"])
    elif src.family == "laplace":
        dist = stats.laplace(scale=P["b"])
        lo_x, hi_x = -tail * P["b"], tail * P["b"]
    else:
        dist = stats.uniform(P["a"], P["b"] - P["a"])
        lo_x, hi_x = P["a"], P["b"]
    step = lat.scale * abs(lat.G[0, 0])
    off = lat.scale * lat.shift_vec[0]
    k0 = math.floor((lo_x - off) / step) - 1
    k1 = math.ceil((hi_x - off) / step) + 1
    centers = off + step * np.arange(k0, k1 + 1)
    edges = np.concatenate([centers - step / 2, centers[-1:] + step / 2])
    probs = np.diff(dist.cdf(edges))
    probs = probs[probs > 0]
    return float(-np.sum(probs * np.log(probs)))


@dataclass(frozen=True)
class Thm8Bound:
    entropy_bound: float
    base: float
    gap: float
    covering_radius: float
    mean_norm_exact: bool
    c1: float
    c0: float
    h: float

    def info_bound(self, src: ContinuousSource, x) -> np.ndarray:
        """Per-point bound on the output information at x."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        n = x.shape[-1]
        r = self.covering_radius
        vC = self.c1 * np.linalg.norm(x, axis=1) + self.c1 * r + self.c0 * math.sqrt(n)
        neg_log_v = self.base - self.h
        return -src.log_density(x, letterwise=True).sum(axis=1) + neg_log_v + 2 * r * vC


def entropy_upper_bound_thm8(lat: Lattice, src: ContinuousSource,
                             cert: RegularityCertificate | None = None) -> Thm8Bound:
    """Output entropy bound h(X) - log V + 2 r E[c1 ||X|| + c1 r + c0 sqrt(n)]."""
    if src.dimension != lat.n:
        raise ValueError("source and lattice dimensions differ")
    cert = certificate_for(src) if cert is None else cert
    geo = covering_geometry(lat)
    r = geo.covering_radius
    en, exact = src.mean_norm()
    ev = cert.c1 * en + cert.c1 * r + cert.c0 * math.sqrt(lat.n)
    base = src.entropy - geo.log_cell_volume
    gap = 2.0 * r * ev
    return Thm8Bound(base + gap, base, gap, r, exact, cert.c1, cert.c0, src.entropy)


def kl_bound(src: ContinuousSource, r: float, cert: RegularityCertificate | None = None) -> float:
    """Bound 2 r (c1 E||X|| + c1 r + c0 sqrt(n)) on D(X || X_C) for covering radius r."""
    cert = certificate_for(src) if cert is None else cert
    en, _ = src.mean_norm()
    return 2.0 * r * (cert.c1 * en + cert.c1 * r + cert.c0 * math.sqrt(src.dimension))


def an_star_log_rho(n: int) -> float:
    """log covering efficiency of A_n* (closed form)."""
    r = math.sqrt(n * (n + 2) / (12.0 * (n + 1)))
    logV = -0.5 * math.log(n + 1)
    return math.log(r) - (logV - log_unit_ball_volume(n)) / n


def rogers_term(n: int, c: float = 2.0) -> float:
    """Upper bound on n log rho for the best n-dimensional covering lattice (n >= 3)."""
    if n < 3:
        raise ValueError("the covering-density bound needs n >= 3")
    return math.log2(math.sqrt(2 * math.pi * math.e)) * (math.log(n) + math.log(math.log(n)) + c)


@dataclass(frozen=True)
class LatticeEntropyBounds:
    lower: float
    upper: float
    covering_term: float
    kl_term: float
    covering_source: str
    rogers_c: float


def lattice_d_entropy_bounds(src: ContinuousSource, d: float, cert=None,
                             rogers_c: float = 2.0) -> LatticeEntropyBounds:
    """Lower and upper bounds on the least lattice output entropy at MSE distortion d."""
    n = src.dimension
    r = math.sqrt(n * d)
    lower = src.entropy - n * math.log(r) - log_unit_ball_volume(n)
    cover = n * an_star_log_rho(n)
    source = "an_star"
    if n >= 3:
        rog = rogers_term(n, rogers_c)
        if rog < cover:
            cover, source = rog, "rogers"
    kl = kl_bound(src, r, cert)
    return LatticeEntropyBounds(lower, lower + cover + kl, cover, kl, source, rogers_c)


def bits(x):
    return x / LN2
