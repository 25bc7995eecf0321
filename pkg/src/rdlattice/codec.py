"""Lattice quantizer followed by a lossless code: an end-to-end simulator.

A training stream estimates the cell pmf; an independent evaluation stream is
then encoded, either with a Huffman code (variable length) or by keeping the
M likeliest cells (fixed length).
"""

from __future__ import annotations

import hashlib
import heapq
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats

from .infomath import LN2
from .lattice import Lattice, cell_counts, covering_geometry, entropy_from_counts, nearest_point
from .sources import ContinuousSource, make_rng

ESCAPE_PAYLOAD_BITS = 64
TRAIN_STREAM, EVAL_STREAM = 61, 62


@dataclass
class CodecStats:
    avg_length_bits: float
    entropy_bits: float
    entropy_se_bits: float
    samples: int
    seed: int
    d: float
    max_distortion: float
    violations: int
    eps_hat: float | None = None
    eps_ci: tuple | None = None
    M_used: int | None = None
    spectrum_bound: float | None = None
    escape_rate: float = 0.0
    flags: tuple = ()
    cells: list = field(default_factory=list, repr=False)

    def to_json(self) -> dict:
        out = asdict(self)
        out.pop("cells")
        out["flags"] = list(self.flags)
        if self.eps_ci is not None:
            out["eps_ci"] = list(self.eps_ci)
        return out


def huffman_lengths(weights) -> np.ndarray:
    """Codeword lengths of a binary Huffman code for positive ``weights``.

    Ties are broken by insertion order so the result is deterministic.
    """
    w = np.asarray(weights, dtype=float)
    k = w.size
    if k == 0:
        return np.zeros(0, dtype=int)
    if k == 1:
        return np.zeros(1, dtype=int)
    heap = [(float(w[i]), i, [i]) for i in range(k)]
    heapq.heapify(heap)
    lengths = np.zeros(k, dtype=int)
    tick = k
    while len(heap) > 1:
        w1, _, a = heapq.heappop(heap)
        w2, _, b = heapq.heappop(heap)
        for i in a:
            lengths[i] += 1
        for i in b:
            lengths[i] += 1
        heapq.heappush(heap, (w1 + w2, tick, a + b))
        tick += 1
    return lengths


def _row_keys(rows: np.ndarray):
    return [tuple(r) for r in rows.tolist()]


def cell_hash(row) -> str:
    return hashlib.blake2b(np.asarray(row, dtype=np.int64).tobytes(), digest_size=8).hexdigest()


def _eval_pass(lat: Lattice, src: ContinuousSource, samples: int, seed: int, d: float,
               chunk: int = 1 << 18):
    """Quantize the evaluation stream; returns unique cells, counts and distortion stats."""
    rng = make_rng(seed, EVAL_STREAM)
    keys, cnts = [], []
    worst = 0.0
    viol = 0
    left = int(samples)
    while left > 0:
        k = min(left, chunk)
        x = src.sample(k, rng)
        q, idx = nearest_point(lat, x)
        dist = np.sum((x - q) ** 2, axis=1) / lat.n
        worst = max(worst, float(dist.max()))
        viol += int(np.sum(dist > d * (1 + 1e-12)))
        u, c = np.unique(idx, axis=0, return_counts=True)
        keys.append(u)
        cnts.append(c)
        left -= k
    u, inv = np.unique(np.concatenate(keys), axis=0, return_inverse=True)
    counts = np.bincount(inv.ravel(), weights=np.concatenate(cnts)).astype(np.int64)
    return u, counts, worst, viol


def _distortion_level(lat: Lattice, d: float | None) -> float:
    if d is not None:
        return float(d)
    r = covering_geometry(lat).covering_radius
    return r * r / lat.n


def simulate_variable_length(src: ContinuousSource, lat: Lattice, samples: int = 1_000_000,
                             seed: int = 0, d: float | None = None) -> CodecStats:
    """Huffman-code the quantizer output; report bits per letter.

    The code covers the cells seen in training plus an escape symbol whose
    weight is the number of training singletons (an estimate of the unseen
    mass); escaped cells cost the escape codeword plus a 64-bit raw index.
    When training saw no singletons the escape is left out.
    """
    d = _distortion_level(lat, d)
    train_rows, train_counts = cell_counts(lat, src, samples, seed, stream=TRAIN_STREAM)
    singletons = int(np.sum(train_counts == 1))
    weights = train_counts.astype(float)
    has_escape = singletons > 0
    if has_escape:
        weights = np.append(weights, float(singletons))
    lengths = huffman_lengths(weights)
    code = dict(zip(_row_keys(train_rows), lengths[: train_rows.shape[0]].tolist()))
    esc_len = int(lengths[-1]) if has_escape else 0

    rows, counts, worst, viol = _eval_pass(lat, src, samples, seed, d)
    total_bits = 0
    escaped = 0
    cells = []
    for key, c in zip(_row_keys(rows), counts.tolist()):
        L = code.get(key)
        if L is None:
            escaped += c
            L = esc_len + ESCAPE_PAYLOAD_BITS
        total_bits += L * c
        cells.append((cell_hash(key), c, L))
    flags = []
    if escaped and not has_escape:
        flags.append("unseen_cells_without_escape")
    esc_rate = escaped / samples
    if esc_rate > 0.01:
        flags.append("escape_rate_above_1pct")
    if viol:
        flags.append("distortion_violation")
    H, _, se, _, _ = entropy_from_counts(counts, samples)
    n = lat.n
    return CodecStats(total_bits / (samples * n), H / LN2 / n, se / LN2 / n, int(samples),
                      int(seed), d, worst, viol, escape_rate=esc_rate, flags=tuple(flags),
                      cells=cells)


def wilson_interval(k: int, n: int, level: float = 0.95) -> tuple:
    ci = stats.binomtest(int(k), int(n)).proportion_ci(confidence_level=level, method="wilson")
    return float(ci.low), float(ci.high)


def simulate_fixed_length(src: ContinuousSource, lat: Lattice, M: int, samples: int = 1_000_000,
                          seed: int = 0, d: float | None = None) -> CodecStats:
    """Keep the M most frequent training cells; estimate the excess probability.

    Cells ranked by training count, ties by index order.  ``spectrum_bound``
    is the empirical P[output information > log M] on the evaluation stream.
    """
    M = int(M)
    if M < 1:
        raise ValueError("M must be at least 1")
    d = _distortion_level(lat, d)
    train_rows, train_counts = cell_counts(lat, src, samples, seed, stream=TRAIN_STREAM)
    order = np.lexsort((*train_rows.T[::-1], -train_counts))
    kept = {k for k in _row_keys(train_rows[order[:M]])}
    flags = []
    if M >= train_rows.shape[0]:
        flags.append("M_exceeds_observed_cells")

    rows, counts, worst, viol = _eval_pass(lat, src, samples, seed, d)
    keys = _row_keys(rows)
    inside = np.array([k in kept for k in keys])
    misses = int(counts[~inside].sum())
    eps_hat = misses / samples
    ci = wilson_interval(misses, samples)
    p = counts / samples
    info = -np.log(p)
    bound = float(p[info > math.log(M)].sum())
    if ci[0] > bound + 1e-12:
        flags.append("exceeds_spectrum_bound")
    if viol:
        flags.append("distortion_violation")
    H, _, se, _, _ = entropy_from_counts(counts, samples)
    n = lat.n
    return CodecStats(math.log2(M) / n if M > 1 else 0.0, H / LN2 / n, se / LN2 / n,
                      int(samples), int(seed), d, worst, viol, eps_hat=eps_hat, eps_ci=ci,
                      M_used=M, spectrum_bound=bound, flags=tuple(flags))
