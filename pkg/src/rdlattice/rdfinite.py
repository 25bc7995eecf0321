"""Finite-alphabet rate-distortion: Blahut-Arimoto with a dual certificate,
d-tilted information, the group-convolution equality test and the critical
distortion below which the Shannon lower bound is tight.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize, special

from .distortion import DistortionError, DistortionMeasure, difference_profile, is_balanced
from .sources import FiniteSource, make_rng
from .tilted import TiltRangeError, classical_slb, solve_lambda

__all__ = [
    "FiniteSource", "FiniteRdSolution", "ConvergenceError", "blahut_arimoto",
    "d_tilted_information", "SlbEqualityResult", "slb_equality_test",
    "critical_distortion", "CriticalDistortion", "ConverseResult", "converse_cj",
    "converse_cj_rate", "tilted_info_law",
]


class ConvergenceError(RuntimeError):
    """The alternating minimisation did not reach the requested tolerance."""


@dataclass(frozen=True)
class FiniteRdSolution:
    rate_nats: float
    lambda_star: float
    output_pmf: np.ndarray
    dual_g: np.ndarray
    tilted_info: np.ndarray
    iterations: int
    dual_gap: float
    distortion: float
    pmf: np.ndarray
    flags: tuple = ()

    @property
    def rate(self) -> float:
        return self.rate_nats

    def to_json(self) -> dict:
        return {
            "rate_nats": self.rate_nats,
            "lambda_star": self.lambda_star,
            "output_pmf": self.output_pmf.tolist(),
            "dual_g": self.dual_g.tolist(),
            "tilted_info": self.tilted_info.tolist(),
            "iterations": self.iterations,
            "dual_gap": self.dual_gap,
            "distortion": self.distortion,
            "flags": list(self.flags),
        }


def _ba_fixed_slope(p, A, q, tol, max_iter):
    """Alternating minimisation at fixed slope; returns (q_out, g, c, gap, iters).

    ``A = exp(-lam D)``.  The gap log max c - sum q_out log c bounds the
    distance between the primal mutual information and the dual value.
    """
    gap = math.inf
    for it in range(1, max_iter + 1):
        g = A @ q
        c = (p / g) @ A
        q_new = q * c
        pos = q_new > 0
        gap = float(np.log(c.max()) - np.sum(q_new[pos] * np.log(c[pos])))
        q = q_new / q_new.sum()
        if gap < tol:
            return q, gap, it
    return q, gap, max_iter


def _evaluate_slope(p, D, lam, q0, tol, max_iter, d):
    """Run the inner loop at slope ``lam``; return a record with primal and dual values.

    The primal pair (distortion, I(Q)) is achievable whether or not the loop
    converged, and the dual value at ``d`` is a valid lower bound on R(d) for
    any slope because ``g`` is rescaled to be feasible.
    """
    A = np.exp(-lam * D)
    q, gap, it = _ba_fixed_slope(p, A, q0, tol, max_iter)
    g = A @ q
    Q = q[None, :] * A / g[:, None]
    q_out = p @ Q
    dist = float(p @ np.sum(Q * D, axis=1))
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(Q > 0, Q * np.log(Q / q_out[None, :]), 0.0)
    mi = float(p @ terms.sum(axis=1))
    c = (p / g) @ A
    g_feas = g * c.max()
    dual = float(-p @ np.log(g_feas) - lam * d)
    return {"lam": lam, "q": q, "gap": gap, "iters": it, "D": dist, "I": mi,
            "g": g_feas, "dual": dual}


def blahut_arimoto(src: FiniteSource, d: float, tol: float = 1e-10,
                   max_iter: int = 20_000, max_gap: float = 1e-6) -> FiniteRdSolution:
    """R(d) of a finite source under its distortion matrix.

    The Lagrange slope is root-found so that the achieved distortion equals
    ``d``; at every slope the inner loop is warm-started from the previous
    output pmf.  Every evaluated slope yields a feasible dual point (a lower
    bound on R(d)) and an achievable primal point; ``rate_nats`` is the best
    dual value and ``dual_gap`` its distance to the best primal upper bound
    (time sharing between bracketing primal points on linear stretches of the
    curve).  Raises :class:`ConvergenceError` when that gap exceeds ``max_gap``.
    """
    if not d > 0:
        raise ValueError(f"distortion must be positive, got {d}")
    if not tol > 0:
        raise ValueError("tol must be positive")
    p = np.asarray(src.pmf, dtype=float)
    D = src.distortion.as_matrix()
    m, m_out = D.shape
    col_means = p @ D
    d_max = float(col_means.min())
    if d >= d_max:
        q = np.zeros(m_out)
        q[int(np.argmin(col_means))] = 1.0
        return FiniteRdSolution(0.0, 0.0, q, np.ones(m), np.zeros(m), 0, 0.0, float(d), p,
                                ("zero_rate",))

    inner_tol = tol * 1e-2
    records = []
    warm = {"q": np.full(m_out, 1.0 / m_out)}

    def achieved(lam):
        rec = _evaluate_slope(p, D, lam, warm["q"].copy(), inner_tol, max_iter, d)
        records.append(rec)
        # keep a floor on the warm start so letters can re-enter the support
        warm["q"] = np.maximum(rec["q"], 1e-300)
        return rec["D"] - d

    lo, hi = 0.0, 1.0
    while achieved(hi) > 0:
        lo, hi = hi, 2.0 * hi
        if hi > 1e4:
            raise ConvergenceError(f"distortion {d} not reachable with slopes up to 1e4")
    lam = optimize.brentq(achieved, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps,
                          maxiter=500)
    achieved(lam)
    if _certificate(records, d)[1] > 10 * tol:
        # slow convergence signals a linear stretch of R(d)
        records.extend(_breakpoint_records(p, D, records, d, inner_tol, max_iter))

    best, gap = _certificate(records, d)
    rate = best["dual"]
    iters = sum(r["iters"] for r in records)
    if not gap <= max_gap:
        raise ConvergenceError(f"duality gap {gap:.3e} above {max_gap:.1e} after {iters} iterations")
    flags = ("gap_above_tolerance",) if gap > 10 * tol else ()
    j = -np.log(best["g"]) - best["lam"] * d
    return FiniteRdSolution(float(rate), float(best["lam"]), best["q"], best["g"], j, iters,
                            float(gap), float(d), p, flags)


def _channel_record(p, D, Q, lam):
    q_out = p @ Q
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(Q > 0, Q * np.log(Q / q_out[None, :]), 0.0)
    return {"lam": lam, "q": q_out, "gap": math.nan, "iters": 0,
            "D": float(p @ np.sum(Q * D, axis=1)), "I": float(p @ terms.sum(axis=1)),
            "g": None, "dual": -math.inf}


def _face_records(p, D, lam, q, support):
    """Primal points at the two distortion extremes of the optimal face at one slope.

    Every output pmf on ``support`` that reproduces ``g = A q`` is optimal at
    slope ``lam``, so the chord between the extremes is a linear stretch of
    the curve.
    """
    A = np.exp(-lam * D)
    AS = A[:, support]
    b = A @ q
    cost = (p / b) @ (AS * D[:, support])
    A_eq = np.vstack([AS, np.ones(support.size)])
    b_eq = np.append(b, 1.0)
    out = []
    for sign in (1.0, -1.0):
        res = optimize.linprog(sign * cost, A_eq=A_eq, b_eq=b_eq, bounds=(0, None),
                               method="highs")
        if res.status != 0:
            continue
        qv = np.zeros_like(q)
        qv[support] = np.maximum(res.x, 0.0)
        gv = A @ qv
        out.append(_channel_record(p, D, qv[None, :] * A / gv[:, None], lam))
    return out


def _breakpoint_records(p, D, records, d, tol, max_iter):
    """Locate the slope where a reproduction letter enters the support.

    Near such a slope the achieved distortion jumps and the plain iteration
    crawls.  Restricted to the support found on the high-distortion side the
    problem stays regular; the entering slope is where the best excluded
    letter becomes tight, and the face there spans the jump.
    """
    settled = [r for r in records if r["g"] is not None and r["gap"] < 1e3 * tol]
    above = [r for r in settled if r["D"] > d]
    below = [r for r in settled if r["D"] <= d]
    if not above or not below:
        return []
    lam_lo = max(r["lam"] for r in above)
    lam_hi = min(r["lam"] for r in below)
    if not lam_lo < lam_hi:
        return []
    start = max(above, key=lambda r: r["lam"])
    left = _evaluate_slope(p, D, lam_lo, start["q"], tol, 10 * max_iter, d)
    S = np.flatnonzero(left["q"] > 1e-7)
    out_S = np.setdiff1d(np.arange(D.shape[1]), S)
    if out_S.size == 0:
        return [left]

    def restricted(lam):
        A = np.exp(-lam * D)
        qs, _, _ = _ba_fixed_slope(p, A[:, S], np.full(S.size, 1.0 / S.size), tol, max_iter)
        q = np.zeros(D.shape[1])
        q[S] = qs
        c = (p / (A @ q)) @ A
        return q, c

    def slack(lam):
        return float(restricted(lam)[1][out_S].max() - 1.0)

    if not (slack(lam_lo) < 0 < slack(lam_hi)):
        return [left]
    lam_c = optimize.brentq(slack, lam_lo, lam_hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)
    q, c = restricted(lam_c)
    A = np.exp(-lam_c * D)
    g = (A @ q) * c.max()
    dual = {"lam": lam_c, "q": q, "gap": 0.0, "iters": 0, "D": math.nan, "I": math.inf,
            "g": g, "dual": float(-p @ np.log(g) - lam_c * d)}
    support = np.flatnonzero((q > 0) | (c >= 1 - 1e-9))
    return [left, dual, *_face_records(p, D, lam_c, q, support)]


def _certificate(records, d):
    """Best dual record and its gap to the best primal upper bound on R(d)."""
    best = max(records, key=lambda r: r["dual"])
    upper = min((r["I"] for r in records if r["D"] <= d), default=math.inf)
    above = [r for r in records if r["D"] > d]
    below = [r for r in records if r["D"] <= d]
    if above and below:
        Da, Ia = (np.array([r[k] for r in above]) for k in ("D", "I"))
        Db, Ib = (np.array([r[k] for r in below]) for k in ("D", "I"))
        theta = (d - Db[None, :]) / (Da[:, None] - Db[None, :])
        upper = min(upper, float(np.min(theta * Ia[:, None] + (1 - theta) * Ib[None, :])))
    return best, max(upper - best["dual"], 0.0)


def d_tilted_information(sol: FiniteRdSolution, x: int) -> float:
    """j_X(x, d) = -log g(x) - lambda* d from a converged solution."""
    x = int(x)
    if not 0 <= x < sol.tilted_info.size:
        raise ValueError(f"symbol {x} outside alphabet")
    return float(sol.tilted_info[x])


def dual_constraint(sol: FiniteRdSolution, dist: DistortionMeasure) -> np.ndarray:
    """sum_x P(x) exp(-lambda d(x, y)) / g(x) for every reproduction letter y."""
    D = dist.as_matrix()
    return (sol.pmf / sol.dual_g) @ np.exp(-sol.lambda_star * D)


# -- equality of the Shannon lower bound -------------------------------------

@dataclass(frozen=True)
class SlbEqualityResult:
    holds: bool
    y_star_pmf: np.ndarray | None
    witness: float | None
    lam: float | None


def _circulant(z_pmf):
    m = len(z_pmf)
    idx = np.arange(m)
    return np.asarray(z_pmf)[(idx[:, None] - idx[None, :]) % m]


def slb_equality_test(src: FiniteSource, d: float) -> SlbEqualityResult:
    """Solve P_X = P_Y * P_Z (convolution mod m) for P_Y with Z the tilted law.

    Equality of the Shannon lower bound holds iff the solution is a pmf.
    """
    difference_profile(src.distortion)  # raises for non group-structured matrices
    p = np.asarray(src.pmf, dtype=float)
    try:
        z = solve_lambda(src.distortion, d)
    except TiltRangeError:
        return SlbEqualityResult(False, None, None, None)
    C = _circulant(z.pmf)
    try:
        y = np.linalg.solve(C, p)
    except np.linalg.LinAlgError:
        return SlbEqualityResult(False, None, None, z.lam)
    if not np.all(np.isfinite(y)) or np.linalg.cond(C) > 1e12:
        return SlbEqualityResult(False, None, None, z.lam)
    worst = float(y.min())
    if worst < -1e-10:
        return SlbEqualityResult(False, None, worst, z.lam)
    y = np.clip(y, 0.0, None)
    return SlbEqualityResult(True, y / y.sum(), None, z.lam)


@dataclass(frozen=True)
class CriticalDistortion:
    d_c: float
    verified: bool
    ba_slb_diff: float


def critical_distortion(src: FiniteSource, resolution: float = 1e-6) -> CriticalDistortion:
    """Largest d for which the Shannon lower bound is attained, by bisection.

    The result is checked against Blahut-Arimoto at d_c / 2.
    """
    if not is_balanced(src.distortion):
        raise DistortionError("critical distortion needs a balanced distortion matrix")
    dmax = float(np.mean(src.distortion.as_matrix()[:, 0]))
    lo = min(resolution, dmax / 2)
    if not slb_equality_test(src, lo).holds:
        return CriticalDistortion(0.0, False, math.nan)
    hi = dmax
    if slb_equality_test(src, hi * (1 - 1e-9)).holds:
        d_c = hi
    else:
        while hi - lo > resolution * 1e-2:
            mid = 0.5 * (lo + hi)
            if slb_equality_test(src, mid).holds:
                lo = mid
            else:
                hi = mid
        d_c = lo
    half = d_c / 2
    ba = blahut_arimoto(src, half)
    slb = classical_slb(src, src.distortion, half).slb_rate
    diff = abs(ba.rate_nats - slb)
    return CriticalDistortion(float(d_c), diff <= 1e-6, float(diff))


# -- finite-blocklength converse via tilted information ------------------------

def _compositions(n, m):
    """All count vectors of length m summing to n."""
    for bars in itertools.combinations(range(n + m - 1), m - 1):
        prev = -1
        out = []
        for b in bars:
            out.append(b - prev - 1)
            prev = b
        out.append(n + m - 1 - prev - 1)
        yield out


def tilted_info_law(sol: FiniteRdSolution, n: int, max_types: int = 1_000_000,
                    mc_samples: int = 1_000_000, seed: int = 0):
    """Law of sum_i j(X_i) for n i.i.d. letters: (sorted atoms, probabilities, exact?).

    Exact by enumerating types while their number stays below ``max_types``,
    Monte-Carlo otherwise.
    """
    p = np.asarray(sol.pmf, dtype=float)
    keep = p > 0
    pv, jv = p[keep], sol.tilted_info[keep]
    m = pv.size
    n_types = math.comb(n + m - 1, m - 1)
    if n_types <= max_types:
        K = np.array(list(_compositions(n, m)), dtype=float).reshape(-1, m)
        logprob = (special.gammaln(n + 1) - special.gammaln(K + 1).sum(axis=1)
                   + K @ np.log(pv))
        s = K @ jv
        w = np.exp(logprob)
        exact = True
    else:
        rng = make_rng(seed, 21)
        K = rng.multinomial(n, pv, size=mc_samples).astype(float)
        s = K @ jv
        w = np.full(s.size, 1.0 / s.size)
        exact = False
    order = np.argsort(s, kind="stable")
    s, w = s[order], w[order]
    # merge numerically equal atoms
    key = np.round(s, 10)
    uniq, start = np.unique(key, return_index=True)
    w = np.add.reduceat(w, start)
    s = s[start]
    return s, w, exact


@dataclass(frozen=True)
class ConverseResult:
    epsilon_lb: float
    gamma: float
    vacuous: bool
    exact: bool


def _converse_from_law(s, w, log_m, gammas=None):
    tail = np.cumsum(w[::-1])[::-1]  # P[S >= s_k]
    cand = s - log_m
    cand = cand[cand > 0]
    grid = np.logspace(-6, math.log10(max(2.0, float(s[-1] - log_m) + 1.0)), 400)
    if gammas is not None:
        grid = np.concatenate([grid, np.asarray(gammas, dtype=float)])
    gam = np.unique(np.concatenate([cand, grid]))
    gam = gam[gam > 0]
    idx = np.searchsorted(s, log_m + gam - 1e-12 * np.maximum(1.0, np.abs(log_m + gam)),
                          side="left")
    tl = np.where(idx < s.size, tail[np.minimum(idx, s.size - 1)], 0.0)
    vals = tl - np.exp(-gam)
    k = int(np.argmax(vals))
    return float(vals[k]), float(gam[k])


def converse_cj(src: FiniteSource, sol: FiniteRdSolution, n: int, M: float | None = None,
                log_m: float | None = None, **law_kwargs) -> ConverseResult:
    """Lower bound on the excess-distortion probability of any (n, M, d) code.

    Either ``M`` or ``log_m`` (nats) selects the code size.
    """
    if (M is None) == (log_m is None):
        raise ValueError("give exactly one of M or log_m")
    if log_m is None:
        log_m = math.log(M)
    s, w, exact = tilted_info_law(sol, n, **law_kwargs)
    val, gam = _converse_from_law(s, w, log_m)
    return ConverseResult(max(val, 0.0), gam, val <= 0.0, exact)


def converse_cj_rate(sol: FiniteRdSolution, n: int, eps: float,
                     **law_kwargs) -> float:
    """Smallest (log M)/n, in nats, compatible with excess probability ``eps``."""
    s, w, _ = tilted_info_law(sol, n, **law_kwargs)
    lo, hi = 0.0, float(max(s[-1], 0.0)) + 1.0
    if _converse_from_law(s, w, lo)[0] <= eps:
        return 0.0
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        if _converse_from_law(s, w, mid)[0] > eps:
            lo = mid
        else:
            hi = mid
    return hi / n
