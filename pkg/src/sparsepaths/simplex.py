"""Sparse probability projection: expected cost plus Tsallis regularization.

Solves, for costs c', reference distribution p_ref, r > 1 and temperature
T > 0,

    minimize  c'^T p + (T/(r-1)) * sum_i p_i ((p_i/ref_i)^(r-1) - 1)
    over      p on the probability simplex.

The KKT solution has a water-filling form: with Upsilon = T/(r-1) and a
threshold mu,

    p_i = ref_i * ((mu - c'_i) / (r*Upsilon))^(1/(r-1))   when mu > c'_i,
    p_i = 0                                               otherwise,

where mu is fixed by sum_i p_i = 1.  For r = 2 the map is piecewise linear
in mu and a sorted sweep finds the support exactly; for general r > 1 the
L1 norm of p(mu) is strictly increasing in mu and bisection applies.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError, GraphError

L1_TOL = 1e-12
WIDTH_TOL = 1e-14
MAX_BISECT = 200


@dataclass(frozen=True)
class SimplexProblem:
    """One projection instance.

    Parameters
    ----------
    costs : ndarray
        Augmented costs c', length m >= 1, all finite.
    ref : ndarray
        Reference probabilities, non-negative, summing to 1; entries equal
        to zero are excluded from the solve and receive p_i = 0.
    r : float
        Divergence order, r > 1.
    T : float
        Temperature, T > 0.
    """

    costs: np.ndarray
    ref: np.ndarray
    r: float
    T: float

    def __post_init__(self):
        costs = np.asarray(self.costs, dtype=float)
        ref = np.asarray(self.ref, dtype=float)
        object.__setattr__(self, "costs", costs)
        object.__setattr__(self, "ref", ref)
        if costs.ndim != 1 or costs.size < 1:
            raise GraphError("costs must be a non-empty vector")
        if ref.shape != costs.shape:
            raise GraphError("ref and costs must have the same length")
        if not np.all(np.isfinite(costs)):
            raise GraphError("costs must be finite")
        if np.any(ref < 0) or not np.any(ref > 0):
            raise GraphError("ref must be non-negative with positive mass")
        if abs(ref.sum() - 1.0) > 1e-9:
            raise GraphError(f"ref must sum to 1, got {ref.sum()!r}")
        if not self.r > 1:
            raise GraphError(f"r must exceed 1, got {self.r}")
        if not self.T > 0:
            raise GraphError(f"T must be positive, got {self.T}")

    @property
    def upsilon(self) -> float:
        return self.T / (self.r - 1.0)


@dataclass(frozen=True)
class SimplexSolution:
    """Solver output: distribution, threshold, support, KKT residual."""

    p: np.ndarray
    mu: float
    support: np.ndarray
    kkt_residual: float


def _quadratic_core(c: np.ndarray, ref: np.ndarray, T: float):
    """r=2 solution by sorted sweep; returns (p, mu).

    Costs are ranked ascending (stable on input order for ties) and the
    weighted L1 curve evaluated at mu = c_(k) locates the support size k*
    with L1(k*) < 1 <= L1(k*+1); then

        mu = (2T + sum_{i in S} ref_i c_i) / sum_{i in S} ref_i.
    """
    m = c.size
    order = np.argsort(c, kind="stable")
    cs = c[order]
    rs = ref[order]
    if m == 1:
        kstar = 1
    else:
        W = np.cumsum(rs)
        S = np.cumsum(rs * cs)
        l1 = (W[:-1] * cs[1:] - S[:-1]) / (2.0 * T)
        hits = np.flatnonzero(l1 >= 1.0)
        kstar = int(hits[0]) + 1 if hits.size else m
    sub_r = rs[:kstar]
    sub_c = cs[:kstar]
    mu = (2.0 * T + sub_c @ sub_r) / sub_r.sum()
    p_sorted = rs * np.maximum(mu - cs, 0.0) / (2.0 * T)
    p = np.empty_like(p_sorted)
    p[order] = p_sorted
    p /= p.sum()
    return p, float(mu)


def _l1_norm(mu: float, c: np.ndarray, ref: np.ndarray, rups: float,
             expinv: float) -> float:
    x = mu - c
    pos = x > 0
    if not pos.any():
        return 0.0
    logterm = np.log(x[pos] / rups) * expinv
    if np.any(logterm > 700.0):  # would overflow exp; certainly past the root
        return np.inf
    return float(ref[pos] @ np.exp(logterm))


def _bisection_core(c: np.ndarray, ref: np.ndarray, r: float, T: float):
    """General r > 1 solution; returns (p, mu, iterations).

    Bisects mu on [min c, max c + r*Upsilon], where the L1 norm of p(mu)
    is strictly increasing, until the norm is within L1_TOL of 1 or the
    interval shrinks below WIDTH_TOL times its initial width.  The result
    is renormalized by its sum so the simplex constraint holds exactly.
    """
    rups = r * T / (r - 1.0)
    if c.size == 1:
        # stationarity pins mu = c_1 + r*Upsilon exactly
        return np.ones_like(c), float(c[0]) + rups, 0
    expinv = 1.0 / (r - 1.0)
    lo = float(c.min())
    hi = float(c.max()) + rups
    width0 = hi - lo
    mu = hi
    for it in range(1, MAX_BISECT + 1):
        mu = 0.5 * (lo + hi)
        s = _l1_norm(mu, c, ref, rups, expinv)
        if abs(s - 1.0) <= L1_TOL or (hi - lo) <= WIDTH_TOL * width0:
            break
        if s < 1.0:
            lo = mu
        else:
            hi = mu
    else:
        raise ConvergenceError(
            f"simplex bisection did not converge in {MAX_BISECT} iterations",
            residual=abs(s - 1.0), iterations=MAX_BISECT)
    x = np.maximum(mu - c, 0.0)
    p = np.zeros_like(c)
    pos = x > 0
    with np.errstate(over="ignore"):
        p[pos] = ref[pos] * np.exp(np.log(x[pos] / rups) * expinv)
    total = p.sum()
    if not np.isfinite(total) or total <= 0:
        raise ConvergenceError("simplex bisection produced a degenerate vector",
                               residual=float("nan"), iterations=it)
    p /= total
    return p, float(mu), it


def _solve_masked(problem: SimplexProblem, solver):
    """Run a core solver on the positive-reference subproblem."""
    mask = problem.ref > 0
    if mask.all():
        out = solver(problem.costs, problem.ref)
        return out[0], out[1]
    sub = solver(problem.costs[mask], problem.ref[mask])
    p = np.zeros_like(problem.ref)
    p[mask] = sub[0]
    return p, sub[1]


def _finish(problem: SimplexProblem, p: np.ndarray, mu: float) -> SimplexSolution:
    support = np.flatnonzero(p > 0)
    sol = SimplexSolution(p=p, mu=mu, support=support, kkt_residual=0.0)
    res = kkt_residual(problem, sol)
    return SimplexSolution(p=p, mu=mu, support=support, kkt_residual=res)


def spmin(problem: SimplexProblem) -> SimplexSolution:
    """Global minimizer; sorted sweep when r = 2, bisection otherwise."""
    if problem.r == 2.0:
        return spmin_quadratic(problem)
    return spmin_bisection(problem)


def spmin_quadratic(problem: SimplexProblem) -> SimplexSolution:
    """r = 2 fast path (sorted linear sweep)."""
    if problem.r != 2.0:
        raise GraphError("spmin_quadratic requires r = 2")
    p, mu = _solve_masked(problem,
                          lambda c, ref: _quadratic_core(c, ref, problem.T))
    return _finish(problem, p, mu)


def spmin_bisection(problem: SimplexProblem) -> SimplexSolution:
    """General r > 1 path (bisection on the threshold mu)."""
    p, mu = _solve_masked(
        problem,
        lambda c, ref: _bisection_core(c, ref, problem.r, problem.T))
    return _finish(problem, p, mu)


def kkt_residual(problem: SimplexProblem, solution: SimplexSolution) -> float:
    """Maximum KKT stationarity violation of a candidate solution.

    On the support: |c_i + r*Upsilon*(p_i/ref_i)^(r-1) - mu|; off the
    support: [mu - c_i]_+; plus the simplex defect |sum p - 1|.  Entries
    with zero reference probability are excluded (their p is 0 by
    convention, outside the solved problem).
    """
    c = problem.costs
    ref = problem.ref
    p = solution.p
    mu = solution.mu
    rups = problem.r * problem.upsilon
    mask = ref > 0
    sup = (p > 0) & mask
    off = mask & ~sup
    res = abs(p.sum() - 1.0)
    if sup.any():
        stat = c[sup] + rups * np.power(p[sup] / ref[sup], problem.r - 1.0) - mu
        res = max(res, float(np.abs(stat).max()))
    if off.any():
        res = max(res, float(np.maximum(mu - c[off], 0.0).max()))
    return res
