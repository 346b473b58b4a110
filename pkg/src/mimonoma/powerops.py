"""Power allocation solvers: water-filling for the sum-rate problem family,
two-user closed forms with the antenna crossover point, and the max-min
rate problem with per-class targets solved by bisection over a fixed-point
power control."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .beamrate import Beamformer, noma_center_gain, zf_effective_gains
from .pairing import Pairing

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class PowerAllocation:
    """Nonnegative per-user powers summing to at most the budget."""

    powers: np.ndarray
    budget: float
    objective: float

    def validate(self, tol: float = 1e-9) -> None:
        if np.any(self.powers < -tol):
            raise ValueError("negative power")
        if self.powers.sum() > self.budget + tol:
            raise ValueError("budget exceeded")


def waterfill(gains, budget: float, tau: float = 1.0) -> PowerAllocation:
    """Maximize sum tau*log2(1 + g_k p_k) subject to sum(p) <= budget.

    Exact sort-and-threshold KKT solution: p_k = max(0, nu - 1/g_k) with the
    water level nu chosen so the budget is met with equality.
    """
    g = np.asarray(gains, dtype=float)
    if g.size == 0 or np.any(g <= 0):
        raise ValueError("water-filling needs a nonempty set of positive gains")
    if budget < 0:
        raise ValueError("budget must be nonnegative")
    inv = np.sort(1.0 / g)
    # Largest active set n such that the implied water level clears 1/g_(n).
    csum = np.cumsum(inv)
    n_range = np.arange(1, g.size + 1)
    levels = (budget + csum) / n_range
    active = int(np.max(np.nonzero(levels > inv)[0])) + 1 if np.any(levels > inv) else 1
    nu = (budget + csum[active - 1]) / active
    p = np.maximum(0.0, nu - 1.0 / g)
    obj = tau * float(np.log2(1.0 + g * p).sum())
    return PowerAllocation(powers=p, budget=float(budget), objective=obj)


def noma_sumrate_alloc(beta, M: int, K: int, budget: float, tau: float) -> PowerAllocation:
    """Sum-rate-optimal allocation for the shared-beam scheme.

    Every cell-edge user gets exactly zero power (shifting power from an edge
    user to its center always raises the group sum rate), and the budget is
    water-filled over the centers with gains beta_k (M + 1 - K/2).
    """
    beta = np.asarray(beta, dtype=float)
    half = K // 2
    gains = beta[:half] * noma_center_gain(M, K)
    wf = waterfill(gains, budget, tau)
    p = np.zeros(K)
    p[:half] = wf.powers
    return PowerAllocation(powers=p, budget=float(budget), objective=wf.objective)


def two_user_zf_powers(beta1: float, beta2: float, M: int, budget: float):
    """Optimal two-user powers for one-beam-per-user ZF (effective gains
    (M-2) beta_k).  Returns (allocation, edge_kept) where ``edge_kept`` tells
    whether the weak user receives any power; it is dropped when
    budget < (beta1 - beta2) / (beta1 beta2 (M - 2)).
    """
    if M <= 2:
        raise ValueError("need M > 2")
    if not beta1 >= beta2 > 0:
        raise ValueError("need beta1 >= beta2 > 0")
    edge_kept = budget >= (beta1 - beta2) / (beta1 * beta2 * (M - 2))
    p1 = min(budget, (beta1 - beta2 + budget * beta1 * beta2 * (M - 2))
             / (2.0 * beta1 * beta2 * (M - 2)))
    p = np.array([p1, budget - p1])
    obj = float(np.log2(1.0 + (M - 2) * p * np.array([beta1, beta2])).sum())
    return PowerAllocation(powers=p, budget=float(budget), objective=obj), bool(edge_kept)


def two_user_max_rates(beta1: float, beta2: float, M: int, budget: float,
                       tau: float) -> tuple[float, float]:
    """Closed-form maximum two-user sum rates (per-user-beam ZF, shared-beam).

    The ZF branch follows whether the weak user is kept; the shared-beam
    maximum always puts the whole budget on the strong user.
    """
    if M <= 2:
        raise ValueError("need M > 2")
    if not beta1 >= beta2 > 0:
        raise ValueError("need beta1 >= beta2 > 0")
    edge_kept = budget >= (beta1 - beta2) / (beta1 * beta2 * (M - 2))
    if edge_kept:
        r_mmimo = tau * math.log2(
            (beta1 + beta2 + budget * beta1 * beta2 * (M - 2)) ** 2 / (4.0 * beta1 * beta2))
    else:
        r_mmimo = tau * math.log2(1.0 + budget * beta1 * (M - 2))
    r_noma = tau * math.log2(1.0 + budget * beta1 * M)
    return r_mmimo, r_noma


def crossover_antennas(beta1: float, beta2: float, budget: float) -> int:
    """Minimum antenna count M* from which the per-user-beam ZF maximum sum
    rate is at least the shared-beam one for two users:

        M* = ceil(2 + (beta1-beta2)/(P beta1 beta2) + 2 sqrt(2)/sqrt(P beta2))
    """
    if not beta1 > beta2 > 0:
        raise ValueError("need beta1 > beta2 > 0")
    if budget <= 0:
        raise ValueError("budget must be positive")
    m_tilde = 2.0 + (beta1 - beta2) / (budget * beta1 * beta2) \
        + 2.0 * math.sqrt(2.0) / math.sqrt(budget * beta2)
    return int(math.ceil(m_tilde))


def los_sumrate_alloc(H: np.ndarray, beta, budget: float, scheme: str,
                      pairing: Pairing | None = None, tau: float = 1.0) -> PowerAllocation:
    """Sum-rate-optimal powers over deterministic channels.

    mMIMO water-fills the per-user ZF gains beta_k / [(H^H H)^-1]_kk; the
    shared-beam scheme zeroes the edges and water-fills the center-basis
    gains; the hybrid zeroes only the paired edges and water-fills the active
    users' gains under the hybrid basis.
    """
    beta = np.asarray(beta, dtype=float)
    K = H.shape[1]
    half = K // 2
    if scheme == "mMIMO":
        active = list(range(K))
        basis = H
    elif scheme == "NOMA":
        active = list(range(half))
        basis = H[:, :half]
    elif scheme == "HmNOMA":
        if pairing is None:
            raise ValueError("HmNOMA requires a pairing")
        paired_edges = set(pairing.paired_edges)
        active = [u for u in range(K) if u not in paired_edges]
        basis = H[:, active]
    else:
        raise ValueError(f"unknown scheme {scheme!r}")
    gains = beta[active] * zf_effective_gains(basis)
    wf = waterfill(gains, budget, tau)
    p = np.zeros(K)
    p[active] = wf.powers
    return PowerAllocation(powers=p, budget=float(budget), objective=wf.objective)


# ---------------------------------------------------------------------------
# Max-min rate problem: maximize mu with centers >= mu, edges >= c*mu.
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SinrContext:
    """Interference structure shared by every scheme's SINR expression:

        SINR_k(p) = p_k gains_k / (coupling[k] . p + 1)

    For each SIC pair the edge's symbol must also be decodable at its center,
    through SINR = p_e cross_gain / (cross_coupling . p + 1).
    """

    gains: np.ndarray          # K
    coupling: np.ndarray       # K x K
    tau: float
    centers: tuple[int, ...]
    edges: tuple[int, ...]
    pairs: tuple[tuple[int, int], ...] = ()
    cross_gain: np.ndarray | None = None       # one per pair
    cross_coupling: np.ndarray | None = None   # pairs x K

    @property
    def K(self) -> int:
        return self.gains.shape[0]


def mmimo_nlos_context(beta, gamma, M: int, K: int, tau: float) -> SinrContext:
    """Closed-form ZF SINR structure with estimation quality gamma: the
    residual estimation error couples every user's power into everyone's
    denominator (own power included)."""
    if M <= K:
        raise ValueError("the closed form needs M > K")
    beta = np.asarray(beta, dtype=float)
    gamma = np.asarray(gamma, dtype=float) * np.ones(K)
    gains = (M - K) * beta * gamma
    coupling = np.repeat((beta * (1.0 - gamma))[:, None], K, axis=1)
    return SinrContext(gains=gains, coupling=coupling, tau=tau,
                       centers=tuple(range(K // 2)), edges=tuple(range(K // 2, K)))


def noma_nlos_context(beta, M: int, K: int, tau: float, gamma=None) -> SinrContext:
    """Closed-form shared-beam SINR structure with groups (k, k + K/2):
    centers are interference-free after SIC, edges see their partner's power,
    and the decodability constraint reuses the center's own gain."""
    beta = np.asarray(beta, dtype=float)
    half = K // 2
    g_c = np.broadcast_to(np.asarray(
        noma_center_gain(M, K, None if gamma is None else np.asarray(gamma)[:half])), (half,))
    gains = np.concatenate([beta[:half] * g_c, beta[half:]])
    coupling = np.zeros((K, K))
    pairs = tuple((k, k + half) for k in range(half))
    cross_gain = np.empty(half)
    cross_coupling = np.zeros((half, K))
    for i, (c, e) in enumerate(pairs):
        coupling[e, c] = beta[e]
        cross_gain[i] = beta[c] * g_c[i]
        cross_coupling[i, c] = beta[c] * g_c[i]
    return SinrContext(gains=gains, coupling=coupling, tau=tau,
                       centers=tuple(range(half)), edges=tuple(range(half, K)),
                       pairs=pairs, cross_gain=cross_gain, cross_coupling=cross_coupling)


def instantaneous_context(H: np.ndarray, bf: Beamformer, beta, tau: float) -> SinrContext:
    """SINR structure of the realized channels under the given beamformer,
    with SIC removing the partner's power at each paired center."""
    beta = np.asarray(beta, dtype=float)
    G = beta[:, None] * np.abs(H.conj().T @ bf.V) ** 2
    K = G.shape[0]
    coupling = G[:, bf.user_beam]
    np.fill_diagonal(coupling, 0.0)
    for c, e in bf.pairs:
        coupling[c, e] = 0.0
    half = K // 2
    n = len(bf.pairs)
    cross_gain = np.empty(n)
    cross_coupling = np.empty((n, K))
    for i, (c, e) in enumerate(bf.pairs):
        cross_gain[i] = G[c, bf.user_beam[e]]
        cross_coupling[i] = G[c, bf.user_beam]
        cross_coupling[i, e] = 0.0
    return SinrContext(gains=G[np.arange(K), bf.user_beam], coupling=coupling, tau=tau,
                       centers=tuple(range(half)), edges=tuple(range(half, K)),
                       pairs=bf.pairs, cross_gain=cross_gain if n else None,
                       cross_coupling=cross_coupling if n else None)


def sinr_from_context(ctx: SinrContext, p: np.ndarray) -> np.ndarray:
    return p * ctx.gains / (ctx.coupling @ p + 1.0)


def rates_from_context(ctx: SinrContext, p: np.ndarray) -> np.ndarray:
    """Per-user rates tau*log2(1 + SINR) at the given powers."""
    return ctx.tau * np.log2(1.0 + sinr_from_context(ctx, p))


def effective_rates_from_context(ctx: SinrContext, p: np.ndarray,
                                 sic_constraint: bool = True) -> np.ndarray:
    """Deliverable rates: a paired edge is limited by the slower of its own
    link and the decode of its symbol at the partner center."""
    rates = rates_from_context(ctx, p)
    if sic_constraint and ctx.pairs:
        for i, (c, e) in enumerate(ctx.pairs):
            cross = p[e] * ctx.cross_gain[i] / (ctx.cross_coupling[i] @ p + 1.0)
            rates[e] = min(rates[e], ctx.tau * np.log2(1.0 + cross))
    return rates


@dataclass(frozen=True)
class MaxMinSolution:
    mu: float
    c: float
    powers: np.ndarray
    feasible: bool
    bisection_steps: int
    power_iterations: int

    def center_rate_target(self) -> float:
        return self.mu

    def edge_rate_target(self) -> float:
        return self.c * self.mu


def _power_map(ctx: SinrContext, t: np.ndarray, sic_constraint: bool):
    """The standard interference mapping whose minimal fixed point is the
    cheapest power vector meeting the SINR targets ``t``."""
    inv_gain = np.where(t > 0, t / np.where(ctx.gains > 0, ctx.gains, 1.0), 0.0)
    use_cross = sic_constraint and ctx.pairs

    def apply(p: np.ndarray) -> np.ndarray:
        out = inv_gain * (ctx.coupling @ p + 1.0)
        if use_cross:
            for i, (c, e) in enumerate(ctx.pairs):
                if t[e] <= 0 or ctx.cross_gain[i] <= 0:
                    continue
                need = t[e] * (ctx.cross_coupling[i] @ p + 1.0) / ctx.cross_gain[i]
                if need > out[e]:
                    out[e] = need
        return out

    return apply


def _solve_targets_linear(ctx: SinrContext, t: np.ndarray, sic_constraint: bool):
    """Exact minimal fixed point via an active-branch linear solve.

    Each SIC edge requires the max of two affine power demands; pick a branch
    per edge, solve the resulting linear system and iterate until the picked
    branches really are the binding ones.  Returns (p, iters) or None when the
    structure dictates falling back to plain fixed-point iteration.
    """
    K = ctx.K
    d = np.divide(t, ctx.gains, out=np.zeros_like(t), where=t > 0)
    rows = d[:, None] * ctx.coupling
    branch = {}
    edge_rows = {}
    if sic_constraint:
        for i, (c, e) in enumerate(ctx.pairs):
            if t[e] <= 0:
                continue
            if ctx.cross_gain[i] <= 0:
                return None  # cross target unreachable at any power
            edge_rows[e] = (rows[e].copy(), d[e],
                            t[e] / ctx.cross_gain[i] * ctx.cross_coupling[i],
                            t[e] / ctx.cross_gain[i])
            branch[e] = 0
    fmap = _power_map(ctx, t, sic_constraint)
    seen = set()
    for it in range(1 + 2 ** min(len(edge_rows), 4)):
        key = tuple(sorted(branch.items()))
        if key in seen:
            return None
        seen.add(key)
        A = rows.copy()
        b = d.copy()
        for e, (r_own, b_own, r_cross, b_cross) in edge_rows.items():
            A[e], b[e] = (r_own, b_own) if branch[e] == 0 else (r_cross, b_cross)
        try:
            p = np.linalg.solve(np.eye(K) - A, b)
        except np.linalg.LinAlgError:
            return None
        if not np.all(np.isfinite(p)) or np.any(p < -1e-9):
            return "infeasible"
        p = np.maximum(p, 0.0)
        switched = False
        for e, (r_own, b_own, r_cross, b_cross) in edge_rows.items():
            own = r_own @ p + b_own
            cross = r_cross @ p + b_cross
            want = 0 if own >= cross - 1e-15 * max(1.0, own) else 1
            if want != branch[e]:
                branch[e] = want
                switched = True
        if not switched:
            resid = np.max(np.abs(p - fmap(p))) / (1.0 + p.max(initial=0.0))
            if resid > 1e-9:
                return None
            return p, it + 1
    return None


def solve_power_for_targets(ctx: SinrContext, t: np.ndarray, budget: float,
                            sic_constraint: bool = True, max_iters: int = 10000):
    """Minimum-power vector meeting per-user SINR targets, or infeasibility.

    Tries the exact linear solve first and falls back to monotone fixed-point
    iteration from zero.  Returns (feasible, p, iterations).
    """
    t = np.asarray(t, dtype=float)
    if np.all(t <= 0):
        return True, np.zeros(ctx.K), 0
    if np.any((t > 0) & (ctx.gains <= 0)):
        return False, None, 0
    out = _solve_targets_linear(ctx, t, sic_constraint)
    if out == "infeasible":
        return False, None, 0
    if out is not None:
        p, iters = out
        if p.sum() <= budget * (1.0 + 1e-9):
            return True, p, iters
        return False, None, iters
    # Fixed-point fallback: iterates increase monotonically toward the minimal
    # fixed point, so overshooting the budget proves infeasibility.
    fmap = _power_map(ctx, t, sic_constraint)
    p = np.zeros(ctx.K)
    for it in range(1, max_iters + 1):
        nxt = fmap(p)
        if nxt.sum() > budget * (1.0 + 1e-6):
            return False, None, it
        if np.max(np.abs(nxt - p)) <= 1e-12 * (1.0 + nxt.max()):
            return True, nxt, it
        p = nxt
    return False, None, max_iters  # no convergence within the cap


def maxmin_solve(ctx: SinrContext, budget: float, c: float, *,
                 mode: str = "rate", sinr_ratio: float | None = None,
                 sic_constraint: bool = True, tol: float = 1e-6,
                 max_iters: int = 10000, trace: bool = False) -> MaxMinSolution:
    """Maximize mu subject to center rates >= mu, edge rates >= c*mu and the
    total power budget, by bisection on mu.

    Each feasibility probe converts the rate targets into SINR targets
    (t = 2^(target/tau) - 1) and runs the power control of
    :func:`solve_power_for_targets`.  ``mode="sinr"`` instead constrains the
    edges to 1/sinr_ratio of the centers' SINR target.  mu = 0 is always
    feasible, so the returned solution satisfies its constraints whenever the
    budget is positive.
    """
    if mode not in ("rate", "sinr"):
        raise ValueError(f"unknown mode {mode!r}")
    if mode == "rate" and not 0.0 < c < 1.0:
        raise ValueError("c must lie in (0, 1)")
    if mode == "sinr" and (sinr_ratio is None or sinr_ratio <= 1.0):
        raise ValueError("mode='sinr' needs sinr_ratio > 1")
    if budget <= 0:
        raise ValueError("budget must be positive")
    is_center = np.zeros(ctx.K, dtype=bool)
    is_center[list(ctx.centers)] = True

    def targets(mu: float) -> np.ndarray:
        t = np.empty(ctx.K)
        t_c = 2.0 ** (mu / ctx.tau) - 1.0
        t[is_center] = t_c
        if mode == "rate":
            t[~is_center] = 2.0 ** (c * mu / ctx.tau) - 1.0
        else:
            t[~is_center] = t_c / sinr_ratio
        return t

    hi = ctx.tau * math.log2(1.0 + budget * float(ctx.gains.max(initial=0.0)))
    lo = 0.0
    best_p = np.zeros(ctx.K)
    steps = 0
    power_iters = 0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        ok, p, iters = solve_power_for_targets(ctx, targets(mid), budget,
                                               sic_constraint, max_iters)
        power_iters += iters
        steps += 1
        if trace and log.isEnabledFor(logging.DEBUG):
            log.debug("maxmin bisect step=%d mu=%.9g feasible=%s power_iters=%d",
                      steps, mid, ok, iters)
        if ok:
            lo, best_p = mid, p
        else:
            hi = mid
    return MaxMinSolution(mu=lo, c=c, powers=best_p, feasible=True,
                          bisection_steps=steps, power_iterations=power_iters)
