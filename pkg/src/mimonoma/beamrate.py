"""Beamformer construction (zero-forcing over a channel basis) and every
SINR/rate evaluation: instantaneous, closed-form bounds and LOS forms."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .pairing import Pairing, canonical_pairing, hmnoma_partition

SCHEMES = ("mMIMO", "NOMA", "HmNOMA")

# Identity residual above which a basis is treated as rank deficient.  Set
# to catch duplicated/collinear columns (residual of order one) while letting
# merely ill-conditioned bases through: their effective gains collapse toward
# zero, which is the physically meaningful outcome.
_NULLING_TOL = 1e-2


class SingularBasisError(ValueError):
    """Raised when the beam basis is (numerically) rank deficient."""


def zf_beamformer(basis: np.ndarray) -> np.ndarray:
    """Unit-norm zero-forcing beams for an M x B channel basis.

    Columns of the result are the columns of H (H^H H)^-1 scaled to unit
    norm, so v_j^H h_i = 0 for all i != j inside the basis while each beam
    carries unit transmit power.
    """
    basis = np.asarray(basis)
    M, B = basis.shape
    if B > M:
        raise SingularBasisError(f"basis has {B} columns but only M={M} antennas")
    gram = basis.conj().T @ basis
    try:
        gram_inv = np.linalg.inv(gram)
    except np.linalg.LinAlgError as err:
        raise SingularBasisError("channel basis is rank deficient") from err
    v = basis @ gram_inv
    if not np.all(np.isfinite(v)):
        raise SingularBasisError("channel basis is rank deficient")
    resid = gram @ gram_inv
    np.fill_diagonal(resid, resid.diagonal() - 1.0)
    if np.max(np.abs(resid)) > _NULLING_TOL:
        raise SingularBasisError("zero-forcing failed: basis is numerically singular")
    return v / np.linalg.norm(v, axis=0, keepdims=True)


def zf_effective_gains(basis: np.ndarray) -> np.ndarray:
    """|h_b^H v_b|^2 for each basis column under unit-norm ZF beams.

    Equals 1 / [(H^H H)^-1]_bb; computed from the beams themselves so the
    Gram identity stays a testable property rather than an assumption.
    """
    v = zf_beamformer(basis)
    return np.abs(np.einsum("mb,mb->b", basis.conj(), v)) ** 2


@dataclass(frozen=True)
class Beamformer:
    """Unit-norm beams plus the user->beam map and SIC group structure."""

    V: np.ndarray                     # M x B
    user_beam: np.ndarray             # K ints
    basis_users: tuple[int, ...]
    pairs: tuple[tuple[int, int], ...]
    scheme: str

    @property
    def B(self) -> int:
        return self.V.shape[1]


def beamformer_for_scheme(channels: np.ndarray, scheme: str,
                          pairing: Pairing | None = None) -> Beamformer:
    """Build the scheme's beamformer from the given (true or estimated) channels.

    mMIMO nulls across all K users; NOMA nulls across the K/2 cell-center
    channels with each edge riding its partner's beam; HmNOMA uses the hybrid
    basis implied by ``pairing``.  All three go through the same partition
    logic so a pairing with zero pairs reproduces mMIMO bit for bit.
    """
    K = channels.shape[1]
    if scheme == "mMIMO":
        pairing = Pairing(pairs=(), unpaired=tuple(range(K)), threshold=0.0)
    elif scheme == "NOMA":
        pairing = canonical_pairing(K)
    elif scheme == "HmNOMA":
        if pairing is None:
            raise ValueError("HmNOMA requires a pairing")
    else:
        raise ValueError(f"unknown scheme {scheme!r}")
    basis_users, user_beam = hmnoma_partition(pairing, channels)
    V = zf_beamformer(channels[:, list(basis_users)])
    return Beamformer(V=V, user_beam=user_beam, basis_users=basis_users,
                      pairs=pairing.pairs, scheme=scheme)


def effective_gain_stats(M: int, B: int, trials: int, rng: np.random.Generator,
                         chunk: int = 4096) -> float:
    """Monte-Carlo mean of the served user's effective gain |h_b^H v_b|^2
    under unit-norm ZF with B Rayleigh basis vectors; approaches M - B + 1."""
    if B > M:
        raise ValueError("need B <= M")
    total = 0.0
    count = 0
    left = int(trials)
    while left > 0:
        n = min(chunk, left)
        H = (rng.standard_normal((n, M, B)) + 1j * rng.standard_normal((n, M, B))) / np.sqrt(2.0)
        gram = np.einsum("cmb,cmn->cbn", H.conj(), H)
        V = H @ np.linalg.inv(gram)
        V /= np.linalg.norm(V, axis=1, keepdims=True)
        gains = np.abs(np.einsum("cmb,cmb->cb", H.conj(), V)) ** 2
        total += float(gains.sum())
        count += gains.size
        left -= n
    return total / count


def rate_mmimo_nlos_lb(p: np.ndarray, beta: np.ndarray, gamma: np.ndarray,
                       M: int, K: int, tau: float) -> np.ndarray:
    """Closed-form ergodic rate lower bound per user for ZF over K estimated
    Rayleigh channels:

        tau * log2(1 + (M-K) p_k beta_k gamma_k / (beta_k (1-gamma_k) sum(p) + 1))

    With gamma = 1 this is the perfect-CSI form tau * log2(1 + (M-K) p beta).
    """
    if M <= K:
        raise ValueError("the bound needs M > K")
    p = np.asarray(p, dtype=float)
    if np.any(p < 0):
        raise ValueError("powers must be nonnegative")
    beta = np.asarray(beta, dtype=float)
    gamma = np.asarray(gamma, dtype=float)
    denom = beta * (1.0 - gamma) * p.sum() + 1.0
    return tau * np.log2(1.0 + (M - K) * p * beta * gamma / denom)


def noma_center_gain(M: int, K: int, gamma=None):
    """Expected effective gain of a cell-center user's shared beam.

    Perfect CSI gives M + 1 - K/2; with estimate quality gamma the gain is
    gamma (M + 1 - K/2) + (1 - gamma), the MMSE split between the estimated
    direction and the isotropic estimation error.
    """
    if M + 1 - K // 2 <= 0:
        raise ValueError("need M >= K/2")
    base = float(M + 1 - K // 2)
    if gamma is None:
        return base
    gamma = np.asarray(gamma, dtype=float)
    return gamma * base + (1.0 - gamma)


def rate_noma_nlos_ub(p: np.ndarray, beta: np.ndarray, M: int, K: int,
                      tau: float, gamma=None) -> np.ndarray:
    """Per-user rate upper bounds for the shared-beam scheme with groups
    (k, k + K/2): centers get the array gain, edges see only their partner's
    power as interference (inter-group interference taken as nulled).
    """
    if K % 2 != 0:
        raise ValueError("K must be even; users pair as (k, k + K/2)")
    p = np.asarray(p, dtype=float)
    beta = np.asarray(beta, dtype=float)
    if p.shape[0] != K or beta.shape[0] != K:
        raise ValueError("p and beta must have length K")
    half = K // 2
    g_c = noma_center_gain(M, K, None if gamma is None else np.asarray(gamma)[:half])
    rates = np.empty(K)
    rates[:half] = tau * np.log2(1.0 + p[:half] * beta[:half] * g_c)
    edge_sinr = p[half:] * beta[half:] / (p[:half] * beta[half:] + 1.0)
    rates[half:] = tau * np.log2(1.0 + edge_sinr)
    return rates


def _gain_table(H: np.ndarray, bf: Beamformer, beta: np.ndarray) -> np.ndarray:
    """G[k, b] = beta_k |h_k^H v_b|^2 on the true channels."""
    cross = H.conj().T @ bf.V
    return np.asarray(beta)[:, None] * np.abs(cross) ** 2


def sinr_instantaneous(H: np.ndarray, bf: Beamformer, p: np.ndarray,
                       beta: np.ndarray, sic: bool = True) -> np.ndarray:
    """Instantaneous per-user SINR for the realized channels.

    Desired power is p_k beta_k |h_k^H v_k|^2; interference sums every other
    user's power through the beam it rides.  For a paired cell-center user
    with ``sic`` the partner's term is removed (decoded and cancelled first).
    """
    p = np.asarray(p, dtype=float)
    G = _gain_table(H, bf, beta)
    K = G.shape[0]
    beam_load = np.bincount(bf.user_beam, weights=p, minlength=bf.B)
    own = p * G[np.arange(K), bf.user_beam]
    interf = G @ beam_load - own
    if sic:
        for c, e in bf.pairs:
            interf[c] -= p[e] * G[c, bf.user_beam[e]]
    return own / (interf + 1.0)


def sic_condition(H: np.ndarray, bf: Beamformer, p: np.ndarray,
                  beta: np.ndarray) -> np.ndarray:
    """Per-group flag: can the center decode the edge's symbol at least as
    fast as the edge itself?  (Vacuously true when the edge power is zero.)"""
    p = np.asarray(p, dtype=float)
    G = _gain_table(H, bf, beta)
    beam_load = np.bincount(bf.user_beam, weights=p, minlength=bf.B)
    sinr = sinr_instantaneous(H, bf, p, beta, sic=False)
    flags = np.empty(len(bf.pairs), dtype=bool)
    for i, (c, e) in enumerate(bf.pairs):
        num = p[e] * G[c, bf.user_beam[e]]
        den = G[c] @ beam_load - num + 1.0
        flags[i] = num / den >= sinr[e] - 1e-12
    return flags


@dataclass(frozen=True)
class RateReport:
    """Per-user rates for one channel realization."""

    scheme: str
    M: int
    K: int
    tau: float
    rates: np.ndarray
    sinr: np.ndarray
    pair_id: np.ndarray        # index into pairs, -1 if unpaired
    sic_ok: tuple[bool, ...]   # one flag per pair

    def sum_rate(self) -> float:
        return float(self.rates.sum())

    def to_rows(self, drop_id: int = 0) -> list[dict]:
        rows = []
        for k in range(self.K):
            pid = int(self.pair_id[k])
            rows.append({
                "scheme": self.scheme, "M": self.M, "K": self.K, "drop": drop_id,
                "user": k, "pair": pid,
                "rate": float(self.rates[k]), "sinr": float(self.sinr[k]),
                "sic_ok": (bool(self.sic_ok[pid]) if pid >= 0 else ""),
            })
        return rows


def rate_report(H: np.ndarray, bf: Beamformer, p: np.ndarray, beta: np.ndarray,
                tau: float = 1.0) -> RateReport:
    """Rates tau * log2(1 + SINR) with SIC applied inside each pair."""
    sinr = sinr_instantaneous(H, bf, p, beta, sic=True)
    flags = tuple(bool(x) for x in sic_condition(H, bf, p, beta))
    pair_id = np.full(H.shape[1], -1, dtype=int)
    for i, (c, e) in enumerate(bf.pairs):
        pair_id[c] = pair_id[e] = i
    return RateReport(scheme=bf.scheme, M=H.shape[0], K=H.shape[1], tau=tau,
                      rates=tau * np.log2(1.0 + sinr), sinr=sinr,
                      pair_id=pair_id, sic_ok=flags)


def rate_los(H: np.ndarray, p: np.ndarray, beta: np.ndarray, scheme: str,
             pairing: Pairing | None = None) -> RateReport:
    """Rates over deterministic (LOS) channels, tau = 1.

    mMIMO reduces to log2(1 + p_k beta_k / [(H^H H)^-1]_kk) since the nulling
    is exact; NOMA/HmNOMA evaluate the shared-beam SINRs with SIC at the
    paired centers.
    """
    bf = beamformer_for_scheme(H, scheme, pairing)
    return rate_report(H, bf, p, beta, tau=1.0)
