"""Uplink pilot transmission, de-spreading and MMSE channel estimation.

Two pilot layouts are supported: the spatial-multiplexing scheme ("mMIMO",
length-K pilots, every user transmits) and the power-domain scheme ("NOMA",
length-K/2 pilots, only the cell-center users transmit while the edge users
stay silent).  Pilots carry amplitude sqrt(L) so the total pilot energy per
user scales with the sequence length.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import ChannelMatrix

SCHEMES = ("mMIMO", "NOMA")


class InfeasibleFrameError(ValueError):
    """Raised when the pilot overhead does not fit the coherence interval."""


def pilot_length(K: int, scheme: str) -> int:
    if scheme == "mMIMO":
        return K
    if scheme == "NOMA":
        return K // 2
    raise ValueError(f"unknown training scheme {scheme!r}")


@dataclass(frozen=True)
class PilotPlan:
    """Which users transmit which orthonormal pilot at which power."""

    scheme: str
    length: int
    pilots: np.ndarray        # L x n_tx, orthonormal columns
    tx_users: tuple[int, ...]
    powers: np.ndarray        # per transmitting user

    def validate(self) -> None:
        gram = self.pilots.conj().T @ self.pilots
        if not np.allclose(gram, np.eye(len(self.tx_users)), atol=1e-12):
            raise ValueError("pilot set is not orthonormal")


def make_pilot_plan(K: int, scheme: str, q_ul: float) -> PilotPlan:
    """Canonical plan: identity-basis pilots, equal power q_ul per user."""
    if K % 2 != 0:
        raise ValueError("K must be even")
    if q_ul <= 0:
        raise ValueError("pilot power must be positive")
    L = pilot_length(K, scheme)
    tx = tuple(range(K)) if scheme == "mMIMO" else tuple(range(K // 2))
    return PilotPlan(scheme=scheme, length=L, pilots=np.eye(L, len(tx), dtype=complex),
                     tx_users=tx, powers=np.full(len(tx), float(q_ul)))


def simulate_pilot_rx(H: np.ndarray, beta: np.ndarray, plan: PilotPlan,
                      rng: np.random.Generator) -> np.ndarray:
    """Received M x L pilot block: sqrt(L) sum_k sqrt(q_k) g_k phi_k^H + noise."""
    M = H.shape[0]
    amp = np.sqrt(plan.length * plan.powers * beta[list(plan.tx_users)])
    G = H[:, list(plan.tx_users)] * amp[None, :]
    Z = (rng.standard_normal((M, plan.length)) + 1j * rng.standard_normal((M, plan.length))) / np.sqrt(2.0)
    return G @ plan.pilots.conj().T + Z


def despread(Y: np.ndarray, pilot: np.ndarray) -> np.ndarray:
    """Project the received block onto one unit-norm pilot sequence.

    With orthonormal pilots the other users' contributions cancel exactly and
    the output is sqrt(L beta_k q_k) h_k plus unit-variance noise.
    """
    pilot = np.asarray(pilot)
    if not np.isclose(np.linalg.norm(pilot), 1.0, atol=1e-9):
        raise ValueError("pilot must have unit norm")
    return Y @ pilot


def despread_all(Y: np.ndarray, plan: PilotPlan) -> np.ndarray:
    """De-spread every transmitting user at once (M x n_tx)."""
    plan.validate()
    return Y @ plan.pilots


def gamma_factor(K: int, beta, q, scheme: str):
    """Per-entry variance of the MMSE channel estimate.

    mMIMO: K beta q / (K beta q + 1);  NOMA: K beta q / (K beta q + 2).
    Strictly smaller for NOMA at identical (K, beta, q) since its pilots are
    half as long.  Accepts scalars or arrays of beta/q.
    """
    bq = np.asarray(beta, dtype=float) * np.asarray(q, dtype=float)
    if np.any(bq <= 0):
        raise ValueError("beta * q must be positive")
    x = K * bq
    if scheme == "mMIMO":
        out = x / (x + 1.0)
    elif scheme == "NOMA":
        out = x / (x + 2.0)
    else:
        raise ValueError(f"unknown training scheme {scheme!r}")
    return float(out) if out.ndim == 0 else out


def mmse_estimate(y_k: np.ndarray, beta_k: float, q_k: float, K: int,
                  scheme: str) -> tuple[np.ndarray, float]:
    """MMSE channel estimate from a de-spread observation.

    Returns (h_hat, gamma) with h_hat = sqrt(L beta q) / (L beta q + 1) * y_k,
    whose entries have variance gamma; estimate and estimation error are
    uncorrelated.
    """
    if beta_k * q_k <= 0:
        raise ValueError("beta * q must be positive")
    L = pilot_length(K, scheme)
    x = L * beta_k * q_k
    scale = np.sqrt(x) / (x + 1.0)
    return scale * y_k, gamma_factor(K, beta_k, q_k, scheme)


@dataclass(frozen=True)
class EstimateSet:
    """MMSE estimates for the users that transmitted pilots.

    Columns of non-estimated users (edge users under NOMA training) are zero
    and their gamma is 0.
    """

    entries: np.ndarray        # M x K
    gamma: np.ndarray          # K
    estimated_users: tuple[int, ...]
    scheme: str

    def as_channel(self) -> ChannelMatrix:
        return ChannelMatrix(entries=self.entries, kind="estimate", gamma=self.gamma)


def estimate_channels(H_true: np.ndarray, beta: np.ndarray, scheme: str,
                      q_ul: float, rng: np.random.Generator) -> EstimateSet:
    """Run the full pilot pipeline (transmit, de-spread, MMSE) for one block."""
    M, K = H_true.shape
    plan = make_pilot_plan(K, scheme, q_ul)
    Y = simulate_pilot_rx(H_true, np.asarray(beta), plan, rng)
    obs = despread_all(Y, plan)
    entries = np.zeros((M, K), dtype=complex)
    gamma = np.zeros(K)
    for col, k in enumerate(plan.tx_users):
        h_hat, g = mmse_estimate(obs[:, col], float(beta[k]), float(plan.powers[col]), K, scheme)
        entries[:, k] = h_hat
        gamma[k] = g
    return EstimateSet(entries=entries, gamma=gamma, estimated_users=plan.tx_users, scheme=scheme)


def overhead_factor(K: int, T: int, scenario: str) -> float:
    """Fraction of the coherence interval left for downlink data.

    Both schemes spend K symbols on pilots per interval under NLOS (K uplink
    for mMIMO; K/2 uplink plus K/2 downlink for NOMA), so tau = 1 - K/T for
    either.  LOS channels are deterministic and cost nothing: tau = 1.
    """
    if scenario == "LOS":
        return 1.0
    if scenario != "NLOS":
        raise ValueError(f"unknown scenario {scenario!r}")
    if T <= 0:
        raise ValueError("T must be positive")
    if K > T:
        raise InfeasibleFrameError(f"K={K} pilots do not fit in T={T} symbols")
    return 1.0 - K / T
