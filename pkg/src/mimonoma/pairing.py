"""User grouping: greedy center/edge pairing by channel similarity and the
hybrid partition that mixes shared-beam groups with per-user beams."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import correlation, los_distance


class InfeasibleBasisError(ValueError):
    """Raised when a beam basis would need more columns than antennas."""


@dataclass(frozen=True)
class Pairing:
    """Disjoint (center, edge) pairs plus the users left unpaired."""

    pairs: tuple[tuple[int, int], ...]
    unpaired: tuple[int, ...]
    threshold: float

    @property
    def paired_edges(self) -> tuple[int, ...]:
        return tuple(e for _, e in self.pairs)

    def partner_of(self) -> dict[int, int]:
        out = {}
        for c, e in self.pairs:
            out[c] = e
            out[e] = c
        return out


def default_partition(K: int) -> tuple[tuple[int, ...], tuple[int, ...]]:
    """Index convention: users 0..K/2-1 are centers, the rest are edges."""
    if K % 2 != 0:
        raise ValueError("K must be even")
    return tuple(range(K // 2)), tuple(range(K // 2, K))


def canonical_pairing(K: int) -> Pairing:
    """The fixed grouping (k, k + K/2) used by the pure shared-beam scheme."""
    centers, edges = default_partition(K)
    return Pairing(pairs=tuple(zip(centers, edges)), unpaired=(), threshold=float("inf"))


def _greedy(centers, edges, dist, keep) -> tuple[tuple[int, int], ...]:
    """One pass over centers in ascending index order.

    Each center looks only at the still-unpaired edges, takes the one with
    the smallest distance (ties broken by lowest edge index), and the pair is
    kept only if ``keep(distance)`` holds.
    """
    taken: set[int] = set()
    pairs = []
    for c in centers:
        best_e, best_d = -1, None
        for e in edges:
            if e in taken:
                continue
            d = dist(c, e)
            if best_d is None or d < best_d:
                best_e, best_d = e, d
        if best_e >= 0 and keep(best_d):
            pairs.append((c, best_e))
            taken.add(best_e)
    return tuple(pairs)


def pair_los(angles, partition, nu: float) -> Pairing:
    """Greedy pairing on the angle-domain distance |sin(phi_i) - sin(phi_j)|.

    A pair is formed only when the distance is strictly below ``nu``, so
    nu = 0 yields no pairs.
    """
    if nu < 0:
        raise ValueError("threshold must be >= 0")
    angles = np.asarray(angles, dtype=float)
    centers, edges = partition
    s = np.sin(angles)
    pairs = _greedy(centers, edges,
                    dist=lambda c, e: abs(s[c] - s[e]),
                    keep=lambda d: d < nu)
    in_pairs = {u for p in pairs for u in p}
    unpaired = tuple(u for u in (*centers, *edges) if u not in in_pairs)
    return Pairing(pairs=pairs, unpaired=unpaired, threshold=float(nu))


def pair_nlos(H: np.ndarray, partition, nu: float) -> Pairing:
    """Greedy pairing on channel correlation (a similarity, not a distance).

    The comparison direction flips relative to :func:`pair_los`: a center
    takes the unpaired edge with the *largest* correlation and keeps the pair
    only if it is strictly above ``nu``, so nu = 1 yields no pairs.
    """
    if not 0.0 <= nu <= 1.0:
        raise ValueError("correlation threshold must lie in [0, 1]")
    centers, edges = partition
    # negate the similarity so the shared argmin-style greedy applies
    pairs = _greedy(centers, edges,
                    dist=lambda c, e: -correlation(H[:, c], H[:, e]),
                    keep=lambda d: -d > nu)
    in_pairs = {u for p in pairs for u in p}
    unpaired = tuple(u for u in (*centers, *edges) if u not in in_pairs)
    return Pairing(pairs=pairs, unpaired=unpaired, threshold=float(nu))


def hmnoma_partition(pairing: Pairing, channels: np.ndarray):
    """Beam basis and user->beam map for the hybrid scheme.

    The basis holds the center channel of every pair plus the channel of every
    unpaired user, in ascending user-index order; each paired edge shares its
    center's beam.  With no pairs this is exactly the one-beam-per-user basis,
    and with everyone paired it is the pure shared-beam basis.
    """
    M, K = channels.shape
    paired_edges = set(pairing.paired_edges)
    partner = {e: c for c, e in pairing.pairs}
    basis_users = tuple(u for u in range(K) if u not in paired_edges)
    if len(basis_users) > M:
        raise InfeasibleBasisError(
            f"beam basis needs {len(basis_users)} columns but only M={M} antennas")
    beam_of = {u: b for b, u in enumerate(basis_users)}
    user_beam = np.array([beam_of[u] if u not in paired_edges else beam_of[partner[u]]
                          for u in range(K)], dtype=int)
    return basis_users, user_beam
