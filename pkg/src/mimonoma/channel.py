"""Small-scale channel generation (Rayleigh and ULA line-of-sight) plus
channel similarity metrics used by the user pairing stage."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ChannelMatrix:
    """M x K complex channel with per-user estimation quality.

    ``kind`` is "true" for exact channels and "estimate" for MMSE outputs;
    ``gamma`` holds the per-entry variance of each column (1 for exact).
    """

    entries: np.ndarray
    kind: str = "true"
    gamma: np.ndarray | None = None

    @property
    def M(self) -> int:
        return self.entries.shape[0]

    @property
    def K(self) -> int:
        return self.entries.shape[1]


def gen_nlos(M: int, K: int, rng: np.random.Generator) -> ChannelMatrix:
    """i.i.d. CN(0, 1) Rayleigh channel matrix (unit variance per entry)."""
    if M < 1 or K < 1:
        raise ValueError("M and K must be >= 1")
    h = (rng.standard_normal((M, K)) + 1j * rng.standard_normal((M, K))) / np.sqrt(2.0)
    return ChannelMatrix(entries=h, kind="true", gamma=np.ones(K))


def los_steering(phi: float, M: int, spacing_ratio: float = 0.5) -> np.ndarray:
    """ULA steering vector, entry m = exp(j 2 pi m (d/lambda) sin(phi))."""
    if M < 1:
        raise ValueError("M must be >= 1")
    if spacing_ratio <= 0:
        raise ValueError("spacing ratio must be positive")
    m = np.arange(M)
    return np.exp(2j * np.pi * m * spacing_ratio * np.sin(phi))


def los_channel_matrix(angles, M: int, spacing_ratio: float = 0.5) -> ChannelMatrix:
    """Stack steering vectors for each user angle into an M x K matrix."""
    angles = np.asarray(angles, dtype=float)
    m = np.arange(M)[:, None]
    h = np.exp(2j * np.pi * m * spacing_ratio * np.sin(angles)[None, :])
    return ChannelMatrix(entries=h, kind="true", gamma=np.ones(angles.shape[0]))


def correlation(h_i: np.ndarray, h_j: np.ndarray) -> float:
    """|h_i^H h_j| / (||h_i|| ||h_j||), in [0, 1]."""
    ni = np.linalg.norm(h_i)
    nj = np.linalg.norm(h_j)
    if ni == 0.0 or nj == 0.0:
        raise ValueError("correlation undefined for zero-norm vectors")
    return float(np.abs(np.vdot(h_i, h_j)) / (ni * nj))


def los_correlation_closed_form(phi_i: float, phi_j: float, M: int,
                                spacing_ratio: float = 0.5) -> float:
    """Closed form of the ULA correlation, a normalized Dirichlet kernel in
    delta = sin(phi_i) - sin(phi_j)."""
    theta = 2.0 * np.pi * spacing_ratio * (np.sin(phi_i) - np.sin(phi_j))
    denom = 1.0 - np.exp(1j * theta)
    if np.abs(denom) < 1e-12:
        return 1.0
    return float(np.abs((1.0 - np.exp(1j * theta * M)) / denom) / M)


def los_distance(phi_i: float, phi_j: float) -> float:
    """Angle-domain distance |sin(phi_i) - sin(phi_j)|, in [0, 2]."""
    return float(np.abs(np.sin(phi_i) - np.sin(phi_j)))


def nlos_distance(h_i: np.ndarray, h_j: np.ndarray) -> float:
    """Similarity used for pairing under Rayleigh fading: the correlation."""
    return correlation(h_i, h_j)


def save_channel_csv(path, H: np.ndarray) -> None:
    """Dump a complex M x K matrix to CSV: one row per antenna, user columns
    interleaved as re_u0, im_u0, re_u1, im_u1, ...  Intended for
    cross-language oracle checks."""
    H = np.asarray(H)
    M, K = H.shape
    header = []
    for k in range(K):
        header += [f"re_u{k}", f"im_u{k}"]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for m in range(M):
            row = []
            for k in range(K):
                row += [repr(float(H[m, k].real)), repr(float(H[m, k].imag))]
            w.writerow(row)


def load_channel_csv(path) -> np.ndarray:
    """Inverse of :func:`save_channel_csv`."""
    with open(path, "r", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    data = np.asarray(rows[1:], dtype=float)
    return data[:, 0::2] + 1j * data[:, 1::2]
