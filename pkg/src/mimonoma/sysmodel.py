"""System configuration, cell geometry, pathloss and random user placement.

All powers are linear and normalized to unit noise variance; distances are
kept in meters in configuration files and converted to km internally, which
is the unit the pathloss law expects.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, replace

import numpy as np

# Log-distance pathloss law, d in km: PL(d) = fixed + slope * log10(d)  [dB]
DEFAULT_PATHLOSS_FIXED_DB = 130.0
DEFAULT_PATHLOSS_SLOPE_DB = 37.6

DEFAULT_CELL_EDGE_M = 350.0
DEFAULT_CENTER_RING_M = (50.0, 100.0)
DEFAULT_EDGE_RING_M = (100.0, 350.0)

# The downlink budget is normalized so that a user at the outer cell edge
# (350 m) receives this SNR when granted the entire budget.  -3.5 dB places
# the two-user sum-rate crossover for the reference 100 m / 350 m pair at
# M* = 9 antennas; anchors below about -4 dB or above -3 dB move M* off 9.
DEFAULT_EDGE_CAL_SNR_DB = -3.5


def pathloss_db(d_km, fixed_db: float = DEFAULT_PATHLOSS_FIXED_DB,
                slope_db: float = DEFAULT_PATHLOSS_SLOPE_DB):
    """Path and penetration loss in dB at distance ``d_km`` (km)."""
    d = np.asarray(d_km, dtype=float)
    if np.any(d <= 0.0):
        raise ValueError("distance must be positive")
    out = fixed_db + slope_db * np.log10(d)
    return float(out) if np.isscalar(d_km) else out


def beta_from_distance_km(d_km, fixed_db: float = DEFAULT_PATHLOSS_FIXED_DB,
                          slope_db: float = DEFAULT_PATHLOSS_SLOPE_DB):
    """Linear large-scale gain beta = 10^(-PL/10)."""
    return 10.0 ** (-np.asarray(pathloss_db(d_km, fixed_db, slope_db)) / 10.0)


def received_snr_db(p, beta):
    """Received SNR (dB) of a transmission with linear power ``p`` over gain ``beta``."""
    p = np.asarray(p, dtype=float)
    b = np.asarray(beta, dtype=float)
    if np.any(p <= 0.0) or np.any(b <= 0.0):
        raise ValueError("power and gain must be positive")
    out = 10.0 * np.log10(p * b)
    return float(out) if out.ndim == 0 else out


def calibrated_p_max(edge_snr_db: float = DEFAULT_EDGE_CAL_SNR_DB,
                     edge_distance_km: float = DEFAULT_CELL_EDGE_M / 1000.0,
                     fixed_db: float = DEFAULT_PATHLOSS_FIXED_DB,
                     slope_db: float = DEFAULT_PATHLOSS_SLOPE_DB) -> float:
    """Total downlink budget giving ``edge_snr_db`` at the outer cell edge."""
    return 10.0 ** ((pathloss_db(edge_distance_km, fixed_db, slope_db) + edge_snr_db) / 10.0)


@dataclass(frozen=True)
class SystemConfig:
    """Static system parameters shared by every experiment.

    ``p_max`` and ``q_ul`` may be left as None, in which case the budget is
    calibrated from the cell-edge SNR anchor and the per-user uplink pilot
    power defaults to p_max / K.
    """

    M: int = 30
    K: int = 10
    T: int = 100
    scenario: str = "NLOS"
    p_max: float | None = None
    q_ul: float | None = None
    pathloss_fixed_db: float = DEFAULT_PATHLOSS_FIXED_DB
    pathloss_slope_db: float = DEFAULT_PATHLOSS_SLOPE_DB
    cell_edge_m: float = DEFAULT_CELL_EDGE_M
    center_ring_m: tuple[float, float] = DEFAULT_CENTER_RING_M
    edge_ring_m: tuple[float, float] = DEFAULT_EDGE_RING_M
    antenna_spacing_ratio: float = 0.5   # element spacing over wavelength
    cal_edge_snr_db: float = DEFAULT_EDGE_CAL_SNR_DB
    p3_c: float = 0.05          # edge/center rate ratio in the max-min problem
    p3_sinr_ratio: float = 100.0  # center/edge SINR ratio for the SINR-form constraint

    def __post_init__(self):
        if self.p_max is None:
            object.__setattr__(self, "p_max", calibrated_p_max(
                self.cal_edge_snr_db, self.cell_edge_m / 1000.0,
                self.pathloss_fixed_db, self.pathloss_slope_db))
        if self.q_ul is None:
            object.__setattr__(self, "q_ul", self.p_max / self.K)
        object.__setattr__(self, "center_ring_m", tuple(float(x) for x in self.center_ring_m))
        object.__setattr__(self, "edge_ring_m", tuple(float(x) for x in self.edge_ring_m))
        self.validate()

    def validate(self):
        if self.M < 1:
            raise ValueError("M must be >= 1")
        if self.K < 2 or self.K % 2 != 0:
            raise ValueError("K must be an even integer >= 2")
        if self.scenario not in ("NLOS", "LOS"):
            raise ValueError(f"unknown scenario {self.scenario!r}")
        if self.scenario == "NLOS" and self.T < self.K:
            raise ValueError("coherence interval too short: T must be >= K for NLOS")
        if self.p_max <= 0 or self.q_ul <= 0:
            raise ValueError("power budgets must be positive")
        lo_c, hi_c = self.center_ring_m
        lo_e, hi_e = self.edge_ring_m
        if not (0 < lo_c < hi_c <= lo_e < hi_e <= self.cell_edge_m):
            raise ValueError("user rings must be disjoint, ordered and inside the cell")
        if self.antenna_spacing_ratio <= 0:
            raise ValueError("antenna spacing ratio must be positive")
        if not 0.0 < self.p3_c < 1.0:
            raise ValueError("p3_c must lie in (0, 1)")

    @property
    def centers(self) -> range:
        return range(self.K // 2)

    @property
    def edges(self) -> range:
        return range(self.K // 2, self.K)

    def with_overrides(self, **kwargs) -> "SystemConfig":
        """New config with selected fields replaced (re-validated)."""
        # Changing geometry or K invalidates the derived defaults unless the
        # caller pinned them explicitly.
        if "p_max" not in kwargs and ("cal_edge_snr_db" in kwargs or "cell_edge_m" in kwargs
                                      or "pathloss_fixed_db" in kwargs or "pathloss_slope_db" in kwargs):
            kwargs["p_max"] = None
        if "q_ul" not in kwargs and ("K" in kwargs or kwargs.get("p_max", self.p_max) != self.p_max):
            kwargs["q_ul"] = None
        return replace(self, **kwargs)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "SystemConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def from_file(cls, path) -> "SystemConfig":
        """Load a JSON key/value config file (see README for the schema)."""
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()


@dataclass(frozen=True)
class UserDrop:
    """One realization of user positions: first K/2 users are cell-center."""

    distances_km: np.ndarray
    angles_rad: np.ndarray
    beta: np.ndarray

    @property
    def K(self) -> int:
        return self.beta.shape[0]

    @property
    def center_beta(self) -> np.ndarray:
        return self.beta[: self.K // 2]

    @property
    def edge_beta(self) -> np.ndarray:
        return self.beta[self.K // 2:]


def _ring_radius(rng: np.random.Generator, lo: float, hi: float, n: int) -> np.ndarray:
    # uniform over the annulus area: radius density proportional to r
    return np.sqrt(rng.uniform(lo * lo, hi * hi, size=n))


def draw_user_drop(config: SystemConfig, rng: np.random.Generator) -> UserDrop:
    """Draw K/2 center and K/2 edge users uniformly over their annuli.

    Positions are uniform over the ring areas [50, 100) m and [100, 350) m
    respectively, with azimuth angles uniform in [0, 2*pi).  The disjoint
    rings plus the monotone pathloss make every center gain strictly larger
    than every edge gain.
    """
    half = config.K // 2
    d_c = _ring_radius(rng, *config.center_ring_m, n=half)
    d_e = _ring_radius(rng, *config.edge_ring_m, n=half)
    d_km = np.concatenate([d_c, d_e]) / 1000.0
    angles = rng.uniform(0.0, 2.0 * np.pi, size=config.K)
    beta = beta_from_distance_km(d_km, config.pathloss_fixed_db, config.pathloss_slope_db)
    return UserDrop(distances_km=d_km, angles_rad=angles, beta=beta)
