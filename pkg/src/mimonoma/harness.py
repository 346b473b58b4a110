"""Experiment driver: Monte-Carlo sweeps for the standard figure presets,
crossover-probability estimation and CSV/JSON result persistence.

Every drop draws its random stream from (seed, point index, drop index), so
tables are bit-reproducible and independent of any execution order.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import beamrate, channel, pairing, powerops, sysmodel, training
from .beamrate import SingularBasisError
from .sysmodel import SystemConfig, draw_user_drop
from .training import gamma_factor, overhead_factor

log = logging.getLogger(__name__)

CSI_MODES = ("perfect", "estimated")


@dataclass(frozen=True)
class ExperimentSpec:
    experiment: str
    kind: str
    sweep_name: str
    sweep_values: tuple
    trials: int
    fading_realizations: int
    seed: int
    schemes: tuple[str, ...]
    csi: str
    config: SystemConfig

    def validate(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if not self.sweep_values:
            raise ValueError("sweep range must be nonempty")
        if self.csi not in CSI_MODES:
            raise ValueError(f"csi must be one of {CSI_MODES}")


@dataclass(frozen=True)
class Row:
    sweep_value: float
    scheme: str
    metric: str
    mean: float
    stderr: float
    trials: int


@dataclass(frozen=True)
class ResultTable:
    rows: tuple[Row, ...]
    meta: dict = field(default_factory=dict)

    def series(self, scheme: str, metric: str = "sum_rate"):
        """(sweep values, means) for one scheme/metric, in sweep order."""
        pts = [(r.sweep_value, r.mean) for r in self.rows
               if r.scheme == scheme and r.metric == metric]
        xs, ys = zip(*pts) if pts else ((), ())
        return np.asarray(xs), np.asarray(ys)


def _rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng([seed, *key])


def _mean_row(val, scheme, metric, samples) -> Row:
    a = np.asarray(samples, dtype=float)
    n = a.size
    stderr = float(a.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return Row(float(val), scheme, metric, float(a.mean()), stderr, n)


# ---------------------------------------------------------------------------
# Closed-form sum-rate machinery shared by the NLOS sweeps and P^c
# ---------------------------------------------------------------------------

def _nlos_max_sumrate(cfg: SystemConfig, beta: np.ndarray, scheme: str,
                      tau: float, csi: str) -> float:
    """Optimized sum rate of one drop from the closed-form rate expressions."""
    P = cfg.p_max
    if scheme == "mMIMO":
        if csi == "perfect":
            gains = (cfg.M - cfg.K) * beta
        else:
            gamma = gamma_factor(cfg.K, beta, cfg.q_ul, "mMIMO")
            # with the budget met with equality the coupled denominator is fixed
            gains = (cfg.M - cfg.K) * beta * gamma / (beta * (1.0 - gamma) * P + 1.0)
        return powerops.waterfill(gains, P, tau).objective
    if scheme == "NOMA":
        half = cfg.K // 2
        gamma = None if csi == "perfect" else gamma_factor(cfg.K, beta[:half], cfg.q_ul, "NOMA")
        g = beta[:half] * beamrate.noma_center_gain(cfg.M, cfg.K, gamma)
        return powerops.waterfill(g, P, tau).objective
    raise ValueError(f"scheme {scheme!r} has no closed-form sum rate")


def _los_max_sumrate(cfg: SystemConfig, H: np.ndarray, beta: np.ndarray,
                     scheme: str, pair: pairing.Pairing | None = None) -> float:
    return powerops.los_sumrate_alloc(H, beta, cfg.p_max, scheme, pair).objective


# ---------------------------------------------------------------------------
# Runners
# ---------------------------------------------------------------------------

def _run_two_user_region(spec: ExperimentSpec) -> ResultTable:
    cfg = spec.config
    beta = sysmodel.beta_from_distance_km(
        np.array([0.100, 0.350]), cfg.pathloss_fixed_db, cfg.pathloss_slope_db)
    tau = overhead_factor(cfg.K, cfg.T, "NLOS")
    rows = []
    for f in spec.sweep_values:
        p = np.array([f, 1.0 - f]) * cfg.p_max
        per_scheme = {
            "mMIMO": beamrate.rate_mmimo_nlos_lb(p, beta, np.ones(2), cfg.M, 2, tau),
            "NOMA": beamrate.rate_noma_nlos_ub(p, beta, cfg.M, 2, tau),
        }
        for scheme in spec.schemes:
            r = per_scheme[scheme]
            rows.append(Row(float(f), scheme, "rate_center", float(r[0]), 0.0, 1))
            rows.append(Row(float(f), scheme, "rate_edge", float(r[1]), 0.0, 1))
    return ResultTable(rows=tuple(rows))


def _run_two_user_sweep_m(spec: ExperimentSpec) -> ResultTable:
    cfg = spec.config
    b1, b2 = sysmodel.beta_from_distance_km(
        np.array([0.100, 0.350]), cfg.pathloss_fixed_db, cfg.pathloss_slope_db)
    tau = overhead_factor(cfg.K, cfg.T, "NLOS")
    rows = []
    observed = None
    for M in spec.sweep_values:
        rm, rn = powerops.two_user_max_rates(b1, b2, int(M), cfg.p_max, tau)
        if observed is None and rm >= rn:
            observed = int(M)
        if "mMIMO" in spec.schemes:
            rows.append(Row(float(M), "mMIMO", "sum_rate", rm, 0.0, 1))
        if "NOMA" in spec.schemes:
            rows.append(Row(float(M), "NOMA", "sum_rate", rn, 0.0, 1))
    meta = {"m_star_formula": powerops.crossover_antennas(b1, b2, cfg.p_max),
            "m_star_observed": observed}
    return ResultTable(rows=tuple(rows), meta=meta)


def _run_nlos_sumrate(spec: ExperimentSpec) -> ResultTable:
    rows = []
    for pi, val in enumerate(spec.sweep_values):
        cfg = spec.config.with_overrides(**{spec.sweep_name: int(val)})
        if cfg.M <= cfg.K:
            log.warning("%s: skipping %s=%s (closed forms need M > K)",
                        spec.experiment, spec.sweep_name, val)
            continue
        tau = overhead_factor(cfg.K, cfg.T, "NLOS")
        sums = {s: np.empty(spec.trials) for s in spec.schemes}
        for di in range(spec.trials):
            drop = draw_user_drop(cfg, _rng(spec.seed, pi, di))
            for scheme in spec.schemes:
                sums[scheme][di] = _nlos_max_sumrate(cfg, drop.beta, scheme, tau, spec.csi)
        for scheme in spec.schemes:
            rows.append(_mean_row(val, scheme, "sum_rate", sums[scheme]))
    return ResultTable(rows=tuple(rows), meta=_crossover_meta(rows))


def _run_los_sumrate(spec: ExperimentSpec) -> ResultTable:
    rows = []
    for pi, val in enumerate(spec.sweep_values):
        cfg = spec.config.with_overrides(**{spec.sweep_name: int(val)})
        schemes = []
        for s in spec.schemes:
            basis = cfg.K if s == "mMIMO" else cfg.K // 2
            if basis > cfg.M:
                log.warning("%s: skipping %s at %s=%s (basis larger than M)",
                            spec.experiment, s, spec.sweep_name, val)
            else:
                schemes.append(s)
        sums = {s: [] for s in schemes}
        for di in range(spec.trials):
            rng = _rng(spec.seed, pi, di)
            drop = draw_user_drop(cfg, rng)
            H = channel.los_channel_matrix(drop.angles_rad, cfg.M,
                                           cfg.antenna_spacing_ratio).entries
            try:
                vals = {s: _los_max_sumrate(cfg, H, drop.beta, s) for s in schemes}
            except SingularBasisError:
                log.warning("%s: dropping singular drop %d at %s=%s",
                            spec.experiment, di, spec.sweep_name, val)
                continue
            for scheme in schemes:
                sums[scheme].append(vals[scheme])
        for scheme in schemes:
            rows.append(_mean_row(val, scheme, "sum_rate", sums[scheme]))
    return ResultTable(rows=tuple(rows), meta=_crossover_meta(rows))


def crossover_probability(m_values, config: SystemConfig, trials: int,
                          seed: int = 0, csi: str = "perfect") -> ResultTable:
    """P^c(M): fraction of user drops whose optimized shared-beam sum rate
    strictly exceeds the one-beam-per-user optimum, plus the two mean sum
    rates, per antenna count."""
    if trials < 100:
        raise ValueError("need trials >= 100 for a meaningful probability")
    rows = []
    for pi, M in enumerate(m_values):
        cfg = config.with_overrides(M=int(M))
        if cfg.scenario == "NLOS" and cfg.M <= cfg.K:
            log.warning("skipping M=%s (closed forms need M > K)", M)
            continue
        tau = overhead_factor(cfg.K, cfg.T, cfg.scenario)
        r_m, r_n = [], []
        for di in range(trials):
            rng = _rng(seed, pi, di)
            drop = draw_user_drop(cfg, rng)
            try:
                if cfg.scenario == "LOS":
                    H = channel.los_channel_matrix(drop.angles_rad, cfg.M,
                                                   cfg.antenna_spacing_ratio).entries
                    vm = _los_max_sumrate(cfg, H, drop.beta, "mMIMO")
                    vn = _los_max_sumrate(cfg, H, drop.beta, "NOMA")
                else:
                    vm = _nlos_max_sumrate(cfg, drop.beta, "mMIMO", tau, csi)
                    vn = _nlos_max_sumrate(cfg, drop.beta, "NOMA", tau, csi)
            except SingularBasisError:
                log.warning("dropping singular drop %d at M=%s", di, M)
                continue
            r_m.append(vm)
            r_n.append(vn)
        wins = np.asarray(r_n) > np.asarray(r_m)
        n = wins.size
        rows.append(_mean_row(M, "mMIMO", "sum_rate", r_m))
        rows.append(_mean_row(M, "NOMA", "sum_rate", r_n))
        rows.append(Row(float(M), "NOMA>mMIMO", "crossover_prob", float(wins.mean()),
                        float(wins.std(ddof=1) / math.sqrt(n)), n))
    return ResultTable(rows=tuple(rows), meta=_crossover_meta(rows))


def _run_los_crossover(spec: ExperimentSpec) -> ResultTable:
    table = crossover_probability(spec.sweep_values, spec.config, spec.trials,
                                  spec.seed, spec.csi)
    return table


def _run_hmnoma_sumrate_los(spec: ExperimentSpec) -> ResultTable:
    """Threshold sweep: the hybrid varies with nu, the two standalone schemes
    are constants computed from the same drops."""
    cfg = spec.config
    part = pairing.default_partition(cfg.K)
    nus = [float(v) for v in spec.sweep_values]
    r_m, r_n, r_h = [], [], [[] for _ in nus]
    for di in range(spec.trials):
        rng = _rng(spec.seed, 0, di)
        drop = draw_user_drop(cfg, rng)
        H = channel.los_channel_matrix(drop.angles_rad, cfg.M,
                                       cfg.antenna_spacing_ratio).entries
        try:
            vm = _los_max_sumrate(cfg, H, drop.beta, "mMIMO")
            vn = _los_max_sumrate(cfg, H, drop.beta, "NOMA")
            vh = []
            for nu in nus:
                pair = pairing.pair_los(drop.angles_rad, part, nu)
                vh.append(_los_max_sumrate(cfg, H, drop.beta, "HmNOMA", pair))
        except SingularBasisError:
            log.warning("%s: dropping singular drop %d", spec.experiment, di)
            continue
        r_m.append(vm)
        r_n.append(vn)
        for ni in range(len(nus)):
            r_h[ni].append(vh[ni])
    rows = []
    for ni, nu in enumerate(nus):
        if "mMIMO" in spec.schemes:
            rows.append(_mean_row(nu, "mMIMO", "sum_rate", r_m))
        if "NOMA" in spec.schemes:
            rows.append(_mean_row(nu, "NOMA", "sum_rate", r_n))
        if "HmNOMA" in spec.schemes:
            rows.append(_mean_row(nu, "HmNOMA", "sum_rate", r_h[ni]))
    return ResultTable(rows=tuple(rows))


def _maxmin_mu(ctx, cfg: SystemConfig) -> float:
    return powerops.maxmin_solve(ctx, cfg.p_max, cfg.p3_c).mu


def _run_maxmin_nlos(spec: ExperimentSpec) -> ResultTable:
    """Max-min target rates vs pairing threshold under Rayleigh fading with
    uplink-trained beams; SINRs are evaluated on the realized channels."""
    cfg = spec.config
    part = pairing.default_partition(cfg.K)
    tau = overhead_factor(cfg.K, cfg.T, "NLOS")
    nus = [float(v) for v in spec.sweep_values]
    n_real = spec.trials * spec.fading_realizations
    mu_m = np.empty(n_real)
    mu_n = np.empty(n_real)
    mu_h = np.empty((len(nus), n_real))
    i = 0
    for di in range(spec.trials):
        drop = draw_user_drop(cfg, _rng(spec.seed, 0, di))
        for ri in range(spec.fading_realizations):
            rng = _rng(spec.seed, 1, di, ri)
            H = channel.gen_nlos(cfg.M, cfg.K, rng).entries
            est_m = training.estimate_channels(H, drop.beta, "mMIMO", cfg.q_ul, rng)
            if "mMIMO" in spec.schemes or "HmNOMA" in spec.schemes:
                bf = beamrate.beamformer_for_scheme(est_m.entries, "mMIMO")
                mu_m[i] = _maxmin_mu(powerops.instantaneous_context(H, bf, drop.beta, tau), cfg)
            if "NOMA" in spec.schemes:
                est_n = training.estimate_channels(H, drop.beta, "NOMA", cfg.q_ul, rng)
                bf = beamrate.beamformer_for_scheme(est_n.entries, "NOMA")
                mu_n[i] = _maxmin_mu(powerops.instantaneous_context(H, bf, drop.beta, tau), cfg)
            if "HmNOMA" in spec.schemes:
                for ni, nu in enumerate(nus):
                    pair = pairing.pair_nlos(est_m.entries, part, nu)
                    if not pair.pairs:
                        mu_h[ni, i] = mu_m[i]  # identical basis, identical solve
                        continue
                    bf = beamrate.beamformer_for_scheme(est_m.entries, "HmNOMA", pair)
                    mu_h[ni, i] = _maxmin_mu(
                        powerops.instantaneous_context(H, bf, drop.beta, tau), cfg)
            i += 1
    rows = []
    for ni, nu in enumerate(nus):
        if "mMIMO" in spec.schemes:
            rows.append(_mean_row(nu, "mMIMO", "mu", mu_m))
        if "NOMA" in spec.schemes:
            rows.append(_mean_row(nu, "NOMA", "mu", mu_n))
        if "HmNOMA" in spec.schemes:
            rows.append(_mean_row(nu, "HmNOMA", "mu", mu_h[ni]))
    return ResultTable(rows=tuple(rows))


def _run_maxmin_los(spec: ExperimentSpec) -> ResultTable:
    cfg = spec.config
    part = pairing.default_partition(cfg.K)
    nus = [float(v) for v in spec.sweep_values]
    mu_m, mu_n, mu_h = [], [], [[] for _ in nus]
    for di in range(spec.trials):
        drop = draw_user_drop(cfg, _rng(spec.seed, 0, di))
        H = channel.los_channel_matrix(drop.angles_rad, cfg.M,
                                       cfg.antenna_spacing_ratio).entries
        try:
            vm = vn = None
            vh = [None] * len(nus)
            if "mMIMO" in spec.schemes or "HmNOMA" in spec.schemes:
                bf = beamrate.beamformer_for_scheme(H, "mMIMO")
                vm = _maxmin_mu(powerops.instantaneous_context(H, bf, drop.beta, 1.0), cfg)
            if "NOMA" in spec.schemes:
                bf = beamrate.beamformer_for_scheme(H, "NOMA")
                vn = _maxmin_mu(powerops.instantaneous_context(H, bf, drop.beta, 1.0), cfg)
            if "HmNOMA" in spec.schemes:
                for ni, nu in enumerate(nus):
                    pair = pairing.pair_los(drop.angles_rad, part, nu)
                    if not pair.pairs:
                        vh[ni] = vm  # identical basis, identical solve
                        continue
                    bf = beamrate.beamformer_for_scheme(H, "HmNOMA", pair)
                    vh[ni] = _maxmin_mu(
                        powerops.instantaneous_context(H, bf, drop.beta, 1.0), cfg)
        except SingularBasisError:
            log.warning("%s: dropping singular drop %d", spec.experiment, di)
            continue
        if vm is not None:
            mu_m.append(vm)
        if vn is not None:
            mu_n.append(vn)
        for ni in range(len(nus)):
            if vh[ni] is not None:
                mu_h[ni].append(vh[ni])
    rows = []
    for ni, nu in enumerate(nus):
        if "mMIMO" in spec.schemes:
            rows.append(_mean_row(nu, "mMIMO", "mu", mu_m))
        if "NOMA" in spec.schemes:
            rows.append(_mean_row(nu, "NOMA", "mu", mu_n))
        if "HmNOMA" in spec.schemes:
            rows.append(_mean_row(nu, "HmNOMA", "mu", mu_h[ni]))
    return ResultTable(rows=tuple(rows))


def _crossover_meta(rows) -> dict:
    """First sweep value where the shared-beam mean beats the per-user-beam
    mean, and vice versa (None if it never happens)."""
    by_val: dict[float, dict[str, float]] = {}
    for r in rows:
        if r.metric == "sum_rate" and r.scheme in ("mMIMO", "NOMA"):
            by_val.setdefault(r.sweep_value, {})[r.scheme] = r.mean
    noma_over = next((v for v in sorted(by_val)
                      if {"mMIMO", "NOMA"} <= by_val[v].keys()
                      and by_val[v]["NOMA"] > by_val[v]["mMIMO"]), None)
    mmimo_over = next((v for v in sorted(by_val)
                       if {"mMIMO", "NOMA"} <= by_val[v].keys()
                       and by_val[v]["mMIMO"] >= by_val[v]["NOMA"]), None)
    return {"noma_overtakes_at": noma_over, "mmimo_overtakes_at": mmimo_over}


_RUNNERS = {
    "two_user_region": _run_two_user_region,
    "two_user_sweep_m": _run_two_user_sweep_m,
    "nlos_sumrate": _run_nlos_sumrate,
    "los_sumrate": _run_los_sumrate,
    "los_crossover": _run_los_crossover,
    "hmnoma_sumrate_los": _run_hmnoma_sumrate_los,
    "maxmin_nlos": _run_maxmin_nlos,
    "maxmin_los": _run_maxmin_los,
}


# ---------------------------------------------------------------------------
# Presets
# ---------------------------------------------------------------------------

def _nu_grid(M: int, steps: int = 20) -> tuple[float, ...]:
    """nu in {0, alpha, 2 alpha, ..., steps*alpha} with alpha = 1/(2M)."""
    alpha = 1.0 / (2.0 * M)
    return tuple(i * alpha for i in range(steps + 1))


_PRESETS: dict[str, dict] = {
    "fig1": dict(kind="two_user_region", sweep=("split", tuple(np.linspace(0.0, 1.0, 101))),
                 trials=1, fading=1, schemes=("mMIMO", "NOMA"),
                 cfg=dict(M=25, K=2, T=100, scenario="NLOS")),
    "fig2": dict(kind="two_user_sweep_m", sweep=("M", tuple(range(3, 31))),
                 trials=1, fading=1, schemes=("mMIMO", "NOMA"),
                 cfg=dict(M=25, K=2, T=100, scenario="NLOS")),
    "fig3": dict(kind="nlos_sumrate", sweep=("K", tuple(range(2, 29, 2))),
                 trials=2000, fading=1, schemes=("mMIMO", "NOMA"),
                 cfg=dict(M=30, T=100, scenario="NLOS")),
    "fig4": dict(kind="nlos_sumrate", sweep=("M", (12, 14, 16, 18, 20, 25, 30, 40, 50, 60, 80, 100)),
                 trials=2000, fading=1, schemes=("mMIMO", "NOMA"),
                 cfg=dict(K=10, T=100, scenario="NLOS")),
    "fig5": dict(kind="los_sumrate", sweep=("M", (10, 12, 14, 16, 18, 20, 24, 28, 32, 40, 50)),
                 trials=2000, fading=1, schemes=("mMIMO", "NOMA"),
                 cfg=dict(K=10, M=10, scenario="LOS")),
    "fig6": dict(kind="los_sumrate", sweep=("K", tuple(range(4, 41, 2))),
                 trials=2000, fading=1, schemes=("mMIMO", "NOMA"),
                 cfg=dict(M=75, scenario="LOS")),
    "fig7": dict(kind="los_crossover",
                 sweep=("M", (6, 8, 10, 12, 14, 16, 18, 20, 22, 24, 28, 32, 36, 40)),
                 trials=2000, fading=1, schemes=("mMIMO", "NOMA"),
                 cfg=dict(K=6, M=6, scenario="LOS")),
    "fig8": dict(kind="hmnoma_sumrate_los", sweep=("nu", None),  # nu grid from M
                 trials=2000, fading=1, schemes=("mMIMO", "NOMA", "HmNOMA"),
                 cfg=dict(K=6, M=36, scenario="LOS")),
    "fig8m12": dict(kind="hmnoma_sumrate_los", sweep=("nu", None),
                    trials=2000, fading=1, schemes=("mMIMO", "NOMA", "HmNOMA"),
                    cfg=dict(K=6, M=12, scenario="LOS")),
    "fig9": dict(kind="maxmin_nlos", sweep=("nu", tuple(np.round(np.arange(0.0, 1.01, 0.1), 10))),
                 trials=500, fading=20, schemes=("mMIMO", "NOMA", "HmNOMA"),
                 cfg=dict(K=10, M=12, T=100, scenario="NLOS")),
    "fig10": dict(kind="maxmin_los", sweep=("nu", None),
                  trials=2000, fading=1, schemes=("mMIMO", "NOMA", "HmNOMA"),
                  cfg=dict(K=6, M=36, scenario="LOS")),
}


def experiment_ids() -> tuple[str, ...]:
    return tuple(_PRESETS)


def build_experiment(experiment: str, *, seed: int = 0, trials: int | None = None,
                     fading: int | None = None, schemes=None, csi: str | None = None,
                     config: SystemConfig | None = None,
                     overrides: dict | None = None) -> ExperimentSpec:
    """Instantiate a preset, optionally overriding trial counts, scheme list,
    CSI mode and any SystemConfig field."""
    if experiment not in _PRESETS:
        raise ValueError(f"unknown experiment {experiment!r}; known: {sorted(_PRESETS)}")
    preset = _PRESETS[experiment]
    cfg = config if config is not None else SystemConfig(**preset["cfg"])
    if config is not None:
        cfg = cfg.with_overrides(**preset["cfg"])
    if overrides:
        cfg = cfg.with_overrides(**overrides)
    sweep_name, sweep_values = preset["sweep"]
    if sweep_values is None:  # threshold grids scale with the antenna count
        sweep_values = _nu_grid(cfg.M)
    spec = ExperimentSpec(
        experiment=experiment, kind=preset["kind"], sweep_name=sweep_name,
        sweep_values=tuple(sweep_values), trials=trials or preset["trials"],
        fading_realizations=fading or preset["fading"], seed=seed,
        schemes=tuple(schemes) if schemes else preset["schemes"],
        csi=csi or "perfect", config=cfg)
    spec.validate()
    return spec


def run_experiment(spec: ExperimentSpec) -> ResultTable:
    """Execute the sweep and aggregate means with standard errors."""
    spec.validate()
    if spec.kind not in _RUNNERS:
        raise ValueError(f"unknown experiment kind {spec.kind!r}")
    table = _RUNNERS[spec.kind](spec)
    meta = {
        "experiment": spec.experiment, "kind": spec.kind, "seed": spec.seed,
        "trials": spec.trials, "fading_realizations": spec.fading_realizations,
        "schemes": list(spec.schemes), "csi": spec.csi,
        "sweep": {"name": spec.sweep_name, "values": [float(v) for v in spec.sweep_values]},
        "config": spec.config.to_dict(), "config_hash": spec.config.config_hash(),
    }
    meta.update(table.meta)
    return ResultTable(rows=table.rows, meta=meta)


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------

def _fmt(x: float) -> str:
    return f"{x:.9g}"


def emit(table: ResultTable, out_dir, basename: str | None = None,
         formats=("csv", "json")) -> list[Path]:
    """Write the table as CSV (one row per sweep point / scheme / metric) and
    JSON (with the full spec echo for provenance).  Returns the paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    name = basename or table.meta.get("experiment", "results")
    sweep_name = table.meta.get("sweep", {}).get("name", "sweep")
    paths = []
    try:
        if "csv" in formats:
            p = out / f"{name}.csv"
            with open(p, "w", newline="", encoding="utf-8") as fh:
                w = csv.writer(fh)
                w.writerow([sweep_name, "scheme", "metric", "mean", "stderr", "trials"])
                for r in table.rows:
                    w.writerow([_fmt(r.sweep_value), r.scheme, r.metric,
                                _fmt(r.mean), _fmt(r.stderr), r.trials])
            paths.append(p)
        if "json" in formats:
            p = out / f"{name}.json"
            payload = {"meta": table.meta,
                       "rows": [{sweep_name: r.sweep_value, "scheme": r.scheme,
                                 "metric": r.metric, "mean": r.mean,
                                 "stderr": r.stderr, "trials": r.trials}
                                for r in table.rows]}
            with open(p, "w", encoding="utf-8") as fh:
                json.dump(payload, fh, indent=1, sort_keys=True)
            paths.append(p)
    except OSError as err:
        raise OSError(f"failed writing results under {out}: {err}") from err
    return paths


def write_rate_report_csv(path, reports) -> None:
    """Per-user rate dump: ``reports`` yields (drop_id, RateReport)."""
    cols = ["scheme", "M", "K", "drop", "user", "pair", "rate", "sinr", "sic_ok"]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=cols)
        w.writeheader()
        for drop_id, rep in reports:
            for row in rep.to_rows(drop_id):
                row["rate"] = _fmt(row["rate"])
                row["sinr"] = _fmt(row["sinr"])
                w.writerow(row)
