"""Monte Carlo oracle for the full two-factor model.

Euler scheme with full truncation (V replaced by max(V, 0) wherever it is
consumed), antithetic mirroring, and equiprobable stratification of the
first-step asset shock.  All draws come from a counter-based Philox
generator so a fixed (seed, config) pair reproduces bit-identical results
regardless of how callers parallelize around this module.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtri

from .errors import InvalidParams
from .params import MgParams, OptionSpec

DAYS_PER_YEAR = 365.0


def _philox(*words):
    """Philox generator keyed by up to two 64-bit words.

    The key must be an explicit uint64 array: a plain int list would be
    converted through float64 and silently lose the low key bits.
    """
    padded = list(words) + [0] * (2 - len(words))
    key = np.array([w % 2**64 for w in padded], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))

PANEL_COLUMNS = [
    "path_id",
    "obs_index",
    "obs_time_years",
    "v_true",
    "maturity_days",
    "strike",
    "moneyness",
    "mc_price",
    "mc_std_error",
]


@dataclass(frozen=True)
class McConfig:
    n_paths: int
    steps_per_day: int = 10
    antithetic: bool = True
    stratified: bool = True
    n_strata: int = 50
    seed: int = 0

    def __post_init__(self):
        if self.n_paths < 2:
            raise InvalidParams(f"n_paths must be >= 2, got {self.n_paths}")
        if self.antithetic and self.n_paths % 2:
            raise InvalidParams("n_paths must be even with antithetic sampling")
        if self.steps_per_day < 1:
            raise InvalidParams(f"steps_per_day must be >= 1, got {self.steps_per_day}")
        if self.stratified:
            base = self.n_paths // 2 if self.antithetic else self.n_paths
            if self.n_strata < 1 or base % self.n_strata:
                raise InvalidParams(
                    f"n_strata = {self.n_strata} must divide the "
                    f"{base} independent draws"
                )

    @property
    def n_base(self) -> int:
        """Independent draw count (antithetic partners are mirrored)."""
        return self.n_paths // 2 if self.antithetic else self.n_paths


@dataclass(frozen=True)
class McPrice:
    estimate: float
    std_error: float
    n_effective: int


@dataclass(frozen=True)
class TimeSeriesSpec:
    """Layout of the simulated weekly option panel."""

    n_sample_paths: int = 10
    n_obs: int = 12
    obs_step_days: float = 7.0
    maturities: tuple = (7, 30, 60, 90, 120, 180)
    moneyness: tuple = tuple(np.round(np.linspace(0.9, 1.1, 10), 6))
    spot0: float = 100.0
    v0_init: float = 0.0823
    mc: McConfig = field(
        default_factory=lambda: McConfig(n_paths=10_000, steps_per_day=20)
    )

    def __post_init__(self):
        if list(self.maturities) != sorted(self.maturities):
            raise InvalidParams("maturities must be sorted ascending")
        if any(m <= 0 for m in self.moneyness):
            raise InvalidParams("moneyness values must be positive")
        if self.n_sample_paths < 1 or self.n_obs < 1:
            raise InvalidParams("n_sample_paths and n_obs must be >= 1")


def step_euler(s, v, dt, z_s, z_v, mg: MgParams):
    """One explicit Euler step; the drift/diffusion consume V+ = max(V, 0)."""
    v_plus = np.maximum(v, 0.0)
    s_next = s + mg.r * s * dt + s * np.sqrt(v_plus * dt) * z_s
    v_next = v + mg.kappa * (mg.theta - v_plus) * dt + mg.xi * v_plus**mg.alpha * math.sqrt(dt) * z_v
    return s_next, v_next


def _first_step_shocks(rng, cfg: McConfig, rho: float):
    """Stratified/plain first-step shocks for the independent draws.

    Stratification is equiprobable on the asset-shock uniform; the variance
    shock is built to carry correlation rho against it.
    """
    n = cfg.n_base
    if cfg.stratified:
        per = n // cfg.n_strata
        u = (np.repeat(np.arange(cfg.n_strata), per) + rng.random(n)) / cfg.n_strata
        z_s = ndtri(u)
        z_v = rho * z_s + math.sqrt(1.0 - rho**2) * rng.standard_normal(n)
    else:
        z_v = rng.standard_normal(n)
        z_s = rho * z_v + math.sqrt(1.0 - rho**2) * rng.standard_normal(n)
    return z_s, z_v


def _step_shocks(rng, n, rho):
    z_v = rng.standard_normal(n)
    z_s = rho * z_v + math.sqrt(1.0 - rho**2) * rng.standard_normal(n)
    return z_s, z_v


def simulate_terminal(
    spot: float,
    variance: float,
    mg: MgParams,
    cfg: McConfig,
    maturity_steps,
    dt: float,
    rng=None,
):
    """Simulate all paths, snapshotting S at each requested step count.

    Returns an array of shape (len(maturity_steps), n_paths).  Antithetic
    partners occupy the second half of the path axis.
    """
    if rng is None:
        rng = _philox(cfg.seed)
    maturity_steps = list(maturity_steps)
    n_steps = max(maturity_steps)
    n = cfg.n_base

    s = np.full(n * 2 if cfg.antithetic else n, float(spot))
    v = np.full_like(s, float(variance))
    snapshots = np.empty((len(maturity_steps), s.size))
    snap_at = {step: i for i, step in enumerate(maturity_steps)}
    if 0 in snap_at:
        snapshots[snap_at[0]] = s

    for k in range(1, n_steps + 1):
        if k == 1:
            z_s, z_v = _first_step_shocks(rng, cfg, mg.rho)
        else:
            z_s, z_v = _step_shocks(rng, n, mg.rho)
        if cfg.antithetic:
            z_s = np.concatenate([z_s, -z_s])
            z_v = np.concatenate([z_v, -z_v])
        s, v = step_euler(s, v, dt, z_s, z_v, mg)
        if k in snap_at:
            snapshots[snap_at[k]] = s
    return snapshots


def _estimate(payoffs: np.ndarray, cfg: McConfig, discount: float) -> McPrice:
    """Discounted mean with a variance estimate honoring the sampling design."""
    if cfg.antithetic:
        n = cfg.n_base
        samples = 0.5 * (payoffs[:n] + payoffs[n:])
    else:
        samples = payoffs
    est = discount * float(samples.mean())
    if cfg.stratified:
        per_stratum = samples.reshape(cfg.n_strata, -1)
        n_i = per_stratum.shape[1]
        if n_i > 1:
            var = float(np.sum(per_stratum.var(axis=1, ddof=1) / n_i)) / cfg.n_strata**2
        else:
            var = float(samples.var(ddof=1)) / samples.size
    else:
        var = float(samples.var(ddof=1)) / samples.size
    return McPrice(estimate=est, std_error=discount * math.sqrt(var), n_effective=samples.size)


def maturity_step_count(tau_cal: float, steps_per_day: int) -> int:
    return max(1, round(tau_cal * DAYS_PER_YEAR * steps_per_day))


def price_option_mc(opt: OptionSpec, mg: MgParams, cfg: McConfig) -> McPrice:
    """Discounted-payoff Monte Carlo estimate with standard error."""
    if opt.tau_cal <= 0:
        raise InvalidParams("price_option_mc requires tau_cal > 0")
    n_steps = maturity_step_count(opt.tau_cal, cfg.steps_per_day)
    dt = opt.tau_cal / n_steps
    s_t = simulate_terminal(opt.spot, opt.variance, mg, cfg, [n_steps], dt)[0]
    if opt.is_call:
        payoff = np.maximum(s_t - opt.strike, 0.0)
    else:
        payoff = np.maximum(opt.strike - s_t, 0.0)
    return _estimate(payoff, cfg, math.exp(-mg.r * opt.tau_cal))


def price_surface_mc(
    spot: float,
    variance: float,
    maturities_days,
    strikes,
    mg: MgParams,
    cfg: McConfig,
    kind: str = "call",
):
    """Price a maturity x strike grid of options from one shared path set.

    Returns a dict {(maturity_days, strike): McPrice}.  Sharing paths across
    the surface is what makes desk-scale path counts affordable; estimates
    for different contracts are correlated but individually unbiased.
    """
    maturities_days = list(maturities_days)
    strikes = list(strikes)
    steps = [maturity_step_count(m / DAYS_PER_YEAR, cfg.steps_per_day) for m in maturities_days]
    dt = 1.0 / (DAYS_PER_YEAR * cfg.steps_per_day)
    snapshots = simulate_terminal(spot, variance, mg, cfg, steps, dt)
    out = {}
    for i, m_days in enumerate(maturities_days):
        discount = math.exp(-mg.r * m_days / DAYS_PER_YEAR)
        for k in strikes:
            if kind == "call":
                payoff = np.maximum(snapshots[i] - k, 0.0)
            else:
                payoff = np.maximum(k - snapshots[i], 0.0)
            out[(m_days, k)] = _estimate(payoff, cfg, discount)
    return out


@dataclass(frozen=True)
class PanelRow:
    path_id: int
    obs_index: int
    obs_time_years: float
    v_true: float
    maturity_days: float
    strike: float
    moneyness: float
    mc_price: float
    mc_std_error: float


def generate_time_series(spec: TimeSeriesSpec, mg: MgParams, seed: int = 0):
    """Simulate the weekly observation panel of Monte Carlo option prices.

    For every sample path: a weekly Euler trajectory of (S, V), and at each
    observation the full maturity x moneyness grid priced by Monte Carlo
    from the current (S, V+) state.  Deterministic given (spec, mg, seed).
    """
    rows = []
    dt_obs = spec.obs_step_days / DAYS_PER_YEAR
    for path_id in range(spec.n_sample_paths):
        path_rng = _philox(seed, path_id)
        s, v = spec.spot0, spec.v0_init
        for obs in range(spec.n_obs):
            v_plus = max(v, 0.0)
            strikes = [m * s for m in spec.moneyness]
            cfg = spec.mc
            steps = [
                maturity_step_count(m / DAYS_PER_YEAR, cfg.steps_per_day)
                for m in spec.maturities
            ]
            # pricing stream distinct from the state stream: different first
            # key word, second word packs (path, observation)
            rng = _philox(seed ^ 0x9E3779B97F4A7C15, (path_id << 32) | obs)
            snapshots = simulate_terminal(
                s, v_plus, mg, cfg, steps, 1.0 / (DAYS_PER_YEAR * cfg.steps_per_day), rng
            )
            for i, m_days in enumerate(spec.maturities):
                discount = math.exp(-mg.r * m_days / DAYS_PER_YEAR)
                for money, strike in zip(spec.moneyness, strikes):
                    payoff = np.maximum(snapshots[i] - strike, 0.0)
                    mp = _estimate(payoff, cfg, discount)
                    rows.append(
                        PanelRow(
                            path_id=path_id,
                            obs_index=obs,
                            obs_time_years=obs * dt_obs,
                            v_true=v_plus,
                            maturity_days=float(m_days),
                            strike=float(strike),
                            moneyness=float(money),
                            mc_price=mp.estimate,
                            mc_std_error=mp.std_error,
                        )
                    )
            # advance the weekly state with a single Euler step
            z_s, z_v = _step_shocks(path_rng, 1, mg.rho)
            s_arr, v_arr = step_euler(
                np.array([s]), np.array([v]), dt_obs, z_s, z_v, mg
            )
            s, v = float(s_arr[0]), float(v_arr[0])
    return rows


def write_panel_csv(rows, path, config_comment: str | None = None):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        if config_comment:
            fh.write(f"# {config_comment}\n")
        writer = csv.writer(fh)
        writer.writerow(PANEL_COLUMNS)
        for row in rows:
            writer.writerow(
                [
                    row.path_id,
                    row.obs_index,
                    repr(row.obs_time_years),
                    repr(row.v_true),
                    repr(row.maturity_days),
                    repr(row.strike),
                    repr(row.moneyness),
                    repr(row.mc_price),
                    repr(row.mc_std_error),
                ]
            )
