"""Surrogate maize-season simulator.

Stands in for a process-based crop simulator behind the same daily
observation/action/reward contract: a 25-feature state vector, 25 discrete
fertilization/irrigation actions, and an economic reward with a harvest
yield term and daily input costs. Dynamics are deliberately compact —
a single-bucket water balance, one soil nitrate pool, and radiation-use-
efficiency growth — but every water and nitrogen flux is ledgered so mass
balances close to machine precision.

Episodes run one day per step and terminate at thermal maturity or at
``season_max_days``, whichever comes first. All stochasticity flows from a
single seeded generator, so identical (config, seed, action sequence)
triples reproduce trajectories bit for bit.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, DomainError, StateError

# Canonical feature order. Index into CropState.to_array() and into every
# token sequence position 1..25.
FEATURE_NAMES = (
    "days_after_planting",   # 0  days
    "tmax",                  # 1  degC
    "tmin",                  # 2  degC
    "srad",                  # 3  MJ/m2/day
    "rain",                  # 4  mm/day
    "soil_water",            # 5  volumetric fraction
    "cum_rain",              # 6  mm
    "cum_irrigation",        # 7  mm (1 L/m2 = 1 mm)
    "cum_n_applied",         # 8  kg/ha
    "soil_nitrate",          # 9  kg/ha
    "cum_nitrate_leached",   # 10 kg/ha
    "daily_nitrate_leached", # 11 kg/ha
    "cum_plant_n_uptake",    # 12 kg/ha
    "leaf_area_index",       # 13 -
    "biomass",               # 14 kg/ha
    "root_depth",            # 15 cm
    "growth_stage",          # 16 0..9
    "cum_thermal_time",      # 17 degC day
    "water_stress",          # 18 0..1, 1 = no stress
    "nitrogen_stress",       # 19 0..1, 1 = no stress
    "daily_et",              # 20 mm
    "daily_drainage",        # 21 mm
    "grain_weight",          # 22 kg/ha
    "day_of_year",           # 23 1..365
    "forecast_rain",         # 24 mm, next day's draw
)

N_FEATURES = 25

N_DOSES = (0.0, 40.0, 80.0, 120.0, 160.0)      # kg/ha
WATER_DOSES = (0.0, 6.0, 12.0, 18.0, 24.0)     # L/m2 == mm
N_ACTIONS = 25


@dataclass(frozen=True)
class ActionDose:
    """Decoded (nitrogen, water) application for one day."""

    n_dose: float      # kg/ha, one of N_DOSES
    water_dose: float  # L/m2, one of WATER_DOSES


@dataclass(frozen=True)
class RewardComponents:
    """Per-day quantities entering the reward."""

    yield_at_harvest: float  # kg/ha, nonzero only on the terminal step
    n_applied: float         # kg/ha
    water_applied: float     # L/m2
    nitrate_leached: float   # kg/ha


@dataclass(frozen=True)
class RewardWeights:
    """Weights converting yield/inputs/leaching into a scalar reward."""

    w1: float
    w2: float
    w3: float
    w4: float


# Shipped presets: economic profit plus three price-scenario variants.
REWARD_PRESETS = {
    "RF1": RewardWeights(0.158, 0.79, 1.1, 0.0),
    "RF2": RewardWeights(0.158, 0.79, 0.0, 0.0),
    "RF3": RewardWeights(0.158, 0.0, 1.1, 0.0),
    "RF4": RewardWeights(0.158, 1.58, 1.1, 0.0),
}


@dataclass(frozen=True)
class CropState:
    """Fully observed daily state (25 features, canonical order)."""

    days_after_planting: float
    tmax: float
    tmin: float
    srad: float
    rain: float
    soil_water: float
    cum_rain: float
    cum_irrigation: float
    cum_n_applied: float
    soil_nitrate: float
    cum_nitrate_leached: float
    daily_nitrate_leached: float
    cum_plant_n_uptake: float
    leaf_area_index: float
    biomass: float
    root_depth: float
    growth_stage: float
    cum_thermal_time: float
    water_stress: float
    nitrogen_stress: float
    daily_et: float
    daily_drainage: float
    grain_weight: float
    day_of_year: float
    forecast_rain: float

    def to_array(self) -> np.ndarray:
        return np.array([getattr(self, name) for name in FEATURE_NAMES], dtype=np.float64)

    @classmethod
    def from_array(cls, values) -> "CropState":
        return cls(**{name: float(values[i]) for i, name in enumerate(FEATURE_NAMES)})


@dataclass
class EnvConfig:
    """Surrogate simulator parameters.

    Soil water fractions must be ordered wilting_point < critical_sw <
    field_capacity < theta_sat; thermal targets tt_flowering < tt_maturity.
    The default cultivar matures in roughly 45-55 days so desk-scale
    training stays cheap; season_max_days only caps pathological seasons.
    """

    season_max_days: int = 160
    planting_doy: int = 100

    # Soil bucket
    soil_depth_mm: float = 600.0
    theta_sat: float = 0.45
    field_capacity: float = 0.32
    wilting_point: float = 0.12
    critical_sw: float = 0.22
    k_drain: float = 0.5          # fraction of above-field-capacity excess drained per day
    rain_cap_mm: float = 40.0     # daily rain above this runs off

    # Nitrogen pool
    initial_soil_nitrate: float = 25.0   # kg/ha
    mineralization_rate: float = 0.8     # kg/ha/day
    k_leach: float = 0.3
    drainage_half_mm: float = 8.0        # half-saturation of the leaching response to drainage
    n_demand_veg: float = 0.012           # kg N per kg potential biomass growth, pre-flowering
    n_demand_rep: float = 0.007          # same, post-flowering

    # Phenology and growth
    base_temp: float = 10.0
    tt_flowering: float = 270.0
    tt_maturity: float = 520.0
    radiation_use_efficiency: float = 3.2  # g biomass per MJ intercepted
    canopy_extinction: float = 0.6
    lai_init: float = 0.2
    lai_max: float = 4.5
    lai_growth_rate: float = 0.022      # per degC day, logistic rate
    lai_senescence: float = 0.0015       # per degC day decay after flowering
    grain_fraction: float = 0.8          # share of post-flowering growth going to grain
    biomass_init: float = 20.0           # kg/ha at emergence
    root_init_cm: float = 5.0
    root_rate_cm_per_day: float = 1.5
    root_max_cm: float = 60.0

    # Reference evapotranspiration: et0 = base + srad_coef*srad + temp_coef*max(0, tmean)
    et0_base: float = 0.4
    et0_srad_coef: float = 0.16
    et0_temp_coef: float = 0.06

    # Weather generator
    temp_mean: float = 27.0      # annual-mean daily tmax, degC
    temp_amp: float = 6.0        # seasonal amplitude of tmax
    temp_phase_doy: float = 106.0
    temp_noise_sd: float = 1.5
    diurnal_range: float = 9.0   # tmax - tmin before noise
    diurnal_noise_sd: float = 0.8
    rain_prob_wet: float = 0.25
    rain_gamma_shape: float = 1.6
    rain_gamma_scale: float = 5.0  # mm
    srad_mean: float = 21.0
    srad_amp: float = 6.0
    srad_noise_sd: float = 1.8

    rng_seed: int = 0

    def validate(self) -> None:
        checks = [
            (self.wilting_point < self.critical_sw, "wilting_point < critical_sw"),
            (self.critical_sw < self.field_capacity, "critical_sw < field_capacity"),
            (self.field_capacity < self.theta_sat, "field_capacity < theta_sat"),
            (self.tt_flowering < self.tt_maturity, "tt_flowering < tt_maturity"),
            (self.season_max_days >= 1, "season_max_days >= 1"),
            (1 <= self.planting_doy <= 365, "1 <= planting_doy <= 365"),
            (0.0 <= self.rain_prob_wet <= 1.0, "0 <= rain_prob_wet <= 1"),
            (0.0 <= self.k_drain <= 1.0, "0 <= k_drain <= 1"),
            (0.0 <= self.k_leach <= 1.0, "0 <= k_leach <= 1"),
            (0.0 < self.grain_fraction <= 1.0, "0 < grain_fraction <= 1"),
        ]
        nonneg = (
            "soil_depth_mm", "rain_cap_mm", "initial_soil_nitrate", "mineralization_rate",
            "drainage_half_mm", "n_demand_veg", "n_demand_rep", "radiation_use_efficiency",
            "canopy_extinction", "lai_init", "lai_max", "lai_growth_rate", "lai_senescence",
            "biomass_init", "root_init_cm", "root_rate_cm_per_day", "root_max_cm",
            "et0_base", "et0_srad_coef", "et0_temp_coef", "temp_noise_sd", "diurnal_noise_sd",
            "rain_gamma_shape", "rain_gamma_scale", "srad_noise_sd",
        )
        for name in nonneg:
            checks.append((getattr(self, name) >= 0.0, f"{name} >= 0"))
        for ok, constraint in checks:
            if not ok:
                raise ConfigurationError(f"env config violates: {constraint}")


def noise_free_config(**overrides) -> EnvConfig:
    """Default config with every stochastic weather term switched off.

    Rain never falls and temperatures/radiation follow the bare sinusoids,
    so trajectories are fully determined by the action sequence. Used by
    hand-check oracles and the learning smoke tests.
    """
    cfg = EnvConfig(temp_noise_sd=0.0, diurnal_noise_sd=0.0, srad_noise_sd=0.0,
                    rain_prob_wet=0.0)
    for key, value in overrides.items():
        if not hasattr(cfg, key):
            raise DomainError(f"unknown EnvConfig field: {key}")
        setattr(cfg, key, value)
    cfg.validate()
    return cfg


def decode_action(index: int) -> ActionDose:
    """Map a discrete action index 0..24 to its (N, water) dose pair.

    Row-major: index = 5 * n_level + water_level, so n_dose = 40 * (index // 5)
    and water_dose = 6 * (index % 5).
    """
    idx = int(index)
    if idx < 0 or idx >= N_ACTIONS:
        raise DomainError(f"action index {index} outside 0..{N_ACTIONS - 1}")
    return ActionDose(n_dose=N_DOSES[idx // 5], water_dose=WATER_DOSES[idx % 5])


def encode_action(n_dose: float, water_dose: float) -> int:
    """Inverse of decode_action; doses must sit exactly on the grids."""
    try:
        n_level = N_DOSES.index(float(n_dose))
        w_level = WATER_DOSES.index(float(water_dose))
    except ValueError:
        raise DomainError(
            f"dose pair ({n_dose}, {water_dose}) is not on the action grids "
            f"{N_DOSES} x {WATER_DOSES}") from None
    return 5 * n_level + w_level


def compute_reward(rc: RewardComponents, w: RewardWeights, is_harvest: bool) -> float:
    """Daily reward: input costs every day, plus the yield term at harvest."""
    r = -w.w2 * rc.n_applied - w.w3 * rc.water_applied - w.w4 * rc.nitrate_leached
    if is_harvest:
        r += w.w1 * rc.yield_at_harvest
    return r


@dataclass(frozen=True)
class Weather:
    tmax: float
    tmin: float
    srad: float
    rain: float


def draw_rain(cfg: EnvConfig, rng: np.random.Generator) -> float:
    """One draw from the rain process: dry with prob 1 - p_wet, else gamma."""
    if rng.random() >= cfg.rain_prob_wet:
        return 0.0
    return float(rng.gamma(cfg.rain_gamma_shape, cfg.rain_gamma_scale))


def draw_weather(cfg: EnvConfig, doy: int, rng: np.random.Generator) -> Weather:
    """Sample one day of weather from the seasonal sinusoid model.

    Draw order (tmax noise, diurnal noise, srad noise, rain) is part of the
    determinism contract; do not reorder.
    """
    phase = 2.0 * math.pi * (doy - cfg.temp_phase_doy) / 365.0
    tmax = cfg.temp_mean + cfg.temp_amp * math.sin(phase)
    if cfg.temp_noise_sd > 0.0:
        tmax += rng.normal(0.0, cfg.temp_noise_sd)
    diurnal = cfg.diurnal_range
    if cfg.diurnal_noise_sd > 0.0:
        diurnal += rng.normal(0.0, cfg.diurnal_noise_sd)
    tmin = tmax - diurnal
    srad = cfg.srad_mean + cfg.srad_amp * math.sin(phase)
    if cfg.srad_noise_sd > 0.0:
        srad += rng.normal(0.0, cfg.srad_noise_sd)
    srad = max(0.0, srad)
    rain = draw_rain(cfg, rng)
    return Weather(tmax=tmax, tmin=tmin, srad=srad, rain=rain)


def reference_et0(cfg: EnvConfig, w: Weather) -> float:
    tmean = 0.5 * (w.tmax + w.tmin)
    return cfg.et0_base + cfg.et0_srad_coef * w.srad + cfg.et0_temp_coef * max(0.0, tmean)


def canopy_interception(cfg: EnvConfig, lai: float) -> float:
    """Fraction of radiation (and ET demand) intercepted by the canopy."""
    return 1.0 - math.exp(-cfg.canopy_extinction * lai)


def water_stress_factor(cfg: EnvConfig, soil_water: float) -> float:
    """1 above the critical fraction, linear to 0 at wilting point."""
    span = cfg.critical_sw - cfg.wilting_point
    return min(1.0, max(0.0, (soil_water - cfg.wilting_point) / span))


@dataclass(frozen=True)
class WaterFlux:
    """Result of one daily bucket update. All depths in mm."""

    new_soil_water: float  # volumetric fraction
    et: float
    drainage: float
    runoff: float
    infiltration: float


def water_balance_step(cfg: EnvConfig, soil_water: float, lai: float,
                       rain: float, irrigation: float, et0: float) -> WaterFlux:
    """Single-bucket daily water balance.

    Rain above ``rain_cap_mm`` runs off; infiltration that would push
    storage past saturation also runs off, so the bucket is bounded by the
    flux terms alone. The accounting identity
    ``delta(soil_water * depth) == infiltration - et - drainage`` holds
    exactly (runoff is excluded from infiltration by construction).
    """
    depth = cfg.soil_depth_mm
    storage = soil_water * depth

    runoff = max(0.0, rain - cfg.rain_cap_mm)
    infiltration = rain - runoff + irrigation

    et = et0 * canopy_interception(cfg, lai) * water_stress_factor(cfg, soil_water)

    drainage = cfg.k_drain * max(0.0, storage + infiltration - et - cfg.field_capacity * depth)

    # Saturation excess cannot enter the bucket; divert it to runoff before
    # it ever counts as infiltration.
    excess = max(0.0, storage + infiltration - et - drainage - cfg.theta_sat * depth)
    if excess > 0.0:
        runoff += excess
        infiltration -= excess

    new_storage = storage + infiltration - et - drainage
    return WaterFlux(new_soil_water=new_storage / depth, et=et, drainage=drainage,
                     runoff=runoff, infiltration=infiltration)


@dataclass(frozen=True)
class NitrogenFlux:
    """Result of one daily nitrate-pool update. All masses in kg/ha."""

    new_pool: float
    leached: float
    uptake: float
    mineralized: float


def nitrogen_balance_step(cfg: EnvConfig, pool: float, n_applied: float,
                          drainage: float, demand: float) -> NitrogenFlux:
    """Single-pool nitrate balance: apply + mineralize, leach with drainage,
    then plant uptake limited by what remains."""
    mineralized = cfg.mineralization_rate
    pool = pool + n_applied + mineralized
    leached = pool * cfg.k_leach * (drainage / (drainage + cfg.drainage_half_mm)) \
        if drainage > 0.0 else 0.0
    uptake = min(pool - leached, demand)
    uptake = max(0.0, uptake)
    new_pool = pool - leached - uptake
    return NitrogenFlux(new_pool=new_pool, leached=leached, uptake=uptake,
                        mineralized=mineralized)


@dataclass(frozen=True)
class GrowthResult:
    new_lai: float
    new_biomass: float
    new_grain: float
    new_stage: int
    tt_increment: float


def thermal_time_increment(cfg: EnvConfig, w: Weather) -> float:
    return max(0.0, 0.5 * (w.tmax + w.tmin) - cfg.base_temp)


def potential_growth(cfg: EnvConfig, lai: float, srad: float) -> float:
    """Stress-free biomass increment, kg/ha (RUE in g/m2 -> x10)."""
    return cfg.radiation_use_efficiency * srad * canopy_interception(cfg, lai) * 10.0


def growth_step(cfg: EnvConfig, lai: float, biomass: float, grain: float,
                cum_tt: float, tt_inc: float, srad: float, stress: float) -> GrowthResult:
    """Daily canopy/biomass/grain update.

    LAI follows a logistic expansion in thermal time scaled by the binding
    stress, switching to exponential senescence after flowering. Biomass
    accumulates as RUE x intercepted radiation x stress; after flowering a
    fixed fraction of each increment partitions to grain, so grain can
    never exceed biomass.
    """
    flowering = cum_tt >= cfg.tt_flowering
    if flowering:
        new_lai = lai * (1.0 - min(1.0, cfg.lai_senescence * tt_inc))
    else:
        new_lai = lai + cfg.lai_growth_rate * tt_inc * lai * (1.0 - lai / cfg.lai_max) * stress
        new_lai = min(new_lai, cfg.lai_max)
    new_lai = max(0.0, new_lai)

    delta_biomass = potential_growth(cfg, lai, srad) * stress
    if tt_inc <= 0.0:
        delta_biomass = 0.0  # below base temperature the crop idles
    new_biomass = biomass + delta_biomass
    new_grain = grain + (cfg.grain_fraction * delta_biomass if flowering else 0.0)

    new_tt = cum_tt + tt_inc
    stage = min(9, int(10.0 * new_tt / cfg.tt_maturity))
    return GrowthResult(new_lai=new_lai, new_biomass=new_biomass, new_grain=new_grain,
                        new_stage=stage, tt_increment=tt_inc)


class Env:
    """Seeded surrogate season. One instance = one RNG stream.

    Repeated reset() calls continue the same stream, so a single Env yields
    a deterministic sequence of distinct episodes. Not shareable
    mid-episode across threads.
    """

    def __init__(self, config: EnvConfig, seed: int):
        config.validate()
        self.config = config
        self.seed = int(seed)
        self._rng = np.random.default_rng(self.seed)
        self._state: CropState | None = None
        self._done = True
        # Mass-balance ledgers (audit only, not part of the observed state).
        self.cum_et = 0.0
        self.cum_drainage = 0.0
        self.cum_runoff = 0.0
        self.cum_mineralized = 0.0
        self.initial_storage_mm = 0.0
        self.initial_nitrate = 0.0

    # -- lifecycle ---------------------------------------------------------

    def reset(self) -> CropState:
        cfg = self.config
        self._done = False
        self._days = 0
        self._soil_water = cfg.field_capacity
        self._nitrate = cfg.initial_soil_nitrate
        self._lai = cfg.lai_init
        self._biomass = cfg.biomass_init
        self._grain = 0.0
        self._tt = 0.0
        self._root = cfg.root_init_cm
        self._cum_rain = 0.0
        self._cum_irrigation = 0.0
        self._cum_n_applied = 0.0
        self._cum_leached = 0.0
        self._cum_uptake = 0.0
        self.cum_et = 0.0
        self.cum_drainage = 0.0
        self.cum_runoff = 0.0
        self.cum_mineralized = 0.0
        self.initial_storage_mm = self._soil_water * cfg.soil_depth_mm
        self.initial_nitrate = self._nitrate

        # Weather runs one day ahead so forecast_rain is always the true next draw.
        self._today = draw_weather(cfg, self._doy(0), self._rng)
        self._tomorrow = draw_weather(cfg, self._doy(1), self._rng)
        self._state = self._make_state(
            weather=self._today, water_stress=water_stress_factor(cfg, self._soil_water),
            nitrogen_stress=1.0, daily_et=0.0, daily_drainage=0.0, daily_leached=0.0)
        return self._state

    def step(self, action: int) -> tuple[CropState, RewardComponents, bool]:
        if self._state is None:
            raise StateError("step() before reset()")
        if self._done:
            raise StateError("step() after episode end; call reset()")
        cfg = self.config
        dose = decode_action(action)

        # Advance the weather stream: the day being simulated uses the
        # previously forecast draw, and a fresh draw becomes the new forecast.
        weather = self._tomorrow
        self._days += 1
        self._tomorrow = draw_weather(cfg, self._doy(self._days + 1), self._rng)
        self._today = weather

        et0 = reference_et0(cfg, weather)
        wflux = water_balance_step(cfg, self._soil_water, self._lai,
                                   weather.rain, dose.water_dose, et0)
        w_stress = water_stress_factor(cfg, self._soil_water)

        tt_inc = thermal_time_increment(cfg, weather)
        pot = potential_growth(cfg, self._lai, weather.srad) if tt_inc > 0.0 else 0.0
        demand_coef = cfg.n_demand_rep if self._tt >= cfg.tt_flowering else cfg.n_demand_veg
        demand = demand_coef * pot
        nflux = nitrogen_balance_step(cfg, self._nitrate, dose.n_dose,
                                      wflux.drainage, demand)
        n_stress = min(1.0, nflux.uptake / demand) if demand > 0.0 else 1.0

        stress = min(w_stress, n_stress)
        growth = growth_step(cfg, self._lai, self._biomass, self._grain,
                             self._tt, tt_inc, weather.srad, stress)

        self._soil_water = wflux.new_soil_water
        self._nitrate = nflux.new_pool
        self._lai = growth.new_lai
        self._biomass = growth.new_biomass
        self._grain = growth.new_grain
        self._tt += growth.tt_increment
        self._root = min(cfg.root_max_cm, self._root + cfg.root_rate_cm_per_day)
        self._cum_rain += weather.rain
        self._cum_irrigation += dose.water_dose
        self._cum_n_applied += dose.n_dose
        self._cum_leached += nflux.leached
        self._cum_uptake += nflux.uptake
        self.cum_et += wflux.et
        self.cum_drainage += wflux.drainage
        self.cum_runoff += wflux.runoff
        self.cum_mineralized += nflux.mineralized

        self._done = self._tt >= cfg.tt_maturity or self._days >= cfg.season_max_days
        rc = RewardComponents(
            yield_at_harvest=self._grain if self._done else 0.0,
            n_applied=dose.n_dose,
            water_applied=dose.water_dose,
            nitrate_leached=nflux.leached,
        )
        self._state = self._make_state(
            weather=weather, water_stress=w_stress, nitrogen_stress=n_stress,
            daily_et=wflux.et, daily_drainage=wflux.drainage, daily_leached=nflux.leached)
        return self._state, rc, self._done

    @property
    def done(self) -> bool:
        return self._done

    @property
    def state(self) -> CropState | None:
        return self._state

    # -- audit helpers -----------------------------------------------------

    def water_balance_residual(self) -> float:
        """|inputs - outputs - storage change| in mm for the episode so far."""
        storage = self._soil_water * self.config.soil_depth_mm
        return abs(self._cum_rain + self._cum_irrigation
                   - (self.cum_et + self.cum_drainage + self.cum_runoff)
                   - (storage - self.initial_storage_mm))

    def nitrogen_balance_residual(self) -> float:
        """|applied + mineralized - leached - uptaken - pool change| in kg/ha."""
        return abs(self._cum_n_applied + self.cum_mineralized
                   - self._cum_leached - self._cum_uptake
                   - (self._nitrate - self.initial_nitrate))

    # -- internals ----------------------------------------------------------

    def _doy(self, days_after_planting: int) -> int:
        return (self.config.planting_doy - 1 + days_after_planting) % 365 + 1

    def _make_state(self, weather: Weather, water_stress: float, nitrogen_stress: float,
                    daily_et: float, daily_drainage: float, daily_leached: float) -> CropState:
        cfg = self.config
        return CropState(
            days_after_planting=float(self._days),
            tmax=weather.tmax,
            tmin=weather.tmin,
            srad=weather.srad,
            rain=weather.rain,
            soil_water=self._soil_water,
            cum_rain=self._cum_rain,
            cum_irrigation=self._cum_irrigation,
            cum_n_applied=self._cum_n_applied,
            soil_nitrate=self._nitrate,
            cum_nitrate_leached=self._cum_leached,
            daily_nitrate_leached=daily_leached,
            cum_plant_n_uptake=self._cum_uptake,
            leaf_area_index=self._lai,
            biomass=self._biomass,
            root_depth=self._root,
            growth_stage=float(min(9, int(10.0 * self._tt / cfg.tt_maturity))),
            cum_thermal_time=self._tt,
            water_stress=water_stress,
            nitrogen_stress=nitrogen_stress,
            daily_et=daily_et,
            daily_drainage=daily_drainage,
            grain_weight=self._grain,
            day_of_year=float(self._doy(self._days)),
            forecast_rain=self._tomorrow.rain,
        )


def new_env(config: EnvConfig, seed: int) -> Env:
    """Construct a validated, pre-reset environment."""
    return Env(config, seed)


TRAJECTORY_COLUMNS = FEATURE_NAMES + (
    "action", "yield_at_harvest", "n_applied", "water_applied", "nitrate_leached")


def write_trajectory_csv(path, rows) -> None:
    """Dump one episode, one row per day: 25 features + action + reward parts.

    ``rows`` is an iterable of (CropState, action_index, RewardComponents)
    tuples for the state *resulting* from each action.
    """
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRAJECTORY_COLUMNS)
        for state, action, rc in rows:
            writer.writerow([repr(float(v)) for v in state.to_array()]
                            + [int(action), repr(rc.yield_at_harvest), repr(rc.n_applied),
                               repr(rc.water_applied), repr(rc.nitrate_leached)])
