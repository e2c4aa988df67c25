"""Evaluation protocols: greedy policy scoring under all four reward
presets, partial-observation sweeps, measurement-noise decrease rates, and
open-loop fixed schedules.

Noise perturbs only what the policy observes; the true state always
evolves from the true state, so matched seeds plus a fixed action sequence
reproduce identical trajectories with or without noise. Clean/noisy and
cross-checkpoint comparisons therefore share env seed lists (common random
numbers).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .checkpoint import Checkpoint, load_checkpoint
from .encoding import Mask, default_feature_ranges, normalize_state, apply_mask, sample_mask
from .env import Env, EnvConfig, REWARD_PRESETS, RewardComponents, compute_reward, \
    draw_rain, decode_action, encode_action, N_ACTIONS, write_trajectory_csv
from .errors import CompatibilityError, DomainError
from .net import make_net

# Feature indices the noise channel can touch.
_F_TMAX, _F_TMIN, _F_SRAD, _F_RAIN, _F_SOIL, _F_LAI = 1, 2, 3, 4, 5, 13


@dataclass(frozen=True)
class NoiseSpec:
    """Measurement-noise magnitudes per observable variable.

    Absolute specs perturb additively with U(-b, +b); relative specs
    multiply by U(1-b, 1+b); rainfall is misreported with probability
    1 - rain_accuracy by an independent draw from the weather generator's
    rain distribution. Zero magnitudes leave observations untouched.
    """

    soil_water_abs: float = 0.0
    temperature_abs: float = 0.0
    srad_rel: float = 0.0
    rain_accuracy: float = 1.0
    lai_rel: float = 0.0

    def validate(self) -> None:
        if min(self.soil_water_abs, self.temperature_abs, self.srad_rel, self.lai_rel) < 0:
            raise DomainError("noise magnitudes must be >= 0")
        if not 0.0 < self.rain_accuracy <= 1.0:
            raise DomainError("rain_accuracy must lie in (0, 1]")

    def label(self) -> str:
        parts = []
        if self.soil_water_abs:
            parts.append(f"soil_water+-{self.soil_water_abs:g}")
        if self.temperature_abs:
            parts.append(f"temperature+-{self.temperature_abs:g}")
        if self.srad_rel:
            parts.append(f"srad+-{self.srad_rel:.0%}")
        if self.rain_accuracy < 1.0:
            parts.append(f"rain{self.rain_accuracy:.0%}acc")
        if self.lai_rel:
            parts.append(f"lai+-{self.lai_rel:.0%}")
        return "+".join(parts) if parts else "none"


NOISE_PRESETS = {
    "none": NoiseSpec(),
    "soil02": NoiseSpec(soil_water_abs=0.02),
    "soil05": NoiseSpec(soil_water_abs=0.05),
    "temp1": NoiseSpec(temperature_abs=1.0),
    "temp2": NoiseSpec(temperature_abs=2.0),
    "srad2": NoiseSpec(srad_rel=0.02),
    "srad10": NoiseSpec(srad_rel=0.10),
    "rain90": NoiseSpec(rain_accuracy=0.90),
    "lai10": NoiseSpec(lai_rel=0.10),
    "lai20": NoiseSpec(lai_rel=0.20),
    "combined": NoiseSpec(soil_water_abs=0.02, temperature_abs=2.0, srad_rel=0.02,
                          rain_accuracy=0.90, lai_rel=0.20),
}


def apply_noise(values: np.ndarray, spec: NoiseSpec, env_cfg: EnvConfig,
                ranges, rng: np.random.Generator) -> np.ndarray:
    """Perturb one observed state vector in place-safe copy.

    Uniform draws happen for every variable in a fixed order regardless of
    magnitude, so two specs differing only in magnitude share noise
    directions under the same stream (common random numbers).
    """
    out = values.copy()
    out[_F_SOIL] += rng.uniform(-1.0, 1.0) * spec.soil_water_abs
    out[_F_TMAX] += rng.uniform(-1.0, 1.0) * spec.temperature_abs
    out[_F_TMIN] += rng.uniform(-1.0, 1.0) * spec.temperature_abs
    out[_F_SRAD] *= 1.0 + rng.uniform(-1.0, 1.0) * spec.srad_rel
    out[_F_LAI] *= 1.0 + rng.uniform(-1.0, 1.0) * spec.lai_rel
    if rng.random() < 1.0 - spec.rain_accuracy:
        out[_F_RAIN] = draw_rain(env_cfg, rng)
    for i in (_F_SOIL, _F_TMAX, _F_TMIN, _F_SRAD, _F_RAIN, _F_LAI):
        out[i] = min(max(out[i], ranges.lo[i]), ranges.hi[i])
    return out


@dataclass(frozen=True)
class EvalRow:
    run_id: int
    seed: int
    yield_kg_ha: float
    n_total: float
    w_total: float
    leach_total: float
    rf1: float
    rf2: float
    rf3: float
    rf4: float


EVAL_CSV_COLUMNS = ("run_id", "seed", "yield_kg_ha", "n_total", "w_total",
                    "leach_total", "rf1", "rf2", "rf3", "rf4")


@dataclass
class EvalReport:
    """Per-run rows plus aggregates recomputable from them."""

    rows: list = field(default_factory=list)

    @property
    def n(self) -> int:
        return len(self.rows)

    def values(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.rows])

    def mean(self, name: str) -> float:
        return float(self.values(name).mean())

    def std(self, name: str) -> float:
        return float(self.values(name).std(ddof=1)) if self.n > 1 else 0.0

    def stderr(self, name: str) -> float:
        return self.std(name) / math.sqrt(self.n) if self.n > 0 else 0.0

    def to_csv(self, path) -> None:
        with Path(path).open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(EVAL_CSV_COLUMNS)
            for r in self.rows:
                writer.writerow([r.run_id, r.seed, repr(r.yield_kg_ha), repr(r.n_total),
                                 repr(r.w_total), repr(r.leach_total), repr(r.rf1),
                                 repr(r.rf2), repr(r.rf3), repr(r.rf4)])


def _episode_seeds(seed: int, n: int) -> list[int]:
    state = np.random.SeedSequence([int(seed), 0x5eed]).generate_state(n, dtype=np.uint64)
    return [int(s % (2 ** 63)) for s in state]


def _report_from_totals(rows_totals) -> EvalReport:
    report = EvalReport()
    for i, (seed, y, n_sum, w_sum, leach_sum) in enumerate(rows_totals):
        rf = []
        for name in ("RF1", "RF2", "RF3", "RF4"):
            w = REWARD_PRESETS[name]
            rf.append(w.w1 * y - w.w2 * n_sum - w.w3 * w_sum - w.w4 * leach_sum)
        report.rows.append(EvalRow(run_id=i, seed=seed, yield_kg_ha=y, n_total=n_sum,
                                   w_total=w_sum, leach_total=leach_sum,
                                   rf1=rf[0], rf2=rf[1], rf3=rf[2], rf4=rf[3]))
    return report


def _run_episodes(env_cfg: EnvConfig, n_episodes: int, seed: int, action_fn,
                  traj_dir=None) -> EvalReport:
    """Shared greedy-rollout loop; action_fn(state, env, episode_rng_bundle)."""
    seeds = _episode_seeds(seed, n_episodes)
    totals = []
    for i in range(n_episodes):
        env = Env(env_cfg, seeds[i])
        state = env.reset()
        done = False
        n_sum = w_sum = leach_sum = 0.0
        y = 0.0
        traj = []
        while not done:
            action = action_fn(state, env, i)
            state, rc, done = env.step(action)
            n_sum += rc.n_applied
            w_sum += rc.water_applied
            leach_sum += rc.nitrate_leached
            if done:
                y = rc.yield_at_harvest
            if traj_dir is not None:
                traj.append((state, action, rc))
        if traj_dir is not None:
            traj_path = Path(traj_dir) / f"trajectory_{i:04d}.csv"
            write_trajectory_csv(traj_path, traj)
        totals.append((seeds[i], y, n_sum, w_sum, leach_sum))
    return _report_from_totals(totals)


def _load(ckpt) -> Checkpoint:
    return ckpt if isinstance(ckpt, Checkpoint) else load_checkpoint(ckpt)


def evaluate_policy(ckpt, env_cfg: EnvConfig | None = None, n_episodes: int = 100,
                    mask: Mask | None = None, alpha: float | None = None,
                    noise: NoiseSpec | None = None, seed: int = 0,
                    traj_dir=None) -> EvalReport:
    """Greedy evaluation of a trained checkpoint.

    The observation channel per step: true state -> noise (if any) ->
    mask -> tokens. A fixed ``mask`` applies to every episode; ``alpha``
    instead draws one random mask per episode (a deployment scenario with
    that fraction of sensors missing). Omit both for full observation.
    """
    if n_episodes < 1:
        raise DomainError("n_episodes must be >= 1")
    if mask is not None and alpha is not None:
        raise DomainError("pass a fixed mask or an alpha ratio, not both")
    ckpt = _load(ckpt)
    run_cfg = ckpt.run_config()
    if env_cfg is None:
        env_cfg = run_cfg.env
    else:
        derived = default_feature_ranges(env_cfg)
        if not (np.array_equal(derived.lo, ckpt.ranges.lo)
                and np.array_equal(derived.hi, ckpt.ranges.hi)):
            raise CompatibilityError(
                "env config implies feature ranges different from the checkpoint's; "
                "the policy would normalize observations differently than trained")
    if noise is not None:
        noise.validate()
    net = make_net(run_cfg.net)
    params = ckpt.params
    ranges = ckpt.ranges
    mask_rng = np.random.default_rng([int(seed), 0x3a5c])
    noise_rng = np.random.default_rng([int(seed), 0x70b5])
    current = {"episode": -1, "mask": mask if mask is not None else Mask.all_visible()}

    def policy(state, env, i):
        if i != current["episode"]:
            current["episode"] = i
            if alpha is not None:
                current["mask"] = sample_mask(alpha, alpha, mask_rng)
        observed = state.to_array()
        if noise is not None:
            observed = apply_noise(observed, noise, env_cfg, ranges, noise_rng)
        tokens = apply_mask(normalize_state(observed, ranges), current["mask"])
        q, _ = net.forward(params, tokens.tokens[None, :])
        return int(np.argmax(q[0]))

    return _run_episodes(env_cfg, n_episodes, seed, policy, traj_dir=traj_dir)


def evaluate_random_policy(env_cfg: EnvConfig, n_episodes: int = 100,
                           seed: int = 0) -> EvalReport:
    """Uniform-random action baseline on matched episode seeds."""
    act_rng = np.random.default_rng([int(seed), 0xabcd])

    def policy(state, env, i):
        return int(act_rng.integers(N_ACTIONS))

    return _run_episodes(env_cfg, n_episodes, seed, policy)


# -- fixed schedules ----------------------------------------------------------


@dataclass(frozen=True)
class FixedSchedule:
    """Open-loop (day, n_dose, water_dose) plan; doses must be on the grids."""

    entries: tuple

    @classmethod
    def from_rows(cls, rows, season_max_days: int) -> "FixedSchedule":
        seen = {}
        for day, n_dose, water_dose in rows:
            day = int(day)
            if not 1 <= day <= season_max_days:
                raise DomainError(f"schedule day {day} outside 1..{season_max_days}")
            if day in seen:
                raise DomainError(f"duplicate schedule day {day}")
            seen[day] = encode_action(n_dose, water_dose)
        return cls(entries=tuple(sorted(seen.items())))

    def action_for_day(self, day: int) -> int:
        for d, action in self.entries:
            if d == day:
                return action
        return 0

    def totals(self) -> tuple[float, float]:
        n_sum = w_sum = 0.0
        for _, action in self.entries:
            dose = decode_action(action)
            n_sum += dose.n_dose
            w_sum += dose.water_dose
        return n_sum, w_sum


def load_schedule_csv(path, season_max_days: int) -> FixedSchedule:
    rows = []
    with Path(path).open() as fh:
        for rec in csv.DictReader(fh):
            rows.append((int(rec["day"]), float(rec["n_dose"]), float(rec["water_dose"])))
    return FixedSchedule.from_rows(rows, season_max_days)


def run_fixed_schedule(schedule: FixedSchedule, env_cfg: EnvConfig, seed: int = 0,
                       n_episodes: int = 100) -> EvalReport:
    """Execute the open-loop schedule; days not listed apply nothing."""

    def policy(state, env, i):
        return schedule.action_for_day(int(state.days_after_planting) + 1)

    return _run_episodes(env_cfg, n_episodes, seed, policy)


# -- partial observation sweep -------------------------------------------------


@dataclass(frozen=True)
class SweepRow:
    alpha: float
    mean_rf1: float
    std_rf1: float
    trials: int


SWEEP_CSV_COLUMNS = ("alpha", "mean_rf1", "std_rf1", "trials")


def partial_obs_sweep(ckpt, alphas, trials_per_alpha: int = 100, seed: int = 0,
                      env_cfg: EnvConfig | None = None, out_dir=None) -> list[SweepRow]:
    """Mean RF1 against masking ratio, masks independently resampled per
    trial, env seeds matched across ratios."""
    ckpt = _load(ckpt)
    rows = []
    for alpha in alphas:
        if not 0.0 <= alpha <= 1.0:
            raise DomainError(f"alpha {alpha} outside [0, 1]")
        report = evaluate_policy(ckpt, env_cfg=env_cfg, n_episodes=trials_per_alpha,
                                 alpha=float(alpha), seed=seed)
        rows.append(SweepRow(alpha=float(alpha), mean_rf1=report.mean("rf1"),
                             std_rf1=report.std("rf1"), trials=report.n))
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        write_sweep_csv(rows, out_dir / "sweep.csv")
        from .report import write_sweep_svg
        write_sweep_svg(rows, out_dir / "sweep.svg")
    return rows


def write_sweep_csv(rows, path) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SWEEP_CSV_COLUMNS)
        for r in rows:
            writer.writerow([repr(r.alpha), repr(r.mean_rf1), repr(r.std_rf1), r.trials])


# -- measurement-noise protocol -------------------------------------------------


@dataclass(frozen=True)
class NoiseEvalResult:
    spec: NoiseSpec
    mean_clean: float
    mean_noisy: float
    decrease_rate_pct: float
    n: int


NOISE_CSV_COLUMNS = ("variable_set", "magnitudes", "mean_clean", "mean_noisy",
                     "decrease_rate_pct", "n")


def noise_eval(ckpt, spec: NoiseSpec, n: int = 400, seed: int = 0,
               env_cfg: EnvConfig | None = None) -> NoiseEvalResult:
    """Mean RF1 with and without observation noise on matched env seeds,
    reported as a percentage decrease."""
    if n < 1:
        raise DomainError("n must be >= 1")
    spec.validate()
    ckpt = _load(ckpt)
    clean = evaluate_policy(ckpt, env_cfg=env_cfg, n_episodes=n, seed=seed)
    noisy = evaluate_policy(ckpt, env_cfg=env_cfg, n_episodes=n, seed=seed, noise=spec)
    mean_clean = clean.mean("rf1")
    mean_noisy = noisy.mean("rf1")
    if mean_noisy == mean_clean:
        rate = 0.0
    elif mean_clean == 0.0:
        rate = math.nan
    else:
        rate = 100.0 * (mean_clean - mean_noisy) / mean_clean
    return NoiseEvalResult(spec=spec, mean_clean=mean_clean, mean_noisy=mean_noisy,
                           decrease_rate_pct=rate, n=n)


def write_noise_csv(results, path) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(NOISE_CSV_COLUMNS)
        for name, res in results:
            writer.writerow([name, res.spec.label(), repr(res.mean_clean),
                             repr(res.mean_noisy), repr(res.decrease_rate_pct), res.n])
