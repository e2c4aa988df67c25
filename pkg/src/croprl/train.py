"""DQN training loop binding the simulator, masking channel and network.

Every source of randomness (weights init, env weather, mask draws,
exploration, replay sampling) gets its own generator spawned from the one
configured seed, so a (config, seed) pair fully determines the training
log and the final checkpoint, byte for byte.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .encoding import SEQ_LEN, N_FEATURES, default_feature_ranges, observation_targets, \
    normalize_state, sample_mask, apply_mask, TokenSequence
from .env import Env, REWARD_PRESETS, compute_reward, N_ACTIONS
from .errors import ConfigurationError, StateError, TrainingError
from .net import NetConfig, make_net, init_optimizer, bi_task_loss, adam_step, \
    sync_target, TransitionBatch, param_count


@dataclass
class TrainConfig:
    """Training hyperparameters. Defaults follow the published setup
    (gamma, lambda, learning rate, batch size, mask range); cadence and
    schedule knobs are desk-scale plumbing and are meant to be overridden
    by profiles."""

    episodes: int = 2000
    gamma: float = 0.99
    lam: float = 0.02
    batch_size: int = 512
    lr: float = 1e-5
    buffer_capacity: int = 100_000
    target_sync_interval: int = 1000   # environment steps between hard target syncs
    train_every: int = 1               # env steps per gradient step
    eps_start: float = 1.0
    eps_end: float = 0.05
    eps_decay_steps: int = 0           # 0 -> half of episodes * season_max_days
    alpha_lo: float = 0.0
    alpha_hi: float = 0.48
    reward_preset: str = "RF1"
    reward_scale: float = 1.0          # scales TD rewards only, never logged metrics
    seed: int = 0

    def validate(self) -> None:
        checks = [
            (self.episodes >= 0, "episodes >= 0"),
            (0.0 <= self.gamma <= 1.0, "0 <= gamma <= 1"),
            (self.lam >= 0.0, "lam >= 0"),
            (self.batch_size >= 1, "batch_size >= 1"),
            (self.lr > 0.0, "lr > 0"),
            (self.buffer_capacity >= 1, "buffer_capacity >= 1"),
            (self.target_sync_interval >= 1, "target_sync_interval >= 1"),
            (self.train_every >= 1, "train_every >= 1"),
            (0.0 <= self.eps_end <= self.eps_start <= 1.0, "0 <= eps_end <= eps_start <= 1"),
            (self.eps_decay_steps >= 0, "eps_decay_steps >= 0"),
            (0.0 <= self.alpha_lo <= self.alpha_hi <= 1.0, "0 <= alpha_lo <= alpha_hi <= 1"),
            (self.reward_preset in REWARD_PRESETS,
             f"reward_preset in {sorted(REWARD_PRESETS)}"),
            (self.reward_scale > 0.0, "reward_scale > 0"),
        ]
        for ok, constraint in checks:
            if not ok:
                raise ConfigurationError(f"train config violates: {constraint}")


@dataclass(frozen=True)
class Transition:
    """One stored step: masked observation, full-state targets, outcome."""

    obs_tokens: TokenSequence
    full_targets: np.ndarray
    action: int
    reward: float
    next_obs_tokens: TokenSequence
    done: bool


class ReplayBuffer:
    """Fixed-capacity ring over preallocated arrays.

    push() overwrites the oldest entry at capacity; sample() is uniform
    with replacement and returns copies, so training can never mutate
    stored transitions.
    """

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ConfigurationError("replay capacity must be >= 1")
        self.capacity = capacity
        self.size = 0
        self.cursor = 0
        self._obs = np.zeros((capacity, SEQ_LEN), dtype=np.int64)
        self._targets = np.zeros((capacity, N_FEATURES))
        self._actions = np.zeros(capacity, dtype=np.int64)
        self._rewards = np.zeros(capacity)
        self._next_obs = np.zeros((capacity, SEQ_LEN), dtype=np.int64)
        self._dones = np.zeros(capacity)

    def push(self, t: Transition) -> None:
        i = self.cursor
        self._obs[i] = t.obs_tokens.tokens
        self._targets[i] = t.full_targets
        self._actions[i] = t.action
        self._rewards[i] = t.reward
        self._next_obs[i] = t.next_obs_tokens.tokens
        self._dones[i] = 1.0 if t.done else 0.0
        self.cursor = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, n: int, rng: np.random.Generator) -> TransitionBatch:
        if n > self.size:
            raise StateError(f"cannot sample {n} transitions from buffer of size {self.size}")
        idx = rng.integers(0, self.size, size=n)
        return TransitionBatch(
            obs_tokens=self._obs[idx].copy(),
            targets=self._targets[idx].copy(),
            actions=self._actions[idx].copy(),
            rewards=self._rewards[idx].copy(),
            next_obs_tokens=self._next_obs[idx].copy(),
            dones=self._dones[idx].copy(),
        )

    def __len__(self):
        return self.size


def select_action(net, params, obs_tokens, eps: float, rng: np.random.Generator) -> int:
    """Epsilon-greedy over the 25 Q-values; greedy ties break to the lowest
    index (np.argmax convention)."""
    if not 0.0 <= eps <= 1.0:
        raise ConfigurationError("epsilon must lie in [0, 1]")
    if rng.random() < eps:
        return int(rng.integers(N_ACTIONS))
    tokens = obs_tokens.tokens if isinstance(obs_tokens, TokenSequence) else np.asarray(obs_tokens)
    q, _ = net.forward(params, tokens[None, :])
    return int(np.argmax(q[0]))


TRAIN_LOG_COLUMNS = ("episode", "steps", "epsilon", "td_loss", "recon_loss",
                     "rf1", "rf2", "rf3", "rf4",
                     "yield_kg_ha", "n_total", "w_total", "leach_total")

_RF_ORDER = ("RF1", "RF2", "RF3", "RF4")


def episode_returns(yield_kg_ha, n_total, w_total, leach_total):
    """Undiscounted episode return under each shipped preset. Identical to
    summing the daily rewards because the per-day terms are linear."""
    out = []
    for name in _RF_ORDER:
        w = REWARD_PRESETS[name]
        out.append(w.w1 * yield_kg_ha - w.w2 * n_total - w.w3 * w_total - w.w4 * leach_total)
    return out


def epsilon_at(cfg: TrainConfig, step: int, decay_steps: int) -> float:
    if decay_steps <= 0:
        return cfg.eps_end
    frac = min(1.0, step / decay_steps)
    return cfg.eps_start + (cfg.eps_end - cfg.eps_start) * frac


def train(run_cfg, out_dir, log_stream=None):
    """Run DQN training and write train_log.csv + checkpoint.ckpt.

    ``run_cfg`` is a RunConfig (env + net + train sections). Returns the
    final Checkpoint. Progress prints one line per episode.
    """
    # Imported here: config/checkpoint sit above this module in the layering.
    from .checkpoint import Checkpoint, save_checkpoint
    from .config import render_config

    cfg: TrainConfig = run_cfg.train
    cfg.validate()
    run_cfg.env.validate()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    log_stream = log_stream if log_stream is not None else sys.stdout

    ss = np.random.SeedSequence(cfg.seed)
    init_rng, mask_rng, explore_rng, sample_rng = \
        [np.random.default_rng(s) for s in ss.spawn(4)]
    env_seed = int(ss.generate_state(1, dtype=np.uint64)[0] % (2 ** 63))

    net = make_net(run_cfg.net)
    params = net.init_params(init_rng)
    target_params = sync_target(params)
    opt = init_optimizer(params, cfg.lr)
    buffer = ReplayBuffer(cfg.buffer_capacity)
    env = Env(run_cfg.env, env_seed)
    ranges = default_feature_ranges(run_cfg.env)
    weights = REWARD_PRESETS[cfg.reward_preset]
    decay_steps = cfg.eps_decay_steps or (cfg.episodes * run_cfg.env.season_max_days) // 2
    config_text = render_config(run_cfg)

    print(f"training {run_cfg.net.approximator} ({param_count(params)} parameters), "
          f"{cfg.episodes} episodes, preset {cfg.reward_preset}", file=log_stream)

    log_path = out_dir / "train_log.csv"
    global_step = 0
    episodes_done = 0
    try:
        with log_path.open("w", newline="") as log:
            log.write(",".join(TRAIN_LOG_COLUMNS) + "\n")
            for ep in range(cfg.episodes):
                state = env.reset()
                done = False
                steps = 0
                n_total = w_total = leach_total = 0.0
                final_yield = 0.0
                td_losses: list[float] = []
                recon_losses: list[float] = []
                eps_episode = epsilon_at(cfg, global_step, decay_steps)
                while not done:
                    eps = epsilon_at(cfg, global_step, decay_steps)
                    values = normalize_state(state.to_array(), ranges)
                    obs = apply_mask(values, sample_mask(cfg.alpha_lo, cfg.alpha_hi, mask_rng))
                    action = select_action(net, params, obs, eps, explore_rng)
                    next_state, rc, done = env.step(action)
                    next_values = normalize_state(next_state.to_array(), ranges)
                    next_obs = apply_mask(
                        next_values, sample_mask(cfg.alpha_lo, cfg.alpha_hi, mask_rng))
                    reward = compute_reward(rc, weights, done)
                    buffer.push(Transition(
                        obs_tokens=obs,
                        full_targets=observation_targets(values),
                        action=action,
                        reward=reward * cfg.reward_scale,
                        next_obs_tokens=next_obs,
                        done=done,
                    ))
                    n_total += rc.n_applied
                    w_total += rc.water_applied
                    leach_total += rc.nitrate_leached
                    if done:
                        final_yield = rc.yield_at_harvest
                    global_step += 1
                    steps += 1
                    if buffer.size >= cfg.batch_size and global_step % cfg.train_every == 0:
                        batch = buffer.sample(cfg.batch_size, sample_rng)
                        result = bi_task_loss(net, params, target_params, batch,
                                              cfg.lam, cfg.gamma)
                        if not np.isfinite(result.loss):
                            raise TrainingError(f"non-finite loss at step {global_step}")
                        adam_step(params, result.grads, opt)
                        td_losses.append(result.td_loss)
                        recon_losses.append(result.recon_loss)
                    if global_step % cfg.target_sync_interval == 0:
                        target_params = sync_target(params)
                    state = next_state
                rf = episode_returns(final_yield, n_total, w_total, leach_total)
                mean_td = float(np.mean(td_losses)) if td_losses else float("nan")
                mean_recon = float(np.mean(recon_losses)) if recon_losses else float("nan")
                row = [str(ep), str(steps), repr(eps_episode), repr(mean_td), repr(mean_recon),
                       *(repr(v) for v in rf), repr(final_yield), repr(n_total),
                       repr(w_total), repr(leach_total)]
                log.write(",".join(row) + "\n")
                episodes_done = ep + 1
                print(f"episode {ep:4d}  steps {steps:3d}  eps {eps_episode:.3f}  "
                      f"rf1 {rf[0]:9.1f}  yield {final_yield:7.1f}  n {n_total:5.0f}  "
                      f"w {w_total:5.0f}", file=log_stream)
    except TrainingError:
        ckpt = Checkpoint(config_text=config_text, params=params, opt=opt,
                          ranges=ranges, rng_states=_rng_states(init_rng, mask_rng,
                                                                explore_rng, sample_rng, env),
                          train_steps=global_step, episodes_done=episodes_done)
        save_checkpoint(ckpt, out_dir / "diagnostic.ckpt")
        raise

    ckpt = Checkpoint(config_text=config_text, params=params, opt=opt,
                      ranges=ranges, rng_states=_rng_states(init_rng, mask_rng,
                                                            explore_rng, sample_rng, env),
                      train_steps=global_step, episodes_done=episodes_done)
    save_checkpoint(ckpt, out_dir / "checkpoint.ckpt")
    (out_dir / "effective_config.ini").write_text(config_text)
    return ckpt


def _rng_states(init_rng, mask_rng, explore_rng, sample_rng, env) -> dict:
    return {
        "init": init_rng.bit_generator.state,
        "mask": mask_rng.bit_generator.state,
        "explore": explore_rng.bit_generator.state,
        "sample": sample_rng.bit_generator.state,
        "env": env._rng.bit_generator.state,
    }
