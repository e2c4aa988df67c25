"""croprl: masked-state DQN for seasonal crop nitrogen/irrigation management.

Subpackages map onto the pipeline stages: ``env`` (surrogate simulator),
``encoding`` (tokenization + masking), ``net`` (bi-task value network with
manual gradients), ``train`` (DQN loop), ``evaluate`` (reward presets,
partial-observation and noise protocols), ``checkpoint``/``config``/``cli``
(persistence and the command-line surface).
"""

from .env import (ActionDose, CropState, Env, EnvConfig, REWARD_PRESETS,
                  RewardComponents, RewardWeights, compute_reward, decode_action,
                  new_env, noise_free_config)
from .encoding import (FeatureRanges, Mask, TokenSequence, apply_mask,
                       default_feature_ranges, normalize_state, observation_targets,
                       sample_mask, tokenize)
from .net import (NetConfig, NetOutput, OptimizerState, TransitionBatch, adam_step,
                  bi_task_loss, gradient_check, init_optimizer, make_net, predict,
                  sync_target)
from .train import ReplayBuffer, TrainConfig, Transition, select_action, train
from .evaluate import (EvalReport, FixedSchedule, NOISE_PRESETS, NoiseSpec,
                       evaluate_policy, evaluate_random_policy, noise_eval,
                       partial_obs_sweep, run_fixed_schedule)
from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .config import EvalConfig, RunConfig, parse_config, parse_config_text, render_config

__version__ = "0.1.0"
