"""State tokenization and random masking.

A fully observed 25-feature state becomes a 27-slot integer token sequence:
[CLS], one value token per feature, [SEP]. Value tokens are the integer
part of each feature normalized to [0, 300]; hidden features carry the
reserved MASK id instead. Everything here is pure — same inputs plus the
same RNG state give the same outputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .env import FEATURE_NAMES, N_FEATURES, EnvConfig
from .errors import DomainError, EncodingError

VALUE_LEVELS = 301          # integer value ids 0..300
MASK_ID = 301
CLS_ID = 302
SEP_ID = 303
VOCAB_SIZE = 304
SEQ_LEN = N_FEATURES + 2    # [CLS] + 25 features + [SEP]

# floor(alpha * 25) computed on representable floats: 0.48 * 25 is
# 11.999999999999998 in binary, but the mathematical floor at alpha = 0.48
# is 12, so restore it with a sub-ULP-of-intent epsilon.
_FLOOR_EPS = 1e-9


@dataclass(frozen=True)
class FeatureRanges:
    """Per-feature (min, max) physical bounds used for normalization."""

    lo: np.ndarray  # shape (25,)
    hi: np.ndarray  # shape (25,)

    def __post_init__(self):
        lo = np.asarray(self.lo, dtype=np.float64)
        hi = np.asarray(self.hi, dtype=np.float64)
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        if lo.shape != (N_FEATURES,) or hi.shape != (N_FEATURES,):
            raise DomainError("feature ranges must have exactly 25 (min, max) pairs")
        if not (np.isfinite(lo).all() and np.isfinite(hi).all()):
            raise DomainError("feature ranges must be finite")
        if not (lo < hi).all():
            bad = int(np.argmin(hi - lo))
            raise DomainError(
                f"feature range for '{FEATURE_NAMES[bad]}' (index {bad}) has min >= max")


def default_feature_ranges(cfg: EnvConfig, headroom: float = 0.05) -> FeatureRanges:
    """Physical bounds implied by an EnvConfig, widened by a headroom factor.

    Values outside these bounds clamp to token 0/300 at encoding time, so
    generous bounds trade resolution for coverage; the cumulative-input
    bounds are sized for plausible play, not the random policy's extremes.
    """
    t_noise = 5.0 * cfg.temp_noise_sd + 2.0
    tmax_hi = cfg.temp_mean + cfg.temp_amp + t_noise
    tmax_lo = cfg.temp_mean - cfg.temp_amp - t_noise
    rain_hi = max(60.0, cfg.rain_cap_mm * 1.5)
    season_rain = cfg.rain_prob_wet * cfg.rain_gamma_shape * cfg.rain_gamma_scale \
        * cfg.season_max_days
    bounds = [
        (0.0, float(cfg.season_max_days)),                        # days_after_planting
        (tmax_lo, tmax_hi),                                       # tmax
        (tmax_lo - cfg.diurnal_range - 5.0 * cfg.diurnal_noise_sd - 2.0, tmax_hi),  # tmin
        (0.0, cfg.srad_mean + cfg.srad_amp + 5.0 * cfg.srad_noise_sd + 2.0),        # srad
        (0.0, rain_hi),                                           # rain
        (0.0, cfg.theta_sat),                                     # soil_water
        (0.0, max(200.0, 3.0 * season_rain)),                     # cum_rain
        (0.0, 24.0 * cfg.season_max_days),                        # cum_irrigation
        (0.0, 800.0),                                             # cum_n_applied
        (0.0, 300.0),                                             # soil_nitrate
        (0.0, 300.0),                                             # cum_nitrate_leached
        (0.0, 60.0),                                              # daily_nitrate_leached
        (0.0, 400.0),                                             # cum_plant_n_uptake
        (0.0, cfg.lai_max * 1.1),                                 # leaf_area_index
        (0.0, 25000.0),                                           # biomass
        (0.0, cfg.root_max_cm),                                   # root_depth
        (0.0, 9.0),                                               # growth_stage
        (0.0, cfg.tt_maturity * 1.2),                             # cum_thermal_time
        (0.0, 1.0),                                               # water_stress
        (0.0, 1.0),                                               # nitrogen_stress
        (0.0, 12.0),                                              # daily_et
        (0.0, 80.0),                                              # daily_drainage
        (0.0, 15000.0),                                           # grain_weight
        (1.0, 365.0),                                             # day_of_year
        (0.0, rain_hi),                                           # forecast_rain
    ]
    lo = np.array([b[0] for b in bounds])
    hi = np.array([b[1] for b in bounds])
    span = hi - lo
    return FeatureRanges(lo=lo - headroom * span, hi=hi + headroom * span)


def normalize_state(values, ranges: FeatureRanges) -> np.ndarray:
    """Map 25 physical values to integer ids in {0..300}.

    v_i = floor(300 * clamp((s_i - min_i) / (max_i - min_i), 0, 1)).
    """
    s = np.asarray(values, dtype=np.float64)
    if s.shape != (N_FEATURES,):
        raise EncodingError(f"expected 25 features, got shape {s.shape}")
    finite = np.isfinite(s)
    if not finite.all():
        bad = int(np.argmin(finite))
        raise EncodingError(
            f"non-finite value for feature '{FEATURE_NAMES[bad]}' (index {bad})")
    frac = np.clip((s - ranges.lo) / (ranges.hi - ranges.lo), 0.0, 1.0)
    return np.floor(300.0 * frac).astype(np.int64)


@dataclass(frozen=True)
class Mask:
    """Visibility flags for the 25 features; True = visible."""

    flags: np.ndarray

    def __post_init__(self):
        flags = np.asarray(self.flags, dtype=bool)
        object.__setattr__(self, "flags", flags)
        if flags.shape != (N_FEATURES,):
            raise DomainError("mask must carry exactly 25 flags")

    @property
    def masked_count(self) -> int:
        return int(N_FEATURES - self.flags.sum())

    @property
    def alpha(self) -> float:
        return self.masked_count / N_FEATURES

    @classmethod
    def all_visible(cls) -> "Mask":
        return cls(np.ones(N_FEATURES, dtype=bool))

    @classmethod
    def from_masked_indices(cls, indices) -> "Mask":
        flags = np.ones(N_FEATURES, dtype=bool)
        for i in indices:
            i = int(i)
            if i < 0 or i >= N_FEATURES:
                raise DomainError(f"masked feature index {i} outside 0..24")
            flags[i] = False
        return cls(flags)


def sample_mask(alpha_lo: float, alpha_hi: float, rng: np.random.Generator) -> Mask:
    """Draw a random mask: ratio uniform on [alpha_lo, alpha_hi], then a
    uniform subset of floor(alpha * 25) features is hidden."""
    if not (0.0 <= alpha_lo <= alpha_hi <= 1.0):
        raise DomainError(
            f"mask ratio bounds must satisfy 0 <= lo <= hi <= 1, got [{alpha_lo}, {alpha_hi}]")
    alpha = rng.uniform(alpha_lo, alpha_hi) if alpha_hi > alpha_lo else float(alpha_lo)
    count = int(math.floor(alpha * N_FEATURES + _FLOOR_EPS))
    flags = np.ones(N_FEATURES, dtype=bool)
    if count > 0:
        flags[rng.choice(N_FEATURES, size=count, replace=False)] = False
    return Mask(flags)


@dataclass(frozen=True)
class TokenSequence:
    """27 integer token ids: [CLS], 25 value-or-MASK ids, [SEP]."""

    tokens: np.ndarray
    visible: np.ndarray  # the 25 feature flags the sequence was built with

    def __post_init__(self):
        tokens = np.asarray(self.tokens, dtype=np.int64)
        visible = np.asarray(self.visible, dtype=bool)
        object.__setattr__(self, "tokens", tokens)
        object.__setattr__(self, "visible", visible)
        if tokens.shape != (SEQ_LEN,):
            raise DomainError(f"token sequence must have length {SEQ_LEN}")

    def feature_tokens(self) -> np.ndarray:
        return self.tokens[1:1 + N_FEATURES]


def apply_mask(value_ids, mask: Mask) -> TokenSequence:
    """Assemble the token sequence: visible slots keep their value id,
    hidden slots become MASK, with CLS/SEP bracketing."""
    v = np.asarray(value_ids, dtype=np.int64)
    if v.shape != (N_FEATURES,):
        raise DomainError(f"expected 25 value ids, got shape {v.shape}")
    if ((v < 0) | (v >= VALUE_LEVELS)).any():
        raise DomainError("value ids must lie in 0..300")
    tokens = np.empty(SEQ_LEN, dtype=np.int64)
    tokens[0] = CLS_ID
    tokens[-1] = SEP_ID
    body = np.where(mask.flags, v, MASK_ID)
    tokens[1:1 + N_FEATURES] = body
    return TokenSequence(tokens=tokens, visible=mask.flags.copy())


def observation_targets(value_ids) -> np.ndarray:
    """Reconstruction targets in [0, 1]: value id / 300 for every feature."""
    v = np.asarray(value_ids, dtype=np.float64)
    if v.shape != (N_FEATURES,):
        raise DomainError(f"expected 25 value ids, got shape {v.shape}")
    return v / 300.0


def tokenize(state_values, ranges: FeatureRanges, mask: Mask) -> TokenSequence:
    """normalize_state + apply_mask in one call."""
    return apply_mask(normalize_state(state_values, ranges), mask)
