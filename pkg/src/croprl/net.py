"""Bi-task value network with hand-written gradients.

Two interchangeable approximators map a 27-token observation to 25 action
values plus a 25-feature reconstruction of the normalized state:

* ``TransformerNet`` — token + position embeddings, pre-norm self-attention
  blocks, a Q head on the [CLS] position and a shared per-position
  reconstruction head. This is the shipped default.
* ``MlpNet`` — the plain feed-forward baseline (25 -> 512 -> 256 -> 25+25)
  reading normalized values with a sentinel in masked slots.

Everything runs in float64. Backward passes are exact analytic derivatives
(verified against central finite differences by ``gradient_check``), and
parameters live in flat name->array dicts so the optimizer, checkpoints
and the gradient checker stay generic.

With ``n_layers == 0`` the transformer degenerates to embeddings feeding
the heads directly (no final layer norm), which is linear along every
parameter coordinate; the finite-difference oracle is exact there up to
rounding, which the tightest gradient tests rely on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba
import numpy as np
from numba import njit, prange

from .encoding import N_FEATURES, SEQ_LEN, VOCAB_SIZE
from .errors import DomainError, TrainingError

# The workqueue layer skips the TBB/OMP probing and is plenty for 2 cores;
# per-element/per-row parallelism keeps results thread-count independent.
numba.config.THREADING_LAYER = "workqueue"

N_ACTIONS = 25

_GELU_C = math.sqrt(2.0 / math.pi)
_GELU_A = 0.044715
_LN_EPS = 1e-6


@dataclass(frozen=True)
class NetConfig:
    """Architecture hyperparameters shared by checkpoints and sessions."""

    approximator: str = "transformer"  # "transformer" | "mlp"
    d_model: int = 64
    n_layers: int = 2
    n_heads: int = 4
    ffn_dim: int = 128
    mlp_hidden1: int = 512
    mlp_hidden2: int = 256
    mask_sentinel: float = -1.0

    def validate(self) -> None:
        if self.approximator not in ("transformer", "mlp"):
            raise DomainError(f"unknown approximator '{self.approximator}'")
        if self.d_model <= 0 or self.n_heads <= 0 or self.ffn_dim <= 0:
            raise DomainError("network dimensions must be positive")
        if self.d_model % self.n_heads != 0:
            raise DomainError(
                f"d_model={self.d_model} not divisible by n_heads={self.n_heads}")


@dataclass(frozen=True)
class NetOutput:
    """Per-observation outputs: 25 action values, 25 reconstructed features."""

    q_values: np.ndarray
    recon: np.ndarray


# Hot helpers are fused numba kernels: this host's memory bandwidth makes
# each fresh large temporary cost several times the arithmetic, so the
# elementwise chains run as single passes. tanh/exp stay on numpy's SIMD
# loops (numba's scalar libm calls are an order of magnitude slower).
# No fastmath anywhere: results must be bit-stable for the determinism and
# finite-difference contracts.


@njit(parallel=True, fastmath=False, cache=True)
def _gelu_inner_nb(x, t):
    c, a = _GELU_C, _GELU_A
    xf = x.reshape(x.size)
    tf = t.reshape(t.size)
    for i in prange(xf.size):
        v = xf[i]
        tf[i] = c * (v + a * v * v * v)


@njit(parallel=True, fastmath=False, cache=True)
def _gelu_finish_nb(x, t, y):
    xf = x.reshape(x.size)
    tf = t.reshape(t.size)
    yf = y.reshape(y.size)
    for i in prange(xf.size):
        yf[i] = 0.5 * xf[i] * (1.0 + tf[i])


@njit(parallel=True, fastmath=False, cache=True)
def _gelu_bwd_nb(du, x, t, out):
    c, a = _GELU_C, _GELU_A
    duf = du.reshape(du.size)
    xf = x.reshape(x.size)
    tf = t.reshape(t.size)
    of = out.reshape(out.size)
    for i in prange(xf.size):
        v = xf[i]
        th = tf[i]
        of[i] = duf[i] * (0.5 * (1.0 + th)
                          + 0.5 * v * (1.0 - th * th) * c * (1.0 + 3.0 * a * v * v))


# Below this size the numba dispatch overhead outweighs the fusion win
# (batch-1 action selection lives here); the formulas are identical either
# way, only summation/libm rounding in the last ulp can differ.
_SMALL = 1 << 16


def _gelu_forward(x):
    """tanh-approximation GELU; returns (y, t) with t = tanh(inner) cached
    for the backward pass."""
    x = np.ascontiguousarray(x)
    if x.size < _SMALL:
        t = x * x
        t *= x
        t *= _GELU_A
        t += x
        t *= _GELU_C
        np.tanh(t, out=t)
        y = t + 1.0
        y *= x
        y *= 0.5
        return y, t
    t = np.empty_like(x)
    _gelu_inner_nb(x, t)
    np.tanh(t, out=t)
    y = np.empty_like(x)
    _gelu_finish_nb(x, t, y)
    return y, t


def _gelu_backward(du, x, t):
    """du * gelu'(x) given the cached tanh t."""
    if x.size < _SMALL:
        poly = x * x
        poly *= 3.0 * _GELU_A
        poly += 1.0
        poly *= _GELU_C
        dz = t * t
        np.subtract(1.0, dz, out=dz)
        dz *= poly
        dz *= x
        np.add(t, 1.0, out=poly)
        dz += poly
        dz *= 0.5
        dz *= du
        return dz
    out = np.empty_like(x)
    _gelu_bwd_nb(np.ascontiguousarray(du), x, t, out)
    return out


@njit(parallel=True, fastmath=False, cache=True)
def _ln_fwd_nb(x, g, b, y, xhat, inv):
    rows, d = x.shape
    for r in prange(rows):
        mu = 0.0
        for j in range(d):
            mu += x[r, j]
        mu /= d
        var = 0.0
        for j in range(d):
            xc = x[r, j] - mu
            var += xc * xc
        var /= d
        iv = 1.0 / np.sqrt(var + _LN_EPS)
        inv[r] = iv
        for j in range(d):
            xh = (x[r, j] - mu) * iv
            xhat[r, j] = xh
            y[r, j] = g[j] * xh + b[j]


@njit(parallel=True, fastmath=False, cache=True)
def _ln_bwd_nb(dy, g, xhat, inv, dx):
    rows, d = dy.shape
    for r in prange(rows):
        s1 = 0.0
        s2 = 0.0
        for j in range(d):
            dxh = dy[r, j] * g[j]
            s1 += dxh
            s2 += dxh * xhat[r, j]
        m1 = s1 / d
        m2 = s2 / d
        iv = inv[r]
        for j in range(d):
            dx[r, j] = iv * (dy[r, j] * g[j] - m1 - xhat[r, j] * m2)


def _layernorm_forward(x, g, b):
    shape = x.shape
    x2 = np.ascontiguousarray(x).reshape(-1, shape[-1])
    if x2.size < _SMALL:
        mu = x2.mean(axis=-1, keepdims=True)
        xhat = x2 - mu
        var = np.einsum("nd,nd->n", xhat, xhat)[:, None] / shape[-1]
        inv = 1.0 / np.sqrt(var + _LN_EPS)
        xhat *= inv
        y = xhat * g
        y += b
        return y.reshape(shape), (xhat, inv[:, 0], shape)
    y = np.empty_like(x2)
    xhat = np.empty_like(x2)
    inv = np.empty(x2.shape[0])
    _ln_fwd_nb(x2, g, b, y, xhat, inv)
    return y.reshape(shape), (xhat, inv, shape)


def _layernorm_backward(dy, g, cache):
    xhat, inv, shape = cache
    d = shape[-1]
    dy2 = np.ascontiguousarray(dy).reshape(-1, d)
    dg = np.einsum("nd,nd->d", dy2, xhat)
    db = dy2.sum(axis=0)
    if dy2.size < _SMALL:
        dxhat = dy2 * g
        m1 = dxhat.mean(axis=-1, keepdims=True)
        m2 = np.einsum("nd,nd->n", dxhat, xhat)[:, None] / d
        dx = xhat * m2
        np.subtract(dxhat, dx, out=dx)
        dx -= m1
        dx *= inv[:, None]
        return dx.reshape(shape), dg, db
    dx = np.empty_like(dy2)
    _ln_bwd_nb(dy2, g, xhat, inv, dx)
    return dx.reshape(shape), dg, db


@njit(fastmath=False, cache=True)
def _embedding_scatter_nb(tokens_flat, dx_flat, out):
    # Sequential on purpose: rows collide on shared token ids.
    n, d = dx_flat.shape
    for i in range(n):
        row = tokens_flat[i]
        for j in range(d):
            out[row, j] += dx_flat[i, j]


def _embedding_scatter(tokens_flat, dx_flat, out):
    if dx_flat.size < _SMALL:
        np.add.at(out, tokens_flat, dx_flat)
    else:
        _embedding_scatter_nb(tokens_flat, np.ascontiguousarray(dx_flat), out)


@njit(parallel=True, fastmath=False, cache=True)
def _softmax_bwd_nb(attn, dattn, dscores):
    rows, width = attn.shape
    for r in prange(rows):
        s = 0.0
        for j in range(width):
            s += dattn[r, j] * attn[r, j]
        for j in range(width):
            dscores[r, j] = attn[r, j] * (dattn[r, j] - s)


def _softmax_backward(attn, dattn):
    if attn.size < _SMALL:
        return attn * (dattn - (dattn * attn).sum(axis=-1, keepdims=True))
    shape = attn.shape
    a2 = attn.reshape(-1, shape[-1])
    da2 = np.ascontiguousarray(dattn).reshape(-1, shape[-1])
    out = np.empty_like(a2)
    _softmax_bwd_nb(a2, da2, out)
    return out.reshape(shape)


def _linear_forward(x, w, b):
    # x: [..., in]; collapse leading dims for one gemm.
    shape = x.shape
    y = x.reshape(-1, shape[-1]) @ w
    y += b
    return y.reshape(*shape[:-1], w.shape[1])


def _linear_backward(x, w, dy):
    shape = x.shape
    x2 = x.reshape(-1, shape[-1])
    dy2 = dy.reshape(-1, w.shape[1])
    dw = x2.T @ dy2
    db = dy2.sum(axis=0)
    dx = (dy2 @ w.T).reshape(shape)
    return dx, dw, db


def _xavier(rng, fan_in, fan_out):
    std = math.sqrt(2.0 / (fan_in + fan_out))
    return rng.normal(0.0, std, size=(fan_in, fan_out))


class TransformerNet:
    """Compact pre-norm transformer encoder over the 27-token observation."""

    def __init__(self, cfg: NetConfig):
        cfg.validate()
        self.cfg = cfg
        self.d_head = cfg.d_model // cfg.n_heads

    def init_params(self, rng: np.random.Generator) -> dict[str, np.ndarray]:
        cfg = self.cfg
        d, f = cfg.d_model, cfg.ffn_dim
        p: dict[str, np.ndarray] = {}
        p["tok_emb"] = rng.normal(0.0, 0.02, size=(VOCAB_SIZE, d))
        p["pos_emb"] = rng.normal(0.0, 0.02, size=(SEQ_LEN, d))
        for i in range(cfg.n_layers):
            pre = f"block{i}."
            p[pre + "ln1.g"] = np.ones(d)
            p[pre + "ln1.b"] = np.zeros(d)
            for name in ("wq", "wk", "wv", "wo"):
                p[pre + "attn." + name] = _xavier(rng, d, d)
            for name in ("bq", "bk", "bv", "bo"):
                p[pre + "attn." + name] = np.zeros(d)
            p[pre + "ln2.g"] = np.ones(d)
            p[pre + "ln2.b"] = np.zeros(d)
            p[pre + "ffn.w1"] = _xavier(rng, d, f)
            p[pre + "ffn.b1"] = np.zeros(f)
            p[pre + "ffn.w2"] = _xavier(rng, f, d)
            p[pre + "ffn.b2"] = np.zeros(d)
        if cfg.n_layers > 0:
            p["final_ln.g"] = np.ones(d)
            p["final_ln.b"] = np.zeros(d)
        p["q_head.w"] = _xavier(rng, d, N_ACTIONS)
        p["q_head.b"] = np.zeros(N_ACTIONS)
        p["recon_head.w"] = _xavier(rng, d, 1)
        p["recon_head.b"] = np.zeros(1)
        return p

    def _split_heads(self, x):
        b, l, _ = x.shape
        return x.reshape(b, l, self.cfg.n_heads, self.d_head).transpose(0, 2, 1, 3)

    def _merge_heads(self, x):
        b, h, l, dh = x.shape
        return x.transpose(0, 2, 1, 3).reshape(b, l, h * dh)

    def forward_with_cache(self, params, tokens):
        """Batched forward pass. tokens: int array [B, 27]."""
        tokens = np.asarray(tokens)
        if tokens.ndim != 2 or tokens.shape[1] != SEQ_LEN:
            raise DomainError(f"tokens must have shape [B, {SEQ_LEN}]")
        if tokens.min() < 0 or tokens.max() >= VOCAB_SIZE:
            raise DomainError(
                f"token id outside vocabulary 0..{VOCAB_SIZE - 1}: "
                f"{int(tokens.min())}..{int(tokens.max())}")
        cfg = self.cfg
        d = cfg.d_model
        scale = 1.0 / math.sqrt(self.d_head)
        x = params["tok_emb"][tokens] + params["pos_emb"][None, :, :]
        cache: dict = {"tokens": tokens, "blocks": []}
        for i in range(cfg.n_layers):
            pre = f"block{i}."
            x_in = x
            h, ln1_c = _layernorm_forward(x, params[pre + "ln1.g"], params[pre + "ln1.b"])
            # One fused gemm for the three projections; h is read once.
            wqkv = np.hstack((params[pre + "attn.wq"], params[pre + "attn.wk"],
                              params[pre + "attn.wv"]))
            bqkv = np.concatenate((params[pre + "attn.bq"], params[pre + "attn.bk"],
                                   params[pre + "attn.bv"]))
            qkv = _linear_forward(h, wqkv, bqkv)
            q = self._split_heads(qkv[..., :d])
            k = self._split_heads(qkv[..., d:2 * d])
            v = self._split_heads(qkv[..., 2 * d:])
            attn = np.matmul(q, k.transpose(0, 1, 3, 2))
            attn *= scale
            attn -= attn.max(axis=-1, keepdims=True)
            np.exp(attn, out=attn)
            attn /= attn.sum(axis=-1, keepdims=True)
            ctx = self._merge_heads(np.matmul(attn, v))
            o = _linear_forward(ctx, params[pre + "attn.wo"], params[pre + "attn.bo"])
            x = x_in + o
            x_mid = x
            h2, ln2_c = _layernorm_forward(x, params[pre + "ln2.g"], params[pre + "ln2.b"])
            z1 = _linear_forward(h2, params[pre + "ffn.w1"], params[pre + "ffn.b1"])
            u, gelu_t = _gelu_forward(z1)
            m = _linear_forward(u, params[pre + "ffn.w2"], params[pre + "ffn.b2"])
            x = x_mid + m
            cache["blocks"].append((h, ln1_c, q, k, v, attn, ctx, h2, ln2_c, z1, gelu_t, u))
        if cfg.n_layers > 0:
            y, lnf_c = _layernorm_forward(x, params["final_ln.g"], params["final_ln.b"])
            cache["final"] = (x, lnf_c)
        else:
            y = x
            cache["final"] = None
        cache["y"] = y
        q_values = y[:, 0, :] @ params["q_head.w"] + params["q_head.b"]
        recon = y[:, 1:1 + N_FEATURES, :] @ params["recon_head.w"][:, 0] \
            + params["recon_head.b"][0]
        return q_values, recon, cache

    def forward(self, params, tokens):
        q, r, _ = self.forward_with_cache(params, tokens)
        return q, r

    def backward(self, params, cache, dq_values, drecon):
        """Exact gradients of (sum over batch of whatever produced dq/drecon)."""
        cfg = self.cfg
        scale = 1.0 / math.sqrt(self.d_head)
        y = cache["y"]
        grads = {name: np.zeros_like(arr) for name, arr in params.items()}

        dy = np.zeros_like(y)
        dy[:, 0, :] += dq_values @ params["q_head.w"].T
        grads["q_head.w"] += y[:, 0, :].T @ dq_values
        grads["q_head.b"] += dq_values.sum(axis=0)
        wr = params["recon_head.w"][:, 0]
        dy[:, 1:1 + N_FEATURES, :] += drecon[:, :, None] * wr[None, None, :]
        grads["recon_head.w"][:, 0] += np.einsum("bpd,bp->d", y[:, 1:1 + N_FEATURES, :], drecon)
        grads["recon_head.b"][0] += drecon.sum()

        if cfg.n_layers > 0:
            x_pre, lnf_c = cache["final"]
            dx, dg, db = _layernorm_backward(dy, params["final_ln.g"], lnf_c)
            grads["final_ln.g"] += dg
            grads["final_ln.b"] += db
        else:
            dx = dy

        for i in reversed(range(cfg.n_layers)):
            pre = f"block{i}."
            h, ln1_c, q, k, v, attn, ctx, h2, ln2_c, z1, gelu_t, u = cache["blocks"][i]
            # FFN sub-block: x = x_mid + W2(gelu(W1 h2 + b1)) + b2
            du, dw2, db2 = _linear_backward(u, params[pre + "ffn.w2"], dx)
            grads[pre + "ffn.w2"] += dw2
            grads[pre + "ffn.b2"] += db2
            dz1 = _gelu_backward(du, z1, gelu_t)
            dh2, dw1, db1 = _linear_backward(h2, params[pre + "ffn.w1"], dz1)
            grads[pre + "ffn.w1"] += dw1
            grads[pre + "ffn.b1"] += db1
            dx_mid, dg2, db2n = _layernorm_backward(dh2, params[pre + "ln2.g"], ln2_c)
            grads[pre + "ln2.g"] += dg2
            grads[pre + "ln2.b"] += db2n
            dx = dx + dx_mid  # residual join at x_mid

            # Attention sub-block: x_mid = x_in + Wo(attn @ v) + bo
            dctx, dwo, dbo = _linear_backward(ctx, params[pre + "attn.wo"], dx)
            grads[pre + "attn.wo"] += dwo
            grads[pre + "attn.bo"] += dbo
            dctx_h = self._split_heads(dctx)
            dattn = np.matmul(dctx_h, v.transpose(0, 1, 3, 2))
            dv = np.matmul(attn.transpose(0, 1, 3, 2), dctx_h)
            dscores = _softmax_backward(attn, dattn)
            dq = np.matmul(dscores, k)
            dq *= scale
            dk = np.matmul(dscores.transpose(0, 1, 3, 2), q)
            dk *= scale
            dqkv = np.concatenate((self._merge_heads(dq), self._merge_heads(dk),
                                   self._merge_heads(dv)), axis=-1)
            d = cfg.d_model
            wqkv = np.hstack((params[pre + "attn.wq"], params[pre + "attn.wk"],
                              params[pre + "attn.wv"]))
            dh, dwqkv, dbqkv = _linear_backward(h, wqkv, dqkv)
            grads[pre + "attn.wq"] += dwqkv[:, :d]
            grads[pre + "attn.wk"] += dwqkv[:, d:2 * d]
            grads[pre + "attn.wv"] += dwqkv[:, 2 * d:]
            grads[pre + "attn.bq"] += dbqkv[:d]
            grads[pre + "attn.bk"] += dbqkv[d:2 * d]
            grads[pre + "attn.bv"] += dbqkv[2 * d:]
            dx_in, dg1, db1n = _layernorm_backward(dh, params[pre + "ln1.g"], ln1_c)
            grads[pre + "ln1.g"] += dg1
            grads[pre + "ln1.b"] += db1n
            dx = dx + dx_in  # residual join at x_in

        tokens = cache["tokens"]
        _embedding_scatter(tokens.reshape(-1), dx.reshape(-1, cfg.d_model),
                           grads["tok_emb"])
        grads["pos_emb"] += dx.sum(axis=0)
        return grads


class MlpNet:
    """Feed-forward baseline over normalized values with a masked sentinel."""

    def __init__(self, cfg: NetConfig):
        cfg.validate()
        self.cfg = cfg

    def init_params(self, rng: np.random.Generator) -> dict[str, np.ndarray]:
        cfg = self.cfg
        h1, h2 = cfg.mlp_hidden1, cfg.mlp_hidden2
        return {
            "fc1.w": _xavier(rng, N_FEATURES, h1), "fc1.b": np.zeros(h1),
            "fc2.w": _xavier(rng, h1, h2), "fc2.b": np.zeros(h2),
            "q_head.w": _xavier(rng, h2, N_ACTIONS), "q_head.b": np.zeros(N_ACTIONS),
            "recon_head.w": _xavier(rng, h2, N_FEATURES), "recon_head.b": np.zeros(N_FEATURES),
        }

    def _inputs(self, tokens):
        tokens = np.asarray(tokens)
        if tokens.ndim != 2 or tokens.shape[1] != SEQ_LEN:
            raise DomainError(f"tokens must have shape [B, {SEQ_LEN}]")
        if tokens.min() < 0 or tokens.max() >= VOCAB_SIZE:
            raise DomainError(f"token id outside vocabulary 0..{VOCAB_SIZE - 1}")
        body = tokens[:, 1:1 + N_FEATURES]
        x = body / 300.0
        return np.where(body > 300, self.cfg.mask_sentinel, x)

    def forward_with_cache(self, params, tokens):
        x = self._inputs(tokens)
        z1 = _linear_forward(x, params["fc1.w"], params["fc1.b"])
        a1, t1 = _gelu_forward(z1)
        z2 = _linear_forward(a1, params["fc2.w"], params["fc2.b"])
        a2, t2 = _gelu_forward(z2)
        q = _linear_forward(a2, params["q_head.w"], params["q_head.b"])
        recon = _linear_forward(a2, params["recon_head.w"], params["recon_head.b"])
        return q, recon, (x, z1, t1, a1, z2, t2, a2)

    def forward(self, params, tokens):
        q, r, _ = self.forward_with_cache(params, tokens)
        return q, r

    def backward(self, params, cache, dq_values, drecon):
        x, z1, t1, a1, z2, t2, a2 = cache
        grads = {}
        da2_q, grads["q_head.w"], grads["q_head.b"] = \
            _linear_backward(a2, params["q_head.w"], dq_values)
        da2_r, grads["recon_head.w"], grads["recon_head.b"] = \
            _linear_backward(a2, params["recon_head.w"], drecon)
        da2_q += da2_r
        dz2 = _gelu_backward(da2_q, z2, t2)
        da1, grads["fc2.w"], grads["fc2.b"] = _linear_backward(a1, params["fc2.w"], dz2)
        dz1 = _gelu_backward(da1, z1, t1)
        _, grads["fc1.w"], grads["fc1.b"] = _linear_backward(x, params["fc1.w"], dz1)
        return grads


def make_net(cfg: NetConfig):
    return TransformerNet(cfg) if cfg.approximator == "transformer" else MlpNet(cfg)


def predict(net, params, token_seq) -> NetOutput:
    """Single-observation convenience wrapper."""
    tokens = token_seq.tokens if hasattr(token_seq, "tokens") else np.asarray(token_seq)
    q, r = net.forward(params, tokens[None, :])
    return NetOutput(q_values=q[0], recon=r[0])


def param_count(params) -> int:
    return int(sum(arr.size for arr in params.values()))


def sync_target(params) -> dict[str, np.ndarray]:
    """Deep copy: later updates to the source leave the copy untouched."""
    return {name: arr.copy() for name, arr in params.items()}


# -- bi-task loss ------------------------------------------------------------


@dataclass(frozen=True)
class TransitionBatch:
    """Stacked transitions ready for one loss evaluation."""

    obs_tokens: np.ndarray       # [B, 27] int
    targets: np.ndarray          # [B, 25] float, normalized full state
    actions: np.ndarray          # [B] int
    rewards: np.ndarray          # [B] float (already reward-scaled)
    next_obs_tokens: np.ndarray  # [B, 27] int
    dones: np.ndarray            # [B] float 0/1

    def __len__(self):
        return self.obs_tokens.shape[0]


@dataclass(frozen=True)
class LossResult:
    loss: float
    td_loss: float
    recon_loss: float
    grads: dict | None


def loss_value(net, params, target_params, batch: TransitionBatch,
               lam: float, gamma: float) -> LossResult:
    """Forward-only loss evaluation (used by the finite-difference oracle)."""
    if len(batch) == 0:
        raise DomainError("empty batch")
    q_next, _ = net.forward(target_params, batch.next_obs_tokens)
    targets_td = batch.rewards + gamma * q_next.max(axis=1) * (1.0 - batch.dones)
    q, recon = net.forward(params, batch.obs_tokens)
    td = q[np.arange(len(batch)), batch.actions] - targets_td
    td_loss = float(np.mean(td * td))
    err = recon - batch.targets
    recon_loss = float(np.mean(err * err))
    return LossResult(loss=td_loss + lam * recon_loss, td_loss=td_loss,
                      recon_loss=recon_loss, grads=None)


def bi_task_loss(net, params, target_params, batch: TransitionBatch,
                 lam: float, gamma: float) -> LossResult:
    """Squared TD error plus lam x reconstruction MSE, with exact gradients.

    The TD target r + gamma * max_a' Q(s', a'; target) is a constant with
    respect to the online parameters; no gradient flows through the target
    network.
    """
    if len(batch) == 0:
        raise DomainError("empty batch")
    if not (0.0 <= gamma <= 1.0) or lam < 0.0:
        raise DomainError("need lam >= 0 and 0 <= gamma <= 1")
    b = len(batch)
    q_next, _ = net.forward(target_params, batch.next_obs_tokens)
    targets_td = batch.rewards + gamma * q_next.max(axis=1) * (1.0 - batch.dones)

    q, recon, cache = net.forward_with_cache(params, batch.obs_tokens)
    idx = np.arange(b)
    td = q[idx, batch.actions] - targets_td
    td_loss = float(np.mean(td * td))
    err = recon - batch.targets
    recon_loss = float(np.mean(err * err))

    dq = np.zeros_like(q)
    dq[idx, batch.actions] = 2.0 * td / b
    drecon = (2.0 * lam / (b * N_FEATURES)) * err
    grads = net.backward(params, cache, dq, drecon)
    return LossResult(loss=td_loss + lam * recon_loss, td_loss=td_loss,
                      recon_loss=recon_loss, grads=grads)


# -- Adam --------------------------------------------------------------------


@dataclass
class OptimizerState:
    """Adam moments plus step counter; shapes mirror the parameter dict."""

    lr: float = 1e-5
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def init_optimizer(params, lr: float) -> OptimizerState:
    return OptimizerState(lr=lr,
                          m={k: np.zeros_like(p) for k, p in params.items()},
                          v={k: np.zeros_like(p) for k, p in params.items()})


def adam_step(params, grads, opt: OptimizerState) -> None:
    """In-place Adam update with bias correction."""
    opt.step += 1
    b1, b2 = opt.beta1, opt.beta2
    c1 = 1.0 - b1 ** opt.step
    c2 = 1.0 - b2 ** opt.step
    for name, p in params.items():
        g = grads[name]
        if not np.isfinite(g).all():
            raise TrainingError(f"non-finite gradient for parameter '{name}'")
        m = opt.m[name]
        v = opt.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p -= opt.lr * (m / c1) / (np.sqrt(v / c2) + opt.eps)


# -- finite-difference oracle -------------------------------------------------


def gradient_check(net, params, target_params, batch: TransitionBatch,
                   probe_count: int, rng: np.random.Generator,
                   lam: float, gamma: float, h: float = 1e-4) -> float:
    """Max relative error of analytic grads vs central finite differences.

    Probes ``probe_count`` uniformly random parameter coordinates. Relative
    error uses max(|analytic|, |fd|, 1e-6) as denominator so exact zeros
    compare as zero.
    """
    if probe_count < 1:
        raise DomainError("probe_count must be >= 1")
    analytic = bi_task_loss(net, params, target_params, batch, lam, gamma).grads
    names = list(params.keys())
    sizes = np.array([params[n].size for n in names])
    cum = np.cumsum(sizes)
    total = int(cum[-1])
    worst = 0.0
    for flat in rng.integers(0, total, size=probe_count):
        t = int(np.searchsorted(cum, flat, side="right"))
        offset = int(flat - (cum[t - 1] if t > 0 else 0))
        name = names[t]
        view = params[name].reshape(-1)
        orig = view[offset]
        view[offset] = orig + h
        lp = loss_value(net, params, target_params, batch, lam, gamma).loss
        view[offset] = orig - h
        lm = loss_value(net, params, target_params, batch, lam, gamma).loss
        view[offset] = orig
        fd = (lp - lm) / (2.0 * h)
        a = float(analytic[name].reshape(-1)[offset])
        err = abs(a - fd) / max(abs(a), abs(fd), 1e-6)
        worst = max(worst, err)
    return worst
