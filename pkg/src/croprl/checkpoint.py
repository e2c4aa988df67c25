"""Single-file binary checkpoints.

Layout (all integers little-endian, all tensor data float64 little-endian):

    magic            8 bytes  b"CROPSCK1"
    format version   u32
    config echo      u64 length + UTF-8 INI text (verbatim, never re-rendered)
    feature ranges   tensor table (lo, hi)
    model            tensor table
    optimizer flag   u8; if 1: lr/beta1/beta2/eps f64, step u64, m table, v table
    rng states       u64 length + UTF-8 JSON
    train steps      u64
    episodes done    u64

A tensor table is: u32 count, then per tensor u16 name length, name bytes,
u8 ndim, ndim x u64 dims, raw float64 data. Loading validates magic,
version and every declared shape against the architecture in the embedded
config before returning, and save->load->save reproduces files byte for
byte (the config echo is kept verbatim and dict order is file order).
"""

from __future__ import annotations

import json
import os
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .encoding import FeatureRanges
from .errors import CompatibilityError, FormatError
from .net import NetConfig, OptimizerState, make_net

MAGIC = b"CROPSCK1"
VERSION = 1


@dataclass
class Checkpoint:
    """Everything needed to resume or deploy a training run."""

    config_text: str
    params: dict
    opt: OptimizerState | None
    ranges: FeatureRanges
    rng_states: dict
    train_steps: int
    episodes_done: int

    def run_config(self):
        from .config import parse_config_text
        return parse_config_text(self.config_text)


def _pack_tensor_table(tensors: dict) -> bytes:
    parts = [struct.pack("<I", len(tensors))]
    for name, arr in tensors.items():
        arr = np.ascontiguousarray(arr, dtype=np.float64)
        nb = name.encode("utf-8")
        parts.append(struct.pack("<H", len(nb)))
        parts.append(nb)
        parts.append(struct.pack("<B", arr.ndim))
        parts.append(struct.pack(f"<{arr.ndim}Q", *arr.shape) if arr.ndim else b"")
        parts.append(arr.astype("<f8").tobytes())
    return b"".join(parts)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise FormatError("truncated checkpoint file")
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def u8(self) -> int:
        return struct.unpack("<B", self.take(1))[0]

    def u16(self) -> int:
        return struct.unpack("<H", self.take(2))[0]

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def u64(self) -> int:
        return struct.unpack("<Q", self.take(8))[0]

    def f64(self) -> float:
        return struct.unpack("<d", self.take(8))[0]

    def done(self) -> bool:
        return self.pos == len(self.data)


def _read_tensor_table(r: _Reader) -> dict:
    count = r.u32()
    tensors = {}
    for _ in range(count):
        name = r.take(r.u16()).decode("utf-8")
        ndim = r.u8()
        shape = tuple(r.u64() for _ in range(ndim))
        n = int(np.prod(shape)) if shape else 1
        raw = r.take(8 * n)
        tensors[name] = np.frombuffer(raw, dtype="<f8").reshape(shape).copy()
    return tensors


def checkpoint_bytes(ckpt: Checkpoint) -> bytes:
    cfg_bytes = ckpt.config_text.encode("utf-8")
    rng_bytes = json.dumps(ckpt.rng_states, sort_keys=True).encode("utf-8")
    parts = [
        MAGIC,
        struct.pack("<I", VERSION),
        struct.pack("<Q", len(cfg_bytes)), cfg_bytes,
        _pack_tensor_table({"feature_ranges.lo": ckpt.ranges.lo,
                            "feature_ranges.hi": ckpt.ranges.hi}),
        _pack_tensor_table(ckpt.params),
    ]
    if ckpt.opt is not None:
        parts.append(struct.pack("<B", 1))
        parts.append(struct.pack("<dddd", ckpt.opt.lr, ckpt.opt.beta1,
                                 ckpt.opt.beta2, ckpt.opt.eps))
        parts.append(struct.pack("<Q", ckpt.opt.step))
        parts.append(_pack_tensor_table(ckpt.opt.m))
        parts.append(_pack_tensor_table(ckpt.opt.v))
    else:
        parts.append(struct.pack("<B", 0))
    parts.append(struct.pack("<Q", len(rng_bytes)))
    parts.append(rng_bytes)
    parts.append(struct.pack("<QQ", ckpt.train_steps, ckpt.episodes_done))
    return b"".join(parts)


def save_checkpoint(ckpt: Checkpoint, path) -> None:
    """Write atomically: temp file in the same directory, then rename."""
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(checkpoint_bytes(ckpt))
    os.replace(tmp, path)


def expected_param_shapes(net_cfg: NetConfig) -> dict:
    probe = make_net(net_cfg).init_params(np.random.default_rng(0))
    return {name: arr.shape for name, arr in probe.items()}


def _check_shapes(tensors: dict, expected: dict, what: str) -> None:
    for name, shape in expected.items():
        if name not in tensors:
            raise CompatibilityError(f"{what} tensor '{name}' missing from checkpoint")
        if tensors[name].shape != shape:
            raise CompatibilityError(
                f"{what} tensor '{name}' has shape {tensors[name].shape}, "
                f"expected {shape}")
    for name in tensors:
        if name not in expected:
            raise CompatibilityError(f"unexpected {what} tensor '{name}' in checkpoint")


def load_checkpoint(path, expected_net: NetConfig | None = None) -> Checkpoint:
    """Read and validate a checkpoint.

    Shape validation always runs against the architecture declared in the
    embedded config; pass ``expected_net`` to additionally enforce the
    current session's architecture (a d=64 file loaded into a d=32 session
    raises CompatibilityError naming the first mismatched tensor).
    """
    data = Path(path).read_bytes()
    r = _Reader(data)
    if r.take(len(MAGIC)) != MAGIC:
        raise FormatError(f"bad magic; not a checkpoint file: {path}")
    version = r.u32()
    if version != VERSION:
        raise FormatError(f"unsupported checkpoint version {version} (expected {VERSION})")
    config_text = r.take(r.u64()).decode("utf-8")
    aux = _read_tensor_table(r)
    for key in ("feature_ranges.lo", "feature_ranges.hi"):
        if key not in aux or aux[key].shape != (25,):
            raise FormatError(f"checkpoint missing well-formed '{key}'")
    ranges = FeatureRanges(lo=aux["feature_ranges.lo"], hi=aux["feature_ranges.hi"])
    params = _read_tensor_table(r)
    opt = None
    if r.u8():
        lr, beta1, beta2, eps = (r.f64() for _ in range(4))
        step = r.u64()
        m = _read_tensor_table(r)
        v = _read_tensor_table(r)
        opt = OptimizerState(lr=lr, beta1=beta1, beta2=beta2, eps=eps, step=step, m=m, v=v)
    try:
        rng_states = json.loads(r.take(r.u64()).decode("utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(f"corrupt RNG-state block: {exc}") from exc
    train_steps = r.u64()
    episodes_done = r.u64()
    if not r.done():
        raise FormatError("trailing bytes after checkpoint payload")

    ckpt = Checkpoint(config_text=config_text, params=params, opt=opt, ranges=ranges,
                      rng_states=rng_states, train_steps=train_steps,
                      episodes_done=episodes_done)
    from .config import parse_config_text
    try:
        run_cfg = parse_config_text(config_text)
    except Exception as exc:
        raise FormatError(f"checkpoint embeds an unparsable config: {exc}") from exc
    _check_shapes(params, expected_param_shapes(run_cfg.net), "model")
    if opt is not None:
        _check_shapes(opt.m, expected_param_shapes(run_cfg.net), "optimizer.m")
        _check_shapes(opt.v, expected_param_shapes(run_cfg.net), "optimizer.v")
    if expected_net is not None:
        _check_shapes(params, expected_param_shapes(expected_net), "model")
    return ckpt
