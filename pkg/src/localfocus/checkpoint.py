"""Binary model checkpoints.

Layout (all integers little-endian):

    magic  b"LFM1"
    u32    format version (1)
    config payload: residual settings, conv stack plan, pooling variant
           and settings, decision threshold, aux loss weight
    u32    CRC-32 of every byte above (tamper check)
    u32    parameter array count
    per array: u32 rank, u32 dims..., float32 values (C order)

Arrays appear in model declaration order (conv weight/bias pairs, head
weight, head bias). Values are stored as float32; loading widens back
to float64, so save(load(x)) is byte-identical while scores drift by at
most ~1e-5 versus the float64 originals.
"""

from __future__ import annotations

import struct
import zlib

import numpy as np

from .errors import ParseError
from .model import POOLING_VARIANTS, LfmModel
from .npr import NprConfig
from .pooling import TkpConfig
from .snet import SNetConfig

MAGIC = b"LFM1"
VERSION = 1
_ACTIVATION_CODES = {"relu": 0}
_ACTIVATION_NAMES = {v: k for k, v in _ACTIVATION_CODES.items()}


def _config_payload(model: LfmModel) -> bytes:
    npr, snet, tkp = model.npr_cfg, model.snet_cfg, model.tkp_cfg
    parts = [struct.pack("<IIB", npr.window, npr.anchor_index, int(npr.take_abs))]
    parts.append(struct.pack("<II", snet.num_conv_layers, len(snet.channel_plan)))
    parts.append(struct.pack(f"<{len(snet.channel_plan)}I", *snet.channel_plan))
    pool = sorted(snet.pool_after)
    parts.append(struct.pack("<I", len(pool)))
    if pool:
        parts.append(struct.pack(f"<{len(pool)}I", *pool))
    parts.append(struct.pack("<BB", _ACTIVATION_CODES[snet.activation], int(snet.bias)))
    parts.append(struct.pack("<B", POOLING_VARIANTS.index(model.pooling)))
    parts.append(struct.pack("<IddBB", tkp.k, tkp.p_min, tkp.p_max,
                             int(tkp.rbld_enabled), int(tkp.rks_enabled)))
    parts.append(struct.pack("<dd", model.decision_threshold, model.alpha))
    return b"".join(parts)


def save_checkpoint(model: LfmModel, path: str) -> None:
    """Serialize configs and parameters to ``path``."""
    head = MAGIC + struct.pack("<I", VERSION) + _config_payload(model)
    blob = [head, struct.pack("<I", zlib.crc32(head))]
    params = model.parameters()
    blob.append(struct.pack("<I", len(params)))
    for p in params:
        arr = p.data.astype(np.float32)
        blob.append(struct.pack("<I", arr.ndim))
        blob.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        blob.append(arr.tobytes(order="C"))
    with open(path, "wb") as fh:
        fh.write(b"".join(blob))


class _Reader:
    def __init__(self, raw: bytes):
        self.raw = raw
        self.pos = 0

    def take(self, n: int, what: str) -> bytes:
        if self.pos + n > len(self.raw):
            raise ParseError(f"checkpoint truncated reading {what}", offset=self.pos)
        out = self.raw[self.pos:self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str, what: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt), what))


def load_checkpoint(path: str) -> LfmModel:
    """Rebuild a model from ``path``; every structural mismatch raises
    :class:`ParseError` with the offending byte offset."""
    with open(path, "rb") as fh:
        raw = fh.read()
    r = _Reader(raw)
    magic = r.take(4, "magic")
    if magic != MAGIC:
        raise ParseError(f"bad checkpoint magic {magic!r} (want {MAGIC!r})", offset=0)
    (version,) = r.unpack("<I", "version")
    if version != VERSION:
        raise ParseError(f"unsupported checkpoint version {version}", offset=4)

    window, anchor_index, take_abs = r.unpack("<IIB", "residual config")
    num_layers, plan_len = r.unpack("<II", "conv stack plan")
    plan = r.unpack(f"<{plan_len}I", "channel plan") if plan_len else ()
    (pool_len,) = r.unpack("<I", "pool plan length")
    pool = r.unpack(f"<{pool_len}I", "pool plan") if pool_len else ()
    act_code, snet_bias = r.unpack("<BB", "conv stack flags")
    if act_code not in _ACTIVATION_NAMES:
        raise ParseError(f"unknown activation code {act_code}", offset=r.pos - 2)
    (pool_code,) = r.unpack("<B", "pooling variant")
    if pool_code >= len(POOLING_VARIANTS):
        raise ParseError(f"unknown pooling variant code {pool_code}", offset=r.pos - 1)
    k, p_min, p_max, rbld, rks = r.unpack("<IddBB", "pooling config")
    threshold, alpha = r.unpack("<dd", "head config")

    head_end = r.pos
    (crc_stored,) = r.unpack("<I", "header checksum")
    crc_actual = zlib.crc32(raw[:head_end])
    if crc_stored != crc_actual:
        raise ParseError(
            f"header checksum mismatch: stored {crc_stored:#010x}, computed {crc_actual:#010x}",
            offset=head_end,
        )

    model = LfmModel(
        npr_cfg=NprConfig(window=window, anchor_index=anchor_index, take_abs=bool(take_abs)),
        snet_cfg=SNetConfig(num_conv_layers=num_layers, channel_plan=plan,
                            pool_after=frozenset(pool),
                            activation=_ACTIVATION_NAMES[act_code], bias=bool(snet_bias)),
        tkp_cfg=TkpConfig(k=k, p_min=p_min, p_max=p_max,
                          rbld_enabled=bool(rbld), rks_enabled=bool(rks)),
        pooling=POOLING_VARIANTS[pool_code],
        decision_threshold=threshold,
        alpha=alpha,
    )

    params = model.parameters()
    (n_arrays,) = r.unpack("<I", "array count")
    if n_arrays != len(params):
        raise ParseError(f"checkpoint holds {n_arrays} arrays, model needs {len(params)}",
                         offset=r.pos - 4)
    for i, p in enumerate(params):
        (ndim,) = r.unpack("<I", f"array {i} rank")
        shape = r.unpack(f"<{ndim}I", f"array {i} shape") if ndim else ()
        if tuple(shape) != p.data.shape:
            raise ParseError(f"array {i} shaped {tuple(shape)}, model expects {p.data.shape}",
                             offset=r.pos - 4 * max(ndim, 1))
        count = int(np.prod(shape, dtype=np.int64)) if ndim else 1
        body = r.take(count * 4, f"array {i} values")
        p.data = np.frombuffer(body, dtype="<f4", count=count).reshape(shape).astype(np.float64)
    if r.pos != len(raw):
        raise ParseError(f"trailing bytes after last array: {len(raw) - r.pos}", offset=r.pos)
    return model
