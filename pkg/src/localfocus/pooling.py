"""Top-k pooling with rank-based linear dropout and random-k sampling.

Global average/max pooling squeeze each activation map to one number,
so a handful of strongly detected local artifacts vanishes into the
mean. Top-k pooling instead keeps the k strongest activations per
channel, sorted ascending, and concatenates the per-channel slices into
one feature vector of length C*k.

Two training-only regularizers ride on top:

* Rank-based linear dropout (RBLD): the i-th kept activation (ascending
  rank i = 1..k) is zeroed with probability
  p_i = p_min + (p_max - p_min) * (i - 1) / (k - 1), so stronger
  activations drop more often and the classifier cannot lean on the
  single largest response. Zeroed entries stay in place; survivors are
  not rescaled.
* Random-k sampling (RKS): k positions per channel drawn uniformly
  without replacement, values sorted ascending, concatenated the same
  way. Scored by the same classifier head as an auxiliary target.

Inference uses the deterministic top-k path only.

Ordering is the total order on (value, flat index), so ties are stable
and reproducible: among equal values the smaller row-major position
ranks lower.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ShapeError, StateError
from .tensor import Tensor


@dataclass(frozen=True)
class TkpConfig:
    """Top-k pooling settings.

    k: activations kept per channel (1 <= k <= H'*W' of the maps).
    p_min, p_max: dropout band, 0 <= p_min <= p_max < 1; rank 1 (the
        smallest kept value) drops at p_min, rank k at p_max.
    training: enables the stochastic paths below.
    rbld_enabled: apply rank-based dropout to the top-k vector.
    rks_enabled: also emit the random-k vector.
    """

    k: int = 16
    p_min: float = 0.1
    p_max: float = 0.3
    training: bool = False
    rbld_enabled: bool = True
    rks_enabled: bool = True

    def __post_init__(self):
        if self.k < 1:
            raise ConfigError(f"tkp k must be >= 1, got {self.k}")
        if not (0.0 <= self.p_min <= self.p_max < 1.0):
            raise ConfigError(
                f"tkp dropout band must satisfy 0 <= p_min <= p_max < 1, got [{self.p_min}, {self.p_max}]"
            )


@dataclass
class PooledVectors:
    """Output of one pooling pass over one set of maps.

    vector: (C*k,) kept activations, ascending per channel slice
        (RBLD-zeroed entries stay in place).
    vector_star: (C*k,) random-sample vector, or None outside training
        or with RKS disabled.
    selected_indices: (C, k) flat map positions feeding ``vector``,
        aligned with its slices.
    star_indices: (C, k) flat positions feeding ``vector_star``, or None.
    dropped: (C, k) bool, True where RBLD zeroed an entry, or None when
        RBLD did not run.
    map_shape: (C, H, W) of the pooled maps, for gradient routing.
    """

    vector: np.ndarray
    vector_star: np.ndarray | None
    selected_indices: np.ndarray
    star_indices: np.ndarray | None
    dropped: np.ndarray | None
    map_shape: tuple[int, int, int]


def rbld_probabilities(k: int, p_min: float, p_max: float) -> np.ndarray:
    """Dropout probability per ascending rank i = 1..k (linear ramp).

    k == 1 degenerates to the single probability p_min.
    """
    if k == 1:
        return np.asarray([p_min])
    return p_min + (p_max - p_min) * np.arange(k) / (k - 1)


def topk_ascending(flat: np.ndarray, k: int) -> np.ndarray:
    """Indices of the k largest entries under the total order
    (value, flat index), returned in ascending order of that same key."""
    order = np.argsort(flat, kind="stable")
    return order[flat.size - k:]


def _channel_rngs(rng: np.random.Generator, channels: int) -> list[np.random.Generator]:
    """Independent per-channel substreams.

    One draw from ``rng`` seeds all channels, so each channel's stream
    depends only on (that draw, channel index), never on how many draws
    other channels consumed.
    """
    base = int(rng.integers(0, 2**63 - 1))
    return [np.random.default_rng((base, c)) for c in range(channels)]


def tkp_forward(maps: np.ndarray | Tensor, cfg: TkpConfig,
                rng: np.random.Generator | None = None) -> PooledVectors:
    """Pool one set of maps (C x H x W) into vectors per the scheme above.

    ``rng`` is consumed only on the stochastic training paths; the
    inference path never touches it and is fully deterministic.
    """
    data = maps.data if isinstance(maps, Tensor) else np.asarray(maps, dtype=np.float64)
    if data.ndim != 3:
        raise ShapeError(f"tkp_forward maps must be CxHxW, got rank {data.ndim}")
    channels, h, w = data.shape
    n = h * w
    if cfg.k > n:
        raise ConfigError(f"tkp k={cfg.k} exceeds map size {h}x{w}={n}")

    use_rbld = cfg.training and cfg.rbld_enabled
    use_rks = cfg.training and cfg.rks_enabled
    if (use_rbld or use_rks) and rng is None:
        raise ConfigError("tkp_forward needs an rng for the training paths")

    flat = data.reshape(channels, n)
    vector = np.empty((channels, cfg.k))
    selected = np.empty((channels, cfg.k), dtype=np.int64)
    dropped = np.zeros((channels, cfg.k), dtype=bool) if use_rbld else None
    star_vals = np.empty((channels, cfg.k)) if use_rks else None
    star_idx = np.empty((channels, cfg.k), dtype=np.int64) if use_rks else None

    streams = _channel_rngs(rng, channels) if (use_rbld or use_rks) else None
    probs = rbld_probabilities(cfg.k, cfg.p_min, cfg.p_max) if use_rbld else None

    for c in range(channels):
        row = flat[c]
        sel = topk_ascending(row, cfg.k)
        selected[c] = sel
        vals = row[sel].copy()
        if use_rbld:
            r = streams[c].random(cfg.k)
            drop = r <= probs
            vals[drop] = 0.0
            dropped[c] = drop
        vector[c] = vals
        if use_rks:
            pick = streams[c].choice(n, size=cfg.k, replace=False)
            order = np.lexsort((pick, row[pick]))
            star_idx[c] = pick[order]
            star_vals[c] = row[star_idx[c]]

    return PooledVectors(
        vector=vector.reshape(-1),
        vector_star=star_vals.reshape(-1) if use_rks else None,
        selected_indices=selected,
        star_indices=star_idx,
        dropped=dropped,
        map_shape=(channels, h, w),
    )


def tkp_backward(pooled: PooledVectors, upstream_vec: np.ndarray | None,
                 upstream_star: np.ndarray | None = None) -> np.ndarray:
    """Route vector gradients back onto the maps.

    Pooling selects and reorders, so the gradient scatters each upstream
    entry to the flat position it was read from; positions touched by
    both vectors (or by overlapping selections) accumulate. RBLD-zeroed
    entries pass nothing. Pooling itself has no parameters.
    """
    if pooled.selected_indices is None:
        raise StateError("tkp_backward needs the selection record from tkp_forward")
    channels, h, w = pooled.map_shape
    k = pooled.selected_indices.shape[1]
    grad = np.zeros((channels, h * w))
    rows = np.repeat(np.arange(channels), k)
    if upstream_vec is not None:
        up = np.asarray(upstream_vec, dtype=np.float64).reshape(channels, k)
        if pooled.dropped is not None:
            up = up * ~pooled.dropped
        np.add.at(grad, (rows, pooled.selected_indices.reshape(-1)), up.reshape(-1))
    if upstream_star is not None:
        if pooled.star_indices is None:
            raise StateError("tkp_backward got a star gradient but no star selection record")
        up = np.asarray(upstream_star, dtype=np.float64).reshape(-1)
        np.add.at(grad, (rows, pooled.star_indices.reshape(-1)), up)
    return grad.reshape(channels, h, w)


# -- Tensor-graph wrappers ----------------------------------------------------


def tkp_pool(x: Tensor, cfg: TkpConfig, rng: np.random.Generator | None = None
             ) -> tuple[Tensor, Tensor | None, list[PooledVectors]]:
    """Differentiable batched pooling.

    ``x`` is (N, C, H, W); returns the (N, C*k) vector tensor, the
    (N, C*k) random-sample tensor (or None), and the per-sample pooling
    records.
    """
    if x.data.ndim != 4:
        raise ShapeError(f"tkp_pool input must be NxCxHxW, got rank {x.data.ndim}")
    if x.data.shape[0] == 0:
        raise ShapeError("tkp_pool needs a non-empty batch")
    records = [tkp_forward(x.data[i], cfg, rng) for i in range(x.data.shape[0])]
    vec_data = np.stack([r.vector for r in records])

    def backward_vec():
        dx = np.stack([
            tkp_backward(r, out_vec.grad[i], None) for i, r in enumerate(records)
        ])
        x._accumulate(dx)

    out_vec = Tensor._wrap(vec_data, (x,), backward_vec)

    out_star = None
    if records[0].vector_star is not None:
        star_data = np.stack([r.vector_star for r in records])

        def backward_star():
            dx = np.stack([
                tkp_backward(r, None, out_star.grad[i]) for i, r in enumerate(records)
            ])
            x._accumulate(dx)

        out_star = Tensor._wrap(star_data, (x,), backward_star)

    return out_vec, out_star, records


def gap_forward(maps: np.ndarray) -> np.ndarray:
    """Global average pooling: per-channel mean, shape (C,)."""
    maps = np.asarray(maps, dtype=np.float64)
    if maps.ndim != 3:
        raise ShapeError(f"gap_forward maps must be CxHxW, got rank {maps.ndim}")
    return maps.mean(axis=(1, 2))


def gmp_forward(maps: np.ndarray) -> np.ndarray:
    """Global max pooling: per-channel max, shape (C,)."""
    maps = np.asarray(maps, dtype=np.float64)
    if maps.ndim != 3:
        raise ShapeError(f"gmp_forward maps must be CxHxW, got rank {maps.ndim}")
    return maps.max(axis=(1, 2))


def gap_pool(x: Tensor) -> Tensor:
    """Differentiable batched global average pooling: (N,C,H,W) -> (N,C)."""
    if x.data.ndim != 4:
        raise ShapeError(f"gap_pool input must be NxCxHxW, got rank {x.data.ndim}")
    n, c, h, w = x.data.shape
    out_data = x.data.mean(axis=(2, 3))

    def backward():
        g = out.grad[:, :, None, None] / (h * w)
        x._accumulate(np.broadcast_to(g, x.data.shape))

    out = Tensor._wrap(out_data, (x,), backward)
    return out


def gmp_pool(x: Tensor) -> Tensor:
    """Differentiable batched global max pooling: (N,C,H,W) -> (N,C).

    Ties route the gradient to the first maximum in row-major order.
    """
    if x.data.ndim != 4:
        raise ShapeError(f"gmp_pool input must be NxCxHxW, got rank {x.data.ndim}")
    n, c, h, w = x.data.shape
    flat = x.data.reshape(n, c, h * w)
    arg = flat.argmax(axis=2)
    out_data = np.take_along_axis(flat, arg[..., None], axis=2)[..., 0]

    def backward():
        dx = np.zeros_like(flat)
        ni, ci = np.indices((n, c))
        np.add.at(dx, (ni, ci, arg), out.grad)
        x._accumulate(dx.reshape(x.data.shape))

    out = Tensor._wrap(out_data, (x,), backward)
    return out
