"""End-to-end detector: residual features -> salience net -> pooling -> head.

One shared affine head scores both the top-k vector and (in training)
the random-sample vector. The training objective is

    total = mean_bce(topk scores) + alpha * mean_bce(random-sample scores)

with alpha weighting the auxiliary term; forward_train reports all
three numbers and the decomposition is exact by construction.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigError, DomainError, ShapeError
from .npr import NprConfig, npr_extract
from .ops import bce_loss_mean, linear
from .pooling import TkpConfig, gap_pool, gmp_pool, tkp_pool
from .snet import OUT_CHANNELS, SNet, SNetConfig, snet_param_count
from .tensor import Tensor

POOLING_VARIANTS = ("tkp", "gap", "gmp")
DEFAULT_ALPHA = 0.1


@dataclass
class LossReport:
    """Scalar losses from one training batch; total = loss_a + alpha*loss_b."""

    loss_a: float
    loss_b: float
    alpha: float
    total: float


class LfmModel:
    """Detector with a configurable pooling variant.

    ``pooling`` selects top-k ("tkp", the real model) or a global
    average/max baseline ("gap"/"gmp") over the same salience net; the
    head width follows the choice (64*k vs 64). All parameters are
    initialized deterministically from ``seed``.
    """

    def __init__(self, npr_cfg: NprConfig | None = None,
                 snet_cfg: SNetConfig | None = None,
                 tkp_cfg: TkpConfig | None = None,
                 pooling: str = "tkp",
                 decision_threshold: float = 0.5,
                 alpha: float = DEFAULT_ALPHA,
                 seed: int = 0):
        if pooling not in POOLING_VARIANTS:
            raise ConfigError(f"unknown pooling variant {pooling!r}; supported: {POOLING_VARIANTS}")
        if not 0.0 <= decision_threshold <= 1.0:
            raise ConfigError(f"decision_threshold must lie in [0, 1], got {decision_threshold}")
        if alpha < 0.0:
            raise ConfigError(f"alpha must be >= 0, got {alpha}")
        self.npr_cfg = npr_cfg or NprConfig()
        self.snet_cfg = snet_cfg or SNetConfig()
        self.tkp_cfg = tkp_cfg or TkpConfig()
        self.pooling = pooling
        self.decision_threshold = float(decision_threshold)
        self.alpha = float(alpha)
        self.seed = int(seed)

        rng = np.random.default_rng((seed, 0))
        self.snet = SNet(self.snet_cfg, rng)
        width = OUT_CHANNELS * self.tkp_cfg.k if pooling == "tkp" else OUT_CHANNELS
        self.fc_weight = Tensor(rng.normal(0.0, 1.0 / np.sqrt(width), size=(1, width)),
                                requires_grad=True)
        self.fc_bias = Tensor(np.zeros(1), requires_grad=True)

    # -- parameters -----------------------------------------------------------

    def parameters(self) -> list[Tensor]:
        """All learnable tensors in fixed declaration order (conv stack
        weight/bias pairs, then head weight, then head bias)."""
        return self.snet.parameters() + [self.fc_weight, self.fc_bias]

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.zero_grad()

    # -- forward paths ----------------------------------------------------------

    def _pool(self, maps: Tensor, training: bool, rng: np.random.Generator | None):
        if self.pooling == "tkp":
            cfg = replace(self.tkp_cfg, training=training)
            return tkp_pool(maps, cfg, rng)
        if self.pooling == "gap":
            return gap_pool(maps), None, None
        return gmp_pool(maps), None, None

    def _score(self, vec: Tensor) -> Tensor:
        return linear(vec, self.fc_weight, self.fc_bias).sigmoid()

    def forward_train(self, images, labels, rng: np.random.Generator
                      ) -> tuple[list[float], list[float] | None, LossReport]:
        """One training forward+backward pass over a batch.

        ``images`` is a sequence of (3, H, W) arrays, ``labels`` matching
        0/1 ints. Gradients are zeroed, then populated on every
        parameter as a side effect; the caller applies the optimizer
        step. Returns per-sample top-k scores, per-sample random-sample
        scores (None unless the variant emits them), and the loss report.
        """
        images = [np.asarray(im, dtype=np.float64) for im in images]
        if len(images) == 0:
            raise ConfigError("forward_train needs a non-empty batch")
        labels = np.asarray(labels)
        if labels.shape != (len(images),):
            raise ShapeError(f"got {len(images)} images but labels shaped {labels.shape}")
        if not np.all((labels == 0) | (labels == 1)):
            raise DomainError("labels must be 0 or 1")

        self.zero_grad()
        x = Tensor(np.stack(images))
        maps = self.snet.forward(npr_extract(x, self.npr_cfg))
        vec, star, _ = self._pool(maps, training=True, rng=rng)
        probs = self._score(vec)  # (N, 1)
        loss_a = bce_loss_mean(probs, labels)
        star_probs = None
        if star is not None:
            star_probs = self._score(star)
            loss_b = bce_loss_mean(star_probs, labels)
            total = loss_a + self.alpha * loss_b
            loss_b_val = loss_b.item()
        else:
            total = loss_a
            loss_b_val = 0.0
        total.backward(release_graph=True)

        report = LossReport(loss_a=loss_a.item(), loss_b=loss_b_val, alpha=self.alpha,
                            total=loss_a.item() + self.alpha * loss_b_val)
        scores = [float(v) for v in probs.data.reshape(-1)]
        star_scores = None if star_probs is None else [float(v) for v in star_probs.data.reshape(-1)]
        return scores, star_scores, report

    def score(self, image: np.ndarray) -> float:
        """Deterministic fake-probability for one (3, H, W) image."""
        image = np.asarray(image, dtype=np.float64)
        if image.ndim != 3:
            raise ShapeError(f"score expects one 3xHxW image, got rank {image.ndim}")
        x = Tensor(image[None])
        maps = self.snet.forward(npr_extract(x, self.npr_cfg))
        vec, _, _ = self._pool(maps, training=False, rng=None)
        return self._score(vec).data.reshape(-1)[0]

    def infer(self, image: np.ndarray) -> tuple[float, int]:
        """(probability, hard label) with label = probability >= threshold."""
        p = self.score(image)
        return float(p), int(p >= self.decision_threshold)


def total_param_count(model: LfmModel) -> int:
    """Learnable parameter count: conv stack + head (pooling adds none)."""
    head = model.fc_weight.data.size + model.fc_bias.data.size
    return snet_param_count(model.snet_cfg) + head
