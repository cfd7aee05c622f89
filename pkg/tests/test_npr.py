"""Residual feature extraction: values, invariances, gradients."""

import numpy as np
import pytest

from localfocus import ConfigError, NprConfig, ShapeError, Tensor, npr_extract, npr_grad
from localfocus.gradcheck import check_gradient


def _img(arr):
    """Replicate a 2-D array across 3 channels."""
    return np.repeat(np.asarray(arr, dtype=np.float64)[None], 3, axis=0)


class TestConfig:
    def test_defaults(self):
        cfg = NprConfig()
        assert (cfg.window, cfg.anchor_index, cfg.take_abs) == (2, 0, True)

    def test_window_lower_bound(self):
        with pytest.raises(ConfigError):
            NprConfig(window=1)

    def test_anchor_range(self):
        with pytest.raises(ConfigError):
            NprConfig(window=2, anchor_index=4)
        with pytest.raises(ConfigError):
            NprConfig(window=2, anchor_index=-1)
        NprConfig(window=3, anchor_index=8)  # last valid slot


class TestForward:
    def test_worked_2x2_example(self):
        # window [[a, b], [c, d]], anchor top-left: residual [[0, b-a], [c-a, d-a]]
        x = _img([[0.2, 0.7], [0.4, 0.9]])
        out = npr_extract(Tensor(x), NprConfig(take_abs=False))
        np.testing.assert_allclose(out.data[0], [[0.0, 0.5], [0.2, 0.7]], atol=1e-15)

    def test_take_abs(self):
        x = _img([[0.9, 0.1], [0.5, 0.2]])
        signed = npr_extract(Tensor(x), NprConfig(take_abs=False)).data
        absd = npr_extract(Tensor(x), NprConfig(take_abs=True)).data
        np.testing.assert_array_equal(absd, np.abs(signed))

    def test_anchor_positions_are_zero(self):
        rng = np.random.default_rng(0)
        x = rng.random((3, 8, 8))
        for anchor in range(4):
            out = npr_extract(Tensor(x), NprConfig(anchor_index=anchor)).data
            ar, ac = divmod(anchor, 2)
            np.testing.assert_array_equal(out[:, ar::2, ac::2], 0.0)

    def test_constant_image_gives_zero(self):
        out = npr_extract(Tensor(np.full((3, 6, 6), 0.37)))
        np.testing.assert_array_equal(out.data, 0.0)

    def test_block_replicated_image_gives_zero(self):
        # An image that is exactly 2x-upsampled from anchor positions has
        # no residual anywhere.
        rng = np.random.default_rng(1)
        small = rng.random((3, 4, 4))
        blocky = small.repeat(2, axis=1).repeat(2, axis=2)
        out = npr_extract(Tensor(blocky)).data
        np.testing.assert_array_equal(out, 0.0)

    def test_linearity_without_abs(self):
        rng = np.random.default_rng(2)
        cfg = NprConfig(take_abs=False)
        a, b = rng.random((3, 6, 6)), rng.random((3, 6, 6))
        lhs = npr_extract(Tensor(2.0 * a + 3.0 * b), cfg).data
        rhs = 2.0 * npr_extract(Tensor(a), cfg).data + 3.0 * npr_extract(Tensor(b), cfg).data
        np.testing.assert_allclose(lhs, rhs, atol=1e-12)

    def test_window_3_anchor_center(self):
        x = _img(np.arange(9.0).reshape(3, 3))
        cfg = NprConfig(window=3, anchor_index=4)  # center pixel value 4
        out = npr_extract(Tensor(x), cfg).data
        np.testing.assert_array_equal(out[0], np.abs(np.arange(9.0).reshape(3, 3) - 4.0))

    def test_divisibility_required(self):
        with pytest.raises(ShapeError, match="divisible"):
            npr_extract(Tensor(np.zeros((3, 5, 6))))
        with pytest.raises(ShapeError, match="divisible"):
            npr_extract(Tensor(np.zeros((3, 6, 5))))

    def test_rank_checked(self):
        with pytest.raises(ShapeError):
            npr_extract(Tensor(np.zeros((6, 6))))

    def test_batch_matches_loop(self):
        rng = np.random.default_rng(3)
        xs = rng.random((4, 3, 6, 6))
        batched = npr_extract(Tensor(xs)).data
        for i in range(4):
            np.testing.assert_array_equal(batched[i], npr_extract(Tensor(xs[i])).data)


class TestGradient:
    def test_all_ones_upstream_window2(self):
        # Non-anchor pixels pass 1; anchors collect 1 - window^2 = -3.
        x = _img([[0.1, 0.2], [0.3, 0.4]])
        g = npr_grad(x, NprConfig(take_abs=False), np.ones_like(x))
        np.testing.assert_array_equal(g[0], [[-3.0, 1.0], [1.0, 1.0]])

    def test_matches_autograd_backward(self):
        rng = np.random.default_rng(4)
        x0 = rng.random((3, 6, 6))
        upstream = rng.normal(size=(3, 6, 6))
        for cfg in (NprConfig(take_abs=False), NprConfig(take_abs=True),
                    NprConfig(window=3, anchor_index=5, take_abs=True)):
            if cfg.window == 3:
                x0_use = rng.random((3, 6, 6))
            else:
                x0_use = x0
            t = Tensor(x0_use, requires_grad=True)
            npr_extract(t, cfg).backward(upstream)
            np.testing.assert_array_equal(t.grad, npr_grad(x0_use, cfg, upstream))

    @pytest.mark.parametrize("take_abs", [False, True])
    def test_finite_difference(self, take_abs):
        rng = np.random.default_rng(5)
        cfg = NprConfig(take_abs=take_abs)
        for _ in range(5):
            # Distinct well-separated values keep |residual| away from its kink.
            x0 = rng.permuted(np.linspace(0.0, 1.0, 108)).reshape(3, 6, 6)
            upstream = rng.normal(size=(3, 6, 6))
            t = Tensor(x0, requires_grad=True)
            npr_extract(t, cfg).backward(upstream)

            def f(arr):
                return float((npr_extract(Tensor(arr), cfg).data * upstream).sum())

            assert check_gradient(f, x0, t.grad) < 1e-4

    def test_upstream_shape_checked(self):
        with pytest.raises(ShapeError):
            npr_grad(np.zeros((3, 4, 4)), NprConfig(), np.zeros((3, 2, 2)))
