import numpy as np
import pytest

from shufflesr.autodiff import Tensor, grad_check
from shufflesr.losses import mse
from shufflesr.network import (
    NetworkConfig,
    build_dense_unet,
    build_model,
    build_unet_sr,
    channel_ledger,
    forward,
    param_count,
    param_count_for_config,
)
from shufflesr.ops import resize
from shufflesr.pooling import PoolSpec


def _cfg(**kw):
    base = dict(depth=2, base_channels=4, scale=2, pooling=PoolSpec("max", 2), skips="dense")
    base.update(kw)
    return NetworkConfig(**base)


class TestConfig:
    def test_validation(self):
        with pytest.raises(ValueError, match="depth"):
            _cfg(depth=-1)
        with pytest.raises(ValueError, match="scale"):
            _cfg(scale=3)
        with pytest.raises(ValueError, match="skips"):
            _cfg(skips="both")
        with pytest.raises(ValueError, match="factor 2"):
            _cfg(pooling=PoolSpec("max", 4))

    def test_builders_enforce_skip_style(self):
        with pytest.raises(ValueError, match="dense"):
            build_dense_unet(_cfg(skips="one_way"))
        with pytest.raises(ValueError, match="one_way"):
            build_unet_sr(_cfg(skips="dense"))


class TestShapes:
    def test_depth1_small(self):
        cfg = _cfg(depth=1)
        model = build_dense_unet(cfg)
        out = forward(model, Tensor(np.random.default_rng(0).random((1, 3, 8, 8))))
        assert out.shape == (1, 3, 16, 16)

    def test_paper_sizes_112_to_224(self):
        cfg = _cfg(depth=3, base_channels=4)
        model = build_dense_unet(cfg)
        out = forward(model, Tensor(np.random.default_rng(0).random((1, 3, 112, 112))))
        assert out.shape == (1, 3, 224, 224)

    @pytest.mark.parametrize("scale,lr_size", [(2, 8), (4, 4), (8, 2)])
    def test_scale_contract(self, scale, lr_size):
        cfg = _cfg(depth=1, scale=scale)
        model = build_dense_unet(cfg)
        out = forward(model, Tensor(np.random.default_rng(0).random((2, 3, lr_size, lr_size))))
        assert out.shape == (2, 3, lr_size * scale, lr_size * scale)

    def test_indivisible_input_rejected(self):
        model = build_dense_unet(_cfg(depth=3))
        with pytest.raises(ValueError, match="divisible"):
            forward(model, Tensor(np.zeros((1, 3, 5, 5))))

    def test_wrong_channel_count_rejected(self):
        model = build_dense_unet(_cfg())
        with pytest.raises(ValueError, match=r"\(n, 3, h, w\)"):
            forward(model, Tensor(np.zeros((1, 1, 8, 8))))

    @pytest.mark.parametrize("kind", ["max", "avg", "shuffle_direct", "shuffle_insert"])
    def test_all_poolings_forward(self, kind):
        cfg = _cfg(pooling=PoolSpec(kind, 2))
        out = forward(build_dense_unet(cfg), Tensor(np.random.default_rng(0).random((1, 3, 4, 4))))
        assert out.shape == (1, 3, 8, 8)


class TestResidual:
    def test_zero_head_equals_bicubic(self, rng):
        model = build_dense_unet(_cfg(residual_output=True))
        model.params["head.w"].data[:] = 0.0
        model.params["head.b"].data[:] = 0.0
        lr = rng.random((1, 3, 8, 8))
        out = forward(model, Tensor(lr))
        up = resize(Tensor(lr), 16, 16, "bicubic")
        np.testing.assert_array_equal(out.data, up.data)

    def test_without_residual_zero_head_is_zero(self, rng):
        model = build_dense_unet(_cfg(residual_output=False))
        model.params["head.w"].data[:] = 0.0
        model.params["head.b"].data[:] = 0.0
        out = forward(model, Tensor(rng.random((1, 3, 8, 8))))
        np.testing.assert_array_equal(out.data, 0.0)


class TestLedger:
    def test_single_conv_count(self):
        ledger = channel_ledger(_cfg(depth=0, base_channels=64))
        stem = ledger.convs[0]
        assert (stem.c_in, stem.c_out) == (3, 64)
        assert stem.n_params == 3 * 64 * 9 + 64 == 1792

    def test_depth_zero_is_stem_plus_head(self):
        ledger = channel_ledger(_cfg(depth=0))
        assert [c.name for c in ledger.convs] == ["stem", "head"]

    def test_ledger_matches_built_model(self):
        for cfg in (_cfg(), _cfg(skips="one_way"), _cfg(pooling=PoolSpec("shuffle_insert", 2))):
            model = build_model(cfg)
            assert param_count(model) == param_count_for_config(cfg)

    def test_dense_fanin_exceeds_one_way_everywhere(self):
        dense = channel_ledger(_cfg(depth=3, base_channels=8))
        one_way = channel_ledger(_cfg(depth=3, base_channels=8, skips="one_way"))
        for i in range(1, 4):
            assert dense.concat_fanin[i] > one_way.concat_fanin[i]

    def test_skip_styles_differ_only_in_fanin(self):
        dense = channel_ledger(_cfg(depth=3, base_channels=8))
        one_way = channel_ledger(_cfg(depth=3, base_channels=8, skips="one_way"))
        for d, o in zip(dense.convs, one_way.convs):
            assert d.name == o.name
            assert (d.c_out, d.kh, d.kw) == (o.c_out, o.kh, o.kw)
            if not d.name.endswith(".conv") or d.name.startswith("down"):
                assert d.c_in == o.c_in

    def test_shuffle_quadruples_channels_after_pooling(self):
        ledger = channel_ledger(_cfg(depth=3, pooling=PoolSpec("shuffle_insert", 2)))
        assert ledger.pooled_channels == [4 * c for c in ledger.encoder_channels]
        baseline = channel_ledger(_cfg(depth=3, pooling=PoolSpec("max", 2)))
        assert baseline.pooled_channels == baseline.encoder_channels

    def test_param_ordering_small(self):
        unet = param_count_for_config(_cfg(depth=3, base_channels=8, skips="one_way"))
        dense = param_count_for_config(_cfg(depth=3, base_channels=8))
        dense_shuffle = param_count_for_config(
            _cfg(depth=3, base_channels=8, pooling=PoolSpec("shuffle_insert", 2))
        )
        assert unet < dense < dense_shuffle

    def test_text_dump(self):
        text = channel_ledger(_cfg()).text()
        assert "stem" in text and "total params" in text


class TestDeterminism:
    def test_same_seed_same_params(self):
        a = build_dense_unet(_cfg(), seed=7)
        b = build_dense_unet(_cfg(), seed=7)
        for k in a.params:
            np.testing.assert_array_equal(a.params[k].data, b.params[k].data)
        c = build_dense_unet(_cfg(), seed=8)
        assert any(not np.array_equal(a.params[k].data, c.params[k].data) for k in a.params)

    def test_forward_bit_identical(self, rng):
        model = build_dense_unet(_cfg(pooling=PoolSpec("shuffle_insert", 2)), seed=3)
        lr = rng.random((1, 3, 8, 8))
        np.testing.assert_array_equal(
            forward(model, Tensor(lr)).data, forward(model, Tensor(lr)).data
        )

    def test_float32_build(self):
        model = build_dense_unet(_cfg(), dtype=np.float32)
        assert all(p.dtype == np.float32 for p in model.params.values())
        out = forward(model, Tensor(np.random.default_rng(0).random((1, 3, 4, 4)).astype(np.float32)))
        assert out.dtype == np.float32


class TestClosure:
    def test_forward_touches_exactly_declared_params(self, rng):
        model = build_dense_unet(_cfg())
        model.params["bogus.w"] = Tensor(np.zeros((1, 1, 1, 1)), requires_grad=True)
        with pytest.raises(RuntimeError, match="declared parameter set"):
            forward(model, Tensor(rng.random((1, 3, 8, 8))))

    def test_all_params_receive_gradients(self, rng):
        model = build_dense_unet(_cfg(pooling=PoolSpec("shuffle_insert", 2)), seed=1)
        target = Tensor(rng.random((1, 3, 8, 8)))
        loss = mse(forward(model, Tensor(rng.random((1, 3, 4, 4)))), target)
        loss.backward()
        for name, p in model.params.items():
            assert p.grad is not None and p.grad.shape == p.shape, name


def test_toy_network_input_gradient(rng):
    model = build_dense_unet(_cfg(), seed=2)
    target = Tensor(rng.random((1, 3, 8, 8)))

    def run(x):
        return mse(forward(model, x), target)

    rep = grad_check(run, Tensor(rng.random((1, 3, 4, 4))))
    assert rep.passed, rep
