import pytest
import torch

from unfoldse.errors import ConfigError
from unfoldse.loss import compressed_spectral_loss
from unfoldse.model import (ModelConfig, build_model, count_macs,
                            count_parameters, parameter_report)

from unfoldse.test.util import random_spectrogram, small_model


@pytest.fixture(scope='module')
def default_sizes():
    """Parameter counts of default-size models for Q = 0..5."""
    return [count_parameters(build_model(ModelConfig(num_steps=q), seed=0))
            for q in range(6)]


class TestParameterCounts(object):

    def test_no_steps(self, default_sizes):
        assert 2.55e6 <= default_sizes[0] <= 3.45e6

    def test_default_steps(self, default_sizes):
        assert 7.1e6 <= default_sizes[3] <= 9.62e6

    def test_constant_growth(self, default_sizes):
        deltas = [b - a for a, b in zip(default_sizes, default_sizes[1:])]
        assert len(set(deltas)) == 1
        assert 1.61e6 <= deltas[0] <= 1.97e6

    def test_report(self):
        model = build_model(ModelConfig(num_steps=2), seed=0)
        report = parameter_report(model)
        assert report.total == count_parameters(model)
        assert sum(n for _, n in report.components) == report.total
        names = [name for name, _ in report.components]
        assert 'estimator 2' in names
        assert report.step_delta == count_parameters(model.estimators[0])

    def test_average_fusion_has_no_network(self):
        r = count_parameters(build_model(ModelConfig(num_steps=0), seed=0))
        a = count_parameters(build_model(ModelConfig(num_steps=0, fusion='A'),
                                         seed=0))
        assert a < r


class TestModelConfig(object):

    def test_dict_round_trip(self):
        cfg = ModelConfig(num_steps=2, fusion='g')
        assert cfg.fusion == 'G'
        assert ModelConfig.from_dict(cfg.to_dict()) == cfg

    def test_differences(self):
        a = ModelConfig()
        b = ModelConfig(num_steps=2,
                        stcn=a.stcn._replace(width=128))
        assert a.differences(b) == ['num_steps', 'stcn.width']
        assert a.differences(a) == []

    @pytest.mark.parametrize('kw', [dict(num_steps=-1), dict(fusion='X')])
    def test_invalid(self, kw):
        with pytest.raises(ConfigError):
            ModelConfig(**kw)

    def test_unknown_field(self):
        with pytest.raises(ConfigError):
            ModelConfig.from_dict({'layers': 3})


class TestEnhancer(object):

    def test_causal(self):
        model = small_model(num_steps=2, double=True).eval()
        x = random_spectrogram(30)
        g = torch.Generator().manual_seed(11)
        for _ in range(10):
            l0 = int(torch.randint(0, 29, (1,), generator=g))
            y = x.clone()
            y[..., l0 + 1:] = torch.randn(y[..., l0 + 1:].shape, generator=g,
                                          dtype=torch.float64)
            with torch.no_grad():
                tx, ty = model(x), model(y)
            assert float((tx.s_final[..., :l0 + 1] -
                          ty.s_final[..., :l0 + 1]).abs().max()) <= 1e-6
            for a, b in zip(tx.s_hat, ty.s_hat):
                assert float((a[..., :l0 + 1] -
                              b[..., :l0 + 1]).abs().max()) <= 1e-6

    def test_deterministic(self):
        model = small_model(num_steps=2).eval()
        x = random_spectrogram(15, dtype=torch.float32)
        with torch.no_grad():
            assert torch.equal(model.enhance(x), model.enhance(x))

    def test_same_seed_same_weights(self):
        a = small_model(seed=4).state_dict()
        b = small_model(seed=4).state_dict()
        assert all(torch.equal(a[k], b[k]) for k in a)

    @pytest.mark.parametrize('fusion', ['R', 'G'])
    def test_gradient_reaches_every_parameter(self, fusion):
        model = small_model(num_steps=2, fusion=fusion)
        x = random_spectrogram(10, batch=2, dtype=torch.float32)
        ref = random_spectrogram(10, batch=2, seed=9, dtype=torch.float32)
        compressed_spectral_loss(model.enhance(x), ref).backward()
        for name, p in model.named_parameters():
            assert p.grad is not None, name
            assert float(p.grad.abs().sum()) > 0, name

    def test_gradient_estimate_index(self):
        model = small_model(num_steps=1)
        x = random_spectrogram(5, dtype=torch.float32)
        f = model.feature_extract(x)
        with pytest.raises(ValueError):
            model.gradient_estimate(f, x, x, 1)

    def test_count_macs(self):
        model = small_model(num_steps=1)
        model.train()
        assert count_macs(model) > 0
        assert model.training
