import math
import os

import numpy as np
import pytest
import torch

from unfoldse import constants as C
from unfoldse import train as train_module
from unfoldse.checkpoint import load_checkpoint
from unfoldse.config import RunConfig
from unfoldse.data import batch_spectra, collate, make_loader
from unfoldse.errors import ConfigError, NumericError
from unfoldse.frontend import AnalysisConfig
from unfoldse.loss import LossWeights, sisnr, unfolded_training_loss
from unfoldse.model import build_model
from unfoldse.train import (PlateauSchedule, TrainConfig, fit, lr_after,
                            ValidationResult, read_history, validate)

from unfoldse.test.util import (same_weights, small_model, small_run_config,
                                temp_directory, toy_dataset, weights_snapshot)


@pytest.fixture(scope='module')
def corpus(tmp_path_factory):
    path = str(tmp_path_factory.mktemp('toy'))
    return toy_dataset(path, n_pairs=4, seed=0)


def train_steps(model, dataset, steps, lr=5e-4):
    """Plain optimization loop; returns summed |grad| per parameter name."""
    optimizer = torch.optim.Adam(model.parameters(), lr=lr)
    loader, sampler = make_loader(dataset, batch_size=2)
    totals = dict((name, 0.0) for name, _ in model.named_parameters())
    done, epoch = 0, 0
    model.train()
    while done < steps:
        sampler.set_epoch(epoch)
        for batch in loader:
            x, s, n = batch_spectra(batch)
            loss = unfolded_training_loss(model(x), s, n,
                                          lengths=batch.frames)
            optimizer.zero_grad()
            loss.backward()
            for name, p in model.named_parameters():
                totals[name] += float(p.grad.abs().sum())
            optimizer.step()
            done += 1
            if done == steps:
                break
        epoch += 1
    return totals


class TestPlateau(object):

    def test_halves_twice(self):
        assert lr_after([1.0, 1.0, 1.0], 1e-3) == pytest.approx(2.5e-4)

    def test_improvement_resets(self):
        assert lr_after([1.0, 1.0, 0.5, 0.6], 1e-3) == pytest.approx(1e-3)
        assert lr_after([1.0, 1.1, 1.2], 1e-3) == pytest.approx(5e-4)

    def test_stateful(self):
        schedule = PlateauSchedule(1.0, patience=1, factor=0.1)
        assert schedule.step(2.0) == 1.0
        assert schedule.step(2.0) == pytest.approx(0.1)
        assert schedule.step(1.0) == pytest.approx(0.1)


class TestTrainConfig(object):

    @pytest.mark.parametrize('kw', [dict(epochs=0), dict(lr=0),
                                    dict(lr_factor=1.0), dict(batch_size=0),
                                    dict(max_steps=-1), dict(adam_beta1=1.0)])
    def test_invalid(self, kw):
        with pytest.raises(ConfigError):
            TrainConfig(**kw)

    def test_defaults_match_config_file(self):
        assert RunConfig().train_config() == TrainConfig()


class TestValidate(object):

    def test_no_leakage(self, corpus):
        model = small_model()
        before = weights_snapshot(model)
        model.train()
        validate(model, corpus)
        assert same_weights(before, weights_snapshot(model))
        assert model.training

    def test_deterministic(self, corpus):
        model = small_model()
        a = validate(model, corpus)
        b = validate(model, corpus)
        assert a == b
        assert math.isfinite(a.loss)
        assert len(a.sisnr) == len(corpus)

    def test_mean_of_item_losses(self, corpus):
        model = small_model().eval()
        result = validate(model, corpus)
        losses = []
        with torch.no_grad():
            for i in range(len(corpus)):
                x, s, n = batch_spectra(collate([corpus[i]]))
                losses.append(float(unfolded_training_loss(model(x), s, n)))
        assert result.loss == pytest.approx(float(np.mean(losses)), rel=1e-6)

    def test_improvement_over_mixture(self, corpus):
        model = small_model().eval()
        result = validate(model, corpus)
        for i in range(len(corpus)):
            batch = collate([corpus[i]])
            length = min(int(batch.lengths[0]),
                         AnalysisConfig().max_length(int(batch.frames[0])))
            noisy = sisnr(batch.mixture[0, :length], batch.clean[0, :length])
            assert result.sisnri[i] == pytest.approx(result.sisnr[i] - noisy,
                                                     abs=1e-4)


class TestFit(object):

    def test_one_epoch(self, corpus):
        cfg = small_run_config().train_config()
        model = build_model(small_run_config().model_config(), seed=0)
        with temp_directory() as d:
            result = fit(model, corpus, corpus, cfg, d)
            assert len(result.history) == 1
            entry = result.history[0]
            assert entry.epoch == 1
            assert entry.steps == 2
            assert math.isfinite(entry.train_loss)
            assert math.isfinite(entry.val_loss)
            for name in ('best.ckpt', 'last.ckpt', 'history.tsv'):
                assert os.path.isfile(os.path.join(d, name))
            rows = read_history(os.path.join(d, 'history.tsv'))
            assert len(rows) == 1 and rows[0]['epoch'] == '1'
            ckpt = load_checkpoint(result.best_path)
            assert ckpt.epoch == 1
            assert same_weights(weights_snapshot(ckpt.model),
                                weights_snapshot(model))

    def test_max_steps(self, corpus):
        cfg = small_run_config(train__epochs=5, train__max_steps=3) \
            .train_config()
        model = build_model(small_run_config().model_config(), seed=0)
        with temp_directory() as d:
            result = fit(model, corpus, corpus, cfg, d)
        assert result.history[-1].steps == 3
        assert len(result.history) == 2

    def test_architecture_mismatch(self, corpus):
        cfg = small_run_config(model__num_steps=2).train_config()
        model = small_model(num_steps=1)
        with temp_directory() as d:
            with pytest.raises(ConfigError):
                fit(model, corpus, corpus, cfg, d)

    def test_divergence_keeps_last_checkpoint(self, corpus):
        cfg = small_run_config().train_config()
        model = build_model(small_run_config().model_config(), seed=0)
        with temp_directory() as d:
            fit(model, corpus, corpus, cfg, d)
            with torch.no_grad():
                model.step_sizes.eta_g_s.fill_(float('nan'))
            with pytest.raises(NumericError):
                fit(model, corpus, corpus, cfg, d)
            ckpt = load_checkpoint(os.path.join(d, 'last.ckpt'))
            assert ckpt.epoch == 1
            assert all(math.isfinite(v) for v in ckpt.step_sizes)

    def test_non_finite_validation(self, corpus, monkeypatch):
        cfg = small_run_config().train_config()
        model = build_model(small_run_config().model_config(), seed=0)
        monkeypatch.setattr(train_module, 'validate',
                            lambda *args: ValidationResult(
                                    float('nan'), [0.0], [0.0]))
        with temp_directory() as d:
            with pytest.raises(NumericError):
                fit(model, corpus, corpus, cfg, d)
            assert not os.path.exists(os.path.join(d, 'last.ckpt'))
            assert not os.path.exists(os.path.join(d, 'best.ckpt'))


def test_step_sizes_train(corpus):
    model = small_model(num_steps=2)
    totals = train_steps(model, corpus, 100)
    for name, total in totals.items():
        assert total > 0, name
    assert any(abs(v - C.STEP_SIZE_INIT) > 1e-7
               for v in model.step_sizes.values())


@pytest.mark.skipif(not C.SLOW_TESTS,
                    reason='set UNFOLDSE_SLOW_TESTS=1 to run')
def test_overfits_toy_corpus():
    with temp_directory() as d:
        dataset = toy_dataset(d, n_pairs=20, seed=0, segment_seconds=4.0)
        model = build_model(RunConfig().model_config(), seed=0)
        train_steps(model, dataset, 5000)
        result = validate(model, dataset, LossWeights())
        assert float(np.mean(result.sisnri)) >= 5.0
