import math

import pytest
import torch

from unfoldse.errors import ConfigError, NumericError, ShapeError
from unfoldse.signal_model import (GradientSet, ParameterSet,
                                   quadratic_gradients, quadratic_term,
                                   zero_gradients)
from unfoldse.unfold import (StepSizes, UnfoldTrace, clamp_gain,
                             consistency_project, gdm_step, unfold_forward)

from unfoldse.test.util import random_spectrogram, small_model


def scalar_set(g_s=0.0, g_n=0.0, r_s=(0.0, 0.0), r_n=(0.0, 0.0)):
    def spec(v):
        return torch.tensor(v, dtype=torch.float64).reshape(2, 1, 1)

    def gain(v):
        return torch.tensor(v, dtype=torch.float64).reshape(1, 1)
    return ParameterSet(gain(g_s), gain(g_n), spec(r_s), spec(r_n))


def scalar_grads(*values):
    return GradientSet(*scalar_set(*values))


class TestGdmStep(object):

    def test_example(self):
        x = torch.tensor([1.0, 0.0], dtype=torch.float64).reshape(2, 1, 1)
        omega = scalar_set()
        quad = quadratic_gradients(omega, x)
        out = gdm_step(omega, zero_gradients(omega), quad, [0.01] * 4)
        assert float(out.g_s) == pytest.approx(0.02)
        assert float(out.g_n) == pytest.approx(0.02)
        assert out.r_s.flatten().tolist() == pytest.approx([0.02, 0.0])
        assert out.r_n.flatten().tolist() == pytest.approx([0.02, 0.0])

    def test_clamps_gains(self):
        omega = scalar_set(g_s=0.999)
        quad = scalar_grads(-5.0, 0.0)
        prior = scalar_grads(-5.0, 0.0)
        out = gdm_step(omega, prior, quad, [0.01] * 4)
        assert float(out.g_s) == 1.0
        unclamped = gdm_step(omega, prior, quad, [0.01] * 4, clamp=False)
        assert float(unclamped.g_s) == pytest.approx(1.099)

    def test_clamp_passes_gradient(self):
        g = torch.tensor([-0.5, 0.5, 1.5], requires_grad=True)
        out = clamp_gain(g)
        assert out.tolist() == [0.0, 0.5, 1.0]
        out.sum().backward()
        assert g.grad.tolist() == [1.0, 1.0, 1.0]

    def test_step_sizes_module(self):
        omega = scalar_set()
        x = torch.tensor([1.0, 0.0], dtype=torch.float64).reshape(2, 1, 1)
        eta = StepSizes(0.01).double()
        out = gdm_step(omega, zero_gradients(omega),
                       quadratic_gradients(omega, x), eta)
        assert float(out.g_s) == pytest.approx(0.02)
        out.g_s.sum().backward()
        assert eta.eta_g_s.grad is not None
        assert float(eta.eta_g_s.grad) == pytest.approx(2.0)

    @pytest.mark.parametrize('name', ['d_g_s', 'd_g_n', 'd_r_s', 'd_r_n'])
    def test_non_finite_gradient(self, name):
        omega = scalar_set()
        grads = zero_gradients(omega)
        bad = grads._replace(**{name: getattr(grads, name) * float('nan')})
        with pytest.raises(NumericError) as e:
            gdm_step(omega, bad, zero_gradients(omega), [0.01] * 4)
        assert name[2:] in str(e.value)

    def test_shape_mismatch(self):
        omega = scalar_set()
        grads = zero_gradients(omega)._replace(d_g_s=torch.zeros(2, 2))
        with pytest.raises(ShapeError):
            gdm_step(omega, grads, zero_gradients(omega), [0.01] * 4)

    def test_descent_on_quadratic(self):
        g = torch.Generator().manual_seed(0)
        x = torch.randn(2, 4, 3, generator=g, dtype=torch.float64)
        omega = ParameterSet(torch.zeros(4, 3, dtype=torch.float64),
                             torch.zeros(4, 3, dtype=torch.float64),
                             torch.zeros_like(x), torch.zeros_like(x))
        start = float(quadratic_term(omega, x))
        previous = start
        for _ in range(200):
            omega = gdm_step(omega, zero_gradients(omega),
                             quadratic_gradients(omega, x), [0.01] * 4,
                             clamp=False)
            value = float(quadratic_term(omega, x))
            assert value < previous
            previous = value
        assert previous <= 1e-6 * start


class TestConsistency(object):

    def test_example(self):
        x = torch.tensor([1.0, 0.0]).reshape(2, 1, 1)
        s = torch.tensor([0.6, 0.0]).reshape(2, 1, 1)
        n = torch.tensor([0.6, 0.0]).reshape(2, 1, 1)
        s_hat, n_hat = consistency_project(s, n, x)
        assert s_hat.flatten().tolist() == pytest.approx([0.5, 0.0])
        assert n_hat.flatten().tolist() == pytest.approx([0.5, 0.0])

    def test_consistent_pair_unchanged(self):
        s = random_spectrogram(5, seed=1)
        n = random_spectrogram(5, seed=2)
        s_hat, n_hat = consistency_project(s, n, s + n)
        assert torch.allclose(s_hat, s, atol=1e-12)
        assert torch.allclose(n_hat, n, atol=1e-12)

    def test_sums_to_mixture(self):
        x = random_spectrogram(7, seed=3)
        s_hat, n_hat = consistency_project(random_spectrogram(7, seed=4),
                                           random_spectrogram(7, seed=5), x)
        assert float((s_hat + n_hat - x).abs().max()) <= 1e-12

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            consistency_project(torch.zeros(2, 3, 4), torch.zeros(2, 3, 4),
                                torch.zeros(2, 3, 5))


class TestUnfoldForward(object):

    @pytest.mark.parametrize('num_steps', range(6))
    def test_trace_and_consistency(self, num_steps):
        model = small_model(num_steps=5, double=True).eval()
        x = random_spectrogram(12, batch=2)
        with torch.no_grad():
            trace = unfold_forward(x, model, num_steps)
        assert trace.num_steps == num_steps
        for field in trace._fields[:-1]:
            assert len(getattr(trace, field)) == num_steps + 1
        for s_hat, n_hat in zip(trace.s_hat, trace.n_hat):
            assert float((s_hat + n_hat - x).abs().max()) <= 1e-6
        assert trace.s_final.shape == x.shape

    def test_default_steps(self):
        model = small_model(num_steps=2, double=True).eval()
        with torch.no_grad():
            trace = model(random_spectrogram(6))
        assert trace.num_steps == 2

    def test_too_many_steps(self):
        model = small_model(num_steps=1)
        with pytest.raises(ConfigError):
            unfold_forward(random_spectrogram(6, dtype=torch.float32), model, 2)

    def test_negative_steps(self):
        model = small_model(num_steps=1)
        with pytest.raises(ValueError):
            unfold_forward(random_spectrogram(6, dtype=torch.float32), model, -1)

    def test_gains_stay_in_range(self):
        model = small_model(num_steps=3, double=True).eval()
        with torch.no_grad():
            trace = model(random_spectrogram(8) * 10)
        for omega in trace.omegas:
            for g in (omega.g_s, omega.g_n):
                assert float(g.min()) >= 0.0
                assert float(g.max()) <= 1.0

    def test_trace_check(self):
        trace = UnfoldTrace([1], [1], [1], [1], [], 1)
        with pytest.raises(ValueError):
            trace.check()
        with pytest.raises(ValueError):
            UnfoldTrace([1], [1], [1], [1], [1], None).check()
        assert math.isclose(UnfoldTrace([1], [1], [1], [1], [1], 1)
                            .num_steps, 0)
