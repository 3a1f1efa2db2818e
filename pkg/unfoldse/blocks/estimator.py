"""
unfoldse.blocks.estimator

Gradient estimator (GE) and parameter initializer.

A GE holds three gradient calculators with the same shape: one gain gradient
calculator (GGC) shared by speech and noise, and one residual gradient
calculator (RGC) per source. Each calculator compresses its per-frame input
with a 1D-GLU, models it with an S-TCN and reads out two K-wide linear heads.

The calculators predict the learned prior-gradient terms, i.e. the products
of the prior weight and the prior gradient; outputs are unbounded.
"""

import torch
import torch.nn as nn

from unfoldse import constants as C
from unfoldse.blocks.layers import Glu1d
from unfoldse.blocks.tcn import SqueezedTCN, STCNConfig
from unfoldse.errors import ShapeError
from unfoldse.frontend import magnitude
from unfoldse.signal_model import GradientSet, ParameterSet


class GradientCalculator(nn.Module):
    """1D-GLU -> S-TCN -> two per-frame linear heads of width num_bins.

    Input [B, in_features, L]; output a pair of [B, num_bins, L] tensors.
    """

    def __init__(self, in_features, num_bins, cfg=STCNConfig()):
        super(GradientCalculator, self).__init__()
        self.compress = Glu1d(in_features, cfg.width)
        self.trunk = SqueezedTCN(cfg)
        self.head_a = nn.Linear(cfg.width, num_bins)
        self.head_b = nn.Linear(cfg.width, num_bins)

    def forward(self, features):
        h = self.trunk(self.compress(features)).transpose(1, 2)
        return (self.head_a(h).transpose(1, 2),
                self.head_b(h).transpose(1, 2))


class GradientEstimator(nn.Module):
    """Predicts prior gradients for (G_S, G_N, R_S, R_N) from F, S^, N^."""

    def __init__(self, feature_dim, num_bins=C.NUM_BINS, cfg=STCNConfig()):
        super(GradientEstimator, self).__init__()
        self.feature_dim = feature_dim
        self.num_bins = num_bins
        in_features = feature_dim + 2 * num_bins
        self.ggc = GradientCalculator(in_features, num_bins, cfg)
        self.rgc_s = GradientCalculator(in_features, num_bins, cfg)
        self.rgc_n = GradientCalculator(in_features, num_bins, cfg)

    def _check(self, f, s_hat, n_hat):
        batch, _, _, frames = f.shape
        expected = (batch, 2, self.num_bins, frames)
        for name, spec in (('speech', s_hat), ('noise', n_hat)):
            if tuple(spec.shape) != expected:
                raise ShapeError('{} spectrum has shape {}, expected {}'.format(
                        name, tuple(spec.shape), expected))
        if f.shape[1] * f.shape[2] != self.feature_dim:
            raise ShapeError('feature map {} does not flatten to {}'.format(
                    tuple(f.shape), self.feature_dim))

    def raw(self, f, s_hat, n_hat):
        """Unsquashed head outputs as a GradientSet."""
        self._check(f, s_hat, n_hat)
        batch, _, _, frames = f.shape
        flat = f.reshape(batch, self.feature_dim, frames)
        gain_in = torch.cat([flat, magnitude(s_hat), magnitude(n_hat)], dim=1)
        d_g_s, d_g_n = self.ggc(gain_in)
        residuals = []
        for rgc, spec in ((self.rgc_s, s_hat), (self.rgc_n, n_hat)):
            rgc_in = torch.cat(
                    [flat, spec.reshape(batch, 2 * self.num_bins, frames)], dim=1)
            re, im = rgc(rgc_in)
            residuals.append(torch.stack([re, im], dim=1))
        return GradientSet(d_g_s, d_g_n, residuals[0], residuals[1])

    def forward(self, f, s_hat, n_hat):
        return self.raw(f, s_hat, n_hat)


class ParameterInitializer(GradientEstimator):
    """GE-structured network producing the step-0 parameter set.

    It is conditioned on (F, X, X); gain heads are squashed to (0, 1) and
    residual heads are linear.
    """

    def forward(self, f, x):
        raw = self.raw(f, x, x)
        return ParameterSet(torch.sigmoid(raw.d_g_s), torch.sigmoid(raw.d_g_n),
                            raw.d_r_s, raw.d_r_n)
