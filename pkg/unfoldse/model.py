# Copyright (C) 2026  The pyunfoldse developers
#
# This program is free software: you can redistribute it and/or modify
# it under the terms of the GNU General Public License as published by
# the Free Software Foundation, either version 2 of the License, or
# (at your option) any later version.
#
# This program is distributed in the hope that it will be useful,
# but WITHOUT ANY WARRANTY; without even the implied warranty of
# MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
# GNU General Public License for more details.
#
# You should have received a copy of the GNU General Public License
# along with this program.  If not, see <http://www.gnu.org/licenses/>.

"""
unfoldse.model

The complete enhancement network: feature extractor, parameter initializer,
one gradient estimator per unfolding step, shared step sizes and the fusion
stage. ModelConfig captures everything needed to rebuild the architecture
and is stored in checkpoints.
"""

import collections
import logging

import torch
import torch.nn as nn

from unfoldse import constants as C
from unfoldse.blocks import (EncoderConfig, FeatureExtractor, FuseNetConfig,
                             GradientEstimator, ParameterInitializer,
                             STCNConfig, TargetFusion)
from unfoldse.constants import check_fusion_mode
from unfoldse.errors import ConfigError
from unfoldse.frontend import AnalysisConfig
from unfoldse.unfold import StepSizes, unfold_forward

logger = logging.getLogger('unfoldse.model')


_SUBCONFIGS = {
    'encoder': EncoderConfig,
    'stcn': STCNConfig,
    'fusion_net': FuseNetConfig,
}


def _tuples(value):
    if isinstance(value, list):
        return tuple(_tuples(v) for v in value)
    return value


def _lists(value):
    if isinstance(value, tuple):
        return [_lists(v) for v in value]
    return value


class ModelConfig(collections.namedtuple('ModelConfig',
        ['num_steps', 'fusion', 'num_bins', 'eta_init', 'encoder', 'stcn',
         'fusion_net'])):
    """Architecture of an UnfoldingEnhancer."""

    __slots__ = ()

    def __new__(cls, num_steps=C.NUM_STEPS, fusion=C.DEFAULT_FUSION,
                num_bins=C.NUM_BINS, eta_init=C.STEP_SIZE_INIT,
                encoder=EncoderConfig(), stcn=STCNConfig(),
                fusion_net=FuseNetConfig()):
        num_steps = int(num_steps)
        if num_steps < 0:
            raise ConfigError('number of unfolding steps must be >= 0, '
                              'got {}'.format(num_steps))
        try:
            fusion = check_fusion_mode(fusion)
        except ValueError as e:
            raise ConfigError(str(e))
        return super(ModelConfig, cls).__new__(
                cls, num_steps, fusion, int(num_bins), float(eta_init),
                encoder, stcn, fusion_net)

    def to_dict(self):
        """Plain dict of builtins, suitable for serialization."""
        d = {}
        for name, value in zip(self._fields, self):
            if name in _SUBCONFIGS:
                value = {k: _lists(v) for k, v in value._asdict().items()}
            d[name] = value
        return d

    @classmethod
    def from_dict(cls, d):
        kw = {}
        for name, value in d.items():
            if name not in cls._fields:
                raise ConfigError('unknown model config field {}'.format(name))
            if name in _SUBCONFIGS:
                value = _SUBCONFIGS[name](
                        **{k: _tuples(v) for k, v in value.items()})
            kw[name] = value
        return cls(**kw)

    def differences(self, other):
        """Names of fields (dotted for nested configs) that differ."""
        diffs = []
        for name, a, b in zip(self._fields, self, other):
            if name in _SUBCONFIGS:
                diffs.extend('{}.{}'.format(name, f)
                             for f, x, y in zip(a._fields, a, b) if x != y)
            elif a != b:
                diffs.append(name)
        return diffs


class UnfoldingEnhancer(nn.Module):
    """Deep-unfolded MAP speech and noise estimator.

    forward(x) maps a mixture spectrogram [B, 2, K, L] to an UnfoldTrace;
    the enhanced speech spectrum is trace.s_final.
    """

    def __init__(self, cfg=ModelConfig()):
        super(UnfoldingEnhancer, self).__init__()
        self.cfg = cfg
        self.encoder = FeatureExtractor(cfg.encoder, cfg.num_bins)
        feature_dim = self.encoder.feature_dim
        self.initializer = ParameterInitializer(feature_dim, cfg.num_bins,
                                                cfg.stcn)
        self.estimators = nn.ModuleList(
                [GradientEstimator(feature_dim, cfg.num_bins, cfg.stcn)
                 for _ in range(cfg.num_steps)])
        self.step_sizes = StepSizes(cfg.eta_init)
        self.fusion = TargetFusion(cfg.fusion, cfg.fusion_net, cfg.num_bins)

    @property
    def num_estimators(self):
        return len(self.estimators)

    def feature_extract(self, x):
        return self.encoder(x)

    def initialize_parameters(self, f, x):
        return self.initializer(f, x)

    def gradient_estimate(self, f, s_hat, n_hat, step_index):
        """Prior gradients from the estimator owned by step step_index (0-based)."""
        if not 0 <= step_index < len(self.estimators):
            raise ValueError('no gradient estimator for step {} (model has '
                             '{})'.format(step_index, len(self.estimators)))
        return self.estimators[step_index](f, s_hat, n_hat)

    def fuse(self, x, s_tilde, n_tilde):
        return self.fusion(x, s_tilde, n_tilde)

    def forward(self, x, num_steps=None):
        return unfold_forward(x, self, num_steps)

    def enhance(self, x):
        """Enhanced speech spectrogram for mixture x."""
        return self.forward(x).s_final


def build_model(cfg=ModelConfig(), seed=None):
    """Build an UnfoldingEnhancer, seeding torch first when seed is given."""
    if seed is not None:
        torch.manual_seed(int(seed))
    model = UnfoldingEnhancer(cfg)
    logger.debug('built model: Q=%d fusion=%s params=%d', cfg.num_steps,
                 cfg.fusion, count_parameters(model))
    return model


## Inspection

def count_parameters(module):
    """Number of trainable parameters in module."""
    if module is None:
        return 0
    return sum(p.numel() for p in module.parameters() if p.requires_grad)


ParameterReport = collections.namedtuple('ParameterReport',
        ['total', 'components', 'step_delta', 'num_steps', 'fusion'])


def parameter_report(model):
    """Per-component parameter breakdown of an UnfoldingEnhancer.

    step_delta is the size of one per-step gradient estimator, i.e. the
    growth of the model per added unfolding step.
    """
    components = [('feature extractor', count_parameters(model.encoder)),
                  ('initializer', count_parameters(model.initializer))]
    for i, estimator in enumerate(model.estimators):
        components.append(('estimator {}'.format(i + 1),
                           count_parameters(estimator)))
    components.append(('step sizes', count_parameters(model.step_sizes)))
    components.append(('fusion ({})'.format(model.cfg.fusion),
                       count_parameters(model.fusion)))
    extra_step = GradientEstimator(model.encoder.feature_dim,
                                   model.cfg.num_bins, model.cfg.stcn)
    return ParameterReport(total=count_parameters(model),
                           components=components,
                           step_delta=count_parameters(extra_step),
                           num_steps=model.cfg.num_steps,
                           fusion=model.cfg.fusion)


def _conv_macs(module, inputs, output):
    if isinstance(module, nn.Linear):
        return output.numel() * module.in_features
    kernel = 1
    for k in module.kernel_size:
        kernel *= k
    if isinstance(module, (nn.ConvTranspose1d, nn.ConvTranspose2d)):
        return inputs[0].numel() * kernel * module.out_channels // module.groups
    return output.numel() * kernel * module.in_channels // module.groups


def count_macs(model, seconds=1.0, analysis=AnalysisConfig()):
    """Approximate multiply-accumulates per second of audio.

    Only convolutions and linear layers are counted; normalization,
    activations and the descent arithmetic are ignored.
    """
    frames = analysis.num_frames(int(seconds * analysis.sample_rate))
    x = torch.zeros(1, 2, model.cfg.num_bins, frames)
    total = [0]

    def hook(module, inputs, output):
        total[0] += _conv_macs(module, inputs, output)

    kinds = (nn.Conv1d, nn.Conv2d, nn.ConvTranspose1d, nn.ConvTranspose2d,
             nn.Linear)
    handles = [m.register_forward_hook(hook) for m in model.modules()
               if isinstance(m, kinds)]
    was_training = model.training
    try:
        model.eval()
        with torch.no_grad():
            model(x)
    finally:
        for h in handles:
            h.remove()
        model.train(was_training)
    return total[0] / float(seconds)
