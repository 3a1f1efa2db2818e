"""
unfoldse.blocks.tcn

Squeezed temporal convolutional networks (S-TCNs): groups of temporal
convolution modules (TCMs) with growing dilation. A TCM squeezes the trunk to
a narrow bottleneck, runs one dilated causal convolution, expands back and
adds the input.
"""

import collections

import torch.nn as nn

from unfoldse.blocks.layers import CausalConv1d, CumulativeLayerNorm


class STCNConfig(collections.namedtuple(
        'STCNConfig',
        ['groups', 'tcm_per_group', 'kernel', 'dilations', 'width', 'hidden',
         'causal'],
        defaults=(2, 4, 3, (1, 2, 5, 9), 256, 32, True))):
    """S-TCN hyperparameters. dilations apply within each group."""

    __slots__ = ()

    def check(self):
        if len(self.dilations) != self.tcm_per_group:
            raise ValueError('{} dilations given for {} TCMs per group'.format(
                    len(self.dilations), self.tcm_per_group))
        if min(self.groups, self.kernel, self.width, self.hidden) < 1:
            raise ValueError('S-TCN sizes must be positive: {}'.format(self))
        return self

    @property
    def receptive_field(self):
        """Past frames seen by the last output frame, plus one."""
        return 1 + self.groups * sum((self.kernel - 1) * d
                                     for d in self.dilations)


class TemporalConvModule(nn.Module):
    """Bottleneck residual block around one dilated causal convolution."""

    def __init__(self, width, hidden, kernel, dilation, causal=True):
        super(TemporalConvModule, self).__init__()
        self.net = nn.Sequential(
            nn.Conv1d(width, hidden, 1),
            nn.PReLU(),
            CumulativeLayerNorm(hidden),
            CausalConv1d(hidden, hidden, kernel, dilation, causal=causal),
            nn.PReLU(),
            CumulativeLayerNorm(hidden),
            nn.Conv1d(hidden, width, 1),
        )

    def forward(self, x):
        return x + self.net(x)


class SqueezedTCN(nn.Module):
    """Stack of TCM groups operating on [B, width, L]."""

    def __init__(self, cfg=STCNConfig()):
        super(SqueezedTCN, self).__init__()
        cfg.check()
        self.cfg = cfg
        self.blocks = nn.Sequential(*[
            TemporalConvModule(cfg.width, cfg.hidden, cfg.kernel, d, cfg.causal)
            for _ in range(cfg.groups) for d in cfg.dilations])

    def forward(self, x):
        return self.blocks(x)
