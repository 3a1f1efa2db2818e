"""
unfoldse.blocks.fusion

Target fusion: combines the final speech and noise estimates into the
enhanced speech spectrum.

    R  s + FuseNet(x, s, n)           residual recalibration (default)
    G  M s + (1 - M)(x - n)           learned per-bin weight M in (0, 1)
    A  0.5 s + 0.5 (x - n)            fixed average

FuseNet is an encoder / S-TCN / decoder network with half the 2D channels of
the feature extractor. It takes the RI planes of x, s and n (six channels).
"""

import collections

import torch
import torch.nn as nn

from unfoldse import constants as C
from unfoldse.blocks.layers import ConvBlock, DeconvBlock, downsampled_bins
from unfoldse.blocks.tcn import SqueezedTCN, STCNConfig
from unfoldse.constants import check_fusion_mode
from unfoldse.errors import ShapeError
from unfoldse.signal_model import apply_gain


class FuseNetConfig(collections.namedtuple(
        'FuseNetConfig',
        ['channels', 'kernel', 'layers', 'width', 'hidden', 'groups',
         'dilations'],
        defaults=(32, (2, 3), 5, 256, 64, 3, (1, 2, 4, 8, 16, 32)))):
    __slots__ = ()

    def stcn(self):
        return STCNConfig(groups=self.groups,
                          tcm_per_group=len(self.dilations),
                          kernel=3, dilations=tuple(self.dilations),
                          width=self.width, hidden=self.hidden, causal=True)


class FuseNet(nn.Module):
    """Encoder-TCN-decoder over the stacked (x, s, n) spectra.

    Returns [B, out_channels, K, L].
    """

    def __init__(self, cfg=FuseNetConfig(), num_bins=C.NUM_BINS,
                 out_channels=2):
        super(FuseNet, self).__init__()
        self.cfg = cfg
        self.num_bins = num_bins
        self.sizes = downsampled_bins(num_bins, cfg.layers)
        ch = cfg.channels
        self.encoders = nn.ModuleList(
                [ConvBlock(6 if i == 0 else ch, ch, cfg.kernel, stride=(1, 2))
                 for i in range(cfg.layers)])
        flat = ch * self.sizes[-1]
        self.tcn_in = nn.Conv1d(flat, cfg.width, 1)
        self.tcn = SqueezedTCN(cfg.stcn())
        self.tcn_out = nn.Conv1d(cfg.width, flat, 1)
        self.decoders = nn.ModuleList(
                [DeconvBlock(2 * ch, ch, cfg.kernel) for _ in range(cfg.layers)])
        self.out = nn.Conv2d(ch, out_channels, 1)

    def forward(self, x, s, n):
        h = torch.cat([x, s, n], dim=1).transpose(2, 3)
        skips = []
        for encoder in self.encoders:
            h = encoder(h)
            skips.append(h)
        batch, ch, frames, bins = h.shape
        flat = h.permute(0, 1, 3, 2).reshape(batch, ch * bins, frames)
        flat = self.tcn_out(self.tcn(self.tcn_in(flat)))
        d = flat.reshape(batch, ch, bins, frames).permute(0, 1, 3, 2)
        for decoder, skip, size in zip(self.decoders, reversed(skips),
                                       reversed(self.sizes[:-1])):
            d = decoder(torch.cat([d, skip], dim=1), size)
        return self.out(d).transpose(2, 3)


def fuse_weighted(x, s_tilde, n_tilde, mask):
    """M * s + (1 - M) * (x - n) with a real per-bin weight M [..., K, L]."""
    return apply_gain(mask, s_tilde) + apply_gain(1.0 - mask, x - n_tilde)


def fuse(x, s_tilde, n_tilde, mode, net=None):
    """Fuse speech and noise estimates into the final speech spectrum.

    Args:
        x, s_tilde, n_tilde (tensor): [B, 2, K, L] spectra.
        mode (str): 'R', 'G' or 'A'.
        net (FuseNet | None): network for modes 'R' (2 output channels) and
            'G' (1 output channel).

    Raises:
        ValueError: unknown mode, or missing network.
        ShapeError: spectra shapes disagree.
    """
    mode = check_fusion_mode(mode)
    if not (x.shape == s_tilde.shape == n_tilde.shape):
        raise ShapeError('fuse: shape mismatch {} {} {}'.format(
                tuple(x.shape), tuple(s_tilde.shape), tuple(n_tilde.shape)))
    if mode == 'A':
        return 0.5 * s_tilde + 0.5 * (x - n_tilde)
    if net is None:
        raise ValueError('fusion mode {} needs a network'.format(mode))
    if mode == 'R':
        return s_tilde + net(x, s_tilde, n_tilde)
    mask = torch.sigmoid(net(x, s_tilde, n_tilde)[:, 0])
    return fuse_weighted(x, s_tilde, n_tilde, mask)


class TargetFusion(nn.Module):
    """Fusion stage holding the network required by its mode."""

    def __init__(self, mode=C.DEFAULT_FUSION, cfg=FuseNetConfig(),
                 num_bins=C.NUM_BINS):
        super(TargetFusion, self).__init__()
        self.mode = check_fusion_mode(mode)
        if self.mode == 'R':
            self.net = FuseNet(cfg, num_bins, out_channels=2)
        elif self.mode == 'G':
            self.net = FuseNet(cfg, num_bins, out_channels=1)
        else:
            self.net = None

    def forward(self, x, s_tilde, n_tilde):
        return fuse(x, s_tilde, n_tilde, self.mode, self.net)
