"""
unfoldse.blocks.encoder

Feature extractor: a cascade of recalibration encoding layers (RELs). Each
REL is a gated 2D convolution halving the frequency axis, followed by a
UNet-block wrapped in a residual connection. With the default padding the
frequency axis goes 161 -> 81 -> 41 -> 21 -> 11 -> 6.
"""

import collections

import torch
import torch.nn as nn

from unfoldse import constants as C
from unfoldse.blocks.layers import (ConvBlock, CumulativeLayerNorm,
                                    DeconvBlock, Glu2d, downsampled_bins)
from unfoldse.errors import ShapeError


EncoderConfig = collections.namedtuple(
        'EncoderConfig',
        ['channels', 'conv_kernel', 'conv_stride', 'unet_depths',
         'unet_kernel', 'unet_channels'],
        defaults=(64, (1, 3), (1, 2), (4, 3, 2, 1, 0), (2, 3), 32))


class UNetBlock(nn.Module):
    """Multi-scale encoder/decoder over (time, freq) with skip connections.

    Args:
        channels (int): input and output channels.
        inner (int): channels inside the block.
        depth (int): number of stride-2 encoder (and mirrored decoder) layers.
        kernel_size (tuple): (time, freq) kernel of every layer.
    """

    def __init__(self, channels, inner, depth, kernel_size=(2, 3)):
        super(UNetBlock, self).__init__()
        self.inp = ConvBlock(channels, inner, kernel_size)
        self.encoders = nn.ModuleList(
                [ConvBlock(inner, inner, kernel_size, stride=(1, 2))
                 for _ in range(depth)])
        self.bridge = ConvBlock(inner, inner, kernel_size)
        self.decoders = nn.ModuleList(
                [DeconvBlock(2 * inner, inner, kernel_size)
                 for _ in range(depth)])
        self.out = nn.Conv2d(inner, channels, 1)

    def forward(self, x):
        h = self.inp(x)
        skips = [h]
        for encoder in self.encoders:
            h = encoder(h)
            skips.append(h)
        d = self.bridge(h)
        for decoder, skip, target in zip(self.decoders, reversed(skips[1:]),
                                         reversed(skips[:-1])):
            d = decoder(torch.cat([d, skip], dim=1), target.shape[-1])
        return self.out(d)


class RecalibrationEncodingLayer(nn.Module):
    """Gated downsampling convolution plus a residual UNet-block."""

    def __init__(self, in_channels, out_channels, depth, cfg):
        super(RecalibrationEncodingLayer, self).__init__()
        self.glu = Glu2d(in_channels, out_channels, cfg.conv_kernel,
                         cfg.conv_stride)
        self.norm = CumulativeLayerNorm(out_channels)
        self.act = nn.PReLU()
        if depth > 0:
            self.unet = UNetBlock(out_channels, cfg.unet_channels, depth,
                                  cfg.unet_kernel)
        else:
            self.unet = None

    def forward(self, x):
        h = self.act(self.norm(self.glu(x)))
        if self.unet is not None:
            h = h + self.unet(h)
        return h


class FeatureExtractor(nn.Module):
    """Encoder mapping a mixture spectrogram to the feature map F.

    Input [B, 2, K, L]; output [B, C, K', L] with no temporal downsampling.
    """

    def __init__(self, cfg=EncoderConfig(), num_bins=C.NUM_BINS):
        super(FeatureExtractor, self).__init__()
        self.cfg = cfg
        self.num_bins = num_bins
        stride = cfg.conv_stride[1]
        if stride != 2:
            raise ValueError('frequency stride must be 2, got {}'.format(stride))
        if any(depth < 0 for depth in cfg.unet_depths):
            raise ValueError('UNet depths must be >= 0, got {}'.format(
                    cfg.unet_depths))
        self.output_bins = downsampled_bins(num_bins, len(cfg.unet_depths))[-1]
        layers = []
        in_channels = 2
        for depth in cfg.unet_depths:
            layers.append(RecalibrationEncodingLayer(in_channels, cfg.channels,
                                                     depth, cfg))
            in_channels = cfg.channels
        self.layers = nn.ModuleList(layers)

    @property
    def feature_dim(self):
        """Per-frame size of the flattened feature map, C * K'."""
        return self.cfg.channels * self.output_bins

    def forward(self, x):
        if x.dim() != 4 or x.shape[1] != 2 or x.shape[2] != self.num_bins:
            raise ShapeError('feature extractor expects [B, 2, {}, L], got '
                             '{}'.format(self.num_bins, tuple(x.shape)))
        h = x.transpose(2, 3)
        for layer in self.layers:
            h = layer(h)
        return h.transpose(2, 3)
