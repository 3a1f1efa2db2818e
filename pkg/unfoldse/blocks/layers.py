"""
unfoldse.blocks.layers

Causal building blocks shared by the encoder, the gradient calculators and
the fusion network.

Two-dimensional feature maps are laid out [batch, channels, time, freq] and
one-dimensional ones [batch, channels, time]. Every layer here is causal in
time: the output at frame t depends only on inputs at frames <= t.

Layers that look back in time are StreamingLayers. Called normally they see
the whole signal and treat the past before frame 0 as zeros. Inside
streaming() they see only the frames that are new since the previous call
and carry the context they need from one call to the next, so a signal fed
in consecutive blocks gives the same output as the signal in one piece.
"""

import contextlib

import torch
import torch.nn as nn
import torch.nn.functional as F


class StreamingLayer(object):
    """Mixin holding the left context of a causal layer between calls."""

    streaming = False
    context = None

    def with_context(self, x, size):
        """Prepend the last size frames seen before x (zeros at the start).

        Only used while streaming; the new tail of the input becomes the
        context of the next call.
        """
        if size == 0:
            return x
        if self.context is None:
            shape = list(x.shape)
            shape[2] = size
            self.context = x.new_zeros(shape)
        h = torch.cat([self.context, x], dim=2)
        self.context = h[:, :, h.shape[2] - size:].detach()
        return h


@contextlib.contextmanager
def streaming(module, state):
    """Run module on consecutive blocks of frames.

    Every StreamingLayer under module picks up its context from state (a
    dict keyed by module name) on entry and stores it back on exit, so one
    dict carries a stream across calls while the module itself is left in
    its normal whole-signal mode between them.
    """
    layers = [(name, m) for name, m in module.named_modules()
              if isinstance(m, StreamingLayer)]
    for name, layer in layers:
        layer.streaming = True
        layer.context = state.get(name)
    try:
        yield state
    finally:
        for name, layer in layers:
            state[name] = layer.context
            layer.streaming = False
            layer.context = None


class CumulativeLayerNorm(nn.Module, StreamingLayer):
    """Cumulative layer normalization.

    Statistics at frame t are taken over channels (and frequency, for 2D
    maps) of all frames up to and including t, so the normalization is
    causal and independent of the batch. Gain and bias are per channel.
    While streaming the running sums and count are the context.
    """

    def __init__(self, channels, eps=1e-5):
        super(CumulativeLayerNorm, self).__init__()
        self.eps = eps
        self.gain = nn.Parameter(torch.ones(channels))
        self.bias = nn.Parameter(torch.zeros(channels))

    def forward(self, x):
        dims = [1] + list(range(3, x.dim()))
        frames = x.shape[2]
        per_frame = x.shape[1]
        for d in x.shape[3:]:
            per_frame *= d
        cum_sum = torch.cumsum(x.sum(dim=dims, keepdim=True), dim=2)
        cum_pow = torch.cumsum((x ** 2).sum(dim=dims, keepdim=True), dim=2)
        shape = [1, 1, frames] + [1] * (x.dim() - 3)
        count = torch.arange(1, frames + 1, dtype=x.dtype,
                             device=x.device).view(shape) * per_frame
        if self.streaming and frames:
            if self.context is not None:
                last_sum, last_pow, last_count = self.context
                cum_sum = cum_sum + last_sum
                cum_pow = cum_pow + last_pow
                count = count + last_count
            self.context = (cum_sum[:, :, -1:].detach(),
                            cum_pow[:, :, -1:].detach(), count[:, :, -1:])
        mean = cum_sum / count
        var = (cum_pow / count - mean ** 2).clamp(min=0.0)
        y = (x - mean) / torch.sqrt(var + self.eps)
        param_shape = [1, -1] + [1] * (x.dim() - 2)
        return y * self.gain.view(param_shape) + self.bias.view(param_shape)


class CausalConv1d(nn.Module, StreamingLayer):
    """Dilated 1D convolution zero-padded on past frames only."""

    def __init__(self, in_channels, out_channels, kernel_size, dilation=1,
                 causal=True):
        super(CausalConv1d, self).__init__()
        total = (kernel_size - 1) * dilation
        self.causal = causal
        self.padding = (total, 0) if causal else (total // 2, total - total // 2)
        self.conv = nn.Conv1d(in_channels, out_channels, kernel_size,
                              dilation=dilation)

    def forward(self, x):
        if not self.streaming:
            return self.conv(F.pad(x, self.padding))
        if not self.causal:
            raise ValueError('a non-causal convolution cannot stream')
        return self.conv(self.with_context(x, self.padding[0]))


class CausalConv2d(nn.Module, StreamingLayer):
    """2D convolution over (time, freq), causal in time.

    Frequency is padded by (kernel - 1) // 2 on both sides, so a stride of 2
    maps K bins to ceil(K / 2).
    """

    def __init__(self, in_channels, out_channels, kernel_size=(2, 3),
                 stride=(1, 1)):
        super(CausalConv2d, self).__init__()
        kt, kf = kernel_size
        pf = (kf - 1) // 2
        self.past = kt - 1
        self.padding = (pf, pf, kt - 1, 0)
        self.conv = nn.Conv2d(in_channels, out_channels, kernel_size,
                              stride=stride)

    def forward(self, x):
        if not self.streaming:
            return self.conv(F.pad(x, self.padding))
        h = self.with_context(x, self.past)
        return self.conv(F.pad(h, self.padding[:2]))


def match_freq(x, size):
    """Crop or zero-pad the last (frequency) axis to size."""
    current = x.shape[-1]
    if current > size:
        return x[..., :size]
    if current < size:
        return F.pad(x, (0, size - current))
    return x


class CausalDeconv2d(nn.Module, StreamingLayer):
    """Transposed 2D convolution upsampling frequency, causal in time.

    The trailing kernel_size[0] - 1 output frames are dropped, so output
    frame t only sees input frames t and earlier.
    """

    def __init__(self, in_channels, out_channels, kernel_size=(2, 3),
                 stride=(1, 2)):
        super(CausalDeconv2d, self).__init__()
        self.chomp = kernel_size[0] - 1
        self.conv = nn.ConvTranspose2d(in_channels, out_channels, kernel_size,
                                       stride=stride,
                                       padding=(0, (kernel_size[1] - 1) // 2))

    def forward(self, x, size):
        frames = x.shape[2]
        if not self.streaming:
            y = self.conv(x)[:, :, :frames]
        else:
            h = self.with_context(x, self.chomp)
            y = self.conv(h)[:, :, self.chomp:self.chomp + frames]
        return match_freq(y, size)


class Glu1d(nn.Module):
    """Pointwise gated linear unit: value * sigmoid(gate)."""

    def __init__(self, in_channels, out_channels):
        super(Glu1d, self).__init__()
        self.conv = nn.Conv1d(in_channels, 2 * out_channels, 1)

    def forward(self, x):
        value, gate = self.conv(x).chunk(2, dim=1)
        return value * torch.sigmoid(gate)


class Glu2d(nn.Module):
    """Gated 2D convolution with frequency downsampling."""

    def __init__(self, in_channels, out_channels, kernel_size=(1, 3),
                 stride=(1, 2)):
        super(Glu2d, self).__init__()
        self.conv = CausalConv2d(in_channels, 2 * out_channels, kernel_size,
                                 stride)

    def forward(self, x):
        value, gate = self.conv(x).chunk(2, dim=1)
        return value * torch.sigmoid(gate)


class ConvBlock(nn.Module):
    """CausalConv2d -> cumulative layer norm -> PReLU."""

    def __init__(self, in_channels, out_channels, kernel_size=(2, 3),
                 stride=(1, 1)):
        super(ConvBlock, self).__init__()
        self.conv = CausalConv2d(in_channels, out_channels, kernel_size, stride)
        self.norm = CumulativeLayerNorm(out_channels)
        self.act = nn.PReLU()

    def forward(self, x):
        return self.act(self.norm(self.conv(x)))


class DeconvBlock(nn.Module):
    """CausalDeconv2d -> cumulative layer norm -> PReLU."""

    def __init__(self, in_channels, out_channels, kernel_size=(2, 3),
                 stride=(1, 2)):
        super(DeconvBlock, self).__init__()
        self.conv = CausalDeconv2d(in_channels, out_channels, kernel_size,
                                   stride)
        self.norm = CumulativeLayerNorm(out_channels)
        self.act = nn.PReLU()

    def forward(self, x, size):
        return self.act(self.norm(self.conv(x, size)))


def downsampled_bins(num_bins, stages):
    """Frequency size after `stages` stride-2 stages: K -> ceil(K / 2)."""
    sizes = [num_bins]
    for _ in range(stages):
        sizes.append((sizes[-1] + 1) // 2)
    return sizes
