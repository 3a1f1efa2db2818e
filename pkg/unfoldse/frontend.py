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
unfoldse.frontend

Waveform <-> spectrogram conversion and spectral compression.

Spectrograms are real tensors of shape [..., 2, K, L] holding the real and
imaginary planes of a one-sided STFT with K = fft_size/2 + 1 bins and L
frames. Frames are centered: the signal is reflect-padded by half a window
on both ends so that frame l is centered at sample l*hop. The forward
transform is unscaled, the inverse uses least-squares overlap-add with the
same Hann window, which is exact at 50% overlap.

The functions here are pure and may be called from multiple threads; the
stream classes hold per-stream state.
"""

import collections
import functools

import numpy as np
import soundfile
import torch

from unfoldse import constants as C
from unfoldse.errors import DataError, NumericError, ShapeError


class AnalysisConfig(collections.namedtuple('AnalysisConfig',
        ['window_length', 'hop', 'fft_size', 'sample_rate'])):
    """STFT analysis setup: 20 ms Hann window, 50% overlap, 320-point FFT."""

    __slots__ = ()

    def __new__(cls, window_length=C.WINDOW_LENGTH, hop=C.HOP_LENGTH,
                fft_size=C.FFT_SIZE, sample_rate=C.SAMPLE_RATE):
        self = super(AnalysisConfig, cls).__new__(
                cls, int(window_length), int(hop), int(fft_size),
                int(sample_rate))
        if self.hop * 2 != self.window_length:
            raise ValueError('hop must be half the window length, got '
                             'hop={} window={}'.format(self.hop,
                                                       self.window_length))
        if self.fft_size != self.window_length:
            raise ValueError('fft_size must equal window_length, got '
                             '{} != {}'.format(self.fft_size,
                                               self.window_length))
        if self.sample_rate != C.SAMPLE_RATE:
            raise ValueError('sample rate must be {} Hz, got {}'.format(
                    C.SAMPLE_RATE, self.sample_rate))
        return self

    @property
    def num_bins(self):
        return self.fft_size // 2 + 1

    def num_frames(self, num_samples):
        """Number of centered frames for a signal of the given length."""
        return 1 + int(num_samples) // self.hop

    def max_length(self, num_frames):
        """Longest signal that can be reconstructed from num_frames frames."""
        return (int(num_frames) - 1) * self.hop


@functools.lru_cache(maxsize=16)
def _window(length, dtype, device):
    return torch.hann_window(length, periodic=True, dtype=dtype, device=device)


def window(cfg, dtype=torch.float32, device='cpu'):
    """Hann analysis/synthesis window for cfg."""
    return _window(cfg.window_length, dtype, torch.device(device))


def as_tensor(w):
    """Convert a waveform (array or tensor) to a floating point tensor."""
    if isinstance(w, torch.Tensor):
        return w if w.is_floating_point() else w.float()
    a = np.asarray(w)
    if not np.issubdtype(a.dtype, np.floating):
        a = a.astype(np.float32)
    return torch.from_numpy(np.ascontiguousarray(a))


def check_waveform(w, cfg=None):
    """Validate waveform samples [..., T], returning them as a tensor.

    Raises:
        DataError: the signal is shorter than one analysis window, or
            contains non-finite samples.
    """
    w = as_tensor(w)
    min_length = cfg.window_length if cfg is not None else 1
    if w.dim() == 0 or w.shape[-1] < min_length:
        raise DataError('signal has {} samples, need at least {}'.format(
                0 if w.dim() == 0 else w.shape[-1], min_length))
    if not bool(torch.isfinite(w).all()):
        raise DataError('signal contains non-finite samples')
    return w


def stft(w, cfg=AnalysisConfig()):
    """Complex spectrogram of waveform samples.

    Args:
        w (tensor | ndarray): samples of shape [..., T], T >= window_length.
        cfg (AnalysisConfig): analysis setup.

    Returns:
        (tensor) real tensor [..., 2, K, L] with L = 1 + T // hop.
    """
    w = check_waveform(w, cfg)
    lead, n = w.shape[:-1], w.shape[-1]
    spec = torch.stft(w.reshape(-1, n), n_fft=cfg.fft_size, hop_length=cfg.hop,
                      win_length=cfg.window_length,
                      window=window(cfg, w.dtype, w.device),
                      center=True, pad_mode='reflect', normalized=False,
                      onesided=True, return_complex=True)
    planes = torch.stack([spec.real, spec.imag], dim=1)
    return planes.reshape(lead + planes.shape[1:])


def check_spectrogram(spec, cfg=None):
    """Raise ShapeError unless spec is [..., 2, K, L] with K matching cfg."""
    if spec.dim() < 3 or spec.shape[-3] != 2:
        raise ShapeError('expected spectrogram [..., 2, K, L], got {}'.format(
                tuple(spec.shape)))
    if cfg is not None and spec.shape[-2] != cfg.num_bins:
        raise ShapeError('expected {} frequency bins, got {}'.format(
                cfg.num_bins, spec.shape[-2]))


def istft(spec, cfg=AnalysisConfig(), out_length=None):
    """Overlap-add synthesis, the inverse of stft.

    Args:
        spec (tensor): [..., 2, K, L] spectrogram.
        cfg (AnalysisConfig): analysis setup used for the forward transform.
        out_length (int | None): number of samples to return; at most
            (L - 1) * hop. Defaults to that maximum.

    Returns:
        (tensor) waveform [..., out_length].
    """
    check_spectrogram(spec, cfg)
    lead, frames = spec.shape[:-3], spec.shape[-1]
    longest = cfg.max_length(frames)
    if out_length is None:
        out_length = longest
    if out_length > longest or out_length < 1:
        raise ShapeError('cannot reconstruct {} samples from {} frames'.format(
                out_length, frames))
    planes = spec.reshape((-1,) + spec.shape[-3:])
    z = torch.complex(planes[:, 0].contiguous(), planes[:, 1].contiguous())
    w = torch.istft(z, n_fft=cfg.fft_size, hop_length=cfg.hop,
                    win_length=cfg.window_length,
                    window=window(cfg, planes.dtype, planes.device),
                    center=True, normalized=False, onesided=True,
                    length=int(out_length))
    return w.reshape(lead + (int(out_length),))


## Streaming

class StftStream(object):
    """Incremental stft of a mono signal arriving in blocks.

    push() returns the frames [2, K, n] completed by the new samples. They
    are the frames stft() gives for the whole signal, except the last one
    or two, which depend on how the signal ends and come from finish().
    Frame l is complete once (l + 1) * hop samples have arrived; nothing is
    returned before one full window.
    """

    def __init__(self, cfg=AnalysisConfig(), dtype=torch.float32):
        self.cfg = cfg
        self.dtype = dtype
        self.half = cfg.fft_size // 2
        self.received = 0
        self.started = False
        self.pending = torch.zeros(0, dtype=dtype)
        self.tail = torch.zeros(0, dtype=dtype)

    def push(self, samples):
        """Add samples; returns the frames they complete.

        Raises:
            DataError: samples are not finite.
        """
        x = as_tensor(samples).to(self.dtype).reshape(-1)
        if not bool(torch.isfinite(x).all()):
            raise DataError('signal contains non-finite samples')
        self.received += x.shape[0]
        self.tail = torch.cat([self.tail, x])[-(self.half + 1):]
        self.pending = torch.cat([self.pending, x])
        if not self.started:
            if self.received < self.cfg.window_length:
                return self._no_frames()
            # reflect padding of the signal start, as in stft()
            head = self.pending[1:self.half + 1].flip(0)
            self.pending = torch.cat([head, self.pending])
            self.started = True
        return self._take_frames()

    def finish(self, padding=0):
        """The remaining frames, once the signal has ended.

        Args:
            padding (int): zeros appended to the signal before its end is
                reflect-padded.

        Raises:
            DataError: fewer than window_length samples were pushed.
        """
        if self.received < self.cfg.window_length:
            raise DataError('signal has {} samples, need at least {}'.format(
                    self.received, self.cfg.window_length))
        zeros = self.pending.new_zeros(int(padding))
        tail = torch.cat([self.tail, zeros])[-(self.half + 1):]
        self.pending = torch.cat([self.pending, zeros, tail[:-1].flip(0)])
        return self._take_frames()

    def _no_frames(self):
        return torch.zeros(2, self.cfg.num_bins, 0, dtype=self.dtype)

    def _take_frames(self):
        cfg = self.cfg
        n = self.pending.shape[0]
        if n < cfg.window_length:
            return self._no_frames()
        frames = (n - cfg.window_length) // cfg.hop + 1
        used = (frames - 1) * cfg.hop + cfg.window_length
        spec = torch.stft(self.pending[:used], n_fft=cfg.fft_size,
                          hop_length=cfg.hop, win_length=cfg.window_length,
                          window=window(cfg, self.dtype), center=False,
                          normalized=False, onesided=True, return_complex=True)
        self.pending = self.pending[frames * cfg.hop:]
        return torch.stack([spec.real, spec.imag])


class IstftStream(object):
    """Incremental overlap-add synthesis matching istft().

    push() takes the next frames [2, K, n] and returns the samples they
    complete, hop samples per frame. The first frame completes nothing by
    itself: every output sample needs the two frames that overlap it.
    """

    def __init__(self, cfg=AnalysisConfig()):
        self.cfg = cfg
        self.overlap = None

    def push(self, spec):
        check_spectrogram(spec, self.cfg)
        if spec.dim() != 3:
            raise ShapeError('expected one spectrogram [2, K, L], got {}'.format(
                    tuple(spec.shape)))
        if spec.shape[-1] == 0:
            return spec.new_zeros(0)
        cfg = self.cfg
        w = window(cfg, spec.dtype, spec.device)
        z = torch.complex(spec[0].contiguous(), spec[1].contiguous())
        frames = torch.fft.irfft(z, n=cfg.fft_size, dim=0) * w[:, None]
        heads, tails = frames[:cfg.hop], frames[cfg.hop:]
        if self.overlap is None:
            before, heads = tails[:, :-1], heads[:, 1:]
        else:
            before = torch.cat([self.overlap, tails[:, :-1]], dim=1)
        self.overlap = tails[:, -1:]
        envelope = w[cfg.hop:] ** 2 + w[:cfg.hop] ** 2
        return ((before + heads) / envelope[:, None]).t().reshape(-1)


def _power(spec):
    return spec[..., 0, :, :] ** 2 + spec[..., 1, :, :] ** 2


def magnitude(spec):
    """Per-bin magnitude [..., K, L]; differentiable at zero (gradient 0)."""
    power = _power(spec)
    nonzero = power > 0
    safe = torch.where(nonzero, power, torch.ones_like(power))
    return torch.where(nonzero, safe.sqrt(), torch.zeros_like(power))


def power_compress(spec, beta=C.COMPRESS_BETA):
    """Raise each bin's magnitude to beta, keeping its phase.

    Zero bins map to exactly zero.

    Raises:
        ValueError: beta is not positive and finite.
    """
    beta = float(beta)
    if not np.isfinite(beta) or beta <= 0:
        raise ValueError('compression exponent must be positive, got {}'.format(
                beta))
    check_spectrogram(spec)
    if beta == 1.0:
        return spec
    power = _power(spec)
    nonzero = power > 0
    safe = torch.where(nonzero, power, torch.ones_like(power))
    scale = torch.where(nonzero, safe ** ((beta - 1.0) / 2.0),
                        torch.zeros_like(power))
    return spec * scale.unsqueeze(-3)


## WAV files

_ACCEPTED_SUBTYPES = ('PCM_16', 'FLOAT')


def read_wav(path):
    """Read a mono 16 kHz WAV file as float32 samples.

    16-bit PCM and 32-bit float files are accepted. Multichannel input is an
    error; there is no silent downmix.

    Raises:
        DataError: unreadable file, wrong rate, wrong subtype or channels.
    """
    try:
        info = soundfile.info(path)
    except Exception as e:
        raise DataError('cannot read {}: {}'.format(path, e))
    if info.samplerate != C.SAMPLE_RATE:
        raise DataError('{}: sample rate {} Hz, expected {} Hz'.format(
                path, info.samplerate, C.SAMPLE_RATE))
    if info.channels != 1:
        raise DataError('{}: {} channels, expected mono'.format(
                path, info.channels))
    if info.subtype not in _ACCEPTED_SUBTYPES:
        raise DataError('{}: unsupported sample format {}'.format(
                path, info.subtype))
    samples, _ = soundfile.read(path, dtype='float32', always_2d=False)
    if samples.size == 0:
        raise DataError('{}: empty file'.format(path))
    if not np.all(np.isfinite(samples)):
        raise DataError('{}: non-finite samples'.format(path))
    return samples


def write_wav(path, samples, pcm16=False):
    """Write mono 16 kHz samples as 32-bit float (default) or 16-bit PCM."""
    if isinstance(samples, torch.Tensor):
        samples = samples.detach().cpu().numpy()
    samples = np.asarray(samples, dtype=np.float32)
    if samples.ndim != 1:
        raise ShapeError('expected mono samples, got shape {}'.format(
                samples.shape))
    if not np.all(np.isfinite(samples)):
        raise NumericError('refusing to write non-finite samples to {}'.format(
                path))
    subtype = 'PCM_16' if pcm16 else 'FLOAT'
    soundfile.write(path, samples, C.SAMPLE_RATE, subtype=subtype)
