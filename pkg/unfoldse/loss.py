"""
unfoldse.loss

Training objective and the SISNR metric.

The per-pair loss compares power-compressed spectra with an RI term and a
magnitude term weighted equally. The unfolded loss sums the speech/noise
loss of every pre-consistency estimate with weight gamma and adds the loss
of the fused output with weight zeta.

Batched losses accept per-item valid frame counts so that padding never
contributes.
"""

import collections

import numpy as np
import torch

from unfoldse import constants as C
from unfoldse.errors import DataError, ShapeError, check_same_shape
from unfoldse.frontend import as_tensor, magnitude, power_compress


class LossWeights(collections.namedtuple('LossWeights',
        ['gamma', 'zeta', 'beta'])):
    """Per-step weight gamma, fusion weight zeta, compression exponent beta."""

    __slots__ = ()

    def __new__(cls, gamma=C.LOSS_GAMMA, zeta=C.LOSS_ZETA,
                beta=C.COMPRESS_BETA):
        self = super(LossWeights, cls).__new__(cls, float(gamma), float(zeta),
                                               float(beta))
        if not self.gamma > 0 or not self.zeta > 0:
            raise ValueError('loss weights must be positive: {}'.format(self))
        if not 0 < self.beta <= 1:
            raise ValueError('compression exponent must be in (0, 1], '
                             'got {}'.format(self.beta))
        return self


def frame_mask(lengths, frames, like):
    """[B, L] mask with ones on the first lengths[b] frames of item b."""
    lengths = torch.as_tensor(lengths, device=like.device)
    steps = torch.arange(frames, device=like.device)
    return (steps.unsqueeze(0) < lengths.unsqueeze(1)).to(like.dtype)


def compressed_spectral_loss_items(est, ref, beta=C.COMPRESS_BETA,
                                   lengths=None):
    """Per-item compressed RI + magnitude loss.

    Args:
        est, ref (tensor): spectra [B, 2, K, L].
        beta (float): compression exponent.
        lengths (sequence | tensor | None): valid frames per item.

    Returns:
        (tensor) losses of shape [B].
    """
    check_same_shape(est, ref, what='compressed_spectral_loss')
    if est.dim() != 4:
        raise ShapeError('expected batched spectra [B, 2, K, L], got '
                         '{}'.format(tuple(est.shape)))
    batch, _, bins, frames = est.shape
    est_c = power_compress(est, beta)
    ref_c = power_compress(ref, beta)
    ri = ((est_c - ref_c) ** 2).sum(dim=1)
    mag = (magnitude(est_c) - magnitude(ref_c)) ** 2
    if lengths is None:
        mask = torch.ones(batch, frames, dtype=est.dtype, device=est.device)
    else:
        mask = frame_mask(lengths, frames, est)
    mask = mask.unsqueeze(1)
    count = mask.sum(dim=(1, 2)) * bins
    ri_mse = (ri * mask).sum(dim=(1, 2)) / (2 * count)
    mag_mse = (mag * mask).sum(dim=(1, 2)) / count
    return 0.5 * ri_mse + 0.5 * mag_mse


def compressed_spectral_loss(est, ref, beta=C.COMPRESS_BETA, lengths=None):
    """Scalar compressed spectral loss averaged over items.

    Unbatched [2, K, L] inputs are treated as a batch of one.
    """
    if est.dim() == 3:
        est, ref = est.unsqueeze(0), ref.unsqueeze(0)
    return compressed_spectral_loss_items(est, ref, beta, lengths).mean()


def unfolded_training_loss_items(trace, s_ref, n_ref, weights=LossWeights(),
                                 lengths=None):
    """Per-item weighted loss over a full unfolding trace."""
    trace.check()

    def pair(est, ref):
        return compressed_spectral_loss_items(est, ref, weights.beta, lengths)

    total = weights.zeta * pair(trace.s_final, s_ref)
    for s_tilde, n_tilde in zip(trace.s_tilde, trace.n_tilde):
        total = total + weights.gamma * 0.5 * (pair(s_tilde, s_ref) +
                                               pair(n_tilde, n_ref))
    return total


def unfolded_training_loss(trace, s_ref, n_ref, weights=LossWeights(),
                           lengths=None):
    """Scalar training objective for a batch.

    Raises:
        ValueError: the trace is incomplete.
        ShapeError: reference and estimate shapes disagree.
    """
    return unfolded_training_loss_items(trace, s_ref, n_ref, weights,
                                        lengths).mean()


## Metrics

def sisnr(est, ref, eps=C.SISNR_EPS):
    """Scale-invariant SNR of est against ref in dB.

    Both signals are made zero-mean; the computation runs in float64.

    Raises:
        ShapeError: lengths differ.
        DataError: the reference is identically zero.
    """
    est = as_tensor(est).detach().double().reshape(-1)
    ref = as_tensor(ref).detach().double().reshape(-1)
    if est.shape != ref.shape:
        raise ShapeError('sisnr: length mismatch {} vs {}'.format(
                est.shape[0], ref.shape[0]))
    est = est - est.mean()
    ref = ref - ref.mean()
    ref_energy = torch.dot(ref, ref)
    if not ref_energy > 0:
        raise DataError('sisnr: reference signal is silent')
    target = (torch.dot(est, ref) / ref_energy) * ref
    error = est - target
    ratio = torch.dot(target, target) / (torch.dot(error, error) + eps)
    return float(10 * np.log10(float(ratio)))


def sisnr_improvement(enhanced, noisy, ref, eps=C.SISNR_EPS):
    """SISNR gain of the enhanced signal over the noisy input, in dB."""
    return sisnr(enhanced, ref, eps) - sisnr(noisy, ref, eps)
