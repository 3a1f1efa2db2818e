"""
unfoldse.data.batching

Batch assembly. Waveforms are zero-padded to the longest item and carry
their valid lengths, in samples and in STFT frames, so that losses and
metrics can exclude the padding.
"""

import collections

import numpy as np
import torch
import torch.utils.data

from unfoldse.data.manifest import EpochSampler
from unfoldse.frontend import AnalysisConfig, stft

Batch = collections.namedtuple('Batch',
        ['mixture', 'clean', 'noise', 'lengths', 'frames'])
Batch.__doc__ = """Padded waveforms [B, T] plus valid samples and frames [B]."""


def pad_stack(signals):
    length = max(len(s) for s in signals)
    out = np.zeros((len(signals), length), dtype=np.float32)
    for i, s in enumerate(signals):
        out[i, :len(s)] = s
    return torch.from_numpy(out)


def collate(items, analysis=AnalysisConfig()):
    """Collate Mixture items into a Batch."""
    lengths = [len(item.mixture) for item in items]
    return Batch(mixture=pad_stack([item.mixture for item in items]),
                 clean=pad_stack([item.clean for item in items]),
                 noise=pad_stack([item.noise for item in items]),
                 lengths=torch.tensor(lengths, dtype=torch.long),
                 frames=torch.tensor([analysis.num_frames(n) for n in lengths],
                                     dtype=torch.long))


def batch_spectra(batch, analysis=AnalysisConfig(), device='cpu'):
    """STFTs (x, s, n) of a batch's mixture, clean and noise signals."""
    return tuple(stft(w.to(device), analysis)
                 for w in (batch.mixture, batch.clean, batch.noise))


def make_loader(dataset, batch_size, shuffle=True, num_workers=0):
    """DataLoader with a seeded per-epoch EpochSampler.

    Returns:
        (tuple) (loader, sampler); call sampler.set_epoch(e) before each epoch.
    """
    sampler = EpochSampler(dataset, shuffle=shuffle)
    loader = torch.utils.data.DataLoader(dataset, batch_size=int(batch_size),
                                         sampler=sampler, collate_fn=collate,
                                         num_workers=int(num_workers))
    return loader, sampler
