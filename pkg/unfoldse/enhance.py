"""
unfoldse.enhance

Waveform-level inference, offline and streaming.

Every block of the model is causal, so an enhanced frame only depends on
mixture frames up to its own. StreamingEnhancer exploits this: the model
runs once per frame, as soon as the frame is complete, with its causal
layers carrying their context from one block to the next. Its output
matches enhance_waveform on the whole signal up to floating point rounding.
"""

import logging

import numpy as np
import torch
import torch.nn.functional as F

from unfoldse.blocks.layers import streaming
from unfoldse.frontend import (AnalysisConfig, IstftStream, StftStream,
                               check_waveform, istft, read_wav, stft,
                               write_wav)
from unfoldse.support import chunks

logger = logging.getLogger('unfoldse.enhance')


def model_dtype(model):
    """Floating point type of the model's parameters."""
    for p in model.parameters():
        return p.dtype
    return torch.float32


def enhance_waveform(model, w, analysis=AnalysisConfig(), device='cpu'):
    """Enhance a mono waveform offline.

    The signal is zero-padded to a whole number of hops before analysis so
    that every input sample can be resynthesized.

    Returns:
        (ndarray) float32 enhanced samples, same length as w.

    Raises:
        DataError: w is shorter than one window or not finite.
    """
    w = check_waveform(w, analysis).to(model_dtype(model)).reshape(-1)
    n = w.shape[0]
    padded = -(-n // analysis.hop) * analysis.hop
    w = F.pad(w, (0, padded - n)).to(device)
    was_training = model.training
    model.eval()
    try:
        with torch.no_grad():
            s_final = model(stft(w, analysis).unsqueeze(0)).s_final
            out = istft(s_final[0], analysis, padded)[:n]
    finally:
        model.train(was_training)
    return out.float().cpu().numpy()


class StreamingEnhancer(object):
    """Block-wise causal enhancement.

    Feed samples with process(); each call returns the newly finalized
    enhanced samples. flush() returns the rest and resets the stream.
    Each mixture frame goes through the model exactly once, so the cost of
    a call is proportional to the new samples and the memory held between
    calls does not grow with the stream.
    """

    def __init__(self, model, analysis=AnalysisConfig(), device='cpu'):
        self.model = model
        self.analysis = analysis
        self.device = device
        self.reset()

    def reset(self):
        self.analyzer = StftStream(self.analysis, model_dtype(self.model))
        self.synthesizer = IstftStream(self.analysis)
        self.context = {}
        self.emitted = 0
        self.frames = 0

    def _enhance_frames(self, spec):
        n = spec.shape[-1]
        if n == 0:
            return np.zeros(0, dtype=np.float32)
        was_training = self.model.training
        self.model.eval()
        try:
            with torch.no_grad(), streaming(self.model, self.context):
                s_final = self.model(spec.unsqueeze(0).to(self.device)).s_final
        finally:
            self.model.train(was_training)
        self.frames += n
        out = self.synthesizer.push(s_final[0]).float().cpu().numpy()
        self.emitted += len(out)
        return out

    def process(self, samples):
        """Add mixture samples; returns the enhanced samples they finalize.

        Raises:
            DataError: samples are not finite.
        """
        return self._enhance_frames(self.analyzer.push(samples))

    def flush(self):
        """End the stream, returning the remaining enhanced samples.

        Raises:
            DataError: the stream was shorter than one window.
        """
        received = self.analyzer.received
        try:
            if not received:
                return np.zeros(0, dtype=np.float32)
            hop = self.analysis.hop
            padding = -(-received // hop) * hop - received
            out = self._enhance_frames(self.analyzer.finish(padding))
            return out[:len(out) - padding]
        finally:
            self.reset()


def enhance_stream(model, w, block_samples, analysis=AnalysisConfig(),
                   device='cpu'):
    """Run StreamingEnhancer over w in blocks of block_samples."""
    if block_samples < 1:
        raise ValueError('block size must be positive, got {}'.format(
                block_samples))
    stream = StreamingEnhancer(model, analysis, device)
    w = np.asarray(w, dtype=np.float32).reshape(-1)
    out = [stream.process(block) for block in chunks(w, block_samples)]
    out.append(stream.flush())
    return np.concatenate(out)


def enhance_file(model, in_path, out_path, block_samples=None, pcm16=False,
                 analysis=AnalysisConfig(), device='cpu'):
    """Enhance one WAV file; streams in blocks when block_samples is given."""
    w = read_wav(in_path)
    if block_samples:
        out = enhance_stream(model, w, block_samples, analysis, device)
    else:
        out = enhance_waveform(model, w, analysis, device)
    write_wav(out_path, out, pcm16=pcm16)
    logger.info('enhanced %s -> %s (%.2f s)', in_path, out_path,
                len(w) / float(analysis.sample_rate))
    return out
