"""
unfoldse.data.toygen

Synthetic toy corpus for desk-scale experiments.

Clean signals are speech-like: harmonic tones whose pitch and loudness are
modulated at syllabic rates and which pause now and then. Noise signals are
bursts of band-filtered noise over a low broadband floor. Everything is drawn
from a single numpy generator, so a seed fully determines the corpus.
"""

import logging
import os

import numpy as np
import scipy.signal

from unfoldse import constants as C
from unfoldse.data.manifest import MixtureSpec, format_manifest
from unfoldse.errors import DataError
from unfoldse.frontend import write_wav

logger = logging.getLogger('unfoldse.data')

MANIFEST_NAME = 'manifest.txt'


def _fade(n, rate=C.SAMPLE_RATE, ms=10):
    ramp = min(n // 2, int(rate * ms / 1000))
    env = np.ones(n)
    if ramp:
        r = np.linspace(0.0, 1.0, ramp)
        env[:ramp] = r
        env[n - ramp:] = r[::-1]
    return env


def speech_like(rng, seconds, rate=C.SAMPLE_RATE):
    """Harmonic tone with vibrato, syllabic amplitude modulation and pauses."""
    n = int(seconds * rate)
    t = np.arange(n) / float(rate)
    f0 = rng.uniform(100.0, 250.0)
    vibrato = 1.0 + 0.06 * np.sin(2 * np.pi * rng.uniform(2.0, 6.0) * t +
                                  rng.uniform(0, 2 * np.pi))
    phase = 2 * np.pi * np.cumsum(f0 * vibrato) / rate
    harmonics = int(rng.integers(6, 16))
    tilt = rng.uniform(0.6, 0.9)
    w = sum(tilt ** h * np.sin(h * phase + rng.uniform(0, 2 * np.pi))
            for h in range(1, harmonics + 1))
    syllables = 0.55 + 0.45 * np.sin(2 * np.pi * rng.uniform(3.0, 6.0) * t +
                                     rng.uniform(0, 2 * np.pi))
    w = w * syllables
    # one to three pauses of 50-300 ms
    gate = np.ones(n)
    for _ in range(int(rng.integers(1, 4))):
        length = int(rng.uniform(0.05, 0.3) * rate)
        start = int(rng.integers(0, max(1, n - length)))
        gate[start:start + length] = 0.0
    gate = np.convolve(gate, np.ones(80) / 80.0, mode='same')
    w = w * gate * _fade(n, rate)
    return 0.5 * w / np.max(np.abs(w))


def noise_like(rng, seconds, rate=C.SAMPLE_RATE):
    """Band-filtered noise bursts over a broadband floor."""
    n = int(seconds * rate)
    w = 0.05 * rng.standard_normal(n)
    for _ in range(int(rng.integers(3, 9))):
        length = int(rng.uniform(0.1, 0.8) * rate)
        start = int(rng.integers(0, max(1, n - length)))
        low = rng.uniform(100.0, 3000.0)
        high = min(low * rng.uniform(1.5, 4.0), 0.45 * rate)
        sos = scipy.signal.butter(4, [low, high], btype='bandpass', fs=rate,
                                  output='sos')
        burst = scipy.signal.sosfilt(sos, rng.standard_normal(length))
        end = min(n, start + length)
        w[start:end] += rng.uniform(0.3, 1.0) * (burst * _fade(length, rate))[
                :end - start]
    return 0.5 * w / np.max(np.abs(w))


def toy_corpus_generate(n_pairs, seed, out_dir, snrs=C.TRAIN_SNRS,
                        clean_seconds=(2.0, 4.0), noise_seconds=4.0):
    """Write a toy corpus of n_pairs clean/noise WAVs and its manifest.

    Returns:
        (str) path of the manifest.

    Raises:
        ValueError: n_pairs < 1.
        DataError: out_dir cannot be written.
    """
    n_pairs = int(n_pairs)
    if n_pairs < 1:
        raise ValueError('n_pairs must be >= 1, got {}'.format(n_pairs))
    rng = np.random.default_rng(int(seed))
    out_dir = os.path.abspath(out_dir)
    specs = []
    try:
        for d in ('clean', 'noise'):
            os.makedirs(os.path.join(out_dir, d), exist_ok=True)
        for i in range(n_pairs):
            clean_path = os.path.join(out_dir, 'clean', 'clean_{:04d}.wav'.format(i))
            noise_path = os.path.join(out_dir, 'noise', 'noise_{:04d}.wav'.format(i))
            write_wav(clean_path, speech_like(rng, rng.uniform(*clean_seconds)))
            write_wav(noise_path, noise_like(rng, noise_seconds))
            specs.append(MixtureSpec(clean_path, noise_path,
                                     float(rng.choice(snrs)),
                                     int(rng.integers(2 ** 31)), i + 1))
        manifest = os.path.join(out_dir, MANIFEST_NAME)
        with open(manifest, 'w', encoding='utf-8') as f:
            f.write(format_manifest(specs, out_dir))
    except (IOError, OSError, RuntimeError) as e:
        raise DataError('cannot write toy corpus to {}: {}'.format(out_dir, e))
    logger.info('wrote %d toy pairs to %s', n_pairs, out_dir)
    return manifest
