"""
unfoldse.data.mixing

Noisy mixture synthesis at a controlled SNR.

Power is measured over the full selected segment (no voice activity
weighting). Noise shorter than the segment is tiled starting at a random
circular offset; longer noise is cropped at a random offset. All arithmetic
runs in float64.
"""

import collections

import numpy as np

from unfoldse import constants as C
from unfoldse.errors import DataError

SILENCE_POWER = 1e-10

Mixture = collections.namedtuple('Mixture',
                                 ['mixture', 'clean', 'noise', 'snr_db'])


def signal_power(w):
    w = np.asarray(w, dtype=np.float64)
    return float(np.mean(w * w)) if w.size else 0.0


def measure_snr(clean, noise):
    """10 log10(P_clean / P_noise) in dB."""
    return 10.0 * np.log10(signal_power(clean) / signal_power(noise))


def fit_length(w, length, rng):
    """Tile or crop w to length samples starting at a random offset."""
    w = np.asarray(w, dtype=np.float64)
    if len(w) >= length:
        offset = int(rng.integers(len(w) - length + 1))
        return w[offset:offset + length]
    offset = int(rng.integers(len(w)))
    return w[(offset + np.arange(length)) % len(w)]


def synthesize_mixture(clean, noise, snr_db, segment_length=None, rng=None):
    """Mix clean speech and noise at snr_db over a common segment.

    Args:
        clean (array): clean speech samples.
        noise (array): noise samples, looped or cropped to the segment.
        snr_db (float): requested SNR in dB, finite.
        segment_length (int | None): segment size in samples. Clean speech
            longer than this is cropped at a random offset; None keeps the
            whole clean signal.
        rng (numpy.random.Generator | int | None): randomness for offsets.

    Returns:
        (Mixture) float64 arrays with mixture == clean + noise; clean is
        computed as mixture - noise so the identity holds bit for bit.

    Raises:
        ValueError: snr_db is not finite.
        DataError: an input is empty or its segment is silent.
    """
    snr_db = float(snr_db)
    if not np.isfinite(snr_db):
        raise ValueError('snr_db must be finite, got {}'.format(snr_db))
    rng = np.random.default_rng(rng)
    clean = np.asarray(clean, dtype=np.float64).reshape(-1)
    noise = np.asarray(noise, dtype=np.float64).reshape(-1)
    if not clean.size or not noise.size:
        raise DataError('cannot mix empty signals')
    length = len(clean)
    if segment_length is not None and length > segment_length:
        length = int(segment_length)
        start = int(rng.integers(len(clean) - length + 1))
        clean = clean[start:start + length]
    noise = fit_length(noise, length, rng)
    p_clean = signal_power(clean)
    p_noise = signal_power(noise)
    if p_clean < SILENCE_POWER:
        raise DataError('clean segment is silent (power {:.3g})'.format(p_clean))
    if p_noise < SILENCE_POWER:
        raise DataError('noise segment is silent (power {:.3g})'.format(p_noise))
    scale = np.sqrt(p_clean / (p_noise * 10.0 ** (snr_db / 10.0)))
    noise_scaled = noise * scale
    mixture = clean + noise_scaled
    return Mixture(mixture, mixture - noise_scaled, noise_scaled, snr_db)


def segment_samples(seconds, sample_rate=C.SAMPLE_RATE):
    """Segment length in samples, or None for whole utterances."""
    if seconds is None or seconds <= 0:
        return None
    return int(round(seconds * sample_rate))
