"""
unfoldse.data.manifest

Manifest-driven mixture datasets.

A manifest is a UTF-8 text file with one record per line:

    # clean | noise | snr_db | seed
    clean/utt001.wav | noise/babble.wav | -3 | 17

Blank lines and '#' comments are ignored. Relative paths are resolved
against the manifest's directory. The same clean/noise pair may appear more
than once (e.g. at different SNRs); every line is a distinct item.
"""

import collections
import logging
import os

import numpy as np
import torch.utils.data
from pyparsing import ParseException

from unfoldse import constants as C
from unfoldse import grammar
from unfoldse.data.mixing import segment_samples, synthesize_mixture
from unfoldse.errors import DataError
from unfoldse.frontend import read_wav

logger = logging.getLogger('unfoldse.data')


MixtureSpec = collections.namedtuple('MixtureSpec',
        ['clean_path', 'noise_path', 'snr_db', 'seed', 'row'])
MixtureSpec.__doc__ = """One manifest record; row is its 1-based line number."""


def parse_manifest(text, base_dir='.', check_files=True, source='<string>'):
    """Parse manifest text into a list of MixtureSpec records.

    Raises:
        DataError: malformed row or missing file (message names the row), or
            no records at all ("empty dataset").
    """
    specs = []
    for row, line in enumerate(text.splitlines(), start=1):
        try:
            grammar.blank.parseString(line)
            continue
        except ParseException:
            pass
        try:
            parsed = grammar.record.parseString(line)
        except ParseException as e:
            raise DataError('{}, row {}: malformed record {!r} ({})'.format(
                    source, row, line.strip(), e.msg))
        if not np.isfinite(parsed['snr_db']):
            raise DataError('{}, row {}: snr_db must be finite'.format(
                    source, row))
        paths = []
        for key in ('clean', 'noise'):
            p = os.path.normpath(os.path.join(base_dir, parsed[key]))
            if check_files and not os.path.isfile(p):
                raise DataError('{}, row {}: {} file not found: {}'.format(
                        source, row, key, p))
            paths.append(p)
        specs.append(MixtureSpec(paths[0], paths[1], float(parsed['snr_db']),
                                 int(parsed['seed']), row))
    if not specs:
        raise DataError('{}: empty dataset'.format(source))
    return specs


def format_manifest(specs, base_dir=None):
    """Inverse of parse_manifest; paths are made relative to base_dir."""
    lines = ['# clean | noise | snr_db | seed']
    for spec in specs:
        clean, noise = spec.clean_path, spec.noise_path
        if base_dir is not None:
            clean = os.path.relpath(clean, base_dir)
            noise = os.path.relpath(noise, base_dir)
        lines.append('{} | {} | {:g} | {}'.format(clean, noise, spec.snr_db,
                                                  spec.seed))
    return '\n'.join(lines) + '\n'


def load_manifest(path, segment_seconds=C.SEGMENT_SECONDS, seed=0):
    """Load a manifest file as a ManifestDataset.

    Args:
        path (str): manifest file.
        segment_seconds (float | None): training segment length; None or 0
            keeps whole utterances.
        seed (int): base seed of the per-epoch shuffle.
    """
    try:
        with open(path, encoding='utf-8') as f:
            text = f.read()
    except (IOError, OSError) as e:
        raise DataError('cannot read manifest {}: {}'.format(path, e))
    base_dir = os.path.dirname(os.path.abspath(path))
    specs = parse_manifest(text, base_dir, source=path)
    logger.info('loaded %d records from %s', len(specs), path)
    return ManifestDataset(specs, segment_seconds, seed)


class ManifestDataset(torch.utils.data.Dataset):
    """Mixtures synthesized on the fly from manifest records.

    Item i is a Mixture of float32 arrays. Synthesis of an item depends only
    on its record, so items may be produced concurrently and in any order.
    """

    def __init__(self, specs, segment_seconds=C.SEGMENT_SECONDS, seed=0):
        if not specs:
            raise DataError('empty dataset')
        self.specs = list(specs)
        self.segment_length = segment_samples(segment_seconds)
        self.seed = int(seed)

    def __len__(self):
        return len(self.specs)

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]

    def __getitem__(self, index):
        spec = self.specs[index]
        clean = read_wav(spec.clean_path)
        noise = read_wav(spec.noise_path)
        try:
            mix = synthesize_mixture(clean, noise, spec.snr_db,
                                     self.segment_length, rng=spec.seed)
        except DataError as e:
            raise DataError('row {}: {}'.format(spec.row, e.msg))
        return mix._replace(mixture=mix.mixture.astype(np.float32),
                            clean=mix.clean.astype(np.float32),
                            noise=mix.noise.astype(np.float32))

    def order(self, epoch):
        """Item order for an epoch; a pure function of (seed, epoch)."""
        rng = np.random.default_rng([self.seed, int(epoch)])
        return [int(i) for i in rng.permutation(len(self))]


class EpochSampler(torch.utils.data.Sampler):
    """Sampler yielding ManifestDataset.order(epoch); call set_epoch first."""

    def __init__(self, dataset, shuffle=True):
        self.dataset = dataset
        self.shuffle = shuffle
        self.epoch = 0

    def set_epoch(self, epoch):
        self.epoch = int(epoch)

    def __iter__(self):
        if self.shuffle:
            return iter(self.dataset.order(self.epoch))
        return iter(range(len(self.dataset)))

    def __len__(self):
        return len(self.dataset)
