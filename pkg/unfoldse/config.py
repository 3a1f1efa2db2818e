"""
unfoldse.config

Declarative run configuration read from ini files.

Every option has a default; a file only needs to list what it changes.
See default.ini in this package for the documented full set. Precedence is
command line flags > config file > defaults.

Example:

    [model]
    num_steps = 3

    [fusion]
    mode = R

    [train]
    lr = 5e-4
    epochs = 60

    [data]
    train_manifest = toy/train/manifest.txt
"""

import collections
import io
import os

from configparser import ConfigParser, Error as ConfigParserError

from unfoldse import constants as C
from unfoldse.blocks import EncoderConfig, FuseNetConfig, STCNConfig
from unfoldse.errors import ConfigError
from unfoldse.frontend import AnalysisConfig
from unfoldse.loss import LossWeights
from unfoldse.model import ModelConfig
from unfoldse.train import TrainConfig


def _ints(s):
    return tuple(int(v) for v in s.replace(',', ' ').split())


def _bool(s):
    value = s.strip().lower()
    if value in ('1', 'yes', 'true', 'on'):
        return True
    if value in ('0', 'no', 'false', 'off'):
        return False
    raise ValueError('not a boolean: {!r}'.format(s))


def _path(s):
    return s.strip() or None


def _str(s):
    return s.strip()


def _format(value):
    if isinstance(value, tuple):
        return ', '.join(str(v) for v in value)
    if isinstance(value, bool):
        return 'true' if value else 'false'
    if value is None:
        return ''
    return str(value)


# section -> [(option, parser, default)]
SCHEMA = collections.OrderedDict([
    ('analysis', [
        ('window_length', int, C.WINDOW_LENGTH),
        ('hop', int, C.HOP_LENGTH),
        ('fft_size', int, C.FFT_SIZE),
        ('sample_rate', int, C.SAMPLE_RATE),
    ]),
    ('encoder', [
        ('channels', int, 64),
        ('conv_kernel', _ints, (1, 3)),
        ('conv_stride', _ints, (1, 2)),
        ('unet_depths', _ints, (4, 3, 2, 1, 0)),
        ('unet_kernel', _ints, (2, 3)),
        ('unet_channels', int, 32),
    ]),
    ('stcn', [
        ('groups', int, 2),
        ('tcm_per_group', int, 4),
        ('kernel', int, 3),
        ('dilations', _ints, (1, 2, 5, 9)),
        ('width', int, 256),
        ('hidden', int, 32),
        ('causal', _bool, True),
    ]),
    ('fusion', [
        ('mode', _str, C.DEFAULT_FUSION),
        ('channels', int, 32),
        ('kernel', _ints, (2, 3)),
        ('layers', int, 5),
        ('width', int, 256),
        ('hidden', int, 64),
        ('groups', int, 3),
        ('dilations', _ints, (1, 2, 4, 8, 16, 32)),
    ]),
    ('model', [
        ('num_steps', int, C.NUM_STEPS),
        ('eta_init', float, C.STEP_SIZE_INIT),
    ]),
    ('loss', [
        ('gamma', float, C.LOSS_GAMMA),
        ('zeta', float, C.LOSS_ZETA),
        ('beta', float, C.COMPRESS_BETA),
    ]),
    ('train', [
        ('epochs', int, 60),
        ('batch_size', int, 8),
        ('lr', float, 5e-4),
        ('adam_beta1', float, 0.9),
        ('adam_beta2', float, 0.999),
        ('plateau_patience', int, 2),
        ('lr_factor', float, 0.5),
        ('grad_clip', float, 5.0),
        ('max_steps', int, 0),
        ('num_workers', int, 0),
        ('amp', _bool, False),
        ('log_interval', int, 50),
    ]),
    ('data', [
        ('train_manifest', _path, None),
        ('valid_manifest', _path, None),
        ('test_manifest', _path, None),
        ('segment_seconds', float, C.SEGMENT_SECONDS),
    ]),
    ('run', [
        ('seed', int, 0),
        ('device', _str, C.DEVICE),
        ('out', _str, 'runs'),
        ('workers', int, 4),
    ]),
])

_PATH_OPTIONS = ('train_manifest', 'valid_manifest', 'test_manifest')

Sections = collections.OrderedDict(
        (name, collections.namedtuple(name.capitalize() + 'Section',
                                      [opt for opt, _, _ in options]))
        for name, options in SCHEMA.items())


class RunConfig(object):
    """Complete configuration of a run, one namedtuple per ini section.

    Attributes are named after sections, e.g. cfg.train.lr or
    cfg.model.num_steps.
    """

    def __init__(self, values=None):
        values = values or {}
        for section, options in SCHEMA.items():
            given = values.get(section, {})
            fields = collections.OrderedDict(
                    (opt, given.get(opt, default))
                    for opt, _, default in options)
            setattr(self, section, Sections[section](**fields))
        self.check()

    def values(self):
        return collections.OrderedDict((s, getattr(self, s)._asdict())
                                       for s in SCHEMA)

    def __eq__(self, other):
        return isinstance(other, RunConfig) and self.values() == other.values()

    def __ne__(self, other):
        return not self == other

    def __repr__(self):
        return 'RunConfig({!r})'.format(dict(self.values()))

    @classmethod
    def from_string(cls, conf, base_dir=None):
        """Parse ini text; relative manifest paths are resolved against base_dir."""
        if isinstance(conf, bytes):
            conf = conf.decode('utf-8')
        scp = ConfigParser()
        try:
            scp.read_file(io.StringIO(conf))
        except ConfigParserError as e:
            raise ConfigError('malformed config: {}'.format(e))
        values = {}
        for section in scp.sections():
            if section not in SCHEMA:
                raise ConfigError('unknown config section [{}]'.format(section))
            parsers = dict((opt, parse) for opt, parse, _ in SCHEMA[section])
            for option in scp.options(section):
                if option not in parsers:
                    raise ConfigError('unknown option {} in [{}]'.format(
                            option, section))
                raw = scp.get(section, option, raw=True)
                try:
                    value = parsers[option](raw)
                except ValueError as e:
                    raise ConfigError('bad value for {}.{}: {!r} ({})'.format(
                            section, option, raw, e))
                if option in _PATH_OPTIONS and value and base_dir:
                    value = os.path.normpath(os.path.join(base_dir, value))
                values.setdefault(section, {})[option] = value
        return cls(values)

    @classmethod
    def from_file(cls, path):
        try:
            with open(path, encoding='utf-8') as f:
                text = f.read()
        except (IOError, OSError) as e:
            raise ConfigError('cannot read config {}: {}'.format(path, e))
        return cls.from_string(text, os.path.dirname(os.path.abspath(path)))

    def to_string(self):
        lines = []
        for section, values in self.values().items():
            lines.append('[{}]'.format(section))
            for option, value in values.items():
                lines.append('{} = {}'.format(option, _format(value)))
            lines.append('')
        return '\n'.join(lines)

    def with_overrides(self, overrides):
        """Copy with 'section.option' -> value overrides; None values are skipped."""
        values = self.values()
        for key, value in overrides.items():
            if value is None:
                continue
            section, _, option = key.partition('.')
            if section not in values or option not in values[section]:
                raise ConfigError('unknown config option {}'.format(key))
            values[section][option] = value
        return RunConfig(values)

    def check(self):
        """Build every derived config once, converting failures to ConfigError."""
        try:
            self.analysis_config()
            self.model_config()
            self.train_config()
            self.loss_weights()
            C.check_device(self.run.device)
        except ValueError as e:
            raise ConfigError(str(e))
        if self.data.segment_seconds < 0:
            raise ConfigError('data.segment_seconds must be >= 0')
        return self

    ## derived configurations

    def analysis_config(self):
        return AnalysisConfig(**self.analysis._asdict())

    def model_config(self):
        fusion = self.fusion._asdict()
        mode = fusion.pop('mode')
        stcn = STCNConfig(**self.stcn._asdict()).check()
        fusion_net = FuseNetConfig(**fusion)
        fusion_net.stcn().check()
        return ModelConfig(num_steps=self.model.num_steps, fusion=mode,
                           num_bins=self.analysis_config().num_bins,
                           eta_init=self.model.eta_init,
                           encoder=EncoderConfig(**self.encoder._asdict()),
                           stcn=stcn,
                           fusion_net=fusion_net)

    def train_config(self):
        return TrainConfig(seed=self.run.seed,
                           num_steps=self.model.num_steps,
                           fusion=self.fusion.mode,
                           **self.train._asdict())

    def loss_weights(self):
        return LossWeights(**self.loss._asdict())

    @property
    def device(self):
        return C.check_device(self.run.device)
