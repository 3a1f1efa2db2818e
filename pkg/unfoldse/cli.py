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
unfoldse.cli

Command line interface, run as `python -m unfoldse <command>`.

Commands:

  train     train a model on manifest data, writing checkpoints and history
  enhance   enhance WAV files with a trained model (streaming by default)
  evaluate  score a model by SISNR on a manifest
  toygen    write a synthetic toy corpus and its manifest
  inspect   print parameter counts and an informal MAC count
  ablate    sweep unfolding steps and fusion modes

The options --config, --seed, --checkpoint, --q, --fusion, --out, --device,
--logfile and --verbose are accepted before or after the command name.
Configuration precedence is flags > config file > defaults. The default
device comes from the UNFOLDSE_DEVICE environment variable.

Exit status: 0 success, 1 usage or configuration error, 2 data error,
3 numeric failure.
"""

import logging
import logging.handlers
import os
import sys

from twisted.python import usage

from unfoldse import constants as C
from unfoldse.ablation import format_rows, run_ablation, select_entries
from unfoldse.checkpoint import load_checkpoint
from unfoldse.config import RunConfig
from unfoldse.data import load_manifest, toy_corpus_generate
from unfoldse.enhance import enhance_file
from unfoldse.errors import EXIT_OK, EXIT_USAGE, Error, UsageError
from unfoldse.evaluate import evaluate
from unfoldse.model import build_model, count_macs, parameter_report
from unfoldse.support import ensure_dir, format_table
from unfoldse.train import fit

logger = logging.getLogger('unfoldse.cli')


COMMON_PARAMETERS = [
    ['config', 'c', None, 'Run configuration file (ini).'],
    ['seed', 's', None, 'Random seed.', int],
    ['checkpoint', 'k', None, 'Checkpoint file.'],
    ['q', 'q', None, 'Number of unfolding steps.', int],
    ['fusion', 'f', None, 'Fusion mode (R, G or A).'],
    ['out', 'o', None, 'Output directory.'],
    ['device', 'd', None, 'Device (cpu, cuda[:N] or auto).'],
    ['logfile', 'l', None, 'Enable logging to a file.'],
]

COMMON_FLAGS = [['verbose', 'v', 'Enable debug output.']]


class CommandOptions(usage.Options):
    optParameters = COMMON_PARAMETERS
    optFlags = COMMON_FLAGS


class TrainOptions(CommandOptions):
    optParameters = [
        ['train-manifest', None, None, 'Training manifest.'],
        ['valid-manifest', None, None, 'Validation manifest.'],
        ['epochs', 'e', None, 'Number of epochs.', int],
        ['max-steps', None, None, 'Stop after this many optimizer steps.', int],
    ]


class EnhanceOptions(CommandOptions):
    optParameters = [
        ['block', 'b', 1600, 'Streaming block size in samples.', int],
    ]
    optFlags = [
        ['offline', None, 'Process each file in one pass.'],
        ['pcm16', None, 'Write 16-bit PCM instead of 32-bit float.'],
    ]

    def parseArgs(self, *inputs):
        if not inputs:
            raise usage.UsageError('no input files given')
        self['inputs'] = inputs


class EvaluateOptions(CommandOptions):
    optParameters = [
        ['manifest', 'm', None, 'Evaluation manifest.'],
        ['workers', 'w', None, 'Concurrent utterances.', int],
    ]


class ToygenOptions(CommandOptions):
    optParameters = [
        ['pairs', 'n', 20, 'Number of clean/noise pairs.', int],
        ['snrs', None, 'train', 'SNR grid of the mixtures (train or test).'],
    ]


class InspectOptions(CommandOptions):
    optFlags = [
        ['no-macs', None, 'Skip the MAC count.'],
    ]


class AblateOptions(CommandOptions):
    optParameters = [
        ['entries', None, None, 'Comma separated entries (default: all).'],
        ['train-manifest', None, None, 'Training manifest.'],
        ['valid-manifest', None, None, 'Validation manifest.'],
        ['epochs', 'e', 0, 'Training epochs per entry (0: size only).', int],
        ['max-steps', None, None, 'Optimizer steps per entry.', int],
    ]
    optFlags = [
        ['no-macs', None, 'Skip the MAC count.'],
    ]


class Options(CommandOptions):
    synopsis = 'python -m unfoldse [options] <command> [command options]'
    subCommands = [
        ['train', None, TrainOptions, 'Train a model.'],
        ['enhance', None, EnhanceOptions, 'Enhance WAV files.'],
        ['evaluate', None, EvaluateOptions, 'Evaluate SISNR on a manifest.'],
        ['toygen', None, ToygenOptions, 'Generate a toy corpus.'],
        ['inspect', None, InspectOptions, 'Report model size.'],
        ['ablate', None, AblateOptions, 'Sweep Q and fusion mode.'],
    ]

    def postOptions(self):
        if self.subCommand is None:
            raise usage.UsageError('no command given')


def merged(options):
    """Common options of the command, falling back to the global ones."""
    sub = options.subOptions
    result = {}
    for name in [p[0] for p in COMMON_PARAMETERS]:
        value = sub.get(name)
        result[name] = value if value is not None else options.get(name)
    result['verbose'] = bool(sub.get('verbose') or options.get('verbose'))
    return result


_handlers = []


def setup_logging(options):
    """Progress to stdout, optionally a rotating log file; --verbose for DEBUG."""
    log = logging.getLogger('unfoldse')
    for h in _handlers:
        log.removeHandler(h)
    del _handlers[:]
    stream_handler = logging.StreamHandler(sys.stdout)
    stream_handler.setFormatter(logging.Formatter('%(name)s: %(message)s'))
    _handlers.append(stream_handler)
    if options['logfile']:
        file_handler = logging.handlers.RotatingFileHandler(
                options['logfile'], maxBytes=800000, backupCount=5)
        formatter = logging.Formatter('%(asctime)s - %(name)s: %(message)s',
                                      datefmt='%Y-%m-%d %H:%M:%S')
        file_handler.setFormatter(formatter)
        _handlers.append(file_handler)
    for h in _handlers:
        log.addHandler(h)
    log.propagate = False
    if options['verbose']:
        log.setLevel(logging.DEBUG)
    else:
        log.setLevel(C.LOGLEVEL)


def load_config(opts, extra=None):
    """RunConfig from --config plus flag overrides."""
    cfg = RunConfig.from_file(opts['config']) if opts['config'] else RunConfig()
    overrides = {
        'run.seed': opts['seed'],
        'model.num_steps': opts['q'],
        'fusion.mode': opts['fusion'],
        'run.out': opts['out'],
        'run.device': opts['device'],
    }
    overrides.update(extra or {})
    return cfg.with_overrides(overrides)


def architecture_given(opts):
    return any(opts[k] is not None for k in ('config', 'q', 'fusion'))


def load_model(opts, cfg):
    """Model from --checkpoint, checked against explicit architecture flags."""
    if not opts['checkpoint']:
        raise UsageError('--checkpoint is required')
    expected = cfg.model_config() if architecture_given(opts) else None
    ckpt = load_checkpoint(opts['checkpoint'], expected, cfg.device)
    return ckpt.model.to(cfg.device)


def _need(value, what):
    if not value:
        raise UsageError('{} is required'.format(what))
    return value


## commands

def run_train(opts, sub):
    cfg = load_config(opts, {
        'data.train_manifest': sub['train-manifest'],
        'data.valid_manifest': sub['valid-manifest'],
        'train.epochs': sub['epochs'],
        'train.max_steps': sub['max-steps'],
    })
    train_set = load_manifest(_need(cfg.data.train_manifest, 'train manifest'),
                              cfg.data.segment_seconds, cfg.run.seed)
    val_set = load_manifest(_need(cfg.data.valid_manifest, 'valid manifest'),
                            cfg.data.segment_seconds, cfg.run.seed)
    out = ensure_dir(cfg.run.out)
    with open(os.path.join(out, 'run.ini'), 'w') as f:
        f.write(cfg.to_string())
    model = build_model(cfg.model_config(), seed=cfg.run.seed)
    result = fit(model, train_set, val_set, cfg.train_config(), out,
                 cfg.loss_weights(), cfg.analysis_config(), cfg.device)
    print('best checkpoint: {}'.format(result.best_path))


def run_enhance(opts, sub):
    cfg = load_config(opts)
    model = load_model(opts, cfg)
    out = ensure_dir(cfg.run.out)
    block = None if sub['offline'] else sub['block']
    for path in sub['inputs']:
        target = os.path.join(out, os.path.basename(path))
        enhance_file(model, path, target, block, sub['pcm16'],
                     cfg.analysis_config(), cfg.device)
        print(target)


def run_evaluate(opts, sub):
    cfg = load_config(opts, {'data.test_manifest': sub['manifest'],
                             'run.workers': sub['workers']})
    model = load_model(opts, cfg)
    dataset = load_manifest(_need(cfg.data.test_manifest, 'manifest'),
                            segment_seconds=None, seed=cfg.run.seed)
    report = evaluate(model, dataset, cfg.run.out, cfg.run.workers,
                      cfg.analysis_config(), cfg.device)
    with open(os.path.join(cfg.run.out, 'report.txt')) as f:
        sys.stdout.write(f.read())
    for key, value in report.summary:
        print('{} = {}'.format(key, value))


SNR_GRIDS = {'train': C.TRAIN_SNRS, 'test': C.TEST_SNRS}


def run_toygen(opts, sub):
    cfg = load_config(opts)
    if sub['snrs'] not in SNR_GRIDS:
        raise UsageError('unknown SNR grid {!r} (expected {})'.format(
                sub['snrs'], ' or '.join(sorted(SNR_GRIDS))))
    print(toy_corpus_generate(sub['pairs'], cfg.run.seed, cfg.run.out,
                              snrs=SNR_GRIDS[sub['snrs']]))


def run_inspect(opts, sub):
    cfg = load_config(opts)
    if opts['checkpoint']:
        model = load_model(opts, cfg)
    else:
        model = build_model(cfg.model_config(), seed=cfg.run.seed)
    report = parameter_report(model)
    rows = [(name, '{:,}'.format(n)) for name, n in report.components]
    sys.stdout.write(format_table(['component', 'parameters'], rows))
    print('total = {:,} ({:.2f} M)'.format(report.total, report.total / 1e6))
    print('per-step delta = {:,} ({:.2f} M)'.format(report.step_delta,
                                                     report.step_delta / 1e6))
    print('Q = {}'.format(report.num_steps))
    print('fusion = {}'.format(report.fusion))
    if not sub['no-macs']:
        macs = count_macs(model, analysis=cfg.analysis_config())
        print('MACs = {:.2f} G/s'.format(macs / 1e9))


def run_ablate(opts, sub):
    cfg = load_config(opts, {
        'data.train_manifest': sub['train-manifest'],
        'data.valid_manifest': sub['valid-manifest'],
        'train.epochs': sub['epochs'] or None,
        'train.max_steps': sub['max-steps'],
    })
    names = [n.strip() for n in (sub['entries'] or '').split(',') if n.strip()]
    try:
        entries = select_entries(names)
    except ValueError as e:
        raise UsageError(str(e))
    train_set = val_set = None
    if sub['epochs'] > 0:
        train_set = load_manifest(
                _need(cfg.data.train_manifest, 'train manifest'),
                cfg.data.segment_seconds, cfg.run.seed)
        val_set = load_manifest(
                _need(cfg.data.valid_manifest, 'valid manifest'),
                cfg.data.segment_seconds, cfg.run.seed)
    rows = run_ablation(cfg, entries, train_set, val_set, cfg.run.out,
                        with_macs=not sub['no-macs'])
    sys.stdout.write(format_rows(rows))


COMMANDS = {
    'train': run_train,
    'enhance': run_enhance,
    'evaluate': run_evaluate,
    'toygen': run_toygen,
    'inspect': run_inspect,
    'ablate': run_ablate,
}


def main(argv=None):
    """Parse arguments and run a command, returning the exit status."""
    options = Options()
    try:
        options.parseOptions(sys.argv[1:] if argv is None else argv)
    except usage.UsageError as e:
        sys.stderr.write('{}\n{}\n'.format(options, e))
        return EXIT_USAGE
    opts = merged(options)
    setup_logging(opts)
    try:
        COMMANDS[options.subCommand](opts, options.subOptions)
    except Error as e:
        logger.error('%s: %s', type(e).__name__, e)
        return e.code
    except ValueError as e:
        logger.error('%s', e)
        return EXIT_USAGE
    return EXIT_OK
