"""
unfoldse.checkpoint

Versioned checkpoint container.

A checkpoint is a torch-serialized dict holding only builtins and tensors:

    format           'unfoldse-checkpoint'
    version          container version
    model_config     ModelConfig.to_dict()
    train_config     TrainConfig as a dict, or None
    state_dict       model weights
    optimizer_state  optimizer state dict, or None
    step_sizes       the four step sizes as floats
    epoch            number of completed epochs
    history          list of per-epoch dicts
"""

import collections
import logging
import os

import torch

from unfoldse import constants as C
from unfoldse.errors import CheckpointError, ConfigError
from unfoldse.model import ModelConfig, UnfoldingEnhancer

logger = logging.getLogger('unfoldse.checkpoint')

Checkpoint = collections.namedtuple('Checkpoint',
        ['model', 'model_config', 'train_config', 'optimizer_state',
         'step_sizes', 'epoch', 'history'])


def save_checkpoint(path, model, train_config=None, optimizer=None, epoch=0,
                    history=()):
    """Write a checkpoint, replacing path atomically."""
    state = {
        'format': C.CHECKPOINT_FORMAT,
        'version': C.CHECKPOINT_VERSION,
        'model_config': model.cfg.to_dict(),
        'train_config': (dict(train_config._asdict())
                         if train_config is not None else None),
        'state_dict': model.state_dict(),
        'optimizer_state': (optimizer.state_dict()
                            if optimizer is not None else None),
        'step_sizes': model.step_sizes.values(),
        'epoch': int(epoch),
        'history': [dict(h._asdict()) if hasattr(h, '_asdict') else dict(h)
                    for h in history],
    }
    tmp = path + '.tmp'
    torch.save(state, tmp)
    os.replace(tmp, path)
    logger.debug('saved checkpoint %s (epoch %d)', path, epoch)
    return path


def _read(path, map_location):
    try:
        state = torch.load(path, map_location=map_location, weights_only=True)
    except FileNotFoundError:
        raise CheckpointError('checkpoint not found: {}'.format(path))
    except Exception as e:
        raise CheckpointError('corrupt checkpoint {}: {}'.format(path, e))
    if not isinstance(state, dict) or state.get('format') != C.CHECKPOINT_FORMAT:
        raise CheckpointError('{} is not a checkpoint file'.format(path))
    if state.get('version') != C.CHECKPOINT_VERSION:
        raise CheckpointError('{}: checkpoint version {} is not supported '
                              '(expected {})'.format(path, state.get('version'),
                                                     C.CHECKPOINT_VERSION))
    return state


def load_checkpoint(path, expected=None, map_location='cpu'):
    """Load a checkpoint and rebuild its model.

    Args:
        path (str): checkpoint file.
        expected (ModelConfig | None): architecture the caller requires;
            any differing field is an error.
        map_location: passed to torch.load.

    Returns:
        (Checkpoint) with train_config as a TrainConfig (or None).

    Raises:
        CheckpointError: missing, corrupt or incompatible file, or a
            mismatch with expected.
    """
    state = _read(path, map_location)
    try:
        cfg = ModelConfig.from_dict(state['model_config'])
    except (ConfigError, TypeError, KeyError) as e:
        raise CheckpointError('{}: invalid model config: {}'.format(path, e))
    if expected is not None:
        diffs = cfg.differences(expected)
        if diffs:
            raise CheckpointError('{}: model config mismatch in {}'.format(
                    path, ', '.join(
                        '{} (checkpoint {!r}, requested {!r})'.format(
                            name, _field(cfg, name), _field(expected, name))
                        for name in diffs)))
    model = UnfoldingEnhancer(cfg)
    try:
        model.load_state_dict(state['state_dict'])
    except (RuntimeError, KeyError) as e:
        raise CheckpointError('{}: weights do not match the model: {}'.format(
                path, e))
    train_config = _train_config(path, state.get('train_config'))
    return Checkpoint(model=model, model_config=cfg, train_config=train_config,
                      optimizer_state=state.get('optimizer_state'),
                      step_sizes=list(state.get('step_sizes', [])),
                      epoch=int(state.get('epoch', 0)),
                      history=list(state.get('history', [])))


def _train_config(path, values):
    # train imports this module
    from unfoldse.train import TrainConfig
    if values is None:
        return None
    try:
        return TrainConfig(**values)
    except (ConfigError, TypeError, ValueError) as e:
        raise CheckpointError('{}: invalid train config: {}'.format(path, e))


def _field(cfg, dotted):
    value = cfg
    for part in dotted.split('.'):
        value = getattr(value, part)
    return value
