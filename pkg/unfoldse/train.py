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
unfoldse.train

Training harness: Adam with a validation-driven plateau schedule, global
gradient norm clipping, best/last checkpoints and a per-epoch history file.

A run directory receives

    history.tsv   one line per epoch
    best.ckpt     checkpoint with the lowest validation loss so far
    last.ckpt     checkpoint after the most recent epoch

If the training loss becomes non-finite the run stops with a NumericError;
the checkpoints written by earlier epochs are left untouched.
"""

import collections
import logging
import math
import os
import time

import numpy as np
import torch

from unfoldse import constants as C
from unfoldse.checkpoint import save_checkpoint
from unfoldse.constants import check_fusion_mode
from unfoldse.data.batching import batch_spectra, collate, make_loader
from unfoldse.errors import ConfigError, DataError, NumericError
from unfoldse.frontend import AnalysisConfig, istft
from unfoldse.loss import (LossWeights, sisnr, sisnr_improvement,
                           unfolded_training_loss,
                           unfolded_training_loss_items)
from unfoldse.support import ensure_dir

logger = logging.getLogger('unfoldse.train')


class TrainConfig(collections.namedtuple('TrainConfig',
        ['epochs', 'batch_size', 'lr', 'adam_beta1', 'adam_beta2',
         'plateau_patience', 'lr_factor', 'grad_clip', 'max_steps',
         'num_workers', 'amp', 'log_interval', 'seed', 'num_steps',
         'fusion'])):
    """Optimization recipe.

    max_steps of 0 means no limit; grad_clip of 0 disables clipping.
    """

    __slots__ = ()

    def __new__(cls, epochs=60, batch_size=8, lr=5e-4, adam_beta1=0.9,
                adam_beta2=0.999, plateau_patience=2, lr_factor=0.5,
                grad_clip=5.0, max_steps=0, num_workers=0, amp=False,
                log_interval=50, seed=0, num_steps=C.NUM_STEPS,
                fusion=C.DEFAULT_FUSION):
        self = super(TrainConfig, cls).__new__(
                cls, int(epochs), int(batch_size), float(lr), float(adam_beta1),
                float(adam_beta2), int(plateau_patience), float(lr_factor),
                float(grad_clip), int(max_steps), int(num_workers), bool(amp),
                int(log_interval), int(seed), int(num_steps),
                check_fusion_mode(fusion))
        for name in ('epochs', 'batch_size', 'lr', 'plateau_patience',
                     'log_interval'):
            if not getattr(self, name) > 0:
                raise ConfigError('train.{} must be positive, got {}'.format(
                        name, getattr(self, name)))
        if not 0 < self.lr_factor < 1:
            raise ConfigError('train.lr_factor must be in (0, 1), got '
                              '{}'.format(self.lr_factor))
        for name in ('adam_beta1', 'adam_beta2'):
            if not 0 <= getattr(self, name) < 1:
                raise ConfigError('train.{} must be in [0, 1), got {}'.format(
                        name, getattr(self, name)))
        for name in ('grad_clip', 'max_steps', 'num_workers', 'num_steps'):
            if getattr(self, name) < 0:
                raise ConfigError('train.{} must be >= 0, got {}'.format(
                        name, getattr(self, name)))
        return self


class PlateauSchedule(object):
    """Multiply the learning rate by factor after `patience` bad epochs.

    An epoch is bad when its validation loss is not strictly below the best
    seen so far. The bad-epoch counter resets after every reduction and
    after every improvement.
    """

    def __init__(self, lr, patience=2, factor=0.5):
        self.lr = float(lr)
        self.patience = int(patience)
        self.factor = float(factor)
        self.best = math.inf
        self.bad_epochs = 0

    def step(self, val_loss):
        """Record one validation loss and return the learning rate to use."""
        if val_loss < self.best:
            self.best = val_loss
            self.bad_epochs = 0
        else:
            self.bad_epochs += 1
            if self.bad_epochs >= self.patience:
                self.lr *= self.factor
                self.bad_epochs = 0
                logger.info('validation loss plateaued; lr -> %.3g', self.lr)
        return self.lr


def lr_after(val_losses, lr, patience=2, factor=0.5):
    """Learning rate after a validation loss history (pure function)."""
    schedule = PlateauSchedule(lr, patience, factor)
    for loss in val_losses:
        schedule.step(loss)
    return schedule.lr


HistoryEntry = collections.namedtuple('HistoryEntry',
        ['epoch', 'train_loss', 'val_loss', 'val_sisnr', 'val_sisnri', 'lr',
         'steps', 'seconds'])

ValidationResult = collections.namedtuple('ValidationResult',
        ['loss', 'sisnr', 'sisnri'])
ValidationResult.__doc__ = """Mean loss plus per-utterance SISNR and SISNRi."""

FitResult = collections.namedtuple('FitResult',
        ['best_path', 'last_path', 'history'])


def write_history(path, history):
    with open(path, 'w') as f:
        f.write('\t'.join(HistoryEntry._fields) + '\n')
        for h in history:
            f.write('\t'.join(
                    '{:.6g}'.format(v) if isinstance(v, float) else str(v)
                    for v in h) + '\n')


def read_history(path):
    with open(path) as f:
        header = f.readline().rstrip('\n').split('\t')
        return [dict(zip(header, line.rstrip('\n').split('\t')))
                for line in f if line.strip()]


def validate(model, val_set, weights=LossWeights(), analysis=AnalysisConfig(),
             device='cpu'):
    """Evaluation-mode pass over val_set, one utterance at a time.

    Weights are not modified and the model's training flag is restored.

    Returns:
        (ValidationResult) mean unfolded loss over items, per-item SISNR of
        the fused output and its improvement over the mixture.

    Raises:
        DataError: val_set is empty.
    """
    if len(val_set) == 0:
        raise DataError('empty validation set')
    was_training = model.training
    model.eval()
    losses, scores, gains = [], [], []
    try:
        with torch.no_grad():
            for i in range(len(val_set)):
                batch = collate([val_set[i]], analysis)
                x, s, n = batch_spectra(batch, analysis, device)
                trace = model(x)
                loss = unfolded_training_loss_items(trace, s, n, weights)
                losses.append(float(loss[0]))
                length = min(int(batch.lengths[0]),
                             analysis.max_length(x.shape[-1]))
                enhanced = istft(trace.s_final[0], analysis, length).cpu()
                clean = batch.clean[0, :length]
                scores.append(sisnr(enhanced, clean))
                gains.append(sisnr_improvement(
                        enhanced, batch.mixture[0, :length], clean))
    finally:
        model.train(was_training)
    return ValidationResult(float(np.mean(losses)), scores, gains)


def _optimizer(model, cfg):
    return torch.optim.Adam(model.parameters(), lr=cfg.lr,
                            betas=(cfg.adam_beta1, cfg.adam_beta2))


def fit(model, train_set, val_set, cfg=TrainConfig(), out_dir='run',
        weights=LossWeights(), analysis=AnalysisConfig(), device='cpu'):
    """Train model and write checkpoints and history to out_dir.

    Returns:
        (FitResult)

    Raises:
        ConfigError: the model has a different number of steps or fusion
            mode than cfg.
        DataError: a dataset is empty.
        NumericError: the training or validation loss became non-finite.
    """
    if model.cfg.num_steps != cfg.num_steps or model.cfg.fusion != cfg.fusion:
        raise ConfigError('model (Q={}, fusion={}) does not match training '
                          'config (Q={}, fusion={})'.format(
                                  model.cfg.num_steps, model.cfg.fusion,
                                  cfg.num_steps, cfg.fusion))
    if len(train_set) == 0:
        raise DataError('empty training set')
    if len(val_set) == 0:
        raise DataError('empty validation set')
    ensure_dir(out_dir)
    best_path = os.path.join(out_dir, 'best.ckpt')
    last_path = os.path.join(out_dir, 'last.ckpt')
    history_path = os.path.join(out_dir, 'history.tsv')

    torch.manual_seed(cfg.seed)
    model.to(device)
    optimizer = _optimizer(model, cfg)
    schedule = PlateauSchedule(cfg.lr, cfg.plateau_patience, cfg.lr_factor)
    use_amp = cfg.amp and str(device).startswith('cuda')
    scaler = torch.amp.GradScaler('cuda', enabled=use_amp)
    loader, sampler = make_loader(train_set, cfg.batch_size, shuffle=True,
                                  num_workers=cfg.num_workers)
    history = []
    steps = 0
    best = math.inf
    logger.info('training %d epochs on %d items (validation %d), lr %.3g',
                cfg.epochs, len(train_set), len(val_set), cfg.lr)
    for epoch in range(1, cfg.epochs + 1):
        start = time.time()
        sampler.set_epoch(epoch)
        model.train()
        total, count = 0.0, 0
        for batch in loader:
            x, s, n = batch_spectra(batch, analysis, device)
            with torch.autocast(device_type=torch.device(device).type,
                                enabled=use_amp):
                trace = model(x)
            loss = unfolded_training_loss(trace, s, n, weights,
                                          lengths=batch.frames.to(device))
            if not bool(torch.isfinite(loss)):
                logger.error('non-finite training loss at step %d', steps + 1)
                raise NumericError('training diverged at epoch {} step {}: '
                                   'loss is {}'.format(epoch, steps + 1,
                                                       float(loss)))
            optimizer.zero_grad()
            scaler.scale(loss).backward()
            if cfg.grad_clip > 0:
                scaler.unscale_(optimizer)
                torch.nn.utils.clip_grad_norm_(model.parameters(),
                                               cfg.grad_clip)
            scaler.step(optimizer)
            scaler.update()
            steps += 1
            total += float(loss.detach())
            count += 1
            if steps % cfg.log_interval == 0:
                logger.debug('epoch %d step %d loss %.5f', epoch, steps,
                             float(loss.detach()))
            if cfg.max_steps and steps >= cfg.max_steps:
                break
        result = validate(model, val_set, weights, analysis, device)
        if not math.isfinite(result.loss):
            logger.error('non-finite validation loss at epoch %d', epoch)
            raise NumericError('validation diverged at epoch {}: loss is {}'
                               .format(epoch, result.loss))
        lr = optimizer.param_groups[0]['lr']
        entry = HistoryEntry(epoch, total / max(count, 1), result.loss,
                             float(np.mean(result.sisnr)),
                             float(np.mean(result.sisnri)), lr, steps,
                             time.time() - start)
        history.append(entry)
        new_lr = schedule.step(result.loss)
        for group in optimizer.param_groups:
            group['lr'] = new_lr
        save_checkpoint(last_path, model, cfg, optimizer, epoch, history)
        if result.loss < best:
            best = result.loss
            save_checkpoint(best_path, model, cfg, optimizer, epoch, history)
        write_history(history_path, history)
        logger.info('epoch %d: train %.5f  valid %.5f  SISNR %.2f dB '
                    '(SISNRi %.2f dB)  lr %.3g', epoch, entry.train_loss,
                    entry.val_loss, entry.val_sisnr, entry.val_sisnri, lr)
        if cfg.max_steps and steps >= cfg.max_steps:
            logger.info('reached %d steps', steps)
            break
    return FitResult(best_path, last_path, history)
