"""
unfoldse.ablation

Sweeps over the number of unfolding steps and the fusion mode.

The default grid covers Q = 0..6 with residual fusion (entries 1a-1g) and
the two alternative fusion modes at the default Q = 3 (2a: average,
2b: learned weighting). For every entry the model size and an informal MAC
count are reported; with training data and a positive epoch budget each
entry is also trained briefly and scored by validation SISNR.
"""

import collections
import logging
import os

import numpy as np

from unfoldse.model import build_model, count_macs, count_parameters
from unfoldse.support import ensure_dir, format_table
from unfoldse.train import fit, validate

logger = logging.getLogger('unfoldse.ablation')

DEFAULT_GRID = collections.OrderedDict([
    ('1a', (0, 'R')),
    ('1b', (1, 'R')),
    ('1c', (2, 'R')),
    ('1d', (3, 'R')),
    ('1e', (4, 'R')),
    ('1f', (5, 'R')),
    ('1g', (6, 'R')),
    ('2a', (3, 'A')),
    ('2b', (3, 'G')),
])

AblationRow = collections.namedtuple('AblationRow',
        ['entry', 'num_steps', 'fusion', 'params', 'macs', 'sisnr'])


def select_entries(names=None):
    """Grid entries by name; all of DEFAULT_GRID when names is empty."""
    if not names:
        return list(DEFAULT_GRID.items())
    unknown = [n for n in names if n not in DEFAULT_GRID]
    if unknown:
        raise ValueError('unknown ablation entries {}; choose from {}'.format(
                ', '.join(unknown), ', '.join(DEFAULT_GRID)))
    return [(n, DEFAULT_GRID[n]) for n in names]


def run_ablation(run_cfg, entries, train_set=None, val_set=None, out_dir=None,
                 with_macs=True):
    """Build (and optionally train) one model per entry.

    Args:
        run_cfg (RunConfig): base configuration; Q and fusion are replaced
            per entry.
        entries (list): (name, (num_steps, fusion)) pairs.
        train_set, val_set: datasets; training happens only when both are
            given and run_cfg.train.epochs > 0.
        out_dir (str | None): where per-entry runs and ablation.txt go.

    Returns:
        (list) AblationRow per entry; sisnr is None for untrained entries.
    """
    rows = []
    train = train_set is not None and val_set is not None
    for name, (num_steps, fusion) in entries:
        cfg = run_cfg.with_overrides({'model.num_steps': num_steps,
                                      'fusion.mode': fusion})
        model = build_model(cfg.model_config(), seed=cfg.run.seed)
        params = count_parameters(model)
        macs = count_macs(model, analysis=cfg.analysis_config()) \
            if with_macs else None
        score = None
        if train:
            run_dir = os.path.join(out_dir or 'ablation', name)
            fit(model, train_set, val_set, cfg.train_config(), run_dir,
                cfg.loss_weights(), cfg.analysis_config(), cfg.device)
            result = validate(model, val_set, cfg.loss_weights(),
                              cfg.analysis_config(), cfg.device)
            score = float(np.mean(result.sisnr))
        logger.info('%s: Q=%d fusion=%s params=%.2fM', name, num_steps,
                    fusion, params / 1e6)
        rows.append(AblationRow(name, num_steps, fusion, params, macs, score))
    if out_dir is not None:
        ensure_dir(out_dir)
        with open(os.path.join(out_dir, 'ablation.txt'), 'w') as f:
            f.write(format_rows(rows))
    return rows


def format_rows(rows):
    """Plain-text table with sizes in millions and MACs in G/s."""
    table = []
    for r in rows:
        table.append([r.entry, '{:.2f}'.format(r.params / 1e6),
                      '-' if r.macs is None else '{:.2f}'.format(r.macs / 1e9),
                      r.num_steps, r.fusion,
                      '-' if r.sisnr is None else '{:.2f}'.format(r.sisnr)])
    return format_table(['entry', 'params(M)', 'MACs(G/s)', 'Q', 'fusion',
                         'SISNR(dB)'], table)
