"""
unfoldse.evaluate

SISNR evaluation of a model over a manifest.

Utterances are enhanced concurrently by a thread pool; the model is only
read during inference. Results are written as a plain-text table
(report.txt) and a key = value file (metrics.txt).
"""

import collections
import logging
import os
from concurrent import futures

import numpy as np

from unfoldse.enhance import enhance_waveform
from unfoldse.errors import DataError
from unfoldse.frontend import AnalysisConfig
from unfoldse.loss import sisnr, sisnr_improvement
from unfoldse.support import ensure_dir, format_table, write_key_values

logger = logging.getLogger('unfoldse.evaluate')

UtteranceScore = collections.namedtuple('UtteranceScore',
        ['row', 'snr_db', 'sisnr_noisy', 'sisnr_enhanced', 'sisnri'])

EvaluationReport = collections.namedtuple('EvaluationReport',
        ['scores', 'summary'])


def score_item(model, dataset, index, analysis=AnalysisConfig(), device='cpu'):
    """Enhance dataset[index] and score it against its clean reference."""
    spec = dataset.specs[index]
    mix = dataset[index]
    enhanced = enhance_waveform(model, mix.mixture, analysis, device)
    return UtteranceScore(spec.row, spec.snr_db,
                         sisnr(mix.mixture, mix.clean),
                         sisnr(enhanced, mix.clean),
                         sisnr_improvement(enhanced, mix.mixture, mix.clean))


def summarize(scores):
    """Mean scores overall and per input SNR, as an ordered list of pairs."""
    summary = [('utterances', len(scores))]
    for field in ('sisnr_noisy', 'sisnr_enhanced', 'sisnri'):
        summary.append((field, float(np.mean([getattr(s, field)
                                              for s in scores]))))
    for snr in sorted(set(s.snr_db for s in scores)):
        subset = [s.sisnri for s in scores if s.snr_db == snr]
        summary.append(('sisnri@{:g}dB'.format(snr), float(np.mean(subset))))
    return summary


def evaluate(model, dataset, out_dir=None, workers=4,
             analysis=AnalysisConfig(), device='cpu'):
    """Score every item of dataset, optionally writing reports to out_dir.

    Returns:
        (EvaluationReport) per-utterance scores in manifest order and the
        summary pairs.
    """
    if len(dataset) == 0:
        raise DataError('empty dataset')
    model.eval()
    with futures.ThreadPoolExecutor(max_workers=max(1, int(workers))) as pool:
        scores = list(pool.map(
                lambda i: score_item(model, dataset, i, analysis, device),
                range(len(dataset))))
    summary = summarize(scores)
    if out_dir is not None:
        ensure_dir(out_dir)
        rows = [(s.row, '{:g}'.format(s.snr_db), '{:.2f}'.format(s.sisnr_noisy),
                 '{:.2f}'.format(s.sisnr_enhanced), '{:.2f}'.format(s.sisnri))
                for s in scores]
        table = format_table(['row', 'snr_db', 'noisy', 'enhanced', 'sisnri'],
                             rows)
        with open(os.path.join(out_dir, 'report.txt'), 'w') as f:
            f.write(table)
        write_key_values(os.path.join(out_dir, 'metrics.txt'),
                         [(k, '{:.4f}'.format(v) if isinstance(v, float) else v)
                          for k, v in summary])
    for key, value in summary:
        logger.info('%s = %s', key, value)
    return EvaluationReport(scores, summary)
