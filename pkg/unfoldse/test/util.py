import contextlib
import shutil
import tempfile

import numpy as np
import torch

from unfoldse.config import RunConfig
from unfoldse.data import load_manifest, toy_corpus_generate
from unfoldse.model import build_model

# A model small enough to train for a few steps inside a unit test.
SMALL_CONFIG = """
[encoder]
channels = 8
unet_depths = 1, 1, 0, 0, 0
unet_channels = 4

[stcn]
groups = 1
tcm_per_group = 2
dilations = 1, 2
width = 16
hidden = 8

[fusion]
channels = 4
width = 16
hidden = 8
groups = 1
dilations = 1, 2

[model]
num_steps = 1

[train]
epochs = 1
batch_size = 2
log_interval = 1

[data]
segment_seconds = 0.5

[run]
device = cpu
workers = 2
"""


@contextlib.contextmanager
def temp_directory():
    path = tempfile.mkdtemp()
    try:
        yield path
    finally:
        shutil.rmtree(path)


def small_run_config(**overrides):
    """Small RunConfig; keyword names use '__' for '.', e.g. model__num_steps."""
    cfg = RunConfig.from_string(SMALL_CONFIG)
    return cfg.with_overrides(dict((k.replace('__', '.'), v)
                                   for k, v in overrides.items()))


def small_model_config(num_steps=1, fusion='R'):
    return small_run_config(model__num_steps=num_steps,
                            fusion__mode=fusion).model_config()


def small_model(num_steps=1, fusion='R', seed=0, double=False):
    model = build_model(small_model_config(num_steps, fusion), seed=seed)
    return model.double() if double else model


def random_spectrogram(frames=20, batch=1, bins=161, seed=0,
                       dtype=torch.float64):
    g = torch.Generator().manual_seed(seed)
    return torch.randn(batch, 2, bins, frames, generator=g, dtype=dtype)


def random_waveform(seconds, seed=0, scale=0.1):
    rng = np.random.default_rng(seed)
    return (scale * rng.standard_normal(int(seconds * 16000))).astype(np.float32)


def toy_dataset(path, n_pairs=2, seed=0, segment_seconds=0.5):
    """Generate a toy corpus under path and load it."""
    manifest = toy_corpus_generate(n_pairs, seed, path)
    return load_manifest(manifest, segment_seconds, seed)


def weights_snapshot(model):
    return dict((k, v.detach().clone()) for k, v in model.state_dict().items())


def same_weights(a, b):
    return a.keys() == b.keys() and all(torch.equal(a[k], b[k]) for k in a)
