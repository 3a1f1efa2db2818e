"""
unfoldse.data

Mixture synthesis, manifest datasets, batching and the toy corpus.
"""

from unfoldse.data.batching import Batch, batch_spectra, collate, make_loader
from unfoldse.data.manifest import (EpochSampler, ManifestDataset, MixtureSpec,
                                    load_manifest, parse_manifest)
from unfoldse.data.mixing import Mixture, measure_snr, synthesize_mixture
from unfoldse.data.toygen import toy_corpus_generate
