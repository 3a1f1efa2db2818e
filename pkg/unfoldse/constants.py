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
unfoldse.constants

Important constants that show up throughout the code.
"""

import os

FUSION_MODES = ('R', 'G', 'A')
DEFAULT_FUSION = 'R'


def check_fusion_mode(mode):
    """Check that provided fusion mode is valid and convert to canonical form.

    Args:
        mode (string): One of 'R', 'G' or 'A' (case insensitive).
            'R' adds a learned complex residual to the speech estimate.
            'G' blends the speech estimate with the mixture minus the noise
            estimate using a learned per-bin weight. 'A' averages the two
            with fixed weights of one half.

    Returns (string): fusion mode in canonical (uppercase) form.

    Raises:
        ValueError: an invalid fusion mode was specified
    """
    canonical = str(mode).upper()
    if canonical not in FUSION_MODES:
        raise ValueError("fusion mode must be one of 'R', 'G' or 'A'. "
                         "got: '{}'".format(mode))
    return canonical


def check_device(device):
    """Check a device string, mapping 'auto' to cuda when available."""
    device = device.strip().lower()
    if device == 'auto':
        import torch
        return 'cuda' if torch.cuda.is_available() else 'cpu'
    if device != 'cpu' and not device.startswith('cuda'):
        raise ValueError("device must be 'cpu', 'cuda[:N]' or 'auto'. "
                         "got: '{}'".format(device))
    return device


# audio and analysis
SAMPLE_RATE = 16000
WINDOW_LENGTH = 320
HOP_LENGTH = 160
FFT_SIZE = 320
NUM_BINS = FFT_SIZE // 2 + 1

# unfolding
NUM_STEPS = 3
STEP_SIZE_INIT = 0.01

# loss
LOSS_GAMMA = 0.1
LOSS_ZETA = 1.0
COMPRESS_BETA = 0.5
SISNR_EPS = 1e-8

# data
SEGMENT_SECONDS = 3.0
TRAIN_SNRS = tuple(range(-5, 1))
TEST_SNRS = (-3, 0, 3)

# environment
DEVICE = check_device(os.environ.get('UNFOLDSE_DEVICE', 'cpu'))
LOGLEVEL = os.environ.get('UNFOLDSE_LOGLEVEL', 'INFO').upper()
SLOW_TESTS = bool(os.environ.get('UNFOLDSE_SLOW_TESTS'))

# checkpoint container
CHECKPOINT_FORMAT = 'unfoldse-checkpoint'
CHECKPOINT_VERSION = 1
