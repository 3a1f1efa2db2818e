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
unfoldse: deep-unfolded MAP speech enhancement for python.
"""

from unfoldse.model import ModelConfig, UnfoldingEnhancer, build_model


def load(path, map_location='cpu'):
    """Load a trained model from a checkpoint file.

    Args:
        path (str): checkpoint written by training.
        map_location: device to place tensors on.

    Returns:
        (UnfoldingEnhancer): the model, in evaluation mode.
    """
    from unfoldse.checkpoint import load_checkpoint
    model = load_checkpoint(path, map_location=map_location).model
    return model.eval()
