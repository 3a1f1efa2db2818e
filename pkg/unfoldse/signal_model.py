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
unfoldse.signal_model

Gain/residual decomposition of speech and noise and the quadratic data term
of the joint MAP objective.

Each source is modelled as a real gain applied to the mixture plus a complex
residual, S = G_S X + R_S and N = G_N X + R_N. The data term is

    T = || (1 - G_S - G_N) X - R_S - R_N ||_F^2

with the error covariance taken as identity. Complex quantities are carried
as stacked real/imaginary planes, and complex gradients as independent
gradients of those planes.

Gains have shape [..., K, L]; spectra and residuals [..., 2, K, L].
"""

import collections

import torch

from unfoldse.errors import ShapeError


ParameterSet = collections.namedtuple('ParameterSet',
                                      ['g_s', 'g_n', 'r_s', 'r_n'])
ParameterSet.__doc__ = """The four optimization targets of one unfolding step.

g_s, g_n are real gains [..., K, L]; r_s, r_n complex residuals
[..., 2, K, L].
"""

GradientSet = collections.namedtuple('GradientSet',
                                     ['d_g_s', 'd_g_n', 'd_r_s', 'd_r_n'])
GradientSet.__doc__ = """Gradients with the geometry of a ParameterSet."""

PARAMETER_NAMES = ParameterSet._fields


def zero_gradients(omega):
    """A GradientSet of zeros matching omega."""
    return GradientSet(*[torch.zeros_like(p) for p in omega])


def check_geometry(omega, x):
    """Raise ShapeError unless omega and x describe the same [K, L] grid."""
    if x.dim() < 3 or x.shape[-3] != 2:
        raise ShapeError('expected spectrogram [..., 2, K, L], got {}'.format(
                tuple(x.shape)))
    spec_shape = tuple(x.shape)
    gain_shape = spec_shape[:-3] + spec_shape[-2:]
    for name, p in zip(PARAMETER_NAMES, omega):
        expected = gain_shape if name.startswith('g') else spec_shape
        if tuple(p.shape) != expected:
            raise ShapeError('{} has shape {}, expected {}'.format(
                    name, tuple(p.shape), expected))


def apply_gain(g, x):
    """Scale both RI planes of x by the real gain g."""
    return g.unsqueeze(-3) * x


def reconstruct_source(g, r, x):
    """Source estimate g * x + r.

    Args:
        g (tensor): gain [..., K, L].
        r (tensor): residual [..., 2, K, L].
        x (tensor): mixture [..., 2, K, L].

    Raises:
        ShapeError: the shapes do not agree.
    """
    if tuple(r.shape) != tuple(x.shape) or \
            tuple(g.shape) != tuple(x.shape[:-3]) + tuple(x.shape[-2:]):
        raise ShapeError('reconstruct_source: gain {} residual {} mixture '
                         '{}'.format(tuple(g.shape), tuple(r.shape),
                                     tuple(x.shape)))
    return apply_gain(g, x) + r


def reconstruct(omega, x):
    """Speech and noise estimates (S, N) for a parameter set."""
    return (reconstruct_source(omega.g_s, omega.r_s, x),
            reconstruct_source(omega.g_n, omega.r_n, x))


def quadratic_residual(omega, x):
    """Reconstruction error E = (1 - g_s - g_n) x - r_s - r_n."""
    check_geometry(omega, x)
    return apply_gain(1.0 - omega.g_s - omega.g_n, x) - omega.r_s - omega.r_n


def quadratic_term(omega, x):
    """T = sum |E|^2 over bins and frames, one value per leading index."""
    e = quadratic_residual(omega, x)
    return (e ** 2).sum(dim=(-3, -2, -1))


def quadratic_gradients(omega, x):
    """Analytic gradients of T with respect to the four parameters.

    d_g_s = d_g_n = -2 Re(conj(X) E), d_r_s = d_r_n = -2 E. Both sources enter
    the data term symmetrically, so the pairs are identical.

    Returns:
        (GradientSet)
    """
    e = quadratic_residual(omega, x)
    d_g = -2.0 * (x * e).sum(dim=-3)
    d_r = -2.0 * e
    return GradientSet(d_g, d_g, d_r, d_r)
