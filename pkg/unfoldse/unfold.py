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
unfoldse.unfold

The unfolded forward stream. Starting from an initial parameter set, each of
Q steps estimates prior gradients, takes one gradient descent step on the
MAP objective, reconstructs speech and noise and projects the pair back onto
the mixture:

    F          = encoder(X)
    omega[0]   = initializer(F, X)
    omega[q]   = omega[q-1] - eta * (quad_grad + prior_grad)
    S~, N~     = G_S X + R_S, G_N X + R_N
    S^, N^     = consistency_project(S~, N~, X)

The fused output is computed from the last pre-consistency pair.
"""

import collections

import torch
import torch.nn as nn

from unfoldse import constants as C
from unfoldse.errors import ConfigError, NumericError, check_same_shape
from unfoldse.signal_model import (PARAMETER_NAMES, ParameterSet,
                                   check_geometry, quadratic_gradients,
                                   reconstruct)


class StepSizes(nn.Module):
    """Trainable descent step sizes, one per parameter, shared by all steps."""

    def __init__(self, init=C.STEP_SIZE_INIT):
        super(StepSizes, self).__init__()
        self.eta_g_s = nn.Parameter(torch.tensor(float(init)))
        self.eta_g_n = nn.Parameter(torch.tensor(float(init)))
        self.eta_r_s = nn.Parameter(torch.tensor(float(init)))
        self.eta_r_n = nn.Parameter(torch.tensor(float(init)))

    def as_tuple(self):
        return (self.eta_g_s, self.eta_g_n, self.eta_r_s, self.eta_r_n)

    def values(self):
        """Current step sizes as python floats, in parameter order."""
        return [float(p.detach()) for p in self.as_tuple()]

    def load_values(self, values):
        with torch.no_grad():
            for p, v in zip(self.as_tuple(), values):
                p.fill_(float(v))


class UnfoldTrace(collections.namedtuple('UnfoldTrace',
        ['omegas', 's_tilde', 'n_tilde', 's_hat', 'n_hat', 's_final'])):
    """Everything computed by one unfolded forward pass.

    The per-step fields are lists indexed by q = 0..Q; s_tilde/n_tilde are
    the estimates before the consistency projection, s_hat/n_hat after it.
    """

    __slots__ = ()

    @property
    def num_steps(self):
        return len(self.omegas) - 1

    def check(self):
        """Raise ValueError unless every per-step list covers q = 0..Q."""
        lengths = [len(getattr(self, name)) for name in self._fields[:-1]]
        if not lengths[0] or any(n != lengths[0] for n in lengths):
            raise ValueError('incomplete trace: per-step lengths {}'.format(
                    dict(zip(self._fields[:-1], lengths))))
        if self.s_final is None:
            raise ValueError('incomplete trace: missing fused output')
        return self


def _step_values(eta):
    if isinstance(eta, StepSizes):
        return eta.as_tuple()
    return tuple(eta)


def _check_finite(grads, kind):
    for name, g in zip(PARAMETER_NAMES, grads):
        if not bool(torch.isfinite(g).all()):
            raise NumericError('non-finite {} gradient for {}'.format(kind, name))


def clamp_gain(g):
    """Clamp a gain to [0, 1] in value while passing gradients straight through."""
    return g.detach().clamp(0.0, 1.0) + (g - g.detach())


def gdm_step(omega, prior_grads, quad_grads, eta, clamp=True):
    """One gradient descent step on all four parameters.

    Args:
        omega (ParameterSet): current parameters.
        prior_grads (GradientSet): learned prior-gradient terms.
        quad_grads (GradientSet): gradients of the quadratic data term.
        eta (StepSizes | sequence): step sizes in parameter order.
        clamp (bool): clamp the updated gains to [0, 1].

    Returns:
        (ParameterSet) the updated parameters.

    Raises:
        NumericError: a gradient contains non-finite values.
        ShapeError: geometries disagree.
    """
    for name, p, dp, dq in zip(PARAMETER_NAMES, omega, prior_grads, quad_grads):
        check_same_shape(p, dp, dq, what='gdm_step {}'.format(name))
    _check_finite(prior_grads, 'prior')
    _check_finite(quad_grads, 'quadratic')
    updated = [p - e * (dq + dp) for p, dp, dq, e in
               zip(omega, prior_grads, quad_grads, _step_values(eta))]
    if clamp:
        updated[0] = clamp_gain(updated[0])
        updated[1] = clamp_gain(updated[1])
    return ParameterSet(*updated)


def consistency_project(s_tilde, n_tilde, x):
    """Split the mixture mismatch equally between speech and noise.

    Returns:
        (tuple) (s_hat, n_hat) with s_hat + n_hat == x.
    """
    check_same_shape(s_tilde, n_tilde, x, what='consistency_project')
    half = (x - s_tilde - n_tilde) / 2
    s_hat = s_tilde + half
    # remainder form keeps s_hat + n_hat == x to rounding
    n_hat = x - s_hat
    return s_hat, n_hat


def unfold_forward(x, model, num_steps=None):
    """Run the full unfolded forward stream.

    Args:
        x (tensor): mixture spectrogram [B, 2, K, L].
        model: object providing feature_extract, initialize_parameters,
            gradient_estimate, step_sizes, fuse and num_estimators.
        num_steps (int | None): Q; defaults to the model's configured count.

    Returns:
        (UnfoldTrace)

    Raises:
        ValueError: num_steps is negative.
        ConfigError: num_steps exceeds the model's per-step estimators.
    """
    if num_steps is None:
        num_steps = model.num_estimators
    num_steps = int(num_steps)
    if num_steps < 0:
        raise ValueError('number of steps must be >= 0, got {}'.format(
                num_steps))
    if num_steps > model.num_estimators:
        raise ConfigError('{} unfolding steps requested but the model has '
                          'only {} step estimators'.format(
                                  num_steps, model.num_estimators))
    f = model.feature_extract(x)
    omega = model.initialize_parameters(f, x)
    check_geometry(omega, x)
    s_tilde, n_tilde = reconstruct(omega, x)
    s_hat, n_hat = consistency_project(s_tilde, n_tilde, x)
    trace = UnfoldTrace([omega], [s_tilde], [n_tilde], [s_hat], [n_hat], None)
    for q in range(1, num_steps + 1):
        prior = model.gradient_estimate(f, s_hat, n_hat, q - 1)
        quad = quadratic_gradients(omega, x)
        omega = gdm_step(omega, prior, quad, model.step_sizes)
        s_tilde, n_tilde = reconstruct(omega, x)
        s_hat, n_hat = consistency_project(s_tilde, n_tilde, x)
        for name, value in zip(trace._fields[:-1],
                               (omega, s_tilde, n_tilde, s_hat, n_hat)):
            getattr(trace, name).append(value)
    s_final = model.fuse(x, s_tilde, n_tilde)
    return trace._replace(s_final=s_final)
