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
unfoldse.errors

Exception classes to provide convenient, informative error and debugging
information. The code of each error class is also the exit status used by
the command line tools.
"""

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3


class Error(Exception):
    """unfoldse base error class.

    Captures an error code and message. If no message is given, the class
    docstring is used.
    """

    code = EXIT_USAGE

    def __init__(self, msg=None, code=None):
        self.msg = str(msg or self.__doc__)
        if code is not None:
            self.code = int(code)
        Exception.__init__(self, self.msg)

    def __str__(self):
        return self.msg

    def __repr__(self):
        return '%s(code=%r, msg=%r)' % (type(self).__name__, self.code, self.msg)

## Usage

class UsageError(Error):
    """Invalid command line usage."""
    code = EXIT_USAGE

class ConfigError(Error):
    """Invalid configuration."""
    code = EXIT_USAGE

class ShapeError(Error):
    """Array geometries do not agree."""
    code = EXIT_USAGE

## Data

class DataError(Error):
    """Invalid or unreadable data."""
    code = EXIT_DATA

class CheckpointError(Error):
    """Checkpoint could not be loaded."""
    code = EXIT_DATA

## Numerics

class NumericError(Error):
    """Non-finite values encountered."""
    code = EXIT_NUMERIC


def check_same_shape(*arrays, **names):
    """Raise ShapeError unless all arrays have the same shape.

    The optional keyword `what` names the operation in the message.
    """
    what = names.get('what', 'inputs')
    shapes = [tuple(a.shape) for a in arrays]
    if any(s != shapes[0] for s in shapes[1:]):
        raise ShapeError('{}: shape mismatch {}'.format(what, shapes))
