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
unfoldse.grammar

Grammars for parsing manifest records with pyparsing.

A record is one line of the form

    clean_path | noise_path | snr_db | seed    # optional comment

Paths may contain spaces but not '|' or '#'. snr_db is a decimal number
(optionally signed, with exponent), seed a non-negative integer.
"""

from pyparsing import (Literal, Optional, Regex, Word, nums, restOfLine,
                       stringEnd)

toInt = lambda s, l, t: [int(t[0])]
toFloat = lambda s, l, t: [float(t[0])]
strip = lambda s, l, t: [t[0].strip()]

bar = Literal('|').suppress()
comment = Literal('#') + restOfLine

path = Regex(r'[^|#\s][^|#]*').setParseAction(strip)
number = Regex(r'[+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?').setParseAction(toFloat)
integer = Word(nums).setParseAction(toInt)

record = (path.setResultsName('clean') + bar +
          path.setResultsName('noise') + bar +
          number.setResultsName('snr_db') + bar +
          integer.setResultsName('seed') +
          Optional(comment).suppress() + stringEnd)

blank = Optional(comment) + stringEnd
