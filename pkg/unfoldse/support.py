"""A collection of miscellaneous support functions.

Formatting helpers for the plain-text reports and small iteration utilities
shared by the command line tools.
"""

import os


def chunks(s, size):
    '''
    Break a sequence into subsequences of at most size.
    '''
    for i in range(0, len(s), size):
        yield s[i:i+size]


def format_table(header, rows):
    """Render rows as a fixed-width plain-text table.

    Each column is as wide as its widest cell; numbers should already be
    formatted as strings.
    """
    cells = [[str(c) for c in header]] + [[str(c) for c in r] for r in rows]
    widths = [max(len(row[i]) for row in cells) for i in range(len(header))]
    lines = []
    for n, row in enumerate(cells):
        lines.append('  '.join(c.rjust(w) for c, w in zip(row, widths)).rstrip())
        if n == 0:
            lines.append('  '.join('-' * w for w in widths))
    return '\n'.join(lines) + '\n'


def write_key_values(path, items):
    """Write (key, value) pairs as 'key = value' lines."""
    with open(path, 'w') as f:
        for key, value in items:
            f.write('{} = {}\n'.format(key, value))


def read_key_values(path):
    result = {}
    with open(path) as f:
        for line in f:
            key, sep, value = line.partition('=')
            if sep:
                result[key.strip()] = value.strip()
    return result


def ensure_dir(path):
    """Create a directory (and parents) if needed, returning the path."""
    os.makedirs(path, exist_ok=True)
    return path
