"""
Run the unfoldse command line tools.

This file makes it possible to run the package as an executable module:

`python -m unfoldse`
"""

import sys

import unfoldse.cli

sys.exit(unfoldse.cli.main())
