"""Run the pypef command line with ``python -m pypef``."""

import sys

from .cli import main

sys.exit(main())
