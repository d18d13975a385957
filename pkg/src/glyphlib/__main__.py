"""Module entry point: python -m glyphlib ..."""

import sys

from .cli import main

sys.exit(main())
