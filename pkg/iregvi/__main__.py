"""Allow ``python -m iregvi``."""

import sys

from .cli import main

sys.exit(main())
