"""``python -m vn1``."""

import sys

from .cli import main

sys.exit(main())
