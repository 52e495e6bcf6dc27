"""Allow ``python -m afr_match``."""
import sys

from afr_match.cli import main

sys.exit(main())
