"""Allow ``python -m ppo_amber``."""

import sys

from .cli import main

sys.exit(main())
