"""Run the command line with `python -m misplaced_repair`."""
import sys

from .cli import main

sys.exit(main())
