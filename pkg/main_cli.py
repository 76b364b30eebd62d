"""
GPMorph - Gaussian Process Morphable Models
===========================================
Command-line entry point. Run `python main_cli.py --help` for the commands.
"""

import sys

from cli import main


if __name__ == "__main__":
    sys.exit(main())
