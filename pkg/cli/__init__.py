"""
GPMorph Command Line
====================
`python main_cli.py <command> ...` with build-model, sample, posterior,
fit-surface, fit-image, eval-model, generalize, validate-nystrom,
project-error, analytic-spectrum and bounds.
"""

from .app import main
from .parser import build_parser
from .commands import COMMANDS

__all__ = ["main", "build_parser", "COMMANDS"]
