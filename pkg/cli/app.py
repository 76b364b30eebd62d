"""
Entry point: parse, configure logging and threads, dispatch, and map errors
to exit codes (0 success, 1 usage, 2 numerical failure).
"""

import logging
import sys
from typing import Optional, Sequence

from config import RuntimeConfig, validate_config
from errors import GPMorphError, UsageError
from .commands import COMMANDS
from .parser import build_parser

logger = logging.getLogger("GPMorph.CLI")

LOG_FORMAT = "%(asctime)s [%(name)s] %(levelname)s: %(message)s"


def _report(code: int, message: str) -> int:
    print(f"ERROR[{code}]: {message}", file=sys.stderr)
    return code


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as e:
        return _report(e.exit_code, str(e))
    except SystemExit as e:
        # --help
        return int(e.code or 0)

    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format=LOG_FORMAT, stream=sys.stderr)
    try:
        if args.threads is not None:
            RuntimeConfig.set_threads(args.threads)
        validate_config()
    except ValueError as e:
        return _report(UsageError.exit_code, str(e))

    logger.debug(f"Running {args.command} with seed {args.seed} on {RuntimeConfig.THREADS} threads")
    try:
        return COMMANDS[args.command](args)
    except GPMorphError as e:
        return _report(e.exit_code, str(e))
    except OSError as e:
        return _report(UsageError.exit_code, str(e))
