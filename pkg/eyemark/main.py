"""Main entry point for the eyemark command line

This script loads environment variables, parses the verb and its flags,
resolves the configuration, sets up logging and runs the verb.
"""

import sys
import logging
from logging.handlers import RotatingFileHandler
from typing import List, Optional

from os.path import join, dirname
from dotenv import load_dotenv
from pathlib import Path
from pydantic import ValidationError

from app import PROG, EyemarkApp

# Load environment variables defined in a .env file
dotenv_path = join(dirname(__file__), '.env')
load_dotenv(
    dotenv_path = dotenv_path,
    verbose = True
)

LOG_LEVELS = {
    "error": logging.ERROR,
    "info": logging.INFO,
    "debug": logging.DEBUG,
}

def setup_logging(level : str = "info", logfile : Optional[Path] = None):
    formatter = logging.Formatter(
        "%(asctime)s [%(levelname)s] %(name)s: %(message)s"
    )
    loglevel = LOG_LEVELS.get(level, logging.INFO)

    console_handler = logging.StreamHandler(sys.stderr)
    console_handler.setLevel(loglevel)
    console_handler.setFormatter(formatter)
    handlers : List[logging.Handler] = [console_handler]

    if logfile is not None:
        logfile.parent.mkdir(parents = True, exist_ok = True)
        file_handler = RotatingFileHandler(
            logfile,
            maxBytes = 5 * 1024 * 1024,
            backupCount = 5,
            encoding = "utf-8",
        )
        file_handler.setLevel(loglevel)
        file_handler.setFormatter(formatter)
        handlers.append(file_handler)

    logging.basicConfig(
        level = loglevel,
        handlers = handlers,
        force=True,
    )

def _config_error(e : Exception) -> str:
    if isinstance(e, ValidationError):
        first = e.errors()[0]
        where = ".".join(str(part) for part in first["loc"])
        return f"invalid configuration: {where}: {first['msg']}"
    return str(e)

def main(argv : Optional[List[str]] = None) -> int:
    """Runs one verb of the eyemark command line

    Args:
        argv (Optional[List[str]]): Arguments without the program name; ``sys.argv[1:]`` when omitted.

    Returns:
        int: Exit status code. 0 on success, 1 when the verb failed,
        2 on a usage or configuration error, 3 when training diverged.
    """
    argv = sys.argv[1:] if argv is None else list(argv)

    setup_logging("error")
    app = EyemarkApp()
    app.load_commands()
    parser = app.build_parser()

    if not argv:
        parser.print_usage(sys.stderr)
        return 2
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else 2

    try:
        config = app.load_config(args)
    except (ValidationError, ValueError, OSError) as e:
        print(f"{PROG}: error: {_config_error(e)}", file = sys.stderr)
        return 2

    setup_logging(config.log, config.out_dir / "eyemark.log")
    return app.run(args, config)

if __name__ == '__main__':
    sys.exit(main())
