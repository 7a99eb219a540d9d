"""Logging setup: `[tag] message` lines on stderr."""
import logging
import sys

_CONFIGURED = False


def setup_logging(verbose: bool = False) -> None:
    """Install the stderr handler once; later calls only adjust the level."""
    global _CONFIGURED
    root = logging.getLogger()
    root.setLevel(logging.DEBUG if verbose else logging.INFO)
    if _CONFIGURED:
        return
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("[%(name)s] %(message)s"))
    root.addHandler(handler)
    _CONFIGURED = True


def get_logger(tag: str) -> logging.Logger:
    return logging.getLogger(tag)
