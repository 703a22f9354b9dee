"""
Logging setup for command-line runs.
"""
import logging
import sys

LOG_FORMAT = '%(asctime)s %(levelname)s %(name)s: %(message)s'


def configure_logging(level='INFO', stream=None):
    """
    Send log records at `level` and above to stderr (or `stream`).

    Replaces handlers installed by an earlier call so repeated CLI invocations
    in one process do not duplicate output.
    """
    root = logging.getLogger()
    for handler in list(root.handlers):
        root.removeHandler(handler)
    logging.basicConfig(level=getattr(logging, str(level).upper()), stream=stream or sys.stderr, format=LOG_FORMAT)
    logging.getLogger('numba').setLevel(logging.WARNING)
    return root
