"""Unit tests for pypef"""

import functools
import logging
import logging.handlers
import os
import unittest

import numpy as np

from pypef.cli import LOG_FORMAT

FIXTURES_DIR = os.path.join(os.path.dirname(os.path.abspath(__file__)), 'fixtures')


def fixture_path(name):
    """Absolute path of a file in the fixtures directory."""

    return os.path.join(FIXTURES_DIR, name)


@functools.lru_cache(maxsize=None)
def attach_test_log():
    """Send pypef debug logging to PYPEF_LOG_DIR/pypef-tests.log, once per run.

    Optimizer and sampler traces are only kept when the variable is set.
    """

    log_dir = os.environ.get('PYPEF_LOG_DIR')
    if not log_dir:
        return None

    handler = logging.handlers.RotatingFileHandler(
        os.path.join(log_dir, 'pypef-tests.log'), maxBytes=1_000_000, backupCount=3)
    handler.setLevel(logging.DEBUG)
    handler.setFormatter(logging.Formatter(LOG_FORMAT))

    log = logging.getLogger('pypef')
    log.setLevel(logging.DEBUG)
    log.addHandler(handler)

    return handler


class BasePEFTestCase(unittest.TestCase):
    """Shared setup for pypef tests: the optional log file and array assertions."""

    def __init__(self, *args, **kwargs):

        unittest.TestCase.__init__(self, *args, **kwargs)

        attach_test_log()

    def assertAllClose(self, first, second, tol, msg=None): #pylint: disable=invalid-name
        """Fail unless two arrays agree entrywise within ``tol``."""

        gap = float(np.max(np.abs(np.asarray(first, dtype=float) - np.asarray(second, dtype=float))))
        self.assertLessEqual(gap, tol, msg or f"Arrays differ by {gap}")
