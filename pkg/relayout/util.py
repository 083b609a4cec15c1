#
# Copyright 2026 by the ReLayout developers
# All rights reserved
#

import os
import shutil
import tempfile
import contextlib
import hashlib
import json
import time
from functools import wraps
import logging
import numpy as np


# stream ids for make_rng; every stochastic component draws from its own
# stream so that changing one component never shifts another
STREAM_INIT = 1
STREAM_CONTENT = 2
STREAM_FRAGMENT = 3
STREAM_QA = 4
STREAM_SHUFFLE = 5
STREAM_MASK = 6
STREAM_DROPOUT = 7
STREAM_SPLIT = 8


@contextlib.contextmanager
def in_temp_dir():
    """Context manager to run in temporary directory"""
    try:
        cwd = os.getcwd()
        tmpdir = tempfile.mkdtemp()
        os.chdir(tmpdir)
        yield

    finally:
        os.chdir(cwd)
        shutil.rmtree(tmpdir)


def log_timing(dest_logger):
    def wrap(func):
        @wraps(func)
        def wrapper(*args, **kwds):
            t1 = time.time()
            res = func(*args, **kwds)
            t2 = time.time()
            dest_logger.debug('%s took %0.3f ms',
                              func.__name__, (t2 - t1) * 1000.0)
            return res
        return wrapper
    return wrap


def configure_logging(debug=False, filename=None):
    """
    Install a single handler on the ``relayout`` logger.

    :param debug: log at DEBUG instead of INFO
    :param filename: append to this file instead of writing to stderr
    :return: the installed handler

    """
    level = logging.DEBUG if debug else logging.INFO
    fmt = '%(asctime)s %(levelname)s %(name)s: %(message)s'
    datefmt = '%Y-%m-%d %H:%M:%S'

    relayout_logger = logging.getLogger('relayout')
    # drop anything installed by an earlier call so that
    # messages are not duplicated
    for handler in list(relayout_logger.handlers):
        if not isinstance(handler, logging.NullHandler):
            relayout_logger.removeHandler(handler)

    if filename is None:
        handler = logging.StreamHandler()
    else:
        handler = logging.FileHandler(filename=filename, mode='a')
    handler.setFormatter(logging.Formatter(fmt=fmt, datefmt=datefmt))
    handler.setLevel(level)
    relayout_logger.addHandler(handler)
    relayout_logger.setLevel(level)
    relayout_logger.propagate = False
    return handler


def make_rng(seed, *stream):
    """
    Create an independent random generator.

    :param seed: non-negative integer run seed
    :param stream: extra non-negative integers naming the stream
    :return: ``numpy.random.Generator`` backed by Philox

    Philox is counter based, so the same ``(seed, stream)`` gives the same
    numbers on every platform.
    """
    if seed < 0:
        raise ValueError('seed must be >= 0, got {}'.format(seed))
    entropy = [int(seed)] + [int(s) for s in stream]
    return np.random.Generator(
        np.random.Philox(np.random.SeedSequence(entropy)))


def canonical_json(obj):
    """JSON text with sorted keys and no optional whitespace."""
    return json.dumps(obj, sort_keys=True, separators=(',', ':'))


def config_hash(obj):
    """SHA-256 of the canonical JSON form of a configuration."""
    return hashlib.sha256(canonical_json(obj).encode('utf-8')).hexdigest()


def file_checksum(path):
    """SHA-256 of a file's bytes."""
    digest = hashlib.sha256()
    with open(path, 'rb') as infile:
        for chunk in iter(lambda: infile.read(1 << 16), b''):
            digest.update(chunk)
    return digest.hexdigest()
