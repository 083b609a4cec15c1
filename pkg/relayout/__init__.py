#
# Copyright 2026 by the ReLayout developers
# All rights reserved
#

import logging

logger = logging.getLogger('relayout')
logger.addHandler(logging.NullHandler())

__version__ = '0.1.0'
