#
# Copyright 2026 by the ReLayout developers
# All rights reserved
#
