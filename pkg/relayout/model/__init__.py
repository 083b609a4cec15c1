#
# Copyright 2026 by the ReLayout developers
# All rights reserved
#

from relayout.model.encoder import (EncoderConfig, ModelParams, ModelInputs,
                                    init_params, build_inputs, embed, encode,
                                    forward)
from relayout.model.heads import add_head, add_pretrain_heads
