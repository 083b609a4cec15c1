#
# Copyright 2026 by the ReLayout developers
# All rights reserved
#

from relayout.pretrain.objectives import (PretrainConfig, MaskPlan, PairSet,
                                          LossValue, sample_masks, mlm_loss,
                                          lop_loss, segment_representation,
                                          select_pairs, tsc_loss, total_loss)
from relayout.pretrain.trainer import LossReport, Pretrainer, pretrain
