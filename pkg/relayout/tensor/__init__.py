#
# Copyright 2026 by the ReLayout developers
# All rights reserved
#

from relayout.tensor.tensor import Tensor, Tape, backward, detach
from relayout.tensor.tensor import cosine_sim, cosine_similarity
from relayout.tensor.optimizer import AdamW, OptimizerState, adamw_step
from relayout.tensor.optimizer import LinearDecaySchedule
from relayout.tensor.gradcheck import grad_check
