#
# Copyright 2026 by the ReLayout developers
# All rights reserved
#

from relayout.finetune.bio import BioLabelSet, Span, bio_encode, bio_decode
from relayout.finetune.metrics import word_f1, span_f1, anls, anls_score
from relayout.finetune.tasks import (FinetuneConfig, QaExample, SecExample,
                                     classify_tokens, qa_predict, best_span,
                                     get_task, finetune, evaluate)
