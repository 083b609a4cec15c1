#
# Copyright 2026 by the ReLayout developers
# All rights reserved
#

from relayout.document.doc_model import (RawDocument, GroundTruth,
                                         TokenizedDocument, tokenize)
from relayout.document.tokenizer import TokenizerModel, train_bpe
