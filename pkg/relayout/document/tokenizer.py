#
# Copyright 2026 by the ReLayout developers
# All rights reserved
#

"""
Byte-level byte-pair encoding.

Ids ``0..255`` are the raw bytes, ``256..260`` are the special tokens and
merge ``i`` produces id ``261 + i``. Merges are learned inside words only,
so a token never spans two words.
"""

import logging
from collections import Counter, OrderedDict
import six
from relayout.util import config_hash

logger = logging.getLogger(__name__)

N_BYTES = 256
SPECIAL_TOKENS = ('mask', 'pad', 'cls', 'sep', 'unk')
SPECIAL_IDS = OrderedDict(
    (name, N_BYTES + i) for i, name in enumerate(SPECIAL_TOKENS))
FIRST_MERGE_ID = N_BYTES + len(SPECIAL_TOKENS)
DEFAULT_MERGE_COUNT = 512


def _byte_symbols(word):
    data = bytearray(word.encode('utf-8'))
    return tuple(bytes(bytearray([b])) for b in data)


def _apply_merge(symbols, pair):
    a, b = pair
    out = []
    i = 0
    while i < len(symbols):
        if i + 1 < len(symbols) and symbols[i] == a and symbols[i + 1] == b:
            out.append(a + b)
            i += 2
        else:
            out.append(symbols[i])
            i += 1
    return tuple(out)


class TokenizerModel(object):
    """
    A trained byte-level BPE tokenizer.

    :param merges: ordered list of ``(left, right)`` byte-string pairs
    :param merge_count: merges requested in training; defaults to
                        ``len(merges)``. It exceeds ``len(merges)`` when the
                        corpus ran out of pairs, and ``vocab_size`` then counts
                        only the merges actually learned.

    """
    def __init__(self, merges, merge_count=None):
        self.merges = [(bytes(a), bytes(b)) for a, b in merges]
        if merge_count is None:
            merge_count = len(self.merges)
        if merge_count < len(self.merges):
            raise RuntimeError(
                'merge_count {} is below the {} merges given'.format(
                    merge_count, len(self.merges)))
        self.merge_count = int(merge_count)
        self._symbol_ids = {}
        for b in range(N_BYTES):
            self._symbol_ids[bytes(bytearray([b]))] = b
        self._id_symbols = dict((i, s) for s, i in self._symbol_ids.items())
        for i, (a, b) in enumerate(self.merges):
            merged = a + b
            token_id = FIRST_MERGE_ID + i
            # the same bytes may be reached by two merge paths; the first wins
            self._symbol_ids.setdefault(merged, token_id)
            self._id_symbols[token_id] = merged
        self._cache = {}
        self._fingerprint = None

    @property
    def vocab_size(self):
        return FIRST_MERGE_ID + len(self.merges)

    @property
    def exhausted(self):
        """Whether training stopped before ``merge_count`` merges."""
        return len(self.merges) < self.merge_count

    @property
    def specials(self):
        return OrderedDict(SPECIAL_IDS)

    @property
    def mask_id(self):
        return SPECIAL_IDS['mask']

    @property
    def pad_id(self):
        return SPECIAL_IDS['pad']

    @property
    def cls_id(self):
        return SPECIAL_IDS['cls']

    @property
    def sep_id(self):
        return SPECIAL_IDS['sep']

    @property
    def unk_id(self):
        return SPECIAL_IDS['unk']

    @property
    def fingerprint(self):
        if self._fingerprint is None:
            self._fingerprint = config_hash(self.to_dict())
        return self._fingerprint

    def encode_word(self, word):
        """Token ids of a single word; empty for the empty string."""
        if word in self._cache:
            return list(self._cache[word])
        symbols = _byte_symbols(word)
        for pair in self.merges:
            if len(symbols) < 2:
                break
            symbols = _apply_merge(symbols, pair)
        ids = tuple(self._symbol_ids[s] for s in symbols)
        self._cache[word] = ids
        return list(ids)

    def encode_words(self, words):
        ids = []
        for word in words:
            ids.extend(self.encode_word(word))
        return ids

    def decode(self, ids):
        """Concatenated text of non-special ids."""
        data = b''
        for token_id in ids:
            token_id = int(token_id)
            if token_id in self._id_symbols:
                data += self._id_symbols[token_id]
            elif not N_BYTES <= token_id < FIRST_MERGE_ID:
                raise RuntimeError(
                    'decode: id {} out of range for vocabulary of {}'.format(
                        token_id, self.vocab_size))
        return data.decode('utf-8', 'replace')

    def to_dict(self):
        # latin-1 maps every byte to one code point, so merges survive JSON
        return {
            'merge_count': self.merge_count,
            'merges': [[a.decode('latin-1'), b.decode('latin-1')]
                       for a, b in self.merges],
            'specials': dict(SPECIAL_IDS),
        }

    @classmethod
    def from_dict(cls, values):
        try:
            merges = [(a.encode('latin-1'), b.encode('latin-1'))
                      for a, b in values['merges']]
            specials = values['specials']
            merge_count = values.get('merge_count')
        except (KeyError, TypeError, ValueError) as e:
            raise RuntimeError('tokenizer JSON is malformed: {}'.format(e))
        if dict(specials) != dict(SPECIAL_IDS):
            raise RuntimeError(
                'tokenizer special ids {} do not match {}'.format(
                    specials, dict(SPECIAL_IDS)))
        return cls(merges, merge_count)


def train_bpe(corpus, merge_count=DEFAULT_MERGE_COUNT):
    """
    Learn BPE merges from the words of a corpus.

    :param corpus: list of :class:`RawDocument`
    :param merge_count: number of merges to learn
    :return: :class:`TokenizerModel`

    Pair counts are weighted by word frequency. Among equally frequent
    pairs the lexicographically smallest ``(left, right)`` is merged first.
    Training stops early if no adjacent pair is left. The requested count
    is recorded as :attr:`TokenizerModel.merge_count` and written to the
    tokenizer file; ``vocab_size`` counts only the merges learned.
    """
    if merge_count < 0:
        raise RuntimeError(
            'merge_count must be >= 0, got {}'.format(merge_count))
    corpus = list(corpus)
    if not corpus:
        raise RuntimeError('empty corpus')

    counts = Counter()
    for doc in corpus:
        counts.update(doc.words)
    words = dict((_byte_symbols(w), c) for w, c in six.iteritems(counts) if w)
    if not words:
        raise RuntimeError('empty corpus')

    merges = []
    for _ in range(merge_count):
        pair_counts = Counter()
        for symbols, count in six.iteritems(words):
            for pair in zip(symbols[:-1], symbols[1:]):
                pair_counts[pair] += count
        if not pair_counts:
            logger.warning('no pairs left after %d merges, stopping early',
                           len(merges))
            break
        best = min(pair_counts, key=lambda p: (-pair_counts[p], p))
        merges.append(best)
        merged = {}
        for symbols, count in six.iteritems(words):
            new = _apply_merge(symbols, best)
            merged[new] = merged.get(new, 0) + count
        words = merged

    logger.info('learned %d merges from %d distinct words',
                len(merges), len(counts))
    return TokenizerModel(merges, merge_count)
