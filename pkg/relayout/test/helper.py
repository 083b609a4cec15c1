#
# Copyright 2026 by the ReLayout developers
# All rights reserved
#

'''
File with various classes and functions to make testing easier.
'''

import os
import tempfile
import shutil
from relayout.document import doc_model
from relayout.document import tokenizer


class TempDirHelper(object):
    '''
    Class to add convenience methods for running tests in temp dirs.

    Inherit from this class and call setUpTempDir and tearDownTempDir from setUp and tearDown, respectively.

    '''
    def setUpTempDir(self):
        # create and change to temp dir
        self.cwd = os.getcwd()
        self.tmpdir = tempfile.mkdtemp()
        os.chdir(self.tmpdir)

    def tearDownTempDir(self):
        # switch to original dir and clean up
        os.chdir(self.cwd)
        shutil.rmtree(self.tmpdir)


def byte_tokenizer():
    '''Tokenizer without merges: one token per UTF-8 byte.'''
    return tokenizer.TokenizerModel([])


def make_line_document(lines, page_size=(1000, 1000), char_width=10,
                       line_height=20):
    '''
    Build a RawDocument from lists of words, one list per segment.

    Each segment is laid out on its own line, words left to right, with
    boxes sized by character count.
    '''
    words = []
    boxes = []
    segments = []
    for row, line in enumerate(lines):
        x = 0
        y0 = row * line_height
        segment = []
        for word in line:
            width = char_width * len(word)
            boxes.append((x, y0, x + width, y0 + line_height - 2))
            segment.append(len(words))
            words.append(word)
            x += width + char_width
        segments.append(segment)
    positions = list(range(len(words)))
    return doc_model.RawDocument(words, positions, boxes, segments, page_size)


def make_tokenized(lines, tok=None, **kwargs):
    '''Tokenize a line document with a byte tokenizer by default.'''
    tok = byte_tokenizer() if tok is None else tok
    return doc_model.tokenize(make_line_document(lines, **kwargs), tok)
