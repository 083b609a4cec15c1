#
# Copyright 2026 by the ReLayout developers
# All rights reserved
#

"""
Reader for FUNSD-format annotation files.

The file holds a ``form`` list of entities::

    {"form": [{"id": 0, "label": "question", "order": 0,
               "words": [{"text": "Date:", "box": [x0, y0, x1, y1]}]},
              ...],
     "lines": [{"box": [x0, y0, x1, y1]}, ...],
     "page": [width, height]}

``order`` (entity reading order), ``lines`` (OCR line boxes) and ``page``
are optional. Entities become semantic groups. Text segments come from
the line boxes when present and from vertical overlap of consecutive
words otherwise.
"""

import json
import logging
from relayout.document import doc_model
from relayout.document.corpus import DEFAULT_LABELS, generate_qa

logger = logging.getLogger(__name__)


def _fail(path, message):
    raise RuntimeError('{}: {}'.format(path, message))


def _read_words(path, form):
    entities = []
    for n, entity in enumerate(form):
        if not isinstance(entity, dict):
            _fail(path, 'form[{}] is not an object'.format(n))
        if 'label' not in entity or 'words' not in entity:
            _fail(path, 'form[{}] needs "label" and "words"'.format(n))
        words = []
        for m, word in enumerate(entity['words']):
            try:
                text = word['text']
                box = [float(c) for c in word['box']]
            except (KeyError, TypeError, ValueError):
                _fail(path, 'form[{}].words[{}] needs "text" and a 4-number '
                            '"box"'.format(n, m))
            if len(box) != 4:
                _fail(path, 'form[{}].words[{}].box must have 4 numbers'
                      .format(n, m))
            if not text.strip():
                logger.debug('%s: skipping blank word form[%d].words[%d]',
                             path, n, m)
                continue
            words.append((text.strip(), box))
        entities.append((entity.get('order', n), n, entity['label'], words))
    entities.sort(key=lambda e: (e[0], e[1]))
    return entities


def _center_inside(box, line):
    cx = (box[0] + box[2]) / 2.0
    cy = (box[1] + box[3]) / 2.0
    return line[0] <= cx <= line[2] and line[1] <= cy <= line[3]


def _segments_from_lines(boxes, lines):
    line_of_word = []
    for i, box in enumerate(boxes):
        owner = None
        for k, line in enumerate(lines):
            if _center_inside(box, line):
                owner = k
                break
        # words outside every line box get a line of their own
        line_of_word.append(('line', owner) if owner is not None
                            else ('word', i))
    return _runs(line_of_word)


def _segments_from_overlap(boxes):
    keys = []
    line = 0
    for i, box in enumerate(boxes):
        if i > 0:
            prev = boxes[i - 1]
            overlap = min(prev[3], box[3]) - max(prev[1], box[1])
            if overlap <= 0 or box[0] < prev[0]:
                line += 1
        keys.append(line)
    return _runs(keys)


def _runs(keys):
    segments = []
    for i, key in enumerate(keys):
        if i == 0 or key != keys[i - 1]:
            segments.append([])
        segments[-1].append(i)
    return segments


def load_funsd_json(path, label_set=None):
    """
    Load one FUNSD-format file.

    :param path: path of the JSON file
    :param label_set: allowed labels; defaults to question, answer,
                      header and other
    :return: ``(RawDocument, GroundTruth)``

    """
    label_set = list(DEFAULT_LABELS if label_set is None else label_set)
    try:
        with open(path) as infile:
            data = json.load(infile)
    except ValueError as e:
        _fail(path, 'malformed JSON: {}'.format(e))
    if not isinstance(data, dict) or not isinstance(data.get('form'), list):
        _fail(path, 'expected an object with a "form" list')

    words = []
    boxes = []
    labels = []
    groups = []
    for _, n, label, entity_words in _read_words(path, data['form']):
        label = label.lower()
        if label not in label_set:
            _fail(path, 'unknown label {!r} in form[{}]; valid labels are '
                        '{}'.format(label, n, ', '.join(label_set)))
        if not entity_words:
            continue
        group = []
        for text, box in entity_words:
            group.append(len(words))
            words.append(text)
            boxes.append(box)
            labels.append(label)
        groups.append(group)
    if not words:
        _fail(path, 'document has no words')

    if 'page' in data:
        page = tuple(float(d) for d in data['page'])
    else:
        page = (max(b[2] for b in boxes), max(b[3] for b in boxes))
        page = (max(page[0], 1.0), max(page[1], 1.0))
    clipped = []
    for box in boxes:
        x0, y0, x1, y1 = box
        clipped.append((min(max(x0, 0.0), page[0]), min(max(y0, 0.0), page[1]),
                        min(max(x1, 0.0), page[0]), min(max(y1, 0.0), page[1])))

    if 'lines' in data:
        try:
            lines = [[float(c) for c in line['box']] for line in data['lines']]
        except (KeyError, TypeError, ValueError):
            _fail(path, 'every entry of "lines" needs a 4-number "box"')
        segments = _segments_from_lines(clipped, lines)
    else:
        segments = _segments_from_overlap(clipped)

    raw = doc_model.RawDocument(words, list(range(len(words))), clipped,
                                segments, page)
    truth = doc_model.GroundTruth(groups, labels)
    truth = doc_model.GroundTruth(groups, labels, generate_qa(raw, truth))
    logger.debug('%s: %d words, %d segments, %d groups', path, len(words),
                 len(segments), len(groups))
    return raw, truth
