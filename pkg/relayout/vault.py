#
# Copyright 2026 by the ReLayout developers
# All rights reserved
#

"""
On-disk formats.

Every file written by relayout goes through this module: documents and
corpus directories, tokenizers, checkpoints, JSON-lines reports and run
manifests.
"""

import csv
import io
import json
import logging
import os
import struct
from collections import OrderedDict
import numpy as np
from relayout.document import doc_model, funsd
from relayout.document.tokenizer import TokenizerModel
from relayout.model.encoder import EncoderConfig, ModelParams
from relayout.util import canonical_json, config_hash, file_checksum

logger = logging.getLogger(__name__)

HEADER_LENGTH = struct.Struct('<Q')
FLOAT_DTYPE = np.dtype('<f8')


#
# JSON helpers
#

def write_json(path, obj):
    with io.open(path, 'w', encoding='utf-8', newline='\n') as outfile:
        outfile.write(json.dumps(obj, sort_keys=True, indent=1))
        outfile.write(u'\n')


def read_json(path):
    try:
        with io.open(path, encoding='utf-8') as infile:
            return json.load(infile)
    except ValueError as e:
        raise RuntimeError('{}: malformed JSON: {}'.format(path, e))


def append_jsonl(path, record):
    """Append one record as a line of canonical JSON."""
    with io.open(path, 'a', encoding='utf-8', newline='\n') as outfile:
        outfile.write(canonical_json(record))
        outfile.write(u'\n')


def read_jsonl(path):
    records = []
    with io.open(path, encoding='utf-8') as infile:
        for number, line in enumerate(infile):
            if not line.strip():
                continue
            try:
                records.append(json.loads(line))
            except ValueError as e:
                raise RuntimeError(
                    '{}, line {}: malformed JSON: {}'.format(
                        path, number + 1, e))
    return records


def write_csv(path, header, records):
    """UTF-8 CSV with LF line endings."""
    with io.open(path, 'w', encoding='utf-8', newline='') as outfile:
        writer = csv.writer(outfile, lineterminator='\n')
        writer.writerow(header)
        for record in records:
            writer.writerow(record)


#
# documents, corpora and tokenizers
#

def write_document(path, raw, truth=None):
    """Write a raw document and, next to it, its ground truth."""
    write_json(path, raw.to_dict())
    if truth is not None:
        write_json(truth_path(path), truth.to_dict())


def truth_path(path):
    base, ext = os.path.splitext(path)
    return base + '.truth' + ext


def read_document(path):
    """:class:`RawDocument` and the sibling :class:`GroundTruth`, if any."""
    raw = doc_model.RawDocument.from_dict(read_json(path))
    truth = None
    if os.path.exists(truth_path(path)):
        truth = doc_model.GroundTruth.from_dict(read_json(truth_path(path)))
    return raw, truth


class CorpusDir(object):
    """
    A directory of generated or imported documents.

    Documents are ``doc_NNNNNN.json`` with ``doc_NNNNNN.truth.json`` next
    to them; ``manifest.json`` records the count, seed, generator
    configuration and the checksum of every file.
    """
    manifest_filename = 'manifest.json'
    doc_filename_template = 'doc_{:06d}.json'

    def __init__(self, path):
        self.path = path

    @property
    def manifest_path(self):
        return os.path.join(self.path, self.manifest_filename)

    def doc_path(self, index):
        return os.path.join(self.path, self.doc_filename_template.format(index))

    def write(self, documents, config=None, seed=None):
        """
        Write ``(RawDocument, GroundTruth)`` pairs.

        :return: mapping of file name -> checksum
        """
        if os.path.exists(self.manifest_path):
            raise RuntimeError(
                'corpus directory {} already exists'.format(self.path))
        if not os.path.isdir(self.path):
            os.makedirs(self.path)
        checksums = OrderedDict()
        for index, (raw, truth) in enumerate(documents):
            path = self.doc_path(index)
            write_document(path, raw, truth)
            checksums[os.path.basename(path)] = file_checksum(path)
            if truth is not None:
                checksums[os.path.basename(truth_path(path))] = \
                    file_checksum(truth_path(path))
        write_json(self.manifest_path,
                   {'command': 'gen-corpus', 'count': len(documents),
                    'seed': seed, 'config': config,
                    'config_hash': config_hash(config),
                    'artifacts': checksums})
        logger.info('Wrote %d documents to %s.', len(documents), self.path)
        return checksums

    def read_manifest(self):
        if not os.path.exists(self.manifest_path):
            raise RuntimeError(
                '{} is not a corpus directory (no {})'.format(
                    self.path, self.manifest_filename))
        return read_json(self.manifest_path)

    def read(self):
        """``(name, RawDocument, GroundTruth)`` for every document."""
        manifest = self.read_manifest()
        documents = []
        for index in range(manifest['count']):
            path = self.doc_path(index)
            raw, truth = read_document(path)
            documents.append((os.path.basename(path), raw, truth))
        return documents


def read_document_file(path, label_set=None):
    """
    One document from either the native format or a FUNSD-format file.

    :return: ``(RawDocument, GroundTruth or None)``
    """
    if 'form' in read_json(path):
        return funsd.load_funsd_json(path, label_set)
    return read_document(path)


def read_dataset(path, label_set=None):
    """
    ``(name, RawDocument, GroundTruth)`` for every document of a dataset.

    :param path: a corpus directory, or a directory of FUNSD-format files
                 which are read in sorted file-name order
    :param label_set: allowed labels of FUNSD files
    """
    corpus_dir = CorpusDir(path)
    if os.path.exists(corpus_dir.manifest_path):
        return corpus_dir.read()
    if not os.path.isdir(path):
        raise RuntimeError('dataset {} does not exist'.format(path))
    names = sorted(name for name in os.listdir(path)
                   if name.endswith('.json') and
                   not name.endswith('.truth.json'))
    if not names:
        raise RuntimeError(
            '{} holds neither a corpus manifest nor FUNSD files'.format(path))
    documents = []
    for name in names:
        raw, truth = funsd.load_funsd_json(os.path.join(path, name), label_set)
        documents.append((name, raw, truth))
    return documents


def save_tokenizer(path, tokenizer):
    write_json(path, tokenizer.to_dict())


def load_tokenizer(path):
    return TokenizerModel.from_dict(read_json(path))


#
# checkpoints
#

def save_checkpoint_file(path, params, metadata=None):
    """
    Write parameters in the checkpoint format.

    An 8-byte little-endian header length, the UTF-8 JSON header, then
    every array as little-endian float64 in header order.
    """
    config = params.config.to_dict()
    names = params.names
    header = {
        'names': names,
        'shapes': [list(params[name].shape) for name in names],
        'config': config,
        'config_hash': config_hash(config),
        'metadata': metadata or {},
    }
    encoded = canonical_json(header).encode('utf-8')
    with open(path, 'wb') as outfile:
        outfile.write(HEADER_LENGTH.pack(len(encoded)))
        outfile.write(encoded)
        for name in names:
            outfile.write(
                np.ascontiguousarray(params[name].data,
                                     dtype=FLOAT_DTYPE).tobytes())


def load_checkpoint_file(path):
    """
    Read a checkpoint.

    :return: ``(ModelParams, metadata)``
    """
    with open(path, 'rb') as infile:
        data = infile.read()
    if len(data) < HEADER_LENGTH.size:
        raise RuntimeError('{}: truncated checkpoint'.format(path))
    (length,) = HEADER_LENGTH.unpack_from(data)
    start = HEADER_LENGTH.size
    try:
        header = json.loads(data[start:start + length].decode('utf-8'))
    except ValueError as e:
        raise RuntimeError('{}: malformed checkpoint header: {}'.format(
            path, e))
    if config_hash(header['config']) != header['config_hash']:
        raise RuntimeError(
            '{}: configuration does not match its hash'.format(path))
    config = EncoderConfig.from_dict(header['config'])

    arrays = OrderedDict()
    offset = start + length
    for name, shape in zip(header['names'], header['shapes']):
        count = int(np.prod(shape, dtype=np.int64))
        end = offset + count * FLOAT_DTYPE.itemsize
        if end > len(data):
            raise RuntimeError(
                '{}: truncated checkpoint at parameter {}'.format(path, name))
        arrays[name] = np.frombuffer(data[offset:end], dtype=FLOAT_DTYPE) \
            .reshape(shape).astype(np.float64)
        offset = end
    if offset != len(data):
        raise RuntimeError(
            '{}: {} unexpected trailing bytes'.format(path, len(data) - offset))
    return ModelParams.from_arrays(config, arrays), header['metadata']


class RunStore(object):
    """
    Artifacts of one command run, kept in ``output_dir``.

    :param output_dir: directory holding the run

    Files:

    - config.json -- the effective run configuration
    - tokenizer.json -- the tokenizer used
    - checkpoint.ckpt -- final parameters
    - checkpoint_epoch_EEE.ckpt -- parameters after EEE epochs
    - loss_report.jsonl, predictions.jsonl -- JSON-lines reports
    - metrics.json -- metric report
    - manifest.json -- config hash, seed and checksums of the artifacts

    """
    config_filename = 'config.json'
    tokenizer_filename = 'tokenizer.json'
    checkpoint_filename = 'checkpoint.ckpt'
    checkpoint_template = 'checkpoint_epoch_{:03d}.ckpt'
    metrics_filename = 'metrics.json'
    manifest_filename = 'manifest.json'

    def __init__(self, output_dir):
        self.output_dir = output_dir
        self._readonly_mode = False
        self._artifacts = []

    def path(self, filename):
        return os.path.join(self.output_dir, filename)

    def existing_artifacts(self):
        """Files in ``output_dir`` left by an earlier run, complete or not."""
        if not os.path.isdir(self.output_dir):
            return []
        names = set([self.config_filename, self.tokenizer_filename,
                     self.metrics_filename, self.manifest_filename])
        return sorted(
            name for name in os.listdir(self.output_dir)
            if name in names or name.endswith(('.ckpt', '.jsonl')))

    def initialize(self, mode):
        """
        Prepare to use the store.

        :param mode: mode to open in.

        Available modes are:

        - 'w' -- create the directory; run files already there are an error
        - 'a' -- add to an existing or new directory
        - 'r' -- read-only

        """
        if mode == 'w':
            existing = self.existing_artifacts()
            if existing:
                raise RuntimeError(
                    'Output directory {} already holds run files: {}'.format(
                        self.output_dir, ', '.join(existing)))
            if not os.path.isdir(self.output_dir):
                os.makedirs(self.output_dir)
        elif mode == 'a':
            if not os.path.isdir(self.output_dir):
                os.makedirs(self.output_dir)
        elif mode == 'r':
            if not os.path.isdir(self.output_dir):
                raise RuntimeError(
                    'Output directory {} does not exist'.format(
                        self.output_dir))
            self._readonly_mode = True
        else:
            raise RuntimeError('Unknown value for mode={}'.format(mode))

    def checkpoint_path(self, epoch=None):
        if epoch is None:
            return self.path(self.checkpoint_filename)
        return self.path(self.checkpoint_template.format(epoch))

    def save_checkpoint(self, params, epoch=None, metadata=None):
        self._can_save()
        path = self.checkpoint_path(epoch)
        save_checkpoint_file(path, params, metadata)
        self._record(path)
        return path

    def load_checkpoint(self, epoch=None):
        return load_checkpoint_file(self.checkpoint_path(epoch))

    def save_json(self, filename, obj):
        self._can_save()
        path = self.path(filename)
        write_json(path, obj)
        self._record(path)
        return path

    def load_json(self, filename):
        return read_json(self.path(filename))

    def save_tokenizer(self, tokenizer):
        self._can_save()
        path = self.path(self.tokenizer_filename)
        save_tokenizer(path, tokenizer)
        self._record(path)
        return path

    def append_report(self, filename, record):
        self._can_save()
        path = self.path(filename)
        append_jsonl(path, record)
        self._record(path)

    def read_report(self, filename):
        return read_jsonl(self.path(filename))

    def save_text(self, filename, text):
        self._can_save()
        path = self.path(filename)
        with io.open(path, 'w', encoding='utf-8', newline='\n') as outfile:
            outfile.write(text)
        self._record(path)
        return path

    def save_csv(self, filename, header, records):
        self._can_save()
        path = self.path(filename)
        write_csv(path, header, records)
        self._record(path)
        return path

    def save_manifest(self, command, config, seed, extra=None):
        """
        Write ``manifest.json`` with checksums of everything saved so far.

        :param extra: additional ``{name: checksum}`` entries
        """
        self._can_save()
        artifacts = OrderedDict()
        for path in sorted(set(self._artifacts)):
            artifacts[os.path.relpath(path, self.output_dir)] = \
                file_checksum(path)
        artifacts.update(extra or {})
        manifest = {'command': command, 'config_hash': config_hash(config),
                    'seed': seed, 'artifacts': artifacts}
        write_json(self.path(self.manifest_filename), manifest)
        return manifest

    def load_manifest(self):
        return read_json(self.path(self.manifest_filename))

    #
    # private methods
    #

    def _record(self, path):
        self._artifacts.append(path)

    def _can_save(self):
        if self._readonly_mode:
            raise RuntimeError('Cannot save in read-only mode.')
