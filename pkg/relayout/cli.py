#
# Copyright 2026 by the ReLayout developers
# All rights reserved
#

"""
Command line front end.

Every verb reads one JSON run configuration (``--config``); a few flags
override single fields of it. The effective configuration is what gets
hashed into manifests and written next to the artifacts, so a run can be
repeated exactly from its output directory.

Exit codes are 0 on success, 1 on a usage, configuration or data error
and 2 when a gradient check breaks its tolerance.
"""

import argparse
import logging
import os
import sys
import relayout
from relayout import options, vault, analysis
from relayout.options import option
from relayout.document import corpus, doc_model
from relayout.document.corpus import CorpusConfig
from relayout.document.tokenizer import (TokenizerModel, train_bpe,
                                         DEFAULT_MERGE_COUNT)
from relayout.finetune import tasks
from relayout.finetune.bio import BioLabelSet
from relayout.finetune.tasks import FinetuneConfig
from relayout.model import encoder
from relayout.model.encoder import EncoderConfig
from relayout.pretrain import objectives, trainer
from relayout.pretrain.objectives import PretrainConfig
from relayout.tensor import gradcheck
from relayout.util import (configure_logging, make_rng, file_checksum,
                           STREAM_INIT)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_TOLERANCE = 2

GRADCHECK_SCOPES = {
    'primitives': gradcheck.primitive_checks,
    'encoder': encoder.encoder_checks,
    'losses': objectives.loss_checks,
}

# (row, key, uses 1-LOP, uses 2-TSC)
ABLATION_ROWS = (
    ('MLM', 'mlm', False, False),
    ('MLM+1-LOP', 'mlm_lop', True, False),
    ('MLM+2-TSC', 'mlm_tsc', False, True),
    ('MLM+1-LOP+2-TSC', 'mlm_lop_tsc', True, True),
)


def _is_section(cls):
    return lambda value: isinstance(value, cls)


class RunConfig(options.Options):
    """
    Configuration of every command.

    ``seed`` is the one seed of a run: :meth:`effective` copies it into
    the corpus, pre-training and fine-tuning sections.
    """
    _sections_ = (
        ('corpus', CorpusConfig),
        ('encoder', EncoderConfig),
        ('pretrain', PretrainConfig),
        ('finetune', FinetuneConfig),
    )
    _fields_ = (
        ('corpus', CorpusConfig()),
        ('corpus_dir', 'corpus'),
        ('tokenizer', None),
        ('merges', DEFAULT_MERGE_COUNT),
        ('encoder', EncoderConfig()),
        ('pretrain', PretrainConfig()),
        ('finetune', FinetuneConfig()),
        ('checkpoint', None),
        ('output_dir', 'run'),
        ('seed', 0),
    )

    corpus = option('corpus', _is_section(CorpusConfig),
                    'be a corpus section')
    corpus_dir = option('corpus_dir', options.is_optional_string,
                        'be null or a path')
    tokenizer = option('tokenizer', options.is_optional_string,
                       'be null or a path')
    merges = option('merges', options.is_non_negative_int,
                    'be an integer >= 0')
    encoder = option('encoder', _is_section(EncoderConfig),
                     'be an encoder section')
    pretrain = option('pretrain', _is_section(PretrainConfig),
                      'be a pretrain section')
    finetune = option('finetune', _is_section(FinetuneConfig),
                      'be a finetune section')
    checkpoint = option('checkpoint', options.is_optional_string,
                        'be null or a path')
    output_dir = option('output_dir', options.is_optional_string,
                        'be null or a path')
    seed = option('seed', options.is_non_negative_int, 'be an integer >= 0')

    @classmethod
    def from_dict(cls, values):
        if not isinstance(values, dict):
            raise ValueError('RunConfig must be a JSON object')
        values = dict(values)
        for name, section in cls._sections_:
            if isinstance(values.get(name), dict):
                try:
                    values[name] = section.from_dict(values[name])
                except ValueError as e:
                    raise ValueError('{}: {}'.format(name, e))
        return super(RunConfig, cls).from_dict(values)

    def sanity_check(self):
        for name, _ in self._sections_:
            getattr(self, name).sanity_check()

    def effective(self):
        """Validated copy with ``seed`` propagated to every section."""
        cfg = self.copy()
        cfg.corpus.rng_seed = cfg.seed
        cfg.pretrain.rng_seed = cfg.seed
        cfg.finetune.rng_seed = cfg.seed
        cfg.sanity_check()
        return cfg

    def check_paths(self, *names):
        """Raise unless every named path field points at something."""
        for name in names:
            path = getattr(self, name)
            if path is None:
                raise RuntimeError('{} is not set'.format(name))
            if not os.path.exists(path):
                raise RuntimeError('{} {} does not exist'.format(name, path))


def load_config(path=None):
    if path is None:
        return RunConfig()
    return RunConfig.from_dict(vault.read_json(path))


def apply_overrides(cfg, args):
    """Effective configuration after the command line flags."""
    for field in ['corpus_dir', 'tokenizer', 'checkpoint', 'merges', 'seed']:
        value = getattr(args, field, None)
        if value is not None:
            setattr(cfg, field, value)
    if getattr(args, 'out', None) is not None:
        if args.command == 'gen-corpus':
            cfg.corpus_dir = args.out
        else:
            cfg.output_dir = args.out
    if getattr(args, 'epochs', None) is not None:
        cfg.pretrain.epochs = args.epochs
    if getattr(args, 'task', None) is not None:
        cfg.finetune.task = args.task
    return cfg.effective()


#
# shared steps
#

def open_store(path):
    store = vault.RunStore(path)
    store.initialize('w')
    return store


def _load_tokenizer(cfg):
    if cfg.tokenizer is None:
        logger.info('No tokenizer given, using the byte-level tokenizer.')
        return TokenizerModel([])
    cfg.check_paths('tokenizer')
    return vault.load_tokenizer(cfg.tokenizer)


def _load_dataset(cfg, path=None):
    path = cfg.corpus_dir if path is None else path
    documents = vault.read_dataset(path, cfg.corpus.label_set)
    if not documents:
        raise RuntimeError('dataset {} holds no documents'.format(path))
    logger.info('Read %d documents from %s.', len(documents), path)
    return documents


def _check_vocab(encoder_config, tokenizer):
    if encoder_config.vocab_size < tokenizer.vocab_size:
        raise RuntimeError(
            'encoder.vocab_size is {} but the tokenizer has {} ids'.format(
                encoder_config.vocab_size, tokenizer.vocab_size))


def _check_fingerprint(metadata, tokenizer):
    expected = metadata.get('tokenizer_fingerprint')
    if expected is not None and expected != tokenizer.fingerprint:
        raise RuntimeError(
            'checkpoint was trained with tokenizer {} but tokenizer {} was '
            'given'.format(expected[:12], tokenizer.fingerprint[:12]))


def _label_set(cfg):
    if cfg.finetune.task != 'sec':
        return None
    return BioLabelSet(cfg.corpus.label_set)


def _fmt(value):
    if value is None:
        return '-'
    if isinstance(value, float):
        return '{:.4f}'.format(value)
    return str(value)


def format_table(header, rows):
    """Plain-text table with left-aligned columns."""
    cells = [list(header)] + [[_fmt(v) for v in row] for row in rows]
    widths = [max(len(row[i]) for row in cells) for i in range(len(header))]
    lines = ['  '.join(cell.ljust(width) for cell, width in zip(row, widths))
             .rstrip() for row in cells]
    return '\n'.join(lines) + '\n'


def run_pretrain(cfg, tokenizer, dataset, store):
    """
    Pre-train on ``dataset`` and fill ``store``.

    :return: ``(params, reports)``
    """
    _check_vocab(cfg.encoder, tokenizer)
    documents = [doc_model.tokenize(raw, tokenizer, cfg.encoder.max_seq_len)
                 for _, raw, _ in dataset]
    store.save_json(store.config_filename, cfg.to_dict())
    store.save_tokenizer(tokenizer)
    params, reports = trainer.pretrain(documents, cfg.encoder, cfg.pretrain,
                                       store=store)
    store.save_checkpoint(params, metadata={
        'epoch': cfg.pretrain.epochs,
        'tokenizer_fingerprint': tokenizer.fingerprint,
        'pretrain': cfg.pretrain.to_dict()})
    store.save_manifest('pretrain', cfg.to_dict(), cfg.seed)
    return params, reports


def _save_evaluation(store, task, examples, report, predictions):
    store.save_json(store.metrics_filename, report)
    for example, prediction in zip(examples, predictions):
        store.append_report('predictions.jsonl',
                            task.prediction_record(example, prediction))


def run_finetune(cfg, params, metadata, tokenizer, dataset, store,
                 workers=1):
    """
    Fine-tune on the training split of ``dataset``, evaluate on the rest.

    :return: the metric report of the held-out split
    """
    _check_fingerprint(metadata, tokenizer)
    ft = cfg.finetune
    label_set = _label_set(cfg)
    task = tasks.get_task(ft, params.config, label_set)
    train, test = tasks.split_indices(len(dataset), ft.train_fraction,
                                      ft.rng_seed)
    if not test:
        raise RuntimeError(
            'finetune.train_fraction {} leaves no documents to evaluate '
            'on'.format(ft.train_fraction))
    train_examples = task.build_examples([dataset[i] for i in train],
                                         tokenizer)
    test_examples = task.build_examples([dataset[i] for i in test], tokenizer)

    result = tasks.finetune(params, train_examples, task)
    report, predictions = tasks.evaluate(result.params, test_examples, task,
                                         workers, tokenizer.fingerprint)

    store.save_json(store.config_filename, cfg.to_dict())
    store.save_tokenizer(tokenizer)
    store.save_checkpoint(result.params, metadata={
        'task': ft.task,
        'label_set': None if label_set is None else label_set.to_dict(),
        'tokenizer_fingerprint': tokenizer.fingerprint,
        'finetune': ft.to_dict()})
    for step, loss in enumerate(result.losses):
        store.append_report('loss_report.jsonl', {'step': step, 'loss': loss})
    _save_evaluation(store, task, test_examples, report, predictions)
    store.save_manifest('finetune', cfg.to_dict(), cfg.seed)
    return report


#
# commands
#

def cmd_gen_corpus(cfg, args):
    generated = corpus.generate_corpus(cfg.corpus, workers=args.workers)
    checksums = vault.CorpusDir(cfg.corpus_dir).write(
        [(g.raw, g.truth) for g in generated], cfg.corpus.to_dict(),
        cfg.seed)
    print('Wrote {} documents ({} files) to {}'.format(
        len(generated), len(checksums), cfg.corpus_dir))
    return EXIT_OK


def cmd_train_bpe(cfg, args):
    dataset = _load_dataset(cfg)
    tokenizer = train_bpe([raw for _, raw, _ in dataset], cfg.merges)
    store = open_store(cfg.output_dir)
    path = store.save_tokenizer(tokenizer)
    if tokenizer.exhausted:
        logger.warning('Corpus supports only %d of %d requested merges.',
                       len(tokenizer.merges), tokenizer.merge_count)
    store.save_manifest('train-bpe', cfg.to_dict(), cfg.seed)
    print('Wrote tokenizer with {} ids to {}'.format(tokenizer.vocab_size,
                                                     path))
    return EXIT_OK


def cmd_pretrain(cfg, args):
    tokenizer = _load_tokenizer(cfg)
    dataset = _load_dataset(cfg)
    store = open_store(cfg.output_dir)
    _, reports = run_pretrain(cfg, tokenizer, dataset, store)
    sys.stdout.write(format_table(trainer.REPORT_FIELDS,
                                  [tuple(r) for r in reports]))
    return EXIT_OK


def cmd_finetune(cfg, args):
    cfg.check_paths('checkpoint')
    params, metadata = vault.load_checkpoint_file(cfg.checkpoint)
    tokenizer = _load_tokenizer(cfg)
    dataset = _load_dataset(cfg)
    store = open_store(cfg.output_dir)
    report = run_finetune(cfg, params, metadata, tokenizer, dataset, store,
                          args.workers)
    sys.stdout.write(format_table(sorted(report),
                                  [[report[k] for k in sorted(report)]]))
    return EXIT_OK


def cmd_evaluate(cfg, args):
    cfg.check_paths('checkpoint')
    params, metadata = vault.load_checkpoint_file(cfg.checkpoint)
    tokenizer = _load_tokenizer(cfg)
    _check_fingerprint(metadata, tokenizer)
    ft = cfg.finetune
    if 'finetune' in metadata:
        ft = FinetuneConfig.from_dict(metadata['finetune'])
    if args.task is not None:
        ft.task = args.task
    if not params.has_head(ft.task):
        raise RuntimeError(
            'checkpoint {} has no {} head; fine-tune it first'.format(
                cfg.checkpoint, ft.task))
    label_set = None
    if ft.task == 'sec':
        if metadata.get('label_set') is not None:
            label_set = BioLabelSet.from_dict(metadata['label_set'])
        else:
            label_set = BioLabelSet(cfg.corpus.label_set)
    task = tasks.get_task(ft, params.config, label_set)

    dataset = _load_dataset(cfg, args.data)
    examples = task.build_examples(dataset, tokenizer)
    report, predictions = tasks.evaluate(params, examples, task,
                                         args.workers, tokenizer.fingerprint)
    store = open_store(cfg.output_dir)
    _save_evaluation(store, task, examples, report, predictions)
    store.save_manifest('evaluate', cfg.to_dict(), cfg.seed,
                        extra={'checkpoint': file_checksum(cfg.checkpoint)})
    sys.stdout.write(format_table(sorted(report),
                                  [[report[k] for k in sorted(report)]]))
    return EXIT_OK


def cmd_gradcheck(cfg, args):
    store = open_store(cfg.output_dir)
    cases = GRADCHECK_SCOPES[args.scope](make_rng(cfg.seed, STREAM_INIT))
    results = gradcheck.run_checks(cases, tol=args.tol)
    rows = [(r.name, '{:.3e}'.format(r.max_error),
             'ok' if r.passed else 'FAIL') for r in results]
    sys.stdout.write(format_table(('check', 'max_error', 'status'), rows))
    store.save_json('gradcheck.json', {
        'scope': args.scope, 'tolerance': args.tol,
        'results': [{'name': r.name, 'max_error': float(r.max_error),
                     'passed': bool(r.passed)} for r in results]})
    store.save_manifest('gradcheck', cfg.to_dict(), cfg.seed)
    failed = [r.name for r in results if not r.passed]
    if failed:
        logger.error('Gradient check tolerance %g exceeded by %s.', args.tol,
                     ', '.join(failed))
        return EXIT_TOLERANCE
    return EXIT_OK


def ablation_configs(cfg):
    """
    The four ablation configurations.

    They differ from ``cfg`` and from each other only in ``pretrain.alpha``
    and ``pretrain.gamma``.
    """
    configs = []
    for row, key, use_lop, use_tsc in ABLATION_ROWS:
        variant = cfg.copy()
        variant.pretrain.alpha = cfg.pretrain.alpha if use_lop else 0.0
        variant.pretrain.gamma = cfg.pretrain.gamma if use_tsc else 0.0
        configs.append((row, key, variant))
    return configs


def cmd_ablate(cfg, args):
    if cfg.pretrain.alpha == 0 or cfg.pretrain.gamma == 0:
        logger.warning('pretrain.alpha or pretrain.gamma is 0, so some '
                       'ablation rows coincide.')
    tokenizer = _load_tokenizer(cfg)
    dataset = _load_dataset(cfg)
    store = open_store(cfg.output_dir)
    metric = 'f1' if cfg.finetune.task == 'sec' else 'anls'

    records = []
    for row, key, variant in ablation_configs(cfg):
        logger.info('Ablation row %s.', row)
        run_dir = os.path.join(cfg.output_dir, key)
        params, reports = run_pretrain(
            variant, tokenizer, dataset,
            open_store(os.path.join(run_dir, 'pretrain')))
        report = run_finetune(
            variant, params, {'tokenizer_fingerprint': tokenizer.fingerprint},
            tokenizer, dataset,
            open_store(os.path.join(run_dir, 'finetune')), args.workers)
        last = reports[-1] if reports else None
        records.append({
            'row': row, 'alpha': variant.pretrain.alpha,
            'gamma': variant.pretrain.gamma, metric: report[metric],
            'mlm': last and last.mlm, 'lop': last and last.lop,
            'tsc': last and last.tsc, 'total': last and last.total})

    columns = ('row', metric, 'mlm', 'lop', 'tsc', 'total')
    table = format_table(columns, [[r[c] for c in columns] for r in records])
    store.save_json('ablation.json', records)
    store.save_text('ablation.txt', table)
    store.save_manifest('ablate', cfg.to_dict(), cfg.seed)
    sys.stdout.write(table)
    return EXIT_OK


def cmd_dump_reps(cfg, args):
    cfg.check_paths('checkpoint')
    params, metadata = vault.load_checkpoint_file(cfg.checkpoint)
    tokenizer = _load_tokenizer(cfg)
    _check_fingerprint(metadata, tokenizer)
    raw, truth = vault.read_document_file(args.document, cfg.corpus.label_set)
    doc = doc_model.tokenize(raw, tokenizer, params.config.max_seq_len)

    rows = analysis.dump_rows(params, doc, truth)
    store = open_store(cfg.output_dir)
    path = store.save_csv('reps.csv',
                          analysis.csv_header(params.config.hidden_dim),
                          [analysis.csv_record(r) for r in rows])
    if truth is not None:
        similarity = analysis.group_similarity(params, [(doc, truth)])
        store.save_json('similarity.json', similarity._asdict())
        sys.stdout.write(format_table(similarity._fields, [similarity]))
    store.save_manifest('dump-reps', cfg.to_dict(), cfg.seed)
    print('Wrote {} rows to {}'.format(len(rows), path))
    return EXIT_OK


#
# argument parsing
#

class _ArgumentParser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write('{}: error: {}\n'.format(self.prog, message))
        sys.exit(EXIT_USAGE)


def build_parser():
    parser = _ArgumentParser(
        prog='relayout',
        description='Layout-aware document encoder pre-training.')
    parser.add_argument('--version', action='version',
                        version=relayout.__version__)
    parser.add_argument('--debug', action='store_true',
                        help='log at DEBUG level')
    parser.add_argument('--log-file', help='append the log to this file')

    common = _ArgumentParser(add_help=False)
    common.add_argument('--config', help='JSON run configuration')
    common.add_argument('--seed', type=int, help='override the run seed')
    common.add_argument('--out', help='override the output directory')
    common.add_argument('--epochs', type=int,
                        help='override pretrain.epochs')

    commands = parser.add_subparsers(dest='command', metavar='command')
    commands.required = True

    def add(name, func, help_text):
        sub = commands.add_parser(name, parents=[common], help=help_text)
        sub.set_defaults(func=func)
        return sub

    sub = add('gen-corpus', cmd_gen_corpus, 'generate a synthetic corpus')
    sub.add_argument('--workers', type=int, default=1)

    sub = add('train-bpe', cmd_train_bpe, 'train a BPE tokenizer')
    sub.add_argument('--corpus', dest='corpus_dir')
    sub.add_argument('--merges', type=int)

    sub = add('pretrain', cmd_pretrain, 'pre-train an encoder')
    sub.add_argument('--corpus', dest='corpus_dir')
    sub.add_argument('--tokenizer')

    sub = add('finetune', cmd_finetune, 'fine-tune a checkpoint')
    sub.add_argument('--corpus', dest='corpus_dir')
    sub.add_argument('--tokenizer')
    sub.add_argument('--checkpoint')
    sub.add_argument('--task', choices=['sec', 'qa'])
    sub.add_argument('--workers', type=int, default=1)

    sub = add('evaluate', cmd_evaluate, 'evaluate a fine-tuned checkpoint')
    sub.add_argument('--data', help='corpus or FUNSD directory')
    sub.add_argument('--tokenizer')
    sub.add_argument('--checkpoint')
    sub.add_argument('--task', choices=['sec', 'qa'])
    sub.add_argument('--workers', type=int, default=1)

    sub = add('gradcheck', cmd_gradcheck, 'check analytic gradients')
    sub.add_argument('--scope', choices=sorted(GRADCHECK_SCOPES),
                     default='primitives')
    sub.add_argument('--tol', type=float, default=1e-4)

    sub = add('ablate', cmd_ablate, 'run the pre-training ablation')
    sub.add_argument('--corpus', dest='corpus_dir')
    sub.add_argument('--tokenizer')
    sub.add_argument('--workers', type=int, default=1)

    sub = add('dump-reps', cmd_dump_reps, 'export representations as CSV')
    sub.add_argument('--document', required=True)
    sub.add_argument('--tokenizer')
    sub.add_argument('--checkpoint')
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    configure_logging(debug=args.debug, filename=args.log_file)
    try:
        cfg = apply_overrides(load_config(args.config), args)
        return args.func(cfg, args)
    except (RuntimeError, ValueError, TypeError, IOError, OSError) as e:
        logger.error('%s: %s', args.command, e, exc_info=args.debug)
        return EXIT_USAGE
