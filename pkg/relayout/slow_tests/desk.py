#
# Copyright 2026 by the ReLayout developers
# All rights reserved
#

'''
Shared set-up for the desk-scale runs.
'''

import os
from relayout import cli, vault
from relayout.document import corpus
from relayout.document.tokenizer import TokenizerModel

SEEDS = (1, 2, 3)


def run_config(seed, documents=200, **sections):
    '''
    A small byte-level configuration; ``sections`` update the nested
    sections by name.
    '''
    values = {
        'corpus': {'document_count': documents, 'groups_per_doc': [3, 5],
                   'words_per_group': [2, 4]},
        'encoder': {'vocab_size': 261, 'hidden_dim': 32, 'layers': 2,
                    'heads': 4, 'ffn_dim': 64, 'max_seq_len': 256,
                    'max_local_pos': 32, 'dropout_prob': 0.0},
        'pretrain': {'epochs': 4, 'batch_size': 8, 'lr': 3e-3},
        'finetune': {'task': 'sec', 'steps': 300, 'batch_size': 8,
                     'lr': 3e-3},
        'seed': seed,
    }
    for name, changes in sections.items():
        values[name].update(changes)
    return cli.RunConfig.from_dict(values).effective()


def dataset(cfg):
    return [('doc_{:06d}'.format(i), g.raw, g.truth)
            for i, g in enumerate(corpus.generate_corpus(cfg.corpus))]


def pretrain_and_finetune(cfg, path, documents=None):
    '''
    Pre-train and fine-tune into ``path``.

    :return: ``(pretrain reports, fine-tuning metric report)``
    '''
    tokenizer = TokenizerModel([])
    documents = dataset(cfg) if documents is None else documents
    params, reports = cli.run_pretrain(
        cfg, tokenizer, documents, cli.open_store(os.path.join(path, 'pre')))
    report = cli.run_finetune(
        cfg, params, {'tokenizer_fingerprint': tokenizer.fingerprint},
        tokenizer, documents, cli.open_store(os.path.join(path, 'ft')))
    return reports, report


def load_epoch(path, epoch):
    params, _ = vault.RunStore(os.path.join(path, 'pre')).load_checkpoint(
        epoch)
    return params
