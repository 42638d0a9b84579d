"""Shared micro-scale experiment fixtures.

The micro environment is a full experiment shrunk until a training run takes
well under a second: a 48-sentence template corpus, a one-layer model, three
epochs.  Everything is deterministic, so session scope is safe.
"""

import numpy as np
import pytest

from ris_semcom.harness import (
    ExperimentConfig,
    OptimizerSettings,
    SystemVariant,
    prepare_data,
    save_outcome,
    train,
)

SUBJECTS = ["the clerk", "the speaker", "a member", "the committee"]
VERBS = ["reads", "approves", "rejects", "amends"]
OBJECTS = ["the bill", "the motion", "a report"]


def micro_sentences() -> list[str]:
    return [f"{s} {v} {o} ." for s in SUBJECTS for v in VERBS for o in OBJECTS]


def micro_config(root, **overrides) -> ExperimentConfig:
    settings = dict(
        train_corpus=root / "train.txt",
        test_corpus=root / "test.txt",
        checkpoint_dir=root / "checkpoints",
        results_path=root / "results.csv",
        vocab_path=root / "vocab.txt",
        max_len=12,
        embed_dim=16,
        num_heads=2,
        num_layers=1,
        ffn_width=32,
        symbols_per_token=4,
        feature_dim=16,
        max_vocab=100,
        min_words=4,
        n_elements=4,
        train_snr_db=7.0,
        train_batch_size=8,
        optimizer=OptimizerSettings(kind="sgd", learning_rate=0.05, epochs=3),
        val_fraction=0.1,
        eval_snrs_db=(0.0, 6.0),
        csi_error_scales=(0.0,),
        seeds=(1,),
        eval_batch_size=16,
        master_seed=1,
    )
    settings.update(overrides)
    return ExperimentConfig(**settings)


def write_micro_corpora(root) -> None:
    sentences = micro_sentences()
    (root / "train.txt").write_text("\n".join(sentences) + "\n", encoding="utf-8")
    (root / "test.txt").write_text("\n".join(sentences[::5]) + "\n", encoding="utf-8")


@pytest.fixture(scope="session")
def micro_env(tmp_path_factory):
    """(config, data) for the shared read-only micro experiment."""
    root = tmp_path_factory.mktemp("micro")
    write_micro_corpora(root)
    config = micro_config(root)
    return config, prepare_data(config)


@pytest.fixture(scope="session")
def micro_trained(micro_env):
    """Checkpoints for all three variants at seed 1, trained once per session."""
    config, data = micro_env
    outcomes = {}
    for variant in SystemVariant:
        outcome = train(config, data, variant, seed=1)
        save_outcome(config, variant, 1, outcome)
        outcomes[variant] = outcome
    return config, data, outcomes


@pytest.fixture()
def fresh_env(tmp_path):
    """A writable copy of the micro experiment for tests that mutate files."""
    write_micro_corpora(tmp_path)
    config = micro_config(tmp_path)
    return config, prepare_data(config)


def rng_symbols(shape=(3, 10, 2), seed=0, requires_grad=False):
    from ris_semcom.autodiff import Tensor

    data = np.random.default_rng(seed).normal(size=shape)
    return Tensor(data, requires_grad=requires_grad)
