"""Experiment config files: INI-style sections of key=value pairs.

Every key has a default, unknown sections or keys are rejected (typos must
not silently fall back to defaults), and list-valued keys use commas.  A
minimal file only needs the [paths] section:

    [paths]
    train_corpus = data/train.txt
    test_corpus = data/test.txt

    [train]
    epochs = 30
    optimizer = adam
    learning_rate = 0.001
"""

from __future__ import annotations

import configparser
from pathlib import Path

from .errors import ConfigError
from .harness import ExperimentConfig, OptimizerSettings, SystemVariant

_INT, _FLOAT, _STR, _INTS, _FLOATS, _STRS = "int", "float", "str", "ints", "floats", "strs"

SCHEMA: dict[str, dict[str, tuple[str, object]]] = {
    "model": {
        "max_len": (_INT, 22),
        "embed_dim": (_INT, 64),
        "num_heads": (_INT, 4),
        "num_layers": (_INT, 2),
        "ffn_width": (_INT, 128),
        "symbols_per_token": (_INT, 8),
        "feature_dim": (_INT, 64),
        "max_vocab": (_INT, 4000),
    },
    "text": {
        "min_freq": (_INT, 1),
        "min_words": (_INT, 4),
    },
    "channel": {
        "n_elements": (_INT, 10),
    },
    "train": {
        "snr_db": (_FLOAT, 7.0),
        "epochs": (_INT, 30),
        "batch_size": (_INT, 64),
        "optimizer": (_STR, "sgd"),
        "learning_rate": (_FLOAT, 0.1),
        "momentum": (_FLOAT, 0.0),
        "clip_norm": (_FLOAT, 1.0),
        "val_fraction": (_FLOAT, 0.1),
    },
    "eval": {
        "snrs_db": (_FLOATS, (0.0, 3.0, 6.0, 9.0, 12.0, 15.0, 18.0)),
        "csi_error_scales": (_FLOATS, (0.0,)),
        "seeds": (_INTS, (1, 2, 3)),
        "batch_size": (_INT, 128),
    },
    "run": {
        "master_seed": (_INT, 1),
        "variants": (_STRS, ("RIS", "POINT_TO_POINT", "UPPER_BOUND")),
    },
    "paths": {
        "train_corpus": (_STR, "data/train.txt"),
        "test_corpus": (_STR, "data/test.txt"),
        "checkpoint_dir": (_STR, "artifacts"),
        "results": (_STR, "artifacts/results.csv"),
        "vocab": (_STR, "artifacts/vocab.txt"),
    },
}


def _parse_value(kind: str, raw: str, where: str):
    try:
        if kind == _INT:
            return int(raw)
        if kind == _FLOAT:
            return float(raw)
        if kind == _STR:
            return raw.strip()
        items = [piece.strip() for piece in raw.split(",") if piece.strip()]
        if kind == _INTS:
            return tuple(int(p) for p in items)
        if kind == _FLOATS:
            return tuple(float(p) for p in items)
        return tuple(items)
    except ValueError as exc:
        raise ConfigError(f"bad value for {where}: {raw!r} ({exc})") from exc


def load_config(path: str | Path) -> ExperimentConfig:
    """Parse and validate a config file into an ExperimentConfig."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"config file not found: {path}")
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(path.read_text(encoding="utf-8"), source=str(path))
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc

    values: dict[str, dict[str, object]] = {
        section: {key: default for key, (_, default) in keys.items()}
        for section, keys in SCHEMA.items()
    }
    for section in parser.sections():
        if section not in SCHEMA:
            raise ConfigError(f"unknown config section [{section}] in {path}")
        for key, raw in parser.items(section):
            if key not in SCHEMA[section]:
                raise ConfigError(f"unknown config key {key!r} in section [{section}] of {path}")
            kind, _ = SCHEMA[section][key]
            values[section][key] = _parse_value(kind, raw, f"[{section}] {key}")

    try:
        variants = tuple(SystemVariant[name] for name in values["run"]["variants"])
    except KeyError as exc:
        known = ", ".join(v.name for v in SystemVariant)
        raise ConfigError(f"unknown variant {exc.args[0]!r}; choose from {known}") from exc

    optimizer = OptimizerSettings(
        kind=values["train"]["optimizer"],
        learning_rate=values["train"]["learning_rate"],
        momentum=values["train"]["momentum"],
        clip_norm=values["train"]["clip_norm"],
        epochs=values["train"]["epochs"],
    )
    return ExperimentConfig(
        train_corpus=Path(values["paths"]["train_corpus"]),
        test_corpus=Path(values["paths"]["test_corpus"]),
        checkpoint_dir=Path(values["paths"]["checkpoint_dir"]),
        results_path=Path(values["paths"]["results"]),
        vocab_path=Path(values["paths"]["vocab"]),
        max_len=values["model"]["max_len"],
        embed_dim=values["model"]["embed_dim"],
        num_heads=values["model"]["num_heads"],
        num_layers=values["model"]["num_layers"],
        ffn_width=values["model"]["ffn_width"],
        symbols_per_token=values["model"]["symbols_per_token"],
        feature_dim=values["model"]["feature_dim"],
        max_vocab=values["model"]["max_vocab"],
        min_freq=values["text"]["min_freq"],
        min_words=values["text"]["min_words"],
        n_elements=values["channel"]["n_elements"],
        train_snr_db=values["train"]["snr_db"],
        train_batch_size=values["train"]["batch_size"],
        optimizer=optimizer,
        val_fraction=values["train"]["val_fraction"],
        eval_snrs_db=values["eval"]["snrs_db"],
        csi_error_scales=values["eval"]["csi_error_scales"],
        seeds=values["eval"]["seeds"],
        eval_batch_size=values["eval"]["batch_size"],
        master_seed=values["run"]["master_seed"],
        variants=variants,
    )
