"""Command-line front end.

Commands:  train, eval, sweep, phase-bench, bleu.  Exit codes: 0 success,
2 configuration error, 3 I/O error, 4 numerical failure.  All commands are
batch jobs driven by a config file (see `.config`) and explicit seeds; no
randomness comes from system entropy.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys

import numpy as np

from . import harness
from .channel import align_phases, aligned_gain_magnitude, effective_gain, sample_channels
from .config import load_config
from .errors import ConfigError, NumericalError
from .harness import SystemVariant, derive_seed
from .metrics import BleuConfig, bleu, corpus_bleu
from .text import tokenize


def _selected_variants(config, name: str | None) -> tuple[SystemVariant, ...]:
    if name is None:
        return config.variants
    try:
        return (SystemVariant[name],)
    except KeyError:
        known = ", ".join(v.name for v in SystemVariant)
        raise ConfigError(f"unknown variant {name!r}; choose from {known}") from None


def cmd_train(args) -> int:
    config = load_config(args.config)
    data = harness.prepare_data(config)
    config.checkpoint_dir.mkdir(parents=True, exist_ok=True)
    config.vocab_path.parent.mkdir(parents=True, exist_ok=True)
    data.vocab.save(config.vocab_path)
    seeds = (args.seed,) if args.seed is not None else config.seeds
    for variant in _selected_variants(config, args.variant):
        for seed in seeds:
            print(f"training {variant.value} seed {seed} "
                  f"({data.train_ids.shape[0]} sentences, vocab {data.vocab.size})", flush=True)
            outcome = harness.train(
                config, data, variant, seed,
                progress=lambda line: print(f"  {line}", flush=True),
            )
            path = harness.save_outcome(config, variant, seed, outcome)
            print(f"  best epoch {outcome.best_epoch} "
                  f"(val_loss {outcome.best_val_loss:.6f}) -> {path}", flush=True)
    return 0


def cmd_eval(args) -> int:
    config = load_config(args.config)
    data = harness.prepare_data(config)
    (variant,) = _selected_variants(config, args.variant)
    seeds = (args.seed,) if args.seed is not None else config.seeds
    rows = []
    for seed in seeds:
        model = harness.load_trained_model(config, data, variant, seed)
        rows.append(
            harness.evaluate(model, data, config, variant, args.snr, args.epsilon, seed)
        )
    print(harness.RESULT_HEADER)
    for row in rows:
        print(row.csv_row())
    if args.out:
        harness.write_results_csv(args.out, rows)
    return 0


def cmd_sweep(args) -> int:
    config = load_config(args.config)
    if args.out:
        config = dataclasses.replace(config, results_path=args.out)
    data = harness.prepare_data(config)
    rows = harness.sweep(config, data)
    for line in harness.summarize(rows):
        print(line)
    print(f"wrote {len(rows)} rows to {config.results_path}")
    return 0


def cmd_phase_bench(args) -> int:
    """Monte-Carlo check that phase alignment is where it should be.

    Reports the worst gap between the constructive closed form and the
    directly evaluated aligned gain, the average gain with and without the
    surface, and how many random reflection configurations beat alignment
    (this stays 0).
    """
    if args.trials < 1 or args.n_elements < 1 or args.random_configs < 0:
        raise ConfigError("phase-bench needs positive trials and n_elements")
    rng_root = derive_seed(args.seed)
    children = rng_root.spawn(args.trials)
    worst_gap = 0.0
    beats = 0
    direct_sum = 0.0
    aligned_sum = 0.0
    for trial in range(args.trials):
        channels = sample_channels(args.n_elements, children[trial])
        closed = float(aligned_gain_magnitude(channels))
        direct_mag = float(np.abs(channels.direct))
        evaluated = float(np.abs(effective_gain(channels, align_phases(channels))))
        worst_gap = max(worst_gap, abs(closed - evaluated))
        direct_sum += direct_mag
        aligned_sum += closed
        if args.random_configs:
            rng = np.random.default_rng(derive_seed(args.seed, 1, trial))
            phases = rng.uniform(0.0, 2.0 * np.pi, size=(args.random_configs, args.n_elements))
            cascade = np.sum(
                (1.0 / args.n_elements) * np.exp(1j * phases) * channels.tx_ris * channels.ris_rx,
                axis=-1,
            )
            magnitudes = np.abs(channels.direct + cascade)
            beats += int(np.sum(magnitudes > closed))
    print(f"trials={args.trials} n_elements={args.n_elements} random_configs={args.random_configs}")
    print(f"max_closed_form_gap={worst_gap:.3e}")
    print(f"mean_direct_gain={direct_sum / args.trials:.6f}")
    print(f"mean_aligned_gain={aligned_sum / args.trials:.6f}")
    print(f"mean_gain_ratio={aligned_sum / max(direct_sum, 1e-300):.6f}")
    print(f"configs_beating_alignment={beats}")
    return 0


def cmd_bleu(args) -> int:
    from .text import load_corpus  # local import keeps the fast path light

    refs = load_corpus(args.reference)
    cands = load_corpus(args.candidate)
    if len(refs) != len(cands):
        raise ConfigError(
            f"line counts differ: {args.reference} has {len(refs)}, {args.candidate} has {len(cands)}"
        )
    if not refs:
        raise ConfigError("empty input files")
    config = BleuConfig({args.order: 1.0})
    pairs = [(tokenize(r), tokenize(c)) for r, c in zip(refs, cands)]
    sentence_scores = [bleu(r, c, config) for r, c in pairs]
    print(f"corpus_bleu={corpus_bleu(pairs, config)!r}")
    print(f"mean_sentence_bleu={sum(sentence_scores) / len(sentence_scores)!r}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ris-semcom",
        description="desk-scale simulator of a reflecting-surface-assisted semantic text link",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train checkpoints for configured variants")
    p_train.add_argument("--config", required=True)
    p_train.add_argument("--variant", help="train only this variant")
    p_train.add_argument("--seed", type=int, help="train only this seed")
    p_train.set_defaults(func=cmd_train)

    p_eval = sub.add_parser("eval", help="evaluate a checkpoint at one condition")
    p_eval.add_argument("--config", required=True)
    p_eval.add_argument("--variant", required=True)
    p_eval.add_argument("--snr", type=float, required=True, help="test SNR in dB")
    p_eval.add_argument("--epsilon", type=float, default=0.0, help="CSI error scale")
    p_eval.add_argument("--seed", type=int, help="evaluate only this seed")
    p_eval.add_argument("--out", help="also write rows to this CSV")
    p_eval.set_defaults(func=cmd_eval)

    p_sweep = sub.add_parser("sweep", help="evaluate the full configured grid")
    p_sweep.add_argument("--config", required=True)
    p_sweep.add_argument("--out", help="override the results path")
    p_sweep.set_defaults(func=cmd_sweep)

    p_bench = sub.add_parser("phase-bench", help="Monte-Carlo phase-alignment report")
    p_bench.add_argument("--n-elements", type=int, default=10)
    p_bench.add_argument("--trials", type=int, default=1000)
    p_bench.add_argument("--random-configs", type=int, default=100,
                         help="random reflection configs tried per trial")
    p_bench.add_argument("--seed", type=int, default=0)
    p_bench.set_defaults(func=cmd_phase_bench)

    p_bleu = sub.add_parser("bleu", help="score a candidate file against a reference file")
    p_bleu.add_argument("reference")
    p_bleu.add_argument("candidate")
    p_bleu.add_argument("--order", type=int, default=1, help="n-gram order to score")
    p_bleu.set_defaults(func=cmd_bleu)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 3
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    raise SystemExit(main())
