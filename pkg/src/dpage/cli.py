"""Command-line harness: gen-data, train, decode, eval.

Exit codes: 0 success, 1 I/O, 2 config/contract, 3 data format. Every
failure prints a single machine-parseable error line (E_IO / E_CONFIG /
E_DATA prefixed) to stderr before anything else.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__
from .checkpoint import load_checkpoint, save_checkpoint
from .datagen import (SynConfig, gen_syn_scale, gen_syn_sub, load_tsv_corpus,
                      read_token_lines, write_dataset)
from .decoding import (beam_topk_decode, dpage_decode_k, greedy_decode,
                       noise_decode_k, vae_decode_k)
from .errors import (ConfigError, ContractError, DataFormatError, DimensionError,
                     DomainError)
from .metrics import (confusion_matrix, distinct_n, jd_word_contributions,
                      jeffreys_divergence, length_report, multi_ref_bleu, sari,
                      word_distribution)
from .model import ModelConfig, Seq2SeqModel
from .training import TrainingConfig, train
from .vocab import ParaphrasePair, Vocabulary, build_vocab

REPORT_SCHEMA_VERSION = 1

EXIT_IO, EXIT_CONFIG, EXIT_DATA = 1, 2, 3


def _fail(code: int, tag: str, message: str) -> int:
    print(f"{tag}: {message}", file=sys.stderr)
    return code


def cmd_gen_data(args) -> int:
    config = SynConfig(seed=args.seed, train_inputs=args.train_inputs,
                       test_inputs=args.test_inputs)
    dataset = gen_syn_sub(config) if args.dataset == "syn-sub" else gen_syn_scale(config)
    write_dataset(dataset, args.out)
    return 0


def _load_training_data(data_dir: Path):
    tsv = data_dir / "train.tsv"
    if not tsv.exists():
        raise FileNotFoundError(f"{tsv} not found")
    loaded = load_tsv_corpus(tsv)
    if loaded.errors:
        for e in loaded.errors[:10]:
            print(f"warning: {tsv}: {e}", file=sys.stderr)
    if not loaded.pairs:
        raise DataFormatError(f"{tsv}: no valid pairs")
    vocab = build_vocab([s for s, _ in loaded.pairs] + [t for _, t in loaded.pairs])
    pairs = [ParaphrasePair(tuple(vocab.encode(s)), tuple(vocab.encode(t)))
             for s, t in loaded.pairs]
    return vocab, pairs


def cmd_train(args) -> int:
    data_dir = Path(args.data)
    vocab, pairs = _load_training_data(data_dir)
    k = 1 if args.mode == "seq2seq" else args.k
    model_cfg = ModelConfig(vocab_size=len(vocab), embed_dim=args.embed,
                            hidden_dim=args.hidden, num_layers=args.layers,
                            pattern_dim=args.pattern_dim, k=k, seed=args.seed)
    train_cfg = TrainingConfig(epochs=args.epochs, batch_size=args.batch,
                               lr=args.lr, decay_start=args.decay_start,
                               clip=args.clip, seed=args.seed, mode=args.mode)
    model = Seq2SeqModel(model_cfg, mode=args.mode)
    result = train(model, pairs, train_cfg)
    out_path = Path(args.out)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    save_checkpoint(model, out_path, training_config=train_cfg)
    _write_vocab(out_path.with_suffix(".vocab"), vocab)
    totals = [sum(c) for c in result.stats.per_epoch]
    log = {
        "schema_version": REPORT_SCHEMA_VERSION,
        "loss_curve": result.loss_curve,
        "assignments": result.stats.to_dict(),
        "assignment_fractions": [
            [c / t for c in counts]
            for counts, t in zip(result.stats.per_epoch, totals)],
        "config": asdict(train_cfg),
        "model_config": asdict(model_cfg),
    }
    with open(out_path.parent / "training_log.json", "w", encoding="utf-8") as f:
        json.dump(log, f, indent=2, sort_keys=True)
        f.write("\n")
    return 0


def _write_vocab(path: Path, vocab: Vocabulary):
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for tok in vocab.id_to_token[4:]:
            f.write(tok + "\n")


def _read_vocab(path: Path) -> Vocabulary:
    if not path.exists():
        raise FileNotFoundError(f"{path} not found (expected next to checkpoint)")
    with open(path, encoding="utf-8") as f:
        return Vocabulary([line.rstrip("\n") for line in f if line.strip()])


def cmd_decode(args) -> int:
    model, header = load_checkpoint(args.checkpoint)
    vocab = _read_vocab(Path(args.checkpoint).with_suffix(".vocab"))
    trained_mode = header["mode"]
    mode = args.mode
    compatible = {
        "dpage": ("dpage",),
        "noise": ("noise",),
        "vae": ("vae",),
        "beam": ("seq2seq",),
        "greedy": ("seq2seq",),
    }
    if trained_mode not in compatible[mode]:
        raise ConfigError(
            f"decode mode {mode!r} is incompatible with a checkpoint trained "
            f"in mode {trained_mode!r}")
    k = model.config.k if mode == "dpage" else args.k
    if mode == "greedy":
        k = 1
    if mode == "beam" and k > args.beam:
        raise ConfigError(f"top-k {k} exceeds beam size {args.beam}")
    sources = read_token_lines(args.src)
    if not sources:
        raise DataFormatError(f"{args.src}: no input lines")
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    outputs: list[list[str]] = [[] for _ in range(k)]
    for tokens in sources:
        ids = vocab.encode(tokens)
        if mode == "dpage":
            hyps = dpage_decode_k(model, ids, beam_size=args.beam, max_len=args.max_len)
        elif mode == "beam":
            hyps = beam_topk_decode(model, ids, beam_size=args.beam, top_k=k,
                                    max_len=args.max_len)
        elif mode == "noise":
            hyps = noise_decode_k(model, ids, beam_size=args.beam, k=k,
                                  seed=args.noise_seed, max_len=args.max_len)
        elif mode == "vae":
            hyps = vae_decode_k(model, ids, beam_size=args.beam, k=k,
                                seed=args.noise_seed, max_len=args.max_len)
        else:
            hyps = [greedy_decode(model, ids, max_len=args.max_len)]
        for i, h in enumerate(hyps):
            outputs[i].append(vocab.decode_text(h.output_ids))
    for i, lines in enumerate(outputs):
        with open(out_dir / f"decoder_{i}.txt", "w", encoding="utf-8",
                  newline="\n") as f:
            for line in lines:
                f.write(line + "\n")
    return 0


def cmd_eval(args) -> int:
    sources = read_token_lines(args.src)
    out_dir = Path(args.outputs)
    decoder_files = sorted(out_dir.glob("decoder_*.txt"),
                           key=lambda p: int(p.stem.split("_")[1]))
    if not decoder_files:
        raise DataFormatError(f"{out_dir}: no decoder_*.txt files")
    outputs = [read_token_lines(p) for p in decoder_files]
    refs = [read_token_lines(p) for p in args.refs]
    n = len(sources)
    for path, corpus in zip(decoder_files + list(args.refs), outputs + refs):
        if len(corpus) != n:
            raise ContractError(
                f"{path}: {len(corpus)} lines, expected {n} (aligned to {args.src})")
    ref_sets_per_line = [[r[i] for r in refs] for i in range(n)]
    per_decoder = []
    for lines in outputs:
        entry = {
            "bleu": multi_ref_bleu(lines, ref_sets_per_line),
            "sari": sari(sources, lines, ref_sets_per_line),
            "avg_len": sum(len(t) for t in lines) / n,
        }
        for order in (1, 2):
            try:
                entry[f"distinct_{order}"] = distinct_n(lines, order)
            except ContractError:
                entry[f"distinct_{order}"] = None
        per_decoder.append(entry)
    try:
        dists = [word_distribution(lines) for lines in outputs]
    except ContractError:  # a decoder produced only empty lines
        dists = []
    jd = jeffreys_divergence(dists) if len(dists) >= 2 else None
    contributions = (jd_word_contributions(dists, top_m=10)
                     if len(dists) >= 2 else None)
    cm = confusion_matrix(outputs, refs) if len(refs) == len(outputs) else None
    lengths = length_report(sources, outputs)
    report_path = Path(args.report)
    report_path.parent.mkdir(parents=True, exist_ok=True)
    confusion_path = report_path.parent / "confusion.csv"
    invocation = ["eval", "--outputs", str(args.outputs), "--src", str(args.src),
                  "--report", str(args.report)] + ["--refs"] + [str(r) for r in args.refs]
    run_id = hashlib.sha256(" ".join(invocation).encode("utf-8")).hexdigest()[:16]
    report = {
        "schema_version": REPORT_SCHEMA_VERSION,
        "tool_version": __version__,
        "run_id": run_id,
        "invocation": invocation,
        "num_lines": n,
        "per_decoder": per_decoder,
        "jeffreys_divergence": jd,
        "jd_top_words": [[{"word": w, "contribution": c} for w, c in ranked]
                         for ranked in contributions] if contributions else None,
        "lengths": {"source_avg": lengths.source_avg,
                    "decoder_avg": lengths.decoder_avg,
                    "spread": lengths.spread},
        "confusion_matrix_path": str(confusion_path) if cm else None,
    }
    if cm:
        with open(confusion_path, "w", encoding="utf-8", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(["decoder"] + [f"ref_{j}" for j in range(len(refs))])
            for i, row in enumerate(cm.scores):
                writer.writerow([f"decoder_{i}"] + [f"{v:.6f}" for v in row])
    with open(report_path, "w", encoding="utf-8") as f:
        json.dump(report, f, indent=2, sort_keys=True)
        f.write("\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dpage",
                                     description="diverse paraphrase generation lab")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-data", help="generate a synthetic benchmark")
    g.add_argument("dataset", choices=["syn-sub", "syn-scale"])
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.add_argument("--train-inputs", type=int, default=5000)
    g.add_argument("--test-inputs", type=int, default=1000)
    g.set_defaults(func=cmd_gen_data)

    t = sub.add_parser("train", help="train a model on train.tsv")
    t.add_argument("--data", required=True, help="directory containing train.tsv")
    t.add_argument("--mode", choices=["dpage", "seq2seq", "noise", "vae"],
                   default="dpage")
    t.add_argument("--k", type=int, default=5)
    t.add_argument("--hidden", type=int, default=64)
    t.add_argument("--embed", type=int, default=32)
    t.add_argument("--pattern-dim", type=int, default=8)
    t.add_argument("--layers", type=int, default=1)
    t.add_argument("--epochs", type=int, default=10)
    t.add_argument("--lr", type=float, default=1.0)
    t.add_argument("--decay-start", type=int, default=5)
    t.add_argument("--clip", type=float, default=5.0)
    t.add_argument("--batch", type=int, default=32)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--out", required=True, help="checkpoint output path")
    t.set_defaults(func=cmd_train)

    d = sub.add_parser("decode", help="generate K outputs per input line")
    d.add_argument("--checkpoint", required=True)
    d.add_argument("--src", required=True)
    d.add_argument("--mode", choices=["dpage", "beam", "noise", "vae", "greedy"],
                   default="dpage")
    d.add_argument("--k", type=int, default=5)
    d.add_argument("--beam", type=int, default=5)
    d.add_argument("--max-len", type=int, default=30)
    d.add_argument("--noise-seed", type=int, default=0)
    d.add_argument("--out", required=True)
    d.set_defaults(func=cmd_decode)

    e = sub.add_parser("eval", help="score decoder outputs against references")
    e.add_argument("--outputs", required=True, help="directory of decoder_*.txt")
    e.add_argument("--src", required=True)
    e.add_argument("--refs", nargs="+", required=True)
    e.add_argument("--report", required=True, help="report.json output path")
    e.set_defaults(func=cmd_eval)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (OSError, IOError) as e:
        return _fail(EXIT_IO, "E_IO", str(e))
    except (ConfigError, ContractError, DimensionError, DomainError) as e:
        return _fail(EXIT_CONFIG, "E_CONFIG", str(e))
    except DataFormatError as e:
        return _fail(EXIT_DATA, "E_DATA", str(e))


if __name__ == "__main__":
    sys.exit(main())
