"""Command-line pipeline driver.

Subcommands cover the four pipeline stages (train-classifier, label,
train, eval) plus corpus synthesis, the parameter-cost table, and the
inference service. Exit codes: 0 success, 1 usage error, 2 data error.
"""
from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import corpus as corpus_mod
from . import training
from .classifier import train_classifier
from .corpus import LexicalOracle, encode_pairs, ingest_pairs, split, synth_corpus, write_pairs_tsv
from .errors import ContractError, FormatError, IntegrityError
from .evaluation import evaluate, export_heatmap
from .training import (
    PROFILES,
    classifier_config_dict,
    config_digest,
    dialogue_config_dict,
    load_checkpoint,
    model_from_checkpoint,
    save_checkpoint,
    train_dialogue,
)
from .variants import VARIANT_TAGS, count_extra_params
from .vocab import ALL_EMOTIONS, build_vocab, emotion_id, tokenize


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _build_parser() -> _Parser:
    p = _Parser(prog="emoseq", description="emotion-conditioned dialogue pipeline")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", help="generate a synthetic emotion-marked corpus")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)

    s = sub.add_parser("train-classifier", help="train the emotion classifier")
    s.add_argument("--data", required=True, help="TSV: text TAB emotion")
    s.add_argument("--out", required=True)
    s.add_argument("--profile", choices=sorted(PROFILES), default="desk")
    s.add_argument("--epochs", type=int, default=10)
    s.add_argument("--seed", type=int, default=0)

    s = sub.add_parser("label", help="label a pair corpus with the classifier")
    s.add_argument("--in", dest="inp", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--classifier", required=True, help="checkpoint path or 'oracle'")
    s.add_argument("--theta", type=float, default=0.35)
    s.add_argument("--min-words", type=int, default=1)

    s = sub.add_parser("train", help="train one dialogue variant")
    s.add_argument("--variant", choices=VARIANT_TAGS + ("baseline",), required=True)
    s.add_argument("--data", required=True, help="labeled pair TSV")
    s.add_argument("--out", required=True)
    s.add_argument("--profile", choices=sorted(PROFILES), default="desk")
    s.add_argument("--steps", type=int, default=None)
    s.add_argument("--epochs", type=int, default=None)
    s.add_argument("--seed", type=int, default=0)

    s = sub.add_parser("eval", help="estimated-accuracy evaluation")
    s.add_argument("--model", required=True)
    s.add_argument("--classifier", required=True, help="checkpoint path or 'oracle'")
    s.add_argument("--test", required=True, help="pair TSV; sources are used")
    s.add_argument("--out", default=None, help="report JSON path")
    s.add_argument("--n-sources", type=int, default=100)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--heatmap-dir", default=None,
                   help="export per-emotion attention heatmaps for the first source")

    s = sub.add_parser("params", help="extra-parameter accounting per variant")
    s.add_argument("--dims", default="D=600,V=25000,m=30,S=10")
    s.add_argument("--mode", choices=("paper", "actual", "both"), default="paper")

    s = sub.add_parser("serve", help="run the inference service")
    s.add_argument("--model", action="append", required=True, help="checkpoint; repeatable")
    s.add_argument("--classifier", required=True, help="checkpoint path or 'oracle'")
    s.add_argument("--port", type=int, default=8080)
    s.add_argument("--host", default="127.0.0.1")
    s.add_argument("--frontend", default=None, help="static UI directory")
    return p


def _parse_dims(text: str) -> dict:
    dims = {}
    for part in text.split(","):
        if "=" not in part:
            raise UsageError(f"bad --dims entry {part!r}")
        k, v = part.split("=", 1)
        dims[k.strip()] = int(v)
    for key in ("D", "V", "m", "S"):
        if key not in dims:
            raise UsageError(f"--dims missing {key}")
    return dims


def _load_classifier(spec: str):
    if spec == "oracle":
        return LexicalOracle()
    return model_from_checkpoint(load_checkpoint(spec))


def _read_labeled_texts(path):
    samples = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            fields = line.split("\t")
            if len(fields) != 2:
                raise FormatError("expected text TAB emotion", line_no)
            samples.append((fields[0], emotion_id(fields[1])))
    return samples


def cmd_synth(args) -> int:
    pairs, _ = synth_corpus(args.n, args.seed)
    write_pairs_tsv(pairs, args.out)
    print(f"wrote {len(pairs)} pairs to {args.out}")
    return 0


def cmd_train_classifier(args) -> int:
    cfg = PROFILES[args.profile](seed=args.seed)
    samples = _read_labeled_texts(args.data)
    toks = [corpus_mod.TextPair(tokenize(t), [], emotion=e) for t, e in samples]
    vocab = build_vocab(toks, cfg.vocab_cap)
    model, metrics = train_classifier(
        samples, vocab, d_c=cfg.classifier_dim, d_w=cfg.d_w, epochs=args.epochs,
        batch_size=cfg.batch_size, seed=args.seed, drop_p=cfg.drop_p,
    )
    save_checkpoint(args.out, "classifier", model, classifier_config_dict(cfg))
    print(f"held-out accuracy={metrics.accuracy:.4f} precision={metrics.precision:.4f} "
          f"recall={metrics.recall:.4f} f1={metrics.f1:.4f}")
    print(f"saved classifier to {args.out}")
    return 0


def cmd_label(args) -> int:
    from .classifier import label_corpus

    classifier = _load_classifier(args.classifier)
    pairs, stats = ingest_pairs(args.inp, min_words=args.min_words)
    labeled, lstats = label_corpus(classifier, pairs, theta=args.theta)
    write_pairs_tsv(labeled, args.out)
    print(f"labeled {lstats['n']} pairs; below threshold: {lstats['below_fraction']:.3f}")
    return 0


def cmd_train(args) -> int:
    cfg = PROFILES[args.profile](seed=args.seed)
    if args.steps is not None:
        cfg.max_steps = args.steps
    if args.epochs is not None:
        cfg.epochs = args.epochs
    if cfg.max_steps is None and cfg.epochs is None:
        cfg.epochs = 5
    raw, stats = ingest_pairs(args.data, min_words=cfg.min_words)
    if not raw:
        raise ContractError(f"no usable pairs in {args.data}")
    vocab = build_vocab(raw, cfg.vocab_cap)
    pairs = encode_pairs(raw, vocab)
    train_pairs, dev_pairs = split(pairs, cfg.split_ratio, seed=cfg.seed)
    tag = None if args.variant == "baseline" else args.variant
    model, history = train_dialogue(tag, train_pairs, vocab, cfg, dev_pairs=dev_pairs)
    save_checkpoint(args.out, args.variant, model, dialogue_config_dict(cfg))
    final = history["loss"][-1]
    dev = history["dev_loss"][-1][1] if history["dev_loss"] else float("nan")
    print(f"steps={len(history['loss'])} final_loss={final:.4f} dev_loss={dev:.4f}")
    print(f"saved checkpoint to {args.out}")
    return 0


def cmd_eval(args) -> int:
    model = model_from_checkpoint(load_checkpoint(args.model))
    classifier = _load_classifier(args.classifier)
    raw, _ = ingest_pairs(args.test, min_words=1)
    seen = set()
    sources = []
    for p in raw:
        text = " ".join(p.source_tokens)
        if text not in seen:
            seen.add(text)
            sources.append(text)
        if len(sources) >= args.n_sources:
            break
    if not sources:
        raise ContractError(f"no test sources in {args.test}")
    keep = 9 if args.heatmap_dir else 0
    report = evaluate(model, classifier, sources, seed=args.seed, keep_traces=keep)
    text = report.to_json(args.out)
    if args.out:
        print(f"wrote report to {args.out}")
    else:
        print(text)
    print(f"average estimated accuracy: {report.average:.4f}")
    if args.heatmap_dir:
        os.makedirs(args.heatmap_dir, exist_ok=True)
        for trace in report.traces:
            from .vocab import EMOTIONS

            name = EMOTIONS[trace.emotion] if trace.emotion is not None else "none"
            export_heatmap(trace, os.path.join(args.heatmap_dir, f"heatmap_{name}.tsv"))
        print(f"wrote {len(report.traces)} heatmaps to {args.heatmap_dir}")
    return 0


def cmd_params(args) -> int:
    dims = _parse_dims(args.dims)
    modes = ("paper", "actual") if args.mode == "both" else (args.mode,)
    header = "variant".ljust(12) + "".join(m.rjust(16) for m in modes)
    print(header)
    for tag in VARIANT_TAGS:
        row = tag.ljust(12)
        for m in modes:
            row += f"{count_extra_params(tag, dims, m):,}".rjust(16)
        print(row)
    return 0


def cmd_serve(args) -> int:
    from .service import serve

    models = {}
    for path in args.model:
        ckpt = load_checkpoint(path)
        if ckpt.kind == "classifier":
            raise ContractError(f"{path} is a classifier checkpoint, not a dialogue model")
        models[ckpt.kind] = model_from_checkpoint(ckpt)
    classifier = _load_classifier(args.classifier)
    port = int(os.environ.get("EMOSEQ_PORT", args.port))
    serve(models, classifier, port=port, host=args.host, frontend_dir=args.frontend)
    return 0


_COMMANDS = {
    "synth": cmd_synth,
    "train-classifier": cmd_train_classifier,
    "label": cmd_label,
    "train": cmd_train,
    "eval": cmd_eval,
    "params": cmd_params,
    "serve": cmd_serve,
}


def cli(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return 1
    try:
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ContractError, FormatError, IntegrityError, FileNotFoundError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main():
    sys.exit(cli(sys.argv[1:]))


if __name__ == "__main__":
    main()
