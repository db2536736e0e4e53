"""Command-line entry points: train, evaluate, generate-corpus,
export-embeddings.  Verbosity is controlled by the LGCSED_VERBOSE env var
(0 = warnings, 1 = info, 2 = debug)."""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys

import numpy as np

from .dataset import export_corpus, generate_corpus
from .evaluation import format_report
from .trainer import RunConfig, Trainer, parse_config_file


def _setup_logging():
    level = {"0": logging.WARNING, "1": logging.INFO, "2": logging.DEBUG}.get(
        os.environ.get("LGCSED_VERBOSE", "1"), logging.INFO)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


def cmd_train(args) -> int:
    cfg = parse_config_file(args.config) if args.config else RunConfig()
    if args.out:
        cfg.out_dir = args.out
    trainer = Trainer(cfg)
    final = trainer.run()
    print(json.dumps(final))
    return 0


def cmd_evaluate(args) -> int:
    trainer = Trainer.resume(args.checkpoint)
    scores = trainer.evaluate()
    print(format_report(scores["frame_f1"], {"macro_f1": scores["event_f1"], "per_class": {}}))
    print(json.dumps(scores))
    return 0


def cmd_generate_corpus(args) -> int:
    manifest, waveforms = generate_corpus(
        args.n_strong, args.n_weak, args.n_unlabeled, args.n_classes,
        seed=args.seed, clip_len_s=args.clip_len)
    export_corpus(manifest, waveforms, args.out)
    print(f"wrote {len(manifest.clips)} clips to {args.out}")
    return 0


def cmd_export_embeddings(args) -> int:
    trainer = Trainer.resume(args.checkpoint)
    q, v, targets, probs = trainer.export_embeddings()
    with open(args.out, "w") as fh:
        for k in range(q.shape[0]):
            row = {
                "frame": k,
                "targets": targets[k].tolist(),
                "features": [round(float(x), 8) for x in q[k]],
                "projection": [round(float(x), 8) for x in v[k]],
                "teacher_probs": [round(float(x), 6) for x in probs[k]],
            }
            fh.write(json.dumps(row) + "\n")
    print(f"wrote {q.shape[0]} frame embeddings to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lgcsed")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="run the two-phase training schedule")
    p.add_argument("--config", help="plain-text key=value config file")
    p.add_argument("--out", help="override output directory")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="score a checkpoint on the validation split")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--split", default="val", choices=["val"])
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("generate-corpus", help="synthesize a labeled corpus to disk")
    p.add_argument("--out", required=True)
    p.add_argument("--n-strong", type=int, default=40)
    p.add_argument("--n-weak", type=int, default=40)
    p.add_argument("--n-unlabeled", type=int, default=120)
    p.add_argument("--n-classes", type=int, default=3)
    p.add_argument("--clip-len", type=float, default=5.0)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_generate_corpus)

    p = sub.add_parser("export-embeddings", help="dump teacher frame embeddings")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_export_embeddings)

    return parser


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
