"""Command-line surface: dataset generation, training, recognition, and
evaluation."""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import tensor as T
from .checkpoint import CheckpointError, load_model
from .data import (export_heatmap, gen_dataset, load_dataset, read_pgm,
                   save_dataset)
from .decoding import (DEFAULT_BEAM, DEFAULT_MAX_LEN, Lexicon, beam_search,
                       lexicon_select)
from .features import ExtractorConfig, extract_features
from .model import ModelConfig, RecognizerModel
from .seq2seq import DEFAULT_CHARSET, SeqModelConfig
from .training import TrainConfig, TrainingDiverged, train_loop
from .windowing import RawImage


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def build_parser() -> _Parser:
    parser = _Parser(prog="scantext",
                     description="Sliding-window text-line recognizer")
    sub = parser.add_subparsers(dest="command")

    g = sub.add_parser("gen-data", help="render a synthetic dataset")
    g.add_argument("--out", required=True)
    g.add_argument("--count", type=int, required=True)
    g.add_argument("--min-len", type=int, default=1)
    g.add_argument("--max-len", type=int, default=6)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--charset", default=DEFAULT_CHARSET)

    t = sub.add_parser("train", help="train a recognizer")
    t.add_argument("--data", required=True)
    t.add_argument("--out", required=True)
    t.add_argument("--preset", choices=["paper", "desk"], default="desk")
    t.add_argument("--epochs", type=int, default=50)
    t.add_argument("--batch", type=int, default=None)
    t.add_argument("--lr", type=float, default=5e-4)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--scales", default=None,
                   help="comma-separated window widths, e.g. 32,40,48")
    t.add_argument("--clip", type=float, default=0.1)
    t.add_argument("--dropout", type=float, default=0.5)
    t.add_argument("--fraction", type=float, default=None,
                   help="fraction of the training set sampled per epoch")
    t.add_argument("--stop-acc", type=float, default=None,
                   help="stop early once dev accuracy reaches this value")
    t.add_argument("--charset", default=None,
                   help="model charset; defaults to the symbols in the data")
    t.add_argument("--f64", action="store_true",
                   help="train in float64 (default float32)")

    r = sub.add_parser("recognize", help="read one image")
    r.add_argument("--ckpt", required=True)
    r.add_argument("--image", required=True)
    r.add_argument("--lexicon", default=None)
    r.add_argument("--beam", type=int, default=DEFAULT_BEAM)
    r.add_argument("--max-len", type=int, default=DEFAULT_MAX_LEN)
    r.add_argument("--heatmap", default=None,
                   help="write the last decoder layer's attention as a PGM")

    e = sub.add_parser("eval", help="sequence accuracy over a dataset split")
    e.add_argument("--ckpt", required=True)
    e.add_argument("--data", required=True)
    e.add_argument("--split", choices=["train", "dev"], default="dev")
    e.add_argument("--lexicon", default=None)
    e.add_argument("--beam", type=int, default=DEFAULT_BEAM)
    return parser


def _cmd_gen_data(args) -> int:
    train, dev = gen_dataset(args.charset, args.count, args.min_len,
                             args.max_len, args.seed)
    save_dataset(args.out, train, dev)
    print(f"wrote {len(train)} train / {len(dev)} dev samples to {args.out}")
    return 0


def _parse_scales(text: str) -> tuple[int, ...]:
    try:
        scales = tuple(int(s) for s in text.split(","))
    except ValueError:
        raise _UsageError(f"bad --scales value {text!r}") from None
    if not scales:
        raise _UsageError("--scales needs at least one width")
    return scales


def _cmd_train(args) -> int:
    train, dev = load_dataset(args.data)
    if not train:
        raise ValueError(f"no training samples under {args.data}")
    max_label = SeqModelConfig().max_tgt_positions - 1  # room for </s>
    for s in train + dev:
        if not 1 <= len(s.label) <= max_label:
            raise ValueError(f"label {s.label!r} outside 1..{max_label} symbols")
    charset = args.charset
    if charset is None:
        charset = "".join(sorted({c for s in train + dev for c in s.label}))
    scales = _parse_scales(args.scales) if args.scales else (40,)

    if not args.f64:
        T.set_default_dtype(np.float32)
    try:
        cfg_cls = TrainConfig.desk if args.preset == "desk" else TrainConfig
        overrides = dict(lr=args.lr, clip_norm=args.clip, epochs=args.epochs,
                         dropout_p=args.dropout, seed=args.seed)
        if args.batch is not None:
            overrides["batch_size"] = args.batch
        if args.fraction is not None:
            overrides["epoch_fraction"] = args.fraction
        train_cfg = cfg_cls(**overrides)

        model_cfg = ModelConfig(
            charset=charset, scales=scales,
            extractor=ExtractorConfig(preset=args.preset,
                                      input_channels=len(scales)),
            seq=SeqModelConfig(dropout_p=args.dropout))
        model = RecognizerModel(model_cfg, seed=args.seed)
        report = train_loop(train, train_cfg, model, dev=dev,
                            checkpoint_path=args.out,
                            stop_accuracy=args.stop_acc,
                            log=lambda msg: print(msg, flush=True))
    finally:
        T.set_default_dtype(np.float64)
    print(f"best dev accuracy {report.best_accuracy:.4f} "
          f"(epoch {report.best_epoch}) in {report.wall_time:.1f}s; "
          f"checkpoint at {args.out}")
    return 0


def _recognize_one(model: RecognizerModel, image: RawImage, beam: int,
                   max_len: int, lexicon: Lexicon | None):
    ws = model.windows_for_image(image)
    feats = extract_features(ws, model.extractor)
    hyps = beam_search(model.seq2seq, feats, beam, max_len)
    text = lexicon_select(hyps, lexicon, model.vocab) if lexicon \
        else hyps[0].text(model.vocab)
    return text, hyps, ws


def _cmd_recognize(args) -> int:
    model = load_model(args.ckpt)
    image = RawImage(pixels=read_pgm(args.image))
    lexicon = Lexicon.load(args.lexicon) if args.lexicon else None
    text, hyps, ws = _recognize_one(model, image, args.beam, args.max_len,
                                    lexicon)
    if args.heatmap:
        tokens = hyps[0].tokens
        feed = np.array([model.vocab.bos_id, *tokens[:-1]], dtype=np.int64)
        with T.no_grad():
            src = model.seq2seq.encode_source(
                model.features_from_windows(ws.windows[None]))
            _, amap = model.seq2seq.decode_teacher_forced(feed, src)
        export_heatmap(amap, amap.dec_layers - 1, ws.centers, args.heatmap)
    print(text)
    return 0


def _cmd_eval(args) -> int:
    model = load_model(args.ckpt)
    samples = load_dataset(args.data)[0 if args.split == "train" else 1]
    if not samples:
        raise ValueError(f"no {args.split} samples under {args.data}")
    lexicon = Lexicon.load(args.lexicon) if args.lexicon else None
    hits = 0
    for s in samples:
        text, _, _ = _recognize_one(model, s.image, args.beam,
                                    DEFAULT_MAX_LEN, lexicon)
        hits += text == s.label
    print(f"sequence accuracy: {hits / len(samples):.4f}")
    return 0


_COMMANDS = {
    "gen-data": _cmd_gen_data,
    "train": _cmd_train,
    "recognize": _cmd_recognize,
    "eval": _cmd_eval,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            parser.print_usage(sys.stderr)
            return 1
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return 1
    try:
        return _COMMANDS[args.command](args)
    except (OSError, ValueError, CheckpointError, TrainingDiverged,
            FloatingPointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
