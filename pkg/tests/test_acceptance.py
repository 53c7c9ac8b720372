"""Acceptance gate: one test per criterion, each printing a pass/fail line.

Run with `pytest tests/test_acceptance.py -v -s` to see the per-criterion
lines as they complete.  The two end-to-end trainings dominate the wall
time; everything else finishes in seconds.
"""

import functools
import itertools
import time

import numpy as np
import pytest

import scantext.tensor as T
from scantext.checkpoint import load_model, save_checkpoint
from scantext.cli import main as cli_main
from scantext.data import (Sample, gen_dataset, load_dataset, render_textline,
                           save_dataset, write_pgm)
from scantext.decoding import _next_logprobs, beam_search, levenshtein
from scantext.features import ExtractorConfig, FeatureSequence, extract_features
from scantext.model import ModelConfig, RecognizerModel
from scantext.optim import finite_diff_check
from scantext.seq2seq import ConvSeq2Seq, SeqModelConfig, Vocabulary
from scantext.tensor import Tensor, no_grad
from scantext.training import (TrainConfig, greedy_decode_batch, nll_loss,
                               train_step)
from scantext.windowing import extract_windows, normalize_image


def _criterion(name: str, ok: bool, detail: str = "") -> None:
    line = f"[{'PASS' if ok else 'FAIL'}] {name}"
    if detail:
        line += f"  ({detail})"
    print(line, flush=True)
    assert ok, line


TINY = SeqModelConfig(d_hidden=8, enc_layers=2, dec_layers=2, enc_kernel=3,
                      dec_kernel=3, dropout_p=0.0, max_src_positions=12,
                      max_tgt_positions=10)


def test_gradient_correctness():
    """Full desk pipeline vs central finite differences, 64-bit, dropout off:
    >=100 sampled parameter coordinates at < 1e-4 relative error in < 5 min."""
    cfg = ModelConfig(charset="0123456789", scales=(40,),
                      extractor=ExtractorConfig(preset="desk", input_channels=1),
                      seq=SeqModelConfig())
    model = RecognizerModel(cfg, seed=7)

    # A few optimizer steps first: at this point gradients sit well above the
    # finite-difference noise floor, so the oracle actually measures them.
    warm_labels = ["1", "23", "456", "7890", "13579", "246802"]
    warm = [Sample(image=render_textline(warm_labels[i % 6], seed=i),
                   label=warm_labels[i % 6]) for i in range(12)]
    tcfg = TrainConfig.desk(epochs=1, seed=0)
    rng = np.random.default_rng(0)
    for _ in range(30):
        train_step(warm, model, tcfg, rng)

    labels = ["407", "18", "92635"]
    images = [render_textline(lbl, seed=3 + i) for i, lbl in enumerate(labels)]
    windows = model.windows_batch(images)
    tgt_in, tgt_out, _ = model.prepare_targets(labels)

    def f():
        logits, _ = model.logits_for_batch(windows, tgt_in, training=False)
        return nll_loss(logits, tgt_out, pad_id=model.vocab.pad_id)

    start = time.monotonic()
    err = finite_diff_check(f, model.parameters(), eps=1e-5, sample=120,
                            rng=np.random.default_rng(42))
    elapsed = time.monotonic() - start
    _criterion("gradient correctness (full pipeline, 120 coords)",
               err < 1e-4 and elapsed < 300,
               f"max rel err {err:.2e}, {elapsed:.0f}s")


def test_attention_normalization():
    """100 random model/input draws: every attention row sums to 1 (1e-6)."""
    worst = 0.0
    for seed in range(100):
        rng = np.random.default_rng(seed)
        net = ConvSeq2Seq(Vocabulary("ABC"), 5, TINY, rng)
        m = int(rng.integers(1, 9))
        n = int(rng.integers(1, 8))
        src = net.encode_source(Tensor(rng.standard_normal((1, m, 5))))
        targets = np.concatenate([[net.vocab.bos_id],
                                  rng.integers(3, 6, size=n - 1)])
        _, amap = net.decode_teacher_forced(targets, src)
        worst = max(worst, float(np.abs(amap.weights.sum(axis=-1) - 1.0).max()))
        assert amap.weights.min() >= 0.0 and amap.weights.max() <= 1.0
    _criterion("attention rows normalized over 100 draws", worst < 1e-6,
               f"worst |sum-1| = {worst:.2e}")


def test_decoder_causality():
    """50 random draws: perturbing target j leaves logits rows < j bitwise."""
    for seed in range(50):
        rng = np.random.default_rng(1000 + seed)
        net = ConvSeq2Seq(Vocabulary("ABC"), 5, TINY, rng)
        src = net.encode_source(Tensor(rng.standard_normal((1, 6, 5))))
        n = int(rng.integers(2, 9))
        base = np.concatenate([[net.vocab.bos_id],
                               rng.integers(3, 6, size=n - 1)])
        ref, _ = net.decode_teacher_forced(base, src)
        j = int(rng.integers(1, n))
        mutated = base.copy()
        mutated[j] = 3 if base[j] != 3 else 4
        out, _ = net.decode_teacher_forced(mutated, src)
        assert np.array_equal(out.data[:j], ref.data[:j]), seed
    _criterion("decoder causality bitwise over 50 draws", True)


def test_beam_vs_exhaustive():
    """|V|=4, max_len=3, K=64: beam top-1 equals exhaustive enumeration
    under the normalized score, on 100 random models."""
    cfg = SeqModelConfig(d_hidden=6, enc_layers=1, dec_layers=1, enc_kernel=3,
                         dec_kernel=3, dropout_p=0.0, max_src_positions=6,
                         max_tgt_positions=8)
    for seed in range(100):
        rng = np.random.default_rng(seed)
        net = ConvSeq2Seq(Vocabulary("0"), 5, cfg, rng)  # |V| = 4
        feats = FeatureSequence(vectors=rng.standard_normal((3, 5)))
        hyps = beam_search(net, feats, k=64, max_len=3)

        eos = net.vocab.eos_id
        alphabet = [i for i in range(4) if i != eos]
        with no_grad():
            src = net.encode_source(Tensor(feats.vectors[None]))
            best, best_score = None, -np.inf
            for n in range(3):
                for prefix in itertools.product(alphabet, repeat=n):
                    tokens = list(prefix) + [eos]
                    total = sum(float(_next_logprobs(net, src, tokens[:i])[t])
                                for i, t in enumerate(tokens))
                    score = total / max(1, len(tokens))
                    if score > best_score:
                        best, best_score = tokens, score
        assert hyps[0].tokens == best, seed
        assert abs(hyps[0].normalized_score - best_score) < 1e-9
    _criterion("beam top-1 equals exhaustive search on 100 models", True)


def test_levenshtein_oracle():
    """1000 random pairs against the recursive definition; kitten/sitting."""
    def ref(a: str, b: str) -> int:
        @functools.lru_cache(maxsize=None)
        def rec(i, j):
            if i == 0 or j == 0:
                return i + j
            return min(rec(i - 1, j) + 1, rec(i, j - 1) + 1,
                       rec(i - 1, j - 1) + (a[i - 1] != b[j - 1]))
        return rec(len(a), len(b))

    rng = np.random.default_rng(2024)
    alphabet = np.array(list("ABCDE012"))
    for _ in range(1000):
        a = "".join(rng.choice(alphabet, size=rng.integers(0, 13)))
        b = "".join(rng.choice(alphabet, size=rng.integers(0, 13)))
        assert levenshtein(a, b) == ref(a, b), (a, b)
    assert levenshtein("kitten", "sitting") == 3
    _criterion("levenshtein matches recursive definition on 1000 pairs", True)


def test_window_arithmetic():
    img = normalize_image(render_textline("123", seed=0))
    ws = extract_windows(img, scales=(32,), stride=4)
    ok = (len(ws) == 57 and ws.centers[0] == 16 and ws.centers[-1] == 240
          and np.all(np.diff(ws.centers) == 4))
    _criterion("window arithmetic: 57 windows, centers 16..240 step 4", ok,
               f"m={len(ws)}")


def test_persistence(tmp_path):
    cfg = ModelConfig(charset="0123456789", scales=(40,),
                      extractor=ExtractorConfig(preset="desk", input_channels=1),
                      seq=SeqModelConfig())
    model = RecognizerModel(cfg, seed=3)
    p1, p2 = tmp_path / "a.ckpt", tmp_path / "b.ckpt"
    save_checkpoint(p1, model)
    reloaded = load_model(p1)
    save_checkpoint(p2, reloaded)
    bytes_ok = p1.read_bytes() == p2.read_bytes()

    train, dev = gen_dataset("0123456789", 40, 1, 4, seed=5)
    save_dataset(tmp_path / "data", train, dev)
    train2, dev2 = load_dataset(tmp_path / "data")
    labels_ok = ([s.label for s in train2] == [s.label for s in train]
                 and [s.label for s in dev2] == [s.label for s in dev])
    pixel_err = max(np.abs(a.image.pixels - b.image.pixels).max()
                    for a, b in zip(train + dev, train2 + dev2))
    _criterion("persistence: checkpoint byte-identical, dataset round-trip",
               bytes_ok and labels_ok and pixel_err <= 1.0 / 255,
               f"pixel err {pixel_err:.5f}")


# ---------------------------------------------------------------------------
# end-to-end learning criteria (shared trained fixtures)


def test_end_to_end_learning(trained_n1):
    report = trained_n1["report"]
    epochs = len(report.dev_accuracies)
    _criterion("end-to-end learning: dev acc >= 0.95 within 50 epochs, "
               "<= 30 min",
               report.best_accuracy >= 0.95 and epochs <= 50
               and report.wall_time <= 1800,
               f"acc {report.best_accuracy:.4f} at epoch {report.best_epoch}, "
               f"{report.wall_time:.0f}s")


def test_multiscale_plumbing(trained_n1, trained_n3):
    acc1 = trained_n1["report"].best_accuracy
    acc3 = trained_n3["report"].best_accuracy
    _criterion("multi-scale run within 0.05 of single-scale",
               acc3 >= acc1 - 0.05, f"n=3 {acc3:.4f} vs n=1 {acc1:.4f}")


def test_heatmap_monotone_reading(trained_n1, toy_digits_dataset):
    """On a correctly recognized dev image, successive output steps attend
    to non-decreasing window centers in >= 90% of steps."""
    model = load_model(trained_n1["ckpt"])
    _, dev = toy_digits_dataset
    preds = []
    for i in range(0, len(dev), 64):
        chunk = dev[i:i + 64]
        preds += greedy_decode_batch(model, [s.image for s in chunk])
    correct = [s for s, p in zip(dev, preds) if p == s.label]
    assert correct, "no correctly recognized dev images"
    sample = max(correct, key=lambda s: len(s.label))

    ws = model.windows_for_image(sample.image)
    feats = extract_features(ws, model.extractor)
    hyps = beam_search(model.seq2seq, feats, k=5)
    tokens = hyps[0].tokens
    feed = np.array([model.vocab.bos_id, *tokens[:-1]], dtype=np.int64)
    with no_grad():
        src = model.seq2seq.encode_source(
            model.features_from_windows(ws.windows[None]))
        _, amap = model.seq2seq.decode_teacher_forced(feed, src)
    centers = ws.centers[np.argmax(amap.weights[-1], axis=-1)]
    steps = np.diff(centers)
    frac = float(np.mean(steps >= 0)) if len(steps) else 1.0
    _criterion("heatmap: non-decreasing attention centers on >= 90% of steps",
               frac >= 0.9,
               f"label {sample.label!r}, centers {centers.tolist()}, "
               f"fraction {frac:.2f}")


def test_cli_recognize_end_to_end(trained_n1, tmp_path):
    """The trained checkpoint reads a freshly rendered line via the CLI."""
    model = load_model(trained_n1["ckpt"])
    label = "35082"
    img_path = tmp_path / "line.pgm"
    write_pgm(img_path, render_textline(label, seed=123).pixels)
    import io
    from contextlib import redirect_stdout
    buf = io.StringIO()
    with redirect_stdout(buf):
        code = cli_main(["recognize", "--ckpt", str(trained_n1["ckpt"]),
                         "--image", str(img_path)])
    out = buf.getvalue().strip()
    _criterion("cli recognize prints the rendered label",
               code == 0 and out == label, f"printed {out!r}")
