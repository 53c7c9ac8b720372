"""Sequence loss, the optimization step, and epoch scheduling."""

import math

import numpy as np
import pytest

import scantext.tensor as T
from scantext.data import render_textline, Sample
from scantext.features import ExtractorConfig
from scantext.model import ModelConfig, RecognizerModel
from scantext.seq2seq import SeqModelConfig
from scantext.tensor import Tensor
from scantext.training import (TrainConfig, TrainingDiverged, epoch_schedule,
                               nll_loss, train_loop, train_step)


def desk_model(seed=0, charset="0123456789"):
    cfg = ModelConfig(charset=charset, scales=(40,),
                      extractor=ExtractorConfig(preset="desk", input_channels=1),
                      seq=SeqModelConfig())
    return RecognizerModel(cfg, seed=seed)


def digit_batch(labels, seed0=0):
    return [Sample(image=render_textline(lbl, seed=seed0 + i), label=lbl)
            for i, lbl in enumerate(labels)]


class TestNllLoss:
    def test_uniform_38(self):
        logits = Tensor(np.zeros((1, 38)))
        loss = nll_loss(logits, np.array([17]))
        assert abs(loss.item() - math.log(38)) < 1e-12

    def test_certain_prediction_is_zero(self):
        logits = np.zeros((2, 6))
        logits[0, 3] = 60.0
        logits[1, 1] = 60.0
        loss = nll_loss(Tensor(logits), np.array([3, 1]))
        assert loss.item() < 1e-12

    def test_two_steps_half_and_quarter(self):
        logits = np.array([[math.log(0.5), math.log(0.5)],
                           [0.0, math.log(3.0)]])
        loss = nll_loss(Tensor(logits), np.array([0, 0]))
        assert abs(loss.item() - math.log(8)) < 1e-12

    def test_pad_positions_excluded(self):
        rng = np.random.default_rng(0)
        logits = rng.standard_normal((4, 7))
        full = nll_loss(Tensor(logits[:2]), np.array([3, 4])).item()
        padded = nll_loss(Tensor(logits), np.array([3, 4, 0, 0]), pad_id=0).item()
        assert abs(full - padded) < 1e-12

    def test_batch_mean_of_sequence_sums(self, rng):
        logits = rng.standard_normal((3, 4, 7))
        targets = rng.integers(1, 7, size=(3, 4))
        batched = nll_loss(Tensor(logits), targets).item()
        singles = [nll_loss(Tensor(logits[i]), targets[i]).item()
                   for i in range(3)]
        assert abs(batched - np.mean(singles)) < 1e-10

    def test_bad_targets_rejected(self, rng):
        with pytest.raises(ValueError):
            nll_loss(Tensor(rng.standard_normal((2, 5))), np.array([1, 9]))
        with pytest.raises(ValueError):
            nll_loss(Tensor(rng.standard_normal((2, 5))), np.array([1]))


class TestTrainStep:
    def test_zero_lr_leaves_parameters(self):
        model = desk_model()
        before = {p.name: p.data.copy() for p in model.parameters()}
        cfg = TrainConfig.desk(lr=0.0, epochs=1)
        train_step(digit_batch(["12", "3"]), model, cfg, np.random.default_rng(0))
        for p in model.parameters():
            np.testing.assert_array_equal(p.data, before[p.name])

    def test_deterministic_across_runs(self):
        results = []
        for _ in range(2):
            model = desk_model(seed=5)
            cfg = TrainConfig.desk(epochs=1, seed=5)
            rng = np.random.default_rng(5)
            for _step in range(2):
                train_step(digit_batch(["40", "7"]), model, cfg, rng)
            results.append({p.name: p.data.copy() for p in model.parameters()})
        for name in results[0]:
            np.testing.assert_array_equal(results[0][name], results[1][name])

    def test_nonfinite_aborts_with_diagnostics(self):
        model = desk_model()
        model.parameters()[0].data = model.parameters()[0].data * np.inf
        cfg = TrainConfig.desk(epochs=1)
        with np.errstate(invalid="ignore", over="ignore"):
            with pytest.raises(TrainingDiverged):
                train_step(digit_batch(["1"]), model, cfg,
                           np.random.default_rng(0))

    def test_overfits_single_batch(self):
        """100 repeated steps on one batch cut the loss by at least half."""
        T.set_default_dtype(np.float32)
        model = desk_model(seed=1)
        cfg = TrainConfig.desk(epochs=1, seed=1)
        rng = np.random.default_rng(1)
        batch = digit_batch(["40", "7"])
        losses = [train_step(batch, model, cfg, rng) for _ in range(100)]
        assert losses[-1] < 0.5 * losses[0], (losses[0], losses[-1])


class TestInvariants:
    def test_loss_deterministic_and_finite_without_dropout(self):
        model = desk_model(seed=3)
        batch = digit_batch(["81", "205"])
        windows = model.windows_batch([s.image for s in batch])
        tgt_in, tgt_out, _ = model.prepare_targets([s.label for s in batch])
        vals = []
        for _ in range(2):
            logits, _ = model.logits_for_batch(windows, tgt_in, training=False)
            vals.append(nll_loss(logits, tgt_out, pad_id=model.vocab.pad_id).item())
        assert vals[0] == vals[1]
        assert math.isfinite(vals[0])

    def test_first_step_delta_bounded_by_lr(self):
        """Clip runs before Adam; from zero state every coordinate moves by
        at most lr (bias-corrected sign step), so the update norm is bounded."""
        model = desk_model(seed=4)
        before = {p.name: p.data.copy() for p in model.parameters()}
        lr = 5e-4
        cfg = TrainConfig.desk(lr=lr, epochs=1)
        train_step(digit_batch(["31"]), model, cfg, np.random.default_rng(0))
        worst = max(np.abs(p.data - before[p.name]).max()
                    for p in model.parameters())
        assert worst <= lr * 1.0001


def test_paper_preset_step_smoke():
    """One optimizer step through the full-size extractor stack."""
    T.set_default_dtype(np.float32)
    cfg = ModelConfig(charset="0123456789", scales=(32, 40, 48),
                      extractor=ExtractorConfig(preset="paper",
                                                input_channels=3),
                      seq=SeqModelConfig())
    model = RecognizerModel(cfg, seed=0)
    loss = train_step(digit_batch(["40", "7"]), model,
                      TrainConfig.desk(epochs=1), np.random.default_rng(0))
    assert math.isfinite(loss)


class TestEpochSchedule:
    def test_step_arithmetic(self):
        batches = epoch_schedule(2000, 1.0, 16, seed=0, epoch=0)
        assert len(batches) == 125
        assert sum(len(b) for b in batches) == 2000

    def test_fraction_subsamples(self):
        batches = epoch_schedule(2000, 0.01, 16, seed=0, epoch=0)
        assert sum(len(b) for b in batches) == 20
        assert len(batches) == 2

    def test_without_replacement_reshuffled(self):
        a = np.concatenate(epoch_schedule(100, 1.0, 7, seed=3, epoch=0))
        b = np.concatenate(epoch_schedule(100, 1.0, 7, seed=3, epoch=1))
        assert len(set(a)) == 100
        assert not np.array_equal(a, b)
        np.testing.assert_array_equal(
            a, np.concatenate(epoch_schedule(100, 1.0, 7, seed=3, epoch=0)))


def test_train_loop_empty_dataset():
    with pytest.raises(ValueError):
        train_loop([], TrainConfig.desk(epochs=1), desk_model())


def test_train_loop_records_and_stops():
    T.set_default_dtype(np.float32)
    model = desk_model(seed=2)
    data = digit_batch(["1", "2", "3", "41", "52", "63", "7", "8"])
    cfg = TrainConfig.desk(epochs=2, batch_size=4, seed=2)
    report = train_loop(data, cfg, model, dev=data[:4])
    assert len(report.epoch_losses) == 2
    assert len(report.dev_accuracies) == 2
    assert all(math.isfinite(l) for l in report.epoch_losses)
    assert report.wall_time > 0
