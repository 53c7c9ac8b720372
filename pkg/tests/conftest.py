import numpy as np
import pytest

import scantext.tensor as T
from scantext.data import gen_dataset
from scantext.features import ExtractorConfig
from scantext.model import ModelConfig, RecognizerModel
from scantext.seq2seq import SeqModelConfig
from scantext.training import TrainConfig, train_loop


@pytest.fixture(autouse=True)
def _float64_default():
    """Tests run in float64 unless they opt into the training precision."""
    T.set_default_dtype(np.float64)
    yield
    T.set_default_dtype(np.float64)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# ---------------------------------------------------------------------------
# expensive end-to-end fixtures shared by the acceptance suite


@pytest.fixture(scope="session")
def toy_digits_dataset():
    """Digits, labels 1-6 symbols, 1800 train / 200 dev."""
    return gen_dataset("0123456789", 2000, 1, 6, seed=11)


def _train_toy(dataset, scales, ckpt_path):
    train, dev = dataset
    T.set_default_dtype(np.float32)
    try:
        cfg = ModelConfig(charset="0123456789", scales=scales,
                          extractor=ExtractorConfig(preset="desk",
                                                    input_channels=len(scales)),
                          seq=SeqModelConfig())
        model = RecognizerModel(cfg, seed=0)
        tcfg = TrainConfig.desk(lr=5e-4, clip_norm=0.1, batch_size=16,
                                epochs=50, seed=0)
        report = train_loop(train, tcfg, model, dev=dev,
                            checkpoint_path=ckpt_path, stop_accuracy=0.95)
    finally:
        T.set_default_dtype(np.float64)
    return report


@pytest.fixture(scope="session")
def trained_n1(toy_digits_dataset, tmp_path_factory):
    """Single-scale (width 40) desk model trained on the toy task."""
    ckpt = tmp_path_factory.mktemp("n1") / "n1.ckpt"
    report = _train_toy(toy_digits_dataset, (40,), ckpt)
    return {"ckpt": ckpt, "report": report}


@pytest.fixture(scope="session")
def trained_n3(toy_digits_dataset, tmp_path_factory):
    """Three-scale (32/40/48) desk model trained on the same toy task."""
    ckpt = tmp_path_factory.mktemp("n3") / "n3.ckpt"
    report = _train_toy(toy_digits_dataset, (32, 40, 48), ckpt)
    return {"ckpt": ckpt, "report": report}
