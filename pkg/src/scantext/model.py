"""End-to-end recognizer: windowing config + feature extractor + sequence
model under one parameter namespace."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import tensor as T
from .features import ExtractorConfig, FeatureExtractor
from .optim import Parameter, check_unique_names
from .seq2seq import (AttentionMap, ConvSeq2Seq, SeqModelConfig,
                      SourceRepresentation, Vocabulary, DEFAULT_CHARSET)
from .tensor import Tensor
from .windowing import (DEFAULT_STRIDE, SINGLE_SCALE, NormalizedImage,
                        RawImage, WindowSequence, extract_windows,
                        normalize_image)


@dataclass(frozen=True)
class ModelConfig:
    charset: str = DEFAULT_CHARSET
    scales: tuple[int, ...] = SINGLE_SCALE
    stride: int = DEFAULT_STRIDE
    extractor: ExtractorConfig = field(default_factory=ExtractorConfig)
    seq: SeqModelConfig = field(default_factory=SeqModelConfig)

    def __post_init__(self):
        if self.extractor.input_channels != len(self.scales):
            object.__setattr__(self, "extractor",
                               replace(self.extractor,
                                       input_channels=len(self.scales)))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["scales"] = list(self.scales)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(charset=d["charset"], scales=tuple(d["scales"]),
                   stride=d["stride"],
                   extractor=ExtractorConfig(**d["extractor"]),
                   seq=SeqModelConfig(**d["seq"]))


class RecognizerModel:
    def __init__(self, config: ModelConfig, seed: int = 0):
        self.config = config
        self.vocab = Vocabulary(config.charset)
        rng = np.random.default_rng(seed)
        self.extractor = FeatureExtractor(config.extractor, rng)
        self.seq2seq = ConvSeq2Seq(self.vocab, config.extractor.out_dim,
                                   config.seq, rng)
        self._params = self.extractor.parameters() + self.seq2seq.parameters()
        check_unique_names(self._params)

    def parameters(self) -> list[Parameter]:
        return self._params

    def param_index(self) -> dict[str, Parameter]:
        return {p.name: p for p in self._params}

    # -- forward pieces ------------------------------------------------------

    def windows_for_image(self, image: RawImage | NormalizedImage) -> WindowSequence:
        norm = image if isinstance(image, NormalizedImage) else normalize_image(image)
        return extract_windows(norm, self.config.scales, self.config.stride)

    def windows_batch(self, images: list[RawImage]) -> np.ndarray:
        """(B, m, 32, 32, n) glimpse stack for a batch of line images."""
        return np.stack([self.windows_for_image(img).windows for img in images])

    def features_from_windows(self, windows: np.ndarray, training: bool = False) -> Tensor:
        """(B, m, 32, 32, n) -> (B, m, feature_dim); the extractor sees the
        flattened window axis so all glimpses go through one batched pass.

        Bitwise-identical glimpses (padding regions produce many) are run
        once and their feature row shared; the extractor is a pure
        per-window function, so results and gradients are unchanged.
        """
        B, m = windows.shape[:2]
        flat = np.ascontiguousarray(windows, dtype=T.default_dtype()) \
            .reshape(B * m, *windows.shape[2:])
        uniq, inverse = np.unique(flat.reshape(B * m, -1), axis=0,
                                  return_inverse=True)
        if uniq.shape[0] < B * m:
            feats = self.extractor(Tensor(uniq.reshape(-1, *windows.shape[2:])))
            feats = T.embedding(feats, inverse.reshape(-1))
        else:
            feats = self.extractor(Tensor(flat))
        return T.reshape(feats, (B, m, feats.shape[-1]))

    def encode_images(self, images: list[RawImage], training: bool = False,
                      rng: np.random.Generator | None = None) -> SourceRepresentation:
        feats = self.features_from_windows(self.windows_batch(images), training)
        return self.seq2seq.encode_source(feats, training, rng)

    def logits_for_batch(self, windows: np.ndarray, target_in: np.ndarray,
                         training: bool = False,
                         rng: np.random.Generator | None = None,
                         ) -> tuple[Tensor, AttentionMap]:
        feats = self.features_from_windows(windows, training)
        src = self.seq2seq.encode_source(feats, training, rng)
        return self.seq2seq.decode_teacher_forced(target_in, src, training, rng)

    # -- target plumbing -----------------------------------------------------

    def prepare_targets(self, labels: list[str]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Shifted decoder inputs, gold outputs, and a pad mask, padded to
        the longest label in the batch."""
        v = self.vocab
        encoded = [v.encode(lbl) for lbl in labels]
        max_in = max(len(e) for e in encoded) + 1  # <s> + chars / chars + </s>
        if max_in > self.config.seq.max_tgt_positions:
            raise ValueError(f"label longer than "
                             f"{self.config.seq.max_tgt_positions - 1} tokens")
        B = len(labels)
        tgt_in = np.full((B, max_in), v.pad_id, dtype=np.int64)
        tgt_out = np.full((B, max_in), v.pad_id, dtype=np.int64)
        mask = np.zeros((B, max_in), dtype=np.float64)
        for i, e in enumerate(encoded):
            tgt_in[i, 0] = v.bos_id
            tgt_in[i, 1:len(e) + 1] = e
            tgt_out[i, :len(e)] = e
            tgt_out[i, len(e)] = v.eos_id
            mask[i, :len(e) + 1] = 1.0
        return tgt_in, tgt_out, mask
