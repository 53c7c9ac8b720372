"""Per-window convolutional feature extraction.

Every 32x32 multi-channel glimpse is mapped independently through a small
VGG-style stack (3x3 convs, ReLU, 2x2 max pooling) and a final linear
projection to a fixed-length feature vector.  Two stacks are provided: the
full-size `paper` preset (200-dim output) and a lightweight `desk` preset
(64-dim) that trains quickly on a CPU.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .layers import Conv2d, Linear
from .optim import Parameter
from .tensor import Tensor
from .windowing import WindowSequence

# Stack grammar: ("conv", out_channels) | ("pool",). Input is 32x32.
_STACKS = {
    "paper": (("conv", 32), ("conv", 32), ("pool",),
              ("conv", 64), ("conv", 64), ("pool",),
              ("conv", 128), ("conv", 128), ("pool",),
              ("conv", 256), ("conv", 256), ("pool",),
              ("conv", 256), ("conv", 256)),
    "desk": (("conv", 16), ("pool",),
             ("conv", 32), ("pool",),
             ("conv", 32), ("pool",)),
}
_DEFAULT_DIM = {"paper": 200, "desk": 64}
_KERNEL = 3


@dataclass(frozen=True)
class ExtractorConfig:
    preset: str = "desk"
    input_channels: int = 1
    feature_dim: int | None = None  # preset default when None

    def __post_init__(self):
        if self.preset not in _STACKS:
            raise ValueError(f"unknown preset {self.preset!r}")
        if self.input_channels < 1:
            raise ValueError("input_channels must be >= 1")
        if self.feature_dim is not None and self.feature_dim < 1:
            raise ValueError("feature_dim must be >= 1")

    @property
    def out_dim(self) -> int:
        return self.feature_dim if self.feature_dim is not None \
            else _DEFAULT_DIM[self.preset]


@dataclass
class FeatureSequence:
    """One feature row per window, in window order."""
    vectors: np.ndarray  # (m, feature_dim)

    def __len__(self) -> int:
        return self.vectors.shape[0]


def _flat_size(cfg: ExtractorConfig) -> tuple[int, int]:
    """(spatial extent, channels) entering the output linear layer."""
    extent, channels = 32, cfg.input_channels
    for step in _STACKS[cfg.preset]:
        if step[0] == "conv":
            channels = step[1]
        else:
            extent //= 2
    return extent, channels


class FeatureExtractor:
    def __init__(self, cfg: ExtractorConfig, rng: np.random.Generator,
                 prefix: str = "extractor"):
        self.cfg = cfg
        self.convs: list[Conv2d] = []
        c_in = cfg.input_channels
        for i, step in enumerate(_STACKS[cfg.preset]):
            if step[0] == "conv":
                self.convs.append(Conv2d(f"{prefix}.conv{len(self.convs)}",
                                         _KERNEL, _KERNEL, c_in, step[1], rng))
                c_in = step[1]
        extent, channels = _flat_size(cfg)
        self.out = Linear(f"{prefix}.out", extent * extent * channels,
                          cfg.out_dim, rng)

    def __call__(self, windows: Tensor) -> Tensor:
        """(..., 32, 32, C_in) -> (..., feature_dim); identical and
        independent per window."""
        x = windows
        conv_it = iter(self.convs)
        for step in _STACKS[self.cfg.preset]:
            if step[0] == "conv":
                x = T.relu(next(conv_it)(x))
            else:
                x = T.maxpool2(x)
        lead = x.shape[:-3]
        flat = int(np.prod(x.shape[-3:]))
        return self.out(T.reshape(x, lead + (flat,)))

    def parameters(self) -> list[Parameter]:
        params = [p for c in self.convs for p in c.parameters()]
        return params + self.out.parameters()


def extract_features(ws: WindowSequence, extractor: FeatureExtractor) -> FeatureSequence:
    """Run the configured stack over every glimpse of a window sequence."""
    cfg = extractor.cfg
    if ws.windows.shape[-1] != cfg.input_channels:
        raise ValueError(f"window channels {ws.windows.shape[-1]} != "
                         f"configured {cfg.input_channels}")
    out = extractor(Tensor(ws.windows))
    return FeatureSequence(vectors=out.data)


def feature_param_count(cfg: ExtractorConfig) -> int:
    """Exact trainable-scalar count of the configured stack."""
    total = 0
    c_in = cfg.input_channels
    for step in _STACKS[cfg.preset]:
        if step[0] == "conv":
            total += _KERNEL * _KERNEL * c_in * step[1] + step[1]
            c_in = step[1]
    extent, channels = _flat_size(cfg)
    total += extent * extent * channels * cfg.out_dim + cfg.out_dim
    return total
