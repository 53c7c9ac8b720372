"""Parameter-owning building blocks shared by the extractor and the
sequence model."""

from __future__ import annotations

import numpy as np

from . import tensor as T
from .optim import Parameter, normal_init, uniform_fan_init
from .tensor import Tensor, default_dtype


class Linear:
    def __init__(self, prefix: str, d_in: int, d_out: int,
                 rng: np.random.Generator):
        dt = default_dtype()
        self.weight = Parameter(f"{prefix}.weight",
                                uniform_fan_init(rng, (d_out, d_in), d_in, d_out, dt))
        self.bias = Parameter(f"{prefix}.bias", np.zeros(d_out, dtype=dt))

    def __call__(self, x: Tensor) -> Tensor:
        return T.linear(x, self.weight.tensor, self.bias.tensor)

    def parameters(self) -> list[Parameter]:
        return [self.weight, self.bias]


class Conv1d:
    def __init__(self, prefix: str, k: int, c_in: int, c_out: int,
                 rng: np.random.Generator, pad: str = "same"):
        dt = default_dtype()
        self.pad = pad
        self.weight = Parameter(
            f"{prefix}.weight",
            uniform_fan_init(rng, (k, c_in, c_out), k * c_in, k * c_out, dt))
        self.bias = Parameter(f"{prefix}.bias", np.zeros(c_out, dtype=dt))

    def __call__(self, x: Tensor) -> Tensor:
        return T.conv1d(x, self.weight.tensor, self.bias.tensor, pad=self.pad)

    def parameters(self) -> list[Parameter]:
        return [self.weight, self.bias]


class Conv2d:
    def __init__(self, prefix: str, kh: int, kw: int, c_in: int, c_out: int,
                 rng: np.random.Generator, pad: str = "same"):
        dt = default_dtype()
        self.pad = pad
        self.weight = Parameter(
            f"{prefix}.weight",
            uniform_fan_init(rng, (kh, kw, c_in, c_out),
                             kh * kw * c_in, kh * kw * c_out, dt))
        self.bias = Parameter(f"{prefix}.bias", np.zeros(c_out, dtype=dt))

    def __call__(self, x: Tensor) -> Tensor:
        return T.conv2d(x, self.weight.tensor, self.bias.tensor, pad=self.pad)

    def parameters(self) -> list[Parameter]:
        return [self.weight, self.bias]


class EmbeddingTable:
    """Learned lookup table (token or absolute-position embeddings)."""

    INIT_STD = 0.1

    def __init__(self, prefix: str, rows: int, dim: int,
                 rng: np.random.Generator):
        self.weight = Parameter(
            f"{prefix}.weight",
            normal_init(rng, (rows, dim), self.INIT_STD, default_dtype()))

    def __call__(self, indices: np.ndarray) -> Tensor:
        return T.embedding(self.weight.tensor, indices)

    def parameters(self) -> list[Parameter]:
        return [self.weight]
