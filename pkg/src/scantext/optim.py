"""Trainable parameters, the Adam update, gradient clipping, and the
finite-difference gradient oracle."""

from __future__ import annotations

import math
from collections.abc import Callable, Sequence

import numpy as np

from .tensor import Tensor, backward, no_grad


class Parameter:
    """A named leaf tensor plus its Adam state (two moments, step counter)."""

    def __init__(self, name: str, data: np.ndarray):
        self.name = name
        self.tensor = Tensor(data, requires_grad=True)
        self.m = np.zeros_like(self.tensor.data)
        self.v = np.zeros_like(self.tensor.data)
        self.step_count = 0

    @property
    def data(self) -> np.ndarray:
        return self.tensor.data

    @data.setter
    def data(self, value: np.ndarray) -> None:
        self.tensor.data = np.asarray(value, dtype=self.tensor.data.dtype)

    @property
    def grad(self) -> np.ndarray | None:
        return self.tensor.grad

    def zero_grad(self) -> None:
        self.tensor.grad = None

    def __repr__(self):
        return f"Parameter({self.name!r}, shape={self.tensor.shape})"


def check_unique_names(params: Sequence[Parameter]) -> None:
    names = [p.name for p in params]
    if len(set(names)) != len(names):
        dup = sorted({n for n in names if names.count(n) > 1})
        raise ValueError(f"duplicate parameter names: {dup}")


def zero_grads(params: Sequence[Parameter]) -> None:
    for p in params:
        p.zero_grad()


def adam_step(params: Sequence[Parameter], lr: float, beta1: float = 0.9,
              beta2: float = 0.999, eps: float = 1e-8) -> None:
    """Bias-corrected Adam update; every parameter must carry a gradient."""
    for p in params:
        if p.grad is None:
            raise ValueError(f"adam_step: parameter {p.name!r} has no gradient")
    for p in params:
        g = p.grad
        p.step_count += 1
        p.m = beta1 * p.m + (1.0 - beta1) * g
        p.v = beta2 * p.v + (1.0 - beta2) * (g * g)
        m_hat = p.m / (1.0 - beta1 ** p.step_count)
        v_hat = p.v / (1.0 - beta2 ** p.step_count)
        p.tensor.data = p.tensor.data - lr * m_hat / (np.sqrt(v_hat) + eps)


def clip_grad_norm(params: Sequence[Parameter], max_norm: float) -> float:
    """Rescale all gradients to a global L2 norm of max_norm if they exceed
    it; returns the norm measured before clipping."""
    sq = 0.0
    for p in params:
        if p.grad is not None:
            sq += float(np.dot(p.grad.ravel(), p.grad.ravel()))
    norm = math.sqrt(sq)
    if norm > max_norm:
        factor = max_norm / norm
        for p in params:
            if p.grad is not None:
                p.tensor.grad = p.grad * factor
    return norm


def finite_diff_check(f: Callable[[], Tensor], params: Sequence[Parameter],
                      eps: float = 1e-5, sample: int | None = None,
                      rng: np.random.Generator | None = None) -> float:
    """Compare analytic gradients of the scalar f() against central finite
    differences.

    Perturbs each scalar coordinate (or `sample` random coordinates across
    all parameters) by +/-eps and reports the worst relative error, with
    max(|analytic|, |numeric|, 1e-8) in the denominator.  f must be
    deterministic; a stochastic f (e.g. dropout left on) is rejected.
    """
    with no_grad():
        v1 = f().item()
        v2 = f().item()
    if v1 != v2:
        raise ValueError("finite_diff_check: f is stochastic; disable dropout "
                         "and other noise sources first")

    zero_grads(params)
    backward(f())
    analytic = [np.zeros_like(p.data) if p.grad is None else p.grad.copy()
                for p in params]

    coords: list[tuple[int, int]] = [(i, j) for i, p in enumerate(params)
                                     for j in range(p.data.size)]
    if sample is not None and sample < len(coords):
        if rng is None:
            rng = np.random.default_rng(0)
        pick = rng.choice(len(coords), size=sample, replace=False)
        coords = [coords[int(i)] for i in pick]

    worst = 0.0
    with no_grad():
        for pi, j in coords:
            flat = params[pi].data.reshape(-1)
            orig = flat[j]
            flat[j] = orig + eps
            f_plus = f().item()
            flat[j] = orig - eps
            f_minus = f().item()
            flat[j] = orig
            numeric = (f_plus - f_minus) / (2.0 * eps)
            a = float(analytic[pi].reshape(-1)[j])
            err = abs(a - numeric) / max(abs(a), abs(numeric), 1e-8)
            worst = max(worst, err)
    return worst


# ---------------------------------------------------------------------------
# weight initialization


def uniform_fan_init(rng: np.random.Generator, shape: tuple[int, ...],
                     fan_in: int, fan_out: int, dtype) -> np.ndarray:
    """Uniform in +/- sqrt(6 / (fan_in + fan_out)); scale-preserving default
    for conv and linear weights."""
    bound = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=shape).astype(dtype)


def normal_init(rng: np.random.Generator, shape: tuple[int, ...],
                std: float, dtype) -> np.ndarray:
    return (rng.standard_normal(shape) * std).astype(dtype)
