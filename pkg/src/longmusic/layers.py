"""Small module system: parameter registration, train/eval flag, state dicts."""

from __future__ import annotations

from typing import Iterator

import numpy as np

from .tensor import Tensor, embedding, layer_norm, matmul, parameter

# Parameter roles drive initialisation (see ``training.init_parameters``).
WEIGHT = "weight"
BIAS = "bias"
GAIN = "gain"
INPUT_EMBEDDING = "input_embedding"


class Module:
    training: bool = True

    def _roles(self) -> dict[str, str]:
        return {}

    def named_parameters(self, prefix: str = "") -> Iterator[tuple[str, Tensor]]:
        for name, _, tensor in self.named_parameter_roles(prefix):
            yield name, tensor

    def named_parameter_roles(self, prefix: str = "") -> Iterator[tuple[str, str, Tensor]]:
        roles = self._roles()
        for attr, value in vars(self).items():
            full = f"{prefix}{attr}"
            if isinstance(value, Tensor) and value.requires_grad:
                yield full, roles.get(attr, WEIGHT if value.ndim >= 2 else BIAS), value
            elif isinstance(value, Module):
                yield from value.named_parameter_roles(full + ".")
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        yield from item.named_parameter_roles(f"{full}.{i}.")

    def parameters(self) -> list[Tensor]:
        return [p for _, p in self.named_parameters()]

    def modules(self) -> Iterator["Module"]:
        yield self
        for value in vars(self).values():
            if isinstance(value, Module):
                yield from value.modules()
            elif isinstance(value, (list, tuple)):
                for item in value:
                    if isinstance(item, Module):
                        yield from item.modules()

    def train(self, mode: bool = True) -> "Module":
        for m in self.modules():
            m.training = mode
        return self

    def eval(self) -> "Module":
        return self.train(False)

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.grad = None

    def num_parameters(self) -> int:
        return sum(p.size for p in self.parameters())

    def state_dict(self) -> dict[str, np.ndarray]:
        return {name: p.data.copy() for name, p in self.named_parameters()}

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        own = dict(self.named_parameters())
        missing = set(own) - set(state)
        unexpected = set(state) - set(own)
        if missing or unexpected:
            raise KeyError(f"state mismatch: missing={sorted(missing)} unexpected={sorted(unexpected)}")
        for name, p in own.items():
            arr = np.asarray(state[name])
            if arr.shape != p.shape:
                raise ValueError(f"{name}: shape {arr.shape} != {p.shape}")
            p.data = np.ascontiguousarray(arr, dtype=p.dtype)

    def to_dtype(self, dtype) -> "Module":
        for p in self.parameters():
            p.data = p.data.astype(dtype)
        return self


class Linear(Module):
    def __init__(self, d_in: int, d_out: int, bias: bool = True):
        self.weight = parameter(np.zeros((d_in, d_out)))
        self.bias = parameter(np.zeros(d_out)) if bias else None

    def __call__(self, x: Tensor) -> Tensor:
        y = matmul(x, self.weight)
        return y + self.bias if self.bias is not None else y


class Embedding(Module):
    def __init__(self, vocab_size: int, dim: int):
        self.weight = parameter(np.zeros((vocab_size, dim)))

    def _roles(self):
        return {"weight": INPUT_EMBEDDING}

    def __call__(self, tokens) -> Tensor:
        return embedding(self.weight, tokens)


class LayerNorm(Module):
    def __init__(self, dim: int, eps: float = 1e-5):
        self.gamma = parameter(np.ones(dim))
        self.beta = parameter(np.zeros(dim))
        self.eps = eps

    def _roles(self):
        return {"gamma": GAIN, "beta": BIAS}

    def __call__(self, x: Tensor) -> Tensor:
        return layer_norm(x, self.gamma, self.beta, self.eps)
