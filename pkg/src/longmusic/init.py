"""Parameter initialisation schemes.

``default``       every weight matrix and the input embedding ~ N(0, 0.02);
                  biases 0, layer-norm gains 1.
``xavier_split``  weight matrices ~ U(±sqrt(6 / (fan_in + fan_out))); input
                  embeddings ~ N(0, d**-0.5) with d the embedding width;
                  biases 0, layer-norm gains 1.
"""

from __future__ import annotations

import math

import numpy as np

from .layers import BIAS, GAIN, INPUT_EMBEDDING, Module

SCHEMES = ("default", "xavier_split")
DEFAULT_STD = 0.02


def xavier_bound(fan_in: int, fan_out: int) -> float:
    return math.sqrt(6.0 / (fan_in + fan_out))


def init_parameters(model: Module, scheme: str = "default", seed: int = 0) -> Module:
    if scheme not in SCHEMES:
        raise ValueError(f"unknown init scheme {scheme!r}; expected one of {SCHEMES}")
    rng = np.random.default_rng(seed)
    for _, role, p in model.named_parameter_roles():
        shape, dtype = p.shape, p.dtype
        if role == BIAS:
            values = np.zeros(shape)
        elif role == GAIN:
            values = np.ones(shape)
        elif scheme == "default":
            values = rng.normal(0.0, DEFAULT_STD, size=shape)
        elif role == INPUT_EMBEDDING:
            values = rng.normal(0.0, shape[-1] ** -0.5, size=shape)
        else:
            fan_in, fan_out = shape[0], int(np.prod(shape[1:]))
            bound = xavier_bound(fan_in, fan_out)
            values = rng.uniform(-bound, bound, size=shape)
        p.data = np.ascontiguousarray(values, dtype=dtype)
    return model
