"""Trainable building blocks: parameter containers, linear maps, MLP, LSTM.

A Module is a plain attribute container; ``parameters()`` walks attributes
(and lists of them) to collect every trainable tensor, so checkpointing and
the optimizer see a flat named view. Weights draw from U(+-1/sqrt(fan_in))
using the generator passed at construction; biases start at zero.
"""
from __future__ import annotations

import numpy as np

from . import numerics as nc
from .errors import ConfigError
from .numerics import Tensor


def uniform_init(rng: np.random.Generator, shape, fan_in: int, dtype) -> Tensor:
    bound = 1.0 / np.sqrt(max(1, fan_in))
    return nc.parameter(rng.uniform(-bound, bound, size=shape), dtype=dtype)


class Module:
    """Attribute-walking base for anything that owns parameters."""

    def named_parameters(self, prefix: str = "") -> list[tuple[str, Tensor]]:
        out: list[tuple[str, Tensor]] = []
        for name, value in vars(self).items():
            path = f"{prefix}{name}"
            if isinstance(value, Tensor):
                if value.requires_grad:
                    out.append((path, value))
            elif isinstance(value, Module):
                out.extend(value.named_parameters(f"{path}."))
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        out.extend(item.named_parameters(f"{path}.{i}."))
                    elif isinstance(item, Tensor) and item.requires_grad:
                        out.append((f"{path}.{i}", item))
        return out

    def parameters(self) -> list[Tensor]:
        return [p for _, p in self.named_parameters()]

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.grad = None

    def num_parameters(self) -> int:
        return sum(p.size for p in self.parameters())


class Linear(Module):
    def __init__(self, rng, d_in: int, d_out: int, dtype=np.float64, bias: bool = True):
        self.weight = uniform_init(rng, (d_in, d_out), d_in, dtype)
        self.bias = nc.parameter(np.zeros(d_out), dtype=dtype) if bias else None

    def __call__(self, x: Tensor) -> Tensor:
        out = nc.matmul(x, self.weight)
        if self.bias is not None:
            out = nc.add(out, self.bias)
        return out


class CausalConv1d(Module):
    """Length-preserving convolution over the time axis of [..., T, C]."""

    def __init__(self, rng, d_in: int, d_out: int, kernel: int, dtype=np.float64):
        if kernel < 1:
            raise ConfigError(f"conv kernel must be >= 1, got {kernel}")
        self.weight = uniform_init(rng, (kernel, d_in, d_out), d_in * kernel, dtype)
        self.bias = nc.parameter(np.zeros(d_out), dtype=dtype)

    def __call__(self, x: Tensor) -> Tensor:
        return nc.causal_conv1d(x, self.weight, self.bias)


def activation_fn(name: str):
    try:
        return {"relu": nc.relu, "gelu": nc.gelu, "tanh": nc.tanh}[name.lower()]
    except KeyError:
        raise ConfigError(f"unknown activation {name!r}") from None


class MLP(Module):
    """Position-wise feed-forward stack; ``layers`` counts linear maps."""

    def __init__(self, rng, d_in, d_hidden, d_out, layers=2, activation="relu", dtype=np.float64):
        if layers < 1:
            raise ConfigError("MLP needs at least one layer")
        self.act = activation
        dims = [d_in] + [d_hidden] * (layers - 1) + [d_out]
        self.linears = [Linear(rng, dims[i], dims[i + 1], dtype) for i in range(layers)]

    def __call__(self, x: Tensor) -> Tensor:
        act = activation_fn(self.act)
        for i, lin in enumerate(self.linears):
            x = lin(x)
            if i < len(self.linears) - 1:
                x = act(x)
        return x


class LayerNorm(Module):
    def __init__(self, d: int, dtype=np.float64):
        self.gain = nc.parameter(np.ones(d), dtype=dtype)
        self.bias = nc.parameter(np.zeros(d), dtype=dtype)

    def __call__(self, x: Tensor) -> Tensor:
        return nc.layer_norm(x, self.gain, self.bias)


class LSTM(Module):
    """Unidirectional LSTM scanning the time axis of [..., T, C].

    Returns the full hidden-state sequence; stack instances for depth.
    """

    def __init__(self, rng, d_in: int, d_hidden: int, dtype=np.float64):
        self.d_hidden = d_hidden
        self.w_input = uniform_init(rng, (d_in, 4 * d_hidden), d_in, dtype)
        self.w_hidden = uniform_init(rng, (d_hidden, 4 * d_hidden), d_hidden, dtype)
        self.bias = nc.parameter(np.zeros(4 * d_hidden), dtype=dtype)

    def __call__(self, x: Tensor) -> Tensor:
        T = x.shape[-2]
        d = self.d_hidden
        lead = x.shape[:-2]
        h = nc.Tensor(np.zeros(lead + (d,)), dtype=x.data.dtype)
        c = nc.Tensor(np.zeros(lead + (d,)), dtype=x.data.dtype)
        outs = []
        for t in range(T):
            xt = x[..., t, :]
            gates = nc.add(nc.add(nc.matmul(xt, self.w_input), nc.matmul(h, self.w_hidden)), self.bias)
            i_g = nc.sigmoid(gates[..., 0 * d : 1 * d])
            f_g = nc.sigmoid(gates[..., 1 * d : 2 * d])
            g_g = nc.tanh(gates[..., 2 * d : 3 * d])
            o_g = nc.sigmoid(gates[..., 3 * d : 4 * d])
            c = nc.add(nc.mul(f_g, c), nc.mul(i_g, g_g))
            h = nc.mul(o_g, nc.tanh(c))
            outs.append(nc.reshape(h, lead + (1, d)))
        return nc.concat(outs, axis=-2)


def sinusoidal_encoding(length: int, d: int, dtype=np.float64) -> np.ndarray:
    """Fixed sine/cosine position table [length, d]."""
    pos = np.arange(length)[:, None]
    i = np.arange((d + 1) // 2)[None, :]
    angle = pos / np.power(10000.0, 2 * i / d)
    table = np.zeros((length, d))
    table[:, 0::2] = np.sin(angle)
    table[:, 1::2] = np.cos(angle[:, : d // 2])
    return table.astype(dtype)
