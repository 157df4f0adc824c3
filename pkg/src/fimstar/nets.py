"""Fully-connected networks and their optimizer, on the autodiff Tensors."""

from __future__ import annotations

import numpy as np

from . import autograd as ag
from .autograd import Tensor

__all__ = ["Mlp", "Adam", "soft_update"]

_OUT_ACTS = ("identity", "tanh")


class Mlp:
    """ReLU hidden layers; output head is identity (critics) or tanh (actors).

    Parameters are [W1, b1, W2, b2, ...] with W of shape (fan_in, fan_out).
    ``apply`` is the functional form used when evaluating a network at
    hypothetical parameters (e.g. post-gradient-step probes).
    """

    def __init__(self, layer_dims, out_act: str = "identity",
                 gen: np.random.Generator | None = None):
        if len(layer_dims) < 2:
            raise ValueError("need at least input and output dims")
        if out_act not in _OUT_ACTS:
            raise ValueError(f"out_act must be one of {_OUT_ACTS}")
        self.layer_dims = tuple(int(d) for d in layer_dims)
        self.out_act = out_act
        gen = gen if gen is not None else np.random.default_rng(0)
        self.params: list[Tensor] = []
        for fan_in, fan_out in zip(self.layer_dims[:-1], self.layer_dims[1:]):
            bound = 1.0 / np.sqrt(fan_in)
            self.params.append(Tensor(gen.uniform(-bound, bound, size=(fan_in, fan_out))))
            self.params.append(Tensor(gen.uniform(-bound, bound, size=(fan_out,))))

    def forward(self, x) -> Tensor:
        return Mlp.apply(self.params, x, self.out_act)

    __call__ = forward

    @staticmethod
    def apply(params, x, out_act: str = "identity") -> Tensor:
        h = ag.as_tensor(x)
        n_layers = len(params) // 2
        for i in range(n_layers):
            w, b = params[2 * i], params[2 * i + 1]
            if h.shape[-1] != w.shape[0]:
                raise ValueError(
                    f"layer {i}: input width {h.shape[-1]} != expected {w.shape[0]}")
            h = (h @ w) + b
            if i < n_layers - 1:
                h = ag.relu(h)
        if out_act == "tanh":
            h = ag.tanh(h)
        return h

    def param_arrays(self) -> list[np.ndarray]:
        return [p.data.copy() for p in self.params]

    def load_arrays(self, arrays) -> None:
        if len(arrays) != len(self.params):
            raise ValueError("parameter count mismatch")
        for p, a in zip(self.params, arrays):
            if p.data.shape != a.shape:
                raise ValueError("parameter shape mismatch")
            p.data = np.array(a, dtype=np.float64)

    def clone_into(self, other: "Mlp") -> None:
        other.load_arrays(self.param_arrays())


def soft_update(target: Mlp, online: Mlp, tau: float) -> None:
    """Exponential moving average: target <- tau*online + (1-tau)*target."""
    if not 0.0 <= tau <= 1.0:
        raise ValueError("tau must lie in [0, 1]")
    if target.layer_dims != online.layer_dims:
        raise ValueError("architecture mismatch between target and online nets")
    for pt, po in zip(target.params, online.params):
        pt.data = tau * po.data + (1.0 - tau) * pt.data


class Adam:
    """Adam with default moment coefficients; guards against non-finite params."""

    def __init__(self, params: list[Tensor], lr: float,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = params
        self.lr = lr
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.t = 0
        self.m = [np.zeros_like(p.data) for p in params]
        self.v = [np.zeros_like(p.data) for p in params]

    def step(self, grads) -> None:
        if len(grads) != len(self.params):
            raise ValueError("one gradient per parameter required")
        self.t += 1
        b1t = 1.0 - self.beta1**self.t
        b2t = 1.0 - self.beta2**self.t
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p.data = p.data - self.lr * (m / b1t) / (np.sqrt(v / b2t) + self.eps)
            if not np.all(np.isfinite(p.data)):
                raise FloatingPointError("non-finite parameter after optimizer step")

    def state_arrays(self):
        return {"t": self.t, "m": [m.copy() for m in self.m], "v": [v.copy() for v in self.v]}

    def load_state(self, state) -> None:
        self.t = int(state["t"])
        self.m = [np.array(m) for m in state["m"]]
        self.v = [np.array(v) for v in state["v"]]
