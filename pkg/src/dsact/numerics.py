"""Minimal dense network with hand-written backprop and Adam.

Everything runs in float64 numpy. A network is a plain list of affine
layers with GELU on the hidden layers and an identity output layer;
forward keeps the activation trace so backward can produce exact
reverse-mode derivatives without an autodiff framework.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import erf

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_DELTA = 1e-8

_INV_SQRT2 = 1.0 / np.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


class NumericalError(RuntimeError):
    """Raised when an update would propagate non-finite values."""


def gelu(x):
    """x * Phi(x) with the exact normal CDF (erf form)."""
    x = np.asarray(x, dtype=np.float64)
    return x * 0.5 * (1.0 + erf(x * _INV_SQRT2))


def gelu_grad(x):
    """Derivative of gelu: Phi(x) + x * pdf(x)."""
    x = np.asarray(x, dtype=np.float64)
    cdf = 0.5 * (1.0 + erf(x * _INV_SQRT2))
    pdf = _INV_SQRT_2PI * np.exp(-0.5 * x * x)
    return cdf + x * pdf


@dataclass
class Layer:
    weight: np.ndarray  # (out, in)
    bias: np.ndarray  # (out,)
    activation: str  # "gelu" or "identity"


@dataclass
class ParamSet:
    """Ordered affine layers; the unit of ownership for one network."""

    layers: list[Layer]

    @property
    def in_dim(self) -> int:
        return self.layers[0].weight.shape[1]

    @property
    def out_dim(self) -> int:
        return self.layers[-1].weight.shape[0]

    def copy(self) -> "ParamSet":
        return ParamSet(
            [Layer(l.weight.copy(), l.bias.copy(), l.activation) for l in self.layers]
        )


@dataclass
class GradSet:
    """Per-parameter partials, shape-parallel to a ParamSet."""

    d_weights: list[np.ndarray]
    d_biases: list[np.ndarray]

    def scale(self, c: float) -> "GradSet":
        return GradSet([c * dw for dw in self.d_weights], [c * db for db in self.d_biases])

    def add(self, other: "GradSet") -> "GradSet":
        return GradSet(
            [a + b for a, b in zip(self.d_weights, other.d_weights)],
            [a + b for a, b in zip(self.d_biases, other.d_biases)],
        )

    def max_abs(self) -> float:
        vals = [np.max(np.abs(dw)) if dw.size else 0.0 for dw in self.d_weights]
        vals += [np.max(np.abs(db)) if db.size else 0.0 for db in self.d_biases]
        return float(max(vals))

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(dw)) for dw in self.d_weights) and all(
            np.all(np.isfinite(db)) for db in self.d_biases
        )


def zeros_grad(params: ParamSet) -> GradSet:
    return GradSet(
        [np.zeros_like(l.weight) for l in params.layers],
        [np.zeros_like(l.bias) for l in params.layers],
    )


@dataclass
class AdamState:
    m_weights: list[np.ndarray]
    v_weights: list[np.ndarray]
    m_biases: list[np.ndarray]
    v_biases: list[np.ndarray]
    step: int = 0
    beta1: float = ADAM_BETA1
    beta2: float = ADAM_BETA2
    delta: float = ADAM_DELTA


def init_adam(params: ParamSet) -> AdamState:
    return AdamState(
        m_weights=[np.zeros_like(l.weight) for l in params.layers],
        v_weights=[np.zeros_like(l.weight) for l in params.layers],
        m_biases=[np.zeros_like(l.bias) for l in params.layers],
        v_biases=[np.zeros_like(l.bias) for l in params.layers],
    )


def init_mlp(rng: np.random.Generator, sizes: list[int]) -> ParamSet:
    """Uniform +-sqrt(1/fan_in) init; GELU hidden layers, identity output.

    ``sizes`` is [in, hidden..., out]; must have at least one affine layer.
    """
    if len(sizes) < 2:
        raise ValueError("need at least input and output sizes")
    layers = []
    n = len(sizes) - 1
    for i in range(n):
        fan_in, fan_out = sizes[i], sizes[i + 1]
        bound = np.sqrt(1.0 / fan_in)
        w = rng.uniform(-bound, bound, size=(fan_out, fan_in))
        b = rng.uniform(-bound, bound, size=(fan_out,))
        act = "identity" if i == n - 1 else "gelu"
        layers.append(Layer(w, b, act))
    return ParamSet(layers)


@dataclass
class ForwardCache:
    """Activation trace: per-layer inputs, pre-activations, and the
    normal CDF values reused by the GELU derivative."""

    inputs: list[np.ndarray] = field(default_factory=list)
    pre_acts: list[np.ndarray] = field(default_factory=list)
    cdfs: list[np.ndarray | None] = field(default_factory=list)
    single: bool = False


def mlp_forward(params: ParamSet, x: np.ndarray) -> tuple[np.ndarray, ForwardCache]:
    """Evaluate the network on one vector or a (batch, in) matrix."""
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    h = x[None, :] if single else x
    if h.shape[1] != params.in_dim:
        raise ValueError(
            f"input width {h.shape[1]} does not match network in_dim {params.in_dim}"
        )
    cache = ForwardCache(single=single)
    for layer in params.layers:
        cache.inputs.append(h)
        z = h @ layer.weight.T + layer.bias
        cache.pre_acts.append(z)
        if layer.activation == "gelu":
            cdf = 0.5 * (1.0 + erf(z * _INV_SQRT2))
            cache.cdfs.append(cdf)
            h = z * cdf
        else:
            cache.cdfs.append(None)
            h = z
    out = h[0] if single else h
    return out, cache


def mlp_backward(
    params: ParamSet, cache: ForwardCache, output_grad: np.ndarray
) -> tuple[GradSet, np.ndarray]:
    """Reverse-mode derivatives of sum_batch <output, output_grad>.

    Returns the parameter gradient and the gradient with respect to the
    input (same leading shape as the forward input). For batched calls
    the parameter gradient is the sum over the batch; divide by the
    batch size for a mean.
    """
    if len(cache.inputs) != len(params.layers):
        raise ValueError("cache does not match network depth")
    g = np.asarray(output_grad, dtype=np.float64)
    if cache.single:
        g = g[None, :]
    if g.shape != cache.pre_acts[-1].shape:
        raise ValueError("output_grad shape does not match cached forward pass")
    d_weights = [None] * len(params.layers)
    d_biases = [None] * len(params.layers)
    for i in range(len(params.layers) - 1, -1, -1):
        layer = params.layers[i]
        if layer.activation == "gelu":
            z = cache.pre_acts[i]
            g = g * (cache.cdfs[i] + z * _INV_SQRT_2PI * np.exp(-0.5 * z * z))
        d_weights[i] = g.T @ cache.inputs[i]
        d_biases[i] = g.sum(axis=0)
        g = g @ layer.weight
    input_grad = g[0] if cache.single else g
    return GradSet(d_weights, d_biases), input_grad


def adam_step(
    state: AdamState, params: ParamSet, grads: GradSet, lr: float
) -> tuple[ParamSet, AdamState]:
    """One bias-corrected Adam update; mutates state and params in place."""
    if lr <= 0:
        raise ValueError("lr must be positive")
    if not grads.is_finite():
        raise NumericalError("non-finite gradient entry in adam_step")
    state.step += 1
    t = state.step
    b1, b2, d = state.beta1, state.beta2, state.delta
    c1 = 1.0 - b1**t
    c2 = 1.0 - b2**t
    for i, layer in enumerate(params.layers):
        for m, v, g, p in (
            (state.m_weights[i], state.v_weights[i], grads.d_weights[i], layer.weight),
            (state.m_biases[i], state.v_biases[i], grads.d_biases[i], layer.bias),
        ):
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            p -= lr * (m / c1) / (np.sqrt(v / c2) + d)
    return params, state


def params_all_finite(params: ParamSet) -> bool:
    return all(
        np.all(np.isfinite(l.weight)) and np.all(np.isfinite(l.bias))
        for l in params.layers
    )
