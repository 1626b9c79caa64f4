"""Minimal dense-network machinery with hand-written gradients.

Everything runs in float64: the networks involved are tiny, and exact
reproducibility plus finite-difference-checkable gradients matter far
more here than raw speed.  Hidden layers use Leaky ReLU, the output
layer is linear.

All parameters of a network live in one flat buffer; the per-layer
weight matrices and bias vectors are views into it, so optimizer updates
can run as a few whole-buffer operations.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

DEFAULT_LEAKY_SLOPE = 0.01


def sigmoid(x):
    """Numerically stable logistic sigmoid (scalar or array)."""
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    if out.ndim == 0:
        return float(out)
    return out


def glu_gate(a, g):
    """Gated linear unit: ``a * sigmoid(g)``."""
    return a * sigmoid(g)


def leaky_relu(x, slope=DEFAULT_LEAKY_SLOPE):
    return np.where(x >= 0, x, slope * x)


def _leaky_relu_grad(x, slope):
    return np.where(x >= 0, 1.0, slope)


def _layer_slices(layer_dims: tuple[int, ...]) -> tuple[list[tuple], int]:
    """(weight_slice_and_shape, bias_slice) bookkeeping for the flat buffer."""
    slices = []
    offset = 0
    for fan_in, fan_out in zip(layer_dims[:-1], layer_dims[1:]):
        w = (offset, offset + fan_in * fan_out, (fan_in, fan_out))
        offset = w[1]
        b = (offset, offset + fan_out)
        offset = b[1]
        slices.append((w, b))
    return slices, offset


def _views(flat: np.ndarray, layer_dims) -> tuple[list[np.ndarray], list[np.ndarray]]:
    slices, _ = _layer_slices(layer_dims)
    weights = [flat[a:b].reshape(shape) for (a, b, shape), _ in slices]
    biases = [flat[a:b] for _, (a, b) in slices]
    return weights, biases


@dataclass
class DenseNetwork:
    """Fully connected network: ``layer_dims[0] -> ... -> layer_dims[-1]``.

    ``weights[i]`` has shape (layer_dims[i], layer_dims[i+1]) so batches
    are row vectors; biases are 1-D.  ``weights``/``biases`` are views
    into ``flat_params``.
    """

    layer_dims: tuple[int, ...]
    flat_params: np.ndarray
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    leaky_slope: float = DEFAULT_LEAKY_SLOPE

    @classmethod
    def create(cls, layer_dims, seed, leaky_slope=DEFAULT_LEAKY_SLOPE) -> "DenseNetwork":
        dims = tuple(int(d) for d in layer_dims)
        if len(dims) < 2 or any(d <= 0 for d in dims):
            raise ValueError(f"layer_dims must be >= 2 positive entries, got {dims}")
        _, size = _layer_slices(dims)
        flat = np.zeros(size)
        weights, biases = _views(flat, dims)
        net = cls(
            layer_dims=dims,
            flat_params=flat,
            weights=weights,
            biases=biases,
            leaky_slope=leaky_slope,
        )
        init_weights(net, seed)
        return net

    def parameters(self) -> list[np.ndarray]:
        """Per-layer parameter views, weights and biases interleaved."""
        out: list[np.ndarray] = []
        for w, b in zip(self.weights, self.biases):
            out.append(w)
            out.append(b)
        return out

    def n_params(self) -> int:
        return self.flat_params.size

    def copy(self) -> "DenseNetwork":
        flat = self.flat_params.copy()
        weights, biases = _views(flat, self.layer_dims)
        return DenseNetwork(self.layer_dims, flat, weights, biases, self.leaky_slope)


def init_weights(net: DenseNetwork, seed) -> DenseNetwork:
    """Re-draw parameters in place: weights uniform in +-sqrt(1/fan_in), biases zero.

    Deterministic for a given seed (int or sequence of ints).
    """
    rng = np.random.default_rng(seed)
    for fan_in, w, b in zip(net.layer_dims[:-1], net.weights, net.biases):
        bound = float(np.sqrt(1.0 / fan_in))
        w[...] = rng.uniform(-bound, bound, size=w.shape)
        b[...] = 0.0
    return net


@dataclass
class ForwardCache:
    """Activation record from one forward pass, consumed by backward()."""

    inputs: list[np.ndarray]          # layer inputs, inputs[0] is the network input
    pre_activations: list[np.ndarray]
    single_sample: bool


def forward(net: DenseNetwork, inputs) -> tuple[np.ndarray, ForwardCache]:
    """Run the network on a single input vector or a batch (rows = samples)."""
    x = np.asarray(inputs, dtype=float)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != net.layer_dims[0]:
        raise ValueError(
            f"input width {x.shape[-1]} does not match layer_dims[0]={net.layer_dims[0]}"
        )
    layer_inputs = [x]
    pre_activations = []
    n_layers = len(net.weights)
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        z = x @ w
        z += b
        pre_activations.append(z)
        x = leaky_relu(z, net.leaky_slope) if i < n_layers - 1 else z
        if i < n_layers - 1:
            layer_inputs.append(x)
    cache = ForwardCache(layer_inputs, pre_activations, single)
    return (x[0] if single else x), cache


@dataclass
class GradientBundle:
    """Per-parameter gradients, shape-congruent with a DenseNetwork.

    May be backed by a flat buffer (``flat`` is then the concatenated
    gradient) so optimizers can treat the whole network as one vector.
    """

    weights: list[np.ndarray]
    biases: list[np.ndarray]
    flat: np.ndarray | None = None

    @classmethod
    def zeros_for(cls, net: DenseNetwork) -> "GradientBundle":
        flat = np.zeros_like(net.flat_params)
        weights, biases = _views(flat, net.layer_dims)
        return cls(weights=weights, biases=biases, flat=flat)

    def arrays(self) -> list[np.ndarray]:
        out: list[np.ndarray] = []
        for w, b in zip(self.weights, self.biases):
            out.append(w)
            out.append(b)
        return out


def backward(
    net: DenseNetwork, cache: ForwardCache, output_gradient, out: GradientBundle | None = None
) -> GradientBundle:
    """Backpropagate a gradient w.r.t. the network output through the cache.

    The output gradient must match the shape produced by the paired
    forward() call; batch gradients are summed over the batch (loss
    functions already fold in any 1/n factor).  Passing ``out`` reuses its
    buffers instead of allocating.
    """
    g = np.asarray(output_gradient, dtype=float)
    if cache.single_sample:
        g = g[None, :]
    n_layers = len(net.weights)
    if len(cache.pre_activations) != n_layers or g.shape != cache.pre_activations[-1].shape:
        raise ValueError("cache does not match this network/output gradient")
    bundle = out if out is not None else GradientBundle.zeros_for(net)
    for i in range(n_layers - 1, -1, -1):
        # g is the gradient w.r.t. pre-activation z_i here
        np.matmul(cache.inputs[i].T, g, out=bundle.weights[i])
        np.sum(g, axis=0, out=bundle.biases[i])
        if i > 0:
            g = g @ net.weights[i].T
            g *= _leaky_relu_grad(cache.pre_activations[i - 1], net.leaky_slope)
    return bundle


def l1_loss(predictions, targets) -> tuple[float, np.ndarray]:
    """Mean absolute error and its (sub)gradient, with sign(0) = 0."""
    p = np.asarray(predictions, dtype=float)
    t = np.asarray(targets, dtype=float)
    if p.shape != t.shape or p.size == 0:
        raise ValueError(f"shape mismatch or empty input: {p.shape} vs {t.shape}")
    diff = p - t
    loss = float(np.mean(np.abs(diff)))
    grad = np.sign(diff) / diff.size
    return loss, grad


@dataclass
class AdamState:
    """Adam optimizer moments for a flat list of parameter arrays."""

    first_moment: list[np.ndarray]
    second_moment: list[np.ndarray]
    step_count: int = 0
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    _scratch: list[np.ndarray] = field(default_factory=list, repr=False)

    @classmethod
    def for_params(cls, params: list[np.ndarray], lr: float = 1e-3, **kwargs) -> "AdamState":
        return cls(
            first_moment=[np.zeros_like(p) for p in params],
            second_moment=[np.zeros_like(p) for p in params],
            lr=lr,
            **kwargs,
        )


def adam_step(params: list[np.ndarray], grads: list[np.ndarray], state: AdamState):
    """One bias-corrected Adam update, applied to the arrays in place."""
    if len(params) != len(grads) or len(params) != len(state.first_moment):
        raise ValueError("params/grads/state length mismatch")
    if not state._scratch:
        state._scratch = [np.empty_like(p) for p in params]
    state.step_count += 1
    t = state.step_count
    bc1 = 1.0 - state.beta1**t
    bc2 = 1.0 - state.beta2**t
    scale = state.lr / bc1
    for p, g, m, v, s in zip(
        params, grads, state.first_moment, state.second_moment, state._scratch
    ):
        if p.shape != g.shape:
            raise ValueError(f"gradient shape {g.shape} does not match parameter {p.shape}")
        m *= state.beta1
        np.multiply(g, 1.0 - state.beta1, out=s)
        m += s
        v *= state.beta2
        np.multiply(g, g, out=s)
        s *= 1.0 - state.beta2
        v += s
        np.divide(v, bc2, out=s)
        np.sqrt(s, out=s)
        s += state.epsilon
        np.divide(m, s, out=s)
        s *= scale
        p -= s
    return params, state
