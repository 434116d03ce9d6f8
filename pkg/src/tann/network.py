"""Dense feed-forward networks with exact input Jacobians.

The forward pass tracks, next to each layer activation, its sensitivity to
the (physical) network inputs.  That makes the input Jacobian an ordinary
forward quantity, and the matching reverse pass differentiates losses that
mix direct outputs and Jacobian entries with respect to every weight and
bias.  The reverse pass needs A'' of each activation, which is why the
activation table stores analytic second derivatives.

Conventions fixed across the package: the output layer of every network is
linear with its bias pinned at zero, inputs and outputs carry per-feature
affine normalization frozen at build time, and all arrays are float64.
"""

from dataclasses import dataclass, field

import numpy as np

from .activations import activation_eval


class ShapeError(ValueError):
    """Input length does not match the model."""


@dataclass
class AffineNorm:
    """Per-feature shift/scale; normalized = (x - shift) / scale."""

    shift: np.ndarray
    scale: np.ndarray

    def __post_init__(self):
        self.shift = np.atleast_1d(np.asarray(self.shift, dtype=float))
        self.scale = np.atleast_1d(np.asarray(self.scale, dtype=float))
        if self.shift.shape != self.scale.shape:
            raise ValueError("norm shift/scale length mismatch")
        if not np.all(self.scale > 0.0):
            raise ValueError("norm scales must be strictly positive")

    @classmethod
    def identity(cls, n):
        return cls(np.zeros(n), np.ones(n))

    @classmethod
    def from_data(cls, data, min_scale=1e-12):
        """z-score normalization frozen from a sample of rows."""
        data = np.atleast_2d(np.asarray(data, dtype=float))
        shift = data.mean(axis=0)
        scale = np.maximum(data.std(axis=0), min_scale)
        return cls(shift, scale)

    @classmethod
    def scale_from_data(cls, data, min_scale=1e-12):
        """Scale-only normalization (zero shift), for outputs.

        Output layers carry a frozen zero bias, so a shifted output
        normalization would demand a constant offset the network cannot
        always produce; pure scaling keeps e.g. quadratics representable.
        """
        data = np.atleast_2d(np.asarray(data, dtype=float))
        scale = np.maximum(data.std(axis=0), min_scale)
        return cls(np.zeros(data.shape[1]), scale)


@dataclass
class DenseLayer:
    weights: np.ndarray  # (n_out, n_in)
    biases: np.ndarray  # (n_out,)
    activation: str
    train_bias: bool = True

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        self.biases = np.asarray(self.biases, dtype=float)
        if self.weights.ndim != 2 or self.biases.shape != (self.weights.shape[0],):
            raise ValueError("inconsistent layer shapes")
        if not (np.all(np.isfinite(self.weights)) and np.all(np.isfinite(self.biases))):
            raise ValueError("layer parameters must be finite")


@dataclass
class Network:
    layers: list
    input_norm: AffineNorm
    output_norm: AffineNorm

    @property
    def input_dim(self):
        return self.layers[0].weights.shape[1]

    @property
    def output_dim(self):
        return self.layers[-1].weights.shape[0]

    def __post_init__(self):
        n = self.layers[0].weights.shape[1]
        for layer in self.layers:
            if layer.weights.shape[1] != n:
                raise ValueError("layer width chain is inconsistent")
            n = layer.weights.shape[0]
        if len(self.input_norm.shift) != self.input_dim:
            raise ValueError("input norm length mismatch")
        if len(self.output_norm.shift) != self.output_dim:
            raise ValueError("output norm length mismatch")

    def forward(self, x):
        """Evaluate the network; accepts one input vector or a batch."""
        x2, single = _as_batch(x, self.input_dim)
        y = _forward_only(self, x2)
        return y[0] if single else y

    def forward_with_jacobian(self, x):
        """Evaluate outputs and the exact d(output)/d(input) Jacobian."""
        x2, single = _as_batch(x, self.input_dim)
        tr = forward_trace(self, x2, need_jacobian=True)
        if single:
            return tr.y[0], tr.jac[0]
        return tr.y, tr.jac


def input_jacobian(net, x):
    """Jacobian of ``net`` at ``x``: (output_dim, input_dim) per sample."""
    return net.forward_with_jacobian(x)[1]


def forward(net, x):
    return net.forward(x)


def _as_batch(x, n_in):
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    x2 = np.atleast_2d(x)
    if x2.shape[1] != n_in:
        raise ShapeError(f"expected input width {n_in}, got {x2.shape[1]}")
    return x2, single


def _forward_only(net, x):
    p = (x - net.input_norm.shift) / net.input_norm.scale
    for layer in net.layers:
        z = p @ layer.weights.T + layer.biases
        p = activation_eval(layer.activation, z)[0]
    return p * net.output_norm.scale + net.output_norm.shift


@dataclass
class ForwardTrace:
    """Cached forward pass; feeds the reverse pass in :func:`vjp`."""

    net: Network
    x_norm: np.ndarray
    y: np.ndarray
    jac: np.ndarray | None
    p: list = field(default_factory=list)  # activations per layer, incl. input
    t: list = field(default_factory=list)  # d p / d x_phys per layer
    s: list = field(default_factory=list)  # d z / d x_phys per layer
    dact: list = field(default_factory=list)  # A'(z) per layer
    ddact: list = field(default_factory=list)  # A''(z) per layer


def forward_trace(net, x, need_jacobian=False):
    """Run the forward pass over a batch, caching what ``vjp`` needs.

    With ``need_jacobian`` the pass also carries the sensitivity of every
    layer to the physical inputs, so ``trace.jac`` holds exact Jacobians
    (normalization scale factors included).
    """
    x = np.asarray(x, dtype=float)
    n = x.shape[0]
    in_scale = net.input_norm.scale
    p = (x - net.input_norm.shift) / in_scale
    tr = ForwardTrace(net=net, x_norm=p, y=None, jac=None)
    t = None
    if need_jacobian:
        t = np.broadcast_to(np.diag(1.0 / in_scale), (n, len(in_scale), len(in_scale)))
    tr.p.append(p)
    tr.t.append(t)
    for layer in net.layers:
        z = p @ layer.weights.T + layer.biases
        a, da, dda = activation_eval(layer.activation, z)
        s = None
        if need_jacobian:
            s = np.einsum("ko,noi->nki", layer.weights, t)
            t = da[:, :, None] * s
        p = a
        tr.p.append(p)
        tr.t.append(t)
        tr.s.append(s)
        tr.dact.append(da)
        tr.ddact.append(dda)
    tr.y = p * net.output_norm.scale + net.output_norm.shift
    if need_jacobian:
        tr.jac = net.output_norm.scale[None, :, None] * t
    return tr


def vjp(trace, gy=None, gjac=None):
    """Reverse pass through a cached forward trace.

    ``gy`` is dL/d(outputs) (batch, n_out) and ``gjac`` dL/d(Jacobian)
    (batch, n_out, n_in), either may be omitted.  Returns the per-layer
    parameter gradients ``[(dW, db), ...]`` and dL/d(physical inputs),
    which lets composite models chain gradients into upstream networks.
    The Jacobian path multiplies A'' into the weight updates; activations
    with vanishing second derivative propagate nothing along it.
    """
    if gy is None and gjac is None:
        raise ValueError("nothing to back-propagate")
    net = trace.net
    n_layers = len(net.layers)
    out_scale = net.output_norm.scale
    gp = gy * out_scale if gy is not None else None
    gt = gjac * out_scale[None, :, None] if gjac is not None else None
    if gt is not None and trace.s[-1] is None:
        raise ValueError("trace was built without need_jacobian")
    grads = [None] * n_layers
    for l in range(n_layers - 1, -1, -1):
        layer = net.layers[l]
        da, dda = trace.dact[l], trace.ddact[l]
        p_prev, t_prev, s = trace.p[l], trace.t[l], trace.s[l]
        if gt is not None:
            gz = np.einsum("nki,nki->nk", gt, s) * dda
            if gp is not None:
                gz = gz + gp * da
            gs = da[:, :, None] * gt
        else:
            gz = gp * da
            gs = None
        gw = gz.T @ p_prev
        if gs is not None:
            gw = gw + np.einsum("nki,noi->ko", gs, t_prev)
        gb = gz.sum(axis=0) if layer.train_bias else np.zeros_like(layer.biases)
        grads[l] = (gw, gb)
        gp = gz @ layer.weights
        gt = np.einsum("nki,ko->noi", gs, layer.weights) if gs is not None else None
    gx = gp / net.input_norm.scale
    return grads, gx


# ---------------------------------------------------------------------------
# parameter packing (flat vectors keep the optimizer and gradient checks simple)


def n_parameters(net):
    return sum(
        layer.weights.size + (layer.biases.size if layer.train_bias else 0)
        for layer in net.layers
    )


def get_params(net):
    parts = []
    for layer in net.layers:
        parts.append(layer.weights.ravel())
        if layer.train_bias:
            parts.append(layer.biases)
    return np.concatenate(parts) if parts else np.zeros(0)


def set_params(net, vec):
    vec = np.asarray(vec, dtype=float)
    i = 0
    for layer in net.layers:
        k = layer.weights.size
        layer.weights = vec[i : i + k].reshape(layer.weights.shape).copy()
        i += k
        if layer.train_bias:
            k = layer.biases.size
            layer.biases = vec[i : i + k].copy()
            i += k
    if i != vec.size:
        raise ValueError("parameter vector length mismatch")


def grads_to_vector(net, grads):
    parts = []
    for layer, (gw, gb) in zip(net.layers, grads):
        parts.append(gw.ravel())
        if layer.train_bias:
            parts.append(gb)
    return np.concatenate(parts)


# ---------------------------------------------------------------------------
# construction / serialization


def make_network(sizes, hidden_activation, rng, input_norm=None, output_norm=None):
    """Glorot-uniform initialized network: ``sizes = [n_in, ..., n_out]``.

    Hidden layers share ``hidden_activation`` (a tag or one tag per hidden
    layer); the output layer is linear with a frozen zero bias.
    """
    if len(sizes) < 2:
        raise ValueError("need at least input and output sizes")
    n_hidden = len(sizes) - 2
    if isinstance(hidden_activation, str):
        acts = [hidden_activation] * n_hidden
    else:
        acts = list(hidden_activation)
        if len(acts) != n_hidden:
            raise ValueError("one activation tag per hidden layer")
    layers = []
    for i in range(len(sizes) - 1):
        fan_in, fan_out = sizes[i], sizes[i + 1]
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        w = rng.uniform(-bound, bound, size=(fan_out, fan_in))
        b = np.zeros(fan_out)
        last = i == len(sizes) - 2
        layers.append(
            DenseLayer(w, b, "linear" if last else acts[i], train_bias=not last)
        )
    return Network(
        layers=layers,
        input_norm=input_norm or AffineNorm.identity(sizes[0]),
        output_norm=output_norm or AffineNorm.identity(sizes[-1]),
    )


def to_dict(net):
    return {
        "input_dim": net.input_dim,
        "output_dim": net.output_dim,
        "norms": {
            "input": {
                "shift": net.input_norm.shift.tolist(),
                "scale": net.input_norm.scale.tolist(),
            },
            "output": {
                "shift": net.output_norm.shift.tolist(),
                "scale": net.output_norm.scale.tolist(),
            },
        },
        "layers": [
            {
                "rows": layer.weights.shape[0],
                "cols": layer.weights.shape[1],
                "weights": layer.weights.ravel().tolist(),
                "biases": layer.biases.tolist(),
                "activation": layer.activation,
                "train_bias": layer.train_bias,
            }
            for layer in net.layers
        ],
    }


def from_dict(doc):
    layers = [
        DenseLayer(
            np.asarray(d["weights"], dtype=float).reshape(d["rows"], d["cols"]),
            np.asarray(d["biases"], dtype=float),
            d["activation"],
            train_bias=d.get("train_bias", True),
        )
        for d in doc["layers"]
    ]
    net = Network(
        layers=layers,
        input_norm=AffineNorm(doc["norms"]["input"]["shift"], doc["norms"]["input"]["scale"]),
        output_norm=AffineNorm(doc["norms"]["output"]["shift"], doc["norms"]["output"]["scale"]),
    )
    if net.input_dim != doc["input_dim"] or net.output_dim != doc["output_dim"]:
        raise ValueError("serialized dimensions disagree with layer shapes")
    return net


def save_json(net, path):
    import json

    with open(path, "w", encoding="utf-8") as fh:
        json.dump(to_dict(net), fh, indent=1)


def load_json(path):
    import json

    with open(path, encoding="utf-8") as fh:
        return from_dict(json.load(fh))
