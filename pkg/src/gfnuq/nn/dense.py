"""Fully connected networks and their JSON checkpoint format."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from ..errors import UsageError
from .autograd import Tensor, ensure_tensor, parameter

ACTIVATIONS = ("relu", "tanh", "identity")


def glorot_uniform(rng, fan_in, fan_out):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


def _activate(x, tag):
    if tag == "relu":
        return x.relu()
    if tag == "tanh":
        return x.tanh()
    return x


@dataclass
class DenseLayer:
    weight: Tensor  # (in, out)
    bias: Tensor  # (out,)
    activation: str = "identity"

    @property
    def in_dim(self):
        return self.weight.shape[0]

    @property
    def out_dim(self):
        return self.weight.shape[1]


class DenseNet:
    """A stack of affine layers, each followed by relu, tanh or identity.

    ``forward`` accepts a single vector or a batch ``(..., input_dim)`` and
    works on both plain arrays and :class:`Tensor` inputs.
    """

    def __init__(self, layers):
        if not layers:
            raise UsageError("DenseNet needs at least one layer")
        for prev, nxt in zip(layers, layers[1:]):
            if prev.out_dim != nxt.in_dim:
                raise UsageError(
                    f"layer dimensions do not chain: {prev.out_dim} -> {nxt.in_dim}"
                )
        for layer in layers:
            if layer.activation not in ACTIVATIONS:
                raise UsageError(f"unknown activation {layer.activation!r}")
        self.layers = list(layers)

    @classmethod
    def create(cls, sizes, rng, hidden_activation="relu", output_activation="identity"):
        """Glorot-initialised net with layer widths ``sizes`` (input first)."""
        layers = []
        for i, (fan_in, fan_out) in enumerate(zip(sizes, sizes[1:])):
            last = i == len(sizes) - 2
            layers.append(
                DenseLayer(
                    parameter(glorot_uniform(rng, fan_in, fan_out)),
                    parameter(np.zeros(fan_out)),
                    output_activation if last else hidden_activation,
                )
            )
        return cls(layers)

    @property
    def input_dim(self):
        return self.layers[0].in_dim

    @property
    def output_dim(self):
        return self.layers[-1].out_dim

    def parameters(self):
        return [p for layer in self.layers for p in (layer.weight, layer.bias)]

    def __call__(self, x):
        return forward(self, x)

    def predict(self, x):
        """Forward pass on raw arrays without recording a graph."""
        h = np.asarray(x, dtype=np.float64)
        if h.shape[-1] != self.input_dim:
            raise UsageError(f"expected input dim {self.input_dim}, got {h.shape[-1]}")
        for layer in self.layers:
            h = h @ layer.weight.data + layer.bias.data
            if layer.activation == "relu":
                h = np.maximum(h, 0.0)
            elif layer.activation == "tanh":
                h = np.tanh(h)
        return h

    # -- checkpoints ----------------------------------------------------

    def to_dict(self):
        return {
            "kind": "dense",
            "layers": [
                {
                    "shape": list(layer.weight.shape),
                    "activation": layer.activation,
                    "weight": _floats(layer.weight.data.ravel()),
                    "bias": _floats(layer.bias.data),
                }
                for layer in self.layers
            ],
        }

    @classmethod
    def from_dict(cls, doc):
        layers = []
        for entry in doc["layers"]:
            n_in, n_out = entry["shape"]
            w = np.array(entry["weight"], dtype=np.float64).reshape(n_in, n_out)
            b = np.array(entry["bias"], dtype=np.float64)
            layers.append(DenseLayer(parameter(w), parameter(b), entry["activation"]))
        return cls(layers)

    def to_json(self):
        return dumps(self.to_dict())

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


def forward(net, x):
    """Run ``x`` through ``net`` and return a :class:`Tensor`."""
    h = ensure_tensor(x)
    if h.shape[-1] != net.input_dim:
        raise UsageError(f"expected input dim {net.input_dim}, got {h.shape[-1]}")
    for layer in net.layers:
        h = _activate(h @ layer.weight + layer.bias, layer.activation)
    return h


def _floats(values):
    # 17 significant digits round-trips any finite double exactly
    return [float(format(v, ".17g")) for v in np.asarray(values, dtype=np.float64)]


def dumps(doc):
    return json.dumps(doc, sort_keys=True, separators=(",", ":"))
