"""Policy networks mapping encoded states to action logits (plus an optional flow column).

Each network exposes ``parameters()``, ``__call__(features) -> Tensor`` of
shape ``(B, n_outputs)`` and a ``to_dict``/``from_dict`` pair tagged with a
``kind`` so checkpoints can be rebuilt without knowing the type up front.
"""

from __future__ import annotations

import numpy as np

from ..errors import UsageError
from ..nn import DenseNet, RecurrentEncoder, concat, parameter
from ..nn.dense import _floats


class MlpPolicy:
    kind = "mlp"

    def __init__(self, net):
        self.net = net

    @classmethod
    def create(cls, input_dim, n_outputs, rng, hidden=(128, 128), activation="relu"):
        return cls(DenseNet.create([input_dim, *hidden, n_outputs], rng, hidden_activation=activation))

    @property
    def n_outputs(self):
        return self.net.output_dim

    def parameters(self):
        return self.net.parameters()

    def __call__(self, features):
        return self.net(features)

    def to_dict(self):
        return {"kind": self.kind, "net": self.net.to_dict()}

    @classmethod
    def from_dict(cls, doc):
        return cls(DenseNet.from_dict(doc["net"]))


class SequencePolicy:
    """GRU over the token prefix, then a dense head on the final hidden state."""

    kind = "sequence"

    def __init__(self, encoder, head):
        self.encoder = encoder
        self.head = head

    @classmethod
    def create(cls, vocab_size, n_outputs, rng, embed_dim=32, hidden_dim=64, head_hidden=(64,)):
        enc = RecurrentEncoder.create(vocab_size, rng, embed_dim=embed_dim, hidden_dim=hidden_dim)
        head = DenseNet.create([hidden_dim, *head_hidden, n_outputs], rng)
        return cls(enc, head)

    @property
    def n_outputs(self):
        return self.head.output_dim

    def parameters(self):
        return self.encoder.parameters() + self.head.parameters()

    def __call__(self, features):
        tokens, lengths = features
        h = self.encoder.encode_batch(tokens, lengths)
        return self.head(h[:, -1])

    def to_dict(self):
        return {"kind": self.kind, "encoder": self.encoder.to_dict(), "head": self.head.to_dict()}

    @classmethod
    def from_dict(cls, doc):
        return cls(RecurrentEncoder.from_dict(doc["encoder"]), DenseNet.from_dict(doc["head"]))


class EdgePolicy:
    """Edge-embedding policy over ``n*n`` edge actions plus terminate.

    Every directed edge is described by one-hot source and target codes and
    its presence bit. A shared network embeds each edge; the mean embedding
    summarises the graph. Edge logits come from each embedding plus the
    summary; the terminate logit (and the optional flow) from the summary.
    """

    kind = "edge"

    def __init__(self, n_nodes, embed, edge_head, graph_head):
        self.n_nodes = n_nodes
        self.embed = embed
        self.edge_head = edge_head
        self.graph_head = graph_head
        eye = np.eye(n_nodes)
        src = np.repeat(eye, n_nodes, axis=0)
        tgt = np.tile(eye, (n_nodes, 1))
        self._codes = np.concatenate([src, tgt], axis=1)  # (n*n, 2n), row = n*source + target

    @classmethod
    def create(cls, n_nodes, rng, hidden=64, flow_head=False):
        embed = DenseNet.create([2 * n_nodes + 1, hidden, hidden], rng, output_activation="relu")
        edge_head = DenseNet.create([hidden, hidden, 1], rng)
        graph_head = DenseNet.create([hidden, hidden, 2 if flow_head else 1], rng)
        return cls(n_nodes, embed, edge_head, graph_head)

    @property
    def n_outputs(self):
        return self.n_nodes * self.n_nodes + self.graph_head.output_dim

    def parameters(self):
        return self.embed.parameters() + self.edge_head.parameters() + self.graph_head.parameters()

    def __call__(self, features):
        adj = np.asarray(features, dtype=np.float64)
        b, e = adj.shape
        if e != self.n_nodes * self.n_nodes:
            raise UsageError(f"expected {self.n_nodes ** 2} edge indicators, got {e}")
        x = np.concatenate([np.broadcast_to(self._codes, (b, e, self._codes.shape[1])),
                            adj[:, :, None]], axis=2)
        h = self.embed(x.reshape(b * e, -1))
        width = h.shape[1]
        h3 = h.reshape(b, e, width)
        pooled = h3.mean(axis=1)
        mixed = (h3 + pooled.reshape(b, 1, width)).relu()
        edge_logits = self.edge_head(mixed.reshape(b * e, width)).reshape(b, e)
        return concat([edge_logits, self.graph_head(pooled)], axis=1)

    def to_dict(self):
        return {
            "kind": self.kind,
            "n_nodes": self.n_nodes,
            "embed": self.embed.to_dict(),
            "edge_head": self.edge_head.to_dict(),
            "graph_head": self.graph_head.to_dict(),
        }

    @classmethod
    def from_dict(cls, doc):
        return cls(doc["n_nodes"], DenseNet.from_dict(doc["embed"]),
                   DenseNet.from_dict(doc["edge_head"]), DenseNet.from_dict(doc["graph_head"]))


class TablePolicy:
    """One free row of outputs per integer state; used for small explicit graphs."""

    kind = "table"

    def __init__(self, table):
        self.table = table

    @classmethod
    def create(cls, n_states, n_outputs, rng=None, scale=0.0):
        values = np.zeros((n_states, n_outputs))
        if rng is not None and scale:
            values = scale * rng.standard_normal((n_states, n_outputs))
        return cls(parameter(values))

    @property
    def n_outputs(self):
        return self.table.shape[1]

    def parameters(self):
        return [self.table]

    def __call__(self, features):
        return self.table[np.asarray(features, dtype=np.int64)]

    def to_dict(self):
        return {"kind": self.kind, "shape": list(self.table.shape),
                "values": _floats(self.table.data.ravel())}

    @classmethod
    def from_dict(cls, doc):
        return cls(parameter(np.array(doc["values"], dtype=np.float64).reshape(doc["shape"])))


POLICIES = {c.kind: c for c in (MlpPolicy, SequencePolicy, EdgePolicy, TablePolicy)}


def policy_from_dict(doc):
    try:
        return POLICIES[doc["kind"]].from_dict(doc)
    except KeyError:
        raise UsageError(f"unknown policy kind {doc.get('kind')!r}") from None
