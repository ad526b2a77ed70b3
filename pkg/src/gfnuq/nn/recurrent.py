"""Gated recurrent sequence encoder."""

from __future__ import annotations

import numpy as np

from ..errors import UsageError
from .autograd import Tensor, parameter, stack, where
from .dense import _floats, glorot_uniform

_GATES = ("r", "z", "n")


class RecurrentEncoder:
    """Token embedding followed by a single GRU cell.

    The embedding of a sequence is the hidden state after its last token; the
    empty sequence maps to the zero initial state.
    """

    def __init__(self, embedding, w, u, b):
        self.embedding = embedding  # (vocab, embed_dim)
        self.w = w  # gate -> (embed_dim, hidden)
        self.u = u  # gate -> (hidden, hidden)
        self.b = b  # gate -> (hidden,)

    @classmethod
    def create(cls, vocab_size, rng, embed_dim=32, hidden_dim=64):
        emb = parameter(rng.normal(0.0, 1.0 / np.sqrt(embed_dim), size=(vocab_size, embed_dim)))
        w = {g: parameter(glorot_uniform(rng, embed_dim, hidden_dim)) for g in _GATES}
        u = {g: parameter(glorot_uniform(rng, hidden_dim, hidden_dim)) for g in _GATES}
        b = {g: parameter(np.zeros(hidden_dim)) for g in _GATES}
        return cls(emb, w, u, b)

    @property
    def vocab_size(self):
        return self.embedding.shape[0]

    @property
    def hidden_dim(self):
        return self.u["r"].shape[0]

    def parameters(self):
        params = [self.embedding]
        for g in _GATES:
            params += [self.w[g], self.u[g], self.b[g]]
        return params

    def _check(self, tokens):
        tokens = np.asarray(tokens, dtype=np.int64)
        if tokens.size and (tokens.min() < 0 or tokens.max() >= self.vocab_size):
            raise UsageError("token id outside the vocabulary")
        return tokens

    def _cell(self, x, h):
        r = (x @ self.w["r"] + h @ self.u["r"] + self.b["r"]).sigmoid()
        z = (x @ self.w["z"] + h @ self.u["z"] + self.b["z"]).sigmoid()
        n = (x @ self.w["n"] + r * (h @ self.u["n"]) + self.b["n"]).tanh()
        return (1.0 - z) * n + z * h

    def encode_batch(self, tokens, lengths):
        """Hidden states for every prefix of a padded batch.

        ``tokens`` is ``(B, L)``; returns a Tensor of shape ``(B, L + 1, H)``
        whose slice ``[:, t]`` encodes the first ``t`` tokens (clamped at each
        row's length).
        """
        tokens = self._check(tokens)
        lengths = np.asarray(lengths)
        batch, steps = tokens.shape
        h = Tensor(np.zeros((batch, self.hidden_dim)))
        states = [h]
        for t in range(steps):
            x = self.embedding[tokens[:, t]]
            h_new = self._cell(x, h)
            h = where((t < lengths)[:, None], h_new, h)
            states.append(h)
        return stack(states, axis=1)

    def to_dict(self):
        doc = {
            "kind": "gru",
            "embedding": {
                "shape": list(self.embedding.shape),
                "values": _floats(self.embedding.data.ravel()),
            },
        }
        for g in _GATES:
            doc[f"w_{g}"] = _floats(self.w[g].data.ravel())
            doc[f"u_{g}"] = _floats(self.u[g].data.ravel())
            doc[f"b_{g}"] = _floats(self.b[g].data)
        return doc

    @classmethod
    def from_dict(cls, doc):
        vocab, embed_dim = doc["embedding"]["shape"]
        emb = parameter(np.array(doc["embedding"]["values"]).reshape(vocab, embed_dim))
        hidden = len(doc["b_r"])
        w = {g: parameter(np.array(doc[f"w_{g}"]).reshape(embed_dim, hidden)) for g in _GATES}
        u = {g: parameter(np.array(doc[f"u_{g}"]).reshape(hidden, hidden)) for g in _GATES}
        b = {g: parameter(np.array(doc[f"b_{g}"])) for g in _GATES}
        return cls(emb, w, u, b)


def encode_sequence(enc, tokens):
    """Fixed-length embedding of one token sequence (zeros when empty)."""
    tokens = enc._check(tokens)
    if tokens.size == 0:
        return np.zeros(enc.hidden_dim)
    out = enc.encode_batch(tokens[None, :], [len(tokens)])
    return out.data[0, -1]
