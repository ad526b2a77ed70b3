"""Central finite-difference checks for recorded gradients."""

from __future__ import annotations

import numpy as np

from .autograd import backward


def relative_error(a, b, floor=1e-8):
    return abs(a - b) / max(abs(a), abs(b), floor)


def check_gradients(loss_fn, params, rng, n_probes=20, h=1e-5, floor=1e-8):
    """Compare tape gradients with central differences at random coordinates.

    ``loss_fn()`` must rebuild the loss from the current parameter values.
    Returns the list of ``(param index, flat index, analytic, numeric, rel err)``.
    """
    analytic = [g.copy() for g in backward(loss_fn(), params)]
    sizes = np.array([p.data.size for p in params])
    probes = []
    for _ in range(n_probes):
        k = rng.choice(len(params), p=sizes / sizes.sum())
        flat = rng.integers(params[k].data.size)
        view = params[k].data.reshape(-1)
        orig = view[flat]
        view[flat] = orig + h
        up = loss_fn().item()
        view[flat] = orig - h
        down = loss_fn().item()
        view[flat] = orig
        numeric = (up - down) / (2.0 * h)
        a = analytic[k].reshape(-1)[flat]
        probes.append((int(k), int(flat), float(a), numeric, relative_error(a, numeric, floor)))
    return probes
