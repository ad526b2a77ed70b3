"""Distributional comparison of surrogate samples against a testing ensemble."""

from __future__ import annotations

import csv
import warnings

import numpy as np
from sklearn.exceptions import ConvergenceWarning
from sklearn.mixture import GaussianMixture

from .. import kernels

QUANTILES = (0.05, 0.25, 0.5, 0.75, 0.95)
GMM_MAX_POINTS = 5000
CSV_HEADER = ("source", "step", "channel", "value")


def w1(a, b):
    """Empirical 1-Wasserstein distance between two 1-D samples."""
    return float(kernels.wasserstein1(np.ascontiguousarray(a, dtype=np.float64),
                                      np.ascontiguousarray(b, dtype=np.float64)))


def mode_count(values, seed=0):
    """1 or 2, whichever Gaussian-mixture size has the lower BIC.

    Values are standardised first so the covariance floor means the same
    thing at every scale; samples above 5000 are subsampled with a fixed rng.
    """
    x = np.asarray(values, dtype=np.float64).ravel()
    if x.size > GMM_MAX_POINTS:
        x = np.random.default_rng(seed).choice(x, GMM_MAX_POINTS, replace=False)
    sd = x.std()
    if x.size < 4 or not sd > 1e-12:
        return 1
    z = ((x - x.mean()) / sd)[:, None]
    bic = []
    for k in (1, 2):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ConvergenceWarning)
            gm = GaussianMixture(k, random_state=seed, n_init=1 if k == 1 else 3).fit(z)
        bic.append(gm.bic(z))
    return 2 if bic[1] < bic[0] else 1


def variance_ratio(surrogate, test):
    """var(surrogate) / var(test); None when both are zero, inf when only the test is constant."""
    vs, vt = float(np.var(surrogate)), float(np.var(test))
    if vt == 0.0:
        return None if vs == 0.0 else float("inf")
    return vs / vt


def compare(samples, test, train=None, labels=None):
    """Per-(step, channel) statistics of ``samples`` against ``test``.

    ``samples`` is ``(n_samples, T, C)`` and ``test`` ``(n_test, T, C)``;
    ``train`` (same layout) adds the train-vs-test reference distance.
    """
    samples = np.asarray(samples, dtype=np.float64)
    test = np.asarray(test, dtype=np.float64)
    if samples.shape[1:] != test.shape[1:]:
        raise ValueError(f"sample grid {samples.shape[1:]} does not match test grid {test.shape[1:]}")
    _, n_steps, n_channels = test.shape
    rows = []
    for t in range(n_steps):
        for c in range(n_channels):
            s, e = samples[:, t, c], test[:, t, c]
            row = {
                "step": t,
                "channel": c,
                "label": None if labels is None else labels[c],
                "w1": w1(s, e),
                "quantiles": {
                    "surrogate": np.quantile(s, QUANTILES).tolist(),
                    "test": np.quantile(e, QUANTILES).tolist(),
                },
                "variance_ratio": variance_ratio(s, e),
                "modes": {"surrogate": mode_count(s), "test": mode_count(e)},
            }
            if train is not None:
                r = np.asarray(train, dtype=np.float64)[:, t, c]
                row["w1_reference"] = w1(r, e)
                row["quantiles"]["train"] = np.quantile(r, QUANTILES).tolist()
            rows.append(row)
    return {"quantile_levels": list(QUANTILES), "channels": rows, "summary": summarise(rows)}


def summarise(rows, factor=1.5):
    """Share of channels whose surrogate distance is within ``factor`` of the reference."""
    ref = [r for r in rows if "w1_reference" in r]
    within = sum(r["w1"] <= factor * r["w1_reference"] for r in ref)
    return {
        "n_channels": len(rows),
        "max_w1": max((r["w1"] for r in rows), default=0.0),
        "within_factor": factor,
        "fraction_within": within / len(ref) if ref else None,
        "bimodal_channels": [[r["step"], r["channel"]] for r in rows if r["modes"]["surrogate"] == 2],
    }


def _json_safe(value):
    if isinstance(value, float) and not np.isfinite(value):
        return "inf" if value > 0 else ("-inf" if value < 0 else "nan")
    if isinstance(value, dict):
        return {k: _json_safe(v) for k, v in value.items()}
    if isinstance(value, list):
        return [_json_safe(v) for v in value]
    return value


def report_json_obj(report):
    """Strict-JSON form of a report (non-finite floats become strings)."""
    return _json_safe(report)


def long_rows(source, values):
    """``(n, T, C)`` array -> list of ``(source, step, channel, value)`` rows."""
    v = np.asarray(values, dtype=np.float64)
    n, n_steps, n_channels = v.shape
    flat = v.reshape(n, -1).T.tolist()  # one list per (step, channel)
    rows = []
    for k, column in enumerate(flat):
        t, c = divmod(k, n_channels)
        rows.extend((source, t, c, x) for x in column)
    return rows


def write_plot_csv(path, tables):
    """Write ``{source: (n, T, C) array}`` as one long-format CSV; returns the row count."""
    count = 0
    with open(path, "w", newline="") as fh:
        fh.write(",".join(CSV_HEADER) + "\n")
        for source in sorted(tables):
            rows = long_rows(source, tables[source])
            fh.writelines(f"{s},{t},{c},{x!r}\n" for s, t, c, x in rows)
            count += len(rows)
    return count


def read_plot_csv(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != CSV_HEADER:
            raise ValueError(f"unexpected header {header}")
        return [(s, int(t), int(c), float(x)) for s, t, c, x in reader]
