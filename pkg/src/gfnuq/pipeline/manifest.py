"""Experiment manifests: JSON documents that pin every knob of a run."""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass, field

from ..errors import UsageError
from ..envs.structlearn import GROUND_TRUTH_EDGES
from ..envs.symreg import FOCAL_TOKENS
from .seeds import member_seed

EXPERIMENTS = ("discrete-grid", "continuous-grid", "symreg", "structlearn")

# 19 moves ending next to the lower-left plus, then Stop
FOCAL_GRID_CELLS = (
    (9, 2), (9, 1), (9, 0), (8, 0), (7, 0), (6, 0), (5, 0), (4, 0), (3, 0), (2, 0),
    (1, 0), (0, 0), (0, 1), (0, 2), (0, 3), (0, 4), (1, 4), (1, 3), (1, 2), (2, 2),
)

DEFAULTS = {
    "discrete-grid": {
        "ensemble": {"train": 50, "test": 100},
        "training": {"loss": "subtb", "episodes": 20000, "batch_size": 64, "lr": 1e-3,
                     "temperature": 0.4, "buffer_capacity": 10000, "hidden": [128, 128]},
        "environment": {"p_shift": 0.5, "size": 10, "max_steps": 20},
        "embedding": {"method": "vae", "n_fit": 500, "epochs": 1000, "beta": 4.0, "lr": 1e-3,
                      "batch_size": 64, "augment": 10},
        "surrogate": {"kind": "pce", "degree": 7, "ridge": 1e-6, "samples": 50000},
        "trajectory": [list(c) for c in FOCAL_GRID_CELLS],
    },
    "continuous-grid": {
        "ensemble": {"train": 50, "test": 100},
        "training": {"episodes": 5000, "batch_size": 256, "lr": 1e-3, "hidden": [100, 100]},
        "environment": {"n_steps": 5, "mean_variance": 0.1, "variance": 0.3},
        "embedding": {"method": "identity"},
        "surrogate": {"kind": "pce", "degree": 5, "ridge": 1e-6, "samples": 50000},
        "trajectory": None,
    },
    "symreg": {
        "ensemble": {"train": 250, "test": 150},
        "training": {"loss": "tb", "episodes": 10000, "batch_size": 64, "lr": 1e-3,
                     "temperature": 1.5},
        "environment": {"sigma": 0.5},
        "embedding": {"method": "kl", "n_fit": 500, "n_terms": 2},
        "surrogate": {"kind": "pce", "degree": 14, "ridge": 1e-6, "samples": 10000},
        "trajectory": list(FOCAL_TOKENS) + ["<end>"],
    },
    "structlearn": {
        "ensemble": {"train": 250, "test": 250},
        "training": {"loss": "tb", "episodes": 5000, "batch_size": 64, "lr": 1e-3},
        "environment": {"n_nodes": 5, "n_obs": 100, "noise_variance": 0.01,
                        "edges": [list(e) for e in GROUND_TRUTH_EDGES]},
        "embedding": {"method": "pca", "n_fit": 500, "k": 2},
        "surrogate": {"kind": "pce", "degree": 7, "ridge": 1e-6, "samples": 10000},
        "trajectory": [list(e) for e in GROUND_TRUTH_EDGES],
    },
}

MLP_DEFAULTS = {"hidden": [64, 64], "epochs": 5000, "lr": 1e-3}


def _merge(base, override):
    out = copy.deepcopy(base)
    for k, v in (override or {}).items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def canonical_json(obj):
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


@dataclass
class ExperimentManifest:
    experiment: str
    seed: int = 0
    ensemble: dict = field(default_factory=dict)
    training: dict = field(default_factory=dict)
    environment: dict = field(default_factory=dict)
    embedding: dict = field(default_factory=dict)
    surrogate: dict = field(default_factory=dict)
    trajectory: object = None
    out_dir: str = "out"

    @classmethod
    def default(cls, experiment, **overrides):
        if experiment not in EXPERIMENTS:
            raise UsageError(f"unknown experiment {experiment!r}; choose from {', '.join(EXPERIMENTS)}")
        doc = _merge(DEFAULTS[experiment], overrides)
        doc["experiment"] = experiment
        return cls.from_dict(doc)

    @classmethod
    def from_dict(cls, doc):
        doc = dict(doc)
        experiment = doc.get("experiment")
        if experiment not in EXPERIMENTS:
            raise UsageError(f"unknown experiment {experiment!r}; choose from {', '.join(EXPERIMENTS)}")
        unknown = set(doc) - set(cls.__dataclass_fields__)
        if unknown:
            raise UsageError(f"unknown manifest keys: {', '.join(sorted(unknown))}")
        base = DEFAULTS[experiment]
        merged = {k: _merge(base[k], doc.get(k)) if isinstance(base.get(k), dict) else doc.get(k, base.get(k))
                  for k in ("ensemble", "training", "environment", "embedding", "surrogate")}
        merged["trajectory"] = doc["trajectory"] if "trajectory" in doc else copy.deepcopy(base["trajectory"])
        m = cls(experiment=experiment, seed=int(doc.get("seed", 0)), out_dir=str(doc.get("out_dir", "out")),
                **merged)
        m.validate()
        return m

    @classmethod
    def load(cls, path):
        try:
            with open(path) as fh:
                doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise UsageError(f"manifest {path} is not valid JSON: {exc}") from None
        return cls.from_dict(doc)

    def to_dict(self):
        return {
            "experiment": self.experiment,
            "seed": self.seed,
            "ensemble": copy.deepcopy(self.ensemble),
            "training": copy.deepcopy(self.training),
            "environment": copy.deepcopy(self.environment),
            "embedding": copy.deepcopy(self.embedding),
            "surrogate": copy.deepcopy(self.surrogate),
            "trajectory": copy.deepcopy(self.trajectory),
            "out_dir": self.out_dir,
        }

    def digest(self):
        """Hash of everything except the output location."""
        doc = self.to_dict()
        doc.pop("out_dir")
        return hashlib.sha256(canonical_json(doc).encode()).hexdigest()

    def trajectory_hash(self, trajectory=None):
        traj = self.trajectory if trajectory is None else trajectory
        doc = {"experiment": self.experiment, "trajectory": traj}
        return hashlib.sha256(canonical_json(doc).encode()).hexdigest()[:12]

    def validate(self):
        for role in ("train", "test"):
            n = self.ensemble.get(role)
            if not isinstance(n, int) or n < 1:
                raise UsageError(f"ensemble.{role} must be a positive integer")
        train = {member_seed(self.seed, "train", i) for i in range(self.ensemble["train"])}
        test = {member_seed(self.seed, "test", i) for i in range(self.ensemble["test"])}
        if train & test:
            raise UsageError("train and test member seeds overlap")
        s = self.surrogate
        if s.get("kind") not in ("pce", "mlp"):
            raise UsageError(f"surrogate.kind must be 'pce' or 'mlp', got {s.get('kind')!r}")
        if not isinstance(s.get("degree"), int) or s["degree"] < 0:
            raise UsageError("surrogate.degree must be a non-negative integer")
        if not float(s.get("ridge", 0.0)) >= 0.0:
            raise UsageError("surrogate.ridge must be non-negative")
        if not isinstance(s.get("samples"), int) or s["samples"] < 1:
            raise UsageError("surrogate.samples must be a positive integer")
        if self.experiment == "discrete-grid":
            traj = self.trajectory
            if not traj or any(len(c) != 2 for c in traj):
                raise UsageError("discrete-grid trajectory must be a list of [row, col] cells")
        if self.experiment == "symreg" and not self.trajectory:
            raise UsageError("symreg trajectory must be a non-empty token list")
        if self.experiment == "structlearn" and not self.trajectory:
            raise UsageError("structlearn trajectory must be a non-empty edge list")
        return self

    def mlp_config(self):
        return _merge(MLP_DEFAULTS, self.surrogate.get("mlp"))


__all__ = ["DEFAULTS", "EXPERIMENTS", "FOCAL_GRID_CELLS", "ExperimentManifest", "canonical_json"]
