"""Pipeline stages and the on-disk archive they share.

Layout under ``<out_dir>/<experiment>/``::

    manifest.json
    rewards/<role>/member-0000.json
    embed.json
    ensembles/<role>/index.json, member-0000.json, loss-0000.csv
    trajectory.json
    <trajectory-hash>/tensor-<role>.json
    <trajectory-hash>/surrogate-<kind>.json, samples-<kind>.npy
    <trajectory-hash>/report-<kind>.json, policies[-mlp].csv, sobol.json

Every file is a pure function of the manifest, so reruns are byte-identical.
"""

from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass

import numpy as np

from ..errors import NumericalError, TrainingDivergence, UsageError
from ..gflownet import write_loss_curve
from ..mlp_surrogate import MlpConfig, MlpSurrogate, train_mlp_surrogate
from ..pce import PolicySurrogate, fit_policy_surrogate, sobol_indices
from . import comparison as cmp
from .experiments import experiment_for
from .seeds import stream

log = logging.getLogger("gfnuq.pipeline")

ROLES = ("train", "test")
# stream index reserved for whole-ensemble draws, far above any member index
_GLOBAL = 1 << 40


def write_json(path, obj):
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w") as fh:
        json.dump(obj, fh, sort_keys=True, separators=(",", ":"), allow_nan=False)
        fh.write("\n")


def read_json(path):
    with open(path) as fh:
        return json.load(fh)


def experiment_dir(manifest):
    return os.path.join(manifest.out_dir, manifest.experiment)


def _member_name(i):
    return f"member-{i:04d}.json"


# -- rewards --------------------------------------------------------------------

def sample_rewards(manifest, roles=ROLES):
    """Write the reward each member will be trained on (first draws of its stream)."""
    exp = experiment_for(manifest)
    root = experiment_dir(manifest)
    for role in roles:
        for i in range(manifest.ensemble[role]):
            reward = exp.sample_reward(stream(manifest.seed, role, i))
            write_json(os.path.join(root, "rewards", role, _member_name(i)), exp.reward_to_json(reward))


# -- embedding ------------------------------------------------------------------

def fit_embed(manifest):
    exp = experiment_for(manifest)
    doc = exp.fit_embedder(stream(manifest.seed, "embed"))
    write_json(os.path.join(experiment_dir(manifest), "embed.json"), doc)
    return doc


def load_embed(manifest):
    return read_json(os.path.join(experiment_dir(manifest), "embed.json"))


# -- ensembles ------------------------------------------------------------------

def run_ensemble(manifest, role, embedder=None):
    """Train every member of one role; diverged members are flagged, not fatal.

    Returns the list of diverged member indices.
    """
    if role not in ROLES:
        raise UsageError(f"role must be 'train' or 'test', got {role!r}")
    exp = experiment_for(manifest)
    embedder = load_embed(manifest) if embedder is None else embedder
    base = os.path.join(experiment_dir(manifest), "ensembles", role)
    os.makedirs(base, exist_ok=True)
    members, diverged = [], []
    for i in range(manifest.ensemble[role]):
        rng = stream(manifest.seed, role, i)
        reward = exp.sample_reward(rng)
        doc = {"role": role, "index": i, "reward": exp.reward_to_json(reward)}
        try:
            model, losses = exp.train_member(reward, rng)
        except TrainingDivergence as exc:
            log.warning("%s member %d diverged: %s", role, i, exc)
            doc.update(status="diverged", error=str(exc))
            diverged.append(i)
        else:
            doc.update(status="ok", model=model.to_dict(),
                       latent=np.asarray(exp.latent(embedder, reward)).tolist())
            write_loss_curve(os.path.join(base, f"loss-{i:04d}.csv"), losses)
            log.info("%s member %d trained, final loss %.4g", role, i, losses[-1])
        write_json(os.path.join(base, _member_name(i)), doc)
        members.append({"index": i, "status": doc["status"]})
    write_json(os.path.join(base, "index.json"),
               {"role": role, "experiment": manifest.experiment, "manifest": manifest.digest(),
                "members": members, "diverged": diverged})
    return diverged


def load_archive(manifest, role):
    """``(index, members)`` of one ensemble; only members that trained cleanly."""
    base = os.path.join(experiment_dir(manifest), "ensembles", role)
    index = read_json(os.path.join(base, "index.json"))
    if index["role"] != role:
        raise UsageError(f"archive at {base} is tagged {index['role']!r}, expected {role!r}")
    members = [read_json(os.path.join(base, _member_name(m["index"])))
               for m in index["members"] if m["status"] == "ok"]
    return index, members


# -- trajectory and policy tensors ----------------------------------------------

def resolve_trajectory(manifest, create=True):
    """Focal trajectory of this manifest, computed once and stored in ``trajectory.json``.

    With ``create=False`` a missing or stale file is an I/O error instead.
    """
    path = os.path.join(experiment_dir(manifest), "trajectory.json")
    if os.path.exists(path):
        doc = read_json(path)
        if doc["manifest"] == manifest.digest():
            return doc["trajectory"]
    if not create:
        raise FileNotFoundError(f"no trajectory for this manifest at {path}; run extract-policies first")
    traj = experiment_for(manifest).resolve_trajectory()
    write_json(path, {"manifest": manifest.digest(), "trajectory": traj})
    return traj


def trajectory_dir(manifest, trajectory):
    return os.path.join(experiment_dir(manifest), manifest.trajectory_hash(trajectory))


@dataclass
class PolicyTensor:
    role: str
    values: np.ndarray  # (members, steps, channels)
    members: list
    latents: np.ndarray  # one code per member
    channel_labels: tuple
    trajectory: object

    def to_dict(self):
        return {"role": self.role, "values": self.values.tolist(), "members": list(self.members),
                "latents": self.latents.tolist(), "channel_labels": list(self.channel_labels),
                "trajectory": self.trajectory}

    @classmethod
    def from_dict(cls, doc):
        return cls(doc["role"], np.array(doc["values"], dtype=np.float64), doc["members"],
                   np.array(doc["latents"], dtype=np.float64), tuple(doc["channel_labels"]),
                   doc["trajectory"])


def extract_policy_tensor(manifest, role, trajectory=None):
    exp = experiment_for(manifest)
    trajectory = resolve_trajectory(manifest) if trajectory is None else trajectory
    _, members = load_archive(manifest, role)
    if not members:
        raise NumericalError(f"no {role} member trained successfully")
    values = np.stack([exp.policies(exp.model_from_dict(m["model"]), exp.reward_from_json(m["reward"]),
                                    trajectory) for m in members])
    tensor = PolicyTensor(role, values, [m["index"] for m in members],
                          np.array([m["latent"] for m in members]), tuple(exp.channel_labels), trajectory)
    write_json(os.path.join(trajectory_dir(manifest, trajectory), f"tensor-{role}.json"), tensor.to_dict())
    return tensor


def load_tensor(manifest, role, trajectory):
    return PolicyTensor.from_dict(read_json(os.path.join(trajectory_dir(manifest, trajectory),
                                                         f"tensor-{role}.json")))


# -- surrogates -----------------------------------------------------------------

def surrogate_inputs(manifest, tensor, embedder):
    """Stack every member's surrogate inputs and repeat its policies to match."""
    exp = experiment_for(manifest)
    xs, ys = [], []
    for idx, code, policy in zip(tensor.members, tensor.latents, tensor.values):
        rows = exp.training_inputs(embedder, code, stream(manifest.seed, "surrogate", idx))
        xs.append(rows)
        ys.append(np.repeat(policy[None], len(rows), axis=0))
    return np.concatenate(xs), np.concatenate(ys)


def fit_surrogate(manifest, tensor, embedder, kind=None):
    """Fit a PCE or MLP surrogate on a training tensor; test tensors are refused."""
    if tensor.role != "train":
        raise UsageError(f"surrogates are fitted on training archives only, got a {tensor.role!r} tensor")
    exp = experiment_for(manifest)
    kind = kind or manifest.surrogate["kind"]
    x, y = surrogate_inputs(manifest, tensor, embedder)
    s = manifest.surrogate
    if kind == "pce":
        model = fit_policy_surrogate(x, y, s["degree"], float(s["ridge"]), kind=exp.surrogate_kind)
    elif kind == "mlp":
        cfg = manifest.mlp_config()
        config = MlpConfig(hidden=tuple(cfg["hidden"]), epochs=cfg["epochs"], lr=cfg["lr"])
        model, losses = train_mlp_surrogate(x, y, stream(manifest.seed, "surrogate", _GLOBAL),
                                            exp.surrogate_kind, config)
        write_loss_curve(os.path.join(trajectory_dir(manifest, tensor.trajectory), "loss-mlp.csv"), losses)
    else:
        raise UsageError(f"unknown surrogate {kind!r}")
    write_json(os.path.join(trajectory_dir(manifest, tensor.trajectory), f"surrogate-{kind}.json"),
               {"type": kind, "model": model.to_dict()})
    return model


def load_surrogate(manifest, trajectory, kind):
    doc = read_json(os.path.join(trajectory_dir(manifest, trajectory), f"surrogate-{kind}.json"))
    return PolicySurrogate.from_dict(doc["model"]) if doc["type"] == "pce" else MlpSurrogate.from_dict(doc["model"])


def sample_surrogate(manifest, surrogate, embedder, trajectory, kind, n_samples=None):
    """Draw fresh latents by the experiment's own rule and push them through the surrogate."""
    exp = experiment_for(manifest)
    n = manifest.surrogate["samples"] if n_samples is None else n_samples
    latents = exp.fresh_latents(embedder, n, stream(manifest.seed, "sample"))
    samples = surrogate(latents)
    if not np.all(np.isfinite(samples)):
        raise NumericalError("surrogate produced non-finite policies")
    np.save(os.path.join(trajectory_dir(manifest, trajectory), f"samples-{kind}.npy"), samples,
            allow_pickle=False)
    return samples


def fit_and_sample(manifest, tensor, embedder, kind=None, n_samples=None):
    kind = kind or manifest.surrogate["kind"]
    model = fit_surrogate(manifest, tensor, embedder, kind)
    return sample_surrogate(manifest, model, embedder, tensor.trajectory, kind, n_samples)


def load_samples(manifest, trajectory, kind):
    return np.load(os.path.join(trajectory_dir(manifest, trajectory), f"samples-{kind}.npy"))


# -- comparison and output ------------------------------------------------------

def plot_csv_name(kind):
    return "policies.csv" if kind == "pce" else f"policies-{kind}.csv"


def emit_plot_data(out_dir, report, tables, kind="pce"):
    """Long-format CSV of ``tables`` plus the report JSON, both under ``out_dir``."""
    os.makedirs(out_dir, exist_ok=True)
    cmp.write_plot_csv(os.path.join(out_dir, plot_csv_name(kind)), tables)
    write_json(os.path.join(out_dir, f"report-{kind}.json"), cmp.report_json_obj(report))


def compare_stage(manifest, trajectory, kind):
    train = load_tensor(manifest, "train", trajectory)
    test = load_tensor(manifest, "test", trajectory)
    samples = load_samples(manifest, trajectory, kind)
    report = cmp.compare(samples, test.values, train.values, list(test.channel_labels))
    report.update(experiment=manifest.experiment, surrogate=kind,
                  trajectory_hash=manifest.trajectory_hash(trajectory),
                  n_samples=int(samples.shape[0]), n_test=len(test.members), n_train=len(train.members))
    emit_plot_data(trajectory_dir(manifest, trajectory), report,
                   {"test": test.values, "surrogate": samples}, kind)
    return report


def sobol_stage(manifest, trajectory):
    """First-order and total Sobol' indices of every active (step, channel) PCE."""
    surrogate = load_surrogate(manifest, trajectory, "pce")
    rows = []
    for t in range(surrogate.n_steps):
        for c in range(surrogate.n_channels):
            if surrogate.active[t, c]:
                rows.append({"step": t, "channel": c, **sobol_indices(surrogate.model(t, c)).to_dict()})
    doc = {"experiment": manifest.experiment, "space": "logit" if surrogate.kind == "discrete" else "raw",
           "indices": rows}
    write_json(os.path.join(trajectory_dir(manifest, trajectory), "sobol.json"), doc)
    return doc


def run_all(manifest, kind=None):
    """Every stage in order; returns ``(report, diverged)`` with diverged member counts per role."""
    kind = kind or manifest.surrogate["kind"]
    doc = manifest.to_dict()
    doc.pop("out_dir")  # keeps output trees relocatable and comparable by hash
    write_json(os.path.join(experiment_dir(manifest), "manifest.json"), doc)
    sample_rewards(manifest)
    embedder = fit_embed(manifest)
    diverged = {role: len(run_ensemble(manifest, role, embedder)) for role in ROLES}
    trajectory = resolve_trajectory(manifest)
    train = extract_policy_tensor(manifest, "train", trajectory)
    extract_policy_tensor(manifest, "test", trajectory)
    surrogate = fit_surrogate(manifest, train, embedder, kind)
    sample_surrogate(manifest, surrogate, embedder, trajectory, kind)
    report = compare_stage(manifest, trajectory, kind)
    if kind == "pce":
        sobol_stage(manifest, trajectory)
    return report, diverged


__all__ = [
    "PolicyTensor",
    "compare_stage",
    "emit_plot_data",
    "experiment_dir",
    "extract_policy_tensor",
    "fit_and_sample",
    "fit_embed",
    "fit_surrogate",
    "load_archive",
    "load_embed",
    "load_samples",
    "load_surrogate",
    "load_tensor",
    "resolve_trajectory",
    "run_all",
    "run_ensemble",
    "sample_rewards",
    "sample_surrogate",
    "sobol_stage",
    "trajectory_dir",
]
