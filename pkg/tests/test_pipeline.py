import hashlib
import json
import os

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gfnuq.envs import symreg as sr
from gfnuq.errors import EnvironmentContractError, TrainingDivergence, UsageError
from gfnuq.pipeline import (
    ExperimentManifest,
    PolicyTensor,
    compare,
    experiment_for,
    fit_and_sample,
    member_seed,
    mode_count,
    read_plot_csv,
    splitmix64,
    variance_ratio,
    w1,
    write_plot_csv,
)
from gfnuq.pipeline import stages
from gfnuq.pipeline.cli import main
from gfnuq.pipeline.experiments import SymregExperiment


def tiny(experiment, out_dir, **extra):
    doc = {
        "discrete-grid": {"ensemble": {"train": 3, "test": 2},
                          "training": {"episodes": 5, "batch_size": 4, "hidden": [8]},
                          "embedding": {"n_fit": 20, "epochs": 2, "augment": 2},
                          "surrogate": {"degree": 1, "samples": 50}},
        "continuous-grid": {"ensemble": {"train": 3, "test": 2},
                            "training": {"episodes": 5, "batch_size": 8, "hidden": [8]},
                            "surrogate": {"degree": 1, "samples": 50}},
        "symreg": {"ensemble": {"train": 4, "test": 2}, "training": {"episodes": 3, "batch_size": 4},
                   "embedding": {"n_fit": 10}, "surrogate": {"degree": 1, "samples": 40}},
        "structlearn": {"ensemble": {"train": 4, "test": 2}, "training": {"episodes": 3, "batch_size": 4},
                        "embedding": {"n_fit": 10}, "surrogate": {"degree": 1, "samples": 40}},
    }[experiment]
    doc.update(experiment=experiment, out_dir=str(out_dir), **extra)
    return ExperimentManifest.from_dict(doc)


def tree_hash(root):
    h = hashlib.sha256()
    for dirpath, dirnames, files in os.walk(root):
        dirnames.sort()
        for name in sorted(files):
            path = os.path.join(dirpath, name)
            h.update(os.path.relpath(path, root).encode())
            with open(path, "rb") as fh:
                h.update(fh.read())
    return h.hexdigest()


# -- seeds ------------------------------------------------------------------------

def test_splitmix_reference_values():
    # first outputs of the reference generator seeded with 0
    assert splitmix64(0) == 0xE220A8397B1DCDAF
    assert splitmix64(0x9E3779B97F4A7C15) == 0x6E789E6AA1B965F4


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**63), st.integers(0, 10**6), st.integers(0, 10**6))
def test_member_seeds_separate_roles_and_indices(seed, i, j):
    assert member_seed(seed, "train", i) != member_seed(seed, "test", i)
    if i != j:
        assert member_seed(seed, "train", i) != member_seed(seed, "train", j)
    assert member_seed(seed, "train", i) == member_seed(seed, "train", i)


# -- manifest ---------------------------------------------------------------------

def test_default_ensemble_sizes():
    assert ExperimentManifest.default("discrete-grid").ensemble == {"train": 50, "test": 100}
    assert ExperimentManifest.default("symreg").ensemble["train"] == 250
    assert ExperimentManifest.default("structlearn").ensemble["train"] == 250


def test_default_sample_counts_and_degrees():
    got = {e: (ExperimentManifest.default(e).surrogate["samples"], ExperimentManifest.default(e).surrogate["degree"])
           for e in ("discrete-grid", "continuous-grid", "symreg", "structlearn")}
    assert got == {"discrete-grid": (50000, 7), "continuous-grid": (50000, 5),
                   "symreg": (10000, 14), "structlearn": (10000, 7)}


def test_manifest_rejects_bad_documents():
    with pytest.raises(UsageError):
        ExperimentManifest.from_dict({"experiment": "nope"})
    with pytest.raises(UsageError):
        ExperimentManifest.from_dict({"experiment": "symreg", "colour": "red"})
    with pytest.raises(UsageError):
        ExperimentManifest.from_dict({"experiment": "symreg", "surrogate": {"kind": "gp"}})
    with pytest.raises(UsageError):
        ExperimentManifest.from_dict({"experiment": "symreg", "ensemble": {"train": 0}})


def test_manifest_json_round_trip_and_digest(tmp_path):
    m = ExperimentManifest.default("structlearn", seed=3)
    path = tmp_path / "m.json"
    path.write_text(json.dumps(m.to_dict()))
    back = ExperimentManifest.load(path)
    assert back.to_dict() == m.to_dict()
    assert back.digest() == m.digest()
    moved = ExperimentManifest.from_dict({**m.to_dict(), "out_dir": "elsewhere"})
    assert moved.digest() == m.digest()
    assert ExperimentManifest.default("structlearn", seed=4).digest() != m.digest()


def test_trajectory_hash_is_stable_and_sensitive():
    m = ExperimentManifest.default("symreg")
    assert m.trajectory_hash() == ExperimentManifest.default("symreg").trajectory_hash()
    assert m.trajectory_hash(["x", "<end>"]) != m.trajectory_hash()


# -- comparison -------------------------------------------------------------------

def test_identical_samples_have_zero_distance():
    x = np.random.default_rng(0).random((200, 3, 4))
    report = compare(x, x, x)
    assert all(r["w1"] == 0.0 and r["w1_reference"] == 0.0 for r in report["channels"])


def test_location_shift_distance():
    rng = np.random.default_rng(0)
    a, b = rng.standard_normal(10_000), 1.0 + rng.standard_normal(10_000)
    assert abs(w1(a, b) - 1.0) <= 0.05


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_distances_are_nonnegative_and_symmetric(seed):
    rng = np.random.default_rng(seed)
    a, b = rng.standard_normal(50), rng.exponential(size=70)
    assert w1(a, b) >= 0.0
    assert w1(a, b) == pytest.approx(w1(b, a), abs=1e-12)


def test_mode_count():
    rng = np.random.default_rng(0)
    assert mode_count(rng.standard_normal(3000)) == 1
    assert mode_count(np.concatenate([rng.normal(0.2, 0.03, 2000), rng.normal(0.7, 0.03, 2000)])) == 2
    assert mode_count(np.full(100, 0.3)) == 1


def test_variance_ratio():
    assert variance_ratio([1.0, 1.0], [2.0, 2.0]) is None
    assert variance_ratio([0.0, 2.0], [0.0, 1.0]) == pytest.approx(4.0)
    assert variance_ratio([0.0, 2.0], [1.0, 1.0]) == float("inf")


def test_report_has_quantiles_and_variance_ratio():
    rng = np.random.default_rng(1)
    s, e = rng.random((500, 2, 3)), rng.random((40, 2, 3))
    report = compare(s, e, e)
    assert len(report["channels"]) == 6
    row = report["channels"][4]
    assert (row["step"], row["channel"]) == (1, 1)
    assert row["quantiles"]["surrogate"] == pytest.approx(np.quantile(s[:, 1, 1], [0.05, 0.25, 0.5, 0.75, 0.95]))
    assert row["variance_ratio"] == pytest.approx(np.var(s[:, 1, 1]) / np.var(e[:, 1, 1]))


def test_compare_rejects_mismatched_grids():
    with pytest.raises(ValueError):
        compare(np.zeros((5, 2, 3)), np.zeros((5, 3, 3)))


def test_plot_csv_round_trip(tmp_path):
    rng = np.random.default_rng(2)
    tables = {"test": rng.random((4, 2, 3)), "surrogate": rng.random((6, 2, 3))}
    path = tmp_path / "p.csv"
    assert write_plot_csv(path, tables) == 4 * 6 + 6 * 6
    rows = read_plot_csv(path)
    for source, arr in tables.items():
        got = np.zeros_like(arr)
        mine = [r for r in rows if r[0] == source]
        n = arr.shape[0]
        for k, (_, t, c, x) in enumerate(mine):
            got[k % n, t, c] = x
        assert np.array_equal(got, arr)


def test_empty_table_is_header_only(tmp_path):
    path = tmp_path / "p.csv"
    write_plot_csv(path, {})
    assert path.read_text() == "source,step,channel,value\n"


def test_unwritable_directory(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(OSError):
        stages.emit_plot_data(str(blocker / "sub"), compare(np.zeros((3, 1, 1)), np.zeros((3, 1, 1))), {})


# -- stages -----------------------------------------------------------------------

@pytest.fixture(scope="module")
def symreg_run(tmp_path_factory):
    m = tiny("symreg", tmp_path_factory.mktemp("run"))
    report, diverged = stages.run_all(m)
    return m, report, diverged


def test_run_all_writes_every_artifact(symreg_run):
    m, report, diverged = symreg_run
    assert diverged == {"train": 0, "test": 0}
    traj = stages.resolve_trajectory(m, create=False)
    d = stages.trajectory_dir(m, traj)
    for name in ("tensor-train.json", "tensor-test.json", "surrogate-pce.json", "samples-pce.npy",
                 "report-pce.json", "policies.csv", "sobol.json"):
        assert os.path.exists(os.path.join(d, name)), name
    assert os.path.basename(d) == m.trajectory_hash(traj)
    index = json.load(open(os.path.join(stages.experiment_dir(m), "ensembles", "test", "index.json")))
    assert index["role"] == "test" and len(index["members"]) == 2


def test_policy_tensor_shape_and_normalisation(symreg_run):
    m, _, _ = symreg_run
    t = stages.load_tensor(m, "train", stages.resolve_trajectory(m, create=False))
    assert t.values.shape == (4, 7, sr.N_ACTIONS)
    assert np.allclose(t.values.sum(axis=-1), 1.0, atol=1e-9)
    assert t.latents.shape == (4, 2)


def test_sample_table_row_count(symreg_run):
    m, report, _ = symreg_run
    d = stages.trajectory_dir(m, stages.resolve_trajectory(m, create=False))
    with open(os.path.join(d, "policies.csv")) as fh:
        rows = sum(1 for _ in fh) - 1
    assert rows == (40 + 2) * 7 * sr.N_ACTIONS
    assert report["n_samples"] == 40


def test_fit_rejects_test_archives(symreg_run):
    m, _, _ = symreg_run
    test = stages.load_tensor(m, "test", stages.resolve_trajectory(m, create=False))
    with pytest.raises(UsageError):
        stages.fit_surrogate(m, test, stages.load_embed(m))


def test_structlearn_tensor_shape(tmp_path):
    m = tiny("structlearn", tmp_path)
    stages.fit_embed(m)
    stages.run_ensemble(m, "train")
    t = stages.extract_policy_tensor(m, "train")
    assert t.values.shape == (4, 7, 26)
    assert np.allclose(t.values.sum(axis=-1), 1.0, atol=1e-9)


def test_discrete_grid_tensor_and_invalid_trajectory(tmp_path):
    m = tiny("discrete-grid", tmp_path)
    stages.fit_embed(m)
    stages.run_ensemble(m, "train")
    t = stages.extract_policy_tensor(m, "train")
    assert t.values.shape == (3, 20, 5)
    assert np.allclose(t.values.sum(axis=-1), 1.0, atol=1e-9)
    with pytest.raises(EnvironmentContractError):
        stages.extract_policy_tensor(m, "train", [[0, 0], [0, 1], [0, 0]])  # revisits a cell
    with pytest.raises(UsageError):
        stages.extract_policy_tensor(m, "train", [[0, 0], [1, 1]])  # not adjacent


def test_continuous_trajectory_is_sampled_path(tmp_path):
    m = tiny("continuous-grid", tmp_path)
    traj = np.array(stages.resolve_trajectory(m))
    assert traj.shape == (6, 2) and np.all(traj[0] == 0.0)
    assert stages.resolve_trajectory(m) == traj.tolist()


def test_constant_policies_give_constant_samples(tmp_path):
    m = tiny("symreg", tmp_path, surrogate={"degree": 3, "samples": 200})
    embedder = experiment_for(m).fit_embedder(np.random.default_rng(0))
    p = np.random.default_rng(1).dirichlet(np.ones(sr.N_ACTIONS), size=3)
    tensor = PolicyTensor("train", np.repeat(p[None], 12, axis=0), list(range(12)),
                          np.random.default_rng(2).standard_normal((12, 2)), sr.TOKENS + ("<end>",),
                          ["x", "<end>"])
    samples = fit_and_sample(m, tensor, embedder)
    assert samples.shape == (200, 3, sr.N_ACTIONS)
    assert np.max(np.abs(samples - p[None])) <= 1e-3


def test_diverged_members_are_flagged(tmp_path, monkeypatch):
    real = SymregExperiment.train_member
    calls = {"n": 0}

    def flaky(self, reward, rng):
        calls["n"] += 1
        if calls["n"] == 2:
            raise TrainingDivergence("loss became nan")
        return real(self, reward, rng)

    monkeypatch.setattr(SymregExperiment, "train_member", flaky)
    m = tiny("symreg", tmp_path)
    stages.fit_embed(m)
    assert stages.run_ensemble(m, "train") == [1]
    index, members = stages.load_archive(m, "train")
    assert [x["status"] for x in index["members"]] == ["ok", "diverged", "ok", "ok"]
    assert [x["index"] for x in members] == [0, 2, 3]
    assert stages.extract_policy_tensor(m, "train").members == [0, 2, 3]


def test_mlp_surrogate_stage(symreg_run, tmp_path):
    m, _, _ = symreg_run
    m2 = ExperimentManifest.from_dict({**m.to_dict(), "surrogate": {**m.surrogate, "kind": "mlp",
                                                                       "mlp": {"epochs": 30}}})
    traj = stages.resolve_trajectory(m2)
    fit_and_sample(m2, stages.load_tensor(m2, "train", traj), stages.load_embed(m2))
    report = stages.compare_stage(m2, traj, "mlp")
    d = stages.trajectory_dir(m2, traj)
    assert os.path.exists(os.path.join(d, "policies-mlp.csv"))
    assert all("variance_ratio" in r for r in report["channels"])


# -- CLI --------------------------------------------------------------------------

def test_cli_exit_codes(tmp_path, capsys):
    assert main(["run-all"]) == 1
    assert main(["frobnicate"]) == 1
    assert main(["compare", "--experiment", "symreg", "--out-dir", str(tmp_path)]) == 3
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["fit-embed", "--manifest", str(bad)]) == 1
    assert main(["sobol", "--experiment", "symreg", "--surrogate", "mlp", "--out-dir", str(tmp_path)]) == 1


def test_cli_stages_match_run_all(tmp_path, capsys):
    m = tiny("symreg", tmp_path / "a")
    path = tmp_path / "m.json"
    path.write_text(json.dumps(m.to_dict()))
    args = ["--manifest", str(path), "--out-dir", str(tmp_path / "b")]
    for cmd in ("sample-rewards", "fit-embed", "train-ensemble", "extract-policies", "fit-surrogate",
                "sample-surrogate", "compare", "sobol"):
        assert main([cmd, *args]) == 0, cmd
    assert main(["run-all", "--manifest", str(path)]) == 0
    # run-all also writes manifest.json; everything else must match byte for byte
    os.remove(tmp_path / "a" / "symreg" / "manifest.json")
    assert tree_hash(tmp_path / "a") == tree_hash(tmp_path / "b")


def test_cli_overrides(tmp_path, capsys):
    m = tiny("symreg", tmp_path)
    path = tmp_path / "m.json"
    path.write_text(json.dumps(m.to_dict()))
    assert main(["run-all", "--manifest", str(path), "--seed", "5", "--samples", "30", "--degree", "2",
                 "--ridge", "0.001"]) == 0
    saved = json.load(open(tmp_path / "symreg" / "manifest.json"))
    assert saved["seed"] == 5
    assert saved["surrogate"] == {"kind": "pce", "degree": 2, "ridge": 0.001, "samples": 30}
