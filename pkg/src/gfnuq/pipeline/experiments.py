"""One adapter per experiment: rewards, models, embeddings, focal trajectories.

Every adapter exposes the same small surface so the stages in
:mod:`gfnuq.pipeline.stages` never branch on the experiment name.
"""

from __future__ import annotations

import numpy as np

from ..embed import BetaVae, PcaProjector, VaeConfig, kl_project, pca_fit, vae_train
from ..envs import grid as g
from ..envs import structlearn as sl
from ..envs import symreg as sr
from ..errors import EnvironmentContractError, UsageError
from ..gflownet import (
    ContinuousGfn,
    ContinuousTrainConfig,
    EdgePolicy,
    GfnModel,
    MlpPolicy,
    SequencePolicy,
    TrainConfig,
    policies_along,
    policy_along,
    sample_paths,
    train,
    train_continuous,
)
from .seeds import stream

_TRAIN_KEYS = set(TrainConfig.__dataclass_fields__)


def _train_config(training):
    return TrainConfig(**{k: v for k, v in training.items() if k in _TRAIN_KEYS})


class Experiment:
    name = ""
    surrogate_kind = "discrete"
    channel_labels = ()

    def __init__(self, manifest):
        self.manifest = manifest
        self.env_params = manifest.environment
        self.training = manifest.training
        self.embedding = manifest.embedding

    # rewards ----------------------------------------------------------------
    def sample_reward(self, rng):
        raise NotImplementedError

    def reward_to_json(self, reward):
        raise NotImplementedError

    def reward_from_json(self, doc):
        raise NotImplementedError

    # models -----------------------------------------------------------------
    def train_member(self, reward, rng):
        """Fresh model trained on ``reward``; returns ``(model, losses)``."""
        raise NotImplementedError

    def model_from_dict(self, doc):
        return GfnModel.from_dict(doc)

    # embedding --------------------------------------------------------------
    def fit_embedder(self, rng):
        """Returns a JSON-able embedder document."""
        return {"method": self.embedding["method"]}

    def latent(self, embedder, reward):
        raise NotImplementedError

    def training_inputs(self, embedder, code, rng):
        """Rows of surrogate inputs contributed by one member's latent code."""
        return np.atleast_2d(code)

    def fresh_latents(self, embedder, n, rng):
        raise NotImplementedError

    # trajectories -----------------------------------------------------------
    def resolve_trajectory(self):
        """Concrete focal trajectory (JSON-able) for this manifest."""
        return self.manifest.trajectory

    def policies(self, model, reward, trajectory):
        """Policy at each step of ``trajectory``: ``(n_steps, n_channels)``."""
        raise NotImplementedError


# -- discrete grid ------------------------------------------------------------

class DiscreteGridExperiment(Experiment):
    name = "discrete-grid"
    channel_labels = g.ACTION_NAMES

    def sample_reward(self, rng):
        return g.sample_discrete_reward(self.env_params["p_shift"], rng, size=self.env_params["size"])

    def reward_to_json(self, reward):
        return reward.to_json_obj()

    def reward_from_json(self, doc):
        return g.DiscreteRewardGrid.from_json_obj(doc)

    def _env(self, reward, start=None):
        return g.DiscreteGridEnv(reward.cells, self.env_params["max_steps"], start)

    def train_member(self, reward, rng):
        env = self._env(reward)
        policy = MlpPolicy.create(env.feature_dim, env.n_actions + 1, rng,
                                  hidden=tuple(self.training.get("hidden", (128, 128))))
        model = GfnModel(policy, env.n_actions, flow_head=True, log_z=None)
        result = train(model, env, _train_config(self.training), rng)
        return model, result.losses

    def fit_embedder(self, rng):
        e = self.embedding
        grids = np.stack([g.one_hot_grid(self.sample_reward(rng).cells) for _ in range(e["n_fit"])])
        config = VaeConfig(epochs=e["epochs"], batch_size=e["batch_size"], lr=e["lr"], beta=e["beta"])
        vae, _ = vae_train(grids, config, rng)
        return {"method": "vae", "vae": vae.to_dict()}

    def _vae(self, embedder):
        cached = embedder.get("_model")
        if cached is None:
            cached = embedder["_model"] = BetaVae.from_dict(embedder["vae"])
        return cached

    def latent(self, embedder, reward):
        mean, log_var = self._vae(embedder).encode(g.one_hot_grid(reward.cells)[None])
        return np.concatenate([mean[0], log_var[0]])

    def training_inputs(self, embedder, code, rng):
        d = len(code) // 2
        mean, log_var = code[:d], code[d:]
        n = int(self.embedding.get("augment", 1))
        return mean + np.exp(0.5 * log_var) * rng.standard_normal((n, d))

    def fresh_latents(self, embedder, n, rng):
        vae = self._vae(embedder)
        grids = np.stack([g.one_hot_grid(self.sample_reward(rng).cells) for _ in range(n)])
        return vae.sample_latent(grids, rng)

    def policies(self, model, reward, trajectory):
        cells = [tuple(int(v) for v in c) for c in trajectory]
        env = self._env(reward, start=cells[0])
        state = env.initial_state()
        states = [state]
        for a in env.path_actions(cells):
            # moves are reward-independent; only Stop depends on the grid
            if not env.move_mask(state)[a]:
                raise EnvironmentContractError(f"focal move into {cells[len(states)]} is invalid")
            state = env.step(state, a)
            states.append(state)
        return policy_along(model, env, states)


# -- continuous grid ----------------------------------------------------------

class ContinuousGridExperiment(Experiment):
    name = "continuous-grid"
    surrogate_kind = "gaussian"
    channel_labels = ("mu_x", "var_x", "mu_y", "var_y")

    def sample_reward(self, rng):
        p = self.env_params
        return g.sample_continuous_spec(rng, mean_variance=p["mean_variance"], variance=p["variance"])

    def reward_to_json(self, reward):
        return {"means": [list(m) for m in reward.means], "variance": reward.variance}

    def reward_from_json(self, doc):
        return g.ContinuousRewardSpec(tuple(tuple(m) for m in doc["means"]), doc["variance"])

    def _config(self):
        t = self.training
        return ContinuousTrainConfig(episodes=t["episodes"], batch_size=t["batch_size"], lr=t["lr"],
                                     log_z_lr=t.get("log_z_lr", 0.1))

    def _train(self, reward, rng):
        env = g.ContinuousGridEnv(reward, self.env_params["n_steps"])
        model = ContinuousGfn.create(rng, hidden=tuple(self.training.get("hidden", (100, 100))))
        losses = train_continuous(model, env, self._config(), rng)
        return model, losses

    def train_member(self, reward, rng):
        return self._train(reward, rng)

    def model_from_dict(self, doc):
        return ContinuousGfn.from_dict(doc)

    def latent(self, embedder, reward):
        return reward.latent

    def fresh_latents(self, embedder, n, rng):
        return np.stack([self.sample_reward(rng).latent for _ in range(n)])

    def resolve_trajectory(self):
        if self.manifest.trajectory is not None:
            return self.manifest.trajectory
        # one path drawn from a model trained on the unperturbed means
        rng = stream(self.manifest.seed, "trajectory")
        truth = g.ContinuousRewardSpec(g.MEAN_CENTRES, self.env_params["variance"])
        model, _ = self._train(truth, rng)
        return sample_paths(model, 1, rng, self.env_params["n_steps"])[0].tolist()

    def policies(self, model, reward, trajectory):
        pos = np.asarray(trajectory, dtype=np.float64)
        if pos.ndim != 2 or pos.shape[1] != 2 or not np.allclose(pos[0], 0.0):
            raise UsageError("continuous trajectory must be a list of [x, y] positions starting at the origin")
        return policies_along(model, pos)


# -- symbolic regression ------------------------------------------------------

class SymregExperiment(Experiment):
    name = "symreg"
    channel_labels = sr.TOKENS + ("<end>",)

    def sample_reward(self, rng):
        return sr.make_noisy_target(self.env_params["sigma"], rng)

    def reward_to_json(self, reward):
        return {"x": reward.x.tolist(), "values": reward.values.tolist(), "sigma": reward.sigma}

    def reward_from_json(self, doc):
        x = np.array(doc["x"], dtype=np.float64)
        return sr.NoisyTarget(x, np.array(doc["values"], dtype=np.float64), sr.target_function(x), doc["sigma"])

    def train_member(self, reward, rng):
        env = sr.SymbolicRegressionEnv(reward)
        model = GfnModel(SequencePolicy.create(env.vocab_size, env.n_actions, rng), env.n_actions)
        result = train(model, env, _train_config(self.training), rng)
        return model, result.losses

    def fit_embedder(self, rng):
        values = np.stack([self.sample_reward(rng).values for _ in range(self.embedding["n_fit"])])
        return {"method": "kl", "mean_fn": values.mean(axis=0).tolist(),
                "n_terms": self.embedding["n_terms"]}

    def latent(self, embedder, reward):
        return kl_project(reward, np.asarray(embedder["mean_fn"]), embedder["n_terms"])

    def fresh_latents(self, embedder, n, rng):
        return np.stack([self.latent(embedder, self.sample_reward(rng)) for _ in range(n)])

    def _actions(self, trajectory):
        return [sr.TERMINATE if t == "<end>" else sr.to_ids([t])[0] for t in trajectory]

    def policies(self, model, reward, trajectory):
        env = sr.SymbolicRegressionEnv(reward)
        state = env.initial_state()
        states = []
        for a in self._actions(trajectory):
            states.append(state)
            state = env.step(state, a)
        return policy_along(model, env, states)


# -- structure learning -------------------------------------------------------

class StructlearnExperiment(Experiment):
    name = "structlearn"

    def __init__(self, manifest):
        super().__init__(manifest)
        n = self.env_params["n_nodes"]
        self.channel_labels = tuple(f"{s}->{t}" for s in range(n) for t in range(n)) + ("<end>",)
        self._truth = None

    @property
    def truth(self):
        """Ground-truth network; its weights come from a stream of their own."""
        if self._truth is None:
            p = self.env_params
            edges = [tuple(e) for e in p.get("edges", sl.GROUND_TRUTH_EDGES)]
            self._truth = sl.make_network(edges, p["n_nodes"], rng=stream(self.manifest.seed, "truth"),
                                          noise_variance=p["noise_variance"])
        return self._truth

    def sample_reward(self, rng):
        return sl.sample_dataset(self.truth, self.env_params["n_obs"], rng)

    def reward_to_json(self, reward):
        return {"data": np.asarray(reward).tolist()}

    def reward_from_json(self, doc):
        return np.array(doc["data"], dtype=np.float64)

    def train_member(self, reward, rng):
        env = sl.StructureLearningEnv(reward)
        model = GfnModel(EdgePolicy.create(env.n, rng), env.n_actions)
        result = train(model, env, _train_config(self.training), rng)
        return model, result.losses

    def fit_embedder(self, rng):
        rows = np.stack([sl.r_matrix(self.sample_reward(rng)).ravel() for _ in range(self.embedding["n_fit"])])
        return {"method": "pca", "pca": pca_fit(rows, self.embedding["k"]).to_dict()}

    def _pca(self, embedder):
        cached = embedder.get("_model")
        if cached is None:
            cached = embedder["_model"] = PcaProjector.from_dict(embedder["pca"])
        return cached

    def latent(self, embedder, reward):
        return self._pca(embedder).project(sl.r_matrix(reward).ravel()[None])[0]

    def fresh_latents(self, embedder, n, rng):
        rows = np.stack([sl.r_matrix(self.sample_reward(rng)).ravel() for _ in range(n)])
        return self._pca(embedder).project(rows)

    def policies(self, model, reward, trajectory):
        env = sl.StructureLearningEnv(reward)
        state = env.initial_state()
        states = []
        for s, t in trajectory:
            states.append(state)
            state = env.step(state, sl.encode_action(int(s), int(t), env.n))
        return policy_along(model, env, states)


EXPERIMENT_TYPES = {
    cls.name: cls
    for cls in (DiscreteGridExperiment, ContinuousGridExperiment, SymregExperiment, StructlearnExperiment)
}


def experiment_for(manifest):
    return EXPERIMENT_TYPES[manifest.experiment](manifest)
