import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gfnuq.envs.grid import (
    DEFAULT_CENTRES,
    HIGH,
    LEVELS,
    LOW,
    MID,
    SHIFTS,
    STOP,
    ContinuousGridEnv,
    ContinuousRewardSpec,
    ContinuousState,
    DiscreteGridEnv,
    GridState,
    all_reward_grids,
    build_reward_grid,
    continuous_log_reward,
    continuous_reward,
    continuous_step,
    one_hot_grid,
    sample_continuous_spec,
    sample_discrete_reward,
)
from gfnuq.errors import UsageError


def ground_truth():
    return build_reward_grid(("none",) * 4).cells


def test_ground_truth_layout():
    cells = ground_truth()
    for r, c in DEFAULT_CENTRES:
        assert cells[r, c] == HIGH
        for dr, dc in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            assert cells[r + dr, c + dc] == MID
    assert np.sum(cells == HIGH) == 4 and np.sum(cells == MID) == 16
    assert set(np.unique(cells)) <= set(LEVELS)


def test_no_shift_probability_keeps_ground_truth():
    rng = np.random.default_rng(0)
    for _ in range(20):
        np.testing.assert_array_equal(sample_discrete_reward(0.0, rng).cells, ground_truth())


def test_support_has_625_distinct_grids():
    grids = all_reward_grids()
    assert len(grids) == 625
    assert len({g.cells.tobytes() for g in grids.values()}) == 625
    for g in grids.values():
        assert set(np.unique(g.cells)) <= set(LEVELS)


def test_shift_frequency():
    rng = np.random.default_rng(1)
    shifted = np.array([[s != "none" for s in sample_discrete_reward(0.5, rng).shifts]
                        for _ in range(10_000)])
    np.testing.assert_allclose(shifted.mean(axis=0), 0.5, atol=0.02)


class ScriptedRng:
    """Replays a fixed list of decisions in place of a generator."""

    def __init__(self, uniforms, ints):
        self.uniforms, self.ints = list(uniforms), list(ints)

    def random(self):
        return self.uniforms.pop(0)

    def integers(self, high):
        return self.ints.pop(0)


def test_two_stage_law_under_enumerated_decisions():
    p = 0.3
    law = {}
    # each plus: stay (u >= p) or shift (u < p) in one of 4 directions
    per_plus = [(0.9, None)] + [(0.1, k) for k in range(4)]
    for combo in itertools.product(per_plus, repeat=4):
        uniforms = [u for u, _ in combo]
        ints = [k for _, k in combo if k is not None]
        grid = sample_discrete_reward(p, ScriptedRng(uniforms, ints))
        prob = math.prod((1 - p) if k is None else p / 4 for _, k in combo)
        expected = tuple("none" if k is None else SHIFTS[1 + k] for _, k in combo)
        assert grid.shifts == expected
        np.testing.assert_array_equal(grid.cells, build_reward_grid(expected).cells)
        law[grid.cells.tobytes()] = law.get(grid.cells.tobytes(), 0.0) + prob
    assert len(law) == 625
    assert sum(law.values()) == pytest.approx(1.0, abs=1e-12)


def test_out_of_board_shift_is_clipped():
    g = build_reward_grid(("up",), centres=((1, 5),), size=10)
    assert g.shifts == ("none",)
    assert g.cells[1, 5] == HIGH


def test_invalid_shift_probability():
    with pytest.raises(UsageError):
        sample_discrete_reward(1.5, np.random.default_rng(0))


def test_one_hot_grid():
    v = one_hot_grid(ground_truth())
    assert v.shape == (300,)
    np.testing.assert_array_equal(v.reshape(3, 100).sum(axis=0), 1.0)


def test_corner_low_cell_masks():
    env = DiscreteGridEnv(ground_truth(), start=(0, 0))
    mask = env.valid_actions(env.initial_state())
    assert mask[:4].sum() == 2 and not mask[STOP]


def test_high_cell_masks():
    env = DiscreteGridEnv(ground_truth())
    mask = env.valid_actions(GridState(((2, 2),)))
    assert mask.all()
    mask = env.valid_actions(GridState(((2, 3), (2, 2))))
    assert mask[:4].sum() == 3 and mask[STOP]


def test_trapped_state_only_stop():
    env = DiscreteGridEnv(ground_truth())
    # the low-reward corner (0,0) with both neighbours already visited
    trapped = GridState(((1, 0), (1, 1), (0, 1), (0, 0)))
    mask = env.valid_actions(trapped)
    assert mask.tolist() == [False, False, False, False, True]


def test_max_length_forces_stop():
    env = DiscreteGridEnv(ground_truth(), max_steps=2)
    s = GridState(((0, 0), (0, 1), (0, 2)))
    assert env.valid_actions(s).tolist() == [False, False, False, False, True]


def random_rollout(env, rng):
    s = env.initial_state(rng)
    states = [s]
    while not env.is_terminal(s):
        valid = np.flatnonzero(env.valid_actions(s))
        s = env.step(s, rng.choice(valid))
        states.append(s)
    return states


def test_rollouts_are_simple_short_and_stop_on_reward():
    cells = ground_truth()
    env = DiscreteGridEnv(cells)
    rng = np.random.default_rng(2)
    for _ in range(300):
        states = random_rollout(env, rng)
        path = states[-1].path
        assert len(set(path)) == len(path)
        assert len(path) - 1 <= 20
        prev = GridState(path)
        trapped = not env.move_mask(prev).any()
        assert cells[path[-1]] in (MID, HIGH) or trapped


def test_parents_invert_steps():
    env = DiscreteGridEnv(ground_truth())
    rng = np.random.default_rng(3)
    states = random_rollout(env, rng)
    for prev, nxt in zip(states, states[1:]):
        ((parent, action),) = env.parents(nxt)
        assert parent == prev and env.step(prev, action) == nxt


def test_encoding_layout():
    env = DiscreteGridEnv(ground_truth())
    s = GridState(((0, 0), (0, 1)))
    f = env.encode([s])[0]
    assert f.shape == (201,)
    assert f[1] == 1.0 and f[:100].sum() == 1.0
    assert f[100] == 1.0 and f[101] == 1.0 and f[100:200].sum() == 2.0
    assert f[-1] == pytest.approx(1 / 20)


# -- continuous --------------------------------------------------------------

def density_oracle(spec, w):
    total = 0.0
    for mx, my in spec.means:
        d2 = (w[0] - mx) ** 2 + (w[1] - my) ** 2
        total += 0.5 * math.exp(-d2 / (2 * spec.variance)) / (2 * math.pi * spec.variance)
    return total + 1e-12


def test_reward_at_isolated_mode():
    spec = ContinuousRewardSpec(((-20.0, -20.0), (20.0, 20.0)))
    assert continuous_reward(spec, (-20.0, -20.0)) == pytest.approx(0.5 / (2 * math.pi * 0.3))


def test_reward_symmetric_midpoint():
    spec = ContinuousRewardSpec(((-1.0, 0.0), (1.0, 0.0)))
    full = continuous_reward(spec, (0.0, 0.0))
    half = 0.5 * math.exp(-1 / 0.6) / (2 * math.pi * 0.3)
    assert full == pytest.approx(2 * half + 1e-12, rel=1e-12)


def test_reward_matches_scalar_oracle():
    rng = np.random.default_rng(4)
    spec = sample_continuous_spec(rng)
    for w in rng.normal(scale=2.0, size=(100, 2)):
        assert continuous_reward(spec, w) == pytest.approx(density_oracle(spec, w), rel=1e-12)
        assert continuous_log_reward(spec, w) == pytest.approx(math.log(density_oracle(spec, w)), rel=1e-12)


def test_reward_integrates_to_one():
    rng = np.random.default_rng(5)
    spec = sample_continuous_spec(rng)
    box = 8.0
    w = rng.uniform(-box, box, size=(400_000, 2))
    integral = continuous_reward(spec, w).mean() * (2 * box) ** 2
    assert integral == pytest.approx(1.0, rel=0.02)
    assert np.all(continuous_reward(spec, w) > 0)


def test_spec_sampling_moments():
    rng = np.random.default_rng(6)
    mus = np.array([sample_continuous_spec(rng).latent for _ in range(10_000)])
    np.testing.assert_allclose(mus.mean(axis=0), [-1, -1, 1, 1], atol=0.02)
    np.testing.assert_allclose(mus.var(axis=0), 0.1, rtol=0.1)


def test_spec_sampling_deterministic():
    a = sample_continuous_spec(np.random.default_rng(9))
    b = sample_continuous_spec(np.random.default_rng(9))
    assert a == b
    assert ContinuousRewardSpec.from_latent(a.latent) == a


def test_spec_rejects_bad_variance():
    with pytest.raises(UsageError):
        ContinuousRewardSpec(((0.0, 0.0), (1.0, 1.0)), variance=0.0)


def test_continuous_step_examples():
    s = continuous_step(ContinuousState(), (1.0, -1.0))
    assert (s.x, s.y, s.t) == (1.0, -1.0, 1)
    env = ContinuousGridEnv(ContinuousRewardSpec(((-1.0, -1.0), (1.0, 1.0))))
    s = env.initial_state()
    for _ in range(5):
        s = env.step(s, (0.0, 0.0))
    assert (s.x, s.y) == (0.0, 0.0) and env.is_terminal(s)
    with pytest.raises(UsageError):
        env.step(s, (0.0, 0.0))


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.floats(-5, 5), st.floats(-5, 5)), min_size=1, max_size=5))
def test_continuous_steps_are_additive(moves):
    s = ContinuousState()
    for m in moves:
        s = continuous_step(s, m)
    assert s.x == pytest.approx(sum(m[0] for m in moves), abs=1e-12)
    assert s.y == pytest.approx(sum(m[1] for m in moves), abs=1e-12)
    assert s.t == len(moves)
