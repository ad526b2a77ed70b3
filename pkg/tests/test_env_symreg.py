import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gfnuq.envs.symreg import (
    FOCAL_TOKENS,
    TERMINATE,
    TOKENS,
    NoisyTarget,
    SymbolicRegressionEnv,
    eval_rpn,
    is_complete,
    make_noisy_target,
    reward,
    sample_grid,
    shunting_yard,
    target_function,
    to_ids,
    to_names,
    valid_next_tokens,
)
from gfnuq.errors import ExpressionError, UsageError


# -- independent recursive-descent evaluator ---------------------------------

class Parser:
    """expr := term (('+'|'-') term)*; term := factor ('*' factor)*; factor := fn factor | atom."""

    def __init__(self, names):
        self.names, self.i = names, 0

    def peek(self):
        return self.names[self.i] if self.i < len(self.names) else None

    def take(self):
        tok = self.peek()
        self.i += 1
        return tok

    def expr(self):
        node = self.term()
        while self.peek() in ("+", "-"):
            node = (self.take(), node, self.term())
        return node

    def term(self):
        node = self.factor()
        while self.peek() == "*":
            node = (self.take(), node, self.factor())
        return node

    def factor(self):
        tok = self.take()
        if tok in ("sin", "cos"):
            return (tok, self.factor())
        if tok in ("x", "1", "2", "3"):
            return tok
        raise SyntaxError(tok)


def parse(names):
    p = Parser(list(names))
    tree = p.expr()
    if p.i != len(names):
        raise SyntaxError("trailing tokens")
    return tree


def walk(tree, x):
    if isinstance(tree, str):
        return x if tree == "x" else float(tree)
    if len(tree) == 2:
        f = math.sin if tree[0] == "sin" else math.cos
        return f(walk(tree[1], x))
    op, a, b = tree
    a, b = walk(a, x), walk(b, x)
    return a + b if op == "+" else a - b if op == "-" else a * b


def oracle_complete(names):
    try:
        parse(names)
        return True
    except (SyntaxError, IndexError):
        return False


def all_sequences(max_len):
    for n in range(1, max_len + 1):
        yield from itertools.product(TOKENS, repeat=n)


# -- shunting-yard -----------------------------------------------------------

def test_single_binary():
    assert to_names(shunting_yard(["2", "-", "x"])) == ["2", "x", "-"]


def test_unary_prefix():
    assert to_names(shunting_yard(["sin", "x"])) == ["x", "sin"]


def test_focal_expression():
    rpn = shunting_yard(FOCAL_TOKENS)
    assert to_names(rpn) == ["2", "x", "-", "x", "sin", "+"]
    assert eval_rpn(rpn, math.pi) == pytest.approx(2 - math.pi, abs=1e-15)
    xs = sample_grid()
    np.testing.assert_allclose(eval_rpn(rpn, xs), target_function(xs), rtol=0, atol=1e-14)


def test_precedence_and_associativity():
    assert to_names(shunting_yard(["1", "+", "2", "*", "x"])) == ["1", "2", "x", "*", "+"]
    assert to_names(shunting_yard(["3", "-", "2", "-", "1"])) == ["3", "2", "-", "1", "-"]
    assert to_names(shunting_yard(["sin", "x", "*", "2"])) == ["x", "sin", "2", "*"]
    assert to_names(shunting_yard(["cos", "sin", "x"])) == ["x", "sin", "cos"]


def test_constant():
    assert eval_rpn(to_ids(["3"]), 1.7) == 3.0


@pytest.mark.parametrize("bad, pos", [(["+"], 0), (["x", "x"], 1), (["2", "-"], 2), ([], 0),
                                      (["sin"], 1), (["x", "sin"], 1)])
def test_malformed_infix(bad, pos):
    with pytest.raises(ExpressionError) as err:
        shunting_yard(bad)
    assert err.value.position == pos


def test_malformed_rpn():
    with pytest.raises(ExpressionError):
        eval_rpn(to_ids(["x", "+"]), 1.0)
    with pytest.raises(ExpressionError):
        eval_rpn(to_ids(["x", "x"]), 1.0)
    with pytest.raises(ExpressionError):
        to_ids(["tan"])


def test_exhaustive_agreement_up_to_length_5():
    xs = np.linspace(math.pi, 4 * math.pi, 7)
    n_valid = 0
    for names in all_sequences(5):
        ok = oracle_complete(names)
        assert is_complete(names) == ok if _prefix_ok(names) else not ok
        if not ok:
            continue
        n_valid += 1
        got = eval_rpn(shunting_yard(names), xs)
        want = [walk(parse(names), x) for x in xs]
        np.testing.assert_allclose(got, want, rtol=1e-12, atol=1e-12)
    assert n_valid > 1000


def _prefix_ok(names):
    try:
        is_complete(names)
        return True
    except ExpressionError:
        return False


def random_expression(rng, max_length=10):
    env = SymbolicRegressionEnv(None, max_length)
    s = env.initial_state()
    while not s.done:
        s = env.step(s, rng.choice(np.flatnonzero(env.valid_actions(s))))
    return s.tokens


def test_sampled_agreement_lengths_6_to_10():
    rng = np.random.default_rng(0)
    xs = sample_grid()
    checked = 0
    while checked < 300:
        ids = random_expression(rng)
        if len(ids) < 6:
            continue
        names = to_names(ids)
        got = eval_rpn(shunting_yard(ids), xs)
        want = [walk(parse(names), x) for x in xs]
        np.testing.assert_allclose(got, want, rtol=1e-12, atol=1e-12)
        checked += 1


# -- grammar mask ------------------------------------------------------------

def mask_oracle(prefix, cap=10):
    """Token t is valid iff prefix + t can be completed within the cap (brute force)."""
    mask = np.zeros(len(TOKENS) + 1, dtype=bool)
    mask[TERMINATE] = len(prefix) > 0 and oracle_complete(prefix)
    for t in TOKENS:
        head = list(prefix) + [t]
        room = cap - len(head)
        if room < 0:
            continue
        if oracle_complete(head):
            mask[TOKENS.index(t)] = True
            continue
        for k in range(1, room + 1):
            if any(oracle_complete(head + list(tail)) for tail in itertools.product(TOKENS, repeat=k)):
                mask[TOKENS.index(t)] = True
                break
    return mask


def test_empty_prefix_mask():
    mask = valid_next_tokens([])
    assert mask.tolist() == [True] * 4 + [False] * 3 + [True, True] + [False]


def test_dangling_operator_mask():
    mask = valid_next_tokens(["2", "-"])
    assert mask[:4].all() and mask[7:9].all() and not mask[4:7].any() and not mask[TERMINATE]


def test_masks_match_completion_search():
    rng = np.random.default_rng(1)
    seen = 0
    while seen < 40:
        ids = random_expression(rng)
        names = to_names(ids)
        for cut in range(max(0, len(names) - 3), len(names) + 1):
            prefix = names[:cut]
            if len(prefix) < 7:
                continue
            np.testing.assert_array_equal(valid_next_tokens(prefix), mask_oracle(prefix))
            seen += 1


def test_length_nine_needs_two_more_is_masked():
    prefix = ["x", "+", "x", "+", "x", "+", "x", "*"]  # 8 tokens, expects operand
    prefix = prefix + ["sin"]  # 9 tokens: a function still needs an operand
    mask = valid_next_tokens(prefix)
    np.testing.assert_array_equal(mask, mask_oracle(prefix))
    assert mask[:4].all() and not mask[4:].any()
    prefix = ["x", "+", "x", "+", "x", "+", "x", "*", "x"]
    mask = valid_next_tokens(prefix)
    # binary ops would need two more tokens (op + operand) beyond length 9
    assert not mask[4:7].any() and mask[TERMINATE]


def test_masked_rollouts_end_valid_within_cap():
    rng = np.random.default_rng(2)
    for _ in range(500):
        ids = random_expression(rng)
        assert 1 <= len(ids) <= 10
        assert oracle_complete(to_names(ids))


# -- noisy target and reward -------------------------------------------------

def test_zero_noise_is_exact():
    t = make_noisy_target(0.0, np.random.default_rng(0))
    assert len(t.x) == 100 and t.x[0] == pytest.approx(math.pi) and t.x[-1] == pytest.approx(4 * math.pi)
    np.testing.assert_array_equal(t.values, target_function(t.x))


def test_wiener_endpoint_variance_and_increments():
    rng = np.random.default_rng(3)
    sigma = 0.7
    paths = np.array([make_noisy_target(sigma, rng).values for _ in range(10_000)])
    noise = paths - target_function(sample_grid())
    assert np.all(noise[:, 0] == 0.0)
    assert noise[:, -1].var() == pytest.approx(sigma**2 * 3 * math.pi, rel=0.05)
    inc = np.diff(noise, axis=1)
    lag1 = np.corrcoef(inc[:, :-1].ravel(), inc[:, 1:].ravel())[0, 1]
    assert abs(lag1) < 0.05


def test_negative_sigma():
    with pytest.raises(UsageError):
        make_noisy_target(-1.0, np.random.default_rng(0))


def test_reward_examples():
    t = make_noisy_target(0.0, np.random.default_rng(0))
    assert reward(t, FOCAL_TOKENS) == pytest.approx(2.2, abs=1e-12)
    xs = sample_grid()
    zero = NoisyTarget(xs, np.zeros(100), np.zeros(100), 0.0)
    assert reward(zero, ["3"]) == pytest.approx(0.12, abs=1e-15)
    inf = NoisyTarget(xs, np.full(100, np.inf), np.zeros(100), 0.0)
    assert reward(inf, ["3"]) == 1e-12


def test_reward_matches_straight_line_oracle():
    rng = np.random.default_rng(4)
    t = make_noisy_target(0.5, rng)
    for _ in range(50):
        names = to_names(random_expression(rng))
        sq = 0.0
        for x, y in zip(t.x, t.values):
            sq += (y - walk(parse(names), x)) ** 2
        want = (1 + 0.2 * len(names)) / (1 + sq / 100)
        assert reward(t, names) == pytest.approx(want, rel=1e-10)
        assert reward(t, list(names) + [TERMINATE]) == pytest.approx(want, rel=1e-10)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.0, 5.0), st.floats(0.0, 5.0))
def test_reward_positive_and_decreasing_in_mse(a, b):
    xs = sample_grid()
    lo, hi = sorted((a, b))
    r_lo = reward(NoisyTarget(xs, np.full(100, 1.0 + lo), xs, 0.0), ["1"])
    r_hi = reward(NoisyTarget(xs, np.full(100, 1.0 + hi), xs, 0.0), ["1"])
    assert r_lo > 0 and r_hi > 0 and r_lo >= r_hi


def test_env_contract():
    env = SymbolicRegressionEnv(make_noisy_target(0.0, np.random.default_rng(0)))
    s = env.initial_state()
    for t in to_ids(FOCAL_TOKENS):
        s = env.step(s, t)
    s = env.step(s, TERMINATE)
    assert env.is_terminal(s)
    assert math.exp(env.log_reward(s)) == pytest.approx(2.2)
    ((parent, action),) = env.parents(s)
    assert action == TERMINATE and parent.tokens == s.tokens
    tokens, lengths = env.encode([env.initial_state(), s])
    assert lengths.tolist() == [0, 6] and tokens.shape == (2, 6)
