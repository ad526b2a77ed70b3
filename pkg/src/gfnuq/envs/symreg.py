"""Symbolic regression over the token library {x, 1, 2, 3, +, -, *, sin, cos}.

Expressions are written infix without brackets. ``sin`` and ``cos`` act on
the operand (or unary chain) that follows them and bind tightest; ``*``
binds tighter than ``+``/``-``; binary operators associate to the left.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import EnvironmentContractError, ExpressionError, UsageError

TOKENS = ("x", "1", "2", "3", "+", "-", "*", "sin", "cos")
TERMINATE = len(TOKENS)
N_ACTIONS = len(TOKENS) + 1
TOKEN_ID = {name: i for i, name in enumerate(TOKENS)}
OPERANDS = frozenset({0, 1, 2, 3})
BINARY = frozenset({4, 5, 6})
UNARY = frozenset({7, 8})
PRECEDENCE = {4: 1, 5: 1, 6: 2}
MAX_LENGTH = 10
REWARD_FLOOR = 1e-12
N_POINTS = 100
X_LO, X_HI = math.pi, 4.0 * math.pi
DEFAULT_SIGMA = 0.5


def to_ids(tokens):
    """Accept token names or ids; return a list of ids."""
    out = []
    for t in tokens:
        if isinstance(t, str):
            name = {"−": "-", "—": "-", "×": "*"}.get(t, t)
            if name not in TOKEN_ID:
                raise ExpressionError(f"unknown token {t!r}")
            out.append(TOKEN_ID[name])
        else:
            out.append(int(t))
    return out


def to_names(ids):
    return [TOKENS[i] for i in ids]


def _expects_operand(ids):
    """Scan a prefix: True if the next token must start an operand."""
    want = True
    for pos, t in enumerate(ids):
        if t in OPERANDS:
            if not want:
                raise ExpressionError("operand where an operator was expected", pos)
            want = False
        elif t in UNARY:
            if not want:
                raise ExpressionError("function where an operator was expected", pos)
        elif t in BINARY:
            if want:
                raise ExpressionError("operator where an operand was expected", pos)
            want = True
        else:
            raise ExpressionError(f"token id {t} outside the library", pos)
    return want


def is_complete(tokens):
    ids = to_ids(tokens)
    return len(ids) > 0 and not _expects_operand(ids)


def shunting_yard(tokens):
    """Infix token ids (or names) to reverse Polish order."""
    ids = to_ids(tokens)
    if not ids:
        raise ExpressionError("empty expression", 0)
    if _expects_operand(ids):
        raise ExpressionError("expression ends without an operand", len(ids))
    out, stack = [], []
    for t in ids:
        if t in OPERANDS:
            out.append(t)
        elif t in UNARY:
            stack.append(t)
        else:
            # unary functions outrank every binary operator; ties pop (left assoc)
            while stack and (stack[-1] in UNARY or PRECEDENCE[stack[-1]] >= PRECEDENCE[t]):
                out.append(stack.pop())
            stack.append(t)
    while stack:
        out.append(stack.pop())
    return out


def eval_rpn(rpn, x):
    """Evaluate RPN token ids at ``x`` (scalar or array)."""
    x = np.asarray(x, dtype=np.float64)
    stack = []
    for pos, t in enumerate(to_ids(rpn)):
        if t == 0:
            stack.append(x)
        elif t in OPERANDS:
            stack.append(np.full(x.shape, float(t)))
        elif t in UNARY:
            if not stack:
                raise ExpressionError("stack underflow", pos)
            a = stack.pop()
            stack.append(np.sin(a) if t == 7 else np.cos(a))
        elif t in BINARY:
            if len(stack) < 2:
                raise ExpressionError("stack underflow", pos)
            b, a = stack.pop(), stack.pop()
            stack.append(a + b if t == 4 else a - b if t == 5 else a * b)
        else:
            raise ExpressionError(f"token id {t} outside the library", pos)
    if len(stack) != 1:
        raise ExpressionError(f"{len(stack)} values left on the stack", len(rpn))
    return stack[0]


def evaluate(tokens, x):
    return eval_rpn(shunting_yard(tokens), x)


def valid_next_tokens(prefix, max_length=MAX_LENGTH):
    """Boolean mask over the 9 tokens plus terminate (index 9)."""
    ids = to_ids(prefix)
    mask = np.zeros(N_ACTIONS, dtype=bool)
    want = _expects_operand(ids)
    n = len(ids)
    if want:
        # an operand finishes the expression; a function needs one more token after it
        if n + 1 <= max_length:
            mask[sorted(OPERANDS)] = True
        if n + 2 <= max_length:
            mask[sorted(UNARY)] = True
    else:
        mask[TERMINATE] = True
        if n + 2 <= max_length:
            mask[sorted(BINARY)] = True
    return mask


def target_function(x):
    """The regression target: sin(x) + 2 - x."""
    x = np.asarray(x, dtype=np.float64)
    return np.sin(x) + 2.0 - x


FOCAL_TOKENS = ("2", "-", "x", "+", "sin", "x")


@dataclass(frozen=True)
class NoisyTarget:
    x: np.ndarray
    values: np.ndarray
    clean: np.ndarray
    sigma: float

    def to_csv_rows(self):
        return [(float(a), float(b)) for a, b in zip(self.x, self.values)]


def sample_grid(n=N_POINTS):
    return np.linspace(X_LO, X_HI, n)


def wiener_path(x, rng):
    """Brownian path on the grid ``x`` anchored at W(x[0]) = 0."""
    dx = np.diff(x)
    return np.concatenate([[0.0], np.cumsum(rng.standard_normal(dx.shape) * np.sqrt(dx))])


def make_noisy_target(sigma, rng, f=target_function, n=N_POINTS):
    if sigma < 0:
        raise UsageError("sigma must be non-negative")
    x = sample_grid(n)
    clean = f(x)
    w = wiener_path(x, rng)
    return NoisyTarget(x, clean + sigma * w, clean, float(sigma))


def reward(target, tokens):
    ids = [t for t in to_ids(tokens) if t != TERMINATE]
    with np.errstate(all="ignore"):
        g = evaluate(ids, target.x)
        mse = float(np.mean((target.values - g) ** 2))
    if not np.isfinite(mse):
        return REWARD_FLOOR
    return max((1.0 + 0.2 * len(ids)) / (1.0 + mse), REWARD_FLOOR)


@dataclass(frozen=True)
class ExprState:
    tokens: tuple = ()
    done: bool = False


class SymbolicRegressionEnv:
    """Append one token per step; the terminate action closes a complete expression."""

    n_actions = N_ACTIONS
    vocab_size = len(TOKENS)

    def __init__(self, target, max_length=MAX_LENGTH):
        self.target = target
        self.max_length = int(max_length)
        self.max_steps = self.max_length + 1
        self._cache = {}

    def initial_state(self, rng=None):
        return ExprState()

    def valid_actions(self, state):
        if state.done:
            return np.zeros(N_ACTIONS, dtype=bool)
        return valid_next_tokens(state.tokens, self.max_length)

    def step(self, state, action):
        action = int(action)
        if not self.valid_actions(state)[action]:
            raise EnvironmentContractError(f"token {action} invalid after {to_names(state.tokens)}")
        if action == TERMINATE:
            return ExprState(state.tokens, True)
        return ExprState(state.tokens + (action,))

    def is_terminal(self, state):
        return state.done

    def log_reward(self, state):
        key = state.tokens
        if key not in self._cache:
            self._cache[key] = math.log(reward(self.target, key))
        return self._cache[key]

    def parents(self, state):
        if state.done:
            return [(ExprState(state.tokens), TERMINATE)]
        if not state.tokens:
            return []
        return [(ExprState(state.tokens[:-1]), state.tokens[-1])]

    def log_backward(self, parent, action, state):
        return 0.0

    def terminal_key(self, state):
        return state.tokens

    def encode(self, states):
        """Padded token ids and lengths, consumed by a recurrent encoder."""
        lengths = np.array([len(s.tokens) for s in states], dtype=np.int64)
        tokens = np.zeros((len(states), max(1, int(lengths.max(initial=0)))), dtype=np.int64)
        for i, s in enumerate(states):
            tokens[i, : len(s.tokens)] = s.tokens
        return tokens, lengths
