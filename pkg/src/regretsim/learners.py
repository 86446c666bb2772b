"""Online learner update rules.

Hedge multiplies each action weight by exp(-eta * loss). The optimistic
variant extrapolates one step ahead, using 2 * loss_t - loss_{t-1} in the
exponent. The adaptive variant starts optimistic and falls back to a safe
sqrt-horizon step size the first time a variance-sum inequality, which holds
under benign self-play, is violated by the observed loss stream.

All updates are functional: a step returns a new state and never mutates its
input, so distinct players can be advanced concurrently within a round.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .diagnostics import DEFAULT_C_PRIME, BoundConstants, ceil_log2, variance

HEDGE = "hedge"
OPT_HEDGE = "opt_hedge"
ADAPTIVE_OPT_HEDGE = "adaptive_opt_hedge"
MODES = (HEDGE, OPT_HEDGE, ADAPTIVE_OPT_HEDGE)

# Earliest round at which the adaptive switch test may fire.
MIN_SWITCH_ROUND = 4


@dataclass(frozen=True)
class LearnerState:
    """One player's online-learner memory.

    ``strategy`` is the current mixed strategy, ``prev_loss`` the loss vector
    observed in the previous round (zeros at round 1). Adaptive bookkeeping
    tracks the two running variance sums, whether the step-size switch has
    fired, and the post-switch step size.
    """

    strategy: np.ndarray
    prev_loss: np.ndarray
    eta: float
    mode: str
    round: int = 1
    horizon: int | None = None
    switched: bool = False
    switch_round: int | None = None
    var_delta_sum: float = 0.0
    var_prev_sum: float = 0.0
    eta_post: float | None = None
    switch_threshold: float = math.inf

    @property
    def n_actions(self) -> int:
        return self.strategy.shape[0]


def init_state(n: int, eta: float, mode: str, horizon: int | None = None,
               c_prime: float = DEFAULT_C_PRIME) -> LearnerState:
    """Fresh learner on n actions: uniform strategy, zero previous loss.

    ``horizon`` (the total number of rounds T) is required for the adaptive
    mode, which needs it for both the switch threshold c_prime * ceil(log2 T)^5
    and the post-switch step size sqrt(ln n / T). ``c_prime`` of 0 forces the
    switch test to fire immediately; inf disables it.
    """
    if n < 1:
        raise ValueError(f"action count must be >= 1, got {n}")
    if not eta > 0.0 or not math.isfinite(eta):
        raise ValueError(f"step size must be positive and finite, got {eta}")
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}; expected one of {MODES}")
    eta_post = None
    threshold = math.inf
    if mode == ADAPTIVE_OPT_HEDGE:
        if horizon is None or horizon < 1:
            raise ValueError("adaptive mode needs the run horizon T at construction")
        if c_prime < 0.0:
            raise ValueError(f"switch constant must be >= 0, got {c_prime}")
        eta_post = math.sqrt(math.log(n) / horizon) if n > 1 else eta
        threshold = c_prime * float(ceil_log2(horizon)) ** 5
    return LearnerState(
        strategy=np.full(n, 1.0 / n),
        prev_loss=np.zeros(n),
        eta=float(eta),
        mode=mode,
        horizon=horizon,
        eta_post=eta_post,
        switch_threshold=threshold,
    )


def _checked_loss(state: LearnerState, loss: np.ndarray) -> np.ndarray:
    arr = np.asarray(loss, dtype=np.float64)
    if arr.shape != state.strategy.shape:
        raise ValueError(f"loss has shape {arr.shape}, expected {state.strategy.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("loss vector has non-finite entries")
    return arr


def _exp_weights(strategy: np.ndarray, exponent: np.ndarray) -> np.ndarray:
    # Subtracting the max exponent avoids overflow without changing the
    # normalized result.
    w = strategy * np.exp(exponent - exponent.max())
    return w / w.sum()


def hedge_step(state: LearnerState, loss: np.ndarray) -> LearnerState:
    """Multiply weights by exp(-eta * loss) and renormalize."""
    arr = _checked_loss(state, loss)
    strategy = _exp_weights(state.strategy, -state.eta * arr)
    return replace(state, strategy=strategy, prev_loss=arr.copy(), round=state.round + 1)


def opt_hedge_step(state: LearnerState, loss: np.ndarray) -> LearnerState:
    """Multiply weights by exp(-eta * (2 * loss - prev_loss)) and renormalize."""
    arr = _checked_loss(state, loss)
    strategy = _exp_weights(state.strategy, -state.eta * (2.0 * arr - state.prev_loss))
    return replace(state, strategy=strategy, prev_loss=arr.copy(), round=state.round + 1)


def intermediate_iterate(state: LearnerState, loss: np.ndarray) -> np.ndarray:
    """Auxiliary iterate using the single-step loss difference in the exponent.

    Purely diagnostic: returns the distribution proportional to
    strategy * exp(-eta * (loss - prev_loss)) without touching the state.
    """
    arr = _checked_loss(state, loss)
    return _exp_weights(state.strategy, -state.eta * (arr - state.prev_loss))


def adaptive_opt_hedge_step(state: LearnerState, loss: np.ndarray) -> LearnerState:
    """Optimistic step with the adversarial fallback test.

    Before stepping, both variance sums are extended at the current iterate.
    If the switch has not fired, the round is at least 4, and the running
    loss-difference variance exceeds half the previous-loss variance plus the
    threshold, the step size drops to sqrt(ln n / T) for all later rounds.
    """
    if state.mode != ADAPTIVE_OPT_HEDGE:
        raise ValueError(f"state mode is {state.mode!r}, expected {ADAPTIVE_OPT_HEDGE!r}")
    arr = _checked_loss(state, loss)
    var_delta_sum = state.var_delta_sum + variance(state.strategy, arr - state.prev_loss)
    var_prev_sum = state.var_prev_sum + variance(state.strategy, state.prev_loss)
    eta = state.eta
    switched = state.switched
    switch_round = state.switch_round
    if (not switched and state.round >= MIN_SWITCH_ROUND
            and var_delta_sum > 0.5 * var_prev_sum + state.switch_threshold):
        switched = True
        switch_round = state.round
        eta = state.eta_post if state.eta_post is not None else eta
    strategy = _exp_weights(state.strategy, -eta * (2.0 * arr - state.prev_loss))
    return replace(
        state, strategy=strategy, prev_loss=arr.copy(), round=state.round + 1,
        eta=eta, switched=switched, switch_round=switch_round,
        var_delta_sum=var_delta_sum, var_prev_sum=var_prev_sum)


_STEPS = {
    HEDGE: hedge_step,
    OPT_HEDGE: opt_hedge_step,
    ADAPTIVE_OPT_HEDGE: adaptive_opt_hedge_step,
}


def step(state: LearnerState, loss: np.ndarray) -> LearnerState:
    """Advance one round with the update rule selected by the state's mode."""
    return _STEPS[state.mode](state, loss)


def recommended_eta(m: int, t: int, constants: BoundConstants | None = None) -> float:
    """Step size 1 / (C * m * log2(T)^4) backed by the polylog regret bound.

    The constant makes this astronomically small at desk scale; see
    ``practical_eta`` for a usable default that carries no such guarantee.
    """
    if m < 2:
        raise ValueError(f"need at least 2 players, got {m}")
    if t < 2:
        raise ValueError(f"need horizon >= 2, got {t}")
    c_thm = (constants or BoundConstants()).c_thm
    return 1.0 / (c_thm * m * math.log2(t) ** 4)


def practical_eta(m: int, t: int) -> float:
    """min(0.1, 1 / (m * log2(T)^2)): produces visible dynamics at desk scale.

    Not backed by the polylog regret guarantee; clearly a heuristic.
    """
    if m < 2:
        raise ValueError(f"need at least 2 players, got {m}")
    if t < 2:
        raise ValueError(f"need horizon >= 2, got {t}")
    return min(0.1, 1.0 / (m * math.log2(t) ** 2))
