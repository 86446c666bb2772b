"""Numerical diagnostics for learning-dynamics trajectories.

Divergences, local norms, plain and circular finite differences, discrete
Fourier identities, and the inequality checkers used to audit regret bounds
on recorded runs. Everything here is a pure function of its inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import TYPE_CHECKING, Sequence

import numpy as np

if TYPE_CHECKING:  # pragma: no cover
    from .dynamics import Trajectory

# Default constants for the variance-sum inequality and step-size policy.
# These are the values pinned down by the underlying regret analysis; at desk
# scale they make the additive slack term enormous, so ratio outputs are the
# informative signal.
DEFAULT_C_THM = 14_794_752
DEFAULT_C_PRIME = 165_262

# When the C-coefficient of the linear bound audit is below this, the
# inequality is effectively C-free and no boundary constant is reported.
_C_COEFF_EPS = 1e-15


def ceil_log2(t: int) -> int:
    """ceil(log2 t) as an exact integer, clamped to >= 1."""
    if t < 1:
        raise ValueError(f"t must be >= 1, got {t}")
    return max(1, int(t - 1).bit_length())


# ---------------------------------------------------------------------------
# Local norms, variances, divergences
# ---------------------------------------------------------------------------

def variance(probs: np.ndarray, values: np.ndarray) -> float:
    """Variance of ``values`` under the distribution ``probs``.

    Residuals are anchored at the first coordinate, so a constant vector has
    exactly zero variance.
    """
    p = np.asarray(probs, dtype=np.float64)
    v = np.asarray(values, dtype=np.float64)
    if p.shape != v.shape:
        raise ValueError(f"shape mismatch: {p.shape} vs {v.shape}")
    r = v - v[0]
    mean = float(p @ r)
    return float(p @ (r - mean) ** 2)


def row_variances(probs: np.ndarray, values: np.ndarray) -> np.ndarray:
    """Row-wise ``variance``: probs and values are (T, n) arrays."""
    p = np.asarray(probs, dtype=np.float64)
    v = np.asarray(values, dtype=np.float64)
    r = v - v[:, :1]
    means = np.einsum("tj,tj->t", p, r)
    dev = r - means[:, None]
    return np.einsum("tj,tj->t", p, dev * dev)


def local_norms(probs: np.ndarray, values: np.ndarray) -> tuple[float, float]:
    """The weighted norm sqrt(sum p v^2) and its dual sqrt(sum v^2 / p).

    The dual norm is undefined when a zero-probability coordinate carries a
    nonzero value.
    """
    p = np.asarray(probs, dtype=np.float64)
    v = np.asarray(values, dtype=np.float64)
    if p.shape != v.shape:
        raise ValueError(f"shape mismatch: {p.shape} vs {v.shape}")
    primal = math.sqrt(float(p @ (v * v)))
    zero = p == 0.0
    if np.any(zero & (v != 0.0)):
        raise ZeroDivisionError("dual norm undefined: nonzero value on zero-probability coordinate")
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(zero, 0.0, (v * v) / np.where(zero, 1.0, p))
    dual = math.sqrt(float(terms.sum()))
    return primal, dual


@dataclass(frozen=True)
class DivergenceValues:
    """KL divergence (in nats) and chi-squared divergence between two distributions."""

    kl: float
    chi2: float


def divergences(p: np.ndarray, q: np.ndarray) -> DivergenceValues:
    """KL(p; q) in nats and chi2(p; q), with the 0 log 0 = 0 convention.

    A coordinate with q = 0 but p > 0 makes both divergences infinite; that
    is signalled by returning inf rather than raising.
    """
    pa = np.asarray(p, dtype=np.float64)
    qa = np.asarray(q, dtype=np.float64)
    if pa.shape != qa.shape:
        raise ValueError(f"shape mismatch: {pa.shape} vs {qa.shape}")
    if np.any((qa == 0.0) & (pa > 0.0)):
        return DivergenceValues(kl=math.inf, chi2=math.inf)
    support = pa > 0.0
    kl = float(np.sum(pa[support] * np.log(pa[support] / qa[support])))
    qpos = qa > 0.0
    chi2 = float(np.sum((pa[qpos] - qa[qpos]) ** 2 / qa[qpos]))
    return DivergenceValues(kl=kl, chi2=chi2)


# ---------------------------------------------------------------------------
# Finite differences
# ---------------------------------------------------------------------------

def finite_difference(seq: np.ndarray, h: int) -> np.ndarray:
    """Order-h finite difference of a sequence (first axis is time).

    Defined recursively: order 0 is the sequence itself, and each further
    order takes consecutive differences, shortening the sequence by one.
    """
    out = np.asarray(seq, dtype=np.float64)
    t = out.shape[0]
    if not 0 <= h <= t - 1:
        raise ValueError(f"order h={h} out of range [0, {t - 1}]")
    for _ in range(h):
        out = out[1:] - out[:-1]
    return out


def finite_difference_binomial(seq: np.ndarray, h: int, t: int):
    """Entry t of the order-h finite difference via the binomial expansion.

    Computes sum_s C(h, s) (-1)^(h-s) seq[t + s]; must agree with the
    recursive path. ``t`` is a 0-indexed offset in [0, len(seq) - h - 1].
    """
    arr = np.asarray(seq, dtype=np.float64)
    length = arr.shape[0]
    if not 0 <= h <= length - 1:
        raise ValueError(f"order h={h} out of range [0, {length - 1}]")
    if not 0 <= t <= length - h - 1:
        raise ValueError(f"offset t={t} out of range [0, {length - h - 1}]")
    total = np.zeros(arr.shape[1:], dtype=np.float64)
    for s in range(h + 1):
        sign = -1.0 if (h - s) % 2 else 1.0
        total = total + sign * math.comb(h, s) * arr[t + s]
    return float(total) if total.ndim == 0 else total


def circular_finite_difference(seq: np.ndarray, h: int) -> np.ndarray:
    """Level-h circular finite difference: consecutive differences with the
    last entry wrapping around to the start. Length is preserved."""
    out = np.asarray(seq, dtype=np.float64)
    if h < 0:
        raise ValueError(f"order h must be >= 0, got {h}")
    for _ in range(h):
        out = np.roll(out, -1, axis=0) - out
    return out


@dataclass
class FiniteDifferenceProfile:
    """Per-order finite-difference sequences of a loss sequence and their
    sup norms; ``ratios[h]`` is sup_norms[h + 1] / sup_norms[h]."""

    orders: list[np.ndarray]
    sup_norms: np.ndarray
    ratios: np.ndarray
    h_max: int
    length: int

    def to_dict(self) -> dict:
        return {
            "h_max": self.h_max,
            "length": self.length,
            "sup_norms": self.sup_norms.tolist(),
            "ratios": [None if math.isnan(r) else r for r in self.ratios.tolist()],
        }


def fd_decay_profile(seq: np.ndarray, h_max: int) -> FiniteDifferenceProfile:
    """Finite differences of orders 0..h_max with sup norms and decay ratios.

    Undefined ratios (zero denominator) are reported as NaN, which happens
    for constant sequences.
    """
    base = np.asarray(seq, dtype=np.float64)
    t = base.shape[0]
    if not 0 <= h_max <= t - 1:
        raise ValueError(f"h_max={h_max} out of range [0, {t - 1}]")
    orders = [base]
    for _ in range(h_max):
        prev = orders[-1]
        orders.append(prev[1:] - prev[:-1])
    sup_norms = np.array([float(np.max(np.abs(d))) if d.size else 0.0 for d in orders])
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.where(sup_norms[:-1] > 0.0, sup_norms[1:] / sup_norms[:-1], np.nan)
    return FiniteDifferenceProfile(orders=orders, sup_norms=sup_norms,
                                   ratios=ratios, h_max=h_max, length=t)


def fd_profile_values_csv(profile: FiniteDifferenceProfile, path) -> None:
    """CSV rows (order, t, value); value is the sup norm of the entry at t."""
    from .dynamics import format_float  # local import to keep this module numpy-only

    with open(path, "w", newline="\n") as fh:
        fh.write("order,t,value\n")
        for h, d in enumerate(profile.orders):
            mags = np.abs(d).reshape(d.shape[0], -1).max(axis=1) if d.ndim > 1 else np.abs(d)
            for t, v in enumerate(mags):
                fh.write(f"{h},{t + 1},{format_float(float(v))}\n")


def fd_profile_norms_csv(profile: FiniteDifferenceProfile, path) -> None:
    """CSV rows (order, sup_norm)."""
    from .dynamics import format_float

    with open(path, "w", newline="\n") as fh:
        fh.write("order,sup_norm\n")
        for h, v in enumerate(profile.sup_norms):
            fh.write(f"{h},{format_float(float(v))}\n")


# ---------------------------------------------------------------------------
# Discrete Fourier transform
# ---------------------------------------------------------------------------

def _is_power_of_two(s: int) -> bool:
    return s >= 1 and (s & (s - 1)) == 0


@lru_cache(maxsize=8)
def _dft_matrix(s: int) -> np.ndarray:
    k = np.arange(s)
    return np.exp(-2j * np.pi * np.outer(k, k) / s)


def dft(seq: np.ndarray, fast: bool | None = None) -> np.ndarray:
    """DFT of a sequence: component s is sum_t seq[t] exp(-2 pi i s t / S).

    The default route evaluates the definition directly (O(S^2)); for
    power-of-two lengths a fast path is taken. Pass ``fast`` to force either
    route; both agree to high precision.
    """
    w = np.asarray(seq)
    s = w.shape[0]
    if s < 1:
        raise ValueError("sequence must be nonempty")
    if fast is None:
        fast = _is_power_of_two(s)
    if fast:
        if not _is_power_of_two(s):
            raise ValueError(f"fast path requires power-of-two length, got {s}")
        return np.fft.fft(w)
    return _dft_matrix(s) @ w.astype(np.complex128)


def idft(spectrum: np.ndarray, fast: bool | None = None) -> np.ndarray:
    """Inverse DFT; ``idft(dft(w))`` recovers ``w`` up to rounding."""
    z = np.asarray(spectrum, dtype=np.complex128)
    s = z.shape[0]
    if s < 1:
        raise ValueError("sequence must be nonempty")
    if fast is None:
        fast = _is_power_of_two(s)
    if fast:
        if not _is_power_of_two(s):
            raise ValueError(f"fast path requires power-of-two length, got {s}")
        return np.fft.ifft(z)
    return (np.conjugate(_dft_matrix(s)) @ z) / s


def check_circular_fourier_identity(seq: np.ndarray, h: int) -> float:
    """Max deviation in the transform identity for circular differences.

    The DFT of the level-h circular finite difference equals the DFT of the
    sequence multiplied pointwise by (exp(2 pi i s / S) - 1)^h; returns the
    largest absolute discrepancy over frequencies.
    """
    w = np.asarray(seq, dtype=np.float64)
    s = w.shape[0]
    lhs = dft(circular_finite_difference(w, h))
    factor = (np.exp(2j * np.pi * np.arange(s) / s) - 1.0) ** h
    rhs = dft(w) * factor
    return float(np.max(np.abs(lhs - rhs)))


@dataclass
class FreqCauchyReport:
    """Outcome of the circular-difference energy inequality check.

    premise:    sum (D2 w)^2 <= alpha * sum (D1 w)^2 + mu
    conclusion: sum (D1 w)^2 <= alpha * sum w^2 + mu / alpha
    """

    alpha: float | None
    mu: float
    sum_d2_sq: float
    sum_d1_sq: float
    sum_w_sq: float
    premise_holds: bool
    conclusion_holds: bool
    premise_slack: float
    conclusion_slack: float
    degenerate: bool = False

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha, "mu": self.mu,
            "sum_d2_sq": self.sum_d2_sq, "sum_d1_sq": self.sum_d1_sq,
            "sum_w_sq": self.sum_w_sq,
            "premise_holds": self.premise_holds,
            "conclusion_holds": self.conclusion_holds,
            "premise_slack": self.premise_slack,
            "conclusion_slack": self.conclusion_slack,
            "degenerate": self.degenerate,
        }


def check_freq_cauchy(seq: np.ndarray, alpha: float | None = None,
                      mu: float = 0.0) -> FreqCauchyReport:
    """Evaluate the second-vs-first circular-difference energy inequality.

    With ``alpha=None`` the premise ratio sum(D2 w)^2 / sum(D1 w)^2 is used,
    making the premise tight; the conclusion then must hold (it is implied
    via Parseval and Cauchy-Schwarz in the frequency domain). A constant-
    difference sequence makes the ratio 0/0 and is reported as degenerate.
    """
    w = np.asarray(seq, dtype=np.float64)
    d1 = circular_finite_difference(w, 1)
    d2 = circular_finite_difference(d1, 1)
    s0 = float(np.sum(w * w))
    s1 = float(np.sum(d1 * d1))
    s2 = float(np.sum(d2 * d2))
    if alpha is None:
        if s1 == 0.0:
            return FreqCauchyReport(
                alpha=None, mu=mu, sum_d2_sq=s2, sum_d1_sq=s1, sum_w_sq=s0,
                premise_holds=s2 <= mu, conclusion_holds=True,
                premise_slack=mu - s2, conclusion_slack=math.inf,
                degenerate=True)
        alpha = s2 / s1
    if alpha <= 0.0:
        if alpha < 0.0 or s2 > 0.0 or s1 > 0.0:
            raise ValueError(f"alpha must be > 0, got {alpha}")
        # all-zero differences with alpha == 0: trivially satisfied
        return FreqCauchyReport(
            alpha=0.0, mu=mu, sum_d2_sq=s2, sum_d1_sq=s1, sum_w_sq=s0,
            premise_holds=True, conclusion_holds=True,
            premise_slack=mu, conclusion_slack=math.inf, degenerate=True)
    premise_slack = alpha * s1 + mu - s2
    conclusion_slack = alpha * s0 + mu / alpha - s1
    return FreqCauchyReport(
        alpha=alpha, mu=mu, sum_d2_sq=s2, sum_d1_sq=s1, sum_w_sq=s0,
        premise_holds=premise_slack >= 0.0,
        conclusion_holds=conclusion_slack >= 0.0,
        premise_slack=premise_slack, conclusion_slack=conclusion_slack)


# ---------------------------------------------------------------------------
# Consecutive closeness
# ---------------------------------------------------------------------------

@dataclass
class ClosenessReport:
    """How far consecutive distributions drift, measured by coordinate ratios.

    zeta_observed is max over steps of (largest ratio in either direction)
    minus 1; a zero coordinate produces an infinite ratio.
    """

    zeta_observed: float
    per_step: np.ndarray
    worst_step: int
    worst_coordinate: int

    def to_dict(self) -> dict:
        return {
            "zeta_observed": self.zeta_observed,
            "worst_step": self.worst_step,
            "worst_coordinate": self.worst_coordinate,
        }


def consecutive_closeness(strategies: Sequence[np.ndarray] | np.ndarray) -> ClosenessReport:
    """Measure the worst coordinatewise ratio between consecutive distributions."""
    x = np.asarray(strategies, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError(f"expected a (T, n) array of distributions, got shape {x.shape}")
    t = x.shape[0]
    if t < 2:
        return ClosenessReport(0.0, np.zeros(0), -1, -1)
    with np.errstate(divide="ignore", invalid="ignore"):
        fwd = x[1:] / x[:-1]
        bwd = x[:-1] / x[1:]
    fwd = np.nan_to_num(fwd, nan=np.inf, posinf=np.inf)
    bwd = np.nan_to_num(bwd, nan=np.inf, posinf=np.inf)
    worst = np.maximum(fwd, bwd)
    per_step = worst.max(axis=1) - 1.0
    step = int(np.argmax(per_step))
    coord = int(np.argmax(worst[step]))
    return ClosenessReport(float(per_step.max()), per_step, step, coord)


# ---------------------------------------------------------------------------
# Trajectory-level bound audits
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BoundConstants:
    """Constants of the step-size policy and the variance-sum inequality.

    ``h`` is the horizon exponent ceil(log2 T) of the run being audited.
    """

    c_thm: float = DEFAULT_C_THM
    c_prime: float = DEFAULT_C_PRIME
    h: int = 1

    def __post_init__(self):
        if self.c_thm < 1:
            raise ValueError(f"c_thm must be >= 1, got {self.c_thm}")
        if self.c_prime < 1:
            raise ValueError(f"c_prime must be >= 1, got {self.c_prime}")
        if self.h < 1:
            raise ValueError(f"h must be >= 1, got {self.h}")

    @classmethod
    def for_horizon(cls, t: int, c_thm: float = DEFAULT_C_THM,
                    c_prime: float = DEFAULT_C_PRIME) -> "BoundConstants":
        return cls(c_thm=c_thm, c_prime=c_prime, h=ceil_log2(t))


def _player_sequences(trajectory: "Trajectory", player: int):
    """(strategies, losses, previous losses) for one player, as (T, n) arrays.

    The round-0 loss is the all-zeros vector by convention.
    """
    x = trajectory.strategies[player]
    losses = trajectory.losses[player]
    prev = np.vstack([np.zeros((1, losses.shape[1])), losses[:-1]])
    return x, losses, prev


def _direct_regret(x: np.ndarray, losses: np.ndarray) -> float:
    """Regret recomputed straight from the definition on stored sequences."""
    play = float(np.einsum("tj,tj->", x, losses))
    best = float(losses.sum(axis=0).min())
    return play - best


@dataclass
class BoundTermBreakdown:
    """Terms of the adversarial regret bound audited on a recorded run.

    ``c_star`` is the smallest constant making the bound hold (None when the
    inequality fails and its constant coefficient vanishes). The entropy term
    is reported in both natural-log and base-2 conventions.
    """

    player: int
    lhs: float
    term_log: float
    term_log_base2: float
    sum_var_delta: float
    sum_var_prev: float
    c_star: float | None
    holds_at_zero: bool
    eta: float

    def to_dict(self) -> dict:
        return {
            "player": self.player + 1,
            "regret": self.lhs,
            "term_log_nats": self.term_log,
            "term_log_base2": self.term_log_base2,
            "sum_var_delta": self.sum_var_delta,
            "sum_var_prev": self.sum_var_prev,
            "c_star": self.c_star,
            "holds_at_zero": self.holds_at_zero,
            "eta": self.eta,
        }


def regret_bound_terms(trajectory: "Trajectory", player: int) -> BoundTermBreakdown:
    """Audit the variance-form adversarial regret bound for one player.

    Evaluates regret, the entropy term, and both variance sums, then solves
    for the boundary constant C* of

        regret <= log(n)/eta + sum (eta/2 + C eta^2) Var[loss diff]
                              - sum ((1 - C eta) eta / 2) Var[prev loss]

    which is linear in C. The player must have followed the optimistic
    update rule.
    """
    mode = trajectory.metadata.modes[player]
    if mode != "opt_hedge":
        raise ValueError(f"player {player} followed {mode!r}, expected 'opt_hedge'")
    eta = trajectory.metadata.etas[player]
    x, losses, prev = _player_sequences(trajectory, player)
    n = losses.shape[1]
    sum_var_delta = float(row_variances(x, losses - prev).sum())
    sum_var_prev = float(row_variances(x, prev).sum())
    lhs = _direct_regret(x, losses)
    term_log = math.log(n) / eta
    base = term_log + (eta / 2.0) * (sum_var_delta - sum_var_prev)
    coeff = eta * eta * (sum_var_delta + sum_var_prev / 2.0)
    if lhs <= base:
        c_star: float | None = 0.0
        holds_at_zero = True
    elif coeff < _C_COEFF_EPS:
        c_star = None
        holds_at_zero = False
    else:
        c_star = (lhs - base) / coeff
        holds_at_zero = False
    return BoundTermBreakdown(
        player=player, lhs=lhs, term_log=term_log,
        term_log_base2=math.log2(n) / eta,
        sum_var_delta=sum_var_delta, sum_var_prev=sum_var_prev,
        c_star=c_star, holds_at_zero=holds_at_zero, eta=eta)


@dataclass
class VarianceInequalityReport:
    """Both sides of the variance-sum inequality plus the constant-free ratio.

    ``ratio`` is sum Var[loss diff] / sum Var[prev loss]; a 0/0 ratio is
    reported as degenerate, never as pass or fail.
    """

    player: int
    lhs: float
    rhs: float
    ratio: float | None
    holds: bool
    degenerate: bool
    c_prime: float
    h: int

    def to_dict(self) -> dict:
        return {
            "player": self.player + 1,
            "lhs": self.lhs, "rhs": self.rhs, "ratio": self.ratio,
            "holds": self.holds, "degenerate": self.degenerate,
            "c_prime": self.c_prime, "h": self.h,
        }


def check_variance_inequality(trajectory: "Trajectory", player: int,
                              constants: BoundConstants | None = None) -> VarianceInequalityReport:
    """Check sum Var[loss diff] <= 1/2 sum Var[prev loss] + C' * ceil(log2 T)^5.

    Requires that every player followed the optimistic update with a common
    step size. The additive constant dominates at desk scale, so the
    constant-free ratio is the informative output.
    """
    modes = trajectory.metadata.modes
    etas = trajectory.metadata.etas
    if any(m != "opt_hedge" for m in modes):
        raise ValueError(f"all players must follow 'opt_hedge', got {modes}")
    if len(set(etas)) != 1:
        raise ValueError(f"all players must share a step size, got {etas}")
    if constants is None:
        constants = BoundConstants.for_horizon(trajectory.rounds)
    x, losses, prev = _player_sequences(trajectory, player)
    lhs = float(row_variances(x, losses - prev).sum())
    denom = float(row_variances(x, prev).sum())
    rhs = 0.5 * denom + constants.c_prime * float(constants.h) ** 5
    degenerate = lhs == 0.0 and denom == 0.0
    ratio = None if denom == 0.0 else lhs / denom
    return VarianceInequalityReport(
        player=player, lhs=lhs, rhs=rhs, ratio=ratio,
        holds=lhs <= rhs, degenerate=degenerate,
        c_prime=constants.c_prime, h=constants.h)
