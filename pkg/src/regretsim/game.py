"""Normal-form multi-player games with losses in [0, 1].

A game stores one dense loss tensor per player, indexed by joint action
profiles in row-major order over (a_1, ..., a_m). Players and actions are
0-indexed throughout the Python API; file formats and report text use the
1-indexed convention.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from functools import reduce
from typing import Sequence

import numpy as np

# Opponent-profile count up to which expected losses are computed by direct
# enumeration; larger games fall back to axis-by-axis tensor contraction.
ENUMERATION_LIMIT = 100_000

NAMED_GAMES = (
    "matching_pennies",
    "rock_paper_scissors",
    "coordination_2x2",
    "prisoners_dilemma_rescaled",
)


@dataclass(frozen=True, eq=False)
class Game:
    """An m-player normal-form game.

    ``loss_tensors[i]`` holds player i's loss for every joint action profile;
    for a well-formed game it has shape ``action_counts`` and values in
    [0, 1]. Instances are immutable and safe to share across threads.
    """

    num_players: int
    action_counts: tuple[int, ...]
    loss_tensors: tuple[np.ndarray, ...]
    name: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "action_counts", tuple(int(n) for n in self.action_counts))
        shaped = []
        expected = _profile_count(self.action_counts)
        for raw in self.loss_tensors:
            arr = np.asarray(raw, dtype=np.float64)
            if arr.size == expected and expected > 0:
                arr = arr.reshape(self.action_counts)
            arr = np.ascontiguousarray(arr)
            arr.setflags(write=False)
            shaped.append(arr)
        object.__setattr__(self, "loss_tensors", tuple(shaped))

    @property
    def profile_count(self) -> int:
        return _profile_count(self.action_counts)


def _profile_count(action_counts: Sequence[int]) -> int:
    return int(np.prod([int(n) for n in action_counts], dtype=object)) if action_counts else 0


def uniform_strategy(n: int) -> np.ndarray:
    """Uniform mixed strategy on n actions."""
    if n < 1:
        raise ValueError(f"action count must be >= 1, got {n}")
    return np.full(n, 1.0 / n)


def validate_strategy(probs: np.ndarray, atol: float = 1e-12) -> bool:
    """True iff ``probs`` is a probability vector (entries >= 0, sum within atol of 1)."""
    p = np.asarray(probs, dtype=np.float64)
    return p.ndim == 1 and bool(np.all(p >= 0.0)) and abs(float(p.sum()) - 1.0) <= atol


def validate_game(game: Game) -> list[str]:
    """Check all game invariants; returns a list of violations (empty = ok).

    Violations name the offending player and profile with 1-indexed labels.
    Only the first out-of-range entry per tensor is reported.
    """
    violations: list[str] = []
    m = game.num_players
    if m < 2:
        violations.append(f"game must have at least 2 players, got {m}")
    if len(game.action_counts) != m:
        violations.append(
            f"action_counts has {len(game.action_counts)} entries, expected {m}"
        )
    for i, n in enumerate(game.action_counts):
        if n < 1:
            violations.append(f"player {i + 1} action count must be >= 1, got {n}")
    if len(game.loss_tensors) != m:
        violations.append(
            f"game has {len(game.loss_tensors)} loss tensors, expected {m}"
        )
    expected = game.profile_count
    for i, tensor in enumerate(game.loss_tensors):
        if tensor.size != expected:
            violations.append(
                f"tensor size mismatch for player {i + 1}: "
                f"{tensor.size} entries, expected {expected}"
            )
            continue
        flat = tensor.reshape(-1)
        bad = ~(np.isfinite(flat) & (flat >= 0.0) & (flat <= 1.0))
        if bad.any():
            k = int(np.argmax(bad))
            profile = np.unravel_index(k, game.action_counts)
            label = tuple(int(a) + 1 for a in profile)
            violations.append(
                f"loss out of [0,1] at player {i + 1}, profile {label}: {flat[k]!r}"
            )
    return violations


def joint_action_loss(game: Game, player: int, profile: Sequence[int]) -> float:
    """Loss experienced by ``player`` at the joint action ``profile`` (0-indexed)."""
    if not 0 <= player < game.num_players:
        raise IndexError(f"player index {player} out of range for {game.num_players} players")
    if len(profile) != game.num_players:
        raise ValueError(
            f"profile has {len(profile)} actions, expected {game.num_players}"
        )
    for j, (a, n) in enumerate(zip(profile, game.action_counts)):
        if not 0 <= a < n:
            raise IndexError(f"action {a} out of range [0, {n}) for player {j}")
    return float(game.loss_tensors[player][tuple(int(a) for a in profile)])


def _opponent_weights(game: Game, player: int, strategies: Sequence[np.ndarray]) -> np.ndarray:
    """Joint probability of every opponent profile, flattened in profile order."""
    opponents = [np.asarray(strategies[j], dtype=np.float64)
                 for j in range(game.num_players) if j != player]
    return reduce(np.multiply.outer, opponents).reshape(-1)


def _expected_loss_enumerate(game: Game, player: int, strategies: Sequence[np.ndarray]) -> np.ndarray:
    weights = _opponent_weights(game, player, strategies)
    n = game.action_counts[player]
    tensor = np.moveaxis(game.loss_tensors[player], player, 0).reshape(n, -1)
    return tensor @ weights


def _expected_loss_contract(game: Game, player: int, strategies: Sequence[np.ndarray]) -> np.ndarray:
    out = game.loss_tensors[player]
    # Contract opponents from the last axis down; lower axes keep their index.
    for j in range(game.num_players - 1, -1, -1):
        if j == player:
            continue
        out = np.tensordot(out, np.asarray(strategies[j], dtype=np.float64), axes=([j], [0]))
    return np.asarray(out, dtype=np.float64)


def expected_loss_vector(game: Game, player: int, strategies: Sequence[np.ndarray]) -> np.ndarray:
    """Expected loss per action of ``player`` against the opponents' mixed strategies.

    ``strategies`` is the full strategy profile (length m); entry ``player``
    is ignored. Component j equals the expectation of the player's loss when
    playing j while every opponent i' draws from ``strategies[i']``.
    """
    if not 0 <= player < game.num_players:
        raise IndexError(f"player index {player} out of range")
    if len(strategies) != game.num_players:
        raise ValueError(
            f"expected {game.num_players} strategies, got {len(strategies)}"
        )
    opp_profiles = 1
    for j in range(game.num_players):
        if j == player:
            continue
        if len(strategies[j]) != game.action_counts[j]:
            raise ValueError(
                f"strategy for player {j} has length {len(strategies[j])}, "
                f"expected {game.action_counts[j]}"
            )
        opp_profiles *= game.action_counts[j]
    if opp_profiles <= ENUMERATION_LIMIT:
        return _expected_loss_enumerate(game, player, strategies)
    return _expected_loss_contract(game, player, strategies)


def random_game(m: int, action_counts: Sequence[int], seed: int,
                name: str | None = None) -> Game:
    """Game with i.i.d. uniform [0, 1] losses from a seeded generator.

    The same seed yields a bit-identical game.
    """
    action_counts = tuple(int(n) for n in action_counts)
    if m < 2:
        raise ValueError(f"need at least 2 players, got {m}")
    if len(action_counts) != m:
        raise ValueError(
            f"action_counts has {len(action_counts)} entries, expected {m}"
        )
    if any(n < 1 for n in action_counts):
        raise ValueError(f"all action counts must be >= 1, got {action_counts}")
    rng = np.random.default_rng(seed)
    tensors = tuple(rng.random(action_counts) for _ in range(m))
    return Game(m, action_counts, tensors, name=name or f"random_{seed}")


def named_game(name: str) -> Game:
    """Canonical 2-player fixtures with payoffs rescaled into [0, 1] losses."""
    if name == "matching_pennies":
        l1 = np.array([[1.0, 0.0], [0.0, 1.0]])
        return Game(2, (2, 2), (l1, 1.0 - l1), name=name)
    if name == "rock_paper_scissors":
        # l1[a, b]: 0 when a beats b, 1 when a loses, 0.5 on ties.
        l1 = np.full((3, 3), 0.5)
        for winner, loser in ((0, 2), (1, 0), (2, 1)):
            l1[winner, loser] = 0.0
            l1[loser, winner] = 1.0
        return Game(2, (3, 3), (l1, 1.0 - l1), name=name)
    if name == "coordination_2x2":
        mismatch = np.array([[0.0, 1.0], [1.0, 0.0]])
        return Game(2, (2, 2), (mismatch, mismatch.copy()), name=name)
    if name == "prisoners_dilemma_rescaled":
        # Classic gains T=5, R=3, P=1, S=0 mapped to losses via (5 - gain) / 5.
        gains_row = np.array([[3.0, 0.0], [5.0, 1.0]])
        l1 = (5.0 - gains_row) / 5.0
        return Game(2, (2, 2), (l1, l1.T.copy()), name=name)
    raise ValueError(f"unknown game name {name!r}; known: {', '.join(NAMED_GAMES)}")


def game_to_dict(game: Game) -> dict:
    """JSON-ready mapping: players, actions, and flat row-major loss tensors."""
    return {
        "players": game.num_players,
        "actions": list(game.action_counts),
        "losses": [t.reshape(-1).tolist() for t in game.loss_tensors],
    }


def game_from_dict(data: dict, name: str | None = None) -> Game:
    for key in ("players", "actions", "losses"):
        if key not in data:
            raise ValueError(f"game JSON missing required key {key!r}")
    m = int(data["players"])
    actions = tuple(int(n) for n in data["actions"])
    if m < 2:
        raise ValueError(f"game JSON: players must be >= 2, got {m}")
    if len(actions) != m or any(n < 1 for n in actions):
        raise ValueError(f"game JSON: bad action counts {actions} for {m} players")
    losses = data["losses"]
    if len(losses) != m:
        raise ValueError(f"game JSON: {len(losses)} loss tensors for {m} players")
    expected = int(np.prod(actions))
    tensors = []
    for i, flat in enumerate(losses):
        arr = np.asarray(flat, dtype=np.float64)
        if arr.ndim != 1 or arr.size != expected:
            raise ValueError(
                f"game JSON: tensor {i + 1} has {arr.size} entries, expected {expected}"
            )
        if not np.all(np.isfinite(arr) & (arr >= 0.0) & (arr <= 1.0)):
            raise ValueError(f"game JSON: tensor {i + 1} has values outside [0, 1]")
        tensors.append(arr.reshape(actions))
    return Game(m, actions, tuple(tensors), name=name)


def save_game_json(game: Game, path) -> None:
    with open(path, "w", newline="\n") as fh:
        json.dump(game_to_dict(game), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_game_json(path) -> Game:
    with open(path) as fh:
        data = json.load(fh)
    stem = os.path.splitext(os.path.basename(str(path)))[0]
    return game_from_dict(data, name=stem)
