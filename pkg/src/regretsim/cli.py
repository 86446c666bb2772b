"""Command-line front end: run experiments, compare learners, emit CSV/JSON.

Subcommands: run, compare, diagnose, gen-game. Flag values override config
file values, which override defaults. Exit codes: 0 ok, 2 configuration
error, 3 runtime error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

from . import diagnostics, dynamics, learners
from .game import Game, load_game_json, named_game, random_game, save_game_json, NAMED_GAMES

ETA_POLICIES = ("practical", "theorem", "explicit")
FORMATS = ("json", "csv")
DIAGNOSTIC_NAMES = ("bound_terms", "variance_inequality", "fd_profile", "closeness")

# Skip writing the full trajectory when it would exceed this many rows.
TRAJECTORY_ROW_LIMIT = 10**7

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


class ConfigError(ValueError):
    """Invalid experiment configuration; maps to exit code 2."""


@dataclass(frozen=True)
class LearnerSpec:
    mode: str = learners.OPT_HEDGE
    eta_policy: str = "practical"
    eta: float | None = None

    def resolve_eta(self, m: int, rounds: int) -> float:
        if self.eta_policy == "explicit":
            if self.eta is None or not self.eta > 0:
                raise ConfigError(f"learner.eta must be > 0 with the explicit policy, got {self.eta}")
            return self.eta
        if self.eta_policy == "theorem":
            return learners.recommended_eta(m, max(rounds, 2))
        return learners.practical_eta(m, max(rounds, 2))


@dataclass(frozen=True)
class DiagnosticsToggles:
    bound_terms: bool = False
    variance_inequality: bool = False
    fd_h_max: int | None = None
    closeness: bool = False

    @property
    def any_enabled(self) -> bool:
        return (self.bound_terms or self.variance_inequality
                or self.fd_h_max is not None or self.closeness)


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated experiment description with exactly one game source."""

    game_name: str | None = None
    game_path: str | None = None
    game_random: dict | None = None  # {"players": m, "actions": [...], "seed": s}
    learner_specs: tuple[LearnerSpec, ...] = (LearnerSpec(),)
    rounds: int = 1024
    seed: int | None = None
    out_dir: str = "out"
    formats: tuple[str, ...] = ("json", "csv")
    diagnostics: DiagnosticsToggles = field(default_factory=DiagnosticsToggles)
    force_trajectory: bool = False
    emit_trajectory: bool = True

    def to_dict(self) -> dict:
        d = asdict(self)
        d["learner_specs"] = [asdict(s) for s in self.learner_specs]
        d["diagnostics"] = asdict(self.diagnostics)
        d["formats"] = list(self.formats)
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        data = dict(data)
        try:
            specs = tuple(LearnerSpec(**s) for s in data.pop("learner_specs", [{}]))
            diag = DiagnosticsToggles(**data.pop("diagnostics", {}))
            formats = tuple(data.pop("formats", ("json", "csv")))
            cfg = cls(learner_specs=specs, diagnostics=diag, formats=formats, **data)
        except TypeError as exc:
            raise ConfigError(f"config: {exc}") from exc
        validate_config(cfg)
        return cfg


def validate_config(cfg: ExperimentConfig) -> None:
    sources = [s for s in (cfg.game_name, cfg.game_path, cfg.game_random) if s is not None]
    if len(sources) != 1:
        raise ConfigError(f"config.game: exactly one game source required, got {len(sources)}")
    if cfg.rounds < 1:
        raise ConfigError(f"config.rounds: must be >= 1, got {cfg.rounds}")
    for k, spec in enumerate(cfg.learner_specs):
        if spec.mode not in learners.MODES:
            raise ConfigError(f"config.learners[{k}].mode: unknown mode {spec.mode!r}")
        if spec.eta_policy not in ETA_POLICIES:
            raise ConfigError(f"config.learners[{k}].eta_policy: unknown policy {spec.eta_policy!r}")
        if spec.eta is not None and not spec.eta > 0:
            raise ConfigError(f"config.learners[{k}].eta: must be > 0, got {spec.eta}")
    for f in cfg.formats:
        if f not in FORMATS:
            raise ConfigError(f"config.formats: unknown format {f!r}")
    if cfg.game_random is not None:
        r = cfg.game_random
        if "actions" not in r:
            raise ConfigError("config.game.random: missing 'actions'")
        if int(r.get("players", len(r["actions"]))) != len(r["actions"]):
            raise ConfigError("config.game.random: players does not match actions length")


def load_config_game(cfg: ExperimentConfig) -> Game:
    if cfg.game_name is not None:
        try:
            return named_game(cfg.game_name)
        except ValueError as exc:
            raise ConfigError(f"config.game: {exc}") from exc
    if cfg.game_path is not None:
        try:
            return load_game_json(cfg.game_path)
        except ValueError as exc:
            raise ConfigError(f"config.game.path: {exc}") from exc
    r = cfg.game_random
    actions = [int(n) for n in r["actions"]]
    return random_game(int(r.get("players", len(actions))), actions,
                       int(r.get("seed", 0)))


def build_learner_configs(cfg: ExperimentConfig, game: Game) -> list[dynamics.LearnerConfig]:
    specs = list(cfg.learner_specs)
    if len(specs) == 1 and game.num_players > 1:
        specs = specs * game.num_players
    if len(specs) != game.num_players:
        raise ConfigError(
            f"config.learners: {len(specs)} specs for {game.num_players} players")
    return [
        dynamics.LearnerConfig(mode=s.mode, eta=s.resolve_eta(game.num_players, cfg.rounds))
        for s in specs
    ]


# ---------------------------------------------------------------------------
# Flag parsing
# ---------------------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="regretsim",
        description="Simulate no-regret learning dynamics in normal-form games.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", help="JSON config file; flags override its values")
        p.add_argument("--game", help=f"named game ({', '.join(NAMED_GAMES)}), a game JSON path, or 'random'")
        p.add_argument("--actions", help="comma-separated action counts for --game random, e.g. 3,3")
        p.add_argument("--game-seed", type=int, help="seed for --game random")
        p.add_argument("--rounds", type=int, help="number of rounds T")
        p.add_argument("--eta", type=float, help="explicit step size (sets --eta-policy explicit)")
        p.add_argument("--eta-policy", choices=ETA_POLICIES, help="step-size policy")
        p.add_argument("--learner", help="learner mode, or comma-separated list (one per player)")
        p.add_argument("--seed", type=int, help="run seed recorded in metadata")
        p.add_argument("--out", help="output directory")
        p.add_argument("--diagnostics",
                       help="comma-separated subset of "
                            f"{{{','.join(DIAGNOSTIC_NAMES)}}}, or 'all'/'none'")
        p.add_argument("--fd-h-max", type=int, help="max finite-difference order for fd_profile")
        p.add_argument("--format", help="comma-separated output formats (json,csv)")
        p.add_argument("--force-trajectory", action="store_true",
                       help="write trajectory.csv even past the size gate")
        p.add_argument("--no-trajectory", action="store_true", help="skip trajectory.csv")

    p_run = sub.add_parser("run", help="run one experiment")
    add_common(p_run)
    p_cmp = sub.add_parser("compare", help="run several learners on the same game and seed")
    add_common(p_cmp)
    p_diag = sub.add_parser("diagnose", help="run with every diagnostic enabled")
    add_common(p_diag)
    p_gen = sub.add_parser("gen-game", help="generate a random game JSON")
    p_gen.add_argument("--actions", required=True, help="comma-separated action counts, e.g. 2,3,2")
    p_gen.add_argument("--game-seed", type=int, default=0)
    p_gen.add_argument("--out", default="game.json", help="output file path")
    return parser


def _parse_int_list(text: str) -> list[int]:
    try:
        return [int(tok) for tok in text.split(",") if tok.strip()]
    except ValueError as exc:
        raise ConfigError(f"expected comma-separated integers, got {text!r}") from exc


def _diag_from_flags(text: str | None, fd_h_max: int | None) -> DiagnosticsToggles | None:
    if text is None:
        return None
    names = [tok.strip() for tok in text.split(",") if tok.strip()]
    if names == ["none"]:
        return DiagnosticsToggles()
    if names == ["all"]:
        names = list(DIAGNOSTIC_NAMES)
    for name in names:
        if name not in DIAGNOSTIC_NAMES:
            raise ConfigError(f"--diagnostics: unknown diagnostic {name!r}")
    return DiagnosticsToggles(
        bound_terms="bound_terms" in names,
        variance_inequality="variance_inequality" in names,
        fd_h_max=(fd_h_max if fd_h_max is not None else 5) if "fd_profile" in names else None,
        closeness="closeness" in names,
    )


def parse_config(args: argparse.Namespace) -> ExperimentConfig:
    """Merge defaults, config file, and flags (flags win) into a validated config."""
    file_cfg: dict = {}
    if getattr(args, "config", None):
        with open(args.config) as fh:
            file_cfg = json.load(fh)
    cfg = ExperimentConfig.from_dict(file_cfg) if file_cfg else ExperimentConfig()

    updates: dict = {}
    if getattr(args, "game", None):
        updates.update(game_name=None, game_path=None, game_random=None)
        if args.game == "random":
            if not getattr(args, "actions", None):
                raise ConfigError("--game random requires --actions")
            actions = _parse_int_list(args.actions)
            updates["game_random"] = {
                "players": len(actions), "actions": actions,
                "seed": getattr(args, "game_seed", None) or 0}
        elif args.game in NAMED_GAMES:
            updates["game_name"] = args.game
        elif args.game.endswith(".json") or Path(args.game).exists():
            updates["game_path"] = args.game
        else:
            raise ConfigError(
                f"--game: {args.game!r} is not a named game, an existing JSON path, or 'random'")
    if getattr(args, "rounds", None) is not None:
        updates["rounds"] = args.rounds
    if getattr(args, "seed", None) is not None:
        updates["seed"] = args.seed
    if getattr(args, "out", None):
        updates["out_dir"] = args.out
    if getattr(args, "format", None):
        updates["formats"] = tuple(tok.strip() for tok in args.format.split(",") if tok.strip())
    if getattr(args, "force_trajectory", False):
        updates["force_trajectory"] = True
    if getattr(args, "no_trajectory", False):
        updates["emit_trajectory"] = False

    modes = None
    if getattr(args, "learner", None):
        modes = [tok.strip() for tok in args.learner.split(",") if tok.strip()]
    eta = getattr(args, "eta", None)
    policy = getattr(args, "eta_policy", None)
    if eta is not None:
        policy = "explicit"
    if modes or eta is not None or policy:
        base = cfg.learner_specs
        if modes:
            base = tuple(LearnerSpec(mode=m) for m in modes)
        specs = tuple(
            replace(s,
                    eta_policy=policy or s.eta_policy,
                    eta=eta if eta is not None else s.eta)
            for s in base)
        updates["learner_specs"] = specs

    diag = _diag_from_flags(getattr(args, "diagnostics", None), getattr(args, "fd_h_max", None))
    if args.command == "diagnose" and diag is None:
        diag = _diag_from_flags("all", getattr(args, "fd_h_max", None))
    if diag is not None:
        updates["diagnostics"] = diag

    cfg = replace(cfg, **updates)
    validate_config(cfg)
    return cfg


# ---------------------------------------------------------------------------
# Experiment execution
# ---------------------------------------------------------------------------

def _json_dump(data, path) -> None:
    with open(path, "w", newline="\n") as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _run_diagnostics(cfg: ExperimentConfig, trajectory: dynamics.Trajectory) -> dict:
    toggles = cfg.diagnostics
    m = trajectory.game.num_players
    report: dict = {}
    try:
        if toggles.bound_terms:
            report["bound_terms"] = [
                diagnostics.regret_bound_terms(trajectory, i).to_dict() for i in range(m)
            ]
        if toggles.variance_inequality:
            report["variance_inequality"] = [
                diagnostics.check_variance_inequality(trajectory, i).to_dict() for i in range(m)
            ]
    except ValueError as exc:
        raise ConfigError(f"--diagnostics: {exc}") from exc
    if toggles.fd_h_max is not None:
        h_max = min(toggles.fd_h_max, trajectory.rounds - 1)
        report["fd_profile"] = [
            dict(player=i + 1, **diagnostics.fd_decay_profile(trajectory.losses[i], h_max).to_dict())
            for i in range(m)
        ]
    if toggles.closeness:
        entries = []
        for i in range(m):
            closeness = diagnostics.consecutive_closeness(trajectory.strategies[i])
            eta = trajectory.metadata.etas[i]
            bound = math.exp(6.0 * eta) - 1.0
            entry = closeness.to_dict()
            entry.update(player=i + 1, bound=bound,
                         within_bound=closeness.zeta_observed <= bound)
            entries.append(entry)
        report["closeness"] = entries
    return report


def _diagnostic_verdicts(report: dict) -> dict:
    verdicts = {}
    if "bound_terms" in report:
        verdicts["bound_terms_all_c_star_finite"] = all(
            e["c_star"] is not None and math.isfinite(e["c_star"])
            for e in report["bound_terms"])
    if "variance_inequality" in report:
        verdicts["variance_inequality_all_hold"] = all(
            e["holds"] for e in report["variance_inequality"])
    if "closeness" in report:
        verdicts["closeness_all_within_bound"] = all(
            e["within_bound"] for e in report["closeness"])
    if "fd_profile" in report:
        verdicts["fd_profile_max_ratio"] = max(
            (r for e in report["fd_profile"] for r in e["ratios"] if r is not None),
            default=None)
    return verdicts


def run_experiment(cfg: ExperimentConfig) -> dict:
    """Run one experiment, write its artifact files, return the summary dict."""
    started = time.perf_counter()
    game = load_config_game(cfg)
    configs = build_learner_configs(cfg, game)
    trajectory = dynamics.run(game, configs, cfg.rounds, seed=cfg.seed)
    entries = dynamics.regret_report(trajectory)
    play = None
    if game.profile_count <= dynamics.DENSE_SUPPORT_LIMIT:
        play = dynamics.cce_gap(game, dynamics.empirical_joint_distribution(trajectory))
    diag_report = _run_diagnostics(cfg, trajectory)

    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if "csv" in cfg.formats:
        dynamics.regret_curves_to_csv(entries, out / "regret_curve.csv")
        cells = cfg.rounds * sum(game.action_counts)
        if cfg.emit_trajectory:
            if cells <= TRAJECTORY_ROW_LIMIT or cfg.force_trajectory:
                dynamics.trajectory_to_csv(trajectory, out / "trajectory.csv")
            else:
                print("warning: skipping trajectory.csv "
                      f"(rounds x actions = {cells} > {TRAJECTORY_ROW_LIMIT}); "
                      "use --force-trajectory to write it anyway", file=sys.stderr)
        if "fd_profile" in diag_report:
            for i in range(game.num_players):
                profile = diagnostics.fd_decay_profile(
                    trajectory.losses[i], min(cfg.diagnostics.fd_h_max, cfg.rounds - 1))
                diagnostics.fd_profile_values_csv(profile, out / f"fd_values_player{i + 1}.csv")
                diagnostics.fd_profile_norms_csv(profile, out / f"fd_norms_player{i + 1}.csv")

    summary = {
        "config": cfg.to_dict(),
        "game": {"name": game.name, "players": game.num_players,
                 "actions": list(game.action_counts)},
        "etas": [c.eta for c in configs],
        "regret": [e.to_dict() for e in entries],
        "cce": play.to_dict() if play is not None else None,
        "diagnostics": _diagnostic_verdicts(diag_report),
        "duration_seconds": time.perf_counter() - started,
    }
    if "json" in cfg.formats:
        _json_dump(summary, out / "summary.json")
        if diag_report:
            _json_dump(diag_report, out / "diagnostics.json")
    return summary


def compare_learners(cfg: ExperimentConfig) -> list[dict]:
    """Run each learner spec on the identical game and seed; emit a comparison CSV.

    Rows report regret per player at the checkpoints T/4, T/2, and T.
    """
    if len(cfg.learner_specs) < 2:
        raise ConfigError("compare needs at least 2 learner specs (--learner a,b)")
    game = load_config_game(cfg)
    checkpoints = sorted({max(1, cfg.rounds // 4), max(1, cfg.rounds // 2), cfg.rounds})
    rows: list[dict] = []
    for spec in cfg.learner_specs:
        eta = spec.resolve_eta(game.num_players, cfg.rounds)
        configs = [dynamics.LearnerConfig(mode=spec.mode, eta=eta)] * game.num_players
        trajectory = dynamics.run(game, configs, cfg.rounds, seed=cfg.seed)
        entries = dynamics.regret_report(trajectory)
        for checkpoint in checkpoints:
            for e in entries:
                rows.append({
                    "learner": spec.mode, "eta": eta, "round": checkpoint,
                    "player": e.player + 1,
                    "regret": float(e.curve[checkpoint - 1]),
                })
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if "csv" in cfg.formats:
        with open(out / "compare.csv", "w", newline="") as fh:
            fh.write("learner,eta,round,player,regret\n")
            for r in rows:
                fh.write(f"{r['learner']},{dynamics.format_float(r['eta'])},{r['round']},"
                         f"{r['player']},{dynamics.format_float(r['regret'])}\n")
    if "json" in cfg.formats:
        _json_dump(rows, out / "compare.json")
    return rows


def gen_game(args: argparse.Namespace) -> None:
    actions = _parse_int_list(args.actions)
    if len(actions) < 2:
        raise ConfigError("--actions needs at least 2 entries (one per player)")
    game = random_game(len(actions), actions, args.game_seed)
    save_game_json(game, args.out)
    print(f"wrote {args.out}")


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "gen-game":
            gen_game(args)
            return EXIT_OK
        cfg = parse_config(args)
        if args.command == "compare":
            compare_learners(cfg)
            print(f"wrote comparison to {cfg.out_dir}")
            return EXIT_OK
        summary = run_experiment(cfg)
        regrets = ", ".join(
            f"player {e['player']}: {e['regret']:.6g}" for e in summary["regret"])
        print(f"T={cfg.rounds} regret {regrets}")
        if summary["cce"] is not None:
            print(f"cce gap {summary['cce']['epsilon']:.6g}")
        return EXIT_OK
    except (ConfigError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
