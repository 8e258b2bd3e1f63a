"""Command-line entry point: ``gameform <command> ...``."""
from __future__ import annotations

import argparse
import json
import logging
import random
import sys
from pathlib import Path
from typing import List, Optional

from .backends import BackendError, make_backend
from .library import GAME_IDS, STRATEGY_IDS, canonical_game, normalize_game_id, strategy_source
from .tournament import AgentSpec, MatchMaker, play_match, run_tournament, write_round_logs
from .validation import check_syntax, validate_exact, validate_program, validate_semantic_constraints

EXIT_OK, EXIT_INVALID, EXIT_INTERNAL = 0, 1, 2


def _read_game(ref: str) -> str:
    """A game id (PD, HD, ...) or a path to an .lgdl file."""
    try:
        return canonical_game(ref).source
    except KeyError:
        return Path(ref).read_text(encoding="utf-8")


def _read_strategy(ref: str) -> str:
    if ref in STRATEGY_IDS:
        return strategy_source(ref).source
    return Path(ref).read_text(encoding="utf-8")


def _load_scenario(ref: str):
    from .harness import _load_scenario as load_one, sample_dataset_dir

    path = Path(ref)
    if path.suffix in (".txt", ".json") and path.exists():
        return load_one(path.with_suffix(".txt"))
    sample = sample_dataset_dir() / f"{ref}.txt"
    if sample.exists():
        return load_one(sample)
    raise FileNotFoundError(f"no scenario {ref!r} (give a .txt path or a sample id)")


def cmd_check(args) -> int:
    src = Path(args.file).read_text(encoding="utf-8")
    report = check_syntax(src, args.file)
    if args.json:
        print(json.dumps(report.to_dict(), sort_keys=True, indent=2))
    elif report.valid:
        print(f"{args.file}: ok")
    else:
        print(report.trace)
    return EXIT_OK if report.valid else EXIT_INVALID


def cmd_play(args) -> int:
    game = _read_game(args.game)
    a = AgentSpec(args.strategy_a, game, _read_strategy(args.strategy_a))
    b = AgentSpec(args.strategy_b, game, _read_strategy(args.strategy_b))
    match = play_match(a, b, args.rounds, random.Random(args.seed))
    if args.json:
        print(json.dumps(match.to_dict(), sort_keys=True, indent=2))
    else:
        for r in match.rounds:
            print(f"round {r.round + 1}: {r.row_move} / {r.col_move} -> {r.row_payoff}, {r.col_payoff}")
        print(f"totals: {match.totals[0]}, {match.totals[1]}")
        if match.error:
            print(f"error: {match.error['kind']}: {match.error['message']}")
    return EXIT_OK if match.error is None else EXIT_INVALID


def cmd_tournament(args) -> int:
    from .harness import tomllib

    with open(args.config, "rb") as fh:
        cfg = tomllib.load(fh)
    game = _read_game(cfg.get("game", "PD"))
    strategies = cfg.get("strategies", list(STRATEGY_IDS))
    pool = [AgentSpec(Path(s).stem, game, _read_strategy(s), s) for s in strategies]
    kind = cfg.get("match_maker", "round_robin")
    if kind == "explicit":
        mm = MatchMaker.explicit(tuple(p) for p in cfg["pairs"])
    elif kind == "clone":
        mm = MatchMaker.clone()
    else:
        mm = MatchMaker.round_robin(cfg.get("include_self", True))
    result = run_tournament(
        pool, cfg.get("rounds", 10), mm, cfg.get("seed", 0), cfg.get("targets"), workers=cfg.get("workers", 1)
    )
    text = result.to_json()
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "tournament.json").write_text(text + "\n", encoding="utf-8")
        write_round_logs(result, out / "rounds.jsonl")
    print(text)
    return EXIT_OK if not result.errors else EXIT_INVALID


def cmd_validate(args) -> int:
    scenario = _load_scenario(args.scenario)
    program = Path(args.program).read_text(encoding="utf-8") if args.program else canonical_game(scenario.game_type).source
    strategy = _read_strategy(args.strategy)
    if args.mode == "exact":
        if scenario.targets is None:
            print(f"{scenario.id}: no target payoffs for exact validation", file=sys.stderr)
            return EXIT_INVALID
        report = validate_program(program, strategy, targets=scenario.targets)
    else:
        report = validate_program(program, strategy, game_type=scenario.game_type)
    print(report.to_json())
    return EXIT_OK if report.failed_level is None else EXIT_INVALID


def cmd_autoformalize(args) -> int:
    from .autoformalizer import LlmParams, autoformalize, game_bundle

    scenario = _load_scenario(args.scenario)
    backend = make_backend(args.backend, args.fixtures)
    params = LlmParams(max_attempts=args.max_attempts, sample=args.sample, **({"model": args.model} if args.model else {}))
    try:
        attempt_log = autoformalize(game_bundle(scenario.description), backend, params)
    except BackendError as exc:
        print(f"backend error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    if args.json:
        print(json.dumps(attempt_log.to_dict(), sort_keys=True, indent=2))
    elif attempt_log.succeeded:
        print(attempt_log.code, end="")
    else:
        print(attempt_log.message)
    return EXIT_OK if attempt_log.succeeded else EXIT_INVALID


def cmd_experiment(args) -> int:
    from .harness import ExperimentConfig, emit_reports, run_experiment

    overrides = {"seed": args.seed, "output": args.out, "fixtures": args.fixtures, "backend": args.backend, "workers": args.workers}
    if args.config:
        cfg = ExperimentConfig.from_toml(args.config, experiment=args.number, **overrides)
    else:
        cfg = ExperimentConfig.from_mapping({"experiment": args.number}, **overrides)
    result = run_experiment(cfg)
    for p in emit_reports(result, cfg.output):
        print(p)
    for err in result.internal_errors:
        print(f"internal error: {err}", file=sys.stderr)
    return EXIT_INTERNAL if result.internal_errors else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gameform", description="Formalize, check and play 2x2 games written in LGDL.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("check", help="parse an .lgdl file and report syntax errors")
    c.add_argument("file")
    c.add_argument("--json", action="store_true")
    c.set_defaults(func=cmd_check)

    c = sub.add_parser("play", help="play one match between two strategies")
    c.add_argument("game", help=f"game id ({', '.join(GAME_IDS)}) or .lgdl path")
    c.add_argument("strategy_a", help="strategy id or .lgdl path (row player)")
    c.add_argument("strategy_b", help="strategy id or .lgdl path (column player)")
    c.add_argument("--rounds", type=int, default=4)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--json", action="store_true")
    c.set_defaults(func=cmd_play)

    c = sub.add_parser("tournament", help="run a tournament described by a TOML file")
    c.add_argument("config")
    c.add_argument("--out", help="directory for tournament.json and rounds.jsonl")
    c.set_defaults(func=cmd_tournament)

    c = sub.add_parser("validate", help="run syntax, runtime and semantic validation")
    c.add_argument("scenario", help="scenario .txt path or sample id")
    c.add_argument("--mode", choices=("exact", "constraint"), default="exact")
    c.add_argument("--program", help="game .lgdl to validate (default: the canonical game)")
    c.add_argument("--strategy", default="tit_for_tat")
    c.set_defaults(func=cmd_validate)

    c = sub.add_parser("autoformalize", help="translate a scenario into LGDL")
    c.add_argument("scenario")
    c.add_argument("--backend", choices=("http", "messages", "replay", "record"), default="replay")
    c.add_argument("--fixtures", help="fixture directory for replay/record")
    c.add_argument("--model")
    c.add_argument("--max-attempts", type=int, default=5)
    c.add_argument("--sample", type=int, default=0)
    c.add_argument("--json", action="store_true")
    c.set_defaults(func=cmd_autoformalize)

    c = sub.add_parser("experiment", help="run experiment 1, 2, 3 or 4 and write reports")
    c.add_argument("number", type=int, choices=(1, 2, 3, 4))
    c.add_argument("--config")
    c.add_argument("--out")
    c.add_argument("--seed", type=int)
    c.add_argument("--backend", choices=("http", "messages", "replay", "record"))
    c.add_argument("--fixtures")
    c.add_argument("--workers", type=int)
    c.set_defaults(func=cmd_experiment)
    return p


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (OSError, ValueError, KeyError, BackendError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
