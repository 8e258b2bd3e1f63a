"""Scenario datasets, experiment drivers and report files."""
from __future__ import annotations

import csv
import json
import logging
import random
import sys
from dataclasses import asdict, dataclass, field, fields, replace
from fractions import Fraction
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from .autoformalizer import AttemptLog, LlmParams, autoformalize, game_bundle, strategy_bundle
from .backends import BackendError, ChatBackend, make_backend
from .library import GAME_IDS, STRATEGY_IDS, canonical_game, normalize_game_id, strategy_source
from .tournament import AgentSpec, MatchMaker, MatchResult, TournamentResult, play_match, run_tournament
from .validation import (
    TargetOutcomes,
    validate_exact,
    validate_runtime,
    validate_semantic_constraints,
)

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

log = logging.getLogger(__name__)

EXP4_OPPONENT = "anti_tit_for_tat"
EXP4_EXEMPLAR = "tit_for_tat"
MANUAL_REVIEW = frozenset({"random"})


class DatasetError(ValueError):
    pass


@dataclass(frozen=True)
class ScenarioRecord:
    id: str
    game_type: str
    numeric_payoffs: bool
    description: str
    targets: Optional[TargetOutcomes] = None

    def __post_init__(self) -> None:
        if self.numeric_payoffs and self.targets is None:
            raise DatasetError(f"{self.id}: numeric scenario needs targets")


def _load_scenario(txt: Path) -> ScenarioRecord:
    sidecar = txt.with_suffix(".json")
    if not sidecar.exists():
        raise DatasetError(f"{txt.name}: missing sidecar {sidecar.name}")
    try:
        meta = json.loads(sidecar.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DatasetError(f"{sidecar.name}: invalid JSON: {exc}") from exc
    if not isinstance(meta, dict):
        raise DatasetError(f"{sidecar.name}: expected a JSON object")
    try:
        game_type = normalize_game_id(str(meta["game_type"]))
    except KeyError as exc:
        raise DatasetError(f"{sidecar.name}: bad or missing game_type") from exc
    numeric = meta.get("numeric_payoffs")
    if not isinstance(numeric, bool):
        raise DatasetError(f"{sidecar.name}: numeric_payoffs must be true or false")
    targets = None
    if meta.get("targets") is not None:
        try:
            targets = TargetOutcomes.from_rows(meta["targets"])
        except (ValueError, TypeError) as exc:
            raise DatasetError(f"{sidecar.name}: bad targets: {exc}") from exc
    description = txt.read_text(encoding="utf-8").strip()
    if not description:
        raise DatasetError(f"{txt.name}: empty description")
    try:
        return ScenarioRecord(txt.stem, game_type, numeric, description, targets)
    except DatasetError as exc:
        raise DatasetError(f"{sidecar.name}: {exc}") from exc


def load_dataset(directory, strict: bool = False) -> List[ScenarioRecord]:
    """Read ``<id>.txt`` descriptions with ``<id>.json`` sidecars, sorted by id.

    Malformed scenarios are skipped with a warning, or raise when ``strict``.
    """
    out = []
    for txt in sorted(Path(directory).glob("*.txt")):
        try:
            out.append(_load_scenario(txt))
        except DatasetError as exc:
            if strict:
                raise
            log.warning("skipping scenario: %s", exc)
    return out


def sample_dataset_dir() -> Path:
    from importlib import resources

    return Path(str(resources.files("gameform").joinpath("data").joinpath("scenarios")))


@dataclass
class ExperimentConfig:
    """Settings for one experiment run, loadable from TOML.

    ``None`` fields take the per-experiment defaults in ``resolved()``.
    """

    experiment: int
    agents_per_game: Optional[int] = None
    rounds: Optional[int] = None
    match_maker: Optional[str] = None
    strategies: Optional[List[str]] = None
    games: Optional[List[str]] = None
    seed: int = 0
    dataset: Optional[str] = None
    output: str = "results"
    workers: int = 1
    validation_strategy: str = "tit_for_tat"
    backend: str = "replay"
    fixtures: Optional[str] = None
    llm: LlmParams = field(default_factory=LlmParams)

    def __post_init__(self) -> None:
        if self.experiment not in (1, 2, 3, 4):
            raise ValueError("experiment must be 1, 2, 3 or 4")

    def resolved(self) -> "ExperimentConfig":
        e = self.experiment
        defaults = {
            "agents_per_game": 5 if e != 3 else 1,
            "rounds": {1: 4, 2: 4, 3: 10, 4: 4}[e],
            "match_maker": "round_robin" if e == 3 else "clone",
            "strategies": list(STRATEGY_IDS) if e == 3 else [s for s in STRATEGY_IDS if s != EXP4_EXEMPLAR],
            "games": list(GAME_IDS) if e == 3 else ["PD"],
            "dataset": str(sample_dataset_dir()),
        }
        return replace(self, **{k: v for k, v in defaults.items() if getattr(self, k) is None})

    @classmethod
    def from_toml(cls, path, **overrides) -> "ExperimentConfig":
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
        # input paths in the file are relative to the file itself
        base = Path(path).resolve().parent
        for key in ("dataset", "fixtures"):
            for table in (data, data.get("llm", {})):
                if table.get(key) is not None:
                    table[key] = str(base / table[key])
        return cls.from_mapping(data, **overrides)

    @classmethod
    def from_mapping(cls, data: dict, **overrides) -> "ExperimentConfig":
        data = dict(data)
        llm = data.pop("llm", {}) or {}
        known = {f.name for f in fields(cls)} - {"llm"}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {', '.join(sorted(unknown))}")
        for key in ("backend", "fixtures"):
            if key in llm:
                data.setdefault(key, llm.pop(key))
        data.update({k: v for k, v in overrides.items() if v is not None})
        return cls(llm=LlmParams(**llm), **data)


@dataclass
class ReportRow:
    """One autoformalized agent for one scenario (or strategy description)."""

    item: str
    group: str
    agent: int = 0
    syntax_ok: bool = False
    runtime_ok: bool = False
    semantic_ok: bool = False
    attempts_used: int = 0
    status: str = ""
    totals: Optional[Tuple[int, int]] = None
    target_totals: Optional[Tuple[int, int]] = None
    manual_review: bool = False
    detail: str = ""

    def settled(self) -> "ReportRow":
        """Clear later-level flags whose earlier level failed."""
        self.runtime_ok = self.runtime_ok and self.syntax_ok
        self.semantic_ok = self.semantic_ok and self.runtime_ok
        return self

    def to_dict(self) -> dict:
        d = asdict(self)
        d["totals"] = list(self.totals) if self.totals else None
        d["target_totals"] = list(self.target_totals) if self.target_totals else None
        return d


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    rows: List[ReportRow] = field(default_factory=list)
    tournaments: Dict[str, TournamentResult] = field(default_factory=dict)
    matches: List[Tuple[dict, MatchResult]] = field(default_factory=list)
    attempt_logs: List[Tuple[dict, AttemptLog]] = field(default_factory=list)
    internal_errors: List[str] = field(default_factory=list)


def _formalize(bundle, backend, params: LlmParams, context: dict, result: ExperimentResult):
    """Run the attempt loop; backend failures become a failed row, not a crash."""
    try:
        attempt_log = autoformalize(bundle, backend, params)
    except BackendError as exc:
        attempt_log = exc.log or AttemptLog(status="backend_error", message=str(exc))
    result.attempt_logs.append((context, attempt_log))
    return attempt_log


def _run_scenarios(cfg: ExperimentConfig, backend: ChatBackend, result: ExperimentResult) -> None:
    numeric = cfg.experiment == 1
    strategy_src = strategy_source(cfg.validation_strategy).source
    for sc in load_dataset(cfg.dataset):
        if sc.numeric_payoffs != numeric:
            continue
        for agent in range(cfg.agents_per_game):
            ctx = {"scenario": sc.id, "agent": agent}
            row = ReportRow(sc.id, sc.game_type, agent)
            try:
                attempt_log = _formalize(game_bundle(sc.description), backend, replace(cfg.llm, sample=agent), ctx, result)
                row.attempts_used, row.status = attempt_log.attempts_used, attempt_log.status
                if attempt_log.succeeded:
                    row.syntax_ok = True
                    runtime = validate_runtime(attempt_log.code, strategy_src, cfg.rounds, scripted=True)
                    if runtime.match is not None:
                        result.matches.append((ctx, runtime.match))
                    row.runtime_ok = runtime.valid
                    if not runtime.valid:
                        row.detail = json.dumps(runtime.failure, sort_keys=True)
                    elif numeric:
                        sem = validate_exact(attempt_log.code, sc.targets, strategy_src)
                        row.semantic_ok, row.totals = sem.valid, sem.runtime.match.totals
                        row.target_totals = sc.targets.totals
                        if not sem.valid:
                            row.detail = json.dumps({"pairs": sem.pair_diffs, "totals": sem.total_diffs}, sort_keys=True)
                    else:
                        sem = validate_semantic_constraints(attempt_log.code, sc.game_type)
                        row.semantic_ok = sem.valid
                        if not sem.valid:
                            row.detail = json.dumps(sem.to_dict(), sort_keys=True)
                else:
                    row.detail = attempt_log.message or ""
            except Exception as exc:  # recorded, the run goes on
                log.exception("internal error on %s agent %d", sc.id, agent)
                result.internal_errors.append(f"{sc.id}/{agent}: {exc!r}")
                row.status, row.detail = "internal_error", repr(exc)
            result.rows.append(row.settled())


def _run_tournaments(cfg: ExperimentConfig, result: ExperimentResult) -> None:
    mm = {"round_robin": MatchMaker.round_robin(True), "clone": MatchMaker.clone()}[cfg.match_maker]
    for gid in cfg.games:
        game = canonical_game(gid)
        pool = [AgentSpec(s, game.source, strategy_source(s).source, s) for s in cfg.strategies]
        res = run_tournament(pool, cfg.rounds, mm, cfg.seed, workers=cfg.workers)
        result.tournaments[game.id] = res
        for err in res.errors:
            result.internal_errors.append(f"{game.id}: {err}")


def exp4_target(strategy_id: str, rounds: int = 4, seed: int = 0, game: str = "PD") -> Tuple[int, int]:
    """Totals of the reference strategy against the anti-tit-for-tat opponent."""
    src = canonical_game(game).source
    a = AgentSpec(strategy_id, src, strategy_source(strategy_id).source)
    b = AgentSpec(EXP4_OPPONENT, src, strategy_source(EXP4_OPPONENT).source)
    m = play_match(a, b, rounds, random.Random(seed))
    if m.error:
        raise RuntimeError(f"reference match failed: {m.error}")
    return m.totals


def _run_strategies(cfg: ExperimentConfig, backend: ChatBackend, result: ExperimentResult) -> None:
    pd = canonical_game("PD").source
    opponent = AgentSpec(EXP4_OPPONENT, pd, strategy_source(EXP4_OPPONENT).source)
    for sid in cfg.strategies:
        record = strategy_source(sid)
        target = exp4_target(sid, cfg.rounds, cfg.seed)
        for agent in range(cfg.agents_per_game):
            ctx = {"strategy": sid, "agent": agent}
            row = ReportRow(sid, sid, agent, target_totals=target, manual_review=sid in MANUAL_REVIEW)
            try:
                attempt_log = _formalize(strategy_bundle(record.nl_description, pd), backend, replace(cfg.llm, sample=agent), ctx, result)
                row.attempts_used, row.status = attempt_log.attempts_used, attempt_log.status
                if attempt_log.succeeded:
                    row.syntax_ok = True
                    me = AgentSpec(f"{sid}#{agent}", pd, attempt_log.code)
                    m = play_match(me, opponent, cfg.rounds, random.Random(cfg.seed))
                    result.matches.append((ctx, m))
                    row.runtime_ok = m.error is None and len(m.rounds) == cfg.rounds
                    if row.runtime_ok:
                        row.totals = m.totals
                        # a random strategy's totals vary by draw; it is
                        # flagged for manual review instead of scored
                        row.semantic_ok = row.totals == target and not row.manual_review
                    else:
                        row.detail = json.dumps(m.error, sort_keys=True)
                else:
                    row.detail = attempt_log.message or ""
            except Exception as exc:
                log.exception("internal error on strategy %s agent %d", sid, agent)
                result.internal_errors.append(f"{sid}/{agent}: {exc!r}")
                row.status, row.detail = "internal_error", repr(exc)
            result.rows.append(row.settled())


def run_experiment(cfg: ExperimentConfig, backend: Optional[ChatBackend] = None) -> ExperimentResult:
    cfg = cfg.resolved()
    result = ExperimentResult(cfg)
    if cfg.experiment == 3:
        _run_tournaments(cfg, result)
        return result
    if backend is None:
        backend = make_backend(cfg.backend, cfg.fixtures, model=cfg.llm.model)
    if cfg.experiment in (1, 2):
        _run_scenarios(cfg, backend, result)
    else:
        _run_strategies(cfg, backend, result)
    return result


def _pct(n: int, d: int) -> str:
    return f"{100 * n / d:.2f}" if d else ""


def summary_table(rows: Sequence[ReportRow]) -> List[dict]:
    """Correctness percentages per group and overall.

    Each level counts rows that passed it and every earlier level, so the
    percentages never increase from syntax to semantic.
    """
    groups: Dict[str, List[ReportRow]] = {}
    for r in rows:
        groups.setdefault(r.group, []).append(r)
    out = []
    for name, rs in list(sorted(groups.items())) + [("all", list(rows))]:
        n = len(rs)
        out.append({
            "group": name,
            "n": n,
            "syntactic_pct": _pct(sum(r.syntax_ok for r in rs), n),
            "runtime_pct": _pct(sum(r.runtime_ok for r in rs), n),
            "semantic_pct": _pct(sum(r.semantic_ok for r in rs), n),
            "manual_review": sum(r.manual_review for r in rs),
        })
    return out


def attempts_table(rows: Sequence[ReportRow], max_attempts: int = 5) -> List[dict]:
    """Share of rows by the attempt that first produced valid syntax."""
    groups: Dict[str, List[ReportRow]] = {}
    for r in rows:
        groups.setdefault(r.group, []).append(r)
    out = []
    for name, rs in list(sorted(groups.items())) + [("all", list(rows))]:
        rec = {"group": name, "n": len(rs)}
        for k in range(1, max_attempts + 1):
            rec[f"attempt_{k}"] = _pct(sum(r.syntax_ok and r.attempts_used == k for r in rs), len(rs))
        rec["failed"] = _pct(sum(not r.syntax_ok for r in rs), len(rs))
        out.append(rec)
    return out


def heatmap_table(tournaments: Dict[str, TournamentResult]) -> Tuple[List[str], List[dict]]:
    games = list(tournaments)
    strategies: List[str] = []
    for t in tournaments.values():
        strategies += [a for a in t.agents if a not in strategies]
    rows = []
    for s in strategies:
        rec = {"strategy": s}
        for g in games:
            v: Optional[Fraction] = tournaments[g].normalized.get(s)
            rec[g] = "" if v is None else f"{float(v):.4f}"
        rows.append(rec)
    return ["strategy"] + games, rows


def _write_csv(path: Path, header: Sequence[str], rows: Iterable[dict]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=list(header), lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow(r)


def emit_reports(result: ExperimentResult, out_dir) -> List[Path]:
    """Write summary.csv, attempts.csv, heatmap.csv and rounds.jsonl, plus
    rows.jsonl and attempts.jsonl with the per-agent details."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = result.rows
    written = []

    summary = summary_table(rows)
    p = out / "summary.csv"
    _write_csv(p, ["group", "n", "syntactic_pct", "runtime_pct", "semantic_pct", "manual_review"], summary)
    written.append(p)

    max_attempts = result.config.llm.max_attempts
    p = out / "attempts.csv"
    header = ["group", "n"] + [f"attempt_{k}" for k in range(1, max_attempts + 1)] + ["failed"]
    _write_csv(p, header, attempts_table(rows, max_attempts))
    written.append(p)

    p = out / "heatmap.csv"
    header, hrows = heatmap_table(result.tournaments)
    _write_csv(p, header, hrows)
    written.append(p)

    p = out / "rounds.jsonl"
    with open(p, "w", encoding="utf-8") as fh:
        for game, t in result.tournaments.items():
            for rec in t.round_logs():
                fh.write(json.dumps(dict(rec, game=game), sort_keys=True) + "\n")
        for ctx, m in result.matches:
            for r in m.rounds:
                rec = dict(r.to_dict(), row_agent=m.row_agent, col_agent=m.col_agent, **ctx)
                fh.write(json.dumps(rec, sort_keys=True) + "\n")
    written.append(p)

    p = out / "rows.jsonl"
    with open(p, "w", encoding="utf-8") as fh:
        for r in rows:
            fh.write(json.dumps(r.to_dict(), sort_keys=True) + "\n")
    written.append(p)

    p = out / "attempts.jsonl"
    with open(p, "w", encoding="utf-8") as fh:
        for ctx, a in result.attempt_logs:
            fh.write(json.dumps(dict(a.to_dict(), **ctx), sort_keys=True) + "\n")
    written.append(p)
    return written
