"""Seeded episodes, multi-algorithm benchmarks and CSV/JSON reporting."""

from __future__ import annotations

import copy
import csv
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .agents import (
    EXPLOITING,
    LEARNING,
    CredentialLookupPolicy,
    DqlAgent,
    DqlConfig,
    LearningParams,
    Policy,
    RandomPolicy,
    ScriptedPolicy,
    TabularQAgent,
    train_dql_agent,
    train_tabular,
)
from .env import action_index, enumerate_actions, reset, step
from .scenario import Scenario
from .search import OptimalPath, brute_force_optimal, dfs_optimal_length

log = logging.getLogger(__name__)

ALGORITHMS = ("random", "cred-lookup", "q", "exploit-q", "dql", "exploit-dql")
CHECKPOINTS = (10, 50, 100, 200)
CSV_FIELDS = ("algorithm", "seed", "episode", "step", "action_id", "succeeded", "reward", "cumulative_reward", "nodes_owned")

__all__ = [
    "ALGORITHMS",
    "CHECKPOINTS",
    "AlgorithmSummary",
    "BenchmarkReport",
    "EpisodeRecord",
    "OptimalPath",
    "StepRow",
    "brute_force_optimal",
    "dfs_optimal_length",
    "emit_csv",
    "emit_curves_csv",
    "make_policy",
    "read_csv",
    "run_benchmark",
    "run_episode",
    "summarize",
]


@dataclass(frozen=True)
class StepRow:
    step: int
    action_id: str
    succeeded: bool
    reward: float
    cumulative_reward: float
    nodes_owned: int


@dataclass
class EpisodeRecord:
    algorithm: str
    seed: int
    rows: list[StepRow] = field(default_factory=list)
    steps_to_full_ownership: int | None = None
    episode: int = 0
    initial_owned: int = 1

    def cumulative_at(self, step: int) -> float:
        """Cumulative reward after ``step`` steps; flat once the episode has ended."""
        if not self.rows or step <= 0:
            return 0.0
        return self.rows[min(step, len(self.rows)) - 1].cumulative_reward

    def owned_at(self, step: int) -> int:
        if not self.rows or step <= 0:
            return self.initial_owned
        return self.rows[min(step, len(self.rows)) - 1].nodes_owned


def run_episode(
    scenario: Scenario,
    policy: Policy,
    step_budget: int,
    seed: int,
    algorithm: str | None = None,
    episode: int = 0,
) -> EpisodeRecord:
    """Reset, then act/step/learn until terminal or out of budget."""
    rng = np.random.default_rng(seed)
    actions = enumerate_actions(scenario)
    n_nodes = len(scenario.nodes)
    state = reset(scenario, seed)
    record = EpisodeRecord(algorithm or policy.name, seed, episode=episode, initial_owned=len(state.owned))
    if len(state.owned) == n_nodes:
        record.steps_to_full_ownership = 0
    for _ in range(step_budget):
        if state.terminal:
            break
        a = policy.act(state, rng)
        nxt, result = step(scenario, state, actions[a])
        policy.learn(state, a, result, nxt)
        state = nxt
        record.rows.append(
            StepRow(
                state.step_count,
                actions[a].label(),
                result.succeeded,
                result.reward,
                state.cumulative_reward,
                len(state.owned),
            )
        )
        if record.steps_to_full_ownership is None and len(state.owned) == n_nodes:
            record.steps_to_full_ownership = state.step_count
    return record


def oracle_policy(scenario: Scenario, max_depth: int | None = None) -> ScriptedPolicy:
    path = brute_force_optimal(scenario, max_depth)
    if path is None or path.length == 0:
        raise ValueError(f"scenario {scenario.name!r} has no non-empty full-ownership sequence")
    index = action_index(scenario)
    return ScriptedPolicy([index[a] for a in path.actions])


# --- benchmark --------------------------------------------------------------


@dataclass
class AlgorithmSummary:
    algorithm: str
    episodes: int
    reached: int
    mean_steps: float
    min_steps: int
    max_steps: int
    checkpoint_rewards: dict[int, float]
    depth_curve: list[float]


@dataclass
class BenchmarkReport:
    scenario: str
    n_nodes: int
    budget: int
    checkpoints: tuple[int, ...]
    summaries: dict[str, AlgorithmSummary]
    records: list[EpisodeRecord] = field(default_factory=list)
    curves: dict[str, dict[int, list[float]]] = field(default_factory=dict)

    def to_dict(self, include_records: bool = False) -> dict:
        doc = {
            "scenario": self.scenario,
            "n_nodes": self.n_nodes,
            "budget": self.budget,
            "checkpoints": list(self.checkpoints),
            "summaries": {k: asdict(v) for k, v in self.summaries.items()},
        }
        if include_records:
            doc["records"] = [asdict(r) for r in self.records]
        return doc

    def to_json(self, include_records: bool = False) -> str:
        return json.dumps(self.to_dict(include_records), indent=2, sort_keys=True) + "\n"


def summarize(
    records: list[EpisodeRecord], n_nodes: int, budget: int, checkpoints: tuple[int, ...] = CHECKPOINTS
) -> dict[str, AlgorithmSummary]:
    """Per-algorithm aggregates; an episode that never owns everything counts as ``budget + 1`` steps."""
    by_algo: dict[str, list[EpisodeRecord]] = {}
    for r in records:
        by_algo.setdefault(r.algorithm, []).append(r)
    out = {}
    for algo, recs in by_algo.items():
        recs = sorted(recs, key=lambda r: (r.seed, r.episode))
        steps = [budget + 1 if r.steps_to_full_ownership is None else r.steps_to_full_ownership for r in recs]
        out[algo] = AlgorithmSummary(
            algorithm=algo,
            episodes=len(recs),
            reached=sum(r.steps_to_full_ownership is not None for r in recs),
            mean_steps=float(np.mean(steps)),
            min_steps=int(min(steps)),
            max_steps=int(max(steps)),
            checkpoint_rewards={c: float(np.mean([r.cumulative_at(c) for r in recs])) for c in checkpoints},
            depth_curve=[float(np.mean([r.owned_at(t) for r in recs])) for t in range(budget + 1)],
        )
    return out


def make_policy(
    name: str,
    scenario: Scenario,
    params: LearningParams,
    trained_q=None,
    trained_dql: DqlAgent | None = None,
) -> Policy:
    """Evaluation policy by name; learning variants keep updating with epsilon fixed at its final value."""
    if name == "random":
        return RandomPolicy(scenario)
    if name == "cred-lookup":
        return CredentialLookupPolicy(scenario)
    if name == "oracle":
        return oracle_policy(scenario)
    if name in ("q", "exploit-q"):
        agent = TabularQAgent(scenario, params, copy.deepcopy(trained_q))
    elif name in ("dql", "exploit-dql"):
        if trained_dql is None:
            raise ValueError(f"{name} needs a trained network")
        agent = copy.deepcopy(trained_dql)
    else:
        raise ValueError(f"unknown algorithm {name!r}")
    agent.mode = EXPLOITING if name.startswith("exploit-") else LEARNING
    agent.epsilon = params.epsilon_end
    return agent


def _run_seed(args) -> tuple[list[EpisodeRecord], dict[str, list[float]]]:
    scenario, algorithms, seed, budget, params, config = args
    q = dql = None
    curves: dict[str, list[float]] = {}
    if {"q", "exploit-q"} & set(algorithms):
        q, curves["q"] = train_tabular(scenario, params, seed)
    if {"dql", "exploit-dql"} & set(algorithms):
        dql, curves["dql"] = train_dql_agent(scenario, params, config, seed)
    records = [
        run_episode(scenario, make_policy(name, scenario, params, q, dql), budget, seed, algorithm=name)
        for name in algorithms
    ]
    return records, curves


def run_benchmark(
    scenario: Scenario,
    algorithms: list[str] | tuple[str, ...] = ALGORITHMS,
    seeds: list[int] | range = range(20),
    budget: int = 200,
    params: LearningParams = LearningParams(),
    config: DqlConfig = DqlConfig(),
    checkpoints: tuple[int, ...] = CHECKPOINTS,
    workers: int = 1,
) -> BenchmarkReport:
    """Train learners once per seed, evaluate every requested policy, aggregate."""
    algorithms = list(algorithms)
    seeds = list(seeds)
    if not algorithms:
        raise ValueError("need at least one algorithm")
    if not seeds:
        raise ValueError("need at least one seed")
    for name in algorithms:
        if name not in ALGORITHMS and name != "oracle":
            raise ValueError(f"unknown algorithm {name!r}")
    jobs = [(scenario, algorithms, s, budget, params, config) for s in seeds]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_seed, jobs))
    else:
        results = [_run_seed(job) for job in jobs]

    records: list[EpisodeRecord] = []
    curves: dict[str, dict[int, list[float]]] = {}
    for seed, (recs, seed_curves) in zip(seeds, results):
        records.extend(recs)
        for learner, curve in seed_curves.items():
            curves.setdefault(learner, {})[seed] = curve
        log.info("seed %d done", seed)
    n_nodes = len(scenario.nodes)
    return BenchmarkReport(
        scenario=scenario.name,
        n_nodes=n_nodes,
        budget=budget,
        checkpoints=tuple(checkpoints),
        summaries=summarize(records, n_nodes, budget, tuple(checkpoints)),
        records=records,
        curves=curves,
    )


# --- CSV --------------------------------------------------------------------


def _fmt(x: float) -> str:
    return str(int(x)) if float(x).is_integer() else repr(float(x))


def emit_csv(records: list[EpisodeRecord] | BenchmarkReport, path) -> None:
    if isinstance(records, BenchmarkReport):
        records = records.records
    with open(path, "w", newline="", encoding="utf-8") as fh:
        write_csv(records, fh)


def write_csv(records: list[EpisodeRecord], fh) -> None:
    writer = csv.writer(fh, lineterminator="\r\n")
    writer.writerow(CSV_FIELDS)
    for rec in records:
        for row in rec.rows:
            writer.writerow(
                [
                    rec.algorithm,
                    rec.seed,
                    rec.episode,
                    row.step,
                    row.action_id,
                    "true" if row.succeeded else "false",
                    _fmt(row.reward),
                    _fmt(row.cumulative_reward),
                    row.nodes_owned,
                ]
            )


def read_csv(path, n_nodes: int, initial_owned: int = 1) -> list[EpisodeRecord]:
    """Rebuild episode records from an emitted CSV (episodes without rows are not representable)."""
    records: dict[tuple[str, int, int], EpisodeRecord] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != CSV_FIELDS:
            raise ValueError(f"{path}: unexpected header {reader.fieldnames}")
        for line in reader:
            key = (line["algorithm"], int(line["seed"]), int(line["episode"]))
            rec = records.get(key)
            if rec is None:
                rec = records[key] = EpisodeRecord(key[0], key[1], episode=key[2], initial_owned=initial_owned)
            row = StepRow(
                int(line["step"]),
                line["action_id"],
                line["succeeded"] == "true",
                float(line["reward"]),
                float(line["cumulative_reward"]),
                int(line["nodes_owned"]),
            )
            rec.rows.append(row)
            if rec.steps_to_full_ownership is None and row.nodes_owned == n_nodes:
                rec.steps_to_full_ownership = row.step
    return list(records.values())


def emit_curves_csv(curves: dict[str, dict[int, list[float]]], path) -> None:
    """Training curves: one row per (learner, seed, episode)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\r\n")
        writer.writerow(("algorithm", "seed", "episode", "cumulative_reward"))
        for learner in sorted(curves):
            for seed in sorted(curves[learner]):
                for ep, value in enumerate(curves[learner][seed]):
                    writer.writerow((learner, seed, ep, _fmt(value)))
