"""Attack-graph simulation: action space, state transitions and reward accounting."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import NamedTuple, Union

import numpy as np

from .scenario import (
    LOCAL,
    REMOTE,
    CollectData,
    DiscoverNodes,
    LeakCredential,
    Scenario,
    ScenarioError,
    errors,
    validate,
)


@dataclass(frozen=True)
class LocalExploit:
    node: str
    vuln_id: str

    def label(self) -> str:
        return f"local:{self.node}:{self.vuln_id}"


@dataclass(frozen=True)
class RemoteExploit:
    target: str
    vuln_id: str

    def label(self) -> str:
        return f"remote:{self.target}:{self.vuln_id}"


@dataclass(frozen=True)
class Connect:
    target: str
    port: str
    credential_id: str

    def label(self) -> str:
        return f"connect:{self.target}:{self.port}:{self.credential_id}"


Action = Union[LocalExploit, RemoteExploit, Connect]


CONNECT_COST = 1.0


class InvalidActionError(ValueError):
    """The action is not part of the scenario's action space."""


class EpisodeOverError(RuntimeError):
    pass


@dataclass
class EnvState:
    owned: set[str]
    discovered: set[str]
    credentials: set[str] = field(default_factory=set)
    executed_vulns: set[str] = field(default_factory=set)
    collected: set[str] = field(default_factory=set)
    step_count: int = 0
    cumulative_reward: float = 0.0
    terminal: bool = False
    rng_seed: int = 0

    def copy(self) -> EnvState:
        return replace(
            self,
            owned=set(self.owned),
            discovered=set(self.discovered),
            credentials=set(self.credentials),
            executed_vulns=set(self.executed_vulns),
            collected=set(self.collected),
        )


@dataclass(frozen=True)
class StepResult:
    reward: float
    succeeded: bool
    newly_discovered: tuple[str, ...] = ()
    newly_owned: tuple[str, ...] = ()
    leaked_credentials: tuple[str, ...] = ()
    terminal: bool = False


class ConquestMetrics(NamedTuple):
    steps: int
    nodes_owned: int
    all_owned: bool


def reset(scenario: Scenario, seed: int = 0) -> EnvState:
    """Fresh episode: only the entry node is owned and discovered."""
    bad = errors(validate(scenario, check_winnable=False))
    if bad:
        raise ScenarioError(bad[0].path, bad[0].message)
    entry = scenario.entry_node
    return EnvState(
        owned={entry},
        discovered={entry},
        terminal=len(scenario.nodes) == 1,
        rng_seed=seed,
    )


class _Compiled:
    """Lookups derived once per scenario instance."""

    def __init__(self, scenario: Scenario):
        local: list[Action] = []
        remote: list[Action] = []
        for node_id, v in scenario.vulnerabilities:
            if v.locality == LOCAL:
                local.append(LocalExploit(node_id, v.id))
            elif v.locality == REMOTE:
                remote.append(RemoteExploit(node_id, v.id))
        connect: list[Action] = [
            Connect(target, port, cred) for cred, (target, port) in scenario.credentials.items()
        ]
        self.actions: tuple[Action, ...] = tuple(local + remote + connect)
        self.index = {a: i for i, a in enumerate(self.actions)}
        self.vulns = {v.id: (node_id, v) for node_id, v in scenario.vulnerabilities}
        nodes = tuple(n.id for n in scenario.nodes)
        self.layout = (
            nodes,
            nodes,
            tuple(scenario.credentials),
            tuple(v.id for _, v in scenario.vulnerabilities),
            scenario.collect_vulns,
        )


def _compiled(scenario: Scenario) -> _Compiled:
    # Scenario is frozen; stash the derived tables in its instance dict
    c = scenario.__dict__.get("_compiled")
    if c is None:
        c = scenario.__dict__["_compiled"] = _Compiled(scenario)
    return c


def enumerate_actions(scenario: Scenario) -> tuple[Action, ...]:
    """Locals (node order, then vuln order), then remotes, then one connect per leaked credential."""
    return _compiled(scenario).actions


def action_index(scenario: Scenario) -> dict[Action, int]:
    return _compiled(scenario).index


def step(scenario: Scenario, state: EnvState, action: Action) -> tuple[EnvState, StepResult]:
    """Apply ``action`` and return the successor state (the input is left untouched).

    Actions whose preconditions fail are in-game failures costing the action
    cost; actions outside the scenario's action space raise InvalidActionError.
    """
    compiled = _compiled(scenario)
    if action not in compiled.index:
        raise InvalidActionError(f"action {action!r} is not in the scenario's action space")
    if state.terminal:
        raise EpisodeOverError("episode already terminated; call reset()")

    new = state.copy()
    new.step_count += 1

    if isinstance(action, Connect):
        cost = CONNECT_COST
        target = scenario.node(action.target)
        ok = (
            bool(state.owned)
            and action.credential_id in state.credentials
            and scenario.credentials.get(action.credential_id) == (action.target, action.port)
            and action.port in target.services
            and action.port in target.firewall_allow
        )
        if not ok:
            return _fail(new, cost)
        reward = -cost
        newly_disc: list[str] = []
        newly_owned: list[str] = []
        if action.target not in new.discovered:
            new.discovered.add(action.target)
            newly_disc.append(action.target)
        if action.target not in new.owned:
            new.owned.add(action.target)
            newly_owned.append(action.target)
            reward += target.value
        terminal = len(new.owned) == len(scenario.nodes)
        return _finish(new, reward, terminal, newly_disc, newly_owned, [])

    node_id, vuln = compiled.vulns[action.vuln_id]
    cost = vuln.cost
    if isinstance(action, LocalExploit):
        ok = action.node in state.owned and vuln.locality == LOCAL
    else:
        target = scenario.node(action.target)
        ok = (
            bool(state.owned)
            and action.target in state.discovered
            and vuln.locality == REMOTE
            and vuln.via_service in target.services
            and vuln.via_service in target.firewall_allow
        )
    if not ok:
        return _fail(new, cost)

    reward = -cost
    newly_disc = []
    leaked: list[str] = []
    new.executed_vulns.add(vuln.id)
    o = vuln.outcome
    if isinstance(o, LeakCredential):
        if o.credential_id not in new.credentials:
            new.credentials.add(o.credential_id)
            leaked.append(o.credential_id)
        if o.target_node not in new.discovered:
            new.discovered.add(o.target_node)
            newly_disc.append(o.target_node)
    elif isinstance(o, DiscoverNodes):
        for nid in o.node_ids:
            if nid not in new.discovered:
                new.discovered.add(nid)
                newly_disc.append(nid)
    elif isinstance(o, CollectData) and vuln.id not in new.collected:
        new.collected.add(vuln.id)
        reward += o.reward
    terminal = vuln.terminal or len(new.owned) == len(scenario.nodes)
    return _finish(new, reward, terminal, newly_disc, [], leaked)


def _fail(new: EnvState, cost: float) -> tuple[EnvState, StepResult]:
    new.cumulative_reward -= cost
    return new, StepResult(reward=-cost, succeeded=False, terminal=False)


def _finish(new, reward, terminal, discovered, owned, leaked) -> tuple[EnvState, StepResult]:
    new.cumulative_reward += reward
    new.terminal = terminal
    return new, StepResult(
        reward=reward,
        succeeded=True,
        newly_discovered=tuple(discovered),
        newly_owned=tuple(owned),
        leaked_credentials=tuple(leaked),
        terminal=terminal,
    )


def conquest_metrics(scenario: Scenario, state: EnvState) -> ConquestMetrics:
    return ConquestMetrics(state.step_count, len(state.owned), len(state.owned) == len(scenario.nodes))


# --- state encoding ---------------------------------------------------------


def key_width(scenario: Scenario) -> int:
    return sum(len(group) for group in _compiled(scenario).layout)


def _bits(scenario: Scenario, state: EnvState) -> list[int]:
    sets = (state.owned, state.discovered, state.credentials, state.executed_vulns, state.collected)
    return [int(name in s) for names, s in zip(_compiled(scenario).layout, sets) for name in names]


def state_key(scenario: Scenario, state: EnvState) -> int:
    """Pack owned/discovered/credential/executed/collected flags into one integer.

    Bit i corresponds to position i of ``encode_features``.
    """
    key = 0
    for i, b in enumerate(_bits(scenario, state)):
        key |= b << i
    return key


def encode_features(scenario: Scenario, state: EnvState) -> np.ndarray:
    return np.array(_bits(scenario, state), dtype=float)
