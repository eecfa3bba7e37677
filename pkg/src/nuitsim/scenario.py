"""Declarative attack-graph scenarios: types, the bundled NUIT baseline, JSON I/O and validation."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Any, Union

LOCAL = "local"
REMOTE = "remote"


@dataclass(frozen=True)
class LeakCredential:
    """Grants ``credential_id`` and discovers ``target_node``."""

    credential_id: str
    target_node: str
    port: str


@dataclass(frozen=True)
class DiscoverNodes:
    node_ids: tuple[str, ...]


@dataclass(frozen=True)
class CollectData:
    """One-time bonus reward."""

    reward: float = 0.0


Outcome = Union[LeakCredential, DiscoverNodes, CollectData]


@dataclass(frozen=True)
class VulnerabilitySpec:
    id: str
    locality: str
    outcome: Outcome
    via_service: str | None = None
    cost: float = 1.0
    terminal: bool = False


@dataclass(frozen=True)
class NodeSpec:
    id: str
    value: float
    services: tuple[str, ...] = ()
    firewall_allow: tuple[str, ...] = ()
    vulnerabilities: tuple[VulnerabilitySpec, ...] = ()


@dataclass(frozen=True)
class Violation:
    path: str
    message: str
    severity: str = "error"

    def __str__(self) -> str:
        return f"{self.severity}: {self.path}: {self.message}"


class ScenarioError(ValueError):
    """A scenario document or object failed to parse or validate."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path
        self.message = message


@dataclass(frozen=True)
class Scenario:
    name: str
    entry_node: str
    nodes: tuple[NodeSpec, ...]

    @cached_property
    def node_index(self) -> dict[str, int]:
        return {n.id: i for i, n in enumerate(self.nodes)}

    @cached_property
    def node_by_id(self) -> dict[str, NodeSpec]:
        return {n.id: n for n in self.nodes}

    @cached_property
    def vulnerabilities(self) -> tuple[tuple[str, VulnerabilitySpec], ...]:
        """All (node id, vulnerability) pairs in declaration order."""
        return tuple((n.id, v) for n in self.nodes for v in n.vulnerabilities)

    @cached_property
    def credentials(self) -> dict[str, tuple[str, str]]:
        """credential id -> (target node, port), in leak declaration order."""
        out: dict[str, tuple[str, str]] = {}
        for _, v in self.vulnerabilities:
            if isinstance(v.outcome, LeakCredential) and v.outcome.credential_id not in out:
                out[v.outcome.credential_id] = (v.outcome.target_node, v.outcome.port)
        return out

    @cached_property
    def collect_vulns(self) -> tuple[str, ...]:
        return tuple(v.id for _, v in self.vulnerabilities if isinstance(v.outcome, CollectData))

    def node(self, node_id: str) -> NodeSpec:
        return self.node_by_id[node_id]


def baseline_nuit() -> Scenario:
    """The five-node inaudible-attack chain: Echo Dot -> email -> iPhone -> door -> classified laptop."""
    https, physical = "HTTPS", "physical"
    return Scenario(
        name="baseline_nuit",
        entry_node="echo_dot",
        nodes=(
            NodeSpec(
                "echo_dot",
                0,
                services=(),
                firewall_allow=(https,),
                vulnerabilities=(
                    VulnerabilitySpec(
                        "malicious_alexa_skill",
                        LOCAL,
                        LeakCredential("email_creds", "email_account", https),
                    ),
                ),
            ),
            NodeSpec(
                "email_account",
                500,
                services=(https,),
                firewall_allow=(https,),
                vulnerabilities=(
                    VulnerabilitySpec("find_device_type_in_email", LOCAL, DiscoverNodes(("iphone",))),
                    VulnerabilitySpec("collect_data_from_emails", LOCAL, CollectData(0)),
                ),
            ),
            NodeSpec(
                "iphone",
                1000,
                services=(https,),
                firewall_allow=(https,),
                vulnerabilities=(
                    VulnerabilitySpec(
                        "nuit1_phishing_email",
                        REMOTE,
                        LeakCredential("iphone_control", "iphone", https),
                        via_service=https,
                    ),
                    VulnerabilitySpec(
                        "unlock_door_via_nuit",
                        LOCAL,
                        LeakCredential("door_open", "door", physical),
                    ),
                ),
            ),
            NodeSpec(
                "door",
                1000,
                services=(physical,),
                firewall_allow=(physical,),
                vulnerabilities=(
                    VulnerabilitySpec(
                        "steal_classified_laptop",
                        LOCAL,
                        LeakCredential("physical_possession", "classified_machine", physical),
                    ),
                ),
            ),
            NodeSpec(
                "classified_machine",
                5000,
                services=(physical,),
                firewall_allow=(physical,),
                vulnerabilities=(
                    VulnerabilitySpec("access_state_secrets", LOCAL, CollectData(0), terminal=True),
                ),
            ),
        ),
    )


# --- validation -------------------------------------------------------------


def validate(scenario: Scenario, check_winnable: bool = True) -> list[Violation]:
    """Return every invariant violation; an unwinnable graph is a warning only."""
    out: list[Violation] = []
    ids = [n.id for n in scenario.nodes]
    known_ids = set(ids)
    known_ports = {p for n in scenario.nodes for p in n.services}

    if not scenario.nodes:
        out.append(Violation("nodes", "scenario has no nodes"))
    if scenario.entry_node not in known_ids:
        out.append(Violation("entry_node", f"unknown node {scenario.entry_node!r}"))

    seen_nodes: set[str] = set()
    seen_vulns: dict[str, str] = {}
    leaked: dict[str, str] = {}
    for i, node in enumerate(scenario.nodes):
        p = f"nodes[{i}]"
        if not node.id:
            out.append(Violation(f"{p}.id", "node id is empty"))
        elif node.id in seen_nodes:
            out.append(Violation(f"{p}.id", f"duplicate node id {node.id!r}"))
        seen_nodes.add(node.id)
        if not math.isfinite(node.value) or node.value < 0:
            out.append(Violation(f"{p}.value", f"node value must be finite and >= 0, got {node.value}"))
        for j, port in enumerate(node.firewall_allow):
            if port not in known_ports:
                out.append(Violation(f"{p}.firewall_allow[{j}]", f"unknown port {port!r}"))

        for k, v in enumerate(node.vulnerabilities):
            vp = f"{p}.vulnerabilities[{k}]"
            if not v.id:
                out.append(Violation(f"{vp}.id", "vulnerability id is empty"))
            elif v.id in seen_vulns:
                out.append(Violation(f"{vp}.id", f"duplicate vulnerability id {v.id!r}"))
            seen_vulns[v.id] = vp
            if v.locality == LOCAL:
                if v.via_service is not None:
                    out.append(Violation(f"{vp}.via_service", "local vulnerability must not name a service"))
            elif v.locality == REMOTE:
                if v.via_service is None:
                    out.append(Violation(f"{vp}.via_service", "remote vulnerability needs a service"))
                elif v.via_service not in known_ports:
                    out.append(Violation(f"{vp}.via_service", f"unknown port {v.via_service!r}"))
            else:
                out.append(Violation(f"{vp}.locality", f"expected 'local' or 'remote', got {v.locality!r}"))
            if not math.isfinite(v.cost) or v.cost < 0:
                out.append(Violation(f"{vp}.cost", f"cost must be finite and >= 0, got {v.cost}"))

            o = v.outcome
            op = f"{vp}.outcome"
            if isinstance(o, LeakCredential):
                if o.target_node not in known_ids:
                    out.append(Violation(f"{op}.target_node", f"dangling node reference {o.target_node!r}"))
                elif o.port not in scenario.node(o.target_node).services:
                    out.append(
                        Violation(f"{op}.port", f"node {o.target_node!r} does not offer service {o.port!r}")
                    )
                if o.credential_id in leaked:
                    out.append(
                        Violation(
                            f"{op}.credential_id",
                            f"duplicate credential {o.credential_id!r} (also leaked at {leaked[o.credential_id]})",
                        )
                    )
                else:
                    leaked[o.credential_id] = op
            elif isinstance(o, DiscoverNodes):
                for m, nid in enumerate(o.node_ids):
                    if nid not in known_ids:
                        out.append(Violation(f"{op}.node_ids[{m}]", f"dangling node reference {nid!r}"))
            elif isinstance(o, CollectData):
                if not math.isfinite(o.reward) or o.reward < 0:
                    out.append(Violation(f"{op}.reward", f"reward must be finite and >= 0, got {o.reward}"))
            else:
                out.append(Violation(op, f"unknown outcome {o!r}"))

    if check_winnable and not out:
        from .search import brute_force_optimal

        if brute_force_optimal(scenario) is None:
            out.append(Violation("nodes", "no action sequence owns every node", severity="warning"))
    return out


def errors(violations: list[Violation]) -> list[Violation]:
    return [v for v in violations if v.severity == "error"]


# --- JSON -------------------------------------------------------------------

_SCENARIO_KEYS = {"name", "entry_node", "nodes"}
_NODE_KEYS = {"id", "value", "services", "firewall_allow", "vulnerabilities"}
_VULN_KEYS = {"id", "locality", "via_service", "cost", "terminal", "outcome"}
_OUTCOME_KEYS = {
    "leak_credential": {"kind", "credential_id", "target_node", "port"},
    "discover_nodes": {"kind", "node_ids"},
    "collect_data": {"kind", "reward"},
}


def _expect(obj: Any, kind: type | tuple, path: str) -> Any:
    if kind in (int, float, (int, float)) and isinstance(obj, bool):
        raise ScenarioError(path, f"expected a number, got {obj!r}")
    if not isinstance(obj, kind):
        names = kind.__name__ if isinstance(kind, type) else "number"
        raise ScenarioError(path, f"expected {names}, got {type(obj).__name__}")
    return obj


def _check_keys(obj: dict, allowed: set[str], required: set[str], path: str) -> None:
    for key in obj:
        if key not in allowed:
            raise ScenarioError(f"{path}.{key}", "unknown field")
    for key in sorted(required):
        if key not in obj:
            raise ScenarioError(f"{path}.{key}", "missing required field")


def _str_list(obj: Any, path: str) -> tuple[str, ...]:
    _expect(obj, list, path)
    return tuple(_expect(s, str, f"{path}[{i}]") for i, s in enumerate(obj))


def _parse_outcome(obj: Any, path: str) -> Outcome:
    _expect(obj, dict, path)
    kind = obj.get("kind")
    if kind not in _OUTCOME_KEYS:
        raise ScenarioError(f"{path}.kind", f"unknown outcome kind {kind!r}")
    allowed = _OUTCOME_KEYS[kind]
    required = allowed if kind != "collect_data" else {"kind"}
    _check_keys(obj, allowed, required, path)
    if kind == "leak_credential":
        return LeakCredential(
            _expect(obj["credential_id"], str, f"{path}.credential_id"),
            _expect(obj["target_node"], str, f"{path}.target_node"),
            _expect(obj["port"], str, f"{path}.port"),
        )
    if kind == "discover_nodes":
        return DiscoverNodes(_str_list(obj["node_ids"], f"{path}.node_ids"))
    return CollectData(float(_expect(obj.get("reward", 0), (int, float), f"{path}.reward")))


def _parse_vuln(obj: Any, path: str) -> VulnerabilitySpec:
    _expect(obj, dict, path)
    _check_keys(obj, _VULN_KEYS, {"id", "locality", "outcome"}, path)
    via = obj.get("via_service")
    return VulnerabilitySpec(
        id=_expect(obj["id"], str, f"{path}.id"),
        locality=_expect(obj["locality"], str, f"{path}.locality"),
        outcome=_parse_outcome(obj["outcome"], f"{path}.outcome"),
        via_service=None if via is None else _expect(via, str, f"{path}.via_service"),
        cost=float(_expect(obj.get("cost", 1), (int, float), f"{path}.cost")),
        terminal=_expect(obj.get("terminal", False), bool, f"{path}.terminal"),
    )


def _parse_node(obj: Any, path: str) -> NodeSpec:
    _expect(obj, dict, path)
    _check_keys(obj, _NODE_KEYS, {"id", "value"}, path)
    vulns = _expect(obj.get("vulnerabilities", []), list, f"{path}.vulnerabilities")
    return NodeSpec(
        id=_expect(obj["id"], str, f"{path}.id"),
        value=float(_expect(obj["value"], (int, float), f"{path}.value")),
        services=_str_list(obj.get("services", []), f"{path}.services"),
        firewall_allow=_str_list(obj.get("firewall_allow", []), f"{path}.firewall_allow"),
        vulnerabilities=tuple(_parse_vuln(v, f"{path}.vulnerabilities[{i}]") for i, v in enumerate(vulns)),
    )


def scenario_from_dict(doc: Any, check: bool = True) -> Scenario:
    _expect(doc, dict, "$")
    _check_keys(doc, _SCENARIO_KEYS, _SCENARIO_KEYS, "$")
    nodes = _expect(doc["nodes"], list, "$.nodes")
    scenario = Scenario(
        name=_expect(doc["name"], str, "$.name"),
        entry_node=_expect(doc["entry_node"], str, "$.entry_node"),
        nodes=tuple(_parse_node(n, f"$.nodes[{i}]") for i, n in enumerate(nodes)),
    )
    if check:
        bad = errors(validate(scenario, check_winnable=False))
        if bad:
            raise ScenarioError(f"$.{bad[0].path}", bad[0].message)
    return scenario


def parse_scenario(text: str, check: bool = True) -> Scenario:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError("$", f"malformed JSON: {exc}") from None
    return scenario_from_dict(doc, check)


def load_scenario(text: str) -> Scenario:
    """Parse a scenario document, applying defaults (cost 1, terminal false, collect reward 0).

    Raises ScenarioError carrying a JSON path to the first offending element.
    """
    return parse_scenario(text)


def _num(x: float) -> int | float:
    return int(x) if float(x).is_integer() else x


def _outcome_dict(o: Outcome) -> dict:
    if isinstance(o, LeakCredential):
        return {"kind": "leak_credential", "credential_id": o.credential_id, "target_node": o.target_node, "port": o.port}
    if isinstance(o, DiscoverNodes):
        return {"kind": "discover_nodes", "node_ids": list(o.node_ids)}
    return {"kind": "collect_data", "reward": _num(o.reward)}


def scenario_to_dict(scenario: Scenario) -> dict:
    nodes = []
    for n in scenario.nodes:
        vulns = []
        for v in n.vulnerabilities:
            d: dict[str, Any] = {"id": v.id, "locality": v.locality}
            if v.via_service is not None:
                d["via_service"] = v.via_service
            d["cost"] = _num(v.cost)
            d["terminal"] = v.terminal
            d["outcome"] = _outcome_dict(v.outcome)
            vulns.append(d)
        nodes.append(
            {
                "id": n.id,
                "value": _num(n.value),
                "services": list(n.services),
                "firewall_allow": list(n.firewall_allow),
                "vulnerabilities": vulns,
            }
        )
    return {"name": scenario.name, "entry_node": scenario.entry_node, "nodes": nodes}


def dump_scenario(scenario: Scenario) -> str:
    return json.dumps(scenario_to_dict(scenario), indent=2) + "\n"


def resolve_scenario(spec: str) -> Scenario:
    """``"baseline"`` or a path to a scenario file."""
    if spec == "baseline":
        return baseline_nuit()
    with open(spec, encoding="utf-8") as fh:
        return load_scenario(fh.read())
