"""Exhaustive optimal-path search over the attack graph."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .env import Action, EnvState, enumerate_actions, reset, state_key, step
from .scenario import Scenario


@dataclass(frozen=True)
class OptimalPath:
    actions: tuple[Action, ...]
    length: int
    final_reward: float


def _successors(scenario: Scenario, state: EnvState):
    key = state_key(scenario, state)
    for i, action in enumerate(enumerate_actions(scenario)):
        nxt, _ = step(scenario, state, action)
        nxt_key = state_key(scenario, nxt)
        # self-loops never shorten a path
        if nxt_key != key:
            yield i, nxt, nxt_key


def _owns_all(scenario: Scenario, state: EnvState) -> bool:
    return len(state.owned) == len(scenario.nodes)


def brute_force_optimal(scenario: Scenario, max_depth: int | None = None) -> OptimalPath | None:
    """Breadth-first search for a minimal-length full-ownership action sequence.

    States already reached at a shallower depth are dropped. Among minimal
    sequences the highest final reward wins, then the lexicographically
    smallest sequence of action indices. Returns None when no sequence of at
    most ``max_depth`` actions exists (``None`` depth means unbounded).
    """
    actions = enumerate_actions(scenario)
    start = reset(scenario)
    if _owns_all(scenario, start):
        return OptimalPath((), 0, start.cumulative_reward)

    k0 = state_key(scenario, start)
    seen = {k0}
    # key -> (state, path of action indices); path order within a level is lexicographic
    frontier: dict[int, tuple[EnvState, tuple[int, ...]]] = {k0: (start, ())}
    depth = 0
    while frontier and (max_depth is None or depth < max_depth):
        depth += 1
        level: dict[int, tuple[EnvState, tuple[int, ...]]] = {}
        for state, path in frontier.values():
            if state.terminal:
                continue
            for i, nxt, key in _successors(scenario, state):
                if key in seen:
                    continue
                cand = (nxt, path + (i,))
                best = level.get(key)
                if best is None or (-nxt.cumulative_reward, cand[1]) < (-best[0].cumulative_reward, best[1]):
                    level[key] = cand
        goals = [(s, p) for s, p in level.values() if _owns_all(scenario, s)]
        if goals:
            s, p = min(goals, key=lambda sp: (-sp[0].cumulative_reward, sp[1]))
            return OptimalPath(tuple(actions[i] for i in p), len(p), s.cumulative_reward)
        seen.update(level)
        frontier = dict(sorted(level.items(), key=lambda kv: kv[1][1]))
    return None


def dfs_optimal_length(scenario: Scenario) -> tuple[int, float] | None:
    """Independent check: memoised depth-first recursion over the monotone state DAG.

    Returns (minimal full-ownership length, best final reward at that length)
    or None when full ownership is unreachable.
    """
    memo: dict[int, tuple[float, float]] = {}

    def solve(state: EnvState) -> tuple[float, float]:
        # (steps still needed, reward still to collect); inf when hopeless
        if _owns_all(scenario, state):
            return 0, 0.0
        if state.terminal:
            return math.inf, 0.0
        key = state_key(scenario, state)
        if key in memo:
            return memo[key]
        best = (math.inf, -math.inf)
        for _, nxt, _ in _successors(scenario, state):
            n, r = solve(nxt)
            gained = nxt.cumulative_reward - state.cumulative_reward
            cand = (n + 1, r + gained)
            if cand[0] < best[0] or (cand[0] == best[0] and cand[1] > best[1]):
                best = cand
        memo[key] = best
        return best

    start = reset(scenario)
    n, r = solve(start)
    if math.isinf(n):
        return None
    return int(n), start.cumulative_reward + r
