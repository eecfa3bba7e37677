"""Attacker policies: random search, credential-cache lookup, tabular Q-learning and deep Q-learning."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .env import Connect, EnvState, StepResult, encode_features, enumerate_actions, key_width, reset, state_key, step
from .nn import Mlp, ReplayBuffer, Transition, bellman_targets, forward, sgd_step
from .scenario import Scenario

LEARNING = "learning"
EXPLOITING = "exploiting"


@dataclass(frozen=True)
class LearningParams:
    # full-replacement updates suit the deterministic dynamics; the high
    # exploration floor keeps zero-reward side branches from starving the
    # optimal branch of updates
    alpha: float = 1.0
    gamma: float = 0.95
    epsilon_start: float = 1.0
    epsilon_end: float = 0.6
    epsilon_decay_episodes: int | None = None  # None: first 80% of episodes
    episodes: int = 500
    step_budget: int = 100

    def __post_init__(self):
        if not 0 < self.alpha <= 1:
            raise ValueError(f"alpha must lie in (0, 1], got {self.alpha}")
        if not 0 <= self.gamma < 1:
            raise ValueError(f"gamma must lie in [0, 1), got {self.gamma}")
        if not 1 >= self.epsilon_start >= self.epsilon_end >= 0:
            raise ValueError("need 1 >= epsilon_start >= epsilon_end >= 0")
        if self.episodes < 0 or self.step_budget < 0:
            raise ValueError("episodes and step_budget must be non-negative")

    def epsilon(self, episode: int) -> float:
        """Linear decay from epsilon_start to epsilon_end, then flat."""
        span = self.epsilon_decay_episodes
        if span is None:
            span = int(0.8 * self.episodes)
        if span <= 0:
            return self.epsilon_end
        frac = min(1.0, episode / span)
        return self.epsilon_start + frac * (self.epsilon_end - self.epsilon_start)


@dataclass(frozen=True)
class DqlConfig:
    hidden: tuple[int, ...] = (64, 64)
    lr: float = 0.03
    buffer_capacity: int = 10_000
    batch_size: int = 32
    target_sync: int = 50
    # targets are regressed in reward units times this factor; argmax is unaffected
    reward_scale: float = 1e-3
    loss_ceiling: float = 1e6


# --- primitive policies -----------------------------------------------------


def random_policy(n_actions: int, rng: np.random.Generator) -> int:
    if n_actions < 1:
        raise ValueError("empty action space")
    return int(rng.integers(n_actions))


def credential_lookup_policy(scenario: Scenario, state: EnvState, rng: np.random.Generator) -> int:
    """Connect with a held credential to a node not yet owned; otherwise try a random exploit."""
    actions = enumerate_actions(scenario)
    if not actions:
        raise ValueError("empty action space")
    eligible = [
        i
        for i, a in enumerate(actions)
        if isinstance(a, Connect) and a.credential_id in state.credentials and a.target not in state.owned
    ]
    if not eligible:
        eligible = [i for i, a in enumerate(actions) if not isinstance(a, Connect)] or list(range(len(actions)))
    return eligible[int(rng.integers(len(eligible)))]


def epsilon_greedy(values: np.ndarray, epsilon: float, rng: np.random.Generator) -> int:
    if rng.random() < epsilon:
        return int(rng.integers(len(values)))
    # np.argmax returns the first maximum
    return int(np.argmax(values))


class QTable:
    """State key -> action values; unseen states read as zeros."""

    def __init__(self, n_actions: int):
        self.n_actions = n_actions
        self.rows: dict[int, np.ndarray] = {}

    def values(self, key: int) -> np.ndarray:
        row = self.rows.get(key)
        return np.zeros(self.n_actions) if row is None else row.copy()

    def row(self, key: int) -> np.ndarray:
        row = self.rows.get(key)
        if row is None:
            row = self.rows[key] = np.zeros(self.n_actions)
        return row

    def __eq__(self, other) -> bool:
        if not isinstance(other, QTable) or other.n_actions != self.n_actions:
            return NotImplemented
        keys = set(self.rows) | set(other.rows)
        return all(np.array_equal(self.values(k), other.values(k)) for k in keys)

    def to_dict(self) -> dict:
        return {"n_actions": self.n_actions, "rows": {str(k): v.tolist() for k, v in sorted(self.rows.items())}}

    @classmethod
    def from_dict(cls, doc: dict) -> QTable:
        q = cls(int(doc["n_actions"]))
        for k, v in doc["rows"].items():
            q.rows[int(k)] = np.array(v, dtype=float)
        return q


def q_update(
    q: QTable, s: int, a: int, r: float, s_next: int, done: bool, params: LearningParams
) -> QTable:
    bootstrap = 0.0 if done else params.gamma * float(q.values(s_next).max())
    row = q.row(s)
    row[a] += params.alpha * (r + bootstrap - row[a])
    return q


def exploit_policy(q: QTable, s: int) -> int:
    return int(np.argmax(q.values(s)))


# --- policy objects driven by the episode runner ----------------------------


class Policy:
    name = "policy"
    mode = EXPLOITING

    def act(self, state: EnvState, rng: np.random.Generator) -> int:
        raise NotImplementedError

    def learn(self, state: EnvState, action: int, result: StepResult, next_state: EnvState) -> None:
        pass


class RandomPolicy(Policy):
    name = "random"

    def __init__(self, scenario: Scenario):
        self.n_actions = len(enumerate_actions(scenario))

    def act(self, state, rng):
        return random_policy(self.n_actions, rng)


class CredentialLookupPolicy(Policy):
    name = "cred-lookup"

    def __init__(self, scenario: Scenario):
        self.scenario = scenario

    def act(self, state, rng):
        return credential_lookup_policy(self.scenario, state, rng)


class ScriptedPolicy(Policy):
    """Replays a fixed action sequence, then repeats its last action."""

    name = "oracle"

    def __init__(self, indices: list[int]):
        if not indices:
            raise ValueError("empty script")
        self.indices = list(indices)

    def act(self, state, rng):
        return self.indices[min(state.step_count, len(self.indices) - 1)]


class TabularQAgent(Policy):
    def __init__(self, scenario: Scenario, params: LearningParams = LearningParams(), q: QTable | None = None):
        self.scenario = scenario
        self.params = params
        self.q = q if q is not None else QTable(len(enumerate_actions(scenario)))
        self.mode = LEARNING
        self.epsilon = params.epsilon_start

    @property
    def name(self) -> str:
        return "q" if self.mode == LEARNING else "exploit-q"

    def act(self, state, rng):
        key = state_key(self.scenario, state)
        if self.mode == EXPLOITING:
            return exploit_policy(self.q, key)
        return epsilon_greedy(self.q.values(key), self.epsilon, rng)

    def learn(self, state, action, result, next_state):
        if self.mode != LEARNING:
            return
        q_update(
            self.q,
            state_key(self.scenario, state),
            action,
            result.reward,
            state_key(self.scenario, next_state),
            result.terminal,
            self.params,
        )


class DqlAgent(Policy):
    def __init__(
        self,
        scenario: Scenario,
        params: LearningParams = LearningParams(),
        config: DqlConfig = DqlConfig(),
        rng: np.random.Generator | None = None,
        net: Mlp | None = None,
    ):
        self.scenario = scenario
        self.params = params
        self.config = config
        rng = rng if rng is not None else np.random.default_rng(0)
        # replay sampling draws from the same stream as the episode loop
        self._rng = rng
        sizes = [key_width(scenario), *config.hidden, len(enumerate_actions(scenario))]
        self.net = net if net is not None else Mlp.init(sizes, rng)
        if self.net.sizes[0] != sizes[0] or self.net.sizes[-1] != sizes[-1]:
            raise ValueError(f"network sizes {self.net.sizes} do not fit scenario ({sizes[0]} in, {sizes[-1]} out)")
        self.target = self.net.copy()
        self.buffer = ReplayBuffer(config.buffer_capacity)
        self.grad_steps = 0
        self.losses: list[float] = []
        self.mode = LEARNING
        self.epsilon = params.epsilon_start

    @property
    def name(self) -> str:
        return "dql" if self.mode == LEARNING else "exploit-dql"

    def act(self, state, rng):
        values = forward(self.net, encode_features(self.scenario, state))
        if self.mode == EXPLOITING:
            return int(np.argmax(values))
        return epsilon_greedy(values, self.epsilon, rng)

    def learn(self, state, action, result, next_state, rng: np.random.Generator | None = None):
        if self.mode != LEARNING:
            return
        cfg = self.config
        self.buffer.push(
            Transition(
                encode_features(self.scenario, state),
                action,
                result.reward * cfg.reward_scale,
                encode_features(self.scenario, next_state),
                result.terminal,
            )
        )
        if len(self.buffer) < cfg.batch_size:
            return
        rng = rng if rng is not None else self._rng
        batch = self.buffer.sample_batch(cfg.batch_size, rng)
        targets = bellman_targets(batch, self.target, self.params.gamma)
        self.losses.append(sgd_step(self.net, batch, targets, cfg.lr, cfg.loss_ceiling))
        self.grad_steps += 1
        if self.grad_steps % cfg.target_sync == 0:
            self.target = self.net.copy()


def _train(agent: TabularQAgent | DqlAgent, scenario: Scenario, params: LearningParams, rng) -> list[float]:
    curve: list[float] = []
    actions = enumerate_actions(scenario)
    for episode in range(params.episodes):
        agent.epsilon = params.epsilon(episode)
        state = reset(scenario)
        for _ in range(params.step_budget):
            if state.terminal:
                break
            a = agent.act(state, rng)
            nxt, result = step(scenario, state, actions[a])
            agent.learn(state, a, result, nxt)
            state = nxt
        curve.append(state.cumulative_reward)
    return curve


def train_tabular(
    scenario: Scenario, params: LearningParams = LearningParams(), seed: int = 0
) -> tuple[QTable, list[float]]:
    agent = TabularQAgent(scenario, params)
    curve = _train(agent, scenario, params, np.random.default_rng(seed))
    return agent.q, curve


def train_dql_agent(
    scenario: Scenario, params: LearningParams = LearningParams(), config: DqlConfig = DqlConfig(), seed: int = 0
) -> tuple[DqlAgent, list[float]]:
    rng = np.random.default_rng(seed)
    agent = DqlAgent(scenario, params, config, rng)
    curve = _train(agent, scenario, params, rng)
    return agent, curve


def train_dql(
    scenario: Scenario, params: LearningParams = LearningParams(), config: DqlConfig = DqlConfig(), seed: int = 0
) -> tuple[Mlp, list[float]]:
    agent, curve = train_dql_agent(scenario, params, config, seed)
    return agent.net, curve
