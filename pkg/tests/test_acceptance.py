"""Acceptance criteria, one test each; results are echoed in the terminal summary."""

import time
from contextlib import contextmanager

import numpy as np
import pytest

from conftest import CRITERIA
from dspkit import RATE, chirp, coherent_round_trip, square_law_error, tone
from invariants import InvariantChecker
from nuitsim.agents import EXPLOITING, LearningParams, TabularQAgent, train_tabular
from nuitsim.bench import CHECKPOINTS, run_benchmark, run_episode
from nuitsim.cli import main
from nuitsim.dsp import band_energy_ratio, modulate_pipeline, peak_frequency
from nuitsim.env import LOCAL, REMOTE, enumerate_actions, reset, step
from nuitsim.nn import Mlp
from nuitsim.scenario import baseline_nuit
from nuitsim.search import brute_force_optimal, dfs_optimal_length
from test_nn import finite_difference_error

ORACLE_LENGTH = 9
SEEDS = range(20)

# end-state attack columns per node: (local, remote); NUIT2 is marked as the
# premise of the entry foothold rather than an action
END_STATE = {
    "echo_dot": ({"malicious_alexa_skill"}, set()),
    "email_account": ({"find_device_type_in_email", "collect_data_from_emails"}, set()),
    "iphone": ({"unlock_door_via_nuit"}, {"nuit1_phishing_email"}),
    "door": ({"steal_classified_laptop"}, set()),
    "classified_machine": ({"access_state_secrets"}, set()),
}


@contextmanager
def criterion(number, title, limit=None):
    """Time the body and record one pass/fail line; ``outcome`` collects details."""
    outcome = {"detail": ""}
    start = time.perf_counter()
    ok = False
    try:
        yield outcome
        ok = True
    finally:
        elapsed = time.perf_counter() - start
        slow = limit is not None and elapsed >= limit
        if slow:
            outcome["detail"] += f" (over {limit:g} s limit)"
        status = "PASS" if ok and not slow else "FAIL"
        CRITERIA.append(f"[{status}] {number:>2}. {title}: {outcome['detail'].strip()} [{elapsed:.2f} s]")
    assert not slow, f"criterion {number} took {elapsed:.1f} s"


@pytest.fixture(scope="module")
def scenario():
    return baseline_nuit()


@pytest.fixture(scope="module")
def benchmark(scenario):
    start = time.perf_counter()
    report = run_benchmark(scenario, budget=200, seeds=SEEDS)
    return report, time.perf_counter() - start


def test_c01_oracle_baseline(scenario):
    with criterion(1, "oracle baseline", limit=1.0) as out:
        path = brute_force_optimal(scenario)
        dfs = dfs_optimal_length(scenario)
        out["detail"] = f"BFS length={path.length} reward={path.final_reward:g}; DFS={dfs}"
        assert (path.length, path.final_reward) == (ORACLE_LENGTH, 7491)
        assert dfs == (ORACLE_LENGTH, 7491)


def test_c02_end_state_columns(scenario):
    with criterion(2, "end state vs attack columns", limit=1.0) as out:
        path = brute_force_optimal(scenario)
        state = reset(scenario)
        for a in path.actions:
            state, _ = step(scenario, state, a)
        catalog = {
            n.id: ({v.id for v in n.vulnerabilities if v.locality == LOCAL}, {v.id for v in n.vulnerabilities if v.locality == REMOTE})
            for n in scenario.nodes
        }
        where = {v.id: (node, v.locality) for node, v in scenario.vulnerabilities}
        misplaced = [
            vid for vid in state.executed_vulns
            if vid not in END_STATE[where[vid][0]][0 if where[vid][1] == LOCAL else 1]
        ]
        out["detail"] = (
            f"owned={len(state.owned)}/5, executed={sorted(state.executed_vulns)}, "
            f"catalog matches end state={catalog == END_STATE}"
        )
        assert state.owned == set(END_STATE)
        assert catalog == END_STATE
        assert not misplaced
        # the episode ends on full ownership, so both data-collection exploits stay unexecuted
        assert state.executed_vulns == {
            "malicious_alexa_skill", "find_device_type_in_email", "nuit1_phishing_email",
            "unlock_door_via_nuit", "steal_classified_laptop",
        }


def test_c03_algorithm_ordering(benchmark):
    report, elapsed = benchmark
    with criterion(3, "algorithm ordering") as out:
        mean = {k: s.mean_steps for k, s in report.summaries.items()}
        worst = {k: report.summaries[k].max_steps for k in ("exploit-dql", "exploit-q")}
        out["detail"] = ", ".join(f"{k}={v:.2f}" for k, v in mean.items()) + f"; exploit max={worst}; bench {elapsed:.0f} s"
        assert elapsed < 300
        assert mean["exploit-dql"] <= mean["exploit-q"]
        for learner in ("q", "dql"):
            assert mean["exploit-q"] <= mean[learner] <= mean["cred-lookup"]
        assert mean["cred-lookup"] <= mean["random"]
        assert all(m <= ORACLE_LENGTH + 2 for m in worst.values())


def test_c04_reward_curve_shape(benchmark):
    report, _ = benchmark
    with criterion(4, "random below exploit reward curve") as out:
        rnd = report.summaries["random"].checkpoint_rewards
        dql = report.summaries["exploit-dql"].checkpoint_rewards
        early = min(report.summaries[k].checkpoint_rewards[10] for k in ("exploit-dql", "exploit-q"))
        out["detail"] = (
            "random " + "/".join(f"{rnd[c]:.0f}" for c in CHECKPOINTS)
            + " vs exploit-dql " + "/".join(f"{dql[c]:.0f}" for c in CHECKPOINTS)
            + f"; exploit step-10 min={early:.0f}"
        )
        assert all(rnd[c] < dql[c] for c in CHECKPOINTS)
        assert rnd[200] < early


def test_c05_tabular_convergence(scenario):
    with criterion(5, "tabular Q reaches oracle length", limit=60.0) as out:
        hits = 0
        for seed in SEEDS:
            q, _ = train_tabular(scenario, LearningParams(), seed)
            agent = TabularQAgent(scenario, LearningParams(), q)
            agent.mode = EXPLOITING
            hits += run_episode(scenario, agent, 100, seed).steps_to_full_ownership == ORACLE_LENGTH
        out["detail"] = f"{hits}/20 seeds at {ORACLE_LENGTH} steps"
        assert hits >= 18


def test_c06_gradient_check():
    with criterion(6, "backprop vs finite differences", limit=10.0) as out:
        rng = np.random.default_rng(2024)
        worst = 0.0
        for _ in range(20):
            net = Mlp.init([4, 8, 3], rng)
            for b in net.biases:
                b[:] = rng.normal(scale=0.1, size=b.shape)
            x = rng.normal(size=(6, 4))
            worst = max(worst, finite_difference_error(net, x, rng.integers(3, size=6), rng.normal(size=6), h=1e-5))
        out["detail"] = f"max relative error {worst:.2e} over 20 nets"
        assert worst <= 1e-4


def test_c07_band_confinement():
    with criterion(7, "SSB band confinement", limit=1.0) as out:
        result = modulate_pipeline(tone(1000))
        peak = peak_frequency(result)
        ratio = band_energy_ratio(result, 16_000, 22_000)
        bin_hz = RATE / len(result)
        out["detail"] = f"peak {peak:g} Hz, band ratio {ratio:.1f} dB"
        assert abs(peak - 17_000) <= bin_hz
        assert ratio >= 40


def test_c08_round_trip():
    with criterion(8, "demodulation round trip", limit=2.0) as out:
        signal = chirp(0, 5000)
        corr = coherent_round_trip(signal)
        err = square_law_error(signal)
        out["detail"] = f"coherent correlation {corr:.6f}, square-law relative L2 {err:.2e}"
        assert corr >= 0.99
        assert err <= 1e-2


CLI_RUNS = [
    ["simulate", "--algorithm", "random", "--seed", "5"],
    ["simulate", "--algorithm", "cred-lookup", "--seed", "5"],
    ["simulate", "--algorithm", "oracle"],
    ["simulate", "--algorithm", "q", "--seed", "5", "--episodes", "100"],
    ["simulate", "--algorithm", "exploit-dql", "--seed", "5", "--episodes", "20"],
    ["bench", "--seeds", "2", "--seed", "7", "--algorithms", "all", "--episodes", "20"],
]


def test_c09_cli_determinism(tmp_path, capsys):
    with criterion(9, "CLI byte-identical CSV") as out:
        identical = 0
        for k, argv in enumerate(CLI_RUNS):
            blobs = []
            for rep in range(2):
                path = tmp_path / f"{k}_{rep}.csv"
                assert main(argv + ["--out", str(path)]) == 0
                blobs.append(path.read_bytes())
            identical += blobs[0] == blobs[1] and len(blobs[0]) > 0
        capsys.readouterr()
        out["detail"] = f"{identical}/{len(CLI_RUNS)} commands reproduced byte for byte"
        assert identical == len(CLI_RUNS)


def test_c10_invariant_suite(scenario):
    with criterion(10, "environment invariants", limit=30.0) as out:
        checker = InvariantChecker(scenario)
        n_actions = len(enumerate_actions(scenario))
        rng = np.random.default_rng(10)
        violations = 0
        steps = 0
        for _ in range(100_000):
            seq = rng.integers(0, n_actions, size=rng.integers(1, 21))
            steps += len(seq)
            violations += len(checker.run(seq))
        out["detail"] = f"100000 sequences ({steps} actions drawn), {violations} violations"
        assert violations == 0

