"""Command-line entry point: ``nuitsim {inspect,simulate,train,bench,modulate,demodulate}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys

import numpy as np

from . import bench, dsp, wavio
from .agents import DqlAgent, DqlConfig, LearningParams, QTable, train_dql_agent, train_tabular
from .env import enumerate_actions
from .nn import DivergenceError, load_weights, save_weights
from .scenario import Scenario, ScenarioError, errors, parse_scenario, resolve_scenario, validate

SIM_ALGORITHMS = ("random", "cred-lookup", "q", "exploit-q", "dql", "exploit-dql", "oracle")
QTABLE_FORMAT = "nuitsim-qtable/1"


def _err(msg: str) -> None:
    print(msg, file=sys.stderr)


def _params(args) -> LearningParams:
    return LearningParams(episodes=args.episodes) if args.episodes is not None else LearningParams()


def _load(spec: str) -> Scenario:
    return resolve_scenario(spec)


def cmd_inspect(args) -> int:
    if args.scenario == "baseline":
        scenario = _load("baseline")
    else:
        # parse without validating so every violation can be listed
        with open(args.scenario, encoding="utf-8") as fh:
            scenario = parse_scenario(fh.read(), check=False)
    violations = validate(scenario, check_winnable=False)
    if not errors(violations):
        violations = validate(scenario)
    n_vulns = len(scenario.vulnerabilities)
    print(f"scenario: {scenario.name}")
    print(f"entry node: {scenario.entry_node}")
    print(f"nodes: {len(scenario.nodes)}")
    for n in scenario.nodes:
        print(f"  {n.id}: value={n.value:g} services={list(n.services)} firewall={list(n.firewall_allow)}")
    print(f"vulnerabilities: {n_vulns}")
    for node_id, v in scenario.vulnerabilities:
        print(f"  {node_id}/{v.id}: {v.locality} {type(v.outcome).__name__} cost={v.cost:g}")
    print(f"actions: {len(enumerate_actions(scenario)) if not errors(violations) else 'n/a'}")
    if violations:
        print(f"violations: {len(violations)}")
        for v in violations:
            print(f"  {v}")
    else:
        print("violations: none")
    return 1 if errors(violations) else 0


def _trained(args, scenario: Scenario, params: LearningParams):
    """Trained artifact for q/dql variants: from --model, else trained now with --seed."""
    if args.algorithm in ("q", "exploit-q"):
        if args.model:
            with open(args.model, encoding="utf-8") as fh:
                doc = json.load(fh)
            if doc.get("format") != QTABLE_FORMAT:
                raise ValueError(f"{args.model}: not a {QTABLE_FORMAT} file")
            return QTable.from_dict(doc), None
        _err(f"training tabular Q: seed={args.seed} episodes={params.episodes}")
        return train_tabular(scenario, params, args.seed)[0], None
    if args.algorithm in ("dql", "exploit-dql"):
        if args.model:
            net = load_weights(args.model)
            return None, DqlAgent(scenario, params, DqlConfig(), np.random.default_rng(args.seed), net=net)
        _err(f"training DQL: seed={args.seed} episodes={params.episodes}")
        return None, train_dql_agent(scenario, params, DqlConfig(), args.seed)[0]
    return None, None


def cmd_simulate(args) -> int:
    scenario = _load(args.scenario)
    params = _params(args)
    _err(f"seed: {args.seed}")
    q, dql = _trained(args, scenario, params)
    policy = bench.make_policy(args.algorithm, scenario, params, q, dql)
    record = bench.run_episode(scenario, policy, args.budget, args.seed, algorithm=args.algorithm)
    if args.out:
        bench.emit_csv([record], args.out)
        _err(f"wrote {args.out}")
    else:
        bench.write_csv([record], sys.stdout)
    final = record.rows[-1].cumulative_reward if record.rows else 0.0
    reached = record.steps_to_full_ownership
    _err(
        f"{args.algorithm}: steps={len(record.rows)} final_reward={final:g} "
        f"full_ownership={'step ' + str(reached) if reached is not None else 'not reached'}"
    )
    return 0


def cmd_train(args) -> int:
    scenario = _load(args.scenario)
    params = _params(args)
    _err(f"seed: {args.seed}")
    if args.algorithm == "q":
        q, curve = train_tabular(scenario, params, args.seed)
        out = args.out or "qtable.json"
        with open(out, "w", encoding="utf-8") as fh:
            json.dump({"format": QTABLE_FORMAT, **q.to_dict()}, fh, sort_keys=True)
        policy = bench.make_policy("exploit-q", scenario, params, q, None)
    else:
        agent, curve = train_dql_agent(scenario, params, DqlConfig(), args.seed)
        out = args.out or "dql_weights.json"
        save_weights(agent.net, out)
        policy = bench.make_policy("exploit-dql", scenario, params, None, agent)
    _err(f"wrote {out}")
    if args.curve_out:
        bench.emit_curves_csv({args.algorithm: {args.seed: curve}}, args.curve_out)
        _err(f"wrote {args.curve_out}")
    rec = bench.run_episode(scenario, policy, args.budget, args.seed)
    _err(f"greedy rollout: steps_to_full_ownership={rec.steps_to_full_ownership}")
    return 0


def cmd_bench(args) -> int:
    scenario = _load(args.scenario)
    params = _params(args)
    algorithms = list(bench.ALGORITHMS) if args.algorithms == "all" else args.algorithms.split(",")
    unknown = [a for a in algorithms if a not in bench.ALGORITHMS]
    if unknown:
        raise ValueError(f"unknown algorithm(s): {', '.join(unknown)}")
    seeds = list(range(args.seed, args.seed + args.seeds))
    _err(f"seeds: {seeds[0]}..{seeds[-1]}")
    report = bench.run_benchmark(scenario, algorithms, seeds, args.budget, params, workers=args.workers)
    if args.out:
        bench.emit_csv(report, args.out)
        _err(f"wrote {args.out}")
    if args.json:
        with open(args.json, "w", encoding="utf-8") as fh:
            fh.write(report.to_json())
        _err(f"wrote {args.json}")
    if args.curves:
        bench.emit_curves_csv(report.curves, args.curves)
        _err(f"wrote {args.curves}")
    cps = report.checkpoints
    print("algorithm,episodes,reached,mean_steps,min_steps,max_steps," + ",".join(f"reward@{c}" for c in cps))
    for name in algorithms:
        s = report.summaries[name]
        print(
            f"{name},{s.episodes},{s.reached},{s.mean_steps:.2f},{s.min_steps},{s.max_steps},"
            + ",".join(f"{s.checkpoint_rewards[c]:.1f}" for c in cps)
        )
    return 0


def _mod_params(args) -> dsp.ModulationParams:
    return dsp.ModulationParams(cutoff_hz=args.cutoff_hz, carrier_hz=args.carrier_hz, tukey_alpha=args.tukey_alpha)


def cmd_modulate(args) -> int:
    params = _mod_params(args)
    audio = wavio.read_wav(args.input)
    out = dsp.modulate_pipeline(audio, params)
    wavio.write_wav(args.output, out)
    band_hi = min(params.carrier_hz + params.cutoff_hz, out.nyquist)
    print(f"input_rate_hz={audio.sample_rate} output_rate_hz={out.sample_rate}")
    print(f"peak_hz={dsp.peak_frequency(out):g}")
    print(f"band_energy_ratio_db={dsp.band_energy_ratio(out, params.carrier_hz, band_hi):.2f} "
          f"band=[{params.carrier_hz:g},{band_hi:g}]")
    return 0


def cmd_demodulate(args) -> int:
    params = _mod_params(args)
    audio = wavio.read_wav(args.input)
    if args.mode == "coherent":
        rec = dsp.demodulate_coherent(audio, params.carrier_hz, params.cutoff_hz, params.filter_taps)
    else:
        rec = dsp.demodulate_square_law(audio, params.cutoff_hz, params.filter_taps)
    wavio.write_wav(args.output, dsp.normalize_peak(rec, params.peak_target))
    print(f"mode={args.mode} rate_hz={rec.sample_rate} samples={len(rec)}")
    if args.reference:
        ref = dsp.prepare_message(wavio.read_wav(args.reference), params)
        if ref.sample_rate != rec.sample_rate or len(ref) != len(rec):
            raise ValueError("reference does not align with the demodulated signal (rate or length differ)")
        region = dsp.flat_region(len(rec), params.tukey_alpha, margin=params.filter_taps // 2)
        target = ref.samples if args.mode == "coherent" else _envelope_reference(ref, params)
        print(f"correlation={dsp.correlation(rec.samples[region], target[region]):.6f}")
    return 0


def _envelope_reference(ref: dsp.AudioBuffer, params: dsp.ModulationParams) -> np.ndarray:
    hilbert = dsp.analytic_signal(ref).imag
    env = dsp.low_pass(ref.with_samples((ref.samples**2 + hilbert**2) / 2), params.cutoff_hz, params.filter_taps)
    return env.samples


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nuitsim", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def sim_common(p, budget=200):
        p.add_argument("--scenario", default="baseline", help="'baseline' or a scenario JSON file")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--budget", type=int, default=budget, help="step budget per evaluation episode")
        p.add_argument("--episodes", type=int, default=None, help="training episodes (default 500)")
        p.add_argument("--out", default=None)

    p = sub.add_parser("inspect", help="summarise and validate a scenario")
    p.add_argument("--scenario", default="baseline")
    p.set_defaults(func=cmd_inspect)

    p = sub.add_parser("simulate", help="run one episode and write its CSV")
    sim_common(p)
    p.add_argument("--algorithm", required=True, choices=SIM_ALGORITHMS)
    p.add_argument("--model", default=None, help="trained Q-table or DQL weights from 'train'")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("train", help="train a learner and save it")
    sim_common(p)
    p.add_argument("--algorithm", required=True, choices=("q", "dql"))
    p.add_argument("--curve-out", default=None, help="per-episode training reward CSV")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("bench", help="benchmark several algorithms over seeds")
    sim_common(p)
    p.add_argument("--seeds", type=int, default=20, help="number of seeds, starting at --seed")
    p.add_argument("--algorithms", default="all", help="'all' or a comma list")
    p.add_argument("--json", default=None, help="write the aggregate report as JSON")
    p.add_argument("--curves", default=None, help="write training curves CSV")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_bench)

    for name, func, helptext in (
        ("modulate", cmd_modulate, "shift a spoken command into 16-22 kHz"),
        ("demodulate", cmd_demodulate, "recover baseband audio from a modulated file"),
    ):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("input")
        p.add_argument("output")
        p.add_argument("--carrier-hz", type=float, default=16000.0)
        p.add_argument("--cutoff-hz", type=float, default=6000.0)
        p.add_argument("--tukey-alpha", type=float, default=0.05)
        if name == "demodulate":
            p.add_argument("--mode", choices=("coherent", "square-law"), default="coherent")
            p.add_argument("--reference", default=None, help="original input, to report recovery correlation")
        p.set_defaults(func=func)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "seeds", 1) < 1:
        parser.error("--seeds must be at least 1")
    if getattr(args, "budget", 0) < 0:
        parser.error("--budget must be non-negative")
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr)
    try:
        return args.func(args)
    except (OSError, ScenarioError, ValueError, DivergenceError) as exc:
        _err(f"error: {exc}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
