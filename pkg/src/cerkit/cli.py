"""
Command-line front end: ``design``, ``simulate``, ``reconstruct``, ``logical``
and ``selftest``.

Exit codes are 0 on success, 2 for invalid input and 3 when a numerical step
fails to converge (details go to stderr).
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import io as fmt
from .channels import DenseProcess, FactorizedChannel, unitary_process
from .design import DesignPlan, choose_sequence_lengths, marginal_target, plan_initial_states
from .estimation import (
    ProjectionError,
    UnfittableError,
    estimate_marginals,
    bootstrap,
)
from .grf import EnumerationCapError, JointErrorModel, build_transversal_graph
from .pauli import PauliOperator
from .simulate import CircuitSpec, DecayDataset, exact_expectation, run_dense, run_monte_carlo
from .steane import SteaneCodePair, logical_rates, rates_vector

NUMERICAL = (ProjectionError, EnumerationCapError, UnfittableError)
OUTPUT_NAMES = {"design": "plan.txt", "simulate": "dataset.csv", "reconstruct": "marginals.txt",
                "logical": "logical.txt"}


def _common(p: argparse.ArgumentParser, suppress: bool) -> None:
    d = argparse.SUPPRESS if suppress else None
    p.add_argument("--seed", type=int, default=d if suppress else 0, help="master seed")
    p.add_argument("--out", default=d if suppress else ".", help="output directory")
    p.add_argument("--config", default=d, help="key = value file supplying option defaults")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cerkit", description="cycle error reconstruction toolkit")
    _common(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True)

    d = sub.add_parser("design", help="plan initial states and sequence lengths")
    _common(d, suppress=True)
    d.add_argument("--cycle", default="transversal7")
    d.add_argument("--level", default="1cnot", choices=["single", "1cnot", "2cnot"])
    d.add_argument("--pairs", default="all", choices=["all", "adjacent"])
    d.add_argument("--method", default="tiling", choices=["tiling", "greedy"])
    d.add_argument("--lengths", default=None, help="comma-separated sequence lengths")
    d.add_argument("--lambda-guess", type=float, default=0.97)
    d.add_argument("--n-lengths", type=int, default=3)
    d.add_argument("--randomizations", type=int, default=40)
    d.add_argument("--shots", type=int, default=150)
    d.set_defaults(func=cmd_design)

    s = sub.add_parser("simulate", help="simulate a design plan under a noise channel")
    _common(s, suppress=True)
    s.add_argument("--plan", required=True)
    s.add_argument("--channel", default=None)
    s.add_argument("--engine", default="monte_carlo", choices=["monte_carlo", "dense", "exact"])
    s.add_argument("--coherent", default=None, help="Pauli generator of a coherent rotation (dense engine)")
    s.add_argument("--angle", type=float, default=0.0)
    s.add_argument("--spam", type=float, default=0.0)
    s.add_argument("--randomizations", type=int, default=None)
    s.add_argument("--shots", type=int, default=None)
    s.add_argument("--workers", type=int, default=1)
    s.set_defaults(func=cmd_simulate)

    r = sub.add_parser("reconstruct", help="fit decays and reconstruct marginals")
    _common(r, suppress=True)
    r.add_argument("--dataset", required=True)
    r.add_argument("--plan", required=True)
    r.add_argument("--bootstrap", type=int, default=200)
    r.set_defaults(func=cmd_reconstruct)

    g = sub.add_parser("logical", help="correctable and uncorrectable rates for two Steane blocks")
    _common(g, suppress=True)
    g.add_argument("--marginals", default=None)
    g.add_argument("--channel", default=None, help="injected channel; with --marginals it is a reference")
    g.add_argument("--cycle", default="transversal7")
    g.add_argument("--threshold", type=float, default=1e-12)
    g.add_argument("--cap", type=int, default=10_000_000)
    g.add_argument("--dataset", default=None, help="dataset for bootstrap errors; without it --bootstrap is unused")
    g.add_argument("--plan", default=None)
    g.add_argument("--bootstrap", type=int, default=0)
    g.set_defaults(func=cmd_logical)

    t = sub.add_parser("selftest", help="run quick internal consistency checks")
    _common(t, suppress=True)
    t.set_defaults(func=cmd_selftest)
    return parser


INPUT_FILES = ("plan", "dataset", "channel", "marginals")


def _params(args, skip=("out", "config", "func", "command", "workers") + INPUT_FILES) -> dict:
    # input files enter the hash through their contents, not their paths
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def _write(args, text: str) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / OUTPUT_NAMES[args.command]
    path.write_text(text)
    print(path)
    return path


def _read(path) -> str:
    p = Path(path)
    if not p.is_file():
        raise FileNotFoundError(f"no such file: {path}")
    return p.read_text()


def _inputs(args, names) -> dict:
    return {n: getattr(args, n) for n in names if getattr(args, n, None)}


# --------------------------------------------------------------------------


def cmd_design(args) -> int:
    cycle = fmt.cycle_from_name(args.cycle)
    target = marginal_target(cycle, args.level, pairs=args.pairs)
    order = cycle.order
    if args.lengths:
        lengths = tuple(int(m) for m in args.lengths.split(","))
    else:
        lengths = tuple(choose_sequence_lengths(args.lambda_guess, args.n_lengths, order=order))
    plan = plan_initial_states(cycle, target, method=args.method, lengths=lengths,
                               randomizations=args.randomizations, shots=args.shots, seed=args.seed)
    h = fmt.config_hash(_params(args))
    _write(args, fmt.provenance(h, args.seed) + plan.to_text())
    return 0


def _load_noise(args, cycle):
    noise = fmt.parse_channel(_read(args.channel)) if args.channel else None
    if noise is not None and noise.n != cycle.n:
        raise ValueError(f"channel acts on {noise.n} qubits but the plan's cycle has {cycle.n}")
    if args.coherent:
        gen = PauliOperator.from_string(args.coherent)
        if gen.n != cycle.n:
            raise ValueError("coherent generator must span the cycle register")
        proc = unitary_process(gen, args.angle)
        if noise is not None:
            base = noise.to_channel() if isinstance(noise, FactorizedChannel) else noise
            proc = proc.compose(DenseProcess.from_pauli_channel(base))
        return proc
    if noise is None:
        raise ValueError("simulate needs --channel or --coherent")
    return noise


def cmd_simulate(args) -> int:
    plan = DesignPlan.from_text(_read(args.plan))
    cycle = fmt.cycle_from_name(plan.cycle_name)
    noise = _load_noise(args, cycle)
    if isinstance(noise, DenseProcess) and args.engine == "monte_carlo":
        raise ValueError("coherent noise needs --engine dense or exact")
    reps = args.randomizations or plan.randomizations
    shots = args.shots or plan.shots_per_randomization
    out = DecayDataset(cycle.n, args.seed)
    for k, prep in enumerate(plan.initial_states):
        spec = CircuitSpec(cycle, plan.sequence_lengths, prep, noise, seed=args.seed, state_index=k,
                           observables=plan.observables_for(k, cycle), spam=args.spam)
        if args.engine == "exact":
            out.extend(_exact_rows(spec))
        elif args.engine == "dense":
            out.extend(run_dense(spec, reps, shots, workers=args.workers))
        else:
            out.extend(run_monte_carlo(spec, reps, shots, workers=args.workers))
    h = fmt.config_hash(_params(args), _inputs(args, ("plan", "channel")))
    _write(args, fmt.provenance(h, args.seed) + out.to_csv())
    return 0


def _exact_rows(spec: CircuitSpec) -> DecayDataset:
    from .pauli import canonical_orbit

    ds = DecayDataset(spec.n, spec.seed)
    ideal = spec.ideal_signs()
    for m in spec.lengths:
        for k, o in enumerate(spec.observables):
            v = exact_expectation(spec.noise, spec.hard_cycle, o, m) * (1 - 2 * spec.spam) ** o.weight
            ds.append(spec.state_index, m, canonical_orbit(spec.hard_cycle, o).label, o, 0,
                      ideal[k], ideal[k] * v, 0)
    return ds


def cmd_reconstruct(args) -> int:
    plan = DesignPlan.from_text(_read(args.plan))
    cycle = fmt.cycle_from_name(plan.cycle_name)
    data = DecayDataset.from_csv(_read(args.dataset))
    if data.n != cycle.n:
        raise ValueError("dataset and plan disagree on the register size")
    subsets = plan.target.subsets if plan.target else cycle.supports()
    est = estimate_marginals(data, cycle, subsets)
    exact = bool(np.all(data.shots == 0))
    if args.bootstrap and not exact:
        se = bootstrap(data, args.bootstrap, seed=args.seed, cycle=cycle, subsets=subsets)
    else:
        se = np.zeros(sum(len(e.orbits) for e in est))
    k = 0
    for e in est:
        e.std_errors = se[k:k + len(e.orbits)]
        k += len(e.orbits)
    h = fmt.config_hash(_params(args), _inputs(args, ("plan", "dataset")))
    _write(args, fmt.provenance(h, args.seed) + fmt.format_marginals(est))
    return 0


def cmd_logical(args) -> int:
    cycle = fmt.cycle_from_name(args.cycle)
    code = SteaneCodePair()
    graph = build_transversal_graph(len(cycle.gates), offset=9, n=cycle.n)
    truth = None
    if args.channel:
        truth = JointErrorModel.from_channel(graph, fmt.parse_channel(_read(args.channel)), args.threshold)
    if args.marginals:
        model = JointErrorModel.from_estimates(graph, fmt.parse_marginals(_read(args.marginals), cycle),
                                               args.threshold)
    elif truth is not None:
        model, truth = truth, None
    else:
        raise ValueError("logical needs --marginals or --channel")
    rates = logical_rates(model, code, cycle, cap=args.cap)
    lines = [fmt.provenance(fmt.config_hash(_params(args), _inputs(args, ("marginals", "channel", "dataset"))),
                            args.seed)]
    for name in ("marginals", "channel", "dataset"):
        path = getattr(args, name)
        if path:
            lines.append(f"input {name} {Path(path).name} {fmt.file_checksum(path)}\n")
    lines.append(rates.to_text())
    if truth is not None:
        # the injected channel, when given with estimates, is reported for comparison
        ref = logical_rates(truth, code, cycle, cap=args.cap)
        lines.append(f"reference_total_error {ref.total!r}\nreference_correctable_rate {ref.correctable!r}\n"
                     f"reference_uncorrectable_rate {ref.uncorrectable!r}\n")
    if args.dataset and args.bootstrap:
        if not args.plan:
            raise ValueError("bootstrap errors need --plan alongside --dataset")
        se = _logical_bootstrap(args, cycle, code, graph)
        lines.append(f"total_error_se {se[0]!r}\ncorrectable_rate_se {se[1]!r}\nuncorrectable_rate_se {se[2]!r}\n")
    _write(args, "".join(lines))
    return 0


def _logical_bootstrap(args, cycle, code, graph):
    plan = DesignPlan.from_text(_read(args.plan))
    data = DecayDataset.from_csv(_read(args.dataset))
    subsets = plan.target.subsets

    def pipeline(fits):
        est = estimate_marginals(None, cycle, subsets, fits)
        model = JointErrorModel.from_estimates(graph, est, args.threshold)
        return rates_vector(logical_rates(model, code, cycle, cap=args.cap))

    return bootstrap(data, args.bootstrap, seed=args.seed, fit_pipeline=pipeline)


def cmd_selftest(args) -> int:
    from .selftest import run_checks

    results = run_checks(seed=args.seed)
    for name, ok, detail in results:
        print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
    return 0 if all(ok for _, ok, _ in results) else 1


# --------------------------------------------------------------------------


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config", default=None)
    known, _ = pre.parse_known_args(argv)
    try:
        if known.config:
            cfg = fmt.parse_config(_read(known.config))
            parser.set_defaults(**{k: v for k, v in cfg.items() if k in ("seed", "out")})
            for action in parser._subparsers._group_actions:
                for sp in action.choices.values():
                    sp.set_defaults(**cfg)
        args = parser.parse_args(argv)
        for key in ("seed",):
            setattr(args, key, int(getattr(args, key)))
        return args.func(args)
    except NUMERICAL as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        if hasattr(exc, "violation"):
            print(f"constraint violation of best iterate: {exc.violation:.3e}", file=sys.stderr)
        if hasattr(exc, "mass"):
            print(f"mass enumerated before the cap: {exc.mass!r}", file=sys.stderr)
        return 3
    except (ValueError, KeyError, FileNotFoundError, TypeError) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
