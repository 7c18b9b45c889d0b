"""Command-line front end.

Exit codes: 0 ok, 1 usage, 2 I/O failure, 3 infeasible or invalid input.
"""

from __future__ import annotations

import argparse
import sys

from dap import fileio
from dap.core import DapError, FeasibilityError, evaluate
from dap.error import comparison_metrics, prediction_error
from dap.harness import (
    DEFAULT_ALGORITHMS,
    DistributionSpec,
    ExperimentConfig,
    adversarial_pair,
    build_policy,
    emit_plots,
    generate_instance,
    parse_experiment_config,
    perturb_instance,
    run_experiment,
)
from dap.offline import optimal_solution, optimal_value
from dap.policies import run_policy
from dap.stability import stabilize


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would exit(2); the contract wants 1
        raise UsageError(f"{self.prog}: {message}")


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def build_parser() -> _Parser:
    parser = _Parser(prog="dap", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--seed", type=int, default=0, help="random seed (where applicable)")
        return p

    p = add("gen", "generate a synthetic instance")
    p.add_argument("--dist", required=True, help="poisson(m) | pareto(shape) | iterated_poisson(m)")
    p.add_argument("-d", type=float, default=100.0, help="delay factor")
    p.add_argument("-T", type=int, default=1000, help="horizon length")
    p.add_argument("-o", "--output", help="write the instance here (default: stdout)")

    p = add("perturb", "derive a noisy prediction from an instance")
    p.add_argument("instance")
    p.add_argument("--r", type=float, required=True, help="perturbation probability in [0, 1]")
    p.add_argument("--dist", required=True, help="noise distribution")
    p.add_argument("-o", "--output", help="write the prediction here (default: stdout)")

    p = add("solve", "offline optimum of an instance")
    p.add_argument("instance")
    p.add_argument("-o", "--output", help="solution file (default: <instance>.sol)")

    p = add("eval", "price a solution against an instance")
    p.add_argument("instance")
    p.add_argument("solution")

    p = add("error", "prediction-error measures for an (instance, prediction) pair")
    p.add_argument("instance")
    p.add_argument("prediction")
    p.add_argument("--partition", action="store_true", help="also print the maximizing partition")

    p = add("stabilize", "stable near-optimal solution of an instance")
    p.add_argument("instance")
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    p.add_argument("-o", "--output", help="solution file (default: <instance>.stable.sol)")

    p = add("simulate", "run one online policy over an instance")
    p.add_argument("--alg", required=True, choices=["greedy", "blind", "pdla", "pbb", "apb", "robust"])
    p.add_argument("--lambda", dest="lam", type=float, default=0.1)
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--instance", required=True)
    p.add_argument("--prediction", help="required by every policy except greedy")
    p.add_argument("--trace", action="store_true", help="print a per-step decision log")

    p = add("experiment", "batch experiment across distributions, noise levels, seeds")
    p.add_argument("--config", help="key = value config file")
    p.add_argument("--dist", action="append", help="distribution (repeatable)")
    p.add_argument("-d", type=float, help="delay factor")
    p.add_argument("-T", type=int, help="horizon length")
    p.add_argument("--r-grid", help="comma-separated perturbation probabilities")
    p.add_argument("--seeds", type=int, help="number of seeds per cell")
    p.add_argument("--alg", action="append", help="algorithm name[:parameter] (repeatable)")
    p.add_argument("--workers", type=int, help="parallel worker processes")
    p.add_argument("-o", "--output", help="trial CSV path")

    p = add("plot", "aggregate a trial CSV into figure data and SVG plots")
    p.add_argument("csv")
    p.add_argument("outdir")
    p.add_argument("--no-render", action="store_true", help="write data files and script only")

    p = add("adversary", "build the adversarial (instance, prediction) pair against a probe policy")
    p.add_argument("--lambda", dest="lam", type=float, default=0.5)
    p.add_argument("--epsilon", type=float, default=0.01)
    p.add_argument("--probe", required=True, choices=["greedy", "blind", "pdla", "pbb", "apb", "robust"])
    p.add_argument("--beta", type=float, default=1.0, help="probe parameter for pdla")
    p.add_argument("--probe-lambda", type=float, default=0.5, help="probe parameter for pbb/apb/robust")
    p.add_argument("-d", type=float, default=100.0)
    p.add_argument("-o", "--output", help="write <output>.instance and <output>.prediction")

    return parser


def _write_or_print(text: str, path: str | None) -> None:
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _cmd_gen(args) -> int:
    dist = DistributionSpec.parse(args.dist)
    instance = generate_instance(dist, args.d, args.T, args.seed)
    _write_or_print(fileio.dumps_instance(instance), args.output)
    return 0


def _cmd_perturb(args) -> int:
    instance = fileio.read_instance(args.instance)
    dist = DistributionSpec.parse(args.dist)
    predicted = perturb_instance(instance, args.r, dist, args.seed)
    _write_or_print(fileio.dumps_instance(predicted), args.output)
    return 0


def _cmd_solve(args) -> int:
    instance = fileio.read_instance(args.instance)
    solution, value = optimal_solution(instance)
    out = args.output or args.instance + ".sol"
    fileio.write_solution(out, solution)
    print(_fmt(value))
    return 0


def _cmd_eval(args) -> int:
    instance = fileio.read_instance(args.instance)
    solution = fileio.read_solution(args.solution)
    cost = evaluate(instance, solution)
    print(f"acks={cost.num_acks} delay={_fmt(cost.delay_cost)} total={_fmt(cost.total)}")
    return 0


def _cmd_error(args) -> int:
    instance = fileio.read_instance(args.instance)
    predicted = fileio.read_instance(args.prediction)
    report = prediction_error(instance, predicted)
    metrics = comparison_metrics(instance, predicted)
    print(f"eta={_fmt(report.eta)} absolute={_fmt(metrics['absolute'])} l1={_fmt(metrics['l1'])}")
    if args.partition:
        for (a, b), tau in zip(report.partition, report.per_interval_tau):
            print(f"interval {a} {b} tau={_fmt(tau)}")
    return 0


def _cmd_stabilize(args) -> int:
    instance = fileio.read_instance(args.instance)
    solution = stabilize(instance, args.lam)
    out = args.output or args.instance + ".stable.sol"
    fileio.write_solution(out, solution)
    opt = optimal_value(instance)
    cost = evaluate(instance, solution).total
    ratio = cost / opt if opt > 0 else 1.0
    print(f"cost={_fmt(cost)} opt={_fmt(opt)} ratio={_fmt(ratio)}")
    return 0


def _cmd_simulate(args) -> int:
    instance = fileio.read_instance(args.instance)
    if args.alg == "greedy":
        predicted = instance  # unused by the policy
    else:
        if not args.prediction:
            raise UsageError(f"--prediction is required for --alg {args.alg}")
        predicted = fileio.read_instance(args.prediction)
        if predicted.d != instance.d:
            raise ValueError("prediction and instance must share the delay factor")
    param = args.beta if args.alg == "pdla" else args.lam
    policy = build_policy(args.alg, param, predicted, instance.d)
    run = run_policy(instance, policy, collect_trace=args.trace)
    opt = optimal_value(instance)
    ratio = run.cost.total / opt if opt > 0 else (1.0 if run.cost.total == 0 else float("nan"))
    print(f"cost={_fmt(run.cost.total)} opt={_fmt(opt)} ratio={_fmt(ratio)}")
    if args.trace:
        for t, arrivals, decision, reason in run.trace:
            print(f"{t},{_fmt(arrivals)},{decision},{reason}")
    return 0


def _cmd_experiment(args) -> int:
    kwargs: dict = {}
    if args.config:
        with open(args.config) as fh:
            kwargs = parse_experiment_config(fh.read(), source=args.config)
    if args.dist:
        kwargs["distributions"] = tuple(DistributionSpec.parse(s) for s in args.dist)
    kwargs.setdefault("distributions", (DistributionSpec("poisson", 1.0),))
    if args.d is not None:
        kwargs["d"] = args.d
    if args.T is not None:
        kwargs["horizon"] = args.T
    if args.r_grid:
        kwargs["r_grid"] = tuple(float(tok) for tok in args.r_grid.split(",") if tok.strip())
    if args.seeds is not None:
        kwargs["seeds"] = args.seeds
    if args.alg:
        algs = []
        for tok in args.alg:
            name, _, param = tok.partition(":")
            algs.append((name.strip(), float(param) if param else None))
        kwargs["algorithms"] = tuple(algs)
    elif "algorithms" not in kwargs:
        kwargs["algorithms"] = DEFAULT_ALGORITHMS
    if args.workers is not None:
        kwargs["workers"] = args.workers
    if args.output:
        kwargs["output"] = args.output
    kwargs["master_seed"] = args.seed
    cfg = ExperimentConfig(**kwargs)
    rows = run_experiment(cfg)
    print(f"trials={len(rows)}" + (f" output={cfg.output}" if cfg.output else ""))
    return 0


def _cmd_plot(args) -> int:
    written = emit_plots(args.csv, args.outdir, render=not args.no_render)
    for path in written:
        print(path)
    return 0


def _cmd_adversary(args) -> int:
    param = args.beta if args.probe == "pdla" else args.probe_lambda
    factory = lambda predicted: build_policy(args.probe, param, predicted, args.d)  # noqa: E731
    instance, predicted = adversarial_pair(args.lam, args.epsilon, factory, d=args.d)
    run = run_policy(instance, build_policy(args.probe, param, predicted, args.d))
    opt = optimal_value(instance)
    eta = prediction_error(instance, predicted).eta
    bound = min((1.0 + args.lam - args.epsilon) * opt, opt + eta / args.lam)
    if args.output:
        fileio.write_instance(args.output + ".instance", instance)
        fileio.write_instance(args.output + ".prediction", predicted)
    print(f"cost={_fmt(run.cost.total)} opt={_fmt(opt)} eta={_fmt(eta)} bound={_fmt(bound)}")
    return 0


_COMMANDS = {
    "gen": _cmd_gen,
    "perturb": _cmd_perturb,
    "solve": _cmd_solve,
    "eval": _cmd_eval,
    "error": _cmd_error,
    "stabilize": _cmd_stabilize,
    "simulate": _cmd_simulate,
    "experiment": _cmd_experiment,
    "plot": _cmd_plot,
    "adversary": _cmd_adversary,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 2
    except (DapError, FeasibilityError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
