"""Command-line front end.

Exit codes: 0 success, 1 input error, 2 solve budget exceeded,
3 chain validation failure.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .concentration import (bounded_difference_check, borel_cantelli_ratio,
                            borel_cantelli_tail, concentration_report, fekete_report,
                            tail_vs_bound)
from .counterexample import markov_gap_report
from .errors import BudgetExceeded, ChainError, InstanceParseError
from .geometry import (Matching, Model, dump_instance_csv, generate_instance, read_instance_csv,
                       validate_matching)
from .process import (alpha, chain_from_json, lemma1_bounds, stationary, validate_chain)
from .rng import MASK64
from .solvers import SolveLimits, solve_bruteforce, solve_exact, solve_greedy_sweep

EXIT_OK, EXIT_INPUT, EXIT_BUDGET, EXIT_CHAIN = 0, 1, 2, 3

# execution details that must not change the report
_NOT_CONFIG = {"output", "csv", "workers", "func"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(EXIT_INPUT)


def _positive_int(text: str) -> int:
    try:
        value = float(text) if any(c in text for c in ".eE") else int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if value != int(value) or value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}")
    return int(value)


def _nonneg_int(text: str) -> int:
    return 0 if text.strip() == "0" else _positive_int(text)


def _positive_float(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not value > 0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text!r}")
    return value


def _seed(text: str) -> int:
    try:
        value = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer seed: {text!r}") from None
    if not 0 <= value <= MASK64:
        raise argparse.ArgumentTypeError("seed must fit in 64 unsigned bits")
    return value


def _int_list(text: str) -> list[int]:
    try:
        return [_positive_int(part) for part in text.split(",") if part.strip()]
    except argparse.ArgumentTypeError as exc:
        raise argparse.ArgumentTypeError(f"bad list {text!r}: {exc}") from None


_MODELS = {"uniform": Model.UNIFORM_SQUARE, "grid-x": Model.GRID_X}


def _config(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k not in _NOT_CONFIG}


def _emit(args, payload: dict) -> None:
    report = dict(payload)
    report["seed"] = getattr(args, "seed", None)
    report["version"] = __version__
    report["config"] = _config(args)
    text = json.dumps(report, indent=2, sort_keys=True) + "\n"
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _limits(args) -> SolveLimits:
    return SolveLimits(max_nodes=args.limits_nodes, time_budget=args.time_budget)


def cmd_gen(args) -> int:
    inst = generate_instance(args.n, args.seed, _MODELS[args.model])
    text = dump_instance_csv(inst)
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
        print(f"{args.output} seed={args.seed}")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_solve(args) -> int:
    inst = read_instance_csv(args.input)
    code = EXIT_OK
    extra = {}
    if args.solver == "exact":
        try:
            m = solve_exact(inst, _limits(args))
        except BudgetExceeded as exc:
            m, code = exc.incumbent, EXIT_BUDGET
    elif args.solver == "bruteforce":
        m = solve_bruteforce(inst)
    else:
        m, trace = solve_greedy_sweep(inst)
        m = Matching(m.pairs, optimal=False)
        extra["trace"] = {"labels": [lab.value for lab in trace.labels],
                          "increments": list(trace.increments)}
    assert validate_matching(inst, m).valid
    payload = m.to_json(inst.n)
    payload.update(extra)
    _emit(args, payload)
    return code


def cmd_chain(args) -> int:
    try:
        obj = json.loads(Path(args.input).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise UsageError(f"{args.input}: invalid JSON ({exc})") from None
    chain = chain_from_json(obj)
    check = validate_chain(chain)
    validation = {"stochastic": check.stochastic, "irreducible": check.irreducible,
                  "aperiodic": check.aperiodic, "period": check.period}
    if not check.ok:
        _emit(args, {"validation": validation})
        return EXIT_CHAIN
    s = stationary(chain)
    a = alpha(chain, s)
    report = lemma1_bounds(chain, args.epsilon, args.n, args.cap)
    _emit(args, {"validation": validation, "stationary": s.tolist(), "alpha": a,
                 "beta": (a - 0.83) / 3.0, "lemma1": report.to_json()})
    return EXIT_OK


def cmd_counterexample(args) -> int:
    if args.t < 3:
        raise UsageError("--t must be >= 3")
    if args.trials and args.seed is None:
        raise UsageError("--seed is required when --trials > 0")
    report = markov_gap_report(args.t, args.trials, args.seed, args.workers)
    _emit(args, report.to_json())
    return EXIT_OK


def _require(args, *names):
    for name in names:
        if getattr(args, name) is None:
            raise UsageError(f"--check {args.check} needs --{name.replace('_', '-')}")


def cmd_concentration(args) -> int:
    model = _MODELS[args.model]
    limits = _limits(args)
    if args.check == "borel":
        _require(args, "epsilon", "n0")
        _emit(args, {"epsilon": args.epsilon, "n0": args.n0,
                     "r": borel_cantelli_ratio(args.epsilon),
                     "bc_partial_sum": borel_cantelli_tail(args.epsilon, args.n0)})
        return EXIT_OK
    if args.check == "bounded-diff":
        _require(args, "n", "trials", "seed")
        res = bounded_difference_check(args.n, args.trials, args.perturbations, args.seed,
                                       args.solver, model, limits, args.workers)
        _emit(args, res.to_json())
    elif args.check == "tail":
        _require(args, "n", "epsilon", "trials", "seed")
        res = tail_vs_bound(args.n, args.epsilon, args.trials, args.seed, args.solver,
                            args.pilot_trials, model, limits, args.workers)
        _emit(args, res.to_json())
    elif args.check == "fekete":
        _require(args, "ns", "trials", "seed")
        res = fekete_report(args.ns, args.trials, args.seed, None, model, limits, args.workers)
        if args.csv:
            Path(args.csv).write_text(res.to_csv(), encoding="utf-8")
        _emit(args, res.to_json())
    else:
        _require(args, "n", "epsilon")
        a = None
        if args.chain:
            a = alpha(chain_from_json(json.loads(Path(args.chain).read_text(encoding="utf-8"))))
        if args.trials and args.seed is None:
            raise UsageError("--seed is required when --trials > 0")
        res = concentration_report(args.n, args.epsilon, args.trials or 0, args.seed,
                                   args.n0 or 1, args.perturbations, a, model, limits,
                                   args.workers)
        _emit(args, res.to_json())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="rectmatch", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, seed_required=False):
        p.add_argument("--output", help="write the report here instead of stdout")
        p.add_argument("--seed", type=_seed, required=seed_required)

    def solve_limits(p):
        p.add_argument("--limits-nodes", type=_positive_int, default=SolveLimits.max_nodes)
        p.add_argument("--time-budget", type=_positive_float, default=SolveLimits.time_budget)

    p = sub.add_parser("gen", help="generate a random instance CSV")
    common(p, seed_required=True)
    p.add_argument("--n", type=_positive_int, required=True)
    p.add_argument("--model", choices=sorted(_MODELS), default="uniform")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("solve", help="solve an instance CSV")
    p.add_argument("--input", required=True)
    p.add_argument("--output")
    p.add_argument("--solver", choices=["exact", "bruteforce", "greedy"], default="exact")
    solve_limits(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("chain", help="analyse a chain-spec JSON file")
    p.add_argument("--input", required=True)
    p.add_argument("--output")
    p.add_argument("--n", type=_positive_int, required=True)
    p.add_argument("--epsilon", type=_positive_float, required=True)
    p.add_argument("--cap", type=_positive_int, default=10**6)
    p.set_defaults(func=cmd_chain)

    p = sub.add_parser("counterexample", help="monotone alternating history probabilities")
    common(p)
    p.add_argument("--t", type=_positive_int, required=True)
    p.add_argument("--trials", type=_nonneg_int, default=0)
    p.add_argument("--workers", type=_positive_int, default=1)
    p.set_defaults(func=cmd_counterexample)

    p = sub.add_parser("concentration", help="bounded differences, tails, Fekete table")
    common(p)
    p.add_argument("--check", choices=["bounded-diff", "tail", "fekete", "borel", "report"],
                   required=True)
    p.add_argument("--n", type=_positive_int)
    p.add_argument("--ns", type=_int_list)
    p.add_argument("--trials", type=_positive_int)
    p.add_argument("--epsilon", type=_positive_float)
    p.add_argument("--n0", type=_positive_int)
    p.add_argument("--perturbations", type=_positive_int, default=3)
    p.add_argument("--pilot-trials", type=_positive_int)
    p.add_argument("--model", choices=sorted(_MODELS), default="grid-x")
    p.add_argument("--solver", choices=["exact", "bruteforce"], default="exact")
    p.add_argument("--chain", help="chain-spec JSON whose alpha sets beta")
    p.add_argument("--csv", help="fekete: also write the table as CSV")
    p.add_argument("--workers", type=_positive_int, default=1)
    solve_limits(p)
    p.set_defaults(func=cmd_concentration)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, InstanceParseError, OSError) as exc:
        print(f"rectmatch: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ChainError as exc:
        print(f"rectmatch: chain error: {exc}", file=sys.stderr)
        return EXIT_CHAIN
    except BudgetExceeded as exc:
        print(f"rectmatch: {exc}", file=sys.stderr)
        return EXIT_BUDGET


if __name__ == "__main__":
    sys.exit(main())
