"""Command-line front end: solve, compare, counterexample, aggregate-solve.

Exit codes: 0 converged, 2 cycled, 3 iteration budget exhausted, 1 for
I/O, validation, or usage errors.  Value tables and traces are CSV with a
header row; problem files are versioned JSON.  Set MINIMAXPI_LOG to
debug/info/warning/error for verbosity.
"""

import argparse
import logging
import os
import sys
from dataclasses import dataclass

import numpy as np

from . import async_pi, models
from .aggregation import (AggregationProbabilities, RepresentativeSets,
                          solve_with_aggregation)
from .classic_pi import (PIStatus, find_oscillating_game, hoffman_karp,
                         naive_separated_pi, pollatschek_avi_itzhak)
from .core import value_iterate
from .errors import (MaxItersExceeded, MaxStepsExceeded, MinimaxPIError,
                     ValidationError)
from .problem_io import game_payload, load_problem, save_problem

log = logging.getLogger("minimaxpi")

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_CYCLED = 2
EXIT_MAX_ITERS = 3

_GAME_KINDS = ("discounted_markov_game", "terminating_markov_game")
_STATUS_EXIT = {PIStatus.CONVERGED: EXIT_OK, PIStatus.CYCLED: EXIT_CYCLED,
                PIStatus.MAX_ITERS: EXIT_MAX_ITERS}


def _setup_logging():
    level = os.environ.get("MINIMAXPI_LOG", "warning").lower()
    chosen = {"debug": logging.DEBUG, "info": logging.INFO,
              "warning": logging.WARNING, "error": logging.ERROR}.get(level)
    if chosen is None:
        chosen = logging.WARNING
    logging.basicConfig(level=chosen, format="%(levelname)s %(name)s: %(message)s")


def _parse_params(text):
    params = {}
    if text:
        for item in text.split(","):
            if not item:
                continue
            key, _, value = item.partition("=")
            if not value:
                raise ValidationError(f"bad schedule parameter {item!r}")
            params[key] = value
    return params


def parse_schedule(spec):
    """Build a schedule from the mini-language, e.g. ``round_robin:k=10``,
    ``random:seed=7``, ``partitioned:p=4``, ``delayed:B=3,inner=round_robin``."""
    if spec is None:
        return async_pi.round_robin()
    name, _, rest = spec.partition(":")
    if name == "delayed":
        if "inner=" not in rest:
            raise ValidationError("delayed schedule needs inner=<spec>")
        head, inner_spec = rest.split("inner=", 1)
        params = _parse_params(head.rstrip(","))
        return async_pi.delayed(parse_schedule(inner_spec), int(params.get("B", 1)))
    params = _parse_params(rest)
    k = int(params.get("k", 10))
    if name == "round_robin":
        return async_pi.round_robin(k)
    if name == "random":
        if "seed" not in params:
            raise ValidationError("random schedule needs seed=<int>")
        return async_pi.random_fair(int(params["seed"]), k)
    if name == "partitioned":
        return async_pi.partitioned(int(params.get("p", 4)), k)
    raise ValidationError(f"unknown schedule {name!r}")


@dataclass
class SolveOutcome:
    exit_code: int
    values: np.ndarray | None
    iterations: int
    residual: float
    status: str
    trace: list


def _pi_outcome(result, values):
    res = result.residuals[-1] if result.residuals else 0.0
    trace = [(t + 1, "Iteration", "all", r, 0.0) for t, r in enumerate(result.residuals)]
    return SolveOutcome(_STATUS_EXIT[result.status], values, result.iterations,
                        res, result.status.value, trace)


def _sweep_trace(residuals):
    return [(k + 1, "Sweep", "all", r, 0.0) for k, r in enumerate(residuals)]


def _solve_game(game, algo, args, file_beta=None):
    beta = args.beta if args.beta is not None else file_beta
    if algo == "vi":
        result = models.shapley_value_iteration(game, tol=args.tol, max_iters=args.max_steps)
        return SolveOutcome(EXIT_OK, result.values, result.iterations,
                            result.residuals[-1], "Converged",
                            _sweep_trace(result.residuals))
    if algo == "hk":
        result = hoffman_karp(game, tol=args.tol, max_iters=args.max_steps)
        return _pi_outcome(result, result.values.values)
    if algo == "poa":
        result = pollatschek_avi_itzhak(game, tol=args.tol, max_iters=args.max_steps,
                                        optimistic_k=args.optimistic_k)
        return _pi_outcome(result, result.values.values)
    sep = models.separate_markov_game(game, beta)
    if algo == "naive":
        result = naive_separated_pi(sep, tol=args.tol, max_iters=args.max_steps,
                                    optimistic_k=args.optimistic_k)
        return _pi_outcome(result, sep.original_values(result.values[0]))
    return _solve_async(sep, args, scale=sep.beta.beta)


def _solve_async(problem, args, scale=1.0):
    schedule = parse_schedule(args.schedule)
    if args.parallel:
        state, steps = async_pi.run_parallel(problem, workers=args.parallel,
                                             tol=args.tol, max_steps=args.max_steps)
        return SolveOutcome(EXIT_OK, scale * state.j1.values, steps, 0.0,
                            "Converged", [])
    try:
        state, trace = async_pi.run(problem, schedule, tol=args.tol,
                                    max_steps=args.max_steps, seed=args.seed)
    except MaxStepsExceeded as exc:
        rows = [(r.step, r.kind, r.subset, r.residual1, r.residual2)
                for r in (exc.trace or [])]
        values = scale * exc.state.j1.values if exc.state is not None else None
        return SolveOutcome(EXIT_MAX_ITERS, values,
                            exc.state.t if exc.state else args.max_steps,
                            float("nan"), "MaxIters", rows)
    rows = [(r.step, r.kind, r.subset, r.residual1, r.residual2) for r in trace]
    last = max(trace[-1].residual1, trace[-1].residual2) if trace else 0.0
    return SolveOutcome(EXIT_OK, scale * state.j1.values, state.t, last,
                        "Converged", rows)


def _solve_separated(problem, algo, args, scale=1.0):
    if algo == "vi":
        result = value_iterate(problem, tol=args.tol, max_iters=args.max_steps)
        return SolveOutcome(EXIT_OK, scale * result.j1.values, result.iterations,
                            result.residuals[-1], "Converged",
                            _sweep_trace(result.residuals))
    if algo == "naive":
        result = naive_separated_pi(problem, tol=args.tol, max_iters=args.max_steps,
                                    optimistic_k=args.optimistic_k)
        return _pi_outcome(result, scale * result.values[0].values)
    if algo == "async":
        return _solve_async(problem, args, scale=scale)
    raise ValidationError(f"algorithm {algo!r} needs a Markov game problem")


def _solve_dispatch(loaded, algo, args):
    if loaded.kind in _GAME_KINDS:
        return _solve_game(loaded.model, algo, args, file_beta=loaded.beta)
    if loaded.kind == "separated_model":
        problem = models.separated_model_to_problem(loaded.model)
        return _solve_separated(problem, algo, args)
    beta = args.beta if args.beta is not None else loaded.beta
    beta = models._as_beta(beta, loaded.model.alpha)
    problem = models.minimax_control_to_problem(loaded.model, beta)
    return _solve_separated(problem, algo, args, scale=beta.beta)


def _write_values(path, values):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("index,value\n")
        for i, v in enumerate(values):
            fh.write(f"{i},{float(v)!r}\n")


def _write_trace(path, algorithm, rows):
    # the wall_clock column is reserved: emitting measured times would break
    # the command's byte-for-byte determinism guarantee
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("step,algorithm,kind,subset,residual1,residual2,wall_clock\n")
        for step, kind, subset, r1, r2 in rows:
            fh.write(f"{step},{algorithm},{kind},{subset},{float(r1)!r},{float(r2)!r},0.0\n")


def cmd_solve(args):
    loaded = load_problem(args.problem)
    outcome = _solve_dispatch(loaded, args.algo, args)
    log.info("solve %s with %s: %s after %d iterations",
             args.problem, args.algo, outcome.status, outcome.iterations)
    if outcome.values is not None:
        for i, v in enumerate(outcome.values):
            print(f"{i},{float(v)!r}")
    print(f"# status={outcome.status} iterations={outcome.iterations}", file=sys.stderr)
    if args.out and outcome.values is not None:
        _write_values(args.out, outcome.values)
    if args.trace:
        _write_trace(args.trace, args.algo, outcome.trace)
    return outcome.exit_code


def cmd_compare(args):
    algos = [a.strip() for a in args.algos.split(",") if a.strip()]
    if len(algos) < 2:
        raise ValidationError("compare needs at least two algorithms")
    loaded = load_problem(args.problem)
    outcomes = {}
    for algo in algos:
        outcomes[algo] = _solve_dispatch(loaded, algo, args)
    print(f"{'algorithm':<10} {'status':<10} {'iterations':>10} {'residual':>12}")
    for algo in algos:
        o = outcomes[algo]
        print(f"{algo:<10} {o.status:<10} {o.iterations:>10} {o.residual:>12.3e}")
    converged = [a for a in algos if outcomes[a].status == "Converged"]
    worst = 0.0
    for i, a in enumerate(converged):
        for b in converged[i + 1 :]:
            gap = float(np.max(np.abs(outcomes[a].values - outcomes[b].values)))
            worst = max(worst, gap)
            print(f"# |{a} - {b}| = {gap!r}")
    if args.out:
        for algo in algos:
            if outcomes[algo].values is not None:
                _write_values(f"{args.out}.{algo}.csv", outcomes[algo].values)
    if worst > 10 * args.tol:
        print(f"# converged algorithms disagree by {worst!r} > 10*tol", file=sys.stderr)
        return EXIT_ERROR
    return EXIT_OK


def cmd_counterexample(args):
    game, report = find_oscillating_game()
    save_problem(game_payload(game), args.out)
    note = args.out + ".cycle.txt"
    with open(note, "w", encoding="utf-8") as fh:
        fh.write("All-pairs policy iteration oscillates on this instance.\n")
        fh.write(f"cycle length: {report['cycle_length']}\n")
        fh.write(f"alternating values: {report['cycling_values']}\n")
        fh.write(f"stage payoffs: {report['payoffs']}\n")
        fh.write(f"per-pair effective discounts: {report['stage_discounts']}\n")
    print(f"wrote {args.out} (cycle of length {report['cycle_length']}; "
          f"values alternate between {report['cycling_values']})")
    return EXIT_OK


def cmd_aggregate_solve(args):
    loaded = load_problem(args.problem)
    if loaded.kind == "separated_model":
        problem, scale = models.separated_model_to_problem(loaded.model), 1.0
    elif loaded.kind == "minimax_control":
        beta = models._as_beta(args.beta if args.beta is not None else loaded.beta,
                               loaded.model.alpha)
        problem, scale = models.minimax_control_to_problem(loaded.model, beta), beta.beta
    else:
        raise ValidationError("aggregate-solve needs a separated or control problem")
    block = loaded.aggregation
    if not block or "reps1" not in block or "reps2" not in block:
        raise ValidationError("problem file lacks an aggregation block with reps1/reps2")
    reps = RepresentativeSets(np.asarray(block["reps1"], dtype=int),
                              np.asarray(block["reps2"], dtype=int))
    phi = None
    if block.get("phi1") is not None or block.get("phi2") is not None:
        if block.get("phi1") is None or block.get("phi2") is None:
            raise ValidationError("supply both phi1 and phi2 or neither")
        phi = AggregationProbabilities(np.asarray(block["phi1"], dtype=float),
                                       np.asarray(block["phi2"], dtype=float))
    sol = solve_with_aggregation(problem, reps, phi, tol=args.tol,
                                 max_steps=args.max_steps)
    print(f"# lookahead-pair value vs exact fixed point: gap = {sol.gap!r}")
    for i, v in enumerate(sol.j1_full.values):
        print(f"{i},{float(scale * v)!r}")
    if args.out:
        _write_values(args.out, scale * sol.j1_full.values)
    return EXIT_OK


def _add_common(parser):
    parser.add_argument("--tol", type=float, default=1e-8)
    parser.add_argument("--max-steps", type=int, default=10**6)
    parser.add_argument("--schedule", default=None,
                        help="round_robin:k=10 | random:seed=S | partitioned:p=4 "
                             "| delayed:B=3,inner=round_robin")
    parser.add_argument("--beta", type=float, default=None)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--optimistic-k", type=int, default=None)
    parser.add_argument("--out", default=None)
    parser.add_argument("--trace", default=None)
    parser.add_argument("--parallel", type=int, default=None)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="minimaxpi",
        description="Solvers for sequential zero-sum games and minimax control")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="run one algorithm on a problem file")
    p.add_argument("problem")
    p.add_argument("--algo", required=True, choices=("vi", "hk", "poa", "naive", "async"))
    _add_common(p)
    p.set_defaults(handler=cmd_solve)

    p = sub.add_parser("compare", help="run several algorithms and cross-check")
    p.add_argument("problem")
    p.add_argument("--algos", required=True, help="comma-separated list")
    _add_common(p)
    p.set_defaults(handler=cmd_compare)

    p = sub.add_parser("counterexample",
                       help="emit a game on which all-pairs policy iteration cycles")
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_counterexample)

    p = sub.add_parser("aggregate-solve",
                       help="solve a reduced problem over representative states")
    p.add_argument("problem")
    _add_common(p)
    p.set_defaults(handler=cmd_aggregate_solve)
    return parser


def main(argv=None):
    _setup_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except (MaxItersExceeded, MaxStepsExceeded) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MAX_ITERS
    except MinimaxPIError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
