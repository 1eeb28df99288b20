"""Command-line pipeline: generate instances, solve them, run experiments.

Exit codes: 0 success, 1 usage or file errors, 2 solver finished with unmet
constraints.  All randomness flows from --seed; no invocation reads the clock
for anything except the informational wall-time column in summary CSVs.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .experiments import (ExperimentRun, fmt9, read_summary, replay_run, run_cf_sweep,
                          run_comparison, run_convergence_study, trace_filename, write_trace)
from .fuzzy import PreferenceProfile
from .ga import FitnessMode, GAConfig, evolve
from .model import FuzzyConstraint, InstanceFormatError, load_instance, save_instance
from .workload import SEQUENCE_ONLY, MixedShape, SpecInvalid, WorkloadSpec, generate_instance

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INFEASIBLE = 2


class _Parser(argparse.ArgumentParser):
    """argparse exits with code 2 on bad flags; the contract here is 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


class CliError(Exception):
    pass


def _parse_int_list(text: str) -> list[int]:
    return [int(part) for part in text.split(",") if part]


def _parse_float_list(text: str) -> list[float]:
    return [float(part) for part in text.split(",") if part]


def _parse_seeds(text: str) -> list[int]:
    """Either '0..9' (inclusive range) or a comma list '0,3,5'."""
    if ".." in text:
        lo, hi = text.split("..", 1)
        return list(range(int(lo), int(hi) + 1))
    return _parse_int_list(text)


def _add_ga_flags(parser: argparse.ArgumentParser) -> None:
    defaults = GAConfig()
    parser.add_argument("--population", type=int, default=defaults.population_size)
    parser.add_argument("--crossover-prob", type=float, default=defaults.crossover_prob)
    parser.add_argument("--mutation-prob", type=float, default=defaults.mutation_prob)
    parser.add_argument("--elites", type=int, default=defaults.elite_count)
    parser.add_argument("--max-gens", type=int, default=defaults.max_generations)
    parser.add_argument("--stall-gens", type=int, default=defaults.stall_generations)
    parser.add_argument("--penalty-weight", type=float, default=defaults.penalty_weight)
    parser.add_argument("--dynamic-penalty", action=argparse.BooleanOptionalAction,
                        default=defaults.dynamic_penalty)
    parser.add_argument("--seed", type=int, default=0)


def _config_from_args(args, seed=None) -> GAConfig:
    return GAConfig(
        population_size=args.population,
        crossover_prob=args.crossover_prob,
        mutation_prob=args.mutation_prob,
        elite_count=args.elites,
        max_generations=args.max_gens,
        stall_generations=args.stall_gens,
        penalty_weight=args.penalty_weight,
        dynamic_penalty=args.dynamic_penalty,
        rng_seed=args.seed if seed is None else seed)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="qoscompose",
                     description="Fuzzy-rank guided genetic service composition")
    sub = parser.add_subparsers(dest="command", required=True)

    p_gen = sub.add_parser("gen", help="generate a problem instance file")
    p_gen.add_argument("--tasks", type=int, required=True)
    p_gen.add_argument("--candidates", type=int, required=True)
    p_gen.add_argument("--shape", choices=["sequence", "mixed"], default="sequence")
    p_gen.add_argument("--seed", type=int, default=0)
    p_gen.add_argument("--constraint", action="append", default=[],
                       metavar="CRITERION=TERM",
                       help="fuzzy constraint, e.g. cost='cheap' (repeatable)")
    p_gen.add_argument("--out", required=True)

    p_solve = sub.add_parser("solve", help="optimize one instance")
    p_solve.add_argument("instance")
    p_solve.add_argument("--profile", help="preference profile JSON")
    p_solve.add_argument("--fitness-mode", choices=[m.value for m in FitnessMode],
                         default=FitnessMode.FUZZY.value)
    p_solve.add_argument("--trace-out", help="write the per-generation trace CSV here")
    _add_ga_flags(p_solve)

    p_sweep = sub.add_parser("sweep-cf", help="rank spread against confidence factor")
    p_sweep.add_argument("--criterion", required=True)
    p_sweep.add_argument("--cfs", required=True, help="comma list, e.g. 0.2,0.6,1.0")
    p_sweep.add_argument("--points", type=int, default=100)
    p_sweep.add_argument("--out-dir")

    p_bench = sub.add_parser("bench", help="convergence study over task counts")
    p_bench.add_argument("--task-counts", required=True, help="comma list, e.g. 10,20,30")
    p_bench.add_argument("--candidates", type=int, default=30)
    p_bench.add_argument("--seeds", default="0..9", help="'0..9' or comma list")
    p_bench.add_argument("--out-dir")
    _add_ga_flags(p_bench)

    p_cmp = sub.add_parser("compare", help="fuzzy fitness vs weighted-sum baseline")
    p_cmp.add_argument("--task-counts", required=True)
    p_cmp.add_argument("--candidates", type=int, default=30)
    p_cmp.add_argument("--seeds", default="0..9")
    p_cmp.add_argument("--out-dir")
    _add_ga_flags(p_cmp)

    p_replay = sub.add_parser("replay", help="re-run one summary row deterministically")
    p_replay.add_argument("--summary", required=True)
    p_replay.add_argument("--row", type=int, required=True, help="0-based data row index")
    p_replay.add_argument("--out-dir")

    return parser


def _load_profile(path: str | None) -> PreferenceProfile:
    if path is None:
        return PreferenceProfile.equal()
    with open(path, encoding="utf-8") as fh:
        return PreferenceProfile.from_dict(json.load(fh))


def cmd_gen(args) -> int:
    if args.tasks < 1:
        raise CliError("--tasks must be >= 1")
    if args.candidates < 1:
        raise CliError("--candidates must be >= 1")
    shape = SEQUENCE_ONLY if args.shape == "sequence" else MixedShape()
    constraints = []
    for text in args.constraint:
        if "=" not in text:
            raise CliError(f"--constraint must look like criterion=term, got {text!r}")
        criterion, term = text.split("=", 1)
        constraints.append((criterion.strip(), term.strip()))
    spec = WorkloadSpec(args.tasks, args.candidates, shape, rng_seed=args.seed)
    instance = generate_instance(
        spec, tuple(FuzzyConstraint(c, t) for c, t in constraints))
    save_instance(instance, args.out)
    print(f"instance: {args.out}")
    print(f"tasks: {args.tasks}  candidates per task: {args.candidates}")
    print(f"genotype space size: {instance.search_space_size()}")
    return EXIT_OK


def cmd_solve(args) -> int:
    instance = load_instance(args.instance)
    profile = _load_profile(args.profile)
    config = _config_from_args(args)
    mode = FitnessMode.parse(args.fitness_mode)
    result = evolve(instance, profile, config, mode)

    print(f"instance: {args.instance}")
    print(f"tasks: {instance.task_count}  space: {instance.search_space_size()}")
    print(f"mode: {mode.value}  seed: {config.rng_seed}")
    print("best assignment:")
    for task, gene in zip(instance.tasks, result.best):
        print(f"  {task.name} -> {task.candidates[gene].id}")
    qos = result.best_qos
    print(f"aggregate: cost={fmt9(qos.cost)} response_time={fmt9(qos.response_time)} "
          f"availability={fmt9(qos.availability)} reliability={fmt9(qos.reliability)}")
    print(f"raw_fitness: {fmt9(result.best_raw_fitness)}")
    print(f"penalized_fitness: {fmt9(result.best_fitness)}")
    variables = profile.variables()
    for constraint, delta in zip(instance.constraints, result.constraint_violations):
        bound = constraint.bind(variables)
        print(f"constraint: {bound.criterion}={bound.term} "
              f"bounds=[{fmt9(bound.q_min)},{fmt9(bound.q_max)}] delta={fmt9(delta)}")
    print(f"generations_run: {result.generations_run}")
    print(f"evaluations: {result.evaluations}")
    feasible = result.feasible
    print(f"status: {'feasible' if feasible else 'infeasible'}")
    if args.trace_out:
        write_trace(Path(args.trace_out), result.fitness_trace)
        print(f"trace: {args.trace_out}")
    return EXIT_OK if feasible else EXIT_INFEASIBLE


def cmd_sweep_cf(args) -> int:
    cfs = _parse_float_list(args.cfs)
    if not cfs:
        raise CliError("--cfs must name at least one value")
    rows = run_cf_sweep(args.criterion, cfs, args.points, args.out_dir)
    print("criterion cf spread min_rank max_rank")
    for row in rows:
        print(f"{row.criterion} {fmt9(row.cf)} {fmt9(row.spread)} "
              f"{fmt9(row.min_rank)} {fmt9(row.max_rank)}")
    if args.out_dir:
        print(f"wrote: {Path(args.out_dir) / f'summary_sweepcf_{args.criterion}.csv'}")
    return EXIT_OK


def _print_summary(runs: list[ExperimentRun]) -> None:
    print("experiment mode seed tasks candidates final_fitness plateau violations")
    for run in runs:
        print(f"{run.experiment} {run.mode} {run.seed} {run.tasks} {run.candidates} "
              f"{fmt9(run.final_fitness)} {run.plateau_generation} "
              f"{fmt9(run.violation_sum)}")


def cmd_bench(args) -> int:
    task_counts = _parse_int_list(args.task_counts)
    seeds = _parse_seeds(args.seeds)
    report = run_convergence_study(task_counts, args.candidates, seeds,
                                   _config_from_args(args), args.out_dir)
    _print_summary(report.runs)
    for key in sorted(report.medians):
        print(f"median {key}: {fmt9(report.medians[key])}")
    for key, ok in report.checks.items():
        print(f"check {key}: {'pass' if ok else 'fail'}")
    return EXIT_OK


def cmd_compare(args) -> int:
    task_counts = _parse_int_list(args.task_counts)
    seeds = _parse_seeds(args.seeds)
    report = run_comparison(task_counts, args.candidates, seeds,
                            _config_from_args(args), args.out_dir)
    _print_summary(report.runs)
    for key in sorted(report.medians):
        print(f"median {key}: {fmt9(report.medians[key])}")
    for key, ok in report.checks.items():
        print(f"check {key}: {'pass' if ok else 'fail'}")
    return EXIT_OK


def cmd_replay(args) -> int:
    rows = read_summary(args.summary)
    if not 0 <= args.row < len(rows):
        raise CliError(f"--row must be in [0, {len(rows)}), got {args.row}")
    run, result = replay_run(rows[args.row])
    out_dir = Path(args.out_dir) if args.out_dir else Path(args.summary).parent
    replay_path = out_dir / f"replay_{trace_filename(run)}"
    write_trace(replay_path, result.fitness_trace)
    print(f"replayed: {run.experiment} mode={run.mode} tasks={run.tasks} seed={run.seed}")
    print(f"final_fitness: {fmt9(run.final_fitness)}")
    print(f"plateau_generation: {run.plateau_generation}")
    print(f"trace: {replay_path}")
    original = out_dir / trace_filename(run)
    if original.exists():
        same = original.read_bytes() == replay_path.read_bytes()
        print(f"matches_original: {'yes' if same else 'no'}")
        if not same:
            return EXIT_USAGE
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    handlers = {
        "gen": cmd_gen,
        "solve": cmd_solve,
        "sweep-cf": cmd_sweep_cf,
        "bench": cmd_bench,
        "compare": cmd_compare,
        "replay": cmd_replay,
    }
    try:
        return handlers[args.command](args)
    except (CliError, SpecInvalid, InstanceFormatError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
