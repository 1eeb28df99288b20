"""Desk-scale experiment harness: CF sweeps, convergence, scaling, comparisons.

Every run is fully derivable from (experiment id, seed, config): instances are
regenerated from the seed, so any summary row can be replayed to a
byte-identical trace.  Wall-clock times are recorded for information only and
are never asserted against.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass, fields
from pathlib import Path
from statistics import median

import numpy as np

from .fuzzy import (CRITERIA, DEFAULT_UNIVERSES, PreferenceProfile, build_default_variables,
                    default_rank_variable, infer_rank_batch, rule_base_from_cfs)
from .ga import FitnessMode, GAConfig, GAResult, TraceRow, brute_force_optimum, evolve
from .model import FuzzyConstraint, ProblemInstance
from .workload import DEFAULT_QOS_RANGES, SEQUENCE_ONLY, WorkloadSpec, generate_instance

# Fixed harness defaults, so published CSVs are reproducible.
DEFAULT_SEEDS = tuple(range(10))
ORACLE_SPACE_LIMIT = 100_000
FEASIBLE_COST_RANGE = (5.0, 45.0)  # aggregate of N tasks stays below the "cheap" bound 50*N


def fmt9(value: float) -> str:
    return format(float(value), ".9g")


def scaled_profile(task_count: int, grade: int = 100) -> PreferenceProfile:
    """Equal-importance profile with cost/time universes scaled to the task count.

    Sums over a sequence of N tasks land on [0, N * default_hi], so the input
    variables are stretched accordingly; availability/reliability stay [0, 1].
    """
    cost_hi = DEFAULT_UNIVERSES["cost"][1] * task_count
    rt_hi = DEFAULT_UNIVERSES["response_time"][1] * task_count
    return PreferenceProfile.equal(grade, {"cost": (0.0, cost_hi),
                                           "response_time": (0.0, rt_hi)})


def bench_instance(task_count: int, candidates: int, seed: int,
                   feasible: bool = False) -> ProblemInstance:
    """Sequence workflow with a 'cost must be cheap' constraint.

    With feasible=True candidate costs are sampled from a range whose N-task
    sum always stays inside the constraint support, so every assignment is
    feasible by construction.
    """
    ranges = dict(DEFAULT_QOS_RANGES)
    if feasible:
        ranges["cost"] = FEASIBLE_COST_RANGE
    spec = WorkloadSpec(task_count, candidates, SEQUENCE_ONLY, ranges, seed)
    return generate_instance(spec, (FuzzyConstraint("cost", "cheap"),))


@dataclass
class ExperimentRun:
    experiment: str
    mode: str
    seed: int
    tasks: int
    candidates: int
    population: int
    max_generations: int
    stall_generations: int
    crossover_prob: float
    mutation_prob: float
    elite_count: int
    penalty_weight: float
    dynamic_penalty: bool
    final_fitness: float
    plateau_generation: int
    violation_sum: float
    oracle_share: float | None
    wall_ms: float


SUMMARY_COLUMNS = [f.name for f in fields(ExperimentRun)]


@dataclass
class SweepRow:
    criterion: str
    cf: float
    sweep_points: int
    min_rank: float
    max_rank: float
    spread: float


SWEEP_COLUMNS = [f.name for f in fields(SweepRow)]


@dataclass
class ExperimentReport:
    experiment: str
    runs: list[ExperimentRun]
    medians: dict[str, float]
    checks: dict[str, bool]


def trace_filename(run: ExperimentRun) -> str:
    tag = (f"{run.experiment}-{run.mode}-t{run.tasks}c{run.candidates}"
           f"p{run.population}g{run.max_generations}")
    return f"trace_{tag}_{run.seed}.csv"


def write_trace(path: Path, trace: list[TraceRow]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["gen", "best_fitness", "mean_fitness", "violation_sum"])
        for row in trace:
            writer.writerow([row.gen, fmt9(row.best), fmt9(row.mean), fmt9(row.violation_sum)])


def write_summary(path: Path, runs: list[ExperimentRun]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SUMMARY_COLUMNS)
        for run in runs:
            record = []
            for name in SUMMARY_COLUMNS:
                value = getattr(run, name)
                if isinstance(value, bool):
                    record.append("true" if value else "false")
                elif value is None:
                    record.append("")
                elif isinstance(value, float):
                    record.append(fmt9(value))
                else:
                    record.append(str(value))
            writer.writerow(record)


def write_sweep(path: Path, rows: list[SweepRow]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SWEEP_COLUMNS)
        for row in rows:
            writer.writerow([row.criterion, fmt9(row.cf), row.sweep_points,
                             fmt9(row.min_rank), fmt9(row.max_rank), fmt9(row.spread)])


def _execute(experiment: str, instance: ProblemInstance, profile: PreferenceProfile,
             config: GAConfig, mode: FitnessMode, seed: int, tasks: int, candidates: int,
             oracle_raw: float | None = None) -> tuple[ExperimentRun, GAResult]:
    start = time.perf_counter()
    result = evolve(instance, profile, config, mode)
    wall_ms = (time.perf_counter() - start) * 1000.0
    share = None
    if oracle_raw is not None and oracle_raw > 0:
        share = result.best_raw_fitness / oracle_raw
    run = ExperimentRun(
        experiment=experiment, mode=mode.value, seed=seed, tasks=tasks, candidates=candidates,
        population=config.population_size, max_generations=config.max_generations,
        stall_generations=config.stall_generations, crossover_prob=config.crossover_prob,
        mutation_prob=config.mutation_prob, elite_count=config.elite_count,
        penalty_weight=config.penalty_weight, dynamic_penalty=config.dynamic_penalty,
        final_fitness=result.fitness_trace[-1].best,
        plateau_generation=result.plateau_generation(),
        violation_sum=float(sum(result.constraint_violations)),
        oracle_share=share, wall_ms=wall_ms)
    return run, result


def _maybe_write(out_dir, run: ExperimentRun, result: GAResult) -> None:
    if out_dir is not None:
        write_trace(Path(out_dir) / trace_filename(run), result.fitness_trace)


def run_cf_sweep(criterion: str, cf_values: list[float], sweep_points: int = 100,
                 out_dir=None) -> list[SweepRow]:
    """Spread of the rank over a one-criterion sweep, per CF value.

    The swept criterion's CF takes each value in turn while the other three
    stay at 1; non-swept inputs sit at the peaks of their middle terms.
    """
    if criterion not in CRITERIA:
        raise ValueError(f"unknown criterion {criterion!r}")
    variables = build_default_variables()
    rank = default_rank_variable()
    rows = []
    for cf in cf_values:
        if not 0.0 <= cf <= 1.0:
            raise ValueError(f"cf must be in [0, 1], got {cf}")
        cfs = {crit: 1.0 for crit in CRITERIA}
        cfs[criterion] = cf
        rule_base = rule_base_from_cfs(cfs, variables, rank)
        matrix = np.empty((sweep_points, len(CRITERIA)))
        for col, crit in enumerate(CRITERIA):
            lo, hi = next(v.universe for v in variables if v.name == crit)
            if crit == criterion:
                matrix[:, col] = np.linspace(lo, hi, sweep_points)
            else:
                matrix[:, col] = (lo + hi) / 2.0  # middle term peak
        ranks = infer_rank_batch(rule_base, variables, matrix)
        rows.append(SweepRow(criterion, cf, sweep_points,
                             float(ranks.min()), float(ranks.max()),
                             float(ranks.max() - ranks.min())))
    if out_dir is not None:
        write_sweep(Path(out_dir) / f"summary_sweepcf_{criterion}.csv", rows)
    return rows


def run_convergence_study(task_counts: list[int], candidates: int,
                          seeds=DEFAULT_SEEDS, config: GAConfig | None = None,
                          out_dir=None) -> ExperimentReport:
    """Plateau generations per task count; larger workflows should plateau later."""
    base = config or GAConfig()
    runs = []
    for tasks in task_counts:
        profile = scaled_profile(tasks)
        for seed in seeds:
            instance = bench_instance(tasks, candidates, seed)
            cfg = GAConfig(**{**_config_kwargs(base), "rng_seed": seed})
            run, result = _execute("bench", instance, profile, cfg, FitnessMode.FUZZY,
                                   seed, tasks, candidates)
            _maybe_write(out_dir, run, result)
            runs.append(run)
    medians = {}
    for tasks in task_counts:
        medians[f"plateau_t{tasks}"] = median(
            r.plateau_generation for r in runs if r.tasks == tasks)
        medians[f"fitness_t{tasks}"] = median(
            r.final_fitness for r in runs if r.tasks == tasks)
    ordered = [medians[f"plateau_t{t}"] for t in task_counts]
    checks = {"plateau_increases_with_tasks": all(a < b for a, b in zip(ordered, ordered[1:]))}
    report = ExperimentReport("bench", runs, medians, checks)
    if out_dir is not None:
        write_summary(Path(out_dir) / "summary_bench.csv", runs)
    return report


def run_scale_study(scaled: list[tuple[int, int, int, int]], seeds=tuple(range(5)),
                    config: GAConfig | None = None, out_dir=None) -> ExperimentReport:
    """Fitness under different (population, max_generations) budgets.

    Entries are (tasks, candidates, population, max_generations); entries that
    share (tasks, candidates) form a budget ladder, and the larger budget's
    median final fitness should not be lower.
    """
    base = config or GAConfig()
    runs = []
    for tasks, candidates, population, max_gens in scaled:
        profile = scaled_profile(tasks)
        for seed in seeds:
            instance = bench_instance(tasks, candidates, seed)
            cfg = GAConfig(**{**_config_kwargs(base), "population_size": population,
                              "max_generations": max_gens, "rng_seed": seed})
            run, result = _execute("scale", instance, profile, cfg, FitnessMode.FUZZY,
                                   seed, tasks, candidates)
            _maybe_write(out_dir, run, result)
            runs.append(run)
    medians = {}
    for tasks, candidates, population, max_gens in scaled:
        key = f"fitness_t{tasks}c{candidates}p{population}g{max_gens}"
        medians[key] = median(r.final_fitness for r in runs
                              if (r.tasks, r.candidates, r.population, r.max_generations)
                              == (tasks, candidates, population, max_gens))
    checks = {}
    by_size: dict[tuple[int, int], list[tuple[int, int]]] = {}
    for tasks, candidates, population, max_gens in scaled:
        by_size.setdefault((tasks, candidates), []).append((population, max_gens))
    for (tasks, candidates), budgets in by_size.items():
        if len(budgets) < 2:
            continue
        budgets = sorted(budgets, key=lambda b: b[0] * b[1])
        small = medians[f"fitness_t{tasks}c{candidates}p{budgets[0][0]}g{budgets[0][1]}"]
        large = medians[f"fitness_t{tasks}c{candidates}p{budgets[-1][0]}g{budgets[-1][1]}"]
        checks[f"budget_helps_t{tasks}c{candidates}"] = large >= small
    report = ExperimentReport("scale", runs, medians, checks)
    if out_dir is not None:
        write_summary(Path(out_dir) / "summary_scale.csv", runs)
    return report


def run_comparison(task_counts: list[int], candidates: int, seeds=DEFAULT_SEEDS,
                   config: GAConfig | None = None, out_dir=None) -> ExperimentReport:
    """Fuzzy-rank fitness versus the weighted-sum baseline on shared instances."""
    base = config or GAConfig()
    runs = []
    for tasks in task_counts:
        profile = scaled_profile(tasks)
        for seed in seeds:
            instance = bench_instance(tasks, candidates, seed)
            oracle = {}
            if instance.search_space_size() <= ORACLE_SPACE_LIMIT:
                for mode in (FitnessMode.FUZZY, FitnessMode.WEIGHTED_SUM):
                    oracle[mode] = brute_force_optimum(instance, profile, mode).raw_fitness
            cfg = GAConfig(**{**_config_kwargs(base), "rng_seed": seed})
            for mode in (FitnessMode.FUZZY, FitnessMode.WEIGHTED_SUM):
                run, result = _execute("compare", instance, profile, cfg, mode, seed,
                                       tasks, candidates, oracle.get(mode))
                _maybe_write(out_dir, run, result)
                runs.append(run)
    medians = {}
    for tasks in task_counts:
        for mode in (FitnessMode.FUZZY, FitnessMode.WEIGHTED_SUM):
            sel = [r for r in runs if r.tasks == tasks and r.mode == mode.value]
            medians[f"plateau_t{tasks}_{mode.value}"] = median(
                r.plateau_generation for r in sel)
            medians[f"fitness_t{tasks}_{mode.value}"] = median(r.final_fitness for r in sel)
    checks = {}
    for tasks in task_counts:
        if tasks >= 20:
            checks[f"fuzzy_plateaus_no_later_t{tasks}"] = (
                medians[f"plateau_t{tasks}_fuzzy"]
                <= medians[f"plateau_t{tasks}_weighted-sum"])
    report = ExperimentReport("compare", runs, medians, checks)
    if out_dir is not None:
        write_summary(Path(out_dir) / "summary_compare.csv", runs)
    return report


def _config_kwargs(config: GAConfig) -> dict:
    return {f.name: getattr(config, f.name) for f in fields(GAConfig)}


def read_summary(path) -> list[dict]:
    with open(path, encoding="utf-8", newline="") as fh:
        return list(csv.DictReader(fh))


def replay_run(row: dict) -> tuple[ExperimentRun, GAResult]:
    """Re-execute one summary row from its recorded seed and configuration.

    The regenerated trace matches the original byte for byte; only the wall
    time differs.
    """
    experiment = row["experiment"]
    if experiment not in ("bench", "scale", "compare"):
        raise ValueError(f"cannot replay experiment {experiment!r}")
    tasks = int(row["tasks"])
    candidates = int(row["candidates"])
    seed = int(row["seed"])
    config = GAConfig(
        population_size=int(row["population"]),
        crossover_prob=float(row["crossover_prob"]),
        mutation_prob=float(row["mutation_prob"]),
        elite_count=int(row["elite_count"]),
        max_generations=int(row["max_generations"]),
        stall_generations=int(row["stall_generations"]),
        penalty_weight=float(row["penalty_weight"]),
        dynamic_penalty=row["dynamic_penalty"] == "true",
        rng_seed=seed)
    instance = bench_instance(tasks, candidates, seed)
    profile = scaled_profile(tasks)
    mode = FitnessMode.parse(row["mode"])
    oracle_raw = None
    if row.get("oracle_share"):
        oracle_raw = brute_force_optimum(instance, profile, mode).raw_fitness
    return _execute(experiment, instance, profile, config, mode, seed, tasks, candidates,
                    oracle_raw)
