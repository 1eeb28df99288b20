"""Elitist genetic optimizer over candidate-service assignments.

Fitness is the fuzzy rank of the aggregated QoS (normalized to [0, 1]) minus
a squared, range-normalized penalty for every constraint the composition
violates.  With the dynamic penalty enabled the penalty weight ramps linearly
with the generation count, so early generations tolerate near-feasible
individuals.  A weighted-sum scalarization of the same aggregated attributes
is available as a baseline fitness for comparison runs.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from enum import Enum
from typing import NamedTuple

import numpy as np

from .fuzzy import (CRITERIA, Direction, DIRECTIONS, LinguisticVariable, PreferenceProfile,
                    RuleBase, default_rank_variable, generate_rule_base, infer_rank_batch)
from .model import (CandidateService, FuzzyConstraint, ProblemInstance, QoSVector, Task,
                    _attr_columns, aggregate_qos_batch, check_assignment)

ROULETTE_EPS = 1e-6
STALL_TOL = 1e-12
PLATEAU_TOL = 1e-12


class LengthMismatch(ValueError):
    """Crossover parents of unequal or too-short length."""


class FitnessMode(Enum):
    FUZZY = "fuzzy"
    WEIGHTED_SUM = "weighted-sum"

    @classmethod
    def parse(cls, text: str) -> "FitnessMode":
        for mode in cls:
            if mode.value == text:
                return mode
        raise ValueError(f"unknown fitness mode {text!r}")


@dataclass
class GAConfig:
    population_size: int = 200
    crossover_prob: float = 0.7
    mutation_prob: float = 0.1
    elite_count: int = 2
    max_generations: int = 400
    stall_generations: int = 30
    penalty_weight: float = 0.5
    dynamic_penalty: bool = True
    rng_seed: int = 0

    def __post_init__(self):
        if self.population_size < 1:
            raise ValueError("population_size must be >= 1")
        if not 0 <= self.elite_count < self.population_size:
            raise ValueError("elite_count must satisfy 0 <= elites < population")
        if not 0.0 <= self.crossover_prob <= 1.0:
            raise ValueError("crossover_prob must be in [0, 1]")
        if not 0.0 <= self.mutation_prob <= 1.0:
            raise ValueError("mutation_prob must be in [0, 1]")
        if self.max_generations < 1:
            raise ValueError("max_generations must be >= 1")
        if self.stall_generations < 1:
            raise ValueError("stall_generations must be >= 1")
        if self.penalty_weight < 0:
            raise ValueError("penalty_weight must be >= 0")
        if not 0 <= self.rng_seed < 2 ** 64:
            raise ValueError("rng_seed must be an unsigned 64-bit integer")


class TraceRow(NamedTuple):
    gen: int
    best: float  # best penalized fitness found so far (running maximum)
    mean: float  # mean penalized fitness of this generation
    violation_sum: float  # summed constraint deltas of this generation's best


@dataclass
class GAResult:
    best: tuple[int, ...]
    best_fitness: float
    best_raw_fitness: float
    best_qos: QoSVector
    constraint_violations: tuple[float, ...]
    generations_run: int
    fitness_trace: list[TraceRow]
    evaluations: int
    mode: FitnessMode

    @property
    def feasible(self) -> bool:
        return all(v == 0.0 for v in self.constraint_violations)

    def plateau_generation(self) -> int:
        """Last generation at which the running best improved by >= 1e-12."""
        plateau = 0
        for i in range(1, len(self.fitness_trace)):
            if self.fitness_trace[i].best - self.fitness_trace[i - 1].best >= PLATEAU_TOL:
                plateau = i
        return plateau


def effective_penalty_weight(config: GAConfig, gen: int) -> float:
    if not config.dynamic_penalty:
        return config.penalty_weight
    return config.penalty_weight * (gen + 1) / config.max_generations


def delta_q(q: float, constraint: FuzzyConstraint) -> float:
    """Distance by which q falls outside the constraint interval (0 inside)."""
    if not constraint.is_bound:
        raise ValueError("constraint must be bound to numeric bounds first")
    if q > constraint.q_max:
        return q - constraint.q_max
    if q < constraint.q_min:
        return constraint.q_min - q
    return 0.0


class _EvalContext:
    """Precomputed arrays for batch fitness evaluation of gene matrices."""

    def __init__(self, instance: ProblemInstance, variables: list[LinguisticVariable],
                 rule_base: RuleBase, constraints: tuple[FuzzyConstraint, ...],
                 mode: FitnessMode, profile: PreferenceProfile | None = None):
        self.instance = instance
        self.variables = variables
        self.rule_base = rule_base
        self.constraints = constraints
        self.mode = mode
        self.task_qos = _attr_columns(instance.tasks)
        self.candidate_counts = instance.candidate_counts()
        if constraints:
            self.bound_cols = np.array([CRITERIA.index(c.criterion) for c in constraints])
            self.q_min = np.array([c.q_min for c in constraints])
            self.q_max = np.array([c.q_max for c in constraints])
            self.ranges = self.q_max - self.q_min
        else:
            self.bound_cols = np.zeros(0, dtype=int)
            self.q_min = np.zeros(0)
            self.q_max = np.zeros(0)
            self.ranges = np.ones(0)
        if profile is not None:
            grades = np.array([profile.grades[c] for c in CRITERIA], dtype=float)
            self.saw_weights = grades / grades.sum() if grades.sum() > 0 else np.full(4, 0.25)
        else:
            self.saw_weights = np.full(4, 0.25)
        self.universes = np.array([v.universe for v in variables])  # (4, 2), CRITERIA order

    def raw_batch(self, qos_rows: np.ndarray) -> np.ndarray:
        if self.mode is FitnessMode.FUZZY:
            return infer_rank_batch(self.rule_base, self.variables, qos_rows) / 100.0
        total = np.zeros(qos_rows.shape[0])
        for col, crit in enumerate(CRITERIA):
            lo, hi = self.universes[col]
            scaled = (np.clip(qos_rows[:, col], lo, hi) - lo) / (hi - lo)
            if DIRECTIONS[crit] is Direction.LOWER_IS_BETTER:
                scaled = 1.0 - scaled
            total += self.saw_weights[col] * scaled
        return total

    def violations(self, qos_rows: np.ndarray) -> np.ndarray:
        """Per-constraint distance outside bounds, shape (n, n_constraints)."""
        n = qos_rows.shape[0]
        if not self.constraints:
            return np.zeros((n, 0))
        q = qos_rows[:, self.bound_cols]
        over = np.maximum(q - self.q_max[None, :], 0.0)
        under = np.maximum(self.q_min[None, :] - q, 0.0)
        return over + under

    def evaluate(self, genes: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(raw fitness, aggregated qos rows, violations) for a gene matrix.

        Duplicate rows are evaluated once; results are row-wise so the
        deduplication cannot change any value.
        """
        uniq, inverse = np.unique(genes, axis=0, return_inverse=True)
        inverse = np.asarray(inverse).reshape(-1)
        qos_u = aggregate_qos_batch(self.instance.workflow, self.instance.tasks, uniq,
                                    self.task_qos)
        raw_u = self.raw_batch(qos_u)
        viol_u = self.violations(qos_u)
        return raw_u[inverse], qos_u[inverse], viol_u[inverse]

    def penalty_term(self, viol: np.ndarray) -> np.ndarray:
        if not self.constraints:
            return np.zeros(viol.shape[0])
        return ((viol / self.ranges[None, :]) ** 2).sum(axis=1)

    def local_scores(self) -> list[np.ndarray]:
        """Per task, the scalar quality of each candidate on its own."""
        return [self.raw_batch(qos) for qos in self.task_qos]


def _context(instance: ProblemInstance, profile: PreferenceProfile,
             mode: FitnessMode = FitnessMode.FUZZY) -> _EvalContext:
    variables = profile.variables()
    rule_base = generate_rule_base(profile, variables, default_rank_variable())
    bound = tuple(c.bind(variables) for c in instance.constraints)
    return _EvalContext(instance, variables, rule_base, bound, mode, profile)


def raw_fitness(assignment, instance: ProblemInstance, rule_base: RuleBase,
                variables: list[LinguisticVariable]) -> float:
    """Fuzzy rank of the aggregated QoS, normalized to [0, 1]."""
    genes = check_assignment(instance.tasks, assignment)
    qos = aggregate_qos_batch(instance.workflow, instance.tasks, genes[None, :])
    return float(infer_rank_batch(rule_base, variables, qos)[0] / 100.0)


def penalized_fitness(assignment, instance: ProblemInstance, rule_base: RuleBase,
                      variables: list[LinguisticVariable], config: GAConfig,
                      gen: int) -> float:
    """Raw fitness minus the (possibly generation-ramped) constraint penalty."""
    genes = check_assignment(instance.tasks, assignment)
    qos = aggregate_qos_batch(instance.workflow, instance.tasks, genes[None, :])
    raw = float(infer_rank_batch(rule_base, variables, qos)[0] / 100.0)
    penalty = 0.0
    for constraint in instance.constraints:
        bound = constraint if constraint.is_bound else constraint.bind(variables)
        q = float(qos[0, CRITERIA.index(bound.criterion)])
        penalty += (delta_q(q, bound) / (bound.q_max - bound.q_min)) ** 2
    return raw - effective_penalty_weight(config, gen) * penalty


def local_score(candidate: CandidateService, rule_base: RuleBase,
                variables: list[LinguisticVariable]) -> float:
    """Standalone quality of one candidate, used to bias initialization."""
    row = np.asarray([candidate.qos.as_tuple()], dtype=float)
    return float(infer_rank_batch(rule_base, variables, row)[0] / 100.0)


def _draw_genes(scores: np.ndarray, count: int, rng: np.random.Generator) -> np.ndarray:
    """Roulette draw of candidate indices proportional to scores (uniform if all zero)."""
    total = scores.sum()
    if total <= 0.0:
        return rng.integers(0, scores.size, size=count)
    cum = np.cumsum(scores)
    targets = rng.random(count) * cum[-1]
    return np.minimum(np.searchsorted(cum, targets, side="right"), scores.size - 1)


def _initialize(ctx: _EvalContext, config: GAConfig, rng: np.random.Generator) -> np.ndarray:
    scores = ctx.local_scores()
    pop = np.empty((config.population_size, len(ctx.instance.tasks)), dtype=np.int64)
    for t, task_scores in enumerate(scores):
        pop[:, t] = _draw_genes(task_scores, config.population_size, rng)
    return pop


def initialize_population(instance: ProblemInstance, rule_base: RuleBase,
                          variables: list[LinguisticVariable], config: GAConfig,
                          ) -> np.ndarray:
    """Seeded population of shape (population_size, task_count).

    Each gene is drawn independently per task with probability proportional
    to the candidate's own fuzzy score (uniform if every score is zero).
    """
    ctx = _EvalContext(instance, variables, rule_base, (), FitnessMode.FUZZY)
    rng = np.random.default_rng(config.rng_seed)
    return _initialize(ctx, config, rng)


def _crossover_inplace(a: np.ndarray, b: np.ndarray, rng: np.random.Generator) -> None:
    n = a.size
    if n == 2:
        i, j = 1, 2  # the only nonempty proper segment
    else:
        while True:
            i = int(rng.integers(1, n))
            j = int(rng.integers(1, n))
            if i != j:
                break
        if i > j:
            i, j = j, i
    segment = a[i:j].copy()
    a[i:j] = b[i:j]
    b[i:j] = segment


def two_point_crossover(a, b, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Swap a random nonempty interior gene segment between two parents."""
    a = np.asarray(a, dtype=np.int64).copy()
    b = np.asarray(b, dtype=np.int64).copy()
    if a.shape != b.shape or a.ndim != 1 or a.size < 2:
        raise LengthMismatch(f"parents must share a length >= 2, got {a.shape} and {b.shape}")
    _crossover_inplace(a, b, rng)
    return a, b


def _mutate_inplace(genes: np.ndarray, candidate_counts: tuple[int, ...],
                    mutation_prob: float, rng: np.random.Generator) -> None:
    if rng.random() >= mutation_prob:
        return
    pos = int(rng.integers(0, genes.size))
    count = candidate_counts[pos]
    if count == 1:
        return
    replacement = int(rng.integers(0, count - 1))
    if replacement >= genes[pos]:
        replacement += 1
    genes[pos] = replacement


def mutate(g, instance: ProblemInstance, mutation_prob: float,
           rng: np.random.Generator) -> np.ndarray:
    """With probability mutation_prob, replace one gene by a different candidate."""
    genes = check_assignment(instance.tasks, g).copy()
    _mutate_inplace(genes, instance.candidate_counts(), mutation_prob, rng)
    return genes


def _roulette_index(cum: np.ndarray, rng: np.random.Generator) -> int:
    target = rng.random() * cum[-1]
    return int(min(np.searchsorted(cum, target, side="right"), cum.size - 1))


def roulette_select(population, fitnesses, rng: np.random.Generator) -> np.ndarray:
    """Select one genotype with probability proportional to min-shifted fitness."""
    population = np.asarray(population, dtype=np.int64)
    fitnesses = np.asarray(fitnesses, dtype=float)
    if population.shape[0] != fitnesses.size or fitnesses.size == 0:
        raise ValueError("population and fitnesses must be non-empty and equal-length")
    shifted = fitnesses - fitnesses.min() + ROULETTE_EPS
    idx = _roulette_index(np.cumsum(shifted), rng)
    return population[idx].copy()


def evolve(instance: ProblemInstance, profile: PreferenceProfile, config: GAConfig,
           fitness_mode: FitnessMode = FitnessMode.FUZZY) -> GAResult:
    """Run the generational loop and return the best assignment found.

    The loop stops once the per-generation best individual is feasible and its
    penalized fitness has not moved for `stall_generations` generations, or at
    `max_generations`.  The reported best prefers feasible individuals (by raw
    fitness over the whole run); only if no feasible individual was ever seen
    does it fall back to the highest penalized fitness.
    """
    ctx = _context(instance, profile, fitness_mode)
    rng = np.random.default_rng(config.rng_seed)
    pop = _initialize(ctx, config, rng)
    n_tasks = len(instance.tasks)
    pop_size = config.population_size

    trace: list[TraceRow] = []
    evaluations = 0
    running_best = -np.inf
    prev_best_pen: float | None = None
    stall = 0
    generations_run = 0

    best_feasible_genes: np.ndarray | None = None
    best_feasible_raw = -np.inf
    best_any_genes: np.ndarray | None = None
    best_any_pen = -np.inf

    for gen in range(config.max_generations):
        raw, qos_rows, viol = ctx.evaluate(pop)
        pen = raw - effective_penalty_weight(config, gen) * ctx.penalty_term(viol)
        evaluations += pop_size
        generations_run = gen + 1

        best_idx = int(np.argmax(pen))
        best_pen = float(pen[best_idx])
        viol_sums = viol.sum(axis=1)
        best_viol_sum = float(viol_sums[best_idx])

        feasible = viol_sums == 0.0
        if feasible.any():
            masked = np.where(feasible, raw, -np.inf)
            fidx = int(np.argmax(masked))
            if raw[fidx] > best_feasible_raw:
                best_feasible_raw = float(raw[fidx])
                best_feasible_genes = pop[fidx].copy()
        if best_pen > best_any_pen:
            best_any_pen = best_pen
            best_any_genes = pop[best_idx].copy()

        running_best = max(running_best, best_pen)
        trace.append(TraceRow(gen, running_best, float(pen.mean()), best_viol_sum))

        if best_viol_sum == 0.0 and prev_best_pen is not None \
                and abs(best_pen - prev_best_pen) < STALL_TOL:
            stall += 1
        else:
            stall = 0
        prev_best_pen = best_pen
        if stall >= config.stall_generations:
            break
        if gen == config.max_generations - 1:
            break

        order = np.argsort(-pen, kind="stable")
        new_pop = np.empty_like(pop)
        elite = config.elite_count
        new_pop[:elite] = pop[order[:elite]]
        shifted = pen - pen.min() + ROULETTE_EPS
        cum = np.cumsum(shifted)
        fill = elite
        while fill < pop_size:
            p1 = pop[_roulette_index(cum, rng)].copy()
            p2 = pop[_roulette_index(cum, rng)].copy()
            if n_tasks >= 2 and rng.random() < config.crossover_prob:
                _crossover_inplace(p1, p2, rng)
            _mutate_inplace(p1, ctx.candidate_counts, config.mutation_prob, rng)
            _mutate_inplace(p2, ctx.candidate_counts, config.mutation_prob, rng)
            new_pop[fill] = p1
            fill += 1
            if fill < pop_size:
                new_pop[fill] = p2
                fill += 1
        pop = new_pop

    if best_feasible_genes is not None:
        chosen = best_feasible_genes
    else:
        chosen = best_any_genes
    raw_c, qos_c, viol_c = ctx.evaluate(chosen[None, :])
    final_w = effective_penalty_weight(config, generations_run - 1)
    pen_c = float(raw_c[0] - final_w * ctx.penalty_term(viol_c)[0])
    qos = QoSVector(cost=float(qos_c[0, 0]), response_time=float(qos_c[0, 1]),
                    availability=float(qos_c[0, 2]), reliability=float(qos_c[0, 3]))
    return GAResult(
        best=tuple(int(x) for x in chosen),
        best_fitness=pen_c,
        best_raw_fitness=float(raw_c[0]),
        best_qos=qos,
        constraint_violations=tuple(float(v) for v in viol_c[0]),
        generations_run=generations_run,
        fitness_trace=trace,
        evaluations=evaluations,
        mode=fitness_mode,
    )


@dataclass(frozen=True)
class BruteForceResult:
    best: tuple[int, ...]
    raw_fitness: float
    qos: QoSVector
    feasible: bool


def brute_force_optimum(instance: ProblemInstance, profile: PreferenceProfile,
                        fitness_mode: FitnessMode = FitnessMode.FUZZY,
                        space_limit: int = 2_000_000) -> BruteForceResult:
    """Exhaustively enumerate every assignment; prefer feasible, then raw fitness.

    Ties resolve to the lexicographically first genotype.  Refuses spaces
    larger than space_limit.
    """
    size = instance.search_space_size()
    if size > space_limit:
        raise ValueError(f"search space {size} exceeds limit {space_limit}")
    ctx = _context(instance, profile, fitness_mode)
    counts = instance.candidate_counts()
    best_genes: tuple[int, ...] | None = None
    best_key: tuple[int, float] | None = None
    best_row: np.ndarray | None = None
    best_raw = 0.0
    chunk_iter = itertools.product(*(range(c) for c in counts))
    while True:
        chunk = list(itertools.islice(chunk_iter, 65536))
        if not chunk:
            break
        genes = np.array(chunk, dtype=np.int64)
        qos_rows = aggregate_qos_batch(instance.workflow, instance.tasks, genes, ctx.task_qos)
        raw = ctx.raw_batch(qos_rows)
        feas = ctx.violations(qos_rows).sum(axis=1) == 0.0
        for i in range(genes.shape[0]):
            key = (int(feas[i]), float(raw[i]))
            if best_key is None or key > best_key:
                best_key = key
                best_genes = tuple(int(x) for x in genes[i])
                best_raw = float(raw[i])
                best_row = qos_rows[i]
    qos = QoSVector(cost=float(best_row[0]), response_time=float(best_row[1]),
                    availability=float(best_row[2]), reliability=float(best_row[3]))
    return BruteForceResult(best_genes, best_raw, qos, bool(best_key[0]))
