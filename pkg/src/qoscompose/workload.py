"""Seeded synthetic problem instances for benchmarks and oracle tests."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .fuzzy import CRITERIA
from .model import (CandidateService, Flow, FuzzyConstraint, Loop, ProblemInstance, QoSVector,
                    Sequence, Switch, Task, TaskRef, WorkflowNode)

# Candidate QoS sampling intervals sized so that aggregates stay informative
# on the default universes (cost [0,100], response time [0,50]).
DEFAULT_QOS_RANGES = {
    "cost": (5.0, 95.0),
    "response_time": (2.0, 48.0),
    "availability": (0.7, 1.0),
    "reliability": (0.7, 1.0),
}


class SpecInvalid(ValueError):
    """Workload specification violates its invariants."""


@dataclass(frozen=True)
class MixedShape:
    """Recursive workflow mix: remaining probability mass goes to sequences."""

    switch_prob: float = 0.25
    flow_prob: float = 0.25
    loop_prob: float = 0.15
    max_depth: int = 3
    max_loop_k: int = 3

    def __post_init__(self):
        total = self.switch_prob + self.flow_prob + self.loop_prob
        if min(self.switch_prob, self.flow_prob, self.loop_prob) < 0 or total > 1.0:
            raise SpecInvalid(f"shape probabilities must be >= 0 and sum <= 1, got {total}")
        if self.max_depth < 1:
            raise SpecInvalid("max_depth must be >= 1")
        if self.max_loop_k < 1:
            raise SpecInvalid("max_loop_k must be >= 1")


SEQUENCE_ONLY = "sequence"
WorkflowShape = MixedShape | str


@dataclass(frozen=True)
class WorkloadSpec:
    task_count: int
    candidates_per_task: int
    shape: WorkflowShape = SEQUENCE_ONLY
    qos_ranges: dict[str, tuple[float, float]] = field(
        default_factory=lambda: dict(DEFAULT_QOS_RANGES))
    rng_seed: int = 0

    def __post_init__(self):
        if self.task_count < 1:
            raise SpecInvalid("task_count must be >= 1")
        if self.candidates_per_task < 1:
            raise SpecInvalid("candidates_per_task must be >= 1")
        if isinstance(self.shape, str) and self.shape != SEQUENCE_ONLY:
            raise SpecInvalid(f"unknown workflow shape {self.shape!r}")
        for crit in CRITERIA:
            if crit not in self.qos_ranges:
                raise SpecInvalid(f"qos_ranges is missing {crit!r}")
            lo, hi = self.qos_ranges[crit]
            if not 0 <= lo <= hi:
                raise SpecInvalid(f"qos range for {crit!r} must satisfy 0 <= lo <= hi")
            if crit in ("availability", "reliability") and hi > 1.0:
                raise SpecInvalid(f"qos range for {crit!r} must stay within [0, 1]")


def _split_indices(indices: list[int], parts: int) -> list[list[int]]:
    """Contiguous split of indices into the given number of nonempty groups."""
    sizes = [len(indices) // parts] * parts
    for i in range(len(indices) % parts):
        sizes[i] += 1
    out = []
    at = 0
    for size in sizes:
        out.append(indices[at:at + size])
        at += size
    return out


def _build_node(indices: list[int], depth: int, shape: MixedShape,
                rng: np.random.Generator) -> WorkflowNode:
    if len(indices) == 1:
        return TaskRef(indices[0])
    if depth >= shape.max_depth:
        return Sequence(tuple(TaskRef(i) for i in indices))
    roll = rng.random()
    if roll < shape.loop_prob:
        k = int(rng.integers(1, shape.max_loop_k + 1))
        return Loop(k, _build_node(indices, depth + 1, shape, rng))
    parts = int(rng.integers(2, min(4, len(indices)) + 1))
    groups = _split_indices(indices, parts)
    children = tuple(_build_node(g, depth + 1, shape, rng) for g in groups)
    if roll < shape.loop_prob + shape.switch_prob:
        weights = rng.random(len(groups)) + 0.1  # keep probabilities off zero
        probs = weights / weights.sum()
        probs[-1] = 1.0 - probs[:-1].sum()  # make the sum exactly 1
        return Switch(tuple(zip(probs.tolist(), children)))
    if roll < shape.loop_prob + shape.switch_prob + shape.flow_prob:
        return Flow(children)
    return Sequence(children)


def generate_instance(spec: WorkloadSpec,
                      constraints: tuple[FuzzyConstraint, ...] = ()) -> ProblemInstance:
    """Deterministically generate an instance from the spec's seed."""
    rng = np.random.default_rng(spec.rng_seed)
    tasks = []
    for t in range(spec.task_count):
        candidates = []
        for c in range(spec.candidates_per_task):
            values = {}
            for crit in CRITERIA:
                lo, hi = spec.qos_ranges[crit]
                values[crit] = float(rng.uniform(lo, hi))
            candidates.append(CandidateService(f"svc-{t}-{c}", QoSVector(**values)))
        tasks.append(Task(f"task-{t}", tuple(candidates)))
    indices = list(range(spec.task_count))
    if spec.shape == SEQUENCE_ONLY:
        workflow: WorkflowNode = (Sequence(tuple(TaskRef(i) for i in indices))
                                  if spec.task_count > 1 else TaskRef(0))
    else:
        workflow = _build_node(indices, 0, spec.shape, rng)
    return ProblemInstance(tuple(tasks), workflow, tuple(constraints))
