"""Workflow model: QoS vectors, tasks, composition structure and aggregation.

Aggregation over a workflow follows the usual composite-service rules:
sequences add time and cost and multiply availability and reliability,
branches take probability-weighted expectations, parallel flows take the
maximum time, and a loop of k iterations behaves exactly like a sequence of
k copies of its body.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .fuzzy import CRITERIA, LinguisticVariable, mf_support

SWITCH_PROB_TOL = 1e-9


class AssignmentLengthMismatch(ValueError):
    """Assignment length differs from the task count."""


class InvalidCandidateIndex(ValueError):
    """A gene indexes past the end of its task's candidate list."""


class DegenerateConstraint(ValueError):
    """A constraint term whose support collapses to a single point."""


class InstanceFormatError(ValueError):
    """Malformed problem-instance document."""


@dataclass(frozen=True)
class QoSVector:
    """The four quality attributes of a service or an aggregated composition."""

    cost: float
    response_time: float
    availability: float
    reliability: float

    def __post_init__(self):
        if self.cost < 0 or self.response_time < 0:
            raise ValueError(f"cost and response_time must be non-negative: {self}")
        if not (0.0 <= self.availability <= 1.0 and 0.0 <= self.reliability <= 1.0):
            raise ValueError(f"availability and reliability must lie in [0, 1]: {self}")

    def as_tuple(self) -> tuple[float, float, float, float]:
        """Values in CRITERIA column order."""
        return (self.cost, self.response_time, self.availability, self.reliability)


@dataclass(frozen=True)
class CandidateService:
    id: str
    qos: QoSVector


@dataclass(frozen=True)
class Task:
    name: str
    candidates: tuple[CandidateService, ...]

    def __post_init__(self):
        if not self.candidates:
            raise ValueError(f"task {self.name!r} has no candidates")
        ids = [c.id for c in self.candidates]
        if len(set(ids)) != len(ids):
            raise ValueError(f"task {self.name!r} has duplicate candidate ids")


@dataclass(frozen=True)
class TaskRef:
    index: int


@dataclass(frozen=True)
class Sequence:
    children: tuple["WorkflowNode", ...]


@dataclass(frozen=True)
class Switch:
    branches: tuple[tuple[float, "WorkflowNode"], ...]


@dataclass(frozen=True)
class Flow:
    children: tuple["WorkflowNode", ...]


@dataclass(frozen=True)
class Loop:
    k: int
    child: "WorkflowNode"


WorkflowNode = TaskRef | Sequence | Switch | Flow | Loop


@dataclass(frozen=True)
class FuzzyConstraint:
    """A QoS requirement stated as a linguistic term.

    Numeric bounds are the support of the named term and therefore depend on
    the active universes, so they are derived by bind() against a concrete
    variable set rather than stored in the instance file.
    """

    criterion: str
    term: str
    q_min: float | None = None
    q_max: float | None = None

    def __post_init__(self):
        if self.criterion not in CRITERIA:
            raise ValueError(f"unknown criterion {self.criterion!r}")

    def bind(self, variables: list[LinguisticVariable]) -> "FuzzyConstraint":
        var = next(v for v in variables if v.name == self.criterion)
        lo, hi = mf_support(var.term(self.term))
        if not lo < hi:
            raise DegenerateConstraint(
                f"constraint {self.criterion}={self.term!r} has empty support [{lo}, {hi}]")
        return FuzzyConstraint(self.criterion, self.term, lo, hi)

    @property
    def is_bound(self) -> bool:
        return self.q_min is not None


def collect_task_refs(node: WorkflowNode) -> list[int]:
    """Task indices referenced by the tree, in traversal order (loops count once)."""
    if isinstance(node, TaskRef):
        return [node.index]
    if isinstance(node, (Sequence, Flow)):
        out = []
        for child in node.children:
            out.extend(collect_task_refs(child))
        return out
    if isinstance(node, Switch):
        out = []
        for _, child in node.branches:
            out.extend(collect_task_refs(child))
        return out
    if isinstance(node, Loop):
        return collect_task_refs(node.child)
    raise TypeError(f"not a workflow node: {node!r}")


def validate_workflow(node: WorkflowNode, task_count: int) -> None:
    """Check structural invariants: coverage, branch probabilities, loop counts."""
    refs = collect_task_refs(node)
    if sorted(refs) != list(range(task_count)):
        raise InstanceFormatError(
            f"workflow must reference each of {task_count} tasks exactly once, got {sorted(refs)}")

    def _walk(n: WorkflowNode) -> None:
        if isinstance(n, Switch):
            if not n.branches:
                raise InstanceFormatError("switch must have at least one branch")
            total = 0.0
            for p, child in n.branches:
                if not 0.0 < p <= 1.0:
                    raise InstanceFormatError(f"switch branch probability {p} outside (0, 1]")
                total += p
                _walk(child)
            if abs(total - 1.0) > SWITCH_PROB_TOL:
                raise InstanceFormatError(
                    f"switch branch probabilities sum to {total!r}, expected 1 within {SWITCH_PROB_TOL}")
        elif isinstance(n, (Sequence, Flow)):
            if not n.children:
                raise InstanceFormatError(f"{type(n).__name__.lower()} must have children")
            for child in n.children:
                _walk(child)
        elif isinstance(n, Loop):
            if not (isinstance(n.k, int) and n.k >= 1):
                raise InstanceFormatError(f"loop count must be an integer >= 1, got {n.k!r}")
            _walk(n.child)

    _walk(node)


@dataclass(frozen=True)
class ProblemInstance:
    tasks: tuple[Task, ...]
    workflow: WorkflowNode
    constraints: tuple[FuzzyConstraint, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if not self.tasks:
            raise InstanceFormatError("instance must have at least one task")
        validate_workflow(self.workflow, len(self.tasks))

    @property
    def task_count(self) -> int:
        return len(self.tasks)

    def candidate_counts(self) -> tuple[int, ...]:
        return tuple(len(t.candidates) for t in self.tasks)

    def search_space_size(self) -> int:
        size = 1
        for t in self.tasks:
            size *= len(t.candidates)
        return size


def check_assignment(instance_tasks: tuple[Task, ...], assignment) -> np.ndarray:
    genes = np.asarray(assignment, dtype=np.int64)
    if genes.ndim != 1 or genes.size != len(instance_tasks):
        raise AssignmentLengthMismatch(
            f"assignment length {genes.size} != task count {len(instance_tasks)}")
    for i, task in enumerate(instance_tasks):
        if not 0 <= genes[i] < len(task.candidates):
            raise InvalidCandidateIndex(
                f"gene {i} = {genes[i]} outside [0, {len(task.candidates)})")
    return genes


def _attr_columns(tasks: tuple[Task, ...]) -> list[np.ndarray]:
    """Per task: (n_candidates, 4) array of QoS values in CRITERIA order."""
    return [np.array([c.qos.as_tuple() for c in t.candidates], dtype=float) for t in tasks]


def aggregate_qos_batch(workflow: WorkflowNode, tasks: tuple[Task, ...],
                        genes: np.ndarray, task_qos: list[np.ndarray] | None = None,
                        ) -> np.ndarray:
    """Aggregate many assignments at once: (n, tasks) genes -> (n, 4) QoS rows.

    The recursion accumulates child results element-wise in a fixed order, so
    a row's result is bit-identical however the batch is composed, and a loop
    of k iterations accumulates its body k times exactly like a sequence of
    k copies.
    """
    genes = np.asarray(genes, dtype=np.int64)
    if genes.ndim != 2 or genes.shape[1] != len(tasks):
        raise AssignmentLengthMismatch(
            f"genes must be (n, {len(tasks)}), got {genes.shape}")
    for i, task in enumerate(tasks):
        col = genes[:, i]
        if col.size and (col.min() < 0 or col.max() >= len(task.candidates)):
            raise InvalidCandidateIndex(
                f"gene {i} outside [0, {len(task.candidates)})")
    if task_qos is None:
        task_qos = _attr_columns(tasks)
    n = genes.shape[0]

    def _eval(node: WorkflowNode) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        if isinstance(node, TaskRef):
            q = task_qos[node.index][genes[:, node.index]]
            return q[:, 0].copy(), q[:, 1].copy(), q[:, 2].copy(), q[:, 3].copy()
        if isinstance(node, (Sequence, Flow)):
            cost = np.zeros(n)
            rt = np.zeros(n)
            avail = np.ones(n)
            rel = np.ones(n)
            parallel = isinstance(node, Flow)
            for child in node.children:
                c, t, a, r = _eval(child)
                cost += c
                if parallel:
                    np.maximum(rt, t, out=rt)  # response times are >= 0
                else:
                    rt += t
                avail *= a
                rel *= r
            return cost, rt, avail, rel
        if isinstance(node, Switch):
            cost = np.zeros(n)
            rt = np.zeros(n)
            avail = np.zeros(n)
            rel = np.zeros(n)
            for p, child in node.branches:
                c, t, a, r = _eval(child)
                cost += p * c
                rt += p * t
                avail += p * a
                rel += p * r
            return cost, rt, avail, rel
        if isinstance(node, Loop):
            c, t, a, r = _eval(node.child)
            cost = c.copy()
            rt = t.copy()
            avail = a.copy()
            rel = r.copy()
            for _ in range(node.k - 1):
                cost += c
                rt += t
                avail *= a
                rel *= r
            return cost, rt, avail, rel
        raise TypeError(f"not a workflow node: {node!r}")

    cost, rt, avail, rel = _eval(workflow)
    # Switch probabilities may sum to 1 only within tolerance, so expected
    # availability/reliability can overshoot 1 by a few ulps; clamp them.
    np.clip(avail, 0.0, 1.0, out=avail)
    np.clip(rel, 0.0, 1.0, out=rel)
    return np.stack([cost, rt, avail, rel], axis=1)


def aggregate_qos(workflow: WorkflowNode, tasks: tuple[Task, ...], assignment) -> QoSVector:
    """Aggregate QoS of one assignment over the workflow."""
    genes = check_assignment(tasks, assignment)
    row = aggregate_qos_batch(workflow, tasks, genes[None, :])[0]
    return QoSVector(cost=float(row[0]), response_time=float(row[1]),
                     availability=float(row[2]), reliability=float(row[3]))


# --- instance file format -------------------------------------------------

def workflow_to_dict(node: WorkflowNode) -> dict:
    if isinstance(node, TaskRef):
        return {"type": "task", "index": node.index}
    if isinstance(node, Sequence):
        return {"type": "sequence", "children": [workflow_to_dict(c) for c in node.children]}
    if isinstance(node, Switch):
        return {"type": "switch",
                "branches": [{"p": p, "node": workflow_to_dict(c)} for p, c in node.branches]}
    if isinstance(node, Flow):
        return {"type": "flow", "children": [workflow_to_dict(c) for c in node.children]}
    if isinstance(node, Loop):
        return {"type": "loop", "k": node.k, "child": workflow_to_dict(node.child)}
    raise TypeError(f"not a workflow node: {node!r}")


def workflow_from_dict(raw: dict) -> WorkflowNode:
    if not isinstance(raw, dict) or "type" not in raw:
        raise InstanceFormatError(f"workflow node must be an object with a 'type': {raw!r}")
    kind = raw["type"]
    try:
        if kind == "task":
            return TaskRef(int(raw["index"]))
        if kind == "sequence":
            return Sequence(tuple(workflow_from_dict(c) for c in raw["children"]))
        if kind == "switch":
            return Switch(tuple((float(b["p"]), workflow_from_dict(b["node"]))
                                for b in raw["branches"]))
        if kind == "flow":
            return Flow(tuple(workflow_from_dict(c) for c in raw["children"]))
        if kind == "loop":
            return Loop(int(raw["k"]), workflow_from_dict(raw["child"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise InstanceFormatError(f"malformed {kind!r} node: {exc}") from exc
    raise InstanceFormatError(f"unknown workflow node type {kind!r}")


def instance_to_dict(instance: ProblemInstance) -> dict:
    return {
        "tasks": [
            {"name": t.name,
             "candidates": [
                 {"id": c.id, "cost": c.qos.cost, "response_time": c.qos.response_time,
                  "availability": c.qos.availability, "reliability": c.qos.reliability}
                 for c in t.candidates]}
            for t in instance.tasks],
        "workflow": workflow_to_dict(instance.workflow),
        "constraints": [{"criterion": c.criterion, "term": c.term} for c in instance.constraints],
    }


def instance_from_dict(raw: dict) -> ProblemInstance:
    if not isinstance(raw, dict):
        raise InstanceFormatError("instance document must be a JSON object")
    try:
        tasks = []
        for traw in raw["tasks"]:
            candidates = tuple(
                CandidateService(str(c["id"]), QoSVector(
                    cost=float(c["cost"]), response_time=float(c["response_time"]),
                    availability=float(c["availability"]), reliability=float(c["reliability"])))
                for c in traw["candidates"])
            tasks.append(Task(str(traw["name"]), candidates))
        workflow = workflow_from_dict(raw["workflow"])
        constraints = tuple(FuzzyConstraint(str(c["criterion"]), str(c["term"]))
                            for c in raw.get("constraints", []))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, InstanceFormatError):
            raise
        raise InstanceFormatError(f"malformed instance document: {exc}") from exc
    return ProblemInstance(tuple(tasks), workflow, constraints)


def load_instance(path) -> ProblemInstance:
    with open(path, encoding="utf-8") as fh:
        return instance_from_dict(json.load(fh))


def save_instance(instance: ProblemInstance, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(instance_to_dict(instance), fh, indent=2, sort_keys=True)
        fh.write("\n")
