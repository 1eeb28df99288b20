"""Workflow model and QoS aggregation tests.

The reference evaluator below is intentionally naive: plain Python floats,
loops expanded into explicit sequences, no shared code with the library path.
"""

import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qoscompose.model import (AssignmentLengthMismatch, CandidateService, Flow, FuzzyConstraint,
                              InstanceFormatError, InvalidCandidateIndex, Loop, ProblemInstance,
                              QoSVector, Sequence, Switch, Task, TaskRef, aggregate_qos,
                              aggregate_qos_batch, instance_from_dict, instance_to_dict,
                              load_instance, save_instance)
from qoscompose.workload import MixedShape, WorkloadSpec, generate_instance


# --- independent reference evaluator ---------------------------------------

def naive_aggregate(node, tasks, genes):
    """Reference recursion: loops are literally expanded into k copies."""
    if isinstance(node, TaskRef):
        q = tasks[node.index].candidates[genes[node.index]].qos
        return {"cost": q.cost, "response_time": q.response_time,
                "availability": q.availability, "reliability": q.reliability}
    if isinstance(node, Loop):
        expanded = Sequence(tuple(node.child for _ in range(node.k)))
        return naive_aggregate(expanded, tasks, genes)
    if isinstance(node, Sequence):
        parts = [naive_aggregate(c, tasks, genes) for c in node.children]
        return {"cost": sum(p["cost"] for p in parts),
                "response_time": sum(p["response_time"] for p in parts),
                "availability": _prod(p["availability"] for p in parts),
                "reliability": _prod(p["reliability"] for p in parts)}
    if isinstance(node, Flow):
        parts = [naive_aggregate(c, tasks, genes) for c in node.children]
        return {"cost": sum(p["cost"] for p in parts),
                "response_time": max(p["response_time"] for p in parts),
                "availability": _prod(p["availability"] for p in parts),
                "reliability": _prod(p["reliability"] for p in parts)}
    if isinstance(node, Switch):
        parts = [(p, naive_aggregate(c, tasks, genes)) for p, c in node.branches]
        return {key: sum(p * part[key] for p, part in parts)
                for key in ("cost", "response_time", "availability", "reliability")}
    raise TypeError(node)


def _prod(values):
    out = 1.0
    for v in values:
        out *= v
    return out


def make_task(name, qos_list):
    return Task(name, tuple(
        CandidateService(f"{name}-c{i}", QoSVector(*qos)) for i, qos in enumerate(qos_list)))


@pytest.fixture
def two_tasks():
    t0 = make_task("a", [(10.0, 5.0, 0.9, 0.95)])
    t1 = make_task("b", [(20.0, 7.0, 0.8, 0.9)])
    return (t0, t1)


class TestAggregation:
    def test_single_task_identity(self):
        tasks = (make_task("a", [(10.0, 5.0, 0.9, 0.95)]),)
        out = aggregate_qos(TaskRef(0), tasks, [0])
        assert out == QoSVector(10.0, 5.0, 0.9, 0.95)

    def test_sequence_of_two(self, two_tasks):
        out = aggregate_qos(Sequence((TaskRef(0), TaskRef(1))), two_tasks, [0, 0])
        assert out.cost == pytest.approx(30.0)
        assert out.response_time == pytest.approx(12.0)
        assert out.availability == pytest.approx(0.72)
        assert out.reliability == pytest.approx(0.855)

    def test_flow_takes_max_time(self, two_tasks):
        out = aggregate_qos(Flow((TaskRef(0), TaskRef(1))), two_tasks, [0, 0])
        assert out.cost == pytest.approx(30.0)
        assert out.response_time == pytest.approx(7.0)
        assert out.availability == pytest.approx(0.72)
        assert out.reliability == pytest.approx(0.855)

    def test_switch_expected_value(self, two_tasks):
        node = Switch(((0.5, TaskRef(0)), (0.5, TaskRef(1))))
        out = aggregate_qos(node, two_tasks, [0, 0])
        assert out.cost == pytest.approx(15.0)
        assert out.response_time == pytest.approx(6.0)
        assert out.availability == pytest.approx(0.85)
        assert out.reliability == pytest.approx(0.925)

    def test_loop_k3(self):
        tasks = (make_task("a", [(10.0, 5.0, 0.9, 0.95)]),)
        out = aggregate_qos(Loop(3, TaskRef(0)), tasks, [0])
        assert out.cost == pytest.approx(30.0)
        assert out.response_time == pytest.approx(15.0)
        assert out.availability == pytest.approx(0.729)
        assert out.reliability == pytest.approx(0.857375)

    def test_matches_naive_oracle_on_random_instances(self):
        rng = np.random.default_rng(7)
        for trial in range(200):
            tc = int(rng.integers(1, 7))
            spec = WorkloadSpec(tc, int(rng.integers(1, 5)),
                                MixedShape(max_depth=3), rng_seed=trial)
            instance = generate_instance(spec)
            genes = [int(rng.integers(0, len(t.candidates))) for t in instance.tasks]
            got = aggregate_qos(instance.workflow, instance.tasks, genes)
            want = naive_aggregate(instance.workflow, instance.tasks, genes)
            assert got.cost == pytest.approx(want["cost"], abs=1e-9)
            assert got.response_time == pytest.approx(want["response_time"], abs=1e-9)
            assert got.availability == pytest.approx(want["availability"], abs=1e-9)
            assert got.reliability == pytest.approx(want["reliability"], abs=1e-9)

    def test_loop_equals_sequence_of_copies_exactly(self):
        rng = np.random.default_rng(3)
        for k in range(1, 6):
            for _ in range(20):
                qos = (float(rng.uniform(0, 50)), float(rng.uniform(0, 20)),
                       float(rng.uniform(0.5, 1.0)), float(rng.uniform(0.5, 1.0)))
                tasks = (make_task("a", [qos]),)
                genes = np.array([[0]])
                via_loop = aggregate_qos_batch(Loop(k, TaskRef(0)), tasks, genes)
                via_seq = aggregate_qos_batch(
                    Sequence(tuple(TaskRef(0) for _ in range(k))), tasks, genes)
                assert (via_loop == via_seq).all()

    def test_batch_matches_scalar_bitwise(self):
        instance = generate_instance(WorkloadSpec(4, 3, MixedShape(), rng_seed=5))
        rng = np.random.default_rng(0)
        genes = rng.integers(0, 3, size=(17, 4))
        batch = aggregate_qos_batch(instance.workflow, instance.tasks, genes)
        for i in range(genes.shape[0]):
            single = aggregate_qos(instance.workflow, instance.tasks, genes[i])
            assert single.as_tuple() == tuple(batch[i])

    def test_deterministic(self, two_tasks):
        node = Sequence((TaskRef(0), TaskRef(1)))
        a = aggregate_qos(node, two_tasks, [0, 0])
        b = aggregate_qos(node, two_tasks, [0, 0])
        assert a == b

    def test_length_mismatch(self, two_tasks):
        with pytest.raises(AssignmentLengthMismatch):
            aggregate_qos(Sequence((TaskRef(0), TaskRef(1))), two_tasks, [0])

    def test_bad_candidate_index(self, two_tasks):
        with pytest.raises(InvalidCandidateIndex):
            aggregate_qos(Sequence((TaskRef(0), TaskRef(1))), two_tasks, [0, 5])

    def test_cost_monotonicity(self):
        base = generate_instance(WorkloadSpec(3, 2, MixedShape(), rng_seed=11))
        genes = [0, 1, 0]
        before = aggregate_qos(base.workflow, base.tasks, genes).cost
        bumped = list(base.tasks)
        old = bumped[1].candidates[1]
        newq = QoSVector(old.qos.cost + 10.0, old.qos.response_time,
                         old.qos.availability, old.qos.reliability)
        cands = list(bumped[1].candidates)
        cands[1] = CandidateService(old.id, newq)
        bumped[1] = Task(bumped[1].name, tuple(cands))
        after = aggregate_qos(base.workflow, tuple(bumped), genes).cost
        assert after >= before


@settings(max_examples=60, deadline=None)
@given(st.integers(min_value=0, max_value=10_000), st.integers(min_value=1, max_value=6))
def test_aggregate_ranges_hold(seed, tc):
    instance = generate_instance(WorkloadSpec(tc, 3, MixedShape(max_depth=3), rng_seed=seed))
    rng = np.random.default_rng(seed)
    genes = [int(rng.integers(0, len(t.candidates))) for t in instance.tasks]
    out = aggregate_qos(instance.workflow, instance.tasks, genes)
    assert out.cost >= 0 and out.response_time >= 0
    assert 0.0 <= out.availability <= 1.0
    assert 0.0 <= out.reliability <= 1.0


class TestValidation:
    def test_qos_vector_bounds(self):
        with pytest.raises(ValueError):
            QoSVector(-1.0, 0.0, 0.5, 0.5)
        with pytest.raises(ValueError):
            QoSVector(1.0, 0.0, 1.5, 0.5)

    def test_task_needs_candidates(self):
        with pytest.raises(ValueError):
            Task("t", ())

    def test_duplicate_candidate_ids(self):
        qos = QoSVector(1, 1, 0.9, 0.9)
        with pytest.raises(ValueError):
            Task("t", (CandidateService("x", qos), CandidateService("x", qos)))

    def test_switch_probability_sum_rejected(self):
        tasks = (make_task("a", [(1, 1, 0.9, 0.9)]), make_task("b", [(1, 1, 0.9, 0.9)]))
        bad = Switch(((0.5, TaskRef(0)), (0.4, TaskRef(1))))
        with pytest.raises(InstanceFormatError):
            ProblemInstance(tasks, bad)

    def test_every_task_referenced_once(self):
        tasks = (make_task("a", [(1, 1, 0.9, 0.9)]), make_task("b", [(1, 1, 0.9, 0.9)]))
        with pytest.raises(InstanceFormatError):
            ProblemInstance(tasks, Sequence((TaskRef(0), TaskRef(0))))
        with pytest.raises(InstanceFormatError):
            ProblemInstance(tasks, TaskRef(0))

    def test_loop_count_positive(self):
        tasks = (make_task("a", [(1, 1, 0.9, 0.9)]),)
        with pytest.raises(InstanceFormatError):
            ProblemInstance(tasks, Loop(0, TaskRef(0)))


class TestInstanceFiles:
    def test_round_trip(self, tmp_path):
        instance = generate_instance(
            WorkloadSpec(4, 3, MixedShape(), rng_seed=2),
            (FuzzyConstraint("cost", "cheap"),))
        path = tmp_path / "inst.json"
        save_instance(instance, path)
        loaded = load_instance(path)
        assert loaded == instance

    def test_dict_round_trip_preserves_constraints(self):
        instance = generate_instance(WorkloadSpec(2, 2, rng_seed=0),
                                     (FuzzyConstraint("response_time", "moderate"),))
        again = instance_from_dict(instance_to_dict(instance))
        assert again.constraints == (FuzzyConstraint("response_time", "moderate"),)

    def test_malformed_document(self):
        with pytest.raises(InstanceFormatError):
            instance_from_dict({"tasks": []})
        with pytest.raises(InstanceFormatError):
            instance_from_dict({"tasks": [{"name": "t", "candidates": [
                {"id": "x", "cost": 1, "response_time": 1,
                 "availability": 0.9, "reliability": 0.9}]}],
                "workflow": {"type": "nope"}})

    def test_unknown_constraint_criterion_rejected(self):
        with pytest.raises(ValueError):
            FuzzyConstraint("latency", "cheap")

    def test_file_is_utf8_json(self, tmp_path):
        instance = generate_instance(WorkloadSpec(1, 1, rng_seed=0))
        path = tmp_path / "inst.json"
        save_instance(instance, path)
        raw = json.loads(path.read_text(encoding="utf-8"))
        assert set(raw) == {"tasks", "workflow", "constraints"}
