"""Fuzzy-rank guided genetic optimizer for QoS-aware service composition."""

from .fuzzy import (CRITERIA, DEFAULT_UNIVERSES, Direction, FuzzyRule, LinguisticVariable,
                    MembershipFunction, PreferenceProfile, RuleBase, Trapezoidal, Triangular,
                    build_default_variables, default_rank_variable, generate_rule_base,
                    importance_to_cf, infer_rank, membership)
from .ga import (FitnessMode, GAConfig, GAResult, brute_force_optimum, delta_q, evolve,
                 initialize_population, local_score, mutate, penalized_fitness, raw_fitness,
                 roulette_select, two_point_crossover)
from .model import (CandidateService, Flow, FuzzyConstraint, Loop, ProblemInstance, QoSVector,
                    Sequence, Switch, Task, TaskRef, WorkflowNode, aggregate_qos,
                    load_instance, save_instance)
from .workload import MixedShape, SEQUENCE_ONLY, WorkloadSpec, generate_instance

__all__ = [name for name in dir() if not name.startswith("_")]
