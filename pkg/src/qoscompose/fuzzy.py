"""Linguistic variables, membership functions, rule generation and rank inference.

The rank of a QoS vector is computed by a Mamdani-style system: every
criterion contributes five single-antecedent rules mapping its terms onto the
terms of an output "rank" variable on [0, 100].  Each rule's firing strength
is the antecedent membership degree multiplied by a per-criterion confidence
factor; consequents are clipped at the firing strength, aggregated by
pointwise maximum and defuzzified by centroid on a fixed 1001-point grid.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

CRITERIA = ("cost", "response_time", "availability", "reliability")

DEFAULT_UNIVERSES = {
    "cost": (0.0, 100.0),
    "response_time": (0.0, 50.0),
    "availability": (0.0, 1.0),
    "reliability": (0.0, 1.0),
}

RANK_UNIVERSE = (0.0, 100.0)
RANK_GRID_SIZE = 1001

# Term vocabularies in universe order (left to right along the axis).
_TERMS_BY_CRITERION = {
    "cost": ("very cheap", "cheap", "moderate", "expensive", "very expensive"),
    "response_time": ("very fast", "fast", "moderate", "slow", "very slow"),
    "availability": ("very low", "low", "moderate", "high", "very high"),
    "reliability": ("very low", "low", "moderate", "high", "very high"),
}
_RANK_TERMS = ("very low", "low", "moderate", "high", "very high")


class InvalidUniverse(ValueError):
    """Raised when a universe has lo >= hi."""


class GradeOutOfRange(ValueError):
    """Raised when an importance grade falls outside [0, 100]."""


class TermCountMismatch(ValueError):
    """Raised when input and rank variables disagree on term count."""


class Direction(Enum):
    LOWER_IS_BETTER = "lower-is-better"
    HIGHER_IS_BETTER = "higher-is-better"


DIRECTIONS = {
    "cost": Direction.LOWER_IS_BETTER,
    "response_time": Direction.LOWER_IS_BETTER,
    "availability": Direction.HIGHER_IS_BETTER,
    "reliability": Direction.HIGHER_IS_BETTER,
}


@dataclass(frozen=True)
class Triangular:
    a: float
    b: float
    c: float

    def __post_init__(self):
        if not (self.a <= self.b <= self.c):
            raise ValueError(f"triangular parameters must be ordered: {self}")


@dataclass(frozen=True)
class Trapezoidal:
    a: float
    b: float
    c: float
    d: float

    def __post_init__(self):
        if not (self.a <= self.b <= self.c <= self.d):
            raise ValueError(f"trapezoidal parameters must be ordered: {self}")


MembershipFunction = Triangular | Trapezoidal


def membership(mf: MembershipFunction, x):
    """Piecewise-linear membership degree of x, in [0, 1].

    Accepts a scalar or an ndarray; values outside the support yield 0.
    Degenerate edges (zero-width rise/fall/plateau) are handled so that the
    peak always evaluates to 1.
    """
    if isinstance(mf, Triangular):
        a, b, c, d = mf.a, mf.b, mf.b, mf.c
    else:
        a, b, c, d = mf.a, mf.b, mf.c, mf.d
    xv = np.asarray(x, dtype=float)
    out = np.zeros_like(xv)
    if b > a:
        rising = (xv >= a) & (xv < b)
        out = np.where(rising, (xv - a) / (b - a), out)
    out = np.where((xv >= b) & (xv <= c), 1.0, out)
    if d > c:
        falling = (xv > c) & (xv <= d)
        out = np.where(falling, (d - xv) / (d - c), out)
    if np.isscalar(x) or getattr(x, "ndim", 1) == 0:
        return float(out)
    return out


def mf_support(mf: MembershipFunction) -> tuple[float, float]:
    """Closure of the nonzero-membership set."""
    if isinstance(mf, Triangular):
        return (mf.a, mf.c)
    return (mf.a, mf.d)


@dataclass(frozen=True)
class LinguisticVariable:
    """A named quality axis with five fuzzy terms, ordered worst to best.

    For lower-is-better criteria the worst term sits at the high end of the
    universe, so the stored order is the reverse of the universe order.
    """

    name: str
    universe: tuple[float, float]
    direction: Direction
    terms: tuple[tuple[str, MembershipFunction], ...]

    def term(self, name: str) -> MembershipFunction:
        for term_name, mf in self.terms:
            if term_name == name:
                return mf
        raise KeyError(f"variable {self.name!r} has no term {name!r}")

    def term_names(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self.terms)

    def clamp(self, x):
        lo, hi = self.universe
        return np.clip(x, lo, hi)


def _uniform_partition(lo: float, hi: float) -> list[MembershipFunction]:
    """Five-term partition: shoulder trapezoids at the ends, triangles inside.

    Adjacent terms cross at membership 0.5 and every point of the universe is
    covered.  The shoulders saturate exactly at the boundaries, which keeps
    clamped out-of-range inputs at full membership of the extreme terms.
    """
    h = (hi - lo) / 4.0
    parts: list[MembershipFunction] = [Trapezoidal(lo, lo, lo, lo + h)]
    for i in (1, 2, 3):
        parts.append(Triangular(lo + (i - 1) * h, lo + i * h, lo + (i + 1) * h))
    parts.append(Trapezoidal(hi - h, hi, hi, hi))
    return parts


def _make_variable(name: str, lo: float, hi: float, direction: Direction,
                   names_universe_order: tuple[str, ...]) -> LinguisticVariable:
    if not lo < hi:
        raise InvalidUniverse(f"universe for {name!r} must satisfy lo < hi, got [{lo}, {hi}]")
    mfs = _uniform_partition(lo, hi)
    pairs = list(zip(names_universe_order, mfs))
    if direction is Direction.LOWER_IS_BETTER:
        pairs.reverse()  # worst-to-best storage order
    return LinguisticVariable(name, (lo, hi), direction, tuple(pairs))


def build_default_variables(universes: dict[str, tuple[float, float]] | None = None,
                            ) -> list[LinguisticVariable]:
    """Build the four input variables on the given (or default) universes."""
    merged = dict(DEFAULT_UNIVERSES)
    if universes:
        for key, bounds in universes.items():
            if key not in CRITERIA:
                raise KeyError(f"unknown criterion {key!r}")
            merged[key] = (float(bounds[0]), float(bounds[1]))
    out = []
    for crit in CRITERIA:
        lo, hi = merged[crit]
        out.append(_make_variable(crit, lo, hi, DIRECTIONS[crit], _TERMS_BY_CRITERION[crit]))
    return out


def default_rank_variable() -> LinguisticVariable:
    lo, hi = RANK_UNIVERSE
    return _make_variable("rank", lo, hi, Direction.HIGHER_IS_BETTER, _RANK_TERMS)


def importance_to_cf(grade: int) -> float:
    """Map an importance grade in [0, 100] linearly onto a CF in [0, 1]."""
    if not 0 <= grade <= 100:
        raise GradeOutOfRange(f"importance grade must be in [0, 100], got {grade}")
    return grade / 100.0


@dataclass(frozen=True)
class PreferenceProfile:
    """Per-criterion importance grades plus optional universe overrides.

    Availability and reliability universes are fixed to [0, 1]; only cost and
    response time may be rescaled (their magnitudes depend on the workflow).
    """

    grades: dict[str, int]
    universes: dict[str, tuple[float, float]] = field(default_factory=dict)

    def __post_init__(self):
        for crit in CRITERIA:
            if crit not in self.grades:
                raise ValueError(f"profile is missing a grade for {crit!r}")
            grade = self.grades[crit]
            if not isinstance(grade, int) or not 0 <= grade <= 100:
                raise GradeOutOfRange(f"grade for {crit!r} must be an integer in [0, 100]")
        for crit in self.universes:
            if crit not in ("cost", "response_time"):
                raise ValueError(f"universe override not allowed for {crit!r}")

    @classmethod
    def equal(cls, grade: int = 100, universes: dict | None = None) -> "PreferenceProfile":
        return cls({crit: grade for crit in CRITERIA}, universes or {})

    @classmethod
    def from_dict(cls, raw: dict) -> "PreferenceProfile":
        grades = {}
        for crit in CRITERIA:
            entry = raw.get(crit)
            if not isinstance(entry, dict) or "grade" not in entry:
                raise ValueError(f"profile must contain {{{crit!r}: {{'grade': ...}}}}")
            grades[crit] = int(entry["grade"])
        universes = {}
        for crit, bounds in (raw.get("universes") or {}).items():
            universes[crit] = (float(bounds[0]), float(bounds[1]))
        return cls(grades, universes)

    def to_dict(self) -> dict:
        out: dict = {crit: {"grade": self.grades[crit]} for crit in CRITERIA}
        if self.universes:
            out["universes"] = {k: list(v) for k, v in self.universes.items()}
        return out

    def variables(self) -> list[LinguisticVariable]:
        return build_default_variables(self.universes)


@dataclass(frozen=True)
class FuzzyRule:
    variable: str
    term: str
    consequent: str
    cf: float

    def __post_init__(self):
        if not 0.0 <= self.cf <= 1.0:
            raise ValueError(f"rule CF must be in [0, 1], got {self.cf}")


@dataclass(frozen=True)
class RuleBase:
    rules: tuple[FuzzyRule, ...]
    rank_variable: LinguisticVariable


def rule_base_from_cfs(cfs: dict[str, float], variables: list[LinguisticVariable],
                       rank: LinguisticVariable) -> RuleBase:
    """One rule per (criterion, term): i-th worst term maps to i-th worst rank term."""
    rank_names = rank.term_names()
    rules = []
    for var in variables:
        names = var.term_names()
        if len(names) != len(rank_names):
            raise TermCountMismatch(
                f"variable {var.name!r} has {len(names)} terms, rank has {len(rank_names)}")
        cf = cfs[var.name]
        for term_name, rank_name in zip(names, rank_names):
            rules.append(FuzzyRule(var.name, term_name, rank_name, cf))
    return RuleBase(tuple(rules), rank)


def generate_rule_base(profile: PreferenceProfile, variables: list[LinguisticVariable],
                       rank: LinguisticVariable) -> RuleBase:
    cfs = {crit: importance_to_cf(profile.grades[crit]) for crit in CRITERIA}
    return rule_base_from_cfs(cfs, variables, rank)


def rank_grid() -> np.ndarray:
    lo, hi = RANK_UNIVERSE
    return np.linspace(lo, hi, RANK_GRID_SIZE)


def infer_rank_batch(rule_base: RuleBase, variables: list[LinguisticVariable],
                     qos_matrix: np.ndarray) -> np.ndarray:
    """Rank each row of an (n, 4) matrix of QoS values in CRITERIA column order.

    Inputs are clamped to their universes.  Rows firing no rule at all (every
    strength zero) defuzzify to the universe midpoint, 50.
    """
    qos_matrix = np.asarray(qos_matrix, dtype=float)
    if qos_matrix.ndim != 2 or qos_matrix.shape[1] != len(CRITERIA):
        raise ValueError(f"expected an (n, {len(CRITERIA)}) matrix, got {qos_matrix.shape}")
    n = qos_matrix.shape[0]
    by_name = {var.name: var for var in variables}
    clamped = {}
    for col, crit in enumerate(CRITERIA):
        clamped[crit] = by_name[crit].clamp(qos_matrix[:, col])

    rank_names = rule_base.rank_variable.term_names()
    # Effective clip level per rank term: max strength over rules sharing it.
    strengths = {name: np.zeros(n) for name in rank_names}
    for rule in rule_base.rules:
        var = by_name[rule.variable]
        s = membership(var.term(rule.term), clamped[rule.variable]) * rule.cf
        strengths[rule.consequent] = np.maximum(strengths[rule.consequent], s)

    grid = rank_grid()
    agg = np.zeros((n, grid.size))
    for name in rank_names:
        term_curve = membership(rule_base.rank_variable.term(name), grid)
        np.maximum(agg, np.minimum(strengths[name][:, None], term_curve[None, :]), out=agg)
    den = agg.sum(axis=1)
    num = (agg * grid[None, :]).sum(axis=1)
    mid = sum(RANK_UNIVERSE) / 2.0
    return np.where(den > 0.0, num / np.where(den > 0.0, den, 1.0), mid)


def infer_rank(rule_base: RuleBase, variables: list[LinguisticVariable], qos) -> float:
    """Rank a single QoS vector (QoSVector or 4-sequence) on [0, 100]."""
    row = getattr(qos, "as_tuple", lambda: qos)()
    return float(infer_rank_batch(rule_base, variables, np.asarray([row], dtype=float))[0])
