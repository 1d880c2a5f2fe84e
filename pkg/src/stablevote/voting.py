"""Voting algebra and exact root-vote evaluation on realized trees.

The algebra: the majority function g, its marked composition g_x (each
voter replaced by a fair coin with probability b), the one-sided variants
g_plus / g_minus (marked voters forced to 1 resp. 0), the fixed points of
g_x and the cubic factorization of g_x(p) - p.

The dynamic program computes the exact root-vote-1 probability of a tree
conditional on its topology and leaf positions, integrating over marks
and votes.  It works with probabilities conditional on "node unmarked";
the root is never marked, so the root's value is the answer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable

from .params import DomainError
from .rng import CH_VOTE, Stream, fold


def _clamp(q: float) -> float:
    # Domain extension to the whole line: constant outside [0, 1].
    if q < 0.0:
        return 0.0
    if q > 1.0:
        return 1.0
    return q


def g(p1: float, p2: float | None = None, p3: float | None = None) -> float:
    """Probability that a majority of three independent voters votes 1;
    g(q) abbreviates the diagonal g(q, q, q)."""
    if p2 is None:
        p2 = p3 = p1
    p1, p2, p3 = _clamp(p1), _clamp(p2), _clamp(p3)
    return (
        p1 * p2 * p3
        + p1 * p2 * (1.0 - p3)
        + p2 * p3 * (1.0 - p1)
        + p3 * p1 * (1.0 - p2)
    )


def g_times(p1: float, p2: float | None = None, p3: float | None = None,
            b: float = 0.0) -> float:
    """Marked majority: each voter is a fair coin with probability b."""
    if p2 is None:
        p2 = p3 = p1
    h = b / 2.0
    s = 1.0 - b
    return g(s * _clamp(p1) + h, s * _clamp(p2) + h, s * _clamp(p3) + h)


def g_plus(p1: float, p2: float | None = None, p3: float | None = None,
           b: float = 0.0) -> float:
    """Positively biased marking: marked voters vote 1 surely."""
    if p2 is None:
        p2 = p3 = p1
    s = 1.0 - b
    return g(s * _clamp(p1) + b, s * _clamp(p2) + b, s * _clamp(p3) + b)


def g_minus(p1: float, p2: float | None = None, p3: float | None = None,
            b: float = 0.0) -> float:
    """Negatively biased marking: marked voters vote 0 surely."""
    if p2 is None:
        p2 = p3 = p1
    s = 1.0 - b
    return g(s * _clamp(p1), s * _clamp(p2), s * _clamp(p3))


def fixed_points(b: float) -> tuple[float, float, float]:
    """The three fixed points (u_-, 1/2, u_+) of q -> g_times(q; b)."""
    if not 0.0 <= b < 1.0 / 3.0:
        raise DomainError(f"fixed points require 0 <= b < 1/3, got b={b}")
    s = 1.0 - b
    half_gap = math.sqrt(s ** 3 * (1.0 - 3.0 * b)) / (2.0 * s ** 3)
    return 0.5 - half_gap, 0.5, 0.5 + half_gap


@dataclass(frozen=True)
class IterateResult:
    value: float
    first_hit: int | None  # first n with |iterate - u_plus| <= target_tol


def iterate_g_times(q0: float, n: int, b: float,
                    target_tol: float | None = None) -> IterateResult:
    """n-fold composition of g_times on the diagonal, from q0."""
    if n < 0:
        raise ValueError("n must be >= 0")
    u_plus = fixed_points(b)[2] if target_tol is not None else None
    q = _clamp(q0)
    first = None
    if target_tol is not None and abs(q - u_plus) <= target_tol:
        first = 0
    for i in range(1, n + 1):
        q = g_times(q, b=b)
        if first is None and target_tol is not None and abs(q - u_plus) <= target_tol:
            first = i
    return IterateResult(q, first)


def cubic_identity_residual(p: float, b: float) -> float:
    """g_times(p) - p minus its cubic factorization through the fixed points.

    The factorization is 2(1-b)^3 (p - u_-)(p - 1/2)(u_+ - p); the residual
    is zero to rounding on [0, 1].
    """
    um, _, up = fixed_points(b)
    lhs = g_times(p, b=b) - p
    rhs = 2.0 * (1.0 - b) ** 3 * (p - um) * (p - 0.5) * (up - p)
    return lhs - rhs


class SchemeKind(Enum):
    MAJORITY = "majority"
    MARKED = "marked"
    EXP_MARKED = "exp_marked"
    BIASED_PLUS = "biased_plus"
    BIASED_MINUS = "biased_minus"


# Picklable initial-condition objects (lambdas would break worker pools).
@dataclass(frozen=True)
class StepIC:
    """1_{x >= 0} on the first coordinate."""

    def __call__(self, x) -> float:
        x0 = x[0] if hasattr(x, "__len__") else x
        return 1.0 if x0 >= 0.0 else 0.0


@dataclass(frozen=True)
class PhaseStepIC:
    """u_+ on {x >= 0}, u_- on {x < 0} (first coordinate)."""

    u_minus: float
    u_plus: float

    def __call__(self, x) -> float:
        x0 = x[0] if hasattr(x, "__len__") else x
        return self.u_plus if x0 >= 0.0 else self.u_minus


@dataclass(frozen=True)
class ConstantIC:
    value: float

    def __call__(self, x) -> float:
        return self.value


@dataclass(frozen=True)
class RadialStepIC:
    """inside_value on {|x| < radius}, outside_value beyond; optional
    linear ramp of half-width `ramp` around the circle."""

    radius: float
    inside_value: float = 0.0
    outside_value: float = 1.0
    ramp: float = 0.0

    def __call__(self, x) -> float:
        r = math.sqrt(sum(c * c for c in x)) if hasattr(x, "__len__") else abs(x)
        d = r - self.radius
        if self.ramp > 0.0:
            t = min(1.0, max(0.0, 0.5 + d / (2.0 * self.ramp)))
        else:
            t = 1.0 if d >= 0.0 else 0.0
        return self.inside_value + t * (self.outside_value - self.inside_value)


@dataclass(frozen=True)
class VoteScheme:
    """Root-vote semantics: mark law, marked-vote law, leaf vote law.

    mark_root only applies to the Bernoulli-marked kinds; the
    exponentially marked kind always allows the root to be marked (its
    mark is the event that the individual's large-jump clock rings while
    it is alive).
    """

    kind: SchemeKind
    initial_condition: Callable[[object], float]
    mark_root: bool = False

    def __post_init__(self):
        if self.kind == SchemeKind.EXP_MARKED and self.mark_root:
            raise ValueError("mark_root is implicit for EXP_MARKED")

    @property
    def uses_bernoulli_marks(self) -> bool:
        return self.kind in (
            SchemeKind.MARKED,
            SchemeKind.BIASED_PLUS,
            SchemeKind.BIASED_MINUS,
        )

    def marked_vote_probability(self) -> float:
        if self.kind in (SchemeKind.MARKED, SchemeKind.EXP_MARKED):
            return 0.5
        if self.kind == SchemeKind.BIASED_PLUS:
            return 1.0
        if self.kind == SchemeKind.BIASED_MINUS:
            return 0.0
        raise ValueError("majority voting has no marks")


def majority_scheme(initial_condition=None) -> VoteScheme:
    return VoteScheme(SchemeKind.MAJORITY, initial_condition or StepIC())


def marked_scheme(params, initial_condition=None, mark_root=False) -> VoteScheme:
    if initial_condition is None:
        um, _, up = params.fixed_points()
        initial_condition = PhaseStepIC(um, up)
    return VoteScheme(SchemeKind.MARKED, initial_condition, mark_root)


def exp_marked_scheme(params, initial_condition=None) -> VoteScheme:
    if initial_condition is None:
        um, _, up = params.fixed_points()
        initial_condition = PhaseStepIC(um, up)
    return VoteScheme(SchemeKind.EXP_MARKED, initial_condition)


def biased_scheme(sign: int, initial_condition=None) -> VoteScheme:
    kind = SchemeKind.BIASED_PLUS if sign > 0 else SchemeKind.BIASED_MINUS
    return VoteScheme(kind, initial_condition or StepIC())


def _compose(scheme_kind: SchemeKind, b: float,
             q1: float, q2: float, q3: float) -> float:
    if scheme_kind == SchemeKind.MAJORITY:
        return g(q1, q2, q3)
    if scheme_kind == SchemeKind.MARKED:
        return g_times(q1, q2, q3, b=b)
    if scheme_kind == SchemeKind.BIASED_PLUS:
        return g_plus(q1, q2, q3, b=b)
    if scheme_kind == SchemeKind.BIASED_MINUS:
        return g_minus(q1, q2, q3, b=b)
    raise ValueError(scheme_kind)


def dp_root_probability(tree, scheme: VoteScheme, b: float | None = None) -> float:
    """Exact root-vote-1 probability given topology and leaf positions.

    Rejects the exponentially marked scheme: its mark events are tied to
    the spatial path (the large-jump clock), so no position-conditional
    mark probability exists; that scheme is only ever sampled.
    """
    if scheme.kind == SchemeKind.EXP_MARKED:
        raise ValueError("exp-marked voting cannot be DP-evaluated")
    if b is None:
        b = tree.params.b_eps
    p = scheme.initial_condition
    if scheme.kind == SchemeKind.MAJORITY:
        b = 0.0

    def value(label) -> float:
        node = tree.nodes[label]
        if node.is_leaf:
            return _clamp(p(node.position))
        q1 = value(label + (1,))
        q2 = value(label + (2,))
        q3 = value(label + (3,))
        return _compose(scheme.kind, b, q1, q2, q3)

    root = value(())
    if scheme.mark_root and scheme.kind != SchemeKind.MAJORITY:
        m = scheme.marked_vote_probability()
        root = (1.0 - b) * root + b * m
    return root


def sample_root_vote(tree, scheme: VoteScheme, vote_seed: int = 0) -> int:
    """One Bernoulli realization of the root vote on a realized tree.

    Marks must already be attached consistently with the scheme (Bernoulli
    marks for the marked/biased kinds, exponential marks for EXP_MARKED).
    vote_seed = 0 reproduces the votes of the lazy evaluator; other values
    select independent batches of vote uniforms so a fixed tree can be
    re-voted many times.
    """
    if scheme.kind != SchemeKind.MAJORITY and tree.mark_mode is None:
        raise ValueError("tree has no marks; run sample_marks first")
    if scheme.kind == SchemeKind.EXP_MARKED and tree.mark_mode != "exponential":
        raise ValueError("exp-marked voting requires exponential marks")
    if scheme.uses_bernoulli_marks:
        if tree.mark_mode != "bernoulli":
            raise ValueError(f"{scheme.kind.value} voting requires bernoulli marks")
        if scheme.mark_root and not getattr(tree, "marks_include_root", False):
            raise ValueError("scheme marks the root but the tree does not")
    p = scheme.initial_condition
    tag = CH_VOTE if vote_seed == 0 else CH_VOTE + (vote_seed << 6)

    def vote(label) -> int:
        node = tree.nodes[label]
        if scheme.kind != SchemeKind.MAJORITY and node.mark:
            m = scheme.marked_vote_probability()
            if m == 1.0:
                return 1
            if m == 0.0:
                return 0
            s = Stream(fold(node.key, tag))
            return 1 if s.uniform() < m else 0
        if node.is_leaf:
            s = Stream(fold(node.key, tag))
            return 1 if s.uniform() < _clamp(p(node.position)) else 0
        total = vote(label + (1,)) + vote(label + (2,)) + vote(label + (3,))
        return 1 if total >= 2 else 0

    return vote(())
