"""Ternary branching trees: topology, motion, marks, lazy evaluation.

Individuals are addressed by Ulam-Harris labels (tuples over {1,2,3});
the root is ().  Every node owns a key derived by folding its label path
into the replicate key, and each random purpose (lifetime, Brownian
increments, small jumps, large-jump clock, marks, votes) reads from its
own channel of that key.  Eager construction (generate_topology /
attach_motion / sample_marks) and the lazy depth-first evaluator consume
the same channels, so they realize the same tree bit for bit.

The lazy evaluator never materializes the tree: a child subtree is
generated, voted, and dropped before its siblings, so memory is O(depth)
while the expected population is exp(2t/eps^2).  A parent's majority is
decided once two children agree, and a marked individual votes by coin
without generating its subtree at all; per-label keying makes both kinds
of skipping invisible to every other node.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

from . import levy
from .params import ModelParams
from .rng import (CH_BM, CH_LARGE, CH_LIFE, CH_MARK, CH_SMALL, CH_STABLE,
                  CH_VOTE, Stream, derive_key, fold)
from .voting import SchemeKind, VoteScheme


class BudgetExceeded(RuntimeError):
    """Tree realization would exceed the node budget; nothing is truncated."""

    def __init__(self, visits: int):
        super().__init__(f"node budget exceeded after {visits} visits")
        self.visits = visits


class UncouplablePair(ValueError):
    """The two attachments do not share a randomness layout."""


class MotionKind(Enum):
    STABLE_1D = "stable_1d"
    STABLE_D = "stable_d"
    SUB_BM_TRUNC = "sub_bm_trunc"
    SUB_BM_FULL = "sub_bm_full"
    Z_PLUS = "z_plus"
    Z_MINUS = "z_minus"


_SUBORDINATED = {
    MotionKind.SUB_BM_TRUNC,
    MotionKind.SUB_BM_FULL,
    MotionKind.Z_PLUS,
    MotionKind.Z_MINUS,
}


@dataclass(frozen=True)
class MotionSpec:
    """Spatial motion attached to each individual.

    resolution_delta is the small-jump cutoff of the truncated
    subordinator sampler as a fraction of the truncation level (None
    selects the tree default).  Z kinds post-process every terminal
    position by the band shift of the reference flow and require
    geometry, shift_l and beta.
    """

    kind: MotionKind
    dim: int = 1
    resolution_delta: Optional[float] = None
    geometry: object = None
    shift_l: float = 0.0
    beta: float = 0.0

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        if self.kind == MotionKind.STABLE_1D and self.dim != 1:
            raise ValueError("STABLE_1D requires dim == 1")
        if self.kind in (MotionKind.Z_PLUS, MotionKind.Z_MINUS):
            if self.geometry is None or self.dim < 2:
                raise ValueError("Z motions require geometry and dim >= 2")

    @property
    def is_subordinated(self) -> bool:
        return self.kind in _SUBORDINATED

    def family(self) -> tuple:
        fam = "sub" if self.is_subordinated else "stable"
        return (fam, self.dim)


# Default small-jump cutoff for per-individual motion, as a fraction of the
# truncation level.  The mean of the increment is exact for any cutoff
# (drift compensation); the discarded variance is O(cutoff^(2 - alpha/2))
# relative (a few percent here), while the per-node jump count scales like
# cutoff^(-alpha/2).  Statistical suites use the much finer levy-module
# default; this one is the tree workhorse.
TREE_RESOLUTION_FRACTION = 3e-2
NODE_BUDGET_DEFAULT = 10 ** 7


@dataclass
class NodeRecord:
    label: tuple
    key: int
    birth_time: float
    death_time: float
    is_leaf: bool
    mark: Optional[bool] = None
    position: object = None       # terminal position (at death or horizon)
    tau_cross: Optional[float] = None  # first large-jump time of its clock


@dataclass
class BranchingTree:
    params: ModelParams
    horizon: float
    stream_key: int
    nodes: dict = field(default_factory=dict)
    motion: Optional[MotionSpec] = None
    mark_mode: Optional[str] = None
    marks_include_root: bool = False
    root_position: object = None

    def leaves(self):
        return [n for n in self.nodes.values() if n.is_leaf]

    def internal(self):
        return [n for n in self.nodes.values() if not n.is_leaf]

    def __len__(self):
        return len(self.nodes)

    def dump(self) -> str:
        """One node per line: label birth death mark x..."""
        lines = []
        for label in sorted(self.nodes):
            n = self.nodes[label]
            name = "".join(str(d) for d in label) or "root"
            mark = "-" if n.mark is None else ("1" if n.mark else "0")
            pos = ""
            if n.position is not None:
                coords = n.position if hasattr(n.position, "__len__") else (n.position,)
                pos = " " + " ".join(f"{c:.17g}" for c in coords)
            lines.append(f"{name} {n.birth_time:.17g} {n.death_time:.17g} {mark}{pos}")
        return "\n".join(lines) + "\n"


def replicate_key(master_seed: int, replicate: int) -> int:
    return derive_key(master_seed, replicate)


def _lifetime(params: ModelParams, node_key: int) -> float:
    return Stream(fold(node_key, CH_LIFE)).exponential(params.epsilon ** 2)


def generate_topology(params: ModelParams, horizon: float,
                      node_budget: int = NODE_BUDGET_DEFAULT,
                      master_seed: int = 0, replicate: int = 0) -> BranchingTree:
    """Topology and times only; aborts (never truncates) on budget."""
    if horizon < 0.0:
        raise ValueError("horizon must be >= 0")
    if node_budget < 1:
        raise ValueError("node_budget must be >= 1")
    root_key = replicate_key(master_seed, replicate)
    tree = BranchingTree(params, horizon, root_key)
    stack = [((), root_key, 0.0)]
    while stack:
        label, key, birth = stack.pop()
        if len(tree.nodes) >= node_budget:
            raise BudgetExceeded(len(tree.nodes) + 1)
        tau = _lifetime(params, key)
        remaining = horizon - birth
        is_leaf = tau >= remaining
        death = horizon if is_leaf else birth + tau
        tree.nodes[label] = NodeRecord(label, key, birth, death, is_leaf)
        if not is_leaf:
            for c in (1, 2, 3):
                stack.append((label + (c,), fold(key, c), death))
    return tree


@dataclass(frozen=True)
class _SubCache:
    """Precomputed constants of the truncated-subordinator sampler."""

    delta: float
    rate: float           # arrival rate of jumps in [delta, M]
    drift: float          # compensation for jumps below delta
    inv_a: float          # delta^(-alpha/2)
    inv_b: float          # delta^(-alpha/2) - M^(-alpha/2)
    neg_inv_rho: float    # -2/alpha


def _sub_cache(params: ModelParams, spec: MotionSpec) -> _SubCache:
    frac = spec.resolution_delta
    if frac is None:
        frac = TREE_RESOLUTION_FRACTION
    delta = frac * params.trunc_level
    c = levy.levy_density_prefactor(params)
    rho = params.alpha / 2.0
    M = params.trunc_level
    rate = c * (2.0 / params.alpha) * (delta ** -rho - M ** -rho)
    drift = c * delta ** (1.0 - rho) / (1.0 - rho)
    return _SubCache(delta, rate, drift, delta ** -rho,
                     delta ** -rho - M ** -rho, -1.0 / rho)


_M64 = (1 << 64) - 1
_GOLD = 0x9E3779B97F4A7C15
_C1 = 0xBF58476D1CE4E5B9
_C2 = 0x94D049BB133111EB
_INV53 = 1.0 / (1 << 53)


def _sub_increment(cache: _SubCache, duration: float, stream: Stream) -> float:
    """Truncated-subordinator increment over `duration` (exact mean)."""
    total = cache.drift * duration
    n = stream.poisson(cache.rate * duration)
    if n == 0:
        return total
    if n <= 48:
        # inlined counter-stream draws; this loop dominates subordinated
        # node sampling and numpy array overhead loses below ~50 draws
        key = stream.key
        ctr = stream.ctr
        inv_a, inv_b, nir = cache.inv_a, cache.inv_b, cache.neg_inv_rho
        for _ in range(n):
            ctr += 1
            z = (key + ctr * _GOLD) & _M64
            z = ((z ^ (z >> 30)) * _C1) & _M64
            z = ((z ^ (z >> 27)) * _C2) & _M64
            z ^= z >> 31
            u = ((z >> 11) + 0.5) * _INV53
            total += (inv_a - u * inv_b) ** nir
        stream.ctr = ctr
        return total
    u = stream.uniforms(n)
    total += float(((cache.inv_a - u * cache.inv_b) ** cache.neg_inv_rho).sum())
    return total


class _MotionSampler:
    """Per-attachment motion machinery shared by eager and lazy paths."""

    def __init__(self, params: ModelParams, spec: MotionSpec, horizon: float,
                 mirror: bool = False):
        self.params = params
        self.spec = spec
        self.horizon = horizon
        self.mirror = mirror
        self.dim = spec.dim
        if spec.is_subordinated:
            if params.is_brownian:
                raise ValueError("subordinated motions require alpha < 2")
            self.cache = _sub_cache(params, spec)
            self.large_rate = params.large_jump_rate()
        if spec.kind in (MotionKind.Z_PLUS, MotionKind.Z_MINUS):
            from . import geometry

            self._shift = geometry.z_shift
            self._sign = +1 if spec.kind == MotionKind.Z_PLUS else -1

    def displace(self, node_key: int, pos, duration: float,
                 record: Optional[NodeRecord] = None):
        """Terminal position after `duration`, reading the node's channels."""
        spec, params, dim = self.spec, self.params, self.dim
        if not spec.is_subordinated:
            st = Stream(fold(node_key, CH_STABLE))
            if params.is_brownian:
                sd = math.sqrt(2.0 * params.speed * duration)
                step = [sd * z for z in _normals(st, dim)]
            elif dim == 1:
                scale = (params.speed * duration) ** (1.0 / params.alpha)
                step = [scale * _cms_standard(st, params.alpha)]
            else:
                scale = (params.speed * duration) ** (1.0 / params.alpha)
                s = levy.one_sided_stable(params.alpha / 2.0, st)
                sd = scale * math.sqrt(2.0 * s)
                step = [sd * z for z in _normals(st, dim)]
            return self._add(pos, step)

        small = Stream(fold(node_key, CH_SMALL))
        r = _sub_increment(self.cache, duration, small)
        bm = Stream(fold(node_key, CH_BM))
        sd = math.sqrt(2.0 * r)
        step = [sd * z for z in _normals(bm, dim)]
        tau_cross, jump_sum, lg = self._large_jumps(node_key, duration)
        if record is not None:
            record.tau_cross = tau_cross
        if spec.kind == MotionKind.SUB_BM_FULL and jump_sum > 0.0:
            sd = math.sqrt(2.0 * jump_sum)
            extra = [sd * z for z in _normals(lg, dim)]
            step = [a + b for a, b in zip(step, extra)]
        return self._add(pos, step)

    def _large_jumps(self, node_key: int, duration: float):
        """First large-jump time; for full motion also total jump mass."""
        lg = Stream(fold(node_key, CH_LARGE))
        mean = 1.0 / self.large_rate
        t = lg.exponential(mean)
        tau_cross = t
        if self.spec.kind != MotionKind.SUB_BM_FULL:
            return tau_cross, 0.0, lg
        total = 0.0
        while t < duration:
            total += levy.large_jump_size(self.params, lg)
            t += lg.exponential(mean)
        return tau_cross, total, lg

    def _add(self, pos, step):
        if self.mirror:
            step = [-s for s in step]
        if self.dim == 1:
            return (pos if isinstance(pos, float) else pos[0]) + step[0]
        return tuple(a + b for a, b in zip(pos, step))

    def finalize(self, pos, death_time: float):
        """Post-process a terminal position (band shift for Z kinds)."""
        if self.spec.kind not in (MotionKind.Z_PLUS, MotionKind.Z_MINUS):
            return pos
        return self._shift(
            pos, self.horizon - death_time, self.spec.geometry, self.params,
            self.spec.shift_l, self.spec.beta, self._sign,
        )


def _normals(stream: Stream, dim: int):
    out = []
    while len(out) < dim:
        z1, z2 = stream.normal_pair()
        out.append(z1)
        out.append(z2)
    return out[:dim]


def _cms_standard(stream: Stream, alpha: float) -> float:
    """Symmetric stable draw with characteristic function exp(-|t|^alpha)."""
    u = math.pi * (stream.uniform() - 0.5)
    w = stream.exponential()
    return (math.sin(alpha * u) / math.cos(u) ** (1.0 / alpha)) * (
        math.cos((1.0 - alpha) * u) / w) ** ((1.0 - alpha) / alpha)


def attach_motion(tree: BranchingTree, spec: MotionSpec,
                  root_position=None) -> BranchingTree:
    """Sample every individual's displacement; children start where the
    parent died.  Fills terminal positions (and large-jump clocks for
    subordinated kinds) in place and returns the tree."""
    params = tree.params
    if root_position is None:
        root_position = 0.0 if spec.dim == 1 else (0.0,) * spec.dim
    sampler = _MotionSampler(params, spec, tree.horizon)
    tree.motion = spec
    tree.root_position = root_position

    def walk(label, pos):
        node = tree.nodes[label]
        duration = node.death_time - node.birth_time
        raw = sampler.displace(node.key, pos, duration, record=node)
        node.position = sampler.finalize(raw, node.death_time)
        if not node.is_leaf:
            for c in (1, 2, 3):
                walk(label + (c,), node.position)

    walk((), root_position)
    return tree


def sample_marks(tree: BranchingTree, mode: str,
                 include_root: bool = False,
                 mark_seed: int = 0) -> BranchingTree:
    """Attach marks.  mode "bernoulli": each non-root individual is marked
    independently with probability b_eps (include_root extends the marking
    to the root, used by the root-conditioning identity).  mode
    "exponential": individual i is marked iff its first large-jump time
    precedes the end of its realized lifetime (root included; leaf
    lifetimes are truncated at the horizon, so leaf mark frequency is
    below b_eps).

    mark_seed = 0 reproduces the marks of the lazy evaluator; other
    values draw independent Bernoulli markings of the same tree.
    """
    b = tree.params.b_eps
    tag = CH_MARK if mark_seed == 0 else CH_MARK + (mark_seed << 6)
    if mode == "bernoulli":
        for node in tree.nodes.values():
            if node.label == () and not include_root:
                node.mark = False
            else:
                node.mark = Stream(fold(node.key, tag)).uniform() < b
        tree.marks_include_root = include_root
    elif mode == "exponential":
        for node in tree.nodes.values():
            if node.tau_cross is None:
                raise ValueError(
                    "exponential marks need large-jump records; attach a "
                    "subordinated motion first")
            lived = node.death_time - node.birth_time
            node.mark = node.tau_cross < lived
    else:
        raise ValueError(f"unknown mark mode {mode!r}")
    tree.mark_mode = mode
    return tree


@dataclass
class LazyStats:
    visits: int = 0
    max_depth: int = 0
    live_nodes: int = 0
    peak_live: int = 0


@dataclass
class LazyResult:
    root_vote: int
    stats: LazyStats


class Visitor:
    """Callbacks consumed by lazy_evaluate.

    leaf_vote(position, stream) -> 0/1 and combine(v1, v2, v3) -> 0/1.
    The default visitor implements the scheme semantics; tests can
    substitute instrumented ones.
    """

    def __init__(self, scheme: VoteScheme):
        self.scheme = scheme

    def leaf_vote(self, position, stream: Stream, mirror: bool) -> int:
        u = stream.uniform()
        if mirror:
            u = 1.0 - u
        p = self.scheme.initial_condition(position)
        return 1 if u < p else 0

    def combine(self, v1: int, v2: int, v3: int) -> int:
        return 1 if v1 + v2 + v3 >= 2 else 0


def lazy_evaluate(params: ModelParams, horizon: float, spec: MotionSpec,
                  scheme: VoteScheme, master_seed: int, replicate: int = 0,
                  root_position=None, node_budget: int = NODE_BUDGET_DEFAULT,
                  short_circuit: bool = True, visitor: Optional[Visitor] = None,
                  mirror: bool = False) -> LazyResult:
    """Depth-first generate-and-vote without materializing the tree.

    mirror evaluates the reflected system (increments negated, vote
    uniforms complemented): for symmetric schemes its root vote is
    exactly one minus the unmirrored vote, giving antithetic pairs.
    """
    if root_position is None:
        root_position = 0.0 if spec.dim == 1 else (0.0,) * spec.dim
    if visitor is None:
        visitor = Visitor(scheme)
    sampler = _MotionSampler(params, spec, horizon, mirror=mirror)
    stats = LazyStats()
    eps2 = params.epsilon ** 2
    b = params.b_eps
    kind = scheme.kind
    bernoulli_marks = scheme.uses_bernoulli_marks
    exp_marks = kind == SchemeKind.EXP_MARKED
    if exp_marks and not spec.is_subordinated:
        raise ValueError("exp-marked voting requires a subordinated motion")
    marked_p = None if kind == SchemeKind.MAJORITY else scheme.marked_vote_probability()

    def coin(node_key: int, p: float) -> int:
        if p == 1.0:
            return 1
        if p == 0.0:
            return 0
        u = Stream(fold(node_key, CH_VOTE)).uniform()
        if mirror:
            u = 1.0 - u
        return 1 if u < p else 0

    def eval_node(node_key: int, birth: float, pos, depth: int) -> int:
        stats.visits += 1
        if stats.visits > node_budget:
            raise BudgetExceeded(stats.visits)
        stats.live_nodes += 1
        if stats.live_nodes > stats.peak_live:
            stats.peak_live = stats.live_nodes
        if depth > stats.max_depth:
            stats.max_depth = depth
        try:
            tau = Stream(fold(node_key, CH_LIFE)).exponential(eps2)
            remaining = horizon - birth
            is_leaf = tau >= remaining
            lived = min(tau, remaining)
            is_root = depth == 0
            markable = (not is_root or scheme.mark_root) if bernoulli_marks \
                else exp_marks
            if bernoulli_marks and markable:
                if Stream(fold(node_key, CH_MARK)).uniform() < b:
                    return coin(node_key, marked_p)
            if spec.is_subordinated:
                node = NodeRecord((), node_key, birth, birth + lived, is_leaf)
                raw = sampler.displace(node_key, pos, lived, record=node)
                if exp_marks and node.tau_cross < lived:
                    return coin(node_key, marked_p)
            else:
                raw = sampler.displace(node_key, pos, lived)
            newpos = sampler.finalize(raw, birth + lived)
            if is_leaf:
                s = Stream(fold(node_key, CH_VOTE))
                return visitor.leaf_vote(newpos, s, mirror)
            ones = zeros = 0
            votes = []
            for c in (1, 2, 3):
                v = eval_node(fold(node_key, c), birth + lived, newpos, depth + 1)
                votes.append(v)
                ones += v
                zeros += 1 - v
                if short_circuit and (ones == 2 or zeros == 2):
                    return 1 if ones == 2 else 0
            return visitor.combine(*votes)
        finally:
            stats.live_nodes -= 1

    root_key = replicate_key(master_seed, replicate)
    vote = eval_node(root_key, 0.0, root_position, 0)
    return LazyResult(vote, stats)


def eager_root_vote(params: ModelParams, horizon: float, spec: MotionSpec,
                    scheme: VoteScheme, master_seed: int, replicate: int = 0,
                    root_position=None,
                    node_budget: int = NODE_BUDGET_DEFAULT) -> int:
    """Reference path: materialize the tree, then vote.  Bit-identical to
    lazy_evaluate for the same seed; kept as the equivalence oracle."""
    tree = generate_topology(params, horizon, node_budget, master_seed, replicate)
    attach_motion(tree, spec, root_position)
    if scheme.kind == SchemeKind.MAJORITY:
        pass
    elif scheme.uses_bernoulli_marks:
        sample_marks(tree, "bernoulli", include_root=scheme.mark_root)
    else:
        sample_marks(tree, "exponential")
    from .voting import sample_root_vote

    return sample_root_vote(tree, scheme)
