"""Exact sampling of weighted permutations by adaptive partitioning.

A permutation is stored as a column -> row map ``perm`` with weight
``prod_c A[perm[c], c]``. Sets of permutations are identified by a partial
assignment (:class:`PermutationSubset`). Starting from the set of all
permutations, each node of the search is split by fixing the row of one
column, the column being chosen to minimise the summed child bounds. If the
children's bounds do not sum to at most the parent's bound, the partition is
refined further until they do. Descending with probability
``bound(child) / bound(parent)`` and restarting from the root whenever the
leftover slack is drawn yields exact samples from ``w(perm) / per(A)``.

Three partitioning rules are provided:

``adaptive``
    arg-min column choice at every node, refining until the bound nests.
``fixed``
    columns split in index order (no adaptive choice), with the same runtime
    nesting repair so that any bound can be used.
``guaranteed``
    adaptive choice with exactly one refinement attempt; a node whose chosen
    partition does not nest hands itself and its whole subtree to ``fixed``.

All three are exact. Slack always restarts the trial from the root.
"""

from __future__ import annotations

import bisect
import itertools
import logging
import math
import threading
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import logsumexp

from .bounds import child_log_bounds, soules_upper_bound
from .errors import RejectionCapExceeded, ZeroPermanent
from .exact import has_perfect_matching
from .matrixio import as_matrix

__all__ = [
    "DrawResult",
    "NestingPartition",
    "PartitionCandidate",
    "PermutationSampler",
    "PermutationSubset",
    "ProbeResult",
    "TighteningCache",
    "acceptance_rate_probe",
    "build_nesting_partition",
    "choose_refinement",
    "draw_adapart",
    "draw_fixed_partition",
    "draw_guaranteed",
    "refine",
]

log = logging.getLogger(__name__)

NESTING_TOL = 1e-12
METHODS = ("adapart", "fixed", "guaranteed")


@dataclass(frozen=True, eq=False)
class PermutationSubset:
    """All permutations agreeing with a partial column -> row assignment.

    ``assignment[c]`` is the row fixed for column ``c``, or ``-1`` when the
    column is free. Equality and hashing use the assignment only, so the same
    set reached through different refinement orders compares equal.
    """

    assignment: tuple[int, ...]
    log_prefix_weight: float = 0.0

    @classmethod
    def root(cls, n: int) -> "PermutationSubset":
        return cls((-1,) * n, 0.0)

    @classmethod
    def from_fixed(cls, m, fixed) -> "PermutationSubset":
        """Build a subset from ``(column, row)`` pairs, computing the prefix weight."""
        m = np.asarray(m)
        assignment = [-1] * m.shape[0]
        logw = 0.0
        for col, row in fixed:
            if assignment[col] != -1 or row in assignment:
                raise ValueError(f"conflicting assignment ({col}, {row})")
            assignment[col] = row
            logw += math.log(m[row, col]) if m[row, col] > 0 else -math.inf
        return cls(tuple(assignment), logw)

    def __eq__(self, other):
        if not isinstance(other, PermutationSubset):
            return NotImplemented
        return self.assignment == other.assignment

    def __hash__(self):
        return hash(self.assignment)

    @property
    def n(self) -> int:
        return len(self.assignment)

    @property
    def fixed(self) -> list[tuple[int, int]]:
        return [(c, r) for c, r in enumerate(self.assignment) if r >= 0]

    @property
    def free_cols(self) -> list[int]:
        return [c for c, r in enumerate(self.assignment) if r < 0]

    @property
    def free_rows(self) -> list[int]:
        used = set(self.assignment)
        return [r for r in range(self.n) if r not in used]

    @property
    def size(self) -> int:
        """Number of free columns (the subset holds ``size!`` permutations)."""
        return self.assignment.count(-1)

    @property
    def is_singleton(self) -> bool:
        return self.size <= 1

    def extend(self, col: int, row: int, log_entry: float) -> "PermutationSubset":
        a = list(self.assignment)
        a[col] = row
        return PermutationSubset(tuple(a), self.log_prefix_weight + log_entry)

    def permutation(self) -> tuple[int, ...]:
        """The single permutation of a singleton subset."""
        if not self.is_singleton:
            raise ValueError("subset holds more than one permutation")
        free_cols = self.free_cols
        if not free_cols:
            return self.assignment
        a = list(self.assignment)
        a[free_cols[0]] = self.free_rows[0]
        return tuple(a)

    def contains(self, perm) -> bool:
        return all(r < 0 or perm[c] == r for c, r in enumerate(self.assignment))


@dataclass
class PartitionCandidate:
    """One way to split a subset: fix the row of ``column``."""

    column: int
    children: list[PermutationSubset]
    child_log_bounds: np.ndarray
    log_ub_sum: float


@dataclass
class NestingPartition:
    children: list[PermutationSubset]
    child_log_bounds: np.ndarray
    log_total_ub: float
    nesting_retries: int
    fallback: bool = False


@dataclass
class DrawResult:
    permutation: tuple[int, ...]
    rejections: int
    root_log_ub_at_draw: float
    nesting_retries: int


@dataclass
class ProbeResult:
    accepted: int
    trials: int
    per_trial_root_log_ub: np.ndarray
    outcomes: np.ndarray  # bool per trial


class TighteningCache:
    """Thread-safe map from a subset's assignment to a tightened log bound.

    Writes only ever lower a stored value. Once ``max_entries`` keys are
    stored, bounds for new keys are discarded; correctness never depends on
    what the cache holds.
    """

    def __init__(self, max_entries: int = 2_000_000):
        self.max_entries = max_entries
        self._data: dict[tuple[int, ...], float] = {}
        self._lock = threading.Lock()

    def __len__(self):
        return len(self._data)

    def get(self, key, default: float = math.inf) -> float:
        return self._data.get(key, default)

    def lower(self, key, value: float) -> None:
        with self._lock:
            old = self._data.get(key)
            if old is None:
                if len(self._data) < self.max_entries:
                    self._data[key] = value
            elif value < old:
                self._data[key] = value


class _Uniforms:
    """Buffered uniform draws from a numpy Generator."""

    def __init__(self, rng: np.random.Generator):
        self.rng = rng
        self._buf: list[float] = []
        self._pos = 0
        self._chunk = 32

    def __call__(self) -> float:
        if self._pos == len(self._buf):
            self._buf = self.rng.random(self._chunk).tolist()
            self._pos = 0
            self._chunk = min(2 * self._chunk, 8192)
        u = self._buf[self._pos]
        self._pos += 1
        return u


def _as_uniforms(rng) -> _Uniforms:
    if isinstance(rng, _Uniforms):
        return rng
    if rng is None or isinstance(rng, (int, np.integer)):
        rng = np.random.default_rng(rng)
    return _Uniforms(rng)


def _lse(values) -> float:
    # scipy's logsumexp costs ~20us per call; these lists are short
    top = max(values, default=-math.inf)
    if top == -math.inf:
        return -math.inf
    return top + math.log(math.fsum(math.exp(v - top) for v in values))


# ---------------------------------------------------------------------------


@dataclass
class _Node:
    children: list[PermutationSubset]
    raw_bounds: list[float]
    perms: list[tuple[int, ...] | None]  # full permutation for singleton children
    cum: list[float] | None  # cumulative ratios to the node bound (static bounds only)
    retries: int
    child_rule: str
    column: int = -1


@dataclass
class SamplerStats:
    trials: int = 0
    accepted: int = 0
    node_visits: int = 0
    visits_with_retries: int = 0
    nodes_built: int = 0
    nodes_with_retries: int = 0
    fallbacks: int = 0


class PermutationSampler:
    """Exact sampler for the permutation distribution of one matrix.

    The sampler memoises the partition chosen at every subset it has visited,
    so repeated draws from the same matrix get cheaper. With ``tighten`` the
    bound of every visited subset is replaced by the sum of its children's
    bounds whenever that is smaller, shrinking the rejection envelope.

    Parameters
    ----------
    m : array_like
        Non-negative square matrix.
    method : {"adapart", "fixed", "guaranteed"}
        Partitioning rule.
    tighten : bool
        Enable bound tightening.
    tighten_policy : {"visit", "reject"}
        ``"visit"`` replaces a subset's bound by its children's sum at every
        visit and passes the savings up the path at the end of the trial.
        ``"reject"`` only tightens when slack is drawn, subtracting that
        slack from the rejecting subset and all of its ancestors.
    cache : TighteningCache, optional
        Shared tightening cache; a private one is created when omitted.
    max_nodes : int
        Maximum number of memoised partitions.
    bound_hook : callable, optional
        ``bound_hook(subset, log_bound) -> log_bound`` applied to every
        subset bound; must return valid upper bounds that are exact on
        singletons. Intended for tests.
    """

    def __init__(
        self,
        m,
        method: str = "adapart",
        tighten: bool = False,
        cache: TighteningCache | None = None,
        tighten_policy: str = "reject",
        max_nodes: int = 500_000,
        bound_hook: Callable[[PermutationSubset, float], float] | None = None,
    ):
        if method not in METHODS:
            raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
        self.matrix = as_matrix(m)
        self.n = self.matrix.shape[0]
        with np.errstate(divide="ignore"):
            self.log_matrix = np.log(self.matrix)
        self.method = method
        if tighten_policy not in ("visit", "reject"):
            raise ValueError(f"unknown tighten_policy {tighten_policy!r}")
        self.tighten = tighten
        self.tighten_policy = tighten_policy
        self.cache = cache if cache is not None else (TighteningCache() if tighten else None)
        self.max_nodes = max_nodes
        self.bound_hook = bound_hook
        self.stats = SamplerStats()
        self._raw: dict[tuple[int, ...], float] = {}
        self._nodes: dict[str, dict[tuple[int, ...], _Node]] = {
            "adaptive": {},
            "fixed": {},
            "once": {},
        }
        self.root = PermutationSubset.root(self.n)
        self.root_raw_log_ub = self._raw_bound(self.root)
        if self.root_raw_log_ub == -math.inf or not has_perfect_matching(self.matrix):
            raise ZeroPermanent("matrix has no permutation with positive weight")
        self._root_rule = {"adapart": "adaptive", "fixed": "fixed", "guaranteed": "once"}[method]

    # -- bounds -------------------------------------------------------------

    def _raw_bound(self, subset: PermutationSubset, value: float | None = None) -> float:
        """Canonical raw log bound; the first value computed for a subset wins."""
        key = subset.assignment
        got = self._raw.get(key)
        if got is not None:
            return got
        if value is None:
            if subset.log_prefix_weight == -math.inf:
                value = -math.inf
            else:
                value = subset.log_prefix_weight + soules_upper_bound(
                    self.matrix, subset.free_rows, subset.free_cols
                ).log_value
        if self.bound_hook is not None:
            value = self.bound_hook(subset, value)
        if len(self._raw) < 4 * self.max_nodes:
            self._raw[key] = value
        return value

    def log_bound(self, subset: PermutationSubset) -> float:
        """Bound currently in force for ``subset`` (tightened if enabled)."""
        raw = self._raw_bound(subset)
        if self.cache is None:
            return raw
        return min(raw, self.cache.get(subset.assignment))

    @property
    def root_log_ub(self) -> float:
        return self.log_bound(self.root)

    # -- partitioning -------------------------------------------------------

    def candidates(self, subset: PermutationSubset) -> tuple[list[int], list[int], np.ndarray]:
        """Free rows, free columns and the matrix of one-step child bounds."""
        rows = subset.free_rows
        cols = subset.free_cols
        ix = np.ix_(rows, cols)
        bounds = subset.log_prefix_weight + child_log_bounds(self.matrix[ix], self.log_matrix[ix])
        return rows, cols, bounds

    def _split(self, subset: PermutationSubset, rule: str) -> PartitionCandidate:
        rows, cols, bounds = self.candidates(subset)
        if rule == "fixed":
            ci = 0
        else:
            sums = logsumexp(bounds, axis=0)
            ci = int(np.argmin(sums))  # first index on ties -> smallest column
        col = cols[ci]
        children = []
        child_bounds = []
        for ri, row in enumerate(rows):
            b = bounds[ri, ci]
            if b == -math.inf:
                continue  # zero-weight set, no mass
            child = subset.extend(col, row, float(self.log_matrix[row, col]))
            children.append(child)
            child_bounds.append(self._effective(child, float(b)))
        child_bounds = np.array(child_bounds)
        total = float(logsumexp(child_bounds)) if len(children) else -math.inf
        return PartitionCandidate(col, children, child_bounds, total)

    def _effective(self, subset: PermutationSubset, value: float | None = None) -> float:
        raw = self._raw_bound(subset, value)
        if self.cache is None:
            return raw
        return min(raw, self.cache.get(subset.assignment))

    def _nest(self, subset, log_bound, rule, first=None):
        """Repeat-until loop: refine the largest element until the bound nests."""
        cand = first if first is not None else self._split(subset, rule)
        children = list(cand.children)
        bounds = list(cand.child_log_bounds)
        total = cand.log_ub_sum
        retries = 0
        while total > log_bound + NESTING_TOL:
            order = sorted(range(len(children)), key=lambda i: -bounds[i])
            pick = next((i for i in order if not children[i].is_singleton), None)
            if pick is None:
                # all singletons: the sum is the exact weight, so only rounding remains
                break
            sub = self._split(children[pick], rule)
            children[pick:pick + 1] = sub.children
            bounds[pick:pick + 1] = list(sub.child_log_bounds)
            total = float(logsumexp(bounds)) if bounds else -math.inf
            retries += 1
        return NestingPartition(children, np.array(bounds), total, retries), cand.column

    def nesting_partition(self, subset: PermutationSubset, rule: str = "adaptive"):
        """Build a nesting partition of ``subset`` under ``rule``."""
        return self._nest(subset, self.log_bound(subset), rule)[0]

    def _build(self, subset: PermutationSubset, rule: str, log_bound: float) -> _Node:
        child_rule = rule
        if rule == "once":
            cand = self._split(subset, "adaptive")
            if cand.log_ub_sum <= log_bound + NESTING_TOL:
                part = NestingPartition(cand.children, cand.child_log_bounds, cand.log_ub_sum, 0)
                column = cand.column
            else:
                self.stats.fallbacks += 1
                child_rule = "fixed"
                part, column = self._nest(subset, log_bound, "fixed")
                part.fallback = True
        else:
            part, column = self._nest(subset, log_bound, rule)
        # nesting at sampling time (checked unless running with -O)
        assert part.log_total_ub <= log_bound + 1e-12 or all(c.is_singleton for c in part.children)
        perms = [c.permutation() if c.is_singleton else None for c in part.children]
        raw = [float(b) for b in part.child_log_bounds]
        cum = None
        if self.cache is None:
            cum = np.cumsum(np.exp(np.array(raw) - log_bound)).tolist() if raw else []
        self.stats.nodes_built += 1
        if part.nesting_retries:
            self.stats.nodes_with_retries += 1
            log.info(
                "nesting needed %d extra refinements at depth %d",
                part.nesting_retries,
                self.n - subset.size,
            )
        return _Node(part.children, raw, perms, cum, part.nesting_retries, child_rule, column)

    def _node(self, subset: PermutationSubset, rule: str, log_bound: float) -> _Node:
        table = self._nodes[rule]
        node = table.get(subset.assignment)
        if node is None:
            node = self._build(subset, rule, log_bound)
            if len(table) < self.max_nodes:
                table[subset.assignment] = node
        return node

    # -- sampling -----------------------------------------------------------

    def trial(self, rng) -> tuple[tuple[int, ...] | None, float, int]:
        """Run one accept-or-reject attempt from the root.

        Returns ``(permutation or None, root log bound at trial start,
        nesting retries of the nodes visited)``.
        """
        uniform = _as_uniforms(rng)
        st = self.stats
        st.trials += 1
        subset = self.root
        rule = self._root_rule
        b_used = self.log_bound(subset)
        root_bound = b_used
        retries = 0
        path = []
        trace = log.isEnabledFor(logging.DEBUG)
        if subset.is_singleton:
            st.accepted += 1
            return subset.permutation(), root_bound, 0
        while True:
            node = self._node(subset, rule, b_used)
            st.node_visits += 1
            if node.retries:
                st.visits_with_retries += 1
                retries += node.retries
            if node.cum is not None:
                cum = node.cum
            else:
                bounds = [min(b, self.cache.get(c.assignment)) for b, c in zip(node.raw_bounds, node.children)]
                total = _lse(bounds)
                if total > b_used + NESTING_TOL:
                    # only reachable through a hook or a discarded memo; rebuild from scratch
                    self._nodes[rule].pop(subset.assignment, None)
                    node = self._build(subset, rule, b_used)
                    bounds = list(node.raw_bounds)
                    total = _lse(bounds)
                if self.tighten:
                    if self.tighten_policy == "visit":
                        self.cache.lower(subset.assignment, total)
                    path.append((subset, node, b_used, total))
                cum = list(itertools.accumulate(math.exp(b - b_used) for b in bounds))
            if trace:
                log.debug(
                    "depth=%d column=%d log_ub=%.6f log_children=%.6f",
                    self.n - subset.size,
                    node.column,
                    b_used,
                    math.log(cum[-1]) + b_used if cum and cum[-1] > 0 else -math.inf,
                )
            u = uniform()
            i = bisect.bisect_right(cum, u)
            if i >= len(cum):
                if self.tighten_policy == "reject":
                    self._subtract_slack(path)
                else:
                    self._propagate(path)
                return None, root_bound, retries
            perm = node.perms[i]
            if perm is not None:
                st.accepted += 1
                if self.tighten_policy == "visit":
                    self._propagate(path)
                return perm, root_bound, retries
            subset = node.children[i]
            b_used = node.raw_bounds[i] if node.cum is not None else bounds[i]
            rule = node.child_rule

    def _subtract_slack(self, path) -> None:
        if not path:
            return
        _, _, b_reject, total = path[-1]
        if total >= b_reject:
            return
        # log of the slack mass exp(b) - exp(total) at the rejecting subset
        log_slack = b_reject + math.log(-math.expm1(total - b_reject))
        for subset, _, b, _ in path:
            ratio = math.exp(log_slack - b)
            new = b + math.log1p(-ratio) if ratio < 1 else -math.inf
            self.cache.lower(subset.assignment, new)

    def _propagate(self, path) -> None:
        # children may have been tightened below; pass the savings up the path
        for subset, node, _, _ in reversed(path):
            bounds = [min(b, self.cache.get(c.assignment)) for b, c in zip(node.raw_bounds, node.children)]
            self.cache.lower(subset.assignment, _lse(bounds))

    def draw(self, rng, max_rejections: int | None = None) -> DrawResult:
        """Draw one exact sample, restarting from the root on every rejection."""
        uniform = _as_uniforms(rng)
        rejections = 0
        retries = 0
        while True:
            perm, root_bound, r = self.trial(uniform)
            retries += r
            if perm is not None:
                return DrawResult(perm, rejections, root_bound, retries)
            rejections += 1
            if max_rejections is not None and rejections > max_rejections:
                raise RejectionCapExceeded(f"more than {max_rejections} rejections")

    def draws(self, count: int, rng, max_rejections: int | None = None) -> list[DrawResult]:
        uniform = _as_uniforms(rng)
        return [self.draw(uniform, max_rejections) for _ in range(count)]

    def probe(self, trials: int, rng) -> ProbeResult:
        """Run ``trials`` single attempts, recording outcome and root bound."""
        if trials < 1:
            raise ValueError("trials must be at least 1")
        uniform = _as_uniforms(rng)
        outcomes = np.zeros(trials, dtype=bool)
        roots = np.empty(trials)
        for t in range(trials):
            perm, roots[t], _ = self.trial(uniform)
            outcomes[t] = perm is not None
        return ProbeResult(int(outcomes.sum()), trials, roots, outcomes)


# ---------------------------------------------------------------------------
# Functional interface


def refine(m, subset: PermutationSubset) -> list[PartitionCandidate]:
    """Every column split of ``subset``: one candidate per free column.

    Children are listed for every free row, including zero-weight ones whose
    bound is ``-inf``.
    """
    if subset.is_singleton:
        raise ValueError("singleton subsets are never refined")
    m = as_matrix(m)
    with np.errstate(divide="ignore"):
        logm = np.log(m)
    rows, cols = subset.free_rows, subset.free_cols
    ix = np.ix_(rows, cols)
    bounds = subset.log_prefix_weight + child_log_bounds(m[ix], logm[ix])
    out = []
    for ci, col in enumerate(cols):
        children = [subset.extend(col, row, float(logm[row, col])) for row in rows]
        cb = bounds[:, ci].copy()
        out.append(PartitionCandidate(col, children, cb, float(logsumexp(cb))))
    return out


def choose_refinement(m, subset: PermutationSubset) -> PartitionCandidate:
    """The candidate with the smallest summed bound; ties go to the lowest column."""
    cands = refine(m, subset)
    best = cands[0]
    for c in cands[1:]:
        if c.log_ub_sum < best.log_ub_sum:
            best = c
    return best


def build_nesting_partition(
    m, subset: PermutationSubset, bound_source: TighteningCache | None = None, rule: str = "adaptive"
) -> NestingPartition:
    """Partition ``subset`` so that the children's bounds sum to at most its own.

    ``bound_source`` optionally supplies tightened bounds. Zero-weight
    children are omitted from the result.
    """
    if subset.is_singleton:
        raise ValueError("singleton subsets are never refined")
    s = PermutationSampler(m, tighten=bound_source is not None, cache=bound_source)
    return s.nesting_partition(subset, rule)


def draw_adapart(m, rng, tighten: bool = False, max_rejections: int | None = None) -> DrawResult:
    return PermutationSampler(m, "adapart", tighten).draw(rng, max_rejections)


def draw_fixed_partition(m, rng, tighten: bool = False, max_rejections: int | None = None) -> DrawResult:
    return PermutationSampler(m, "fixed", tighten).draw(rng, max_rejections)


def draw_guaranteed(m, rng, tighten: bool = False, max_rejections: int | None = None) -> DrawResult:
    return PermutationSampler(m, "guaranteed", tighten).draw(rng, max_rejections)


def acceptance_rate_probe(m, trials: int, rng, tighten: bool = False, method: str = "adapart") -> ProbeResult:
    return PermutationSampler(m, method, tighten).probe(trials, rng)
