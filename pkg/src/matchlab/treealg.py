"""Proposal passing on preference trees, message-passing marginals, and f_d iterates.

A :class:`RootedPrefTree` places the root on the applicant side; nodes at odd
depth are firms.  Node labels may be any hashable values (ints or strings).
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Any, Hashable, Iterable, Mapping, Optional, Sequence

import numpy as np
from scipy.stats import binom

from matchlab.errors import ContractError, DomainError
from matchlab.graph import SpanningTree
from matchlab.matching import Prefs

Node = Hashable


# ---------------------------------------------------------------------------
# trees


@dataclass(frozen=True, eq=False)
class RootedPrefTree:
    root: Node
    parent: dict[Node, Optional[Node]]
    children: dict[Node, tuple[Node, ...]]
    prefs: dict[Node, tuple[Node, ...]]  # best first, over {parent} and children
    bfs_order: tuple[Node, ...] = field(init=False, repr=False)
    depth: dict[Node, int] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        if self.parent.get(self.root, None) is not None:
            raise ContractError("root must have no parent")
        order, depth = [self.root], {self.root: 0}
        queue = deque([self.root])
        while queue:
            v = queue.popleft()
            for c in self.children.get(v, ()):
                if c in depth:
                    raise ContractError(f"node {c!r} reached twice; not a tree")
                if self.parent.get(c) != v:
                    raise ContractError(f"parent of {c!r} disagrees with children lists")
                depth[c] = depth[v] + 1
                order.append(c)
                queue.append(c)
        if set(depth) != set(self.parent) | set(self.children) | {self.root}:
            raise ContractError("tree is not connected")
        for v in order:
            nbrs = list(self.children.get(v, ()))
            if self.parent.get(v) is not None:
                nbrs.append(self.parent[v])
            lst = self.prefs.get(v)
            if lst is None or len(lst) != len(nbrs) or set(lst) != set(nbrs):
                raise ContractError(f"preference list of {v!r} is not a permutation of its tree neighbors")
        object.__setattr__(self, "bfs_order", tuple(order))
        object.__setattr__(self, "depth", depth)

    @classmethod
    def from_edges(
        cls, root: Node, edges: Iterable[tuple[Node, Node]], prefs: Mapping[Node, Sequence[Node]]
    ) -> "RootedPrefTree":
        """Build from undirected edges; nodes of degree one may omit their preference list."""
        adj: dict[Node, list[Node]] = {root: []}
        for u, v in edges:
            adj.setdefault(u, []).append(v)
            adj.setdefault(v, []).append(u)
        parent: dict[Node, Optional[Node]] = {root: None}
        children: dict[Node, list[Node]] = {}
        queue = deque([root])
        while queue:
            v = queue.popleft()
            children[v] = []
            for u in adj[v]:
                if u == parent[v]:
                    continue
                if u in parent:
                    raise ContractError("edge list contains a cycle")
                parent[u] = v
                children[v].append(u)
                queue.append(u)
        if len(parent) != len(adj):
            raise ContractError("edge list is not connected")
        full = {v: tuple(prefs[v]) if v in prefs else tuple(adj[v]) if len(adj[v]) <= 1 else None for v in adj}
        missing = [v for v, p in full.items() if p is None]
        if missing:
            raise ContractError(f"missing preference lists for {missing}")
        return cls(root, parent, {v: tuple(c) for v, c in children.items()}, full)

    @classmethod
    def from_skeleton(cls, tree: SpanningTree, prefs: Mapping[Node, Sequence[Node]]) -> "RootedPrefTree":
        parent = {v: (None if p == -1 else p) for v, p in tree.parent.items()}
        return cls(tree.root, parent, dict(tree.children), {v: tuple(prefs[v]) for v in tree.depth})

    @classmethod
    def from_json(cls, obj: Mapping[str, Any]) -> "RootedPrefTree":
        try:
            return cls.from_edges(obj["root"], [tuple(e) for e in obj["edges"]], obj.get("prefs", {}))
        except KeyError as exc:
            raise ContractError(f"tree document missing field {exc}") from exc

    @property
    def nodes(self) -> tuple[Node, ...]:
        return self.bfs_order

    def __len__(self) -> int:
        return len(self.bfs_order)

    def is_applicant(self, v: Node) -> bool:
        return self.depth[v] % 2 == 0

    def neighbors(self, v: Node) -> tuple[Node, ...]:
        p = self.parent.get(v)
        return self.children.get(v, ()) + (() if p is None else (p,))

    def edges(self) -> list[tuple[Node, Node]]:
        """``(parent, child)`` pairs in BFS order."""
        return [(self.parent[v], v) for v in self.bfs_order[1:]]

    def to_prefs(self) -> tuple[Prefs, dict[Node, int]]:
        """Bipartite profile with applicants (even depth) first, each side in BFS order."""
        apps = [v for v in self.bfs_order if self.is_applicant(v)]
        firms = [v for v in self.bfs_order if not self.is_applicant(v)]
        ids = {v: i for i, v in enumerate(apps + firms)}
        order = [tuple(ids[u] for u in self.prefs[v]) for v in apps + firms]
        return Prefs(len(apps), tuple(order)), ids


@dataclass(frozen=True)
class ProposalTrace:
    proposes: dict[Node, bool]  # X_{i,P(i)}; False for the root
    received: dict[Node, tuple[Node, ...]]  # children that proposed to i
    matching: dict[Node, Optional[Node]]

    def pairs(self) -> set[frozenset]:
        return {frozenset((u, v)) for u, v in self.matching.items() if v is not None}


def proposal_passing(tree: RootedPrefTree) -> ProposalTrace:
    """Two-phase proposal passing; the result is the unique stable matching on the tree.

    Bottom-up, node i proposes to its parent iff it ranks the parent above every
    child that proposed to it.  Top-down, a node not taken by its parent accepts
    its favorite proposal, if any.
    """
    proposes: dict[Node, bool] = {}
    received: dict[Node, tuple[Node, ...]] = {}
    for v in reversed(tree.bfs_order):
        got = tuple(c for c in tree.children.get(v, ()) if proposes[c])
        received[v] = got
        p = tree.parent.get(v)
        if p is None:
            proposes[v] = False
            continue
        rank = {u: r for r, u in enumerate(tree.prefs[v])}
        proposes[v] = all(rank[p] < rank[c] for c in got)
    matching: dict[Node, Optional[Node]] = {v: None for v in tree.bfs_order}
    for v in tree.bfs_order:
        if matching[v] is not None or not received[v]:
            continue
        rank = {u: r for r, u in enumerate(tree.prefs[v])}
        best = min(received[v], key=rank.__getitem__)
        matching[v] = best
        matching[best] = v
    return ProposalTrace(proposes, received, matching)


def random_tree_shape(n_nodes: int, rng: np.random.Generator) -> dict[int, tuple[int, ...]]:
    """Random recursive tree on ``0..n_nodes-1`` rooted at 0; returns children lists."""
    children: dict[int, list[int]] = {v: [] for v in range(n_nodes)}
    for v in range(1, n_nodes):
        children[int(rng.integers(v))].append(v)
    return {v: tuple(c) for v, c in children.items()}


def random_pref_tree(n_nodes: int, rng: np.random.Generator) -> RootedPrefTree:
    """Random recursive tree with uniformly random strict preferences."""
    children = random_tree_shape(n_nodes, rng)
    parent: dict[Node, Optional[Node]] = {0: None}
    for v, cs in children.items():
        for c in cs:
            parent[c] = v
    prefs = {}
    for v in range(n_nodes):
        nbrs = list(children[v]) + ([] if parent[v] is None else [parent[v]])
        prefs[v] = tuple(int(x) for x in rng.permutation(nbrs)) if nbrs else ()
    return RootedPrefTree(0, parent, children, prefs)


# ---------------------------------------------------------------------------
# f_d and iterates


def f_d(d: float, p):
    """``(1 - (1-p)^(d+1)) / ((d+1) p)``, equal to E[1 / (1 + Binom(d, p))]; f_d(0) = 1."""
    if d < 0:
        raise DomainError("d must be non-negative")
    p_arr = np.asarray(p, dtype=float)
    if np.any((p_arr < 0) | (p_arr > 1)):
        raise DomainError("p must lie in [0, 1]")
    k = d + 1.0
    with np.errstate(divide="ignore", invalid="ignore"):
        mid = -np.expm1(k * np.log1p(-p_arr)) / (k * p_arr)
    out = np.where(p_arr == 0, 1.0, np.where(p_arr == 1, 1.0 / k, mid))
    return float(out) if out.ndim == 0 else out


def binomial_inverse_mean(d: int, p: float) -> float:
    """Direct sum of P[Binom(d, p) = k] / (1 + k)."""
    ks = np.arange(d + 1)
    return float(np.sum(binom.pmf(ks, d, p) / (1 + ks)))


def iterate_f(d: float, m: int, x0: float = 1.0) -> float:
    """``f_d`` applied m times to x0."""
    x = x0
    for _ in range(m):
        x = f_d(d, x)
    return x


def iterate_composition(a: float, b: float, m: int, x0: float = 1.0) -> float:
    """``(f_a . f_b)^m (x0)``."""
    if m < 0:
        raise DomainError("m must be non-negative")
    x = x0
    for _ in range(m):
        x = f_d(a, f_d(b, x))
    return x


@dataclass(frozen=True)
class FixedPointResult:
    a: float
    b: float
    x_star: float
    regime: str  # "F1", "F2", "F3" or "numeric-only"
    asymptotic_x_star: Optional[float] = None
    gamma_epsilon: Optional[float] = None  # regime closed form
    gamma_epsilon_exact: Optional[float] = None  # f_a(f_b((1+eps) x*)) / ((1+eps) x*)
    epsilon: Optional[float] = None

    @property
    def c(self) -> float:
        return (self.a + 1) / (self.b + 1)

    @property
    def relative_gap(self) -> Optional[float]:
        if self.asymptotic_x_star is None:
            return None
        return abs(self.asymptotic_x_star - self.x_star) / self.x_star

    def iterations_needed(self, exact: bool = True) -> Optional[int]:
        """Smallest m with m >= log(eps x*) / log(Gamma_eps)."""
        gamma = self.gamma_epsilon_exact if exact else self.gamma_epsilon
        if gamma is None or self.epsilon is None or not 0 < gamma < 1:
            return None
        return max(0, math.ceil(math.log(self.epsilon * self.x_star) / math.log(gamma)))


def composition_residual(a: float, b: float, x: float) -> float:
    return f_d(a, f_d(b, x)) - x


def composition_sign(a: float, b: float, x: float) -> float:
    """A quantity with the sign of ``f_a(f_b(x)) - x``, accurate when that difference underflows.

    With ``u = (1-x)^(b+1)`` and ``w = (1-f_b(x))^(a+1)``, the residual has the
    sign of ``(b+1)(1-w) - (a+1)(1-u)``.  For a close to b the direct residual
    falls below double precision, while u and w keep full relative precision.
    """
    big_a, big_b = a + 1.0, b + 1.0
    u = math.exp(big_b * math.log1p(-x)) if x < 1 else 0.0
    y = f_d(b, x)
    w = math.exp(big_a * math.log1p(-y)) if y < 1 else 0.0
    return (big_b - big_a) + big_a * u - big_b * w


def count_sign_changes(a: float, b: float, grid: int = 2001) -> int:
    """Sign changes of ``f_a(f_b(x)) - x`` on a grid in (0, 1] dense near both ends."""
    near_zero = np.logspace(-12, 0, grid)
    xs = np.unique(np.concatenate([near_zero, 1.0 - near_zero[:-1], np.linspace(0, 1, grid)[1:]]))
    vals = np.array([composition_sign(a, b, x) for x in xs])
    signs = np.sign(vals)
    signs = signs[signs != 0]
    return int(np.count_nonzero(signs[1:] != signs[:-1]))


def _regime(a: float, b: float) -> str:
    lhs, rhs = a + 1, b + 1
    if lhs < rhs:
        return "F1"
    if lhs == rhs:
        return "F2"
    return "F3"


def fixed_point(a: float, b: float, epsilon: Optional[float] = None, tol: float = 1e-12) -> FixedPointResult:
    """Unique root of ``f_a(f_b(x)) = x`` on (0, 1) by bisection, plus regime asymptotics."""
    if a < 1 or b < 1:
        raise DomainError("a and b must be >= 1")
    lo, hi = 0.0, 1.0  # residual is positive near 0 and negative at 1
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if composition_sign(a, b, mid) > 0:
            lo = mid
        else:
            hi = mid
    x = 0.5 * (lo + hi)
    regime = _regime(a, b)
    c = (a + 1) / (b + 1)
    if regime == "F1":
        approx = -c / math.log1p(-c)
    elif regime == "F2":
        approx = 1 / math.sqrt(b + 1)
    else:
        approx = -math.log1p(-1 / c) / (b + 1)
    gamma = gamma_exact = None
    if epsilon is not None:
        if epsilon <= 0:
            raise DomainError("epsilon must be positive")
        gamma = _regime_gamma(regime, b, c, epsilon)
        y = (1 + epsilon) * x
        gamma_exact = f_d(a, f_d(b, min(y, 1.0))) / y
    return FixedPointResult(a, b, x, regime, approx, gamma, gamma_exact, epsilon)


def _regime_gamma(regime: str, b: float, c: float, eps: float) -> float:
    if regime == "F1":
        return (1 - (1 - c) ** (1 / (1 + eps / 2))) / c
    if regime == "F2":
        s = math.sqrt(b + 1)
        return -math.expm1(-s / (1 + eps / 2)) / -math.expm1(-(1 + eps) * s)
    return 1 / (1 + eps * (1 - 1 / c))


def monotone_envelope(
    m: int, odd_bounds: tuple[float, float], even_bounds: tuple[float, float] = (0.0, 0.0)
) -> tuple[float, float]:
    """Bounds on the root-edge proposal probability when out-degrees at odd/even depth lie in the given ranges.

    ``odd_bounds`` and ``even_bounds`` are ``(low, high)`` out-degree bounds.
    Larger out-degree means smaller f, so the lower envelope uses high degrees
    at odd depth and low degrees at even depth, and vice versa.
    """
    if m < 1:
        raise DomainError("m must be >= 1")
    (lo_odd, hi_odd), (lo_even, hi_even) = odd_bounds, even_bounds
    if lo_odd > hi_odd or lo_even > hi_even:
        raise DomainError("bounds must satisfy low <= high")

    def envelope(d_odd: float, d_even: float) -> float:
        if m % 2 == 0:
            x = iterate_composition(d_even, d_odd, m // 2 - 1)
            return f_d(d_odd, x)
        return iterate_composition(d_odd, d_even, (m - 1) // 2)

    return envelope(hi_odd, lo_even), envelope(lo_odd, hi_even)


# ---------------------------------------------------------------------------
# message passing


def _children_of(shape) -> tuple[Node, Mapping[Node, Sequence[Node]]]:
    if isinstance(shape, (RootedPrefTree, SpanningTree)):
        return shape.root, shape.children
    root, children = shape
    return root, children


def _postorder(root: Node, children: Mapping[Node, Sequence[Node]]) -> list[Node]:
    order, stack = [], [root]
    while stack:
        v = stack.pop()
        order.append(v)
        stack.extend(children.get(v, ()))
    return order[::-1]


def inverse_one_plus_sum(probs: Sequence[float]) -> float:
    """E[1 / (1 + S)] for S a sum of independent Bernoulli(probs)."""
    pmf = np.array([1.0])
    for q in probs:
        pmf = np.append(pmf * (1 - q), 0.0) + np.append(0.0, pmf * q)
    return float(np.sum(pmf / (1 + np.arange(pmf.size))))


def marginal_proposal_probabilities(shape, fixed: Mapping[Node, float] | None = None) -> dict[Node, float]:
    """Probability that each non-root node proposes to its parent under uniform random preferences.

    ``shape`` is a tree (or ``(root, children)`` pair).  Leaves propose surely
    unless ``fixed`` pins a node's probability, which also cuts off its subtree.
    """
    root, children = _children_of(shape)
    fixed = fixed or {}
    mu: dict[Node, float] = {}
    for v in _postorder(root, children):
        if v in fixed:
            mu[v] = float(fixed[v])
        else:
            mu[v] = inverse_one_plus_sum([mu[c] for c in children.get(v, ())])
    mu.pop(root)
    return mu


def simulate_proposal_frequencies(shape, n_draws: int, rng: np.random.Generator) -> dict[Node, float]:
    """Monte Carlo frequency of each non-root node proposing to its parent.

    Each node ranks its neighbors uniformly at random; i proposes iff its parent
    outranks every proposing child.
    """
    root, children = _children_of(shape)
    proposes: dict[Node, np.ndarray] = {}
    freq = {}
    for v in _postorder(root, children):
        if v == root:
            continue
        key_parent = rng.random(n_draws)
        best_child = np.zeros(n_draws)
        for c in children.get(v, ()):
            key_c = rng.random(n_draws)
            best_child = np.maximum(best_child, np.where(proposes[c], key_c, 0.0))
        proposes[v] = key_parent > best_child
        freq[v] = float(proposes[v].mean())
    return freq


def regular_tree_shape(d: int, m: int) -> tuple[int, dict[int, tuple[int, ...]]]:
    """Root with d children; every other internal node has d-1 children; leaves at depth m."""
    children: dict[int, tuple[int, ...]] = {}
    next_id = 1
    level = [0]
    for depth in range(m):
        nxt = []
        for v in level:
            k = d if depth == 0 else d - 1
            children[v] = tuple(range(next_id, next_id + k))
            next_id += k
            nxt.extend(children[v])
        level = nxt
    for v in level:
        children[v] = ()
    return 0, children
