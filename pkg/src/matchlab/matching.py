"""Deferred acceptance, stability checks, availability and interim blocking analysis.

Most routines have two layers: a profile-level function working on a
:class:`Prefs` object (strict preference lists over global vertex ids), and a
market-level wrapper that derives the profile from post-interview utilities.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from typing import Iterable, Literal, NamedTuple, Optional, Sequence

import numpy as np

from matchlab.errors import ContractError, DomainError, UnstableMatchingError
from matchlab.graph import InterviewGraph
from matchlab.market import MarketInstance

ProposingSide = Literal["applicant", "firm"]
UNMATCHED = -1


@dataclass(frozen=True, eq=False)
class Prefs:
    """Strict preference lists, best first, over global vertex ids."""

    n_applicants: int
    order: tuple[tuple[int, ...], ...]
    rank: tuple[dict[int, int], ...] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        ranks = tuple({u: r for r, u in enumerate(lst)} for lst in self.order)
        object.__setattr__(self, "rank", ranks)

    @property
    def n_vertices(self) -> int:
        return len(self.order)

    @property
    def n_firms(self) -> int:
        return self.n_vertices - self.n_applicants

    def is_applicant(self, v: int) -> bool:
        return v < self.n_applicants

    def prefers(self, v: int, x: int, y: int) -> bool:
        """Whether v strictly prefers x to y (``UNMATCHED`` is worst)."""
        if x == UNMATCHED:
            return False
        if y == UNMATCHED:
            return True
        return self.rank[v][x] < self.rank[v][y]

    def restrict(self, vertices: Iterable[int]) -> "Prefs":
        """Drop every vertex outside ``vertices`` from all lists (dropped vertices get empty lists)."""
        keep = set(vertices)
        return Prefs(
            self.n_applicants,
            tuple(tuple(u for u in lst if u in keep) if v in keep else () for v, lst in enumerate(self.order)),
        )

    def edges(self) -> list[tuple[int, int]]:
        """Global ``(applicant, firm)`` pairs that appear in the profile."""
        return [(a, j) for a in range(self.n_applicants) for j in self.order[a]]


@dataclass(frozen=True)
class EdgeUtilities:
    """Post-interview utilities on the edges of a graph (all arrays aligned)."""

    a: np.ndarray
    j: np.ndarray
    applicant: np.ndarray  # U^A_{a,j}
    firm: np.ndarray  # U^A_{j,a}
    jitter_applicant: np.ndarray
    jitter_firm: np.ndarray


def edge_utilities(inst: MarketInstance, graph: InterviewGraph) -> EdgeUtilities:
    _check_compatible(inst, graph)
    edges = np.array(graph.edges, dtype=np.int64).reshape(-1, 2)
    a, j = edges[:, 0], edges[:, 1]
    return EdgeUtilities(
        a=a,
        j=j,
        applicant=inst.pre_utility_app[a, j] + np.asarray(inst.post_score_app(a, j), dtype=float),
        firm=inst.pre_utility_firm[a, j] + np.asarray(inst.post_score_firm(a, j), dtype=float),
        jitter_applicant=inst.jitter_app(a, j),
        jitter_firm=inst.jitter_firm(a, j),
    )


def _grouped_orders(owner: np.ndarray, other: np.ndarray, util: np.ndarray, jit: np.ndarray, n_owner: int):
    idx = np.lexsort((jit, -util, owner))
    lists: list[list[int]] = [[] for _ in range(n_owner)]
    for o, t in zip(owner[idx].tolist(), other[idx].tolist()):
        lists[o].append(t)
    return lists


def preferences(inst: MarketInstance, graph: InterviewGraph, eu: EdgeUtilities | None = None) -> Prefs:
    """Post-interview preferences over graph neighbors; equal utilities are ordered by jitter."""
    eu = eu if eu is not None else edge_utilities(inst, graph)
    n_a = inst.n_applicants
    app = _grouped_orders(eu.a, eu.j + n_a, eu.applicant, eu.jitter_applicant, n_a)
    firm = _grouped_orders(eu.j, eu.a, eu.firm, eu.jitter_firm, inst.n_firms)
    return Prefs(n_a, tuple(tuple(x) for x in app + firm))


def _check_compatible(inst: MarketInstance, graph: InterviewGraph) -> None:
    if graph.n_applicants != inst.n_applicants or graph.n_firms != inst.n_firms:
        raise DomainError("graph and market have different agent sets")


# ---------------------------------------------------------------------------
# matchings


@dataclass(frozen=True)
class Matching:
    """Partner per global vertex (``UNMATCHED`` for none) plus the side that proposed."""

    n_applicants: int
    partner: tuple[int, ...]
    proposing_side: Optional[ProposingSide] = None

    def __post_init__(self) -> None:
        for v, u in enumerate(self.partner):
            if u != UNMATCHED and self.partner[u] != v:
                raise ContractError(f"inconsistent matching at vertex {v}")

    @classmethod
    def from_pairs(
        cls, n_applicants: int, n_firms: int, pairs: Iterable[tuple[int, int]], proposing_side=None
    ) -> "Matching":
        """From local ``(a, j)`` pairs."""
        partner = [UNMATCHED] * (n_applicants + n_firms)
        for a, j in pairs:
            if partner[a] != UNMATCHED or partner[n_applicants + j] != UNMATCHED:
                raise ContractError(f"agent matched twice in pair ({a}, {j})")
            partner[a] = n_applicants + j
            partner[n_applicants + j] = a
        return cls(n_applicants, tuple(partner), proposing_side)

    @property
    def n_firms(self) -> int:
        return len(self.partner) - self.n_applicants

    def applicant_partner(self, a: int) -> Optional[int]:
        """Local firm index matched to applicant ``a``, or None."""
        p = self.partner[a]
        return None if p == UNMATCHED else p - self.n_applicants

    def firm_partner(self, j: int) -> Optional[int]:
        p = self.partner[self.n_applicants + j]
        return None if p == UNMATCHED else p

    def pairs(self) -> list[tuple[int, int]]:
        """Local ``(a, j)`` pairs, ascending."""
        return [(a, p - self.n_applicants) for a, p in enumerate(self.partner[: self.n_applicants]) if p != UNMATCHED]

    def matched_vertices(self) -> frozenset[int]:
        return frozenset(v for v, p in enumerate(self.partner) if p != UNMATCHED)

    def unmatched_applicants(self) -> int:
        return sum(p == UNMATCHED for p in self.partner[: self.n_applicants])

    def unmatched_firms(self) -> int:
        return sum(p == UNMATCHED for p in self.partner[self.n_applicants :])


def da_on_prefs(prefs: Prefs, proposing_side: ProposingSide = "applicant", order: str = "lowest") -> tuple[int, ...]:
    """Deferred acceptance on a profile; returns partner per vertex.

    ``order`` picks which free proposer moves next (lowest or highest id); the
    outcome does not depend on it.
    """
    n_a = prefs.n_applicants
    proposers = range(n_a) if proposing_side == "applicant" else range(n_a, prefs.n_vertices)
    sign = 1 if order == "lowest" else -1
    partner = [UNMATCHED] * prefs.n_vertices
    nxt = [0] * prefs.n_vertices
    heap = [sign * v for v in proposers if prefs.order[v]]
    heapq.heapify(heap)
    while heap:
        v = sign * heapq.heappop(heap)
        lst = prefs.order[v]
        while nxt[v] < len(lst):
            r = lst[nxt[v]]
            nxt[v] += 1
            cur = partner[r]
            if cur == UNMATCHED or prefs.rank[r][v] < prefs.rank[r][cur]:
                partner[r] = v
                partner[v] = r
                if cur != UNMATCHED:
                    partner[cur] = UNMATCHED
                    if nxt[cur] < len(prefs.order[cur]):
                        heapq.heappush(heap, sign * cur)
                break
    return tuple(partner)


def deferred_acceptance(
    inst: MarketInstance,
    graph: InterviewGraph,
    proposing_side: ProposingSide = "applicant",
    prefs: Prefs | None = None,
) -> Matching:
    """Proposing-side-optimal stable matching on ``graph`` under post-interview preferences."""
    if proposing_side not in ("applicant", "firm"):
        raise DomainError(f"proposing_side must be 'applicant' or 'firm', got {proposing_side!r}")
    prefs = prefs if prefs is not None else preferences(inst, graph)
    return Matching(inst.n_applicants, da_on_prefs(prefs, proposing_side), proposing_side)


def blocking_edges_on_prefs(prefs: Prefs, partner: Sequence[int]) -> list[tuple[int, int]]:
    """Global ``(a, j)`` profile edges whose endpoints both strictly prefer each other."""
    out = []
    for a in range(prefs.n_applicants):
        pa = partner[a]
        for j in prefs.order[a]:
            if j == pa:
                break  # later entries are worse than a's partner
            if prefs.prefers(j, a, partner[j]):
                out.append((a, j))
    return out


def verify_stable(
    inst: MarketInstance, graph: InterviewGraph, matching: Matching, prefs: Prefs | None = None
) -> list[tuple[int, int]]:
    """Blocking edges of ``matching`` on ``graph``, as local ``(a, j)`` pairs; empty iff stable."""
    _check_compatible(inst, graph)
    if matching.n_applicants != inst.n_applicants or matching.n_firms != inst.n_firms:
        raise ContractError("matching and market have different agent sets")
    for a, j in matching.pairs():
        if not graph.has_edge(a, j):
            raise ContractError(f"matched pair ({a}, {j}) is not an edge of the graph")
    prefs = prefs if prefs is not None else preferences(inst, graph)
    n_a = inst.n_applicants
    return [(a, j - n_a) for a, j in blocking_edges_on_prefs(prefs, matching.partner)]


# ---------------------------------------------------------------------------
# interim blocking


class BlockingPair(NamedTuple):
    a: int
    j: int
    applicant_gain: float
    firm_gain: float
    interviewed: bool


@dataclass(frozen=True)
class BlockingReport:
    pairs: list[BlockingPair]
    applicants_blocked: int
    firms_blocked: int

    @property
    def n_pairs(self) -> int:
        return len(self.pairs)


def interim_utility_tables(inst: MarketInstance, graph: InterviewGraph, eu: EdgeUtilities | None = None):
    """Full ``[a, j]`` tables of interim utilities for both directions."""
    eu = eu if eu is not None else edge_utilities(inst, graph)
    ua = np.array(inst.pre_utility_app)
    uf = np.array(inst.pre_utility_firm)
    ua[eu.a, eu.j] = eu.applicant
    uf[eu.a, eu.j] = eu.firm
    return ua, uf


def interim_blocking_report(
    inst: MarketInstance,
    graph: InterviewGraph,
    matching: Matching,
    include_unmatched_pairs: bool = True,
    exclude: Iterable[int] = (),
) -> BlockingReport:
    """Every applicant-firm pair that strictly prefers each other under interim utilities.

    ``matching`` must be stable on ``graph``.  Unmatched agents hold utility
    ``-inf``.  Vertices in ``exclude`` are left out of the scan.  With
    ``include_unmatched_pairs=False`` pairs of two unmatched agents are skipped.
    """
    eu = edge_utilities(inst, graph)
    prefs = preferences(inst, graph, eu)
    blocking = verify_stable(inst, graph, matching, prefs)
    if blocking:
        raise UnstableMatchingError(f"matching has {len(blocking)} blocking edge(s) on the graph", blocking)
    n_a, n_j = inst.n_applicants, inst.n_firms
    ua, uf = interim_utility_tables(inst, graph, eu)
    own_a = np.full(n_a, -np.inf)
    own_f = np.full(n_j, -np.inf)
    for a, j in matching.pairs():
        own_a[a] = ua[a, j]
        own_f[j] = uf[a, j]
    block = (ua > own_a[:, None]) & (uf > own_f[None, :])
    if not include_unmatched_pairs:
        block &= ~(np.isinf(own_a)[:, None] & np.isinf(own_f)[None, :])
    for v in exclude:
        if v < n_a:
            block[v, :] = False
        else:
            block[:, v - n_a] = False
    rows, cols = np.nonzero(block)
    gains_a = ua[rows, cols] - own_a[rows]
    gains_f = uf[rows, cols] - own_f[cols]
    pairs = [
        BlockingPair(int(a), int(j), float(ga), float(gf), graph.has_edge(int(a), int(j)))
        for a, j, ga, gf in zip(rows, cols, gains_a, gains_f)
    ]
    return BlockingReport(pairs, int(np.unique(rows).size), int(np.unique(cols).size))


def is_perfect_interim_stable(report: BlockingReport) -> bool:
    return not report.pairs


# ---------------------------------------------------------------------------
# availability


def available_on_prefs(prefs: Prefs, candidate: int, beneficiary: int, optimal: Sequence[int] | None = None) -> bool:
    """Whether ``candidate`` weakly prefers ``beneficiary`` to its best stable partner.

    ``optimal`` may pass a precomputed candidate-side-proposing DA outcome.
    """
    if beneficiary not in prefs.rank[candidate]:
        raise DomainError(f"vertices {candidate} and {beneficiary} are not neighbors")
    if optimal is None:
        side = "applicant" if prefs.is_applicant(candidate) else "firm"
        optimal = da_on_prefs(prefs, side)
    best = optimal[candidate]
    return best == beneficiary or not prefs.prefers(candidate, best, beneficiary)


def available(inst: MarketInstance, graph: InterviewGraph, candidate: int, beneficiary: int) -> bool:
    """Whether ``beneficiary`` weakly beats ``candidate``'s partner in every stable matching.

    Both arguments are global vertex ids and must be neighbors in ``graph``.
    """
    _check_compatible(inst, graph)
    if not graph.has_vertex_edge(candidate, beneficiary):
        raise DomainError(f"vertices {candidate} and {beneficiary} are not neighbors")
    return available_on_prefs(preferences(inst, graph), candidate, beneficiary)


@dataclass(frozen=True)
class WitnessResult:
    witness: tuple[int, ...]  # applicant indices
    verified: bool


def almost_stable_witness(inst: MarketInstance, graph: InterviewGraph) -> WitnessResult:
    """Applicants with no available neighbor among those they rate non-negatively after interview.

    ``verified`` is True iff applicant-proposing DA on the graph without the
    witness applicants leaves no interim blocking pair among the remaining agents.
    """
    eu = edge_utilities(inst, graph)
    prefs = preferences(inst, graph, eu)
    firm_opt = da_on_prefs(prefs, "firm")
    n_a = inst.n_applicants
    nonneg = np.asarray(inst.post_score_app(eu.a, eu.j)) >= 0
    has_available = np.zeros(n_a, dtype=bool)
    for a, j, ok in zip(eu.a.tolist(), eu.j.tolist(), nonneg.tolist()):
        if ok and not has_available[a] and available_on_prefs(prefs, n_a + j, a, firm_opt):
            has_available[a] = True
    witness = tuple(int(a) for a in np.flatnonzero(~has_available))
    keep = set(range(inst.n_agents)) - set(witness)
    sub = graph.restrict(keep)
    sub_matching = deferred_acceptance(inst, sub, "applicant")
    report = interim_blocking_report(inst, sub, sub_matching, exclude=witness)
    return WitnessResult(witness, is_perfect_interim_stable(report))


# ---------------------------------------------------------------------------
# ranks


def side_rank(
    inst: MarketInstance, graph: InterviewGraph, matching: Matching, agent: int, prefs: Prefs | None = None
) -> Optional[int]:
    """1-based rank of ``agent``'s partner among its neighbors; None when unmatched."""
    prefs = prefs if prefs is not None else preferences(inst, graph)
    p = matching.partner[agent]
    if p == UNMATCHED:
        return None
    return prefs.rank[agent][p] + 1


def mean_applicant_rank(prefs: Prefs, matching: Matching) -> float:
    """Mean partner rank over matched applicants (NaN if nobody is matched)."""
    ranks = [prefs.rank[a][p] + 1 for a, p in enumerate(matching.partner[: prefs.n_applicants]) if p != UNMATCHED]
    return float(np.mean(ranks)) if ranks else float("nan")
