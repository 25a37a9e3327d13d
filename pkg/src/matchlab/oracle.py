"""Brute-force ground truth for small instances, and the batteries that compare fast paths against it."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from matchlab.errors import ContractError, DomainError, SizeGuardError
from matchlab.graph import InterviewGraph, truncate_m_hop
from matchlab.market import MarketInstance, instance_from_tables
from matchlab.matching import (
    UNMATCHED,
    Prefs,
    available_on_prefs,
    blocking_edges_on_prefs,
    da_on_prefs,
    preferences,
)
from matchlab.treealg import proposal_passing, random_pref_tree

DEFAULT_MAX_AGENTS = 12


@dataclass(frozen=True)
class StableSet:
    prefs: Prefs
    matchings: tuple[tuple[int, ...], ...]  # partner per global vertex

    def __len__(self) -> int:
        return len(self.matchings)

    def _extreme(self, side: str) -> Optional[int]:
        verts = range(self.prefs.n_applicants) if side == "applicant" else range(self.prefs.n_applicants, self.prefs.n_vertices)
        for idx, m in enumerate(self.matchings):
            if all(not self.prefs.prefers(v, other[v], m[v]) for other in self.matchings for v in verts):
                return idx
        return None

    @property
    def applicant_optimal(self) -> Optional[int]:
        """Index of the member every applicant weakly prefers to all others."""
        return self._extreme("applicant")

    @property
    def firm_optimal(self) -> Optional[int]:
        return self._extreme("firm")

    @property
    def rural_hospital_consistent(self) -> bool:
        return len({frozenset(v for v, p in enumerate(m) if p != UNMATCHED) for m in self.matchings}) <= 1


def enumerate_on_prefs(prefs: Prefs, max_agents: int = DEFAULT_MAX_AGENTS) -> StableSet:
    """All stable matchings of a profile by recursion over applicants with blocking-edge pruning.

    The size guard counts agents with at least one neighbor; isolated agents are
    unmatched in every matching and cost nothing.
    """
    active = sum(1 for lst in prefs.order if lst)
    if active > max_agents:
        raise SizeGuardError(f"{active} agents exceeds the enumeration guard of {max_agents}")
    n_a = prefs.n_applicants
    partner = [UNMATCHED] * prefs.n_vertices
    found: list[tuple[int, ...]] = []

    def blocked_by_earlier(a: int) -> bool:
        # a firm that a prefers to its current choice and that is held by an earlier applicant it likes less
        for j in prefs.order[a]:
            if j == partner[a]:
                return False
            holder = partner[j]
            if holder != UNMATCHED and prefs.prefers(j, a, holder):
                return True
        return False  # a is unmatched and no earlier holder is beaten

    def recurse(a: int) -> None:
        if a == n_a:
            if not blocking_edges_on_prefs(prefs, partner):
                found.append(tuple(partner))
            return
        for j in (*prefs.order[a], UNMATCHED):
            if j != UNMATCHED and partner[j] != UNMATCHED:
                continue
            partner[a] = j
            if j != UNMATCHED:
                partner[j] = a
            if not blocked_by_earlier(a):
                recurse(a + 1)
            partner[a] = UNMATCHED
            if j != UNMATCHED:
                partner[j] = UNMATCHED

    recurse(0)
    return StableSet(prefs, tuple(found))


def enumerate_stable_matchings(
    inst: MarketInstance, graph: InterviewGraph, max_agents: int = DEFAULT_MAX_AGENTS
) -> StableSet:
    return enumerate_on_prefs(preferences(inst, graph), max_agents)


def available_bruteforce_on_prefs(stable: StableSet, candidate: int, beneficiary: int) -> bool:
    """Literal definition: candidate weakly prefers beneficiary to its partner in every stable matching."""
    if beneficiary not in stable.prefs.rank[candidate]:
        raise DomainError(f"vertices {candidate} and {beneficiary} are not neighbors")
    return all(
        m[candidate] == beneficiary or not stable.prefs.prefers(candidate, m[candidate], beneficiary)
        for m in stable.matchings
    )


def available_bruteforce(
    inst: MarketInstance,
    graph: InterviewGraph,
    candidate: int,
    beneficiary: int,
    max_agents: int = DEFAULT_MAX_AGENTS,
) -> bool:
    if not graph.has_vertex_edge(candidate, beneficiary):
        raise DomainError(f"vertices {candidate} and {beneficiary} are not neighbors")
    return available_bruteforce_on_prefs(enumerate_stable_matchings(inst, graph, max_agents), candidate, beneficiary)


def rural_hospital_check(stable: StableSet) -> bool:
    """Whether every member matches the same agent set; unstable members raise ContractError."""
    for m in stable.matchings:
        if blocking_edges_on_prefs(stable.prefs, m):
            raise ContractError("stable set contains a matching with a blocking edge")
    return stable.rural_hospital_consistent


# ---------------------------------------------------------------------------
# batteries


@dataclass
class BatteryResult:
    name: str
    instances: int = 0
    checks: int = 0
    failures: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures

    def fail(self, msg: str) -> None:
        self.failures.append(msg)

    def summary(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{self.name}: {status} ({self.instances} instances, {self.checks} checks, {len(self.failures)} failures)"


def random_battery_instance(
    rng: np.random.Generator, max_per_side: int = 5, min_per_side: int = 1
) -> tuple[MarketInstance, InterviewGraph]:
    """Random small market with explicit normal score tables on a random bipartite graph."""
    n_a = int(rng.integers(min_per_side, max_per_side + 1))
    n_j = int(rng.integers(min_per_side, max_per_side + 1))
    tables = [rng.normal(size=(n_a, n_j)) for _ in range(4)]
    inst = instance_from_tables(*tables)
    density = rng.uniform(0.2, 1.0)
    mask = rng.random((n_a, n_j)) < density
    graph = InterviewGraph.from_edges(n_a, n_j, map(tuple, np.argwhere(mask)))
    return inst, graph


def check_profile(prefs: Prefs, result: BatteryResult, label: str, max_agents: int = DEFAULT_MAX_AGENTS) -> StableSet:
    """Compare both DA orientations and fast availability with full enumeration of one profile."""
    stable = enumerate_on_prefs(prefs, max_agents)
    da_app = da_on_prefs(prefs, "applicant")
    da_firm = da_on_prefs(prefs, "firm")
    result.checks += 1
    for side, da in (("applicant", da_app), ("firm", da_firm)):
        if blocking_edges_on_prefs(prefs, da):
            result.fail(f"{label}: {side}-proposing DA is unstable")
        if da not in stable.matchings:
            result.fail(f"{label}: {side}-proposing DA missing from the enumerated stable set")
    n_a = prefs.n_applicants
    for m in stable.matchings:
        for a in range(n_a):
            if prefs.prefers(a, m[a], da_app[a]):
                result.fail(f"{label}: applicant {a} does better than applicant-proposing DA")
        for j in range(n_a, prefs.n_vertices):
            if prefs.prefers(j, m[j], da_firm[j]):
                result.fail(f"{label}: firm {j} does better than firm-proposing DA")
    if not rural_hospital_check(stable):
        result.fail(f"{label}: matched sets differ across stable matchings")
    for a, j in prefs.edges():
        for cand, ben, opt in ((a, j, da_app), (j, a, da_firm)):
            result.checks += 1
            if available_on_prefs(prefs, cand, ben, opt) != available_bruteforce_on_prefs(stable, cand, ben):
                result.fail(f"{label}: availability of {ben} to {cand} disagrees with brute force")
    return stable


def cross_check_battery(n_instances: int = 500, max_per_side: int = 5, seed: int = 1) -> BatteryResult:
    """DA stability, side-optimality, Rural Hospital and availability against enumeration."""
    result = BatteryResult("oracle cross-check")
    rng = np.random.default_rng(seed)
    for k in range(n_instances):
        inst, graph = random_battery_instance(rng, max_per_side)
        check_profile(preferences(inst, graph), result, f"instance {k}", max_agents=2 * max_per_side)
        result.instances += 1
    return result


def tree_battery(n_trees: int = 500, max_nodes: int = 14, seed: int = 2) -> BatteryResult:
    """Unique stable matching on random trees, equal to proposal passing and both DA orientations."""
    result = BatteryResult("tree uniqueness")
    rng = np.random.default_rng(seed)
    for k in range(n_trees):
        tree = random_pref_tree(int(rng.integers(1, max_nodes + 1)), rng)
        prefs, ids = tree.to_prefs()
        stable = check_profile(prefs, result, f"tree {k}", max_agents=max_nodes)
        result.instances += 1
        result.checks += 1
        if len(stable) != 1:
            result.fail(f"tree {k}: {len(stable)} stable matchings")
            continue
        trace = proposal_passing(tree)
        expected = stable.matchings[0]
        got = [UNMATCHED] * len(ids)
        for v, u in trace.matching.items():
            if u is not None:
                got[ids[v]] = ids[u]
        if tuple(got) != expected:
            result.fail(f"tree {k}: proposal passing differs from the stable matching")
        da_firm = da_on_prefs(prefs, "firm")
        for child in tree.children.get(tree.root, ()):
            result.checks += 1
            if available_on_prefs(prefs, ids[child], ids[tree.root], da_firm) != trace.proposes[child]:
                result.fail(f"tree {k}: availability of root to {child!r} differs from its proposal flag")
    return result


def _rank(prefs: Prefs, v: int, partner: int) -> int:
    return len(prefs.order[v]) if partner == UNMATCHED else prefs.rank[v][partner]


def truncation_battery(
    n_instances: int = 200,
    max_vertices: int = 40,
    ms: Sequence[int] = (1, 2, 3),
    seed: int = 3,
    brute_force_limit: int = DEFAULT_MAX_AGENTS,
) -> BatteryResult:
    """Partner monotonicity and availability transfer between H and its m-hop truncations.

    For odd m the root does weakly better in H_m than in H and unavailability
    transfers from H_m to H; for even m the root does weakly worse and
    availability transfers.  Availability uses the DA shortcut, cross-checked
    by enumeration whenever H_m has at most ``brute_force_limit`` vertices.
    """
    result = BatteryResult("truncation lemmas")
    rng = np.random.default_rng(seed)
    half = max_vertices // 2
    for k in range(n_instances):
        n_a = int(rng.integers(2, half + 1))
        n_j = int(rng.integers(2, half + 1))
        tables = [rng.normal(size=(n_a, n_j)) for _ in range(4)]
        inst = instance_from_tables(*tables)
        avg_deg = rng.uniform(1.5, 4.0)
        mask = rng.random((n_a, n_j)) < min(1.0, avg_deg / max(n_a, n_j))
        graph = InterviewGraph.from_edges(n_a, n_j, map(tuple, np.argwhere(mask)))
        prefs = preferences(inst, graph)
        full = {side: da_on_prefs(prefs, side) for side in ("applicant", "firm")}
        result.instances += 1
        for root in range(graph.n_vertices):
            if not graph.adjacency[root]:
                continue
            for m in ms:
                sub = truncate_m_hop(graph, root, m)
                sub_prefs = prefs.restrict(sub.depth)
                local = {side: da_on_prefs(sub_prefs, side) for side in ("applicant", "firm")}
                for side in ("applicant", "firm"):
                    result.checks += 1
                    r_full = _rank(prefs, root, full[side][root])
                    r_sub = _rank(prefs, root, local[side][root])
                    if (m % 2 == 1 and r_sub > r_full) or (m % 2 == 0 and r_sub < r_full):
                        result.fail(f"instance {k}, root {root}, m={m}, {side}-proposing: rank {r_sub} vs {r_full}")
                stable = enumerate_on_prefs(sub_prefs, brute_force_limit) if len(sub.depth) <= brute_force_limit else None
                for i in graph.adjacency[root]:
                    side_i = "applicant" if prefs.is_applicant(i) else "firm"
                    av_sub = available_on_prefs(sub_prefs, i, root, local[side_i])
                    av_full = available_on_prefs(prefs, i, root, full[side_i])
                    result.checks += 1
                    if m % 2 == 0 and av_sub and not av_full:
                        result.fail(f"instance {k}, root {root}, m={m}: available in H_m but not in H for {i}")
                    if m % 2 == 1 and not av_sub and av_full:
                        result.fail(f"instance {k}, root {root}, m={m}: unavailable in H_m but available in H for {i}")
                    if stable is not None and av_sub != available_bruteforce_on_prefs(stable, i, root):
                        result.fail(f"instance {k}, root {root}, m={m}: availability disagrees with brute force")
    return result
