"""Bipartite interview graphs, m-hop neighborhoods, tree diagnostics and BFS trees.

Vertices use global ids (applicants first, then firms).  Edge lists and
``has_edge`` use local ``(a, j)`` pairs.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Union

import numpy as np

from matchlab import streams
from matchlab.errors import DomainError


@dataclass(frozen=True, eq=False)
class InterviewGraph:
    n_applicants: int
    n_firms: int
    adjacency: tuple[tuple[int, ...], ...]
    _edge_set: frozenset[tuple[int, int]] = field(repr=False)

    @classmethod
    def from_edges(cls, n_applicants: int, n_firms: int, edges: Iterable[tuple[int, int]]) -> "InterviewGraph":
        """Build from local ``(a, j)`` pairs; duplicates are merged."""
        edge_set = set()
        for a, j in edges:
            a, j = int(a), int(j)
            if not (0 <= a < n_applicants and 0 <= j < n_firms):
                raise DomainError(f"edge ({a}, {j}) outside a {n_applicants}x{n_firms} market")
            edge_set.add((a, j))
        adj: list[list[int]] = [[] for _ in range(n_applicants + n_firms)]
        for a, j in edge_set:
            adj[a].append(n_applicants + j)
            adj[n_applicants + j].append(a)
        return cls(
            n_applicants=n_applicants,
            n_firms=n_firms,
            adjacency=tuple(tuple(sorted(nb)) for nb in adj),
            _edge_set=frozenset(edge_set),
        )

    @classmethod
    def empty(cls, n_applicants: int, n_firms: int) -> "InterviewGraph":
        return cls.from_edges(n_applicants, n_firms, ())

    @classmethod
    def complete(cls, n_applicants: int, n_firms: int) -> "InterviewGraph":
        return cls.from_edges(n_applicants, n_firms, ((a, j) for a in range(n_applicants) for j in range(n_firms)))

    @property
    def n_vertices(self) -> int:
        return self.n_applicants + self.n_firms

    @property
    def edge_count(self) -> int:
        return len(self._edge_set)

    @property
    def edges(self) -> list[tuple[int, int]]:
        """Local ``(a, j)`` pairs in ascending order."""
        return sorted(self._edge_set)

    def has_edge(self, a: int, j: int) -> bool:
        return (a, j) in self._edge_set

    def has_vertex_edge(self, u: int, v: int) -> bool:
        """Edge test on global ids (either order)."""
        if u > v:
            u, v = v, u
        return u < self.n_applicants <= v and (u, v - self.n_applicants) in self._edge_set

    def is_applicant(self, v: int) -> bool:
        return 0 <= v < self.n_applicants

    def neighbors(self, v: int) -> tuple[int, ...]:
        self._check_vertex(v)
        return self.adjacency[v]

    def degree(self, v: int) -> int:
        return len(self.neighbors(v))

    def degrees(self) -> np.ndarray:
        return np.array([len(nb) for nb in self.adjacency], dtype=np.int64)

    def restrict(self, vertices: Iterable[int]) -> "InterviewGraph":
        """Vertex-induced subgraph kept on the same id space (other vertices become isolated)."""
        keep = set(vertices)
        n_a = self.n_applicants
        return InterviewGraph.from_edges(
            n_a, self.n_firms, ((a, j) for a, j in self._edge_set if a in keep and n_a + j in keep)
        )

    def edge_list_text(self) -> str:
        return "".join(f"{a},{j}\n" for a, j in self.edges)

    def export_edge_list(self, path: Union[str, Path]) -> None:
        Path(path).write_text(self.edge_list_text())

    def _check_vertex(self, v: int) -> None:
        if not 0 <= v < self.n_vertices:
            raise DomainError(f"vertex {v} not in graph with {self.n_vertices} vertices")


@dataclass(frozen=True, eq=False)
class RootedSubgraph:
    """Vertex-induced m-hop neighborhood of ``root``; ``depth`` maps each vertex to its distance."""

    parent_graph: InterviewGraph
    root: int
    m: int
    depth: dict[int, int]
    graph: InterviewGraph

    @property
    def vertices(self) -> list[int]:
        return sorted(self.depth)

    @property
    def edges(self) -> list[tuple[int, int]]:
        return self.graph.edges

    def neighbors(self, v: int) -> tuple[int, ...]:
        return self.graph.neighbors(v)


GraphLike = Union[InterviewGraph, RootedSubgraph]


def _bfs_depths(g: InterviewGraph, root: int, m: int | None = None) -> dict[int, int]:
    depth = {root: 0}
    queue = deque([root])
    while queue:
        v = queue.popleft()
        if m is not None and depth[v] >= m:
            continue
        for u in g.adjacency[v]:
            if u not in depth:
                depth[u] = depth[v] + 1
                queue.append(u)
    return depth


def truncate_m_hop(g: InterviewGraph, root: int, m: int) -> RootedSubgraph:
    """H_m(root): all vertices within distance m of ``root`` and every edge among them."""
    g._check_vertex(root)
    if m < 0:
        raise DomainError("m must be non-negative")
    depth = _bfs_depths(g, root, m)
    return RootedSubgraph(parent_graph=g, root=root, m=m, depth=depth, graph=g.restrict(depth))


def _parts(g: GraphLike) -> tuple[InterviewGraph, list[int]]:
    if isinstance(g, RootedSubgraph):
        return g.graph, g.vertices
    return g, list(range(g.n_vertices))


def components(g: GraphLike) -> list[list[int]]:
    """Connected components (each sorted), ordered by smallest vertex."""
    graph, verts = _parts(g)
    seen: set[int] = set()
    out = []
    for v in verts:
        if v not in seen:
            comp = _bfs_depths(graph, v)
            seen.update(comp)
            out.append(sorted(comp))
    return out


def tree_excess(g: GraphLike) -> int:
    """``|E| - |V| + 1`` per connected component; the maximum over components."""
    graph, _ = _parts(g)
    best = 0
    for comp in components(g):
        n_edges = sum(len(graph.adjacency[v]) for v in comp) // 2
        best = max(best, n_edges - len(comp) + 1)
    return best


def is_tree(g: GraphLike) -> bool:
    comps = components(g)
    return len(comps) == 1 and tree_excess(g) == 0


@dataclass(frozen=True)
class SpanningTree:
    """Rooted tree skeleton; children lists are in ascending id order."""

    root: int
    parent: dict[int, int]  # root maps to -1
    children: dict[int, tuple[int, ...]]
    depth: dict[int, int]

    @property
    def vertices(self) -> list[int]:
        return sorted(self.depth)

    def __len__(self) -> int:
        return len(self.depth)


def bfs_spanning_tree(g: InterviewGraph, root: int, m: int) -> SpanningTree:
    """Level-synchronous BFS tree over H_m(root); each vertex keeps its lowest-id parent."""
    g._check_vertex(root)
    depth = {root: 0}
    parent = {root: -1}
    children: dict[int, list[int]] = {root: []}
    level = [root]
    for k in range(1, m + 1):
        nxt = []
        for v in sorted(level):
            for u in g.adjacency[v]:
                if u not in depth:
                    depth[u] = k
                    parent[u] = v
                    children[u] = []
                    children[v].append(u)
                    nxt.append(u)
        if not nxt:
            break
        level = nxt
    return SpanningTree(
        root=root,
        parent=parent,
        children={v: tuple(sorted(c)) for v, c in children.items()},
        depth=depth,
    )


def random_bipartite_graph(n_applicants: int, n_firms: int, edge_prob: float, seed: int) -> InterviewGraph:
    """Erdos-Renyi bipartite graph driven by the keyed stream."""
    a, j = np.meshgrid(np.arange(n_applicants), np.arange(n_firms), indexing="ij")
    u = streams.keyed_uniform(seed, streams.ROLE_GRAPH, a, j)
    keep = np.argwhere(u < edge_prob)
    return InterviewGraph.from_edges(n_applicants, n_firms, map(tuple, keep))
