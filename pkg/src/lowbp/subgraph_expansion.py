"""PEG-based expansion of a factor graph into check-covering subgraphs.

Each subgraph grows outward from a variable root, claiming candidate checks
level by level up to ``d_max`` check levels.  An edge is admitted only if it
keeps the subgraph's girth strictly above the parent graph's girth, so every
subgraph is either a tree or has strictly longer local cycles.  The disjoint
strategy claims every check exactly once across subgraphs; the re-appearance
(RA) strategy re-enters all checks as candidates for every root and claims
some checks repeatedly.
"""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from lowbp.code_model import (
    CodeParams,
    FactorGraph,
    ParityCheckMatrix,
    girth,
    girth_of_adjacency,
)

STRATEGIES = ("disjoint", "ra")


@dataclass(frozen=True)
class ExpansionConfig:
    strategy: str
    d_max: int = 4
    seed: int = 0
    max_subgraphs: int = 100_000

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValueError(f"strategy must be one of {STRATEGIES}")
        if self.d_max < 1:
            raise ValueError("d_max must be >= 1")
        if self.max_subgraphs < 1:
            raise ValueError("max_subgraphs must be >= 1")


class CoverageError(RuntimeError):
    """Expansion terminated before every check was covered."""

    def __init__(self, uncovered: list[int]):
        self.uncovered = uncovered
        super().__init__(f"uncovered checks remain: {uncovered[:16]}")


@dataclass
class Subgraph:
    """A subset of checks with the admitted subset of their incident edges.

    Check and variable ids refer to the parent graph; ``local_index_map``
    gives each original check id its position in the sorted ``check_ids``.
    """

    check_ids: list[int]
    var_ids: list[int]
    edges: list[tuple[int, int]]
    root: int
    local_index_map: dict[int, int] = field(init=False)

    def __post_init__(self):
        self.check_ids = sorted(self.check_ids)
        self.var_ids = sorted(self.var_ids)
        self.edges = sorted(self.edges)
        self.local_index_map = {m: i for i, m in enumerate(self.check_ids)}
        check_set = set(self.check_ids)
        for m, _ in self.edges:
            if m not in check_set:
                raise ValueError("edge endpoint check outside check_ids")

    @property
    def size(self) -> int:
        return len(self.check_ids)

    def local_adjacency(self) -> tuple[list[list[int]], list[list[int]]]:
        """(cols, rows) in local indices, for girth computations."""
        vmap = {v: i for i, v in enumerate(self.var_ids)}
        rows: list[list[int]] = [[] for _ in self.check_ids]
        cols: list[list[int]] = [[] for _ in self.var_ids]
        for m, v in self.edges:
            rows[self.local_index_map[m]].append(vmap[v])
            cols[vmap[v]].append(self.local_index_map[m])
        return [sorted(c) for c in cols], [sorted(r) for r in rows]

    def local_girth(self) -> float:
        cols, rows = self.local_adjacency()
        return girth_of_adjacency(cols, rows)

    def is_tree(self) -> bool:
        return self.local_girth() == math.inf

    def to_matrix(self) -> ParityCheckMatrix:
        cols, rows = self.local_adjacency()
        params = CodeParams(len(self.var_ids), len(self.check_ids))
        return ParityCheckMatrix(params, rows, cols)


@dataclass
class SubgraphSet:
    subgraphs: list[Subgraph]
    strategy: str
    d_max: int
    seed: int
    parent_girth: float
    n_checks: int

    @property
    def coverage(self) -> np.ndarray:
        counts = np.zeros(self.n_checks, dtype=np.int64)
        for sg in self.subgraphs:
            for m in sg.check_ids:
                counts[m] += 1
        return counts

    @property
    def sizes(self) -> list[int]:
        return [sg.size for sg in self.subgraphs]

    def to_json(self) -> str:
        doc = {
            "strategy": self.strategy,
            "d_max": self.d_max,
            "seed": self.seed,
            "parent_girth": None if math.isinf(self.parent_girth) else self.parent_girth,
            "n_checks": self.n_checks,
            "subgraphs": [
                {
                    "root": sg.root,
                    "check_ids": sg.check_ids,
                    "edges": [[m, v] for m, v in sg.edges],
                }
                for sg in self.subgraphs
            ],
        }
        return json.dumps(doc, indent=1, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "SubgraphSet":
        doc = json.loads(text)
        subs = []
        for entry in doc["subgraphs"]:
            edges = [(m, v) for m, v in entry["edges"]]
            var_ids = sorted({v for _, v in edges})
            subs.append(Subgraph(entry["check_ids"], var_ids, edges, entry["root"]))
        pg = doc["parent_girth"]
        return cls(
            subs,
            doc["strategy"],
            doc["d_max"],
            doc["seed"],
            math.inf if pg is None else pg,
            doc["n_checks"],
        )


class _EdgeAdmitter:
    """Greedy girth-preserving edge admission into a growing subgraph."""

    def __init__(self, parent_girth: float):
        self.parent_girth = parent_girth
        self.sub_cols: dict[int, list[int]] = {}
        self.sub_rows: dict[int, list[int]] = {}
        self.edges: set[tuple[int, int]] = set()

    def admissible(self, m: int, v: int) -> bool:
        """True iff adding (m, v) cannot close a cycle of length <= parent girth."""
        if (m, v) in self.edges:
            return False
        if math.isinf(self.parent_girth):
            return True
        # BFS from v in the current subgraph; reject if m is within parent_girth
        limit = int(self.parent_girth)
        dist = {("v", v): 0}
        frontier: deque = deque([("v", v)])
        while frontier:
            kind, node = frontier.popleft()
            d = dist[(kind, node)]
            if d >= limit:
                continue
            if kind == "v":
                neighbors = [("c", mm) for mm in self.sub_cols.get(node, ())]
            else:
                neighbors = [("v", vv) for vv in self.sub_rows.get(node, ())]
            for nxt in neighbors:
                if nxt not in dist:
                    dist[nxt] = d + 1
                    if nxt == ("c", m):
                        return False
                    frontier.append(nxt)
        return True

    def add(self, m: int, v: int):
        self.edges.add((m, v))
        self.sub_rows.setdefault(m, []).append(v)
        self.sub_cols.setdefault(v, []).append(m)


def _check_ball(graph: FactorGraph, root: int, d_max: int) -> list[int]:
    """Checks within d_max check-levels of the root, in BFS discovery order.

    Pure hop-distance in the parent graph, so the ball does not depend on
    the expansion strategy or on what earlier subgraphs claimed.
    """
    cols, rows = graph.matrix.cols, graph.matrix.rows
    seen_checks: set[int] = set()
    seen_vars = {root}
    order: list[int] = []
    frontier_vars = [root]
    for _ in range(d_max):
        new_checks = []
        for v in frontier_vars:
            for m in cols[v]:
                if m not in seen_checks:
                    seen_checks.add(m)
                    new_checks.append(m)
        if not new_checks:
            break
        order.extend(new_checks)
        frontier_vars = []
        for m in new_checks:
            for v in rows[m]:
                if v not in seen_vars:
                    seen_vars.add(v)
                    frontier_vars.append(v)
    return order


def _grow_subgraph(
    graph: FactorGraph,
    root: int,
    candidates: set[int],
    d_max: int,
    parent_girth: float,
    rng: np.random.Generator,
) -> Subgraph | None:
    """Claim ball-and-candidate checks and admit their girth-safe edges."""
    claimed = [m for m in _check_ball(graph, root, d_max) if m in candidates]
    if not claimed:
        return None
    # seeded first-edge rule: rotate the root's own claimed neighbors so a
    # uniformly chosen one is admitted first (all start at degree zero)
    level1 = [m for m in claimed if root in graph.matrix.rows[m]]
    if len(level1) > 1:
        first = level1[int(rng.integers(len(level1)))]
        claimed.remove(first)
        claimed.insert(0, first)

    admitter = _EdgeAdmitter(parent_girth)
    for m in claimed:
        for v in graph.matrix.rows[m]:
            if admitter.admissible(m, v):
                admitter.add(m, v)
    var_ids = sorted({v for _, v in admitter.edges})
    return Subgraph(list(claimed), var_ids, sorted(admitter.edges), root)


def peg_expand(graph: FactorGraph, cfg: ExpansionConfig) -> SubgraphSet:
    """Expand ``graph`` into subgraphs per the configured strategy.

    Variable roots are visited in ascending index; each eligible root grows
    one subgraph.  Disjoint roots draw candidates from the still-uncovered
    checks; RA roots see every check as a candidate but a grown subgraph is
    kept only if it covers something new.  An acyclic parent needs no
    splitting and is returned whole as a single subgraph.
    """
    n_checks = graph.n_checks
    parent_girth = girth(graph)
    if math.isinf(parent_girth):
        whole = Subgraph(
            list(range(n_checks)),
            sorted(set(graph.edge_var.tolist())),
            [tuple(e) for e in graph.edges.tolist()],
            root=0,
        )
        return SubgraphSet([whole], cfg.strategy, cfg.d_max, cfg.seed, parent_girth, n_checks)

    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed))
    covered: set[int] = set()
    subgraphs: list[Subgraph] = []

    for root in range(graph.n_vars):
        if len(covered) == n_checks:
            break
        if cfg.strategy == "disjoint":
            # candidates restricted to uncovered checks forces fresh claims
            candidates = {m for m in range(n_checks) if m not in covered}
        else:
            # RA is coverage-blind: every root keeps its full ball, so
            # redundant subgraphs accumulate until the sweep covers everything
            candidates = set(range(n_checks))
        sg = _grow_subgraph(graph, root, candidates, cfg.d_max, parent_girth, rng)
        if sg is None:
            continue
        covered |= set(sg.check_ids)
        subgraphs.append(sg)
        if len(subgraphs) >= cfg.max_subgraphs and len(covered) < n_checks:
            raise CoverageError(sorted(set(range(n_checks)) - covered))

    if len(covered) < n_checks:
        raise CoverageError(sorted(set(range(n_checks)) - covered))

    if cfg.strategy == "disjoint":
        # report largest-first: candidate shrinkage makes later growths smaller
        order = sorted(range(len(subgraphs)), key=lambda i: (-subgraphs[i].size, i))
        subgraphs = [subgraphs[i] for i in order]
    return SubgraphSet(subgraphs, cfg.strategy, cfg.d_max, cfg.seed, parent_girth, n_checks)


def validate(subgraph_set: SubgraphSet, graph: FactorGraph) -> dict:
    """Structural report: coverage identities, girth property, degree bounds."""
    violations: list[str] = []
    n_checks = graph.n_checks
    coverage = subgraph_set.coverage
    sizes = subgraph_set.sizes
    total = int(sum(sizes))

    if subgraph_set.strategy == "disjoint":
        if total != n_checks:
            violations.append(f"disjoint size sum {total} != M {n_checks}")
        if not (coverage == 1).all():
            bad = np.flatnonzero(coverage != 1).tolist()
            violations.append(f"disjoint coverage not exactly one at checks {bad[:8]}")
        if any(sizes[i] < sizes[i + 1] for i in range(len(sizes) - 1)):
            violations.append("disjoint subgraph sizes are not non-increasing")
    else:
        if total < n_checks:
            violations.append(f"RA size sum {total} < M {n_checks}")
        if not (coverage >= 1).all():
            bad = np.flatnonzero(coverage < 1).tolist()
            violations.append(f"uncovered checks {bad[:8]}")

    parent = girth(graph)
    local_girths: list[float | None] = []
    for i, sg in enumerate(subgraph_set.subgraphs):
        lg = sg.local_girth()
        local_girths.append(None if math.isinf(lg) else lg)
        if not (lg > parent):
            violations.append(f"subgraph {i} local girth {lg} <= parent girth {parent}")
        edge_set = set(sg.edges)
        parent_edges = {(int(m), int(v)) for m, v in graph.edges}
        if not edge_set <= parent_edges:
            violations.append(f"subgraph {i} contains edges absent from the parent graph")
        for m in sg.check_ids:
            deg = sum(1 for e in sg.edges if e[0] == m)
            if deg > len(graph.matrix.rows[m]):
                violations.append(f"subgraph {i} check {m} exceeds its original degree")

    return {
        "ok": not violations,
        "violations": violations,
        "strategy": subgraph_set.strategy,
        "d_max": subgraph_set.d_max,
        "n_subgraphs": len(subgraph_set.subgraphs),
        "sizes": sizes,
        "parent_girth": None if math.isinf(parent) else parent,
        "local_girths": local_girths,
        "coverage_min": int(coverage.min()) if len(coverage) else 0,
        "coverage_max": int(coverage.max()) if len(coverage) else 0,
    }
