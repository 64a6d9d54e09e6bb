"""LDPC codes as sparse parity-check matrices and bipartite factor graphs.

Provides progressive edge growth (PEG) construction, alist serialization,
and structural properties (girth, degree profiles).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


class ProfileError(ValueError):
    """Degree profile is malformed or inconsistent with the code parameters."""


class AlistError(ValueError):
    """Malformed alist text; message names the offending line."""


@dataclass(frozen=True)
class CodeParams:
    """Block length N and number of checks M = N - K."""

    n_vars: int
    n_checks: int

    def __post_init__(self):
        if self.n_vars <= 0 or self.n_checks <= 0:
            raise ValueError("n_vars and n_checks must be positive")

    @property
    def rate(self) -> float:
        return (self.n_vars - self.n_checks) / self.n_vars

    def require_positive_rate(self):
        """Proper codes need M < N; structural test graphs may be square."""
        if self.n_checks >= self.n_vars:
            raise ValueError("n_checks must be smaller than n_vars for a code")


@dataclass(frozen=True)
class DegreeProfile:
    """Node-perspective degree distributions for variables and checks.

    Each side is a list of (degree, fraction-of-nodes) pairs.  Fractions on
    each side must sum to one; the realized integer node counts must give the
    same edge total on both sides.
    """

    variable_degrees: tuple[tuple[int, float], ...]
    check_degrees: tuple[tuple[int, float], ...]

    def __post_init__(self):
        for side in (self.variable_degrees, self.check_degrees):
            if not side:
                raise ProfileError("degree list must be nonempty")
            for d, f in side:
                if d <= 0 or not (0.0 < f <= 1.0):
                    raise ProfileError(f"bad degree entry ({d}, {f})")
            total = sum(f for _, f in side)
            if abs(total - 1.0) > 1e-9:
                raise ProfileError(f"fractions sum to {total}, expected 1")
            degs = [d for d, _ in side]
            if len(set(degs)) != len(degs):
                raise ProfileError("duplicate degree in profile")

    @staticmethod
    def _counts(side: tuple[tuple[int, float], ...], n: int) -> dict[int, int]:
        # largest-remainder rounding so counts sum to n exactly
        raw = [(d, f * n) for d, f in side]
        counts = {d: int(math.floor(x)) for d, x in raw}
        short = n - sum(counts.values())
        remainders = sorted(raw, key=lambda t: (t[1] - math.floor(t[1]), t[0]), reverse=True)
        for d, _ in remainders[:short]:
            counts[d] += 1
        return {d: c for d, c in counts.items() if c > 0}

    def variable_counts(self, n_vars: int) -> dict[int, int]:
        return self._counts(self.variable_degrees, n_vars)

    def check_counts(self, n_checks: int) -> dict[int, int]:
        return self._counts(self.check_degrees, n_checks)

    def edge_count(self, params: CodeParams) -> int:
        return sum(d * c for d, c in self.variable_counts(params.n_vars).items())

    def is_edge_consistent(self, params: CodeParams) -> bool:
        check_edges = sum(d * c for d, c in self.check_counts(params.n_checks).items())
        return self.edge_count(params) == check_edges

    @classmethod
    def regular(cls, var_degree: int, check_degree: int) -> "DegreeProfile":
        return cls(((var_degree, 1.0),), ((check_degree, 1.0),))

    @classmethod
    def from_variable_degrees(
        cls, variable_degrees: list[tuple[int, float]], params: CodeParams
    ) -> "DegreeProfile":
        """Build a profile from the variable side, deriving the most uniform
        check side consistent with the edge total."""
        vd = tuple(sorted(variable_degrees))
        probe = cls(vd, ((1, 1.0),))
        edges = probe.edge_count(params)
        m = params.n_checks
        q, r = divmod(edges, m)
        if q == 0:
            raise ProfileError("fewer edges than checks; every check would need degree 0")
        if r == 0:
            cd = ((q, 1.0),)
        else:
            cd = ((q, (m - r) / m), (q + 1, r / m))
        return cls(vd, cd)


@dataclass
class ParityCheckMatrix:
    """Sparse binary M x N matrix stored as sorted adjacency lists.

    ``rows[m]`` lists the variables of check m; ``cols[n]`` lists the checks
    of variable n.  The two views are kept mutually consistent and no row or
    column may be empty or contain duplicates.
    """

    params: CodeParams
    rows: list[list[int]]
    cols: list[list[int]]

    def __post_init__(self):
        self.validate()

    @classmethod
    def from_rows(cls, n_vars: int, rows: list[list[int]]) -> "ParityCheckMatrix":
        cols: list[list[int]] = [[] for _ in range(n_vars)]
        for m, row in enumerate(rows):
            for n in row:
                cols[n].append(m)
        rows = [sorted(r) for r in rows]
        cols = [sorted(c) for c in cols]
        return cls(CodeParams(n_vars, len(rows)), rows, cols)

    def validate(self):
        m_, n_ = self.params.n_checks, self.params.n_vars
        if len(self.rows) != m_ or len(self.cols) != n_:
            raise ValueError("adjacency list lengths disagree with params")
        edge_set = set()
        for m, row in enumerate(self.rows):
            if not row:
                raise ValueError(f"check {m} has no variables")
            if sorted(set(row)) != row:
                raise ValueError(f"check {m} row is unsorted or has duplicates")
            if row[0] < 0 or row[-1] >= n_:
                raise ValueError(f"check {m} references a variable out of range")
            edge_set.update((m, n) for n in row)
        col_edges = set()
        for n, col in enumerate(self.cols):
            if not col:
                raise ValueError(f"variable {n} has no checks")
            if sorted(set(col)) != col:
                raise ValueError(f"variable {n} column is unsorted or has duplicates")
            if col[0] < 0 or col[-1] >= m_:
                raise ValueError(f"variable {n} references a check out of range")
            col_edges.update((m, n) for m in col)
        if edge_set != col_edges:
            raise ValueError("rows and cols are not transposes of each other")

    @property
    def n_edges(self) -> int:
        return sum(len(r) for r in self.rows)

    def to_dense(self) -> np.ndarray:
        h = np.zeros((self.params.n_checks, self.params.n_vars), dtype=np.uint8)
        for m, row in enumerate(self.rows):
            h[m, row] = 1
        return h

    def row_degrees(self) -> list[int]:
        return [len(r) for r in self.rows]

    def col_degrees(self) -> list[int]:
        return [len(c) for c in self.cols]


@dataclass
class FactorGraph:
    """Bipartite factor graph of a parity-check matrix with stable edge ids.

    Edges are sorted by (check, variable) so that edge index order is
    reproducible; per-node edge id lists are precomputed for message passing.
    """

    matrix: ParityCheckMatrix
    edges: np.ndarray = field(init=False)
    edge_check: np.ndarray = field(init=False)
    edge_var: np.ndarray = field(init=False)
    row_edge_ids: list[np.ndarray] = field(init=False)
    col_edge_ids: list[np.ndarray] = field(init=False)

    def __post_init__(self):
        pairs = [
            (m, n) for m, row in enumerate(self.matrix.rows) for n in row
        ]
        self.edges = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
        self.edge_check = self.edges[:, 0].copy()
        self.edge_var = self.edges[:, 1].copy()
        row_ids: list[list[int]] = [[] for _ in range(self.n_checks)]
        col_ids: list[list[int]] = [[] for _ in range(self.n_vars)]
        for e, (m, n) in enumerate(pairs):
            row_ids[m].append(e)
            col_ids[n].append(e)
        self.row_edge_ids = [np.asarray(r, dtype=np.int64) for r in row_ids]
        self.col_edge_ids = [np.asarray(c, dtype=np.int64) for c in col_ids]

    @property
    def n_vars(self) -> int:
        return self.matrix.params.n_vars

    @property
    def n_checks(self) -> int:
        return self.matrix.params.n_checks

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def has_degree_one_checks(self) -> bool:
        """Degenerate codes: a degree-1 check pins its variable outright."""
        return any(len(r) == 1 for r in self.matrix.rows)


def girth(graph: FactorGraph) -> float:
    """Length of the shortest cycle (always even), or ``math.inf`` for forests.

    BFS from every variable node; the shortest closed walk through any root
    gives the girth.
    """
    return girth_of_adjacency(graph.matrix.cols, graph.matrix.rows)


def girth_of_adjacency(cols: list[list[int]], rows: list[list[int]]) -> float:
    """Girth of a bipartite graph given both adjacency views.

    Nodes are encoded internally as v for variables and ~m for checks.
    """
    n_vars = len(cols)
    best = math.inf
    for root in range(n_vars):
        if not cols[root]:
            continue
        dist: dict[int, int] = {root: 0}
        parent: dict[int, int] = {root: -10}
        frontier = [root]
        d = 0
        while frontier and 2 * d < best - 1:
            nxt = []
            for u in frontier:
                neighbors = cols[u] if u >= 0 else rows[~u]
                for w_raw in neighbors:
                    w = ~w_raw if u >= 0 else w_raw
                    if w == parent[u]:
                        continue
                    if w in dist:
                        cycle = dist[u] + dist[w] + 1
                        if cycle < best:
                            best = cycle
                    else:
                        dist[w] = d + 1
                        parent[w] = u
                        nxt.append(w)
            frontier = nxt
            d += 1
    return best


def peg_construct(params: CodeParams, profile: DegreeProfile, seed: int) -> ParityCheckMatrix:
    """Construct a parity-check matrix by progressive edge growth.

    The variable-side degree profile is honored exactly; check degrees settle
    as evenly as the greedy placement allows.  Each variable's first edge goes
    to a check of minimum current degree; subsequent edges go to a check at
    maximum BFS distance from the variable in the graph built so far.  Ties
    are broken by a seeded uniform choice, so the construction is a pure
    function of (params, profile, seed).
    """
    params.require_positive_rate()
    if not profile.is_edge_consistent(params):
        raise ProfileError("variable- and check-side edge totals disagree")

    n, m = params.n_vars, params.n_checks
    counts = profile.variable_counts(n)
    degrees: list[int] = []
    for d in sorted(counts):
        degrees.extend([d] * counts[d])
    if len(degrees) != n:
        raise ProfileError("variable counts do not cover every variable")
    if max(degrees) > m:
        raise ValueError(f"variable degree {max(degrees)} exceeds the number of checks")

    rng = np.random.default_rng(np.random.SeedSequence(seed))
    rows: list[list[int]] = [[] for _ in range(m)]
    cols: list[list[int]] = [[] for _ in range(n)]
    check_deg = np.zeros(m, dtype=np.int64)

    def pick_min_degree(candidates: list[int]) -> int:
        degs = check_deg[candidates]
        lowest = degs.min()
        pool = [c for c, dg in zip(candidates, degs) if dg == lowest]
        if len(pool) == 1:
            return pool[0]
        return pool[rng.integers(len(pool))]

    for j in range(n):
        for k in range(degrees[j]):
            if k == 0:
                target = pick_min_degree(list(range(m)))
            else:
                candidates = _peg_frontier_complement(cols, rows, j)
                target = pick_min_degree(candidates)
            rows[target].append(j)
            cols[j].append(target)
            check_deg[target] += 1

    rows = [sorted(r) for r in rows]
    cols = [sorted(c) for c in cols]
    empty = [mm for mm, r in enumerate(rows) if not r]
    if empty:
        raise ValueError(f"profile leaves checks without edges: {empty[:8]}")
    return ParityCheckMatrix(params, rows, cols)


def _peg_frontier_complement(cols: list[list[int]], rows: list[list[int]], j: int) -> list[int]:
    """Checks outside the BFS neighborhood of variable j, taken at the last
    level before the neighborhood either covers everything or stops growing."""
    m = len(rows)
    reached = set(cols[j])
    seen_vars = {j}
    frontier_checks = list(reached)
    while True:
        prev_complement = [c for c in range(m) if c not in reached]
        new_vars = []
        for c in frontier_checks:
            for v in rows[c]:
                if v not in seen_vars:
                    seen_vars.add(v)
                    new_vars.append(v)
        new_checks = []
        for v in new_vars:
            for c in cols[v]:
                if c not in reached:
                    reached.add(c)
                    new_checks.append(c)
        if not new_checks:
            # neighborhood saturated: everything reachable is reached
            return prev_complement if prev_complement else list(range(m))
        if len(reached) == m:
            return prev_complement
        frontier_checks = new_checks


def save_alist(matrix: ParityCheckMatrix) -> bytes:
    """Serialize to the standard alist text format (1-based, zero-padded)."""
    n, m = matrix.params.n_vars, matrix.params.n_checks
    max_col = max(len(c) for c in matrix.cols)
    max_row = max(len(r) for r in matrix.rows)
    lines = [
        f"{n} {m}",
        f"{max_col} {max_row}",
        " ".join(str(len(c)) for c in matrix.cols),
        " ".join(str(len(r)) for r in matrix.rows),
    ]
    for col in matrix.cols:
        padded = [str(c + 1) for c in col] + ["0"] * (max_col - len(col))
        lines.append(" ".join(padded))
    for row in matrix.rows:
        padded = [str(v + 1) for v in row] + ["0"] * (max_row - len(row))
        lines.append(" ".join(padded))
    return ("\n".join(lines) + "\n").encode("utf-8")


def load_alist(data: bytes) -> ParityCheckMatrix:
    """Parse alist text; raises :class:`AlistError` naming the bad line."""
    text = data.decode("utf-8")
    lines = text.splitlines()

    def ints(line_no: int, expect: int | None = None) -> list[int]:
        if line_no >= len(lines):
            raise AlistError(f"line {line_no + 1}: unexpected end of file")
        try:
            values = [int(tok) for tok in lines[line_no].split()]
        except ValueError:
            raise AlistError(f"line {line_no + 1}: non-integer token") from None
        if expect is not None and len(values) != expect:
            raise AlistError(
                f"line {line_no + 1}: expected {expect} entries, found {len(values)}"
            )
        return values

    header = ints(0)
    if len(header) != 2:
        raise AlistError("line 1: header must be 'N M'")
    n, m = header
    if n <= 0 or m <= 0:
        raise AlistError("line 1: N and M must be positive")
    maxdeg = ints(1)
    if len(maxdeg) != 2:
        raise AlistError("line 2: expected max column and row degrees")
    max_col, max_row = maxdeg
    col_deg = ints(2, n)
    row_deg = ints(3, m)
    if max(col_deg, default=0) > max_col or max(row_deg, default=0) > max_row:
        raise AlistError("line 3/4: a degree exceeds the declared maximum")

    cols: list[list[int]] = []
    for i in range(n):
        line_no = 4 + i
        entries = [e for e in ints(line_no) if e != 0]
        if len(entries) != col_deg[i]:
            raise AlistError(
                f"line {line_no + 1}: {len(entries)} nonzero entries, degree says {col_deg[i]}"
            )
        zero_based = []
        for e in entries:
            if not (1 <= e <= m):
                raise AlistError(f"line {line_no + 1}: check index {e} out of range")
            zero_based.append(e - 1)
        if len(set(zero_based)) != len(zero_based):
            raise AlistError(f"line {line_no + 1}: duplicate index")
        cols.append(sorted(zero_based))

    rows: list[list[int]] = []
    for i in range(m):
        line_no = 4 + n + i
        entries = [e for e in ints(line_no) if e != 0]
        if len(entries) != row_deg[i]:
            raise AlistError(
                f"line {line_no + 1}: {len(entries)} nonzero entries, degree says {row_deg[i]}"
            )
        zero_based = []
        for e in entries:
            if not (1 <= e <= n):
                raise AlistError(f"line {line_no + 1}: variable index {e} out of range")
            zero_based.append(e - 1)
        if len(set(zero_based)) != len(zero_based):
            raise AlistError(f"line {line_no + 1}: duplicate index")
        rows.append(sorted(zero_based))

    from_rows = {(mm, nn) for mm, row in enumerate(rows) for nn in row}
    from_cols = {(mm, nn) for nn, col in enumerate(cols) for mm in col}
    if from_rows != from_cols:
        raise AlistError("row and column index lists are inconsistent")

    try:
        return ParityCheckMatrix(CodeParams(n, m), rows, cols)
    except ValueError as exc:
        raise AlistError(str(exc)) from None


def gf2_nullspace(matrix: ParityCheckMatrix) -> np.ndarray:
    """Basis of the GF(2) null space of H, one codeword per row.

    Used by the harness to draw random codewords when the all-zero protocol
    is switched off.
    """
    h = matrix.to_dense().astype(np.uint8)
    m, n = h.shape
    h = h.copy()
    pivot_cols: list[int] = []
    r = 0
    for c in range(n):
        pivot = None
        for i in range(r, m):
            if h[i, c]:
                pivot = i
                break
        if pivot is None:
            continue
        h[[r, pivot]] = h[[pivot, r]]
        for i in range(m):
            if i != r and h[i, c]:
                h[i] ^= h[r]
        pivot_cols.append(c)
        r += 1
        if r == m:
            break
    free_cols = [c for c in range(n) if c not in pivot_cols]
    basis = np.zeros((len(free_cols), n), dtype=np.uint8)
    for k, fc in enumerate(free_cols):
        basis[k, fc] = 1
        for i, pc in enumerate(pivot_cols):
            if h[i, fc]:
                basis[k, pc] = 1
    return basis
