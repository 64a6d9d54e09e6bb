import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lowbp.code_model import (
    AlistError,
    CodeParams,
    DegreeProfile,
    FactorGraph,
    ParityCheckMatrix,
    ProfileError,
    gf2_nullspace,
    girth,
    girth_of_adjacency,
    load_alist,
    peg_construct,
    save_alist,
)

from conftest import irregular_profile, regular_profile


class TestCodeParams:
    def test_rate(self):
        p = CodeParams(500, 250)
        assert p.rate == 0.5

    @pytest.mark.parametrize("n, m", [(0, 1), (10, 0)])
    def test_invalid(self, n, m):
        with pytest.raises(ValueError):
            CodeParams(n, m)


class TestDegreeProfile:
    def test_fractions_must_sum_to_one(self):
        with pytest.raises(ProfileError):
            DegreeProfile(((3, 0.5), (4, 0.4)), ((6, 1.0),))

    def test_counts_round_to_total(self):
        params = CodeParams(500, 250)
        prof = irregular_profile(params)
        counts = prof.variable_counts(500)
        assert sum(counts.values()) == 500
        assert counts == {5: 105, 3: 125, 2: 125, 1: 145}
        assert prof.edge_count(params) == 1295
        assert prof.is_edge_consistent(params)

    def test_derived_check_side_matches_edges(self):
        params = CodeParams(500, 250)
        prof = irregular_profile(params)
        check_edges = sum(d * c for d, c in prof.check_counts(250).items())
        assert check_edges == 1295

    @given(
        st.lists(
            st.tuples(st.integers(1, 8), st.integers(1, 50)),
            min_size=1,
            max_size=4,
            unique_by=lambda t: t[0],
        )
    )
    def test_counts_always_cover_all_nodes(self, spec):
        total = sum(c for _, c in spec)
        side = tuple((d, c / total) for d, c in spec)
        prof = DegreeProfile(side, ((1, 1.0),))
        counts = prof.variable_counts(total)
        assert sum(counts.values()) == total


class TestPegConstruct:
    def test_regular_500_column_weight(self, regular500):
        assert set(regular500.col_degrees()) == {4}
        assert regular500.n_edges == 2000

    def test_deterministic(self):
        params = CodeParams(120, 60)
        prof = regular_profile()
        a = peg_construct(params, prof, seed=42)
        b = peg_construct(params, prof, seed=42)
        assert a.rows == b.rows
        c = peg_construct(params, prof, seed=43)
        assert a.rows != c.rows

    def test_two_vars_one_check(self):
        params = CodeParams(2, 1)
        prof = DegreeProfile(((1, 1.0),), ((2, 1.0),))
        h = peg_construct(params, prof, seed=0)
        assert h.rows == [[0, 1]]
        assert girth(FactorGraph(h)) == math.inf

    def test_column_weight_one_is_forest(self):
        params = CodeParams(7, 3)
        prof = DegreeProfile.from_variable_degrees([(1, 1.0)], params)
        h = peg_construct(params, prof, seed=5)
        assert set(h.col_degrees()) == {1}
        assert girth(FactorGraph(h)) == math.inf

    def test_inconsistent_profile_rejected(self):
        params = CodeParams(10, 5)
        with pytest.raises(ProfileError):
            peg_construct(params, DegreeProfile(((2, 1.0),), ((3, 1.0),)), seed=0)

    def test_degree_exceeding_checks_rejected(self):
        params = CodeParams(8, 3)
        prof = DegreeProfile(((4, 1.0),), ((4, 2 / 3), (6, 1 / 3)))
        with pytest.raises(ValueError):
            peg_construct(params, prof, seed=0)

    def test_irregular_profile_realized(self, irregular500):
        counts = {}
        for d in irregular500.col_degrees():
            counts[d] = counts.get(d, 0) + 1
        assert counts == {5: 105, 3: 125, 2: 125, 1: 145}


class TestGirth:
    def test_complete_2x2(self):
        h = ParityCheckMatrix.from_rows(2, [[0, 1], [0, 1]])
        assert girth(FactorGraph(h)) == 4

    def test_six_cycle(self):
        # 3 checks and 3 variables wired as a single 6-cycle
        h = ParityCheckMatrix.from_rows(3, [[0, 1], [1, 2], [2, 0]])
        assert girth(FactorGraph(h)) == 6
        assert girth(FactorGraph(h)) == _brute_force_girth(h)

    def test_brute_force_agreement_random(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            h = _random_small_matrix(rng)
            assert girth(FactorGraph(h)) == _brute_force_girth(h)

    def test_girth_even_or_infinite(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            g = girth(FactorGraph(_random_small_matrix(rng)))
            assert g == math.inf or (g % 2 == 0 and g >= 4)

    def test_edge_subset_never_decreases_girth(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            h = _random_small_matrix(rng)
            parent = girth(FactorGraph(h))
            rows = [list(r) for r in h.rows]
            # drop ~30% of edges
            cols: list[list[int]] = [[] for _ in range(h.params.n_vars)]
            kept = []
            for m, r in enumerate(rows):
                keep = [v for v in r if rng.random() > 0.3]
                kept.append(keep)
                for v in keep:
                    cols[v].append(m)
            sub = girth_of_adjacency(cols, kept)
            assert sub >= parent


def _random_small_matrix(rng) -> ParityCheckMatrix:
    while True:
        m, n = int(rng.integers(2, 6)), int(rng.integers(3, 9))
        h = (rng.random((m, n)) < 0.5).astype(int)
        if h.sum(axis=1).min() > 0 and h.sum(axis=0).min() > 0:
            rows = [list(np.flatnonzero(r)) for r in h]
            return ParityCheckMatrix.from_rows(n, rows)


def _brute_force_girth(h: ParityCheckMatrix) -> float:
    """Shortest cycle via DFS enumeration of simple cycles from each node."""
    # bipartite nodes: ('v', n) and ('c', m)
    adj: dict[tuple, list[tuple]] = {}
    for m, row in enumerate(h.rows):
        adj[("c", m)] = [("v", n) for n in row]
    for n, col in enumerate(h.cols):
        adj[("v", n)] = [("c", m) for m in col]
    best = math.inf

    def dfs(start, node, prev, depth, seen):
        nonlocal best
        for nxt in adj[node]:
            if nxt == prev:
                continue
            if nxt == start and depth + 1 >= 3:
                best = min(best, depth + 1)
            elif nxt not in seen and depth + 1 < best:
                seen.add(nxt)
                dfs(start, nxt, node, depth + 1, seen)
                seen.remove(nxt)

    for node in adj:
        dfs(node, node, None, 0, {node})
    return best


class TestAlist:
    def test_round_trip_regular(self, regular500):
        again = load_alist(save_alist(regular500))
        assert again.rows == regular500.rows
        assert again.cols == regular500.cols

    def test_zero_padding_ignored(self):
        text = "3 2\n2 2\n1 2 1\n2 2\n1 0\n1 2\n2 0\n1 2\n2 3\n"
        h = load_alist(text.encode())
        assert h.rows == [[0, 1], [1, 2]]
        assert h.cols == [[0], [0, 1], [1]]

    def test_header_count_mismatch(self):
        # claims N=4 but provides 5 column-degree entries
        text = "4 2\n1 2\n1 1 1 1 1\n2 2\n"
        with pytest.raises(AlistError, match="line 3"):
            load_alist(text.encode())

    def test_index_out_of_range(self):
        text = "2 1\n1 2\n1 1\n2\n3\n1\n1 2\n"
        with pytest.raises(AlistError):
            load_alist(text.encode())

    def test_duplicate_index(self):
        text = "2 1\n1 2\n1 1\n2\n1\n1\n1 1\n"
        with pytest.raises(AlistError):
            load_alist(text.encode())

    def test_non_integer(self):
        with pytest.raises(AlistError, match="line 1"):
            load_alist(b"x y\n")

    @settings(max_examples=30)
    @given(st.integers(0, 2**32 - 1))
    def test_round_trip_random(self, seed):
        h = _random_small_matrix(np.random.default_rng(seed))
        again = load_alist(save_alist(h))
        assert again.rows == h.rows


class TestMatrixInvariants:
    def test_transpose_consistency_enforced(self):
        with pytest.raises(ValueError):
            ParityCheckMatrix(CodeParams(3, 2), [[0, 1], [2]], [[0], [0], [0]])

    def test_no_empty_row(self):
        with pytest.raises(ValueError):
            ParityCheckMatrix.from_rows(3, [[0, 1, 2], []])

    def test_edge_totals_match(self, regular500):
        assert sum(regular500.row_degrees()) == sum(regular500.col_degrees())
        g = FactorGraph(regular500)
        assert g.n_edges == regular500.n_edges


class TestNullspace:
    def test_nullspace_is_in_kernel(self, small_regular):
        basis = gf2_nullspace(small_regular)
        h = small_regular.to_dense()
        assert basis.shape[0] >= small_regular.params.n_vars - small_regular.params.n_checks
        assert ((basis @ h.T) % 2 == 0).all()
