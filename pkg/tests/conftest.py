import numpy as np
import pytest

from lowbp.code_model import (
    CodeParams,
    DegreeProfile,
    FactorGraph,
    ParityCheckMatrix,
    peg_construct,
)

REGULAR_SEED = 7
IRREGULAR_SEED = 11


def regular_profile() -> DegreeProfile:
    """Rate-1/2 profile with constant column weight 4 (rows settle at 8)."""
    return DegreeProfile.regular(4, 8)


def irregular_profile(params: CodeParams) -> DegreeProfile:
    """Node-perspective variable degrees 0.21@5 + 0.25@3 + 0.25@2 + 0.29@1."""
    return DegreeProfile.from_variable_degrees(
        [(5, 0.21), (3, 0.25), (2, 0.25), (1, 0.29)], params
    )


@pytest.fixture(scope="session")
def regular500() -> ParityCheckMatrix:
    return peg_construct(CodeParams(500, 250), regular_profile(), seed=REGULAR_SEED)


@pytest.fixture(scope="session")
def irregular500() -> ParityCheckMatrix:
    params = CodeParams(500, 250)
    return peg_construct(params, irregular_profile(params), seed=IRREGULAR_SEED)


@pytest.fixture(scope="session")
def regular500_graph(regular500) -> FactorGraph:
    return FactorGraph(regular500)


@pytest.fixture(scope="session")
def small_regular() -> ParityCheckMatrix:
    """N=48 rate-1/2 code with column weight 3, for fast decoder tests."""
    return peg_construct(CodeParams(48, 24), DegreeProfile.regular(3, 6), seed=3)


def make_tree_code(rng: np.random.Generator, max_vars: int = 16) -> ParityCheckMatrix:
    """Random cycle-free code: each check joins one existing variable to
    fresh ones, so the factor graph is a connected tree."""
    rows: list[list[int]] = []
    n_vars = 1
    while True:
        deg = int(rng.integers(2, 4))
        if n_vars + deg - 1 > max_vars:
            break
        anchor = int(rng.integers(n_vars))
        fresh = list(range(n_vars, n_vars + deg - 1))
        rows.append([anchor] + fresh)
        n_vars += deg - 1
        if len(rows) >= 2 and rng.random() < 0.25:
            break
    if not rows:
        rows = [[0, 1]]
        n_vars = 2
    return ParityCheckMatrix.from_rows(n_vars, rows)


def exact_posterior_llrs(matrix: ParityCheckMatrix, llr: np.ndarray) -> np.ndarray:
    """Bitwise posterior LLRs by enumeration over every codeword (N <= 20)."""
    from scipy.special import logsumexp

    n = matrix.params.n_vars
    h = matrix.to_dense()
    words = ((np.arange(1 << n)[:, None] >> np.arange(n)) & 1).astype(np.int8)
    ok = (words @ h.T % 2 == 0).all(axis=1)
    cw = words[ok].astype(np.float64)
    logw = cw @ np.asarray(llr, dtype=np.float64)
    out = np.empty(n)
    for j in range(n):
        on = cw[:, j] == 1
        num = logsumexp(logw[on]) if on.any() else -np.inf
        den = logsumexp(logw[~on]) if (~on).any() else -np.inf
        out[j] = num - den
    return out
