"""Offline optimization of per-check reweighting coefficients.

For each subgraph, alternates reweighted message passing (to obtain clique
beliefs and their mutual information) with a conditional gradient step over
a spanning-hyperforest surrogate of the valid reweighting set.  Per-check
results from all subgraphs are then merged into one global vector.

Clique beliefs are the even-parity-restricted product distributions of the
incoming variable-to-check messages; their entropies have closed forms in
the pairwise tanh products, which the batched path uses.  The enumeration
path (`clique_belief` / `mutual_information`) computes the same quantities
directly and serves as the cross-check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import expit, xlogy

from lowbp.code_model import FactorGraph, ParityCheckMatrix
from lowbp.decoder import RHO_MIN, Engine
from lowbp.subgraph_expansion import Subgraph, SubgraphSet

# beliefs beyond this magnitude are numerically point masses; clamping keeps
# every even-parity normalizer strictly positive
PSI_CLAMP = 30.0

CLIQUE_ENUM_LIMIT = 20


@dataclass(frozen=True)
class OptimizerConfig:
    step_rule: str = "diminishing"  # or "line-search"
    max_recursions: int = 60
    tol: float = 1e-3
    rho_min: float = RHO_MIN
    rho_init: float = 0.9
    mp_iterations: int = 20
    kernel: str = "jacobian"
    line_search_grid: tuple[float, ...] = tuple(np.round(np.linspace(0, 1, 11), 2))
    line_search_frames: int = 200

    def __post_init__(self):
        if self.step_rule not in ("diminishing", "line-search"):
            raise ValueError("step_rule must be 'diminishing' or 'line-search'")
        if not (0 < self.rho_min < 1) or not (self.rho_min <= self.rho_init <= 1):
            raise ValueError("need 0 < rho_min <= rho_init <= 1")


@dataclass
class CliqueBelief:
    """Even-parity joint belief of one check's variables."""

    check_id: int
    configs: list[tuple[int, ...]]
    probs: np.ndarray


@dataclass
class OptimizerState:
    """Iterate, recursion counter, lower bound and objective history.

    ``objective_trace[r]`` is the linear objective at the new iterate under
    recursion r's information vector; ``lin_bound_trace[r]`` is that same
    recursion's linear-minimizer value (the certificate the objective can
    never undercut); ``lower_bound_trace`` is the running max of those
    certificates.  Because the information vector is refreshed every
    recursion, only the per-recursion pairing is a guaranteed bound.
    """

    rho: np.ndarray
    recursion: int = 0
    lower_bound: float = -math.inf
    objective_trace: list[float] = field(default_factory=list)
    lin_bound_trace: list[float] = field(default_factory=list)
    lower_bound_trace: list[float] = field(default_factory=list)
    converged: bool = False


def _member_rows(subgraph) -> list[list[int]]:
    """Per-check variable lists in local indices, from several accepted types."""
    if isinstance(subgraph, Subgraph):
        _, rows = subgraph.local_adjacency()
        return rows
    if isinstance(subgraph, ParityCheckMatrix):
        return subgraph.rows
    if isinstance(subgraph, FactorGraph):
        return subgraph.matrix.rows
    raise TypeError(f"unsupported subgraph type {type(subgraph)!r}")


def clique_belief(
    subgraph, psi: np.ndarray, check_id: int, enum_limit: int = CLIQUE_ENUM_LIMIT
) -> CliqueBelief:
    """Joint belief of check ``check_id`` over its even-parity assignments.

    ``psi`` holds the incoming variable-to-check messages indexed by the
    local graph's edge ids.  Probability of an assignment is the product of
    the per-variable Bernoulli likelihoods, normalized over assignments with
    even parity only.
    """
    graph = subgraph if isinstance(subgraph, FactorGraph) else FactorGraph(
        subgraph.to_matrix() if isinstance(subgraph, Subgraph) else subgraph
    )
    members = graph.matrix.rows[check_id]
    d = len(members)
    if d > enum_limit:
        raise ValueError(f"check degree {d} exceeds enumeration limit {enum_limit}")
    edge_ids = graph.row_edge_ids[check_id]
    msgs = np.clip(np.asarray(psi, dtype=np.float64)[edge_ids], -PSI_CLAMP, PSI_CLAMP)
    p1 = expit(msgs)
    configs = []
    weights = []
    for bits in range(1 << d):
        assign = tuple((bits >> k) & 1 for k in range(d))
        if sum(assign) % 2:
            continue
        w = np.prod(np.where(np.array(assign) == 1, p1, 1.0 - p1))
        configs.append(assign)
        weights.append(w)
    probs = np.asarray(weights)
    probs = probs / probs.sum()
    return CliqueBelief(check_id, configs, probs)


def mutual_information(belief: CliqueBelief) -> float:
    """I = sum_i H(marginal_i) - H(joint), in nats, marginals projected from
    the clique belief itself."""
    probs = belief.probs
    configs = np.asarray(belief.configs)
    h_joint = float(-xlogy(probs, probs).sum())
    q = probs @ configs  # marginal P(x_i = 1)
    h_marg = float(_h2(q).sum())
    return max(0.0, h_marg - h_joint)


def _h2(q: np.ndarray) -> np.ndarray:
    q = np.clip(q, 0.0, 1.0)
    return -(xlogy(q, q) + xlogy(1.0 - q, 1.0 - q))


def clique_info_batch(engine: Engine, psi: np.ndarray) -> np.ndarray:
    """Per-frame, per-check mutual information, closed form; psi [F, E].

    Uses r_i = 1 - 2 p_i = -tanh(psi_i / 2): the even-parity normalizer is
    (1 + prod r_i) / 2 and the parity-restricted marginals need only the
    leave-one-out products, so no assignment enumeration is required.
    """
    psi = np.clip(np.atleast_2d(psi), -PSI_CLAMP, PSI_CLAMP)
    mask = engine.row_mask
    rows = np.where(mask, psi[:, engine.row_edges], 0.0)
    r = np.where(mask, -np.tanh(rows / 2.0), 1.0)

    pre = np.ones_like(r)
    pre[..., 1:] = np.cumprod(r[..., :-1], axis=-1)
    suf = np.ones_like(r)
    suf[..., :-1] = np.cumprod(r[..., :0:-1], axis=-1)[..., ::-1]
    excl = pre * suf
    prod_all = pre[..., -1] * r[..., -1]

    z = np.maximum(0.5 * (1.0 + prod_all), 1e-300)  # [F, M]
    p1 = expit(rows)
    q = p1 * (0.5 * (1.0 - excl)) / z[..., None]
    q = np.clip(q, 0.0, 1.0)

    ln_p1 = -np.logaddexp(0.0, -rows)
    ln_p0 = -np.logaddexp(0.0, rows)
    cross = np.where(mask, q * ln_p1 + (1.0 - q) * ln_p0, 0.0)
    h_joint = np.log(z) - cross.sum(axis=-1)
    h_marg = np.where(mask, _h2(q), 0.0).sum(axis=-1)
    return np.maximum(h_marg - h_joint, 0.0)


def mean_mutual_information(engine: Engine, psi: np.ndarray) -> np.ndarray:
    """Mutual information per check, averaged over the frame batch."""
    return clique_info_batch(engine, psi).mean(axis=0)


def trw_objective_batch(
    engine: Engine,
    psi: np.ndarray,
    beliefs: np.ndarray,
    rho: np.ndarray,
    llr: np.ndarray,
) -> float:
    """Mean reweighted free-energy objective over a frame batch.

    F = sum_n H(b_n) - sum_m rho_m I_m + sum_n b_n(1) llr_n, with channel
    potentials normalized to phi(0) = 1 so log phi(1) = llr.  The parity
    indicator term vanishes because clique beliefs carry even-parity support
    only.
    """
    info = clique_info_batch(engine, psi)
    b1 = expit(np.clip(np.atleast_2d(beliefs), -PSI_CLAMP, PSI_CLAMP))
    llr = np.atleast_2d(llr)
    per_frame = _h2(b1).sum(axis=1) - info @ rho + (b1 * llr).sum(axis=1)
    return float(per_frame.mean())


def trw_objective(subgraph, psi: np.ndarray, beliefs: np.ndarray, rho: np.ndarray, llr_ch: np.ndarray) -> float:
    """Single-frame objective via the same closed forms."""
    graph = subgraph if isinstance(subgraph, FactorGraph) else FactorGraph(
        subgraph.to_matrix() if isinstance(subgraph, Subgraph) else subgraph
    )
    return trw_objective_batch(Engine(graph), psi[None, :], beliefs[None, :], rho, llr_ch[None, :])


class _UnionFind:
    def __init__(self):
        self.parent: dict[int, int] = {}

    def find(self, x: int) -> int:
        root = x
        while self.parent.get(root, root) != root:
            root = self.parent[root]
        while self.parent.get(x, x) != x:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a: int, b: int):
        self.parent[self.find(a)] = self.find(b)


def lmo_hyperforest(subgraph, info: np.ndarray, rho_min: float = RHO_MIN) -> np.ndarray:
    """Vertex minimizing the linearized objective -rho.I over the surrogate set.

    Greedy over checks in decreasing information order: a check is admitted
    (coefficient 1) iff all its variables lie in distinct components of the
    partial hyperforest; rejected checks get ``rho_min``.
    """
    rows = _member_rows(subgraph)
    info = np.asarray(info, dtype=np.float64)
    if info.shape != (len(rows),):
        raise ValueError("info length must equal the number of checks")
    order = np.lexsort((np.arange(len(rows)), -info))
    uf = _UnionFind()
    out = np.full(len(rows), rho_min)
    for l in order:
        members = rows[l]
        roots = {uf.find(v) for v in members}
        if len(roots) == len(members):
            out[l] = 1.0
            first = members[0]
            for v in members[1:]:
                uf.union(v, first)
    return out


def conditional_gradient_step(
    state: OptimizerState,
    info: np.ndarray,
    subgraph,
    cfg: OptimizerConfig = OptimizerConfig(),
    alpha: float | None = None,
) -> OptimizerState:
    """One Frank-Wolfe update: linearize, solve the LMO, step, record bounds.

    The lower bound is z' = max(f_lin(vertex), z); the appended objective is
    the linear objective at the new iterate under the current information
    vector.  With the diminishing rule alpha_r = 2 / (r + 2).
    """
    vertex = lmo_hyperforest(subgraph, info, cfg.rho_min)
    f_lin_star = float(-(vertex @ info))
    z_new = max(f_lin_star, state.lower_bound)
    if alpha is None:
        alpha = 2.0 / (state.recursion + 2.0)
    rho_new = np.clip(state.rho + alpha * (vertex - state.rho), cfg.rho_min, 1.0)
    return OptimizerState(
        rho=rho_new,
        recursion=state.recursion + 1,
        lower_bound=z_new,
        objective_trace=state.objective_trace + [float(-(rho_new @ info))],
        lin_bound_trace=state.lin_bound_trace + [f_lin_star],
        lower_bound_trace=state.lower_bound_trace + [z_new],
        converged=state.converged,
    )


@dataclass
class SubgraphResult:
    rho: np.ndarray
    state: OptimizerState
    is_tree: bool
    recursions: int
    converged: bool


def optimize_subgraph_faps(
    subgraph, training_llrs: np.ndarray, cfg: OptimizerConfig = OptimizerConfig()
) -> SubgraphResult:
    """Alternate message passing and conditional gradient until convergence.

    ``training_llrs`` has one row per training frame, columns in the local
    variable order of the subgraph.  Tree subgraphs short-circuit to the
    all-ones vector without any recursion.
    """
    if isinstance(subgraph, Subgraph):
        local = FactorGraph(subgraph.to_matrix())
        tree = subgraph.is_tree()
    else:
        local = subgraph if isinstance(subgraph, FactorGraph) else FactorGraph(subgraph)
        from lowbp.code_model import girth as _girth

        tree = math.isinf(_girth(local))
    n_checks = local.n_checks

    if tree:
        state = OptimizerState(rho=np.ones(n_checks), converged=True)
        return SubgraphResult(state.rho, state, True, 0, True)

    llrs = np.atleast_2d(np.asarray(training_llrs, dtype=np.float64))
    if llrs.shape[1] != local.n_vars:
        raise ValueError("training frames do not match the subgraph's variables")
    engine = Engine(local)
    state = OptimizerState(rho=np.full(n_checks, cfg.rho_init))

    for _ in range(cfg.max_recursions):
        psi, _, _ = engine.run(llrs, state.rho, cfg.mp_iterations, cfg.kernel)
        info = mean_mutual_information(engine, psi)
        alpha = None
        if cfg.step_rule == "line-search":
            alpha = _line_search_alpha(engine, llrs, state, info, cfg)
        new_state = conditional_gradient_step(state, info, local, cfg, alpha)
        delta = float(np.abs(new_state.rho - state.rho).max())
        state = new_state
        if delta < cfg.tol:
            state.converged = True
            break

    return SubgraphResult(state.rho, state, False, state.recursion, state.converged)


def _line_search_alpha(
    engine: Engine,
    llrs: np.ndarray,
    state: OptimizerState,
    info: np.ndarray,
    cfg: OptimizerConfig,
) -> float:
    """Pick the grid alpha whose re-evaluated objective (fresh message pass
    per candidate, on a pilot frame subset) is smallest."""
    vertex = lmo_hyperforest(engine.graph, info, cfg.rho_min)
    pilot = llrs[: cfg.line_search_frames]
    best_alpha, best_f = 0.0, math.inf
    for alpha in cfg.line_search_grid:
        rho_a = np.clip(state.rho + alpha * (vertex - state.rho), cfg.rho_min, 1.0)
        psi, _, bel = engine.run(pilot, rho_a, cfg.mp_iterations, cfg.kernel)
        f = trw_objective_batch(engine, psi, bel, rho_a, pilot)
        if f < best_f:
            best_alpha, best_f = float(alpha), f
    return best_alpha


def merge_faps(
    subgraph_set: SubgraphSet,
    per_subgraph: list[np.ndarray],
    pilot=None,
    disagreement_tol: float = 1e-6,
) -> np.ndarray:
    """Merge per-subgraph vectors into one global vector of length M.

    Disjoint expansions scatter directly.  Where RA subgraphs disagree on a
    check by more than ``disagreement_tol``, each candidate value is tried
    with every other check held at its candidate mean, and the one whose
    pilot decode produces the fewest bit errors wins (ties: smaller value).
    """
    m_total = subgraph_set.n_checks
    candidates: list[list[float]] = [[] for _ in range(m_total)]
    for sg, rho_t in zip(subgraph_set.subgraphs, per_subgraph):
        if len(rho_t) != sg.size:
            raise ValueError("per-subgraph vector length mismatch")
        for local, m in enumerate(sg.check_ids):
            candidates[m].append(float(rho_t[local]))
    uncovered = [m for m in range(m_total) if not candidates[m]]
    if uncovered:
        raise ValueError(f"checks covered by no subgraph: {uncovered[:8]}")

    merged = np.array([float(np.mean(c)) for c in candidates])
    disputed = [
        m for m in range(m_total) if max(candidates[m]) - min(candidates[m]) > disagreement_tol
    ]
    if not disputed:
        return merged
    if pilot is None:
        raise ValueError("subgraphs disagree; a pilot evaluation callback is required")
    for m in disputed:
        best_val, best_err = None, None
        for val in sorted(set(candidates[m])):
            trial = merged.copy()
            trial[m] = val
            err = pilot(trial)
            if best_err is None or err < best_err:
                best_val, best_err = val, err
        merged[m] = best_val
    return merged
