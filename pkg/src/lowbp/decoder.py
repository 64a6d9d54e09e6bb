"""Reweighted LLR message passing for LDPC decoding.

Flooding-schedule update rules with a per-check reweighting coefficient
rho in (0, 1]; rho = 1 on every check recovers the standard sum-product
algorithm, a constant rho gives its uniformly reweighted variant.  Two
numerically distinct check-node kernels are provided: a log-domain
hyperbolic tangent form and the pairwise Jacobian (max-star) recursion.
Kernel outputs saturate at ``LLR_MAX`` so no finite input can produce NaN.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from lowbp.code_model import FactorGraph, ParityCheckMatrix

LLR_MAX = 50.0
RHO_MIN = 0.05
KERNELS = ("tanh", "jacobian")


def check_rho(rho: np.ndarray, n_checks: int, rho_min: float = RHO_MIN) -> np.ndarray:
    """Validate a reweighting vector: shape M, entries in [rho_min, 1]."""
    rho = np.asarray(rho, dtype=np.float64)
    if rho.shape != (n_checks,):
        raise ValueError(f"rho must have shape ({n_checks},), got {rho.shape}")
    if not np.isfinite(rho).all():
        raise ValueError("rho entries must be finite")
    if rho.min() < rho_min - 1e-12 or rho.max() > 1.0 + 1e-12:
        raise ValueError(f"rho entries must lie in [{rho_min}, 1]")
    return np.clip(rho, rho_min, 1.0)


def f_boxplus(llrs, kernel: str = "tanh") -> float:
    """Box-plus combination of one or more LLRs.

    tanh kernel: 2 atanh(prod tanh(l_i / 2)), evaluated in the log domain so
    near-saturated inputs keep full precision.  jacobian kernel: pairwise
    max-star recursion.  Both saturate at +-LLR_MAX.
    """
    arr = np.atleast_1d(np.asarray(llrs, dtype=np.float64))
    if arr.size == 0:
        raise ValueError("box-plus needs at least one input")
    if kernel == "tanh":
        if np.any(arr == 0.0):
            return 0.0
        a = np.abs(arr)
        with np.errstate(divide="ignore"):
            e2 = np.exp(-a)
            log_mag = float(np.sum(np.log1p(-e2) - np.log1p(e2)))
        u = -math.expm1(log_mag)  # 1 - |prod tanh|, exact for tiny gaps
        mag = math.inf if u == 0.0 else math.log((2.0 - u) / u)
        sign = -1.0 if int(np.count_nonzero(arr < 0)) % 2 else 1.0
        return float(np.clip(sign * mag, -LLR_MAX, LLR_MAX))
    if kernel == "jacobian":
        acc = float(arr[0])
        for x in arr[1:]:
            acc = _maxstar(acc, float(x))
        return float(np.clip(acc, -LLR_MAX, LLR_MAX))
    raise ValueError(f"unknown kernel {kernel!r}")


def _maxstar(a: float, b: float) -> float:
    s = a + b
    d = a - b
    return (
        max(s, 0.0)
        - max(a, b)
        + math.log1p(math.exp(-abs(s)))
        - math.log1p(math.exp(-abs(d)))
    )


@dataclass
class BeliefState:
    """Single-frame message state, indexed by the graph's stable edge ids."""

    graph: FactorGraph
    var_to_check: np.ndarray
    check_to_var: np.ndarray
    beliefs: np.ndarray
    iteration: int = 0

    @classmethod
    def initial(cls, graph: FactorGraph) -> "BeliefState":
        e, n = graph.n_edges, graph.n_vars
        return cls(graph, np.zeros(e), np.zeros(e), np.zeros(n), 0)


@dataclass
class DecodeResult:
    hard_decision: np.ndarray
    converged: bool
    iterations_used: int
    final_beliefs: np.ndarray


class Engine:
    """Vectorized message-passing engine for one factor graph.

    Message arrays have shape [batch, n_edges]; all updates are pure
    functions of the previous state, so frames in a batch are independent
    and results do not depend on batch composition.
    """

    def __init__(self, graph: FactorGraph, llr_max: float = LLR_MAX):
        self.graph = graph
        self.llr_max = float(llr_max)
        self.edge_check = graph.edge_check
        self.edge_var = graph.edge_var
        e = graph.n_edges
        m = graph.n_checks

        # per-check padded layout, valid slots left-packed
        self.dmax = max(len(r) for r in graph.row_edge_ids)
        self.row_edges = np.zeros((m, self.dmax), dtype=np.int64)
        self.row_mask = np.zeros((m, self.dmax), dtype=bool)
        self.edge_slot = np.zeros(e, dtype=np.int64)
        for mm, ids in enumerate(graph.row_edge_ids):
            self.row_edges[mm, : len(ids)] = ids
            self.row_mask[mm, : len(ids)] = True
            for k, eid in enumerate(ids):
                self.edge_slot[eid] = k
        self.row_vars = self.edge_var[self.row_edges]
        self.row_deg = self.row_mask.sum(axis=1)

        # edge permutation grouping by variable, for per-variable sums
        self.var_perm = np.lexsort((self.edge_check, self.edge_var))
        counts = np.bincount(self.edge_var, minlength=graph.n_vars)
        self.var_starts = np.concatenate(([0], np.cumsum(counts)[:-1]))

    def _var_sums(self, values: np.ndarray) -> np.ndarray:
        """Sum edge values per variable; values [B, E] -> [B, N]."""
        return np.add.reduceat(values[:, self.var_perm], self.var_starts, axis=1)

    def variable_messages(
        self, llr_ch: np.ndarray, check_to_var: np.ndarray, rho: np.ndarray
    ) -> np.ndarray:
        """Psi = llr + sum_{m' != m} rho_m' Lambda_m'n - (1 - rho_m) Lambda_mn.

        The excluded rho_m Lambda_mn term and the -(1 - rho_m) Lambda_mn
        feedback term combine into a single -Lambda_mn.
        """
        weighted = rho[self.edge_check] * check_to_var
        sums = self._var_sums(weighted)
        return llr_ch[:, self.edge_var] + sums[:, self.edge_var] - check_to_var

    def beliefs(
        self, llr_ch: np.ndarray, check_to_var: np.ndarray, rho: np.ndarray
    ) -> np.ndarray:
        weighted = rho[self.edge_check] * check_to_var
        return llr_ch + self._var_sums(weighted)

    def check_messages(
        self, var_to_check: np.ndarray, rho: np.ndarray, kernel: str
    ) -> np.ndarray:
        """Lambda = boxplus over {rho_m Psi_n'm, n' != n} - (1 - rho_m) Psi_nm.

        With the positive-favors-one LLR convention the parity (soft-XOR)
        combination is the conjugated form K(x) = -boxplus(-x); without the
        conjugation the message sign is wrong whenever the number of combined
        inputs is even.  A degree-1 check has an empty input set and emits the
        saturated kernel value.
        """
        arg = rho[self.edge_check] * var_to_check
        if kernel == "tanh":
            kernel_val = self._boxplus_tanh(arg)
        elif kernel == "jacobian":
            kernel_val = self._boxplus_jacobian(arg)
        else:
            raise ValueError(f"unknown kernel {kernel!r}")
        return kernel_val - (1.0 - rho)[self.edge_check] * var_to_check

    def _boxplus_tanh(self, arg: np.ndarray) -> np.ndarray:
        b = arg.shape[0]
        a = np.abs(arg)
        with np.errstate(divide="ignore"):
            e2 = np.exp(-a)
            lnt = np.log1p(-e2) - np.log1p(e2)  # -inf at arg == 0 absorbs the row
        rows = np.where(self.row_mask, lnt[:, self.row_edges], 0.0)
        pre = np.zeros_like(rows)
        pre[..., 1:] = np.cumsum(rows[..., :-1], axis=-1)
        suf = np.zeros_like(rows)
        suf[..., :-1] = np.cumsum(rows[..., :0:-1], axis=-1)[..., ::-1]
        s_excl = (pre + suf)[:, self.edge_check, self.edge_slot]

        # sign of the conjugated parity form: (-1)^(neg_excl + c + 1) with c
        # combined inputs, i.e. exponent neg_excl + row degree
        neg = (arg < 0).astype(np.int64)
        neg_rows = np.where(self.row_mask, neg[:, self.row_edges], 0)
        neg_excl = neg_rows.sum(axis=-1)[:, self.edge_check] - neg
        exponent = neg_excl + self.row_deg[self.edge_check]
        sign = 1.0 - 2.0 * (exponent & 1)

        with np.errstate(divide="ignore", invalid="ignore"):
            u = -np.expm1(s_excl)  # 1 - |prod tanh|
            mag = np.log((2.0 - u) / u)
        mag = np.where(u == 0.0, np.inf, mag)
        out = np.clip(sign * mag, -self.llr_max, self.llr_max)
        return out.reshape(b, -1)

    def _boxplus_jacobian(self, arg: np.ndarray) -> np.ndarray:
        b = arg.shape[0]
        # conjugated parity form: negate inputs, max-star, negate the result
        rows = np.where(self.row_mask, -arg[:, self.row_edges], 0.0)
        d = self.dmax
        mask = np.broadcast_to(self.row_mask, rows.shape)

        # prefix over valid slots (left-packed, so no masking needed)
        pre = np.zeros_like(rows)
        pre_started = np.zeros(d, dtype=bool)
        acc = None
        for k in range(1, d):
            acc = rows[..., k - 1] if k == 1 else _maxstar_array(acc, rows[..., k - 1])
            pre[..., k] = acc
            pre_started[k] = True

        # suffix needs masking: the last valid slot varies per check
        suf = np.zeros_like(rows)
        suf_started = np.zeros(mask.shape, dtype=bool)
        acc = np.zeros(rows.shape[:-1])
        for k in reversed(range(d)):
            suf[..., k] = acc
            if k + 1 < d:
                suf_started[..., k] = mask[..., k + 1]
            xk = rows[..., k]
            last_valid = mask[..., k] & (~mask[..., k + 1] if k + 1 < d else True)
            combined = _maxstar_array(acc, xk)
            acc = np.where(last_valid, xk, np.where(mask[..., k], combined, acc))

        both = pre_started[None, None, :] & suf_started
        only_pre = pre_started[None, None, :] & ~suf_started
        only_suf = ~pre_started[None, None, :] & suf_started
        excl = np.where(
            both,
            _maxstar_array(pre, suf),
            np.where(only_pre, pre, np.where(only_suf, suf, np.inf)),
        )
        per_edge = -excl[:, self.edge_check, self.edge_slot]
        return np.clip(per_edge, -self.llr_max, self.llr_max).reshape(b, -1)

    def syndrome_ok(self, hard: np.ndarray) -> np.ndarray:
        """True per frame iff every check's parity is even; hard [B, N]."""
        bits_rows = hard[:, self.row_vars] & self.row_mask
        parity = bits_rows.sum(axis=-1) & 1
        return ~parity.any(axis=-1)

    def run(
        self,
        llr_ch: np.ndarray,
        rho: np.ndarray,
        iterations: int,
        kernel: str = "jacobian",
    ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Fixed-iteration message passing; returns (psi, lambda, beliefs)."""
        llr_ch = np.atleast_2d(np.asarray(llr_ch, dtype=np.float64))
        b = llr_ch.shape[0]
        lam = np.zeros((b, self.graph.n_edges))
        psi = np.zeros_like(lam)
        for _ in range(iterations):
            psi = self.variable_messages(llr_ch, lam, rho)
            lam = self.check_messages(psi, rho, kernel)
        return psi, lam, self.beliefs(llr_ch, lam, rho)

    def decode_batch(
        self,
        llr_ch: np.ndarray,
        rho: np.ndarray,
        max_iters: int = 60,
        kernel: str = "jacobian",
    ) -> "BatchDecodeResult":
        """Decode a batch of frames with syndrome-based early stopping."""
        llr_ch = np.atleast_2d(np.asarray(llr_ch, dtype=np.float64))
        b, n = llr_ch.shape
        if n != self.graph.n_vars:
            raise ValueError("llr length does not match the code block length")
        rho = check_rho(rho, self.graph.n_checks)
        if max_iters < 1:
            raise ValueError("max_iters must be >= 1")

        hard_out = np.zeros((b, n), dtype=np.uint8)
        beliefs_out = np.zeros((b, n))
        converged = np.zeros(b, dtype=bool)
        iters_out = np.full(b, max_iters, dtype=np.int64)

        active = np.arange(b)
        lam = np.zeros((len(active), self.graph.n_edges))
        llr_act = llr_ch
        for it in range(1, max_iters + 1):
            psi = self.variable_messages(llr_act, lam, rho)
            lam = self.check_messages(psi, rho, kernel)
            bel = self.beliefs(llr_act, lam, rho)
            hard = (bel > 0).astype(np.uint8)
            ok = self.syndrome_ok(hard)

            done = np.flatnonzero(ok)
            if done.size:
                idx = active[done]
                hard_out[idx] = hard[done]
                beliefs_out[idx] = bel[done]
                converged[idx] = True
                iters_out[idx] = it
            keep = np.flatnonzero(~ok)
            if keep.size == 0:
                return BatchDecodeResult(hard_out, converged, iters_out, beliefs_out)
            if it == max_iters:
                idx = active[keep]
                hard_out[idx] = hard[keep]
                beliefs_out[idx] = bel[keep]
            elif keep.size < len(active):
                active = active[keep]
                lam = lam[keep]
                llr_act = llr_act[keep]
        return BatchDecodeResult(hard_out, converged, iters_out, beliefs_out)


def _maxstar_array(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    s = a + b
    d = a - b
    return (
        np.maximum(s, 0.0)
        - np.maximum(a, b)
        + np.log1p(np.exp(-np.abs(s)))
        - np.log1p(np.exp(-np.abs(d)))
    )


@dataclass
class BatchDecodeResult:
    hard_decision: np.ndarray
    converged: np.ndarray
    iterations_used: np.ndarray
    final_beliefs: np.ndarray

    @property
    def mean_iterations(self) -> float:
        return float(self.iterations_used.mean())


def _as_graph(code: FactorGraph | ParityCheckMatrix) -> FactorGraph:
    return code if isinstance(code, FactorGraph) else FactorGraph(code)


def variable_update(state: BeliefState, llr_ch: np.ndarray, rho: np.ndarray) -> np.ndarray:
    """One flooding variable-node update; returns the new var-to-check array."""
    eng = Engine(state.graph)
    rho = check_rho(rho, state.graph.n_checks)
    out = eng.variable_messages(
        np.asarray(llr_ch, dtype=np.float64)[None, :], state.check_to_var[None, :], rho
    )
    return out[0]


def check_update(state: BeliefState, rho: np.ndarray, kernel: str = "tanh") -> np.ndarray:
    """One flooding check-node update; returns the new check-to-var array."""
    eng = Engine(state.graph)
    rho = check_rho(rho, state.graph.n_checks)
    return eng.check_messages(state.var_to_check[None, :], rho, kernel)[0]


def belief_update(state: BeliefState, llr_ch: np.ndarray, rho: np.ndarray) -> np.ndarray:
    """Per-variable beliefs from the current check-to-var messages."""
    eng = Engine(state.graph)
    rho = check_rho(rho, state.graph.n_checks)
    out = eng.beliefs(
        np.asarray(llr_ch, dtype=np.float64)[None, :], state.check_to_var[None, :], rho
    )
    return out[0]


def syndrome(matrix: ParityCheckMatrix, bits: np.ndarray) -> np.ndarray:
    """Per-check parity of ``bits``: entry m is the XOR over row m."""
    bits = np.asarray(bits).astype(np.int64)
    if bits.shape != (matrix.params.n_vars,):
        raise ValueError("bits length does not match the code block length")
    return np.array([bits[row].sum() & 1 for row in matrix.rows], dtype=np.uint8)


def decode(
    code: FactorGraph | ParityCheckMatrix,
    llr_ch: np.ndarray,
    rho: np.ndarray,
    max_iters: int = 60,
    kernel: str = "jacobian",
) -> DecodeResult:
    """Decode one frame; stops early as soon as the syndrome is zero."""
    graph = _as_graph(code)
    res = Engine(graph).decode_batch(
        np.asarray(llr_ch, dtype=np.float64)[None, :], rho, max_iters, kernel
    )
    return DecodeResult(
        res.hard_decision[0],
        bool(res.converged[0]),
        int(res.iterations_used[0]),
        res.final_beliefs[0],
    )
