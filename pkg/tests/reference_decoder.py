"""Independently written textbook sum-product decoder, used as an oracle.

Plain per-node loops over adjacency lists, log-domain check update with
forward/backward partial sums.  Deliberately shares no code with the
package engine beyond numpy scalar math.
"""

import math

import numpy as np


def _ln_tanh_half(x: float) -> float:
    # ln tanh(|x|/2), -inf at x == 0
    e = math.exp(-abs(x))
    if e == 1.0:
        return -math.inf
    return math.log1p(-e) - math.log1p(e)


def _boxplus_exclude(values: list[float], llr_max: float) -> list[float]:
    """Box-plus of all entries except each position, via partial sums."""
    d = len(values)
    logs = [_ln_tanh_half(v) for v in values]
    negs = [1 if v < 0 else 0 for v in values]
    pre_log = [0.0] * (d + 1)
    pre_neg = [0] * (d + 1)
    for i in range(d):
        pre_log[i + 1] = pre_log[i] + logs[i]
        pre_neg[i + 1] = pre_neg[i] + negs[i]
    suf_log = [0.0] * (d + 1)
    suf_neg = [0] * (d + 1)
    for i in range(d - 1, -1, -1):
        suf_log[i] = suf_log[i + 1] + logs[i]
        suf_neg[i] = suf_neg[i + 1] + negs[i]
    out = []
    for i in range(d):
        s = pre_log[i] + suf_log[i + 1]
        u = -math.expm1(s)
        mag = math.inf if u == 0.0 else math.log((2.0 - u) / u)
        # parity (soft-XOR) sign for ln p(1)/p(0) messages:
        # (-1)^(negatives among the d-1 others + (d-1) + 1)
        sign = -1.0 if (pre_neg[i] + suf_neg[i + 1] + d) % 2 else 1.0
        out.append(float(np.clip(sign * mag, -llr_max, llr_max)))
    return out


def sum_product_decode(
    rows: list[list[int]],
    cols: list[list[int]],
    llr: np.ndarray,
    max_iters: int = 60,
    llr_max: float = 50.0,
):
    """Standard flooding sum-product with syndrome early stopping.

    Returns (hard_bits, converged, iterations_used, check_to_var_messages,
    posteriors) where messages are a dict (check, var) -> float.
    """
    n = len(cols)
    m = len(rows)
    lam = {(i, j): 0.0 for i in range(m) for j in rows[i]}
    mu = {(j, i): 0.0 for j in range(n) for i in cols[j]}
    hard = np.zeros(n, dtype=np.uint8)
    posterior = np.array(llr, dtype=float)
    for it in range(1, max_iters + 1):
        for j in range(n):
            for i in cols[j]:
                mu[(j, i)] = llr[j] + sum(
                    lam[(i2, j)] for i2 in cols[j] if i2 != i
                )
        for i in range(m):
            incoming = [mu[(j, i)] for j in rows[i]]
            outgoing = _boxplus_exclude(incoming, llr_max)
            for j, v in zip(rows[i], outgoing):
                lam[(i, j)] = v
        posterior = np.array(
            [llr[j] + sum(lam[(i, j)] for i in cols[j]) for j in range(n)]
        )
        hard = (posterior > 0).astype(np.uint8)
        if all(sum(int(hard[j]) for j in rows[i]) % 2 == 0 for i in range(m)):
            return hard, True, it, lam, posterior
    return hard, False, max_iters, lam, posterior
