"""End-to-end orchestration: Monte Carlo BER evaluation, the offline
reweighting pipeline, URW grid search, and result export.

Every frame's noise comes from a substream keyed by (seed, snr index,
frame index), so all decoder variants see identical noise and BER
differences between variants are attributable to the reweighting vector
alone.  All outputs are pure functions of their seeds.
"""

from __future__ import annotations

import hashlib
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from lowbp import channel
from lowbp.channel import GENERATOR_ID
from lowbp.code_model import FactorGraph, ParityCheckMatrix, gf2_nullspace, save_alist
from lowbp.decoder import RHO_MIN, Engine, check_rho
from lowbp.fap_optimizer import OptimizerConfig, merge_faps, optimize_subgraph_faps
from lowbp.subgraph_expansion import ExpansionConfig, SubgraphSet, Subgraph, peg_expand

DEFAULT_TRAINING_FRAMES = 1000
DEFAULT_MAX_ITERS = 60
DEFAULT_MIN_BIT_ERRORS = 200


@dataclass(frozen=True)
class DecoderVariant:
    """BP, uniformly reweighted (constant rho), or a per-check rho vector."""

    kind: str  # "bp" | "urw" | "low"
    rho_u: float = 1.0
    rho: np.ndarray | None = None

    def vector(self, n_checks: int) -> np.ndarray:
        if self.kind == "bp":
            return np.ones(n_checks)
        if self.kind == "urw":
            return np.full(n_checks, self.rho_u)
        if self.kind == "low":
            if self.rho is None:
                raise ValueError("LOW variant needs a rho vector")
            return check_rho(self.rho, n_checks)
        raise ValueError(f"unknown variant kind {self.kind!r}")

    @property
    def label(self) -> str:
        if self.kind == "urw":
            return f"urw({self.rho_u:g})"
        return self.kind


@dataclass(frozen=True)
class SimConfig:
    snr_points_db: tuple[float, ...]
    max_iterations: int = DEFAULT_MAX_ITERS
    max_frames: int = 10_000
    min_bit_errors: int = DEFAULT_MIN_BIT_ERRORS
    kernel: str = "jacobian"
    seed: int = 0
    batch_size: int = 256
    random_codewords: bool = False

    def __post_init__(self):
        if not self.snr_points_db:
            raise ValueError("need at least one SNR point")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")


@dataclass
class BerPoint:
    snr_db: float
    frames: int
    bit_errors: int
    frame_errors: int
    mean_iterations: float

    @property
    def ber(self) -> float:
        return 0.0 if self.frames == 0 else self.bit_errors / (self.frames * self._n)

    @property
    def fer(self) -> float:
        return 0.0 if self.frames == 0 else self.frame_errors / self.frames

    _n: int = 1

    def as_row(self) -> dict:
        return {
            "snr_db": self.snr_db,
            "frames": self.frames,
            "bit_errors": self.bit_errors,
            "frame_errors": self.frame_errors,
            "ber": self.ber,
            "fer": self.fer,
            "mean_iterations": self.mean_iterations,
        }


def code_hash(matrix: ParityCheckMatrix) -> str:
    return hashlib.sha256(save_alist(matrix)).hexdigest()[:16]


def _frame_bits(matrix: ParityCheckMatrix, cfg: SimConfig, snr_idx: int, lo: int, count: int) -> np.ndarray:
    """Transmitted codewords for frames [lo, lo+count): all-zero by default,
    random null-space combinations behind the random_codewords flag."""
    n = matrix.params.n_vars
    if not cfg.random_codewords:
        return np.zeros((count, n), dtype=np.uint8)
    basis = gf2_nullspace(matrix)
    bits = np.empty((count, n), dtype=np.uint8)
    for i in range(count):
        rng = channel.noise_rng(cfg.seed, 1, snr_idx, lo + i)
        coeff = rng.integers(0, 2, basis.shape[0]).astype(np.uint8)
        bits[i] = (coeff @ basis) % 2
    return bits


def _frame_llrs(
    matrix: ParityCheckMatrix,
    cfg: SimConfig,
    snr_idx: int,
    sigma2: float,
    lo: int,
    count: int,
) -> tuple[np.ndarray, np.ndarray]:
    n = matrix.params.n_vars
    bits = _frame_bits(matrix, cfg, snr_idx, lo, count)
    sym = 2.0 * bits - 1.0
    noise = np.empty((count, n))
    for i in range(count):
        rng = channel.noise_rng(cfg.seed, 0, snr_idx, lo + i)
        noise[i] = channel.standard_normal(rng, n)
    received = sym + math.sqrt(sigma2) * noise
    return bits, channel.channel_llr(received, sigma2)


def run_ber(
    matrix: ParityCheckMatrix,
    variant: DecoderVariant,
    cfg: SimConfig,
    engine: Engine | None = None,
) -> list[BerPoint]:
    """Monte Carlo BER/FER per SNR point with paired-noise substreams."""
    matrix.params.require_positive_rate()
    engine = engine or Engine(FactorGraph(matrix))
    rho = variant.vector(matrix.params.n_checks)
    n = matrix.params.n_vars
    rate = matrix.params.rate
    points = []
    for snr_idx, snr_db in enumerate(cfg.snr_points_db):
        sigma2 = channel.snr_to_sigma2(snr_db, rate)
        frames = bit_errors = frame_errors = 0
        iter_total = 0
        while frames < cfg.max_frames and bit_errors < cfg.min_bit_errors:
            count = min(cfg.batch_size, cfg.max_frames - frames)
            bits, llrs = _frame_llrs(matrix, cfg, snr_idx, sigma2, frames, count)
            res = engine.decode_batch(llrs, rho, cfg.max_iterations, cfg.kernel)
            errs = (res.hard_decision != bits).sum(axis=1)
            bit_errors += int(errs.sum())
            frame_errors += int((errs > 0).sum())
            iter_total += int(res.iterations_used.sum())
            frames += count
        point = BerPoint(snr_db, frames, bit_errors, frame_errors, iter_total / max(frames, 1))
        point._n = n
        points.append(point)
    return points


def run_paired_ber(
    matrix: ParityCheckMatrix,
    variants: dict[str, DecoderVariant],
    cfg: SimConfig,
) -> dict[str, tuple[list[BerPoint], list[np.ndarray]]]:
    """Run several variants over identical noise; also returns per-frame
    bit-error counts (one array per SNR point) for paired comparisons."""
    engine = Engine(FactorGraph(matrix))
    n = matrix.params.n_vars
    out: dict[str, tuple[list[BerPoint], list[np.ndarray]]] = {}
    for name, variant in variants.items():
        rho = variant.vector(matrix.params.n_checks)
        points, per_frame_all = [], []
        for snr_idx, snr_db in enumerate(cfg.snr_points_db):
            sigma2 = channel.snr_to_sigma2(snr_db, matrix.params.rate)
            per_frame = np.zeros(cfg.max_frames, dtype=np.int64)
            frames = 0
            iter_total = 0
            while frames < cfg.max_frames:
                count = min(cfg.batch_size, cfg.max_frames - frames)
                bits, llrs = _frame_llrs(matrix, cfg, snr_idx, sigma2, frames, count)
                res = engine.decode_batch(llrs, rho, cfg.max_iterations, cfg.kernel)
                per_frame[frames : frames + count] = (res.hard_decision != bits).sum(axis=1)
                iter_total += int(res.iterations_used.sum())
                frames += count
            point = BerPoint(
                snr_db,
                frames,
                int(per_frame.sum()),
                int((per_frame > 0).sum()),
                iter_total / max(frames, 1),
            )
            point._n = n
            points.append(point)
            per_frame_all.append(per_frame)
        out[name] = (points, per_frame_all)
    return out


@dataclass
class OfflineResult:
    rho: np.ndarray
    subgraph_set: SubgraphSet
    per_subgraph: list
    artifact: dict


def run_offline(
    matrix: ParityCheckMatrix,
    strategy: str = "disjoint",
    d_max: int = 2,
    snr_db: float = 2.0,
    seed: int = 0,
    training_frames: int = DEFAULT_TRAINING_FRAMES,
    opt_cfg: OptimizerConfig = OptimizerConfig(step_rule="line-search"),
    whole_graph: bool = False,
    rho_init_override: float | None = None,
    pilot_frames: int = 128,
) -> OfflineResult:
    """Offline pipeline: expand, generate training frames, optimize each
    subgraph, merge, and assemble the artifact document."""
    matrix.params.require_positive_rate()
    graph = FactorGraph(matrix)
    n, m = matrix.params.n_vars, matrix.params.n_checks

    if whole_graph:
        whole = Subgraph(
            list(range(m)),
            sorted(set(graph.edge_var.tolist())),
            [tuple(e) for e in graph.edges.tolist()],
            root=0,
        )
        from lowbp.code_model import girth as _girth

        subgraph_set = SubgraphSet([whole], strategy, d_max, seed, _girth(graph), m)
    else:
        subgraph_set = peg_expand(graph, ExpansionConfig(strategy, d_max, seed))

    sigma2 = channel.snr_to_sigma2(snr_db, matrix.params.rate)
    llrs = np.empty((training_frames, n))
    for f in range(training_frames):
        rng = channel.noise_rng(seed, 2, f)
        noise = channel.standard_normal(rng, n)
        llrs[f] = channel.channel_llr(-1.0 + math.sqrt(sigma2) * noise, sigma2)

    if rho_init_override is not None:
        opt_cfg = OptimizerConfig(
            **{**opt_cfg.__dict__, "rho_init": float(rho_init_override)}
        )

    results = []
    for sg in subgraph_set.subgraphs:
        results.append(optimize_subgraph_faps(sg, llrs[:, sg.var_ids], opt_cfg))

    def pilot(rho_trial: np.ndarray) -> int:
        engine = Engine(graph)
        pilot_llrs = llrs[:pilot_frames]
        res = engine.decode_batch(pilot_llrs, rho_trial, DEFAULT_MAX_ITERS, opt_cfg.kernel)
        return int(res.hard_decision.sum())

    rho = merge_faps(subgraph_set, [r.rho for r in results], pilot)
    rho = np.clip(rho, opt_cfg.rho_min, 1.0)

    artifact = {
        "code_hash": code_hash(matrix),
        "snr_db": snr_db,
        "strategy": subgraph_set.strategy,
        "d_max": d_max,
        "seeds": {"expansion": seed, "training": seed, "generator": GENERATOR_ID},
        "step_rule": opt_cfg.step_rule,
        "rho": [float(x) for x in rho],
        "per_subgraph": [
            {
                "check_ids": sg.check_ids,
                "rho_t": [float(x) for x in r.rho],
                "recursions": r.recursions,
                "converged": bool(r.converged),
            }
            for sg, r in zip(subgraph_set.subgraphs, results)
        ],
        "meta": {
            "training_frames": training_frames,
            "mp_iterations": opt_cfg.mp_iterations,
            "kernel": opt_cfg.kernel,
            "rho_init": opt_cfg.rho_init,
            "whole_graph": whole_graph,
        },
    }
    return OfflineResult(rho, subgraph_set, results, artifact)


def save_artifact(result_or_doc, path: str):
    doc = result_or_doc.artifact if isinstance(result_or_doc, OfflineResult) else result_or_doc
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")


def load_artifact(path: str, matrix: ParityCheckMatrix | None = None) -> dict:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if matrix is not None and doc.get("code_hash") != code_hash(matrix):
        raise ValueError("rho artifact was produced for a different code")
    return doc


def grid_search_urw(
    matrix: ParityCheckMatrix,
    snr_db: float,
    grid: tuple[float, ...] = (0.7, 0.8, 0.9, 1.0),
    cfg: SimConfig | None = None,
) -> float:
    """Constant reweighting value with the fewest bit errors; ties favor the
    larger value (closer to plain BP)."""
    if not grid:
        raise ValueError("grid must be nonempty")
    cfg = cfg or SimConfig((snr_db,), max_frames=2000, min_bit_errors=10**9)
    cfg = SimConfig(**{**cfg.__dict__, "snr_points_db": (snr_db,)})
    engine = Engine(FactorGraph(matrix))
    best_rho, best_err = None, None
    for rho_u in sorted(grid):
        point = run_ber(matrix, DecoderVariant("urw", rho_u=rho_u), cfg, engine)[0]
        if best_err is None or point.bit_errors <= best_err:
            best_rho, best_err = rho_u, point.bit_errors
    return float(best_rho)


CSV_COLUMNS = ("snr_db", "frames", "bit_errors", "frame_errors", "ber", "fer", "mean_iterations")


def export_results(points: list[BerPoint], fmt: str = "csv") -> bytes:
    """BER points as CSV (stable column order) or JSON."""
    if fmt == "json":
        return json.dumps([p.as_row() for p in points], indent=1, sort_keys=True).encode()
    if fmt != "csv":
        raise ValueError("format must be 'csv' or 'json'")
    buf = io.StringIO()
    buf.write(",".join(CSV_COLUMNS) + "\n")
    for p in points:
        row = p.as_row()
        buf.write(
            "%.6g,%d,%d,%d,%.8g,%.8g,%.6g\n"
            % tuple(row[c] for c in CSV_COLUMNS)
        )
    return buf.getvalue().encode()


def parse_results_csv(data: bytes) -> list[dict]:
    lines = data.decode().strip().splitlines()
    header = lines[0].split(",")
    out = []
    for line in lines[1:]:
        vals = line.split(",")
        row = dict(zip(header, vals))
        out.append(
            {
                "snr_db": float(row["snr_db"]),
                "frames": int(row["frames"]),
                "bit_errors": int(row["bit_errors"]),
                "frame_errors": int(row["frame_errors"]),
                "ber": float(row["ber"]),
                "fer": float(row["fer"]),
                "mean_iterations": float(row["mean_iterations"]),
            }
        )
    return out


def export_rho_histogram(artifact: dict, bin_width: float = 0.05) -> bytes:
    """Nonzero histogram bins of the artifact's rho values as CSV."""
    rho = np.asarray(artifact["rho"], dtype=np.float64)
    n_bins = int(round(1.0 / bin_width))
    idx = np.minimum((rho / bin_width).astype(int), n_bins - 1)
    buf = io.StringIO()
    buf.write("bin_left,bin_right,count\n")
    for b in range(n_bins):
        count = int((idx == b).sum())
        if count:
            buf.write("%.6g,%.6g,%d\n" % (b * bin_width, (b + 1) * bin_width, count))
    return buf.getvalue().encode()


def paired_sign_test(errors_a: np.ndarray, errors_b: np.ndarray) -> float:
    """One-sided p-value that variant B beats variant A on paired frames,
    via an exact sign test on discordant frames."""
    from scipy.stats import binomtest

    wins = int((errors_b < errors_a).sum())
    losses = int((errors_b > errors_a).sum())
    if wins + losses == 0:
        return 1.0
    return float(binomtest(wins, wins + losses, alternative="greater").pvalue)
