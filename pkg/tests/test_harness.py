import json
import math

import numpy as np
import pytest

from lowbp.channel import snr_to_sigma2
from lowbp.code_model import CodeParams, DegreeProfile, peg_construct
from lowbp.fap_optimizer import OptimizerConfig
from lowbp.harness import (
    BerPoint,
    DecoderVariant,
    SimConfig,
    code_hash,
    export_results,
    export_rho_histogram,
    grid_search_urw,
    load_artifact,
    paired_sign_test,
    parse_results_csv,
    run_ber,
    run_offline,
    run_paired_ber,
    save_artifact,
)

FAST_OPT = OptimizerConfig(max_recursions=6, mp_iterations=6, line_search_frames=20)


class TestRunBer:
    def test_noiseless_regime_zero_errors(self, small_regular):
        cfg = SimConfig((12.0,), max_frames=60, min_bit_errors=1, seed=5)
        points = run_ber(small_regular, DecoderVariant("bp"), cfg)
        assert points[0].bit_errors == 0
        assert points[0].ber == 0.0
        assert points[0].mean_iterations == 1.0

    def test_bp_equals_low_with_unit_rho(self, small_regular):
        cfg = SimConfig((2.0,), max_frames=150, min_bit_errors=10**9, seed=6)
        a = run_ber(small_regular, DecoderVariant("bp"), cfg)
        b = run_ber(
            small_regular,
            DecoderVariant("low", rho=np.ones(small_regular.params.n_checks)),
            cfg,
        )
        assert a[0].bit_errors == b[0].bit_errors
        assert a[0].frame_errors == b[0].frame_errors
        assert a[0].mean_iterations == b[0].mean_iterations

    def test_deterministic_given_seed(self, small_regular):
        cfg = SimConfig((2.0,), max_frames=100, min_bit_errors=10**9, seed=7)
        a = run_ber(small_regular, DecoderVariant("bp"), cfg)
        b = run_ber(small_regular, DecoderVariant("bp"), cfg)
        assert export_results(a) == export_results(b)

    def test_batch_size_does_not_change_results(self, small_regular):
        base = SimConfig((2.0,), max_frames=90, min_bit_errors=10**9, seed=8, batch_size=64)
        alt = SimConfig((2.0,), max_frames=90, min_bit_errors=10**9, seed=8, batch_size=7)
        a = run_ber(small_regular, DecoderVariant("bp"), base)
        b = run_ber(small_regular, DecoderVariant("bp"), alt)
        assert export_results(a) == export_results(b)

    def test_stops_at_min_bit_errors(self, small_regular):
        cfg = SimConfig((0.0,), max_frames=5000, min_bit_errors=50, seed=9, batch_size=32)
        point = run_ber(small_regular, DecoderVariant("bp"), cfg)[0]
        assert point.bit_errors >= 50
        assert point.frames < 5000

    def test_mean_iterations_bounded(self, small_regular):
        cfg = SimConfig((1.0,), max_iterations=12, max_frames=60, min_bit_errors=10**9, seed=10)
        point = run_ber(small_regular, DecoderVariant("bp"), cfg)[0]
        assert point.mean_iterations <= 12.0

    def test_random_codeword_flag(self, small_regular):
        cfg = SimConfig(
            (10.0,), max_frames=30, min_bit_errors=10**9, seed=11, random_codewords=True
        )
        point = run_ber(small_regular, DecoderVariant("bp"), cfg)[0]
        assert point.bit_errors == 0  # decodes random codewords at high SNR


class TestPairedProtocol:
    def test_same_noise_across_variants(self, small_regular):
        cfg = SimConfig((2.0,), max_frames=80, min_bit_errors=10**9, seed=12)
        out = run_paired_ber(
            small_regular,
            {"bp": DecoderVariant("bp"), "low1": DecoderVariant("low", rho=np.ones(24))},
            cfg,
        )
        a_pts, a_frames = out["bp"]
        b_pts, b_frames = out["low1"]
        assert np.array_equal(a_frames[0], b_frames[0])
        assert a_pts[0].bit_errors == b_pts[0].bit_errors

    def test_sign_test_pvalues(self):
        a = np.array([3, 0, 0, 2, 1, 4, 0, 0])
        assert paired_sign_test(a, a) == 1.0
        better = np.zeros(8, dtype=int)
        assert paired_sign_test(np.ones(200, dtype=int), np.zeros(200, dtype=int)) < 1e-6
        assert paired_sign_test(a, a + 1) == 1.0


class TestOffline:
    def test_artifact_round_trip(self, small_regular, tmp_path):
        result = run_offline(
            small_regular, d_max=2, snr_db=2.0, seed=3, training_frames=40, opt_cfg=FAST_OPT
        )
        path = tmp_path / "rho.json"
        save_artifact(result, str(path))
        doc = load_artifact(str(path), small_regular)
        assert doc["code_hash"] == code_hash(small_regular)
        assert len(doc["rho"]) == small_regular.params.n_checks
        assert all(0.05 - 1e-12 <= r <= 1.0 + 1e-12 for r in doc["rho"])

    def test_artifact_rejected_for_other_code(self, small_regular, tmp_path):
        other = peg_construct(CodeParams(48, 24), DegreeProfile.regular(3, 6), seed=99)
        result = run_offline(
            small_regular, d_max=2, snr_db=2.0, seed=3, training_frames=40, opt_cfg=FAST_OPT
        )
        path = tmp_path / "rho.json"
        save_artifact(result, str(path))
        with pytest.raises(ValueError):
            load_artifact(str(path), other)

    def test_byte_identical_artifacts(self, small_regular, tmp_path):
        p1, p2 = tmp_path / "a.json", tmp_path / "b.json"
        for path in (p1, p2):
            result = run_offline(
                small_regular, d_max=2, snr_db=2.0, seed=3, training_frames=40, opt_cfg=FAST_OPT
            )
            save_artifact(result, str(path))
        assert p1.read_bytes() == p2.read_bytes()

    def test_tree_code_rho_is_all_ones(self):
        from lowbp.code_model import ParityCheckMatrix

        h = ParityCheckMatrix.from_rows(7, [[0, 1, 2], [2, 3, 4], [4, 5, 6]])
        result = run_offline(h, d_max=2, snr_db=2.0, seed=1, training_frames=20, opt_cfg=FAST_OPT)
        assert (result.rho == 1.0).all()

    def test_whole_graph_mode(self, small_regular):
        result = run_offline(
            small_regular,
            snr_db=2.0,
            seed=4,
            training_frames=30,
            opt_cfg=FAST_OPT,
            whole_graph=True,
        )
        assert len(result.subgraph_set.subgraphs) == 1
        assert result.subgraph_set.subgraphs[0].size == small_regular.params.n_checks


class TestUrwGrid:
    def test_degenerate_grid(self, small_regular):
        cfg = SimConfig((2.0,), max_frames=40, min_bit_errors=10**9, seed=13)
        assert grid_search_urw(small_regular, 2.0, (1.0,), cfg) == 1.0

    def test_tie_prefers_larger(self, small_regular):
        # at very high SNR every candidate decodes perfectly: tie -> 1.0
        cfg = SimConfig((12.0,), max_frames=30, min_bit_errors=10**9, seed=14)
        assert grid_search_urw(small_regular, 12.0, (0.7, 0.8, 0.9, 1.0), cfg) == 1.0


class TestExports:
    def test_empty_points_header_only(self):
        data = export_results([])
        assert data.decode().strip() == "snr_db,frames,bit_errors,frame_errors,ber,fer,mean_iterations"

    def test_single_point_two_lines(self):
        p = BerPoint(2.0, 100, 42, 7, 11.5)
        p._n = 48
        data = export_results([p])
        lines = data.decode().strip().splitlines()
        assert len(lines) == 2
        row = parse_results_csv(data)[0]
        assert row["bit_errors"] == 42
        assert row["ber"] == pytest.approx(42 / (100 * 48))

    def test_json_round_trip(self):
        p = BerPoint(2.5, 10, 1, 1, 3.0)
        p._n = 10
        rows = json.loads(export_results([p], "json"))
        assert rows[0]["frame_errors"] == 1

    def test_histogram_all_ones_single_bin(self):
        artifact = {"rho": [1.0] * 250}
        lines = export_rho_histogram(artifact, 0.05).decode().strip().splitlines()
        assert lines[0] == "bin_left,bin_right,count"
        assert len(lines) == 2
        left, right, count = lines[1].split(",")
        assert float(left) == pytest.approx(0.95)
        assert float(right) == pytest.approx(1.0)
        assert int(count) == 250

    def test_histogram_counts_sum(self):
        rng = np.random.default_rng(0)
        artifact = {"rho": rng.uniform(0.05, 1.0, 123).tolist()}
        rows = export_rho_histogram(artifact, 0.1).decode().strip().splitlines()[1:]
        assert sum(int(r.split(",")[2]) for r in rows) == 123
