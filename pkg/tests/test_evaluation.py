import math

import numpy as np
import pytest
import torch

from destrike.evaluation import (
    IdentityCleaner,
    MetricSummary,
    PixelCounts,
    detection_rate,
    evaluate_model,
    evaluate_pairs,
    f1_score,
    format_mean_std,
    mean_image,
    pixel_counts,
    recognition_accuracy,
    report_table,
    rmse,
    summarize_runs,
    write_records_csv,
    write_summary_csv,
)
from destrike.imaging import BinaryImage, GrayImage, Polarity
from destrike.models import Model, reference_config

from conftest import native_frame_pairs


def mask(rows, shape=(3, 3)):
    m = np.zeros(shape, dtype=bool)
    for r, c in rows:
        m[r, c] = True
    return BinaryImage(m)


class TestPixelCounts:
    def test_identical_masks(self):
        m = mask([(0, 0), (1, 1), (2, 2), (0, 2), (2, 0), (1, 0), (0, 1)])
        c = pixel_counts(m, m)
        assert (c.n, c.m, c.o2o) == (7, 7, 7)

    def test_disjoint_masks(self):
        a = mask([(0, 0), (0, 1)])
        b = mask([(2, 2)])
        assert pixel_counts(a, b).o2o == 0

    def test_prediction_inside_truth(self):
        # hand-counted 3x3 fixture: truth 4 ink, prediction 2 fully inside
        truth = mask([(0, 0), (0, 1), (1, 0), (1, 1)])
        pred = mask([(0, 0), (1, 1)])
        c = pixel_counts(pred, truth)
        assert (c.n, c.m, c.o2o) == (4, 2, 2)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            pixel_counts(mask([], (2, 2)), mask([], (3, 3)))

    def test_inconsistent_counts_rejected(self):
        with pytest.raises(ValueError):
            PixelCounts(n=1, m=1, o2o=2)


class TestRates:
    def test_detection_rate_fixture(self):
        assert detection_rate(PixelCounts(4, 2, 2)) == 0.5

    def test_detection_rate_perfect(self):
        assert detection_rate(PixelCounts(7, 7, 7)) == 1.0

    def test_recognition_accuracy_fixture(self):
        assert recognition_accuracy(PixelCounts(4, 2, 2)) == 1.0

    def test_recognition_accuracy_superset(self):
        # prediction covers truth but doubles the ink
        assert recognition_accuracy(PixelCounts(4, 8, 4)) == 0.5

    def test_degenerate_both_blank(self):
        c = PixelCounts(0, 0, 0)
        assert detection_rate(c) == recognition_accuracy(c) == f1_score(c) == 1.0

    def test_degenerate_one_blank(self):
        assert detection_rate(PixelCounts(0, 5, 0)) == 0.0
        assert f1_score(PixelCounts(0, 5, 0)) == 0.0
        assert recognition_accuracy(PixelCounts(5, 0, 0)) == 0.0
        assert f1_score(PixelCounts(5, 0, 0)) == 0.0


class TestF1:
    def test_hand_fixture(self):
        assert abs(f1_score(PixelCounts(4, 2, 2)) - 2.0 / 3.0) < 1e-9

    def test_perfect(self):
        assert f1_score(PixelCounts(3, 3, 3)) == 1.0

    def test_no_overlap(self):
        assert f1_score(PixelCounts(4, 4, 0)) == 0.0

    def test_symmetry_and_bounds_over_random_masks(self):
        rng = np.random.default_rng(2)
        for _ in range(1000):
            shape = (int(rng.integers(2, 12)), int(rng.integers(2, 12)))
            a = BinaryImage(rng.random(shape) < rng.uniform(0, 1))
            b = BinaryImage(rng.random(shape) < rng.uniform(0, 1))
            c_ab = pixel_counts(a, b)
            c_ba = pixel_counts(b, a)
            # swapping prediction and truth exchanges DR and RA, F1 invariant
            assert detection_rate(c_ab) == recognition_accuracy(c_ba)
            assert recognition_accuracy(c_ab) == detection_rate(c_ba)
            assert f1_score(c_ab) == f1_score(c_ba)
            dr, ra, f1 = detection_rate(c_ab), recognition_accuracy(c_ab), f1_score(c_ab)
            assert 0.0 <= dr <= 1.0 and 0.0 <= ra <= 1.0 and 0.0 <= f1 <= 1.0
            if dr + ra > 0:
                assert min(dr, ra) - 1e-12 <= f1 <= max(dr, ra) + 1e-12


class TestRmse:
    def gray(self, arr):
        return GrayImage(np.asarray(arr, dtype=np.float32), Polarity.DISPLAY)

    def test_identical_images(self):
        img = self.gray(np.random.default_rng(3).random((4, 5)).astype(np.float32))
        assert rmse(img, img) == 0.0

    def test_constant_offset(self):
        a = self.gray(np.zeros((4, 4)))
        b = self.gray(np.full((4, 4), 0.5))
        assert rmse(a, b) == 0.5

    def test_2x2_hand_fixture(self):
        a = self.gray([[0.0, 0.0], [1.0, 1.0]])
        b = self.gray([[0.0, 1.0], [1.0, 1.0]])
        assert abs(rmse(a, b) - 0.5) < 1e-12

    def test_metric_properties(self):
        rng = np.random.default_rng(4)
        for _ in range(50):
            x = self.gray(rng.random((6, 7)).astype(np.float32))
            y = self.gray(rng.random((6, 7)).astype(np.float32))
            z = self.gray(rng.random((6, 7)).astype(np.float32))
            assert rmse(x, y) == rmse(y, x)
            assert rmse(x, z) <= rmse(x, y) + rmse(y, z) + 1e-12

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            rmse(self.gray(np.zeros((2, 2))), self.gray(np.zeros((2, 3))))


class _ConstantModule(torch.nn.Module):
    def __init__(self, value: float):
        super().__init__()
        self.value = value

    def forward(self, x):
        return torch.full_like(x, self.value)


def constant_model(value: float, arch: str = "simple_cnn") -> Model:
    return Model(module=_ConstantModule(value), config=reference_config(arch), init_seed=0)


class _FrameStub:
    """Predicts one fixed inverted frame regardless of the input."""

    def __init__(self, frame: np.ndarray):
        self.frame = frame

    def predict(self, batch):
        return np.repeat(self.frame[None, None], len(batch), axis=0)


class TestEvaluateModel:
    def test_identity_on_degenerate_pair_is_perfect(self):
        # struck == clean, identity geometry: F1 exactly 1, RMSE exactly 0
        from destrike.dataset import ImagePair

        pairs = []
        for p in native_frame_pairs(3, seed=60):
            pairs.append(ImagePair(id=p.id, struck=p.clean, clean=p.clean,
                                   meta=p.meta, clean_orig=p.clean_orig,
                                   stroke_type=p.stroke_type))
        records, summary = evaluate_model(IdentityCleaner(), pairs)
        assert all(r.f1 == 1.0 and r.rmse == 0.0 for r in records)
        assert summary.mean_f1 == 1.0 and summary.mean_rmse == 0.0

    def test_record_count_matches_split_size(self, fixture_pairs):
        pairs, _ = fixture_pairs
        records, summary = evaluate_model(IdentityCleaner(), pairs)
        assert len(records) == len(pairs) == summary.n

    def test_summary_is_arithmetic_mean(self, fixture_pairs):
        pairs, _ = fixture_pairs
        records, summary = evaluate_model(IdentityCleaner(), pairs)
        assert abs(summary.mean_f1 - np.mean([r.f1 for r in records])) < 1e-12
        assert abs(summary.mean_rmse - np.mean([r.rmse for r in records])) < 1e-12

    def test_matches_hand_computed_micro_oracle(self):
        # one native pair with binary ink; the stub predicts a frame whose
        # Otsu mask is a hand-chosen subset of the truth mask
        from destrike.dataset import ImagePair
        from destrike.imaging import invert, preprocess

        page = np.ones((128, 512), dtype=np.float32)
        page[10:15, 20:25] = 0.0  # 5x5 truth ink block, N = 25
        truth = GrayImage(page, Polarity.DISPLAY)
        clean_pre, meta = preprocess(invert(truth))
        pair = ImagePair(id="micro", struck=clean_pre, clean=clean_pre,
                         meta=meta, clean_orig=truth)

        pred_frame = np.zeros((128, 512), dtype=np.float32)
        pred_frame[10:12, 20:25] = 1.0  # 2x5 predicted ink, M = 10, inside truth
        records, _ = evaluate_model(_FrameStub(pred_frame), [pair])
        (r,) = records
        # DR = 10/25, RA = 10/10, F1 = 2*(0.4*1)/(1.4) = 4/7
        assert abs(r.f1 - 4.0 / 7.0) < 1e-12
        # 15 pixels differ by exactly 1.0 in display space
        assert abs(r.rmse - math.sqrt(15.0 / (128.0 * 512.0))) < 1e-12

    def test_per_type_breakdown_present(self, fixture_pairs):
        pairs, _ = fixture_pairs
        _, summary = evaluate_model(IdentityCleaner(), pairs)
        assert summary.per_type
        for scores in summary.per_type.values():
            assert 0.0 <= scores.f1 <= 1.0


class TestSummarizeRuns:
    def summary(self, f1, rmse_=0.1):
        return MetricSummary(mean_f1=f1, std_f1=0.0, mean_rmse=rmse_, std_rmse=0.0, n=1)

    def test_two_runs(self):
        s = summarize_runs([self.summary(0.7), self.summary(0.8)])
        assert abs(s.mean_f1 - 0.75) < 1e-12
        assert abs(s.std_f1 - 0.05) < 1e-12

    def test_single_run_zero_std(self):
        s = summarize_runs([self.summary(0.9)])
        assert s.std_f1 == 0.0 and s.mean_f1 == 0.9

    def test_thirty_runs_against_direct_recomputation(self):
        rng = np.random.default_rng(5)
        f1s = rng.uniform(0.7, 0.95, 30)
        rmses = rng.uniform(0.02, 0.1, 30)
        s = summarize_runs([self.summary(f, r) for f, r in zip(f1s, rmses)])
        assert abs(s.mean_f1 - f1s.mean()) < 1e-12
        assert abs(s.std_f1 - f1s.std()) < 1e-12  # population form
        assert abs(s.mean_rmse - rmses.mean()) < 1e-12
        assert abs(s.std_rmse - rmses.std()) < 1e-12


class TestMeanImage:
    def struck_word(self):
        from conftest import fake_word

        word, _ = fake_word(70, height=64, width=220)
        return word

    def test_copies_of_one_model_equal_single_output(self):
        m = constant_model(0.25)
        struck = self.struck_word()
        out1 = mean_image([m], struck)
        out3 = mean_image([m, m, m], struck)
        assert np.allclose(out1.pixels, out3.pixels, atol=1e-7)

    def test_opposite_constants_average_to_half(self):
        lo = constant_model(0.0)
        hi = constant_model(1.0)
        out = mean_image([lo, hi], self.struck_word())
        assert np.allclose(out.pixels, 0.5, atol=1e-6)

    def test_output_in_unit_range(self):
        out = mean_image([constant_model(0.9)], self.struck_word())
        assert out.pixels.min() >= 0.0 and out.pixels.max() <= 1.0
        assert out.polarity is Polarity.DISPLAY

    def test_mixed_architectures_rejected(self):
        a = constant_model(0.2, "simple_cnn")
        b = constant_model(0.2, "shallow")
        with pytest.raises(ValueError, match="[Mm]ixed"):
            mean_image([a, b], self.struck_word())

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            mean_image([], self.struck_word())


class TestReporting:
    def test_table_format_matches_published_style(self):
        summaries = {
            "generator": MetricSummary(0.9697, 0.0012, 0.0237, 0.0016, 30),
        }
        table = report_table(summaries)
        assert "0.9697 (± 0.0012)" in table
        assert "0.0237 (± 0.0016)" in table
        assert table.splitlines()[0].startswith("Model")

    def test_empty_table_has_headers(self):
        table = report_table({})
        assert "Model" in table and "F1" in table and "RMSE" in table

    def test_format_mean_std(self):
        assert format_mean_std(0.8122, 0.0031) == "0.8122 (± 0.0031)"

    def test_csv_outputs(self, tmp_path, fixture_pairs):
        pairs, _ = fixture_pairs
        records, summary = evaluate_model(IdentityCleaner(), pairs)
        write_records_csv(records, tmp_path / "records.csv")
        write_summary_csv({"identity": summary}, tmp_path / "summary.csv")
        rec_lines = (tmp_path / "records.csv").read_text().strip().splitlines()
        assert rec_lines[0] == "id,stroke_type,f1,rmse"
        assert len(rec_lines) == len(pairs) + 1
        sum_lines = (tmp_path / "summary.csv").read_text().strip().splitlines()
        assert sum_lines[0] == "model,mean_f1,std_f1,mean_rmse,std_rmse,n"
        assert sum_lines[1].startswith("identity,")
