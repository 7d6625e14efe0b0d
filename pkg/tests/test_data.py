"""Tests for CSV ingestion, scaling/splitting, and window emission."""

import numpy as np
import pytest

from tegnn.data import (
    TimeSeriesDataset,
    fit_scaling_and_split,
    load_csv,
    window_arrays,
    windows,
)


def write(tmp_path, text, name="data.csv"):
    path = tmp_path / name
    path.write_text(text)
    return path


class TestLoadCsv:
    def test_basic_table(self, tmp_path):
        ds = load_csv(write(tmp_path, "1,2\n3,4\n5,6\n"))
        np.testing.assert_array_equal(ds.values, [[1, 2], [3, 4], [5, 6]])
        assert ds.variable_names == ("v0", "v1")

    def test_header_supplies_names(self, tmp_path):
        ds = load_csv(write(tmp_path, "usd,eur\n1,2\n3,4\n"))
        assert ds.variable_names == ("usd", "eur")
        np.testing.assert_array_equal(ds.values, [[1, 2], [3, 4]])

    def test_custom_delimiter(self, tmp_path):
        ds = load_csv(write(tmp_path, "1\t2\n3\t4\n"), delimiter="\t")
        np.testing.assert_array_equal(ds.values, [[1, 2], [3, 4]])

    def test_ragged_row_names_row_number(self, tmp_path):
        with pytest.raises(ValueError, match="row 3"):
            load_csv(write(tmp_path, "1,2\n3,4\n5\n"))

    def test_non_numeric_cell_names_row_number(self, tmp_path):
        with pytest.raises(ValueError, match="row 3.*oops"):
            load_csv(write(tmp_path, "1,2\n3,4\n5,oops\n"))

    def test_nan_inf_rows_dropped_with_count(self, tmp_path, caplog):
        text = "1,2\nnan,4\n5,6\n7,inf\n9,10\n"
        with caplog.at_level("WARNING", logger="tegnn.data"):
            ds = load_csv(write(tmp_path, text))
        assert "2 rows" in caplog.text
        np.testing.assert_array_equal(ds.values, [[1, 2], [5, 6], [9, 10]])

    def test_single_column_rejected(self, tmp_path):
        with pytest.raises(ValueError, match="at least 2 columns"):
            load_csv(write(tmp_path, "1\n2\n"))

    def test_empty_file_rejected(self, tmp_path):
        with pytest.raises(ValueError):
            load_csv(write(tmp_path, ""))

    def test_blank_lines_skipped(self, tmp_path):
        ds = load_csv(write(tmp_path, "1,2\n\n3,4\n\n"))
        assert ds.n_steps == 2


class TestFitScalingAndSplit:
    def test_default_ratios_bounds(self):
        ds = TimeSeriesDataset(
            values=np.arange(200.0).reshape(100, 2), variable_names=("a", "b")
        )
        out = fit_scaling_and_split(ds)
        assert out.split_bounds == (60, 80)
        assert out.split_range("train") == (0, 60)
        assert out.split_range("valid") == (60, 80)
        assert out.split_range("test") == (80, 100)

    def test_scale_is_train_max_abs(self):
        values = np.zeros((20, 2))
        values[:, 0] = np.linspace(-4.0, 15.0, 20)   # train rows 0..11 peak at |-4|...
        values[:, 1] = 2.0
        values[5, 0] = -7.5                          # largest magnitude inside train
        values[19, 0] = 100.0                        # test row must not leak
        ds = fit_scaling_and_split(
            TimeSeriesDataset(values=values, variable_names=("a", "b")),
            ratios=(0.6, 0.2, 0.2),
        )
        assert ds.scale[0] == 7.5
        assert ds.scale[1] == 2.0

    def test_scaled_window_divides_by_scale(self):
        values = np.full((50, 2), 4.0)
        values[:, 1] = 8.0
        ds = fit_scaling_and_split(TimeSeriesDataset(values=values, variable_names=("a", "b")))
        sample = next(windows(ds, "train", window=5, horizon=1))
        np.testing.assert_array_equal(sample.window, np.ones((2, 5)))

    def test_zero_train_column_falls_back_with_warning(self, caplog):
        values = np.random.default_rng(0).normal(size=(40, 2))
        values[:24, 1] = 0.0
        with caplog.at_level("WARNING", logger="tegnn.data"):
            ds = fit_scaling_and_split(TimeSeriesDataset(values=values, variable_names=("a", "b")))
        assert ds.scale[1] == 1.0
        assert "b" in caplog.text

    def test_bad_ratio_sum_rejected(self):
        ds = TimeSeriesDataset(values=np.ones((30, 2)), variable_names=("a", "b"))
        with pytest.raises(ValueError, match="sum to 1"):
            fit_scaling_and_split(ds, ratios=(0.5, 0.2, 0.2))

    def test_too_short_rejected(self):
        ds = TimeSeriesDataset(values=np.ones((9, 2)), variable_names=("a", "b"))
        with pytest.raises(ValueError, match="at least 10"):
            fit_scaling_and_split(ds)

    def test_inverse_scaling_exactness(self):
        rng = np.random.default_rng(1)
        raw = rng.normal(size=(50, 2)) * 3.0
        raw[:, 0] *= 1.3333  # make scale[0] non-power-of-two
        raw[0, 1] = 4.0      # power-of-two max-abs for column 1
        raw[1:, 1] = np.clip(raw[1:, 1], -3.9, 3.9)
        ds = fit_scaling_and_split(TimeSeriesDataset(values=raw, variable_names=("a", "b")))
        back = ds.scaled_values() * ds.scale
        if np.log2(ds.scale[1]) == int(np.log2(ds.scale[1])):
            np.testing.assert_array_equal(back[:, 1], raw[:, 1])
        np.testing.assert_allclose(back, raw, rtol=1e-12)


class TestWindows:
    def make(self, t=100):
        values = np.arange(t * 2, dtype=np.float64).reshape(t, 2) + 1.0
        return fit_scaling_and_split(
            TimeSeriesDataset(values=values, variable_names=("a", "b"))
        )

    def test_sample_count_formula_case(self):
        ds = self.make(200)  # valid split is rows 120..160, length 40
        got = list(windows(ds, "valid", window=32, horizon=5))
        assert len(got) == 4

    def test_count_formula_exhaustive(self):
        # every split length <= 100 against the closed form
        for t in range(10, 101):
            ds = self.make(t)
            for split in ("train", "valid", "test"):
                lo, hi = ds.split_range(split)
                split_len = hi - lo
                for w in range(1, 16):
                    for h in (1, 2, 3, 7):
                        expected = max(0, split_len - w - h + 1)
                        x, y, pos = window_arrays(ds, split, w, h)
                        assert x.shape[0] == expected, (t, split, w, h)

    def test_window_too_large_gives_empty_stream(self):
        ds = self.make(100)
        assert list(windows(ds, "valid", window=25, horizon=1)) == []

    def test_no_split_leakage(self):
        ds = self.make(100)
        for split in ("train", "valid", "test"):
            lo, hi = ds.split_range(split)
            for sample in windows(ds, split, window=7, horizon=3):
                assert sample.t - 7 + 1 >= lo
                assert sample.t + 3 < hi

    def test_contents_match_source_rows(self):
        ds = self.make(100)
        sample = next(windows(ds, "test", window=4, horizon=2))
        t = sample.t
        np.testing.assert_array_equal(
            sample.window, (ds.values[t - 3 : t + 1] / ds.scale).T
        )
        np.testing.assert_array_equal(sample.target, ds.values[t + 2])
        assert sample.raw_target

    def test_poisoning_other_splits_leaves_samples_unchanged(self):
        ds = self.make(60)
        originals = list(windows(ds, "valid", window=5, horizon=2))
        poisoned_values = ds.values.copy()
        lo, hi = ds.split_range("valid")
        poisoned_values[:lo] = -1e9
        poisoned_values[hi:] = 1e9
        poisoned = TimeSeriesDataset(
            values=poisoned_values,
            variable_names=ds.variable_names,
            scale=ds.scale,
            split_bounds=ds.split_bounds,
        )
        for orig, pois in zip(originals, windows(poisoned, "valid", 5, 2)):
            np.testing.assert_array_equal(orig.window, pois.window)
            np.testing.assert_array_equal(orig.target, pois.target)

    def test_window_arrays_match_stream(self):
        ds = self.make(80)
        x, y, pos = window_arrays(ds, "train", 6, 2)
        stream = list(windows(ds, "train", 6, 2))
        assert x.shape == (len(stream), 2, 6)
        for i, sample in enumerate(stream):
            np.testing.assert_array_equal(x[i], sample.window)
            np.testing.assert_array_equal(y[i], sample.target)
            assert pos[i] == sample.t

    def test_requires_fitted_dataset(self):
        ds = TimeSeriesDataset(values=np.ones((30, 2)), variable_names=("a", "b"))
        with pytest.raises(ValueError, match="split"):
            list(windows(ds, "train", 4, 1))

    def test_unknown_split_rejected(self):
        ds = self.make(50)
        with pytest.raises(ValueError, match="unknown split"):
            list(windows(ds, "future", 4, 1))

    def test_bad_window_horizon(self):
        ds = self.make(50)
        with pytest.raises(ValueError, match="window"):
            list(windows(ds, "train", 0, 1))
        with pytest.raises(ValueError, match="horizon"):
            list(windows(ds, "train", 4, 0))
