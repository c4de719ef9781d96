import datetime as dt

import numpy as np
import pytest

from qrnn_forge.data import (
    FEATURE_SPECS,
    OhlcRecord,
    compute_features,
    load_csv,
    records_to_csv,
    samples_from_jsonl,
    samples_to_jsonl,
    split,
    synthetic,
    windowize,
)


def write_csv(path, rows, header="date,open,high,low,close"):
    path.write_text("\n".join([header] + rows) + "\n")


# ---------------------------------------------------------------------------
# load_csv
# ---------------------------------------------------------------------------


def test_load_wellformed_three_rows(tmp_path):
    f = tmp_path / "ok.csv"
    write_csv(f, [
        "2017-01-03,100,102,99,101",
        "2017-01-04,101,103,100,102",
        "2017-01-05,102,104,101,103",
    ])
    records = load_csv(f)
    assert len(records) == 3
    assert records[0].date == dt.date(2017, 1, 3)
    assert records[2].close == 103.0


def test_missing_column_named(tmp_path):
    f = tmp_path / "bad.csv"
    f.write_text("date,open,high,low\n2017-01-03,1,2,0.5\n")
    with pytest.raises(ValueError, match="close"):
        load_csv(f)


def test_shuffled_rows_come_back_sorted(tmp_path):
    f = tmp_path / "shuffled.csv"
    write_csv(f, [
        "2017-01-05,102,104,101,103",
        "2017-01-03,100,102,99,101",
        "2017-01-04,101,103,100,102",
    ])
    dates = [r.date for r in load_csv(f)]
    assert dates == sorted(dates)


def test_duplicate_date_rejected(tmp_path):
    f = tmp_path / "dup.csv"
    write_csv(f, [
        "2017-01-03,100,102,99,101",
        "2017-01-03,101,103,100,102",
    ])
    with pytest.raises(ValueError, match="duplicate date"):
        load_csv(f)


def test_unparseable_number_reports_row(tmp_path):
    f = tmp_path / "nan.csv"
    write_csv(f, [
        "2017-01-03,100,102,99,101",
        "2017-01-04,oops,103,100,102",
    ])
    with pytest.raises(ValueError, match="row 3"):
        load_csv(f)


def test_ohlc_violation_reports_row(tmp_path):
    f = tmp_path / "ohlc.csv"
    write_csv(f, [
        "2017-01-03,100,102,99,101",
        "2017-01-04,101,100,100,102",  # high < close
    ])
    with pytest.raises(ValueError, match="row 3"):
        load_csv(f)


def test_extra_columns_roundtrip(tmp_path):
    records = synthetic(seed=3, n_days=10, spec="oxford7")
    f = tmp_path / "oxford.csv"
    records_to_csv(records, f)
    loaded = load_csv(f, extra_columns=FEATURE_SPECS["oxford7"]["extra_columns"])
    assert len(loaded) == 10
    assert loaded[0].extras["dia_close"] == pytest.approx(records[0].extras["dia_close"])


# ---------------------------------------------------------------------------
# features
# ---------------------------------------------------------------------------


def rec(day, open_, high, low, close):
    return OhlcRecord(dt.date(2017, 1, day), open_, high, low, close)


def test_return_computation():
    matrix, dates = compute_features([rec(3, 100, 101, 99, 100), rec(4, 100, 102, 100, 101)],
                                     "yahoo3")
    assert matrix[0, 0] == pytest.approx(0.01)
    assert dates == [dt.date(2017, 1, 4)]


def test_log_high_zero_when_high_equals_prev_close():
    matrix, _ = compute_features([rec(3, 100, 101, 99, 100), rec(4, 99.5, 100, 99, 99.5)],
                                 "yahoo3")
    assert matrix[0, 1] == pytest.approx(0.0)


def test_constant_prices_give_zero_returns():
    records = [rec(d, 100, 100, 100, 100) for d in range(3, 9)]
    matrix, _ = compute_features(records, "yahoo3")
    np.testing.assert_allclose(matrix[:, 0], 0.0, atol=1e-15)


def test_oxford7_shape_and_passthrough():
    records = synthetic(seed=1, n_days=30, spec="oxford7")
    matrix, dates = compute_features(records, "oxford7")
    assert matrix.shape == (29, 7)
    assert len(dates) == 29
    # open-close column is the previous day's value
    assert matrix[0, 2] == pytest.approx(records[0].extras["spx_open_close"])
    assert matrix[5, 1] == pytest.approx(records[6].extras["spx_rv"])


def test_too_few_records():
    with pytest.raises(ValueError):
        compute_features([rec(3, 100, 101, 99, 100)], "yahoo3")


def test_unknown_spec():
    with pytest.raises(ValueError, match="unknown feature spec"):
        compute_features([rec(3, 100, 101, 99, 100), rec(4, 100, 101, 99, 100)], "nope")


# ---------------------------------------------------------------------------
# windowing and splitting
# ---------------------------------------------------------------------------


def test_window_and_split_counts_example():
    matrix = np.random.default_rng(0).random((251, 3))
    samples = windowize(matrix, seq_len=8, target_index=0)
    assert len(samples) == 243
    train, test = split(samples, 0.2)
    assert (len(train), len(test)) == (195, 48)


def test_window_count_property():
    rng = np.random.default_rng(1)
    for _ in range(20):
        rows = int(rng.integers(10, 80))
        seq_len = int(rng.integers(1, 9))
        if rows < seq_len + 1:
            continue
        assert len(windowize(rng.random((rows, 2)), seq_len, 0)) == rows - seq_len


def test_exactly_one_sample_at_minimum_rows():
    samples = windowize(np.arange(10.0).reshape(5, 2), seq_len=4, target_index=1)
    assert len(samples) == 1
    assert samples[0].target == 9.0
    np.testing.assert_array_equal(samples[0].inputs, np.arange(8.0).reshape(4, 2))


def test_too_few_rows_rejected():
    with pytest.raises(ValueError, match="too few rows"):
        windowize(np.zeros((4, 2)), seq_len=4, target_index=0)


def test_zero_test_ratio_warns():
    samples = windowize(np.random.default_rng(2).random((12, 2)), 3, 0)
    with pytest.warns(UserWarning):
        train, test = split(samples, 0.0)
    assert len(train) == len(samples) and test == []


def test_no_leakage_train_targets_precede_test_targets():
    records = synthetic(seed=5, n_days=60)
    matrix, dates = compute_features(records, "yahoo3")
    samples = windowize(matrix, 8, 0, dates=dates)
    train, test = split(samples, 0.2)
    max_train_target = max(s.target_date for s in train)
    min_test_target = min(s.target_date for s in test)
    assert max_train_target < min_test_target
    # no training sample sees any test target row
    for s in train:
        assert all(d < min_test_target for d in s.input_dates)


# ---------------------------------------------------------------------------
# synthetic generator
# ---------------------------------------------------------------------------


def test_synthetic_deterministic():
    a = synthetic(seed=9, n_days=50)
    b = synthetic(seed=9, n_days=50)
    assert [(r.date, r.open, r.high, r.low, r.close) for r in a] == \
           [(r.date, r.open, r.high, r.low, r.close) for r in b]


def test_synthetic_zero_volatility_constant_returns():
    records = synthetic(seed=0, n_days=20, volatility=0.0)
    matrix, _ = compute_features(records, "yahoo3")
    np.testing.assert_allclose(matrix[:, 0], matrix[0, 0], atol=1e-12)


def test_synthetic_covers_paper_scale_windowing():
    records = synthetic(seed=1, n_days=260)
    matrix, _ = compute_features(records, "yahoo3")
    samples = windowize(matrix, 8, 0)
    assert len(samples) >= 243


def test_synthetic_records_pass_validation():
    for i, r in enumerate(synthetic(seed=11, n_days=300)):
        r.validate(i)


def test_synthetic_needs_two_days():
    with pytest.raises(ValueError):
        synthetic(seed=0, n_days=1)


def test_feature_pipeline_pure(tmp_path):
    records = synthetic(seed=4, n_days=40)
    f = tmp_path / "data.csv"
    records_to_csv(records, f)
    a, _ = compute_features(load_csv(f), "yahoo3")
    b, _ = compute_features(load_csv(f), "yahoo3")
    assert a.tobytes() == b.tobytes()


def test_samples_jsonl_roundtrip(tmp_path):
    records = synthetic(seed=6, n_days=30)
    matrix, dates = compute_features(records, "yahoo3")
    samples = windowize(matrix, 5, 1, dates=dates)
    path = tmp_path / "samples.jsonl"
    samples_to_jsonl(samples, path)
    restored = samples_from_jsonl(path)
    assert len(restored) == len(samples)
    for a, b in zip(samples, restored):
        np.testing.assert_array_equal(a.inputs, b.inputs)
        assert a.target == b.target
        assert a.target_probability == b.target_probability
        assert a.target_date == b.target_date
        assert a.input_dates == b.input_dates
