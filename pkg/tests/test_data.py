import numpy as np
import pytest

from windcast import data as dt
from windcast.errors import ConfigError, IngestError


HEADER = ",".join(dt.MEASUREMENT_COLUMNS)


def write_csv(tmp_path, rows, name="m.csv"):
    path = tmp_path / name
    path.write_text(HEADER + "\n" + "\n".join(rows) + ("\n" if rows else ""))
    return path


def row(sid, ts, temp=5.0, pres=1010.0, dew=2.0, hum=80.0, wdir=200.0, ws=7.0, mws=9.0):
    return f"{sid},{ts},{temp},{pres},{dew},{hum},{wdir},{ws},{mws}"


# ---------------------------------------------------------------------------
# ingestion
# ---------------------------------------------------------------------------

def test_empty_file_gives_empty_stream(tmp_path):
    path = write_csv(tmp_path, [])
    assert dt.ingest_csv(path) == []


def test_direction_360_normalizes_to_zero(tmp_path):
    path = write_csv(tmp_path, [row("A", "2021-01-01T00:00:00Z", wdir=360.0)])
    series = dt.ingest_csv(path)
    np.testing.assert_allclose(series[0].features[0, 4], 0.0, atol=1e-12)  # sin 0
    np.testing.assert_allclose(series[0].features[0, 5], 1.0, atol=1e-12)  # cos 0


def test_three_row_fixture_parses_field_exact(tmp_path):
    rows = [
        row("A", "2021-01-01T00:00:00Z", temp=1.5, pres=999.5, dew=0.5, hum=75.0, wdir=90.0, ws=3.25, mws=4.5),
        row("A", "2021-01-01T00:10:00Z", temp=1.6, pres=999.4, dew=0.6, hum=74.0, wdir=180.0, ws=3.5, mws=4.75),
        row("B", "2021-01-01T00:00:00Z", temp=-2.0, pres=1020.0, dew=-5.0, hum=60.0, wdir=270.0, ws=12.0, mws=15.0),
    ]
    series = dt.ingest_csv(write_csv(tmp_path, rows))
    assert [s.station_id for s in series] == ["A", "B"]
    a = series[0]
    assert a.features.shape == (2, 8)
    np.testing.assert_allclose(a.features[0], [1.5, 999.5, 0.5, 75.0, 1.0, 0.0, 3.25, 4.5], atol=1e-12)
    np.testing.assert_allclose(a.features[1, 4:6], [0.0, -1.0], atol=1e-12)
    b = series[1]
    np.testing.assert_allclose(b.features[0, 4:6], [-1.0, 0.0], atol=1e-12)
    np.testing.assert_allclose(b.features[0, 6:8], [12.0, 15.0], atol=1e-12)


def test_malformed_row_reports_line_number(tmp_path):
    rows = [row("A", "2021-01-01T00:00:00Z"), "A,2021-01-01T00:10:00Z,not_a_number,1,1,1,1,1,1"]
    with pytest.raises(IngestError, match=":3"):
        dt.ingest_csv(write_csv(tmp_path, rows))


def test_non_monotone_timestamps_rejected(tmp_path):
    rows = [row("A", "2021-01-01T00:10:00Z"), row("A", "2021-01-01T00:00:00Z")]
    with pytest.raises(IngestError, match="increasing"):
        dt.ingest_csv(write_csv(tmp_path, rows))


def test_unaligned_timestamp_rejected(tmp_path):
    with pytest.raises(IngestError, match="grid"):
        dt.ingest_csv(write_csv(tmp_path, [row("A", "2021-01-01T00:07:00Z")]))


def test_invariant_violations_rejected(tmp_path):
    with pytest.raises(IngestError, match="wind speed"):
        dt.ingest_csv(write_csv(tmp_path, [row("A", "2021-01-01T00:00:00Z", ws=-1.0)]))
    with pytest.raises(IngestError, match="max wind"):
        dt.ingest_csv(write_csv(tmp_path, [row("A", "2021-01-01T00:00:00Z", ws=5.0, mws=4.0)]))


# ---------------------------------------------------------------------------
# gap handling
# ---------------------------------------------------------------------------

def ts(i):
    return dt.format_timestamp(dt.parse_timestamp("2021-01-01T00:00:00Z") + i * dt.STEP_MINUTES)


def test_single_gap_interpolates_midpoint(tmp_path):
    rows = [row("A", ts(0), ws=4.0), row("A", ts(2), ws=6.0)]
    segments, grid = dt.clean_gaps(dt.ingest_csv(write_csv(tmp_path, rows)))
    assert len(segments) == 1
    assert segments[0].features.shape[0] == 3
    np.testing.assert_allclose(segments[0].features[1, dt.WIND_SPEED_IDX], 5.0, atol=1e-12)


def test_direction_interpolates_on_the_circle(tmp_path):
    # 350 deg -> 10 deg: circular midpoint is 0 deg, not 180
    rows = [row("A", ts(0), wdir=350.0), row("A", ts(2), wdir=10.0)]
    segments, _ = dt.clean_gaps(dt.ingest_csv(write_csv(tmp_path, rows)))
    sin_c, cos_c = segments[0].features[1, 4:6]
    np.testing.assert_allclose([sin_c, cos_c], [0.0, 1.0], atol=1e-9)
    np.testing.assert_allclose(np.hypot(sin_c, cos_c), 1.0, atol=1e-12)


def test_double_gap_splits_segments(tmp_path):
    rows = [row("A", ts(0)), row("A", ts(1)), row("A", ts(4)), row("A", ts(5))]
    segments, grid = dt.clean_gaps(dt.ingest_csv(write_csv(tmp_path, rows)))
    assert [(s.start, s.stop) for s in segments] == [(0, 2), (4, 6)]
    assert grid.length == 6


def test_no_gaps_identity(tmp_path):
    rows = [row("A", ts(i), ws=float(i + 1)) for i in range(5)]
    segments, _ = dt.clean_gaps(dt.ingest_csv(write_csv(tmp_path, rows)))
    assert len(segments) == 1
    np.testing.assert_array_equal(segments[0].features[:, dt.WIND_SPEED_IDX], [1, 2, 3, 4, 5])


# ---------------------------------------------------------------------------
# scaler
# ---------------------------------------------------------------------------

def test_scaler_population_statistics():
    rows = np.tile(np.array([[1.0], [2.0], [3.0]]), (1, 8))
    scaler = dt.Scaler.fit(rows)
    np.testing.assert_allclose(scaler.mean, 2.0)
    np.testing.assert_allclose(scaler.std, np.sqrt(2.0 / 3.0))


def test_scaler_round_trip_identity():
    rng = np.random.default_rng(0)
    rows = rng.normal(size=(50, 8)) * 3 + 1
    scaler = dt.Scaler.fit(rows)
    x = rng.normal(size=(7, 8))
    np.testing.assert_allclose(scaler.inverse(scaler.transform(x)), x, atol=1e-12)
    np.testing.assert_allclose(scaler.transform(rows).mean(axis=0), 0.0, atol=1e-10)
    np.testing.assert_allclose(scaler.transform(rows).std(axis=0), 1.0, atol=1e-10)


def test_scaler_zero_variance_names_feature():
    rows = np.random.default_rng(1).normal(size=(20, 8))
    rows[:, 3] = 42.0
    with pytest.raises(ConfigError, match="rel_humidity"):
        dt.Scaler.fit(rows)


# ---------------------------------------------------------------------------
# windows and splits
# ---------------------------------------------------------------------------

def synth_dataset(tmp_path, n_steps=60, n_stations=3, lookback=4, horizon=2, stride=1, seed=0):
    synth = dt.synth_generate(n_stations, n_steps, seed=seed)
    mpath = tmp_path / "m.csv"
    spath = tmp_path / "s.csv"
    dt.write_measurements_csv(mpath, synth)
    dt.write_stations_csv(spath, synth.stations)
    return dt.build_dataset(mpath, spath, lookback, horizon, stride)


def test_segment_of_exact_span_gives_one_window(tmp_path):
    rows = [row("A", ts(i)) for i in range(6)]
    series = dt.ingest_csv(write_csv(tmp_path, rows))
    segments, grid = dt.clean_gaps(series)
    scaler = dt.Scaler(mean=np.zeros(8), std=np.ones(8))
    stations = dt.StationSet(ids=["A"], lat=[56.0], lon=[3.0])
    windows = dt.make_windows(segments, grid, stations, scaler, lookback=4, horizon=2)
    assert len(windows) == 1
    assert windows[0].features.shape == (1, 4, 8)
    assert windows[0].target.shape == (1, 2)
    assert windows[0].stamps.shape == (6, 4)


def test_longer_segment_strides_windows(tmp_path):
    rows = [row("A", ts(i)) for i in range(8)]
    segments, grid = dt.clean_gaps(dt.ingest_csv(write_csv(tmp_path, rows)))
    scaler = dt.Scaler(mean=np.zeros(8), std=np.ones(8))
    stations = dt.StationSet(ids=["A"], lat=[56.0], lon=[3.0])
    windows = dt.make_windows(segments, grid, stations, scaler, 4, 2, stride=1)
    assert len(windows) == 3
    assert [w.start for w in windows] == [0, 1, 2]


def test_station_with_midwindow_gap_excluded(tmp_path):
    rows_a = [row("A", ts(i)) for i in range(12)]
    # station B has a single missing step -> interpolated, stays in every window
    rows_b = [row("B", ts(i)) for i in range(12) if i != 6]
    rows_c = [row("C", ts(i)) for i in range(12) if i not in (5, 6)]
    series = dt.ingest_csv(write_csv(tmp_path, rows_a + rows_b + rows_c))
    segments, grid = dt.clean_gaps(series)
    scaler = dt.Scaler(mean=np.zeros(8), std=np.ones(8))
    stations = dt.StationSet(ids=["A", "B", "C"], lat=[56, 57, 58], lon=[3, 4, 5])
    windows = dt.make_windows(segments, grid, stations, scaler, 4, 2)
    # enumeration oracle: C's two-step hole at steps 5-6 splits its coverage
    # into [0,5) and [7,12); any window touching 5 or 6 loses C
    for w in windows:
        span = set(range(w.start, w.start + 6))
        has_c = 2 in w.station_idx
        assert has_c == ({5, 6}.isdisjoint(span))
        assert 0 in w.station_idx and 1 in w.station_idx


def test_chronological_split_60_20_20(tmp_path):
    ds = synth_dataset(tmp_path, n_steps=100, lookback=4, horizon=2, stride=6)
    spans = lambda ws: [(w.start, w.start + 6) for w in ws]
    b1, b2 = 60, 80
    assert all(stop <= b1 for _, stop in spans(ds.train))
    assert all(start >= b1 and stop <= b2 for start, stop in spans(ds.val))
    assert all(start >= b2 for start, _ in spans(ds.test))
    assert len(ds.train) and len(ds.val) and len(ds.test)


def test_boundary_straddling_windows_dropped(tmp_path):
    ds = synth_dataset(tmp_path, n_steps=100, lookback=4, horizon=2, stride=1)
    all_starts = {w.start for w in ds.train} | {w.start for w in ds.val} | {w.start for w in ds.test}
    for t0 in range(0, 95):
        included = t0 in all_starts
        crosses = (t0 < 60 < t0 + 6) or (t0 < 80 < t0 + 6)
        assert included != crosses


def test_empty_input_gives_three_empty_sets():
    train, val, test = dt.chronological_split([], dt.TimeGrid(0, 0), 6)
    assert train == [] and val == [] and test == []


def test_unit_circle_invariant_on_all_samples(tmp_path):
    ds = synth_dataset(tmp_path, n_steps=80, stride=3)
    for w in ds.train + ds.val + ds.test:
        feats = ds.scaler.inverse(w.features)
        s2c2 = feats[..., 4] ** 2 + feats[..., 5] ** 2
        np.testing.assert_allclose(s2c2, 1.0, atol=1e-12)


def test_scaler_sees_only_training_period(tmp_path):
    synth = dt.synth_generate(3, 100, seed=5)
    m1, s1 = tmp_path / "m1.csv", tmp_path / "s1.csv"
    dt.write_measurements_csv(m1, synth)
    dt.write_stations_csv(s1, synth.stations)
    ds1 = dt.build_dataset(m1, s1, 4, 2, stride=2)

    # mutate the test-period values (last 20% of steps) and rebuild
    synth2 = dt.synth_generate(3, 100, seed=5)
    synth2.raw[:, 85:, 5] += 5.0
    synth2.raw[:, 85:, 6] += 5.0
    m2 = tmp_path / "m2.csv"
    dt.write_measurements_csv(m2, synth2)
    ds2 = dt.build_dataset(m2, s1, 4, 2, stride=2)

    np.testing.assert_array_equal(ds1.scaler.mean, ds2.scaler.mean)
    np.testing.assert_array_equal(ds1.scaler.std, ds2.scaler.std)
    # and the training windows themselves are untouched
    for w1, w2 in zip(ds1.train, ds2.train):
        np.testing.assert_array_equal(w1.features, w2.features)


# ---------------------------------------------------------------------------
# synthetic generator
# ---------------------------------------------------------------------------

def test_synth_pure_sinusoid_when_only_diurnal():
    p = dt.SynthParams(diurnal_amp=2.0, ar_amp=0.0, advect_amp=0.0, noise_amp=0.0)
    synth = dt.synth_generate(2, 288, seed=3, params=p)
    speed = synth.raw[0, :, 5]
    t = np.arange(288)
    want = p.base_speed + 2.0 * np.sin(2 * np.pi * (t + synth.times[0] // 10) / 144)
    np.testing.assert_allclose(speed, want, atol=1e-9)
    amps = np.abs(np.fft.rfft(speed - speed.mean()))
    assert amps.argmax() == 2  # 288 steps / 144 period = bin 2


def test_synth_same_seed_bit_identical():
    a = dt.synth_generate(4, 200, seed=11)
    b = dt.synth_generate(4, 200, seed=11)
    assert (a.raw == b.raw).all()
    assert (a.stations.lat == b.stations.lat).all()
    c = dt.synth_generate(4, 200, seed=12)
    assert not (a.raw == c.raw).all()


def test_synth_advection_shows_up_as_lagged_cross_correlation():
    p = dt.SynthParams(diurnal_amp=0.0, ar_amp=0.0, advect_amp=3.0, noise_amp=0.01)
    synth = dt.synth_generate(6, 4000, seed=7, params=p)
    d = synth.delays
    i, j = int(np.argmin(d)), int(np.argmax(d))
    expect_lag = d[j] - d[i]
    assert expect_lag >= 3
    a = synth.raw[i, :, 5] - synth.raw[i, :, 5].mean()
    b = synth.raw[j, :, 5] - synth.raw[j, :, 5].mean()
    lags = range(-30, 31)
    xc = [np.dot(a[: 4000 - abs(l)], b[abs(l) :]) if l >= 0 else np.dot(a[abs(l) :], b[: 4000 - abs(l)]) for l in lags]
    best = list(lags)[int(np.argmax(xc))]
    assert abs(best - expect_lag) <= 1


def test_synth_respects_record_invariants():
    synth = dt.synth_generate(5, 500, seed=9)
    assert (synth.raw[:, :, 5] >= 0).all()
    assert (synth.raw[:, :, 6] >= synth.raw[:, :, 5]).all()
    assert ((synth.raw[:, :, 4] >= 0) & (synth.raw[:, :, 4] < 360)).all()


def test_synth_station_cap():
    with pytest.raises(ConfigError):
        dt.synth_generate(15, 100, seed=0)


def test_synth_round_trips_through_ingest(tmp_path):
    synth = dt.synth_generate(3, 50, seed=13)
    path = tmp_path / "m.csv"
    dt.write_measurements_csv(path, synth)
    series = dt.ingest_csv(path)
    assert len(series) == 3
    assert all(s.features.shape == (50, 8) for s in series)
    got = series[0].features[:, dt.WIND_SPEED_IDX]
    np.testing.assert_allclose(got, synth.raw[0, :, 5], atol=1e-4)  # 4-decimal CSV
