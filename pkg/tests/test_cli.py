import json

import numpy as np
import pytest

from windcast.cli import main


def run(argv):
    return main(argv)


@pytest.fixture(scope="module")
def synth_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("synth")
    assert run(["synth", "--stations", "4", "--steps", "400", "--seed", "7", "--out", str(out)]) == 0
    return out


def test_synth_deterministic_per_seed(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run(["synth", "--stations", "3", "--steps", "120", "--seed", "5", "--out", str(a)]) == 0
    assert run(["synth", "--stations", "3", "--steps", "120", "--seed", "5", "--out", str(b)]) == 0
    assert (a / "measurements.csv").read_text() == (b / "measurements.csv").read_text()
    assert (a / "stations.csv").read_text() == (b / "stations.csv").read_text()


def test_synth_station_cap(tmp_path, capsys):
    assert run(["synth", "--stations", "15", "--steps", "50", "--out", str(tmp_path / "x")]) == 2
    assert "error:" in capsys.readouterr().err


def test_missing_data_path_exits_2(tmp_path, capsys):
    code = run(
        [
            "train",
            "--data", str(tmp_path / "nope.csv"),
            "--stations", str(tmp_path / "nope2.csv"),
            "--variant", "mlp",
            "--out", str(tmp_path / "out"),
        ]
    )
    assert code == 2
    err = capsys.readouterr().err
    assert err.count("\n") == 1 and "not found" in err


def test_nonstandard_horizon_needs_flag(synth_dir, tmp_path, capsys):
    base = [
        "train",
        "--data", str(synth_dir / "measurements.csv"),
        "--stations", str(synth_dir / "stations.csv"),
        "--variant", "mlp",
        "--horizon", "3",
        "--lookback", "8",
        "--out", str(tmp_path / "out"),
        "--epochs", "1",
        "--stride", "8",
    ]
    assert run(base) == 2
    assert "horizon" in capsys.readouterr().err
    assert run(base + ["--horizon-free", "--d", "8", "--d-hidden", "8"]) == 0


def test_train_evaluate_forecast_round_trip(synth_dir, tmp_path):
    out = tmp_path / "run"
    code = run(
        [
            "train",
            "--data", str(synth_dir / "measurements.csv"),
            "--stations", str(synth_dir / "stations.csv"),
            "--variant", "mlp",
            "--horizon", "6",
            "--lookback", "12",
            "--horizon-free",
            "--d", "8",
            "--d-hidden", "16",
            "--epochs", "2",
            "--stride", "4",
            "--n-closest", "2",
            "--seed", "3",
            "--out", str(out),
        ]
    )
    assert code == 0
    assert (out / "checkpoint.npz").exists()
    assert (out / "checkpoint.npz.manifest.txt").exists()
    log_lines = (out / "train_log.ndjson").read_text().strip().splitlines()
    assert len(log_lines) == 2
    rec = json.loads(log_lines[0])
    assert {"epoch", "train_mse", "val_mse", "lr", "wall_seconds"} <= set(rec)

    ev = tmp_path / "eval"
    code = run(
        [
            "evaluate",
            "--data", str(synth_dir / "measurements.csv"),
            "--stations", str(synth_dir / "stations.csv"),
            "--checkpoint", str(out / "checkpoint.npz"),
            "--stride", "4",
            "--n-closest", "2",
            "--per-station",
            "--out", str(ev),
        ]
    )
    assert code == 0
    metrics = json.loads((ev / "metrics.json").read_text())
    for key in (
        "mse_ms2", "mae_ms", "power_mae_kw", "interval_mae_kwh",
        "persistence_mse_ms2", "mse_improvement_pct", "interval_mae_improvement_pct",
    ):
        assert key in metrics
    station_lines = (ev / "per_station.csv").read_text().strip().splitlines()
    assert station_lines[0] == "station_id,mae"
    assert len(station_lines) == 5  # 4 stations + header

    fc = tmp_path / "fc.csv"
    code = run(
        [
            "forecast",
            "--data", str(synth_dir / "measurements.csv"),
            "--stations", str(synth_dir / "stations.csv"),
            "--checkpoint", str(out / "checkpoint.npz"),
            "--n-closest", "2",
            "--out", str(fc),
        ]
    )
    assert code == 0
    lines = fc.read_text().strip().splitlines()
    assert lines[0] == "station_id,step,timestamp,wind_speed_ms"
    assert len(lines) == 1 + 4 * 6  # N * P rows


def test_evaluate_persistence_needs_no_checkpoint(synth_dir, tmp_path):
    ev = tmp_path / "ev"
    code = run(
        [
            "evaluate",
            "--data", str(synth_dir / "measurements.csv"),
            "--stations", str(synth_dir / "stations.csv"),
            "--variant", "persistence",
            "--horizon", "6",
            "--lookback", "8",
            "--stride", "4",
            "--n-closest", "0",
            "--out", str(ev),
        ]
    )
    assert code == 0
    metrics = json.loads((ev / "metrics.json").read_text())
    assert metrics["mse_improvement_pct"] == 0.0


def test_persistence_forecast_repeats_last_row(synth_dir, tmp_path):
    fc = tmp_path / "fc"
    code = run(
        [
            "forecast",
            "--data", str(synth_dir / "measurements.csv"),
            "--stations", str(synth_dir / "stations.csv"),
            "--variant", "persistence",
            "--horizon", "6",
            "--lookback", "8",
            "--n-closest", "0",
            "--out", str(fc),
        ]
    )
    assert code == 0
    lines = (fc / "forecast.csv").read_text().strip().splitlines()[1:]
    by_station = {}
    for line in lines:
        sid, step, ts, ws = line.split(",")
        by_station.setdefault(sid, set()).add(ws)
    # persistence repeats one value per station across the horizon
    assert all(len(v) == 1 for v in by_station.values())

    # and that value equals the station's last recorded wind speed
    rows = (synth_dir / "measurements.csv").read_text().strip().splitlines()[1:]
    last_speed = {}
    for line in rows:
        parts = line.split(",")
        last_speed[parts[0]] = float(parts[7])
    for sid, vals in by_station.items():
        assert float(next(iter(vals))) == pytest.approx(last_speed[sid], abs=1e-3)


def test_decompose_components_sum_to_input(tmp_path):
    rng = np.random.default_rng(0)
    series = rng.normal(size=128).cumsum()
    src = tmp_path / "series.csv"
    src.write_text("value\n" + "\n".join(f"{v}" for v in series) + "\n")
    out = tmp_path / "parts"
    assert run(["decompose", "--series", str(src), "--levels", "3", "--out", str(out)]) == 0
    total = np.array([float(v) for v in (out / "approximation.csv").read_text().strip().splitlines()[1:]])
    for i in (1, 2, 3):
        total = total + np.array(
            [float(v) for v in (out / f"detail_{i}.csv").read_text().strip().splitlines()[1:]]
        )
    np.testing.assert_allclose(total, series, atol=1e-8)
    spec_lines = (out / "spectrum.csv").read_text().strip().splitlines()
    assert spec_lines[0] == "frequency,input,approximation,detail_1,detail_2,detail_3"
    assert len(spec_lines) == 1 + 65


def test_sweep_table_one_row_per_k_and_normalized_anchor(synth_dir, tmp_path):
    out = tmp_path / "sweep"
    code = run(
        [
            "sweep",
            "--data", str(synth_dir / "measurements.csv"),
            "--stations", str(synth_dir / "stations.csv"),
            "--variant", "mlp",
            "--horizon", "6",
            "--lookback", "8",
            "--horizon-free",
            "--d", "8",
            "--d-hidden", "8",
            "--epochs", "1",
            "--stride", "8",
            "--k-values", "0,2",
            "--seed", "1",
            "--out", str(out),
        ]
    )
    assert code == 0
    lines = (out / "sweep.csv").read_text().strip().splitlines()
    assert lines[0] == "n_closest,mae_ms,mae_normalized"
    assert len(lines) == 3
    k0 = lines[1].split(",")
    assert k0[0] == "0" and float(k0[2]) == pytest.approx(1.0)


def test_forecast_timestamps_extend_beyond_history(synth_dir, tmp_path):
    fc = tmp_path / "fc.csv"
    code = run(
        [
            "forecast",
            "--data", str(synth_dir / "measurements.csv"),
            "--stations", str(synth_dir / "stations.csv"),
            "--variant", "persistence",
            "--horizon", "6",
            "--lookback", "8",
            "--n-closest", "0",
            "--out", str(fc),
        ]
    )
    assert code == 0
    last_measurement = (synth_dir / "measurements.csv").read_text().strip().splitlines()[-1].split(",")[1]
    forecast_stamps = [line.split(",")[2] for line in fc.read_text().strip().splitlines()[1:]]
    # forecast slots carry real future clock stamps, all past the data end
    assert min(forecast_stamps) > last_measurement


def test_train_repeat_writes_summary(synth_dir, tmp_path):
    out = tmp_path / "rep"
    code = run(
        [
            "train",
            "--data", str(synth_dir / "measurements.csv"),
            "--stations", str(synth_dir / "stations.csv"),
            "--variant", "mlp",
            "--horizon", "6",
            "--lookback", "8",
            "--horizon-free",
            "--d", "8",
            "--d-hidden", "8",
            "--epochs", "1",
            "--stride", "8",
            "--n-closest", "0",
            "--repeat", "2",
            "--out", str(out),
        ]
    )
    assert code == 0
    assert (out / "checkpoint-seed0.npz").exists()
    assert (out / "checkpoint-seed1.npz").exists()
    summary = json.loads((out / "repeat_summary.json").read_text())
    assert len(summary["runs"]) == 2
    assert {"test_mse_mean", "test_mse_std", "test_mae_mean", "test_mae_std"} <= set(summary)


def test_config_precedence_flag_beats_file_beats_defaults(synth_dir, tmp_path):
    from windcast.training import load_checkpoint

    cfg_file = tmp_path / "cfg.json"
    cfg_file.write_text(json.dumps({"d": 12, "d_hidden": 24, "epochs": 1, "lookback": 8}))
    out = tmp_path / "run"
    code = run(
        [
            "train",
            "--data", str(synth_dir / "measurements.csv"),
            "--stations", str(synth_dir / "stations.csv"),
            "--variant", "mlp",
            "--horizon", "6",
            "--config", str(cfg_file),
            "--d", "8",            # flag beats the file's 12
            "--stride", "8",
            "--n-closest", "0",
            "--out", str(out),
        ]
    )
    assert code == 0
    model = load_checkpoint(out / "checkpoint.npz")
    assert model.config.d == 8  # flag
    assert model.config.d_hidden == 24  # file
    assert model.config.lookback == 8  # file
    assert model.config.update_layers == 2  # shipped default for mlp
    assert len((out / "train_log.ndjson").read_text().strip().splitlines()) == 1  # file epochs


def test_help_lists_defaults():
    with pytest.raises(SystemExit) as exc:
        main(["train", "--help"])
    assert exc.value.code == 0
