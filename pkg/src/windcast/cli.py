"""Command-line entry point.

Subcommands cover the full pipeline::

    windcast synth      - generate a synthetic measurement + station CSV pair
    windcast train      - train a model variant, write checkpoint + log
    windcast evaluate   - metric report (JSON + CSV) against persistence
    windcast forecast   - multi-step forecast from the latest window
    windcast decompose  - wavelet-decompose a single series into components
    windcast sweep      - connectivity study over n_closest values

Config precedence per option: explicit flag > --config JSON file > shipped
per-variant defaults. Every command exits 0 on success and non-zero with a
single-line diagnostic on failure; output files are written via a
temporary name and atomically renamed, so failures leave no partial files.
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import data as dt
from . import decompose as dcmp
from . import metrics as mt
from . import models as md
from . import training as tr
from .errors import ConfigError, WindcastError

STANDARD_HORIZONS = (1, 6, 24)

MODEL_KEYS = (
    "d",
    "d_hidden",
    "gnn_layers",
    "encoder_layers",
    "activation",
    "dropout",
    "heads",
    "attn_kernel",
    "local_attn",
    "restart_len",
    "factor",
    "mvavg_kernel",
    "num_decomp",
    "update_layers",
    "placeholder",
    "dtype",
    "lookback",
)
TRAIN_KEYS = ("epochs", "batch_size", "lr", "lr_decay")


def atomic_write_text(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def _load_config_file(path: str | None) -> dict:
    if not path:
        return {}
    with open(path) as fh:
        cfg = json.load(fh)
    if not isinstance(cfg, dict):
        raise ConfigError(f"{path}: config file must hold a JSON object")
    return cfg


def _resolve_model_config(args, file_cfg: dict) -> md.ModelConfig:
    if args.horizon not in STANDARD_HORIZONS and not args.horizon_free:
        raise ConfigError(
            f"horizon {args.horizon} is not one of {STANDARD_HORIZONS}; pass --horizon-free to allow it"
        )
    overrides = {}
    for key in MODEL_KEYS:
        flag_val = getattr(args, key, None)
        if flag_val is not None:
            overrides[key] = flag_val
        elif key in file_cfg:
            overrides[key] = file_cfg[key]
    overrides["seed"] = args.seed
    return md.default_config(args.variant, args.horizon, **overrides)


def _resolve_train_config(args, file_cfg: dict) -> tr.TrainConfig:
    defaults = md.load_defaults()["training"]
    kwargs = {}
    for key in TRAIN_KEYS:
        flag_val = getattr(args, key, None)
        if flag_val is not None:
            kwargs[key] = flag_val
        elif key in file_cfg:
            kwargs[key] = file_cfg[key]
        else:
            kwargs[key] = defaults[key]
    return tr.TrainConfig(seed=args.seed, n_closest=args.n_closest, **kwargs)


def _require_file(path: str, what: str) -> None:
    if not Path(path).exists():
        raise FileNotFoundError(f"{what} file not found: {path}")


def _build_dataset(args, lookback: int, horizon: int) -> dt.Dataset:
    _require_file(args.data, "measurements")
    _require_file(args.stations, "stations")
    return dt.build_dataset(args.data, args.stations, lookback, horizon, stride=args.stride)


def _load_curve(path: str | None) -> mt.PowerCurve:
    if path:
        _require_file(path, "power curve")
        return mt.PowerCurve.from_csv(path)
    return mt.PowerCurve.default()


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_synth(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    file_cfg = _load_config_file(args.config)
    params = dt.SynthParams(**file_cfg.get("synth", {}))
    synth = dt.synth_generate(args.stations_count, args.steps, seed=args.seed, params=params)
    mpath, spath = out / "measurements.csv", out / "stations.csv"
    tmp_m, tmp_s = mpath.with_suffix(".csv.tmp"), spath.with_suffix(".csv.tmp")
    dt.write_measurements_csv(tmp_m, synth)
    dt.write_stations_csv(tmp_s, synth.stations)
    os.replace(tmp_m, mpath)
    os.replace(tmp_s, spath)
    print(f"wrote {mpath} ({args.stations_count} stations x {args.steps} steps) and {spath}")
    return 0


def cmd_train(args) -> int:
    file_cfg = _load_config_file(args.config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    repeats = max(1, args.repeat)
    summaries = []
    for rep in range(repeats):
        seed = args.seed + rep
        rep_args = argparse.Namespace(**{**vars(args), "seed": seed})
        model_cfg = _resolve_model_config(rep_args, file_cfg)
        train_cfg = _resolve_train_config(rep_args, file_cfg)
        dataset = _build_dataset(args, model_cfg.lookback, model_cfg.horizon)

        suffix = f"-seed{seed}" if repeats > 1 else ""
        log_path = out / f"train_log{suffix}.ndjson"
        log_tmp = log_path.with_name(log_path.name + ".tmp")
        with open(log_tmp, "w") as log_fh:
            result = tr.train(
                model_cfg,
                dataset,
                train_cfg,
                log_sink=lambda rec: (log_fh.write(json.dumps(rec) + "\n"), log_fh.flush()),
            )
        os.replace(log_tmp, log_path)
        ckpt_path = out / f"checkpoint{suffix}.npz"
        tr.save_checkpoint(ckpt_path, result.model)

        report = mt.evaluate(
            result.model,
            dataset,
            split="test",
            n_closest=args.n_closest,
            curve=_load_curve(args.power_curve),
        )
        summaries.append(
            {
                "seed": seed,
                "best_val_mse": result.best_val_mse,
                "best_epoch": result.best_epoch,
                "test_mse_ms2": report.mse,
                "test_mae_ms": report.mae,
                "test_mse_improvement_pct": report.mse_improvement_pct,
            }
        )
        print(
            f"seed {seed}: best val MSE {result.best_val_mse:.5f} (epoch {result.best_epoch}), "
            f"test MSE {report.mse:.4f} m2/s2 ({report.mse_improvement_pct:+.1f}% vs persistence) "
            f"-> {ckpt_path}"
        )
    if repeats > 1:
        agg = {
            "runs": summaries,
            "test_mse_mean": float(np.mean([s["test_mse_ms2"] for s in summaries])),
            "test_mse_std": float(np.std([s["test_mse_ms2"] for s in summaries])),
            "test_mae_mean": float(np.mean([s["test_mae_ms"] for s in summaries])),
            "test_mae_std": float(np.std([s["test_mae_ms"] for s in summaries])),
        }
        atomic_write_text(out / "repeat_summary.json", json.dumps(agg, indent=2))
        print(f"{repeats} runs: test MSE {agg['test_mse_mean']:.4f} +- {agg['test_mse_std']:.4f}")
    return 0


def _model_for_eval(args, file_cfg) -> md.ForecastModel:
    if args.checkpoint:
        _require_file(args.checkpoint, "checkpoint")
        return tr.load_checkpoint(args.checkpoint)
    if args.variant != "persistence":
        raise ConfigError("evaluation of a learned variant needs --checkpoint")
    cfg = _resolve_model_config(args, file_cfg)
    return md.build_model(cfg)


def cmd_evaluate(args) -> int:
    file_cfg = _load_config_file(args.config)
    model = _model_for_eval(args, file_cfg)
    dataset = _build_dataset(args, model.config.lookback, model.config.horizon)
    report = mt.evaluate(
        model,
        dataset,
        split=args.split,
        n_closest=args.n_closest,
        curve=_load_curve(args.power_curve),
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    atomic_write_text(out / "metrics.json", report.to_json())
    flat = "\n".join(f"{k},{v}" for k, v in report.flat_rows())
    atomic_write_text(out / "metrics.csv", "metric,value\n" + flat + "\n")
    if args.per_station:
        rows = "\n".join(f"{sid},{val}" for sid, val in sorted(report.per_station_mae.items()))
        atomic_write_text(out / "per_station.csv", "station_id,mae\n" + rows + "\n")
    print(
        f"{report.variant} horizon {report.horizon}: MSE {report.mse:.4f} "
        f"({report.mse_improvement_pct:+.1f}%), MAE {report.mae:.4f} "
        f"({report.mae_improvement_pct:+.1f}%), interval MAE {report.interval_mae_kwh:.1f} kWh"
    )
    return 0


def _latest_window(dataset: dt.Dataset, segments, grid) -> dt.SampleWindow:
    S = dataset.lookback
    P = dataset.horizon
    t0 = grid.length - S
    if t0 < 0:
        raise ConfigError(f"need at least {S} steps of history, have {grid.length}")
    station_row = {sid: i for i, sid in enumerate(dataset.stations.ids)}
    feats, idxs = [], []
    for seg in segments:
        if seg.station_id in station_row and seg.start <= t0 and seg.stop >= grid.length:
            feats.append(dataset.scaler.transform(seg.features[t0 - seg.start :]))
            idxs.append(station_row[seg.station_id])
    if not feats:
        raise ConfigError("no station has complete data over the final look-back window")
    order = np.argsort(idxs, kind="stable")
    stamps = dt.clock_features(grid.minutes_at(np.arange(t0, t0 + S + P)))
    return dt.SampleWindow(
        start=t0,
        station_idx=np.array(idxs, dtype=np.int64)[order],
        features=np.stack(feats)[order][:, :S],
        stamps=stamps,
        target=None,
    )


def cmd_forecast(args) -> int:
    file_cfg = _load_config_file(args.config)
    model = _model_for_eval(args, file_cfg)
    _require_file(args.data, "measurements")
    _require_file(args.stations, "stations")
    stations = dt.load_stations_csv(args.stations)
    series = dt.ingest_csv(args.data)
    segments, grid = dt.clean_gaps(series)
    scaler = dt.Scaler.fit(dt.train_period_rows(segments, grid))
    dataset = dt.Dataset(
        stations=stations,
        scaler=scaler,
        grid=grid,
        lookback=model.config.lookback,
        horizon=model.config.horizon,
        train=[],
        val=[],
        test=[],
    )
    window = _latest_window(dataset, segments, grid)
    from .graphs import build_batch
    from . import numerics as nc

    batch = build_batch([window], stations, args.n_closest)
    with nc.no_grad():
        pred = model(batch).data[:, :, 0]
    speeds = scaler.inverse_speed(pred)

    lines = ["station_id,step,timestamp,wind_speed_ms"]
    for row, station_row in enumerate(batch.station_index):
        sid = stations.ids[station_row]
        for p in range(model.config.horizon):
            minutes = grid.minutes_at(window.start + dataset.lookback + p)
            lines.append(f"{sid},{p + 1},{dt.format_timestamp(int(minutes))},{speeds[row, p]:.4f}")
    out = Path(args.out)
    if out.suffix != ".csv":
        out.mkdir(parents=True, exist_ok=True)
        out = out / "forecast.csv"
    atomic_write_text(out, "\n".join(lines) + "\n")
    print(f"wrote {out} ({speeds.shape[0]} stations x {model.config.horizon} steps)")
    return 0


def cmd_decompose(args) -> int:
    _require_file(args.series, "series")
    values = []
    with open(args.series, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or not row[0].strip():
                continue
            try:
                values.append(float(row[0]))
            except ValueError:
                if lineno == 1:
                    continue  # header
                raise ConfigError(f"{args.series}:{lineno}: not a number: {row[0]!r}") from None
    x = np.array(values)
    parts = dcmp.decompose_series(x, args.levels)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    def series_csv(name, arr):
        atomic_write_text(out / name, "value\n" + "\n".join(f"{v:.12g}" for v in arr) + "\n")

    series_csv("approximation.csv", parts.approximation)
    for i, detail in enumerate(parts.details, start=1):
        series_csv(f"detail_{i}.csv", detail)

    freqs, amp_in = dcmp.spectrum(x)
    columns = {"frequency": freqs, "input": amp_in, "approximation": dcmp.spectrum(parts.approximation)[1]}
    for i, detail in enumerate(parts.details, start=1):
        columns[f"detail_{i}"] = dcmp.spectrum(detail)[1]
    header = ",".join(columns)
    rows = [",".join(f"{col[j]:.10g}" for col in columns.values()) for j in range(len(freqs))]
    atomic_write_text(out / "spectrum.csv", header + "\n" + "\n".join(rows) + "\n")
    recon_err = float(np.abs(parts.total() - x).max())
    print(f"wrote {args.levels + 1} components + spectrum to {out} (reconstruction error {recon_err:.2e})")
    return 0


def cmd_sweep(args) -> int:
    file_cfg = _load_config_file(args.config)
    model_cfg = _resolve_model_config(args, file_cfg)
    train_cfg = _resolve_train_config(args, file_cfg)
    dataset = _build_dataset(args, model_cfg.lookback, model_cfg.horizon)
    k_values = [k.strip() for k in args.k_values.split(",") if k.strip()]
    if not k_values:
        raise ConfigError("--k-values must list at least one connectivity level")
    rows = tr.connectivity_sweep(model_cfg, dataset, k_values, train_cfg, split=args.split)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    lines = ["n_closest,mae_ms,mae_normalized"]
    for r in rows:
        lines.append(f"{r['n_closest']},{r['mae_ms']:.6f},{r['mae_normalized']:.6f}")
        print(f"n_closest={r['n_closest']:>8s}: MAE {r['mae_ms']:.4f} m/s (x{r['mae_normalized']:.3f} of no-graph)")
    atomic_write_text(out / "sweep.csv", "\n".join(lines) + "\n")
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def _add_model_flags(p: argparse.ArgumentParser) -> None:
    # unset flags fall back to the --config file, then to the shipped
    # per-variant defaults quoted in the help text
    p.add_argument("--variant", default="fftransformer", choices=list(md.VARIANTS))
    p.add_argument("--horizon", type=int, default=6, help="forecast steps: 1, 6 or 24 (10-minute each)")
    p.add_argument("--horizon-free", action="store_true", help="allow non-standard horizons")
    p.add_argument("--lookback", type=int, default=None, help="look-back steps (default 32/32/64 per horizon)")
    p.add_argument("--d", type=int, default=None, help="model width (default 64/64/32 per horizon; lstm 16/32/64)")
    p.add_argument("--d-hidden", dest="d_hidden", type=int, default=None,
                   help="feed-forward width (default 256/256/128 per horizon; lstm 64/128/256)")
    p.add_argument("--gnn-layers", dest="gnn_layers", type=int, default=None, help="graph blocks (default 2)")
    p.add_argument("--encoder-layers", dest="encoder_layers", type=int, default=None,
                   help="encoder layers per node update (default 1)")
    p.add_argument("--activation", default=None, choices=["relu", "gelu"], help="default relu or gelu per variant")
    p.add_argument("--dropout", type=float, default=None, help="default 0.05 (lstm 0.15 at 24 steps)")
    p.add_argument("--heads", type=int, default=None, help="attention heads (default 8)")
    p.add_argument("--attn-kernel", dest="attn_kernel", type=int, default=None,
                   help="convolutional attention kernel (default 6 logsparse, 3 fftransformer)")
    p.add_argument("--local-attn", dest="local_attn", type=int, default=None,
                   help="logsparse local attention length (default 4)")
    p.add_argument("--restart-len", dest="restart_len", type=int, default=None,
                   help="logsparse restart length (default 16)")
    p.add_argument("--factor", type=float, default=None, help="sparse-attention sampling factor (default 3)")
    p.add_argument("--mvavg-kernel", dest="mvavg_kernel", type=int, default=None,
                   help="moving-average kernel for series decomposition (default 25)")
    p.add_argument("--num-decomp", dest="num_decomp", type=int, default=None,
                   help="wavelet decomposition levels (default 4)")
    p.add_argument("--update-layers", dest="update_layers", type=int, default=None,
                   help="MLP/LSTM layers per update function (default 2; lstm 1/1/2 per horizon)")
    p.add_argument("--placeholder", default=None, choices=["last", "mean"],
                   help="forecast-slot placeholder mode (default last)")
    p.add_argument("--dtype", default=None, choices=["float64", "float32"], help="default float64")


def _add_data_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--data", required=True, help="measurements CSV")
    p.add_argument("--stations", required=True, help="stations CSV (station_id,lat,lon)")
    p.add_argument("--stride", type=int, default=1, help="window stride in steps")
    p.add_argument("--n-closest", dest="n_closest", default="complete", help="neighbours per node, or 'complete'")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="windcast",
        description="Spatio-temporal multi-step wind speed forecasting on station graphs.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate synthetic measurements")
    p.add_argument("--stations", dest="stations_count", type=int, default=8, help="station count (max 14)")
    p.add_argument("--steps", type=int, default=2000, help="number of 10-minute steps")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--config", default=None, help="JSON config (synth parameter overrides)")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train a forecasting model")
    _add_data_flags(p)
    _add_model_flags(p)
    p.add_argument("--epochs", type=int, default=None, help="training epochs (default 30)")
    p.add_argument("--batch-size", dest="batch_size", type=int, default=None, help="default 32")
    p.add_argument("--lr", type=float, default=None, help="learning rate (default 0.001)")
    p.add_argument("--lr-decay", dest="lr_decay", type=float, default=None, help="per-epoch decay (default 0.8)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--repeat", type=int, default=1, help="train N seeds and summarise")
    p.add_argument("--out", required=True)
    p.add_argument("--config", default=None)
    p.add_argument("--power-curve", dest="power_curve", default=None)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="evaluate a checkpoint (or persistence)")
    _add_data_flags(p)
    _add_model_flags(p)
    p.add_argument("--checkpoint", default=None)
    p.add_argument("--split", default="test", choices=["train", "val", "test"])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--per-station", dest="per_station", action="store_true")
    p.add_argument("--out", required=True)
    p.add_argument("--config", default=None)
    p.add_argument("--power-curve", dest="power_curve", default=None)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("forecast", help="forecast from the latest complete window")
    _add_data_flags(p)
    _add_model_flags(p)
    p.add_argument("--checkpoint", default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output CSV path or directory")
    p.add_argument("--config", default=None)
    p.set_defaults(func=cmd_forecast)

    p = sub.add_parser("decompose", help="wavelet-decompose a single-column CSV series")
    p.add_argument("--series", required=True)
    p.add_argument("--levels", type=int, default=4)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("sweep", help="train/evaluate across connectivity levels")
    _add_data_flags(p)
    _add_model_flags(p)
    p.add_argument("--k-values", dest="k_values", default="0,1,2,3,complete")
    p.add_argument("--epochs", type=int, default=None, help="training epochs (default 30)")
    p.add_argument("--batch-size", dest="batch_size", type=int, default=None, help="default 32")
    p.add_argument("--lr", type=float, default=None, help="learning rate (default 0.001)")
    p.add_argument("--lr-decay", dest="lr_decay", type=float, default=None, help="per-epoch decay (default 0.8)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--split", default="test", choices=["train", "val", "test"])
    p.add_argument("--out", required=True)
    p.add_argument("--config", default=None)
    p.set_defaults(func=cmd_sweep)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except FileNotFoundError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except WindcastError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
