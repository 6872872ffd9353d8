"""Error metrics, power-curve conversion, and model evaluation reports.

All wind-speed metrics are computed on the physical metres-per-second
scale after inverse scaling. Power metrics map speeds through a reference
turbine power curve (shipped as a CSV and user-replaceable); interval
energy treats each step as a 10-minute slice, so summed step powers divide
by six to become kWh over the forecast window.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from . import numerics as nc
from .data import Dataset, SampleWindow
from .errors import ConfigError, ContractError, ShapeError
from .graphs import StationSet, build_batch
from .models import ForecastModel, persistence_forecast


def mse(y: np.ndarray, y_hat: np.ndarray) -> float:
    y, y_hat = np.asarray(y), np.asarray(y_hat)
    if y.shape != y_hat.shape:
        raise ShapeError(f"mse shape mismatch: {y.shape} vs {y_hat.shape}")
    return float(np.mean((y - y_hat) ** 2))


def mae(y: np.ndarray, y_hat: np.ndarray) -> float:
    y, y_hat = np.asarray(y), np.asarray(y_hat)
    if y.shape != y_hat.shape:
        raise ShapeError(f"mae shape mismatch: {y.shape} vs {y_hat.shape}")
    return float(np.mean(np.abs(y - y_hat)))


@dataclass
class PowerCurve:
    """Piecewise-linear wind speed -> power map with hard cut-in/cut-out.

    Power is exactly zero below the first breakpoint (cut-in) and at or
    above the last breakpoint (cut-out); between breakpoints it
    interpolates linearly.
    """

    speeds: np.ndarray
    powers: np.ndarray

    def __post_init__(self):
        self.speeds = np.asarray(self.speeds, dtype=np.float64)
        self.powers = np.asarray(self.powers, dtype=np.float64)
        if self.speeds.ndim != 1 or self.speeds.shape != self.powers.shape or len(self.speeds) < 2:
            raise ConfigError("power curve needs matching 1-d breakpoint arrays (>= 2 points)")
        if np.any(np.diff(self.speeds) <= 0):
            raise ConfigError("power curve speeds must be strictly increasing")
        if np.any(self.powers < 0):
            raise ConfigError("power curve powers must be non-negative")
        rated = self.powers.max()
        rated_at = int(np.argmax(self.powers))
        if np.any(np.diff(self.powers[: rated_at + 1]) < 0):
            raise ConfigError("power curve must be non-decreasing up to rated power")
        if not np.allclose(self.powers[rated_at:], rated):
            raise ConfigError("power curve must plateau at rated power through cut-out")

    @property
    def cut_in(self) -> float:
        return float(self.speeds[0])

    @property
    def cut_out(self) -> float:
        return float(self.speeds[-1])

    @property
    def rated_power(self) -> float:
        return float(self.powers.max())

    @classmethod
    def from_csv(cls, path) -> "PowerCurve":
        speeds, powers = [], []
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or tuple(h.strip() for h in header) != ("wind_speed_ms", "power_kw"):
                raise ConfigError(f"{path}: power curve header must be wind_speed_ms,power_kw")
            for row in reader:
                if not row:
                    continue
                speeds.append(float(row[0]))
                powers.append(float(row[1]))
        return cls(np.array(speeds), np.array(powers))

    @classmethod
    def default(cls) -> "PowerCurve":
        with resources.as_file(resources.files("windcast.assets").joinpath("power_curve.csv")) as p:
            return cls.from_csv(p)

    def power_kw(self, ws) -> np.ndarray:
        """Vectorized speed [m/s] -> power [kW]; negative speeds are a contract error."""
        ws = np.asarray(ws, dtype=np.float64)
        if np.any(ws < 0):
            raise ContractError("wind speed must be >= 0 for power conversion")
        out = np.interp(ws, self.speeds, self.powers)
        out = np.where((ws < self.cut_in) | (ws >= self.cut_out), 0.0, out)
        return out


def power_mae(y_ms: np.ndarray, y_hat_ms: np.ndarray, curve: PowerCurve) -> float:
    return mae(curve.power_kw(y_ms), curve.power_kw(np.clip(y_hat_ms, 0.0, None)))


def interval_energy_mae(y_ms: np.ndarray, y_hat_ms: np.ndarray, curve: PowerCurve) -> float:
    """Mean |predicted - true| total energy (kWh) over [rows, horizon] windows.

    Six 10-minute steps make an hour, so summed step powers divide by 6.
    """
    y_ms, y_hat_ms = np.atleast_2d(y_ms), np.atleast_2d(y_hat_ms)
    if y_ms.shape != y_hat_ms.shape:
        raise ShapeError(f"interval shapes differ: {y_ms.shape} vs {y_hat_ms.shape}")
    e_true = curve.power_kw(y_ms).sum(axis=-1) / 6.0
    e_pred = curve.power_kw(np.clip(y_hat_ms, 0.0, None)).sum(axis=-1) / 6.0
    return float(np.mean(np.abs(e_pred - e_true)))


def _improvement(baseline: float, value: float) -> float:
    if baseline == 0.0:
        return 0.0
    return (1.0 - value / baseline) * 100.0


@dataclass
class MetricReport:
    """Evaluation rollup in physical units with persistence improvements."""

    variant: str
    horizon: int
    split: str
    num_windows: int
    num_rows: int
    mse: float
    mae: float
    power_mae_kw: float
    interval_mae_kwh: float
    persistence_mse: float
    persistence_mae: float
    persistence_power_mae_kw: float
    persistence_interval_mae_kwh: float
    per_station_mae: dict[str, float] = field(default_factory=dict)

    @property
    def mse_improvement_pct(self) -> float:
        return _improvement(self.persistence_mse, self.mse)

    @property
    def mae_improvement_pct(self) -> float:
        return _improvement(self.persistence_mae, self.mae)

    @property
    def power_mae_improvement_pct(self) -> float:
        return _improvement(self.persistence_power_mae_kw, self.power_mae_kw)

    @property
    def interval_mae_improvement_pct(self) -> float:
        return _improvement(self.persistence_interval_mae_kwh, self.interval_mae_kwh)

    def to_dict(self) -> dict:
        out = {
            "variant": self.variant,
            "horizon": self.horizon,
            "split": self.split,
            "num_windows": self.num_windows,
            "num_rows": self.num_rows,
            "mse_ms2": self.mse,
            "mae_ms": self.mae,
            "power_mae_kw": self.power_mae_kw,
            "interval_mae_kwh": self.interval_mae_kwh,
            "persistence_mse_ms2": self.persistence_mse,
            "persistence_mae_ms": self.persistence_mae,
            "persistence_power_mae_kw": self.persistence_power_mae_kw,
            "persistence_interval_mae_kwh": self.persistence_interval_mae_kwh,
            "mse_improvement_pct": self.mse_improvement_pct,
            "mae_improvement_pct": self.mae_improvement_pct,
            "power_mae_improvement_pct": self.power_mae_improvement_pct,
            "interval_mae_improvement_pct": self.interval_mae_improvement_pct,
            "per_station_mae": self.per_station_mae,
        }
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def flat_rows(self) -> list[tuple[str, float]]:
        d = self.to_dict()
        d.pop("per_station_mae")
        return [(k, v) for k, v in d.items()]


def predict_windows(
    model: ForecastModel,
    windows: list[SampleWindow],
    stations: StationSet,
    n_closest,
    batch_size: int = 64,
    edge_cache: dict | None = None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Evaluate a model over windows; returns scaled (pred, target, station_rows, last_obs)."""
    preds, targets, rows, last = [], [], [], []
    if edge_cache is None:
        edge_cache = {}
    for i in range(0, len(windows), batch_size):
        chunk = windows[i : i + batch_size]
        batch = build_batch(chunk, stations, n_closest, edge_cache)
        with nc.no_grad():
            out = model(batch)
        preds.append(out.data[:, :, 0])
        targets.append(batch.targets)
        rows.append(batch.station_index)
        last.append(persistence_forecast(batch, model.config.horizon))
    return (
        np.concatenate(preds, axis=0),
        np.concatenate(targets, axis=0),
        np.concatenate(rows),
        np.concatenate(last, axis=0),
    )


def evaluate(
    model: ForecastModel,
    dataset: Dataset,
    split: str = "test",
    n_closest="complete",
    curve: PowerCurve | None = None,
    batch_size: int = 64,
) -> MetricReport:
    """Full metric rollup on one split, with the persistence baseline
    computed on the identical sample set."""
    windows = dataset.split(split)
    if not windows:
        raise ContractError(f"split {split!r} is empty")
    curve = curve or PowerCurve.default()
    pred_s, target_s, station_rows, persist_s = predict_windows(
        model, windows, dataset.stations, n_closest, batch_size
    )
    scaler = dataset.scaler
    y = scaler.inverse_speed(target_s)
    y_hat = scaler.inverse_speed(pred_s)
    y_persist = scaler.inverse_speed(persist_s)

    per_station: dict[str, float] = {}
    for row in np.unique(station_rows):
        sel = station_rows == row
        per_station[dataset.stations.ids[row]] = mae(y[sel], y_hat[sel])

    return MetricReport(
        variant=model.config.variant,
        horizon=model.config.horizon,
        split=split,
        num_windows=len(windows),
        num_rows=int(y.shape[0]),
        mse=mse(y, y_hat),
        mae=mae(y, y_hat),
        power_mae_kw=power_mae(y, y_hat, curve),
        interval_mae_kwh=interval_energy_mae(y, y_hat, curve),
        persistence_mse=mse(y, y_persist),
        persistence_mae=mae(y, y_persist),
        persistence_power_mae_kw=power_mae(y, y_persist, curve),
        persistence_interval_mae_kwh=interval_energy_mae(y, y_persist, curve),
        per_station_mae=per_station,
    )
