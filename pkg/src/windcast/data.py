"""Dataset construction: ingestion, gap handling, windowing, splits, scaling,
and a synthetic spatio-temporal generator for desk-scale experiments.

Measurements are 10-minute averaged station records. Wind direction is
decomposed into sine/cosine, giving the canonical 8-feature layout::

    air_temp, pressure, dew_point, rel_humidity,
    wind_dir_sin, wind_dir_cos, wind_speed, max_wind_speed

Single missing steps are linearly interpolated (direction on the circle);
two or more consecutive missing steps split a station's data into separate
segments, and the station simply drops out of windows spanning the hole.
Whatever subset of stations covers a window is what the sample carries, so
the station count varies window to window.

The split is chronological 60/20/20 over the time grid; windows straddling
a boundary are dropped, and the feature scaler only ever sees the training
portion.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from datetime import datetime, timezone
import numpy as np

from .errors import ConfigError, IngestError
from .graphs import StationSet

FEATURE_NAMES = (
    "air_temp",
    "pressure",
    "dew_point",
    "rel_humidity",
    "wind_dir_sin",
    "wind_dir_cos",
    "wind_speed",
    "max_wind_speed",
)
WIND_SPEED_IDX = FEATURE_NAMES.index("wind_speed")

MEASUREMENT_COLUMNS = (
    "station_id",
    "timestamp",
    "air_temp",
    "pressure",
    "dew_point",
    "rel_humidity",
    "wind_dir",
    "wind_speed",
    "max_wind_speed",
)
STATION_COLUMNS = ("station_id", "lat", "lon")
STEP_MINUTES = 10


def parse_timestamp(text: str) -> int:
    """ISO-8601 UTC timestamp -> epoch minutes; must sit on the 10-minute grid."""
    t = text.strip()
    if t.endswith("Z"):
        t = t[:-1] + "+00:00"
    try:
        stamp = datetime.fromisoformat(t)
    except ValueError as e:
        raise IngestError(f"bad timestamp {text!r}: {e}") from None
    if stamp.tzinfo is None:
        stamp = stamp.replace(tzinfo=timezone.utc)
    stamp = stamp.astimezone(timezone.utc)
    if stamp.second or stamp.microsecond or stamp.minute % STEP_MINUTES:
        raise IngestError(f"timestamp {text!r} is not aligned to the {STEP_MINUTES}-minute grid")
    return int(stamp.timestamp() // 60)


def format_timestamp(minutes: int) -> str:
    return datetime.fromtimestamp(minutes * 60, tz=timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def engineer_features(raw: np.ndarray) -> np.ndarray:
    """7 raw columns -> 8 features, wind direction split into sin/cos."""
    out = np.empty(raw.shape[:-1] + (8,), dtype=np.float64)
    theta = np.deg2rad(raw[..., 4])
    out[..., 0:4] = raw[..., 0:4]
    out[..., 4] = np.sin(theta)
    out[..., 5] = np.cos(theta)
    out[..., 6] = raw[..., 5]
    out[..., 7] = raw[..., 6]
    return out


@dataclass
class StationSeries:
    """One station's validated measurements on the epoch-minute grid."""

    station_id: str
    times: np.ndarray  # [n] epoch minutes, strictly increasing, grid aligned
    features: np.ndarray  # [n, 8]


def ingest_csv(path) -> list[StationSeries]:
    """Parse and validate a measurements CSV into per-station series."""
    per_station: dict[str, list[tuple[int, np.ndarray]]] = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            return []
        if tuple(h.strip() for h in header) != MEASUREMENT_COLUMNS:
            raise IngestError(
                f"{path}: header {header!r} does not match schema {','.join(MEASUREMENT_COLUMNS)}"
            )
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != len(MEASUREMENT_COLUMNS):
                raise IngestError(f"{path}:{lineno}: expected {len(MEASUREMENT_COLUMNS)} fields, got {len(row)}")
            sid = row[0].strip()
            try:
                minutes = parse_timestamp(row[1])
                values = np.array([float(v) for v in row[2:]], dtype=np.float64)
            except (IngestError, ValueError) as e:
                raise IngestError(f"{path}:{lineno}: {e}") from None
            direction = values[4] % 360.0
            speed, max_speed = values[5], values[6]
            if not np.isfinite(values).all():
                raise IngestError(f"{path}:{lineno}: non-finite value")
            if speed < 0:
                raise IngestError(f"{path}:{lineno}: wind speed {speed} < 0")
            if max_speed < speed:
                raise IngestError(f"{path}:{lineno}: max wind speed {max_speed} < wind speed {speed}")
            values[4] = direction
            per_station.setdefault(sid, []).append((minutes, values))

    series = []
    for sid in sorted(per_station):
        rows = per_station[sid]
        times = np.array([t for t, _ in rows], dtype=np.int64)
        if np.any(np.diff(times) <= 0):
            raise IngestError(f"{path}: station {sid}: timestamps not strictly increasing")
        raw = np.stack([v for _, v in rows])
        series.append(StationSeries(sid, times, engineer_features(raw)))
    return series


@dataclass
class Segment:
    """A gap-free stretch of one station's features on the global grid."""

    station_id: str
    start: int  # global grid step of the first row
    features: np.ndarray  # [length, 8]

    @property
    def stop(self) -> int:
        return self.start + self.features.shape[0]


@dataclass
class TimeGrid:
    t0_minutes: int
    length: int

    def minutes_at(self, step) -> np.ndarray:
        return self.t0_minutes + np.asarray(step) * STEP_MINUTES


def _renormalize_direction(rows: np.ndarray) -> None:
    norm = np.hypot(rows[..., 4], rows[..., 5])
    norm = np.where(norm < 1e-12, 1.0, norm)
    rows[..., 4] /= norm
    rows[..., 5] /= norm


def clean_gaps(series: list[StationSeries]) -> tuple[list[Segment], TimeGrid]:
    """Interpolate single missing steps, split at longer holes, grid-align all."""
    if not series:
        return [], TimeGrid(0, 0)
    t0 = min(int(s.times[0]) for s in series)
    t_end = max(int(s.times[-1]) for s in series)
    grid = TimeGrid(t0, (t_end - t0) // STEP_MINUTES + 1)

    segments: list[Segment] = []
    for s in series:
        pos = (s.times - t0) // STEP_MINUTES
        seg_rows = [s.features[0]]
        seg_start = int(pos[0])
        for i in range(1, len(pos)):
            gap = int(pos[i] - pos[i - 1]) - 1
            if gap == 0:
                seg_rows.append(s.features[i])
            elif gap == 1:
                filled = 0.5 * (s.features[i - 1] + s.features[i])
                _renormalize_direction(filled[None])
                seg_rows.append(filled)
                seg_rows.append(s.features[i])
            else:
                segments.append(Segment(s.station_id, seg_start, np.stack(seg_rows)))
                seg_rows = [s.features[i]]
                seg_start = int(pos[i])
        segments.append(Segment(s.station_id, seg_start, np.stack(seg_rows)))
    return segments, grid


@dataclass
class Scaler:
    """Per-feature affine normalization fit on the training portion only."""

    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, rows: np.ndarray) -> "Scaler":
        if rows.size == 0:
            raise ConfigError("scaler fit needs at least one row")
        mean = rows.mean(axis=0)
        std = rows.std(axis=0)  # population standard deviation
        for i, s in enumerate(std):
            if s <= 0:
                raise ConfigError(f"feature {FEATURE_NAMES[i]!r} has zero variance on the training split")
        return cls(mean=mean, std=std)

    def transform(self, x: np.ndarray) -> np.ndarray:
        return (x - self.mean) / self.std

    def inverse(self, x: np.ndarray) -> np.ndarray:
        return x * self.std + self.mean

    def transform_speed(self, x: np.ndarray) -> np.ndarray:
        return (x - self.mean[WIND_SPEED_IDX]) / self.std[WIND_SPEED_IDX]

    def inverse_speed(self, x: np.ndarray) -> np.ndarray:
        return x * self.std[WIND_SPEED_IDX] + self.mean[WIND_SPEED_IDX]


def clock_features(minutes: np.ndarray) -> np.ndarray:
    """[minute-of-hour, hour-of-day, day-of-month, week-of-year] scaled to [-0.5, 0.5]."""
    out = np.empty(minutes.shape + (4,), dtype=np.float64)
    for i, m in enumerate(np.asarray(minutes).reshape(-1)):
        stamp = datetime.fromtimestamp(int(m) * 60, tz=timezone.utc)
        week = stamp.isocalendar()[1]
        flat = (
            stamp.minute / 59.0 - 0.5,
            stamp.hour / 23.0 - 0.5,
            (stamp.day - 1) / 30.0 - 0.5,
            (week - 1) / 52.0 - 0.5,
        )
        out.reshape(-1, 4)[i] = flat
    return out


@dataclass
class SampleWindow:
    """One training example: look-back features, clock stamps, future targets."""

    start: int  # grid step of the first look-back position
    station_idx: np.ndarray  # [N] rows into the station table
    features: np.ndarray  # [N, S, 8] scaled
    stamps: np.ndarray  # [S+P, 4]
    target: np.ndarray | None  # [N, P] scaled wind speed

    @property
    def num_stations(self) -> int:
        return len(self.station_idx)


def make_windows(
    segments: list[Segment],
    grid: TimeGrid,
    stations: StationSet,
    scaler: Scaler,
    lookback: int,
    horizon: int,
    stride: int = 1,
) -> list[SampleWindow]:
    """Slide a lookback+horizon window over the grid; each sample keeps the
    stations with complete data for its whole span."""
    if stride < 1:
        raise ConfigError("stride must be >= 1")
    span = lookback + horizon
    if grid.length < span:
        return []
    station_row = {sid: i for i, sid in enumerate(stations.ids)}
    by_station: dict[str, list[Segment]] = {}
    for seg in segments:
        by_station.setdefault(seg.station_id, []).append(seg)

    windows: list[SampleWindow] = []
    for t0 in range(0, grid.length - span + 1, stride):
        feats, idxs, targets = [], [], []
        for sid, segs in by_station.items():
            if sid not in station_row:
                continue
            for seg in segs:
                if seg.start <= t0 and seg.stop >= t0 + span:
                    rows = seg.features[t0 - seg.start : t0 - seg.start + span]
                    scaled = scaler.transform(rows)
                    feats.append(scaled[:lookback])
                    targets.append(scaled[lookback:, WIND_SPEED_IDX])
                    idxs.append(station_row[sid])
                    break
        if not feats:
            continue
        order = np.argsort(idxs, kind="stable")
        stamps = clock_features(grid.minutes_at(np.arange(t0, t0 + span)))
        windows.append(
            SampleWindow(
                start=t0,
                station_idx=np.array(idxs, dtype=np.int64)[order],
                features=np.stack(feats)[order],
                stamps=stamps,
                target=np.stack(targets)[order],
            )
        )
    return windows


def chronological_split(
    windows: list[SampleWindow], grid: TimeGrid, span: int
) -> tuple[list[SampleWindow], list[SampleWindow], list[SampleWindow]]:
    """60/20/20 by time; windows overlapping a boundary are dropped."""
    b1 = math.floor(grid.length * 0.6)
    b2 = math.floor(grid.length * 0.8)
    train = [w for w in windows if w.start + span <= b1]
    val = [w for w in windows if w.start >= b1 and w.start + span <= b2]
    test = [w for w in windows if w.start >= b2]
    return train, val, test


def train_period_rows(segments: list[Segment], grid: TimeGrid) -> np.ndarray:
    """All feature rows that fall inside the first 60% of the grid."""
    b1 = math.floor(grid.length * 0.6)
    rows = [seg.features[: max(0, min(seg.features.shape[0], b1 - seg.start))] for seg in segments if seg.start < b1]
    rows = [r for r in rows if r.size]
    if not rows:
        return np.zeros((0, len(FEATURE_NAMES)))
    return np.concatenate(rows, axis=0)


@dataclass
class Dataset:
    stations: StationSet
    scaler: Scaler
    grid: TimeGrid
    lookback: int
    horizon: int
    train: list[SampleWindow]
    val: list[SampleWindow]
    test: list[SampleWindow]

    def split(self, name: str) -> list[SampleWindow]:
        try:
            return {"train": self.train, "val": self.val, "test": self.test}[name]
        except KeyError:
            raise ConfigError(f"unknown split {name!r}") from None


def load_stations_csv(path) -> StationSet:
    ids, lat, lon = [], [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != STATION_COLUMNS:
            raise IngestError(f"{path}: station header must be {','.join(STATION_COLUMNS)}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                ids.append(row[0].strip())
                lat.append(float(row[1]))
                lon.append(float(row[2]))
            except (IndexError, ValueError) as e:
                raise IngestError(f"{path}:{lineno}: {e}") from None
    return StationSet(ids=ids, lat=np.array(lat), lon=np.array(lon))


def build_dataset(
    measurements_path,
    stations_path,
    lookback: int,
    horizon: int,
    stride: int = 1,
) -> Dataset:
    """Full pipeline: ingest, clean, fit scaler on the training period,
    window, and split chronologically."""
    stations = load_stations_csv(stations_path)
    series = ingest_csv(measurements_path)
    segments, grid = clean_gaps(series)
    scaler = Scaler.fit(train_period_rows(segments, grid))
    windows = make_windows(segments, grid, stations, scaler, lookback, horizon, stride)
    train, val, test = chronological_split(windows, grid, lookback + horizon)
    return Dataset(
        stations=stations,
        scaler=scaler,
        grid=grid,
        lookback=lookback,
        horizon=horizon,
        train=train,
        val=val,
        test=test,
    )


# ---------------------------------------------------------------------------
# synthetic generator
# ---------------------------------------------------------------------------


@dataclass
class SynthParams:
    """Signal mix for the synthetic wind field.

    Wind speed per station = base + diurnal sinusoid + AR(2) colour
    + an advected shared field (delayed by distance along the prevailing
    direction) + white noise, clipped to stay non-negative.
    """

    base_speed: float = 8.0
    diurnal_amp: float = 2.0
    diurnal_period: int = 144  # steps; 144 x 10 min = 24 h
    ar_amp: float = 1.0
    ar_coeffs: tuple[float, float] = (0.75, -0.1)
    advect_amp: float = 2.5
    advect_bearing_deg: float = 45.0  # direction of travel, degrees east of north
    advect_speed: float = 0.12  # degrees advanced per step
    advect_smooth: int = 25  # smoothing window of the shared field
    noise_amp: float = 0.3
    lat_range: tuple[float, float] = (56.0, 60.0)
    lon_range: tuple[float, float] = (2.0, 6.0)
    start: str = "2021-01-01T00:00:00Z"


@dataclass
class SynthData:
    stations: StationSet
    times: np.ndarray  # [n_steps] epoch minutes
    raw: np.ndarray  # [n_stations, n_steps, 7] raw measurement columns
    delays: np.ndarray  # [n_stations] advection delay in steps


def _smooth(x: np.ndarray, window: int) -> np.ndarray:
    window = min(window, len(x))
    if window <= 1:
        return x
    kernel = np.ones(window) / window
    return np.convolve(x, kernel, mode="same")


def synth_generate(n_stations: int, n_steps: int, seed: int, params: SynthParams | None = None) -> SynthData:
    """Deterministic synthetic measurement field for up to 14 stations."""
    if n_stations < 1 or n_stations > 14:
        raise ConfigError("n_stations must be between 1 and 14")
    if n_steps < 2:
        raise ConfigError("n_steps must be >= 2")
    p = params or SynthParams()
    rng = np.random.default_rng(seed)

    lat = rng.uniform(*p.lat_range, n_stations)
    lon = rng.uniform(*p.lon_range, n_stations)
    stations = StationSet(ids=[f"SYN{i:02d}" for i in range(n_stations)], lat=lat, lon=lon)

    bearing = math.radians(p.advect_bearing_deg)
    direction = np.array([math.sin(bearing), math.cos(bearing)])  # (d_lon, d_lat)
    proj = lon * direction[0] + lat * direction[1]
    if p.advect_speed > 0:
        delays = np.round((proj - proj.min()) / p.advect_speed).astype(int)
    else:
        delays = np.zeros(n_stations, dtype=int)
    max_delay = int(delays.max()) if n_stations else 0

    shared = rng.standard_normal(n_steps + max_delay)
    shared = _smooth(shared, p.advect_smooth)
    sd = shared.std()
    if sd > 0:
        shared = shared / sd

    t = np.arange(n_steps)
    start_minutes = parse_timestamp(p.start)
    times = start_minutes + t * STEP_MINUTES
    diurnal = np.sin(2 * np.pi * (t + (start_minutes // STEP_MINUTES)) / p.diurnal_period)

    raw = np.zeros((n_stations, n_steps, 7))
    phi1, phi2 = p.ar_coeffs
    for i in range(n_stations):
        ar = np.zeros(n_steps)
        eps = rng.standard_normal(n_steps)
        for j in range(2, n_steps):
            ar[j] = phi1 * ar[j - 1] + phi2 * ar[j - 2] + 0.35 * eps[j]
        advected = shared[max_delay - delays[i] : max_delay - delays[i] + n_steps]
        speed = (
            p.base_speed
            + p.diurnal_amp * diurnal
            + p.ar_amp * ar
            + p.advect_amp * advected
            + p.noise_amp * rng.standard_normal(n_steps)
        )
        speed = np.clip(speed, 0.05, None)
        gust = speed + np.abs(0.4 * rng.standard_normal(n_steps))

        temp = 8.0 + 4.0 * np.sin(2 * np.pi * (t - 36) / p.diurnal_period) + _smooth(rng.standard_normal(n_steps), 45)
        pressure = 1013.0 + 4.0 * _smooth(rng.standard_normal(n_steps), 101)
        dew = temp - 2.0 - np.abs(_smooth(rng.standard_normal(n_steps), 31))
        humidity = np.clip(78.0 + 8.0 * _smooth(rng.standard_normal(n_steps), 31), 5.0, 100.0)
        wind_dir = (p.advect_bearing_deg + 180.0 + 20.0 * _smooth(rng.standard_normal(n_steps), 51)) % 360.0

        raw[i, :, 0] = temp
        raw[i, :, 1] = pressure
        raw[i, :, 2] = dew
        raw[i, :, 3] = humidity
        raw[i, :, 4] = wind_dir
        raw[i, :, 5] = speed
        raw[i, :, 6] = gust
    return SynthData(stations=stations, times=times, raw=raw, delays=delays)


def write_measurements_csv(path, synth: SynthData) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(MEASUREMENT_COLUMNS)
        for i, sid in enumerate(synth.stations.ids):
            for j, minutes in enumerate(synth.times):
                row = synth.raw[i, j]
                writer.writerow(
                    [
                        sid,
                        format_timestamp(int(minutes)),
                        f"{row[0]:.4f}",
                        f"{row[1]:.4f}",
                        f"{row[2]:.4f}",
                        f"{row[3]:.4f}",
                        f"{row[4]:.4f}",
                        f"{row[5]:.4f}",
                        f"{row[6]:.4f}",
                    ]
                )


def write_stations_csv(path, stations: StationSet) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(STATION_COLUMNS)
        for sid, la, lo in zip(stations.ids, stations.lat, stations.lon):
            writer.writerow([sid, f"{la:.6f}", f"{lo:.6f}"])
