"""Series decomposition: multilevel wavelet filter bank and moving-average split.

The wavelet path decomposes a series into one low-frequency approximation
plus per-level band-limited detail components via cascaded stride-2
filtering with the 8-tap Daubechies-4 pair. Boundary handling is symmetric
extension, and the inverse is exact: summing the independently
reconstructed components returns the input to machine precision.

Layout convention: series live on the LAST axis; all functions are
vectorized over any leading axes (stations, channels, batch).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import numerics as nc
from .errors import ConfigError, DecompositionError

# Daubechies-4 decomposition low-pass taps (orthonormal, sum = sqrt(2)).
_DB4_LO = np.array(
    [
        -0.010597401784997278,
        0.032883011666982945,
        0.030841381835986965,
        -0.18703481171888114,
        -0.02798376941698385,
        0.6308807679295904,
        0.7148465705525415,
        0.23037781330885523,
    ]
)


def _qmf_highpass(lo: np.ndarray) -> np.ndarray:
    k = np.arange(len(lo))
    return (-1.0) ** k * lo[::-1]


@dataclass(frozen=True)
class WaveletFilters:
    """Low/high-pass analysis pair; validated at construction."""

    lowpass: np.ndarray = field(default_factory=lambda: _DB4_LO.copy())
    highpass: np.ndarray | None = None

    def __post_init__(self):
        if self.highpass is None:
            object.__setattr__(self, "highpass", _qmf_highpass(self.lowpass))
        self.validate()

    @property
    def taps(self) -> int:
        return len(self.lowpass)

    def validate(self, tol: float = 1e-10) -> None:
        lo, hi = self.lowpass, self.highpass
        if len(lo) != len(hi):
            raise ConfigError("filter pair lengths differ")
        if abs(lo.sum() - np.sqrt(2.0)) > tol:
            raise ConfigError("low-pass taps must sum to sqrt(2)")
        if abs(hi.sum()) > tol:
            raise ConfigError("high-pass taps must sum to 0")
        for m in range(len(lo) // 2):
            dot = float(np.dot(lo[: len(lo) - 2 * m], lo[2 * m :]))
            want = 1.0 if m == 0 else 0.0
            if abs(dot - want) > tol:
                raise ConfigError(f"low-pass taps fail orthonormality at shift {2 * m}")


DB4 = WaveletFilters()


def dwd_level(x, filters: WaveletFilters = DB4) -> tuple[nc.Tensor, nc.Tensor]:
    """One analysis level: stride-2 filtering into (approx, detail) half series.

    Accepts a Tensor or array shaped [..., L] with L >= the filter length;
    differentiable when given a Tensor. Output length is (L + taps - 1) // 2.
    """
    t = x if isinstance(x, nc.Tensor) else nc.Tensor(x)
    K = filters.taps
    L = t.shape[-1]
    if L < K:
        raise DecompositionError(f"series length {L} shorter than filter ({K} taps)")
    lead = t.shape[:-1]
    xc = nc.reshape(t, (-1, L, 1))
    xp = nc.pad_time(xc, K - 1, K - 1, mode="symmetric")
    # drop the first padded sample so the stride-2 grid yields (L + K - 1) // 2 outputs
    xp = xp[:, 1:, :]
    w = nc.Tensor(
        np.stack([filters.lowpass, filters.highpass], axis=-1)[:, None, :],
        dtype=t.data.dtype,
    )
    both = nc.corr1d(xp, w, stride=2)  # [B, Lc, 2]
    Lc = both.shape[-2]
    approx = nc.reshape(both[:, :, 0], lead + (Lc,))
    detail = nc.reshape(both[:, :, 1], lead + (Lc,))
    return approx, detail


def _idwt_level(approx: np.ndarray, detail: np.ndarray, n: int, filters: WaveletFilters) -> np.ndarray:
    """Exact inverse of one analysis level back to length n (numpy, vectorized)."""
    K = filters.taps
    Lc = approx.shape[-1]
    lead = approx.shape[:-1]
    up = np.zeros(lead + (2 * Lc,), dtype=approx.dtype)
    out = np.zeros(lead + (2 * Lc + K - 1,), dtype=approx.dtype)
    for coeffs, taps in ((approx, filters.lowpass), (detail, filters.highpass)):
        up[..., 0::2] = coeffs
        for k in range(K):
            out[..., k : k + 2 * Lc] += taps[k] * up
    return out[..., K - 2 : K - 2 + n]


@dataclass
class MultilevelCoeffs:
    """Raw cascade output: per-level details plus the final approximation."""

    approx: np.ndarray
    details: list[np.ndarray]  # details[0] is the finest band (level 1)
    lengths: list[int]  # input length of each cascade stage, outermost first
    filters: WaveletFilters

    @property
    def levels(self) -> int:
        return len(self.details)


def mdwd(x, levels: int, filters: WaveletFilters = DB4) -> MultilevelCoeffs:
    """Cascade `levels` analysis stages, re-decomposing the approximation."""
    if levels < 1:
        raise ConfigError(f"levels must be >= 1, got {levels}")
    arr = x.data if isinstance(x, nc.Tensor) else np.asarray(x, dtype=np.float64)
    K = filters.taps
    lengths: list[int] = []
    details: list[np.ndarray] = []
    cur = arr
    for lvl in range(levels):
        if cur.shape[-1] < K:
            raise DecompositionError(
                f"level {lvl + 1}: series of length {cur.shape[-1]} is too short "
                f"for {levels} levels with a {K}-tap filter"
            )
        lengths.append(cur.shape[-1])
        with nc.no_grad():
            a, d = dwd_level(nc.Tensor(cur), filters)
        details.append(d.data)
        cur = a.data
    return MultilevelCoeffs(approx=cur, details=details, lengths=lengths, filters=filters)


def reconstruct_component(coeffs: MultilevelCoeffs, which: str) -> np.ndarray:
    """Invert the cascade with all bands except ``which`` zeroed.

    ``which`` is "A" (or "A<levels>") for the approximation, or "D<i>" for
    detail level i in 1..levels. Output length equals the original input.
    """
    levels = coeffs.levels
    name = which.upper()
    if name in ("A", f"A{levels}"):
        keep = -1
    elif name.startswith("D"):
        try:
            keep = int(name[1:])
        except ValueError:
            raise ConfigError(f"unknown component selector {which!r}") from None
        if not 1 <= keep <= levels:
            raise ConfigError(f"component {which!r} outside 1..{levels}")
    else:
        raise ConfigError(f"unknown component selector {which!r}")

    cur = coeffs.approx if keep == -1 else np.zeros_like(coeffs.approx)
    for lvl in range(levels, 0, -1):
        d = coeffs.details[lvl - 1]
        if keep != lvl:
            d = np.zeros_like(d)
        cur = _idwt_level(cur, d, coeffs.lengths[lvl - 1], coeffs.filters)
    return cur


def reconstruct_all(coeffs: MultilevelCoeffs) -> tuple[np.ndarray, list[np.ndarray]]:
    """Approximation and every detail band, each reconstructed to input length."""
    approx = reconstruct_component(coeffs, "A")
    details = [reconstruct_component(coeffs, f"D{i}") for i in range(1, coeffs.levels + 1)]
    return approx, details


@dataclass
class DecomposedSeries:
    """Full-length approximation + detail components of one (batch of) series."""

    approximation: np.ndarray
    details: list[np.ndarray]

    @property
    def levels(self) -> int:
        return len(self.details)

    def total(self) -> np.ndarray:
        return self.approximation + sum(self.details)


def decompose_series(x, levels: int, filters: WaveletFilters = DB4) -> DecomposedSeries:
    coeffs = mdwd(x, levels, filters)
    approx, details = reconstruct_all(coeffs)
    return DecomposedSeries(approximation=approx, details=details)


def series_decompose(x, kernel: int) -> tuple[nc.Tensor, nc.Tensor]:
    """Moving-average split into (trend, seasonal); trend + seasonal == x exactly.

    Operates along the time axis (second-to-last) of a [..., T, C] tensor.
    """
    t = x if isinstance(x, nc.Tensor) else nc.Tensor(x)
    trend = nc.avg_pool1d_same(t, kernel)
    seasonal = nc.sub(t, trend)
    return trend, seasonal


def spectrum(x) -> tuple[np.ndarray, np.ndarray]:
    """Amplitude spectrum |rfft(x)| with the frequency axis in cycles/step."""
    arr = x.data if isinstance(x, nc.Tensor) else np.asarray(x, dtype=np.float64)
    L = arr.shape[-1]
    if L < 2:
        raise ConfigError("spectrum needs at least 2 samples")
    amps = np.abs(np.fft.rfft(arr, axis=-1))
    freqs = np.arange(L // 2 + 1) / L
    return freqs, amps
