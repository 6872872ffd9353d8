"""Attention mechanisms for the temporal update functions.

Five flavours share one multi-head wrapper:

* dense scaled dot-product attention,
* log-sparse masked attention with convolutional query/key transforms,
* prob-sparse attention that computes exact attention only for rows scoring
  highest on a max-minus-mean surrogate (dominant queries, or dominant keys
  with the roles transposed),
* auto-correlation attention that picks dominant time delays and averages
  circularly rolled values,
* frequency attention that transforms inputs with a real FFT, attends over
  bins (with the frequency value appended as a feature), and transforms back.

All cores take head-split tensors shaped [rows, heads, T, d_head] and are
differentiable end to end; discrete selections (masks, top-k indices,
sampled score sets) are computed outside the recorded graph.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import numerics as nc
from .errors import ConfigError, ContractError, ShapeError
from .layers import CausalConv1d, Linear, Module
from .numerics import Tensor


@dataclass
class AttentionConfig:
    """Knobs shared by every attention variant."""

    d_model: int
    heads: int
    variant: str = "dense"  # dense | logsparse | probsparse | autocorrelation
    conv_kernel: int = 0  # > 0 switches q/k to causal convolutions
    factor: float = 3.0  # sampling factor for probsparse / autocorrelation
    dominant_side: str = "queries"  # queries | keys (probsparse)
    fill: str = "mean"  # mean | zero (probsparse non-dominant rows)
    local_attn: int = 4  # logsparse
    restart_len: int = 16  # logsparse
    seed: int = 0  # stateless sampling seed

    def __post_init__(self):
        if self.d_model % self.heads != 0:
            raise ConfigError(f"d_model {self.d_model} not divisible by heads {self.heads}")
        if self.factor < 1:
            raise ConfigError("sampling factor must be >= 1")
        if self.conv_kernel < 0:
            raise ConfigError("conv kernel must be >= 1 when set")
        if self.variant not in ("dense", "logsparse", "probsparse", "autocorrelation"):
            raise ConfigError(f"unknown attention variant {self.variant!r}")
        if self.dominant_side not in ("queries", "keys"):
            raise ConfigError(f"dominant_side must be 'queries' or 'keys'")
        if self.fill not in ("mean", "zero"):
            raise ConfigError("fill must be 'mean' or 'zero'")


def logsparse_mask(L: int, local: int, restart: int) -> np.ndarray:
    """Boolean allow-matrix [L, L]: causal local window + exponential offsets.

    Within each restart-length segment, position t may attend to itself, its
    previous ``local - 1`` positions, and positions at power-of-two offsets
    back to the segment start.
    """
    if local < 1:
        raise ConfigError("local attention length must be >= 1")
    if restart < local:
        raise ConfigError("restart length must be >= local attention length")
    mask = np.zeros((L, L), dtype=bool)
    for t in range(L):
        seg_start = (t // restart) * restart
        offsets = set(range(local))
        step = 1
        while t - step >= seg_start:
            offsets.add(step)
            step *= 2
        for o in offsets:
            if 0 <= t - o and t - o >= seg_start:
                mask[t, t - o] = True
    return mask


def _num_dominant(length: int, factor: float) -> int:
    return min(length, max(1, math.ceil(factor * math.log(length))))


def probsparse_select(
    q: np.ndarray, k: np.ndarray, factor: float, side: str = "queries", seed: int = 0
) -> np.ndarray:
    """Indices of dominant rows, shape [..., u].

    The sparsity score of a query is max_j(q.k_j/sqrt(d)) - mean_j(...),
    evaluated against u_sample uniformly sampled opposite-side vectors
    (seeded, so selection is reproducible). ``side='keys'`` transposes the
    roles and scores keys against sampled queries.
    """
    if side == "keys":
        q, k = k, q
    L = q.shape[-2]
    L_other = k.shape[-2]
    u = _num_dominant(L, factor)
    u_sample = _num_dominant(L_other, factor)
    rng = np.random.default_rng([seed, L, L_other, u_sample])
    sample_idx = np.sort(rng.choice(L_other, size=u_sample, replace=False))
    k_samp = np.take(k, sample_idx, axis=-2)
    scale = 1.0 / math.sqrt(q.shape[-1])
    scores = np.matmul(q, k_samp.swapaxes(-1, -2)) * scale  # [..., L, u_sample]
    sparsity = scores.max(axis=-1) - scores.mean(axis=-1)  # [..., L]
    order = np.argsort(-sparsity, axis=-1, kind="stable")
    return np.take(order, np.arange(u), axis=-1)


def dense_attention_core(q: Tensor, k: Tensor, v: Tensor, mask: np.ndarray | None = None) -> Tensor:
    """softmax(q k^T / sqrt(d)) v on head-split tensors [..., T, d_head]."""
    if q.shape[-1] != k.shape[-1]:
        raise ShapeError(f"query/key width mismatch: {q.shape} vs {k.shape}")
    scale = 1.0 / math.sqrt(q.shape[-1])
    scores = nc.matmul(q, k.swapaxes(-1, -2)) * scale
    if mask is not None:
        if not mask.any(axis=-1).all():
            raise ContractError("attention mask has an empty row")
        scores = nc.masked_fill(scores, ~mask, -np.inf)
    attn = nc.softmax(scores, axis=-1)
    return nc.matmul(attn, v)


def probsparse_attention_core(
    q: Tensor,
    k: Tensor,
    v: Tensor,
    factor: float,
    side: str = "queries",
    fill: str = "mean",
    seed: int = 0,
) -> tuple[Tensor, np.ndarray]:
    """Prob-sparse attention; returns (output, dominant indices).

    side='queries': dominant query rows get exact attention, the rest are
    filled with the value mean (fill='mean') or zeros (fill='zero').
    side='keys': every query attends over the dominant key columns only.
    """
    idx = probsparse_select(q.data, k.data, factor, side=side, seed=seed)
    scale = 1.0 / math.sqrt(q.shape[-1])
    if side == "queries":
        q_sel = nc.select_time_rows(q, idx)
        scores = nc.matmul(q_sel, k.swapaxes(-1, -2)) * scale
        out_sel = nc.matmul(nc.softmax(scores, axis=-1), v)
        if fill == "mean":
            base = nc.broadcast_to(v.mean(axis=-2, keepdims=True), v.shape)
        else:
            base = nc.Tensor(np.zeros(v.shape), dtype=v.data.dtype)
        return nc.scatter_time_rows(base, out_sel, idx), idx
    k_sel = nc.select_time_rows(k, idx)
    v_sel = nc.select_time_rows(v, idx)
    scores = nc.matmul(q, k_sel.swapaxes(-1, -2)) * scale
    return nc.matmul(nc.softmax(scores, axis=-1), v_sel), idx


def autocorrelation_scores(q: Tensor, k: Tensor) -> Tensor:
    """Per-delay correlation R(tau) = sum_t q[t].k[t - tau], channel-averaged.

    Computed in O(T log T) as the inverse FFT of the conjugate cross-spectrum.
    """
    T = q.shape[-2]
    fq_re, fq_im = nc.rfft(q, axis=-2)
    fk_re, fk_im = nc.rfft(k, axis=-2)
    # cross power spectrum q_hat * conj(k_hat)
    re = fq_re * fk_re + fq_im * fk_im
    im = fq_im * fk_re - fq_re * fk_im
    corr = nc.irfft(re, im, T, axis=-2)  # [..., T, d_head]
    return corr.mean(axis=-1)


def autocorrelation_core(q: Tensor, k: Tensor, v: Tensor, factor: float) -> Tensor:
    """Select dominant time delays by query/key autocorrelation and average
    circularly rolled values with softmax weights."""
    T = q.shape[-2]
    corr_per_delay = autocorrelation_scores(q, k)
    k_delays = _num_dominant(T, factor)
    vals, idx = nc.topk(corr_per_delay, k_delays, axis=-1)  # [..., k_delays]
    weights = nc.softmax(vals, axis=-1)
    out = None
    for j in range(k_delays):
        w_j = weights[..., j : j + 1]
        rolled = nc.roll_time_per_row(v, idx[..., j])
        term = rolled * nc.reshape(w_j, w_j.shape + (1,))
        out = term if out is None else out + term
    return out


def split_heads(x: Tensor, heads: int) -> Tensor:
    rows, T, E = x.shape
    dk = E // heads
    return nc.reshape(x, (rows, T, heads, dk)).transpose((0, 2, 1, 3))


def merge_heads(x: Tensor) -> Tensor:
    rows, h, T, dk = x.shape
    return nc.reshape(x.transpose((0, 2, 1, 3)), (rows, T, h * dk))


class MultiHeadAttention(Module):
    """Projection wrapper: project, split heads, run the configured core,
    concatenate heads, project out.

    Input is [rows, T, d_in]; output [rows, T, d_out]. With a positive
    conv_kernel, queries and keys come from causal convolutions instead of
    position-wise linear maps (values stay position-wise).
    """

    def __init__(
        self,
        rng: np.random.Generator,
        cfg: AttentionConfig,
        d_in: int | None = None,
        d_out: int | None = None,
        dtype=np.float64,
    ):
        self.cfg = cfg
        d_in = cfg.d_model if d_in is None else d_in
        d_out = cfg.d_model if d_out is None else d_out
        if cfg.conv_kernel > 0:
            self.q_proj = CausalConv1d(rng, d_in, cfg.d_model, cfg.conv_kernel, dtype)
            self.k_proj = CausalConv1d(rng, d_in, cfg.d_model, cfg.conv_kernel, dtype)
        else:
            self.q_proj = Linear(rng, d_in, cfg.d_model, dtype)
            self.k_proj = Linear(rng, d_in, cfg.d_model, dtype)
        self.v_proj = Linear(rng, d_in, cfg.d_model, dtype)
        self.out_proj = Linear(rng, cfg.d_model, d_out, dtype)

    def __call__(self, x: Tensor) -> Tensor:
        cfg = self.cfg
        q = split_heads(self.q_proj(x), cfg.heads)
        k = split_heads(self.k_proj(x), cfg.heads)
        v = split_heads(self.v_proj(x), cfg.heads)

        zero_rows_mask = None
        if cfg.variant == "dense":
            core = dense_attention_core(q, k, v)
        elif cfg.variant == "logsparse":
            mask = logsparse_mask(x.shape[-2], cfg.local_attn, cfg.restart_len)
            core = dense_attention_core(q, k, v, mask=mask)
        elif cfg.variant == "probsparse":
            core, idx = probsparse_attention_core(
                q, k, v, cfg.factor, side=cfg.dominant_side, fill=cfg.fill, seed=cfg.seed
            )
            if cfg.dominant_side == "queries" and cfg.fill == "zero":
                # keep hard sparsity through the output projection: rows no
                # head selected stay exactly zero
                keep = np.zeros((x.shape[0], x.shape[-2]), dtype=bool)
                keep[np.arange(x.shape[0])[:, None, None], idx] = True
                zero_rows_mask = ~keep
        elif cfg.variant == "autocorrelation":
            core = autocorrelation_core(q, k, v, cfg.factor)
        else:  # pragma: no cover - guarded by AttentionConfig
            raise ConfigError(cfg.variant)

        out = self.out_proj(merge_heads(core))
        if zero_rows_mask is not None:
            out = nc.masked_fill(out, zero_rows_mask[:, :, None], 0.0)
        return out


def dominant_bins(mha: MultiHeadAttention, z: Tensor | np.ndarray) -> np.ndarray:
    """Union over heads of the prob-sparse selection the wrapped MHA makes on z."""
    data = z.data if isinstance(z, Tensor) else np.asarray(z)
    cfg = mha.cfg
    with nc.no_grad():
        t = nc.Tensor(data)
        q = split_heads(mha.q_proj(t), cfg.heads)
        k = split_heads(mha.k_proj(t), cfg.heads)
    idx = probsparse_select(q.data, k.data, cfg.factor, side=cfg.dominant_side, seed=cfg.seed)
    keep = np.zeros((data.shape[0], data.shape[-2]), dtype=bool)
    keep[np.arange(data.shape[0])[:, None, None], idx] = True
    return keep


class FrequencyAttention(Module):
    """Attention over real-FFT bins of the time axis.

    Queries, keys and values are the FFT of the input; real part, imaginary
    part and the normalised bin frequency are concatenated as features. The
    inner attention is convolutional prob-sparse over dominant bins with
    zero fill, so the reconstructed output's spectrum is supported only on
    the selected bins. Output returns to the time domain at input length.
    """

    def __init__(
        self,
        rng: np.random.Generator,
        d: int,
        heads: int,
        conv_kernel: int = 3,
        factor: float = 3.0,
        seed: int = 0,
        dtype=np.float64,
    ):
        self.d = d
        self.inner_cfg = AttentionConfig(
            d_model=d,
            heads=heads,
            variant="probsparse",
            conv_kernel=conv_kernel,
            factor=factor,
            dominant_side="queries",
            fill="zero",
            seed=seed,
        )
        self.inner = MultiHeadAttention(rng, self.inner_cfg, d_in=2 * d + 1, d_out=2 * d, dtype=dtype)

    def frequency_features(self, x: Tensor) -> Tensor:
        """rfft over time plus the normalised frequency channel: [rows, F, 2d+1]."""
        T = x.shape[-2]
        re, im = nc.rfft(x, axis=-2)
        bins = re.shape[-2]
        freq = np.broadcast_to(
            (np.arange(bins) / T)[None, :, None], (x.shape[0], bins, 1)
        ).astype(x.data.dtype)
        return nc.concat([re, im, nc.Tensor(freq)], axis=-1)

    def __call__(self, x: Tensor) -> Tensor:
        T = x.shape[-2]
        z = self.frequency_features(x)
        out = self.inner(z)  # [rows, bins, 2d]
        out_re = out[..., : self.d]
        out_im = out[..., self.d :]
        return nc.irfft(out_re, out_im, T, axis=-2)
