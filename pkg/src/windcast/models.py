"""Forecasting models: a persistence baseline plus seven learned variants
assembled from embeddings, graph blocks and temporal update functions.

Every model maps a :class:`~windcast.graphs.GraphBatch` to per-node
multi-step predictions [N_total, horizon, 1] on the scaled feature scale.
Inputs cover the look-back window only; forecast slots are filled with
placeholders (last observed value, the series mean, or zeros depending on
the stream) before embedding, and the last ``horizon`` positions of the
final node features are projected to the output.

Update-function wiring per variant:

* mlp / lstm   -- position-wise MLPs / stacked LSTMs in the graph blocks,
                  vector-output heads (no positional encoding)
* transformer  -- dense attention encoder layers
* logsparse    -- sparse causal mask + convolutional queries/keys
* informer     -- prob-sparse attention over dominant queries, mean fill
* autoformer   -- autocorrelation attention with moving-average series
                  decomposition after every sub-module; trend parts
                  accumulate and rejoin at the head
* fftransformer-- wavelet-decomposed inputs in two streams: frequency
                  attention on the detail components, convolutional
                  prob-sparse (dominant keys) on the approximation
"""
from __future__ import annotations

import json
from dataclasses import dataclass, replace
from importlib import resources

import numpy as np

from . import decompose as dc
from . import numerics as nc
from .attention import AttentionConfig, FrequencyAttention, MultiHeadAttention
from .errors import ConfigError, ShapeError
from .graphs import GraphBatch, GraphBlock, aggregate_edges, gnn_forward
from .layers import LSTM, Linear, MLP, LayerNorm, Module, sinusoidal_encoding
from .numerics import Tensor

VARIANTS = (
    "persistence",
    "mlp",
    "lstm",
    "transformer",
    "logsparse",
    "informer",
    "autoformer",
    "fftransformer",
)

NUM_FEATURES = 8
WIND_SPEED_IDX = 6  # position of wind speed in the canonical feature layout
NUM_STAMPS = 4


@dataclass
class ModelConfig:
    """Hyperparameters for one model; defaults mirror the shipped per-variant file."""

    variant: str
    horizon: int
    lookback: int
    d: int = 64
    d_hidden: int = 256
    gnn_layers: int = 2
    encoder_layers: int = 1
    activation: str = "relu"
    dropout: float = 0.05
    heads: int = 8
    attn_kernel: int = 0
    local_attn: int = 4
    restart_len: int = 16
    factor: float = 3.0
    mvavg_kernel: int = 25
    num_decomp: int = 4
    update_layers: int = 2
    placeholder: str = "last"
    dtype: str = "float64"
    seed: int = 0

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ConfigError(f"unknown variant {self.variant!r}; pick one of {VARIANTS}")
        if self.horizon < 1 or self.lookback < 1:
            raise ConfigError("horizon and lookback must be positive")
        if self.gnn_layers < 1 or self.encoder_layers < 1:
            raise ConfigError("gnn_layers and encoder_layers must be >= 1")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError("dropout must be in [0, 1)")
        if self.placeholder not in ("last", "mean"):
            raise ConfigError("placeholder mode must be 'last' or 'mean'")
        if self.dtype not in ("float64", "float32"):
            raise ConfigError("dtype must be 'float64' or 'float32'")

    @property
    def np_dtype(self):
        return np.float64 if self.dtype == "float64" else np.float32

    @property
    def series_length(self) -> int:
        return self.lookback + self.horizon

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


_HORIZON_COLUMN = {1: 0, 6: 1, 24: 2}


def load_defaults() -> dict:
    with resources.files("windcast.assets").joinpath("model_defaults.json").open() as fh:
        return json.load(fh)


def default_config(variant: str, horizon: int, **overrides) -> ModelConfig:
    """Table of tuned per-variant, per-horizon defaults, with overrides on top."""
    defaults = load_defaults()
    col = _HORIZON_COLUMN.get(horizon, 1)
    spec = defaults["variants"].get(variant)
    if spec is None:
        raise ConfigError(f"unknown variant {variant!r}")
    kwargs: dict = {
        "variant": variant,
        "horizon": horizon,
        "lookback": defaults["lookback"][col],
    }
    for key, value in spec.items():
        kwargs[key] = value[col] if isinstance(value, list) else value
    kwargs.update(overrides)
    return ModelConfig(**kwargs)


# ---------------------------------------------------------------------------
# update functions
# ---------------------------------------------------------------------------


class EncoderLayer(Module):
    """attention -> add & norm -> position-wise MLP -> add & norm."""

    def __init__(self, rng, attention: Module, d: int, d_hidden: int, activation: str, dropout: float, dtype):
        self.attn = attention
        self.norm1 = LayerNorm(d, dtype)
        self.mlp = MLP(rng, d, d_hidden, d, layers=2, activation=activation, dtype=dtype)
        self.norm2 = LayerNorm(d, dtype)
        self.dropout = dropout

    def __call__(self, x: Tensor, rng=None) -> Tensor:
        x = self.norm1(x + nc.dropout(self.attn(x), self.dropout, rng))
        x = self.norm2(x + nc.dropout(self.mlp(x), self.dropout, rng))
        return x


class EncoderUpdate(Module):
    """Linear projection to model width, then a stack of encoder layers."""

    def __init__(self, rng, d_in: int, cfg: ModelConfig, attn_factory, dtype):
        self.proj = Linear(rng, d_in, cfg.d, dtype)
        self.layers = [
            EncoderLayer(rng, attn_factory(rng), cfg.d, cfg.d_hidden, cfg.activation, cfg.dropout, dtype)
            for _ in range(cfg.encoder_layers)
        ]

    def __call__(self, x: Tensor, rng=None) -> Tensor:
        x = self.proj(x)
        for layer in self.layers:
            x = layer(x, rng=rng)
        return x


class MLPUpdate(Module):
    """Position-wise feed-forward update used by the ST-MLP variant."""

    def __init__(self, rng, d_in: int, cfg: ModelConfig, dtype):
        self.mlp = MLP(rng, d_in, cfg.d_hidden, cfg.d, layers=max(1, cfg.update_layers), activation=cfg.activation, dtype=dtype)
        self.dropout = cfg.dropout

    def __call__(self, x: Tensor, rng=None) -> Tensor:
        return nc.dropout(self.mlp(x), self.dropout, rng)


class LSTMUpdate(Module):
    """Stacked LSTMs over time, returning the hidden-state sequence."""

    def __init__(self, rng, d_in: int, cfg: ModelConfig, dtype):
        dims = [d_in] + [cfg.d] * max(1, cfg.update_layers)
        self.cells = [LSTM(rng, dims[i], dims[i + 1], dtype) for i in range(len(dims) - 1)]
        self.dropout = cfg.dropout

    def __call__(self, x: Tensor, rng=None) -> Tensor:
        for cell in self.cells:
            x = cell(x)
        return nc.dropout(x, self.dropout, rng)


class AutoformerLayer(Module):
    """Autocorrelation attention and MLP, each followed by series decomposition.

    Returns the seasonal output and the trend removed by the two
    decompositions, to be accumulated by the caller.
    """

    def __init__(self, rng, cfg: ModelConfig, seed: int, dtype):
        attn_cfg = AttentionConfig(
            d_model=cfg.d, heads=cfg.heads, variant="autocorrelation", factor=cfg.factor, seed=seed
        )
        self.attn = MultiHeadAttention(rng, attn_cfg, dtype=dtype)
        self.mlp = MLP(rng, cfg.d, cfg.d_hidden, cfg.d, layers=2, activation=cfg.activation, dtype=dtype)
        self.kernel = cfg.mvavg_kernel
        self.dropout = cfg.dropout

    def __call__(self, x: Tensor, rng=None) -> tuple[Tensor, Tensor]:
        trend1, seasonal1 = dc.series_decompose(
            x + nc.dropout(self.attn(x), self.dropout, rng), self.kernel
        )
        trend2, seasonal2 = dc.series_decompose(
            seasonal1 + nc.dropout(self.mlp(seasonal1), self.dropout, rng), self.kernel
        )
        return seasonal2, trend1 + trend2


# ---------------------------------------------------------------------------
# embeddings
# ---------------------------------------------------------------------------


def append_placeholders(features: np.ndarray, horizon: int, mode: str) -> np.ndarray:
    """Extend [N, S, F] history with P forecast-slot placeholder rows."""
    n, s, f = features.shape
    if mode == "last":
        pad = np.repeat(features[:, s - 1 : s, :], horizon, axis=1)
    elif mode == "mean":
        pad = np.repeat(features.mean(axis=1, keepdims=True), horizon, axis=1)
    elif mode == "zero":
        pad = np.zeros((n, horizon, f), dtype=features.dtype)
    else:
        raise ConfigError(f"unknown placeholder mode {mode!r}")
    return np.concatenate([features, pad], axis=1)


class StreamEmbedding(Module):
    """Learned value/temporal projections plus optional positional table."""

    def __init__(self, rng, d_in: int, d: int, use_temporal: bool, use_positional: bool, dtype):
        self.value = Linear(rng, d_in, d, dtype)
        self.temporal = Linear(rng, NUM_STAMPS, d, dtype) if use_temporal else None
        self.use_positional = use_positional
        self.d = d
        self.np_dtype = dtype

    def __call__(self, values: Tensor, stamps: np.ndarray | None) -> Tensor:
        out = self.value(values)
        if self.temporal is not None:
            if stamps is None:
                raise ShapeError("temporal embedding needs time stamps")
            out = out + self.temporal(nc.Tensor(stamps.astype(self.np_dtype)))
        if self.use_positional:
            table = sinusoidal_encoding(values.shape[-2], self.d, self.np_dtype)
            out = out + nc.Tensor(table[None])
        return out


# ---------------------------------------------------------------------------
# models
# ---------------------------------------------------------------------------


class ForecastModel(Module):
    """Common surface: forward(batch, rng) -> [N_total, horizon, 1]."""

    def __init__(self, config: ModelConfig):
        self.config = config

    def forward(self, batch: GraphBatch, rng: np.random.Generator | None = None) -> Tensor:
        raise NotImplementedError

    def __call__(self, batch: GraphBatch, rng=None) -> Tensor:
        return self.forward(batch, rng=rng)


class PersistenceModel(ForecastModel):
    """Repeat each station's last observed wind speed across the horizon."""

    def forward(self, batch: GraphBatch, rng=None) -> Tensor:
        if batch.node_features.shape[1] < 1:
            raise ShapeError("persistence needs at least one past step")
        last = batch.node_features[:, -1, WIND_SPEED_IDX]
        data = np.repeat(last[:, None], self.config.horizon, axis=1)[..., None]
        return nc.Tensor(data.astype(self.config.np_dtype))


def persistence_forecast(batch: GraphBatch, horizon: int) -> np.ndarray:
    """[N_total, P] array of repeated last observed wind speeds."""
    last = batch.node_features[:, -1, WIND_SPEED_IDX]
    return np.repeat(last[:, None], horizon, axis=1)


class SpatioTemporalModel(ForecastModel):
    """Shared plumbing for the learned variants."""

    def __init__(self, config: ModelConfig):
        super().__init__(config)
        self.rng_init = np.random.default_rng(config.seed)

    def _seed(self) -> int:
        return int(self.rng_init.integers(2**31 - 1))

    # -- input preparation (constant data, kept outside the recorded graph) --

    def _prepare_nodes(self, batch: GraphBatch) -> np.ndarray:
        if batch.node_features.shape[1] != self.config.lookback:
            raise ShapeError(
                f"batch look-back {batch.node_features.shape[1]} != configured {self.config.lookback}"
            )
        x = append_placeholders(batch.node_features, self.config.horizon, self.config.placeholder)
        return x.astype(self.config.np_dtype)

    def _edge_inputs(self, batch: GraphBatch) -> tuple[np.ndarray, np.ndarray]:
        T = self.config.series_length
        m = batch.num_edges
        values = np.broadcast_to(batch.edge_features[:, None, :], (m, T, 2)).astype(self.config.np_dtype)
        stamps = batch.stamps[batch.receivers].astype(self.config.np_dtype)
        return values, stamps


class GraphStackModel(SpatioTemporalModel):
    """Variants whose node update is a single-stream module stack."""

    def __init__(self, config: ModelConfig):
        super().__init__(config)
        cfg = config
        dtype = cfg.np_dtype
        rng = self.rng_init
        use_pos = cfg.variant not in ("mlp", "lstm")
        self.node_embed = StreamEmbedding(rng, NUM_FEATURES, cfg.d, True, use_pos, dtype)
        self.edge_embed = StreamEmbedding(rng, 2, cfg.d, True, use_pos, dtype)
        self.blocks = [self._make_block(rng) for _ in range(cfg.gnn_layers)]
        self.head = self._make_head(rng)

    # -- per-variant pieces --

    def _attn_factory(self):
        cfg = self.config
        if cfg.variant == "transformer":
            acfg = AttentionConfig(d_model=cfg.d, heads=cfg.heads, variant="dense")
        elif cfg.variant == "logsparse":
            acfg = AttentionConfig(
                d_model=cfg.d,
                heads=cfg.heads,
                variant="logsparse",
                conv_kernel=cfg.attn_kernel,
                local_attn=cfg.local_attn,
                restart_len=cfg.restart_len,
            )
        elif cfg.variant == "informer":
            acfg = AttentionConfig(
                d_model=cfg.d,
                heads=cfg.heads,
                variant="probsparse",
                factor=cfg.factor,
                dominant_side="queries",
                fill="mean",
            )
        else:
            raise ConfigError(cfg.variant)

        def factory(rng):
            return MultiHeadAttention(rng, replace(acfg, seed=self._seed()), dtype=cfg.np_dtype)

        return factory

    def _vanilla_edge_update(self, rng, d_in):
        cfg = self.config
        acfg = AttentionConfig(d_model=cfg.d, heads=cfg.heads, variant="dense", seed=self._seed())
        factory = lambda r: MultiHeadAttention(r, acfg, dtype=cfg.np_dtype)
        single = replace(cfg, encoder_layers=1)
        return EncoderUpdate(rng, d_in, single, factory, cfg.np_dtype)

    def _make_block(self, rng) -> GraphBlock:
        cfg = self.config
        d_in_edge = 3 * cfg.d
        d_in_node = 2 * cfg.d
        if cfg.variant in ("mlp", "lstm"):
            edge_update = MLPUpdate(rng, d_in_edge, cfg, cfg.np_dtype)
            if cfg.variant == "mlp":
                node_update = MLPUpdate(rng, d_in_node, cfg, cfg.np_dtype)
            else:
                node_update = LSTMUpdate(rng, d_in_node, cfg, cfg.np_dtype)
        else:
            edge_update = self._vanilla_edge_update(rng, d_in_edge)
            node_update = EncoderUpdate(rng, d_in_node, cfg, self._attn_factory(), cfg.np_dtype)
        return GraphBlock(edge_update, node_update)

    def _make_head(self, rng):
        cfg = self.config
        if cfg.variant == "mlp":
            return MLP(rng, cfg.series_length * cfg.d, cfg.d_hidden, cfg.horizon, 2, cfg.activation, cfg.np_dtype)
        if cfg.variant == "lstm":
            return MLP(rng, cfg.d, cfg.d_hidden, cfg.horizon, 2, cfg.activation, cfg.np_dtype)
        return Linear(rng, cfg.d, 1, cfg.np_dtype)

    def forward(self, batch: GraphBatch, rng=None) -> Tensor:
        cfg = self.config
        x = self._prepare_nodes(batch)
        nodes = self.node_embed(nc.Tensor(x), batch.stamps.astype(cfg.np_dtype))
        evals, estamps = self._edge_inputs(batch)
        edges = self.edge_embed(nc.Tensor(evals), estamps)
        nodes = gnn_forward(nodes, edges, batch.senders, batch.receivers, self.blocks, rng=rng)

        n = batch.num_nodes
        if cfg.variant == "mlp":
            flat = nc.reshape(nodes, (n, cfg.series_length * cfg.d))
            out = self.head(flat)
            return nc.reshape(out, (n, cfg.horizon, 1))
        if cfg.variant == "lstm":
            out = self.head(nodes[:, -1, :])
            return nc.reshape(out, (n, cfg.horizon, 1))
        out = self.head(nodes)  # [n, T, 1]
        return out[:, -cfg.horizon :, :]


class AutoformerModel(SpatioTemporalModel):
    """Graph blocks whose node update is an autocorrelation encoder with
    per-sub-module series decomposition.

    Decoder-style trend routing: the look-back window is split once by the
    moving average; the seasonal part (zero placeholders in the forecast
    slots) becomes the node stream, while the trend part (persistence
    placeholders) seeds an accumulator that every decomposition adds to and
    that rejoins the seasonal stream at the output head.
    """

    def __init__(self, config: ModelConfig):
        super().__init__(config)
        cfg = config
        dtype = cfg.np_dtype
        rng = self.rng_init
        self.node_embed = StreamEmbedding(rng, NUM_FEATURES, cfg.d, True, True, dtype)
        self.trend_embed = Linear(rng, NUM_FEATURES, cfg.d, dtype)
        self.edge_embed = StreamEmbedding(rng, 2, cfg.d, True, True, dtype)
        self.edge_updates = []
        self.node_projs = []
        self.node_layers = []
        for _ in range(cfg.gnn_layers):
            self.edge_updates.append(self._edge_update(rng, 3 * cfg.d))
            self.node_projs.append(Linear(rng, 2 * cfg.d, cfg.d, dtype))
            self.node_layers.append(
                [AutoformerLayer(rng, cfg, self._seed(), dtype) for _ in range(cfg.encoder_layers)]
            )
        self.head_seasonal = Linear(rng, cfg.d, 1, dtype)
        self.head_trend = Linear(rng, cfg.d, 1, dtype)

    def _edge_update(self, rng, d_in):
        cfg = self.config
        acfg = AttentionConfig(d_model=cfg.d, heads=cfg.heads, variant="dense", seed=self._seed())
        factory = lambda r: MultiHeadAttention(r, acfg, dtype=cfg.np_dtype)
        return EncoderUpdate(rng, d_in, replace(cfg, encoder_layers=1), factory, cfg.np_dtype)

    def _split_inputs(self, batch: GraphBatch) -> tuple[np.ndarray, np.ndarray]:
        """Moving-average split of the look-back window, placeholders appended."""
        cfg = self.config
        if batch.node_features.shape[1] != cfg.lookback:
            raise ShapeError(
                f"batch look-back {batch.node_features.shape[1]} != configured {cfg.lookback}"
            )
        with nc.no_grad():
            trend_t, seasonal_t = dc.series_decompose(
                nc.Tensor(batch.node_features), cfg.mvavg_kernel
            )
        seasonal = append_placeholders(seasonal_t.data, cfg.horizon, "zero")
        trend = append_placeholders(trend_t.data, cfg.horizon, cfg.placeholder)
        return seasonal.astype(cfg.np_dtype), trend.astype(cfg.np_dtype)

    def forward(self, batch: GraphBatch, rng=None) -> Tensor:
        cfg = self.config
        seasonal, trend = self._split_inputs(batch)
        nodes = self.node_embed(nc.Tensor(seasonal), batch.stamps.astype(cfg.np_dtype))
        trend_acc = self.trend_embed(nc.Tensor(trend))
        evals, estamps = self._edge_inputs(batch)
        edges = self.edge_embed(nc.Tensor(evals), estamps)

        for edge_update, proj, layers in zip(self.edge_updates, self.node_projs, self.node_layers):
            v_send = nc.take_rows(nodes, batch.senders)
            v_recv = nc.take_rows(nodes, batch.receivers)
            edges = edge_update(nc.concat([edges, v_send, v_recv], axis=-1), rng=rng)
            agg = aggregate_edges(edges, batch.receivers, batch.num_nodes)
            x_t = proj(nc.concat([nodes, agg], axis=-1))
            for layer in layers:
                x_t, trend_part = layer(x_t, rng=rng)
                trend_acc = trend_acc + trend_part
            nodes = x_t

        out = self.head_seasonal(nodes) + self.head_trend(trend_acc)
        return out[:, -cfg.horizon :, :]


class FFTransformerModel(SpatioTemporalModel):
    """Two-stream model on wavelet-decomposed inputs.

    The frequency stream (concatenated detail components, zero placeholders,
    no positional or temporal encoding) runs frequency attention; the trend
    stream (approximation, persistence placeholders, full encoding) runs
    convolutional prob-sparse attention over dominant keys. Streams are
    summed and projected to one output per step.
    """

    def __init__(self, config: ModelConfig):
        super().__init__(config)
        cfg = config
        dtype = cfg.np_dtype
        rng = self.rng_init
        self.freq_embed = StreamEmbedding(rng, NUM_FEATURES * cfg.num_decomp, cfg.d, False, False, dtype)
        self.trend_embed = StreamEmbedding(rng, NUM_FEATURES, cfg.d, True, True, dtype)
        self.edge_embed = StreamEmbedding(rng, 2, cfg.d, True, True, dtype)

        self.edge_updates = []
        self.freq_updates = []
        self.trend_updates = []
        for _ in range(cfg.gnn_layers):
            self.edge_updates.append(self._edge_update(rng, 5 * cfg.d))
            self.freq_updates.append(
                EncoderUpdate(rng, 2 * cfg.d, cfg, self._freq_attn_factory(), dtype)
            )
            self.trend_updates.append(
                EncoderUpdate(rng, 2 * cfg.d, cfg, self._trend_attn_factory(), dtype)
            )
        self.head = Linear(rng, cfg.d, 1, dtype)

    def _edge_update(self, rng, d_in):
        cfg = self.config
        acfg = AttentionConfig(d_model=cfg.d, heads=cfg.heads, variant="dense", seed=self._seed())
        factory = lambda r: MultiHeadAttention(r, acfg, dtype=cfg.np_dtype)
        return EncoderUpdate(rng, d_in, replace(cfg, encoder_layers=1), factory, cfg.np_dtype)

    def _freq_attn_factory(self):
        cfg = self.config

        def factory(rng):
            return FrequencyAttention(
                rng,
                d=cfg.d,
                heads=cfg.heads,
                conv_kernel=max(1, cfg.attn_kernel),
                factor=cfg.factor,
                seed=self._seed(),
                dtype=cfg.np_dtype,
            )

        return factory

    def _trend_attn_factory(self):
        cfg = self.config
        acfg = AttentionConfig(
            d_model=cfg.d,
            heads=cfg.heads,
            variant="probsparse",
            conv_kernel=max(1, cfg.attn_kernel),
            factor=cfg.factor,
            dominant_side="keys",
        )

        def factory(rng):
            return MultiHeadAttention(rng, replace(acfg, seed=self._seed()), dtype=cfg.np_dtype)

        return factory

    def _decompose_inputs(self, batch: GraphBatch) -> tuple[np.ndarray, np.ndarray]:
        """Per-channel wavelet decomposition of the look-back window.

        Returns (trend [N, S, 8], freq [N, S, 8 * levels]); placeholders are
        appended afterwards, so decomposition sees history only.
        """
        cfg = self.config
        x = batch.node_features  # [N, S, F]
        series = np.moveaxis(x, 1, 2)  # [N, F, S]
        parts = dc.decompose_series(series, cfg.num_decomp)
        trend = np.moveaxis(parts.approximation, 2, 1)
        freq = np.concatenate([np.moveaxis(d, 2, 1) for d in parts.details], axis=-1)
        return trend.astype(cfg.np_dtype), freq.astype(cfg.np_dtype)

    def forward(self, batch: GraphBatch, rng=None) -> Tensor:
        cfg = self.config
        if batch.node_features.shape[1] != cfg.lookback:
            raise ShapeError(
                f"batch look-back {batch.node_features.shape[1]} != configured {cfg.lookback}"
            )
        trend_raw, freq_raw = self._decompose_inputs(batch)
        trend_full = append_placeholders(trend_raw, cfg.horizon, cfg.placeholder)
        freq_full = append_placeholders(freq_raw, cfg.horizon, "zero")

        stamps = batch.stamps.astype(cfg.np_dtype)
        v_trend = self.trend_embed(nc.Tensor(trend_full), stamps)
        v_freq = self.freq_embed(nc.Tensor(freq_full), None)
        evals, estamps = self._edge_inputs(batch)
        edges = self.edge_embed(nc.Tensor(evals), estamps)

        for edge_update, freq_update, trend_update in zip(
            self.edge_updates, self.freq_updates, self.trend_updates
        ):
            send_f = nc.take_rows(v_freq, batch.senders)
            send_t = nc.take_rows(v_trend, batch.senders)
            recv_f = nc.take_rows(v_freq, batch.receivers)
            recv_t = nc.take_rows(v_trend, batch.receivers)
            edges = edge_update(
                nc.concat([edges, send_f, send_t, recv_f, recv_t], axis=-1), rng=rng
            )
            agg = aggregate_edges(edges, batch.receivers, batch.num_nodes)
            v_freq = freq_update(nc.concat([v_freq, agg], axis=-1), rng=rng)
            v_trend = trend_update(nc.concat([v_trend, agg], axis=-1), rng=rng)

        out = self.head(v_freq + v_trend)
        return out[:, -cfg.horizon :, :]


def build_model(config: ModelConfig) -> ForecastModel:
    if config.variant == "persistence":
        return PersistenceModel(config)
    if config.variant in ("mlp", "lstm", "transformer", "logsparse", "informer"):
        return GraphStackModel(config)
    if config.variant == "autoformer":
        return AutoformerModel(config)
    if config.variant == "fftransformer":
        return FFTransformerModel(config)
    raise ConfigError(f"unknown variant {config.variant!r}")
