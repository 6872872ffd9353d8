"""Optimization, training loop, checkpointing, and the connectivity sweep.

Training minimises mean squared error on the scaled targets with Adam and
a per-epoch learning-rate decay. Each epoch logs train/validation MSE as a
newline-delimited JSON record, and the parameters with the best validation
MSE are what the checkpoint keeps. A non-finite loss aborts immediately,
naming the step that produced it.
"""
from __future__ import annotations

import hashlib
import json
import os
import time
from dataclasses import dataclass

import numpy as np

from . import numerics as nc
from .data import Dataset
from .errors import ConfigError, ContractError, TrainingDiverged
from .graphs import build_batch
from .metrics import evaluate
from .models import ForecastModel, ModelConfig, build_model
from .numerics import Tensor


def lr_schedule(epoch: int, base_lr: float = 0.001, decay: float = 0.8) -> float:
    """Learning rate after ``epoch`` whole epochs of decay."""
    if epoch < 0:
        raise ConfigError("epoch must be >= 0")
    return base_lr * decay**epoch


class Adam:
    """Adam with bias correction (beta1=0.9, beta2=0.999, eps=1e-8)."""

    def __init__(self, params: list[Tensor], lr: float = 0.001, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = params
        self.lr = lr
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.t = 0
        self.m = [np.zeros_like(p.data) for p in params]
        self.v = [np.zeros_like(p.data) for p in params]

    def step(self) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        for i, p in enumerate(self.params):
            g = p.grad
            if g is None:
                continue
            self.m[i] = b1 * self.m[i] + (1 - b1) * g
            self.v[i] = b2 * self.v[i] + (1 - b2) * (g * g)
            m_hat = self.m[i] / (1 - b1**self.t)
            v_hat = self.v[i] / (1 - b2**self.t)
            p.data -= (self.lr * m_hat / (np.sqrt(v_hat) + self.eps)).astype(p.data.dtype)

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None


# ---------------------------------------------------------------------------
# checkpoints
# ---------------------------------------------------------------------------

CHECKPOINT_FORMAT_VERSION = 1


def save_checkpoint(path, model: ForecastModel) -> str:
    """Binary parameter archive + text manifest (name, shape, sha256)."""
    named = model.named_parameters()
    arrays = {f"param::{name}": p.data for name, p in named}
    meta = {
        "format_version": CHECKPOINT_FORMAT_VERSION,
        "config": model.config.to_dict(),
    }
    path = str(path)
    tmp = path + ".tmp"
    with open(tmp, "wb") as fh:
        np.savez(fh, __meta__=np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8), **arrays)
    os.replace(tmp, path)

    manifest_path = path + ".manifest.txt"
    lines = [f"format_version {CHECKPOINT_FORMAT_VERSION}"]
    for name, p in named:
        digest = hashlib.sha256(np.ascontiguousarray(p.data).tobytes()).hexdigest()
        lines.append(f"{name} {'x'.join(map(str, p.data.shape))} {digest}")
    tmp = manifest_path + ".tmp"
    with open(tmp, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    os.replace(tmp, manifest_path)
    return path


def load_checkpoint(path) -> ForecastModel:
    with np.load(path) as blob:
        meta = json.loads(bytes(blob["__meta__"]).decode())
        if meta.get("format_version") != CHECKPOINT_FORMAT_VERSION:
            raise ConfigError(f"unsupported checkpoint format {meta.get('format_version')!r}")
        config = ModelConfig(**meta["config"])
        model = build_model(config)
        named = dict(model.named_parameters())
        for key in blob.files:
            if not key.startswith("param::"):
                continue
            name = key[len("param::") :]
            if name not in named:
                raise ConfigError(f"checkpoint parameter {name!r} not in model")
            if named[name].data.shape != blob[key].shape:
                raise ConfigError(f"checkpoint parameter {name!r} has shape {blob[key].shape}, expected {named[name].data.shape}")
            named[name].data = blob[key].astype(config.np_dtype)
    return model


# ---------------------------------------------------------------------------
# training loop
# ---------------------------------------------------------------------------


@dataclass
class TrainConfig:
    epochs: int = 30
    batch_size: int = 32
    lr: float = 0.001
    lr_decay: float = 0.8
    seed: int = 0
    n_closest: str | int = "complete"
    max_val_windows: int | None = None

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise ConfigError("epochs and batch_size must be >= 1")
        if self.lr <= 0 or not 0 < self.lr_decay <= 1:
            raise ConfigError("lr must be > 0 and lr_decay in (0, 1]")


@dataclass
class TrainResult:
    model: ForecastModel
    log: list[dict]
    best_val_mse: float
    best_epoch: int


def _epoch_batches(windows, batch_size, rng):
    order = rng.permutation(len(windows))
    for i in range(0, len(order), batch_size):
        yield [windows[j] for j in order[i : i + batch_size]]


def _validation_mse(model, windows, stations, n_closest, batch_size, edge_cache) -> float:
    total, count = 0.0, 0
    for i in range(0, len(windows), batch_size):
        batch = build_batch(windows[i : i + batch_size], stations, n_closest, edge_cache)
        with nc.no_grad():
            out = model(batch)
        diff = out.data[:, :, 0] - batch.targets
        total += float((diff * diff).sum())
        count += diff.size
    return total / max(1, count)


def train(
    model_config: ModelConfig,
    dataset: Dataset,
    train_config: TrainConfig | None = None,
    log_sink=None,
) -> TrainResult:
    """Train one model; returns it loaded with the best-validation parameters.

    ``log_sink`` is called with one dict per epoch (after it is appended to
    the returned log), so callers can stream NDJSON.
    """
    tc = train_config or TrainConfig()
    if not dataset.train:
        raise ContractError("training split is empty")
    model = build_model(model_config)
    params = model.parameters()
    if not params:
        raise ContractError(f"variant {model_config.variant!r} has no trainable parameters")
    optimizer = Adam(params, lr=tc.lr)
    rng = np.random.default_rng(tc.seed)
    edge_cache: dict = {}

    val_windows = dataset.val if dataset.val else dataset.train
    if tc.max_val_windows is not None:
        val_windows = val_windows[: tc.max_val_windows]

    log: list[dict] = []
    best_val = np.inf
    best_epoch = -1
    best_params: list[np.ndarray] | None = None

    for epoch in range(tc.epochs):
        t0 = time.time()
        optimizer.lr = lr_schedule(epoch, tc.lr, tc.lr_decay)
        total, count = 0.0, 0
        for step, chunk in enumerate(_epoch_batches(dataset.train, tc.batch_size, rng)):
            batch = build_batch(chunk, dataset.stations, tc.n_closest, edge_cache)
            out = model(batch, rng=rng)
            target = nc.Tensor(batch.targets.astype(model_config.np_dtype))
            loss = ((out[:, :, 0] - target) ** 2.0).mean()
            loss_val = loss.item()
            if not np.isfinite(loss_val):
                raise TrainingDiverged(
                    f"non-finite loss at epoch {epoch}, step {step} (variant {model_config.variant})"
                )
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            total += loss_val * batch.targets.size
            count += batch.targets.size
        val_mse = _validation_mse(
            model, val_windows, dataset.stations, tc.n_closest, tc.batch_size, edge_cache
        )
        record = {
            "epoch": epoch,
            "train_mse": total / max(1, count),
            "val_mse": val_mse,
            "lr": optimizer.lr,
            "wall_seconds": time.time() - t0,
        }
        log.append(record)
        if log_sink is not None:
            log_sink(record)
        if val_mse < best_val:
            best_val = val_mse
            best_epoch = epoch
            best_params = [p.data.copy() for p in params]

    if best_params is not None:
        for p, data in zip(params, best_params):
            p.data = data
    return TrainResult(model=model, log=log, best_val_mse=float(best_val), best_epoch=best_epoch)


# ---------------------------------------------------------------------------
# connectivity sweep
# ---------------------------------------------------------------------------


def connectivity_sweep(
    model_config: ModelConfig,
    dataset: Dataset,
    k_values: list,
    train_config: TrainConfig | None = None,
    split: str = "test",
) -> list[dict]:
    """Train/evaluate per connectivity level; MAE normalised by the k=0 row.

    The returned rows carry raw test MAE and MAE / MAE_0, where MAE_0 is
    the error without any spatial information (self-loops only). If 0 is
    not among ``k_values`` it is run anyway to anchor the normalisation.
    """
    tc = train_config or TrainConfig()
    parsed = [str(k) for k in k_values]
    anchor_needed = "0" not in parsed
    run_list = (["0"] if anchor_needed else []) + parsed

    results: dict[str, float] = {}
    for k in run_list:
        cfg_tc = TrainConfig(
            epochs=tc.epochs,
            batch_size=tc.batch_size,
            lr=tc.lr,
            lr_decay=tc.lr_decay,
            seed=tc.seed,
            n_closest=k,
            max_val_windows=tc.max_val_windows,
        )
        result = train(model_config, dataset, cfg_tc)
        report = evaluate(result.model, dataset, split=split, n_closest=k)
        results[k] = report.mae

    mae0 = results["0"]
    rows = []
    for k in parsed:
        rows.append(
            {
                "n_closest": k,
                "mae_ms": results[k],
                "mae_normalized": results[k] / mae0 if mae0 > 0 else float("nan"),
            }
        )
    return rows
