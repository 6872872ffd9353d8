"""Station graphs and the edge/node message-passing engine.

Stations are nodes carrying feature time series; directed edges carry the
coordinate offset between sender and receiver. Connectivity is controlled
by ``n_closest``: each node receives from its k nearest stations plus a
self-loop, "complete" wires everyone to everyone (N^2 edges including
self-loops), and 0 leaves only self-loops so every station is forecast
from its own history alone.

A batch of samples is evaluated as one disjoint union graph: node rows of
all samples are concatenated and edge indices offset, so varying station
counts per sample need no padding.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import numerics as nc
from .errors import ConfigError, ShapeError
from .layers import Module
from .numerics import Tensor


@dataclass
class StationSet:
    """Station identifiers with coordinates in decimal degrees."""

    ids: list[str]
    lat: np.ndarray
    lon: np.ndarray

    def __post_init__(self):
        self.lat = np.asarray(self.lat, dtype=np.float64)
        self.lon = np.asarray(self.lon, dtype=np.float64)
        if not (len(self.ids) == len(self.lat) == len(self.lon)):
            raise ShapeError("station ids/lat/lon lengths differ")

    def __len__(self) -> int:
        return len(self.ids)

    def subset(self, idx: np.ndarray) -> "StationSet":
        return StationSet([self.ids[i] for i in idx], self.lat[idx], self.lon[idx])


def parse_n_closest(value) -> int | str:
    if isinstance(value, str):
        if value.lower() == "complete":
            return "complete"
        try:
            value = int(value)
        except ValueError:
            raise ConfigError(f"n_closest must be an integer or 'complete', got {value!r}") from None
    if value < 0:
        raise ConfigError("n_closest must be >= 0")
    return int(value)


def build_edges(stations: StationSet, n_closest) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Directed edge list (senders, receivers, features [M, 2]).

    Every node receives a self-loop plus edges from its ``n_closest``
    nearest stations by Euclidean distance in (lat, lon) degrees; distance
    ties break deterministically by station order. Edge features are
    [lon_receiver - lon_sender, lat_receiver - lat_sender]; self-loops are
    (0, 0).
    """
    n = len(stations)
    mode = parse_n_closest(n_closest)
    k = n - 1 if mode == "complete" else min(mode, n - 1)

    senders: list[int] = []
    receivers: list[int] = []
    d2 = (stations.lat[:, None] - stations.lat[None, :]) ** 2 + (
        stations.lon[:, None] - stations.lon[None, :]
    ) ** 2
    for j in range(n):
        senders.append(j)  # self-loop first
        receivers.append(j)
        order = np.argsort(d2[j], kind="stable")
        neighbours = [i for i in order if i != j][:k]
        senders.extend(neighbours)
        receivers.extend([j] * len(neighbours))
    s = np.asarray(senders, dtype=np.int64)
    r = np.asarray(receivers, dtype=np.int64)
    feats = np.stack([stations.lon[r] - stations.lon[s], stations.lat[r] - stations.lat[s]], axis=-1)
    return s, r, feats


@dataclass
class GraphBatch:
    """Disjoint union of per-sample station graphs, model-ready."""

    node_features: np.ndarray  # [N_total, S, F]
    stamps: np.ndarray  # [N_total, S+P, 4], scaled clock features
    senders: np.ndarray  # [M_total] global node indices
    receivers: np.ndarray  # [M_total]
    edge_features: np.ndarray  # [M_total, 2]
    node_sample: np.ndarray  # [N_total] originating sample per node row
    station_index: np.ndarray  # [N_total] row in the full station table
    targets: np.ndarray | None = None  # [N_total, P] scaled wind speed

    @property
    def num_nodes(self) -> int:
        return self.node_features.shape[0]

    @property
    def num_edges(self) -> int:
        return self.senders.shape[0]


def build_batch(windows, stations: StationSet, n_closest, edge_cache: dict | None = None) -> GraphBatch:
    """Assemble sample windows into one union graph.

    Each window carries ``station_idx`` (rows into ``stations``), features
    [N, S, F], stamps [S+P, 4] and optionally a target [N, P]. Edges are
    built per distinct station subset and cached across calls.
    """
    if edge_cache is None:
        edge_cache = {}
    feats, stamps, samples, stat_rows = [], [], [], []
    senders, receivers, efeats = [], [], []
    targets = []
    offset = 0
    for si, w in enumerate(windows):
        idx = np.asarray(w.station_idx)
        key = (tuple(idx.tolist()), str(n_closest))
        if key not in edge_cache:
            edge_cache[key] = build_edges(stations.subset(idx), n_closest)
        s, r, ef = edge_cache[key]
        n = len(idx)
        feats.append(w.features)
        stamps.append(np.broadcast_to(w.stamps[None], (n,) + w.stamps.shape))
        samples.append(np.full(n, si, dtype=np.int64))
        stat_rows.append(idx)
        senders.append(s + offset)
        receivers.append(r + offset)
        efeats.append(ef)
        if w.target is not None:
            targets.append(w.target)
        offset += n
    return GraphBatch(
        node_features=np.concatenate(feats, axis=0),
        stamps=np.concatenate(stamps, axis=0),
        senders=np.concatenate(senders),
        receivers=np.concatenate(receivers),
        edge_features=np.concatenate(efeats, axis=0),
        node_sample=np.concatenate(samples),
        station_index=np.concatenate(stat_rows),
        targets=np.concatenate(targets, axis=0) if targets else None,
    )


def aggregate_edges(edge_feats: Tensor, receivers: np.ndarray, num_nodes: int) -> Tensor:
    """Mean of updated edge features over each node's incoming edges."""
    return nc.segment_mean(edge_feats, receivers, num_nodes)


class GraphBlock(Module):
    """One edge-update / aggregate / node-update round.

    ``edge_update`` consumes [edge, sender, receiver] features concatenated
    along the feature axis; ``node_update`` consumes [node, aggregated edge]
    features. Both are callables (x, rng) -> Tensor of width d.
    """

    def __init__(self, edge_update: Module, node_update: Module):
        self.edge_update = edge_update
        self.node_update = node_update

    def __call__(
        self,
        nodes: Tensor,
        edges: Tensor,
        senders: np.ndarray,
        receivers: np.ndarray,
        rng: np.random.Generator | None = None,
    ) -> tuple[Tensor, Tensor]:
        v_send = nc.take_rows(nodes, senders)
        v_recv = nc.take_rows(nodes, receivers)
        edges_new = self.edge_update(nc.concat([edges, v_send, v_recv], axis=-1), rng=rng)
        agg = aggregate_edges(edges_new, receivers, nodes.shape[0])
        nodes_new = self.node_update(nc.concat([nodes, agg], axis=-1), rng=rng)
        return nodes_new, edges_new


def gnn_forward(
    nodes: Tensor,
    edges: Tensor,
    senders: np.ndarray,
    receivers: np.ndarray,
    blocks: list[GraphBlock],
    rng: np.random.Generator | None = None,
) -> Tensor:
    """Run stacked graph blocks (distinct weights per block) and return node features."""
    for block in blocks:
        nodes, edges = block(nodes, edges, senders, receivers, rng=rng)
    return nodes
