"""Radius proximity graphs over geo-referenced routers."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from typing import IO, NamedTuple, Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components as _cc

from . import _backend
from .geo import haversine_m, local_projection


class GeoPoint(NamedTuple):
    lat: float
    lon: float


def geo_distance(a: GeoPoint | tuple[float, float], b: GeoPoint | tuple[float, float]) -> float:
    """Great-circle distance in meters (haversine, mean Earth radius)."""
    return haversine_m(a[0], a[1], b[0], b[1])


@dataclass(frozen=True, eq=False)
class ProximityGraph:
    """Immutable undirected graph in CSR form.

    ``indices[indptr[i]:indptr[i+1]]`` are the sorted neighbours of node i.
    ``node_ids`` maps local indices back to the ids of the graph this one
    was cut from (identity for a freshly built graph).
    """

    lat: np.ndarray
    lon: np.ndarray
    indptr: np.ndarray
    indices: np.ndarray
    radius_m: float
    node_ids: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.node_ids is None:
            object.__setattr__(self, "node_ids", np.arange(self.n, dtype=np.int64))
        for arr in (self.lat, self.lon, self.indptr, self.indices, self.node_ids):
            arr.flags.writeable = False

    @property
    def n(self) -> int:
        return int(self.lat.shape[0])

    @property
    def n_edges(self) -> int:
        return int(self.indices.shape[0] // 2)

    def degrees(self) -> np.ndarray:
        return np.diff(self.indptr)

    def neighbors(self, i: int) -> np.ndarray:
        return self.indices[self.indptr[i]:self.indptr[i + 1]]

    def edges(self) -> np.ndarray:
        """``(E, 2)`` array of edges ``u < v`` in lexicographic order."""
        u = np.repeat(np.arange(self.n, dtype=np.int64), self.degrees())
        v = self.indices.astype(np.int64)
        keep = u < v
        return np.column_stack([u[keep], v[keep]])

    def edge_set(self) -> set[tuple[int, int]]:
        return {(int(u), int(v)) for u, v in self.edges()}


def _csr_from_pairs(n: int, u: np.ndarray, v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    src = np.concatenate([u, v])
    dst = np.concatenate([v, u])
    order = np.lexsort((dst, src))
    indices = dst[order].astype(np.int32)
    counts = np.bincount(src, minlength=n) if n else np.zeros(0, dtype=np.int64)
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(counts, out=indptr[1:])
    return indptr, indices


def _grid_candidates(lat: np.ndarray, lon: np.ndarray, radius_m: float):
    x, y, stretch = local_projection(lat, lon)
    # cells at least R_int wide in every direction the projection can shrink
    cell = radius_m * stretch * 1.001
    cx = np.floor((x - x.min()) / cell).astype(np.int64) + 1
    cy = np.floor((y - y.min()) / cell).astype(np.int64) + 1
    ncx = int(cx.max()) + 2
    key = cy * ncx + cx
    order = np.argsort(key, kind="stable")
    skey = key[order]
    starts = np.empty((lat.shape[0], 9), dtype=np.int64)
    ends = np.empty_like(starts)
    o = 0
    for dy in (-1, 0, 1):
        for dx in (-1, 0, 1):
            nk = (cy + dy) * ncx + (cx + dx)
            starts[:, o] = np.searchsorted(skey, nk, side="left")
            ends[:, o] = np.searchsorted(skey, nk, side="right")
            o += 1
    return order.astype(np.int64), starts, ends


def build_graph(lat: Sequence[float], lon: Sequence[float], radius_m: float,
                kernels=None) -> ProximityGraph:
    """Exact radius graph: edge (i, j) iff haversine distance <= ``radius_m``.

    Candidate pairs come from a uniform grid over a local equirectangular
    projection; every candidate is re-checked with the haversine formula.
    Intended for city-scale corpora (not spanning a pole or the
    antimeridian).
    """
    if not radius_m > 0:
        raise ValueError(f"interaction radius must be positive, got {radius_m}")
    lat = np.ascontiguousarray(lat, dtype=np.float64)
    lon = np.ascontiguousarray(lon, dtype=np.float64)
    if lat.shape != lon.shape or lat.ndim != 1:
        raise ValueError("lat and lon must be 1-D arrays of equal length")
    n = lat.shape[0]
    if n == 0:
        return ProximityGraph(lat, lon, np.zeros(1, dtype=np.int64),
                              np.zeros(0, dtype=np.int32), float(radius_m))
    kernels = kernels or _backend.kernels
    order, starts, ends = _grid_candidates(lat, lon, radius_m)
    u, v = kernels.grid_pairs(order, starts, ends, lat, lon, float(radius_m))
    indptr, indices = _csr_from_pairs(n, u, v)
    return ProximityGraph(lat, lon, indptr, indices, float(radius_m))


def graph_from_profiles(profiles, radius_m: float) -> ProximityGraph:
    lat = np.array([p.lat for p in profiles], dtype=np.float64)
    lon = np.array([p.lon for p in profiles], dtype=np.float64)
    return build_graph(lat, lon, radius_m)


def graph_from_edges(lat, lon, edges, radius_m: float = float("nan")) -> ProximityGraph:
    """Graph with an explicit edge list (tests, fixtures, imported graphs)."""
    lat = np.ascontiguousarray(lat, dtype=np.float64)
    lon = np.ascontiguousarray(lon, dtype=np.float64)
    e = np.asarray(list(edges), dtype=np.int64).reshape(-1, 2)
    if e.size and (e[:, 0] == e[:, 1]).any():
        raise ValueError("self-loops are not allowed")
    lo = np.minimum(e[:, 0], e[:, 1])
    hi = np.maximum(e[:, 0], e[:, 1])
    pairs = np.unique(np.column_stack([lo, hi]), axis=0) if e.size else e
    indptr, indices = _csr_from_pairs(lat.shape[0], pairs[:, 0], pairs[:, 1])
    return ProximityGraph(lat, lon, indptr, indices, radius_m)


def component_labels(graph: ProximityGraph) -> np.ndarray:
    """Component label per node; labels ordered by each component's
    smallest node id (node 0 is always in component 0)."""
    n = graph.n
    if n == 0:
        return np.zeros(0, dtype=np.int64)
    adj = csr_matrix((np.ones(graph.indices.shape[0], dtype=np.int8),
                      graph.indices, graph.indptr), shape=(n, n))
    _, raw = _cc(adj, directed=False)
    first_seen = {}
    for lab in raw.tolist():
        if lab not in first_seen:
            first_seen[lab] = len(first_seen)
    remap = np.empty(len(first_seen), dtype=np.int64)
    for lab, new in first_seen.items():
        remap[lab] = new
    return remap[raw]


def connected_components(graph: ProximityGraph) -> list[list[int]]:
    """Partition of node ids, each block sorted, blocks ordered by their
    smallest member."""
    labels = component_labels(graph)
    if labels.size == 0:
        return []
    order = np.argsort(labels, kind="stable")
    cuts = np.flatnonzero(np.diff(labels[order])) + 1
    return [block.tolist() for block in np.split(order, cuts)]


def induced_subgraph(graph: ProximityGraph, keep: np.ndarray) -> ProximityGraph:
    """Subgraph on the nodes where boolean mask ``keep`` is set, densely
    re-indexed in increasing id order."""
    keep = np.asarray(keep, dtype=bool)
    new_id = np.full(graph.n, -1, dtype=np.int64)
    sel = np.flatnonzero(keep)
    new_id[sel] = np.arange(sel.size)
    u = np.repeat(np.arange(graph.n, dtype=np.int64), graph.degrees())
    v = graph.indices.astype(np.int64)
    mask = keep[u] & keep[v] & (u < v)
    indptr, indices = _csr_from_pairs(sel.size, new_id[u[mask]], new_id[v[mask]])
    return ProximityGraph(graph.lat[sel].copy(), graph.lon[sel].copy(), indptr, indices,
                          graph.radius_m, graph.node_ids[sel].copy())


def giant_component(graph: ProximityGraph) -> ProximityGraph:
    """Largest component (ties: the one holding the smallest node id)."""
    labels = component_labels(graph)
    if labels.size == 0:
        return graph
    sizes = np.bincount(labels)
    return induced_subgraph(graph, labels == int(np.argmax(sizes)))


def giant_size(graph: ProximityGraph) -> int:
    labels = component_labels(graph)
    return int(np.bincount(labels).max()) if labels.size else 0


@dataclass(frozen=True)
class DegreeStats:
    n: int
    k_max: int
    mean_degree: float
    fluctuation_ratio: float
    histogram: dict[int, int]

    def table_row(self, f_encr: float | None = None) -> dict:
        row = {"N": self.n}
        if f_encr is not None:
            row["f_encr"] = f_encr
        row.update(k_max=self.k_max, mean_k=self.mean_degree, fluct_ratio=self.fluctuation_ratio)
        return row


def degree_stats(graph: ProximityGraph) -> DegreeStats:
    """Degree summary; the fluctuation ratio is <k^2>/<k> (0 when edgeless)."""
    deg = graph.degrees().astype(np.int64)
    n = int(deg.size)
    s1 = int(deg.sum())
    s2 = int((deg * deg).sum())
    hist = np.bincount(deg) if n else np.zeros(0, dtype=np.int64)
    return DegreeStats(
        n=n,
        k_max=int(deg.max()) if n else 0,
        mean_degree=s1 / n if n else 0.0,
        fluctuation_ratio=s2 / s1 if s1 else 0.0,
        histogram={k: int(c) for k, c in enumerate(hist.tolist()) if c},
    )


def degree_distribution(graph: ProximityGraph) -> list[tuple[int, int, float]]:
    """Rows ``(degree, count, fraction)`` for every degree present."""
    st = degree_stats(graph)
    return [(k, c, c / st.n) for k, c in sorted(st.histogram.items())]


def write_edge_list(graph: ProximityGraph, stream: IO[str]) -> None:
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(["node_u", "node_v"])
    w.writerows(graph.edges().tolist())


def write_node_table(graph: ProximityGraph, stream: IO[str], encryption=None,
                     tiers=None, components=None) -> None:
    """Node table; ``tiers`` (latent password tiers) is written only when
    given explicitly."""
    w = csv.writer(stream, lineterminator="\n")
    header = ["node_id", "lat", "lon"]
    if encryption is not None:
        header.append("encryption")
    if tiers is not None:
        header.append("tier")
    if components is not None:
        header.append("component")
    w.writerow(header)
    for i in range(graph.n):
        row = [i, repr(float(graph.lat[i])), repr(float(graph.lon[i]))]
        if encryption is not None:
            row.append(encryption[i])
        if tiers is not None:
            row.append(tiers[i])
        if components is not None:
            row.append(int(components[i]))
        w.writerow(row)


def write_degree_histogram(graph: ProximityGraph, stream: IO[str]) -> None:
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(["degree", "count", "fraction"])
    for k, c, f in degree_distribution(graph):
        w.writerow([k, c, repr(f)])


def stats_json(stats: DegreeStats, f_encr: float | None = None, **extra) -> str:
    blob = stats.table_row(f_encr)
    blob.update(extra)
    return json.dumps(blob, indent=2, sort_keys=False)
