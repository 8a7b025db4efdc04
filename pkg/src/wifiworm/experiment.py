"""Ensembles over layout randomizations and initial conditions."""

from __future__ import annotations

import csv
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import IO, Iterable, Sequence

import numpy as np

from . import epidemic as ep
from . import ingest
from . import spatialnet as sn

log = logging.getLogger(__name__)

# rng stream tags, so layout, run and immunization streams never collide
_LAYOUT, _RUN, _IMMUNE = 1, 2, 3


@dataclass(frozen=True)
class ExperimentConfig:
    layout_randomizations: int = 5
    runs_per_layout: int = 20
    ci_level: float = 0.90
    interaction_radius_m: float = 45.0
    radius_sweep: tuple[float, ...] = (15.0, 30.0, 45.0, 100.0)
    wpa_sweep: tuple[float, ...] = (0.0, 0.2, 0.4, 0.6, 0.8, 1.0)
    master_seed: int = 0
    workers: int | None = None

    def __post_init__(self):
        if self.layout_randomizations < 1 or self.runs_per_layout < 1:
            raise ValueError("at least one layout and one run per layout required")
        if not 0.0 < self.ci_level < 1.0:
            raise ValueError("ci_level must lie in (0, 1)")
        if not self.interaction_radius_m > 0:
            raise ValueError("interaction radius must be positive")

    @property
    def total_runs(self) -> int:
        return self.layout_randomizations * self.runs_per_layout


def layout_rng(master_seed: int, layout: int) -> np.random.Generator:
    return np.random.default_rng([master_seed, _LAYOUT, layout])


def run_rng(master_seed: int, layout: int, run: int) -> np.random.Generator:
    return np.random.default_rng([master_seed, _RUN, layout, run])


def prepare_corpus(records: Sequence[ingest.RouterRecord],
                   config: ingest.IngestConfig) -> list[ingest.RouterRecord]:
    """Layout-independent cleaning: drop probes, dedupe, cap overlaps."""
    return ingest.dedupe_and_cap(ingest.filter_probes(records), config.overlap_cap)


@dataclass
class Layout:
    index: int
    profiles: list[ingest.NodeProfile]
    classes: np.ndarray
    tiers: np.ndarray

    @property
    def lat(self) -> np.ndarray:
        return np.array([p.lat for p in self.profiles], dtype=np.float64)

    @property
    def lon(self) -> np.ndarray:
        return np.array([p.lon for p in self.profiles], dtype=np.float64)


def make_layout(corpus: Sequence[ingest.RouterRecord], config: ingest.IngestConfig,
                master_seed: int, index: int) -> Layout:
    rng = layout_rng(master_seed, index)
    moved = ingest.randomize_positions(corpus, config.randomization_radius_m, rng)
    profiles = ingest.assign_profiles(moved, config, rng)
    classes, tiers = ep.profile_classes(profiles)
    return Layout(index, profiles, classes, tiers)


@dataclass(frozen=True)
class LayoutSummary:
    index: int
    n_total: int
    giant_size: int
    f_encr: float
    stats: sn.DegreeStats
    skipped: bool = False

    def table_row(self) -> dict:
        row = {"layout": self.index, **self.stats.table_row(self.f_encr)}
        row["n_total"] = self.n_total
        row["skipped"] = self.skipped
        return row


@dataclass
class RunResult:
    layout: int
    run: int
    counts: np.ndarray
    seeds: np.ndarray
    median_step_wep: float
    median_step_open: float

    @property
    def attack_rate(self) -> np.ndarray:
        n = self.counts[0].sum()
        return self.counts[:, ep.Compartment.I] / (n - self.counts[:, ep.Compartment.R])

    @property
    def final_attack_rate(self) -> float:
        return float(self.attack_rate[-1])


def _class_medians(series: ep.TimeSeries) -> tuple[float, float]:
    inf = series.infection_step
    mask = inf > 0  # seeds are infected at step 0
    init = series.initial_classes
    wep = inf[mask & (init == ep.Compartment.S_WEP)]
    opn = inf[mask & ((init == ep.Compartment.S_NOPASS) | (init == ep.Compartment.S_PASS1))]
    return (float(np.median(wep)) if wep.size else math.nan,
            float(np.median(opn)) if opn.size else math.nan)


def simulate_runs(graph: sn.ProximityGraph, classes: np.ndarray, tiers: np.ndarray,
                  params: ep.EpidemicParams, master_seed: int, layout: int,
                  runs: Iterable[int]) -> list[RunResult]:
    out = []
    for r in runs:
        st = ep.init_state_arrays(graph, classes, tiers, params, run_rng(master_seed, layout, r))
        series = ep.run(st)
        wep, opn = _class_medians(series)
        out.append(RunResult(layout, r, series.counts, series.seeds, wep, opn))
    return out


def _simulate_task(args):
    return simulate_runs(*args)


def _chunks(n: int, parts: int) -> list[range]:
    parts = max(1, min(parts, n))
    bounds = np.linspace(0, n, parts + 1).round().astype(int)
    return [range(bounds[i], bounds[i + 1]) for i in range(parts)]


def _execute(tasks: list[tuple], workers: int | None) -> list[list[RunResult]]:
    workers = workers or os.cpu_count() or 1
    if workers <= 1 or len(tasks) <= 1:
        return [simulate_runs(*t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        # map keeps submission order, so the reduction is schedule independent
        return list(pool.map(_simulate_task, tasks))


def confidence_band(curves: np.ndarray, level: float) -> tuple[np.ndarray, np.ndarray]:
    """Pointwise empirical percentile band (linear interpolation between
    order statistics) holding the central ``level`` share of the runs."""
    curves = np.asarray(curves, dtype=np.float64)
    if curves.ndim == 1:
        curves = curves[:, None]
    if curves.shape[0] < 2:
        raise ValueError("a confidence band needs at least two runs")
    if not 0.0 < level < 1.0:
        raise ValueError("level must lie in (0, 1)")
    tail = 100.0 * (1.0 - level) / 2.0
    lower, upper = np.percentile(curves, [tail, 100.0 - tail], axis=0, method="linear")
    return lower, upper


@dataclass
class EnsembleResult:
    runs: list[RunResult]
    layouts: list[LayoutSummary]
    mean: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    mean_counts: np.ndarray
    tau_min: float
    metadata: dict = field(default_factory=dict)

    @property
    def curves(self) -> np.ndarray:
        return np.vstack([r.attack_rate for r in self.runs])

    @property
    def final_attack_rates(self) -> np.ndarray:
        return np.array([r.final_attack_rate for r in self.runs])

    @property
    def mean_final_attack_rate(self) -> float:
        return float(self.final_attack_rates.mean())

    def write_curves(self, stream: IO[str], which: str) -> None:
        values = {"mean": self.mean, "lower": self.lower, "upper": self.upper}[which]
        w = csv.writer(stream, lineterminator="\n")
        w.writerow(["step", "minutes", f"attack_rate_{which}"])
        for t, v in enumerate(values.tolist()):
            w.writerow([t, repr(float(t * self.tau_min)), repr(v)])

    def write_band(self, stream: IO[str]) -> None:
        w = csv.writer(stream, lineterminator="\n")
        w.writerow(["step", "minutes", "mean", "lower", "upper"])
        for t, (m, lo, hi) in enumerate(zip(self.mean.tolist(), self.lower.tolist(),
                                            self.upper.tolist())):
            w.writerow([t, repr(float(t * self.tau_min)), repr(m), repr(lo), repr(hi)])

    def write_mean_counts(self, stream: IO[str]) -> None:
        w = csv.writer(stream, lineterminator="\n")
        w.writerow(("step", "minutes") + ep.COUNT_COLUMNS)
        for t, row in enumerate(self.mean_counts.tolist()):
            w.writerow([t, repr(float(t * self.tau_min)), *map(repr, row)])

    def write_finals(self, stream: IO[str]) -> None:
        w = csv.writer(stream, lineterminator="\n")
        w.writerow(["layout", "run", "final_attack_rate", "median_step_wep", "median_step_open",
                    "seeds"])
        for r in self.runs:
            w.writerow([r.layout, r.run, repr(r.final_attack_rate), repr(r.median_step_wep),
                        repr(r.median_step_open), " ".join(map(str, r.seeds.tolist()))])


def _summarize(layout: Layout, graph: sn.ProximityGraph, giant: sn.ProximityGraph,
               skipped: bool) -> LayoutSummary:
    gc_classes = layout.classes[giant.node_ids]
    encr = np.isin(gc_classes, (ep.Compartment.S_WEP, ep.Compartment.R))
    return LayoutSummary(layout.index, graph.n, giant.n,
                         float(encr.mean()) if giant.n else 0.0,
                         sn.degree_stats(giant), skipped)


def run_ensemble(corpus: Sequence[ingest.RouterRecord], config: ExperimentConfig,
                 ingest_config: ingest.IngestConfig | None = None,
                 params: ep.EpidemicParams | None = None,
                 immune_fraction: float = 0.0) -> EnsembleResult:
    """All layouts x runs, pooled.

    Run ``(l, r)`` uses its own generator derived from
    ``(master_seed, l, r)``; results are reduced in (layout, run) order so
    the outcome does not depend on the worker count. ``immune_fraction``
    additionally immunizes that share of all nodes (see
    :func:`immunization_sweep`).
    """
    ingest_config = ingest_config or ingest.IngestConfig()
    params = params or ep.EpidemicParams()
    corpus = prepare_corpus(corpus, ingest_config)
    if not corpus:
        raise ValueError("corpus is empty after cleaning")

    summaries, tasks = [], []
    workers = config.workers or os.cpu_count() or 1
    for li in range(config.layout_randomizations):
        layout = make_layout(corpus, ingest_config, config.master_seed, li)
        classes = layout.classes
        if immune_fraction > 0:
            classes = immunize(classes, immune_fraction, config.master_seed, li)
        graph = sn.build_graph(layout.lat, layout.lon, config.interaction_radius_m)
        giant = sn.giant_component(graph)
        gc_classes = classes[giant.node_ids]
        feasible = int((gc_classes != ep.Compartment.R).sum()) >= params.seed_count
        summaries.append(_summarize(layout, graph, giant, not feasible))
        if not feasible:
            log.warning("layout %d skipped: giant component has fewer than %d seedable nodes",
                        li, params.seed_count)
            continue
        per_task = _chunks(config.runs_per_layout, workers)
        for rr in per_task:
            tasks.append((giant, gc_classes, layout.tiers[giant.node_ids], params,
                          config.master_seed, li, rr))
    if not tasks:
        raise ValueError("every layout was skipped: no giant component can host the seeds")

    runs = [r for chunk in _execute(tasks, config.workers) for r in chunk]
    curves = np.vstack([r.attack_rate for r in runs])
    mean = curves.mean(axis=0)
    if len(runs) >= 2:
        lower, upper = confidence_band(curves, config.ci_level)
    else:
        lower, upper = mean.copy(), mean.copy()
    mean_counts = np.mean([r.counts for r in runs], axis=0)
    meta = {
        "experiment": _jsonable(asdict(config)),
        "ingest": asdict(ingest_config),
        "epidemic": asdict(params),
        "immune_fraction": immune_fraction,
        "corpus_size_after_cleaning": len(corpus),
        "run_seeds": [[config.master_seed, _RUN, r.layout, r.run] for r in runs],
        "layouts": [s.table_row() for s in summaries],
    }
    return EnsembleResult(runs, summaries, mean, lower, upper, mean_counts, params.tau_min, meta)


def _jsonable(d: dict) -> dict:
    return {k: list(v) if isinstance(v, tuple) else v for k, v in d.items()}


def immunize(classes: np.ndarray, fraction: float, master_seed: int, layout: int) -> np.ndarray:
    """Flag ``round(fraction * N)`` nodes immune (class R), chosen uniformly.

    The choice is the prefix of one random permutation per layout, so
    immune sets are nested as the fraction grows.
    """
    if not 0.0 <= fraction <= 1.0:
        raise ValueError("immune fraction must lie in [0, 1]")
    n = classes.shape[0]
    order = np.random.default_rng([master_seed, _IMMUNE, layout]).permutation(n)
    out = classes.copy()
    out[order[:int(round(fraction * n))]] = ep.Compartment.R
    return out


@dataclass(frozen=True)
class SweepRow:
    value: float
    giant_sizes: tuple[int, ...]
    mean_final_attack_rate: float

    @property
    def mean_giant_size(self) -> float:
        return float(np.mean(self.giant_sizes))


def immunization_sweep(corpus: Sequence[ingest.RouterRecord], fractions: Sequence[float],
                       config: ExperimentConfig, ingest_config: ingest.IngestConfig | None = None,
                       params: ep.EpidemicParams | None = None,
                       simulate: bool = True) -> list[SweepRow]:
    """For each fraction: giant-component size of the subgraph induced on
    non-immune nodes (per layout), and the ensemble mean final attack rate.

    Immunization is applied on top of the WPA immunity already drawn for
    each node, so fraction 0 reproduces :func:`run_ensemble` exactly.
    Infeasible ensembles (nothing left to seed) report an attack rate of 0.
    """
    ingest_config = ingest_config or ingest.IngestConfig()
    params = params or ep.EpidemicParams()
    for f in fractions:
        if not 0.0 <= f <= 1.0:
            raise ValueError(f"immune fraction out of range: {f}")
    clean = prepare_corpus(corpus, ingest_config)
    layouts = [make_layout(clean, ingest_config, config.master_seed, li)
               for li in range(config.layout_randomizations)]
    graphs = [sn.build_graph(lay.lat, lay.lon, config.interaction_radius_m) for lay in layouts]
    rows = []
    for f in fractions:
        sizes = []
        for lay, g in zip(layouts, graphs):
            cls = immunize(lay.classes, f, config.master_seed, lay.index)
            sizes.append(sn.giant_size(sn.induced_subgraph(g, cls != ep.Compartment.R)))
        ar = 0.0
        if simulate:
            try:
                ar = run_ensemble(corpus, config, ingest_config, params,
                                  immune_fraction=f).mean_final_attack_rate
            except ValueError:
                ar = 0.0
        rows.append(SweepRow(f, tuple(sizes), ar))
    return rows


def radius_sweep(corpus: Sequence[ingest.RouterRecord], radii: Sequence[float],
                 config: ExperimentConfig,
                 ingest_config: ingest.IngestConfig | None = None) -> list[dict]:
    """Giant-component statistics per interaction radius; layout ``l`` uses
    the same randomized positions for every radius."""
    ingest_config = ingest_config or ingest.IngestConfig()
    clean = prepare_corpus(corpus, ingest_config)
    layouts = [make_layout(clean, ingest_config, config.master_seed, li)
               for li in range(config.layout_randomizations)]
    rows = []
    for radius in radii:
        per_layout = []
        for lay in layouts:
            g = sn.build_graph(lay.lat, lay.lon, radius)
            giant = sn.giant_component(g)
            per_layout.append(_summarize(lay, g, giant, False))
        rows.append({
            "radius_m": float(radius),
            "giant_sizes": [s.giant_size for s in per_layout],
            "mean_giant_size": float(np.mean([s.giant_size for s in per_layout])),
            "mean_k": float(np.mean([s.stats.mean_degree for s in per_layout])),
            "k_max": float(np.mean([s.stats.k_max for s in per_layout])),
            "fluct_ratio": float(np.mean([s.stats.fluctuation_ratio for s in per_layout])),
            "f_encr": float(np.mean([s.f_encr for s in per_layout])),
        })
    return rows


@dataclass(frozen=True)
class Correlation:
    r_mean_degree: float
    r_fluctuation: float


def pearson(x: Sequence[float], y: Sequence[float]) -> float:
    """Pearson coefficient; NaN when either input has zero variance."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.size < 2:
        raise ValueError("need two equally long samples of size >= 2")
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = float(dx @ dx)
    syy = float(dy @ dy)
    if sxx == 0.0 or syy == 0.0:
        return math.nan
    return float(dx @ dy) / math.sqrt(sxx * syy)


def correlate_final_ar(points: Sequence[tuple[float, sn.DegreeStats]]) -> Correlation:
    """Correlation of final attack rate with <k> and with <k^2>/<k>."""
    if len(points) < 3:
        raise ValueError("at least three corpora are needed")
    ar = [p[0] for p in points]
    return Correlation(
        pearson([p[1].mean_degree for p in points], ar),
        pearson([p[1].fluctuation_ratio for p in points], ar),
    )


def write_scatter(points: Sequence[tuple[str, float, sn.DegreeStats]], stream: IO[str]) -> None:
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(["corpus", "final_attack_rate", "mean_k", "fluct_ratio", "N"])
    for name, ar, st in points:
        w.writerow([name, repr(ar), repr(st.mean_degree), repr(st.fluctuation_ratio), st.n])
