"""Discrete-time, individual-based malware spreading on a proximity graph.

Each tick lasts ``tau_min`` minutes (the time to take over a router with a
factory password). Infected routers attack one neighbour at a time,
always the least protected one available; an attack runs through WEP
cracking, the small dictionary and the large dictionary as needed, and
each phase ends in a given tick with probability ``tau_min / tau_phase``.
"""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass, field, replace
from typing import IO, Sequence

import numpy as np

from . import _backend
from .ingest import Encryption, NodeProfile, PasswordTier
from .spatialnet import ProximityGraph

RNG_BLOCK = 4096


class Compartment(enum.IntEnum):
    S_NOPASS = 0
    S_PASS1 = 1
    S_PASS2 = 2
    S_WEP = 3
    I = 4
    R = 5
    R_HIDDEN = 6


SUSCEPTIBLE = (Compartment.S_NOPASS, Compartment.S_PASS1, Compartment.S_PASS2, Compartment.S_WEP)


class Phase(enum.IntEnum):
    """Attack phase; the value equals the apparent class that starts it."""

    DIRECT = 0
    DICT1 = 1
    DICT2 = 2
    WEP_CRACK = 3


COUNT_COLUMNS = ("s_nopass", "s_pass1", "s_pass2", "s_wep", "infected", "r_wpa", "r_hidden")


@dataclass(frozen=True)
class EpidemicParams:
    tau_min: float = 5.0
    tau1_min: float = 10.5
    tau2_min: float = 700.0
    tau_wep_min: float = 4320.0
    seed_count: int = 5
    horizon_steps: int = 4032
    deterministic_durations: bool = False

    def __post_init__(self):
        if self.tau_min <= 0:
            raise ValueError("tau_min must be positive")
        for name in ("tau1_min", "tau2_min", "tau_wep_min"):
            if getattr(self, name) < self.tau_min:
                raise ValueError(f"{name} must be >= tau_min")
        if self.seed_count < 1:
            raise ValueError("seed_count must be >= 1")
        if self.horizon_steps < 1:
            raise ValueError("horizon_steps must be >= 1")

    @classmethod
    def preset(cls, name: str, **overrides) -> "EpidemicParams":
        """``typical`` (range midpoints), ``worst-case`` (fastest attacks)
        or ``best-case`` (slowest attacks)."""
        try:
            taus = PRESETS[name]
        except KeyError:
            raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
        return cls(**{**taus, **overrides})

    def phase_minutes(self) -> tuple[float, float, float, float]:
        return (self.tau_min, self.tau1_min, self.tau2_min, self.tau_wep_min)

    def phase_probabilities(self) -> np.ndarray:
        return np.array([self.tau_min / t for t in self.phase_minutes()], dtype=np.float64)

    def phase_steps(self) -> np.ndarray:
        return np.array([max(1, round(t / self.tau_min)) for t in self.phase_minutes()],
                        dtype=np.int32)


PRESETS = {
    "typical": dict(tau1_min=10.5, tau2_min=700.0, tau_wep_min=4320.0),
    "worst-case": dict(tau1_min=6.0, tau2_min=400.0, tau_wep_min=2880.0),
    "best-case": dict(tau1_min=15.0, tau2_min=1000.0, tau_wep_min=5760.0),
}


class UniformStream:
    """Block-buffered U[0,1) draws shared by both kernel backends, so a run
    consumes exactly the same numbers whichever backend executes it."""

    def __init__(self, rng: np.random.Generator, block: int = RNG_BLOCK):
        self.rng = rng
        self.block = block
        self.buf = np.empty(0, dtype=np.float64)
        self.pos = 0

    def refill(self):
        self.buf = self.rng.random(self.block)
        self.pos = 0

    def next(self) -> float:
        if self.pos >= self.buf.shape[0]:
            self.refill()
        u = float(self.buf[self.pos])
        self.pos += 1
        return u


@dataclass(frozen=True)
class AttackProcess:
    attacker: int
    target: int
    phase: Phase
    elapsed_steps: int


def profile_classes(profiles: Sequence[NodeProfile]) -> tuple[np.ndarray, np.ndarray]:
    """Initial compartment and latent tier arrays for a profile list."""
    cls = np.empty(len(profiles), dtype=np.int8)
    tier = np.empty(len(profiles), dtype=np.int8)
    for i, p in enumerate(profiles):
        if p.encryption is Encryption.WPA:
            c = Compartment.R
        elif p.encryption is Encryption.WEP:
            c = Compartment.S_WEP
        elif p.password_tier is PasswordTier.DEFAULT:
            c = Compartment.S_NOPASS
        else:
            c = Compartment.S_PASS1
        cls[i] = c
        tier[i] = p.password_tier
    return cls, tier


class SimState:
    """Mutable state of one run. Arrays are indexed by graph node."""

    def __init__(self, graph: ProximityGraph, classes: np.ndarray, tiers: np.ndarray,
                 params: EpidemicParams, rng: np.random.Generator):
        n = graph.n
        self.graph = graph
        self.params = params
        self.indptr = np.ascontiguousarray(graph.indptr, dtype=np.int64)
        self.indices = np.ascontiguousarray(graph.indices, dtype=np.int32)
        self.orig_cls = np.ascontiguousarray(classes, dtype=np.int8).copy()
        self.true_cls = self.orig_cls.copy()
        self.app_cls = self.orig_cls.copy()
        self.tier = np.ascontiguousarray(tiers, dtype=np.int8).copy()
        self.inf_step = np.full(n, -1, dtype=np.int32)
        self.att_target = np.full(n, -1, dtype=np.int32)
        self.att_phase = np.full(n, -1, dtype=np.int8)
        self.att_slot = np.full(n, -1, dtype=np.int64)
        self.att_elapsed = np.zeros(n, dtype=np.int32)
        self.under_attack = np.zeros(n, dtype=np.uint8)
        self.failed = np.zeros(self.indices.shape[0], dtype=np.uint8)
        self.dormant = np.zeros(n, dtype=np.uint8)
        self.counts = np.bincount(self.true_cls, minlength=7).astype(np.int64)
        self.phase_prob = params.phase_probabilities()
        self.phase_steps = params.phase_steps()
        self.deterministic = bool(params.deterministic_durations)
        self.stream = UniformStream(rng)
        self.seeds = np.zeros(0, dtype=np.int64)
        # infected routers that are not known to be out of targets
        self.live = 0
        self.step = 0

    @property
    def n(self) -> int:
        return int(self.true_cls.shape[0])

    def infect_seeds(self, seeds: Sequence[int]) -> None:
        for v in seeds:
            v = int(v)
            if self.true_cls[v] == Compartment.I:
                continue
            if self.true_cls[v] in (Compartment.R, Compartment.R_HIDDEN):
                raise ValueError(f"node {v} is immune and cannot be seeded")
            self.counts[self.true_cls[v]] -= 1
            self.counts[Compartment.I] += 1
            self.true_cls[v] = self.app_cls[v] = Compartment.I
            self.inf_step[v] = self.step
            self.live += 1
        self.seeds = np.union1d(self.seeds, np.asarray(seeds, dtype=np.int64))

    def attacks(self) -> list[AttackProcess]:
        active = np.flatnonzero(self.att_target >= 0)
        return [AttackProcess(int(a), int(self.att_target[a]), Phase(int(self.att_phase[a])),
                              int(self.att_elapsed[a])) for a in active]

    def failed_targets(self, attacker: int) -> set[int]:
        lo, hi = self.indptr[attacker], self.indptr[attacker + 1]
        return {int(self.indices[s]) for s in range(lo, hi) if self.failed[s]}

    def snapshot(self) -> np.ndarray:
        return self.counts.copy()


def init_state(graph: ProximityGraph, profiles: Sequence[NodeProfile], params: EpidemicParams,
               rng: np.random.Generator) -> SimState:
    """Initial state: classes from the profiles (looked up through
    ``graph.node_ids``), then ``seed_count`` distinct non-WPA nodes infected."""
    ids = graph.node_ids
    if ids.size and int(ids.max()) >= len(profiles):
        raise ValueError("profiles do not cover every graph node")
    classes, tiers = profile_classes([profiles[int(i)] for i in ids])
    return init_state_arrays(graph, classes, tiers, params, rng)


def init_state_arrays(graph: ProximityGraph, classes, tiers, params: EpidemicParams,
                      rng: np.random.Generator, seeds: Sequence[int] | None = None) -> SimState:
    classes = np.asarray(classes, dtype=np.int8)
    if classes.shape[0] != graph.n:
        raise ValueError("one class per graph node required")
    if ((classes == Compartment.S_PASS2) | (classes >= Compartment.I)
            & (classes != Compartment.R)).any():
        raise ValueError("initial classes must be S_nopass, S_pass1, S_wep or R")
    state = SimState(graph, classes, tiers, params, rng)
    if seeds is None:
        pool = np.flatnonzero(classes != Compartment.R)
        if pool.size < params.seed_count:
            raise ValueError(f"need {params.seed_count} non-immune nodes to seed, "
                             f"only {pool.size} available")
        seeds = np.sort(rng.choice(pool, size=params.seed_count, replace=False))
    state.infect_seeds(seeds)
    return state


def select_target(attacker: int, state: SimState) -> int | None:
    """Neighbour an idle infected ``attacker`` would attack now, or None.

    Consumes one draw from the run's stream when the choice is a tie.
    """
    if state.true_cls[attacker] != Compartment.I or state.att_target[attacker] >= 0:
        raise ValueError("attacker must be infected and idle")
    tgt, _ = _backend._pykernels.pick_target(attacker, state.indptr, state.indices,
                                             state.app_cls, state.under_attack,
                                             state.failed, state.stream)
    return None if tgt < 0 else int(tgt)


def step(state: SimState, kernels=None, log: list | None = None) -> SimState:
    """Advance one tick in place and return the state."""
    out = np.empty((1, 7), dtype=np.int64)
    (kernels or _backend.kernels).advance(state, 1, out, log)
    return state


@dataclass
class TimeSeries:
    """Per-tick true compartment counts, row 0 being the initial state."""

    counts: np.ndarray
    tau_min: float
    seeds: np.ndarray
    infection_step: np.ndarray
    initial_classes: np.ndarray
    dumps: list[tuple[int, np.ndarray]] = field(default_factory=list)

    @property
    def n(self) -> int:
        return int(self.counts[0].sum())

    @property
    def steps(self) -> np.ndarray:
        return np.arange(self.counts.shape[0])

    @property
    def minutes(self) -> np.ndarray:
        return self.steps * self.tau_min

    @property
    def attack_rate(self) -> np.ndarray:
        denom = self.n - self.counts[:, Compartment.R]
        if (denom <= 0).any():
            raise ValueError("attack rate undefined: every node is WPA-immune")
        return self.counts[:, Compartment.I] / denom

    @property
    def final_attack_rate(self) -> float:
        return float(self.attack_rate[-1])

    def write_csv(self, stream: IO[str]) -> None:
        w = csv.writer(stream, lineterminator="\n")
        w.writerow(("step", "minutes") + COUNT_COLUMNS + ("attack_rate",))
        ar = self.attack_rate
        for t, row in enumerate(self.counts.tolist()):
            w.writerow([t, repr(float(t * self.tau_min)), *row, repr(float(ar[t]))])


def run(state: SimState, horizon_steps: int | None = None, kernels=None,
        log: list | None = None, dump_every: int | None = None) -> TimeSeries:
    """Apply ``horizon_steps`` ticks (default: the params' horizon).

    ``log`` collects ``(step, node, old_class, new_class)`` for every true
    class change; ``dump_every=k`` stores the full class vector every k ticks.
    """
    horizon = state.params.horizon_steps if horizon_steps is None else horizon_steps
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    kernels = kernels or _backend.kernels
    counts = np.empty((horizon + 1, 7), dtype=np.int64)
    counts[0] = state.counts
    dumps = []
    chunk = horizon if not dump_every else int(dump_every)
    if dump_every:
        dumps.append((state.step, state.true_cls.copy()))
    done = 0
    while done < horizon:
        k = min(chunk, horizon - done)
        kernels.advance(state, k, counts[1 + done:1 + done + k], log)
        done += k
        if dump_every:
            dumps.append((state.step, state.true_cls.copy()))
    return TimeSeries(counts, state.params.tau_min, state.seeds.copy(),
                      state.inf_step.copy(), state.orig_cls.copy(), dumps)


def attack_rate(snapshot: Sequence[int]) -> float:
    """I / (N - |R|) for a 7-entry count vector; R_hidden is not discounted."""
    c = np.asarray(snapshot, dtype=np.int64)
    n = int(c.sum())
    immune = int(c[Compartment.R])
    if n == immune:
        raise ValueError("attack rate undefined: every node is WPA-immune")
    return int(c[Compartment.I]) / (n - immune)


def write_state_dumps(series: TimeSeries, stream: IO[str]) -> None:
    """Long-format node states ``step,node_id,true_class`` for map rendering."""
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(["step", "node_id", "true_class"])
    for t, cls in series.dumps:
        for i, c in enumerate(cls.tolist()):
            w.writerow([t, i, Compartment(c).name])


def with_horizon(params: EpidemicParams, horizon_steps: int) -> EpidemicParams:
    return replace(params, horizon_steps=horizon_steps)
