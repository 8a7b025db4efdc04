"""Independent reference computations used by the test-suite.

Nothing here imports the code paths it checks, apart from the scalar
haversine used to settle pairs sitting within rounding distance of R_int.
"""

from __future__ import annotations

import math
from collections import defaultdict, deque
from fractions import Fraction

import numpy as np

from wifiworm.geo import haversine_m

R_EARTH = 6_371_000.0


def all_pairs_edges(lat, lon, radius):
    """O(n^2) edge set {(i, j): i < j, d <= radius}."""
    lat = np.asarray(lat, dtype=float)
    lon = np.asarray(lon, dtype=float)
    n = lat.size
    if n < 2:
        return set()
    i, j = np.triu_indices(n, k=1)
    p1, p2 = np.radians(lat[i]), np.radians(lat[j])
    a = (np.sin((p2 - p1) / 2) ** 2
         + np.cos(p1) * np.cos(p2) * np.sin(np.radians(lon[j] - lon[i]) / 2) ** 2)
    d = 2 * R_EARTH * np.arcsin(np.sqrt(np.minimum(a, 1.0)))
    edges = set()
    near = np.abs(d - radius) <= 1e-7 * max(radius, 1.0)
    for a_, b_ in zip(i[(d <= radius) & ~near], j[(d <= radius) & ~near]):
        edges.add((int(a_), int(b_)))
    # settle near-ties with the same scalar formula the graph uses
    for a_, b_ in zip(i[near], j[near]):
        if haversine_m(lat[a_], lon[a_], lat[b_], lon[b_]) <= radius:
            edges.add((int(a_), int(b_)))
    return edges


def flood_fill(n, edges):
    adj = defaultdict(list)
    for u, v in edges:
        adj[u].append(v)
        adj[v].append(u)
    seen = [False] * n
    comps = []
    for s in range(n):
        if seen[s]:
            continue
        seen[s] = True
        q = deque([s])
        comp = []
        while q:
            x = q.popleft()
            comp.append(x)
            for y in adj[x]:
                if not seen[y]:
                    seen[y] = True
                    q.append(y)
        comps.append(sorted(comp))
    return comps


def degree_summary(n, edges):
    deg = [0] * n
    for u, v in edges:
        deg[u] += 1
        deg[v] += 1
    s1 = sum(deg)
    s2 = sum(k * k for k in deg)
    mean = Fraction(s1, n) if n else Fraction(0)
    ratio = Fraction(s2, s1) if s1 else Fraction(0)
    return {"k_max": max(deg) if deg else 0, "mean": mean, "ratio": ratio, "deg": deg}


def pearson_hand(x, y):
    n = len(x)
    mx = math.fsum(x) / n
    my = math.fsum(y) / n
    sxy = math.fsum((a - mx) * (b - my) for a, b in zip(x, y))
    sxx = math.fsum((a - mx) ** 2 for a in x)
    syy = math.fsum((b - my) ** 2 for b in y)
    return sxy / math.sqrt(sxx * syy)


def percentile_linear(values, q):
    """Linear interpolation between order statistics at position q*(n-1)."""
    v = sorted(values)
    pos = q * (len(v) - 1)
    lo = math.floor(pos)
    hi = min(lo + 1, len(v) - 1)
    return v[lo] + (v[hi] - v[lo]) * (pos - lo)


# --- exact Markov-chain enumeration of the attack dynamics ------------------

SN, SP1, SP2, SW, INF, R, RH = range(7)


def enumerate_dynamics(adj, classes, tiers, probs, steps, seeds):
    """Exact distribution over trajectories of the attack process on a tiny
    graph, by exhaustive branching over every random outcome.

    ``probs`` = completion probability for (direct, dict1, dict2, wep).
    Every idle infected node rescans its neighbours every tick (no
    dormancy shortcut). Returns ``dists`` where ``dists[t]`` maps a state's
    true-class tuple to its probability after t ticks, and ``first_inf``
    mapping node -> {tick: probability of first infection at that tick}.
    """
    n = len(classes)
    orig = tuple(classes)
    true = list(classes)
    for s in seeds:
        true[s] = INF
    init = (tuple(true), tuple(true), tuple([None] * n), frozenset())
    dist = {init: 1.0}
    first_inf = defaultdict(lambda: defaultdict(float))
    history = [_marginal(dist)]

    for t in range(steps):
        new = defaultdict(float)
        for state, p in dist.items():
            for q, nxt in _tick(state, adj, orig, tiers, probs):
                new[nxt] += p * q
                before, after = state[0], nxt[0]
                for v in range(n):
                    if before[v] != INF and after[v] == INF:
                        first_inf[v][t + 1] += p * q
        dist = dict(new)
        history.append(_marginal(dist))
    return history, first_inf


def _marginal(dist):
    out = defaultdict(float)
    for (true, *_), p in dist.items():
        out[true] += p
    return dict(out)


def _tick(state, adj, orig, tiers, probs):
    true, app, att, failed = state
    actors = [a for a in range(len(true)) if true[a] == INF]
    branches = [(1.0, (list(true), list(app), list(att), set(failed)))]
    for a in actors:
        nxt = []
        for p, st in branches:
            nxt.extend(_act(a, p, st, adj, orig, tiers, probs))
        branches = nxt
    return [(p, (tuple(t), tuple(ap), tuple(at), frozenset(f))) for p, (t, ap, at, f) in branches]


def _copy(st):
    t, ap, at, f = st
    return (list(t), list(ap), list(at), set(f))


def _act(a, p, st, adj, orig, tiers, probs):
    true, app, att, failed = st
    if att[a] is None:
        under = {x[0] for x in att if x is not None}
        cands = [b for b in adj[a] if app[b] <= SW and b not in under and (a, b) not in failed]
        if not cands:
            return [(p, st)]
        best = min(app[b] for b in cands)
        ties = [b for b in sorted(cands) if app[b] == best]
        out = []
        for b in ties:
            s2 = _copy(st)
            s2[2][a] = (b, app[b])
            out.extend(_progress(a, p / len(ties), s2, adj, orig, tiers, probs))
        return out
    return _progress(a, p, st, adj, orig, tiers, probs)


def _progress(a, p, st, adj, orig, tiers, probs):
    b, phase = st[2][a]
    q = probs[phase]
    out = []
    if q < 1.0:
        out.append((p * (1.0 - q), st))
    s2 = _copy(st) if q < 1.0 else st
    true, app, att, failed = s2
    # the tick's newly infected must not act until the next tick: they are
    # not in the actor list computed at the start of the tick
    if phase == 0:
        true[b] = app[b] = INF
        att[a] = None
    elif phase == 3:
        app[b] = SP1
        if true[b] != RH:
            true[b] = SP1
        att[a] = (b, 1)
    elif phase == 1:
        if tiers[b] == 1:
            true[b] = app[b] = INF
            att[a] = None
        else:
            app[b] = SP2
            if true[b] != RH:
                true[b] = SP2
            att[a] = (b, 2)
    else:
        if tiers[b] == 2:
            true[b] = app[b] = INF
            att[a] = None
        else:
            true[b] = RH
            app[b] = orig[b]
            failed.add((a, b))
            att[a] = None
    out.append((p * q, s2))
    return out
