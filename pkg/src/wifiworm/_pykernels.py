"""Pure-Python kernels.

Reference semantics for the compiled versions in ``_kernels.pyx``; both
must produce identical edge lists and identical simulation trajectories
for the same inputs, random stream included.
"""

from __future__ import annotations

import numpy as np

from .geo import haversine_m as _hav

BACKEND = "python"

# compartment codes; the first four double as attack-phase codes
S_NOPASS, S_PASS1, S_PASS2, S_WEP, INFECTED, R_WPA, R_HIDDEN = range(7)
PH_DIRECT, PH_DICT1, PH_DICT2, PH_WEP = range(4)
TIER_DICT1, TIER_DICT2 = 1, 2


def grid_pairs(order, cell_start, cell_end, lat, lon, radius):
    """Verified pairs ``(i, j)``, ``i < j``, with haversine distance <= radius.

    ``order`` lists node ids grouped by grid cell; ``cell_start[i, o]`` and
    ``cell_end[i, o]`` delimit, inside ``order``, the members of node i's
    o-th neighbouring cell (9 offsets, empty ranges allowed).
    """
    lat = lat.tolist()
    lon = lon.tolist()
    order = order.tolist()
    starts = cell_start.tolist()
    ends = cell_end.tolist()
    us, vs = [], []
    for i in range(len(lat)):
        la, lo = lat[i], lon[i]
        for s, e in zip(starts[i], ends[i]):
            for k in range(s, e):
                j = order[k]
                if j <= i:
                    continue
                if _hav(la, lo, lat[j], lon[j]) <= radius:
                    us.append(i)
                    vs.append(j)
    return np.asarray(us, dtype=np.int64), np.asarray(vs, dtype=np.int64)


def _draw(stream):
    if stream.pos >= stream.buf.shape[0]:
        stream.refill()
    u = stream.buf[stream.pos]
    stream.pos += 1
    return float(u)


def pick_target(a, indptr, indices, app, under_attack, failed, stream):
    """Lowest-security eligible neighbour of ``a`` or -1; uniform tie-break."""
    best = 4
    count = 0
    for s in range(indptr[a], indptr[a + 1]):
        if failed[s]:
            continue
        b = indices[s]
        c = app[b]
        if c > S_WEP or under_attack[b]:
            continue
        if c < best:
            best = c
            count = 1
        elif c == best:
            count += 1
    if count == 0:
        return -1, -1
    pick = 0
    if count > 1:
        pick = int(_draw(stream) * count)
        if pick >= count:
            pick = count - 1
    for s in range(indptr[a], indptr[a + 1]):
        if failed[s]:
            continue
        b = indices[s]
        if app[b] == best and not under_attack[b]:
            if pick == 0:
                return b, s
            pick -= 1
    raise AssertionError("unreachable")


def advance(st, nsteps, counts_out, log=None):
    """Advance ``st`` by ``nsteps`` ticks, writing counts after each tick
    into ``counts_out[k]``. Mutates ``st`` in place."""
    indptr = st.indptr.tolist()
    indices = st.indices.tolist()
    true_cls = st.true_cls.tolist()
    app = st.app_cls.tolist()
    orig = st.orig_cls.tolist()
    tier = st.tier.tolist()
    inf_step = st.inf_step.tolist()
    att_target = st.att_target.tolist()
    att_phase = st.att_phase.tolist()
    att_slot = st.att_slot.tolist()
    att_elapsed = st.att_elapsed.tolist()
    under_attack = st.under_attack.tolist()
    failed = st.failed.tolist()
    dormant = st.dormant.tolist()
    counts = st.counts.tolist()
    pdone = st.phase_prob.tolist()
    dsteps = st.phase_steps.tolist()
    deterministic = bool(st.deterministic)
    stream = st.stream
    live = st.live
    t = st.step

    infected = sorted(i for i, s in enumerate(inf_step) if s >= 0)

    def set_true(v, c):
        old = true_cls[v]
        if old == c:
            return
        counts[old] -= 1
        counts[c] += 1
        true_cls[v] = c
        if log is not None:
            log.append((t + 1, v, old, c))

    k = 0
    while k < nsteps:
        if live == 0:
            # nothing can change any more; replay the frozen counts
            for r in range(k, nsteps):
                counts_out[r] = counts
            t += nsteps - k
            break
        fresh = []
        for a in infected:
            if dormant[a]:
                continue
            tgt = att_target[a]
            if tgt < 0:
                tgt, slot = pick_target(a, indptr, indices, app, under_attack, failed, stream)
                if tgt < 0:
                    dormant[a] = 1
                    live -= 1
                    continue
                att_target[a] = tgt
                att_phase[a] = app[tgt]
                att_slot[a] = slot
                att_elapsed[a] = 0
                under_attack[tgt] = 1
            ph = att_phase[a]
            att_elapsed[a] += 1
            if deterministic:
                done = att_elapsed[a] >= dsteps[ph]
            elif pdone[ph] >= 1.0:
                done = True
            else:
                done = _draw(stream) < pdone[ph]
            if not done:
                continue
            att_elapsed[a] = 0
            success = False
            finished = False
            if ph == PH_DIRECT:
                success = True
            elif ph == PH_WEP:
                app[tgt] = S_PASS1
                if true_cls[tgt] != R_HIDDEN:
                    set_true(tgt, S_PASS1)
                att_phase[a] = PH_DICT1
            elif ph == PH_DICT1:
                if tier[tgt] == TIER_DICT1:
                    success = True
                else:
                    app[tgt] = S_PASS2
                    if true_cls[tgt] != R_HIDDEN:
                        set_true(tgt, S_PASS2)
                    att_phase[a] = PH_DICT2
            else:
                if tier[tgt] == TIER_DICT2:
                    success = True
                else:
                    set_true(tgt, R_HIDDEN)
                    app[tgt] = orig[tgt]
                    failed[att_slot[a]] = 1
                    finished = True
                    for s in range(indptr[tgt], indptr[tgt + 1]):
                        b = indices[s]
                        if dormant[b] and inf_step[b] >= 0:
                            dormant[b] = 0
                            live += 1
            if success:
                set_true(tgt, INFECTED)
                app[tgt] = INFECTED
                inf_step[tgt] = t + 1
                fresh.append(tgt)
                live += 1
                finished = True
            if finished:
                att_target[a] = -1
                att_phase[a] = -1
                att_slot[a] = -1
                under_attack[tgt] = 0
        if fresh:
            infected = sorted(infected + fresh)
        t += 1
        counts_out[k] = counts
        k += 1

    st.true_cls[:] = true_cls
    st.app_cls[:] = app
    st.inf_step[:] = inf_step
    st.att_target[:] = att_target
    st.att_phase[:] = att_phase
    st.att_slot[:] = att_slot
    st.att_elapsed[:] = att_elapsed
    st.under_attack[:] = under_attack
    st.failed[:] = failed
    st.dormant[:] = dormant
    st.counts[:] = counts
    st.live = live
    st.step = t
