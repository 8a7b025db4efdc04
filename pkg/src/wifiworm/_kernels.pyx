# distutils: language = c++
"""Compiled kernels; line-for-line mirror of ``_pykernels``."""

from libc.math cimport sin, cos, asin, sqrt
from libcpp.vector cimport vector

import numpy as np
cimport numpy as cnp

cnp.import_array()

BACKEND = "cython"

DEF EARTH_R = 6371000.0
DEF DEG2RAD = 0.017453292519943295

cdef enum:
    S_NOPASS = 0
    S_PASS1 = 1
    S_PASS2 = 2
    S_WEP = 3
    INFECTED = 4
    R_WPA = 5
    R_HIDDEN = 6
    PH_DIRECT = 0
    PH_DICT1 = 1
    PH_DICT2 = 2
    PH_WEP = 3
    TIER_DICT1 = 1
    TIER_DICT2 = 2


cdef inline double _radians(double x) nogil:
    # matches math.radians: x * (pi / 180)
    return x * DEG2RAD


cdef inline double _hav(double lat1, double lon1, double lat2, double lon2) nogil:
    cdef double p1 = _radians(lat1)
    cdef double p2 = _radians(lat2)
    cdef double dphi = p2 - p1
    cdef double dlmb = _radians(lon2 - lon1)
    cdef double s1 = sin(dphi * 0.5)
    cdef double s2 = sin(dlmb * 0.5)
    cdef double a = s1 * s1 + cos(p1) * cos(p2) * s2 * s2
    if a > 1.0:
        a = 1.0
    return 2.0 * EARTH_R * asin(sqrt(a))


def haversine(double lat1, double lon1, double lat2, double lon2):
    return _hav(lat1, lon1, lat2, lon2)


def grid_pairs(const cnp.int64_t[::1] order, const cnp.int64_t[:, ::1] cell_start,
               const cnp.int64_t[:, ::1] cell_end, const double[::1] lat, const double[::1] lon,
               double radius):
    cdef Py_ssize_t n = lat.shape[0]
    cdef Py_ssize_t i, o, k
    cdef cnp.int64_t j
    cdef vector[cnp.int64_t] us
    cdef vector[cnp.int64_t] vs
    cdef double la, lo
    with nogil:
        for i in range(n):
            la = lat[i]
            lo = lon[i]
            for o in range(cell_start.shape[1]):
                for k in range(cell_start[i, o], cell_end[i, o]):
                    j = order[k]
                    if j <= i:
                        continue
                    if _hav(la, lo, lat[j], lon[j]) <= radius:
                        us.push_back(i)
                        vs.push_back(j)
    cdef Py_ssize_t m = us.size()
    u_out = np.empty(m, dtype=np.int64)
    v_out = np.empty(m, dtype=np.int64)
    cdef cnp.int64_t[::1] uo = u_out
    cdef cnp.int64_t[::1] vo = v_out
    for k in range(m):
        uo[k] = us[k]
        vo[k] = vs[k]
    return u_out, v_out


cdef class _Draws:
    cdef object stream
    cdef double[::1] buf
    cdef Py_ssize_t pos
    cdef Py_ssize_t size

    def __init__(self, stream):
        self.stream = stream
        self.buf = stream.buf
        self.pos = stream.pos
        self.size = self.buf.shape[0]

    cdef inline double next(self):
        if self.pos >= self.size:
            self.stream.pos = self.pos
            self.stream.refill()
            self.buf = self.stream.buf
            self.size = self.buf.shape[0]
            self.pos = self.stream.pos
        cdef double u = self.buf[self.pos]
        self.pos += 1
        return u

    cdef void sync(self):
        self.stream.pos = self.pos


def advance(st, Py_ssize_t nsteps, cnp.int64_t[:, ::1] counts_out, log=None):
    cdef const cnp.int64_t[::1] indptr = st.indptr
    cdef const cnp.int32_t[::1] indices = st.indices
    cdef cnp.int8_t[::1] true_cls = st.true_cls
    cdef cnp.int8_t[::1] app = st.app_cls
    cdef const cnp.int8_t[::1] orig = st.orig_cls
    cdef const cnp.int8_t[::1] tier = st.tier
    cdef cnp.int32_t[::1] inf_step = st.inf_step
    cdef cnp.int32_t[::1] att_target = st.att_target
    cdef cnp.int8_t[::1] att_phase = st.att_phase
    cdef cnp.int64_t[::1] att_slot = st.att_slot
    cdef cnp.int32_t[::1] att_elapsed = st.att_elapsed
    cdef cnp.uint8_t[::1] under_attack = st.under_attack
    cdef cnp.uint8_t[::1] failed = st.failed
    cdef cnp.uint8_t[::1] dormant = st.dormant
    cdef cnp.int64_t[::1] counts = st.counts
    cdef const double[::1] pdone = st.phase_prob
    cdef const cnp.int32_t[::1] dsteps = st.phase_steps
    cdef bint deterministic = st.deterministic
    cdef bint logging = log is not None
    cdef _Draws draws = _Draws(st.stream)
    cdef cnp.int64_t live = st.live
    cdef cnp.int64_t t = st.step
    cdef Py_ssize_t n = true_cls.shape[0]
    cdef Py_ssize_t k = 0, r, c, a
    cdef cnp.int64_t s, slot, best_slot
    cdef int tgt, b, ph, best, count, pick
    cdef bint done, success, finished
    cdef int old

    while k < nsteps:
        if live == 0:
            for r in range(k, nsteps):
                for c in range(7):
                    counts_out[r, c] = counts[c]
            t += nsteps - k
            break
        for a in range(n):
            if inf_step[a] < 0 or inf_step[a] > t or dormant[a]:
                continue
            tgt = att_target[a]
            if tgt < 0:
                # select lowest-security eligible neighbour
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
                    dormant[a] = 1
                    live -= 1
                    continue
                pick = 0
                if count > 1:
                    pick = <int>(draws.next() * count)
                    if pick >= count:
                        pick = count - 1
                best_slot = -1
                for s in range(indptr[a], indptr[a + 1]):
                    if failed[s]:
                        continue
                    b = indices[s]
                    if app[b] == best and not under_attack[b]:
                        if pick == 0:
                            best_slot = s
                            break
                        pick -= 1
                tgt = indices[best_slot]
                att_target[a] = tgt
                att_phase[a] = app[tgt]
                att_slot[a] = best_slot
                att_elapsed[a] = 0
                under_attack[tgt] = 1
            ph = att_phase[a]
            att_elapsed[a] += 1
            if deterministic:
                done = att_elapsed[a] >= dsteps[ph]
            elif pdone[ph] >= 1.0:
                done = True
            else:
                done = draws.next() < pdone[ph]
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
                    old = true_cls[tgt]
                    if old != S_PASS1:
                        counts[old] -= 1
                        counts[S_PASS1] += 1
                        true_cls[tgt] = S_PASS1
                        if logging:
                            log.append((t + 1, tgt, old, S_PASS1))
                att_phase[a] = PH_DICT1
            elif ph == PH_DICT1:
                if tier[tgt] == TIER_DICT1:
                    success = True
                else:
                    app[tgt] = S_PASS2
                    if true_cls[tgt] != R_HIDDEN:
                        old = true_cls[tgt]
                        if old != S_PASS2:
                            counts[old] -= 1
                            counts[S_PASS2] += 1
                            true_cls[tgt] = S_PASS2
                            if logging:
                                log.append((t + 1, tgt, old, S_PASS2))
                    att_phase[a] = PH_DICT2
            else:
                if tier[tgt] == TIER_DICT2:
                    success = True
                else:
                    old = true_cls[tgt]
                    if old != R_HIDDEN:
                        counts[old] -= 1
                        counts[R_HIDDEN] += 1
                        true_cls[tgt] = R_HIDDEN
                        if logging:
                            log.append((t + 1, tgt, old, R_HIDDEN))
                    app[tgt] = orig[tgt]
                    failed[att_slot[a]] = 1
                    finished = True
                    for s in range(indptr[tgt], indptr[tgt + 1]):
                        b = indices[s]
                        if dormant[b] and inf_step[b] >= 0:
                            dormant[b] = 0
                            live += 1
            if success:
                old = true_cls[tgt]
                counts[old] -= 1
                counts[INFECTED] += 1
                true_cls[tgt] = INFECTED
                if logging:
                    log.append((t + 1, tgt, old, INFECTED))
                app[tgt] = INFECTED
                inf_step[tgt] = t + 1
                live += 1
                finished = True
            if finished:
                att_target[a] = -1
                att_phase[a] = -1
                att_slot[a] = -1
                under_attack[tgt] = 0
        t += 1
        for c in range(7):
            counts_out[k, c] = counts[c]
        k += 1

    draws.sync()
    st.live = live
    st.step = t
