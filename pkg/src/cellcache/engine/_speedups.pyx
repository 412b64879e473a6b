# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False, language_level=3
"""Compiled request loop.

Semantics mirror cellcache.policies.process_request exactly, including
the order in which random draws are consumed and the rule that
degenerate coins and singleton choices consume none.  Gain and channel
math never happens here: the Python side precomputes probability and
delay tables (constant SNR makes every probability a function of the
hit-set size only), so both engines multiply precisely the same floats.
"""

from libc.math cimport exp, floor, log, log1p, expm1

cdef double INV53 = 1.0 / 9007199254740992.0
cdef unsigned long long GOLDEN = 0x9E3779B97F4A7C15ULL

cdef extern from *:
    int __builtin_popcountll(unsigned long long) nogil


cdef inline unsigned long long mix64(unsigned long long z) nogil:
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL
    return z ^ (z >> 31)


cdef inline unsigned long long next_u64(unsigned long long* s) nogil:
    s[0] = s[0] + GOLDEN
    return mix64(s[0])


cdef inline double next_double(unsigned long long* s) nogil:
    return <double>(next_u64(s) >> 11) * INV53


cdef inline bint bernoulli(unsigned long long* s, double p) nogil:
    if p >= 1.0:
        return 1
    if p <= 0.0:
        return 0
    return next_double(s) < p


cdef inline int choice_index(unsigned long long* s, int n) nogil:
    cdef int i
    if n <= 1:
        return 0
    i = <int>(next_double(s) * n)
    if i >= n:
        i = n - 1
    return i


cdef inline double helper1(double b) nogil:
    if b > 1e-8 or b < -1e-8:
        return log1p(b) / b
    return 1.0 - b / 2.0 + b * b / 3.0 - b * b * b / 4.0


cdef inline double helper2(double b) nogil:
    if b > 1e-8 or b < -1e-8:
        return expm1(b) / b
    return 1.0 + b / 2.0 + b * b / 6.0 + b * b * b / 24.0


# policy codes (keep in sync with engine/compiled.py)
DEF P_QLRU_DELTA = 0
DEF P_QLRU = 1
DEF P_LRU = 2
DEF P_FIFO = 3
DEF P_LRU_ONE = 4
DEF P_LRU_ALL = 5


cdef class Kernel:
    cdef long long n_contents
    cdef int n_stations, capacity, policy
    cdef bint comp_mode, finite_mode, has_virtual
    cdef double alpha, zipf_hx1, zipf_hn, zipf_s
    # topology / region
    cdef double[::1] sx, sy, r2
    cdef double rx0, ry0, rw, rh
    # finite users
    cdef double[::1] ux, uy, ucdf
    cdef long long[::1] umask
    cdef int[::1] unearest
    # probability and delay tables
    cdef double[::1] q_arr, move_p, insert_f, delay_hit
    cdef double miss_delay
    # cache storage
    cdef long long[:, ::1] cont
    cdef int[:, ::1] nxt, prv, pos
    cdef int[::1] head, tail, count
    # virtual cache storage
    cdef int vcap
    cdef long long[:, ::1] vcont
    cdef int[:, ::1] vnxt, vprv, vpos
    cdef int[::1] vhead, vtail, vcount
    # rng streams: 0 content, 1 location, 2 serving, 3 retrieval, 4 channel, 5+b station b
    cdef unsigned long long[::1] rng
    # metrics
    cdef public long long hits, reqs, measure_r, index
    cdef public double delay_sum
    cdef long long[::1] covered_cnt, hit_cnt, ncopies, last_flush
    cdef double[::1] area

    def __init__(self, params):
        self.n_contents = params["n_contents"]
        self.n_stations = params["n_stations"]
        self.capacity = params["capacity"]
        self.policy = params["policy"]
        self.comp_mode = params["comp_mode"]
        self.finite_mode = params["finite_mode"]
        self.has_virtual = params["has_virtual"]
        self.alpha = params["alpha"]
        self.zipf_hx1 = params["zipf_hx1"]
        self.zipf_hn = params["zipf_hn"]
        self.zipf_s = params["zipf_s"]
        self.sx = params["sx"]
        self.sy = params["sy"]
        self.r2 = params["r2"]
        self.rx0 = params["rx0"]
        self.ry0 = params["ry0"]
        self.rw = params["rw"]
        self.rh = params["rh"]
        self.ux = params["ux"]
        self.uy = params["uy"]
        self.ucdf = params["ucdf"]
        self.umask = params["umask"]
        self.unearest = params["unearest"]
        self.q_arr = params["q_arr"]
        self.move_p = params["move_p"]
        self.insert_f = params["insert_f"]
        self.delay_hit = params["delay_hit"]
        self.miss_delay = params["miss_delay"]
        self.cont = params["cont"]
        self.nxt = params["nxt"]
        self.prv = params["prv"]
        self.pos = params["pos"]
        self.head = params["head"]
        self.tail = params["tail"]
        self.count = params["count"]
        self.vcap = params["vcap"]
        self.vcont = params["vcont"]
        self.vnxt = params["vnxt"]
        self.vprv = params["vprv"]
        self.vpos = params["vpos"]
        self.vhead = params["vhead"]
        self.vtail = params["vtail"]
        self.vcount = params["vcount"]
        self.rng = params["rng"]
        self.covered_cnt = params["covered_cnt"]
        self.hit_cnt = params["hit_cnt"]
        self.ncopies = params["ncopies"]
        self.last_flush = params["last_flush"]
        self.area = params["area"]
        self.hits = 0
        self.reqs = 0
        self.measure_r = 0
        self.index = 0
        self.delay_sum = 0.0

    # ------------------------------------------------------------------
    # zipf rejection-inversion (constants precomputed by traffic.ZipfSampler)

    cdef double _h_integral(self, double x) nogil:
        cdef double logx = log(x)
        return helper2((1.0 - self.alpha) * logx) * logx

    cdef double _h(self, double x) nogil:
        return exp(-self.alpha * log(x))

    cdef double _h_integral_inverse(self, double x) nogil:
        cdef double t = x * (1.0 - self.alpha)
        if t < -1.0:
            t = -1.0
        return exp(helper1(t) * x)

    cdef long long _zipf_sample(self) nogil:
        cdef double u, x
        cdef long long k
        if self.n_contents == 1:
            return 0
        while True:
            u = self.zipf_hn + next_double(&self.rng[0]) * (self.zipf_hx1 - self.zipf_hn)
            x = self._h_integral_inverse(u)
            k = <long long>floor(x + 0.5)
            if k < 1:
                k = 1
            elif k > self.n_contents:
                k = self.n_contents
            if (<double>k - x) <= self.zipf_s or u >= self._h_integral(<double>k + 0.5) - self._h(<double>k):
                return k - 1

    # ------------------------------------------------------------------
    # intrusive per-station cache lists

    cdef inline void _promote(self, int b, int slot) nogil:
        cdef int p, n
        if self.head[b] == slot:
            return
        p = self.prv[b, slot]
        n = self.nxt[b, slot]
        if p >= 0:
            self.nxt[b, p] = n
        if n >= 0:
            self.prv[b, n] = p
        if self.tail[b] == slot:
            self.tail[b] = p
        self.prv[b, slot] = -1
        self.nxt[b, slot] = self.head[b]
        if self.head[b] >= 0:
            self.prv[b, self.head[b]] = slot
        self.head[b] = slot

    cdef inline long long _insert_front(self, int b, long long f) nogil:
        """Insert f at the front of station b; returns evicted id or -1."""
        cdef int slot, p
        cdef long long evicted = -1
        if self.count[b] >= self.capacity:
            slot = self.tail[b]
            evicted = self.cont[b, slot]
            self.pos[b, evicted] = -1
            p = self.prv[b, slot]
            self.tail[b] = p
            if p >= 0:
                self.nxt[b, p] = -1
            else:
                self.head[b] = -1
        else:
            slot = self.count[b]
            self.count[b] += 1
        self.cont[b, slot] = f
        self.pos[b, f] = slot
        self.prv[b, slot] = -1
        self.nxt[b, slot] = self.head[b]
        if self.head[b] >= 0:
            self.prv[b, self.head[b]] = slot
        self.head[b] = slot
        if self.tail[b] < 0:
            self.tail[b] = slot
        return evicted

    cdef inline void _vpromote(self, int b, int slot) nogil:
        cdef int p, n
        if self.vhead[b] == slot:
            return
        p = self.vprv[b, slot]
        n = self.vnxt[b, slot]
        if p >= 0:
            self.vnxt[b, p] = n
        if n >= 0:
            self.vprv[b, n] = p
        if self.vtail[b] == slot:
            self.vtail[b] = p
        self.vprv[b, slot] = -1
        self.vnxt[b, slot] = self.vhead[b]
        if self.vhead[b] >= 0:
            self.vprv[b, self.vhead[b]] = slot
        self.vhead[b] = slot

    cdef inline void _vinsert_front(self, int b, long long f) nogil:
        cdef int slot, p
        cdef long long evicted
        if self.vcount[b] >= self.vcap:
            slot = self.vtail[b]
            evicted = self.vcont[b, slot]
            self.vpos[b, evicted] = -1
            p = self.vprv[b, slot]
            self.vtail[b] = p
            if p >= 0:
                self.vnxt[b, p] = -1
            else:
                self.vhead[b] = -1
        else:
            slot = self.vcount[b]
            self.vcount[b] += 1
        self.vcont[b, slot] = f
        self.vpos[b, f] = slot
        self.vprv[b, slot] = -1
        self.vnxt[b, slot] = self.vhead[b]
        if self.vhead[b] >= 0:
            self.vprv[b, self.vhead[b]] = slot
        self.vhead[b] = slot
        if self.vtail[b] < 0:
            self.vtail[b] = slot

    # ------------------------------------------------------------------
    # occupancy bookkeeping (per-request running average, area form)

    cdef inline void _bump(self, long long f, int dv, long long r, bint measure) nogil:
        if measure:
            self.area[f] += <double>self.ncopies[f] * <double>(r - 1 - self.last_flush[f])
            self.last_flush[f] = r - 1
        self.ncopies[f] += dv

    # ------------------------------------------------------------------

    cpdef run(self, long long n, bint measure):
        cdef long long it, f, cover, j_mask, targets, evicted, r
        cdef int b, nb, ncov, nj, kj, serving, nearest, bstar, slot
        cdef double x, y, dx, dy, d2, best_d2, u, p
        cdef double delay = 0.0
        cdef int[64] ids
        cdef bint hit, admit, decide
        cdef int B = self.n_stations

        for it in range(n):
            self.index += 1
            f = self._zipf_sample()

            # --- location / coverage -------------------------------------
            nearest = -1
            if self.finite_mode:
                u = next_double(&self.rng[1])
                nb = self._search_user(u)
                x = self.ux[nb]
                y = self.uy[nb]
                cover = self.umask[nb]
                nearest = self.unearest[nb]
            else:
                while True:
                    x = self.rx0 + next_double(&self.rng[1]) * self.rw
                    y = self.ry0 + next_double(&self.rng[1]) * self.rh
                    cover = 0
                    best_d2 = 1e308
                    for b in range(B):
                        dx = x - self.sx[b]
                        dy = y - self.sy[b]
                        d2 = dx * dx + dy * dy
                        if d2 <= self.r2[b]:
                            cover |= (<long long>1) << b
                            if d2 < best_d2:
                                best_d2 = d2
                                nearest = b
                    if cover != 0:
                        break

            # --- hit set --------------------------------------------------
            j_mask = 0
            ncov = 0
            for b in range(B):
                if (cover >> b) & 1:
                    ids[ncov] = b
                    ncov += 1
                    if self.pos[b, f] >= 0:
                        j_mask |= (<long long>1) << b
            hit = j_mask != 0
            kj = __builtin_popcountll(<unsigned long long>j_mask)

            # --- delay accounting ----------------------------------------
            if self.comp_mode:
                if hit:
                    delay = self.delay_hit[kj]
                else:
                    bstar = choice_index(&self.rng[3], ncov)
                    delay = self.miss_delay
            r = self.measure_r + 1 if measure else 0

            # --- hit-side updates -----------------------------------------
            if hit:
                if self.policy == P_QLRU_DELTA:
                    p = self.move_p[kj]
                    for b in range(B):
                        if (j_mask >> b) & 1:
                            if bernoulli(&self.rng[5 + b], p):
                                self._promote(b, self.pos[b, f])
                elif self.policy == P_QLRU or self.policy == P_LRU:
                    nj = 0
                    for b in range(B):
                        if (j_mask >> b) & 1:
                            ids[nj] = b
                            nj += 1
                    serving = ids[choice_index(&self.rng[2], nj)]
                    self._promote(serving, self.pos[serving, f])
                elif self.policy == P_LRU_ONE:
                    if self.pos[nearest, f] >= 0:
                        self._promote(nearest, self.pos[nearest, f])
                elif self.policy == P_LRU_ALL:
                    for b in range(B):
                        if (j_mask >> b) & 1:
                            self._promote(b, self.pos[b, f])

            # --- insertion side -------------------------------------------
            if self.policy == P_QLRU_DELTA:
                targets = cover & ~j_mask
            elif hit:
                targets = 0
            else:
                targets = cover
            if targets != 0:
                for b in range(B):
                    if not (targets >> b) & 1:
                        continue
                    if self.policy == P_QLRU_DELTA:
                        p = self.q_arr[b] * self.insert_f[kj]
                    elif self.policy == P_QLRU:
                        p = self.q_arr[b]
                    elif self.policy == P_LRU_ONE:
                        p = 1.0 if b == nearest else 0.0
                    else:
                        p = 1.0
                    if self.has_virtual:
                        slot = self.vpos[b, f]
                        admit = slot >= 0
                        if admit:
                            self._vpromote(b, slot)
                        else:
                            self._vinsert_front(b, f)
                        decide = admit and bernoulli(&self.rng[5 + b], p)
                    else:
                        decide = bernoulli(&self.rng[5 + b], p)
                    if decide:
                        evicted = self._insert_front(b, f)
                        self._bump(f, 1, r, measure)
                        if evicted >= 0:
                            self._bump(evicted, -1, r, measure)

            # --- metrics ---------------------------------------------------
            if measure:
                self.measure_r = r
                self.reqs += 1
                if hit:
                    self.hits += 1
                if self.comp_mode:
                    self.delay_sum += delay
                for b in range(B):
                    if (cover >> b) & 1:
                        self.covered_cnt[b] += 1
                        if (j_mask >> b) & 1:
                            self.hit_cnt[b] += 1

    cdef int _search_user(self, double u) nogil:
        cdef int lo = 0, hi = <int>self.ucdf.shape[0] - 1, mid
        while lo < hi:
            mid = (lo + hi) // 2
            if self.ucdf[mid] > u:
                hi = mid
            else:
                lo = mid + 1
        return lo

    def reset_measurement(self):
        self.hits = 0
        self.reqs = 0
        self.delay_sum = 0.0
        self.measure_r = 0
        cdef long long f
        cdef int b
        for b in range(self.n_stations):
            self.covered_cnt[b] = 0
            self.hit_cnt[b] = 0
        for f in range(self.n_contents):
            self.area[f] = 0.0
            self.last_flush[f] = 0
