"""Numba kernels: the hot inner loops for sweeps, RNG streams, and enumeration.

Everything here operates on plain numpy arrays so the public wrappers stay
allocation-free inside the sweep path.  All integer arithmetic is explicit
64-bit; random words are 32-bit values carried in uint32 arrays.  Nothing in
this module validates its inputs -- the wrappers do.
"""

import numpy as np
from numba import njit

U64 = np.uint64
U32 = np.uint32

MASK32 = U64(0xFFFFFFFF)
# Mixing constants: 2^64/phi increment plus the xor-shift-multiply finalizer
# (0xBF58476D1CE4E5B9, 0x94D049BB133111EB) -- the widely used splitmix64 pair.
GOLDEN = U64(0x9E3779B97F4A7C15)
MIX_A = U64(0xBF58476D1CE4E5B9)
MIX_B = U64(0x94D049BB133111EB)


@njit(cache=True, nogil=True, inline="always")
def _mix64(x):
    x = x ^ (x >> U64(30))
    x = x * MIX_A
    x = x ^ (x >> U64(27))
    x = x * MIX_B
    x = x ^ (x >> U64(31))
    return x


@njit(cache=True, nogil=True)
def mix64_k(x):
    # non-inline entry point so Python code can cross-check the kernel mixer
    return _mix64(U64(x))


# ---------------------------------------------------------------------------
# lagged-Fibonacci wheel: w[c] = (w[c-24] + w[c-55]) mod 2^32, out ^= w[c-61]
# ---------------------------------------------------------------------------

@njit(cache=True, nogil=True)
def pr_fill(wheel, cursor, out):
    """Draw out.size words from the wheel, advancing it in place.

    Returns the new cursor.  wheel is uint32[62]; cursor indexes the slot
    written next.
    """
    c = cursor
    for k in range(out.size):
        i24 = c - 24
        if i24 < 0:
            i24 += 62
        i55 = c - 55
        if i55 < 0:
            i55 += 62
        i61 = c - 61
        if i61 < 0:
            i61 += 62
        t = (U64(wheel[i24]) + U64(wheel[i55])) & MASK32
        out[k] = U32(t ^ U64(wheel[i61]))
        wheel[c] = U32(t)
        c += 1
        if c == 62:
            c = 0
    return c


@njit(cache=True, nogil=True, inline="always")
def _site_rand(seed, site, sweep, phase):
    z = _mix64(seed + GOLDEN * (site + U64(1)))
    z = _mix64(z ^ (GOLDEN * (U64(2) * sweep + phase + U64(1))))
    return z & MASK32


@njit(cache=True, nogil=True)
def site_keyed_fill(seed, ids, sweep, phase, out):
    """out[k] = 32-bit word keyed by (seed, ids[k], sweep, phase)."""
    s = U64(seed)
    sw = U64(sweep)
    ph = U64(phase)
    for k in range(out.size):
        out[k] = U32(_site_rand(s, U64(ids[k]), sw, ph))


@njit(cache=True, nogil=True)
def _fill_rand(mode, wheel, cursor, sk_seed, ids, sweep, phase, out):
    # mode 0: sequential wheel draw; mode 1: stateless site-keyed words
    if mode == 0:
        return pr_fill(wheel, cursor, out)
    site_keyed_fill(sk_seed, ids, sweep, phase, out)
    return cursor


# ---------------------------------------------------------------------------
# scalar Metropolis / heat-bath phase updates
# ---------------------------------------------------------------------------

@njit(cache=True, nogil=True)
def metropolis_phase(words, nbr, j6, order, rand, always, thr, de, fbits,
                     att, acc):
    """Update the sites listed in `order` (one parity) in place.

    words: uint64[Nl], spin bit in lane 0.  nbr int32[Nl,6], j6 uint8[Nl,6]
    in direction order (+x,-x,+y,-y,+z,-z).  One random consumed per site
    whatever the local energy change.  Returns the summed energy change.
    """
    one = U64(1)
    de_sum = 0.0
    has_field = fbits.size > 0
    for k in range(order.size):
        i = order[k]
        s = np.int64(words[i] & one)
        n = 0
        for d in range(6):
            n += s ^ np.int64(words[nbr[i, d]] & one) ^ np.int64(j6[i, d])
        key = n
        if has_field:
            key = 2 * n + (np.int64(fbits[i]) ^ s)
        att[key] += 1
        if always[key] == 1 or U64(rand[k]) < thr[key]:
            words[i] = words[i] ^ one
            acc[key] += 1
            de_sum += de[key]
    return de_sum


@njit(cache=True, nogil=True)
def heatbath_phase(words, nbr, j6, order, rand, hb_thr, de, fbits):
    """Heat-bath resampling of one parity; returns summed energy change.

    hb_thr is keyed by (m+6)/2 with m the local field sum over couplings,
    times two plus the field bit when a field is present.
    """
    one = U64(1)
    de_sum = 0.0
    has_field = fbits.size > 0
    for k in range(order.size):
        i = order[k]
        s = np.int64(words[i] & one)
        n = 0
        for d in range(6):
            n += s ^ np.int64(words[nbr[i, d]] & one) ^ np.int64(j6[i, d])
        m_idx = n if s == 1 else 6 - n
        if has_field:
            b = np.int64(fbits[i])
            hkey = 2 * m_idx + b
            mkey = 2 * n + (b ^ s)
        else:
            hkey = m_idx
            mkey = n
        new = 1 if U64(rand[k]) < hb_thr[hkey] else 0
        if new != s:
            words[i] = words[i] ^ one
            de_sum += de[mkey]
    return de_sum


# ---------------------------------------------------------------------------
# bit-sliced Metropolis: one word = one site, one lane = one sample
# ---------------------------------------------------------------------------

@njit(cache=True, nogil=True, inline="always")
def _planes_add(planes, row, mask):
    # ripple-carry add of a 1-bit-per-lane mask into a bit-plane counter row
    carry = mask
    p = 0
    width = planes.shape[1]
    while carry != U64(0) and p < width:
        t = planes[row, p] & carry
        planes[row, p] = planes[row, p] ^ carry
        carry = t
        p += 1


@njit(cache=True, nogil=True)
def metropolis_phase_bits(words, nbr, j6w, order, rand, thr, lane_mask,
                          planes, track):
    """W-lane Metropolis over one parity, zero-field couplings only.

    Six XORs feed a full-adder cascade that produces the 3-bit count of
    satisfied bonds per lane; one shared 32-bit random per site decides all
    lanes against the per-count thresholds.  n<=3 (non-positive energy
    change) always flips.  When track is on, per-lane attempt/accept counts
    accumulate into bit-plane counters: rows 0..6 attempts, 7..13 accepts.
    """
    full = lane_mask
    zero = U64(0)
    for k in range(order.size):
        i = order[k]
        s = words[i]
        u0 = s ^ words[nbr[i, 0]] ^ j6w[i, 0]
        u1 = s ^ words[nbr[i, 1]] ^ j6w[i, 1]
        u2 = s ^ words[nbr[i, 2]] ^ j6w[i, 2]
        u3 = s ^ words[nbr[i, 3]] ^ j6w[i, 3]
        u4 = s ^ words[nbr[i, 4]] ^ j6w[i, 4]
        u5 = s ^ words[nbr[i, 5]] ^ j6w[i, 5]
        s1 = u0 ^ u1 ^ u2
        c1 = (u0 & u1) | ((u0 ^ u1) & u2)
        s2 = u3 ^ u4 ^ u5
        c2 = (u3 & u4) | ((u3 ^ u4) & u5)
        b0 = s1 ^ s2
        c3 = s1 & s2
        b1 = c1 ^ c2 ^ c3
        b2 = (c1 & c2) | ((c1 ^ c2) & c3)
        r = U64(rand[k])
        a4 = full if r < thr[4] else zero
        a5 = full if r < thr[5] else zero
        a6 = full if r < thr[6] else zero
        nb0 = ~b0
        nb1 = ~b1
        eq4 = b2 & nb1 & nb0
        eq5 = b2 & nb1 & b0
        eq6 = b2 & b1 & nb0
        accept = ((~b2) | (eq4 & a4) | (eq5 & a5) | (eq6 & a6)) & full
        words[i] = s ^ accept
        if track:
            nb2 = ~b2
            eq0 = nb2 & nb1 & nb0 & full
            eq1 = nb2 & nb1 & b0 & full
            eq2 = nb2 & b1 & nb0 & full
            eq3 = nb2 & b1 & b0 & full
            eq4 &= full
            eq5 &= full
            eq6 &= full
            _planes_add(planes, 0, eq0)
            _planes_add(planes, 1, eq1)
            _planes_add(planes, 2, eq2)
            _planes_add(planes, 3, eq3)
            _planes_add(planes, 4, eq4)
            _planes_add(planes, 5, eq5)
            _planes_add(planes, 6, eq6)
            _planes_add(planes, 7, eq0)
            _planes_add(planes, 8, eq1)
            _planes_add(planes, 9, eq2)
            _planes_add(planes, 10, eq3)
            _planes_add(planes, 11, eq4 & accept)
            _planes_add(planes, 12, eq5 & accept)
            _planes_add(planes, 13, eq6 & accept)


@njit(cache=True, nogil=True)
def lane_popcount(vals, planes):
    """Accumulate per-lane set-bit counts of all words in vals into planes[0]."""
    for i in range(vals.size):
        _planes_add(planes, 0, vals[i])


# ---------------------------------------------------------------------------
# multi-sweep drivers (keep the sweep loop inside compiled code)
# ---------------------------------------------------------------------------

@njit(cache=True, nogil=True)
def metropolis_run(words, nbr, j6, order0, order1, ids0, ids1,
                   always, thr, de, fbits, att, acc,
                   mode, wheel, cursor, sk_seed, sweep0, n_sweeps,
                   e0, bin_sums, bin_size, hist, hist_thin,
                   rand0, rand1):
    """n_sweeps full checkerboard Metropolis sweeps.

    Tracks the running energy from e0; when bin_size > 0 the post-sweep
    energy is added to bin_sums[t // bin_size].  When hist.size > 0 the
    packed spin state is histogrammed every hist_thin sweeps (lane 0,
    words.size <= 20).  Returns (final_energy, cursor, sweep).
    """
    e = e0
    sweep = sweep0
    for t in range(n_sweeps):
        cursor = _fill_rand(mode, wheel, cursor, sk_seed, ids0,
                            U64(sweep), U64(0), rand0)
        e += metropolis_phase(words, nbr, j6, order0, rand0, always, thr,
                              de, fbits, att, acc)
        cursor = _fill_rand(mode, wheel, cursor, sk_seed, ids1,
                            U64(sweep), U64(1), rand1)
        e += metropolis_phase(words, nbr, j6, order1, rand1, always, thr,
                              de, fbits, att, acc)
        sweep += 1
        if bin_size > 0:
            bin_sums[t // bin_size] += e
        if hist.size > 0 and (t + 1) % hist_thin == 0:
            st = U64(0)
            for i in range(words.size):
                st |= (words[i] & U64(1)) << U64(i)
            hist[st] += 1
    return e, cursor, sweep


@njit(cache=True, nogil=True)
def heatbath_run(words, nbr, j6, order0, order1, ids0, ids1,
                 hb_thr, de, fbits,
                 mode, wheel, cursor, sk_seed, sweep0, n_sweeps,
                 e0, bin_sums, bin_size, hist, hist_thin, rand0, rand1):
    """Heat-bath analogue of metropolis_run."""
    e = e0
    sweep = sweep0
    for t in range(n_sweeps):
        cursor = _fill_rand(mode, wheel, cursor, sk_seed, ids0,
                            U64(sweep), U64(0), rand0)
        e += heatbath_phase(words, nbr, j6, order0, rand0, hb_thr, de, fbits)
        cursor = _fill_rand(mode, wheel, cursor, sk_seed, ids1,
                            U64(sweep), U64(1), rand1)
        e += heatbath_phase(words, nbr, j6, order1, rand1, hb_thr, de, fbits)
        sweep += 1
        if bin_size > 0:
            bin_sums[t // bin_size] += e
        if hist.size > 0 and (t + 1) % hist_thin == 0:
            st = U64(0)
            for i in range(words.size):
                st |= (words[i] & U64(1)) << U64(i)
            hist[st] += 1
    return e, cursor, sweep


@njit(cache=True, nogil=True)
def metropolis_run_bits(words, nbr, j6w, order0, order1, ids0, ids1,
                        thr, lane_mask, planes, track,
                        mode, wheel, cursor, sk_seed, sweep0, n_sweeps,
                        rand0, rand1):
    """n_sweeps W-lane sweeps; returns (cursor, sweep)."""
    sweep = sweep0
    for t in range(n_sweeps):
        cursor = _fill_rand(mode, wheel, cursor, sk_seed, ids0,
                            U64(sweep), U64(0), rand0)
        metropolis_phase_bits(words, nbr, j6w, order0, rand0, thr,
                              lane_mask, planes, track)
        cursor = _fill_rand(mode, wheel, cursor, sk_seed, ids1,
                            U64(sweep), U64(1), rand1)
        metropolis_phase_bits(words, nbr, j6w, order1, rand1, thr,
                              lane_mask, planes, track)
        sweep += 1
    return cursor, sweep


# ---------------------------------------------------------------------------
# exact enumeration (Gray-code walk over all 2^n states)
# ---------------------------------------------------------------------------

@njit(cache=True, nogil=True)
def enum_gray_hist(nbr, jval, h4, hist_n, hist_m, e4_off):
    """Histogram every state's energy (scaled by 4) and magnetization.

    jval int8[n,6] holds +-1 couplings per direction, h4 int64[n] holds 4*h_i.
    hist_n[e4+off] counts states, hist_m[e4+off] sums magnetizations.
    """
    n = nbr.shape[0]
    spins = np.full(n, -1, dtype=np.int8)
    e4 = np.int64(0)
    for i in range(n):
        for d in range(0, 6, 2):
            e4 -= 4 * np.int64(jval[i, d]) * spins[i] * spins[nbr[i, d]]
        e4 -= h4[i] * spins[i]
    m = np.int64(-n)
    hist_n[e4 + e4_off] += 1
    hist_m[e4 + e4_off] += m
    total = np.int64(1) << np.int64(n)
    for k in range(1, total):
        kk = k
        b = 0
        while kk & 1 == 0:
            kk >>= 1
            b += 1
        sb = np.int64(spins[b])
        loc = np.int64(0)
        for d in range(6):
            loc += np.int64(jval[b, d]) * spins[nbr[b, d]]
        e4 += 8 * sb * loc + 2 * sb * h4[b]
        spins[b] = -sb
        m -= 2 * sb
        hist_n[e4 + e4_off] += 1
        hist_m[e4 + e4_off] += m
    return


@njit(cache=True, nogil=True)
def enum_state_energies(nbr, jval, h4, e4s):
    """Fill e4s[state] with 4x the state's energy; bit i set means S_i = +1."""
    n = nbr.shape[0]
    spins = np.full(n, -1, dtype=np.int8)
    e4 = np.int64(0)
    for i in range(n):
        for d in range(0, 6, 2):
            e4 -= 4 * np.int64(jval[i, d]) * spins[i] * spins[nbr[i, d]]
        e4 -= h4[i] * spins[i]
    e4s[0] = e4
    total = np.int64(1) << np.int64(n)
    for k in range(1, total):
        kk = k
        b = 0
        while kk & 1 == 0:
            kk >>= 1
            b += 1
        sb = np.int64(spins[b])
        loc = np.int64(0)
        for d in range(6):
            loc += np.int64(jval[b, d]) * spins[nbr[b, d]]
        e4 += 8 * sb * loc + 2 * sb * h4[b]
        spins[b] = -sb
        e4s[k ^ (k >> 1)] = e4
    return


@njit(cache=True, nogil=True)
def enum_overlap_hist(e4s, beta, n, qhist):
    """Exact overlap distribution over two independent replicas.

    qhist[q+n] accumulates the probability of total overlap q (step 2).
    """
    total = e4s.size
    emin = e4s[0]
    for s in range(total):
        if e4s[s] < emin:
            emin = e4s[s]
    w = np.empty(total, dtype=np.float64)
    z = 0.0
    for s in range(total):
        w[s] = np.exp(-beta * 0.25 * (e4s[s] - emin))
        z += w[s]
    for s in range(total):
        w[s] /= z
    pc = np.empty(total, dtype=np.int64)
    pc[0] = 0
    for k in range(1, total):
        pc[k] = pc[k >> 1] + (k & 1)
    for s in range(total):
        ws = w[s]
        for t in range(total):
            q = n - 2 * pc[s ^ t]
            qhist[q + n] += ws * w[t]
    return
