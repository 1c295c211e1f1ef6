"""Array-backed node storage and jitted operation kernels.

Every node lives in flat parallel arrays: an entry arena (key slot, value
slot, packed 2-bit type vector) plus per-node metadata (model, length,
offset, statistics). The value slot is a union: payload for DATA entries,
child node id for NODE entries, free-list link for recycled regions.
Entry regions are allocated in power-of-two size classes with per-class
free lists threaded through the arena; two-entry nodes keep their region
attached and recycle through a dedicated pool.

All mutating kernels take the growable arrays as a tuple ``H`` and return
a (possibly replaced) ``H``; fixed-size state (scalars, buffers) is
mutated in place. Code that calls a grower must re-unpack ``H`` before
touching node or entry arrays again.
"""

import numpy as np
from numba import njit

# Entry tags: 2 bits per entry. Bit 0 set = occupied, bit 1 set = child.
TAG_NULL = 0
TAG_DATA = 1
TAG_NODE = 3

# Scalar state slots in S (int64[SLEN]).
S_ROOT = 0            # root node id, -1 when no tree yet
S_NODE_HW = 1         # node-id high water mark
S_ARENA_HW = 2        # entry-arena high water mark
S_NODE_FREE = 3       # head of freed-node list (-1 empty), linked via noff
S_POOL_HEAD = 4       # head of two-entry node pool (-1), linked via nelem
S_POOL_SIZE = 5
S_POOL_HITS = 6
S_LIVE_NODES = 7
S_LIVE_SLOTS = 8      # sum of L over live nodes
S_TREE_ELEMS = 9      # elements stored in the tree (buffers excluded)
S_LB_N = 10           # left overflow buffer fill
S_RB_N = 11           # right overflow buffer fill
S_BS_N = 12           # bootstrap buffer fill
S_HAS_MINMAX = 13
S_PENDING = 14        # deferred-work code, see PEND_*
S_PENDING_NID = 15
S_N_LOOKUPS = 16
S_N_INSERTS = 17
S_N_DELETES = 18
S_N_UPDATES = 19
S_N_RANGES = 20
S_NODE_VISITS = 21
S_KEY_COMPARES = 22   # tree-path key comparisons only
S_ADJUSTMENTS = 23
S_CONFLICT_INSERTS = 24
S_OP_ERRORS = 25
S_MAX_L = 32
S_MIN_ADJUST = 33
S_OV_CAP = 34
S_SMALL_L = 35
SLEN = 40

# Deferred work requested by an op; the facade services it (and times it).
PEND_NONE = 0
PEND_ADJUST = 1
PEND_OVERFLOW = 2
PEND_BOOTSTRAP = 3

# Op status codes.
OK = 0
ERR_DUP = 1
ERR_NOTFOUND = 2
ERR_GCOLLIDE = 3
ERR_DEPTH = 4

MAX_DEPTH = 128
# Path scratch layout: PS[0] = recorded depth, entries at PS[2+2d], PS[3+2d].
PS_LEN = 2 + 2 * (MAX_DEPTH + 2)

# Kernel function ids.
K_LINEAR = 0
K_QUADRATIC = 1
K_EXPONENTIAL = 2
K_LOGARITHMIC = 3
K_POLYNOMIAL = 4


# ---------------------------------------------------------------------------
# model evaluation
# ---------------------------------------------------------------------------

@njit(cache=True, inline="always")
def _g_eval(kid, kc, x):
    if kid == K_LINEAR:
        return x
    if kid == K_QUADRATIC:
        return x * x
    if kid == K_EXPONENTIAL:
        return np.exp(x)
    if kid == K_LOGARITHMIC:
        return np.log(x)
    acc = 0.0
    for i in range(kc.shape[0] - 1, -1, -1):
        acc = acc * x + kc[i]
    return acc


@njit(cache=True, inline="always")
def _predict(a, b, gv, L):
    raw = a * gv + b
    if raw < 0.0:
        return 0
    if raw >= L or raw != raw:
        return L - 1
    return np.int64(raw)


@njit(cache=True)
def fmcd_core(g, L):
    """Minimum conflict degree T and model (A, b) for sorted kernel values g.

    Single forward pass; T grows only when some pair of keys T apart is
    closer than the current per-slot span U_T = (g[n-1-T] - g[T]) / (L-2).
    When the final U_T is非 positive the slot-span construction breaks down
    (indices crossed); fall back to the smallest slope that still separates
    every pair T apart, with the same centered intercept.
    """
    n = g.shape[0]
    if n == 1:
        return 0.0, 0.0, 1
    if n == 2:
        a = (L - 1.0) / (g[1] - g[0])
        return a, -a * g[0], 1
    i = 0
    T = 1
    U = (g[n - 2] - g[1]) / (L - 2.0)
    while i <= n - 1 - T:
        while i + T < n and g[i + T] - g[i] >= U:
            i += 1
        if i + T >= n:
            break
        T += 1
        U = (g[n - 1 - T] - g[T]) / (L - 2.0)
    if U > 0.0:
        a = 1.0 / U
    else:
        a = 0.0
        for j in range(n - T):
            r = 1.0 / (g[j + T] - g[j])
            if r > a:
                a = r
    b = (L - a * (g[n - 1 - T] + g[T])) / 2.0
    return a, b, T


# ---------------------------------------------------------------------------
# bitmap (2 bits per entry, absolute entry index)
# ---------------------------------------------------------------------------

@njit(cache=True, inline="always")
def tag_get(bmp, e):
    w = e >> 5
    sh = np.uint64((e & 31) << 1)
    return np.int64((bmp[w] >> sh) & np.uint64(3))


@njit(cache=True, inline="always")
def tag_set(bmp, e, tag):
    w = e >> 5
    sh = np.uint64((e & 31) << 1)
    bmp[w] = (bmp[w] & ~(np.uint64(3) << sh)) | (np.uint64(tag) << sh)


@njit(cache=True)
def _bmp_clear(bmp, e0, n):
    b0 = e0 << 1
    b1 = (e0 + n) << 1
    w0 = b0 >> 6
    w1 = (b1 - 1) >> 6
    one = np.uint64(1)
    if w0 == w1:
        span = b1 - b0
        if span >= 64:
            bmp[w0] = np.uint64(0)
        else:
            mask = ((one << np.uint64(span)) - one) << np.uint64(b0 & 63)
            bmp[w0] = bmp[w0] & ~mask
        return
    bmp[w0] = bmp[w0] & ((one << np.uint64(b0 & 63)) - one)
    for w in range(w0 + 1, w1):
        bmp[w] = np.uint64(0)
    r = b1 & 63
    if r == 0:
        bmp[w1] = np.uint64(0)
    else:
        bmp[w1] = bmp[w1] & ~((one << np.uint64(r)) - one)


# ---------------------------------------------------------------------------
# storage allocation
# ---------------------------------------------------------------------------

@njit(cache=True)
def _grow(a, need):
    cap = a.shape[0]
    if need <= cap:
        return a
    newcap = cap if cap > 0 else 16
    while newcap < need:
        newcap *= 2
    b = np.empty(newcap, a.dtype)
    b[:cap] = a
    return b


@njit(cache=True, inline="always")
def _size_class(L):
    c = 2
    while (1 << c) < L:
        c += 1
    return c


@njit(cache=True)
def _alloc_region(H, S, FL, L):
    """Return (H, off) for a cleared region holding at least L entries."""
    ek, ev, bmp, na, nb, nL, noff, nelem, nbuild, nconf, nfx = H
    c = _size_class(L)
    cap = 1 << c
    off = FL[c]
    if off >= 0:
        FL[c] = np.int64(ev[off])
    else:
        off = S[S_ARENA_HW]
        need = off + cap
        ek = _grow(ek, need)
        ev = _grow(ev, need)
        bmp = _grow(bmp, ((need << 1) + 63) >> 6)
        S[S_ARENA_HW] = need
    _bmp_clear(bmp, off, cap)
    return (ek, ev, bmp, na, nb, nL, noff, nelem, nbuild, nconf, nfx), off


@njit(cache=True)
def _alloc_node_meta(H, S):
    """Return (H, nid) for a blank node header (no entry region attached)."""
    ek, ev, bmp, na, nb, nL, noff, nelem, nbuild, nconf, nfx = H
    nid = S[S_NODE_FREE]
    if nid >= 0:
        S[S_NODE_FREE] = noff[nid]
    else:
        nid = S[S_NODE_HW]
        need = nid + 1
        if need > nL.shape[0]:
            na = _grow(na, need)
            nb = _grow(nb, need)
            nL = _grow(nL, need)
            noff = _grow(noff, need)
            nelem = _grow(nelem, need)
            nbuild = _grow(nbuild, need)
            nconf = _grow(nconf, need)
            nfx = _grow(nfx, need)
        S[S_NODE_HW] = need
    na[nid] = 0.0
    nb[nid] = 0.0
    nL[nid] = 0
    noff[nid] = -1
    nelem[nid] = 0
    nbuild[nid] = 0
    nconf[nid] = 0
    nfx[nid] = 0
    return (ek, ev, bmp, na, nb, nL, noff, nelem, nbuild, nconf, nfx), nid


@njit(cache=True)
def new_node(H, S, FL, L):
    H, nid = _alloc_node_meta(H, S)
    H, off = _alloc_region(H, S, FL, L)
    ek, ev, bmp, na, nb, nL, noff, nelem, nbuild, nconf, nfx = H
    nL[nid] = L
    noff[nid] = off
    if L >= S[S_MAX_L]:
        nfx[nid] = 1
    S[S_LIVE_NODES] += 1
    S[S_LIVE_SLOTS] += L
    return H, nid


@njit(cache=True)
def _acquire_small(H, S, FL):
    """Two-entry node, recycled from the pool when possible."""
    ek, ev, bmp, na, nb, nL, noff, nelem, nbuild, nconf, nfx = H
    nid = S[S_POOL_HEAD]
    if nid >= 0:
        S[S_POOL_HEAD] = nelem[nid]
        S[S_POOL_SIZE] -= 1
        S[S_POOL_HITS] += 1
        L = S[S_SMALL_L]
        nL[nid] = L
        _bmp_clear(bmp, noff[nid], 1 << _size_class(L))
        nelem[nid] = 0
        nbuild[nid] = 0
        nconf[nid] = 0
        nfx[nid] = 0
        S[S_LIVE_NODES] += 1
        S[S_LIVE_SLOTS] += L
        return H, nid
    return new_node(H, S, FL, S[S_SMALL_L])


@njit(cache=True)
def make_two_key_node(H, S, FL, kid, kc, k0, p0, k1, p1):
    """Node trained on exactly two keys (k0 < k1), spread to the ends."""
    H, nid = _acquire_small(H, S, FL)
    ek, ev, bmp, na, nb, nL, noff, nelem, nbuild, nconf, nfx = H
    L = nL[nid]
    off = noff[nid]
    g0 = _g_eval(kid, kc, np.float64(k0))
    g1 = _g_eval(kid, kc, np.float64(k1))
    a = (L - 1.0) / (g1 - g0)
    b = -a * g0
    na[nid] = a
    nb[nid] = b
    e0 = off + _predict(a, b, g0, L)
    e1 = off + _predict(a, b, g1, L)
    ek[e0] = k0
    ev[e0] = p0
    tag_set(bmp, e0, TAG_DATA)
    ek[e1] = k1
    ev[e1] = p1
    tag_set(bmp, e1, TAG_DATA)
    nelem[nid] = 2
    nbuild[nid] = 2
    nconf[nid] = 0
    return H, nid


@njit(cache=True)
def release_subtree(H, S, FL, nid):
    """Return a no-longer-reachable subtree to the pool / free lists.

    Returns the number of already-freed nodes encountered (0 in a correct
    caller; nonzero signals a double release).
    """
    ek, ev, bmp, na, nb, nL, noff, nelem, nbuild, nconf, nfx = H
    stack = np.empty(64, np.int64)
    stack[0] = nid
    top = 1
    bad = 0
    small = S[S_SMALL_L]
    while top > 0:
        top -= 1
        cur = stack[top]
        L = nL[cur]
        if L <= 0:
            bad += 1
            continue
        off = noff[cur]
        for p in range(L):
            if tag_get(bmp, off + p) == TAG_NODE:
                if top >= stack.shape[0]:
                    stack = _grow(stack, top + 1)
                stack[top] = np.int64(ev[off + p])
                top += 1
        S[S_LIVE_NODES] -= 1
        S[S_LIVE_SLOTS] -= L
        if L == small:
            nelem[cur] = S[S_POOL_HEAD]
            S[S_POOL_HEAD] = cur
            S[S_POOL_SIZE] += 1
            nL[cur] = -2
        else:
            c = _size_class(L)
            ev[off] = np.uint64(FL[c])
            FL[c] = off
            noff[cur] = S[S_NODE_FREE]
            S[S_NODE_FREE] = cur
            nL[cur] = -1
    return bad


@njit(cache=True)
def pool_clear(H, S, FL):
    """Drop all pooled two-entry nodes back to the general free lists."""
    ek, ev, bmp, na, nb, nL, noff, nelem, nbuild, nconf, nfx = H
    nid = S[S_POOL_HEAD]
    while nid >= 0:
        nxt = nelem[nid]
        off = noff[nid]
        c = _size_class(S[S_SMALL_L])
        ev[off] = np.uint64(FL[c])
        FL[c] = off
        noff[nid] = S[S_NODE_FREE]
        S[S_NODE_FREE] = nid
        nL[nid] = -1
        nid = nxt
    S[S_POOL_HEAD] = -1
    S[S_POOL_SIZE] = 0


# ---------------------------------------------------------------------------
# partial-tree construction
# ---------------------------------------------------------------------------

@njit(cache=True)
def build_subtree(H, S, FL, P, kid, kc, keys, vals):
    """Build a subtree over sorted unique keys; returns (H, root_nid).

    Nodes get L = min(max_L, delta * n) entries (floored at 2, or 3 when
    the general model path is taken) and are marked fixed at the cap.
    Positions sharing more than one key become children, built iteratively
    through a work stack over (nid, lo, hi) ranges.
    """
    n0 = keys.shape[0]
    delta = P[2]
    maxL = S[S_MAX_L]

    g = np.empty(n0, np.float64)
    for t in range(n0):
        g[t] = _g_eval(kid, kc, np.float64(keys[t]))

    wk_nid = np.empty(64, np.int64)
    wk_lo = np.empty(64, np.int64)
    wk_hi = np.empty(64, np.int64)
    H, root = _alloc_node_meta(H, S)
    wk_nid[0] = root
    wk_lo[0] = 0
    wk_hi[0] = n0
    top = 1

    while top > 0:
        top -= 1
        nid = wk_nid[top]
        lo = wk_lo[top]
        hi = wk_hi[top]
        n = hi - lo

        L = np.int64(delta * n)
        if n >= 3:
            if L < 3:
                L = 3
        elif L < 2:
            L = 2
        if L >= maxL:
            L = maxL

        H, off = _alloc_region(H, S, FL, L)
        ek, ev, bmp, na, nb, nL, noff, nelem, nbuild, nconf, nfx = H
        nL[nid] = L
        noff[nid] = off
        nelem[nid] = n
        nbuild[nid] = n
        nconf[nid] = 0
        nfx[nid] = 1 if L >= maxL else 0
        S[S_LIVE_NODES] += 1
        S[S_LIVE_SLOTS] += L

        a, b, _T = fmcd_core(g[lo:hi], L)
        na[nid] = a
        nb[nid] = b

        i = lo
        while i < hi:
            p = _predict(a, b, g[i], L)
            j = i + 1
            while j < hi and _predict(a, b, g[j], L) == p:
                j += 1
            e = off + p
            if j - i == 1:
                ek[e] = keys[i]
                ev[e] = vals[i]
                tag_set(bmp, e, TAG_DATA)
            else:
                H, child = _alloc_node_meta(H, S)
                ek, ev, bmp, na, nb, nL, noff, nelem, nbuild, nconf, nfx = H
                ev[e] = np.uint64(child)
                tag_set(bmp, e, TAG_NODE)
                if top >= wk_nid.shape[0]:
                    wk_nid = _grow(wk_nid, top + 1)
                    wk_lo = _grow(wk_lo, top + 1)
                    wk_hi = _grow(wk_hi, top + 1)
                wk_nid[top] = child
                wk_lo[top] = i
                wk_hi[top] = j
                top += 1
            i = j
    return H, root


@njit(cache=True)
def collect_subtree(H, nid, out_k, out_v):
    """In-order copy of all DATA entries under nid; returns the count."""
    ek, ev, bmp, na, nb, nL, noff, nelem, nbuild, nconf, nfx = H
    sn = np.empty(MAX_DEPTH + 2, np.int64)
    sp = np.empty(MAX_DEPTH + 2, np.int64)
    sn[0] = nid
    sp[0] = 0
    top = 1
    cnt = 0
    while top > 0:
        cur = sn[top - 1]
        pos = sp[top - 1]
        off = noff[cur]
        L = nL[cur]
        descended = False
        while pos < L:
            e = off + pos
            t = tag_get(bmp, e)
            if t == TAG_DATA:
                out_k[cnt] = ek[e]
                out_v[cnt] = ev[e]
                cnt += 1
                pos += 1
            elif t == TAG_NODE:
                sp[top - 1] = pos + 1
                if top >= sn.shape[0]:
                    sn = _grow(sn, top + 1)
                    sp = _grow(sp, top + 1)
                sn[top] = np.int64(ev[e])
                sp[top] = 0
                top += 1
                descended = True
                break
            else:
                pos += 1
        if not descended:
            top -= 1
    return cnt


# ---------------------------------------------------------------------------
# sorted side buffers (fixed capacity, shifted in place)
# ---------------------------------------------------------------------------

@njit(cache=True)
def _buf_find(bk, n, k):
    lo = 0
    hi = n
    while lo < hi:
        mid = (lo + hi) >> 1
        if bk[mid] < k:
            lo = mid + 1
        else:
            hi = mid
    if lo < n and bk[lo] == k:
        return lo, True
    return lo, False


@njit(cache=True)
def _buf_insert(bk, bv, n, k, p):
    pos, found = _buf_find(bk, n, k)
    if found:
        return -1
    for i in range(n, pos, -1):
        bk[i] = bk[i - 1]
        bv[i] = bv[i - 1]
    bk[pos] = k
    bv[pos] = p
    return pos


@njit(cache=True)
def _buf_remove(bk, bv, n, pos):
    for i in range(pos, n - 1):
        bk[i] = bk[i + 1]
        bv[i] = bv[i + 1]


# ---------------------------------------------------------------------------
# point operations
# ---------------------------------------------------------------------------

@njit(cache=True)
def op_lookup(H, S, CK, B, kid, kc, k):
    """Returns (found, payload, node, position, depth).

    node is -1 and depth 0 when a side buffer answered; position is then
    the buffer slot.
    """
    ek, ev, bmp, na, nb, nL, noff, nelem, nbuild, nconf, nfx = H
    lbk, lbv, rbk, rbv, bsk, bsv = B
    S[S_N_LOOKUPS] += 1
    root = S[S_ROOT]
    if root < 0:
        pos, found = _buf_find(bsk, S[S_BS_N], k)
        if found:
            return True, bsv[pos], np.int64(-1), pos, 0
        return False, np.uint64(0), np.int64(-1), pos, 0
    if S[S_HAS_MINMAX] == 1:
        if k < CK[0]:
            pos, found = _buf_find(lbk, S[S_LB_N], k)
            if found:
                return True, lbv[pos], np.int64(-1), pos, 0
            return False, np.uint64(0), np.int64(-1), pos, 0
        if k > CK[1]:
            pos, found = _buf_find(rbk, S[S_RB_N], k)
            if found:
                return True, rbv[pos], np.int64(-1), pos, 0
            return False, np.uint64(0), np.int64(-1), pos, 0
    gv = _g_eval(kid, kc, np.float64(k))
    nid = root
    depth = 1
    while True:
        p = _predict(na[nid], nb[nid], gv, nL[nid])
        e = noff[nid] + p
        t = tag_get(bmp, e)
        if t == TAG_NODE:
            nid = np.int64(ev[e])
            depth += 1
            continue
        S[S_NODE_VISITS] += depth
        if t == TAG_DATA:
            S[S_KEY_COMPARES] += 1
            if ek[e] == k:
                return True, ev[e], nid, p, depth
        return False, np.uint64(0), nid, p, depth


@njit(cache=True)
def op_insert(H, S, FL, CK, B, PS, P, kid, kc, k, p):
    """Insert k -> p. Returns (H, status); deferred work is flagged in S."""
    ek, ev, bmp, na, nb, nL, noff, nelem, nbuild, nconf, nfx = H
    lbk, lbv, rbk, rbv, bsk, bsv = B
    S[S_N_INSERTS] += 1
    root = S[S_ROOT]
    if root < 0:
        if _buf_insert(bsk, bsv, S[S_BS_N], k, p) < 0:
            return H, ERR_DUP
        S[S_BS_N] += 1
        if S[S_BS_N] >= S[S_MIN_ADJUST]:
            S[S_PENDING] = PEND_BOOTSTRAP
        return H, OK
    if S[S_HAS_MINMAX] == 1 and k < CK[0]:
        if _buf_insert(lbk, lbv, S[S_LB_N], k, p) < 0:
            return H, ERR_DUP
        S[S_LB_N] += 1
        if S[S_LB_N] >= S[S_OV_CAP]:
            S[S_PENDING] = PEND_OVERFLOW
        return H, OK
    if S[S_HAS_MINMAX] == 1 and k > CK[1]:
        if _buf_insert(rbk, rbv, S[S_RB_N], k, p) < 0:
            return H, ERR_DUP
        S[S_RB_N] += 1
        if S[S_RB_N] >= S[S_OV_CAP]:
            S[S_PENDING] = PEND_OVERFLOW
        return H, OK

    gv = _g_eval(kid, kc, np.float64(k))
    nid = root
    depth = 0
    while True:
        pp = _predict(na[nid], nb[nid], gv, nL[nid])
        if depth >= MAX_DEPTH:
            return H, ERR_DEPTH
        PS[2 + 2 * depth] = nid
        PS[3 + 2 * depth] = pp
        depth += 1
        e = noff[nid] + pp
        t = tag_get(bmp, e)
        if t == TAG_NODE:
            nid = np.int64(ev[e])
            continue
        break
    S[S_NODE_VISITS] += depth

    conflicted = False
    if t == TAG_NULL:
        ek[e] = k
        ev[e] = p
        tag_set(bmp, e, TAG_DATA)
    else:
        k2 = ek[e]
        S[S_KEY_COMPARES] += 1
        if k2 == k:
            return H, ERR_DUP
        g2 = _g_eval(kid, kc, np.float64(k2))
        if g2 == gv:
            return H, ERR_GCOLLIDE
        p2 = ev[e]
        if k < k2:
            H, child = make_two_key_node(H, S, FL, kid, kc, k, p, k2, p2)
        else:
            H, child = make_two_key_node(H, S, FL, kid, kc, k2, p2, k, p)
        ek, ev, bmp, na, nb, nL, noff, nelem, nbuild, nconf, nfx = H
        e = noff[nid] + pp
        ev[e] = np.uint64(child)
        tag_set(bmp, e, TAG_NODE)
        conflicted = True
        S[S_CONFLICT_INSERTS] += 1
    S[S_TREE_ELEMS] += 1

    for d in range(depth):
        x = PS[2 + 2 * d]
        nelem[x] += 1
        if conflicted:
            nconf[x] += 1

    # Deepest node passing all four gates gets rebuilt (one per insert).
    alpha = P[0]
    beta = P[1]
    minadj = S[S_MIN_ADJUST]
    for d in range(depth - 1, -1, -1):
        x = PS[2 + 2 * d]
        el = nelem[x]
        if el < minadj or nfx[x] == 1:
            continue
        bu = nbuild[x]
        if np.float64(el) < beta * np.float64(bu):
            continue
        den = el - bu
        if den <= 0:
            continue
        if np.float64(nconf[x]) / np.float64(den) >= alpha:
            S[S_PENDING] = PEND_ADJUST
            S[S_PENDING_NID] = x
            PS[0] = depth
            break
    return H, OK


@njit(cache=True)
def op_delete(H, S, CK, B, PS, kid, kc, k):
    """Mark the entry NULL (no structural change); buffers shrink in place."""
    ek, ev, bmp, na, nb, nL, noff, nelem, nbuild, nconf, nfx = H
    lbk, lbv, rbk, rbv, bsk, bsv = B
    S[S_N_DELETES] += 1
    root = S[S_ROOT]
    if root < 0:
        pos, found = _buf_find(bsk, S[S_BS_N], k)
        if not found:
            return ERR_NOTFOUND
        _buf_remove(bsk, bsv, S[S_BS_N], pos)
        S[S_BS_N] -= 1
        return OK
    if S[S_HAS_MINMAX] == 1 and k < CK[0]:
        pos, found = _buf_find(lbk, S[S_LB_N], k)
        if not found:
            return ERR_NOTFOUND
        _buf_remove(lbk, lbv, S[S_LB_N], pos)
        S[S_LB_N] -= 1
        return OK
    if S[S_HAS_MINMAX] == 1 and k > CK[1]:
        pos, found = _buf_find(rbk, S[S_RB_N], k)
        if not found:
            return ERR_NOTFOUND
        _buf_remove(rbk, rbv, S[S_RB_N], pos)
        S[S_RB_N] -= 1
        return OK
    gv = _g_eval(kid, kc, np.float64(k))
    nid = root
    depth = 0
    while True:
        pp = _predict(na[nid], nb[nid], gv, nL[nid])
        if depth >= MAX_DEPTH:
            return ERR_DEPTH
        PS[2 + 2 * depth] = nid
        PS[3 + 2 * depth] = pp
        depth += 1
        e = noff[nid] + pp
        t = tag_get(bmp, e)
        if t == TAG_NODE:
            nid = np.int64(ev[e])
            continue
        break
    S[S_NODE_VISITS] += depth
    if t != TAG_DATA:
        return ERR_NOTFOUND
    S[S_KEY_COMPARES] += 1
    if ek[e] != k:
        return ERR_NOTFOUND
    tag_set(bmp, e, TAG_NULL)
    ek[e] = 0
    ev[e] = np.uint64(0)
    for d in range(depth):
        nelem[PS[2 + 2 * d]] -= 1
    S[S_TREE_ELEMS] -= 1
    return OK


@njit(cache=True)
def op_update_payload(H, S, CK, B, kid, kc, k, p):
    """Overwrite the payload of an existing key in place."""
    ek, ev, bmp, na, nb, nL, noff, nelem, nbuild, nconf, nfx = H
    lbk, lbv, rbk, rbv, bsk, bsv = B
    S[S_N_UPDATES] += 1
    root = S[S_ROOT]
    if root < 0:
        pos, found = _buf_find(bsk, S[S_BS_N], k)
        if not found:
            return ERR_NOTFOUND
        bsv[pos] = p
        return OK
    if S[S_HAS_MINMAX] == 1 and k < CK[0]:
        pos, found = _buf_find(lbk, S[S_LB_N], k)
        if not found:
            return ERR_NOTFOUND
        lbv[pos] = p
        return OK
    if S[S_HAS_MINMAX] == 1 and k > CK[1]:
        pos, found = _buf_find(rbk, S[S_RB_N], k)
        if not found:
            return ERR_NOTFOUND
        rbv[pos] = p
        return OK
    gv = _g_eval(kid, kc, np.float64(k))
    nid = root
    depth = 1
    while True:
        e = noff[nid] + _predict(na[nid], nb[nid], gv, nL[nid])
        t = tag_get(bmp, e)
        if t == TAG_NODE:
            nid = np.int64(ev[e])
            depth += 1
            continue
        break
    S[S_NODE_VISITS] += depth
    if t != TAG_DATA:
        return ERR_NOTFOUND
    S[S_KEY_COMPARES] += 1
    if ek[e] != k:
        return ERR_NOTFOUND
    ev[e] = p
    return OK


# ---------------------------------------------------------------------------
# range scan
# ---------------------------------------------------------------------------

@njit(cache=True)
def op_range(H, S, CK, B, kid, kc, u, v):
    """All (key, payload) with key in [u, v], ascending.

    End positions are precomputed per level: interior positions are copied
    without key comparisons, only the two boundary positions of each node
    compare against u / v.
    """
    ek, ev, bmp, na, nb, nL, noff, nelem, nbuild, nconf, nfx = H
    lbk, lbv, rbk, rbv, bsk, bsv = B
    S[S_N_RANGES] += 1

    cap = 16
    ok = np.empty(cap, ek.dtype)
    ov = np.empty(cap, np.uint64)
    cnt = 0

    root = S[S_ROOT]
    if root < 0:
        posu, _f = _buf_find(bsk, S[S_BS_N], u)
        for i in range(posu, S[S_BS_N]):
            if bsk[i] > v:
                break
            if cnt >= cap:
                cap *= 2
                ok = _grow(ok, cap)
                ov = _grow(ov, cap)
            ok[cnt] = bsk[i]
            ov[cnt] = bsv[i]
            cnt += 1
        return ok, ov, cnt

    posu, _f = _buf_find(lbk, S[S_LB_N], u)
    for i in range(posu, S[S_LB_N]):
        if lbk[i] > v:
            break
        if cnt >= cap:
            cap *= 2
            ok = _grow(ok, cap)
            ov = _grow(ov, cap)
        ok[cnt] = lbk[i]
        ov[cnt] = lbv[i]
        cnt += 1

    gu = _g_eval(kid, kc, np.float64(u))
    gvv = _g_eval(kid, kc, np.float64(v))
    # Stack frames: node, cursor, end position, low/high boundary flags.
    sn = np.empty(MAX_DEPTH + 2, np.int64)
    sc = np.empty(MAX_DEPTH + 2, np.int64)
    se = np.empty(MAX_DEPTH + 2, np.int64)
    sf = np.empty(MAX_DEPTH + 2, np.int64)  # bit0 = low-bounded, bit1 = high-bounded
    p0 = _predict(na[root], nb[root], gu, nL[root])
    p1 = _predict(na[root], nb[root], gvv, nL[root])
    sn[0] = root
    sc[0] = p0
    se[0] = p1
    sf[0] = 3
    top = 1
    while top > 0:
        cur = sn[top - 1]
        pos = sc[top - 1]
        pend = se[top - 1]
        flags = sf[top - 1]
        off = noff[cur]
        L = nL[cur]
        plow = _predict(na[cur], nb[cur], gu, L) if (flags & 1) != 0 else -1
        descended = False
        while pos <= pend:
            e = off + pos
            t = tag_get(bmp, e)
            if t == TAG_DATA:
                kk = ek[e]
                emit = True
                if (flags & 1) != 0 and pos == plow and kk < u:
                    emit = False
                if (flags & 2) != 0 and pos == pend and kk > v:
                    emit = False
                if emit:
                    if cnt >= cap:
                        cap *= 2
                        ok = _grow(ok, cap)
                        ov = _grow(ov, cap)
                    ok[cnt] = kk
                    ov[cnt] = ev[e]
                    cnt += 1
                pos += 1
            elif t == TAG_NODE:
                child = np.int64(ev[e])
                clow = (flags & 1) != 0 and pos == plow
                chigh = (flags & 2) != 0 and pos == pend
                sc[top - 1] = pos + 1
                cp0 = _predict(na[child], nb[child], gu, nL[child]) if clow else 0
                cp1 = _predict(na[child], nb[child], gvv, nL[child]) if chigh else nL[child] - 1
                sn[top] = child
                sc[top] = cp0
                se[top] = cp1
                sf[top] = (1 if clow else 0) | (2 if chigh else 0)
                top += 1
                descended = True
                break
            else:
                pos += 1
        if not descended:
            top -= 1

    posu, _f = _buf_find(rbk, S[S_RB_N], u)
    for i in range(posu, S[S_RB_N]):
        if rbk[i] > v:
            break
        if cnt >= cap:
            cap *= 2
            ok = _grow(ok, cap)
            ov = _grow(ov, cap)
        ok[cnt] = rbk[i]
        ov[cnt] = rbv[i]
        cnt += 1
    return ok, ov, cnt


# ---------------------------------------------------------------------------
# deferred structural work (serviced and wall-clock timed by the facade)
# ---------------------------------------------------------------------------

@njit(cache=True)
def finish_adjust(H, S, FL, PS, P, kid, kc):
    """Rebuild the pending subtree and splice it into its parent."""
    ek, ev, bmp, na, nb, nL, noff, nelem, nbuild, nconf, nfx = H
    nid = S[S_PENDING_NID]
    depth = PS[0]
    n = nelem[nid]
    ks = np.empty(n, ek.dtype)
    vs = np.empty(n, np.uint64)
    collect_subtree(H, nid, ks, vs)
    release_subtree(H, S, FL, nid)
    H, fresh = build_subtree(H, S, FL, P, kid, kc, ks, vs)
    ek, ev, bmp, na, nb, nL, noff, nelem, nbuild, nconf, nfx = H
    d = 0
    for i in range(depth):
        if PS[2 + 2 * i] == nid:
            d = i
            break
    if d == 0:
        S[S_ROOT] = fresh
    else:
        parent = PS[2 + 2 * (d - 1)]
        ppos = PS[3 + 2 * (d - 1)]
        ev[noff[parent] + ppos] = np.uint64(fresh)
    S[S_PENDING] = PEND_NONE
    S[S_ADJUSTMENTS] += 1
    return H


@njit(cache=True)
def finish_bootstrap(H, S, FL, CK, B, P, kid, kc):
    """First root build, from the bootstrap buffer."""
    ek, ev, bmp, na, nb, nL, noff, nelem, nbuild, nconf, nfx = H
    lbk, lbv, rbk, rbv, bsk, bsv = B
    n = S[S_BS_N]
    ks = bsk[:n].copy()
    vs = bsv[:n].copy()
    H, root = build_subtree(H, S, FL, P, kid, kc, ks, vs)
    S[S_ROOT] = root
    S[S_TREE_ELEMS] = n
    S[S_BS_N] = 0
    CK[0] = ks[0]
    CK[1] = ks[n - 1]
    S[S_HAS_MINMAX] = 1
    S[S_PENDING] = PEND_NONE
    return H


@njit(cache=True)
def finish_overflow(H, S, FL, CK, B, P, kid, kc):
    """Rebuild the root from the tree plus both side buffers."""
    ek, ev, bmp, na, nb, nL, noff, nelem, nbuild, nconf, nfx = H
    lbk, lbv, rbk, rbv, bsk, bsv = B
    nt = S[S_TREE_ELEMS]
    ln = S[S_LB_N]
    rn = S[S_RB_N]
    n = nt + ln + rn
    ks = np.empty(n, ek.dtype)
    vs = np.empty(n, np.uint64)
    for i in range(ln):
        ks[i] = lbk[i]
        vs[i] = lbv[i]
    collect_subtree(H, S[S_ROOT], ks[ln:ln + nt], vs[ln:ln + nt])
    for i in range(rn):
        ks[ln + nt + i] = rbk[i]
        vs[ln + nt + i] = rbv[i]
    release_subtree(H, S, FL, S[S_ROOT])
    H, root = build_subtree(H, S, FL, P, kid, kc, ks, vs)
    S[S_ROOT] = root
    S[S_TREE_ELEMS] = n
    S[S_LB_N] = 0
    S[S_RB_N] = 0
    CK[0] = ks[0]
    CK[1] = ks[n - 1]
    S[S_HAS_MINMAX] = 1
    S[S_PENDING] = PEND_NONE
    S[S_ADJUSTMENTS] += 1
    return H


@njit(cache=True)
def do_bulkload(H, S, FL, CK, P, kid, kc, ks, vs):
    H, root = build_subtree(H, S, FL, P, kid, kc, ks, vs)
    S[S_ROOT] = root
    S[S_TREE_ELEMS] = ks.shape[0]
    CK[0] = ks[0]
    CK[1] = ks[ks.shape[0] - 1]
    S[S_HAS_MINMAX] = 1
    return H


# ---------------------------------------------------------------------------
# whole-tree audits / statistics
# ---------------------------------------------------------------------------

@njit(cache=True)
def audit_tree(H, S, kid, kc):
    """Returns (position violations, order violations, data-entry count).

    Position: every DATA key must predict to exactly its slot in its node.
    Order: the full in-order key sequence must be strictly ascending.
    """
    ek, ev, bmp, na, nb, nL, noff, nelem, nbuild, nconf, nfx = H
    pos_bad = 0
    order_bad = 0
    count = 0
    root = S[S_ROOT]
    if root < 0:
        return 0, 0, 0
    sn = np.empty(MAX_DEPTH + 2, np.int64)
    sp = np.empty(MAX_DEPTH + 2, np.int64)
    sn[0] = root
    sp[0] = 0
    top = 1
    prev = ek[0]
    have_prev = False
    while top > 0:
        cur = sn[top - 1]
        pos = sp[top - 1]
        off = noff[cur]
        L = nL[cur]
        descended = False
        while pos < L:
            e = off + pos
            t = tag_get(bmp, e)
            if t == TAG_DATA:
                kk = ek[e]
                gv = _g_eval(kid, kc, np.float64(kk))
                if _predict(na[cur], nb[cur], gv, L) != pos:
                    pos_bad += 1
                if have_prev and kk <= prev:
                    order_bad += 1
                prev = kk
                have_prev = True
                count += 1
                pos += 1
            elif t == TAG_NODE:
                sp[top - 1] = pos + 1
                if top >= sn.shape[0]:
                    sn = _grow(sn, top + 1)
                    sp = _grow(sp, top + 1)
                sn[top] = np.int64(ev[e])
                sp[top] = 0
                top += 1
                descended = True
                break
            else:
                pos += 1
        if not descended:
            top -= 1
    return pos_bad, order_bad, count


@njit(cache=True)
def depth_stats(H, S):
    """Returns (sum of per-key depth, max depth, keys, nodes, slots)."""
    ek, ev, bmp, na, nb, nL, noff, nelem, nbuild, nconf, nfx = H
    root = S[S_ROOT]
    if root < 0:
        return 0, 0, 0, 0, 0
    sn = np.empty(MAX_DEPTH + 2, np.int64)
    sd = np.empty(MAX_DEPTH + 2, np.int64)
    sn[0] = root
    sd[0] = 1
    top = 1
    dep_sum = 0
    dep_max = 0
    keys = 0
    nodes = 0
    slots = 0
    while top > 0:
        top -= 1
        cur = sn[top]
        d = sd[top]
        nodes += 1
        L = nL[cur]
        slots += L
        if d > dep_max:
            dep_max = d
        off = noff[cur]
        for pos in range(L):
            e = off + pos
            t = tag_get(bmp, e)
            if t == TAG_DATA:
                dep_sum += d
                keys += 1
            elif t == TAG_NODE:
                if top >= sn.shape[0]:
                    sn = _grow(sn, top + 1)
                    sd = _grow(sd, top + 1)
                sn[top] = np.int64(ev[e])
                sd[top] = d + 1
                top += 1
    return dep_sum, dep_max, keys, nodes, slots


# ---------------------------------------------------------------------------
# batch execution (lookups and inserts pre-scheduled by the workload runner)
# ---------------------------------------------------------------------------

@njit(cache=True)
def run_ops(H, S, FL, CK, B, PS, P, kid, kc, ops, keys, pays, found, start):
    """Run scheduled ops from `start`; returns (H, next_index).

    Stops right after any insert that leaves deferred structural work in
    S[S_PENDING] so the caller can service and time it, then resume.
    """
    i = start
    n = ops.shape[0]
    while i < n:
        if ops[i] == 0:
            f, _pl, _nid, _pos, _d = op_lookup(H, S, CK, B, kid, kc, keys[i])
            found[i] = 1 if f else 0
        else:
            H, st = op_insert(H, S, FL, CK, B, PS, P, kid, kc, keys[i], pays[i])
            if st != OK:
                S[S_OP_ERRORS] += 1
            if S[S_PENDING] != PEND_NONE:
                return H, i + 1
        i += 1
    return H, i
