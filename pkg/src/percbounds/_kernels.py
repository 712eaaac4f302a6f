"""Compiled versions of the coupling processes for bulk replicas.

These reproduce the pure-Python processes in :mod:`percbounds.couplings`
exactly: same counter-based uniforms, same canonical ordering, same event
walks. Lattice points live in small open-addressing hash tables over int64
rows; a full table raises ``OverflowError`` and the caller retries with
more room.

With ``check`` set, injectivity and the projection identity are verified
at every infection, and at the end the open cluster of the target starts
is rebuilt from the queried elements only (mirroring the memoized view)
and must contain every image point.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from .rng import MASK64, stream_key

# coupling kinds
TRIANGULAR = 0
EDGE_SPLIT = 1
DIRECT_TRIANGULAR = 2
DIRECT_ORIENTED_BOND = 3
VERTEX_SPLIT = 10
FOLD = 11
DIRECT_SITE = 12

# violation codes
OK = 0
NOT_INJECTIVE = 1
PROJECTION = 2
OUTSIDE_CLUSTER = 3
BAD_J = 4

_C1 = np.uint64(0xBF58476D1CE4E5B9)
_C2 = np.uint64(0x94D049BB133111EB)
_TABLE_SEED = np.uint64(0x243F6A8885A308D3)
_INV_2_53 = 1.0 / (1 << 53)
K_CAP = 10**4


@njit(cache=True)
def _mix(h):
    h = (h ^ (h >> np.uint64(30))) * _C1
    h = (h ^ (h >> np.uint64(27))) * _C2
    return h ^ (h >> np.uint64(31))


@njit(cache=True)
def _uniform(key, buf, w):
    h = key
    for i in range(w):
        h = _mix(h ^ np.uint64(buf[i]))
    return np.float64(h >> np.uint64(11)) * _INV_2_53


def hash_check(key: int, ints) -> float:
    """Kernel-side uniform for a flat identifier (for tests)."""
    buf = np.asarray(ints, dtype=np.int64)
    return float(_uniform(np.uint64(key), buf, buf.shape[0]))


# -- hash tables of int64 rows --------------------------------------------


@njit(cache=True)
def _new_table(capacity, width):
    size = 1
    while size < 2 * capacity:
        size *= 2
    return np.full(size, -1, np.int64), np.zeros((capacity, width), np.int64), np.zeros(1, np.int64)


@njit(cache=True)
def _find(slots, rows, w, buf):
    mask = slots.shape[0] - 1
    h = _TABLE_SEED
    for i in range(w):
        h = _mix(h ^ np.uint64(buf[i]))
    pos = np.int64(h & np.uint64(mask))
    while True:
        s = slots[pos]
        if s < 0:
            return -1, pos
        same = True
        for i in range(w):
            if rows[s, i] != buf[i]:
                same = False
                break
        if same:
            return s, pos
        pos = (pos + 1) & mask


@njit(cache=True)
def _reset(tab):
    tab[0][:] = -1
    tab[2][0] = 0


@njit(cache=True)
def _lookup(slots, rows, w, buf):
    return _find(slots, rows, w, buf)[0]


@njit(cache=True)
def _insert(slots, rows, count, w, buf):
    s, pos = _find(slots, rows, w, buf)
    if s >= 0:
        return s
    n = count[0]
    if n >= rows.shape[0]:
        raise OverflowError("kernel table full")
    for i in range(w):
        rows[n, i] = buf[i]
    slots[pos] = n
    count[0] = n + 1
    return n


# -- binary heap of row ids ordered by (l1 of the first lw entries, row) -----


@njit(cache=True)
def _less(a, b, rows, w, lw):
    la = 0
    lb = 0
    for i in range(lw):
        la += abs(rows[a, i])
        lb += abs(rows[b, i])
    if la != lb:
        return la < lb
    for i in range(w):
        if rows[a, i] != rows[b, i]:
            return rows[a, i] < rows[b, i]
    return False


@njit(cache=True)
def _push(heap, size, item, rows, w, lw):
    n = size[0]
    if n >= heap.shape[0]:
        raise OverflowError("kernel heap full")
    heap[n] = item
    size[0] = n + 1
    while n > 0:
        parent = (n - 1) // 2
        if _less(heap[n], heap[parent], rows, w, lw):
            heap[n], heap[parent] = heap[parent], heap[n]
            n = parent
        else:
            break


@njit(cache=True)
def _pop(heap, size, rows, w, lw):
    top = heap[0]
    n = size[0] - 1
    size[0] = n
    heap[0] = heap[n]
    i = 0
    while True:
        lft = 2 * i + 1
        if lft >= n:
            break
        c = lft
        if lft + 1 < n and _less(heap[lft + 1], heap[lft], rows, w, lw):
            c = lft + 1
        if _less(heap[c], heap[i], rows, w, lw):
            heap[c], heap[i] = heap[i], heap[c]
            i = c
        else:
            break
    return top


# -- queried-element log ------------------------------------------------------


@njit(cache=True)
def _query(key, prob, buf, w, elem_tab, state, check):
    """Open/closed state of an element; recorded when checking."""
    is_open = _uniform(key, buf, w) < prob
    if check:
        slots, rows, count = elem_tab
        s = _insert(slots, rows, count, w, buf)
        state[s] = 1 if is_open else 0
    return is_open


# -- bond processes (T, oriented Z^d) ----------------------------------------


@njit(cache=True)
def _bond_moves(kind, src_dim, v, out_w, out_dir, out_edge):
    """Fill moves out of v: (w, (axis, sign), edge row); returns count."""
    m = 0
    if kind == TRIANGULAR or kind == DIRECT_TRIANGULAR:
        for axis in range(3):
            da = 1 if axis != 1 else 0
            db = 1 if axis != 0 else 0
            for sign in (1, -1):
                out_w[m, 0] = v[0] + sign * da
                out_w[m, 1] = v[1] + sign * db
                out_dir[m, 0] = axis
                out_dir[m, 1] = sign
                base = v if sign > 0 else out_w[m]
                out_edge[m, 0] = base[0]
                out_edge[m, 1] = base[1]
                out_edge[m, 2] = axis
                m += 1
    else:  # oriented Z^d
        for axis in range(src_dim):
            for i in range(src_dim):
                out_w[m, i] = v[i]
                out_edge[m, i] = v[i]
            out_w[m, axis] += 1
            out_edge[m, src_dim] = axis
            out_dir[m, 0] = axis
            out_dir[m, 1] = 1
            m += 1
    return m


@njit(cache=True)
def _bond_back_moves(kind, src_dim, v, out_w, out_dir, out_edge):
    if kind == TRIANGULAR or kind == DIRECT_TRIANGULAR:
        return _bond_moves(kind, src_dim, v, out_w, out_dir, out_edge)
    m = 0
    for axis in range(src_dim):
        for i in range(src_dim):
            out_w[m, i] = v[i]
        out_w[m, axis] -= 1
        for i in range(src_dim):
            out_edge[m, i] = out_w[m, i]
        out_edge[m, src_dim] = axis
        out_dir[m, 0] = axis
        out_dir[m, 1] = 1
        m += 1
    return m


@njit(cache=True)
def _bond_dims(kind, src_dim):
    tgt_dim = 3 if kind == TRIANGULAR else (src_dim + 1 if kind == EDGE_SPLIT else src_dim)
    return tgt_dim, src_dim + 1, tgt_dim + 2


@njit(cache=True)
def _bond_workspace(kind, src_dim, check, capacity):
    tgt_dim, ew, tw = _bond_dims(kind, src_dim)
    ecap = 4 * capacity if check else 1
    return (
        _new_table(capacity, src_dim),
        np.zeros(capacity, np.int8),
        np.zeros((capacity, tgt_dim), np.int64),
        _new_table(capacity, ew),
        np.zeros(capacity, np.int8),
        np.zeros(capacity, np.int64),
        np.zeros(capacity, np.int64),
        np.zeros((capacity, 2), np.int64),
        np.zeros(capacity, np.int64),
        _new_table(capacity if check else 1, tgt_dim),
        _new_table(ecap, tw),
        np.zeros(ecap, np.int8),
        _new_table(ecap + 4, tgt_dim),
        np.zeros(ecap + 4, np.int64),
    )


@njit(cache=True)
def bond_process(kind, src_dim, probs, key, step_cap, check, ws):
    """Run one bond-type process in the reusable workspace ``ws``.

    Returns ``(infected, steps, frozen, cluster_size, violation)``;
    ``cluster_size`` is -1 unless ``check``.
    """
    tri = kind == TRIANGULAR or kind == DIRECT_TRIANGULAR
    direct = kind == DIRECT_TRIANGULAR or kind == DIRECT_ORIENTED_BOND
    tgt_dim, ew, tw = _bond_dims(kind, src_dim)

    vtab, vstate, image, etab, estate, efrom, eto, edir, heap, img_tab, elem_tab, elem_state, ctab, stack = ws
    _reset(vtab)
    _reset(etab)
    _reset(img_tab)
    _reset(elem_tab)
    vstate[:] = 0
    estate[:] = 0  # 1 frontier, 2 removed, 3 internal
    vs, vrows, vcount = vtab
    es, erows, ecount = etab
    hsize = np.zeros(1, np.int64)
    n_frontier = 0

    mw = np.zeros((6 if tri else src_dim, src_dim), np.int64)
    mdir = np.zeros((mw.shape[0], 2), np.int64)
    medge = np.zeros((mw.shape[0], ew), np.int64)
    buf = np.zeros(tw + 2, np.int64)
    point = np.zeros(tgt_dim, np.int64)
    violation = OK

    start = np.zeros(src_dim, np.int64)
    s0 = _insert(vs, vrows, vcount, src_dim, start)
    vstate[s0] = 1
    if check:
        _insert(img_tab[0], img_tab[1], img_tab[2], tgt_dim, image[s0])
    infected = 1
    newly = s0
    n = 0
    while True:
        # expose the newly infected vertex
        v = vrows[newly].copy()
        m = _bond_back_moves(kind, src_dim, v, mw, mdir, medge)
        for t in range(m):
            u = _lookup(vs, vrows, src_dim, mw[t])
            if u >= 0 and vstate[u] == 1:
                e = _lookup(es, erows, ew, medge[t])
                if e >= 0 and estate[e] == 1:
                    estate[e] = 3
                    n_frontier -= 1
        m = _bond_moves(kind, src_dim, v, mw, mdir, medge)
        for t in range(m):
            u = _lookup(vs, vrows, src_dim, mw[t])
            if u >= 0 and vstate[u] == 1:
                continue
            e = _insert(es, erows, ecount, ew, medge[t])
            if estate[e] != 0:
                continue
            estate[e] = 1
            n_frontier += 1
            efrom[e] = newly
            eto[e] = _insert(vs, vrows, vcount, src_dim, mw[t])
            edir[e, 0] = mdir[t, 0]
            edir[e, 1] = mdir[t, 1]
            _push(heap, hsize, e, erows, ew, src_dim)

        landed = False
        while n < step_cap and n_frontier > 0 and not landed:
            e = _pop(heap, hsize, erows, ew, src_dim)
            if estate[e] != 1:
                continue
            estate[e] = 2
            n_frontier -= 1
            n += 1
            axis = edir[e, 0]
            sign = edir[e, 1]
            x = image[efrom[e]]
            if direct:
                for i in range(ew):
                    buf[i] = erows[e, i]
                buf[ew] = 0
                prob = probs[axis] if tri else probs[0]
                if _uniform(key, buf, ew + 1) < prob:
                    landed = True
                    for i in range(src_dim):
                        point[i] = vrows[eto[e], i]
            elif kind == TRIANGULAR:
                for i in range(3):
                    point[i] = x[i]
                point[axis] += sign
                base = x if sign > 0 else point
                for i in range(3):
                    buf[i] = base[i]
                buf[3] = axis
                buf[4] = 0
                landed = _query(key, probs[axis], buf, 5, elem_tab, elem_state, check)
            else:  # edge split walk
                top = src_dim
                for i in range(tgt_dim):
                    point[i] = x[i]
                k = 0
                while True:
                    for i in range(tgt_dim):
                        buf[i] = point[i]
                    buf[tgt_dim] = axis
                    buf[tgt_dim + 1] = 0
                    if _query(key, probs[axis], buf, tw, elem_tab, elem_state, check):
                        point[axis] += 1
                        landed = True
                        break
                    buf[tgt_dim] = top
                    buf[tgt_dim + 1] = axis + 1
                    if not _query(key, probs[top], buf, tw, elem_tab, elem_state, check):
                        break
                    point[top] += 1
                    k += 1
                    if k > K_CAP:
                        raise RuntimeError("escalation cap exceeded")
            if landed:
                w = eto[e]
                vstate[w] = 1
                infected += 1
                for i in range(tgt_dim):
                    image[w, i] = point[i]
                if check:
                    before = img_tab[2][0]
                    _insert(img_tab[0], img_tab[1], img_tab[2], tgt_dim, point)
                    if img_tab[2][0] == before and violation == OK:
                        violation = NOT_INJECTIVE
                    vw = vrows[w]
                    if kind == TRIANGULAR:
                        ok = vw[0] == point[0] + point[2] and vw[1] == point[1] + point[2]
                    else:
                        ok = True
                        for i in range(src_dim):
                            if vw[i] != point[i]:
                                ok = False
                    if not ok and violation == OK:
                        violation = PROJECTION
                newly = w
        if not landed:
            break

    cluster = -1
    if check:
        cluster, outside = _bond_cluster(kind, tgt_dim, elem_tab, elem_state, img_tab, ctab, stack)
        if outside and violation == OK:
            violation = OUTSIDE_CLUSTER
        if infected > cluster and violation == OK:
            violation = OUTSIDE_CLUSTER
    return infected, n, n_frontier == 0, cluster, violation


@njit(cache=True)
def _elem_open(elem_tab, elem_state, buf, w):
    s = _lookup(elem_tab[0], elem_tab[1], w, buf)
    return s >= 0 and elem_state[s] == 1


@njit(cache=True)
def _bond_cluster(kind, dim, elem_tab, elem_state, img_tab, ctab, stack):
    """Open cluster of the target origin over queried elements."""
    _reset(ctab)
    cs, crows, ccount = ctab
    z = np.zeros(dim, np.int64)
    buf = np.zeros(dim + 2, np.int64)
    stack[0] = _insert(cs, crows, ccount, dim, z)
    top = 1
    tw = dim + 2
    while top > 0:
        top -= 1
        y = crows[stack[top]].copy()
        if kind == TRIANGULAR:
            for axis in range(dim):
                for sign in (1, -1):
                    for i in range(dim):
                        z[i] = y[i]
                    z[axis] += sign
                    base = y if sign > 0 else z
                    for i in range(dim):
                        buf[i] = base[i]
                    buf[dim] = axis
                    buf[dim + 1] = 0
                    if _elem_open(elem_tab, elem_state, buf, tw):
                        before = ccount[0]
                        s = _insert(cs, crows, ccount, dim, z)
                        if ccount[0] > before:
                            stack[top] = s
                            top += 1
        else:  # oriented, edge-split last axis
            last = dim - 1
            for axis in range(dim):
                for i in range(dim):
                    buf[i] = y[i]
                found = False
                if axis < last:
                    buf[dim] = axis
                    buf[dim + 1] = 0
                    found = _elem_open(elem_tab, elem_state, buf, tw)
                else:
                    buf[dim] = last
                    for label in range(1, last + 1):
                        buf[dim + 1] = label
                        if _elem_open(elem_tab, elem_state, buf, tw):
                            found = True
                            break
                if found:
                    for i in range(dim):
                        z[i] = y[i]
                    z[axis] += 1
                    before = ccount[0]
                    s = _insert(cs, crows, ccount, dim, z)
                    if ccount[0] > before:
                        stack[top] = s
                        top += 1
    outside = False
    irows = img_tab[1]
    for s in range(img_tab[2][0]):
        if _lookup(cs, crows, dim, irows[s]) < 0:
            outside = True
    return ccount[0], outside


# -- site processes (Z^k, from one or two starts) -----------------------------


@njit(cache=True)
def _site_workspace(kind, src_dim, tgt_dim, check, capacity):
    ew = tgt_dim if kind == VERTEX_SPLIT else tgt_dim + 1
    ecap = 8 * capacity if check else 1
    return (
        _new_table(capacity, src_dim),
        np.zeros(capacity, np.int8),
        np.zeros((capacity, tgt_dim), np.int64),
        np.zeros(capacity, np.int64),
        _new_table(capacity if check else 1, tgt_dim),
        _new_table(ecap, ew),
        np.zeros(ecap, np.int8),
        _new_table(ecap + 4, tgt_dim),
        np.zeros(ecap + 4, np.int64),
    )


@njit(cache=True)
def site_process(kind, src_dim, tgt_dim, classes, oriented, probs, key, step_cap, check, ws):
    """Run one site-type process; same return tuple as :func:`bond_process`.

    ``tgt_dim`` is the number of integers in an image row: d + 2 for the
    vertex split (point and copy), d for the fold, src_dim for direct runs.
    ``classes`` is a (k, d/k) array of target axes for the fold.
    """
    ndir = src_dim if oriented else 2 * src_dim
    vtab, vstate, image, heap, img_tab, elem_tab, elem_state, ctab, stack = ws
    _reset(vtab)
    _reset(img_tab)
    _reset(elem_tab)
    vstate[:] = 0  # 1 infected, 2 frontier, 3 removed
    vs, vrows, vcount = vtab
    hsize = np.zeros(1, np.int64)
    n_frontier = 0
    ew = tgt_dim if kind == VERTEX_SPLIT else tgt_dim + 1

    dirs = np.zeros((ndir, 2), np.int64)
    t = 0
    for axis in range(src_dim):
        dirs[t, 0] = axis
        dirs[t, 1] = 1
        t += 1
        if not oriented:
            dirs[t, 0] = axis
            dirs[t, 1] = -1
            t += 1
    w = np.zeros(src_dim, np.int64)
    buf = np.zeros(tgt_dim + 2, np.int64)
    point = np.zeros(tgt_dim, np.int64)
    violation = OK
    max_j = 2 * src_dim - 1

    # starts
    nstart = 2 if kind == VERTEX_SPLIT or (kind == DIRECT_SITE and probs.shape[0] > 1) else 1
    starts = np.zeros(nstart, np.int64)
    for s in range(nstart):
        w[:] = 0
        if s == 1:
            w[0] = 1
        sl = _insert(vs, vrows, vcount, src_dim, w)
        starts[s] = sl
        vstate[sl] = 1
        image[sl, :] = 0
        if kind == VERTEX_SPLIT:
            image[sl, 0] = s
            image[sl, tgt_dim - 1] = 1
        elif kind == DIRECT_SITE:
            for i in range(src_dim):
                image[sl, i] = w[i]
        if check:
            _insert(img_tab[0], img_tab[1], img_tab[2], tgt_dim, image[sl])
    infected = nstart
    for s in range(nstart):
        v = vrows[starts[s]].copy()
        n_frontier = _expose(v, dirs, ndir, src_dim, vs, vrows, vcount, vstate, heap, hsize, n_frontier, w)

    n = 0
    prob = probs[0]
    while n < step_cap and n_frontier > 0:
        a = _pop(heap, hsize, vrows, src_dim, src_dim)
        av = vrows[a].copy()
        # smallest infected neighbor v of a, and the direction v -> a
        best = -1
        bdir = -1
        for t in range(ndir):
            for i in range(src_dim):
                w[i] = av[i]
            w[dirs[t, 0]] -= dirs[t, 1]
            u = _lookup(vs, vrows, src_dim, w)
            if u >= 0 and vstate[u] == 1:
                if best < 0 or _less(u, best, vrows, src_dim, src_dim):
                    best = u
                    bdir = t
        v = vrows[best].copy()
        j = 0
        for t in range(ndir):
            for i in range(src_dim):
                w[i] = v[i]
            w[dirs[t, 0]] += dirs[t, 1]
            u = _lookup(vs, vrows, src_dim, w)
            if u >= 0 and vstate[u] == 2:
                j += 1
        if kind == VERTEX_SPLIT and (j < 1 or j > max_j) and violation == OK:
            violation = BAD_J
        n_frontier -= 1
        n += 1
        axis = dirs[bdir, 0]
        sign = dirs[bdir, 1]
        x = image[best]
        landed = False
        if kind == DIRECT_SITE:
            for i in range(src_dim):
                buf[i] = av[i]
                point[i] = av[i]
            buf[src_dim] = 0
            landed = _uniform(key, buf, src_dim + 1) < prob
        elif kind == FOLD:
            cls = axis
            for c in range(classes.shape[1]):
                tax = classes[cls, c]
                for i in range(tgt_dim):
                    buf[i] = x[i]
                buf[tax] += sign
                buf[tgt_dim] = 0
                if _query(key, prob, buf, ew, elem_tab, elem_state, check):
                    for i in range(tgt_dim):
                        point[i] = buf[i]
                    landed = True
                    break
        else:  # vertex split walk; image row is (point[0..d], copy)
            pd = tgt_dim - 1  # d + 1 point coordinates
            top = pd - 1
            copies = 2 * top - 1
            for i in range(pd):
                point[i] = x[i]
            k = 0
            while True:
                for i in range(pd):
                    buf[i] = point[i]
                buf[axis] += sign
                for label in range(1, copies + 1):
                    buf[pd] = label
                    if _query(key, prob, buf, ew, elem_tab, elem_state, check):
                        landed = True
                        for i in range(pd):
                            point[i] = buf[i]
                        point[pd] = label
                        break
                if landed:
                    break
                point[top] += 1
                for i in range(pd):
                    buf[i] = point[i]
                buf[pd] = j
                if not _query(key, prob, buf, ew, elem_tab, elem_state, check):
                    break
                k += 1
                if k > K_CAP:
                    raise RuntimeError("escalation cap exceeded")
        if landed:
            vstate[a] = 1
            infected += 1
            for i in range(tgt_dim):
                image[a, i] = point[i]
            if check:
                before = img_tab[2][0]
                _insert(img_tab[0], img_tab[1], img_tab[2], tgt_dim, point)
                if img_tab[2][0] == before and violation == OK:
                    violation = NOT_INJECTIVE
                ok = True
                if kind == FOLD:
                    for c in range(classes.shape[0]):
                        total = 0
                        for m in range(classes.shape[1]):
                            total += point[classes[c, m]]
                        if total != av[c]:
                            ok = False
                else:
                    for i in range(src_dim):
                        if point[i] != av[i]:
                            ok = False
                if not ok and violation == OK:
                    violation = PROJECTION
            n_frontier = _expose(av, dirs, ndir, src_dim, vs, vrows, vcount, vstate, heap, hsize, n_frontier, w)
        else:
            vstate[a] = 3

    cluster = -1
    if check:
        cluster, outside = _site_cluster(kind, tgt_dim, oriented, elem_tab, elem_state, img_tab, nstart, ctab, stack)
        if outside and violation == OK:
            violation = OUTSIDE_CLUSTER
        if infected > cluster and violation == OK:
            violation = OUTSIDE_CLUSTER
    return infected, n, n_frontier == 0, cluster, violation


@njit(cache=True)
def _expose(v, dirs, ndir, dim, vs, vrows, vcount, vstate, heap, hsize, n_frontier, w):
    for t in range(ndir):
        for i in range(dim):
            w[i] = v[i]
        w[dirs[t, 0]] += dirs[t, 1]
        u = _insert(vs, vrows, vcount, dim, w)
        if vstate[u] == 0:
            vstate[u] = 2
            n_frontier += 1
            _push(heap, hsize, u, vrows, dim, dim)
    return n_frontier


@njit(cache=True)
def _site_cluster(kind, tgt_dim, oriented, elem_tab, elem_state, img_tab, nstart, ctab, stack):
    _reset(ctab)
    cs, crows, ccount = ctab
    top = 0
    irows = img_tab[1]
    for s in range(nstart):  # start images are the first rows of the image table
        stack[top] = _insert(cs, crows, ccount, tgt_dim, irows[s])
        top += 1
    split = kind == VERTEX_SPLIT
    pd = tgt_dim - 1 if split else tgt_dim
    copies = 2 * (pd - 1) - 1
    buf = np.zeros(tgt_dim + 1, np.int64)
    ew = tgt_dim if split else tgt_dim + 1
    while top > 0:
        top -= 1
        y = crows[stack[top]].copy()
        for axis in range(pd):
            for sign in (1, -1):
                if sign < 0 and oriented:
                    continue
                for i in range(pd):
                    buf[i] = y[i]
                buf[axis] += sign
                lo = 1 if split else 0
                hi = copies if split else 0
                for label in range(lo, hi + 1):
                    buf[pd] = label
                    if _elem_open(elem_tab, elem_state, buf, ew):
                        before = ccount[0]
                        s = _insert(cs, crows, ccount, tgt_dim, buf)
                        if ccount[0] > before:
                            stack[top] = s
                            top += 1
    outside = False
    for s in range(img_tab[2][0]):
        if _lookup(cs, crows, tgt_dim, irows[s]) < 0:
            outside = True
    return ccount[0], outside


@njit(cache=True)
def bond_batch(kind, src_dim, probs, keys, step_cap, check, capacity):
    ws = _bond_workspace(kind, src_dim, check, capacity)
    out = np.zeros((keys.shape[0], 5), np.int64)
    for r in range(keys.shape[0]):
        res = bond_process(kind, src_dim, probs, keys[r], step_cap, check, ws)
        out[r, 0], out[r, 1], out[r, 2], out[r, 3], out[r, 4] = res
    return out


@njit(cache=True)
def site_batch(kind, src_dim, tgt_dim, classes, oriented, probs, keys, step_cap, check, capacity):
    ws = _site_workspace(kind, src_dim, tgt_dim, check, capacity)
    out = np.zeros((keys.shape[0], 5), np.int64)
    for r in range(keys.shape[0]):
        res = site_process(kind, src_dim, tgt_dim, classes, oriented, probs, keys[r], step_cap, check, ws)
        out[r, 0], out[r, 1], out[r, 2], out[r, 3], out[r, 4] = res
    return out


# -- Python-facing wrappers ---------------------------------------------------


def _retry(fn, capacity, *args):
    while True:
        try:
            return fn(*args, capacity)
        except OverflowError:
            capacity *= 4


def run_batch(kind: str, params: dict, step_cap: int, master_seed: int, replicas,
              check: bool = True, direct: bool = False) -> np.ndarray:
    """Replicas of a coupling (or of its direct source model).

    ``replicas`` is an iterable of replica indices. Returns an int64 array
    with one row ``(infected_size, steps, frozen, image_cluster_size,
    violation)`` per replica; the cluster size is -1 when not checked.
    """
    from . import couplings as cp

    keys = np.array([stream_key(master_seed, r) for r in replicas], dtype=np.uint64)
    src_dim = {"triangular": 3, "fold": params.get("k", 1)}.get(kind, params.get("d", 1))
    capacity = 2 * src_dim * (step_cap + 2) + 64  # frontier grows by at most the degree
    if kind == "triangular":
        probs = np.asarray(params["p"], dtype=np.float64)
        code = DIRECT_TRIANGULAR if direct else TRIANGULAR
        return _retry(bond_batch, capacity, code, 2, probs, keys, step_cap, check and not direct)
    if kind == "edge-split":
        d, p = params["d"], params["p"]
        if direct:
            probs = np.array([cp.event_A_probability(d, p)])
            return _retry(bond_batch, capacity, DIRECT_ORIENTED_BOND, d, probs, keys, step_cap, False)
        probs = np.array([p] * d + [cp.split_edge_probability(d, p)])
        return _retry(bond_batch, capacity, EDGE_SPLIT, d, probs, keys, step_cap, check)
    empty = np.zeros((1, 1), np.int64)
    if kind == "vertex-split":
        d, p = params["d"], params["p"]
        if direct:
            # two probabilities flag the two-vertex start
            probs = np.array([cp.event_An_probability(d, p)] * 2)
            return _retry(site_batch, capacity, DIRECT_SITE, d, d, empty, False, probs, keys, step_cap, False)
        probs = np.array([cp.split_vertex_probability(d, p)])
        return _retry(site_batch, capacity, VERTEX_SPLIT, d, d + 2, empty, False, probs, keys, step_cap, check)
    if kind == "fold":
        d, k, p = params["d"], params["k"], params["p"]
        oriented = bool(params.get("oriented", False))
        if direct:
            probs = np.array([cp.event_B_probability(d, k, p)])
            return _retry(site_batch, capacity, DIRECT_SITE, k, k, empty, oriented, probs, keys, step_cap, False)
        classes = np.arange(d, dtype=np.int64).reshape(k, d // k)
        probs = np.array([p])
        return _retry(site_batch, capacity, FOLD, k, d, classes, oriented, probs, keys, step_cap, check)
    raise ValueError(f"unknown coupling kind {kind!r}")


def run_kernel(kind: str, params: dict, step_cap: int, master_seed: int, replica: int,
               check: bool = True, direct: bool = False) -> tuple:
    """Single-replica form of :func:`run_batch`."""
    row = run_batch(kind, params, step_cap, master_seed, [replica], check, direct)[0]
    return int(row[0]), int(row[1]), bool(row[2]), int(row[3]), int(row[4])
