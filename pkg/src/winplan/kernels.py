"""Hot numeric kernels with a numba path and a pure-numpy fallback.

Every kernel here works on integer counts, so both backends produce
bit-identical results. Dispatch happens per call through
:func:`winplan._accel.get_backend`.
"""

from collections import namedtuple

import numpy as np

from ._accel import get_backend, njit

PairCounts = namedtuple(
    "PairCounts", ["row_w", "row_l", "col_w", "col_l", "level_w", "level_l"]
)
PairCounts.__doc__ = """Aggregated win/loss indicators over all treatment x control pairs.

row_* are per treatment subject, col_* per control subject and level_* count
the pairs decided at each hierarchy level. All arrays are int64.
"""

# rows of the treatment sample handled per numpy block
_NUMPY_BLOCK_PAIRS = 1 << 20


@njit(nogil=True, cache=True)
def _pair_counts_numba(tv, te, cv, ce, is_tte, thr):
    # Level-major sweep over the control row so the inner loop is branch-free
    # and vectorizes; open_ marks pairs still tied on every earlier level.
    m, nq = tv.shape
    n = cv.shape[0]
    row_w = np.zeros(m, np.int64)
    row_l = np.zeros(m, np.int64)
    col_w = np.zeros(n, np.int64)
    col_l = np.zeros(n, np.int64)
    level_w = np.zeros(nq, np.int64)
    level_l = np.zeros(nq, np.int64)
    cv_t = np.ascontiguousarray(cv.T)
    ce_t = np.ascontiguousarray(ce.T).astype(np.uint8)
    open_ = np.empty(n, np.uint8)
    won = np.empty(n, np.uint8)
    lost = np.empty(n, np.uint8)
    for i in range(m):
        open_[:] = 1
        won[:] = 0
        lost[:] = 0
        for q in range(nq):
            t = tv[i, q]
            d = thr[q]
            cq = cv_t[q]
            lw = 0
            ll = 0
            if is_tte[q]:
                eq = ce_t[q]
                t_event = np.uint8(te[i, q])
                for j in range(n):
                    o = open_[j]
                    wq = np.uint8(t > cq[j] + d) & eq[j] & o
                    lq = np.uint8(t < cq[j] - d) & t_event & o
                    won[j] |= wq
                    lost[j] |= lq
                    open_[j] = o & ~(wq | lq) & 1
                    lw += wq
                    ll += lq
            else:
                for j in range(n):
                    o = open_[j]
                    wq = np.uint8(t > cq[j] + d) & o
                    lq = np.uint8(t < cq[j] - d) & o
                    won[j] |= wq
                    lost[j] |= lq
                    open_[j] = o & ~(wq | lq) & 1
                    lw += wq
                    ll += lq
            level_w[q] += lw
            level_l[q] += ll
        rw = 0
        rl = 0
        for j in range(n):
            rw += won[j]
            rl += lost[j]
            col_w[j] += won[j]
            col_l[j] += lost[j]
        row_w[i] = rw
        row_l[i] = rl
    return row_w, row_l, col_w, col_l, level_w, level_l


def _pair_counts_numpy(tv, te, cv, ce, is_tte, thr):
    m, nq = tv.shape
    n = cv.shape[0]
    row_w = np.zeros(m, np.int64)
    row_l = np.zeros(m, np.int64)
    col_w = np.zeros(n, np.int64)
    col_l = np.zeros(n, np.int64)
    level_w = np.zeros(nq, np.int64)
    level_l = np.zeros(nq, np.int64)
    block = max(1, _NUMPY_BLOCK_PAIRS // max(n, 1))
    for start in range(0, m, block):
        stop = min(m, start + block)
        open_ = np.ones((stop - start, n), dtype=bool)
        won = np.zeros((stop - start, n), dtype=bool)
        lost = np.zeros((stop - start, n), dtype=bool)
        for q in range(nq):
            t = tv[start:stop, q][:, None]
            c = cv[:, q][None, :]
            win = t > c + thr[q]
            loss = t < c - thr[q]
            if is_tte[q]:
                win &= ce[:, q][None, :]
                loss &= te[start:stop, q][:, None]
            win &= open_
            loss &= open_
            level_w[q] += np.count_nonzero(win)
            level_l[q] += np.count_nonzero(loss)
            won |= win
            lost |= loss
            open_ &= ~(win | loss)
        row_w[start:stop] = won.sum(axis=1)
        row_l[start:stop] = lost.sum(axis=1)
        col_w += won.sum(axis=0)
        col_l += lost.sum(axis=0)
    return row_w, row_l, col_w, col_l, level_w, level_l


def pair_counts(tv, te, cv, ce, is_tte, thr):
    """Count hierarchical wins and losses over every treatment x control pair.

    Parameters
    ----------
    tv, cv : (m, Q), (n, Q) float64
        Oriented observed values (larger is better on every level).
    te, ce : (m, Q), (n, Q) bool
        Event indicators, only read on time-to-event levels.
    is_tte : (Q,) bool
    thr : (Q,) float64
        Win margins per level.
    """
    args = (
        np.ascontiguousarray(tv, dtype=np.float64),
        np.ascontiguousarray(te, dtype=np.bool_),
        np.ascontiguousarray(cv, dtype=np.float64),
        np.ascontiguousarray(ce, dtype=np.bool_),
        np.ascontiguousarray(is_tte, dtype=np.bool_),
        np.ascontiguousarray(thr, dtype=np.float64),
    )
    if get_backend() == "numba":
        return PairCounts(*_pair_counts_numba(*args))
    return PairCounts(*_pair_counts_numpy(*args))


# --------------------------------------------------------------------------
# Kendall tau-b (Knight's O(n log n) algorithm)


@njit(nogil=True, cache=True)
def _tie_pairs_sorted(a):
    """Number of tied pairs in an already sorted array."""
    total = 0
    run = 1
    for k in range(1, a.shape[0]):
        if a[k] == a[k - 1]:
            run += 1
        else:
            total += run * (run - 1) // 2
            run = 1
    total += run * (run - 1) // 2
    return total


@njit(nogil=True, cache=True)
def _joint_tie_pairs(xs, ys):
    """Tied (x, y) pairs in data sorted lexicographically by (x, y)."""
    total = 0
    run = 1
    for k in range(1, xs.shape[0]):
        if xs[k] == xs[k - 1] and ys[k] == ys[k - 1]:
            run += 1
        else:
            total += run * (run - 1) // 2
            run = 1
    total += run * (run - 1) // 2
    return total


@njit(nogil=True, cache=True)
def _count_inversions(a):
    """Sort ``a`` in place (stable merge sort) and return strict inversions."""
    n = a.shape[0]
    buf = np.empty_like(a)
    swaps = 0
    width = 1
    while width < n:
        lo = 0
        while lo < n - width:
            mid = lo + width
            hi = min(lo + 2 * width, n)
            i = lo
            j = mid
            k = lo
            while i < mid and j < hi:
                if a[j] < a[i]:
                    buf[k] = a[j]
                    swaps += mid - i
                    j += 1
                else:
                    buf[k] = a[i]
                    i += 1
                k += 1
            while i < mid:
                buf[k] = a[i]
                i += 1
                k += 1
            while j < hi:
                buf[k] = a[j]
                j += 1
                k += 1
            for t in range(lo, hi):
                a[t] = buf[t]
            lo += 2 * width
        width *= 2
    return swaps


def _interpreted(*funcs):
    return [getattr(f, "py_func", f) for f in funcs]


def kendall_counts(x, y):
    """Return ``(n0, n1, n2, concordant_minus_discordant)`` as Python ints.

    n1 and n2 are the tied-pair counts in x and y.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = x.shape[0]
    order = np.lexsort((y, x))
    xs = np.ascontiguousarray(x[order])
    ys = np.ascontiguousarray(y[order])
    ties, joint, inversions = _tie_pairs_sorted, _joint_tie_pairs, _count_inversions
    if get_backend() == "numpy":
        ties, joint, inversions = _interpreted(ties, joint, inversions)
    n0 = n * (n - 1) // 2
    n1 = int(ties(xs))
    n3 = int(joint(xs, ys))
    work = ys.copy()
    swaps = int(inversions(work))
    n2 = int(ties(work))
    s = n0 - n1 - n2 + n3 - 2 * swaps
    return n0, n1, n2, s


# --------------------------------------------------------------------------
# Harrell-type concordance between a censored time and a second variable


@njit(nogil=True, cache=True)
def _harrell_counts_numba(time, event, y, y_event, y_censored):
    n = time.shape[0]
    conc = 0
    disc = 0
    tied = 0
    for a in range(n):
        if not event[a]:
            continue
        ta = time[a]
        ya = y[a]
        for b in range(n):
            if not time[b] > ta:
                continue
            yb = y[b]
            if y_censored:
                # the smaller y must be an observed event for the ordering to be known
                if ya < yb:
                    if not y_event[a]:
                        continue
                elif yb < ya:
                    if not y_event[b]:
                        continue
                else:
                    continue
            if ya < yb:
                conc += 1
            elif ya > yb:
                disc += 1
            else:
                tied += 1
    return conc, disc, tied


def _harrell_counts_numpy(time, event, y, y_event, y_censored):
    conc = disc = tied = 0
    for a in np.flatnonzero(event):
        later = time > time[a]
        yb = y[later]
        ya = y[a]
        lt = ya < yb
        gt = ya > yb
        if y_censored:
            ok_b = y_event[later]
            gt &= ok_b
            lt &= bool(y_event[a])
            tied_mask = np.zeros_like(lt)
        else:
            tied_mask = ya == yb
        conc += int(np.count_nonzero(lt))
        disc += int(np.count_nonzero(gt))
        tied += int(np.count_nonzero(tied_mask))
    return conc, disc, tied


@njit(nogil=True, cache=True)
def _harrell_counts_fenwick(time, event, y_rank, n_ranks):
    # Visit subjects in decreasing time; the tree holds y-ranks of all
    # subjects with a strictly larger time than the current group.
    n = time.shape[0]
    order = np.argsort(-time, kind="mergesort")
    tree = np.zeros(n_ranks + 1, np.int64)
    inserted = 0
    conc = 0
    disc = 0
    tied = 0
    g = 0
    while g < n:
        h = g
        while h < n and time[order[h]] == time[order[g]]:
            h += 1
        for k in range(g, h):
            a = order[k]
            if not event[a]:
                continue
            r = y_rank[a]
            below = 0
            i = r
            while i > 0:
                below += tree[i]
                i -= i & -i
            upto = 0
            i = r + 1
            while i > 0:
                upto += tree[i]
                i -= i & -i
            conc += inserted - upto
            disc += below
            tied += upto - below
        for k in range(g, h):
            i = y_rank[order[k]] + 1
            while i <= n_ranks:
                tree[i] += 1
                i += i & -i
            inserted += 1
        g = h
    return conc, disc, tied


def harrell_counts(time, event, y, y_event=None):
    """Concordant, discordant and y-tied counts over evaluable pairs.

    A pair is evaluable when one subject has a strictly smaller observed time
    and that time is an event. Concordant means the subject with the shorter
    time also has the smaller ``y``. When ``y_event`` is given, ``y`` is itself
    a censored time and its ordering must also be resolvable; y-ties are then
    not evaluable.
    """
    time = np.ascontiguousarray(time, dtype=np.float64)
    event = np.ascontiguousarray(event, dtype=np.bool_)
    y = np.ascontiguousarray(y, dtype=np.float64)
    y_censored = y_event is not None
    if y_event is None:
        y_event = np.ones_like(event)
    y_event = np.ascontiguousarray(y_event, dtype=np.bool_)
    if not y_censored:
        uniq, rank = np.unique(y, return_inverse=True)
        kernel = _harrell_counts_fenwick
        if get_backend() == "numpy":
            (kernel,) = _interpreted(kernel)
        c, d, t = kernel(time, event, rank.astype(np.int64), uniq.shape[0])
    elif get_backend() == "numba":
        c, d, t = _harrell_counts_numba(time, event, y, y_event, y_censored)
    else:
        c, d, t = _harrell_counts_numpy(time, event, y, y_event, y_censored)
    return int(c), int(d), int(t)
