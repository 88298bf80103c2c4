"""Numba kernels for the event-driven simulators.

All kernels take a ``numpy.random.Generator`` so that streams stay seedable
and resumable across calls.
"""
import numpy as np
from numba import njit

NO_EVENT = 0
FRAG = 1
PAIR = 2
PAINTBOX = 3


@njit(cache=True)
def draw_event(gen, t, l, lam, cutoff, kingman, atom_rates, atom_cum, atom_len,
               beta_rate, beta_r, labels):
    """Next non-null event after time t with l nodes.

    Returns (time, kind, a, b). FRAG: node a splits. PAIR: nodes a < b merge.
    PAINTBOX: labels[:l] holds the interval of each node (-1 untouched) and
    at least two nodes share an interval. NO_EVENT: nothing can happen.
    """
    atom_total = 0.0
    for i in range(atom_rates.shape[0]):
        atom_total += atom_rates[i]
    while True:
        frag = lam * l if t < cutoff else 0.0
        if l >= 2:
            pair = kingman * l * (l - 1) / 2.0
            atoms = atom_total
            beta = beta_rate
        else:
            pair = 0.0
            atoms = 0.0
            beta = 0.0
        total = frag + pair + atoms + beta
        if total <= 0.0:
            return np.inf, NO_EVENT, -1, -1
        dt = gen.exponential(1.0 / total)
        if frag > 0.0 and t + dt >= cutoff:
            t = cutoff
            continue
        t += dt
        u = gen.random() * total
        if u < frag:
            return t, FRAG, gen.integers(0, l), -1
        u -= frag
        if u < pair:
            a = gen.integers(0, l)
            b = gen.integers(0, l - 1)
            if b >= a:
                b += 1
            if a > b:
                a, b = b, a
            return t, PAIR, a, b
        u -= pair
        if u < atoms:
            idx = atom_rates.shape[0] - 1
            for i in range(atom_rates.shape[0]):
                if u < atom_rates[i]:
                    idx = i
                    break
                u -= atom_rates[i]
            m = atom_len[idx]
            hit = False
            for i in range(m):
                labels[l + i] = 0
            for p in range(l):
                x = gen.random()
                lab = -1
                for i in range(m):
                    if x < atom_cum[idx, i]:
                        lab = i
                        break
                labels[p] = lab
                if lab >= 0:
                    labels[l + lab] += 1
                    if labels[l + lab] >= 2:
                        hit = True
            if hit:
                return t, PAINTBOX, m, -1
            continue
        # beta component: z ~ Beta(2 - r, r), paintbox (z/2, z/2)
        if beta_r <= 0.0:
            z = 1.0
        else:
            z = gen.beta(2.0 - beta_r, beta_r)
        c0 = 0
        c1 = 0
        for p in range(l):
            x = gen.random()
            if x < z / 2.0:
                labels[p] = 0
                c0 += 1
            elif x < z:
                labels[p] = 1
                c1 += 1
            else:
                labels[p] = -1
        if c0 >= 2 or c1 >= 2:
            labels[l] = c0
            labels[l + 1] = c1
            return t, PAINTBOX, 2, -1


@njit(cache=True)
def _scratch(atom_len):
    extra = 2
    for i in range(atom_len.shape[0]):
        if atom_len[i] > extra:
            extra = atom_len[i]
    return extra + 2


@njit(cache=True)
def _grow(a, need):
    if need < a.shape[0]:
        return a
    size = a.shape[0] * 2
    while size <= need:
        size *= 2
    b = np.empty(size, a.dtype)
    b[:a.shape[0]] = a
    return b


@njit(cache=True)
def _popcount(x):
    c = 0
    while x:
        x &= x - np.uint64(1)
        c += 1
    return c


@njit(cache=True)
def _lowbit(x):
    return x & (~x + np.uint64(1))


@njit(cache=True)
def simulate_graph_kernel(n, lam, cutoff, horizon, kingman, atom_rates, atom_cum, atom_len,
                          beta_rate, beta_r, gen):
    """Simulate an ancestral graph as lineage segments.

    Lineage ids 0..n-1 are the initial nodes. Every event ends its input
    lineages (lin_end = event index) and starts new ones: a fragmentation of
    lineage x sets next_a[x] (node stays) and next_b[x] (new node); a merge
    sets next_a of every input to the merged lineage.
    Returns (times, kinds, lin_end, next_a, next_b, n_lineages, status) with
    status 1 absorbed, 2 truncated at horizon, 3 no possible events.
    """
    cap = 64
    times = np.empty(cap, np.float64)
    kinds = np.empty(cap, np.int64)
    lin_end = np.full(max(cap, 2 * n), -1, np.int64)
    next_a = np.full(lin_end.shape[0], -1, np.int64)
    next_b = np.full(lin_end.shape[0], -1, np.int64)
    node = np.empty(max(16, 2 * n), np.int64)
    extra = _scratch(atom_len)
    labels = np.empty(node.shape[0] + extra, np.int64)
    for i in range(n):
        node[i] = i
    n_lin = n
    l = n
    e = 0
    t = 0.0
    status = 1
    while l > 1:
        if labels.shape[0] < l + extra:
            labels = np.empty(2 * (l + extra), np.int64)
        t, kind, a, b = draw_event(gen, t, l, lam, cutoff, kingman, atom_rates, atom_cum,
                                   atom_len, beta_rate, beta_r, labels)
        if kind == NO_EVENT:
            status = 3
            break
        if t > horizon:
            status = 2
            break
        times = _grow(times, e)
        kinds = _grow(kinds, e)
        if n_lin + l + 2 >= lin_end.shape[0]:
            old = lin_end.shape[0]
            lin_end = _grow(lin_end, n_lin + l + 2)
            next_a = _grow(next_a, n_lin + l + 2)
            next_b = _grow(next_b, n_lin + l + 2)
            lin_end[old:] = -1
            next_a[old:] = -1
            next_b[old:] = -1
        times[e] = t
        if kind == FRAG:
            kinds[e] = 0
            x = node[a]
            lin_end[x] = e
            next_a[x] = n_lin
            next_b[x] = n_lin + 1
            node = _grow(node, l)
            node[a] = n_lin
            node[l] = n_lin + 1
            n_lin += 2
            l += 1
        elif kind == PAIR:
            kinds[e] = 1
            w = n_lin
            n_lin += 1
            for p in (a, b):
                x = node[p]
                lin_end[x] = e
                next_a[x] = w
            node[a] = w
            node[b] = node[l - 1]
            l -= 1
        else:
            kinds[e] = 1
            m = a
            first = np.full(m, -1, np.int64)
            count = labels[l:l + m].copy()
            removed = np.empty(l, np.int64)
            nr = 0
            for p in range(l):
                g = labels[p]
                if g < 0 or count[g] < 2:
                    continue
                if first[g] < 0:
                    first[g] = p
                    w = n_lin
                    n_lin += 1
                    x = node[p]
                    lin_end[x] = e
                    next_a[x] = w
                    node[p] = w
                else:
                    x = node[p]
                    lin_end[x] = e
                    next_a[x] = node[first[g]]
                    removed[nr] = p
                    nr += 1
            for i in range(nr - 1, -1, -1):
                p = removed[i]
                node[p] = node[l - 1]
                l -= 1
        e += 1
    return times[:e].copy(), kinds[:e].copy(), lin_end[:n_lin].copy(), next_a[:n_lin].copy(), \
        next_b[:n_lin].copy(), n_lin, status


@njit(cache=True)
def walk_kernel(n, times, lin_end, next_a, next_b, gen):
    """One walk of n particles starting on lineages 0..n-1.

    Returns (jump_times, jump_labels, n_jumps, absorbed) where row j of
    jump_labels gives, for each particle, the smallest particle in its block
    after jump j.
    """
    lin = np.arange(n).astype(np.int64)
    mask = np.empty(n, np.uint64)
    for i in range(n):
        mask[i] = np.uint64(1) << np.uint64(i)
    nb = n
    jt = np.empty(max(n - 1, 1), np.float64)
    jl = np.empty((max(n - 1, 1), n), np.int64)
    nj = 0
    while nb > 1:
        best = -1
        be = -1
        for i in range(nb):
            ev = lin_end[lin[i]]
            if ev >= 0 and (be < 0 or ev < be):
                be = ev
                best = i
        if best < 0:
            break
        t = times[be]
        x = lin[best]
        if next_b[x] >= 0 and gen.random() < 0.5:
            lin[best] = next_b[x]
        else:
            lin[best] = next_a[x]
        other = -1
        for i in range(nb):
            if i != best and lin[i] == lin[best]:
                other = i
                break
        if other < 0:
            continue
        lo = min(best, other)
        hi = max(best, other)
        mask[lo] |= mask[hi]
        for i in range(hi, nb - 1):
            mask[i] = mask[i + 1]
            lin[i] = lin[i + 1]
        nb -= 1
        if nj > 0 and jt[nj - 1] == t:
            nj -= 1
        jt[nj] = t
        for i in range(nb):
            m = mask[i]
            low = 0
            while not (m >> np.uint64(low)) & np.uint64(1):
                low += 1
            for k in range(n):
                if (m >> np.uint64(k)) & np.uint64(1):
                    jl[nj, k] = low
        nj += 1
    return jt, jl, nj, nb == 1


@njit(cache=True)
def _accumulate(j, t, n, pos, mask, tau, last_t):
    dt = t - last_t[j]
    if dt > 0.0:
        for s in range(j * n, j * n + n):
            if pos[s] >= 0:
                tau[j, _popcount(mask[s]) - 1] += dt
    last_t[j] = t


@njit(cache=True)
def _unlink(w, p, head, nxt, prv):
    a = prv[w]
    b = nxt[w]
    if a >= 0:
        nxt[a] = b
    else:
        head[p] = b
    if b >= 0:
        prv[b] = a
    nxt[w] = -1
    prv[w] = -1


@njit(cache=True)
def _push(w, p, head, nxt, prv):
    h = head[p]
    nxt[w] = h
    prv[w] = -1
    if h >= 0:
        prv[h] = w
    head[p] = w


@njit(cache=True)
def sfs_kernel(n, loci, lam, cutoff, horizon, kingman, atom_rates, atom_cum, atom_len,
               beta_rate, beta_r, gen):
    """Stream one ancestral graph and walk ``loci`` independent n-particle walks on it.

    Equivalent in law to simulating the full graph and then walking each
    locus on it, but the graph is never stored: every event is applied to
    all walkers at once and simulation stops when every locus has absorbed.
    Returns (tau[loci, n-1], tmrca[loci], absorbed[loci]).
    """
    W = loci * n
    pos = np.empty(W, np.int64)
    mask = np.empty(W, np.uint64)
    nxt = np.full(W, -1, np.int64)
    prv = np.full(W, -1, np.int64)
    cap = max(64, 4 * n)
    head = np.full(cap, -1, np.int64)
    extra = _scratch(atom_len)
    labels = np.empty(cap + extra, np.int64)
    for i in range(n):
        for j in range(loci):
            w = j * n + i
            pos[w] = i
            mask[w] = np.uint64(1) << np.uint64(i)
            _push(w, i, head, nxt, prv)
    nb = np.full(loci, n, np.int64)
    last_t = np.zeros(loci)
    tau = np.zeros((loci, max(n - 1, 1)))
    tmrca = np.full(loci, np.nan)
    absorbed = np.zeros(loci, np.bool_)
    done = 0
    if n == 1:
        for j in range(loci):
            absorbed[j] = True
            tmrca[j] = 0.0
        return tau[:, :0].copy(), tmrca, absorbed
    l = n
    t = 0.0
    removed = np.empty(cap, np.int64)
    while done < loci and l > 1:
        if labels.shape[0] < l + extra:
            labels = np.empty(2 * (l + extra), np.int64)
        t, kind, a, b = draw_event(gen, t, l, lam, cutoff, kingman, atom_rates, atom_cum,
                                   atom_len, beta_rate, beta_r, labels)
        if kind == NO_EVENT or t > horizon:
            break
        if kind == FRAG:
            if l + 1 > head.shape[0]:
                old = head.shape[0]
                head = _grow(head, l + 1)
                head[old:] = -1
            head[l] = -1
            w = head[a]
            while w >= 0:
                nw = nxt[w]
                if gen.random() < 0.5:
                    _unlink(w, a, head, nxt, prv)
                    _push(w, l, head, nxt, prv)
                    pos[w] = l
                w = nw
            l += 1
            continue
        if kind == PAIR:
            nr = 1
            groups_p = np.empty(1, np.int64)
            groups_q = np.empty(1, np.int64)
            groups_p[0] = a
            groups_q[0] = b
        else:
            m = a
            first = np.full(m, -1, np.int64)
            count = labels[l:l + m].copy()
            groups_p = np.empty(l, np.int64)
            groups_q = np.empty(l, np.int64)
            nr = 0
            for p in range(l):
                g = labels[p]
                if g < 0 or count[g] < 2:
                    continue
                if first[g] < 0:
                    first[g] = p
                else:
                    groups_p[nr] = first[g]
                    groups_q[nr] = p
                    nr += 1
        # move walkers of each absorbed node q into its group's first node p
        for r in range(nr):
            p = groups_p[r]
            q = groups_q[r]
            w = head[q]
            while w >= 0:
                nw = nxt[w]
                j = w // n
                found = -1
                for s in range(j * n, j * n + n):
                    if pos[s] == p:
                        found = s
                        break
                _unlink(w, q, head, nxt, prv)
                if found >= 0:
                    _accumulate(j, t, n, pos, mask, tau, last_t)
                    mask[found] |= mask[w]
                    pos[w] = -1
                    nb[j] -= 1
                    if nb[j] == 1:
                        _unlink(found, p, head, nxt, prv)
                        pos[found] = -1
                        tmrca[j] = t
                        absorbed[j] = True
                        done += 1
                else:
                    pos[w] = p
                    _push(w, p, head, nxt, prv)
                w = nw
        # remove absorbed nodes, highest position first, swapping in the last node
        if removed.shape[0] < nr:
            removed = np.empty(2 * nr, np.int64)
        for r in range(nr):
            removed[r] = groups_q[r]
        srt = np.sort(removed[:nr])
        for r in range(nr - 1, -1, -1):
            q = srt[r]
            last = l - 1
            if q != last:
                head[q] = head[last]
                w = head[q]
                while w >= 0:
                    pos[w] = q
                    w = nxt[w]
            head[last] = -1
            l -= 1
    return tau, tmrca, absorbed


@njit(cache=True)
def trace_kernel(bmask, bind, bcopy, nb, k, max_step, rec_step, rec_pa, rec_pb, order, ptr, gen,
                 out_step, out_mask, out_ind, out_copy, out_nb, out_paired, count):
    """Advance Mendelian walks on a pedigree from step k.

    Block state (bmask, bind, bcopy, nb) is updated in place and every step
    that changes it is appended to the output buffers at row ``count``.
    Returns (status, nb, k, count): status 0 absorbed, 1 no further event
    within max_step, 2 output buffers full.
    """
    cap = out_step.shape[0]
    nrec = np.empty(bmask.shape[0], np.int64)
    while True:
        if nb <= 1:
            return 0, nb, k, count
        if count >= cap:
            return 2, nb, k, count
        best = max_step + 1
        for i in range(nb):
            h = bind[i]
            lo = ptr[h]
            hi = ptr[h + 1]
            # first record of h with step > k
            while lo < hi:
                mid = (lo + hi) // 2
                if rec_step[order[mid]] <= k:
                    lo = mid + 1
                else:
                    hi = mid
            if lo < ptr[h + 1]:
                r = order[lo]
                s = rec_step[r]
                nrec[i] = r
                if s < best:
                    best = s
            else:
                nrec[i] = -1
        if best > max_step:
            return 1, nb, max_step, count
        k = best
        for i in range(nb):
            r = nrec[i]
            if r < 0 or rec_step[r] != k:
                continue
            pa = rec_pa[r]
            pb = rec_pb[r]
            if pa == pb or bcopy[i] == 0:
                bind[i] = pa
            else:
                bind[i] = pb
            bcopy[i] = gen.integers(0, 2)
        # coalesce blocks on the same gene copy
        i = 0
        while i < nb:
            j = i + 1
            while j < nb:
                if bind[j] == bind[i] and bcopy[j] == bcopy[i]:
                    bmask[i] |= bmask[j]
                    for s in range(j, nb - 1):
                        bmask[s] = bmask[s + 1]
                        bind[s] = bind[s + 1]
                        bcopy[s] = bcopy[s + 1]
                    nb -= 1
                else:
                    j += 1
            i += 1
        # canonical order by least element
        for i in range(1, nb):
            j = i
            while j > 0 and _lowbit(bmask[j]) < _lowbit(bmask[j - 1]):
                tm = bmask[j]
                bmask[j] = bmask[j - 1]
                bmask[j - 1] = tm
                ti = bind[j]
                bind[j] = bind[j - 1]
                bind[j - 1] = ti
                tc = bcopy[j]
                bcopy[j] = bcopy[j - 1]
                bcopy[j - 1] = tc
                j -= 1
        paired = False
        for i in range(nb):
            for j in range(i + 1, nb):
                if bind[i] == bind[j]:
                    paired = True
        out_step[count] = k
        out_nb[count] = nb
        out_paired[count] = paired
        for i in range(nb):
            out_mask[count, i] = bmask[i]
            out_ind[count, i] = bind[i]
            out_copy[count, i] = bcopy[i]
        count += 1
