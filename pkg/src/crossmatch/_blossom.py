"""Dense O(n^3) weighted blossom algorithm (Edmonds/Gabow primal-dual).

The kernel solves maximum-weight matching on a complete graph with strictly
positive integer weights. On a complete graph with an even number of vertices
every maximum-weight matching is perfect, so feeding ``C - d`` yields a
minimum-weight perfect matching for the distances ``d``.

Vertices are 1-based inside the kernel; index 0 means "none". Blossoms are
numbered ``n + 1 .. 2n``. Edge records live in three dense arrays (``eu``,
``ev``, ``ew``) indexed by (super)vertex pairs, so a blossom inherits the
cheapest edge of its members towards every other vertex.
"""

import numba
import numpy as np

_INT = numba.int64


@numba.njit(cache=True, nogil=True)
def _dist(lab, eu, ev, ew, a, b):
    return lab[eu[a, b]] + lab[ev[a, b]] - 2 * ew[a, b]


@numba.njit(cache=True, nogil=True)
def _slack_dist(lab, sedge, x):
    return lab[sedge[x, 0]] + lab[sedge[x, 1]] - 2 * sedge[x, 2]


@numba.njit(cache=True, nogil=True)
def _set_slack(n, lab, eu, ev, ew, slack, sedge, st, S, x):
    slack[x] = 0
    for u in range(1, n + 1):
        # g[x][u] is g[u][x] reversed; read the row for locality
        if ew[x, u] > 0 and st[u] != x and S[st[u]] == 0:
            dnew = lab[eu[x, u]] + lab[ev[x, u]] - 2 * ew[x, u]
            if slack[x] == 0 or dnew < (lab[sedge[x, 0]] + lab[sedge[x, 1]]
                                         - 2 * sedge[x, 2]):
                slack[x] = u
                sedge[x, 0] = ev[x, u]
                sedge[x, 1] = eu[x, u]
                sedge[x, 2] = ew[x, u]


@numba.njit(cache=True, nogil=True)
def _q_push(n, flower, flen, queue, qstate, x):
    # qstate = [head, tail]; explicit stack instead of recursion
    stack = np.empty(flower.shape[1] + 2 * n + 2, dtype=np.int64)
    top = 0
    stack[top] = x
    top += 1
    while top > 0:
        top -= 1
        y = stack[top]
        if y <= n:
            queue[qstate[1]] = y
            qstate[1] += 1
        else:
            for i in range(flen[y] - 1, -1, -1):
                stack[top] = flower[y, i]
                top += 1


@numba.njit(cache=True, nogil=True)
def _set_st(n, flower, flen, st, x, b):
    stack = np.empty(flower.shape[1] + 2 * n + 2, dtype=np.int64)
    top = 0
    stack[top] = x
    top += 1
    while top > 0:
        top -= 1
        y = stack[top]
        st[y] = b
        if y > n:
            for i in range(flen[y]):
                stack[top] = flower[y, i]
                top += 1


@numba.njit(cache=True, nogil=True)
def _reverse(flower, b, lo, hi):
    # reverse flower[b, lo:hi]
    hi -= 1
    while lo < hi:
        t = flower[b, lo]
        flower[b, lo] = flower[b, hi]
        flower[b, hi] = t
        lo += 1
        hi -= 1


@numba.njit(cache=True, nogil=True)
def _get_pr(flower, flen, b, xr):
    pr = 0
    while flower[b, pr] != xr:
        pr += 1
    if pr % 2 == 1:
        _reverse(flower, b, 1, flen[b])
        return flen[b] - pr
    return pr


@numba.njit(cache=True, nogil=True)
def _rotate(flower, flen, b, k):
    # left-rotate flower[b, :flen[b]] by k
    m = flen[b]
    if k == 0 or k == m:
        return
    _reverse(flower, b, 0, k)
    _reverse(flower, b, k, m)
    _reverse(flower, b, 0, m)


@numba.njit(cache=True, nogil=True)
def _set_match(n, eu, ev, flower, flen, flower_from, match, u, v):
    match[u] = ev[u, v]
    if u > n:
        xr = flower_from[u, eu[u, v]]
        pr = _get_pr(flower, flen, u, xr)
        for i in range(pr):
            _set_match(n, eu, ev, flower, flen, flower_from, match,
                       flower[u, i], flower[u, i ^ 1])
        _set_match(n, eu, ev, flower, flen, flower_from, match, xr, v)
        _rotate(flower, flen, u, pr)


@numba.njit(cache=True, nogil=True)
def _augment(n, eu, ev, flower, flen, flower_from, match, st, pa, u, v):
    while True:
        xnv = st[match[u]]
        _set_match(n, eu, ev, flower, flen, flower_from, match, u, v)
        if xnv == 0:
            return
        _set_match(n, eu, ev, flower, flen, flower_from, match,
                   xnv, st[pa[xnv]])
        u = st[pa[xnv]]
        v = xnv


@numba.njit(cache=True, nogil=True)
def _get_lca(match, st, pa, vis, tick, u, v):
    tick[0] += 1
    t = tick[0]
    while u != 0 or v != 0:
        if u != 0:
            if vis[u] == t:
                return u
            vis[u] = t
            u = st[match[u]]
            if u != 0:
                u = st[pa[u]]
        u, v = v, u
    return 0


@numba.njit(cache=True, nogil=True)
def _add_blossom(n, n_x, lab, eu, ev, ew, slack, sedge, st, S, match, pa, flower,
                 flen, flower_from, queue, qstate, u, lca, v):
    b = n + 1
    while b <= n_x and st[b] != 0:
        b += 1
    if b > n_x:
        n_x += 1
    lab[b] = 0
    S[b] = 0
    match[b] = match[lca]
    flen[b] = 0
    flower[b, flen[b]] = lca
    flen[b] += 1
    x = u
    while x != lca:
        flower[b, flen[b]] = x
        flen[b] += 1
        y = st[match[x]]
        flower[b, flen[b]] = y
        flen[b] += 1
        _q_push(n, flower, flen, queue, qstate, y)
        x = st[pa[y]]
    _reverse(flower, b, 1, flen[b])
    x = v
    while x != lca:
        flower[b, flen[b]] = x
        flen[b] += 1
        y = st[match[x]]
        flower[b, flen[b]] = y
        flen[b] += 1
        _q_push(n, flower, flen, queue, qstate, y)
        x = st[pa[y]]
    _set_st(n, flower, flen, st, b, b)
    for x in range(1, n_x + 1):
        ew[b, x] = 0
    for x in range(1, n + 1):
        flower_from[b, x] = 0
    for i in range(flen[b]):
        xs = flower[b, i]
        for x in range(1, n_x + 1):
            if ew[b, x] == 0 or (
                    lab[eu[xs, x]] + lab[ev[xs, x]] - 2 * ew[xs, x]
                    < lab[eu[b, x]] + lab[ev[b, x]] - 2 * ew[b, x]):
                eu[b, x] = eu[xs, x]
                ev[b, x] = ev[xs, x]
                ew[b, x] = ew[xs, x]
        for x in range(1, n + 1):
            if flower_from[xs, x] != 0:
                flower_from[b, x] = xs
    # the column is the row reversed
    for x in range(1, n_x + 1):
        eu[x, b] = ev[b, x]
        ev[x, b] = eu[b, x]
        ew[x, b] = ew[b, x]
    _set_slack(n, lab, eu, ev, ew, slack, sedge, st, S, b)
    return n_x


@numba.njit(cache=True, nogil=True)
def _expand_blossom(n, lab, eu, ev, ew, slack, sedge, st, S, pa, flower, flen,
                    flower_from, queue, qstate, b):
    for i in range(flen[b]):
        _set_st(n, flower, flen, st, flower[b, i], flower[b, i])
    xr = flower_from[b, eu[b, pa[b]]]
    pr = _get_pr(flower, flen, b, xr)
    for i in range(0, pr, 2):
        xs = flower[b, i]
        xns = flower[b, i + 1]
        pa[xs] = eu[xns, xs]
        S[xs] = 1
        S[xns] = 0
        slack[xs] = 0
        _set_slack(n, lab, eu, ev, ew, slack, sedge, st, S, xns)
        _q_push(n, flower, flen, queue, qstate, xns)
    S[xr] = 1
    pa[xr] = pa[b]
    for i in range(pr + 1, flen[b]):
        xs = flower[b, i]
        S[xs] = -1
        _set_slack(n, lab, eu, ev, ew, slack, sedge, st, S, xs)
    st[b] = 0


@numba.njit(cache=True, nogil=True)
def _on_found_edge(n, n_x, lab, eu, ev, ew, slack, sedge, st, S, match, pa, vis,
                   tick, flower, flen, flower_from, queue, qstate, a, c):
    # returns (augmented, n_x)
    u = st[eu[a, c]]
    v = st[ev[a, c]]
    if S[v] == -1:
        pa[v] = eu[a, c]
        S[v] = 1
        nu = st[match[v]]
        slack[v] = 0
        slack[nu] = 0
        S[nu] = 0
        _q_push(n, flower, flen, queue, qstate, nu)
    elif S[v] == 0:
        lca = _get_lca(match, st, pa, vis, tick, u, v)
        if lca == 0:
            _augment(n, eu, ev, flower, flen, flower_from, match, st, pa, u, v)
            _augment(n, eu, ev, flower, flen, flower_from, match, st, pa, v, u)
            return True, n_x
        n_x = _add_blossom(n, n_x, lab, eu, ev, ew, slack, sedge, st, S, match, pa,
                           flower, flen, flower_from, queue, qstate, u, lca, v)
    return False, n_x


@numba.njit(cache=True, nogil=True)
def _phase(n, n_x, lab, eu, ev, ew, slack, sedge, st, S, match, pa, vis, tick,
           flower, flen, flower_from, queue, qstate, perfect):
    # one augmentation; returns (augmented, n_x)
    for x in range(1, n_x + 1):
        S[x] = -1
        slack[x] = 0
    qstate[0] = 0
    qstate[1] = 0
    for x in range(1, n_x + 1):
        if st[x] == x and match[x] == 0:
            pa[x] = 0
            S[x] = 0
            _q_push(n, flower, flen, queue, qstate, x)
    if qstate[1] == 0:
        return False, n_x
    inf = np.iinfo(np.int64).max
    while True:
        while qstate[0] < qstate[1]:
            u = queue[qstate[0]]
            qstate[0] += 1
            if S[st[u]] == 1:
                continue
            for v in range(1, n + 1):
                if ew[u, v] > 0 and st[u] != st[v]:
                    # hot loop: helpers are inlined by hand, numba call
                    # overhead on array arguments dominates otherwise
                    dnew = lab[eu[u, v]] + lab[ev[u, v]] - 2 * ew[u, v]
                    if dnew == 0:
                        found, n_x = _on_found_edge(
                            n, n_x, lab, eu, ev, ew, slack, sedge, st, S, match, pa,
                            vis, tick, flower, flen, flower_from, queue,
                            qstate, u, v)
                        if found:
                            return True, n_x
                    else:
                        x = st[v]
                        if x != v:
                            dnew = (lab[eu[u, x]] + lab[ev[u, x]]
                                    - 2 * ew[u, x])
                        if slack[x] == 0 or dnew < (
                                lab[sedge[x, 0]] + lab[sedge[x, 1]]
                                - 2 * sedge[x, 2]):
                            slack[x] = u
                            sedge[x, 0] = eu[u, x]
                            sedge[x, 1] = ev[u, x]
                            sedge[x, 2] = ew[u, x]
        d = inf
        for b in range(n + 1, n_x + 1):
            if st[b] == b and S[b] == 1:
                d = min(d, lab[b] // 2)
        for x in range(1, n_x + 1):
            if st[x] == x and slack[x] != 0:
                sd = (lab[sedge[x, 0]] + lab[sedge[x, 1]]
                      - 2 * sedge[x, 2])
                if S[x] == -1:
                    d = min(d, sd)
                elif S[x] == 0:
                    d = min(d, sd // 2)
        for u in range(1, n + 1):
            if S[st[u]] == 0:
                if not perfect and lab[u] <= d:
                    return False, n_x
                lab[u] -= d
            elif S[st[u]] == 1:
                lab[u] += d
        for b in range(n + 1, n_x + 1):
            if st[b] == b:
                if S[st[b]] == 0:
                    lab[b] += 2 * d
                elif S[st[b]] == 1:
                    lab[b] -= 2 * d
        qstate[0] = 0
        qstate[1] = 0
        for x in range(1, n_x + 1):
            if (st[x] == x and slack[x] != 0 and st[slack[x]] != x
                    and _slack_dist(lab, sedge, x) == 0):
                found, n_x = _on_found_edge(
                    n, n_x, lab, eu, ev, ew, slack, sedge, st, S, match, pa, vis,
                    tick, flower, flen, flower_from, queue, qstate,
                    slack[x], x)
                if found:
                    return True, n_x
        for b in range(n + 1, n_x + 1):
            if st[b] == b and S[b] == 1 and lab[b] == 0:
                _expand_blossom(n, lab, eu, ev, ew, slack, sedge, st, S, pa, flower,
                                flen, flower_from, queue, qstate, b)


@numba.njit(cache=True, nogil=True)
def _solve(w, perfect, warm):
    n = w.shape[0]
    m = 2 * n + 1
    eu = np.zeros((m, m), dtype=np.int32)
    ev = np.zeros((m, m), dtype=np.int32)
    ew = np.zeros((m, m), dtype=np.int64)
    w_max = 0
    for u in range(1, n + 1):
        for v in range(1, n + 1):
            eu[u, v] = u
            ev[u, v] = v
            if u != v:
                ew[u, v] = w[u - 1, v - 1]
                if ew[u, v] > w_max:
                    w_max = ew[u, v]
    lab = np.zeros(m, dtype=np.int64)
    match = np.zeros(m, dtype=np.int64)
    slack = np.zeros(m, dtype=np.int64)
    sedge = np.zeros((m, 3), dtype=np.int64)
    st = np.zeros(m, dtype=np.int64)
    pa = np.zeros(m, dtype=np.int64)
    S = np.zeros(m, dtype=np.int64)
    vis = np.zeros(m, dtype=np.int64)
    tick = np.zeros(1, dtype=np.int64)
    flower = np.zeros((m, n + 1), dtype=np.int64)
    flen = np.zeros(m, dtype=np.int64)
    flower_from = np.zeros((m, n + 1), dtype=np.int64)
    queue = np.zeros(4 * m, dtype=np.int64)
    qstate = np.zeros(2, dtype=np.int64)
    for u in range(m):
        st[u] = u
    for u in range(1, n + 1):
        flower_from[u, u] = u
        lab[u] = w_max
    if warm:
        _greedy_start(n, lab, ew, match)
    n_x = n
    while True:
        found, n_x = _phase(n, n_x, lab, eu, ev, ew, slack, sedge, st, S, match, pa,
                            vis, tick, flower, flen, flower_from, queue,
                            qstate, perfect)
        if not found:
            break
    mate = np.full(n, -1, dtype=np.int64)
    for u in range(1, n + 1):
        if match[u] != 0:
            mate[u - 1] = match[u] - 1
    return mate


@numba.njit(cache=True, nogil=True)
def _greedy_start(n, lab, ew, match):
    # Feasible start: lab[u] = heaviest incident edge, then lower each exposed
    # vertex until an edge is tight and match it if the partner is exposed.
    # Vertex duals may go negative, so this is only valid for perfect
    # matching. Weights are even, hence all labels stay even.
    for u in range(1, n + 1):
        best = 0
        for v in range(1, n + 1):
            if ew[u, v] > best:
                best = ew[u, v]
        lab[u] = best
    for u in range(1, n + 1):
        if match[u] != 0:
            continue
        best = np.iinfo(np.int64).min
        arg = 0
        for v in range(1, n + 1):
            if v != u and ew[u, v] > 0:
                val = 2 * ew[u, v] - lab[v]
                if val > best or (val == best and match[v] == 0
                                  and match[arg] != 0):
                    best = val
                    arg = v
        lab[u] = best
        if arg != 0 and match[arg] == 0:
            match[u] = arg
            match[arg] = u


def max_weight_matching_dense(w):
    """Maximum-weight matching of a graph given as a dense weight matrix.

    ``w`` is an (n, n) int64 matrix; entries <= 0 mean "no edge". Returns
    ``mate`` with ``mate[i]`` the 0-based partner of vertex ``i`` or -1.
    """
    return _solve(np.ascontiguousarray(w, dtype=np.int64), False, False)


def min_cost_perfect_matching_dense(cost):
    """Minimum-cost perfect matching of the complete graph on ``n`` vertices.

    ``cost`` is a symmetric (n, n) matrix of nonnegative integers and ``n``
    must be even. Costs are turned into even positive weights so that the
    greedy warm start keeps every dual label integral.
    """
    cost = np.asarray(cost, dtype=np.int64)
    n = cost.shape[0]
    if n % 2:
        raise ValueError("perfect matching needs an even number of vertices")
    if n == 0:
        return np.empty(0, dtype=np.int64)
    c_max = int(cost.max())
    if c_max >= 2**60 // max(n, 1):
        raise OverflowError("costs too large for exact int64 arithmetic")
    w = 2 * (c_max + 1 - cost)
    return _solve(np.ascontiguousarray(w), True, True)
