"""Numba toppling kernels over flat row-major windows.

All kernels share the same conventions: ``h`` holds heights, ``odo`` toppling
counts, ``interior`` marks sites off the outermost shell (shell sites never
topple), ``offsets`` are the 2d flat neighbor offsets, ``thresh`` is 2d and
``budget`` caps the number of topplings performed by the call.

Return value is ``(status, topplings, aux)`` with status one of the codes
below.
"""
import numpy as np
from numba import njit

STABLE = 0
GROW = 1
BUDGET = 2
CAP_AT_SHELL = 3


@njit(cache=True)
def _push(stack, top, s):
    if top == stack.size:
        bigger = np.empty(stack.size * 2, np.int64)
        bigger[:top] = stack[:top]
        stack = bigger
    stack[top] = s
    return stack, top + 1


@njit(cache=True)
def relax_nested(h, odo, interior, offsets, thresh, crad, order, starts, stage, min_stage, budget):
    """Stabilize Q_stage, then Q_{stage+1}, ... using multi-topplings inside each volume.

    ``order`` lists sites by cube radius and ``starts[r]`` indexes the first
    site of radius r. ``aux`` is the stage to resume from.
    """
    n = h.size
    last = starts.size - 2  # the outer shell radius R
    onstack = np.zeros(n, np.uint8)
    stack = np.empty(1024, np.int64)
    top = 0
    for j in range(starts[stage + 1]):
        s = order[j]
        if h[s] >= thresh:
            onstack[s] = 1
            stack, top = _push(stack, top, s)
    done = 0
    k = stage
    while True:
        while top > 0:
            top -= 1
            s = stack[top]
            onstack[s] = 0
            v = h[s]
            if v < thresh or crad[s] > k:
                continue
            m = v // thresh
            if done + m > budget:
                m = budget - done
                if m <= 0:
                    return BUDGET, done, k
            h[s] -= m * thresh
            odo[s] += m
            done += m
            for o in offsets:
                t = s + o
                h[t] += m
                if h[t] >= thresh and onstack[t] == 0:
                    onstack[t] = 1
                    stack, top = _push(stack, top, t)
            if h[s] >= thresh and onstack[s] == 0:
                onstack[s] = 1
                stack, top = _push(stack, top, s)
        pending = False
        for j in range(starts[k + 1], starts[k + 2]):
            if h[order[j]] >= thresh:
                pending = True
                break
        if not pending and k >= min_stage:
            return STABLE, done, k
        if k + 1 >= last:
            return GROW, done, k + 1
        k += 1
        for j in range(starts[k], starts[k + 1]):
            s = order[j]
            if h[s] >= thresh and onstack[s] == 0:
                onstack[s] = 1
                stack, top = _push(stack, top, s)


@njit(cache=True)
def _heap_push(heap, size, val):
    i = size
    heap[i] = val
    while i > 0:
        p = (i - 1) >> 1
        if heap[p] <= heap[i]:
            break
        tmp = heap[p]
        heap[p] = heap[i]
        heap[i] = tmp
        i = p
    return size + 1


@njit(cache=True)
def _heap_pop(heap, size):
    size -= 1
    heap[0] = heap[size]
    i = 0
    while True:
        a = 2 * i + 1
        if a >= size:
            break
        b = a + 1
        c = a
        if b < size and heap[b] < heap[a]:
            c = b
        if heap[i] <= heap[c]:
            break
        tmp = heap[c]
        heap[c] = heap[i]
        heap[i] = tmp
        i = c
    return size


@njit(cache=True)
def relax_enumeration(h, odo, interior, offsets, thresh, rank, site_of_rank, budget):
    """Single topplings, always at the unstable site of smallest rank."""
    n = h.size
    heap = np.empty(n, np.int64)
    inheap = np.zeros(n, np.uint8)
    size = 0
    for s in range(n):
        if h[s] >= thresh:
            inheap[s] = 1
            size = _heap_push(heap, size, rank[s])
    done = 0
    while size > 0:
        s = site_of_rank[heap[0]]
        if interior[s] == 0:
            return GROW, done, 0
        if done >= budget:
            return BUDGET, done, 0
        size = _heap_pop(heap, size)
        inheap[s] = 0
        h[s] -= thresh
        odo[s] += 1
        done += 1
        for o in offsets:
            t = s + o
            h[t] += 1
            if h[t] >= thresh and inheap[t] == 0:
                inheap[t] = 1
                size = _heap_push(heap, size, rank[t])
        if h[s] >= thresh:
            inheap[s] = 1
            size = _heap_push(heap, size, rank[s])
    return STABLE, done, 0


@njit(cache=True)
def _splitmix(state):
    state[0] += np.uint64(0x9E3779B97F4A7C15)
    z = state[0]
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


@njit(cache=True)
def relax_random(h, odo, interior, offsets, thresh, rng_state, budget):
    """Single topplings at a uniformly chosen unstable site; ``rng_state`` is advanced in place."""
    n = h.size
    active = np.empty(n, np.int64)
    pos = np.full(n, -1, np.int64)
    cnt = 0
    for s in range(n):
        if h[s] >= thresh:
            pos[s] = cnt
            active[cnt] = s
            cnt += 1
    done = 0
    scale = 1.0 / 9007199254740992.0
    while cnt > 0:
        u = np.float64(_splitmix(rng_state) >> np.uint64(11)) * scale
        j = int(u * cnt)
        s = active[j]
        if interior[s] == 0:
            return GROW, done, 0
        if done >= budget:
            return BUDGET, done, 0
        h[s] -= thresh
        odo[s] += 1
        done += 1
        for o in offsets:
            t = s + o
            h[t] += 1
            if h[t] >= thresh and pos[t] < 0:
                pos[t] = cnt
                active[cnt] = t
                cnt += 1
        if h[s] < thresh:
            j = pos[s]
            cnt -= 1
            last = active[cnt]
            active[j] = last
            pos[last] = j
            pos[s] = -1
    return STABLE, done, 0


@njit(cache=True)
def relax_parallel(h, odo, interior, offsets, thresh, budget):
    """Synchronized rounds: collect every unstable site, then topple each once.

    ``aux`` is the number of completed rounds.
    """
    n = h.size
    active = np.empty(n, np.int64)
    nxt = np.empty(n, np.int64)
    flag = np.zeros(n, np.uint8)
    cnt = 0
    for s in range(n):
        if h[s] >= thresh:
            active[cnt] = s
            cnt += 1
    done = 0
    rounds = 0
    while cnt > 0:
        for i in range(cnt):
            if interior[active[i]] == 0:
                return GROW, done, rounds
        if done + cnt > budget:
            return BUDGET, done, rounds
        for i in range(cnt):
            s = active[i]
            h[s] -= thresh
            odo[s] += 1
        for i in range(cnt):
            s = active[i]
            for o in offsets:
                h[s + o] += 1
        done += cnt
        rounds += 1
        m = 0
        for i in range(cnt):
            s = active[i]
            if h[s] >= thresh and flag[s] == 0:
                flag[s] = 1
                nxt[m] = s
                m += 1
            for o in offsets:
                t = s + o
                if h[t] >= thresh and flag[t] == 0:
                    flag[t] = 1
                    nxt[m] = t
                    m += 1
        for i in range(m):
            flag[nxt[i]] = 0
        tmp = active
        active = nxt
        nxt = tmp
        cnt = m
    return STABLE, done, rounds


@njit(cache=True)
def relax_capped(h, odo, interior, offsets, thresh, cap, budget):
    """Legal topplings at sites that are unstable and have toppled fewer than ``cap`` times."""
    n = h.size
    onstack = np.zeros(n, np.uint8)
    stack = np.empty(1024, np.int64)
    top = 0
    for s in range(n):
        if h[s] >= thresh and odo[s] < cap[s]:
            onstack[s] = 1
            stack, top = _push(stack, top, s)
    done = 0
    while top > 0:
        top -= 1
        s = stack[top]
        onstack[s] = 0
        v = h[s]
        room = cap[s] - odo[s]
        if v < thresh or room <= 0:
            continue
        if interior[s] == 0:
            return CAP_AT_SHELL, done, s
        m = v // thresh
        if m > room:
            m = room
        if done + m > budget:
            m = budget - done
            if m <= 0:
                return BUDGET, done, 0
        h[s] -= m * thresh
        odo[s] += m
        done += m
        for o in offsets:
            t = s + o
            h[t] += m
            if h[t] >= thresh and odo[t] < cap[t] and onstack[t] == 0:
                onstack[t] = 1
                stack, top = _push(stack, top, t)
        if h[s] >= thresh and odo[s] < cap[s] and onstack[s] == 0:
            onstack[s] = 1
            stack, top = _push(stack, top, s)
    return STABLE, done, 0


@njit(cache=True)
def relax_sweep(h, odo, interior, offsets, thresh, budget):
    """Alternating forward/backward passes over the active flat range, multi-toppling in place.

    ``aux`` is the number of passes.
    """
    n = h.size
    lo = n
    hi = -1
    for s in range(n):
        if h[s] >= thresh:
            if s < lo:
                lo = s
            hi = s
    reach = 0
    for o in offsets:
        if o > reach:
            reach = o
    done = 0
    passes = 0
    while lo <= hi:
        nlo = n
        nhi = -1
        forward = passes % 2 == 0
        for j in range(lo, hi + 1):
            s = j if forward else lo + hi - j
            v = h[s]
            if v < thresh:
                continue
            if interior[s] == 0:
                return GROW, done, passes
            m = v // thresh
            if done + m > budget:
                m = budget - done
                if m <= 0:
                    return BUDGET, done, passes
            h[s] = v - m * thresh
            odo[s] += m
            done += m
            for o in offsets:
                h[s + o] += m
            if s - reach < nlo:
                nlo = s - reach
            if s + reach > nhi:
                nhi = s + reach
        passes += 1
        lo = max(nlo, 0)
        hi = min(nhi, n - 1)
    return STABLE, done, passes


@njit(cache=True)
def topple_sequence(h, odo, offsets, thresh, sites):
    """Topple ``sites`` once each, in order; returns the position of the first illegal one or -1."""
    for i in range(sites.size):
        s = sites[i]
        if h[s] < thresh:
            return i
        h[s] -= thresh
        odo[s] += 1
        for o in offsets:
            h[s + o] += 1
    return -1
