"""Slow, independent reference implementations used only by the tests."""
from collections import deque
from itertools import product


def neighbors(x):
    for k in range(len(x)):
        for s in (1, -1):
            y = list(x)
            y[k] += s
            yield tuple(y)


def naive_stabilize(height, n, d, max_steps=10**7):
    """Single legal topplings from a FIFO queue over dicts; ``height`` maps a point to its background."""
    conf = {}
    odo = {}

    def get(x):
        if x not in conf:
            conf[x] = height(x)
        return conf[x]

    o = (0,) * d
    conf[o] = get(o) + n
    queue = deque([o])
    steps = 0
    while queue:
        x = queue.popleft()
        if get(x) < 2 * d:
            continue
        conf[x] -= 2 * d
        odo[x] = odo.get(x, 0) + 1
        steps += 1
        if steps > max_steps:
            raise RuntimeError("oracle step limit")
        for y in neighbors(x):
            conf[y] = get(y) + 1
            if conf[y] >= 2 * d:
                queue.append(y)
        if conf[x] >= 2 * d:
            queue.append(x)
    return conf, odo


def lattice_points_brute(gens, K, radius):
    """Points a*x1 + b*x2 (|a|,|b| <= K) inside Q_radius."""
    out = set()
    (a1, a2), (b1, b2) = gens
    for a, b in product(range(-K, K + 1), repeat=2):
        p = (a * a1 + b * b1, a * a2 + b * b2)
        if max(abs(p[0]), abs(p[1])) <= radius:
            out.add(p)
    return out


def second_antiderivative(f: dict):
    """g with g(x+1) - 2 g(x) + g(x-1) = f(x), by recursion from g = 0 left of the support."""
    if not f:
        return {}
    lo, hi = min(f), max(f)
    g = {lo - 1: 0, lo: 0}
    for x in range(lo, hi + 2):
        g[x + 1] = f.get(x, 0) + 2 * g[x] - g[x - 1]
    return {x: v for x, v in g.items() if v}
