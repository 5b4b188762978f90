"""Deterministic sample families of points and groupoid elements.

The audits need element families that vary at a controlled range of
depths: around each anchor we plant points that agree with the anchor's
source to exactly depth t and then deviate, for t over a window, so that
base-set disks of every radius still capture nontrivial pairs.  All
sampling is reproducible from a seeded generator.
"""

from __future__ import annotations

import math
from collections import deque

from .groupoid import GroupoidElement, base_set, c_first_time, holonomy_apply, in_domain, unit
from .sft import (
    STABLE,
    EventuallyPeriodicPoint,
    PeriodicOrbit,
    TransitionMatrix,
    agreement_floor,
    build_point,
    enumerate_homoclinic,
    shift,
    splice_at,
)


def homoclinic_pool(
    m: TransitionMatrix,
    p: PeriodicOrbit,
    q: PeriodicOrbit,
    core_bound: int,
    depth_shifts,
) -> list:
    """Homoclinic points with cores pushed to a range of future depths."""
    base = enumerate_homoclinic(m, p, q, core_bound)
    seen = {}
    for j in depth_shifts:
        for x in base:
            seen[shift(x, -j)] = True
    return sorted(seen, key=EventuallyPeriodicPoint.sort_key)


def path_to_cycle(m: TransitionMatrix, start: int, cycle) -> tuple:
    """Shortest allowed word start..first-symbol-of-cycle (inclusive ends)."""
    targets = set(cycle)
    seen = {start: (start,)}
    queue = deque([start])
    while queue:
        s = queue.popleft()
        if s in targets:
            return seen[s]
        for t in m.successors(s):
            if t not in seen:
                seen[t] = seen[s] + (t,)
                queue.append(t)
    raise ValueError("cycle unreachable; matrix not irreducible?")


def tail_point(m: TransitionMatrix, symbol: int, at: int, p: PeriodicOrbit) -> EventuallyPeriodicPoint:
    """A point carrying `symbol` at index `at` and then falling onto p's cycle.

    Only coordinates >= at are meaningful to callers (they splice its
    future); the left tail is completed through the same cycle.
    """
    word = path_to_cycle(m, symbol, p.cycle)
    landing = word[-1]
    rot = p.cycle
    while rot[0] != landing:
        rot = rot[1:] + rot[:1]
    right = rot[1:] + rot[:1]  # pattern after the landing symbol
    left_cycle = _cycle_through(m, symbol)
    return build_point(left_cycle, word, right, at)


def _cycle_through(m: TransitionMatrix, symbol: int) -> tuple:
    """Some allowed cycle word starting at `symbol`, with allowed wrap."""
    seen = {s: (s,) for s in m.successors(symbol)}
    queue = deque(m.successors(symbol))
    while queue:
        s = queue.popleft()
        if m.allowed(s, symbol):
            return (symbol,) + seen[s]
        for t in m.successors(s):
            if t not in seen:
                seen[t] = seen[s] + (t,)
                queue.append(t)
    raise ValueError("no return path; matrix not irreducible?")


def variations_at_depth(
    m: TransitionMatrix, b: EventuallyPeriodicPoint, t: int, p: PeriodicOrbit
) -> list:
    """Points equal to b through index t, deviating at t + 1, then p-asymptotic."""
    out = []
    cur = b.at(t + 1)
    for s in m.successors(b.at(t)):
        if s == cur:
            continue
        tp = tail_point(m, s, t + 1, p)
        out.append(splice_at(b, tp, t))
    return out


def nested_family(
    m: TransitionMatrix,
    anchor: GroupoidElement,
    depths,
    p: PeriodicOrbit,
) -> list:
    """Graph elements (h(z), z) for z varying at each depth around the anchor."""
    out = []
    n_a = c_first_time(anchor)
    for t in depths:
        r = max(t - 1, n_a)
        try:
            bs = base_set(anchor, r)
        except ValueError:
            continue
        for z in variations_at_depth(m, anchor.second, t, p):
            if in_domain(bs, z):
                out.append(GroupoidElement(holonomy_apply(bs, z), z, anchor.side))
    return out


def stable_pairs(pool, limit: int, rng) -> list:
    """Stably equivalent ordered pairs drawn from the pool."""
    n = len(pool)
    out = []
    order = rng.permutation(n * n)
    for idx in order:
        i, j = divmod(int(idx), n)
        x, y = pool[i], pool[j]
        if agreement_floor(x, y) != math.inf:
            out.append(GroupoidElement(x, y, STABLE))
            if len(out) >= limit:
                break
    return out


def audit_elements(
    m: TransitionMatrix,
    p: PeriodicOrbit,
    q: PeriodicOrbit,
    rng,
    count: int,
    core_bound: int = 2,
    max_depth: int = 16,
) -> list:
    """Stable-side element family: nested families around a few anchors plus
    units and random stably equivalent pairs."""
    pool = homoclinic_pool(m, p, q, core_bound, range(0, 6))
    units = [unit(x) for x in pool]
    anchor_units = [units[int(rng.integers(len(units)))] for _ in range(4)]
    anchor_pairs = stable_pairs(pool, 4, rng)
    seen = {}
    for a in anchor_units + anchor_pairs:
        seen[a] = True
        for e in nested_family(m, a, range(c_first_time(a) + 2, max_depth), p):
            seen[e] = True
    for e in stable_pairs(pool, count, rng):
        if len(seen) >= count:
            break
        seen[e] = True
    out = sorted(seen, key=GroupoidElement.sort_key)
    return out[:count] if len(out) > count else out
