"""Exact symbolic dynamics for irreducible topological Markov chains.

Points of the shift space are bi-infinite allowed sequences with eventually
periodic tails, stored in a canonical finite encoding.  Every operation
(shift, splice, metric, enumeration) is exact tuple/integer arithmetic; the
metric kappa**-n is manipulated through its integer exponent and converted
to a float only for reporting.

Coordinate convention: a point ``x`` assigns a symbol ``x.at(i)`` to every
integer ``i``.  ``shift(x, k).at(i) == x.at(i + k)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import product
from typing import Optional

import numpy as np

from .errors import (
    BracketUndefined,
    NotIrreducible,
    OrbitsNotDisjoint,
    ZeroRowOrColumn,
)

Word = tuple  # tuple of small nonnegative ints

STABLE = "stable"
UNSTABLE = "unstable"


# ---------------------------------------------------------------------------
# transition matrices


@dataclass(frozen=True)
class TransitionMatrix:
    """0/1 transition matrix over the alphabet {0, ..., n-1}."""

    entries: tuple

    @classmethod
    def from_rows(cls, rows) -> "TransitionMatrix":
        return cls(tuple(tuple(int(v) for v in row) for row in rows))

    @property
    def n(self) -> int:
        return len(self.entries)

    def allowed(self, i: int, j: int) -> bool:
        return self.entries[i][j] == 1

    def successors(self, i: int):
        return [j for j in range(self.n) if self.entries[i][j] == 1]

    def predecessors(self, j: int):
        return [i for i in range(self.n) if self.entries[i][j] == 1]

    def as_array(self) -> np.ndarray:
        return np.array(self.entries, dtype=float)

    def transpose(self) -> "TransitionMatrix":
        n = self.n
        return TransitionMatrix(
            tuple(tuple(self.entries[j][i] for j in range(n)) for i in range(n))
        )


def validate_matrix(m: TransitionMatrix) -> None:
    """Raise unless m is square 0/1, has no zero row/column and is irreducible."""
    n = m.n
    if n == 0:
        raise ZeroRowOrColumn("empty matrix")
    for row in m.entries:
        if len(row) != n:
            raise ZeroRowOrColumn("matrix is not square")
        for v in row:
            if v not in (0, 1):
                raise ZeroRowOrColumn(f"entry {v} is not a bit")
    for i in range(n):
        if not any(m.entries[i]):
            raise ZeroRowOrColumn(f"row {i} is zero")
        if not any(m.entries[j][i] for j in range(n)):
            raise ZeroRowOrColumn(f"column {i} is zero")
    reach = _reachable(m, 0)
    if len(reach) != n:
        missing = sorted(set(range(n)) - reach)
        raise NotIrreducible(f"states {missing} unreachable from state 0")
    reach_back = _reachable(m.transpose(), 0)
    if len(reach_back) != n:
        missing = sorted(set(range(n)) - reach_back)
        raise NotIrreducible(f"states {missing} cannot reach state 0")


def _reachable(m: TransitionMatrix, start: int) -> set:
    seen = {start}
    stack = [start]
    while stack:
        i = stack.pop()
        for j in m.successors(i):
            if j not in seen:
                seen.add(j)
                stack.append(j)
    return seen


def entropy(m: TransitionMatrix) -> float:
    """log of the Perron root, by power iteration on M + I.

    The +I shift makes the iteration converge for irreducible matrices of
    any period; it moves every eigenvalue by exactly one.
    """
    a = m.as_array() + np.eye(m.n)
    v = np.ones(m.n)
    lam = 0.0
    for _ in range(100_000):
        w = a @ v
        new_lam = float(np.max(w))
        v = w / new_lam
        if abs(new_lam - lam) <= 1e-12 * new_lam:
            lam = new_lam
            break
        lam = new_lam
    # Collatz-Wielandt refinement: for the converged positive vector the
    # ratio is the eigenvalue itself.
    w = a @ v
    lam = float(np.dot(w, v) / np.dot(v, v))
    rho = lam - 1.0
    if rho <= 1.0:
        return 0.0 if abs(rho - 1.0) < 1e-12 else math.log(max(rho, 1e-300))
    return math.log(rho)


@dataclass(frozen=True)
class MetricParams:
    """Expanding factor kappa > 1 of the self-similar ultrametric."""

    kappa: float

    def __post_init__(self):
        if not self.kappa > 1.0:
            raise ValueError("kappa must be > 1")

    def value(self, exponent: Optional[int]) -> float:
        """kappa**-exponent, with None meaning distance zero."""
        if exponent is None:
            return 0.0
        return self.kappa ** (-exponent)


def hausdorff_dimension(m: TransitionMatrix, p: MetricParams) -> float:
    return 2.0 * entropy(m) / math.log(p.kappa)


# ---------------------------------------------------------------------------
# eventually periodic points


def primitive_root(w: Word) -> Word:
    """Shortest word u with w = u**k."""
    n = len(w)
    for d in range(1, n + 1):
        if n % d == 0 and all(w[i] == w[i % d] for i in range(n)):
            return w[:d]
    return w


def _anchor(cycle: Word, old: int, new: int) -> Word:
    """Re-anchor a cyclic pattern: result[t] matches cycle at offset new-old."""
    m = len(cycle)
    shift_by = (new - old) % m
    return cycle[shift_by:] + cycle[:shift_by]


def _raw_at(left: Word, core: Word, right: Word, start: int, i: int):
    end = start + len(core)
    if i < start:
        return left[(i - start) % len(left)]
    if i < end:
        return core[i - start]
    return right[(i - end) % len(right)]


@dataclass(frozen=True)
class EventuallyPeriodicPoint:
    """Canonical encoding of an allowed bi-infinite eventually periodic sequence.

    For i < core_start the symbol is left_cycle[(i - core_start) % len],
    inside the core it is core[i - core_start], and for i >= core_end it is
    right_cycle[(i - core_end) % len].  Construction goes through
    :func:`build_point`, which produces the unique canonical form, so
    dataclass equality and hashing decide point equality.
    """

    left_cycle: Word
    core: Word
    right_cycle: Word
    core_start: int

    @property
    def core_end(self) -> int:
        return self.core_start + len(self.core)

    @property
    def is_periodic(self) -> bool:
        return not self.core and self.left_cycle == self.right_cycle and self.core_start == 0

    def at(self, i: int):
        return _raw_at(self.left_cycle, self.core, self.right_cycle, self.core_start, i)

    def sort_key(self):
        return (self.left_cycle, self.core_start, self.core, self.right_cycle)

    def __repr__(self):
        return f"Point({encode_point(self)!r})"


def build_point(left: Word, core: Word, right: Word, start: int) -> EventuallyPeriodicPoint:
    """Canonicalize a raw encoding: primitive cycles, minimal core, pinned phases."""
    left = primitive_root(tuple(left))
    right = primitive_root(tuple(right))
    core = tuple(core)
    ml, mr = len(left), len(right)
    if ml == 0 or mr == 0:
        raise ValueError("cycles must be nonempty")
    end = start + len(core)
    period_lcm = math.lcm(ml, mr)

    # Try to extend right-tail periodicity to the left; hitting the floor
    # means the left-cyclic zone is itself mr-periodic over a full lcm
    # window, i.e. the sequence is globally periodic.
    r = end
    floor = start - period_lcm - mr
    while r > floor and _raw_at(left, core, right, start, r - 1) == _raw_at(
        left, core, right, start, r - 1 + mr
    ):
        r -= 1
    if r <= floor:
        w0 = tuple(_raw_at(left, core, right, start, i) for i in range(mr))
        w = primitive_root(w0)
        return EventuallyPeriodicPoint(w, (), w, 0)
    big_r = r

    lft = start - 1
    ceil = end + period_lcm + ml
    while lft < ceil and _raw_at(left, core, right, start, lft + 1) == _raw_at(
        left, core, right, start, lft + 1 - ml
    ):
        lft += 1
    assert lft < ceil, "non-periodic point extended past the periodicity bound"
    big_l = lft

    if big_l + 1 >= big_r:
        s = e = big_r
    else:
        s, e = big_l + 1, big_r
    new_core = tuple(_raw_at(left, core, right, start, i) for i in range(s, e))
    new_left = tuple(_raw_at(left, core, right, start, i) for i in range(s - ml, s))
    new_right = tuple(_raw_at(left, core, right, start, i) for i in range(e, e + mr))
    return EventuallyPeriodicPoint(
        primitive_root(new_left), new_core, primitive_root(new_right), s
    )


def periodic_point(cycle: Word) -> EventuallyPeriodicPoint:
    """The point x with x.at(i) = cycle[i % len(cycle)]."""
    return build_point(tuple(cycle), (), tuple(cycle), 0)


def validate_point(x: EventuallyPeriodicPoint, m: TransitionMatrix) -> None:
    """Check every adjacent pair against the transition matrix."""
    lo = x.core_start - len(x.left_cycle) - 1
    hi = x.core_end + len(x.right_cycle) + 1
    for i in range(lo, hi):
        if not m.allowed(x.at(i), x.at(i + 1)):
            raise ValueError(f"forbidden transition {x.at(i)}->{x.at(i + 1)} at index {i}")


def symbol_at(x: EventuallyPeriodicPoint, i: int):
    return x.at(i)


def shift(x: EventuallyPeriodicPoint, k: int) -> EventuallyPeriodicPoint:
    """The shifted point y with y.at(i) = x.at(i + k)."""
    if k == 0:
        return x
    if x.is_periodic:
        m = len(x.left_cycle)
        w = _anchor(x.left_cycle, 0, -k)  # w[t] = cycle[(t + k) % m]
        w = x.left_cycle[k % m :] + x.left_cycle[: k % m]
        return EventuallyPeriodicPoint(w, (), w, 0)
    return EventuallyPeriodicPoint(
        x.left_cycle, x.core, x.right_cycle, x.core_start - k
    )


def reverse_point(x: EventuallyPeriodicPoint) -> EventuallyPeriodicPoint:
    """Time reversal: the point y with y.at(i) = x.at(-i)."""
    return build_point(
        tuple(reversed(x.right_cycle)),
        tuple(reversed(x.core)),
        tuple(reversed(x.left_cycle)),
        1 - x.core_end,
    )


# ---------------------------------------------------------------------------
# agreement windows and the ultrametric
#
# All comparisons reduce to scanning a bounded window: outside the cores
# both points are cyclic, so agreement over one full lcm window beyond the
# extents decides the whole tail.


def _right_bound(x, y, lo: int) -> int:
    l = math.lcm(len(x.right_cycle), len(y.right_cycle))
    return max(x.core_end, y.core_end, lo) + l


def _left_bound(x, y, hi: int) -> int:
    l = math.lcm(len(x.left_cycle), len(y.left_cycle))
    return min(x.core_start, y.core_start, hi) - l


def agree_from(x, y, lo: int) -> bool:
    """True iff x.at(i) == y.at(i) for every i >= lo."""
    hi = _right_bound(x, y, lo)
    return all(x.at(i) == y.at(i) for i in range(lo, hi + 1))


def agree_upto(x, y, hi: int) -> bool:
    """True iff x.at(i) == y.at(i) for every i <= hi."""
    lo = _left_bound(x, y, hi)
    return all(x.at(i) == y.at(i) for i in range(lo, hi + 1))


def agreement_depth(x, y):
    """Largest T with agreement on all i <= T.

    Returns math.inf when x == y, -math.inf when the left tails already
    disagree arbitrarily far down.
    """
    if x == y:
        return math.inf
    lo = _left_bound(x, y, 0)
    if not agree_upto(x, y, lo):
        return -math.inf
    hi = _right_bound(x, y, 0)
    for i in range(lo + 1, hi + 1):
        if x.at(i) != y.at(i):
            return i - 1
    return math.inf  # unreachable for canonical unequal points


def agreement_floor(x, y):
    """Smallest F with agreement on all i >= F (math.-inf when x == y)."""
    if x == y:
        return -math.inf
    hi = _right_bound(x, y, 0)
    if not agree_from(x, y, hi):
        return math.inf
    lo = _left_bound(x, y, 0)
    for i in range(hi - 1, lo - 1, -1):
        if x.at(i) != y.at(i):
            return i + 1
    return -math.inf


def agreement_radius(x, y) -> Optional[int]:
    """Largest n >= 0 with x.at(i) == y.at(i) for |i| < n; None when x == y."""
    if x == y:
        return None
    hi = _right_bound(x, y, 0)
    lo = _left_bound(x, y, 0)
    for n in range(0, max(hi, -lo) + 1):
        if x.at(n) != y.at(n) or x.at(-n) != y.at(-n):
            return n
    raise AssertionError("distinct canonical points agree on the deciding window")


def metric_exponent(x, y) -> Optional[int]:
    """d(x, y) = kappa**-e for the returned e; None encodes distance 0."""
    return agreement_radius(x, y)


def metric(x, y, p: MetricParams) -> float:
    return p.value(agreement_radius(x, y))


def splice_at(past, future, m: int) -> EventuallyPeriodicPoint:
    """The point equal to `past` on i <= m and to `future` on i > m.

    Caller guarantees the junction is allowed (the uses below always splice
    points that agree at m or m+1).
    """
    lo = min(past.core_start, m)
    hi = max(future.core_end, m + 1)
    left = _anchor(past.left_cycle, past.core_start, lo)
    right = _anchor(future.right_cycle, future.core_end, hi)
    core = tuple(past.at(i) for i in range(lo, m + 1)) + tuple(
        future.at(i) for i in range(m + 1, hi)
    )
    return build_point(left, core, right, lo)


def bracket(x, y, p: MetricParams = None) -> EventuallyPeriodicPoint:
    """[x, y]: past of y, future of x.  Defined when d(x, y) <= kappa**-1."""
    r = agreement_radius(x, y)
    if r is not None and r < 1:
        raise BracketUndefined("bracket needs agreement at coordinate 0")
    return splice_at(y, x, 0)


def local_set_membership(x, y, eps_exp: int, side: str) -> bool:
    """Definitional test for y in X^s(x, kappa**-eps_exp) (resp. X^u).

    This is the oracle: strict metric inequality plus the bracket
    fixed-point equation.  eps_exp >= 1 so the bracket is defined.
    """
    if eps_exp < 1:
        raise ValueError("eps must be <= kappa**-1")
    r = agreement_radius(x, y)
    if r is not None and r <= eps_exp:
        return False
    if side == STABLE:
        return bracket(x, y) == y
    if side == UNSTABLE:
        return bracket(y, x) == y
    raise ValueError(f"unknown side {side!r}")


def in_stable_set(x, y, eps_exp: int) -> bool:
    """Closed form: y in X^s(x, kappa**-eps_exp) iff agreement on i >= -eps_exp."""
    return agree_from(y, x, -eps_exp)


def in_unstable_set(x, y, eps_exp: int) -> bool:
    """Closed form: y in X^u(x, kappa**-eps_exp) iff agreement on i <= eps_exp."""
    return agree_upto(y, x, eps_exp)


# ---------------------------------------------------------------------------
# periodic orbits and homoclinic enumeration


@dataclass(frozen=True)
class PeriodicOrbit:
    """A periodic orbit, stored as one primitive allowed cycle word."""

    cycle: Word

    @classmethod
    def from_word(cls, w, m: TransitionMatrix = None) -> "PeriodicOrbit":
        w = tuple(int(s) for s in w)
        if not w:
            raise ValueError("empty cycle")
        if primitive_root(w) != w:
            raise ValueError(f"cycle {w} is a proper power")
        if m is not None:
            for i in range(len(w)):
                if not m.allowed(w[i], w[(i + 1) % len(w)]):
                    raise ValueError(f"cycle {w} not allowed at step {i}")
        return cls(w)

    def points(self):
        m = len(self.cycle)
        return [periodic_point(self.cycle[r:] + self.cycle[:r]) for r in range(m)]

    def pattern_rotations(self):
        m = len(self.cycle)
        return [self.cycle[r:] + self.cycle[:r] for r in range(m)]


def orbits_disjoint(p: PeriodicOrbit, q: PeriodicOrbit) -> bool:
    # orbits of primitive cycles coincide iff the cycles are rotations
    return q.cycle not in [p.cycle[r:] + p.cycle[:r] for r in range(len(p.cycle))]


def is_left_asymptotic(x: EventuallyPeriodicPoint, q: PeriodicOrbit) -> bool:
    """Left tail of x is eventually a rotation of q's cycle (x in X^u(Q))."""
    return primitive_root(x.left_cycle) in q.pattern_rotations()


def is_right_asymptotic(x: EventuallyPeriodicPoint, p: PeriodicOrbit) -> bool:
    """Right tail of x is eventually a rotation of p's cycle (x in X^s(P))."""
    return primitive_root(x.right_cycle) in p.pattern_rotations()


def is_homoclinic(x, p: PeriodicOrbit, q: PeriodicOrbit) -> bool:
    return is_left_asymptotic(x, q) and is_right_asymptotic(x, p)


def _allowed_words(m: TransitionMatrix, length: int):
    if length == 0:
        yield ()
        return
    for w in product(range(m.n), repeat=length):
        if all(m.allowed(w[i], w[i + 1]) for i in range(length - 1)):
            yield w


def enumerate_homoclinic(
    m: TransitionMatrix, p: PeriodicOrbit, q: PeriodicOrbit, core_bound: int
):
    """All canonical points of X^h(P, Q) with small core near the origin.

    Generates Q-cycle pasts and P-cycle futures around every core word of
    length <= core_bound whose window [s, e) sits inside [-core_bound,
    core_bound + 1], then canonicalizes and deduplicates.  The window bound
    pins the junction offsets; without it the family of shifted copies of
    any homoclinic point would make the result infinite.
    """
    if not orbits_disjoint(p, q):
        raise OrbitsNotDisjoint(f"orbits {p.cycle} and {q.cycle} share a point")
    if core_bound < 0:
        raise ValueError("core bound must be >= 0")
    seen = {}
    big_l = core_bound
    for length in range(0, core_bound + 1):
        for s in range(-big_l, big_l + 2 - length):
            e = s + length
            for q_rot in q.pattern_rotations():
                left = _anchor(q_rot, 0, s)
                for p_rot in p.pattern_rotations():
                    right = _anchor(p_rot, 0, e)
                    for w in _allowed_words(m, length):
                        if length > 0:
                            if not m.allowed(left[-1], w[0]):
                                continue
                            if not m.allowed(w[-1], right[0]):
                                continue
                        else:
                            if not m.allowed(left[-1], right[0]):
                                continue
                        x = build_point(left, w, right, s)
                        if len(x.core) > core_bound:
                            continue
                        if not (-big_l <= x.core_start and x.core_end <= big_l + 1):
                            continue
                        seen[x] = True
    out = sorted(seen, key=EventuallyPeriodicPoint.sort_key)
    return out


# ---------------------------------------------------------------------------
# textual encoding: "<left>*|<core>@<start>|<right>*"


def _word_str(w: Word) -> str:
    if any(s > 9 for s in w):
        return ",".join(str(s) for s in w)
    return "".join(str(s) for s in w)


def _word_parse(text: str) -> Word:
    if "," in text:
        return tuple(int(t) for t in text.split(","))
    return tuple(int(c) for c in text)


def encode_point(x: EventuallyPeriodicPoint) -> str:
    return (
        f"{_word_str(x.left_cycle)}*|{_word_str(x.core)}@{x.core_start}|"
        f"{_word_str(x.right_cycle)}*"
    )


def decode_point(text: str) -> EventuallyPeriodicPoint:
    left_part, mid, right_part = text.split("|")
    if not (left_part.endswith("*") and right_part.endswith("*")):
        raise ValueError(f"bad point encoding {text!r}")
    core_txt, start_txt = mid.rsplit("@", 1)
    return build_point(
        _word_parse(left_part[:-1]),
        _word_parse(core_txt),
        _word_parse(right_part[:-1]),
        int(start_txt),
    )
