"""Stable and unstable groupoids over transversals, with their ultrametrics.

An element is an ordered pair of points; on the stable side the pair is
forward-asymptotic (tails literally equal beyond some time) with both
points on the unstable transversal of Q, and mirrored on the unstable
side.  The two-branch ultrametric is computed on integer exponents: a
distance kappa**-e is represented by e, with None standing for zero.

The unstable side uses the mirrored closed forms directly (thresholds and
first times flip sign); :func:`reverse_element` provides the time-reversal
conjugation that the tests use to cross-check every mirrored formula.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

from .errors import NotComposable, OutsideDomain, SideMismatch
from .sft import (
    STABLE,
    UNSTABLE,
    EventuallyPeriodicPoint,
    MetricParams,
    PeriodicOrbit,
    agree_from,
    agree_upto,
    agreement_floor,
    agreement_depth,
    agreement_radius,
    in_stable_set,
    in_unstable_set,
    is_left_asymptotic,
    is_right_asymptotic,
    local_set_membership,
    reverse_point,
    shift,
    splice_at,
)


@dataclass(frozen=True)
class GroupoidElement:
    first: EventuallyPeriodicPoint
    second: EventuallyPeriodicPoint
    side: str = STABLE

    def __post_init__(self):
        if self.side not in (STABLE, UNSTABLE):
            raise ValueError(f"unknown side {self.side!r}")

    def sort_key(self):
        return (self.first.sort_key(), self.second.sort_key())


def unit(x: EventuallyPeriodicPoint, side: str = STABLE) -> GroupoidElement:
    return GroupoidElement(x, x, side)


def reverse_element(a: GroupoidElement) -> GroupoidElement:
    """Time-reversal conjugation; swaps the stable and unstable sides."""
    other = UNSTABLE if a.side == STABLE else STABLE
    return GroupoidElement(reverse_point(a.first), reverse_point(a.second), other)


def element_is_valid(a: GroupoidElement, p: PeriodicOrbit, q: PeriodicOrbit) -> bool:
    """Invariant check: asymptotic pair on the correct transversal."""
    if a.side == STABLE:
        if agreement_floor(a.first, a.second) == math.inf:
            return False
        return is_left_asymptotic(a.first, q) and is_left_asymptotic(a.second, q)
    if agreement_depth(a.first, a.second) == -math.inf:
        return False
    return is_right_asymptotic(a.first, p) and is_right_asymptotic(a.second, p)


def range_of(a: GroupoidElement) -> EventuallyPeriodicPoint:
    return a.first


def source_of(a: GroupoidElement) -> EventuallyPeriodicPoint:
    return a.second


def inverse(a: GroupoidElement) -> GroupoidElement:
    return GroupoidElement(a.second, a.first, a.side)


def compose(a: GroupoidElement, b: GroupoidElement) -> GroupoidElement:
    if a.side != b.side:
        raise SideMismatch("cannot compose elements of different sides")
    if a.second != b.first:
        raise NotComposable("source(a) != range(b)")
    return GroupoidElement(a.first, b.second, a.side)


def phi_auto(a: GroupoidElement, k: int) -> GroupoidElement:
    """The automorphism induced by the shift, applied coordinatewise."""
    return GroupoidElement(shift(a.first, k), shift(a.second, k), a.side)


@lru_cache(maxsize=None)
def min_splice_time(a: GroupoidElement) -> float:
    """Smallest integer N (of any sign) at which the holonomy splice around
    the pair is coherent: the coordinates agree on i >= N - 1 (stable side)
    or i <= 1 - N (unstable side).  -inf for a unit pair."""
    if a.first == a.second:
        return -math.inf
    if a.side == STABLE:
        floor = agreement_floor(a.first, a.second)
        if floor == math.inf:
            raise ValueError("pair is not stably equivalent")
        return int(floor) + 1  # floor = D_max + 1
    depth = agreement_depth(a.first, a.second)
    if depth == -math.inf:
        raise ValueError("pair is not unstably equivalent")
    return 1 - int(depth)  # depth = D_min - 1


@lru_cache(maxsize=None)
def c_first_time(a: GroupoidElement) -> int:
    """First time N >= 0 after which the pair is locally stably (resp.
    unstably) close at scale kappa**-1.

    Stable closed form: the pair agrees on i >= N - 1, so N is two above
    the last disagreement index.  Mirrored on the unstable side.  The
    definitional brute force lives in :func:`c_first_time_bruteforce`.
    """
    return max(int(max(min_splice_time(a), -(10**9))), 0)


def c_first_time_bruteforce(a: GroupoidElement, n_cap: int = 400) -> int:
    """Definitional oracle: scan N and test local-set membership."""
    sgn = 1 if a.side == STABLE else -1
    side = STABLE if a.side == STABLE else UNSTABLE
    for n in range(n_cap):
        x = shift(a.first, sgn * n)
        y = shift(a.second, sgn * n)
        if x == y or local_set_membership(x, y, 1, side):
            return n
    raise AssertionError("first time exceeded the scan cap")


# ---------------------------------------------------------------------------
# base sets (bisections) and holonomy


@dataclass(frozen=True)
class BaseSet:
    """V^s(anchor, kappa**-(radius_exp+1), time) and the unstable mirror.

    The domain disk pins one-sided agreement up to threshold
    radius_exp + 1 with the anchor's source point.  Times and exponents
    can be negative: shift images of base sets stay in this form with all
    parameters translated.
    """

    anchor: GroupoidElement
    radius_exp: int
    time: int

    def __post_init__(self):
        if self.time < min_splice_time(self.anchor):
            raise ValueError("time below the first coherent splice time")
        if self.radius_exp < self.time:
            raise ValueError("radius exponent below the holonomy time")

    @property
    def side(self) -> str:
        return self.anchor.side

    @property
    def threshold(self) -> int:
        return self.radius_exp + 1


def base_set(anchor: GroupoidElement, radius_exp: int, time: Optional[int] = None) -> BaseSet:
    if time is None:
        time = c_first_time(anchor)
    return BaseSet(anchor, radius_exp, time)


def in_domain(v: BaseSet, z: EventuallyPeriodicPoint) -> bool:
    if v.side == STABLE:
        return in_unstable_set(v.anchor.second, z, v.threshold)
    return in_stable_set(v.anchor.second, z, v.threshold)


def holonomy_apply(v: BaseSet, z: EventuallyPeriodicPoint) -> EventuallyPeriodicPoint:
    """Follow the holonomy of the bisection: splice the anchor's range past
    (stable) or future (unstable) onto z."""
    if not in_domain(v, z):
        raise OutsideDomain("point outside the base-set domain disk")
    if v.side == STABLE:
        return splice_at(v.anchor.first, z, v.time)
    return splice_at(z, v.anchor.first, -v.time - 1)


def base_set_membership(v: BaseSet, b: GroupoidElement) -> bool:
    if b.side != v.side:
        return False
    if not in_domain(v, b.second):
        return False
    return holonomy_apply(v, b.second) == b.first


def elements_of(v: BaseSet, sources) -> list:
    """Graph elements (h(z), z) of the bisection over the given source points."""
    out = []
    for z in sources:
        if in_domain(v, z):
            out.append(GroupoidElement(holonomy_apply(v, z), z, v.side))
    return out


# ---------------------------------------------------------------------------
# the two-branch groupoid ultrametric


def _locally_close(x, y, side: str) -> bool:
    """Closed-disk branch condition of the two-branch metric: distance at
    most kappa**-1 together with the bracket fixed point, i.e. one-sided
    agreement through coordinate 0.

    The closed reading (not the open local sets) is what makes the shift
    sandwich kappa**-1 D <= D o Phi**-1 <= D hold globally: with open
    disks, a pair at distance exactly kappa**-1 enters the close branch
    only after shifting and undershoots the lower bound.
    """
    if side == STABLE:
        return agree_upto(y, x, 0)
    return agree_from(y, x, 0)


def units_metric_exponent(x, y, side: str = STABLE) -> Optional[int]:
    """Pull-back metric on the units space: d(x, y) when locally close, else 1."""
    if x == y:
        return None
    if not _locally_close(x, y, side):
        return 0
    return agreement_radius(x, y)


def groupoid_metric_exponent(a: GroupoidElement, b: GroupoidElement) -> Optional[int]:
    """Exponent e with D(a, b) = kappa**-e; None encodes D = 0.

    Branches: 1 on a first-time mismatch, 1 when either coordinate pair
    leaves the kappa**-1 local disks, else the max of the two point
    distances (min of the exponents).
    """
    if a.side != b.side:
        raise SideMismatch("metric needs elements on one side")
    if a == b:
        return None
    if c_first_time(a) != c_first_time(b):
        return 0
    if not (
        _locally_close(a.second, b.second, a.side)
        and _locally_close(a.first, b.first, a.side)
    ):
        return 0
    r1 = agreement_radius(a.first, b.first)
    r2 = agreement_radius(a.second, b.second)
    exps = [r for r in (r1, r2) if r is not None]
    return min(exps)


def groupoid_metric(a: GroupoidElement, b: GroupoidElement, p: MetricParams) -> float:
    return p.value(groupoid_metric_exponent(a, b))
