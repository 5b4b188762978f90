"""Cover-sequence metrization: quasimetric, chain metric, index bookkeeping.

The generic engine turns a sequence of covers into a 2-quasimetric rho
(dyadic values 2**-n) and then into the chain metric D by all-pairs
shortest paths, with the sandwich rho/4 <= D <= rho holding whenever the
covers satisfy the star condition.  The concrete cover system is built
from the groupoid base sets V_n(a) of the self-similar shift model, with
cover levels translated into integer agreement thresholds so that every
membership test is exact.

rho over a finite candidate set of centers is an over-approximation of
the true infimum over all centers; reports carry the candidate count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import InsufficientData
from .groupoid import (
    BaseSet,
    GroupoidElement,
    base_set_membership,
    c_first_time,
    holonomy_apply,
    in_domain,
)
from .sft import STABLE, MetricParams, agreement_depth, agreement_floor

_FUZZ = 1e-9
_DEEP = 10**6  # stands for "member at every finite index"


@dataclass(frozen=True)
class CoverIndexParams:
    """Contraction constant of the ambient metric and ceil(log_lambda 3)."""

    lambda_x: float

    def __post_init__(self):
        if not self.lambda_x > 1.0:
            raise ValueError("lambda must be > 1")

    @property
    def ceil_log3(self) -> int:
        return max(1, math.ceil(math.log(3.0, self.lambda_x) - _FUZZ))

    @property
    def eps_prime_exp(self) -> int:
        # largest realized metric value <= lambda**-1 / 2
        return 2

    @property
    def disk_margin(self) -> int:
        """Threshold offset of the V-set disk radius lambda**-v * eps'/4."""
        return self.eps_prime_exp + math.floor(math.log(4.0, self.lambda_x) + _FUZZ)


def j_index(n_a: int, n: int, cp: CoverIndexParams) -> int:
    """j(a, n) = max(N_a, n) + ceil(log_lambda 3)."""
    return max(n_a, n) + cp.ceil_log3


def k_index(n_a1: int, n: int, cp: CoverIndexParams) -> int:
    """k(a, 1) = 1 and k(a, n+1) = N_{a,1} + n * ceil(log_lambda 3)."""
    if n < 1:
        raise ValueError("cover levels start at 1")
    if n == 1:
        return 1
    return n_a1 + (n - 1) * cp.ceil_log3


def v_set_threshold(n_a: int, v: int, cp: CoverIndexParams) -> int:
    """One-sided agreement threshold of the disk of V_v(a)."""
    return max(n_a, v) + cp.disk_margin


def v_set(a: GroupoidElement, v: int, cp: CoverIndexParams) -> BaseSet:
    """The neighbourhood-base set V_v(a) of the self-similar model."""
    n_a = c_first_time(a)
    time = max(n_a, v)
    return BaseSet(a, v_set_threshold(n_a, v, cp) - 1, time)


def v_set_membership(b: GroupoidElement, a: GroupoidElement, v: int, cp: CoverIndexParams) -> bool:
    return base_set_membership(v_set(a, v, cp), b)


def u_cover_member(
    a: GroupoidElement, c: GroupoidElement, n: int, cp: CoverIndexParams, p: MetricParams = None
) -> bool:
    """Membership of a in U_n(c) = V_{k(c, n)}(c); level 0 is the whole space."""
    if n == 0:
        return True
    n_c1 = max(c_first_time(c), 1)
    return v_set_membership(a, c, k_index(n_c1, n, cp), cp)


def v_index_cap(a: GroupoidElement, c: GroupoidElement, cp: CoverIndexParams) -> int:
    """Largest v with a in V_v(c), -1 if a is in none.

    Membership at V-index v needs one-sided agreement depth of the source
    points >= max(N_c, v) + disk_margin plus the holonomy equation, so the
    cap is depth - disk_margin once the base requirements hold.
    """
    n_c = c_first_time(c)
    if a.side == STABLE:
        d = agreement_depth(a.second, c.second)
    else:
        d = -agreement_floor(a.second, c.second)
    if d == -math.inf:
        return -1
    margin = cp.disk_margin
    cap = _DEEP if d == math.inf else int(d) - margin
    if cap < 0 or (d != math.inf and d < n_c + margin):
        return -1
    bs = v_set(c, min(cap, n_c), cp)
    if not in_domain(bs, a.second):
        return -1
    if holonomy_apply(bs, a.second) != a.first:
        return -1
    return cap


def cover_level_from_cap(cap: int, n_c1: int, cp: CoverIndexParams) -> int:
    """Largest n >= 1 with k(c, n) <= cap, 0 if none."""
    if cap < 1:
        return 0
    if cap >= _DEEP:
        return _DEEP
    extra = (cap - n_c1) // cp.ceil_log3
    return max(1, 1 + extra) if cap >= n_c1 + cp.ceil_log3 else 1


def max_cover_level(a: GroupoidElement, c: GroupoidElement, cp: CoverIndexParams) -> int:
    """Largest n >= 1 with a in U_n(c), 0 if none."""
    return cover_level_from_cap(v_index_cap(a, c, cp), max(c_first_time(c), 1), cp)


def quasimetric_rho(
    a: GroupoidElement,
    b: GroupoidElement,
    candidates: Sequence[GroupoidElement],
    n_max: int,
    cp: CoverIndexParams,
    p: MetricParams = None,
) -> float:
    """inf{2**-n : some U_n-cover member around a candidate holds a and b}.

    Centers range over candidates plus a and b themselves, a documented
    over-approximation of the infimum over the whole groupoid; the level-0
    cover is the full space, so the value never exceeds 1.
    """
    if a == b:
        return 0.0
    best = 0
    for c in list(candidates) + [a, b]:
        lvl = min(max_cover_level(a, c, cp), max_cover_level(b, c, cp))
        best = max(best, lvl)
    return 2.0 ** -min(best, n_max)


def build_vcap_table(elements: Sequence[GroupoidElement], cp: CoverIndexParams) -> np.ndarray:
    """vcap[i, j] = largest V-index v with elements[i] in V_v(elements[j])."""
    m = len(elements)
    vm = np.full((m, m), -1, dtype=np.int64)
    for j, c in enumerate(elements):
        for i, a in enumerate(elements):
            vm[i, j] = v_index_cap(a, c, cp)
    return vm


# ---------------------------------------------------------------------------
# quasimetric tables and the chain metric


@dataclass
class QuasimetricTable:
    """Symmetric table of rho values 2**-n, stored as integer exponents.

    exponents[i, j] = n encodes the value 2**-n; the diagonal is exactly
    zero and carries the sentinel -1.
    """

    point_ids: list
    exponents: np.ndarray
    candidate_count: int = 0

    def __post_init__(self):
        e = np.asarray(self.exponents, dtype=int)
        if e.shape != (len(self.point_ids), len(self.point_ids)):
            raise ValueError("exponent matrix shape mismatch")
        if not np.array_equal(e, e.T):
            raise ValueError("quasimetric table must be symmetric")
        if not all(e[i, i] == -1 for i in range(len(self.point_ids))):
            raise ValueError("diagonal must be zero (sentinel -1)")
        self.exponents = e

    @property
    def size(self) -> int:
        return len(self.point_ids)

    def values(self) -> np.ndarray:
        v = np.power(2.0, -self.exponents.astype(float))
        np.fill_diagonal(v, 0.0)
        return v


def build_quasimetric_table(
    elements: Sequence[GroupoidElement],
    cp: CoverIndexParams,
    n_max: int = 40,
    ids=None,
    vcap: np.ndarray = None,
) -> QuasimetricTable:
    """rho over the finite candidate family, centers restricted to it."""
    m = len(elements)
    if vcap is None:
        vcap = build_vcap_table(elements, cp)
    n_c1 = np.array([max(c_first_time(c), 1) for c in elements])
    levels = np.zeros((m, m), dtype=np.int64)
    for j in range(m):
        for i in range(m):
            levels[i, j] = cover_level_from_cap(int(vcap[i, j]), int(n_c1[j]), cp)
    exps = np.full((m, m), -1, dtype=int)
    for i in range(m):
        best = np.minimum(levels[i], levels).max(axis=1)  # over shared centers
        for j in range(i + 1, m):
            exps[i, j] = exps[j, i] = int(min(max(best[j], 0), n_max))
    if ids is None:
        ids = [str(i) for i in range(m)]
    return QuasimetricTable(list(ids), exps, candidate_count=m)


def chain_metric(t: QuasimetricTable) -> np.ndarray:
    """All-pairs shortest paths over the complete graph weighted by rho.

    Floyd-Warshall; sums of dyadic values are exact in binary floats.
    """
    d = t.values().copy()
    m = t.size
    for k in range(m):
        d = np.minimum(d, d[:, k, None] + d[None, k, :])
    return d


@dataclass
class SandwichReport:
    checked: int = 0
    upper_violations: list = field(default_factory=list)
    lower_violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.upper_violations and not self.lower_violations


def sandwich_check(t: QuasimetricTable, d: np.ndarray) -> SandwichReport:
    """Verify rho/4 <= D <= rho pairwise.

    A lower violation is evidence that rho fails the star condition (the
    sandwich is a theorem only for cover-derived quasimetrics); it is
    reported as data, not raised.
    """
    rho = t.values()
    rep = SandwichReport()
    m = t.size
    for i in range(m):
        for j in range(i + 1, m):
            rep.checked += 1
            if d[i, j] > rho[i, j] + 1e-15:
                rep.upper_violations.append((t.point_ids[i], t.point_ids[j], d[i, j], rho[i, j]))
            if d[i, j] < 0.25 * rho[i, j] - 1e-15:
                rep.lower_violations.append((t.point_ids[i], t.point_ids[j], d[i, j], rho[i, j]))
    return rep


@dataclass
class StarReport:
    triples_checked: int = 0
    witnesses: int = 0
    violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def star_refinement_check(
    elements: Sequence[GroupoidElement],
    cp: CoverIndexParams,
    rng,
    trials: int,
    n_levels: Sequence[int] = (0, 1, 2, 3),
    vcap: np.ndarray = None,
) -> StarReport:
    """Sampled star lemma: whenever V_{j(a,n)}(a) meets V_{j(a,n)}(b) inside
    the sample, every sampled member of V_{j(a,n)}(b) lies in V_n(a)."""
    if vcap is None:
        vcap = build_vcap_table(elements, cp)
    m = len(elements)
    n_first = [c_first_time(e) for e in elements]
    rep = StarReport()
    for _ in range(trials):
        ai = int(rng.integers(m))
        n = int(rng.choice(n_levels))
        j = j_index(n_first[ai], n, cp)
        in_a = vcap[:, ai] >= j
        if not in_a.any():
            rep.triples_checked += 1
            continue
        meets = (vcap[in_a, :] >= j).any(axis=0)  # b with a shared witness
        for bi in np.flatnonzero(meets):
            rep.triples_checked += 1
            rep.witnesses += 1
            members_b = np.flatnonzero(vcap[:, bi] >= j)
            for ei in members_b:
                if vcap[ei, ai] < n:
                    rep.violations.append((ai, int(bi), int(ei), n))
    return rep


@dataclass
class DiameterFit:
    ks: list
    log2_diameters: list
    slope: float
    intercept: float
    predicted_slope: float
    gamma_prime: float  # smallest constant with diam <= 2**(-k/ceil_log3) * gamma'

    @property
    def relative_error(self) -> float:
        return abs(self.slope - self.predicted_slope) / abs(self.predicted_slope)


def diameter_bound_check(
    elements: Sequence[GroupoidElement],
    d: np.ndarray,
    anchors: Sequence[int],
    cp: CoverIndexParams,
    k_range: Sequence[int],
    vcap: np.ndarray = None,
) -> DiameterFit:
    """Fit the decay of the chain-metric diameter of base sets of radius
    lambda**-(N + k) * gamma against k.

    Predicted exponential base is 2**(-1 / ceil(log_lambda 3)), i.e. a
    log2-slope of -1/ceil_log3.
    """
    if vcap is None:
        vcap = build_vcap_table(elements, cp)
    n_first = [c_first_time(e) for e in elements]
    diams = {}
    for k in k_range:
        best = 0.0
        seen = False
        for ci in anchors:
            members = np.flatnonzero(vcap[:, ci] >= n_first[ci] + k)
            for ii in range(len(members)):
                for jj in range(ii + 1, len(members)):
                    seen = True
                    best = max(best, d[members[ii], members[jj]])
        if seen and best > 0.0:
            diams[k] = math.log2(best)
    if len(diams) < 3:
        raise InsufficientData(f"only {len(diams)} usable radius levels")
    ks = sorted(diams)
    ys = [diams[k] for k in ks]
    slope, intercept = np.polyfit(ks, ys, 1)
    gamma = max(2.0 ** (y + k / cp.ceil_log3) for k, y in zip(ks, ys))
    return DiameterFit(ks, ys, float(slope), float(intercept), -1.0 / cp.ceil_log3, gamma)


# ---------------------------------------------------------------------------
# CSV interchange: entries "0", "1", "2^-n"


def table_to_csv(t: QuasimetricTable) -> str:
    lines = [",".join([""] + list(t.point_ids))]
    for i, pid in enumerate(t.point_ids):
        row = [pid]
        for j in range(t.size):
            e = t.exponents[i, j]
            row.append("0" if e == -1 else ("1" if e == 0 else f"2^-{e}"))
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def table_from_csv(text: str) -> QuasimetricTable:
    lines = [ln for ln in text.strip().splitlines() if ln]
    ids = lines[0].split(",")[1:]
    m = len(ids)
    exps = np.full((m, m), -1, dtype=int)
    for i, ln in enumerate(lines[1:]):
        cells = ln.split(",")[1:]
        for j, cell in enumerate(cells):
            if cell == "0":
                exps[i, j] = -1
            elif cell == "1":
                exps[i, j] = 0
            else:
                if not cell.startswith("2^-"):
                    raise ValueError(f"bad table entry {cell!r}")
                exps[i, j] = int(cell[3:])
    return QuasimetricTable(ids, exps)
