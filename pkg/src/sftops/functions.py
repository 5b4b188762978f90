"""Locally constant function algebras and the fundamental representation.

Functions are finite complex combinations of base-set indicators; the
value at an element is the sum of the coefficients of the base sets
containing it, so every evaluation is exact.  The representation acts on
the span of an enumerated homoclinic basis; commutator blocks
R_n = alpha^n(a) b - b alpha^n(a) are assembled exactly by enumerating the
finitely many basis points their columns can touch, and a block is
"trusted" precisely when that enumeration completed within the basis cap.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from .errors import SideMismatch
from .groupoid import (
    BaseSet,
    GroupoidElement,
    base_set_membership,
    holonomy_apply,
    in_domain,
    inverse,
    min_splice_time,
    phi_auto,
    reverse_element,
)
from .sampling import path_to_cycle
from .sft import (
    STABLE,
    UNSTABLE,
    EventuallyPeriodicPoint,
    MetricParams,
    TransitionMatrix,
    _anchor,
    agreement_depth,
    build_point,
    shift,
    splice_at,
)

# ---------------------------------------------------------------------------
# the function class


@dataclass(frozen=True)
class LocallyConstantFunction:
    side: str
    terms: Tuple  # of (BaseSet, complex)

    def __post_init__(self):
        for bs, _ in self.terms:
            if bs.side != self.side:
                raise SideMismatch("term base set on the wrong side")

    @property
    def is_zero(self) -> bool:
        return not self.terms

    def scaled(self, c: complex) -> "LocallyConstantFunction":
        return LocallyConstantFunction(self.side, tuple((bs, c * v) for bs, v in self.terms))


def indicator(bs: BaseSet, coeff: complex = 1.0) -> LocallyConstantFunction:
    return LocallyConstantFunction(bs.side, ((bs, complex(coeff)),))


def zero_function(side: str = STABLE) -> LocallyConstantFunction:
    return LocallyConstantFunction(side, ())


def evaluate(f: LocallyConstantFunction, gamma: GroupoidElement) -> complex:
    """Sum of the coefficients of the base sets containing gamma."""
    if gamma.side != f.side:
        raise SideMismatch("element on the wrong side")
    total = 0.0 + 0.0j
    for bs, coeff in f.terms:
        if base_set_membership(bs, gamma):
            total += coeff
    return total


def lipschitz_constant(f: LocallyConstantFunction, p: MetricParams) -> float:
    """Certified upper bound: an indicator at radius exponent n separates
    from its complement by at least kappa**-(n+1)."""
    return sum(abs(coeff) * p.kappa ** (bs.radius_exp + 1) for bs, coeff in f.terms)


def involution(f: LocallyConstantFunction) -> LocallyConstantFunction:
    """f*(gamma) = conj(f(gamma^-1)): invert the base sets, conjugate."""
    terms = []
    for bs, coeff in f.terms:
        inv = BaseSet(inverse(bs.anchor), bs.radius_exp, bs.time)
        terms.append((inv, coeff.conjugate()))
    return LocallyConstantFunction(f.side, tuple(terms))


def alpha(f: LocallyConstantFunction, k: int) -> LocallyConstantFunction:
    """The shift automorphism, f -> f o Phi^-k on its side.

    A stable base set moves to anchor Phi^k(anchor) with threshold and
    time shallower by k; both deepen by k on the unstable side.
    """
    sgn = 1 if f.side == STABLE else -1
    terms = []
    for bs, coeff in f.terms:
        anchor = phi_auto(bs.anchor, k)
        terms.append((BaseSet(anchor, bs.radius_exp - sgn * k, bs.time - sgn * k), coeff))
    return LocallyConstantFunction(f.side, tuple(terms))


# ---------------------------------------------------------------------------
# profile functions: locally constant functions with full word resolution
#
# A single bisection carries a value that depends on the source's cylinder
# word beyond the domain threshold, through a seeded +-bit per word.  This
# is exactly a finite combination of indicator terms (one per word up to
# the depth cap), stored in compressed form so evaluation is O(depth)
# instead of O(2**depth); materialize_profile recovers the explicit terms.


def _word_bit(seed: str, word) -> int:
    import hashlib

    h = hashlib.sha256(f"{seed}:{','.join(map(str, word))}".encode()).digest()
    return h[0] & 1


@dataclass(frozen=True)
class ProfileFunction:
    """coeff * (1 + sum_m 2**-m * bit(word_m(source))) on one bisection graph.

    word_m(z) is the cylinder word of the source z over the m coordinates
    beyond the domain threshold (forward on the stable side, backward on
    the unstable side).
    """

    support: BaseSet
    depth: int
    seed: str
    coeff: complex = 1.0 + 0.0j

    @property
    def side(self) -> str:
        return self.support.side

    @property
    def is_zero(self) -> bool:
        return self.coeff == 0

    def profile_value(self, z: EventuallyPeriodicPoint) -> complex:
        sgn = 1 if self.side == STABLE else -1
        t = self.support.threshold
        total = 1.0
        word = []
        for mm in range(1, self.depth + 1):
            word.append(z.at(sgn * (t + mm)))
            total += 2.0**-mm * _word_bit(self.seed, word)
        return self.coeff * total


def evaluate_profile(f: ProfileFunction, gamma: GroupoidElement) -> complex:
    if gamma.side != f.side:
        raise SideMismatch("element on the wrong side")
    if not base_set_membership(f.support, gamma):
        return 0.0 + 0.0j
    return f.profile_value(gamma.second)


def alpha_profile(f: ProfileFunction, k: int) -> ProfileFunction:
    sgn = 1 if f.side == STABLE else -1
    bs = f.support
    moved = BaseSet(phi_auto(bs.anchor, k), bs.radius_exp - sgn * k, bs.time - sgn * k)
    return ProfileFunction(moved, f.depth, f.seed, f.coeff)


def involution_profile(f: ProfileFunction) -> ProfileFunction:
    # the holonomy is the identity beyond the splice time, so the range
    # and source carry the same cylinder word and the profile transfers
    bs = f.support
    inv = BaseSet(inverse(bs.anchor), bs.radius_exp, bs.time)
    return ProfileFunction(inv, f.depth, f.seed, f.coeff.conjugate())


def materialize_profile(f: ProfileFunction, m: TransitionMatrix) -> LocallyConstantFunction:
    """Explicit indicator terms of a profile function (small depths only)."""
    if f.depth > 12:
        raise ValueError("refusing to materialize a deep profile")
    sgn = 1 if f.side == STABLE else -1
    bs = f.support
    terms = [(bs, f.coeff)]
    t = bs.threshold
    anchor_z = bs.anchor.second
    frontier = [()]
    for mm in range(1, f.depth + 1):
        new = []
        for word in frontier:
            prev = anchor_z.at(sgn * (t + mm - 1)) if not word else word[-1]
            for s in (m.successors(prev) if sgn == 1 else m.predecessors(prev)):
                w2 = word + (s,)
                new.append(w2)
                if _word_bit(f.seed, list(w2)):
                    z = _write_word(anchor_z, t, w2, sgn, m)
                    sub = GroupoidElement(
                        holonomy_apply(bs, z), z, f.side
                    )
                    terms.append(
                        (BaseSet(sub, bs.radius_exp + mm, bs.time), f.coeff * 2.0**-mm)
                    )
        frontier = new
    return LocallyConstantFunction(f.side, tuple(terms))


def _write_word(base, t, word, sgn, m):
    """A point matching base through threshold t (signed side) and carrying
    the word on the next len(word) coordinates."""
    if sgn == 1:
        positions = range(t + 1, t + len(word) + 1)
    else:
        positions = range(-t - 1, -t - len(word) - 1, -1)
    for pos, s in zip(positions, word):
        base = _set_symbol(base, pos, s)
    return base


def _set_symbol(pt, pos, s):
    lo = min(pt.core_start, pos)
    hi = max(pt.core_end, pos + 1)
    core = tuple(pt.at(i) if i != pos else s for i in range(lo, hi))
    return build_point(
        _anchor(pt.left_cycle, pt.core_start, lo),
        core,
        _anchor(pt.right_cycle, pt.core_end, hi),
        lo,
    )


def reverse_base_set(bs: BaseSet) -> BaseSet:
    return BaseSet(reverse_element(bs.anchor), bs.radius_exp, bs.time)


def reverse_function(f: LocallyConstantFunction) -> LocallyConstantFunction:
    other = UNSTABLE if f.side == STABLE else STABLE
    return LocallyConstantFunction(
        other, tuple((reverse_base_set(bs), c) for bs, c in f.terms)
    )


@dataclass(frozen=True)
class FunctionSum:
    """Pointwise sum of function pieces (indicator combinations and
    profiles) on one side."""

    side: str
    parts: Tuple

    def __post_init__(self):
        for part in self.parts:
            if part.side != self.side:
                raise SideMismatch("summand on the wrong side")

    @property
    def is_zero(self) -> bool:
        return all(getattr(p, "is_zero", False) for p in self.parts)


# generic entry points over the function representations


def evaluate_any(f, gamma: GroupoidElement) -> complex:
    if isinstance(f, FunctionSum):
        return sum((evaluate_any(p, gamma) for p in f.parts), 0.0 + 0.0j)
    if isinstance(f, ProfileFunction):
        return evaluate_profile(f, gamma)
    return evaluate(f, gamma)


def alpha_any(f, k: int):
    if isinstance(f, FunctionSum):
        return FunctionSum(f.side, tuple(alpha_any(p, k) for p in f.parts))
    if isinstance(f, ProfileFunction):
        return alpha_profile(f, k)
    return alpha(f, k)


def involution_any(f):
    if isinstance(f, FunctionSum):
        return FunctionSum(f.side, tuple(involution_any(p) for p in f.parts))
    if isinstance(f, ProfileFunction):
        return involution_profile(f)
    return involution(f)


def lipschitz_constant_any(f, p: MetricParams) -> float:
    if isinstance(f, FunctionSum):
        return sum(lipschitz_constant_any(part, p) for part in f.parts)
    if isinstance(f, ProfileFunction):
        base = abs(f.coeff) * p.kappa ** (f.support.radius_exp + 1)
        steps = sum(
            2.0**-mm * p.kappa ** (f.support.radius_exp + 1 + mm)
            for mm in range(1, f.depth + 1)
        )
        return base + abs(f.coeff) * steps
    return lipschitz_constant(f, p)


# ---------------------------------------------------------------------------
# base-set composition and the convolution product


def _extend_pattern(pt: EventuallyPeriodicPoint, lo: int, hi: int, m: TransitionMatrix):
    """Points matching pt through index lo, with every allowed word on
    (lo, hi] and an allowed tail falling back onto pt's right cycle."""
    frontier = [(pt.at(lo),)]
    for _ in range(lo + 1, hi + 1):
        frontier = [w + (s,) for w in frontier for s in m.successors(w[-1])]
    out = []
    for w in frontier:
        word = w[1:]
        tail = path_to_cycle(m, word[-1] if word else pt.at(lo), pt.right_cycle)
        rot = pt.right_cycle
        while rot[0] != tail[-1]:
            rot = rot[1:] + rot[:1]
        start = lo + 1
        core = word + tail[1:]
        left = _anchor(pt.left_cycle, pt.core_start, min(pt.core_start, start))
        prefix = tuple(pt.at(i) for i in range(min(pt.core_start, start), start))
        out.append(
            build_point(
                left,
                prefix + core,
                rot[1:] + rot[:1],
                min(pt.core_start, start),
            )
        )
    return out


def _compose_stable(v: BaseSet, w: BaseSet, m: TransitionMatrix) -> List[BaseSet]:
    """Base sets whose union is the product bisection V.W on the stable side.

    Domain of the product: y with y in dom(W) and h_W(y) in dom(V), which
    pins y to e2 through T_w and to c2 on (N_w, T_v]; the image anchor must
    match c2 up to min(N_w, T_v).  The result is one base set at depth
    max(T_v, T_w) except when the composed anchor's first time exceeds
    max(N_v, N_w); then the domain splits into slightly deeper subdisks.
    """
    c2 = v.anchor.second
    e1, e2 = w.anchor.first, w.anchor.second
    tv, tw, nv, nw = v.threshold, w.threshold, v.time, w.time
    # image-anchor consistency on i <= min(N_w, T_v)
    if agreement_depth(e1, c2) < min(nw, tv):
        return []
    # the two source constraints must agree on the overlap (N_w, min(T_w, T_v)]
    if any(e2.at(i) != c2.at(i) for i in range(nw + 1, min(tw, tv) + 1)):
        return []
    if tv > tw:
        if not m.allowed(e2.at(tw), c2.at(tw + 1)):
            return []
        center = splice_at(e2, c2, tw)
        depth = tv
    else:
        center = e2
        depth = tw
    if not in_domain(w, center):
        return []
    mid = holonomy_apply(w, center)
    if not in_domain(v, mid):
        return []
    anchor = GroupoidElement(holonomy_apply(v, mid), center, STABLE)
    time = max(nv, nw, int(max(min_splice_time(anchor), -(10**9))))
    if depth - 1 >= time:
        return [BaseSet(anchor, depth - 1, time)]
    # corner case: the splice only becomes coherent deeper than the disk;
    # split the domain into one-symbol-richer subdisks
    out = []
    for sub_center in _extend_pattern(center, depth, time + 1, m):
        if not in_domain(w, sub_center):
            continue
        sub_mid = holonomy_apply(w, sub_center)
        if not in_domain(v, sub_mid):
            continue
        sub_anchor = GroupoidElement(holonomy_apply(v, sub_mid), sub_center, STABLE)
        out.append(BaseSet(sub_anchor, time, time))
    return out


def compose_base_sets(v: BaseSet, w: BaseSet, m: TransitionMatrix) -> List[BaseSet]:
    if v.side != w.side:
        raise SideMismatch("cannot compose base sets across sides")
    if v.side == STABLE:
        return _compose_stable(v, w, m)
    rev = _compose_stable(reverse_base_set(v), reverse_base_set(w), m.transpose())
    return [reverse_base_set(bs) for bs in rev]


def convolve(
    f: LocallyConstantFunction, g: LocallyConstantFunction, m: TransitionMatrix
) -> LocallyConstantFunction:
    """Convolution product, computed termwise through bisection composition."""
    if f.side != g.side:
        raise SideMismatch("cannot convolve across sides")
    terms = []
    for bf, cf in f.terms:
        for bg, cg in g.terms:
            for composed in compose_base_sets(bf, bg, m):
                terms.append((composed, cf * cg))
    return LocallyConstantFunction(f.side, tuple(terms))


def convolve_bruteforce(
    f: LocallyConstantFunction, g: LocallyConstantFunction, gamma: GroupoidElement
) -> complex:
    """Oracle for the convolution value at gamma: sum over factorizations
    gamma = alpha . beta with alpha in supp(f), beta in supp(g)."""
    total = 0.0 + 0.0j
    mids = set()
    for bs, _ in f.terms:
        # alpha = (gamma.first, z) forces z = h_bs^{-1}(gamma.first)
        inv = BaseSet(inverse(bs.anchor), bs.radius_exp, bs.time)
        if in_domain(inv, gamma.first):
            mids.add(holonomy_apply(inv, gamma.first))
    for z in mids:
        a = GroupoidElement(gamma.first, z, gamma.side)
        b = GroupoidElement(z, gamma.second, gamma.side)
        total += evaluate(f, a) * evaluate(g, b)
    return total


# ---------------------------------------------------------------------------
# basis registry and the fundamental representation


@dataclass
class BasisRegistry:
    """Ordered registry of canonical homoclinic points with a growth cap."""

    cap: int = 20000
    points: List[EventuallyPeriodicPoint] = field(default_factory=list)
    index: Dict[EventuallyPeriodicPoint, int] = field(default_factory=dict)
    frozen: bool = False
    truncation_events: int = 0

    @classmethod
    def seeded(cls, pts, cap: int = 20000) -> "BasisRegistry":
        reg = cls(cap=cap)
        for x in pts:
            reg.add(x)
        return reg

    def __len__(self) -> int:
        return len(self.points)

    def freeze(self) -> None:
        self.frozen = True

    def lookup(self, x) -> Optional[int]:
        return self.index.get(x)

    def add(self, x) -> Optional[int]:
        """Index of x, growing the registry if allowed; None on truncation."""
        i = self.index.get(x)
        if i is not None:
            return i
        if self.frozen or len(self.points) >= self.cap:
            self.truncation_events += 1
            return None
        self.points.append(x)
        self.index[x] = len(self.points) - 1
        return len(self.points) - 1


@dataclass
class SparseOperator:
    """Complex matrix with finitely many entries, indexed by the registry."""

    dim: int
    entries: Dict[Tuple[int, int], complex] = field(default_factory=dict)

    def add(self, i: int, j: int, v: complex) -> None:
        if i >= self.dim or j >= self.dim:
            raise IndexError("entry outside the declared dimension")
        cur = self.entries.get((i, j), 0.0 + 0.0j) + v
        if cur == 0:
            self.entries.pop((i, j), None)
        else:
            self.entries[(i, j)] = cur

    @property
    def nnz(self) -> int:
        return len(self.entries)

    def is_zero(self) -> bool:
        return not self.entries

    def dagger(self) -> "SparseOperator":
        out = SparseOperator(self.dim)
        for (i, j), v in self.entries.items():
            out.entries[(j, i)] = v.conjugate()
        return out

    def __add__(self, other: "SparseOperator") -> "SparseOperator":
        out = SparseOperator(max(self.dim, other.dim), dict(self.entries))
        for (i, j), v in other.entries.items():
            out.add(i, j, v)
        return out

    def __sub__(self, other: "SparseOperator") -> "SparseOperator":
        out = SparseOperator(max(self.dim, other.dim), dict(self.entries))
        for (i, j), v in other.entries.items():
            out.add(i, j, -v)
        return out

    def __mul__(self, scalar: complex) -> "SparseOperator":
        out = SparseOperator(self.dim)
        for k, v in self.entries.items():
            out.entries[k] = scalar * v
        return out

    def matmul(self, other: "SparseOperator") -> "SparseOperator":
        by_row = {}
        for (i, j), v in other.entries.items():
            by_row.setdefault(i, []).append((j, v))
        out = SparseOperator(max(self.dim, other.dim))
        for (i, k), u in self.entries.items():
            for j, v in by_row.get(k, ()):
                out.add(i, j, u * v)
        return out

    def to_dense(self, limit: int = 6000) -> np.ndarray:
        if self.dim > limit:
            raise MemoryError(f"refusing to densify dim {self.dim}")
        a = np.zeros((self.dim, self.dim), dtype=complex)
        for (i, j), v in self.entries.items():
            a[i, j] = v
        return a

    def rank(self, floor: float = 1e-14) -> int:
        from .schatten import singular_values

        spec = singular_values(self)
        if len(spec.values) == 0:
            return 0
        top = spec.values[0]
        return int(np.sum(spec.values > floor * top))


def apply_to_point(
    f, x: EventuallyPeriodicPoint
) -> Dict[EventuallyPeriodicPoint, complex]:
    """The column of the fundamental representation at delta_x, as points.

    A term supported on a bisection sends delta_x to value * delta_{h(x)}
    when x lies in the domain disk, else to zero.
    """
    out: Dict[EventuallyPeriodicPoint, complex] = {}
    if isinstance(f, FunctionSum):
        for part in f.parts:
            for y, v in apply_to_point(part, x).items():
                cur = out.get(y, 0.0 + 0.0j) + v
                if cur == 0:
                    out.pop(y, None)
                else:
                    out[y] = cur
        return out
    if isinstance(f, ProfileFunction):
        if in_domain(f.support, x):
            out[holonomy_apply(f.support, x)] = f.profile_value(x)
        return out
    for bs, coeff in f.terms:
        if in_domain(bs, x):
            y = holonomy_apply(bs, x)
            cur = out.get(y, 0.0 + 0.0j) + coeff
            if cur == 0:
                out.pop(y, None)
            else:
                out[y] = cur
    return out


def apply_to_column(
    f: LocallyConstantFunction, col: Dict[EventuallyPeriodicPoint, complex]
) -> Dict[EventuallyPeriodicPoint, complex]:
    out: Dict[EventuallyPeriodicPoint, complex] = {}
    for x, weight in col.items():
        for y, v in apply_to_point(f, x).items():
            cur = out.get(y, 0.0 + 0.0j) + weight * v
            if cur == 0:
                out.pop(y, None)
            else:
                out[y] = cur
    return out


def represent(f: LocallyConstantFunction, reg: BasisRegistry) -> SparseOperator:
    """Matrix of the fundamental representation over the current registry.

    Iterates over a snapshot of the registry as columns; image points not
    yet registered are added (or counted as truncation events when the
    registry is frozen or full).
    """
    snapshot = list(reg.points)
    op = SparseOperator(reg.cap)
    for j, x in enumerate(snapshot):
        for y, v in apply_to_point(f, x).items():
            i = reg.add(y)
            if i is None:
                continue
            op.add(i, j, v)
    op.dim = max(op.dim, len(reg))
    return op


def unitary_u(reg: BasisRegistry) -> SparseOperator:
    """Permutation matrix of u delta_x = delta_{shift(x, 1)} on the registry."""
    snapshot = list(reg.points)
    op = SparseOperator(reg.cap)
    for j, x in enumerate(snapshot):
        i = reg.add(shift(x, 1))
        if i is not None:
            op.add(i, j, 1.0)
    op.dim = max(op.dim, len(reg))
    return op


# ---------------------------------------------------------------------------
# commutator blocks


@dataclass
class BlockOperator:
    """Z-indexed block diagonal family over a shared basis registry."""

    window: Tuple[int, int]
    blocks: Dict[int, SparseOperator]
    untrusted: Dict[int, str]
    basis: BasisRegistry

    def trusted_blocks(self) -> Dict[int, SparseOperator]:
        return {n: b for n, b in self.blocks.items() if n not in self.untrusted}


def _anchor_groups(f):
    """Terms grouped by source anchor point: (weakest threshold, deepest time)."""
    if isinstance(f, FunctionSum):
        groups = {}
        for part in f.parts:
            for key, (thr, tmax) in _anchor_groups(part).items():
                cur_thr, cur_tmax = groups.get(key, (thr, tmax))
                groups[key] = (min(cur_thr, thr), max(cur_tmax, tmax))
        return groups
    if isinstance(f, ProfileFunction):
        bs = f.support
        return {bs.anchor.second: (bs.threshold, bs.time)}
    groups = {}
    for bs, _ in f.terms:
        key = bs.anchor.second
        thr, tmax = groups.get(key, (bs.threshold, bs.time))
        groups[key] = (min(thr, bs.threshold), max(tmax, bs.time))
    return groups


def _bridge_points(
    m: TransitionMatrix,
    past: EventuallyPeriodicPoint,
    past_hi: int,
    future: EventuallyPeriodicPoint,
    future_lo: int,
) -> List[EventuallyPeriodicPoint]:
    """Points matching `past` through past_hi and `future` from future_lo on.

    When the pinned regions meet, the splice is unique (or impossible);
    otherwise every allowed bridging word over the free window contributes.
    """
    if past_hi >= future_lo - 1:
        if not m.allowed(past.at(future_lo - 1), future.at(future_lo)):
            return []
        cand = splice_at(past, future, future_lo - 1)
        if not all(cand.at(i) == past.at(i) for i in range(future_lo, past_hi + 1)):
            return []
        return [cand]
    words = [(past.at(past_hi),)]
    for _ in range(past_hi + 1, future_lo):
        words = [w + (s,) for w in words for s in m.successors(w[-1])]
    out = []
    for w in words:
        if not m.allowed(w[-1], future.at(future_lo)):
            continue
        mid_tail = splice_at(_word_point(past, w, past_hi), future, future_lo - 1)
        out.append(mid_tail)
    return out


def _word_point(past, word, past_hi):
    """`past` with word[1:] written on (past_hi, past_hi + len - 1]."""
    lo = min(past.core_start, past_hi)
    prefix = tuple(past.at(i) for i in range(lo, past_hi))
    return build_point(
        _anchor(past.left_cycle, past.core_start, lo),
        prefix + word,
        past.right_cycle,
        lo,
    )


def commutator_column_support(
    a_n: LocallyConstantFunction,
    b: LocallyConstantFunction,
    m: TransitionMatrix,
) -> Optional[List[EventuallyPeriodicPoint]]:
    """Candidate basis points where either composition of a_n and b acts.

    a_n is the already-shifted stable function, b the unstable one.  Both
    orders pin a column's past to a stable-term source pattern and its
    future to an unstable-term source pattern, up to anchor-consistency
    conditions; the free window in between is enumerated exactly.
    """
    if a_n.side != STABLE or b.side != UNSTABLE:
        raise SideMismatch("need a stable and an unstable factor")
    cands: Dict[EventuallyPeriodicPoint, bool] = {}
    for s_pat, u_pat, past_hi, future_lo in _support_windows(a_n, b):
        for x in _bridge_points(m, s_pat, past_hi, u_pat, future_lo):
            cands[x] = True
    return sorted(cands, key=EventuallyPeriodicPoint.sort_key)


def _support_windows(a_n: LocallyConstantFunction, b: LocallyConstantFunction):
    """Free-window specs covering the columns of both composition orders.

    Order alpha^n(a).b pins a column's future to the unstable source
    pattern from -T_u and its past (through the unstable splice) to the
    stable source pattern below min(T_s, -N_u - 1); order b.alpha^n(a)
    pins the past directly below T_s and the future (through the stable
    splice) above max(-T_u, N_s + 1).  Weakest pins give safe supersets.
    """
    out = []
    for s_pat, (s_thr, s_tmax) in _anchor_groups(a_n).items():
        for u_pat, (u_thr, u_tmax) in _anchor_groups(b).items():
            out.append((s_pat, u_pat, min(s_thr, -u_tmax - 1), -u_thr))
            out.append((s_pat, u_pat, s_thr, max(-u_thr, s_tmax + 1)))
    return out


def estimate_column_count(
    a_n: LocallyConstantFunction, b: LocallyConstantFunction, m: TransitionMatrix
) -> int:
    """Upper bound on the support enumeration size, via path counting."""
    arr = np.array(m.entries, dtype=object)
    total = 0
    for s_pat, u_pat, past_hi, future_lo in _support_windows(a_n, b):
        gap = future_lo - past_hi
        if gap <= 1:
            total += 1
            continue
        power = np.linalg.matrix_power(arr, gap)
        total += int(power[s_pat.at(past_hi), u_pat.at(future_lo)])
    return total


def commutator_blocks(
    a: LocallyConstantFunction,
    b: LocallyConstantFunction,
    window: Tuple[int, int],
    reg: BasisRegistry,
    m: TransitionMatrix,
    mixed: bool = False,
) -> BlockOperator:
    """Exact blocks R_n = alpha^n(a) b - b alpha^n(a) for n in the window.

    With mixed=True the unstable factor is alpha_u^{-n}(b) instead of b.
    Each block's support columns are enumerated from the term patterns; a
    block whose enumeration would blow the registry cap is flagged
    untrusted and left empty.
    """
    if a.side != STABLE or b.side != UNSTABLE:
        raise SideMismatch("commutator needs a stable and an unstable function")
    n_min, n_max = window
    blocks: Dict[int, SparseOperator] = {}
    untrusted: Dict[int, str] = {}
    for n in range(n_min, n_max + 1):
        a_n = alpha_any(a, n)
        b_n = alpha_any(b, -n) if mixed else b
        est = estimate_column_count(a_n, b_n, m)
        room = reg.cap - len(reg)
        if est > room:
            untrusted[n] = f"support estimate {est} exceeds remaining capacity {room}"
            blocks[n] = SparseOperator(reg.cap)
            continue
        cols = commutator_column_support(a_n, b_n, m)
        op = SparseOperator(reg.cap)
        truncated = False
        for x in cols:
            fwd = apply_to_column(a_n, apply_to_point(b_n, x))
            bwd = apply_to_column(b_n, apply_to_point(a_n, x))
            col: Dict[EventuallyPeriodicPoint, complex] = dict(fwd)
            for y, v in bwd.items():
                cur = col.get(y, 0.0 + 0.0j) - v
                if cur == 0:
                    col.pop(y, None)
                else:
                    col[y] = cur
            if not col:
                continue
            j = reg.add(x)
            if j is None:
                truncated = True
                continue
            for y, v in col.items():
                i = reg.add(y)
                if i is None:
                    truncated = True
                    continue
                op.add(i, j, v)
        op.dim = max(op.dim, len(reg))
        blocks[n] = op
        if truncated:
            untrusted[n] = "registry cap hit during assembly"
    for op in blocks.values():
        op.dim = max(op.dim, len(reg))
    return BlockOperator((n_min, n_max), blocks, untrusted, reg)


# ---------------------------------------------------------------------------
# stable/unstable disk intersection counting


def intersection_count(
    m: TransitionMatrix,
    unstable_center: EventuallyPeriodicPoint,
    unstable_depth: int,
    stable_center: EventuallyPeriodicPoint,
    stable_depth: int,
    k: int,
) -> int:
    """Exact size of shift^k(B) intersect C for an unstable disk B (points
    agreeing with the center up to +depth) and a stable disk C (agreeing
    from -depth on).

    A point of the intersection is pinned outside a free window; the count
    is the number of allowed bridging words, a transition-matrix power.
    """
    past_hi = unstable_depth - k  # shifted unstable constraint
    future_lo = -stable_depth
    shifted = shift(unstable_center, k)
    if past_hi >= future_lo:
        # overlap: the two patterns must agree there; count is 0 or 1
        agree = all(
            shifted.at(i) == stable_center.at(i) for i in range(future_lo, past_hi + 1)
        )
        return 1 if agree else 0
    arr = np.array(m.entries, dtype=object)
    gap = future_lo - past_hi
    power = np.linalg.matrix_power(arr, gap)
    return int(power[shifted.at(past_hi), stable_center.at(future_lo)])


def intersection_points(
    m: TransitionMatrix,
    unstable_center: EventuallyPeriodicPoint,
    unstable_depth: int,
    stable_center: EventuallyPeriodicPoint,
    stable_depth: int,
    k: int,
) -> List[EventuallyPeriodicPoint]:
    """Enumeration oracle for :func:`intersection_count`."""
    shifted = shift(unstable_center, k)
    return _bridge_points(m, shifted, unstable_depth - k, stable_center, -stable_depth)
