"""Inflated representations, Fredholm-module constructors, calculus checks.

The two commuting-modulo-compacts representations act on basis x window
blocks; products and commutators are assembled blockwise and certified on
interior blocks only (window truncation clips one column per shift power
at each edge).  The holomorphic-calculus lab checks the resolvent
commutator identity, trapezoid contour calculus and the corner-calculus
identity on small dense matrices.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from .errors import (
    ContourHitsSpectrum,
    NotAProjection,
    NotCornerUnitary,
    SingularResolvent,
)
from .functions import (
    BasisRegistry,
    SparseOperator,
    alpha_any,
    represent,
    unitary_u,
)
from .schatten import (
    SingularSpectrum,
    schatten_norm,
    singular_values,
    summability_verdict,
)

# ---------------------------------------------------------------------------
# inflated operators on basis x window


@dataclass
class InflatedOperator:
    """Block matrix over (basis index, window slot) with sparse blocks."""

    window: Tuple[int, int]
    basis_dim: int
    blocks: Dict[Tuple[int, int], SparseOperator] = field(default_factory=dict)

    def slots(self):
        return range(self.window[0], self.window[1] + 1)

    def block(self, r: int, c: int) -> Optional[SparseOperator]:
        return self.blocks.get((r, c))

    def add_block(self, r: int, c: int, op: SparseOperator) -> None:
        if op.is_zero():
            return
        if (r, c) in self.blocks:
            self.blocks[(r, c)] = self.blocks[(r, c)] + op
        else:
            self.blocks[(r, c)] = op

    def matmul(self, other: "InflatedOperator") -> "InflatedOperator":
        out = InflatedOperator(self.window, max(self.basis_dim, other.basis_dim))
        by_row: Dict[int, list] = {}
        for (r, c), op in other.blocks.items():
            by_row.setdefault(r, []).append((c, op))
        for (r, k), left in self.blocks.items():
            for c, right in by_row.get(k, ()):
                out.add_block(r, c, left.matmul(right))
        return out

    def __sub__(self, other: "InflatedOperator") -> "InflatedOperator":
        out = InflatedOperator(self.window, max(self.basis_dim, other.basis_dim))
        for key, op in self.blocks.items():
            out.blocks[key] = op
        for (r, c), op in other.blocks.items():
            cur = out.blocks.get((r, c))
            res = (cur - op) if cur is not None else (op * (-1.0))
            if res.is_zero():
                out.blocks.pop((r, c), None)
            else:
                out.blocks[(r, c)] = res
        return out

    def interior(self, margin: int) -> "InflatedOperator":
        lo, hi = self.window[0] + margin, self.window[1] - margin
        out = InflatedOperator((lo, hi), self.basis_dim)
        for (r, c), op in self.blocks.items():
            if lo <= r <= hi and lo <= c <= hi:
                out.blocks[(r, c)] = op
        return out

    def to_sparse(self) -> SparseOperator:
        """One flat sparse matrix on basis_dim * window_width indices.

        The stride is re-derived from the entries so that registry growth
        after construction cannot alias flat indices across blocks.
        """
        lo, hi = self.window
        width = hi - lo + 1
        dim = self.basis_dim
        for op in self.blocks.values():
            for i, j in op.entries:
                dim = max(dim, i + 1, j + 1)
        flat = SparseOperator(dim * width)
        for (r, c), op in self.blocks.items():
            ro, co = (r - lo) * dim, (c - lo) * dim
            for (i, j), v in op.entries.items():
                flat.add(ro + i, co + j, v)
        return flat

    def spectrum(self) -> SingularSpectrum:
        return singular_values(self.to_sparse(), source="inflated")


def _identity(dim: int, size: int) -> SparseOperator:
    op = SparseOperator(dim)
    for i in range(size):
        op.add(i, i, 1.0)
    return op


def inflate_stable(
    f, j: int, window: Tuple[int, int], reg: BasisRegistry
) -> InflatedOperator:
    """rho_s-bar of f u**j: block (n, n+j) carries alpha**n(f), or the
    identity when f is None (a bare shift power)."""
    lo, hi = window
    out = InflatedOperator(window, len(reg))
    size = len(reg)
    for n in range(lo, hi + 1):
        if not lo <= n + j <= hi:
            continue
        if f is None:
            out.blocks[(n, n + j)] = _identity(reg.cap, size)
        else:
            out.blocks[(n, n + j)] = represent(alpha_any(f, n), reg)
    return out


def inflate_unstable(
    g, jp: int, window: Tuple[int, int], reg: BasisRegistry, u_mat: Optional[SparseOperator] = None
) -> InflatedOperator:
    """rho_u-bar of g u**j': block (m + j', m) carries g u**j' on the basis."""
    lo, hi = window
    out = InflatedOperator(window, len(reg))
    if u_mat is None:
        u_mat = unitary_u(reg)
    u_pow = _identity(reg.cap, len(reg))
    for _ in range(abs(jp)):
        u_pow = u_pow.matmul(u_mat if jp > 0 else u_mat.dagger())
    if g is None:
        base = u_pow
    else:
        base = represent(g, reg).matmul(u_pow)
    for m_slot in range(lo, hi + 1):
        if not lo <= m_slot + jp <= hi:
            continue
        out.blocks[(m_slot + jp, m_slot)] = base
    return out


@dataclass
class KpwCommutator:
    matrix: InflatedOperator
    interior_window: Tuple[int, int]
    spectrum: SingularSpectrum
    factorization_residual: float
    excluded_blocks: List[int]


def kpw_commutator(
    a, j: int, b, jp: int, window: Tuple[int, int], reg: BasisRegistry
) -> KpwCommutator:
    """Interior part of [rho_s(a u^j), rho_u(b u^j')], with its spectrum.

    Checks the factorization against [rho_s(a), rho_u(b)] carried by the
    shift unitaries: the two spectra must agree within 1e-10 blockwise.
    """
    margin = max(abs(j), abs(jp)) + 1
    u_mat = unitary_u(reg)
    big_a = inflate_stable(a, j, window, reg)
    big_b = inflate_unstable(b, jp, window, reg, u_mat=u_mat)
    comm = (big_a.matmul(big_b) - big_b.matmul(big_a)).interior(margin)
    base_a = inflate_stable(a, 0, window, reg)
    base_b = inflate_unstable(b, 0, window, reg, u_mat=u_mat)
    base = (base_a.matmul(base_b) - base_b.matmul(base_a)).interior(margin)
    spec = comm.spectrum()
    base_spec = base.spectrum()
    k = min(len(spec.values), len(base_spec.values))
    if k:
        resid = float(np.max(np.abs(spec.values[:k] - base_spec.values[:k])))
    else:
        resid = 0.0
    tail = max(
        float(spec.values[k:].max()) if len(spec.values) > k else 0.0,
        float(base_spec.values[k:].max()) if len(base_spec.values) > k else 0.0,
    )
    resid = max(resid, tail)
    lo, hi = window
    excluded = [n for n in range(lo, hi + 1) if not lo + margin <= n <= hi - margin]
    return KpwCommutator(comm, (lo + margin, hi - margin), spec, resid, excluded)


# ---------------------------------------------------------------------------
# Fredholm modules


@dataclass
class FredholmModule:
    parity: str
    dim: int
    rep: Callable[[object], np.ndarray]
    f_op: np.ndarray
    grading: Optional[np.ndarray] = None


def make_odd_module(e: np.ndarray, rep_b: Callable[[object], np.ndarray]) -> FredholmModule:
    """Odd module (H, rho_B, 2e - 1) from a projection in the other image."""
    e = np.asarray(e, dtype=complex)
    if np.linalg.norm(e @ e - e) > 1e-12 * max(1.0, np.linalg.norm(e)):
        raise NotAProjection("e**2 != e")
    if np.linalg.norm(e.conj().T - e) > 1e-12 * max(1.0, np.linalg.norm(e)):
        raise NotAProjection("e not self-adjoint")
    f_op = 2.0 * e - np.eye(e.shape[0])
    return FredholmModule("odd", e.shape[0], rep_b, f_op)


def make_even_module(
    v: np.ndarray, p_proj: np.ndarray, rep_b: Callable[[object], np.ndarray], trivial: bool = False
) -> FredholmModule:
    """Balanced even module with off-diagonal F = v + 1 - p on the corner."""
    v = np.asarray(v, dtype=complex)
    p_proj = np.asarray(p_proj, dtype=complex)
    if trivial:
        f_op = np.eye(v.shape[0], dtype=complex)
    else:
        scale = max(1.0, np.linalg.norm(p_proj))
        if np.linalg.norm(v.conj().T @ v - p_proj) > 1e-12 * scale:
            raise NotCornerUnitary("v*v != p")
        if np.linalg.norm(v @ v.conj().T - p_proj) > 1e-12 * scale:
            raise NotCornerUnitary("vv* != p")
        f_op = v + np.eye(v.shape[0]) - p_proj
    dim = v.shape[0]

    def rep2(x):
        blk = rep_b(x)
        out = np.zeros((2 * dim, 2 * dim), dtype=complex)
        out[:dim, :dim] = blk
        out[dim:, dim:] = blk
        return out

    grading = np.block(
        [[np.eye(dim), np.zeros((dim, dim))], [np.zeros((dim, dim)), -np.eye(dim)]]
    )
    big_f = np.zeros((2 * dim, 2 * dim), dtype=complex)
    big_f[:dim, dim:] = f_op.conj().T
    big_f[dim:, :dim] = f_op
    return FredholmModule("even", 2 * dim, rep2, big_f, grading)


def module_summability_row(module: FredholmModule, x, p: float) -> dict:
    """The three summability quantities of the module at one algebra element."""
    rho_x = module.rep(x)
    f_op = module.f_op
    q1 = rho_x @ (f_op.conj().T - f_op)
    q2 = rho_x @ (f_op @ f_op - np.eye(f_op.shape[0]))
    q3 = rho_x @ f_op - f_op @ rho_x
    rows = {}
    for name, mat in (("rho(F*-F)", q1), ("rho(F^2-1)", q2), ("[rho,F]", q3)):
        spec = singular_values(mat)
        rows[name] = {
            "p_norm": schatten_norm(spec, p) if len(spec.values) else 0.0,
            "verdict": summability_verdict(spec, p).verdict,
        }
    return rows


# ---------------------------------------------------------------------------
# holomorphic functional calculus lab


def _spectrum_of(s: np.ndarray) -> np.ndarray:
    return np.linalg.eigvals(np.asarray(s, dtype=complex))


def contour_calculus(
    s: np.ndarray,
    f: Callable[[complex], complex],
    center: Optional[complex] = None,
    radius: Optional[float] = None,
    nodes: int = 256,
) -> np.ndarray:
    """(2 pi i)**-1 of the trapezoid sum of f(z)(z - S)**-1 on a circle.

    The default circle is centred at the spectral centroid with radius
    1.5x the spectral spread; the contour must clear the spectrum by 1e-3.
    """
    s = np.asarray(s, dtype=complex)
    eigs = _spectrum_of(s)
    if center is None:
        center = complex(np.mean(eigs))
    if radius is None:
        spread = float(np.max(np.abs(eigs - center))) if len(eigs) else 1.0
        radius = 1.5 * max(spread, 1e-6)
    clearance = radius - np.max(np.abs(eigs - center))
    if clearance < 1e-3:
        raise ContourHitsSpectrum(f"clearance {clearance} below 1e-3")
    n = s.shape[0]
    acc = np.zeros_like(s)
    for k in range(nodes):
        theta = 2.0 * math.pi * k / nodes
        z = center + radius * cmath.exp(1j * theta)
        acc += f(z) * cmath.exp(1j * theta) * np.linalg.inv(z * np.eye(n) - s)
    return acc * (radius / nodes)


def resolvent_commutator_check(s: np.ndarray, t: np.ndarray, z: complex) -> float:
    """Frobenius residual of [(z-S)^-1, T] = (z-S)^-1 [S,T] (z-S)^-1."""
    s = np.asarray(s, dtype=complex)
    t = np.asarray(t, dtype=complex)
    eigs = _spectrum_of(s)
    if np.min(np.abs(eigs - z)) < 1e-9:
        raise SingularResolvent("z is numerically on the spectrum")
    res = np.linalg.inv(z * np.eye(s.shape[0]) - s)
    lhs = res @ t - t @ res
    rhs = res @ (s @ t - t @ s) @ res
    return float(np.linalg.norm(lhs - rhs))


def corner_calculus_check(
    ambient: np.ndarray,
    p_proj: np.ndarray,
    f: Callable[[complex], complex],
    exclude_zero: bool = False,
    nodes: int = 256,
) -> float:
    """Residual of f_p(b) = p f(b) p for b = p.ambient.p inside the corner.

    With exclude_zero the ambient calculus runs with the modified function
    that vanishes near 0 (the two-contour case of the corner identity);
    the corner-relative calculus then must still match p g(b) p.
    """
    ambient = np.asarray(ambient, dtype=complex)
    p_proj = np.asarray(p_proj, dtype=complex)
    b = p_proj @ ambient @ p_proj
    idx = np.where(np.abs(np.diag(p_proj)) > 0.5)[0]
    corner = b[np.ix_(idx, idx)]
    eigs_corner = np.linalg.eigvals(corner)
    center = complex(np.mean(eigs_corner))
    spread = float(np.max(np.abs(eigs_corner - center)))
    radius = 1.5 * max(spread, 0.5)
    if exclude_zero and abs(center) <= radius + 0.25:
        # keep 0 strictly outside the corner contour
        radius = max(0.3, abs(center) - 0.3)
        if radius <= spread:
            raise ContourHitsSpectrum("cannot separate 0 from the corner spectrum")
    corner_val = contour_calculus(corner, f, center, radius, nodes)
    if exclude_zero:
        # two-contour ambient calculus of the extension that vanishes near
        # zero: the zero contour contributes nothing, so only the corner
        # contour remains
        amb_val = contour_calculus_on(b, f, center, radius, nodes)
    else:
        amb_val = contour_calculus(b, f, nodes=nodes)
    projected = (p_proj @ amb_val @ p_proj)[np.ix_(idx, idx)]
    return float(np.linalg.norm(corner_val - projected))


def contour_calculus_on(
    s: np.ndarray, f: Callable[[complex], complex], center: complex, radius: float, nodes: int
) -> np.ndarray:
    """Contour calculus over an explicit circle that need not enclose all of
    the spectrum (used for the two-contour corner case)."""
    s = np.asarray(s, dtype=complex)
    eigs = _spectrum_of(s)
    dist = np.abs(np.abs(eigs - center) - radius)
    if np.min(dist) < 1e-3:
        raise ContourHitsSpectrum("explicit contour passes too near the spectrum")
    n = s.shape[0]
    acc = np.zeros_like(s)
    for k in range(nodes):
        theta = 2.0 * math.pi * k / nodes
        z = center + radius * cmath.exp(1j * theta)
        acc += f(z) * cmath.exp(1j * theta) * np.linalg.inv(z * np.eye(n) - s)
    return acc * (radius / nodes)


# ---------------------------------------------------------------------------
# summability reports


@dataclass
class SummabilityReport:
    rows: List[dict]

    def to_json_dict(self) -> dict:
        return {"table": self.rows}


def summability_report(
    module: FredholmModule, funcs: Dict[str, object], p_grid: List[float]
) -> SummabilityReport:
    rows = []
    for name, x in funcs.items():
        for p in p_grid:
            cells = module_summability_row(module, x, p)
            rows.append(
                {
                    "func_id": name,
                    "p": p,
                    "q1": cells["rho(F*-F)"]["p_norm"],
                    "q2": cells["rho(F^2-1)"]["p_norm"],
                    "q3": cells["[rho,F]"]["p_norm"],
                    "verdict": cells["[rho,F]"]["verdict"],
                }
            )
    return SummabilityReport(rows)
