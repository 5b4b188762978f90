"""Scenario schema, reference scenarios, JSON (de)serialization."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Dict, List, Tuple

from .errors import InvalidScenario, OrbitsNotDisjoint
from .groupoid import BaseSet, GroupoidElement
from .functions import FunctionSum, LocallyConstantFunction, ProfileFunction
from .sft import (
    STABLE,
    UNSTABLE,
    MetricParams,
    PeriodicOrbit,
    TransitionMatrix,
    build_point,
    decode_point,
    encode_point,
    orbits_disjoint,
    validate_matrix,
    validate_point,
)


@dataclass
class Scenario:
    name: str
    matrix: TransitionMatrix
    kappa: float
    orbit_p: PeriodicOrbit
    orbit_q: PeriodicOrbit
    core_bound: int
    window: Tuple[int, int]
    basis_cap: int
    functions: Dict[str, object] = field(default_factory=dict)
    p_grid: List[float] = field(default_factory=list)
    seed: int = 0

    @property
    def metric(self) -> MetricParams:
        return MetricParams(self.kappa)

    def validate(self) -> None:
        validate_matrix(self.matrix)
        PeriodicOrbit.from_word(self.orbit_p.cycle, self.matrix)
        PeriodicOrbit.from_word(self.orbit_q.cycle, self.matrix)
        if not orbits_disjoint(self.orbit_p, self.orbit_q):
            raise OrbitsNotDisjoint("orbit_P and orbit_Q share a point")
        if self.window[0] > self.window[1]:
            raise InvalidScenario("empty window")
        if any(p <= 0 for p in self.p_grid):
            raise InvalidScenario("p grid must be positive")
        if self.core_bound < 0 or self.basis_cap < 1:
            raise InvalidScenario("bad core bound or basis cap")
        for f in self.functions.values():
            for bs in _supports_of(f):
                for pt in (bs.anchor.first, bs.anchor.second):
                    validate_point(pt, self.matrix)


def _supports_of(f):
    if isinstance(f, FunctionSum):
        return [bs for part in f.parts for bs in _supports_of(part)]
    if isinstance(f, ProfileFunction):
        return [f.support]
    return [bs for bs, _ in f.terms]


def _base_set_to_dict(bs: BaseSet) -> dict:
    return {
        "anchor": [encode_point(bs.anchor.first), encode_point(bs.anchor.second)],
        "radius_exp": bs.radius_exp,
        "time": bs.time,
    }


def _base_set_from_dict(d: dict, side: str) -> BaseSet:
    anchor = GroupoidElement(decode_point(d["anchor"][0]), decode_point(d["anchor"][1]), side)
    return BaseSet(anchor, int(d["radius_exp"]), int(d["time"]))


def function_to_dict(f) -> dict:
    if isinstance(f, FunctionSum):
        return {"side": f.side, "sum": [function_to_dict(p) for p in f.parts]}
    if isinstance(f, ProfileFunction):
        return {
            "side": f.side,
            "profile": {
                "support": _base_set_to_dict(f.support),
                "depth": f.depth,
                "seed": f.seed,
                "coeff": [f.coeff.real, f.coeff.imag],
            },
        }
    return {
        "side": f.side,
        "terms": [
            dict(_base_set_to_dict(bs), coeff=[c.real, c.imag]) for bs, c in f.terms
        ],
    }


def function_from_dict(d: dict):
    side = d["side"]
    if side not in (STABLE, UNSTABLE):
        raise InvalidScenario(f"unknown side {side!r}")
    if "sum" in d:
        return FunctionSum(side, tuple(function_from_dict(p) for p in d["sum"]))
    if "profile" in d:
        p = d["profile"]
        return ProfileFunction(
            _base_set_from_dict(p["support"], side),
            int(p["depth"]),
            str(p["seed"]),
            complex(p["coeff"][0], p["coeff"][1]),
        )
    terms = tuple(
        (_base_set_from_dict(t, side), complex(t["coeff"][0], t["coeff"][1]))
        for t in d["terms"]
    )
    return LocallyConstantFunction(side, terms)


def scenario_to_dict(s: Scenario) -> dict:
    return {
        "name": s.name,
        "matrix": [list(row) for row in s.matrix.entries],
        "kappa": s.kappa,
        "orbit_P": list(s.orbit_p.cycle),
        "orbit_Q": list(s.orbit_q.cycle),
        "core_bound": s.core_bound,
        "window": list(s.window),
        "basis_cap": s.basis_cap,
        "functions": {k: function_to_dict(f) for k, f in sorted(s.functions.items())},
        "p_grid": s.p_grid,
        "seed": s.seed,
    }


def scenario_from_dict(d: dict) -> Scenario:
    try:
        s = Scenario(
            name=str(d.get("name", "scenario")),
            matrix=TransitionMatrix.from_rows(d["matrix"]),
            kappa=float(d["kappa"]),
            orbit_p=PeriodicOrbit.from_word(d["orbit_P"]),
            orbit_q=PeriodicOrbit.from_word(d["orbit_Q"]),
            core_bound=int(d.get("core_bound", 4)),
            window=tuple(d.get("window", (-8, 24))),
            basis_cap=int(d.get("basis_cap", 20000)),
            functions={k: function_from_dict(v) for k, v in d.get("functions", {}).items()},
            p_grid=[float(p) for p in d.get("p_grid", [0.7, 1.0, 1.3])],
            seed=int(d.get("seed", 0)),
        )
    except (KeyError, ValueError, TypeError) as exc:
        raise InvalidScenario(str(exc)) from exc
    s.validate()
    return s


def scenario_json(s: Scenario) -> str:
    return json.dumps(scenario_to_dict(s), indent=2, sort_keys=True)


def load_scenario(path: str) -> Scenario:
    try:
        with open(path) as handle:
            data = json.load(handle)
    except (OSError, json.JSONDecodeError) as exc:
        raise InvalidScenario(f"cannot read scenario: {exc}") from exc
    return scenario_from_dict(data)


def scenario_hash(s: Scenario) -> str:
    canon = json.dumps(scenario_to_dict(s), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()[:16]


# ---------------------------------------------------------------------------
# reference scenarios


def full_shift_scenario() -> Scenario:
    m = TransitionMatrix.from_rows([[1, 1], [1, 1]])
    step = build_point((0,), (), (1,), 0)
    past_dist = build_point((0,), (1, 0), (1,), -2)
    future_dist = build_point((0,), (1, 1, 1, 0), (1,), 0)
    ca = GroupoidElement(step, past_dist, STABLE)
    cb = GroupoidElement(step, future_dist, UNSTABLE)
    a = ProfileFunction(BaseSet(ca, 1, 0), depth=30, seed="ref-a")
    b = ProfileFunction(BaseSet(cb, 1, 0), depth=30, seed="ref-b")
    e_unit = LocallyConstantFunction(
        STABLE, tuple((BaseSet(GroupoidElement(step, step, STABLE), k, 0), 2.0**-k) for k in range(6))
    )
    e_proj = LocallyConstantFunction(
        STABLE, ((BaseSet(GroupoidElement(step, step, STABLE), 2, 0), 1.0 + 0.0j),)
    )
    off_diag = LocallyConstantFunction(
        STABLE, tuple((BaseSet(ca, k, 0), 2.0**-k) for k in range(6))
    )
    b_terms = LocallyConstantFunction(
        UNSTABLE, tuple((BaseSet(cb, k, 0), 2.0**-k) for k in range(6))
    )
    return Scenario(
        name="full-2-shift",
        matrix=m,
        kappa=2.0,
        orbit_p=PeriodicOrbit((1,)),
        orbit_q=PeriodicOrbit((0,)),
        core_bound=6,
        window=(-8, 24),
        basis_cap=60000,
        functions={
            "a": a,
            "b": b,
            "e_unit": e_unit,
            "e_proj": e_proj,
            "a_terms": off_diag,
            "b_terms": b_terms,
        },
        p_grid=[0.7, 1.0, 1.3],
        seed=20260809,
    )


def golden_mean_scenario() -> Scenario:
    m = TransitionMatrix.from_rows([[1, 1], [1, 0]])
    spine = build_point((0,), (), (0, 1), 0)  # 0-past, (01)-future
    past_dist = build_point((0,), (1, 0), (0, 1), -2)  # spine with a 1 at -2
    future_dist = build_point((0,), (0, 1, 0, 0, 1), (0, 1), 0)  # 00 break at +3
    ca = GroupoidElement(spine, past_dist, STABLE)
    cb = GroupoidElement(spine, future_dist, UNSTABLE)
    a = ProfileFunction(BaseSet(ca, 1, 0), depth=30, seed="gm-a")
    b = ProfileFunction(BaseSet(cb, 1, 0), depth=30, seed="gm-b")
    e_proj = LocallyConstantFunction(
        STABLE, ((BaseSet(GroupoidElement(spine, spine, STABLE), 2, 0), 1.0 + 0.0j),)
    )
    return Scenario(
        name="golden-mean",
        matrix=m,
        kappa=2.0,
        orbit_p=PeriodicOrbit((0, 1)),
        orbit_q=PeriodicOrbit((0,)),
        core_bound=6,
        window=(-8, 26),
        basis_cap=150000,
        functions={"a": a, "b": b, "e_proj": e_proj},
        p_grid=[0.494, 0.694, 0.894],
        seed=20260809,
    )


REFERENCE_SCENARIOS = {
    "full-2-shift": full_shift_scenario,
    "golden-mean": golden_mean_scenario,
}
