"""The twelve acceptance checks, shared by ``lab verify`` and the test suite.

A :class:`Lab` caches the expensive shared pieces (surface, census, flow,
orbit search, entropy grids) so each is computed once per run.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any

import numpy as np

from . import entropy as en
from . import mobius as mb
from .census import CensusTable, Side, all_cyclic_words, enumerate_classes, fit_growth, handle_class_records
from .config import ExperimentConfig, load_config
from .errors import LabError
from .flow import SurgeredFlow
from .homotopy import CrossingSequence, is_contractible, loop_distance, torus_counterexample
from .orbits import census_orbits, find_periodic_orbits
from .surface import axis_frame, build_genus2_surface
from .surgery import ChartMap, SurgeryParams, TwistData, box_traverse, traversal_by_quadrature, validate_params
from .suspension import MappingTorusModel, TransitionMatrix, check_equivariance, necklace_count, perron_root
from .words import canonical_cyclic, is_cyclically_reduced


@dataclass
class CheckResult:
    number: int
    name: str
    passed: bool | None
    detail: dict[str, Any] = field(default_factory=dict)

    def line(self) -> str:
        status = {True: "PASS", False: "FAIL", None: "PENDING"}[self.passed]
        return f"[{status}] {self.number:>2} {self.name}"

    def to_json(self) -> dict:
        return {"number": self.number, "name": self.name, "passed": self.passed, "detail": self.detail}


class Lab:
    """Shared state for one configuration."""

    def __init__(self, config: ExperimentConfig | None = None):
        self.config = config or load_config(None)

    def rng(self, stream: int = 0) -> np.random.Generator:
        return np.random.default_rng([self.config.rng_seed, stream])

    @cached_property
    def surface(self):
        return build_genus2_surface(self.config.surface_params())

    @cached_property
    def params(self) -> SurgeryParams:
        return self.config.surgery_params()

    @cached_property
    def census(self):
        c = self.config["census"]
        return enumerate_classes(self.surface, float(c["T_max"]), node_limit=int(c["node_limit"]))

    @cached_property
    def growth(self):
        c = self.config["census"]
        return fit_growth(self.census, tuple(c["window"]), step=float(c["step"]))

    @cached_property
    def flow(self) -> SurgeredFlow:
        return SurgeredFlow(self.surface, self.params)

    @cached_property
    def orbit_report(self):
        o = self.config["orbits"]
        return find_periodic_orbits(
            self.flow, self.census, self.rng(7), seeds=int(o["seeds"]), max_returns=int(o["max_returns"]),
            band_classes=o["band_classes"],
        )

    @cached_property
    def entropy_seeds(self) -> np.ndarray:
        e = self.config["entropy"]
        frame = mb.frame_matrix(self.surface.domain.x0, float(e["arc_angle"]))
        return en.unstable_seeds(frame, float(e["arc_length"]), int(e["seeds"]))

    def entropy_estimate(self, c: float = 1.0) -> en.EntropyEstimate:
        cache = self.__dict__.setdefault("_entropy", {})
        if c not in cache:
            e = self.config["entropy"]
            flow: en.PhaseFlow = en.GeodesicPhaseFlow(self.surface)
            if c != 1.0:
                flow = en.RescaledFlow(flow, c)
            cache[c] = en.estimate_entropy(flow, [float(t) for t in e["T_grid"]], [float(d) for d in e["deltas"]], self.entropy_seeds)
        return cache[c]

    @cached_property
    def orbit_set(self):
        e = self.config["entropy"]
        recs = sorted((r for r in self.census.records if r.primitive), key=lambda r: (r.length, r.cyclic_word))
        recs = recs[: int(e["orbit_count"])]
        orbits = [(axis_frame(self.surface.evaluate(r.representative)), r.length, r.cyclic_word) for r in recs]
        T = max(r.length for r in recs)
        res, _ = en.orbit_separated_set(en.GeodesicPhaseFlow(self.surface), orbits, T, float(e["orbit_delta"]))
        return res, len(orbits)

    @cached_property
    def necklaces(self):
        return necklace_count(self.config.transition_matrix(), int(self.config["suspension"]["k_max"]))


def _eps_for(q: int, base: SurgeryParams) -> SurgeryParams:
    if q == 0:
        return SurgeryParams(q=0, eta=base.eta, eps=base.eps, delta=base.delta)
    eps = min(base.eps, 0.9 * base.eta / (4 * abs(q) * math.pi))
    return SurgeryParams(q=q, eta=base.eta, eps=eps, delta=base.delta)


def check_chart(lab: Lab, n: int = 1000, h: float = 1e-6, tol: float = 1e-6) -> CheckResult:
    p = lab.params
    chart = ChartMap(lab.surface.axis_length, p.eta, p.eps)
    rng = lab.rng(1)
    worst = 0.0
    for _ in range(n):
        x = np.array([rng.uniform(-3 * p.eta, 3 * p.eta), rng.uniform(0, 2 * math.pi), rng.uniform(-2 * p.eps, 2 * p.eps)])
        g = chart.frame(*x)
        comps = []
        for j in range(3):
            d = np.zeros(3)
            d[j] = h
            comps.append(mb.liouville(g, (chart.frame(*(x + d)) - chart.frame(*(x - d))) / (2 * h)))
        worst = max(worst, float(np.max(np.abs(np.array(comps) - [1.0, x[2], 0.0]))))
    return CheckResult(1, "normal-form chart pulls the Liouville form back to dt + w ds", worst < tol, {"max_error": worst, "samples": n})


def check_degenerate(lab: Lab, n: int = 100, T: float = 20.0, tol: float = 1e-9) -> CheckResult:
    p = lab.params
    flow = SurgeredFlow(lab.surface, SurgeryParams(q=0, eta=p.eta, eps=p.eps, delta=p.delta))
    frames = en.random_frames(lab.surface, n, lab.rng(2))
    worst = 0.0
    for g in frames:
        end = flow.run(flow.classify(g), T, record_letters=False)[0]
        F = flow.endpoint_frame(end)
        R = g @ mb.flow_matrix(T)
        err = min(np.linalg.norm(F - R), np.linalg.norm(F + R)) / np.linalg.norm(R)
        worst = max(worst, float(err))
    return CheckResult(2, "q=0 flow equals the geodesic flow", worst < tol, {"max_relative_error": worst, "T": T, "seeds": n})


def check_box(lab: Lab, n: int = 100, tol: float = 1e-8) -> CheckResult:
    shift_err, time_err = 0.0, 0.0
    rng = lab.rng(3)
    for q in range(-3, 4):
        p = _eps_for(q, lab.params)
        tw = TwistData(p)
        for w in np.linspace(-2 * p.eps, 2 * p.eps, n + 2)[1:-1]:
            s = float(rng.uniform(0, 2 * math.pi))
            s_out, _, tau = box_traverse((s, float(w)), p)
            d = (s_out - s - float(tw.f(w)) + math.pi) % (2 * math.pi) - math.pi
            shift_err = max(shift_err, abs(d))
            quad_time, _ = traversal_by_quadrature(float(w), p)
            closed = 6 * p.eta + 2 * p.r_scale * float(tw.I(w))
            time_err = max(time_err, abs(tau - quad_time), abs(tau - closed))
    ok = shift_err < 1e-12 and time_err < tol
    return CheckResult(3, "box exit shift and traversal time", ok, {"shift_error": shift_err, "time_error": time_err})


def check_contract(lab: Lab) -> CheckResult:
    sups = {}
    for q in range(-3, 4):
        rep = validate_params(_eps_for(q, lab.params), strict=False)
        sups[q] = rep.sup_r_t
    ok = all(v < 1.0 for v in sups.values())
    return CheckResult(4, "width bound keeps |r_t| < 1", ok, {"sup_r_t": {str(k): v for k, v in sups.items()}})


def check_census(lab: Lab, max_length: int = 8, tol: float = 1e-12) -> CheckResult:
    mismatches = {}
    for side, letters in ((Side.S1, "ab"), (Side.S2, "cd")):
        got = {r.cyclic_word for r in handle_class_records(lab.surface, side, max_length)}
        oracle = {canonical_cyclic(w) for w in all_cyclic_words(letters, max_length) if is_cyclically_reduced(w)}
        mismatches[side.value] = len(got ^ oracle)
    m = np.array([[2.0, 1.0], [1.0, 1.0]])
    p = 0.5 + 1j * math.sqrt(5) / 2
    disp = float(mb.hyperbolic_distance(p, mb.apply(m, p)))
    tl = mb.translation_length(m)
    exact = 2 * math.acosh(1.5)
    err = max(abs(tl - exact), abs(disp - exact))
    ok = not any(mismatches.values()) and err < tol
    return CheckResult(5, "handle census and translation length", ok, {"mismatches": mismatches, "length_error": err})


def check_bijection(lab: Lab, tol: float = 1e-6) -> CheckResult:
    need = int(lab.config["orbits"]["min_one_sided"])
    clear = [
        r for r in lab.census.records
        if r.side is Side.S1 and not r.boundary_parallel and r.collar_distance > lab.params.delta
    ]
    report = census_orbits(lab.flow, CensusTable(clear, lab.census.T_max), sides=(Side.S1,))
    good = [o for o in report.orbits if o.avoids_box and abs(o.period - o.crossing_class.length) < tol]
    ok = len(good) >= need and len(good) == len(clear)
    return CheckResult(6, "one-sided geodesics persist as orbits", ok, {"classes": len(clear), "orbits": len(good), "required": need})


def check_hypertight(lab: Lab) -> CheckResult:
    need = int(lab.config["orbits"]["min_orbits"])
    orbits = lab.orbit_report.orbits
    contractible = sum(1 for o in orbits if o.crossing_class is None or is_contractible(o.crossing_class))
    seqs = [o.crossing_class for o in orbits if isinstance(o.crossing_class, CrossingSequence)]
    bad = sum(1 for s in seqs if not s.alternates())
    ok = len(orbits) >= need and contractible == 0 and bad == 0
    detail = {"orbits": len(orbits), "contractible": contractible, "crossing_orbits": len(seqs), "non_alternating": bad}
    return CheckResult(7, "no contractible orbits, alternating crossings", ok, detail)


def check_entropy(lab: Lab) -> CheckResult:
    a = lab.growth.a
    est = lab.entropy_estimate()
    c = float(lab.config["entropy"]["rescale"])
    slow = lab.entropy_estimate(c)
    h = est.h_top_estimate
    halved = abs(slow.h_top_estimate - h / c) <= 0.2
    ok = 0.5 <= a <= 1.1 and 0.6 <= h <= 1.3 and a <= h + 0.3 and halved
    detail = {"a_fit": a, "h_estimate": h, "h_rescaled": slow.h_top_estimate, "c": c}
    return CheckResult(8, "growth rate against entropy", ok, detail)


def check_certificates(lab: Lab) -> CheckResult:
    # every greedy set was re-verified while building the estimates
    sets = len(lab.entropy_estimate().grid) + len(lab.entropy_estimate(float(lab.config["entropy"]["rescale"])).grid)
    res, n = lab.orbit_set
    need = int(lab.config["entropy"]["orbit_count"])
    ok = bool(res.certified) and res.n == n and n >= need
    return CheckResult(9, "separated sets pass pairwise re-verification", ok, {"greedy_sets": sets, "orbit_set": res.n, "orbits": n})


def brute_force_necklaces(M: TransitionMatrix, k: int) -> tuple[int, int]:
    """Closed edge walks of length ``k`` and their classes up to rotation, by enumeration."""
    edges = [(i, j, m) for i in range(M.n) for j in range(M.n) for m in range(M.entries[i][j])]
    out = {e: [f for f in edges if f[0] == e[1]] for e in edges}
    walks = 0
    classes = set()
    stack = [(e,) for e in edges]
    while stack:
        w = stack.pop()
        if len(w) == k:
            if w[-1][1] == w[0][0]:
                walks += 1
                classes.add(min(w[i:] + w[:i] for i in range(k)))
            continue
        stack.extend(w + (f,) for f in out[w[-1]])
    return walks, len(classes)


def check_suspension(lab: Lab) -> CheckResult:
    s = lab.config["suspension"]
    M = lab.config.transition_matrix()
    cen = lab.necklaces
    kb = int(s["brute_force_k"])
    mism = [k for k in range(1, kb + 1) if brute_force_necklaces(M, k) != (cen.closed_walks[k - 1], cen.necklaces[k - 1])]
    lam = perron_root(M)
    rel = abs(cen.fit.a / math.log(lam) - 1)
    rep = check_equivariance(MappingTorusModel(epsilon=float(s["epsilon"])), int(s["samples"]), lab.rng(10))
    ok = not mism and rel < 0.02 and rep.max_error < 1e-9
    detail = {"mismatched_k": mism, "a_fit": cen.fit.a, "log_perron": math.log(lam), "relative_gap": rel, "equivariance_error": rep.max_error}
    return CheckResult(10, "necklace growth and mapping-torus equivariance", ok, detail)


def check_torus(lab: Lab) -> CheckResult:
    t = lab.config["torus"]
    a, b = torus_counterexample(float(t["delta"]), float(t["K"]))
    d = loop_distance(a, b)
    ok = d < 0.05 and a.primitive_class != b.primitive_class and a.is_primitive and b.is_primitive and a.closes() and b.closes()
    detail = {"distance": d, "classes": [list(a.primitive_class), list(b.primitive_class)]}
    return CheckResult(11, "close loops in distinct primitive torus classes", ok, detail)


CHECKS = [
    check_chart,
    check_degenerate,
    check_box,
    check_contract,
    check_census,
    check_bijection,
    check_hypertight,
    check_entropy,
    check_certificates,
    check_suspension,
    check_torus,
]


def run_check(fn, lab: Lab) -> CheckResult:
    """Run one check; module errors become failures with the error record attached."""
    number = CHECKS.index(fn) + 1
    try:
        return fn(lab)
    except LabError as exc:
        return CheckResult(number, fn.__name__.removeprefix("check_"), False, {"error": exc.record()})
