"""Closed orbits of the surgered flow.

Three sources feed the orbit list:

* closed geodesics from the census that never come near the surgery box are
  orbits of the surgered flow with the same period;
* the two orbits tangent to the separating geodesic;
* fixed points of iterates of the return map on the torus section, found from
  close returns and refined by Newton's method.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import mobius as mb
from .census import CensusTable, ConjugacyClassRecord, Side
from .errors import HorizonExceeded, RefinementDiverged
from .flow import Box, FlowState, Geo, SurgeredFlow, Trajectory
from .surface import walk_axis

CLOSE_RETURN = 0.05
RESIDUAL_TOL = 1e-8


@dataclass(eq=False)
class SurgeredOrbit:
    seed: FlowState
    period: float
    crossing_class: object = None
    avoids_box: bool = True
    residual: float = math.nan
    source: str = ""
    section: tuple[float, float] | None = None
    returns: int = 0
    start: Geo | Box | None = field(default=None, repr=False)

    def trajectory(self, flow: SurgeredFlow, dt: float | None = None) -> Trajectory:
        """One period of the orbit.  Section-seeded orbits include the closing crossing."""
        pad = 1e-6 if self.section is not None else 0.0
        start = self.start if self.start is not None else self.seed
        return flow.flow(start, self.period + pad, dt)

    def class_key(self) -> str:
        c = self.crossing_class
        if c is None:
            return ""
        if hasattr(c, "canonical"):
            return repr(c.canonical())
        if isinstance(c, ConjugacyClassRecord):
            return c.cyclic_word
        return getattr(c, "word", repr(c))

    def to_json(self) -> dict:
        cls = self.crossing_class
        if cls is None:
            cls_json = None
        elif hasattr(cls, "to_json"):
            cls_json = cls.to_json()
        else:
            cls_json = str(cls)
        return {
            "seed": [float(x) for x in self.seed.frame.ravel()],
            "section": list(self.section) if self.section else None,
            "period": self.period,
            "class": cls_json,
            "avoids_box": self.avoids_box,
            "residual": self.residual,
            "source": self.source,
            "returns": self.returns,
        }


@dataclass
class OrbitSearchReport:
    orbits: list[SurgeredOrbit]
    dropped: int = 0
    candidates: int = 0


def _wrap(x: float, period: float) -> float:
    return (x + 0.5 * period) % period - 0.5 * period


def section_iterate(flow: SurgeredFlow, x: tuple[float, float], k: int, max_time: float = 60.0):
    """Apply the return map ``k`` times; returns the image, total time and box visits."""
    state = flow.section_state(*x)
    total = 0.0
    boxed = isinstance(state, Box)
    last = None
    for _ in range(k):
        state, t, events, _, crossings = flow.run(state, max_time, stop_at_forward_crossing=True, record_letters=False)
        if not crossings or not crossings[-1].forward or t >= max_time:
            raise HorizonExceeded("no forward return within the time budget")
        total += t
        boxed = boxed or any(e.kind.startswith("box") for e in events)
        last = crossings[-1]
    return (last.sigma % flow.period, last.alpha), total, boxed


def refine_section_orbit(
    flow: SurgeredFlow,
    x0: tuple[float, float],
    k: int,
    tol: float = 1e-11,
    max_iter: int = 40,
    h: float = 1e-7,
) -> tuple[tuple[float, float], float, float, bool]:
    """Newton's method for a fixed point of the ``k``-th return map.

    Returns ``(point, period, residual, visits_box)``.  Raises
    ``RefinementDiverged`` when the residual stops shrinking.
    """
    ell = flow.period

    def F(x):
        (s1, a1), t, boxed = section_iterate(flow, x, k)
        return np.array([_wrap(s1 - x[0], ell), a1 - x[1]]), t, boxed

    x = np.array([x0[0] % ell, x0[1]], dtype=float)
    r, t, boxed = F(x)
    for _ in range(max_iter):
        norm = float(np.max(np.abs(r)))
        if norm < tol:
            return (float(x[0]), float(x[1])), t, norm, boxed
        J = np.empty((2, 2))
        for j in range(2):
            e = np.zeros(2)
            e[j] = h
            J[:, j] = (F(x + e)[0] - F(x - e)[0]) / (2 * h)
        try:
            step = np.linalg.solve(J, -r)
        except np.linalg.LinAlgError as exc:
            raise RefinementDiverged("singular Jacobian") from exc
        lam = 1.0
        for _ in range(30):
            trial = x + lam * step
            trial[0] %= ell
            if abs(trial[1]) < math.pi / 2:
                try:
                    r2, t2, b2 = F(trial)
                except HorizonExceeded:
                    r2 = None
                if r2 is not None and np.max(np.abs(r2)) < norm:
                    break
            lam *= 0.5
        else:
            raise RefinementDiverged(f"Newton stalled at residual {norm:.3g}")
        x, r, t, boxed = trial, r2, t2, b2
    norm = float(np.max(np.abs(r)))
    if norm < RESIDUAL_TOL:
        return (float(x[0]), float(x[1])), t, norm, boxed
    raise RefinementDiverged(f"no convergence, residual {norm:.3g}")


def _cover_residual(flow: SurgeredFlow, start: Geo, m: np.ndarray, period: float) -> tuple[float, bool]:
    """Closure error of the flow from ``start`` over ``period`` against the deck element ``m``."""
    end, _, events, _, _ = flow.run(start, period, record_letters=False)
    target = m @ start.cover
    got = flow.endpoint_frame(end)
    err = min(np.abs(got - target).max(), np.abs(got + target).max()) / np.abs(target).max()
    boxed = any(e.kind.startswith("box") for e in events)
    return float(err), not boxed


def census_orbits(flow: SurgeredFlow, census: CensusTable, sides=(Side.S1, Side.S2, Side.CROSSING)) -> OrbitSearchReport:
    """Closed geodesics of the census that are orbits of the surgered flow unchanged."""
    out, dropped = [], 0
    dom = flow.domain
    for rec in census.records:
        if rec.side not in sides:
            continue
        m = flow.surface.evaluate(rec.representative)
        walk = walk_axis(dom, m)
        start = Geo(np.eye(2), walk.start)
        m_local = walk.element(dom)
        if rec.crossings == 0:
            res, clear = _cover_residual(flow, start, m_local, rec.length)
            if not clear or res > RESIDUAL_TOL:
                dropped += 1
                continue
            out.append(SurgeredOrbit(FlowState(start.cover), rec.length, rec, True, res, "census", start=start))
            continue
        _, _, events, _, crossings = flow.run(start, rec.length, record_letters=False)
        if any(e.kind.startswith("box") for e in events):
            dropped += 1
            continue
        first = next(c for c in crossings if c.forward)
        x = (first.sigma % flow.period, first.alpha)
        k = sum(1 for c in crossings if c.forward)
        try:
            x, period, res, boxed = refine_section_orbit(flow, x, k)
        except (RefinementDiverged, HorizonExceeded):
            dropped += 1
            continue
        if boxed or abs(period - rec.length) > 1e-6:
            dropped += 1
            continue
        seed = flow.section_state(*x)
        out.append(
            SurgeredOrbit(FlowState(flow.endpoint_frame(seed)), period, rec, True, res, "census", x, k, start=seed)
        )
    return OrbitSearchReport(out, dropped, len(census.records))


def separating_orbits(flow: SurgeredFlow) -> list[SurgeredOrbit]:
    """The two orbits running along the separating geodesic, one per direction."""
    out = []
    for turn in (0.0, math.pi):
        frame = mb.flow_matrix(0.5 * flow.period) @ mb.rotation_matrix(turn)
        start = flow.localize(frame)
        k = flow.surface.separating_axis.entries
        m = k if turn == 0.0 else np.linalg.inv(k)
        res, clear = _cover_residual(flow, start, m, flow.period)
        out.append(SurgeredOrbit(FlowState(start.cover), flow.period, None, clear, res, "separating", start=start))
    return out


def close_return_orbits(
    flow: SurgeredFlow,
    seeds: int,
    rng: np.random.Generator,
    max_returns: int = 3,
    alpha_range: float | None = None,
    threshold: float = CLOSE_RETURN,
) -> OrbitSearchReport:
    """Random section seeds whose iterates come back within ``threshold``, refined to fixed points.

    ``alpha_range`` limits the seed angle, e.g. to the box band
    ``|alpha| < asin(2 eps / scale)``.
    """
    ell = flow.period
    out, dropped, cands = [], 0, 0
    amax = alpha_range if alpha_range is not None else 1.4
    for _ in range(seeds):
        x = (float(rng.uniform(0.0, ell)), float(rng.uniform(-amax, amax)))
        y = x
        for k in range(1, max_returns + 1):
            try:
                y, _, _ = section_iterate(flow, y, 1)
            except HorizonExceeded:
                break
            if math.hypot(_wrap(y[0] - x[0], ell), y[1] - x[1]) < threshold:
                cands += 1
                try:
                    z, period, res, boxed = refine_section_orbit(flow, x, k)
                except (RefinementDiverged, HorizonExceeded):
                    dropped += 1
                    break
                seed = flow.section_state(*z)
                out.append(
                    SurgeredOrbit(
                        FlowState(flow.endpoint_frame(seed)), period, None, not boxed, res, "close_return", z, k, start=seed
                    )
                )
                break
    return OrbitSearchReport(out, dropped, cands)


def dedupe_orbits(orbits: list[SurgeredOrbit], key=None) -> list[SurgeredOrbit]:
    """Drop repeats keyed by rounded period and class; first occurrence wins."""
    seen, out = set(), []
    for o in orbits:
        k = (round(o.period, 6), key(o) if key else o.class_key())
        if k in seen:
            continue
        seen.add(k)
        out.append(o)
    return out


def band_seeded_orbits(
    flow: SurgeredFlow,
    census: CensusTable,
    per_crossing: int = 21,
    max_classes: int | None = None,
) -> OrbitSearchReport:
    """Newton from section seeds inside the box band next to census crossings that hit the box.

    A closed geodesic crossing the separating geodesic almost perpendicularly
    is destroyed by the surgery, but the twist can be compensated by a small
    change of angle, so orbits through the box are found nearby.
    """
    band = math.asin(2 * flow.eps / flow.scale)
    out, dropped, cands, used = [], 0, 0, 0
    for rec in census.records:
        if rec.crossings == 0:
            continue
        m = flow.surface.evaluate(rec.representative)
        walk = walk_axis(flow.domain, m)
        _, _, events, _, crossings = flow.run(Geo(np.eye(2), walk.start), rec.length, record_letters=False)
        if not any(e.kind.startswith("box") for e in events):
            continue
        if max_classes is not None and used >= max_classes:
            break
        used += 1
        k = sum(1 for c in crossings if c.forward)
        for c in crossings:
            if not c.forward:
                continue
            for a in np.linspace(-band, band, per_crossing):
                cands += 1
                try:
                    z, period, res, boxed = refine_section_orbit(flow, (c.sigma, float(a)), k)
                except (RefinementDiverged, HorizonExceeded):
                    dropped += 1
                    continue
                seed = flow.section_state(*z)
                out.append(
                    SurgeredOrbit(FlowState(flow.endpoint_frame(seed)), period, None, not boxed, res, "box_band", z, k, start=seed)
                )
    return OrbitSearchReport(out, dropped, cands)


def classify_orbits(flow: SurgeredFlow, orbits: list[SurgeredOrbit]) -> list[SurgeredOrbit]:
    """Attach crossing sequences to section-seeded orbits; census orbits keep their records."""
    from .homotopy import surgered_class

    for o in orbits:
        if o.crossing_class is None or o.section is not None:
            cls = surgered_class(o.trajectory(flow), flow)
            if o.crossing_class is None or not isinstance(o.crossing_class, ConjugacyClassRecord) or o.crossing_class.crossings:
                o.crossing_class = cls
    return orbits


def _key_for_dedupe(o: SurgeredOrbit):
    return o.class_key()


def find_periodic_orbits(
    flow: SurgeredFlow,
    census: CensusTable,
    rng: np.random.Generator,
    seeds: int = 200,
    max_returns: int = 3,
    band_classes: int | None = None,
) -> OrbitSearchReport:
    """All orbit sources, classified and deduplicated by period and class.

    The order of the result is deterministic for a given generator state.
    """
    reports = [
        census_orbits(flow, census),
        OrbitSearchReport(separating_orbits(flow)),
        band_seeded_orbits(flow, census, max_classes=band_classes),
        close_return_orbits(flow, seeds, rng, max_returns=max_returns),
    ]
    orbits = [o for r in reports for o in r.orbits]
    classify_orbits(flow, orbits)
    orbits = dedupe_orbits(orbits, _key_for_dedupe)
    return OrbitSearchReport(orbits, sum(r.dropped for r in reports), sum(r.candidates for r in reports))
