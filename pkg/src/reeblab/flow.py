"""The surgered Reeb flow as a hybrid system.

Outside the surgery box the flow is the geodesic flow, advanced exactly by
right multiplication and tracked through the tiling.  A trajectory enters the
box exactly when its geodesic is about to cross a lift of the separating
geodesic forward with ``|w| < 2 eps``; the entry time is the crossing time
minus ``3 eta``.  Inside the box ``s`` and ``w`` are frozen and the chart time
advances at speed ``1 / (1 +- d_t r)``, so the box clock is known in closed
form and only its inversion needs a root finder.

States are kept as ``(deck, local)`` pairs: ``deck`` is the accumulated deck
transformation and ``local`` a frame near the Dirichlet domain, so matrix
entries stay of order one however long the flow runs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from . import mobius as mb
from .errors import EventResolutionFailure, HorizonExceeded, NonTermination
from .mobius import ChartTag, MobiusElement, UnitTangentFrame
from .surface import FuchsianSurface, tile_exit
from .surgery import SurgeryParams, TwistData, build_chart

FLIP = mb.rotation_matrix(math.pi)
CROSSING_FLOOR = 1e-9
DEFAULT_T_CAP = 200.0


@dataclass(frozen=True, eq=False)
class Geo:
    """Bundle point: cover frame ``deck @ local``."""

    deck: np.ndarray
    local: np.ndarray

    @property
    def cover(self) -> np.ndarray:
        return self.deck @ self.local


@dataclass(frozen=True, eq=False)
class Box:
    """Point of the surgery region traversed by a box trajectory.

    ``s`` is the entry coordinate (on the entry wall), ``clock`` the Reeb time
    elapsed since the entry wall; ``lift`` is the local lift of the separating
    geodesic and ``deck`` places it in the cover.
    """

    deck: np.ndarray
    lift: np.ndarray
    s: float
    w: float
    clock: float


@dataclass(frozen=True)
class FlowState:
    """A point of the surgered manifold.

    ``frame`` is a cover frame.  For points of the glued-in box it is the
    frame with the same chart coordinates (a stand-in used for plotting), and
    ``box`` carries the chart coordinates ``(t, s, w)``.
    """

    frame: np.ndarray
    chart_tag: ChartTag = ChartTag.BUNDLE
    box: tuple[float, float, float] | None = None

    def as_frame(self) -> UnitTangentFrame:
        return UnitTangentFrame(MobiusElement(self.frame), self.chart_tag)


@dataclass(frozen=True)
class Event:
    kind: str
    time: float
    data: dict = field(default_factory=dict)


@dataclass(frozen=True, eq=False)
class Crossing:
    """A transverse crossing of the torus over the separating geodesic."""

    time: float
    forward: bool
    deck: np.ndarray
    lift: np.ndarray
    sigma: float
    alpha: float
    in_box: bool

    @property
    def cover_lift(self) -> np.ndarray:
        return self.deck @ self.lift


@dataclass(eq=False)
class Segment:
    t0: float
    t1: float
    state: Geo | Box
    direction: int = 1


@dataclass(eq=False)
class Trajectory:
    samples: list[tuple[float, FlowState]]
    events: list[Event]
    total_time: float
    start: Geo | Box
    end: Geo | Box
    segments: list[Segment]
    crossings: list[Crossing]

    @property
    def letters(self) -> list[int]:
        return [e.data["side"] for e in self.events if e.kind == "domain_letter"]


class SurgeredFlow:
    """Reeb flow of the surgered contact form on the default genus-2 surface."""

    def __init__(self, surface: FuchsianSurface, params: SurgeryParams, t_cap: float = DEFAULT_T_CAP):
        self.surface = surface
        self.params = params
        self.chart = build_chart(surface, params)
        self.twist = TwistData(params)
        self.domain = surface.domain
        self.lifts = self.chart.lifts
        self.lifts_inv = np.linalg.inv(self.lifts)
        self.period = surface.axis_length
        self.scale = self.period / (2 * math.pi)
        self.lam = math.exp(self.period / 2)
        self.t_cap = t_cap
        eta, eps = params.eta, params.eps
        self.eta, self.eps = eta, eps

    # construction

    def localize(self, frame: np.ndarray, deck: np.ndarray | None = None) -> Geo:
        """Split a frame into a deck element and a frame based in the domain."""
        return self._localize(frame, deck)[0]

    def _localize(self, frame: np.ndarray, deck: np.ndarray | None = None) -> tuple[Geo, list[int]]:
        deck = np.eye(2) if deck is None else deck
        _, path = self.domain.reduce_point(mb.base_point(frame))
        h = self.domain.element_of(path)
        return Geo(deck @ h, np.linalg.solve(h, frame)), list(path)

    def classify(self, frame: np.ndarray) -> Geo | Box:
        """State of the surgered manifold represented by a unit tangent frame."""
        geo = self.localize(frame)
        for lift, lift_inv in zip(self.lifts, self.lifts_inv):
            res = self.chart.crossing(lift_inv @ geo.local)
            if res is None or not res[3]:
                continue
            t, sigma, alpha, _ = res
            w = self.scale * math.sin(alpha)
            if abs(t) >= 3 * self.eta or abs(w) >= 2 * self.eps:
                continue
            s = sigma / self.scale
            if t > self.eta:
                # already past the gluing: old coordinates, entry coordinate shifted back
                s_entry = s - float(self.twist.f(w))
                clock = float(self.twist.clock(t, w, switched=True))
            else:
                s_entry = s
                clock = float(self.twist.clock(t, w, switched=False))
            return Box(geo.deck, lift, s_entry, w, clock)
        return geo

    def section_state(self, sigma: float, alpha: float) -> Geo | Box:
        """State at a forward crossing of the imaginary axis at height ``e^sigma``, angle ``alpha``."""
        w = self.scale * math.sin(alpha)
        lift = np.eye(2)
        if abs(w) < 2 * self.eps:
            return Box(np.eye(2), lift, sigma / self.scale, w, self.crossing_clock(w))
        return self.localize(self.chart.frame(0.0, sigma / self.scale, w))

    # box clock

    def crossing_clock(self, w: float) -> float:
        return float(self.twist.clock(0.0, w, switched=False))

    def box_total(self, w: float) -> float:
        return float(self.twist.traversal_time(w))

    def box_position(self, box: Box) -> tuple[float, bool]:
        """Chart time and gluing side of a box point from its clock."""
        tw, w, eta = self.twist, box.w, self.eta
        ts = self.params.t_switch
        c = box.clock
        c_switch = float(tw.clock(ts, w, switched=False))
        if c <= c_switch:
            lo, hi, switched = -3 * eta, ts, False
        else:
            lo, hi, switched = ts, 3 * eta, True

        def g(t):
            return float(tw.clock(t, w, switched)) - c

        glo, ghi = g(lo), g(hi)
        if abs(glo) < 1e-15:
            return lo, switched
        if abs(ghi) < 1e-15:
            return hi, switched
        if glo > 0 or ghi < 0:
            raise EventResolutionFailure(f"box clock {c} outside its range")
        try:
            t = brentq(g, lo, hi, xtol=1e-15, rtol=1e-15, maxiter=100)
        except RuntimeError as exc:
            raise EventResolutionFailure(str(exc)) from exc
        return t, switched

    def box_state(self, box: Box) -> FlowState:
        t, switched = self.box_position(box)
        s, w = box.s, box.w
        removed = (not switched) and abs(t) <= self.eta and abs(w) < self.eps
        if switched or t > self.eta:
            s = s + float(self.twist.f(w))
        frame = box.deck @ box.lift @ self.chart.frame(t, s, w)
        if removed:
            return FlowState(frame, ChartTag.SURGERY_BOX, (t, box.s % (2 * math.pi), w))
        return FlowState(frame, ChartTag.BUNDLE, (t, s % (2 * math.pi), w))

    def _wall_frame(self, box: Box, exit_side: bool) -> tuple[Geo, list[int]]:
        s = box.s + (float(self.twist.f(box.w)) if exit_side else 0.0)
        n = math.floor(s / (2 * math.pi))
        lift = box.lift @ np.diag([self.lam**n, self.lam**-n])
        t = 3 * self.eta if exit_side else -3 * self.eta
        local = lift @ self.chart.frame(t, s - 2 * math.pi * n, box.w)
        return self._localize(local, box.deck)

    # geodesic scanning

    def _scan(self, geo: Geo, limit: float, direction: int, floor: float = CROSSING_FLOOR):
        """Walk the tiling for at most ``limit`` time, stopping at the first crossing.

        Returns ``(letters, crossing, end)`` where ``letters`` lists ``(time, side)``
        tile exits, ``crossing`` is ``(time, lift_index)`` or ``None``, and ``end``
        is the state at the crossing or at ``limit``.
        """
        flip = direction < 0
        local = geo.local @ FLIP if flip else geo.local
        deck = geo.deck
        elapsed = 0.0
        letters: list[tuple[float, int]] = []
        for _ in range(1_000_000):
            tau, k = tile_exit(self.domain, local)
            best, which = math.inf, -1
            for j, li in enumerate(self.lifts_inv):
                (a, b), (c, d) = li @ local
                ac, bd = a * c, b * d
                if ac == 0.0 or (ac > 0) == (bd > 0):
                    continue
                tc = 0.5 * math.log(-bd / ac)
                lo = floor if elapsed == 0.0 else 0.0
                if lo < tc <= tau and tc < best:
                    best, which = tc, j
            if which >= 0 and elapsed + best <= limit:
                local = local @ mb.flow_matrix(best)
                end = Geo(deck, local @ FLIP if flip else local)
                return letters, (elapsed + best, which), end
            if elapsed + tau >= limit:
                local = local @ mb.flow_matrix(limit - elapsed)
                return letters, None, Geo(deck, local @ FLIP if flip else local)
            elapsed += tau
            letters.append((elapsed, k))
            deck = deck @ self.domain.side_elements[k]
            local = self.domain.side_inverses[k] @ local @ mb.flow_matrix(tau)
        raise NonTermination("tile walk exceeded its step budget")

    def _crossing_data(self, geo: Geo, j: int, time: float) -> Crossing:
        """Section coordinates of a crossing at the current frame with lift ``j``."""
        h = self.lifts_inv[j] @ geo.local
        res = self.chart.crossing(h)
        if res is None:
            raise EventResolutionFailure("crossing lost under refinement")
        _, sigma, alpha, forward = res
        return Crossing(time, forward, geo.deck, self.lifts[j], sigma, alpha, False)

    # the flow

    def run(
        self,
        state: Geo | Box,
        T: float,
        stop_at_forward_crossing: bool = False,
        record_letters: bool = True,
        stop_at_crossing: bool = False,
    ) -> tuple[Geo | Box, float, list[Event], list[Segment], list[Crossing]]:
        """Advance ``state`` by Reeb time ``T`` (either sign).

        With ``stop_at_forward_crossing`` the run ends at the first forward
        torus crossing after time zero (used for the return map);
        ``stop_at_crossing`` stops at the first crossing of either direction.
        """
        if abs(T) > self.t_cap:
            raise HorizonExceeded(f"|T|={abs(T)} exceeds flow cap {self.t_cap}")
        d = 1 if T >= 0 else -1
        horizon = abs(T)
        time = 0.0
        events: list[Event] = []
        segments: list[Segment] = []
        crossings: list[Crossing] = []
        eta, eps = self.eta, self.eps
        first = True
        while True:
            if isinstance(state, Box):
                total = self.box_total(state.w)
                c0 = self.crossing_clock(state.w)
                target = total if d > 0 else 0.0
                to_cross = (c0 - state.clock) * d
                remaining = (target - state.clock) * d
                if to_cross > (CROSSING_FLOOR if first else -1e-15) and to_cross <= remaining:
                    if time + to_cross <= horizon:
                        lift = state.lift
                        cr = Crossing(time + to_cross, True, state.deck, lift, state.s * self.scale, math.asin(state.w / self.scale), True)
                        crossings.append(cr)
                        events.append(Event("torus_crossing", d * cr.time, {"direction": "forward", "in_box": True}))
                        if (stop_at_forward_crossing and d > 0) or stop_at_crossing:
                            segments.append(Segment(time, time + to_cross, state, d))
                            state = Box(state.deck, state.lift, state.s, state.w, c0)
                            return state, time + to_cross, events, segments, crossings
                first = False
                if time + remaining > horizon:
                    segments.append(Segment(time, horizon, state, d))
                    state = Box(state.deck, state.lift, state.s, state.w, state.clock + d * (horizon - time))
                    return state, horizon, events, segments, crossings
                segments.append(Segment(time, time + remaining, state, d))
                time += remaining
                s_exit = state.s + (float(self.twist.f(state.w)) if d > 0 else 0.0)
                events.append(
                    Event("box_exit" if d > 0 else "box_exit_backward", d * time, {"s": s_exit % (2 * math.pi), "w": state.w})
                )
                state, path = self._wall_frame(state, exit_side=d > 0)
                if record_letters:
                    events.extend(Event("domain_letter", d * time, {"side": k}) for k in path)
                continue
            look = horizon - time + 3 * eta
            letters, hit, end = self._scan(state, look, d)
            first = False
            if hit is None:
                return self._stop(state, horizon, time, d, letters, events, segments, crossings, record_letters)
            tc, j = hit
            cr = self._crossing_data(end, j, time + tc)
            w = self.scale * math.sin(cr.alpha)
            if cr.forward and abs(w) < 2 * eps:
                entry = tc - 3 * eta
                if entry < -1e-12:
                    raise EventResolutionFailure("box entry precedes the current time; state was inside the box")
                entry = max(entry, 0.0)
                if time + entry > horizon:
                    return self._stop(state, horizon, time, d, letters, events, segments, crossings, record_letters)
                self._finish_geo(state, entry, d, time, letters, events, segments, record_letters)
                time += entry
                s_cross = cr.sigma / self.scale
                if d > 0:
                    box = Box(end.deck, cr.lift, s_cross, w, 0.0)
                    events.append(Event("box_entry", time, {"s": s_cross % (2 * math.pi), "w": w}))
                else:
                    s_entry = s_cross - float(self.twist.f(w))
                    box = Box(end.deck, cr.lift, s_entry, w, self.box_total(w))
                    events.append(Event("box_entry_backward", -time, {"s": s_cross % (2 * math.pi), "w": w}))
                state = box
                continue
            if time + tc > horizon:
                return self._stop(state, horizon, time, d, letters, events, segments, crossings, record_letters)
            self._finish_geo(state, tc, d, time, letters, events, segments, record_letters)
            time += tc
            crossings.append(cr)
            direction = "forward" if cr.forward else "backward"
            events.append(Event("torus_crossing", d * time, {"direction": direction, "in_box": False}))
            state = end
            if (stop_at_forward_crossing and d > 0 and cr.forward) or stop_at_crossing:
                return state, time, events, segments, crossings

    def _stop(self, geo, horizon, time, d, letters, events, segments, crossings, record_letters):
        self._finish_geo(geo, horizon - time, d, time, letters, events, segments, record_letters)
        end = self._scan(geo, horizon - time, d)[2]
        return end, horizon, events, segments, crossings

    def _finish_geo(self, geo, duration, d, t0, letters, events, segments, record_letters):
        segments.append(Segment(t0, t0 + duration, geo, d))
        if record_letters:
            for t, k in letters:
                if t <= duration:
                    events.append(Event("domain_letter", d * (t0 + t), {"side": k}))

    # public API

    def flow(self, start: FlowState | np.ndarray | Geo | Box, T: float, dt: float | None = None) -> Trajectory:
        """Hybrid evolution for Reeb time ``T`` with samples every ``dt``."""
        if isinstance(start, FlowState):
            state = self.classify(start.frame) if start.chart_tag is ChartTag.BUNDLE else self._from_box_state(start)
        elif isinstance(start, (Geo, Box)):
            state = start
        else:
            state = self.classify(np.asarray(start, dtype=float))
        end, total, events, segments, crossings = self.run(state, T)
        dt = dt if dt is not None else min(self.eta, self.params.delta) / 4
        samples = self._sample(segments, dt)
        return Trajectory(samples, events, math.copysign(total, T) if T else 0.0, state, end, segments, crossings)

    def _from_box_state(self, st: FlowState) -> Box:
        t, s, w = st.box
        return Box(np.eye(2), np.eye(2), s, w, float(self.twist.clock(t, w, switched=False)))

    def state_of(self, st: Geo | Box) -> FlowState:
        if isinstance(st, Geo):
            return FlowState(st.cover)
        return self.box_state(st)

    def _sample(self, segments: list[Segment], dt: float) -> list[tuple[float, FlowState]]:
        out = []
        for seg in segments:
            n = max(1, int(math.ceil((seg.t1 - seg.t0) / dt)))
            for i in range(n + (1 if seg is segments[-1] else 0)):
                tau = min(i * dt, seg.t1 - seg.t0)
                out.append((seg.direction * (seg.t0 + tau), self._state_at(seg, tau)))
        return out

    def _state_at(self, seg: Segment, tau: float) -> FlowState:
        st = seg.state
        if isinstance(st, Geo):
            return FlowState(st.deck @ st.local @ mb.flow_matrix(seg.direction * tau))
        box = Box(st.deck, st.lift, st.s, st.w, st.clock + seg.direction * tau)
        return self.box_state(box)

    def endpoint_frame(self, st: Geo | Box) -> np.ndarray:
        return st.cover if isinstance(st, Geo) else self.box_state(st).frame

    # return map on the torus section

    def return_map(self, sigma: float, alpha: float, max_time: float = 60.0) -> tuple[float, float, float, list[Crossing]]:
        """Next forward torus crossing after ``(sigma, alpha)`` and the Reeb time to reach it."""
        state = self.section_state(sigma, alpha)
        end, t, _, _, crossings = self.run(state, max_time, stop_at_forward_crossing=True, record_letters=False)
        if not crossings or not crossings[-1].forward:
            raise HorizonExceeded("no forward crossing within the return-time budget")
        last = crossings[-1]
        return last.sigma % self.period, last.alpha, t, crossings
