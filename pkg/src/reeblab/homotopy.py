"""Homotopy classes of trajectories and closed orbits.

Geodesic pieces are labelled by the tiles they pass through.  For orbits of
the surgered flow the torus over the separating geodesic is incompressible,
so a closed orbit that crosses it is described by the cyclic sequence of
arcs between crossings.  Each arc runs from one lift of the separating
geodesic to another inside a single handle, and the relative deck element
between the two lifts lies in that handle's free subgroup.  Its double coset
modulo the boundary element is the arc's label.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from math import gcd

import numpy as np

from . import mobius as mb
from .census import BOUNDARY_WORDS, ConjugacyClassRecord, Side, classify_word
from .errors import Lemma2Violation
from .flow import Crossing, SurgeredFlow, Trajectory
from .words import SurfaceGroup, Word, conjugate_eq, default_surface_group, free_reduce, inverse

__all__ = [
    "CrossingSequence",
    "TorusLoop",
    "conjugate_eq",
    "double_coset_form",
    "is_contractible",
    "record_word",
    "surgered_class",
    "torus_counterexample",
]

# boundary element of each handle as a word in that handle's letters
HANDLE_BOUNDARY = {Side.S1: "abAB", Side.S2: "dcDC"}
COSET_RANGE = 3


def record_word(traj: Trajectory, flow: SurgeredFlow) -> Word:
    """Deck word carrying the initial lift of the trajectory to its final lift."""
    words = flow.domain.sides
    return Word(free_reduce("".join(words[k].word for k in traj.letters)))


def double_coset_form(word: str, side: Side) -> str:
    """Shortest, then lexicographically least, representative of ``<K> w <K>``.

    ``K`` is the handle's boundary word; powers up to ``COSET_RANGE`` on each side
    are tried, which suffices for relative words produced by short arcs.
    """
    k = HANDLE_BOUNDARY[Side(side)]
    powers = {0: ""}
    for n in range(1, COSET_RANGE + 1):
        powers[n] = k * n
        powers[-n] = inverse(k) * n
    best = None
    for i in powers.values():
        for j in powers.values():
            u = free_reduce(i + word + j)
            if best is None or (len(u), u) < (len(best), best):
                best = u
    return best


def _twisted(word: str, side: str, left: int, right: int) -> str:
    k = HANDLE_BOUNDARY[Side(side)]
    lw = (inverse(k) * left) if left > 0 else (k * -left)
    rw = (k * right) if right > 0 else (inverse(k) * -right)
    return free_reduce(lw + word + rw)


def _best_right(word: str, side: str, left: int) -> tuple[str, int]:
    best, arg = None, 0
    for m in range(-COSET_RANGE - len(word) // 4, COSET_RANGE + len(word) // 4 + 1):
        u = _twisted(word, side, left, m)
        if best is None or (len(u), u) < (len(best), best):
            best, arg = u, m
    return best, arg


def _normal_form(arcs: tuple[tuple[str, str], ...], start_twist: int) -> tuple[tuple[str, str], ...]:
    """Greedy normal form of an arc sequence modulo twists by the boundary element."""
    out, carry = [], start_twist
    for i, (side, word) in enumerate(arcs):
        if i == len(arcs) - 1:
            out.append((side, _twisted(word, side, carry, start_twist)))
        else:
            u, carry = _best_right(word, side, carry)
            out.append((side, u))
    return tuple(out)


@dataclass(frozen=True)
class CrossingSequence:
    """Cyclic list of handle arcs of a closed orbit crossing the torus.

    ``arcs`` holds exact relative words between consecutive lifts, each lift
    normalized by the position of the crossing on it.  Two sequences describe
    the same class when they agree up to rotation and up to moving powers of
    the boundary element across arc junctions; :meth:`canonical` picks one
    representative of that equivalence.
    """

    arcs: tuple[tuple[str, str], ...]
    min_exit_distance: float = math.nan

    @property
    def crossing_count(self) -> int:
        return len(self.arcs)

    @property
    def sides(self) -> tuple[str, ...]:
        return tuple(s for s, _ in self.arcs)

    def canonical(self) -> tuple[tuple[str, str], ...]:
        n = len(self.arcs)
        if not n:
            return ()
        best = None
        for i in range(n):
            rot = self.arcs[i:] + self.arcs[:i]
            for m0 in range(-COSET_RANGE, COSET_RANGE + 1):
                form = _normal_form(rot, m0)
                key = (sum(len(w) for _, w in form), form)
                if best is None or key < best:
                    best = key
        return best[1]

    def relative_labels(self) -> tuple[str, ...]:
        """Double-coset label of each arc; empty exactly when the arc is homotopic into the torus."""
        return tuple(double_coset_form(w, Side(s)) for s, w in self.arcs)

    def alternates(self) -> bool:
        n = len(self.arcs)
        return n % 2 == 0 and all(self.arcs[i][0] != self.arcs[(i + 1) % n][0] for i in range(n))

    def __eq__(self, other) -> bool:
        return isinstance(other, CrossingSequence) and self.canonical() == other.canonical()

    def __hash__(self) -> int:
        return hash(self.canonical())

    def to_json(self) -> dict:
        return {"crossing_count": self.crossing_count, "arcs": [list(a) for a in self.canonical()]}


@dataclass(frozen=True)
class OneSidedClass:
    """Class of an orbit that never crosses the torus."""

    record: ConjugacyClassRecord | None
    word: str
    side: Side
    tangent: bool = False

    def to_json(self) -> dict:
        return {"word": self.word, "side": self.side.value, "tangent": self.tangent}


def _distance_to_separating(flow: SurgeredFlow, frame: np.ndarray) -> float:
    geo = flow.localize(frame)
    z = mb.base_point(geo.local)
    best = math.inf
    for li in flow.lifts_inv:
        u = complex(mb.apply(li, z))
        best = min(best, abs(math.asinh(u.real / u.imag)))
    return best


def _anchored_lift(flow: SurgeredFlow, c: Crossing) -> np.ndarray:
    """Cover lift through the crossing, shifted along itself so the crossing sits in ``[0, l)``."""
    n = math.floor(c.sigma / flow.period)
    return c.cover_lift @ np.diag([flow.lam**n, flow.lam**-n])


def _arc_label(flow: SurgeredFlow, c0: Crossing, c1: Crossing) -> tuple[str, str]:
    """Side and exact relative word of the arc from crossing ``c0`` to ``c1``."""
    side = Side.S2 if c0.forward else Side.S1
    rel = np.linalg.solve(_anchored_lift(flow, c0), _anchored_lift(flow, c1))
    return side.value, flow.surface.handle_word(rel, side.value)


def surgered_class(
    traj: Trajectory,
    flow: SurgeredFlow,
    group: SurfaceGroup | None = None,
    check_collar: bool = True,
) -> CrossingSequence | OneSidedClass:
    """Class of a closed trajectory (its total time is one period).

    Without crossings the orbit lies in one handle and gets its surface-group
    class.  Otherwise the orbit is cut at its crossings; one extra crossing
    past the end closes the cycle.  Each arc must leave the collar of width
    ``delta``, else ``Lemma2Violation`` is raised.
    """
    group = group or default_surface_group()
    crossings = list(traj.crossings)
    if not crossings:
        word = record_word(traj, flow).letters
        frame = flow.endpoint_frame(traj.start)
        tangent = _distance_to_separating(flow, frame) < 1e-9 and _is_tangent(flow, frame)
        if not word:
            return OneSidedClass(None, "", Side.S1, tangent)
        canonical, side, _ = classify_word(word, group)
        if tangent:
            side = Side.S1
        return OneSidedClass(None, canonical, side, tangent)
    _, t_more, _, more_segments, more = flow.run(traj.end, flow.t_cap, stop_at_crossing=True, record_letters=False)
    if not more:
        raise Lemma2Violation("no crossing after the end of a crossing orbit")
    chain = crossings + [more[0]]
    arcs = tuple(_arc_label(flow, a, b) for a, b in zip(chain, chain[1:]))
    min_exit = math.inf
    if check_collar:
        extra = [
            (traj.total_time + seg.t0 + tau, flow._state_at(seg, tau).frame)
            for seg in more_segments
            for tau in np.arange(0.0, seg.t1 - seg.t0, flow.params.delta / 4)
        ]
        pts = [(t, st.frame) for t, st in traj.samples] + extra
        times = [c.time for c in crossings] + [traj.total_time + more[0].time]
        for a, b in zip(times, times[1:]):
            inside = [f for t, f in pts if a < t < b]
            far = max((_distance_to_separating(flow, f) for f in inside), default=0.0)
            if far <= flow.params.delta:
                raise Lemma2Violation(f"arc over [{a:.4g}, {b:.4g}] stays within the collar (max distance {far:.4g})")
            min_exit = min(min_exit, far)
    del t_more
    return CrossingSequence(arcs, min_exit)


def _is_tangent(flow: SurgeredFlow, frame: np.ndarray) -> bool:
    geo = flow.localize(frame)
    for li in flow.lifts_inv:
        (a, b), (c, d) = li @ geo.local
        if abs(a * c) < 1e-12 or abs(b * d) < 1e-12:
            return True
    return False


def is_contractible(cls: CrossingSequence | OneSidedClass | ConjugacyClassRecord | Word | str) -> bool:
    """Whether a recorded class is the trivial class."""
    if isinstance(cls, CrossingSequence):
        if cls.crossing_count >= 2:
            return False
        return not any(cls.relative_labels())
    if isinstance(cls, OneSidedClass):
        return cls.word == ""
    if isinstance(cls, ConjugacyClassRecord):
        return cls.cyclic_word == ""
    return default_surface_group().is_trivial(str(cls))


def boundary_word(side: Side | str) -> str:
    return BOUNDARY_WORDS[Side(side)]


# the flat 3-torus construction


@dataclass(frozen=True, eq=False)
class TorusLoop:
    """Closed curve in the flat 3-torus, stored as a lifted polyline sampled in time."""

    times: np.ndarray
    points: np.ndarray
    period: float

    def lifted(self, t: float) -> np.ndarray:
        """Position in R^3 of the periodic lift at time ``t``."""
        n, r = divmod(t, self.period)
        shift = self.points[-1] - self.points[0]
        p = np.array([np.interp(r, self.times, self.points[:, k]) for k in range(3)])
        return p + n * shift

    def position(self, t: float) -> np.ndarray:
        return self.lifted(t) % 1.0

    @property
    def primitive_class(self) -> tuple[int, int, int]:
        d = np.rint(self.points[-1] - self.points[0]).astype(int)
        return int(d[0]), int(d[1]), int(d[2])

    def closes(self, tol: float = 1e-12) -> bool:
        d = self.points[-1] - self.points[0]
        return bool(np.all(np.abs(d - np.rint(d)) < tol))

    @property
    def is_primitive(self) -> bool:
        x, y, z = self.primitive_class
        return gcd(gcd(abs(x), abs(y)), abs(z)) == 1


def torus_distance(p: np.ndarray, q: np.ndarray) -> float:
    d = np.asarray(p, dtype=float) - np.asarray(q, dtype=float)
    d -= np.rint(d)
    return float(np.linalg.norm(d))


def loop_distance(a: TorusLoop, b: TorusLoop, samples: int = 20001) -> float:
    """Sup over ``[0, max(T_a, T_b)]`` of the distance, each loop run at its own period."""
    ts = np.linspace(0.0, max(a.period, b.period), samples)
    return max(torus_distance(a.lifted(t), b.lifted(t)) for t in ts)


def _staircase(n: int = 4001) -> tuple[np.ndarray, np.ndarray, float]:
    """Unit-speed planar path: up one unit, a smooth diagonal step by (1, 1), up one unit.

    Returns sample times, planar points and the time ``T1`` at which the
    path reaches ``(1, 2)``.
    """
    u = np.linspace(0.0, 1.0, n)
    x = u * u * u * (10.0 - 15.0 * u + 6.0 * u * u)  # tangent vertical at both ends
    diag = np.column_stack([x, 1.0 + u])
    seg = np.linalg.norm(np.diff(diag, axis=0), axis=1)
    arc = np.concatenate([[0.0], np.cumsum(seg)])
    t1 = 1.0 + arc[-1]
    up = np.linspace(0.0, 1.0, n)
    times = np.concatenate([up, 1.0 + arc[1:], t1 + up[1:]])
    pts = np.concatenate(
        [np.column_stack([np.zeros(n), up]), diag[1:], np.column_stack([np.ones(n - 1), 2.0 + up[1:]])]
    )
    return times, pts, t1


def torus_counterexample(delta: float, K: float = 4.0) -> tuple[TorusLoop, TorusLoop]:
    """Two embedded primitive loops in distinct classes that stay ``delta``-close.

    The first loop runs the staircase up to ``(1, 2)`` and closes.  The second
    runs it to ``(1, 3)`` at height ``delta/K``, lifted a little more on its
    last vertical run so that it is embedded.  Each loop extended with its own
    period agrees with the shared staircase on ``[0, T1 + 1]``.
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    times, pts, t1 = _staircase()
    first = times <= t1
    z1 = np.zeros(int(first.sum()))
    loop1 = TorusLoop(times[first], np.column_stack([pts[first], z1]), t1)
    h = delta / K
    late = np.clip(times - t1, 0.0, 1.0)
    z2 = h * (1.0 + np.sin(np.pi * late) ** 2)
    loop2 = TorusLoop(times, np.column_stack([pts, z2]), t1 + 1.0)
    return loop1, loop2
