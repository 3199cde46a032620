"""Genus-2 Fuchsian groups, Dirichlet domains and the marked separating geodesic.

The default surface doubles a one-holed torus with handle traces
``tr A = tr B = 3, tr AB = 4`` across its boundary geodesic.  The group is
normalized so that the separating geodesic lifts to the imaginary axis,
translated upward by the commutator ``K = [a, b]``; the handle ``<a, b>``
lives on the left half-plane and ``<c, d>`` on the right.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.spatial import HalfspaceIntersection

from . import mobius as mb
from .errors import BadParams, DiscretenessSuspect, NonTermination
from .mobius import MobiusElement
from .words import SURFACE_RELATOR, free_reduce, inverse

MAX_REDUCTION_STEPS = 10**6


@dataclass(frozen=True)
class FenchelNielsen:
    """Two one-holed tori given by handle traces, glued with a twist (length)."""

    handle1: tuple[float, float, float] = (3.0, 3.0, 4.0)
    handle2: tuple[float, float, float] = (3.0, 3.0, 4.0)
    twist: float = 0.0


def fricke_commutator_trace(x: float, y: float, z: float) -> float:
    return x * x + y * y + z * z - x * y * z - 2.0


def _handle_pair(x: float, y: float, z: float) -> tuple[np.ndarray, np.ndarray]:
    if min(abs(x), abs(y), abs(z)) <= 2.0:
        raise BadParams(f"handle traces {(x, y, z)} must all exceed 2 in modulus")
    if fricke_commutator_trace(x, y, z) >= -2.0:
        raise BadParams(f"handle traces {(x, y, z)} do not bound a hyperbolic one-holed torus")
    s = (z + math.copysign(math.sqrt(z * z - 4.0), z)) / 2.0
    a = np.array([[x, -1.0], [1.0, 0.0]])
    b = np.array([[0.0, s], [-1.0 / s, y]])
    return a, b


def _commutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    ai = np.array([[a[1, 1], -a[0, 1]], [-a[1, 0], a[0, 0]]])
    bi = np.array([[b[1, 1], -b[0, 1]], [-b[1, 0], b[0, 0]]])
    return a @ b @ ai @ bi


def _mirror(m: np.ndarray) -> np.ndarray:
    """Conjugate by the reflection ``z -> -conj(z)`` in the imaginary axis."""
    return np.array([[m[0, 0], -m[0, 1]], [-m[1, 0], m[1, 1]]])


def _normalized_handle(traces) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Handle generators with commutator on the upward imaginary axis, core on the left."""
    a, b = _handle_pair(*traces)
    k = MobiusElement(_commutator(a, b))
    rep, att = k.fixed_points()
    p = np.array([[att, rep], [1.0, 1.0]]) if att > rep else np.array([[-att, rep], [-1.0, 1.0]])
    p = mb.normalize(p)
    pi = np.linalg.inv(p)
    a, b = pi @ a @ p, pi @ b @ p
    fa = MobiusElement(a).fixed_points()
    if fa[0] > 0:
        a, b = _mirror(a), _mirror(b)
    kk = _commutator(a, b)
    kk[0, 1] = kk[1, 0] = 0.0
    return a, b, kk


def klein_from_half_plane(z, x0: complex):
    zeta = (z - x0) / (z - np.conj(x0))
    return 2.0 * zeta / (1.0 + np.abs(zeta) ** 2)


def half_plane_from_klein(k, x0: complex):
    k = np.asarray(k, dtype=complex)
    zeta = k / (1.0 + np.sqrt(np.maximum(0.0, 1.0 - np.abs(k) ** 2)))
    return (x0 - zeta * np.conj(x0)) / (1.0 - zeta)


class OrbitIndex:
    """Set of orbit points keyed on a grid adapted to the hyperbolic metric.

    Distinct orbit points of a surface group are at least a systole apart, so a
    cell of hyperbolic size ``cell`` identifies a point; lookups probe the
    corners of a ``tol`` box to absorb rounding noise at cell edges.
    """

    def __init__(self, cell: float = 0.2, tol: float = 0.02):
        self.cell = cell
        self.tol = tol
        self._keys: set[tuple[int, int]] = set()

    def _key(self, x: float, logy: float) -> tuple[int, int]:
        j = round(logy / self.cell)
        return j, round(x / (math.exp(j * self.cell) * self.cell))

    def _probe(self, z: complex):
        x, y = z.real, z.imag
        ly = math.log(y)
        for dv in (-self.tol, self.tol):
            for du in (-self.tol, self.tol):
                yield self._key(x + du * y, ly + dv)

    def __contains__(self, z: complex) -> bool:
        return any(k in self._keys for k in self._probe(z))

    def add(self, z: complex) -> None:
        self._keys.add(self._key(z.real, math.log(z.imag)))

    def __len__(self) -> int:
        return len(self._keys)


def orbit_ball(
    generators: dict[str, np.ndarray],
    x0: complex,
    radius: float,
    prune: float | None = None,
    max_length: int | None = None,
    node_limit: int = 5_000_000,
) -> tuple[np.ndarray, list[str]]:
    """Group elements moving ``x0`` at most ``radius``, found breadth-first.

    Words are strings over the generator labels (uppercase for inverses).
    Intermediate products are kept while their displacement is below ``prune``.
    """
    from .errors import BudgetExceeded

    prune = radius if prune is None else prune
    letters, mats = [], []
    for label, m in generators.items():
        letters += [label, label.upper()]
        mats += [m, np.linalg.inv(m)]
    gen = np.array(mats)
    ident = np.eye(2)
    seen = OrbitIndex()
    seen.add(complex(x0))
    all_m = [ident[None]]
    all_w = [""]
    frontier, fwords = ident[None], [""]
    depth = 0
    while len(frontier) and (max_length is None or depth < max_length):
        depth += 1
        prod = np.einsum("nij,gjk->ngik", frontier, gen).reshape(-1, 2, 2)
        pts = mb.apply(prod.transpose(1, 2, 0), x0)
        dist = mb.hyperbolic_distance(x0, pts)
        keep = np.nonzero(dist <= prune)[0]
        new_m, new_w = [], []
        for idx in keep.tolist():
            z = complex(pts[idx])
            if z in seen:
                continue
            n, g = divmod(idx, len(letters))
            w = fwords[n]
            if w and w[-1] == letters[g].swapcase():
                continue
            seen.add(z)
            new_m.append(prod[idx])
            new_w.append(w + letters[g])
        if len(seen) > node_limit:
            raise BudgetExceeded(f"orbit ball exceeded {node_limit} nodes")
        frontier = np.array(new_m).reshape(-1, 2, 2)
        fwords = new_w
        all_m.append(frontier)
        all_w += new_w
    mats_all = np.concatenate(all_m)
    pts = mb.apply(mats_all.transpose(1, 2, 0), x0)
    inside = mb.hyperbolic_distance(x0, pts) <= radius
    return mats_all[inside], [w for w, k in zip(all_w, inside) if k]


@dataclass(frozen=True, eq=False)
class DomainSide:
    index: int
    element: np.ndarray
    word: str
    partner: int
    vertices: tuple[complex, complex]


class DirichletDomain:
    """Dirichlet polygon of a Fuchsian group around a base point.

    Built in the Klein model centred at the base point, where bisectors are
    straight chords.  Infinite-area groups are clipped to the ideal boundary.
    """

    def __init__(self, x0: complex, elements: np.ndarray, words: list[str], cocompact: bool = True):
        self.x0 = complex(x0)
        self.cocompact = cocompact
        pts = mb.apply(elements.transpose(1, 2, 0), self.x0)
        dist = mb.hyperbolic_distance(self.x0, pts)
        nz = dist > 1e-9
        elements, pts, dist = elements[nz], pts[nz], dist[nz]
        words = [w for w, k in zip(words, nz) if k]
        kp = klein_from_half_plane(pts, self.x0)
        u = kp / np.abs(kp)
        hs = np.column_stack([u.real, u.imag, -np.tanh(dist / 2.0)])
        th = np.linspace(0, 2 * np.pi, 512, endpoint=False)
        clip = np.column_stack([np.cos(th), np.sin(th), -np.full_like(th, 1.0 - 1e-9)])
        hs = np.vstack([hs, clip])
        inter = HalfspaceIntersection(hs, np.zeros(2))
        active = np.asarray(inter.dual_vertices)
        # edges of a convex polygon about the origin run counterclockwise by normal angle
        order = active[np.argsort(np.arctan2(hs[active, 1], hs[active, 0]))].tolist()
        nreal = len(elements)
        lines = hs[order]
        verts = []
        for i in range(len(order)):
            p, q = lines[i - 1], lines[i]
            a = np.array([p[:2], q[:2]])
            verts.append(np.linalg.solve(a, -np.array([p[2], q[2]])))
        klein_vertices = np.array(verts)
        self.vertices = half_plane_from_klein(klein_vertices[:, 0] + 1j * klein_vertices[:, 1], self.x0)
        sides: list[DomainSide] = []
        for pos, h in enumerate(order):
            if h >= nreal:
                continue
            v0 = self.vertices[pos]
            v1 = self.vertices[(pos + 1) % len(order)]
            sides.append(DomainSide(len(sides), elements[h].copy(), words[h], -1, (v0, v1)))
        self.sides = self._pair(sides)
        self.clipped = any(h >= nreal for h in order)
        self.side_elements = np.array([s.element for s in self.sides])
        self.side_inverses = np.array([np.linalg.inv(s.element) for s in self.sides])
        self.side_points = mb.apply(self.side_elements.transpose(1, 2, 0), self.x0)
        with np.errstate(invalid="ignore"):
            r = float(np.max(mb.hyperbolic_distance(self.x0, self.vertices)))
        self.circumradius = math.inf if self.clipped or not math.isfinite(r) else r

    @staticmethod
    def _pair(sides: list[DomainSide]) -> list[DomainSide]:
        out = []
        for s in sides:
            inv = np.linalg.inv(s.element)
            partner = -1
            for t in sides:
                if MobiusElement(t.element).isclose(MobiusElement(inv), 1e-7):
                    partner = t.index
            out.append(DomainSide(s.index, s.element, s.word, partner, s.vertices))
        return out

    @property
    def area(self) -> float:
        """Hyperbolic area by a triangle fan from the base point."""
        total = 0.0
        n = len(self.vertices)
        for i in range(n):
            p, q = self.vertices[i], self.vertices[(i + 1) % n]
            a = float(mb.hyperbolic_distance(p, q))
            b = float(mb.hyperbolic_distance(self.x0, q))
            c = float(mb.hyperbolic_distance(self.x0, p))
            angles = []
            for opp, s1, s2 in ((a, b, c), (b, a, c), (c, a, b)):
                cos = (math.cosh(s1) * math.cosh(s2) - math.cosh(opp)) / (math.sinh(s1) * math.sinh(s2))
                angles.append(math.acos(max(-1.0, min(1.0, cos))))
            total += math.pi - sum(angles)
        return total

    def pairing_error(self) -> float:
        """Largest vertex mismatch when side pairings carry sides to partners."""
        worst = 0.0
        for s in self.sides:
            if s.partner < 0:
                return math.inf
            t = self.sides[s.partner]
            img = mb.apply(np.linalg.inv(s.element), np.array(s.vertices))
            err = max(abs(img[0] - t.vertices[1]), abs(img[1] - t.vertices[0]))
            worst = max(worst, float(err))
        return worst

    def contains(self, z: complex, tol: float = 1e-10) -> bool:
        c0 = abs(z - self.x0) ** 2 / self.x0.imag
        ck = np.abs(z - self.side_points) ** 2 / self.side_points.imag
        return bool(np.all(c0 <= ck * (1 + tol) + tol))

    def reduce_point(self, z: complex) -> tuple[complex, list[int]]:
        """Move ``z`` into the domain; returns the point and side indices used.

        The original point equals the product of the side elements (in order)
        applied to the returned point.
        """
        z = complex(z)
        path: list[int] = []
        sp = self.side_points
        for _ in range(MAX_REDUCTION_STEPS):
            c0 = abs(z - self.x0) ** 2 / self.x0.imag
            ck = np.abs(z - sp) ** 2 / sp.imag
            k = int(np.argmin(ck))
            if not ck[k] < c0 * (1 - 1e-13):
                return z, path
            z = complex(mb.apply(self.side_inverses[k], z))
            path.append(k)
        raise NonTermination("domain reduction did not terminate")

    def word_of(self, path) -> str:
        return free_reduce("".join(self.sides[k].word for k in path))

    def element_of(self, path) -> np.ndarray:
        m = np.eye(2)
        for k in path:
            m = m @ self.sides[k].element
        return m


def _dirichlet(generators, x0, cocompact, max_length=None, radius=None):
    radius = 4.0 if radius is None else radius
    for _ in range(12):
        mats, words = orbit_ball(generators, x0, radius, prune=radius + 2.0, max_length=max_length)
        dom = DirichletDomain(x0, mats, words, cocompact=cocompact)
        if cocompact:
            if dom.clipped:
                radius += 1.5
                continue
            needed = 2.0 * dom.circumradius + 0.25
        else:
            finite = [
                float(mb.hyperbolic_distance(dom.x0, p))
                for s in dom.sides
                for p in s.vertices
                if abs(klein_from_half_plane(p, dom.x0)) < 0.999
            ]
            needed = 2.0 * max(finite, default=radius) + 0.25
        if needed <= radius:
            return dom
        radius = needed
    return dom


@dataclass(frozen=True, eq=False)
class FermiChart:
    """Fermi coordinates about the imaginary axis (the lift of the marked geodesic).

    ``sigma`` is arclength along the axis (height ``e^sigma``), ``rho`` the
    signed distance, positive on the right half-plane.
    """

    axis: MobiusElement
    width: float
    period: float

    @property
    def scale(self) -> float:
        return 2.0 * math.pi / self.period

    @staticmethod
    def to_fermi(z):
        z = np.asarray(z, dtype=complex)
        r = np.abs(z)
        return np.log(r), np.arcsinh(z.real / z.imag)

    @staticmethod
    def from_fermi(sigma, rho):
        return np.exp(sigma) * (np.tanh(rho) + 1j / np.cosh(rho))

    def angle_coordinate(self, sigma):
        return np.mod(np.asarray(sigma) * self.scale, 2 * math.pi)

    def in_collar(self, z) -> bool:
        return bool(np.all(np.abs(self.to_fermi(z)[1]) <= self.width))


@dataclass(eq=False)
class FuchsianSurface:
    generators: dict[str, MobiusElement]
    relator: str
    domain: DirichletDomain
    separating_axis: MobiusElement
    fn_params: FenchelNielsen
    boundary_split: dict[str, str] = field(default_factory=lambda: {"S1": "ab", "S2": "cd"})

    @property
    def generator_matrices(self) -> dict[str, np.ndarray]:
        return {k: v.entries.copy() for k, v in self.generators.items()}

    @property
    def axis_length(self) -> float:
        return mb.translation_length(self.separating_axis)

    def evaluate(self, word: str) -> np.ndarray:
        m = np.eye(2)
        table = {}
        for k, v in self.generators.items():
            table[k] = v.entries
            table[k.upper()] = v.inverse().entries
        for x in word:
            m = m @ table[x]
        return m

    def fermi_chart(self, width: float) -> FermiChart:
        return FermiChart(self.separating_axis, width, self.axis_length)

    def reduce_to_domain(self, p: complex) -> tuple[complex, str]:
        """Reduce a point to the Dirichlet domain; ``evaluate(word)`` maps it back."""
        z, path = self.domain.reduce_point(p)
        return z, self.domain.word_of(path)

    @cached_property
    def side_generators(self) -> dict[str, np.ndarray]:
        return {f"s{i}": s.element for i, s in enumerate(self.domain.sides)}

    def ball(self, radius: float) -> np.ndarray:
        """Elements moving the base point at most ``radius`` (complete).

        Breadth-first search over side pairings, pruned at ``radius`` plus the
        domain circumradius: the segment to any target crosses only tiles whose
        centres lie within that bound.
        """
        key = round(radius, 6)
        cache = self.__dict__.setdefault("_ball_cache", {})
        if key not in cache:
            cache[key] = _side_ball(self.domain, radius)
        return cache[key]

    @cached_property
    def systole_bound(self) -> float:
        return min(mb.translation_length(g) for g in self.generators.values())

    def handle_domain(self, side: str) -> DirichletDomain:
        cache = self.__dict__.setdefault("_handle_domains", {})
        if side not in cache:
            labels = self.boundary_split[side]
            gens = {x: self.generators[x].entries for x in labels}
            x0 = -1.0 + 1.0j if side == "S1" else 1.0 + 1.0j
            cache[side] = _dirichlet(gens, x0, cocompact=False, max_length=10)
        return cache[side]

    def handle_word(self, element: np.ndarray, side: str) -> str:
        """Reduced free word of an element of the handle subgroup of ``side``."""
        dom = self.handle_domain(side)
        z, path = dom.reduce_point(complex(mb.apply(element, dom.x0)))
        if abs(z - dom.x0) > 1e-6 * abs(dom.x0):
            raise ValueError("element does not lie in the handle subgroup")
        return dom.word_of(path)


def _side_ball(domain: DirichletDomain, radius: float) -> np.ndarray:
    """Breadth-first ball over side pairings."""
    gens = domain.side_elements
    x0 = domain.x0
    prune = radius + domain.circumradius + 1e-9
    seen = OrbitIndex()
    seen.add(complex(x0))
    all_m = [np.eye(2)[None]]
    frontier = np.eye(2)[None]
    while len(frontier):
        prod = np.einsum("nij,gjk->ngik", frontier, gens).reshape(-1, 2, 2)
        pts = mb.apply(prod.transpose(1, 2, 0), x0)
        dist = mb.hyperbolic_distance(x0, pts)
        keep = np.nonzero(dist <= prune)[0]
        new = []
        for idx in keep.tolist():
            z = complex(pts[idx])
            if z in seen:
                continue
            seen.add(z)
            new.append(idx)
        frontier = prod[new]
        all_m.append(frontier)
    mats = np.concatenate(all_m)
    pts = mb.apply(mats.transpose(1, 2, 0), x0)
    return mats[mb.hyperbolic_distance(x0, pts) <= radius]


DEFAULT_BASE_POINT = 1.4j


def build_genus2_surface(fn: FenchelNielsen | None = None, base_point: complex = DEFAULT_BASE_POINT) -> FuchsianSurface:
    """Assemble the genus-2 group from two handles glued along the imaginary axis."""
    fn = fn or FenchelNielsen()
    t1 = fricke_commutator_trace(*fn.handle1)
    t2 = fricke_commutator_trace(*fn.handle2)
    if t1 >= -2.0 or t2 >= -2.0:
        raise BadParams("handles must have hyperbolic boundary (commutator trace < -2)")
    l1, l2 = 2 * math.acosh(-t1 / 2), 2 * math.acosh(-t2 / 2)
    if abs(l1 - l2) > 1e-9:
        raise BadParams(f"boundary lengths differ: {l1} vs {l2}")
    a, b, k = _normalized_handle(fn.handle1)
    a2, b2, _ = _normalized_handle(fn.handle2)
    tw = mb.flow_matrix(fn.twist)
    twi = mb.flow_matrix(-fn.twist)
    c = tw @ _mirror(b2) @ twi
    d = tw @ _mirror(a2) @ twi
    gens = {"a": MobiusElement(a), "b": MobiusElement(b), "c": MobiusElement(c), "d": MobiusElement(d)}
    mats = {x: g.entries for x, g in gens.items()}
    rel = np.eye(2)
    for x in SURFACE_RELATOR:
        rel = rel @ (mats[x] if x.islower() else np.linalg.inv(mats[x.lower()]))
    if not MobiusElement(rel).isclose(MobiusElement.identity(), 1e-9):
        raise BadParams("relator does not vanish; handles are inconsistent")
    domain = _dirichlet(mats, base_point, cocompact=True)
    _check_discreteness(mats, base_point)
    surf = FuchsianSurface(gens, SURFACE_RELATOR, domain, MobiusElement(k), fn)
    err = domain.pairing_error()
    area = domain.area
    if err > 1e-7 or abs(area - 4 * math.pi) > 1e-6:
        raise DiscretenessSuspect(f"Dirichlet domain inconsistent: pairing error {err}, area {area}")
    return surf


def _check_discreteness(mats: dict[str, np.ndarray], x0: complex, max_length: int = 10) -> None:
    """No non-identity element within 1e-3 of the identity in a bounded ball."""
    elems, words = orbit_ball(mats, x0, radius=4.0, prune=6.0, max_length=max_length)
    ident = np.eye(2)
    d = np.minimum(np.abs(elems - ident).max(axis=(1, 2)), np.abs(elems + ident).max(axis=(1, 2)))
    suspicious = (d > 1e-9) & (d < 1e-3)
    if np.any(suspicious):
        w = words[int(np.argmax(suspicious))]
        raise DiscretenessSuspect(f"word {w!r} is within 1e-3 of the identity")


def axis_frame(m: np.ndarray) -> np.ndarray:
    """Frame on the axis of a hyperbolic element, pointing toward its attracting end.

    In this frame the element acts as ``diag(e^{l/2}, e^{-l/2})`` up to sign.
    """
    vals, vecs = np.linalg.eig(np.asarray(m, dtype=float))
    order = np.argsort(-np.abs(vals.real))
    f = vecs[:, order].real
    if np.linalg.det(f) < 0:
        f[:, 1] = -f[:, 1]
    return mb.normalize(f)


@dataclass(frozen=True, eq=False)
class AxisWalk:
    """Tiles crossed by a closed geodesic over one period, starting inside the domain.

    ``sides[j]`` is the side of the domain exited at step ``j`` and ``times[j]``
    the arclength at which it happens; ``frames[j]`` is the frame at the start
    of tile ``j`` expressed in domain coordinates.
    """

    start: np.ndarray
    conjugator: np.ndarray
    sides: tuple[int, ...]
    times: tuple[float, ...]
    frames: tuple[np.ndarray, ...]
    period: float

    def element(self, domain: DirichletDomain) -> np.ndarray:
        return domain.element_of(self.sides)


def tile_exit(domain: DirichletDomain, frame: np.ndarray) -> tuple[float, int]:
    """Time until the geodesic through ``frame`` leaves the domain, and the side crossed.

    The point ``frame(i e^t)`` is nearer the side point ``p_k`` than the base point
    exactly when a function linear in ``X = e^{2t}`` becomes positive.
    """
    fi = np.array([[frame[1, 1], -frame[0, 1]], [-frame[1, 0], frame[0, 0]]])
    q0 = mb.apply(fi, domain.x0)
    qk = mb.apply(fi, domain.side_points)
    v0, vk = q0.imag, qk.imag
    offset = abs(q0) ** 2 / v0 - np.abs(qk) ** 2 / vk
    slope = 1.0 / v0 - 1.0 / vk
    with np.errstate(divide="ignore", invalid="ignore"):
        x = np.where(slope > 0, -offset / slope, np.inf)
    k = int(np.argmin(x))
    if not math.isfinite(x[k]):
        raise NonTermination("geodesic never leaves the domain")
    return 0.5 * math.log(max(float(x[k]), 1.0)), k


WALK_OFFSET = 0.318309886


def walk_axis(domain: DirichletDomain, m: np.ndarray, max_steps: int = 100_000) -> AxisWalk:
    """Follow the axis of ``m`` through tiles for one period.

    The walk starts a fixed fraction of a period past the axis foot, keeping
    the start away from the special points of the base-point geometry.
    """
    length = mb.translation_length(m)
    frame = axis_frame(m) @ mb.flow_matrix(WALK_OFFSET * length)
    foot = mb.apply(frame, 1j)
    z, path = domain.reduce_point(complex(foot))
    h = domain.element_of(path)
    hi = np.linalg.inv(h)
    frame = hi @ frame
    start = frame.copy()
    sides, times, frames = [], [], []
    elapsed = 0.0
    for _ in range(max_steps):
        tau, k = tile_exit(domain, frame)
        if elapsed + tau >= length:
            return AxisWalk(start, h, tuple(sides), tuple(times), tuple(frames) + (frame,), length)
        frames.append(frame)
        elapsed += tau
        sides.append(k)
        times.append(elapsed)
        frame = domain.side_inverses[k] @ frame @ mb.flow_matrix(tau)
    raise NonTermination("axis walk exceeded step budget")


def cutting_key(domain: DirichletDomain, sides: tuple[int, ...]) -> tuple[int, ...]:
    """Rotation- and orientation-free key of a cyclic side sequence."""
    if not sides:
        return ()
    rev = tuple(domain.sides[k].partner for k in reversed(sides))
    best = None
    for seq in (tuple(sides), rev):
        n = len(seq)
        for i in range(n):
            r = seq[i:] + seq[:i]
            if best is None or r < best:
                best = r
    return best


def geodesic_segment_to_line(m: np.ndarray, tmax: float) -> tuple[float, bool]:
    """Distance from the segment ``m(i e^t)``, ``0 <= t <= tmax``, to the imaginary axis.

    Returns ``(sinh distance, crosses)``.  With ``w = m(iy)`` one has
    ``Re w / Im w = bd/y + ac y``, which is monotone or has a single extremum.
    """
    (a, b), (c, d) = m
    y1 = math.exp(tmax)

    def g(y):
        return b * d / y + a * c * y

    g0, g1 = g(1.0), g(y1)
    if g0 == 0.0 or g1 == 0.0 or (g0 > 0) != (g1 > 0):
        return 0.0, True
    best = min(abs(g0), abs(g1))
    if a * c != 0 and b * d / (a * c) > 0:
        ys = math.sqrt(b * d / (a * c))
        if 1.0 < ys < y1:
            gs = g(ys)
            if (gs > 0) != (g0 > 0):
                return 0.0, True
            best = min(best, abs(gs))
    return best, False


def separating_lifts(surface: FuchsianSurface, reach: float) -> np.ndarray:
    """Elements ``m`` whose images ``m(iR)`` are the lifts of the separating geodesic within ``reach`` of the base point.

    Each lift appears once, normalized so the foot of the base point lies at
    arclength in ``[0, l)`` along ``iR`` (with ``m`` sending ``iR`` upward to the lift).
    """
    cache = surface.__dict__.setdefault("_lift_cache", {})
    key = round(reach, 6)
    if key in cache:
        return cache[key]
    x0 = surface.domain.x0
    ell = surface.axis_length
    radius = reach + ell + float(mb.hyperbolic_distance(x0, 1j)) + 0.5
    mats = surface.ball(radius)
    inv = np.linalg.inv(mats)
    w = mb.apply(inv.transpose(1, 2, 0), x0)
    rho = np.arcsinh(w.real / w.imag)
    near = np.abs(rho) <= reach
    lam = math.exp(ell / 2)
    out, seen = [], set()
    for m, wz in zip(mats[near], w[near]):
        sigma = math.log(abs(wz))
        n = math.floor(sigma / ell)
        m = m @ np.diag([lam**n, lam**-n])
        # boundary endpoints m(0), m(inf) as angles on the circle, stable at infinity
        ends = (2 * math.atan2(m[0, 1], m[1, 1]), 2 * math.atan2(m[0, 0], m[1, 0]))
        k = tuple(round(e % (2 * math.pi), 6) % round(2 * math.pi, 6) for e in ends)
        if k in seen:
            continue
        seen.add(k)
        out.append(m)
    result = np.array(out)
    cache[key] = result
    return result


def separating_crossings(surface: FuchsianSurface, walk: AxisWalk) -> tuple[int, float]:
    """Crossings of the closed geodesic with the separating geodesic, and their minimum distance.

    Uses the lifts meeting the domain: each tile visit is a segment inside the
    domain, so only those lifts can meet it.
    """
    lifts = separating_lifts(surface, surface.domain.circumradius + 1e-6)
    lifts_inv = np.linalg.inv(lifts)
    ends = (0.0,) + walk.times
    count, closest = 0, math.inf
    for j, frame in enumerate(walk.frames):
        t1 = (walk.times[j] if j < len(walk.times) else walk.period) - ends[j]
        for li in lifts_inv:
            s, crosses = geodesic_segment_to_line(li @ frame, t1)
            if crosses:
                count += 1
                closest = 0.0
            else:
                closest = min(closest, math.asinh(s))
    return count, closest
