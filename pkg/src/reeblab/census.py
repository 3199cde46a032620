"""Free homotopy classes of closed geodesics, counted by length.

Every class of length at most ``T`` has a representative whose axis meets the
Dirichlet domain, and such a representative moves the base point by at most
``T + 2 R`` where ``R`` is the domain's circumradius.  The census enumerates
that ball completely, walks each axis through the tiling to get an exact word,
and identifies classes with the surface-group conjugacy routine.

Classes are unoriented: a closed geodesic and its reversal share one record.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import mobius as mb
from .errors import BudgetExceeded, ClassCollision, HorizonExceeded, InsufficientData
from .surface import (
    FuchsianSurface,
    axis_frame,
    cutting_key,
    separating_crossings,
    walk_axis,
)
from .words import (
    SurfaceGroup,
    canonical_cyclic,
    cyclic_reduce,
    default_surface_group,
    free_reduce,
    inverse,
    is_proper_power,
    least_rotation,
    primitive_root,
)

DEFAULT_T_CAP = 10.0


class Side(str, enum.Enum):
    S1 = "S1"
    S2 = "S2"
    CROSSING = "crossing"


HANDLE_LETTERS = {Side.S1: "ab", Side.S2: "cd"}
BOUNDARY_WORDS = {Side.S1: "ABab", Side.S2: "CDcd"}


@dataclass(frozen=True)
class ConjugacyClassRecord:
    cyclic_word: str
    trace: float
    length: float
    primitive: bool
    side: Side
    boundary_parallel: bool
    crossings: int = 0
    collar_distance: float = math.inf
    representative: str = ""

    def to_json(self) -> dict:
        d = asdict(self)
        d["side"] = self.side.value
        d["collar_distance"] = None if not math.isfinite(self.collar_distance) else self.collar_distance
        return d


@dataclass(frozen=True)
class GrowthFit:
    a: float
    b: float
    fit_window: tuple[float, float]
    residual: float


@dataclass
class CensusTable:
    records: list[ConjugacyClassRecord]
    T_max: float
    grid: list[float] = field(default_factory=list)
    counts: list[int] = field(default_factory=list)
    periodic: list[int] = field(default_factory=list)
    ball_size: int = 0

    def __post_init__(self):
        self.records.sort(key=lambda r: (r.length, r.cyclic_word))
        self._lengths = np.array([r.length for r in self.records])
        if not self.grid:
            self.grid = [round(x, 10) for x in np.arange(0.0, self.T_max + 1e-9, 0.25)]
        self.counts = [self.count(t) for t in self.grid]
        self.periodic = [self.count_periodic(t) for t in self.grid]

    def count(self, T: float) -> int:
        if T > self.T_max + 1e-12:
            raise HorizonExceeded(f"T={T} exceeds census horizon {self.T_max}")
        return int(np.searchsorted(self._lengths, T, side="right"))

    def count_periodic(self, T: float) -> int:
        """Periodic geodesic-flow orbits of period at most ``T``: two directions per class."""
        return 2 * self.count(T)

    def __len__(self) -> int:
        return len(self.records)


def count_N(census: CensusTable, T: float) -> int:
    return census.count(T)


def _relator_power(group: SurfaceGroup, canonical: str, side: Side) -> bool:
    root, _ = primitive_root(canonical)
    return group.canonical_class(root, unoriented=True) == group.canonical_class(BOUNDARY_WORDS[side], unoriented=True)


def classify_word(word: str, group: SurfaceGroup | None = None) -> tuple[str, Side, bool]:
    """Canonical unoriented word, side and boundary-parallel flag of a surface-group class."""
    group = group or default_surface_group()
    for side in (Side.S1, Side.S2):
        letters = HANDLE_LETTERS[side]
        form = group.handle_form(word, letters)
        if form is not None:
            other = group.handle_form(inverse(word), letters)
            canonical = min(least_rotation(form), least_rotation(other))
            return canonical, side, _relator_power(group, canonical, side)
    return group.canonical_class(word, unoriented=True), Side.CROSSING, False


def _record(surface: FuchsianSurface, m: np.ndarray, group: SurfaceGroup) -> tuple[tuple, ConjugacyClassRecord]:
    dom = surface.domain
    walk = walk_axis(dom, m)
    word = free_reduce(dom.word_of(walk.sides))
    canonical, side, bparallel = classify_word(word, group)
    crossings, dist = separating_crossings(surface, walk)
    tr = float(np.trace(m))
    rec = ConjugacyClassRecord(
        cyclic_word=canonical,
        trace=tr,
        length=mb.translation_length(m),
        primitive=not is_proper_power(canonical),
        side=side,
        boundary_parallel=bparallel,
        crossings=crossings,
        collar_distance=dist,
        representative=cyclic_reduce(word),
    )
    return walk.sides, rec


def _through_domain(surface: FuchsianSurface, mats: np.ndarray) -> list[np.ndarray]:
    """Conjugate each element so its axis passes through the domain; drop repeats."""
    dom = surface.domain
    seen: set[tuple] = set()
    out = []
    for m in mats:
        foot = complex(mb.apply(axis_frame(m), 1j))
        _, path = dom.reduce_point(foot)
        h = dom.element_of(path)
        c = np.linalg.inv(h) @ m @ h
        if c[0, 0] + c[1, 1] < 0:
            c = -c
        key = tuple(np.round(c.ravel(), 7).tolist())
        if key not in seen:
            seen.add(key)
            out.append(c)
    return out


def enumerate_classes(
    surface: FuchsianSurface,
    T_max: float,
    T_cap: float = DEFAULT_T_CAP,
    node_limit: int = 2_000_000,
    margin: float = 0.0,
    group: SurfaceGroup | None = None,
) -> CensusTable:
    """All unoriented free homotopy classes of closed geodesics with length ``<= T_max``.

    ``margin`` enlarges the enumeration ball (in hyperbolic units) for
    self-consistency checks.
    """
    if T_max > T_cap:
        raise HorizonExceeded(f"T_max={T_max} exceeds cap {T_cap}")
    group = group or default_surface_group()
    radius = T_max + 2.0 * surface.domain.circumradius + margin
    mats = surface.ball(radius)
    if len(mats) > node_limit:
        raise BudgetExceeded(f"orbit ball has {len(mats)} elements, limit {node_limit}")
    tr = np.abs(mats[:, 0, 0] + mats[:, 1, 1])
    keep = (tr > 2.0 + 1e-9) & (tr <= mb.trace_for_length(T_max) * (1 + 1e-12))
    candidates = _through_domain(surface, mats[keep])
    by_cut: dict[tuple, ConjugacyClassRecord] = {}
    by_class: dict[str, ConjugacyClassRecord] = {}
    for m in candidates:
        walk = walk_axis(surface.domain, m)
        key = cutting_key(surface.domain, walk.sides)
        if key in by_cut:
            continue
        _, rec = _record(surface, m, group)
        by_cut[key] = rec
        prev = by_class.get(rec.cyclic_word)
        if prev is None:
            by_class[rec.cyclic_word] = rec
        elif abs(prev.length - rec.length) > 1e-7:
            raise ClassCollision(f"class {rec.cyclic_word} has two lengths {prev.length}, {rec.length}")
    table = CensusTable(list(by_class.values()), T_max)
    table.ball_size = len(mats)
    return table


def filter_subsurface(census: CensusTable, side: Side | str) -> CensusTable:
    """Classes inside one handle, excluding powers of its boundary."""
    side = Side(side)
    recs = [r for r in census.records if r.side is side and not r.boundary_parallel]
    return CensusTable(recs, census.T_max, grid=list(census.grid))


def fit_growth(census: CensusTable | tuple, window: tuple[float, float], step: float = 0.25) -> GrowthFit:
    """Least-squares fit of ``log N(T) = a T + b`` on a grid inside ``window``.

    ``census`` may also be a pair of arrays ``(T, N)``.
    """
    lo, hi = window
    if isinstance(census, CensusTable):
        ts = np.arange(lo, hi + 1e-9, step)
        ns = np.array([census.count(t) for t in ts], dtype=float)
    else:
        ts, ns = (np.asarray(x, dtype=float) for x in census)
        sel = (ts >= lo - 1e-12) & (ts <= hi + 1e-12)
        ts, ns = ts[sel], ns[sel]
    ok = ns >= 1
    if ok.sum() < 5:
        raise InsufficientData(f"need at least 5 grid points with N >= 1, got {int(ok.sum())}")
    x, y = ts[ok], np.log(ns[ok])
    a, b = np.polyfit(x, y, 1)
    resid = float(np.sqrt(np.mean((a * x + b - y) ** 2)))
    return GrowthFit(float(a), float(b), (float(lo), float(hi)), resid)


# free-group mode: classes of a rank-2 handle, enumerated by word length


def _reduced_words(alphabet: str, n: int):
    """All freely reduced words of length ``n`` (depth-first)."""
    letters = alphabet + alphabet.upper()
    stack = [""]
    while stack:
        w = stack.pop()
        if len(w) == n:
            yield w
            continue
        for x in letters:
            if not w or w[-1] != x.swapcase():
                stack.append(w + x)


def free_group_classes(alphabet: str, max_length: int, unoriented: bool = True) -> set[str]:
    """Canonical cyclic words of the free group on ``alphabet`` up to ``max_length``.

    Words are generated reduced, kept only if cyclically reduced and already
    canonical, so every class is produced exactly once.
    """
    out: set[str] = set()
    for n in range(1, max_length + 1):
        for w in _reduced_words(alphabet, n):
            if w[0] == w[-1].swapcase() and n > 1:
                continue
            if canonical_cyclic(w, unoriented) == w:
                out.add(w)
    return out


def handle_class_records(
    surface: FuchsianSurface, side: Side | str, max_length: int
) -> list[ConjugacyClassRecord]:
    """Free-group census of one handle: every cyclic word up to ``max_length`` with its geometry."""
    side = Side(side)
    letters = HANDLE_LETTERS[side]
    recs = []
    for w in sorted(free_group_classes(letters, max_length)):
        m = surface.evaluate(w)
        tr = float(np.trace(m))
        root, _ = primitive_root(w)
        bp = least_rotation(root) in {least_rotation(BOUNDARY_WORDS[side]), least_rotation(inverse(BOUNDARY_WORDS[side]))}
        recs.append(
            ConjugacyClassRecord(
                cyclic_word=w,
                trace=tr,
                length=mb.translation_length(m),
                primitive=not is_proper_power(w),
                side=side,
                boundary_parallel=bp,
                representative=w,
            )
        )
    return recs


def all_cyclic_words(alphabet: str, max_length: int) -> itertools.chain:
    letters = alphabet + alphabet.upper()
    return itertools.chain.from_iterable(
        ("".join(p) for p in itertools.product(letters, repeat=n)) for n in range(1, max_length + 1)
    )
