"""Bowen entropy estimates from (T, delta)-separated sets.

Phase points are frames; the distance between two frames is the larger of
the hyperbolic distances between their base points and between the points
one unit ahead along their geodesics.  On the quotient the distance is the
minimum over deck translates near the fundamental domain.

A separated set only ever certifies a lower bound on the maximal
cardinality, and every emitted set is re-verified pair by pair.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Protocol

import numpy as np
from scipy.spatial import cKDTree

from . import mobius as mb
from .errors import AssertionFailed, BudgetExceeded, ClassCollision, InsufficientData
from .surface import FuchsianSurface, tile_exit

AHEAD = mb.flow_matrix(1.0)
DEFAULT_CUTOFF = 1.0
MAX_SEEDS = 200_000


class Method(str, enum.Enum):
    GREEDY_SAMPLING = "greedy_sampling"
    ORBIT_CONSTRUCTION = "orbit_construction"


def _disk(z, x0: complex):
    """Poincare-disk coordinate centred at ``x0``."""
    return (z - x0) / (z - np.conj(x0))


@dataclass(frozen=True)
class PhaseSamples:
    """Sampled orbits in domain coordinates: base and ahead points, shape ``(n, len(times))``."""

    times: np.ndarray
    base: np.ndarray
    ahead: np.ndarray

    def __len__(self) -> int:
        return self.base.shape[0]

    def upto(self, T: float) -> PhaseSamples:
        k = int(np.searchsorted(self.times, T + 1e-12, side="right"))
        return PhaseSamples(self.times[:k], self.base[:, :k], self.ahead[:, :k])

    def subset(self, idx) -> PhaseSamples:
        return PhaseSamples(self.times, self.base[idx], self.ahead[idx])


class PhaseFlow(Protocol):
    surface: FuchsianSurface

    def sample(self, frames: np.ndarray, times: np.ndarray) -> PhaseSamples: ...


class PhaseMetric:
    """Frame distance on the quotient unit tangent bundle, saturated at ``cutoff``."""

    def __init__(self, surface: FuchsianSurface, cutoff: float = DEFAULT_CUTOFF):
        self.surface = surface
        self.domain = surface.domain
        self.cutoff = cutoff
        self.x0 = self.domain.x0
        self.translates = surface.ball(2 * self.domain.circumradius + cutoff)
        self.reach = self.domain.circumradius + cutoff
        self._near_cache: dict[float, np.ndarray] = {}

    def points(self, frames: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Base and ahead points of frames reduced to the domain."""
        frames = np.asarray(frames, dtype=float).reshape(-1, 2, 2)
        base = np.empty(len(frames), dtype=complex)
        ahead = np.empty(len(frames), dtype=complex)
        for i, g in enumerate(frames):
            _, path = self.domain.reduce_point(mb.base_point(g))
            local = np.linalg.solve(self.domain.element_of(path), g)
            base[i] = mb.base_point(local)
            ahead[i] = mb.base_point(local @ AHEAD)
        return base, ahead

    def point_distance(self, b1, a1, b2, a2) -> np.ndarray:
        """Quotient distance between point pairs given in domain coordinates (broadcasting)."""
        b1, a1, b2, a2 = (np.asarray(x, dtype=complex)[..., None] for x in (b1, a1, b2, a2))
        g = self.translates
        gb = (g[:, 0, 0] * b2 + g[:, 0, 1]) / (g[:, 1, 0] * b2 + g[:, 1, 1])
        ga = (g[:, 0, 0] * a2 + g[:, 0, 1]) / (g[:, 1, 0] * a2 + g[:, 1, 1])
        d = np.maximum(mb.hyperbolic_distance(b1, gb), mb.hyperbolic_distance(a1, ga))
        return np.minimum(d.min(axis=-1), self.cutoff)

    def close(self, b1, a1, b2, a2, delta: float) -> np.ndarray:
        """Whether the quotient distance is at most ``delta`` (broadcasting).

        Uses ``sinh^2(d/2) = |z - w|^2 / (4 Im z Im w)`` and only the translates
        that can realise a distance of ``delta`` between domain points.
        """
        b1, a1, b2, a2 = (np.asarray(x, dtype=complex)[..., None] for x in (b1, a1, b2, a2))
        g = self._near(delta)
        gb = (g[:, 0, 0] * b2 + g[:, 0, 1]) / (g[:, 1, 0] * b2 + g[:, 1, 1])
        ga = (g[:, 0, 0] * a2 + g[:, 0, 1]) / (g[:, 1, 0] * a2 + g[:, 1, 1])
        qb = np.abs(b1 - gb) ** 2 / (b1.imag * gb.imag)
        qa = np.abs(a1 - ga) ** 2 / (a1.imag * ga.imag)
        return np.maximum(qb, qa).min(axis=-1) <= 4 * math.sinh(delta / 2) ** 2

    def _near(self, delta: float) -> np.ndarray:
        key = round(delta, 9)
        if key not in self._near_cache:
            self._near_cache[key] = self.surface.ball(2 * self.domain.circumradius + delta)
        return self._near_cache[key]

    def distance(self, g1: np.ndarray, g2: np.ndarray) -> float:
        (b1,), (a1,) = self.points(g1)
        (b2,), (a2,) = self.points(g2)
        return float(self.point_distance(b1, a1, b2, a2))

    def translate_points(self, z: np.ndarray, radius: float) -> tuple[np.ndarray, np.ndarray]:
        """Images of domain points under the translates that land within ``radius`` of the centre.

        Returns ``(images, owner)`` with ``owner`` indexing ``z``.
        """
        g = self.translates
        zz = np.asarray(z, dtype=complex)[:, None]
        img = (g[:, 0, 0] * zz + g[:, 0, 1]) / (g[:, 1, 0] * zz + g[:, 1, 1])
        near = mb.hyperbolic_distance(self.x0, img) <= radius
        owner = np.nonzero(near)[0]
        return img[near], owner


class GeodesicPhaseFlow:
    """Geodesic flow sampled by walking each orbit through the tiling."""

    def __init__(self, surface: FuchsianSurface):
        self.surface = surface
        self.domain = surface.domain

    def sample(self, frames: np.ndarray, times: np.ndarray) -> PhaseSamples:
        frames = np.asarray(frames, dtype=float).reshape(-1, 2, 2)
        times = np.asarray(times, dtype=float)
        n, nt = len(frames), len(times)
        base = np.empty((n, nt), dtype=complex)
        ahead = np.empty((n, nt), dtype=complex)
        dom = self.domain
        for i, g in enumerate(frames):
            _, path = dom.reduce_point(mb.base_point(g))
            local = np.linalg.solve(dom.element_of(path), g)
            t0, k0 = 0.0, 0
            while k0 < nt:
                tau, side = tile_exit(dom, local)
                k1 = int(np.searchsorted(times, t0 + tau, side="left"))
                if k1 > k0:
                    dt = times[k0:k1] - t0
                    e = np.exp(0.5 * dt)
                    # local @ diag(e, 1/e) applied to i and to i e
                    a, b, c, d = local[0, 0] * e, local[0, 1] / e, local[1, 0] * e, local[1, 1] / e
                    base[i, k0:k1] = (a * 1j + b) / (c * 1j + d)
                    ahead[i, k0:k1] = (a * 1j * math.e + b) / (c * 1j * math.e + d)
                    k0 = k1
                if k0 >= nt:
                    break
                local = dom.side_inverses[side] @ local @ mb.flow_matrix(tau)
                t0 += tau
        return PhaseSamples(times, base, ahead)


class SurgeredPhaseFlow:
    """Surgered flow sampled through its hybrid trajectories (slow; for small seed sets)."""

    def __init__(self, flow):
        self.flow = flow
        self.surface = flow.surface
        self.metric = PhaseMetric(flow.surface)

    def sample(self, frames: np.ndarray, times: np.ndarray) -> PhaseSamples:
        frames = np.asarray(frames, dtype=float).reshape(-1, 2, 2)
        times = np.asarray(times, dtype=float)
        base = np.empty((len(frames), len(times)), dtype=complex)
        ahead = np.empty_like(base)
        for i, g in enumerate(frames):
            state = self.flow.classify(g)
            prev = 0.0
            out = []
            for t in times:
                state = self.flow.run(state, t - prev, record_letters=False)[0] if t > prev else state
                prev = t
                out.append(self.flow.endpoint_frame(state))
            b, a = self.metric.points(np.array(out))
            base[i], ahead[i] = b, a
        return PhaseSamples(times, base, ahead)


@dataclass
class RescaledFlow:
    """The flow slowed down by a constant factor ``c``: time ``t`` maps to ``t / c``."""

    inner: PhaseFlow
    c: float

    @property
    def surface(self) -> FuchsianSurface:
        return self.inner.surface

    def sample(self, frames: np.ndarray, times: np.ndarray) -> PhaseSamples:
        s = self.inner.sample(frames, np.asarray(times, dtype=float) / self.c)
        return PhaseSamples(np.asarray(times, dtype=float), s.base, s.ahead)


def unstable_seeds(frame: np.ndarray, length: float, n: int) -> np.ndarray:
    """Frames spread evenly along a piece of the unstable horocycle through ``frame``."""
    s = np.linspace(0.0, length, n)
    out = np.empty((n, 2, 2))
    out[:, 0, 0] = frame[0, 0] + frame[0, 1] * s
    out[:, 0, 1] = frame[0, 1]
    out[:, 1, 0] = frame[1, 0] + frame[1, 1] * s
    out[:, 1, 1] = frame[1, 1]
    return out


def random_frames(surface: FuchsianSurface, n: int, rng: np.random.Generator) -> np.ndarray:
    """Frames with base points spread near the domain centre and uniform directions."""
    x0 = surface.domain.x0
    r = surface.domain.circumradius
    out = np.empty((n, 2, 2))
    for i in range(n):
        rho = r * math.sqrt(rng.uniform())
        th = rng.uniform(0, 2 * math.pi)
        g = mb.translation_matrix(x0) @ mb.rotation_matrix(th) @ mb.flow_matrix(rho)
        out[i] = g @ mb.rotation_matrix(rng.uniform(0, 2 * math.pi))
    return out


@dataclass
class SeparatedSetResult:
    T: float
    delta: float
    points: list[int]
    n: int
    method: Method
    saturated: bool = False
    certified: bool | None = None

    def to_json(self) -> dict:
        return {
            "T": self.T,
            "delta": self.delta,
            "n": self.n,
            "method": self.method.value,
            "saturated": self.saturated,
            "certified": self.certified,
        }


def _sup_distance(metric: PhaseMetric, s: PhaseSamples, i: int, others: np.ndarray) -> np.ndarray:
    """Sup over sample times of the distance from orbit ``i`` to each orbit in ``others``."""
    d = metric.point_distance(s.base[i][None, :], s.ahead[i][None, :], s.base[others], s.ahead[others])
    return d.max(axis=1)


def _shadows(metric: PhaseMetric, s: PhaseSamples, i: int, j: int, delta: float) -> bool:
    """Whether orbits ``i`` and ``j`` stay within ``delta`` at every sample time."""
    return bool(metric.close(s.base[i], s.ahead[i], s.base[j], s.ahead[j], delta).all())


def greedy_separated(metric: PhaseMetric, samples: PhaseSamples, delta: float, order=None) -> list[int]:
    """Greedy maximal separated subset: admit an orbit iff it is separated from all admitted ones.

    Base-point closeness is necessary for closeness of frames, and the
    hyperbolic distance is at least twice the Euclidean distance in the disk
    centred at the domain centre; a grid of cell ``delta/2`` in that disk finds
    every admitted orbit that could block a candidate at the final time, and
    only those are compared exactly.
    """
    n, nt = samples.base.shape
    order = range(n) if order is None else order
    cell = delta / 2
    x0 = metric.x0
    grid: dict[tuple[int, int], list[int]] = {}
    admitted: list[int] = []
    last = nt - 1
    for i in order:
        z = _disk(samples.base[i, last], x0)
        cx, cy = math.floor(z.real / cell), math.floor(z.imag / cell)
        blockers = set()
        for dx in (-1, 0, 1):
            for dy in (-1, 0, 1):
                blockers.update(grid.get((cx + dx, cy + dy), ()))
        ok = True
        if blockers:
            cand = np.array(sorted(blockers))
            near = metric.close(samples.base[i, last], samples.ahead[i, last], samples.base[cand, last], samples.ahead[cand, last], delta)
            ok = not any(_shadows(metric, samples, i, int(j), delta) for j in cand[near])
        if ok:
            admitted.append(i)
            imgs, _ = metric.translate_points(samples.base[i, last:], metric.domain.circumradius + delta)
            for z in _disk(imgs, x0):
                grid.setdefault((math.floor(z.real / cell), math.floor(z.imag / cell)), []).append(i)
    return admitted


def verify_separated(metric: PhaseMetric, samples: PhaseSamples, idx, delta: float) -> bool:
    """Independent pairwise check that the orbits ``idx`` are ``(T, delta)``-separated.

    A KD-tree over all domain translates at the final time lists the pairs
    whose base points could be within ``delta`` there; the survivors are
    filtered by the exact distance at every other sample time.
    """
    idx = np.asarray(list(idx), dtype=int)
    if len(idx) < 2:
        return True
    sub = samples.subset(idx)
    x0 = metric.x0
    last = sub.base.shape[1] - 1
    imgs, owner = metric.translate_points(sub.base[:, last], metric.domain.circumradius + delta)
    dz = _disk(imgs, x0)
    hz = _disk(sub.base[:, last], x0)
    tree = cKDTree(np.column_stack([dz.real, dz.imag]))
    home = cKDTree(np.column_stack([hz.real, hz.imag]))
    pairs = home.sparse_distance_matrix(tree, delta / 2, output_type="coo_matrix")
    a, b = pairs.row, owner[pairs.col]
    keep = a < b
    a, b = np.unique(np.column_stack([a[keep], b[keep]]), axis=0).T if keep.any() else (a[:0], b[:0])
    for k in range(last, -1, -1):
        if not len(a):
            return True
        close = _chunked_close(metric, sub.base[a, k], sub.ahead[a, k], sub.base[b, k], sub.ahead[b, k], delta)
        a, b = a[close], b[close]
    return not len(a)


def _chunked_close(metric: PhaseMetric, b1, a1, b2, a2, delta: float, chunk: int = 20000) -> np.ndarray:
    out = np.empty(len(b1), dtype=bool)
    for s in range(0, len(b1), chunk):
        sl = slice(s, s + chunk)
        out[sl] = metric.close(b1[sl], a1[sl], b2[sl], a2[sl], delta)
    return out


def bowen_count(
    flow: PhaseFlow,
    T: float,
    delta: float,
    sample_budget: int,
    seeds: np.ndarray | None = None,
    rng: np.random.Generator | None = None,
    metric: PhaseMetric | None = None,
    samples: PhaseSamples | None = None,
    verify: bool = True,
) -> SeparatedSetResult:
    """Greedy ``(T, delta)``-separated set among ``sample_budget`` seeds.

    The time step is ``delta / 2``; since a sampled sup never exceeds the true
    sup, admission on the sampled distances is a sound certificate.
    """
    if sample_budget > MAX_SEEDS:
        raise BudgetExceeded(f"sample budget {sample_budget} exceeds {MAX_SEEDS}")
    metric = metric or PhaseMetric(flow.surface)
    if samples is None:
        if seeds is None:
            rng = rng or np.random.default_rng(0)
            seeds = random_frames(flow.surface, sample_budget, rng)
        seeds = seeds[:sample_budget]
        times = time_grid(T, delta)
        samples = flow.sample(seeds, times)
    samples = samples.upto(T)
    pts = greedy_separated(metric, samples, delta)
    certified = verify_separated(metric, samples, pts, delta) if verify else None
    return SeparatedSetResult(T, delta, pts, len(pts), Method.GREEDY_SAMPLING, len(pts) == len(samples), certified)


def time_grid(T: float, delta: float) -> np.ndarray:
    n = max(1, int(math.ceil(T / (delta / 2))))
    return np.linspace(0.0, T, n + 1)


@dataclass(frozen=True)
class SlopeFit:
    delta: float
    slope: float
    intercept: float
    stderr: float
    n_points: int

    @property
    def band(self) -> tuple[float, float]:
        return self.slope - 2 * self.stderr, self.slope + 2 * self.stderr


def h_delta_fit(results: list[SeparatedSetResult] | list[tuple[float, float, int]]) -> dict[float, SlopeFit]:
    """Least-squares slope of ``log n`` against ``T`` for each ``delta``."""
    rows = [(r.T, r.delta, r.n) if isinstance(r, SeparatedSetResult) else tuple(r) for r in results]
    out = {}
    for delta in sorted({d for _, d, _ in rows}):
        pts = sorted((t, n) for t, d, n in rows if d == delta)
        if len(pts) < 4:
            raise InsufficientData(f"delta={delta}: need at least 4 T values, got {len(pts)}")
        t = np.array([p[0] for p in pts], dtype=float)
        y = np.log(np.array([p[1] for p in pts], dtype=float))
        A = np.column_stack([t, np.ones_like(t)])
        coef, *_ = np.linalg.lstsq(A, y, rcond=None)
        resid = y - A @ coef
        dof = max(len(t) - 2, 1)
        s2 = float(resid @ resid) / dof
        cov = s2 * np.linalg.inv(A.T @ A)
        out[delta] = SlopeFit(delta, float(coef[0]), float(coef[1]), float(math.sqrt(max(cov[0, 0], 0.0))), len(t))
    return out


@dataclass
class EntropyEstimate:
    grid: list[tuple[float, float, int]]
    slopes: dict[float, SlopeFit]
    h_top_estimate: float
    K_tilde_estimate: float = math.nan
    saturated: list[tuple[float, float]] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "grid": [list(g) for g in self.grid],
            "slopes": {str(k): {"slope": v.slope, "stderr": v.stderr} for k, v in self.slopes.items()},
            "h_top_estimate": self.h_top_estimate,
            "K_tilde_estimate": None if math.isnan(self.K_tilde_estimate) else self.K_tilde_estimate,
            "saturated": [list(s) for s in self.saturated],
        }


def h_top_from_slopes(slopes: dict[float, SlopeFit]) -> float:
    """Largest slope over the delta grid.

    Each slope bounds the entropy from below and the bound can only improve as
    delta shrinks, so a smaller slope at a smaller delta reflects the seed
    budget rather than the flow.
    """
    return max(v.slope for v in slopes.values())


def estimate_entropy(
    flow: PhaseFlow,
    Ts: list[float],
    deltas: list[float],
    seeds: np.ndarray,
    metric: PhaseMetric | None = None,
    verify: bool = True,
) -> EntropyEstimate:
    """Bowen counts on a ``(T, delta)`` grid with per-delta slopes and their extrapolation.

    Saturated counts (every seed admitted) only bound ``n`` by the budget
    and are left out of the fits.
    """
    metric = metric or PhaseMetric(flow.surface)
    grid, sat, kept = [], [], []
    samples = flow.sample(seeds, time_grid(max(Ts), min(deltas)))
    for delta in sorted(deltas, reverse=True):
        for T in sorted(Ts):
            res = bowen_count(flow, T, delta, len(seeds), metric=metric, samples=samples, verify=verify)
            if verify and not res.certified:
                raise AssertionFailed(f"separated set at T={T}, delta={delta} failed re-verification")
            grid.append((T, delta, res.n))
            if res.saturated:
                sat.append((T, delta))
            else:
                kept.append((T, delta, res.n))
    slopes = h_delta_fit(kept)
    pick = np.linspace(0, len(seeds) - 1, min(100, len(seeds))).astype(int)
    counts = component_count(metric, samples.upto(max(Ts)).subset(pick), metric.x0, min(deltas))
    return EntropyEstimate(grid, slopes, h_top_from_slopes(slopes), fit_component_bound(counts), sat)


def orbit_separated_set(
    flow: PhaseFlow,
    orbits: list[tuple[np.ndarray, float, str]],
    T: float,
    delta: float,
    metric: PhaseMetric | None = None,
) -> tuple[SeparatedSetResult, PhaseSamples]:
    """Separated set from closed orbits in pairwise distinct classes.

    ``orbits`` holds ``(seed frame, period, class key)``.  Orbits are kept
    greedily when their sup distance over ``[0, T]`` to every kept orbit
    exceeds ``delta``; the kept seeds are re-verified pairwise.
    """
    keys = [o[2] for o in orbits]
    if len(set(keys)) != len(keys):
        dup = next(k for k in keys if keys.count(k) > 1)
        raise ClassCollision(f"two orbits share the class {dup}")
    metric = metric or PhaseMetric(flow.surface)
    seeds = np.array([o[0] for o in orbits])
    samples = flow.sample(seeds, time_grid(T, delta))
    pts = greedy_separated(metric, samples, delta)
    ok = verify_separated(metric, samples, pts, delta)
    return SeparatedSetResult(T, delta, pts, len(pts), Method.ORBIT_CONSTRUCTION, False, ok), samples


@dataclass(frozen=True)
class ComponentCount:
    T: float
    L: int
    rate: float


def component_count(
    metric: PhaseMetric, samples: PhaseSamples, p: complex, delta: float
) -> list[ComponentCount]:
    """Number of lifts of the ``4 delta``-ball around ``p`` met by each sampled orbit.

    A geodesic meets each (convex) ball at most once and distinct lifts of the
    ball are disjoint when ``8 delta`` is below the systole, so the count is
    the number of entries of the orbit into the ball's preimage.
    """
    g = metric.translates
    z, _ = metric.domain.reduce_point(complex(p))
    pts = mb.apply(g.transpose(1, 2, 0), z)
    out = []
    for row in samples.base:
        d = mb.hyperbolic_distance(row[:, None], pts[None, :]).min(axis=1)
        inside = d < 4 * delta
        entries = int(inside[0]) + int(np.count_nonzero(inside[1:] & ~inside[:-1]))
        T = float(samples.times[-1])
        out.append(ComponentCount(T, entries, entries / T if T > 0 else math.nan))
    return out


def fit_component_bound(counts: list[ComponentCount]) -> float:
    """Smallest ``K`` with ``L < K T + 1`` over all samples."""
    ks = [(c.L - 1) / c.T for c in counts if c.T > 0]
    return max(max(ks), 0.0) + 1e-9 if ks else 0.0


@dataclass
class GrowthEntropyReport:
    a_fit: float
    h_estimate: float
    tol: float
    passed: bool
    rescaled: dict[float, float] = field(default_factory=dict)


def theorem1_verify(a_fit: float, est: EntropyEstimate, tol: float, rescaled: dict[float, EntropyEstimate] | None = None) -> GrowthEntropyReport:
    """Check that the growth rate does not exceed the entropy estimate, also for slowed flows."""
    h = est.h_top_estimate
    if a_fit > h + tol:
        raise AssertionFailed(f"growth rate {a_fit:.4f} exceeds entropy estimate {h:.4f} + {tol}")
    out = {}
    for c, e in (rescaled or {}).items():
        if e.h_top_estimate < a_fit / c - tol:
            raise AssertionFailed(
                f"slowed by {c}: entropy estimate {e.h_top_estimate:.4f} below {a_fit / c:.4f} - {tol}"
            )
        out[c] = e.h_top_estimate
    return GrowthEntropyReport(a_fit, h, tol, True, out)
