"""Symbolic growth for pseudo-Anosov monodromies and a linear mapping-torus model.

Periodic orbits of a train-track transition matrix stand in for Nielsen
classes: closed walks of length ``k`` are counted by ``trace(M^k)`` and
cyclic words up to rotation by Burnside's lemma.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import BudgetExceeded, EquivarianceViolation, NotIrreducible, ParamViolation

K_MAX = 20


def _divisors(n: int) -> list[int]:
    return [d for d in range(1, n + 1) if n % d == 0]


def _mobius(n: int) -> int:
    out, p, m = 1, 2, n
    while p * p <= m:
        if m % p == 0:
            m //= p
            if m % p == 0:
                return 0
            out = -out
        p += 1
    return -out if m > 1 else out


def _totient(n: int) -> int:
    return sum(1 for j in range(1, n + 1) if math.gcd(j, n) == 1)


@dataclass(frozen=True)
class TransitionMatrix:
    """Square non-negative integer matrix; entry ``(i, j)`` counts edges ``i -> j``."""

    entries: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        n = len(self.entries)
        if n == 0 or any(len(r) != n for r in self.entries):
            raise ValueError("transition matrix must be square and non-empty")
        if any(int(x) != x or x < 0 for r in self.entries for x in r):
            raise ValueError("transition matrix entries must be non-negative integers")

    @classmethod
    def from_array(cls, m) -> TransitionMatrix:
        return cls(tuple(tuple(int(x) for x in row) for row in np.asarray(m)))

    @classmethod
    def from_text(cls, text: str) -> TransitionMatrix:
        """One row per line, integers separated by whitespace; ``#`` starts a comment."""
        rows = []
        for line in text.splitlines():
            line = line.split("#", 1)[0].strip()
            if line:
                rows.append(tuple(int(x) for x in line.split()))
        return cls(tuple(rows))

    def to_text(self) -> str:
        return "".join(" ".join(str(x) for x in row) + "\n" for row in self.entries)

    @property
    def n(self) -> int:
        return len(self.entries)

    @cached_property
    def array(self) -> np.ndarray:
        return np.array(self.entries, dtype=np.int64)

    def is_irreducible(self) -> bool:
        """Strong connectivity of the edge digraph."""
        adj = self.array > 0
        for start in range(self.n):
            seen = {start}
            stack = [start]
            while stack:
                i = stack.pop()
                for j in np.nonzero(adj[i])[0]:
                    if int(j) not in seen:
                        seen.add(int(j))
                        stack.append(int(j))
            if len(seen) < self.n:
                return False
        return True

    def trace_power(self, k: int) -> int:
        """``trace(M^k)`` in exact integer arithmetic."""
        m = np.array(self.entries, dtype=object)
        return int(np.trace(np.linalg.matrix_power(m, k)))


def perron_root(M: TransitionMatrix, tol: float = 1e-12, max_iter: int = 100_000) -> float:
    """Dominant eigenvalue by power iteration on ``I + M``, which is primitive when ``M`` is irreducible."""
    if not M.is_irreducible():
        raise NotIrreducible("transition matrix is not irreducible")
    A = M.array.astype(float)
    B = A + np.eye(M.n)
    v = np.ones(M.n) / M.n
    lam = 0.0
    for _ in range(max_iter):
        w = B @ v
        v = w / np.linalg.norm(w)
        Av = A @ v
        lam = float(v @ Av)
        if np.linalg.norm(Av - lam * v) <= tol * max(lam, 1.0):
            return lam
    raise BudgetExceeded("power iteration did not reach the requested residual")


@dataclass(frozen=True)
class GrowthRate:
    a: float
    b: float
    window: tuple[int, int]


def fit_necklace_growth(counts, window: tuple[int, int]) -> GrowthRate:
    """Fit ``c(k) ~ e^{a k + b} / k``.

    Cyclic words of length ``k`` number about ``lambda^k / k``, so the
    ``1/k`` factor is divided out before the log-linear fit.
    """
    lo, hi = window
    k = np.arange(lo, hi + 1, dtype=float)
    y = np.log(np.asarray(counts[lo - 1 : hi], dtype=float)) + np.log(k)
    a, b = np.polyfit(k, y, 1)
    return GrowthRate(float(a), float(b), (lo, hi))


@dataclass
class NecklaceCensus:
    closed_walks: list[int]
    necklaces: list[int]
    aperiodic: list[int]
    cumulative: list[int]
    fit: GrowthRate | None = None

    @property
    def k_max(self) -> int:
        return len(self.cumulative)

    def c(self, k: int) -> int:
        return self.cumulative[k - 1]

    def rows(self) -> list[dict]:
        return [
            {"k": k + 1, "closed_walks": w, "necklaces": n, "aperiodic": p, "cumulative": c}
            for k, (w, n, p, c) in enumerate(zip(self.closed_walks, self.necklaces, self.aperiodic, self.cumulative))
        ]


def necklace_count(M: TransitionMatrix, k_max: int, window: tuple[int, int] | None = None) -> NecklaceCensus:
    """Closed walks, cyclic words up to rotation and aperiodic cyclic words, for ``k <= k_max``."""
    if k_max > K_MAX:
        raise BudgetExceeded(f"k_max={k_max} exceeds {K_MAX}")
    if k_max < 1:
        raise ValueError("k_max must be at least 1")
    walks = [M.trace_power(k) for k in range(1, k_max + 1)]
    neck = [sum(_totient(k // d) * walks[d - 1] for d in _divisors(k)) // k for k in range(1, k_max + 1)]
    aper = [sum(_mobius(k // d) * walks[d - 1] for d in _divisors(k)) // k for k in range(1, k_max + 1)]
    cum = list(np.cumsum(neck, dtype=object))
    out = NecklaceCensus(walks, neck, aper, [int(c) for c in cum])
    if window is None and k_max >= 4:
        window = (max(1, k_max // 2), k_max)
    if window is not None and all(c > 0 for c in out.cumulative):
        out.fit = fit_necklace_growth(out.cumulative, window)
    return out


@dataclass
class PeriodTable:
    periods: list[int]
    counts: list[int]
    cumulative: list[int]
    fit: GrowthRate | None

    def N(self, T: float) -> int:
        k = int(math.floor(T + 1e-12))
        if k < 1:
            return 0
        return self.cumulative[min(k, len(self.cumulative)) - 1]


def suspension_periods(census: NecklaceCensus, roof: float = 1.0) -> PeriodTable:
    """Suspension with constant unit roof: an orbit of word length ``k`` has period ``k``."""
    if roof != 1.0:
        raise ParamViolation("roof", "only the unit roof is modelled")
    ks = list(range(1, census.k_max + 1))
    fit = fit_necklace_growth(census.cumulative, census.fit.window) if census.fit else None
    return PeriodTable(ks, list(census.necklaces), list(census.cumulative), fit)


def smoothstep_profile(t, lo: float = 0.01, hi: float = 0.02):
    """Quintic smoothstep: 0 below ``lo``, 1 above ``hi``, non-decreasing."""
    x = np.clip((np.asarray(t, dtype=float) - lo) / (hi - lo), 0.0, 1.0)
    return x**3 * (10 - 15 * x + 6 * x**2)


def smoothstep_derivative(t, lo: float = 0.01, hi: float = 0.02):
    x = np.clip((np.asarray(t, dtype=float) - lo) / (hi - lo), 0.0, 1.0)
    return 30 * x**2 * (1 - x) ** 2 / (hi - lo)


@dataclass
class EquivarianceReport:
    samples: int
    max_error: float
    flat_error: float
    reeb_dt_deviation: float
    min_contact_volume: float
    passed: bool

    def to_json(self) -> dict:
        return dict(self.__dict__)


@dataclass
class MappingTorusModel:
    """Interpolated form ``dt + eps (1 - F_i) (h^i)^* beta + eps F_i (h^{i+1})^* beta`` on ``R x R^2``.

    The monodromy is linear, ``h(p) = A p``, and ``beta = x dy`` is a primitive
    of the area form.  ``H(t, p) = (t - 1, A p)`` generates the deck group.
    """

    A: np.ndarray = field(default_factory=lambda: np.array([[2.0, 1.0], [1.0, 1.0]]))
    epsilon: float = 0.05
    lo: float = 0.01
    hi: float = 0.02

    def __post_init__(self):
        self.A = np.asarray(self.A, dtype=float)
        if not self.epsilon > 0:
            raise ParamViolation("epsilon", "epsilon must be positive: the form dt alone is not contact")
        if abs(np.linalg.det(self.A) - 1) > 1e-12:
            raise ParamViolation("area", "monodromy must preserve area")

    def F(self, t):
        i = np.floor(t)
        return smoothstep_profile(t - i, self.lo, self.hi)

    def _power(self, i: int) -> np.ndarray:
        return np.linalg.matrix_power(self.A, i) if i >= 0 else np.linalg.matrix_power(np.linalg.inv(self.A), -i)

    def _beta_coeffs(self, i: int, p: np.ndarray) -> np.ndarray:
        """Coefficients of ``(h^i)^* beta`` at ``p`` in the basis ``dx, dy``."""
        Ai = self._power(i)
        return (Ai[0] @ p) * Ai[1]

    def form(self, t: float, p: np.ndarray) -> np.ndarray:
        """Coefficients of the form at ``(t, p)`` in the basis ``dt, dx, dy``."""
        i = int(math.floor(t))
        F = float(self.F(t))
        c = (1 - F) * self._beta_coeffs(i, p) + F * self._beta_coeffs(i + 1, p)
        return np.array([1.0, self.epsilon * c[0], self.epsilon * c[1]])

    def differential(self, t: float, p: np.ndarray) -> np.ndarray:
        """Antisymmetric matrix of the exterior derivative at ``(t, p)``."""
        i = int(math.floor(t))
        F = float(self.F(t))
        dF = float(smoothstep_derivative(t - i, self.lo, self.hi))
        Ai, Aj = self._power(i), self._power(i + 1)
        grad = np.zeros((3, 3))  # grad[j, k] = d alpha_k / d x_j
        grad[0, 1:] = self.epsilon * dF * (self._beta_coeffs(i + 1, p) - self._beta_coeffs(i, p))
        grad[1:, 1:] = self.epsilon * ((1 - F) * np.outer(Ai[0], Ai[1]) + F * np.outer(Aj[0], Aj[1]))
        return grad - grad.T

    def H(self, t: float, p: np.ndarray) -> tuple[float, np.ndarray]:
        return t - 1.0, self.A @ p

    def DH(self) -> np.ndarray:
        out = np.eye(3)
        out[1:, 1:] = self.A
        return out

    def pullback(self, t: float, p: np.ndarray) -> np.ndarray:
        s, q = self.H(t, p)
        return self.DH().T @ self.form(s, q)

    def reeb(self, t: float, p: np.ndarray) -> np.ndarray:
        """Kernel of the differential normalised by the form."""
        w = self.differential(t, p)
        x = np.array([w[1, 2], w[2, 0], w[0, 1]])
        return x / (self.form(t, p) @ x)

    def contact_volume(self, t: float, p: np.ndarray) -> float:
        w = self.differential(t, p)
        a = self.form(t, p)
        return float(a[0] * w[1, 2] + a[1] * w[2, 0] + a[2] * w[0, 1])


def check_equivariance(
    model: MappingTorusModel, samples: int = 500, rng: np.random.Generator | None = None, tol: float = 1e-9
) -> EquivarianceReport:
    """Compare the form with its pullback under ``H`` at random points.

    The Reeb field's ``dt`` component is reported, not asserted: it equals
    ``1 - eps beta_t(v)``, which is 1 only where the interpolation is idle
    and the surface part of the field vanishes.
    """
    rng = rng or np.random.default_rng(0)
    ts = rng.uniform(-2.0, 3.0, samples)
    ps = rng.uniform(-1.0, 1.0, (samples, 2))
    err = 0.0
    flat = 0.0
    dev = 0.0
    vol = math.inf
    for t, p in zip(ts, ps):
        a = model.form(t, p)
        e = float(np.max(np.abs(model.pullback(t, p) - a)) / max(1.0, np.max(np.abs(a))))
        err = max(err, e)
        if float(model.F(t)) in (0.0, 1.0):
            flat = max(flat, e)
        dev = max(dev, abs(float(model.reeb(t, p)[0]) - 1.0))
        vol = min(vol, abs(model.contact_volume(t, p)))
    if err > tol:
        raise EquivarianceViolation(f"pullback differs from the form by {err:.3e}")
    return EquivarianceReport(samples, err, flat, dev, vol, True)
