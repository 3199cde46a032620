"""Surgery data and the normal-form chart around the Legendrian lift of the separating geodesic.

Box coordinates ``(t, s, w)`` are realized by an exact chart

    Psi(t, s, w) = phi_t(u(s, w)),

where ``u(s, w)`` is the unit vector at arclength ``s * l / 2 pi`` along the
separating geodesic turned so that its angle to the geodesic is
``-pi/2 + arcsin(2 pi w / l)``.  The Liouville form pulls back to
``dt + w ds`` exactly, so the surgered flow inside the box is known in closed
form: every trajectory moves along ``d/dt`` at speed ``1 / (1 +- d_t r)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import mobius as mb
from .errors import OutOfChart, ParamViolation


def _smoothstep5(x):
    x = np.clip(x, 0.0, 1.0)
    return x**3 * (10.0 - 15.0 * x + 6.0 * x * x)


def _smoothstep5_prime(x):
    inside = (x > 0) & (x < 1)
    return np.where(inside, 30.0 * x**2 * (1.0 - x) ** 2, 0.0)


@dataclass(frozen=True)
class BetaProfile:
    """Cutoff equal to one on ``|t| <= inner*eta`` and zero beyond ``outer*eta``."""

    inner: float = 2.05
    outer: float = 2.95

    def value(self, t, eta: float):
        x = (np.abs(t) / eta - self.inner) / (self.outer - self.inner)
        return 1.0 - _smoothstep5(x)

    def derivative(self, t, eta: float):
        t = np.asarray(t, dtype=float)
        width = (self.outer - self.inner) * eta
        x = (np.abs(t) / eta - self.inner) / (self.outer - self.inner)
        return -np.sign(t) * _smoothstep5_prime(x) / width

    def max_slope(self, eta: float) -> float:
        return 1.875 / ((self.outer - self.inner) * eta)


@dataclass(frozen=True)
class RProfile:
    """Even plateau ``R'(u) = H * P(|u|)`` with C^1 cubic shoulders on ``[a, b]``.

    ``H = 2 pi / (a + b)`` makes ``R`` rise from 0 at -1 to 2 pi at 1.
    """

    a: float = 0.65
    b: float = 0.95

    @property
    def height(self) -> float:
        return 2.0 * math.pi / (self.a + self.b)

    @property
    def width(self) -> float:
        return self.b - self.a

    def _y(self, x):
        return np.clip((x - self.a) / self.width, 0.0, 1.0)

    def plateau(self, x):
        """``P(x)`` for ``x >= 0``."""
        y = self._y(x)
        return 1.0 - 3.0 * y**2 + 2.0 * y**3

    def _Q(self, x):
        """Integral of ``P`` from 0 to ``x >= 0``."""
        x = np.asarray(x, dtype=float)
        y = self._y(x)
        shoulder = self.a + self.width * (y - y**3 + y**4 / 2.0)
        return np.where(x <= self.a, x, shoulder)

    def _G(self, x):
        """Integral of ``u P(u)`` from 0 to ``x >= 0``."""
        x = np.asarray(x, dtype=float)
        y = self._y(x)
        a, L = self.a, self.width
        shoulder = a * a / 2.0 + L * (a * (y - y**3 + y**4 / 2.0) + L * (y**2 / 2.0 - 0.75 * y**4 + 0.4 * y**5))
        return np.where(x <= a, x * x / 2.0, shoulder)

    def derivative(self, u):
        u = np.asarray(u, dtype=float)
        return np.where(np.abs(u) < 1.0, self.height * self.plateau(np.abs(u)), 0.0)

    def value(self, u):
        u = np.clip(np.asarray(u, dtype=float), -1.0, 1.0)
        return math.pi + np.sign(u) * self.height * self._Q(np.abs(u))

    def first_moment(self, v):
        """``J(v) = int_{-1}^{v} u R'(u) du`` (even in ``v``)."""
        v = np.clip(np.abs(np.asarray(v, dtype=float)), 0.0, 1.0)
        return self.height * (self._G(v) - self._G(1.0))


@dataclass(frozen=True)
class SurgeryParams:
    q: int = 1
    eta: float = 0.1
    eps: float = 0.003
    delta: float = 0.05
    R_profile: RProfile = field(default_factory=RProfile)
    beta_profile: BetaProfile = field(default_factory=BetaProfile)
    r_scale: float = 1.0
    switch: float = 1.5

    @property
    def eps_max(self) -> float:
        return math.inf if self.q == 0 else self.eta / (4.0 * abs(self.q) * math.pi)

    @property
    def t_switch(self) -> float:
        """Time coordinate in ``(eta, 2 eta)`` where trajectories pass through the gluing map."""
        return self.switch * self.eta


@dataclass(frozen=True)
class TwistData:
    """The shear ``f``, its first-moment integral ``I`` and the contact correction ``r``."""

    params: SurgeryParams

    def f(self, w):
        p = self.params
        return -p.q * p.R_profile.value(np.asarray(w, dtype=float) / p.eps)

    def f_prime(self, w):
        p = self.params
        return -p.q / p.eps * p.R_profile.derivative(np.asarray(w, dtype=float) / p.eps)

    def I(self, w):  # noqa: E743 - matches the conventional name
        p = self.params
        return -p.q * p.eps * p.R_profile.first_moment(np.asarray(w, dtype=float) / p.eps)

    def r(self, t, w):
        p = self.params
        return p.r_scale * p.beta_profile.value(t, p.eta) * self.I(w)

    def r_t(self, t, w):
        p = self.params
        return p.r_scale * p.beta_profile.derivative(t, p.eta) * self.I(w)

    def r_w(self, t, w):
        p = self.params
        return p.r_scale * p.beta_profile.value(t, p.eta) * np.asarray(w) * self.f_prime(w)

    def traversal_time(self, w):
        """Reeb time from the entry wall to the exit wall."""
        return 6.0 * self.params.eta + 2.0 * self.params.r_scale * self.I(w)

    def clock(self, t, w, switched: bool):
        """Reeb time since crossing the entry wall for a box point at coordinate ``t``.

        Before the gluing switch the speed is ``1 / (1 + r_t)``; after it the
        old chart with speed ``1 / (1 - r_t)`` applies.
        """
        eta = self.params.eta
        if switched:
            return 3.0 * eta + t + 2.0 * self.params.r_scale * self.I(w) - self.r(t, w)
        return 3.0 * eta + t + self.r(t, w)


@dataclass
class ValidationReport:
    ok: bool
    checks: dict[str, bool]
    sup_r_t: float
    eps_max: float
    warnings: list[str]

    def to_json(self) -> dict:
        return {
            "ok": self.ok,
            "checks": self.checks,
            "sup_r_t": self.sup_r_t,
            "eps_max": self.eps_max,
            "warnings": self.warnings,
        }


def validate_params(p: SurgeryParams, grid: int = 200, strict: bool = True) -> ValidationReport:
    """Check the width bound, profile constraints and the contact condition on a grid."""
    checks: dict[str, bool] = {}
    if p.eta <= 0 or p.eps <= 0 or p.delta <= 0:
        raise ParamViolation("positivity", "eta, eps and delta must be positive")
    checks["eps_bound"] = p.eps < p.eps_max if p.q != 0 else p.eps < p.eta
    R = p.R_profile
    u = np.linspace(-1.0, 1.0, 2001)
    rp = R.derivative(u)
    checks["R_prime_even"] = bool(np.allclose(rp, rp[::-1], atol=1e-12))
    checks["R_prime_range"] = bool(rp.min() >= -1e-12 and rp.max() <= 4.0 + 1e-12)
    checks["R_endpoints"] = bool(abs(R.value(-1.0)) < 1e-12 and abs(R.value(1.0) - 2 * math.pi) < 1e-12)
    checks["R_flat_ends"] = bool(R.b < 1.0)
    B = p.beta_profile
    checks["beta_plateau"] = bool(B.inner > 2.0)
    checks["beta_support"] = bool(B.outer < 3.0)
    checks["beta_slope"] = bool(B.max_slope(p.eta) <= math.pi / p.eta)
    checks["switch_in_overlap"] = bool(1.0 < p.switch < 2.0)
    tw = TwistData(p)
    ts = np.linspace(-3 * p.eta, 3 * p.eta, grid)
    ws = np.linspace(-2 * p.eps, 2 * p.eps, grid)
    tt, ww = np.meshgrid(ts, ws)
    sup = float(np.max(np.abs(tw.r_t(tt, ww))))
    checks["contact_condition"] = sup < 1.0
    warnings = []
    if 3 * p.eta > p.delta:
        warnings.append(
            f"box depth 3*eta={3 * p.eta:g} exceeds collar width delta={p.delta:g}; "
            "box base points can leave the collar"
        )
    ok = all(checks.values())
    report = ValidationReport(ok, checks, sup, p.eps_max, warnings)
    if strict and not ok:
        failed = next(k for k, v in checks.items() if not v)
        raise ParamViolation(failed, f"surgery parameters fail {failed} (sup|r_t|={sup:.4g})")
    return report


@dataclass(frozen=True)
class BoxPoint:
    """Chart coordinates of a frame relative to one lift of the separating geodesic."""

    t: float
    s: float
    w: float
    lift: np.ndarray


@dataclass(frozen=True, eq=False)
class ChartMap:
    """Exact normal-form chart ``Psi`` near the Legendrian lift of the separating geodesic."""

    period: float
    eta: float
    eps: float
    lifts: np.ndarray | None = None

    @property
    def scale(self) -> float:
        return self.period / (2.0 * math.pi)

    def frame(self, t, s, w, lift: np.ndarray | None = None) -> np.ndarray:
        """``Psi(t, s, w)`` as a frame in the upper half-plane (on ``lift`` of the axis)."""
        sigma = s * self.scale
        sa = w / self.scale
        if abs(sa) > 1.0:
            raise OutOfChart(f"w={w} exceeds the fibre range of the chart")
        alpha = math.asin(sa)
        g = mb.flow_matrix(sigma) @ mb.rotation_matrix(alpha - math.pi / 2) @ mb.flow_matrix(t)
        return g if lift is None else lift @ g

    def crossing(self, frame: np.ndarray) -> tuple[float, float, float, bool] | None:
        """Chart coordinates relative to the imaginary axis, in closed form.

        Returns ``(t, sigma, alpha, forward)`` where the geodesic of ``frame``
        crosses the axis after time ``-t`` at height ``e^sigma`` making angle
        ``alpha`` with the horizontal, or ``None`` if it never crosses.
        """
        (a, b), (c, d) = frame
        ac, bd = a * c, b * d
        if ac == 0.0 or bd == 0.0 or (ac > 0) == (bd > 0):
            if bd == 0.0 and ac != 0.0:
                x = 1.0
            else:
                return None
        else:
            x = -bd / ac
        tau = 0.5 * math.log(x)
        g = frame @ mb.flow_matrix(tau)
        z = mb.base_point(g)
        sigma = math.log(z.imag)
        alpha = mb.direction_angle(g)
        alpha = (alpha + math.pi) % (2 * math.pi) - math.pi
        return -tau, sigma, alpha, ac > 0

    def coordinates(self, frame: np.ndarray, lift: np.ndarray | None = None, wrap: bool = True) -> tuple[float, float, float]:
        """Inverse chart: ``(t, s, w)`` of a frame crossing ``lift`` forward.

        Raises ``OutOfChart`` if the frame's geodesic does not cross forward or
        the coordinates fall outside the closed box.
        """
        h = frame if lift is None else np.linalg.solve(lift, frame)
        res = self.crossing(h)
        if res is None or not res[3]:
            raise OutOfChart("frame does not cross the separating geodesic forward")
        t, sigma, alpha, _ = res
        s = sigma / self.scale
        if wrap:
            s = s % (2 * math.pi)
        w = self.scale * math.sin(alpha)
        if abs(t) > 3 * self.eta + 1e-12 or abs(w) > 2 * self.eps + 1e-15:
            raise OutOfChart(f"coordinates t={t:.4g}, w={w:.4g} lie outside the box")
        return t, s, w

    def locate(self, frame: np.ndarray) -> BoxPoint | None:
        """Box coordinates of a frame (given in domain coordinates) if it lies in the box."""
        if self.lifts is None:
            return None
        for lift in self.lifts:
            try:
                t, s, w = self.coordinates(frame, lift, wrap=False)
            except OutOfChart:
                continue
            return BoxPoint(t, s, w, lift)
        return None


def build_chart(surface, p: SurgeryParams) -> ChartMap:
    """Chart for the box around the Legendrian lift of the marked geodesic."""
    from .surface import separating_lifts

    validate_params(p)
    ell = surface.axis_length
    if 2 * p.eps * 2 * math.pi / ell >= 1.0:
        raise ParamViolation("chart_range", "2*eps exceeds the fibre range l/(2 pi)")
    lifts = separating_lifts(surface, surface.domain.circumradius + 3 * p.eta + 1e-6)
    return ChartMap(ell, p.eta, p.eps, lifts)


def box_traverse(entry: tuple[float, float], p: SurgeryParams) -> tuple[float, float, float]:
    """Exit ``(s', w, tau)`` for a trajectory entering the box at ``(s, w)``."""
    s, w = entry
    tw = TwistData(p)
    s_out = (s + float(tw.f(w))) % (2 * math.pi)
    return s_out, w, float(tw.traversal_time(w))


def traversal_by_quadrature(w: float, p: SurgeryParams) -> tuple[float, float]:
    """Traversal time and shift by direct quadrature of ``dtau/dt = 1 +- r_t``.

    Independent of the closed form: integrates the box speed through the
    three slabs crossed on the way (old chart, new box, old chart).
    """
    from scipy.integrate import quad

    tw = TwistData(p)
    eta, ts = p.eta, p.t_switch
    opts = dict(epsabs=1e-13, epsrel=1e-13, limit=200)
    slab1 = quad(lambda t: 1.0 + float(tw.r_t(t, w)), -3 * eta, -eta, **opts)[0]
    slab2 = quad(lambda t: 1.0 + float(tw.r_t(t, w)), -eta, ts, **opts)[0]
    slab3 = quad(lambda t: 1.0 - float(tw.r_t(t, w)), ts, 3 * eta, **opts)[0]
    return slab1 + slab2 + slab3, float(tw.f(w))
