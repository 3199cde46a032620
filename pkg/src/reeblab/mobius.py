"""Möbius isometries of the upper half-plane and the unit tangent bundle.

A unit tangent vector of the hyperbolic plane is identified with the unique
orientation-preserving isometry carrying the reference vector (based at ``i``,
pointing straight up) onto it.  Under this identification the geodesic flow is
right multiplication by ``diag(e^{t/2}, e^{-t/2})``, so it can be evaluated in
closed form for any time.

Usage::

    >>> m = MobiusElement([[2, 1], [1, 1]])
    >>> round(translation_length(m), 8)
    1.9248473
    >>> u = geodesic_step(UnitTangentFrame.identity(), 1.0)
    >>> round(hyperbolic_distance(1j, u.base_point), 12)
    1.0
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import NotHyperbolic

DET_TOL = 1e-12
PARABOLIC_TOL = 1e-9


class IsometryKind(enum.Enum):
    ELLIPTIC = "elliptic"
    PARABOLIC = "parabolic"
    HYPERBOLIC = "hyperbolic"


class ChartTag(enum.Enum):
    BUNDLE = "bundle"
    SURGERY_BOX = "surgery_box"


def normalize(m) -> np.ndarray:
    """Scale a 2x2 matrix of positive determinant to determinant one."""
    m = np.asarray(m, dtype=float)
    det = m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
    if not det > 0:
        raise ValueError(f"matrix must have positive determinant, got {det}")
    return m / np.sqrt(det)


def flow_matrix(t: float) -> np.ndarray:
    h = 0.5 * t
    return np.array([[np.exp(h), 0.0], [0.0, np.exp(-h)]])


def rotation_matrix(phi: float) -> np.ndarray:
    """Isometry fixing ``i`` that turns tangent directions there by ``phi``."""
    c, s = np.cos(0.5 * phi), np.sin(0.5 * phi)
    return np.array([[c, s], [-s, c]])


def translation_matrix(z: complex) -> np.ndarray:
    """Affine isometry ``w -> Im(z) w + Re(z)`` taking ``i`` to ``z``."""
    r = np.sqrt(z.imag)
    return np.array([[r, z.real / r], [0.0, 1.0 / r]])


def apply(m: np.ndarray, z):
    """Act by the Möbius map of ``m`` on points (scalar or array)."""
    return (m[0, 0] * z + m[0, 1]) / (m[1, 0] * z + m[1, 1])


def hyperbolic_distance(z, w):
    """Distance in the upper half-plane, stable for nearby points."""
    z = np.asarray(z, dtype=complex)
    w = np.asarray(w, dtype=complex)
    return 2.0 * np.arcsinh(np.abs(z - w) / (2.0 * np.sqrt(z.imag * w.imag)))


def base_point(m: np.ndarray) -> complex:
    return complex(apply(m, 1j))


def direction_angle(m: np.ndarray) -> float:
    """Angle from the positive real direction of the frame's tangent vector."""
    return float(np.pi / 2 - 2.0 * np.arctan2(m[1, 0], m[1, 1]))


def liouville(frame: np.ndarray, tangent: np.ndarray) -> float:
    """Liouville form at ``frame`` on a tangent matrix ``tangent``.

    Left-translating to the identity, the geodesic generator is
    ``diag(1/2, -1/2)`` and the horocyclic and rotation generators are
    off-diagonal, so the form reads off twice the top-left entry.
    """
    return float(2.0 * np.linalg.solve(frame, tangent)[0, 0])


def frame_matrix(z: complex, angle: float) -> np.ndarray:
    """Frame based at ``z`` whose vector makes ``angle`` with the real axis."""
    return translation_matrix(z) @ rotation_matrix(angle - np.pi / 2)


@dataclass(frozen=True, eq=False)
class MobiusElement:
    """Element of SL(2,R) acting on the upper half-plane, read modulo sign."""

    entries: np.ndarray

    def __post_init__(self):
        m = normalize(self.entries)
        m.setflags(write=False)
        object.__setattr__(self, "entries", m)

    @classmethod
    def identity(cls) -> MobiusElement:
        return cls(np.eye(2))

    @property
    def trace(self) -> float:
        return float(self.entries[0, 0] + self.entries[1, 1])

    @property
    def det(self) -> float:
        m = self.entries
        return float(m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0])

    @property
    def kind(self) -> IsometryKind:
        t = abs(self.trace)
        if abs(t - 2.0) <= PARABOLIC_TOL:
            return IsometryKind.PARABOLIC
        return IsometryKind.HYPERBOLIC if t > 2.0 else IsometryKind.ELLIPTIC

    def inverse(self) -> MobiusElement:
        (a, b), (c, d) = self.entries
        return MobiusElement(np.array([[d, -b], [-c, a]]))

    def __matmul__(self, other: MobiusElement) -> MobiusElement:
        return compose(self, other)

    def __pow__(self, n: int) -> MobiusElement:
        base = self if n >= 0 else self.inverse()
        out = np.eye(2)
        for _ in range(abs(n)):
            out = out @ base.entries
        return MobiusElement(out)

    def apply(self, z):
        return apply(self.entries, z)

    def isclose(self, other: MobiusElement, tol: float = 1e-9) -> bool:
        """Equality in PSL(2,R): entries agree up to a global sign."""
        a, b = self.entries, other.entries
        return bool(min(np.max(np.abs(a - b)), np.max(np.abs(a + b))) <= tol)

    def fixed_points(self) -> tuple[float, float]:
        """(repelling, attracting) boundary fixed points of a hyperbolic element."""
        if self.kind is not IsometryKind.HYPERBOLIC:
            raise NotHyperbolic(f"trace {self.trace} has no real axis")
        (a, b), (c, d) = self.entries
        if abs(c) < 1e-300:
            # diagonal: fixed points are 0 and infinity
            return (0.0, np.inf) if abs(a) > abs(d) else (np.inf, 0.0)
        disc = np.sqrt((a + d) ** 2 - 4.0)
        roots = ((a - d - disc) / (2 * c), (a - d + disc) / (2 * c))
        # the derivative at a fixed point x is 1/(cx+d)^2; attracting if |cx+d| > 1
        first_attracting = abs(c * roots[0] + d) > 1.0
        return (roots[1], roots[0]) if first_attracting else roots

    def __repr__(self) -> str:
        (a, b), (c, d) = self.entries
        return f"MobiusElement([[{a:.6g}, {b:.6g}], [{c:.6g}, {d:.6g}]])"


def compose(a: MobiusElement, b: MobiusElement) -> MobiusElement:
    return MobiusElement(a.entries @ b.entries)


def translation_length(m: MobiusElement | np.ndarray) -> float:
    tr = abs(float(np.trace(m.entries if isinstance(m, MobiusElement) else m)))
    if tr <= 2.0 + PARABOLIC_TOL:
        raise NotHyperbolic(f"|trace| = {tr} is not hyperbolic")
    return float(2.0 * np.arccosh(tr / 2.0))


def trace_for_length(length: float) -> float:
    return float(2.0 * np.cosh(length / 2.0))


@dataclass(frozen=True, eq=False)
class UnitTangentFrame:
    """A point of the unit tangent bundle of the hyperbolic plane."""

    frame: MobiusElement
    chart_tag: ChartTag = ChartTag.BUNDLE

    @classmethod
    def identity(cls) -> UnitTangentFrame:
        return cls(MobiusElement.identity())

    @classmethod
    def from_point(cls, z: complex, angle: float) -> UnitTangentFrame:
        return cls(MobiusElement(frame_matrix(complex(z), angle)))

    @property
    def base_point(self) -> complex:
        return base_point(self.frame.entries)

    @property
    def angle(self) -> float:
        return direction_angle(self.frame.entries)

    def isclose(self, other: UnitTangentFrame, tol: float = 1e-9) -> bool:
        return self.chart_tag == other.chart_tag and self.frame.isclose(other.frame, tol)


def geodesic_step(u: UnitTangentFrame, t: float) -> UnitTangentFrame:
    """Exact geodesic flow for time ``t`` (either sign)."""
    if u.chart_tag is not ChartTag.BUNDLE:
        raise ValueError("geodesic_step acts on bundle frames only")
    return UnitTangentFrame(MobiusElement(u.frame.entries @ flow_matrix(t)))
