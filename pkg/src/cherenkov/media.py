"""Constitutive model of uniformly moving, non-dispersive media.

Natural units throughout: c = eps0 = mu0 = 1.  A body with rest-frame
parameters (epsilon, mu) moving with velocity ``beta`` along x relates
(D, B) to (E, H) in the lab frame through a real symmetric 6x6 matrix::

    | D |   | eps_bar    a X  | | E |
    | B | = | a X^T    mu_bar | | H |

with X the matrix of ``x_hat cross`` and the transverse entries of
eps_bar/mu_bar boosted to eps_t, mu_t.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import SingularMaterial

TAU_SING = 1e-12

# x_hat cross v, as a matrix acting on v
XCROSS = np.array([[0.0, 0.0, 0.0], [0.0, 0.0, -1.0], [0.0, 1.0, 0.0]])


@dataclass(frozen=True)
class RestFrameMaterial:
    epsilon: float
    mu: float = 1.0

    def __post_init__(self):
        if not (math.isfinite(self.epsilon) and math.isfinite(self.mu)):
            raise ValueError("epsilon and mu must be finite")
        if self.mu <= 0:
            raise ValueError(f"mu must be positive, got {self.mu}")
        if self.epsilon * self.mu < 1.0:
            raise ValueError(f"n^2 = epsilon*mu must be >= 1, got {self.epsilon * self.mu}")

    @property
    def n(self) -> float:
        return math.sqrt(self.epsilon * self.mu)


VACUUM = RestFrameMaterial(1.0, 1.0)


@dataclass(frozen=True)
class MovingSlab:
    material: RestFrameMaterial
    beta: float
    z0: float
    z1: float

    def __post_init__(self):
        if not abs(self.beta) < 1.0:
            raise ValueError(f"|beta| must be < 1, got {self.beta}")
        if not self.z1 > self.z0:
            raise ValueError(f"slab needs z1 > z0, got [{self.z0}, {self.z1}]")

    @property
    def thickness(self) -> float:
        return self.z1 - self.z0

    @property
    def center(self) -> float:
        return 0.5 * (self.z0 + self.z1)

    def at_rest(self) -> "MovingSlab":
        return MovingSlab(self.material, 0.0, self.z0, self.z1)


@dataclass(frozen=True)
class MaterialMatrix:
    m: np.ndarray = field(repr=False)
    eps_t: float
    mu_t: float
    a: float

    def to_dict(self) -> dict:
        return {
            "m": [float(x) for x in self.m.ravel()],
            "eps_t": float(self.eps_t),
            "mu_t": float(self.mu_t),
            "a": float(self.a),
        }


def gamma_factor(beta: float) -> float:
    return 1.0 / math.sqrt(1.0 - beta * beta)


def build_material_matrix(material: RestFrameMaterial, beta: float) -> MaterialMatrix:
    """Lab-frame material matrix of ``material`` moving at ``beta`` along x.

    Raises SingularMaterial within ``TAU_SING`` of the Cherenkov resonance.
    """
    if not abs(beta) < 1.0:
        raise ValueError(f"|beta| must be < 1, got {beta}")
    eps, mu = material.epsilon, material.mu
    n2 = eps * mu
    den = 1.0 - n2 * beta * beta
    if abs(den) <= TAU_SING:
        raise SingularMaterial(
            f"1 - n^2 beta^2 = {den:.3e} for n = {math.sqrt(n2):g}, beta = {beta:g}"
        )
    b2 = 1.0 - beta * beta
    eps_t = eps * b2 / den
    mu_t = mu * b2 / den
    a = beta * (n2 - 1.0) / den

    m = np.zeros((6, 6))
    m[:3, :3] = np.diag([eps, eps_t, eps_t])
    m[3:, 3:] = np.diag([mu, mu_t, mu_t])
    m[:3, 3:] = a * XCROSS
    m[3:, :3] = a * XCROSS.T
    return MaterialMatrix(m, eps_t, mu_t, a)


class DefinitenessTag(str, enum.Enum):
    POSITIVE_DEFINITE = "PositiveDefinite"
    INDEFINITE = "Indefinite"
    SINGULAR = "Singular"


@dataclass(frozen=True)
class Definiteness:
    tag: DefinitenessTag
    min_eigenvalue: float


def classify_definiteness(mm: MaterialMatrix, tau: float = TAU_SING) -> Definiteness:
    """Sign structure of the material matrix.

    Eigenvalues are compared against ``tau`` after scaling by the largest
    entry, so near-resonant matrices (whose entries blow up) register as
    Singular rather than as a misleading sign pattern.
    """
    w = np.linalg.eigvalsh(mm.m)
    scale = float(np.max(np.abs(mm.m)))
    lo = float(w[0])
    if float(np.min(np.abs(w))) <= tau * scale:
        return Definiteness(DefinitenessTag.SINGULAR, lo)
    if lo > 0:
        return Definiteness(DefinitenessTag.POSITIVE_DEFINITE, lo)
    return Definiteness(DefinitenessTag.INDEFINITE, lo)


def definiteness_at(material: RestFrameMaterial, beta: float) -> Definiteness:
    """Classify directly from (material, beta), mapping the resonance to Singular."""
    try:
        mm = build_material_matrix(material, beta)
    except SingularMaterial:
        return Definiteness(DefinitenessTag.SINGULAR, 0.0)
    return classify_definiteness(mm)


def locate_definiteness_flip(
    material: RestFrameMaterial, lo: float = 0.0, hi: float = 0.999, tol: float = 1e-15
) -> float:
    """Bisect on beta for the PositiveDefinite -> Indefinite transition.

    A Singular verdict sits between the two regimes; its side is read off
    the sign of the smallest eigenvalue (positive below the flip, large and
    negative above).  Exactly at the resonance no matrix exists and the
    midpoint is returned.
    """
    if definiteness_at(material, lo).tag is not DefinitenessTag.POSITIVE_DEFINITE:
        raise ValueError(f"matrix is not positive definite at beta = {lo}")
    if definiteness_at(material, hi).tag is DefinitenessTag.POSITIVE_DEFINITE:
        raise ValueError(f"no flip inside [{lo}, {hi}]")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        d = definiteness_at(material, mid)
        if d.tag is DefinitenessTag.POSITIVE_DEFINITE:
            lo = mid
        elif d.tag is DefinitenessTag.INDEFINITE:
            hi = mid
        elif d.min_eigenvalue > 0:
            lo = mid
        elif d.min_eigenvalue < 0:
            hi = mid
        else:
            return mid
    return 0.5 * (lo + hi)


def cherenkov_thresholds(material: RestFrameMaterial) -> tuple[float, float]:
    """(1/n, 2n/(n^2+1)): onset of indefiniteness, and of two-slab instability."""
    n = material.n
    return 1.0 / n, 2.0 * n / (n * n + 1.0)


def boost_dispersion_point(omega: float, kx: float, beta: float) -> tuple[float, float]:
    """Map (omega, kx) seen in a frame moving at ``beta`` into the lab."""
    g = gamma_factor(beta)
    return g * (omega + beta * kx), g * (kx + beta * omega)


def velocity_addition(v_co: float, v: float) -> float:
    return (v_co + v) / (1.0 + v_co * v)


def stack_material(z: float, stack) -> np.ndarray:
    """Material matrix at position ``z`` for a list of non-overlapping slabs."""
    for slab in stack:
        if slab.z0 <= z < slab.z1:
            return build_material_matrix(slab.material, slab.beta).m
    return np.eye(6)
