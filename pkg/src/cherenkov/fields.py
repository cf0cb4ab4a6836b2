"""Piecewise-exponential field profiles and their closed-form overlaps.

A profile describes a six-vector F = (E, H) (and the matching
G = (D, B)) with transverse dependence exp(i(kx x + ky y)).  Along z it is
a sum of *pieces*; each piece is supported on [z_lo, z_hi) and is a finite
sum of exponentials ``C_j exp(p_j (z - ref))``.  Pieces may overlap: the
field is the sum of every piece covering z.  That makes linear
combinations of profiles from different slabs trivial (concatenate the
pieces) and keeps every bilinear integral analytic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .media import build_material_matrix, gamma_factor


@dataclass(frozen=True)
class Piece:
    z_lo: float
    z_hi: float
    ref: float
    p: np.ndarray = field(repr=False)  # (J,) complex exponents
    F: np.ndarray = field(repr=False)  # (J, 6) coefficients of (E, H)
    G: np.ndarray = field(repr=False)  # (J, 6) coefficients of (D, B)

    def scaled(self, alpha: complex) -> "Piece":
        return replace(self, F=alpha * self.F, G=alpha * self.G)

    def conj(self) -> "Piece":
        return replace(self, p=np.conj(self.p), F=np.conj(self.F), G=np.conj(self.G))

    def contains(self, z: np.ndarray) -> np.ndarray:
        return (z >= self.z_lo) & (z < self.z_hi)


@dataclass(frozen=True)
class FieldProfile:
    pieces: tuple[Piece, ...]
    omega: complex
    kx: float
    ky: float
    frame_beta: float = 0.0  # velocity of the observing frame w.r.t. the lab
    label: str = ""

    # -- evaluation -------------------------------------------------------
    def _eval(self, z, which: str) -> np.ndarray:
        z = np.atleast_1d(np.asarray(z, dtype=float))
        out = np.zeros((z.size, 6), dtype=complex)
        for pc in self.pieces:
            mask = pc.contains(z)
            if not mask.any():
                continue
            ex = np.exp(np.outer(z[mask] - pc.ref, pc.p))
            out[mask] += ex @ getattr(pc, which)
        return out

    def F(self, z) -> np.ndarray:
        """(E, H) sampled at ``z``; shape (len(z), 6)."""
        return self._eval(z, "F")

    def G(self, z) -> np.ndarray:
        """(D, B) sampled at ``z``."""
        return self._eval(z, "G")

    # -- algebra ----------------------------------------------------------
    def scaled(self, alpha: complex) -> "FieldProfile":
        return replace(self, pieces=tuple(pc.scaled(alpha) for pc in self.pieces))

    def conj(self) -> "FieldProfile":
        """Complex conjugate field; it lives at transverse wavevector -k."""
        return replace(
            self,
            pieces=tuple(pc.conj() for pc in self.pieces),
            omega=-np.conj(self.omega),
            kx=-self.kx,
            ky=-self.ky,
        )

    def same_k(self, other: "FieldProfile", rtol: float = 1e-9) -> bool:
        scale = max(1.0, abs(self.kx), abs(self.ky))
        return abs(self.kx - other.kx) <= rtol * scale and abs(self.ky - other.ky) <= rtol * scale

    def __add__(self, other: "FieldProfile") -> "FieldProfile":
        if not self.same_k(other):
            raise ValueError("cannot add profiles with different transverse wavevectors")
        return replace(self, pieces=self.pieces + other.pieces, label="")

    def breakpoints(self) -> list[float]:
        pts = set()
        for pc in self.pieces:
            for z in (pc.z_lo, pc.z_hi):
                if math.isfinite(z):
                    pts.add(z)
        return sorted(pts)


def combine(terms) -> FieldProfile:
    """Linear combination sum(c * profile) of profiles sharing k."""
    terms = list(terms)
    out = terms[0][1].scaled(terms[0][0])
    for c, prof in terms[1:]:
        out = out + prof.scaled(c)
    return out


# -- closed-form integration ---------------------------------------------


def _phi1(x: np.ndarray) -> np.ndarray:
    """expm1(x)/x, continuous through x = 0."""
    x = np.asarray(x, dtype=complex)
    out = np.ones_like(x)
    big = np.abs(x) > 1e-8
    out[big] = np.expm1(x[big]) / x[big]
    small = ~big
    out[small] = 1.0 + 0.5 * x[small]
    return out


def _segment_integral(pa: Piece, pb: Piece, lo: float, hi: float, W: np.ndarray) -> complex:
    """int_lo^hi conj(Fa(z)) . W . Fb(z) dz for one pair of pieces."""
    if hi <= lo:
        return 0.0
    K = np.conj(pa.F) @ W @ pb.F.T  # (Ja, Jb)
    qa = np.conj(pa.p)[:, None]
    qb = pb.p[None, :]
    q = qa + qb
    if math.isfinite(lo):
        r = lo
    elif math.isfinite(hi):
        r = hi
    else:
        r = 0.5 * (pa.ref + pb.ref)
    pref = np.exp(qa * (r - pa.ref) + qb * (r - pb.ref))
    if math.isfinite(lo) and math.isfinite(hi):
        L = hi - lo
        integ = L * _phi1(q * L)
    elif math.isfinite(lo):  # [lo, inf)
        if np.any(q.real >= 0):
            raise ValueError("non-decaying integrand on a half-infinite interval")
        integ = -1.0 / q
    elif math.isfinite(hi):  # (-inf, hi]
        if np.any(q.real <= 0):
            raise ValueError("non-decaying integrand on a half-infinite interval")
        integ = 1.0 / q
    else:
        raise ValueError("pieces covering the whole line are not integrable")
    return complex(np.sum(K * pref * integ))


def weight_intervals(stack, frame_beta: float = 0.0) -> list[tuple[float, float, np.ndarray]]:
    """Piecewise-constant material matrix of ``stack`` as sorted intervals.

    ``frame_beta`` expresses the matrices in a frame moving at that velocity
    (slab velocities are composed relativistically); vacuum is frame-free.
    """
    from .media import velocity_addition

    slabs = sorted(stack, key=lambda s: s.z0)
    out = []
    z = -math.inf
    for s in slabs:
        if s.z0 < z:
            raise ValueError("slabs overlap")
        if s.z0 > z:
            out.append((z, s.z0, np.eye(6)))
        beta = velocity_addition(s.beta, -frame_beta) if frame_beta else s.beta
        out.append((s.z0, s.z1, build_material_matrix(s.material, beta).m))
        z = s.z1
    out.append((z, math.inf, np.eye(6)))
    return out


IDENTITY_WEIGHT = [(-math.inf, math.inf, np.eye(6))]


def bilinear(F2: FieldProfile, F1: FieldProfile, weights=IDENTITY_WEIGHT, *, use_G: bool = False) -> complex:
    """(1/2) int F2^* . W(z) . F1 dz per unit transverse area.

    Zero when the transverse wavevectors differ (Bloch orthogonality).
    With ``use_G`` the second factor is G1 = (D1, B1) and W must be the
    identity, i.e. the weight is whatever constitutive relation produced G.
    """
    if not F2.same_k(F1):
        return 0.0
    total = 0.0 + 0.0j
    for a in F2.pieces:
        for b in F1.pieces:
            lo0 = max(a.z_lo, b.z_lo)
            hi0 = min(a.z_hi, b.z_hi)
            if hi0 <= lo0:
                continue
            if use_G:
                b = replace(b, F=b.G)
            for wlo, whi, W in weights:
                lo = max(lo0, wlo)
                hi = min(hi0, whi)
                if hi > lo:
                    total += _segment_integral(a, b, lo, hi, W)
    return 0.5 * total


def krein_product(F2: FieldProfile, F1: FieldProfile, stack, frame_beta: float = 0.0) -> complex:
    """<F2|F1> = (1/2) int F2^* . M(z) . F1 dz."""
    return bilinear(F2, F1, weight_intervals(stack, frame_beta))


def canonical_product(F2: FieldProfile, F1: FieldProfile, W=None) -> complex:
    """<F2|W|F1>_c with a constant (default identity) matrix."""
    w = IDENTITY_WEIGHT if W is None else [(-math.inf, math.inf, W)]
    return bilinear(F2, F1, w)


# -- cross-product densities -------------------------------------------


def _cross_x_matrix(first: slice, second: slice) -> np.ndarray:
    """12x12 weight W with v^T W u = x_hat . (v[first] x u[second]) on (F, G) stacked."""
    W = np.zeros((12, 12))
    fy, fz = first.start + 1, first.start + 2
    sy, sz = second.start + 1, second.start + 2
    W[fy, sz] = 1.0
    W[fz, sy] = -1.0
    return W


def _stacked(prof: FieldProfile) -> FieldProfile:
    """Profile whose 'F' slot carries the 12-vector (E, H, D, B)."""
    pieces = tuple(
        replace(pc, F=np.hstack([pc.F, pc.G]), G=np.hstack([pc.F, pc.G])) for pc in prof.pieces
    )
    return replace(prof, pieces=pieces)


def _x_flux(prof: FieldProfile, first: slice, second: slice) -> float:
    """int Re[(A^*) x (B)]_x dz with A, B picked from (E, H, D, B) by slices."""
    s = _stacked(prof)
    W = _cross_x_matrix(first, second)
    # bilinear() folds in a factor 1/2; undo it.  Re(A* x B) is symmetric
    # under swapping roles up to conjugation, so the real part suffices.
    total = 0.0 + 0.0j
    for a in s.pieces:
        for b in s.pieces:
            lo, hi = max(a.z_lo, b.z_lo), min(a.z_hi, b.z_hi)
            if hi > lo:
                total += _segment_integral(a, b, lo, hi, W)
    return float(total.real)


_E, _H, _D, _B = slice(0, 3), slice(3, 6), slice(6, 9), slice(9, 12)


def wave_momentum_density_integral(prof: FieldProfile) -> float:
    """int Re(D^* x B)_x dz: wave momentum in the complex-amplitude convention."""
    return _x_flux(prof, _D, _B)


def pseudo_momentum_density_integral(prof: FieldProfile) -> float:
    """int Re(D^* x B - E^* x H)_x dz."""
    return _x_flux(prof, _D, _B) - _x_flux(prof, _E, _H)


# -- Lorentz boost of fields --------------------------------------------


def _boost_matrix(beta: float) -> np.ndarray:
    """Acts on the 12-vector (E, H, D, B) of the moving frame, returns lab values.

    (E, B) and (D, H) each transform as an (E, cB) pair.
    """
    g = gamma_factor(beta)
    T = np.zeros((12, 12))
    Ex, Ey, Ez, Hx, Hy, Hz, Dx, Dy, Dz, Bx, By, Bz = range(12)
    T[Ex, Ex] = T[Hx, Hx] = T[Dx, Dx] = T[Bx, Bx] = 1.0
    # E_y = g (E'_y + b B'_z), E_z = g (E'_z - b B'_y)
    T[Ey, Ey], T[Ey, Bz] = g, g * beta
    T[Ez, Ez], T[Ez, By] = g, -g * beta
    # B_y = g (B'_y - b E'_z), B_z = g (B'_z + b E'_y)
    T[By, By], T[By, Ez] = g, -g * beta
    T[Bz, Bz], T[Bz, Ey] = g, g * beta
    # D_y = g (D'_y + b H'_z), D_z = g (D'_z - b H'_y)
    T[Dy, Dy], T[Dy, Hz] = g, g * beta
    T[Dz, Dz], T[Dz, Hy] = g, -g * beta
    # H_y = g (H'_y - b D'_z), H_z = g (H'_z + b D'_y)
    T[Hy, Hy], T[Hy, Dz] = g, -g * beta
    T[Hz, Hz], T[Hz, Dy] = g, g * beta
    return T


def lorentz_transform_fields(prof: FieldProfile, beta: float) -> FieldProfile:
    """Re-express ``prof`` in a frame relative to which its frame moves at +beta x.

    With ``prof`` given in a slab's rest frame and ``beta`` the slab velocity,
    the result is the lab-frame field.  Boosting by -beta undoes it.
    """
    from .media import boost_dispersion_point, velocity_addition

    if beta == 0.0:
        return prof
    if not abs(beta) < 1.0:
        raise ValueError(f"|beta| must be < 1, got {beta}")
    T = _boost_matrix(beta)
    pieces = []
    for pc in prof.pieces:
        v = np.hstack([pc.F, pc.G]) @ T.T
        pieces.append(replace(pc, F=v[:, :6], G=v[:, 6:]))
    omega, kx = boost_dispersion_point(prof.omega, prof.kx, beta)
    # frame_beta tracks the observer's velocity relative to the lab
    return replace(
        prof,
        pieces=tuple(pieces),
        omega=omega,
        kx=kx,
        frame_beta=velocity_addition(prof.frame_beta, -beta),
    )


def pseudo_momentum_density(F1: np.ndarray, G1: np.ndarray, F2: np.ndarray, G2: np.ndarray) -> np.ndarray:
    """Pointwise symmetric bilinear g_ps,x of two solutions (E, H), (D, B) samples."""
    E1, H1, D1, B1 = F1[..., :3], F1[..., 3:], G1[..., :3], G1[..., 3:]
    E2, H2, D2, B2 = F2[..., :3], F2[..., 3:], G2[..., :3], G2[..., 3:]
    c = np.cross(D1, B2) + np.cross(D2, B1) - np.cross(E1, H2) - np.cross(E2, H1)
    return 0.5 * c[..., 0]


def lagrangian_density(F1, G1, F2, G2) -> np.ndarray:
    """Pointwise symmetric bilinear L_d of two solutions."""
    E1, H1, D1, B1 = F1[..., :3], F1[..., 3:], G1[..., :3], G1[..., 3:]
    E2, H2, D2, B2 = F2[..., :3], F2[..., 3:], G2[..., :3], G2[..., 3:]
    s = (D1 * E2).sum(-1) + (D2 * E1).sum(-1) - (B1 * H2).sum(-1) - (B2 * H1).sum(-1)
    return 0.25 * s
