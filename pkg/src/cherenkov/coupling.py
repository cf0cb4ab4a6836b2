"""First-order hybridization of two phase-matched slab modes.

Slab 1 supports F1 and slab 2 supports F2 at the same lab (omega', k).
Weak evanescent overlap couples them through

    Omega_1 = omega' <F1|M - M2|F2>_c / E_s2,
    Omega_2 = omega' <F2|M - M1|F1>_c / E_s1,

and the hybrid frequencies are omega' +- sqrt(Omega_1 Omega_2).  Opposite
wave-energy signs make the product negative and the pair unstable.
"""

from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import brentq

from . import fields as fl
from .errors import DegenerateCoupling, NotPerturbative, NotPerturbativeWarning, PhaseMatchError
from .fields import FieldProfile
from .media import TAU_SING, MovingSlab, build_material_matrix, cherenkov_thresholds, RestFrameMaterial
from .slabmodes import LabModeRecord, ModeQuery, comoving_kx_for_lab, lab_frequency, lab_mode_record

TAU_MATCH = 1e-9


@dataclass(frozen=True)
class CoupledPair:
    slab1: MovingSlab
    slab2: MovingSlab
    rec1: LabModeRecord
    rec2: LabModeRecord
    F1: FieldProfile
    F2: FieldProfile
    omega_prime: float
    kx: float
    ky: float
    conjugate2: bool  # slab-2 field is the conjugate of a (-omega, -k) mode

    @property
    def gap(self) -> float:
        return self.slab2.z0 - self.slab1.z1

    @property
    def gamma0(self) -> float:
        """Vacuum decay constant shared by both modes."""
        return math.sqrt(self.kx**2 + self.ky**2 - self.omega_prime**2)

    @property
    def stack(self) -> list[MovingSlab]:
        return [self.slab1, self.slab2]


def conjugate_record(rec: LabModeRecord) -> LabModeRecord:
    """Record of F* given the record of F: (omega, k) flip, ratios do not."""
    return replace(
        rec,
        omega=-rec.omega,
        kx=-rec.kx,
        ky=-rec.ky,
        omega_co=-rec.omega_co,
        kx_co=-rec.kx_co,
        domega_dv=-rec.domega_dv,
        velocity_lhs=-rec.velocity_lhs,
        velocity_rhs=-rec.velocity_rhs,
    )


def _mode_at(slab: MovingSlab, kx_lab: float, ky: float, pol: str, branch: int, conjugate: bool):
    """Lab record and profile of ``slab``'s mode at lab ``kx_lab`` (or its conjugate)."""
    sign = -1.0 if conjugate else 1.0
    tmpl = ModeQuery(slab, 1.0, sign * ky, pol, branch)
    kc = comoving_kx_for_lab(tmpl, sign * kx_lab, slab.beta)
    rec, prof = lab_mode_record(ModeQuery(slab, kc, sign * ky, pol, branch), with_profile=True)
    if conjugate:
        rec, prof = conjugate_record(rec), prof.conj()
    return rec, prof


def _branch_frequency(slab, kx, ky, pol, branch, conjugate):
    if conjugate:
        return -lab_frequency(ModeQuery(slab, 1.0, -ky, pol, branch), -kx, slab.beta)
    return lab_frequency(ModeQuery(slab, 1.0, ky, pol, branch), kx, slab.beta)


def find_crossings(
    slab1: MovingSlab,
    slab2: MovingSlab,
    *,
    ky: float = 0.0,
    polarization: str = "TE",
    branches: tuple[int, int] = (0, 0),
    kx_range: tuple[float, float] = (0.05, 200.0),
    n_scan: int = 400,
    conjugate2: bool | None = None,
) -> list[tuple[float, bool]]:
    """Lab wavenumbers where the two lab dispersion curves cross.

    Scans a geometric kx grid for sign changes of omega_1 - omega_2 and
    refines each with brentq.  ``conjugate2`` restricts the search to the
    direct (False) or conjugate (True) slab-2 branch; None tries both.
    """
    options = [False, True] if conjugate2 is None else [conjugate2]
    ks = np.geomspace(kx_range[0], kx_range[1], n_scan)
    out = []
    for conj in options:

        def mismatch(k):
            w1 = _branch_frequency(slab1, k, ky, polarization, branches[0], False)
            w2 = _branch_frequency(slab2, k, ky, polarization, branches[1], conj)
            return w1 - w2

        vals = []
        for k in ks:
            try:
                vals.append(mismatch(k))
            except Exception:  # branch absent at this k
                vals.append(np.nan)
        vals = np.array(vals)
        for i in range(n_scan - 1):
            a, b = vals[i], vals[i + 1]
            if np.isfinite(a) and np.isfinite(b) and a * b < 0:
                k = brentq(mismatch, ks[i], ks[i + 1], xtol=1e-300, rtol=4 * np.finfo(float).eps)
                out.append((k, conj))
    return sorted(out)


def phase_match(
    slab1: MovingSlab,
    slab2: MovingSlab,
    *,
    ky: float = 0.0,
    polarization: str = "TE",
    branches: tuple[int, int] = (0, 0),
    kx_range: tuple[float, float] = (0.05, 200.0),
    n_scan: int = 400,
    conjugate2: bool | None = None,
    kx: float | None = None,
) -> CoupledPair:
    """Phase-matched pair at the lowest crossing (or at a given crossing ``kx``)."""
    if kx is None:
        found = find_crossings(
            slab1, slab2, ky=ky, polarization=polarization, branches=branches,
            kx_range=kx_range, n_scan=n_scan, conjugate2=conjugate2,
        )
        if not found:
            raise PhaseMatchError(
                f"no crossing of the lab dispersion curves for kx in {kx_range} "
                f"(slab velocities {slab1.beta:g}, {slab2.beta:g})"
            )
        kx, conj = found[0]
    else:
        conj = bool(conjugate2)
    rec1, F1 = _mode_at(slab1, kx, ky, polarization, branches[0], False)
    rec2, F2 = _mode_at(slab2, kx, ky, polarization, branches[1], conj)
    w = rec1.omega
    if abs(rec1.omega - rec2.omega) > TAU_MATCH * abs(w):
        raise PhaseMatchError(f"frequency mismatch {abs(rec1.omega - rec2.omega):.3e} at kx = {kx:g}")
    return CoupledPair(slab1, slab2, rec1, rec2, F1, F2, w, kx, ky, conj)


def with_gap(pair: CoupledPair, gap: float) -> CoupledPair:
    """Same phase-matched modes with slab 2 shifted to vacuum separation ``gap``."""
    shift = pair.slab1.z1 + gap - pair.slab2.z0
    s2 = replace(pair.slab2, z0=pair.slab2.z0 + shift, z1=pair.slab2.z1 + shift)
    pieces = tuple(
        replace(
            pc,
            z_lo=pc.z_lo + shift,
            z_hi=pc.z_hi + shift,
            ref=pc.ref + shift,
        )
        for pc in pair.F2.pieces
    )
    return replace(pair, slab2=s2, F2=replace(pair.F2, pieces=pieces))


# -- coupling constants -------------------------------------------------------


@dataclass(frozen=True)
class CouplingConstants:
    omega1: complex
    omega2: complex
    E_s1: float
    E_s2: float
    omega_prime: float
    gamma0: float
    gap: float

    @property
    def product(self) -> complex:
        return self.omega1 * self.omega2

    @property
    def ratio_residual(self) -> float:
        """|Omega_1 / Omega_2^* - E_s1/E_s2| relative to E_s1/E_s2."""
        target = self.E_s1 / self.E_s2
        return abs(self.omega1 / np.conj(self.omega2) - target) / abs(target)


def perturbation_weights(stack, keep: MovingSlab):
    """Intervals of M - M_keep: each other slab contributes (M_slab - I)."""
    out = []
    for s in stack:
        if s is keep or s == keep:
            continue
        out.append((s.z0, s.z1, build_material_matrix(s.material, s.beta).m - np.eye(6)))
    return out


def coupling_constants(pair: CoupledPair, *, strict: bool = False) -> CouplingConstants:
    """Mode-overlap coupling integrals, evaluated in closed form."""
    d = pair.gap
    g0 = pair.gamma0
    if math.exp(-g0 * d) >= 0.1:
        msg = f"gamma0 d = {g0 * d:.3g}: e^(-2 gamma0 d) is not small against e^(-gamma0 d)"
        if strict:
            raise NotPerturbative(msg)
        warnings.warn(msg, NotPerturbativeWarning, stacklevel=2)
    w = pair.omega_prime
    E1 = fl.krein_product(pair.F1, pair.F1, [pair.slab1]).real
    E2 = fl.krein_product(pair.F2, pair.F2, [pair.slab2]).real
    o1 = w * fl.bilinear(pair.F1, pair.F2, perturbation_weights(pair.stack, pair.slab2)) / E2
    o2 = w * fl.bilinear(pair.F2, pair.F1, perturbation_weights(pair.stack, pair.slab1)) / E1
    return CouplingConstants(complex(o1), complex(o2), E1, E2, w, g0, d)


# -- hybrid modes --------------------------------------------------------------


@dataclass(frozen=True)
class HybridModes:
    omega_c: complex  # frequency of the f member (Im > 0 when unstable)
    unstable: bool
    split: float  # lambda when unstable, the real half-splitting otherwise
    f: FieldProfile | None = None
    e: FieldProfile | None = None
    ff: complex | None = None
    ee: complex | None = None
    ef: complex | None = None

    @property
    def frequencies(self) -> tuple[complex, complex]:
        return self.omega_c, self.omega_c - 2j * self.split if self.unstable else self.omega_c - 2 * self.split

    @property
    def classification(self) -> str:
        return "complex_pair" if self.unstable else "real_split"


def hybridize(cc: CouplingConstants, omega_prime: float | None = None) -> HybridModes:
    """omega = omega' +- sqrt(Omega_1 Omega_2), classified by the energy signs."""
    w = cc.omega_prime if omega_prime is None else omega_prime
    prod = cc.product
    mag = abs(prod)
    if mag <= TAU_SING:
        raise DegenerateCoupling(f"|Omega_1 Omega_2| = {mag:.3e} below resolution")
    split = math.sqrt(mag)
    if cc.E_s1 * cc.E_s2 < 0:
        return HybridModes(complex(w, split), True, split)
    return HybridModes(complex(w + split, 0.0), False, split)


def hybrid_mode_fields(pair: CoupledPair, cc: CouplingConstants, hm: HybridModes) -> HybridModes:
    """Normalized hybrids f (growing) and e (decaying) with their Krein products."""
    if not hm.unstable:
        raise ValueError("hybrid f/e fields are defined for the unstable case only")
    E1, E2 = cc.E_s1, cc.E_s2
    phase = cc.omega1 / abs(cc.omega1)
    a1 = phase / math.sqrt(2 * abs(E1))
    a2 = 1j / math.sqrt(2 * abs(E2))
    s = math.copysign(1.0, E1)
    f = fl.combine([(a1, pair.F1), (a2, pair.F2)])
    e = fl.combine([(s * a1, pair.F1), (-s * a2, pair.F2)])
    stack = pair.stack
    return replace(
        hm,
        f=f,
        e=e,
        ff=fl.krein_product(f, f, stack),
        ee=fl.krein_product(e, e, stack),
        ef=fl.krein_product(e, f, stack),
    )


def weak_tolerance(pair: CoupledPair) -> float:
    return 10.0 * math.exp(-pair.gamma0 * pair.gap)


# -- trajectories ---------------------------------------------------------------


@dataclass(frozen=True)
class ClassicalTrajectory:
    t: np.ndarray
    E_s1: np.ndarray
    E_s2: np.ndarray
    p_wv1: np.ndarray
    p_wv2: np.ndarray
    p_ps1: np.ndarray
    p_ps2: np.ndarray
    F_ext1: np.ndarray
    F_ext2: np.ndarray
    dHtot1: np.ndarray
    dHtot2: np.ndarray
    bracket1: float
    bracket2: float
    v1: float
    v2: float

    @property
    def external_power(self) -> np.ndarray:
        return self.v1 * self.F_ext1 + self.v2 * self.F_ext2

    COLUMNS = ("t", "E_s1", "E_s2", "p_wv1", "p_wv2", "p_ps1", "p_ps2", "F_ext1", "F_ext2", "dHtot1", "dHtot2")

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.COLUMNS)
        cols = [getattr(self, c) for c in self.COLUMNS]
        for row in zip(*cols):
            if not all(math.isfinite(x) for x in row):
                raise ArithmeticError("non-finite value in trajectory")
            w.writerow([repr(float(x)) for x in row])
        buf.write(f"# bracket1 = {self.bracket1!r}, bracket2 = {self.bracket2!r}\n")
        return buf.getvalue()


def energy_bracket(rec: LabModeRecord, v: float) -> float:
    """(v / v_ph)(1 - v_ph v_g) - 1; dH_tot/dt = -bracket * dE_s/dt."""
    return v * (1.0 / rec.v_ph) * (1.0 - rec.v_ph * rec.v_g) - 1.0


def classical_trajectory(hm: HybridModes, pair: CoupledPair, t_grid, mode: str = "f") -> ClassicalTrajectory:
    """Energy, momentum and force bookkeeping of a hybrid mode in time.

    Unstable case: slab energies +-(1/2) e^(+-2 lambda t) with the positive
    one assigned to the slab with positive uncoupled energy.  Stable case:
    each slab keeps half of the (constant) mode energy.
    """
    t = np.asarray(t_grid, dtype=float)
    r1, r2 = pair.rec1, pair.rec2
    w, kx = pair.omega_prime, pair.kx
    s1, s2 = math.copysign(1.0, r1.E_s), math.copysign(1.0, r2.E_s)
    if hm.unstable:
        rate = 2 * hm.split if mode == "f" else -2 * hm.split
        grow = 0.5 * np.exp(rate * t)
    else:
        rate = 0.0
        grow = 0.5 * np.ones_like(t)
    E1, E2 = s1 * grow, s2 * grow
    dE1, dE2 = rate * E1, rate * E2
    # pseudo-momentum per unit wave energy is a property of the uncoupled mode
    q1, q2 = r1.p_ps / r1.E_s, r2.p_ps / r2.E_s
    F1, F2 = -q1 * dE1, -q2 * dE2
    v1, v2 = pair.slab1.beta, pair.slab2.beta
    return ClassicalTrajectory(
        t=t,
        E_s1=E1,
        E_s2=E2,
        p_wv1=kx / w * E1,
        p_wv2=kx / w * E2,
        p_ps1=q1 * E1,
        p_ps2=q2 * E2,
        F_ext1=F1,
        F_ext2=F2,
        dHtot1=v1 * F1 + dE1,
        dHtot2=v2 * F2 + dE2,
        bracket1=energy_bracket(r1, v1),
        bracket2=energy_bracket(r2, v2),
        v1=v1,
        v2=v2,
    )


def instability_criterion(slab2_beta: float, n: float) -> bool:
    """Refined threshold for identical slabs with slab 1 at rest."""
    if n <= 1.0:
        return False
    return slab2_beta > cherenkov_thresholds(RestFrameMaterial(n * n))[1]
