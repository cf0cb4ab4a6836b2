"""Guided modes of a single moving slab.

The mode is solved in the slab's rest (co-moving) frame, where the slab is
an ordinary symmetric dielectric waveguide in vacuum, and then boosted to
the lab.  With K = sqrt(kx^2 + ky^2), kappa = sqrt(n^2 w^2 - K^2) inside and
gamma0 = sqrt(K^2 - w^2) outside, the characteristic functions are written
without poles (h = d/2, m = mu for TE and epsilon for TM)::

    even:  (kappa/m) sin(kappa h) - gamma0 cos(kappa h) = 0
    odd:   (kappa/m) cos(kappa h) + gamma0 sin(kappa h) = 0

Branch ``b`` is root number ``b // 2`` of the even (b even) or odd (b odd)
function in increasing frequency, so branches 0, 1, 2, ... follow the
usual TE0, TE1, TE2, ... ordering.
"""

from __future__ import annotations

import csv
import enum
import io
import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import simpson
from scipy.optimize import brentq

from . import fields as fl
from .errors import DerivativeUnstable, GridTooCoarse, NoContrast, NoMode
from .fields import FieldProfile, Piece, lorentz_transform_fields
from .media import MovingSlab, boost_dispersion_point, gamma_factor, velocity_addition

TAU_ROOT = 1e-12
N_PROBES = 512
H_V = 1e-5
H_K_REL = 1e-5
RICHARDSON_TOL = 1e-5


class Polarization(str, enum.Enum):
    TE = "TE"
    TM = "TM"


@dataclass(frozen=True)
class ModeQuery:
    slab: MovingSlab
    kx_co: float
    ky: float = 0.0
    polarization: Polarization = Polarization.TE
    branch: int = 0

    def __post_init__(self):
        if self.kx_co**2 + self.ky**2 <= 0:
            raise ValueError("need kx_co^2 + ky^2 > 0")
        if self.branch < 0:
            raise ValueError("branch must be >= 0")
        object.__setattr__(self, "polarization", Polarization(self.polarization))

    @property
    def k_eff(self) -> float:
        return math.hypot(self.kx_co, self.ky)


@dataclass(frozen=True)
class GuidedModeCo:
    omega_co: float
    kappa: float
    gamma0: float
    residual: float
    k_eff: float
    even: bool


def _m_inside(q: ModeQuery) -> float:
    mat = q.slab.material
    return mat.mu if q.polarization is Polarization.TE else mat.epsilon


def characteristic(omega, K: float, n: float, m: float, h: float, even: bool):
    """Pole-free characteristic function; vectorized over ``omega``."""
    omega = np.asarray(omega, dtype=float)
    kappa = np.sqrt(np.maximum(n * n * omega * omega - K * K, 0.0))
    g0 = np.sqrt(np.maximum(K * K - omega * omega, 0.0))
    if even:
        return (kappa / m) * np.sin(kappa * h) - g0 * np.cos(kappa * h)
    return (kappa / m) * np.cos(kappa * h) + g0 * np.sin(kappa * h)


def solve_omega(K: float, n: float, m: float, h: float, branch: int, n_probes: int = N_PROBES) -> float:
    """Co-moving frequency of ``branch`` at in-plane wavenumber K (bare kernel)."""
    even = branch % 2 == 0
    want = branch // 2
    lo, hi = K / n, K
    w = np.linspace(lo, hi, n_probes + 1)
    # stay strictly inside the open bracket; kappa = 0 is a trivial zero
    w[0] = lo + 1e-13 * (hi - lo)
    w[-1] = hi - 1e-13 * (hi - lo)
    f = characteristic(w, K, n, m, h, even)
    s = np.sign(f)
    # a root may land exactly on an interior probe; count it once
    exact = np.nonzero(s[1:-1] == 0)[0] + 1
    cross = np.nonzero(s[:-1] * s[1:] < 0)[0]
    roots = sorted([(w[i], None) for i in exact] + [(w[i], i) for i in cross])
    if len(roots) <= want:
        raise NoMode(f"branch {branch} below cutoff at K = {K:g}")
    root, i = roots[want]
    if i is None:
        return float(root)
    fun = lambda x: float(characteristic(x, K, n, m, h, even))
    return brentq(fun, w[i], w[i + 1], xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)


def solve_comoving_dispersion(q: ModeQuery, n_probes: int = N_PROBES) -> GuidedModeCo:
    """Guided-mode frequency in the slab rest frame."""
    mat = q.slab.material
    n = mat.n
    if n <= 1.0:
        raise NoContrast("no index contrast (n = 1): the slab guides nothing")
    K = q.k_eff
    m = _m_inside(q)
    h = 0.5 * q.slab.thickness
    w = solve_omega(K, n, m, h, q.branch, n_probes)
    kappa = math.sqrt(n * n * w * w - K * K)
    g0 = math.sqrt(K * K - w * w)
    even = q.branch % 2 == 0
    res = abs(float(characteristic(w, K, n, m, h, even))) / (kappa / m + g0)
    if not (K / n < w < K) or res > TAU_ROOT:
        raise NoMode(f"root refinement failed (residual {res:.2e})")
    return GuidedModeCo(w, kappa, g0, res, K, even)


# -- fields ----------------------------------------------------------------


def _unit_vectors(kx: float, ky: float):
    K = math.hypot(kx, ky)
    u = np.array([kx / K, ky / K, 0.0])
    w = np.array([-ky / K, kx / K, 0.0])
    return u, w


def _piece(z_lo, z_hi, ref, p, amps, q: ModeQuery, omega, eps_loc, mu_loc) -> Piece:
    """One region of the mode: scalar profile sum(amps * exp(p (z-ref)))."""
    u, w = _unit_vectors(q.kx_co, q.ky)
    zh = np.array([0.0, 0.0, 1.0])
    K = q.k_eff
    p = np.asarray(p, dtype=complex)
    F = np.zeros((len(p), 6), dtype=complex)
    if q.polarization is Polarization.TE:
        # E = E_w w;  H = (i/(w mu)) E_w' u + (K/(w mu)) E_w z
        for j, (pj, cj) in enumerate(zip(p, amps)):
            F[j, :3] = cj * w
            F[j, 3:] = cj * (1j * pj / (omega * mu_loc) * u + K / (omega * mu_loc) * zh)
    else:
        # H = H_w w;  E = -(i/(w eps)) H_w' u - (K/(w eps)) H_w z
        for j, (pj, cj) in enumerate(zip(p, amps)):
            F[j, 3:] = cj * w
            F[j, :3] = -cj * (1j * pj / (omega * eps_loc) * u + K / (omega * eps_loc) * zh)
    G = np.hstack([eps_loc * F[:, :3], mu_loc * F[:, 3:]])
    return Piece(z_lo, z_hi, ref, p, F, G)


def mode_field_profile(mode: GuidedModeCo, q: ModeQuery) -> FieldProfile:
    """Closed-form rest-frame fields, normalized to unit co-moving wave energy."""
    s = q.slab
    mat = s.material
    h = 0.5 * s.thickness
    k, g0, w = mode.kappa, mode.gamma0, mode.omega_co
    if mode.even:
        inner = ([1j * k, -1j * k], [0.5, 0.5])  # cos(k s)
        edge_r, edge_l = math.cos(k * h), math.cos(k * h)
    else:
        inner = ([1j * k, -1j * k], [-0.5j, 0.5j])  # sin(k s)
        edge_r, edge_l = math.sin(k * h), -math.sin(k * h)
    pieces = (
        _piece(-math.inf, s.z0, s.z0, [g0], [edge_l], q, w, 1.0, 1.0),
        _piece(s.z0, s.z1, s.center, inner[0], inner[1], q, w, mat.epsilon, mat.mu),
        _piece(s.z1, math.inf, s.z1, [-g0], [edge_r], q, w, 1.0, 1.0),
    )
    prof = FieldProfile(pieces, w, q.kx_co, q.ky, frame_beta=s.beta, label=f"{q.polarization.value}{q.branch}")
    e = fl.bilinear(prof, prof, use_G=True).real
    return prof.scaled(1.0 / math.sqrt(e))


def wave_energy(F: FieldProfile, stack) -> float:
    """(1/2) int F^* . M(z) . F dz with M expressed in the profile's frame."""
    val = fl.krein_product(F, F, stack, frame_beta=F.frame_beta)
    scale = fl.canonical_product(F, F).real
    if abs(val.imag) > 1e-10 * max(scale, 1e-300):
        raise ArithmeticError(f"wave energy not real: {val}")
    return float(val.real)


def wave_energy_sampled(F: FieldProfile, stack, n: int = 4000, decay: float = 20.0) -> float:
    """Sampled-quadrature cross-check of :func:`wave_energy`.

    Simpson's rule per region; the exterior is truncated where the field has
    decayed by ``exp(-decay)`` and the error is estimated from a half-resolution run.
    """
    zs = F.breakpoints()
    g = max(abs(pc.p.real).max() for pc in F.pieces if not (math.isfinite(pc.z_lo) and math.isfinite(pc.z_hi)))
    a, b = zs[0] - decay / g, zs[-1] + decay / g
    weights = fl.weight_intervals(stack, F.frame_beta)

    def integrate(npts):
        total = 0.0
        edges = [a] + zs + [b]
        for lo, hi in zip(edges[:-1], edges[1:]):
            z = np.linspace(lo, hi, npts)
            mid = 0.5 * (lo + hi)
            W = next(Wm for wl, wh, Wm in weights if wl <= mid < wh)
            Fz = F.F(np.clip(z, lo, np.nextafter(hi, lo)))
            integrand = np.einsum("zi,ij,zj->z", Fz.conj(), W, Fz).real
            total += simpson(integrand, x=z)
        return 0.5 * total

    fine, coarse = integrate(n + 1), integrate(n // 2 + 1)
    err = abs(fine - coarse) / 15.0  # Simpson error ~ h^4
    if err > 1e-8 * abs(fine):
        raise GridTooCoarse(f"quadrature error {err:.2e} too large")
    return fine


# -- lab-frame dispersion ----------------------------------------------------


def _comoving_omega(q: ModeQuery, K: float) -> float:
    return solve_omega(K, q.slab.material.n, _m_inside(q), 0.5 * q.slab.thickness, q.branch)


def lab_omega(q: ModeQuery, kx_lab: float, beta: float, guess: float) -> float:
    """Lab frequency at fixed lab (kx, ky) for the slab moving at ``beta``.

    Solves g (w - b kx) = Omega(sqrt(g^2 (kx - b w)^2 + ky^2)); the left side
    minus the right is strictly increasing in w, so a bracket search around
    ``guess`` always terminates.
    """
    g = gamma_factor(beta)
    ky = q.ky

    def h(w):
        K = math.hypot(g * (kx_lab - beta * w), ky)
        return g * (w - beta * kx_lab) - _comoving_omega(q, K)

    step = 1e-3 * max(abs(guess), 1e-12)
    lo, hi = guess - step, guess + step
    for _ in range(200):
        flo, fhi = h(lo), h(hi)
        if flo <= 0 <= fhi:
            break
        if flo > 0:
            lo -= 2 * (hi - lo)
        if fhi < 0:
            hi += 2 * (hi - lo)
    else:
        raise NoMode("could not bracket the lab-frame frequency")
    return brentq(h, lo, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)


def _richardson_derivative(f, x: float, h: float, what: str) -> float:
    d1 = (f(x + h) - f(x - h)) / (2 * h)
    d2 = (f(x + h / 2) - f(x - h / 2)) / h
    r = (4 * d2 - d1) / 3
    if abs(r - d2) > RICHARDSON_TOL * max(abs(r), 1e-12):
        raise DerivativeUnstable(f"{what}: Richardson estimates {d1:.6g}, {d2:.6g} disagree")
    return r


@dataclass(frozen=True)
class LabModeRecord:
    omega: float
    kx: float
    ky: float
    beta: float
    E_s: float
    p_wv: float
    p_ps: float
    v_ph: float
    v_g: float
    v_ph_co: float
    v_g_co: float
    omega_co: float
    kx_co: float
    E_s_co: float
    domega_dv: float
    velocity_lhs: float
    velocity_rhs: float

    @property
    def velocity_residual(self) -> float:
        return abs(self.velocity_lhs - self.velocity_rhs)


def lab_mode_record(q: ModeQuery, beta: float | None = None, *, with_profile: bool = False):
    """Lab-frame quantities of a guided mode of ``q.slab`` moving at ``beta``.

    ``beta`` defaults to the slab's own velocity.  With ``with_profile`` the
    lab-frame FieldProfile is returned alongside the record.
    """
    if beta is None:
        beta = q.slab.beta
    slab = MovingSlab(q.slab.material, beta, q.slab.z0, q.slab.z1)
    q = ModeQuery(slab, q.kx_co, q.ky, q.polarization, q.branch)
    mode = solve_comoving_dispersion(q)
    co = mode_field_profile(mode, q)
    E_co = wave_energy(co, [slab])
    lab = lorentz_transform_fields(co, beta)
    omega, kx = float(lab.omega.real), float(lab.kx)
    E_s = wave_energy(lab, [slab])

    # co-moving group velocity along x: dOmega/dkx_co at fixed ky
    K = q.k_eff
    hk_co = H_K_REL * max(abs(q.kx_co), 1e-3 * K)
    v_g_co = _richardson_derivative(
        lambda kxc: _comoving_omega(q, math.hypot(kxc, q.ky)), q.kx_co, hk_co, "co-moving group velocity"
    )
    v_ph_co = mode.omega_co / q.kx_co if q.kx_co != 0 else math.inf

    hk = H_K_REL * max(abs(kx), 1e-3 * K)
    v_g = _richardson_derivative(lambda k: lab_omega(q, k, beta, omega), kx, hk, "group velocity")
    dw_dv = _richardson_derivative(lambda b: lab_omega(q, kx, b, omega), beta, H_V, "d omega / d v")
    v_ph = omega / kx if kx != 0 else math.inf

    lhs = (1 - beta * beta) * dw_dv
    rhs = kx * (1 - v_ph * v_g)
    rec = LabModeRecord(
        omega=omega,
        kx=kx,
        ky=q.ky,
        beta=beta,
        E_s=E_s,
        p_wv=kx / omega * E_s,
        p_ps=(1 - beta * beta) * dw_dv / omega * E_s,
        v_ph=v_ph,
        v_g=v_g,
        v_ph_co=v_ph_co,
        v_g_co=v_g_co,
        omega_co=mode.omega_co,
        kx_co=q.kx_co,
        E_s_co=E_co,
        domega_dv=dw_dv,
        velocity_lhs=lhs,
        velocity_rhs=rhs,
    )
    return (rec, lab) if with_profile else rec


def comoving_kx_for_lab(q: ModeQuery, kx_lab: float, beta: float) -> float:
    """Co-moving kx whose boosted mode lands on ``kx_lab``.

    kx_lab = g (kx_co + b Omega(kx_co)) is strictly increasing in kx_co
    because |dOmega/dkx_co| < 1, so a bracketed root is unique.
    """
    g = gamma_factor(beta)
    ky = q.ky
    target = kx_lab / g

    def f(kc):
        return kc + beta * _comoving_omega(q, math.hypot(kc, ky)) - target

    ab = abs(beta)
    if ky == 0.0:
        if target == 0.0:
            raise NoMode("kx_lab = 0 with ky = 0 has no guided mode")
        lo, hi = sorted((target / (1 + ab), target / (1 - ab)))
    else:
        span = abs(target) + math.hypot(target, ky) * ab / (1 - ab) + ky
        lo, hi = target - span, target + span
    return brentq(f, lo, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)


def lab_frequency(q: ModeQuery, kx_lab: float, beta: float) -> float:
    """Lab frequency of the mode of ``q.slab`` moving at ``beta`` at lab ``kx_lab``."""
    kc = comoving_kx_for_lab(q, kx_lab, beta)
    w = _comoving_omega(q, math.hypot(kc, q.ky))
    return boost_dispersion_point(w, kc, beta)[0]


def wave_energy_frame_factor(beta: float, v_ph_co: float, v_g_co: float) -> float:
    """E_s(lab) / E_s(co) for a mode whose fields are boosted pointwise.

    Follows from frame invariance of the pseudo-momentum (per unit area)
    together with the phase/group velocity identity; see the README.
    """
    g2 = 1.0 / (1.0 - beta * beta)
    return g2 * (1.0 + beta / v_ph_co) * (1.0 + beta * v_g_co)


# -- frame invariant and energy-sign diagnostics ------------------------------


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    lhs: float
    rhs: float
    residual: float
    tolerance: float


def frame_sign_checks(rec: LabModeRecord, rtol: float = 1e-6) -> list[CheckResult]:
    """Frame invariant (1/v_ph)(1 - v_ph v_g) E_s / V and the energy-sign rules.

    Energies here are per unit transverse area and the z extent is not
    contracted by a boost along x, so V is the same in both frames.
    """
    if rec.ky != 0.0:
        raise ValueError("frame checks assume ky = 0")
    lab = (1.0 / rec.v_ph) * (1.0 - rec.v_ph * rec.v_g) * rec.E_s
    co = (1.0 / rec.v_ph_co) * (1.0 - rec.v_ph_co * rec.v_g_co) * rec.E_s_co
    res = abs(lab - co) / max(abs(co), 1e-300)
    out = [CheckResult("frame invariant", res <= rtol, lab, co, res, rtol)]
    neg = rec.E_s < 0
    # for E_s < 0 both products must be positive/negative as stated; vacuous otherwise
    a = rec.v_ph * rec.beta
    b = rec.v_ph * rec.v_ph_co
    out.append(CheckResult("E_s<0 => v_ph v > 0", (not neg) or a > 0, a, 0.0, 0.0, 0.0))
    out.append(CheckResult("E_s<0 => v_ph v_ph_co < 0", (not neg) or b < 0, b, 0.0, 0.0, 0.0))
    out.append(CheckResult("E_s_co > 0", rec.E_s_co > 0, rec.E_s_co, 0.0, 0.0, 0.0))
    return out


# -- CSV ---------------------------------------------------------------------

DISPERSION_COLUMNS = ["kx_lab", "omega_lab", "E_s", "p_wv", "p_ps", "v_ph", "v_g"]


def dispersion_csv(records, skipped: int = 0) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(DISPERSION_COLUMNS)
    for r in records:
        row = [r.kx, r.omega, r.E_s, r.p_wv, r.p_ps, r.v_ph, r.v_g]
        if not all(math.isfinite(x) for x in row):
            skipped += 1
            continue
        w.writerow([repr(float(x)) for x in row])
    buf.write(f"# solved {len(records)} points, skipped {skipped} (no mode)\n")
    return buf.getvalue()
