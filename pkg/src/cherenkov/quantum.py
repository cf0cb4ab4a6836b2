"""Quantized oscillators of a moving-media field (hbar = 1).

Real modes become ordinary oscillators whose frequency may be negative;
each complex pair omega' +- i lambda becomes two oscillators a, b at
+-omega' coupled by the pair-creation term i lambda (a^+ b^+ - a b).
Starting from the pseudo-ground |0,0> only the diagonal chain |n,n> is
populated, with c_n(t) = sech(lambda t) tanh(lambda t)^n.
"""

from __future__ import annotations

import cmath
import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .errors import TailOverflow, TruncationLeak

TAU_COMM = 1e-12
TAU_TAIL = 1e-10
ODE_TOL = 1e-10


# -- Hamiltonian specification ------------------------------------------------


@dataclass(frozen=True)
class HamiltonianSpec:
    real_oscillators: tuple[float, ...] = ()  # sign-carrying frequencies
    complex_pairs: tuple[tuple[float, float], ...] = ()  # (omega', lambda)

    def __post_init__(self):
        for w, lam in self.complex_pairs:
            if not lam > 0:
                raise ValueError(f"complex pair at omega' = {w:g} needs lambda > 0, got {lam:g}")

    @classmethod
    def from_basis(cls, basis) -> "HamiltonianSpec":
        """Oscillators of a Krein basis: real modes with sgn(omega) = signature, one entry per pair."""
        real = tuple(
            float(w) for w, s in zip(basis.real_omegas, basis.signatures) if w != 0 and np.sign(w) == s
        )
        pairs = tuple((float(w.real), float(w.imag)) for w in basis.omega_c if w.imag > 0)
        return cls(real, pairs)


# -- truncated Fock space --------------------------------------------------------


@dataclass(frozen=True)
class TruncatedFock:
    """Levels 0..n_max per oscillator; ``chain`` keeps only |n, n>."""

    n_max: int
    representation: str = "grid"  # "grid" (n_a, n_b) or "chain" |n, n>

    def __post_init__(self):
        if self.n_max < 2:
            raise ValueError("n_max must be at least 2")
        if self.representation not in ("grid", "chain"):
            raise ValueError(f"unknown representation {self.representation!r}")

    @property
    def levels(self) -> int:
        return self.n_max + 1

    @property
    def dim(self) -> int:
        return self.levels if self.representation == "chain" else self.levels**2

    def annihilation(self) -> np.ndarray:
        return np.diag(np.sqrt(np.arange(1, self.levels, dtype=float)), 1)

    def two_mode_ladders(self) -> tuple[np.ndarray, np.ndarray]:
        """a and b on the grid, index n_a * levels + n_b."""
        c, eye = self.annihilation(), np.eye(self.levels)
        return np.kron(c, eye), np.kron(eye, c)

    def interior(self, margin: int = 2) -> np.ndarray:
        """Grid indices with n_a, n_b <= n_max - margin."""
        n = np.arange(self.levels)
        keep = n <= self.n_max - margin
        return np.flatnonzero(np.logical_and.outer(keep, keep).ravel())


def build_pair_hamiltonian(omega_prime: float, lam: float, fock: TruncatedFock) -> np.ndarray:
    """omega'(n_a - n_b) on the diagonal plus i lambda (a^+ b^+ - a b)."""
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    if fock.representation == "chain":
        n = np.arange(fock.levels, dtype=float)
        up = 1j * lam * n[1:]  # <n+1,n+1|H|n,n> = i lambda (n+1)
        return np.diag(up, -1) + np.diag(up.conj(), 1)
    a, b = fock.two_mode_ladders()
    ad, bd = a.T, b.T
    N = np.arange(fock.levels, dtype=float)
    diag = omega_prime * np.subtract.outer(N, N).ravel()
    return np.diag(diag).astype(complex) + 1j * lam * (ad @ bd - a @ b)


# -- commutator checks -------------------------------------------------------------


@dataclass(frozen=True)
class CommutatorReport:
    residuals: dict[str, float]
    n_max: int
    omega_c: complex

    @property
    def max_residual(self) -> float:
        return max(self.residuals.values())


def pair_operators(fock: TruncatedFock, omega_c: complex, branch: int = 1):
    """beta = (1/2) sqrt(omega_c)(a + b^+), chi = (1/2) sqrt(omega_c^*)(a - b^+).

    The principal square root is used (``branch = -1`` flips both roots);
    sqrt(omega_c^*) is taken as the conjugate of sqrt(omega_c).
    """
    a, b = fock.two_mode_ladders()
    r = branch * cmath.sqrt(omega_c)
    beta = 0.5 * r * (a + b.T)
    chi = 0.5 * np.conj(r) * (a - b.T)
    return a, b, beta, chi


def verify_commutators(fock: TruncatedFock, omega_c: complex, branch: int = 1) -> CommutatorReport:
    """Interior residuals of the ladder, beta/chi and Hamiltonian identities."""
    if fock.representation != "grid" or fock.n_max < 4:
        raise ValueError("commutator checks need the two-mode grid with n_max >= 4")
    a, b, beta, chi = pair_operators(fock, omega_c, branch)
    H = lambda X: X.conj().T
    comm = lambda X, Y: X @ Y - Y @ X
    eye = np.eye(fock.dim)
    idx = fock.interior()
    block = lambda X: X[np.ix_(idx, idx)]
    scale = max(1.0, abs(omega_c))
    w, lam = omega_c.real, omega_c.imag
    lhs49 = H(chi) @ beta + H(beta) @ chi + beta @ H(chi) + chi @ H(beta)
    rhs49 = 0.5 * w * (a @ H(a) + H(a) @ a - b @ H(b) - H(b) @ b) + 1j * lam * (H(a) @ H(b) - a @ b)
    checks = {
        "[a,a+] = 1": (comm(a, H(a)), eye),
        "[b,b+] = 1": (comm(b, H(b)), eye),
        "[a,b] = 0": (comm(a, b), 0 * eye),
        "[a,b+] = 0": (comm(a, H(b)), 0 * eye),
        "[beta+,beta] = 0": (comm(H(beta), beta), 0 * eye),
        "[chi+,chi] = 0": (comm(H(chi), chi), 0 * eye),
        "[chi,beta] = 0": (comm(chi, beta), 0 * eye),
        "[chi+,beta] = -omega_c/2": (comm(H(chi), beta), -0.5 * omega_c * eye),
        "pair Hamiltonian": (lhs49, rhs49),
    }
    res = {k: float(np.abs(block(x) - block(y)).max() / scale) for k, (x, y) in checks.items()}
    worst = max(res, key=res.get)
    if res[worst] > TAU_COMM:
        raise TruncationLeak(f"{worst}: interior residual {res[worst]:.2e} exceeds {TAU_COMM:.0e}")
    return CommutatorReport(res, fock.n_max, complex(omega_c))


# -- evolution of the pseudo-ground ---------------------------------------------------


def analytic_coefficients(lam: float, t, n):
    """c_n(t) = sech(lambda t) tanh(lambda t)^n."""
    x = np.asarray(lam * np.asarray(t, dtype=float))
    n = np.asarray(n)
    return np.power(np.tanh(x), n) / np.cosh(x)


@dataclass(frozen=True)
class FockEvolution:
    t: np.ndarray
    c: np.ndarray = field(repr=False)  # shape (len(t), n_max + 1)
    lam: float
    n_max: int
    max_tail: float

    @property
    def norm(self) -> np.ndarray:
        return np.sum(np.abs(self.c) ** 2, axis=1)

    @property
    def n_a_mean(self) -> np.ndarray:
        return np.abs(self.c) ** 2 @ np.arange(self.n_max + 1)


def chain_rhs(lam: float, n_max: int):
    """dc_n/dt = lambda [n c_{n-1} - (n+1) c_{n+1}] with c_{n_max+1} = 0."""
    n = np.arange(n_max + 1, dtype=float)

    def rhs(_t, c):
        out = np.empty_like(c)
        out[0] = 0.0
        out[1:] = n[1:] * c[:-1]
        out[:-1] -= (n[:-1] + 1) * c[1:]
        return lam * out

    return rhs


def evolve_pair_vacuum(
    lam: float,
    t_max: float,
    fock: TruncatedFock,
    t_eval=None,
    *,
    guard: bool = True,
    tol: float = ODE_TOL,
) -> FockEvolution:
    """Integrate the chain from c_n(0) = delta_n0 with an adaptive 8th-order pair.

    With ``guard`` the window must satisfy lambda t_max <= ln(n_max)/2 and
    any |c_{n_max}| above the tail threshold raises TailOverflow.  Without
    it the tail is only recorded in ``max_tail``.  ``tol`` is used as both
    rtol and atol; components far below it are resolved only loosely.
    """
    n_max = fock.n_max
    if guard and lam * t_max > 0.5 * math.log(n_max):
        raise TailOverflow(
            f"lambda t_max = {lam * t_max:g} exceeds ln(n_max)/2 = {0.5 * math.log(n_max):g}; raise n_max"
        )
    t_eval = np.linspace(0.0, t_max, 101) if t_eval is None else np.asarray(t_eval, dtype=float)
    c0 = np.zeros(n_max + 1)
    c0[0] = 1.0
    sol = solve_ivp(
        chain_rhs(lam, n_max), (0.0, t_max), c0, method="DOP853",
        t_eval=t_eval, rtol=tol, atol=tol,
    )
    if not sol.success:
        raise ArithmeticError(sol.message)
    c = sol.y.T
    tail = float(np.abs(c[:, -1]).max())
    if guard and tail > TAU_TAIL:
        raise TailOverflow(f"|c_n_max| reached {tail:.2e}; raise n_max")
    return FockEvolution(sol.t, c.astype(complex), lam, n_max, tail)


# -- observables ------------------------------------------------------------------------


@dataclass(frozen=True)
class Observables:
    t: np.ndarray
    norm: np.ndarray
    n_a_mean: np.ndarray
    E1_mean: np.ndarray
    E2_mean: np.ndarray
    H_mean: np.ndarray
    A_mean: np.ndarray


def observables(ev: FockEvolution, omega_prime: float) -> Observables:
    """Chain expectations: <n_a> = <n_b>, E_1 = omega'(n_a + 1/2), E_2 = -omega'(n_b + 1/2)."""
    na = ev.n_a_mean
    Hc = build_pair_hamiltonian(omega_prime, ev.lam, TruncatedFock(ev.n_max, "chain"))
    Hm = np.einsum("ti,ij,tj->t", ev.c.conj(), Hc, ev.c).real
    wc = abs(complex(omega_prime, ev.lam))
    return Observables(
        t=ev.t,
        norm=ev.norm,
        n_a_mean=na,
        E1_mean=omega_prime * (na + 0.5),
        E2_mean=-omega_prime * (na + 0.5),
        H_mean=Hm,
        A_mean=0.5 * wc * (2 * na + 1),
    )


def pseudo_ground_strength(fock: TruncatedFock, omega_c: complex) -> np.ndarray:
    """Diagonal of A_C = beta beta^+ + chi chi^+ in the Fock basis (grid order)."""
    _, _, beta, chi = pair_operators(fock, omega_c)
    A = beta @ beta.conj().T + chi @ chi.conj().T
    return np.diag(A).real


def evolution_csv(ev: FockEvolution, omega_prime: float, K: int = 9) -> str:
    obs = observables(ev, omega_prime)
    K = min(K, ev.n_max)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", "norm", "n_a_mean", "E1_mean", "E2_mean"] + [f"c{k}" for k in range(K + 1)])
    for i, t in enumerate(ev.t):
        row = [t, obs.norm[i], obs.n_a_mean[i], obs.E1_mean[i], obs.E2_mean[i]] + list(ev.c[i, : K + 1].real)
        if not all(math.isfinite(x) for x in row):
            raise ArithmeticError("non-finite value in evolution")
        w.writerow([repr(float(x)) for x in row])
    return buf.getvalue()


# -- oscillators with negative frequency ------------------------------------------------


def ladder_energy_direction(omega: float, m: int) -> tuple[float, str]:
    """Energy omega (m + 1/2) and the effect of the creation operator on it."""
    if m < 0:
        raise ValueError("occupation number must be nonnegative")
    return omega * (m + 0.5), "increases energy" if omega > 0 else "decreases energy"


@dataclass(frozen=True)
class NoEigenstateReport:
    n_max: tuple[int, ...]
    eigenvalue_shift: tuple[float, ...]  # relative change of the largest |E| between truncations
    min_boundary_mass: tuple[float, ...]  # smallest |c_N|^2 + |c_{N-1}|^2 over eigenvectors

    @property
    def converged(self) -> bool:
        return all(s <= 0.1 for s in self.eigenvalue_shift) or all(m < 1e-3 for m in self.min_boundary_mass)


def hc_no_eigenstate_diagnostic(lam: float, omega_prime: float, n_maxes=(16, 32, 64, 128)) -> NoEigenstateReport:
    """Truncated chain spectra fail to settle: the pair Hamiltonian has no eigenstates.

    On the chain the diagonal omega'(n - n) vanishes, so omega' drops out.
    """
    del omega_prime
    tops, masses = [], []
    for n in n_maxes:
        w, V = np.linalg.eigh(build_pair_hamiltonian(0.0, lam, TruncatedFock(n, "chain")))
        tops.append(np.abs(w).max())
        masses.append(float((np.abs(V[-1]) ** 2 + np.abs(V[-2]) ** 2).min()))
    shifts = tuple(abs(b - a) / a for a, b in zip(tops, tops[1:]))
    return NoEigenstateReport(tuple(n_maxes), shifts, tuple(masses))
