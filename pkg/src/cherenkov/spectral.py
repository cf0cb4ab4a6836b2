"""Spectrum of the discretized Maxwell operator at fixed transverse k.

The stationary problem N F = omega M F is discretized on a periodic,
uniform grid of N_z collocated points (all six components per point),
with d/dz replaced by the central difference.  N is Hermitian; M is real,
symmetric, block diagonal and indefinite above the Cherenkov threshold,
so omega may be complex.

Krein product on the grid: <a|b> = (dz/2) a^H M b.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import DegenerateGram, IncompleteBasis, NonDiagonalizable, PhaseMatchError
from .linalg import symmetric_sqrt_factor
from .media import build_material_matrix

TAU_IM = 1e-8
KAPPA_MAX = 1e10
TAU_GRAM = 1e-8
TAU_CLUSTER = 1e-8
# tilde map: diag(R, -R) with R the pi rotation about z, applied to conj(F)
TILDE_SIGNS = np.array([-1.0, -1.0, 1.0, 1.0, 1.0, -1.0])


@dataclass(frozen=True)
class DiscretizedOperator:
    Nsp: sp.csr_matrix = field(repr=False)
    Msp: sp.csr_matrix = field(repr=False)
    Nz: int
    dz: float
    Lz: float
    kx: float
    ky: float
    positive_definite: bool

    @property
    def size(self) -> int:
        return 6 * self.Nz

    @property
    def z(self) -> np.ndarray:
        return (np.arange(self.Nz) + 0.5) * self.dz

    @cached_property
    def Nmat(self) -> np.ndarray:
        return self.Nsp.toarray()

    @cached_property
    def Mmat(self) -> np.ndarray:
        return self.Msp.toarray()

    @cached_property
    def Minv(self) -> sp.csr_matrix:
        M = self.Msp
        out = [np.linalg.inv(M[6 * j : 6 * j + 6, 6 * j : 6 * j + 6].toarray()) for j in range(self.Nz)]
        return sp.block_diag(out, format="csr")

    def krein(self, a: np.ndarray, b: np.ndarray) -> np.ndarray | complex:
        """<a|b> for vectors or column stacks (returns the Gram block)."""
        return 0.5 * self.dz * (a.conj().T @ (self.Msp @ b))

    def canonical(self, a: np.ndarray, b: np.ndarray):
        return 0.5 * self.dz * (a.conj().T @ b)


def central_difference(Nz: int, dz: float) -> sp.csr_matrix:
    i = np.arange(Nz)
    rows = np.concatenate([i, i])
    cols = np.concatenate([(i + 1) % Nz, (i - 1) % Nz])
    vals = np.concatenate([np.full(Nz, 0.5 / dz), np.full(Nz, -0.5 / dz)])
    return sp.csr_matrix((vals, (rows, cols)), shape=(Nz, Nz))


def assemble_operators(stack, k: tuple[float, float], Nz: int = 64, Lz: float | None = None) -> DiscretizedOperator:
    """N and M on z_j = (j + 1/2) dz, j = 0..Nz-1, periodic in z.

    Slabs must lie inside [0, Lz).  Field ordering is point-major: index
    6 j + c with c over (Ex, Ey, Ez, Hx, Hy, Hz).
    """
    if Nz < 8:
        raise ValueError("Nz must be >= 8")
    if Lz is None:
        Lz = max([s.z1 for s in stack], default=1.0)
    for s in stack:
        if s.z0 < 0 or s.z1 > Lz:
            raise ValueError(f"slab [{s.z0}, {s.z1}] outside the domain [0, {Lz})")
    kx, ky = k
    dz = Lz / Nz
    D = central_difference(Nz, dz)
    I = sp.identity(Nz, format="csr")
    # curl blocks [[0, -D, i ky], [D, 0, -i kx], [-i ky, i kx, 0]] over (Ax, Ay, Az)
    curl = [[None, -D, 1j * ky * I], [D, None, -1j * kx * I], [-1j * ky * I, 1j * kx * I, None]]
    C = sp.bmat(curl, format="csr")  # component-major: index c * Nz + j
    N_cm = sp.bmat([[None, 1j * C], [-1j * C, None]], format="csr")
    # reorder component-major (c, j) to point-major (j, c)
    perm = (np.arange(6)[None, :] * Nz + np.arange(Nz)[:, None]).ravel()
    N = N_cm[perm][:, perm].tocsr()

    z = (np.arange(Nz) + 0.5) * dz
    cache = {}
    blocks = []
    for zj in z:
        mj = None
        for s in stack:
            if s.z0 <= zj < s.z1:
                if id(s) not in cache:
                    cache[id(s)] = build_material_matrix(s.material, s.beta).m
                mj = cache[id(s)]
                break
        blocks.append(np.eye(6) if mj is None else mj)
    M = sp.block_diag(blocks, format="csr")
    pd = all(np.linalg.eigvalsh(m)[0] > 0 for m in cache.values())
    return DiscretizedOperator(N, M, Nz, dz, Lz, kx, ky, pd)


def local_eigenvalues(op: DiscretizedOperator, sigma: complex, k: int = 8) -> np.ndarray:
    """Eigenvalues of M^{-1} N nearest ``sigma`` (sparse shift-invert)."""
    A = (op.Minv @ op.Nsp).tocsc()
    return spla.eigs(A, k=k, sigma=sigma, return_eigenvectors=False)


def hermiticity_residual(op: DiscretizedOperator) -> float:
    N = op.Nsp
    return float(abs(N - N.conj().T).max() / abs(N).max())


def tilde_map(F: np.ndarray, k=None) -> np.ndarray:
    """Antilinear pi rotation about z: diag(R, -R) conj(F).

    The rotation maps (x, y) -> (-x, -y) and keeps z, so on the z grid it
    acts pointwise; with the conjugation the transverse phase e^{ik.r} is
    preserved and an eigenvector at omega goes to one at conj(omega).
    """
    F = np.asarray(F)
    shape = F.shape
    v = F.reshape(-1, 6, *shape[1:]) if F.ndim > 1 else F.reshape(-1, 6)
    s = TILDE_SIGNS.reshape((1, 6) + (1,) * (F.ndim - 1))
    return (s * v.conj()).reshape(shape)


# -- spectrum ------------------------------------------------------------------


@dataclass(frozen=True)
class SpectrumClassification:
    omegas: np.ndarray  # all eigenvalues (null ones included) in solver order
    classes: list[str]  # "real", "complex_pair", "null" per eigenvalue
    real_idx: np.ndarray
    upper_idx: np.ndarray  # Im > 0 members of complex pairs
    lower_idx: np.ndarray  # Im < 0 members
    null_idx: np.ndarray
    vectors: np.ndarray = field(repr=False)  # eigenvectors as columns
    null_vectors: np.ndarray = field(repr=False)
    scale: float
    conjugate_residual: float  # omega present => conj(omega) present
    reflection_residual: float  # omega present => -conj(omega) present

    @property
    def complex_pairs(self) -> list[complex]:
        return [complex(w) for w in self.omegas[self.upper_idx]]

    @property
    def real_omegas(self) -> np.ndarray:
        return self.omegas[self.real_idx].real

    def to_json(self, signatures: dict[int, int] | None = None) -> str:
        rows = []
        for i, (w, c) in enumerate(zip(self.omegas, self.classes)):
            row = {"re": float(w.real), "im": float(w.imag), "class": c}
            if signatures and i in signatures:
                row["signature"] = int(signatures[i])
            rows.append(row)
        return json.dumps(rows, allow_nan=False, indent=1)


def _closure_residual(omegas: np.ndarray, targets: np.ndarray, scale: float) -> float:
    if len(omegas) == 0:
        return 0.0
    d = np.abs(omegas[:, None] - targets[None, :]).min(axis=1)
    return float(d.max() / scale)


def solve_spectrum(op: DiscretizedOperator, tau_im: float = TAU_IM) -> SpectrumClassification:
    """Eigen-decomposition of M^{-1} N with real / complex-pair / null classification.

    The null space of N (longitudinal fields) is taken from an SVD so that
    it is exact and well conditioned; the remaining eigenpairs come from a
    Hermitian-definite solve when M > 0 and a general solve otherwise.
    """
    N, M = op.Nmat, op.Mmat
    null = sla.null_space(N, rcond=1e-10)
    if op.positive_definite:
        w, V = sla.eigh(N, M)
        w = w.astype(complex)
    else:
        w, V = sla.eig((op.Minv @ op.Nsp).toarray())
    scale = float(np.abs(w).max())
    is_null = np.abs(w) <= tau_im * scale
    # drop exactly as many near-zero eigenvalues as the null space has vectors
    order = np.argsort(np.abs(w))
    n0 = null.shape[1]
    null_set = set(order[:n0].tolist())
    if is_null.sum() < n0:
        raise NonDiagonalizable(
            f"null space of N has dimension {n0} but only {int(is_null.sum())} eigenvalues vanish"
        )
    classes = []
    real_idx, upper, lower, null_idx = [], [], [], []
    for i, wi in enumerate(w):
        if i in null_set:
            classes.append("null")
            null_idx.append(i)
        elif abs(wi.imag) <= tau_im * scale:
            classes.append("real")
            real_idx.append(i)
        else:
            classes.append("complex_pair")
            (upper if wi.imag > 0 else lower).append(i)
    w = w.copy()
    w[real_idx] = w[real_idx].real
    w[null_idx] = 0.0
    nz = np.array(real_idx + upper + lower, dtype=int)
    conj_res = _closure_residual(w[nz], np.conj(w[nz]), scale)
    refl_res = _closure_residual(w[nz], -np.conj(w[nz]), scale)
    return SpectrumClassification(
        omegas=w,
        classes=classes,
        real_idx=np.array(real_idx, dtype=int),
        upper_idx=np.array(upper, dtype=int),
        lower_idx=np.array(lower, dtype=int),
        null_idx=np.array(null_idx, dtype=int),
        vectors=V,
        null_vectors=null,
        scale=scale,
        conjugate_residual=conj_res,
        reflection_residual=refl_res,
    )


def pm_k_residual(spec_k: SpectrumClassification, spec_mk: SpectrumClassification) -> float:
    """Pairing omega(k) <-> -conj(omega(-k)) between two spectral runs."""
    wk = np.delete(spec_k.omegas, spec_k.null_idx)
    wmk = np.delete(spec_mk.omegas, spec_mk.null_idx)
    return _closure_residual(wk, -np.conj(wmk), max(spec_k.scale, spec_mk.scale))


# -- Krein basis ------------------------------------------------------------------


def _clusters(values: np.ndarray, idx: np.ndarray, tol: float) -> list[np.ndarray]:
    if len(idx) == 0:
        return []
    order = idx[np.argsort(values[idx].real + 1e-3 * values[idx].imag)]
    groups, cur = [], [order[0]]
    for i in order[1:]:
        if abs(values[i] - values[cur[-1]]) <= tol:
            cur.append(i)
        else:
            groups.append(np.array(cur))
            cur = [i]
    groups.append(np.array(cur))
    return groups


def _signature_orthonormalize(op: DiscretizedOperator, V: np.ndarray, what: str):
    """Indefinite Gram-Schmidt: V' with <V'_m|V'_n> = +-delta_mn."""
    V = V / np.linalg.norm(V, axis=0)
    G = op.krein(V, V)
    G = 0.5 * (G + G.conj().T)
    lam, U = np.linalg.eigh(G)
    if np.min(np.abs(lam)) <= 1e-12 * max(1.0, np.abs(lam).max()):
        raise DegenerateGram(f"{what}: Gram matrix is singular (min |eig| = {np.min(np.abs(lam)):.2e})")
    Vn = (V @ U) / np.sqrt(np.abs(lam))
    return Vn, np.sign(lam).astype(int)


@dataclass(frozen=True)
class KreinBasis:
    real_vectors: np.ndarray = field(repr=False)  # columns F_n
    real_omegas: np.ndarray
    signatures: np.ndarray  # +-1
    f_vectors: np.ndarray = field(repr=False)
    e_vectors: np.ndarray = field(repr=False)
    omega_c: np.ndarray  # frequency of each f (conj for e)
    null_vectors: np.ndarray = field(repr=False)
    null_signatures: np.ndarray
    gram_residual: float
    condition: float

    @property
    def n_vectors(self) -> int:
        return self.real_vectors.shape[1] + 2 * self.f_vectors.shape[1] + self.null_vectors.shape[1]

    def all_vectors(self) -> np.ndarray:
        return np.hstack([self.real_vectors, self.f_vectors, self.e_vectors, self.null_vectors])

    def without(self, column: int) -> "KreinBasis":
        """Copy with one real mode removed (for incompleteness checks)."""
        keep = np.arange(self.real_vectors.shape[1]) != column
        return KreinBasis(
            self.real_vectors[:, keep], self.real_omegas[keep], self.signatures[keep],
            self.f_vectors, self.e_vectors, self.omega_c, self.null_vectors,
            self.null_signatures, self.gram_residual, self.condition,
        )


def canonical_gram(basis: KreinBasis) -> np.ndarray:
    """Target Gram of the ordering (real, f, e, null)."""
    nr, nc, n0 = basis.real_vectors.shape[1], basis.f_vectors.shape[1], basis.null_vectors.shape[1]
    n = nr + 2 * nc + n0
    T = np.zeros((n, n), dtype=complex)
    T[:nr, :nr] = np.diag(basis.signatures)
    T[nr + nc : nr + 2 * nc, nr : nr + nc] = np.eye(nc)  # <e|f> = 1
    T[nr : nr + nc, nr + nc : nr + 2 * nc] = np.eye(nc)  # <f|e> = 1
    T[nr + 2 * nc :, nr + 2 * nc :] = np.diag(basis.null_signatures)
    return T


def build_krein_basis(
    spec: SpectrumClassification, op: DiscretizedOperator, choice: str = "upper", tol: float = TAU_CLUSTER
) -> KreinBasis:
    """Krein-orthonormal basis: real modes +-1, complex pairs <e|f> = 1, nulls +-1.

    ``choice`` picks which member of each conjugate pair plays f (the
    growing one for "upper"); the other is generated with the tilde map.
    """
    w, V = spec.omegas, spec.vectors
    ctol = tol * spec.scale
    real_cols, real_w, sigs = [], [], []
    for grp in _clusters(w, spec.real_idx, ctol):
        Fn, s = _signature_orthonormalize(op, V[:, grp], f"real cluster at {w[grp[0]].real:.6g}")
        real_cols.append(Fn)
        real_w.extend([w[grp[0]].real] * len(grp))
        sigs.extend(s.tolist())
    f_cols, e_cols, wc = [], [], []
    members = spec.upper_idx if choice == "upper" else spec.lower_idx
    for grp in _clusters(w, members, ctol):
        f = V[:, grp]
        f = f / np.linalg.norm(f, axis=0)
        e = tilde_map(f)
        A = op.krein(f, e)  # A_mn = <f_m|e_n>, symmetric
        A = 0.5 * (A + A.T)
        sv = np.linalg.svd(A, compute_uv=False)
        if sv.min() <= 1e-10 * max(1.0, sv.max()):
            raise DegenerateGram(f"pair Gram singular at omega = {complex(w[grp[0]]):.6g}")
        S = symmetric_sqrt_factor(A)
        T = np.linalg.inv(S.conj())
        fn = f @ T
        f_cols.append(fn)
        e_cols.append(tilde_map(fn))
        wc.extend([complex(w[grp[0]])] * len(grp))
    Ln, nsig = _signature_orthonormalize(op, spec.null_vectors, "null space") if spec.null_vectors.shape[1] else (
        np.zeros((op.size, 0)),
        np.zeros(0, dtype=int),
    )
    n = op.size
    stack = lambda cols: np.hstack(cols) if cols else np.zeros((n, 0), dtype=complex)
    basis = KreinBasis(
        real_vectors=stack(real_cols),
        real_omegas=np.array(real_w),
        signatures=np.array(sigs, dtype=int),
        f_vectors=stack(f_cols),
        e_vectors=stack(e_cols),
        omega_c=np.array(wc, dtype=complex),
        null_vectors=Ln,
        null_signatures=nsig,
        gram_residual=0.0,
        condition=0.0,
    )
    B = basis.all_vectors()
    cond = float(np.linalg.cond(B / np.linalg.norm(B, axis=0)))
    if cond > KAPPA_MAX:
        raise NonDiagonalizable(f"eigenvector condition number {cond:.2e} exceeds {KAPPA_MAX:.0e}")
    gram = op.krein(B, B)
    res = float(np.abs(gram - canonical_gram(basis)).max())
    return KreinBasis(**{**basis.__dict__, "gram_residual": res, "condition": cond})


# -- expansion and identities -----------------------------------------------------


@dataclass(frozen=True)
class Expansion:
    alpha: np.ndarray  # real modes
    beta: np.ndarray  # coefficients of f
    chi: np.ndarray  # coefficients of e
    null: np.ndarray
    residual: float


def expand_field(F: np.ndarray, basis: KreinBasis, op: DiscretizedOperator, tau: float = TAU_GRAM) -> Expansion:
    """Coefficients from Krein projections; raises if F is not reproduced."""
    alpha = op.krein(basis.real_vectors, F) * basis.signatures
    beta = op.krein(basis.e_vectors, F)
    chi = op.krein(basis.f_vectors, F)
    null = op.krein(basis.null_vectors, F) * basis.null_signatures
    rec = basis.real_vectors @ alpha + basis.f_vectors @ beta + basis.e_vectors @ chi + basis.null_vectors @ null
    res = float(np.linalg.norm(rec - F) / max(np.linalg.norm(F), 1e-300))
    if res > tau:
        raise IncompleteBasis(f"reconstruction residual {res:.2e} exceeds {tau:.0e}")
    return Expansion(alpha, beta, chi, null, res)


def completeness_sum(basis: KreinBasis, op: DiscretizedOperator) -> np.ndarray:
    """sum F G^H/(2 eta) + sum (f g_e^H + e g_f^H)/2 + nulls, with G = M F."""
    M = op.Msp
    R, f, e, L = basis.real_vectors, basis.f_vectors, basis.e_vectors, basis.null_vectors
    out = (R / (2 * basis.signatures)) @ (M @ R).conj().T
    out += 0.5 * (f @ (M @ e).conj().T + e @ (M @ f).conj().T)
    out += (L / (2 * basis.null_signatures)) @ (M @ L).conj().T
    return out


def verify_completeness(basis: KreinBasis, op: DiscretizedOperator) -> float:
    target = np.eye(op.size) / op.dz
    return float(np.linalg.norm(completeness_sum(basis, op) - target) / np.linalg.norm(target))


def commutator_kernel(basis: KreinBasis, op: DiscretizedOperator) -> np.ndarray:
    """sum w G G^H/(2 eta) + sum (w_c g g~^H + w_c^* g~ g^H)/2; nulls carry w = 0."""
    M = op.Msp
    G = M @ basis.real_vectors
    g, gt = M @ basis.f_vectors, M @ basis.e_vectors
    out = (G * (basis.real_omegas / (2 * basis.signatures))) @ G.conj().T
    out += 0.5 * ((g * basis.omega_c) @ gt.conj().T + (gt * np.conj(basis.omega_c)) @ g.conj().T)
    return out


def verify_commutator_kernel(basis: KreinBasis, op: DiscretizedOperator) -> float:
    target = op.Nmat / op.dz
    return float(np.linalg.norm(commutator_kernel(basis, op) - target) / np.linalg.norm(target))


def kernel_antisymmetry_residual(K_k: np.ndarray, K_mk: np.ndarray) -> float:
    """|| K(k) + K(-k)^T || / ||K(k)||: the equal-time kernel is antisymmetric."""
    return float(np.linalg.norm(K_k + K_mk.T) / np.linalg.norm(K_k))


def complex_null_products(spec: SpectrumClassification, op: DiscretizedOperator) -> float:
    """max |<F|F>| / ||F||_c^2 over eigenvectors with complex frequency."""
    idx = np.concatenate([spec.upper_idx, spec.lower_idx])
    if len(idx) == 0:
        return 0.0
    V = spec.vectors[:, idx]
    num = np.abs(np.einsum("ij,ij->j", V.conj(), op.Msp @ V)) * 0.5 * op.dz
    den = np.einsum("ij,ij->j", V.conj(), V).real * 0.5 * op.dz
    return float((num / den).max())


def vacuum_dispersion(Nz: int, Lz: float, kx: float, ky: float) -> np.ndarray:
    """Nonzero eigenvalues of the vacuum grid operator (each with multiplicity 2)."""
    dz = Lz / Nz
    m = np.arange(Nz)
    s = np.sin(2 * np.pi * m / Nz) / dz
    w = np.sqrt(kx * kx + ky * ky + s * s)
    return np.sort(np.concatenate([w, w, -w, -w]))


# -- growth rate at the discrete phase-matching point ------------------------------


@dataclass(frozen=True)
class DiscreteGrowth:
    kx: float
    omega: complex
    omega1: float  # uncoupled discrete frequencies at kx
    omega2: float


def discrete_growth_rate(
    slab1,
    slab2,
    kx_guess: float,
    omega1_of_k,
    omega2_of_k,
    Nz: int,
    Lz: float,
    window: float = 0.1,
    n_scan: int = 9,
) -> DiscreteGrowth:
    """Growth rate of the coupled grid operator where its uncoupled modes cross.

    The grid shifts each slab's dispersion by O(dz^2), which is comparable
    to the coupling itself, so the continuum crossing is detuned on the
    grid.  Central differences also double every mode (two staggered
    sublattices), so each slab contributes two nearby branches: the two
    eigenvalues nearest the continuum value ``omegaX_of_k(kx)``.  Every
    branch-pair crossing inside ``kx_guess * (1 +- window)`` is located and
    the coupled operator solved there; the fastest-growing result wins.
    """
    from scipy.optimize import brentq

    def pair(slab, kx, ref):
        op = assemble_operators([slab], (kx, 0.0), Nz, Lz)
        w = local_eigenvalues(op, ref, 6)
        return np.sort(w[np.argsort(np.abs(w - ref))[:2]].real)

    def branches(kx):
        return pair(slab1, kx, omega1_of_k(kx)), pair(slab2, kx, omega2_of_k(kx))

    grid = kx_guess * np.linspace(1 - window, 1 + window, n_scan)
    samples = [branches(k) for k in grid]
    best = None
    for i in range(2):
        for j in range(2):
            d = np.array([a[i] - b[j] for a, b in samples])
            for n in np.flatnonzero(np.sign(d[:-1]) * np.sign(d[1:]) < 0):
                def mismatch(kx, i=i, j=j):
                    a, b = branches(kx)
                    return a[i] - b[j]

                kx = brentq(mismatch, grid[n], grid[n + 1], xtol=1e-12 * kx_guess)
                a, b = branches(kx)
                op = assemble_operators([slab1, slab2], (kx, 0.0), Nz, Lz)
                w = local_eigenvalues(op, 0.5 * (a[i] + b[j]), 8)
                cand = DiscreteGrowth(
                    kx, complex(w[np.argmax(w.imag)]), float(a[i]), float(b[j])
                )
                if best is None or cand.omega.imag > best.omega.imag:
                    best = cand
    if best is None:
        raise PhaseMatchError("no discrete crossing inside the kx window")
    return best
