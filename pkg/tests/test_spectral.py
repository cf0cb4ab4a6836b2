import time

import numpy as np
import pytest

from cherenkov.coupling import coupling_constants, hybridize, phase_match, with_gap
from cherenkov.errors import IncompleteBasis
from cherenkov.media import MovingSlab, RestFrameMaterial
from cherenkov.slabmodes import ModeQuery, lab_frequency
from cherenkov.spectral import (
    assemble_operators,
    build_krein_basis,
    commutator_kernel,
    complex_null_products,
    discrete_growth_rate,
    expand_field,
    hermiticity_residual,
    kernel_antisymmetry_residual,
    local_eigenvalues,
    pm_k_residual,
    solve_spectrum,
    tilde_map,
    vacuum_dispersion,
    verify_commutator_kernel,
    verify_completeness,
)

N2 = RestFrameMaterial(4.0)


def two_slab_ops(Nz=32, L=8.0, gap=1.0, kx=1.1127, ky=0.0):
    a = (L - 2 - gap) / 2
    s1 = MovingSlab(N2, 0.0, a, a + 1)
    s2 = MovingSlab(N2, 0.95, a + 1 + gap, a + 2 + gap)
    return assemble_operators([s1, s2], (kx, ky), Nz, L)


@pytest.fixture(scope="module")
def vacuum():
    op = assemble_operators([], (0.7, 0.3), 16, 4.0)
    spec = solve_spectrum(op)
    return op, spec, build_krein_basis(spec, op)


@pytest.fixture(scope="module")
def unstable():
    op = two_slab_ops()
    spec = solve_spectrum(op)
    return op, spec, build_krein_basis(spec, op)


# -- vacuum ------------------------------------------------------------------------


def test_vacuum_hermitian_and_definite(vacuum):
    op, spec, _ = vacuum
    assert hermiticity_residual(op) == 0.0
    assert op.positive_definite
    assert len(spec.upper_idx) == 0


def test_vacuum_matches_discrete_dispersion(vacuum):
    op, spec, _ = vacuum
    w = np.sort(np.delete(spec.omegas, spec.null_idx).real)
    assert np.allclose(w, vacuum_dispersion(16, 4.0, 0.7, 0.3), atol=1e-12)


def test_vacuum_quartet_symmetry(vacuum):
    _, spec, _ = vacuum
    assert spec.conjugate_residual <= 1e-8
    assert spec.reflection_residual <= 1e-8


def test_vacuum_completeness_and_commutator(vacuum):
    op, _, basis = vacuum
    assert basis.gram_residual <= 1e-10
    assert verify_completeness(basis, op) <= 1e-8
    assert verify_commutator_kernel(basis, op) <= 1e-8


def test_vacuum_expansion_reconstructs_random_field(vacuum):
    op, _, basis = vacuum
    rng = np.random.default_rng(0)
    F = rng.normal(size=op.size) + 1j * rng.normal(size=op.size)
    assert expand_field(F, basis, op).residual <= 1e-10


def test_deleting_a_vector_breaks_completeness(vacuum):
    op, _, basis = vacuum
    short = basis.without(0)
    assert verify_completeness(short, op) > 1e-3
    with pytest.raises(IncompleteBasis):
        expand_field(basis.real_vectors[:, 0], short, op)


def test_vacuum_runtime_at_32():
    t = time.perf_counter()
    op = assemble_operators([], (0.7, 0.3), 32, 4.0)
    spec = solve_spectrum(op)
    basis = build_krein_basis(spec, op)
    verify_completeness(basis, op)
    verify_commutator_kernel(basis, op)
    assert time.perf_counter() - t < 10.0


# -- tilde map and symmetries ---------------------------------------------------


def test_tilde_is_an_involution():
    rng = np.random.default_rng(1)
    F = rng.normal(size=(60, 3)) + 1j * rng.normal(size=(60, 3))
    assert np.array_equal(tilde_map(tilde_map(F)), F)


def test_tilde_sends_eigenvector_to_conjugate_frequency(unstable):
    op, spec, _ = unstable
    i = spec.upper_idx[0]
    F, w = spec.vectors[:, i], spec.omegas[i]
    Ft = tilde_map(F)
    r = op.Nsp @ Ft - np.conj(w) * (op.Msp @ Ft)
    assert np.linalg.norm(r) <= 1e-9 * np.linalg.norm(op.Nsp @ Ft)


def test_plus_minus_k_pairing_and_kernel_antisymmetry():
    op_k, op_mk = two_slab_ops(kx=1.1127), two_slab_ops(kx=-1.1127)
    sk, smk = solve_spectrum(op_k), solve_spectrum(op_mk)
    assert pm_k_residual(sk, smk) <= 1e-8
    K = commutator_kernel(build_krein_basis(sk, op_k), op_k)
    Km = commutator_kernel(build_krein_basis(smk, op_mk), op_mk)
    assert kernel_antisymmetry_residual(K, Km) <= 1e-8


def test_same_velocity_stack_has_real_spectrum():
    a, b = MovingSlab(N2, 0.9, 2.0, 3.0), MovingSlab(N2, 0.9, 4.0, 5.0)
    op = assemble_operators([a, b], (1.0, 0.0), 32, 8.0)
    spec = solve_spectrum(op)
    assert len(spec.upper_idx) == 0


# -- above threshold ------------------------------------------------------------------


def test_complex_pair_present(unstable):
    _, spec, _ = unstable
    assert len(spec.upper_idx) >= 1
    assert all(w.imag > 0 for w in spec.complex_pairs)
    assert spec.conjugate_residual <= 1e-8


def test_complex_eigenvectors_are_krein_null(unstable):
    op, spec, _ = unstable
    assert complex_null_products(spec, op) <= 1e-8


def test_above_threshold_basis_identities(unstable):
    op, _, basis = unstable
    assert basis.gram_residual <= 1e-8
    assert verify_completeness(basis, op) <= 1e-6
    assert verify_commutator_kernel(basis, op) <= 1e-6
    assert (basis.signatures < 0).any() and (basis.signatures > 0).any()


def test_pair_member_choice_does_not_matter(unstable):
    op, spec, _ = unstable
    lower = build_krein_basis(spec, op, choice="lower")
    assert verify_completeness(lower, op) <= 1e-6


def test_json_report_is_finite(unstable):
    import json

    _, spec, _ = unstable
    rows = json.loads(spec.to_json())
    assert {r["class"] for r in rows} == {"real", "complex_pair", "null"}


# -- convergence and growth rate ----------------------------------------------------


def test_second_order_convergence():
    slab = MovingSlab(N2, 0.0, 7.5, 8.5)
    exact = lab_frequency(ModeQuery(slab, 2.0), 2.0, 0.0)
    err = []
    for Nz in (256, 512):
        w = local_eigenvalues(assemble_operators([slab], (2.0, 0.0), Nz, 16.0), exact, 4)
        err.append(np.min(np.abs(w - exact)))
    assert np.log2(err[0] / err[1]) >= 1.9


@pytest.mark.slow
def test_growth_rate_matches_perturbation_theory():
    base = phase_match(MovingSlab(N2, 0, -1, 0), MovingSlab(N2, 0.95, 1, 2))
    g0 = base.gamma0
    gap, far = 5 / g0, 10 / g0
    lam = hybridize(coupling_constants(with_gap(base, gap))).split
    s1 = MovingSlab(N2, 0.0, far, far + 1)
    s2 = MovingSlab(N2, 0.95, far + 1 + gap, far + 2 + gap)
    o1 = lambda k: lab_frequency(ModeQuery(s1, 1.0), k, 0.0)
    o2 = lambda k: -lab_frequency(ModeQuery(s2, 1.0), -k, 0.95)
    r = discrete_growth_rate(s1, s2, base.kx, o1, o2, 1024, 2 + gap + 2 * far)
    assert abs(r.omega.imag / lam - 1) <= 0.2
