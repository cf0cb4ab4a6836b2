import math

import numpy as np
import pytest

from cherenkov import fields as fl
from cherenkov.coupling import (
    ClassicalTrajectory,
    CouplingConstants,
    classical_trajectory,
    coupling_constants,
    energy_bracket,
    hybrid_mode_fields,
    hybridize,
    instability_criterion,
    phase_match,
    weak_tolerance,
    with_gap,
)
from cherenkov.errors import DegenerateCoupling, NotPerturbative, NotPerturbativeWarning, PhaseMatchError
from cherenkov.media import MovingSlab, RestFrameMaterial

N2 = RestFrameMaterial(4.0)


def pair_at(beta2, n=2.0, gd=5.0):
    mat = RestFrameMaterial(n * n)
    p = phase_match(MovingSlab(mat, 0.0, -1.0, 0.0), MovingSlab(mat, beta2, 1.0, 2.0), conjugate2=True)
    return with_gap(p, gd / p.gamma0)


@pytest.fixture(scope="module")
def base():
    return phase_match(MovingSlab(N2, 0.0, -1.0, 0.0), MovingSlab(N2, 0.95, 1.0, 2.0), conjugate2=True)


@pytest.fixture(scope="module")
def unstable(base):
    pair = with_gap(base, 5.0 / base.gamma0)
    cc = coupling_constants(pair)
    return pair, cc, hybrid_mode_fields(pair, cc, hybridize(cc))


def test_phase_match_reference_point(base):
    assert base.kx == pytest.approx(1.1127162096632877, rel=1e-9)
    assert base.omega_prime == pytest.approx(0.8055480890070034, rel=1e-9)
    assert base.rec1.E_s > 0 > base.rec2.E_s


def test_no_conjugate_crossing_below_refined_threshold():
    with pytest.raises(PhaseMatchError):
        phase_match(MovingSlab(N2, 0.0, -1.0, 0.0), MovingSlab(N2, 0.79, 1.0, 2.0), conjugate2=True)


# -- coupling constants ---------------------------------------------------------------


def test_coupling_decays_with_gap(base):
    g0 = base.gamma0
    d = np.linspace(5, 10, 6) / g0
    mags = [abs(coupling_constants(with_gap(base, x)).omega1) for x in d]
    slope = np.polyfit(d, np.log(mags), 1)[0]
    assert -slope == pytest.approx(g0, rel=0.02)


@pytest.mark.parametrize("gd", [3.0, 4.0, 5.0, 6.5, 8.0, 10.0])
def test_ratio_identity(base, gd):
    cc = coupling_constants(with_gap(base, gd / base.gamma0))
    assert cc.ratio_residual <= 1e-6
    assert abs(cc.product.imag) <= 1e-8 * abs(cc.product)


def test_identical_slabs_at_rest_split_really():
    a, b = MovingSlab(N2, 0.0, -1.0, 0.0), MovingSlab(N2, 0.0, 3.0, 4.0)
    cc = coupling_constants(phase_match(a, b, kx=2.0, conjugate2=False))
    assert cc.omega1 == pytest.approx(np.conj(cc.omega2), rel=1e-10)
    hm = hybridize(cc)
    assert not hm.unstable and hm.classification == "real_split"
    w1, w2 = hm.frequencies
    assert w1.imag == w2.imag == 0.0
    assert w1.real - w2.real == pytest.approx(2 * math.sqrt(abs(cc.product)))


def test_not_perturbative_is_a_warning(base):
    close = with_gap(base, 0.5)
    with pytest.warns(NotPerturbativeWarning):
        coupling_constants(close)
    with pytest.raises(NotPerturbative):
        coupling_constants(close, strict=True)


# -- hybridization ----------------------------------------------------------------------


def test_hybridize_square_root_branch():
    cc = CouplingConstants(2j, 2j, 1.0, -1.0, 1.0, 1.0, 5.0)  # product -4
    hm = hybridize(cc)
    assert hm.unstable and hm.omega_c == pytest.approx(1 + 2j)
    assert hm.frequencies[1] == pytest.approx(1 - 2j)


def test_degenerate_coupling():
    with pytest.raises(DegenerateCoupling):
        hybridize(CouplingConstants(1e-7, 1e-7, 1.0, 1.0, 1.0, 1.0, 5.0))


@pytest.mark.slow
def test_classification_sweep_and_threshold_flip():
    """Complex pair iff opposite energies; instability first appears at 2n/(n^2+1)."""
    n_points, first = 0, None
    # identical co-moving slabs: equal energy signs, real splitting
    for beta in (0.0, 0.3, 0.6, 0.9):
        for kx in (0.5, 1.0, 2.0, 4.0, 8.0):
            a, b = MovingSlab(N2, beta, -1.0, 0.0), MovingSlab(N2, beta, 1.0, 2.0)
            p = phase_match(a, b, kx=kx, conjugate2=False)
            p = with_gap(p, 5 / p.gamma0)
            cc = coupling_constants(p)
            assert hybridize(cc).unstable == (cc.E_s1 * cc.E_s2 < 0) == False  # noqa: E712
            n_points += 1
    # slab 1 at rest, slab 2 swept through the refined threshold
    last_stable = None
    for beta in np.round(np.arange(0.70, 0.95 + 1e-9, 0.005), 6):
        try:
            p = pair_at(beta)
        except PhaseMatchError:
            assert not instability_criterion(beta, 2.0)
            last_stable = beta
            continue
        cc = coupling_constants(p)
        hm = hybridize(cc)
        assert hm.unstable == (cc.E_s1 * cc.E_s2 < 0)
        assert hm.unstable == instability_criterion(beta, 2.0)
        first = beta if first is None else first
        n_points += 1
    assert n_points >= 50
    # the flip is bracketed by adjacent grid points
    assert last_stable <= 0.8 < first
    assert first - last_stable == pytest.approx(0.005)


@pytest.mark.parametrize("beta,n,expected", [(0.81, 2.0, True), (0.79, 2.0, False), (0.6, 1.0, False)])
def test_instability_criterion(beta, n, expected):
    assert instability_criterion(beta, n) is expected


def test_krein_products_of_hybrids(unstable):
    pair, _, hm = unstable
    tol = weak_tolerance(pair)
    assert abs(hm.ff) <= tol and abs(hm.ee) <= tol
    assert abs(hm.ef - 1) <= tol


def test_f_is_orthogonal_to_its_conjugate(unstable):
    pair, _, hm = unstable
    assert fl.krein_product(hm.f.conj(), hm.f, pair.stack) == 0


def test_hybrid_fields_need_instability():
    a, b = MovingSlab(N2, 0.0, -1.0, 0.0), MovingSlab(N2, 0.0, 3.0, 4.0)
    p = phase_match(a, b, kx=2.0, conjugate2=False)
    cc = coupling_constants(p)
    with pytest.raises(ValueError):
        hybrid_mode_fields(p, cc, hybridize(cc))


# -- trajectories ----------------------------------------------------------------------


def test_trajectory_conservation(unstable):
    pair, _, hm = unstable
    t = np.linspace(0, 5 / hm.split, 101)
    for mode in ("f", "e"):
        tr = classical_trajectory(hm, pair, t, mode)
        assert np.all(tr.E_s1 + tr.E_s2 == 0)
        assert np.all(tr.p_wv1 + tr.p_wv2 == 0)


def test_growing_mode_draws_external_power(unstable):
    pair, _, hm = unstable
    tr = classical_trajectory(hm, pair, np.linspace(0, 5 / hm.split, 101), "f")
    assert tr.E_s1[-1] == pytest.approx(0.5 * math.exp(10))
    assert np.mean(tr.external_power) > 0
    assert np.all(tr.dHtot1 > 0)  # slab 1 at rest: dH = dE_s1 > 0


def test_stable_trajectory_has_no_external_power():
    a, b = MovingSlab(N2, 0.0, -1.0, 0.0), MovingSlab(N2, 0.0, 3.0, 4.0)
    p = phase_match(a, b, kx=2.0, conjugate2=False)
    tr = classical_trajectory(hybridize(coupling_constants(p)), p, np.linspace(0, 10, 11))
    assert np.all(tr.external_power == 0)
    assert np.ptp(tr.E_s1 + tr.E_s2) == 0


def test_trajectory_csv(unstable):
    pair, _, hm = unstable
    text = classical_trajectory(hm, pair, np.linspace(0, 1, 5)).to_csv()
    lines = text.splitlines()
    assert lines[0].split(",") == list(ClassicalTrajectory.COLUMNS)
    assert len(lines) == 7 and lines[-1].startswith("# bracket1")


# -- energy bracket -----------------------------------------------------------------------


def test_bracket_matches_direct_pseudo_momentum(base):
    r = base.rec2
    assert energy_bracket(r, 0.95) == pytest.approx(0.95 * r.p_ps / r.E_s - 1, rel=1e-8)


@pytest.mark.parametrize("beta", [0.81, 0.9, 0.95])
def test_phase_matched_phase_velocity(beta):
    """Identical slabs: v / v_ph = 1 + sqrt(1 - beta^2), independent of n."""
    p = pair_at(beta)
    assert beta / p.rec2.v_ph == pytest.approx(1 + math.sqrt(1 - beta * beta), rel=1e-9)


@pytest.mark.parametrize("n", [2.0, 3.0, 4.0])
def test_bracket_positive_just_above_threshold(n):
    th = 2 * n / (n * n + 1)
    p = pair_at(th + 0.01, n)
    assert energy_bracket(p.rec2, p.slab2.beta) > 0


@pytest.mark.slow
@pytest.mark.xfail(strict=True, reason="bracket turns negative well above threshold; see decisions ledger")
def test_bracket_positive_everywhere_above_threshold():
    values = []
    for n in (2.0, 3.0, 4.0):
        th = 2 * n / (n * n + 1)
        for beta in np.linspace(th + 0.01, 0.98, 18):
            p = pair_at(beta, n)
            values.append(energy_bracket(p.rec2, beta))
    assert len(values) >= 50
    assert min(values) > 0
