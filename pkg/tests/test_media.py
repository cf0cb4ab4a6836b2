import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cherenkov.errors import SingularMaterial
from cherenkov.media import (
    DefinitenessTag,
    MovingSlab,
    RestFrameMaterial,
    boost_dispersion_point,
    build_material_matrix,
    cherenkov_thresholds,
    classify_definiteness,
    definiteness_at,
    locate_definiteness_flip,
    velocity_addition,
)

materials = st.builds(
    RestFrameMaterial,
    epsilon=st.floats(1.0, 20.0),
    mu=st.just(1.0),
)
betas = st.floats(-0.99, 0.99)


def test_rest_case_is_diagonal():
    mm = build_material_matrix(RestFrameMaterial(2.0), 0.0)
    assert (mm.eps_t, mm.mu_t, mm.a) == (2.0, 1.0, 0.0)
    np.testing.assert_array_equal(mm.m, np.diag([2, 2, 2, 1, 1, 1]))


def test_moving_example():
    mm = build_material_matrix(RestFrameMaterial(2.0), 0.5)
    assert mm.eps_t == pytest.approx(3.0, rel=1e-15)
    assert mm.mu_t == pytest.approx(1.5, rel=1e-15)
    assert mm.a == pytest.approx(1.0, rel=1e-15)
    assert mm.m[1, 5] == pytest.approx(-1.0) and mm.m[2, 4] == pytest.approx(1.0)


def test_resonance_raises():
    with pytest.raises(SingularMaterial):
        build_material_matrix(RestFrameMaterial(2.0), 1 / math.sqrt(2))


def test_invalid_inputs():
    with pytest.raises(ValueError):
        RestFrameMaterial(0.5)
    with pytest.raises(ValueError):
        MovingSlab(RestFrameMaterial(2.0), 1.0, 0.0, 1.0)
    with pytest.raises(ValueError):
        MovingSlab(RestFrameMaterial(2.0), 0.1, 1.0, 1.0)


@given(materials, betas)
def test_symmetry_and_parity(mat, beta):
    try:
        mm = build_material_matrix(mat, beta)
        mr = build_material_matrix(mat, -beta)
    except SingularMaterial:
        return
    assert np.array_equal(mm.m, mm.m.T)
    assert mm.a == -mr.a
    assert mm.eps_t == mr.eps_t and mm.mu_t == mr.mu_t


@pytest.mark.parametrize(
    "beta, tag",
    [(0.4, DefinitenessTag.POSITIVE_DEFINITE), (0.6, DefinitenessTag.INDEFINITE), (0.5, DefinitenessTag.SINGULAR)],
)
def test_definiteness_examples(beta, tag):
    assert definiteness_at(RestFrameMaterial(4.0), beta).tag is tag


def test_classify_matches_eigenvalues():
    d = classify_definiteness(build_material_matrix(RestFrameMaterial(4.0), 0.6))
    assert d.tag is DefinitenessTag.INDEFINITE and d.min_eigenvalue < 0


@pytest.mark.parametrize("n", [1.5, 2.0, 4.0, 10.0])
@pytest.mark.parametrize("split", [0.0, 0.5, 1.0])
def test_flip_at_inverse_index(n, split):
    eps = n ** (2 * (1 - split))  # split the index between epsilon and mu
    mu = n * n / eps
    flip = locate_definiteness_flip(RestFrameMaterial(eps, mu))
    assert abs(flip - 1 / n) <= 1e-12


def test_thresholds():
    assert cherenkov_thresholds(RestFrameMaterial(1.0)) == (1.0, 1.0)
    bc, br = cherenkov_thresholds(RestFrameMaterial(4.0))
    assert (bc, br) == pytest.approx((0.5, 0.8))
    bc, br = cherenkov_thresholds(RestFrameMaterial(100.0))
    assert (bc, br) == pytest.approx((0.1, 20 / 101))


def test_boost_examples():
    assert boost_dispersion_point(1.0, 0.6, 0.0) == (1.0, 0.6)
    assert boost_dispersion_point(1.0, 0.0, 0.6) == pytest.approx((1.25, 0.75))


@given(st.floats(-5, 5), st.floats(-5, 5), betas)
def test_boost_roundtrip_and_interval(w, k, beta):
    w2, k2 = boost_dispersion_point(*boost_dispersion_point(w, k, beta), -beta)
    scale = max(1.0, abs(w), abs(k)) / (1 - abs(beta))
    assert abs(w2 - w) <= 1e-13 * scale and abs(k2 - k) <= 1e-13 * scale
    wl, kl = boost_dispersion_point(w, k, beta)
    assert abs((wl * wl - kl * kl) - (w * w - k * k)) <= 1e-12 * scale**2


def test_velocity_addition():
    assert velocity_addition(0.0, 0.3) == 0.3
    assert velocity_addition(0.5, 0.5) == pytest.approx(0.8)
    assert velocity_addition(0.8, -0.5) == pytest.approx(0.5)
    assert velocity_addition(1.0, 0.7) == 1.0 and velocity_addition(-1.0, 0.7) == -1.0


@settings(max_examples=50)
@given(betas, betas, betas)
def test_velocity_addition_associative(a, b, c):
    lhs = velocity_addition(velocity_addition(a, b), c)
    rhs = velocity_addition(a, velocity_addition(b, c))
    assert lhs == pytest.approx(rhs, abs=1e-9)
