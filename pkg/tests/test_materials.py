"""Potentials, derivative consistency, assumption validation, stabilization."""

import numpy as np
import pytest

from chns_control.materials import (MaterialModel, PotentialModel, potential_eval,
                                    stabilization_constant, validate_assumptions)

RNG = np.random.default_rng(3)


def test_double_well_closed_forms():
    pot = PotentialModel.double_well()
    assert potential_eval(pot, 0.0, 0) == pytest.approx(0.25)
    assert potential_eval(pot, 1.0, 1) == 0.0
    assert potential_eval(pot, -1.0, 1) == 0.0
    s = RNG.uniform(-2, 2, 1000)
    assert np.allclose(potential_eval(pot, s, 0), (1 - s**2) ** 2 / 4, atol=1e-14)
    assert np.allclose(potential_eval(pot, s, 1), s**3 - s, atol=1e-14)
    assert np.allclose(potential_eval(pot, s, 2), 3 * s**2 - 1, atol=1e-14)
    assert np.allclose(potential_eval(pot, s, 3), 6 * s, atol=1e-14)


def test_logarithmic_symmetry_and_clamp():
    pot = PotentialModel.logarithmic(theta=1.0, theta_c=0.0, delta_min=1e-3)
    assert potential_eval(pot, 0.0, 1) == pytest.approx(0.0)
    # clamp: values beyond the admitted range evaluate at the clamp edge
    edge = 1.0 - 1e-3
    assert potential_eval(pot, 5.0, 1) == pytest.approx(potential_eval(pot, edge, 1))
    assert pot.clamp_count(np.array([0.0, 0.5, 0.9995, -2.0])) == 2
    assert pot.clamp_count(np.array([0.0, 0.5])) == 0


def test_logarithmic_normalized_nonnegative():
    pot = PotentialModel.logarithmic(theta=1.0, theta_c=2.8, delta_min=1e-3)
    s = np.linspace(-pot.clamp_bound, pot.clamp_bound, 4001)
    vals = potential_eval(pot, s, 0)
    assert vals.min() >= -1e-12
    assert vals.min() <= 1e-6  # offset is tight up to sampling resolution


def test_potential_eval_rejects_nan_and_bad_order():
    pot = PotentialModel.double_well()
    with pytest.raises(ValueError):
        potential_eval(pot, np.nan, 0)
    with pytest.raises(ValueError):
        potential_eval(pot, 0.0, 4)


@pytest.mark.parametrize("pot", [
    PotentialModel.double_well(),
    PotentialModel.logarithmic(theta=0.8, theta_c=1.9, delta_min=1e-2),
    PotentialModel.polynomial([0.25, 0.0, -0.5, 0.0, 0.25]),
])
def test_derivative_finite_difference_consistency(pot):
    # centered differences of order k match order k+1 with slope-2 convergence
    s = np.linspace(-0.8, 0.8, 41)
    for order in range(3):
        errs = []
        for eps in (1e-3, 5e-4):
            fd = (potential_eval(pot, s + eps, order) -
                  potential_eval(pot, s - eps, order)) / (2 * eps)
            errs.append(np.max(np.abs(fd - potential_eval(pot, s, order + 1))))
        if errs[0] < 1e-10:  # centered difference exact (e.g. cubic F'), only noise left
            continue
        rate = np.log(errs[0] / errs[1]) / np.log(2.0)
        assert rate > 1.8, (order, errs)


def test_lipschitz_after_clamping():
    pot = PotentialModel.logarithmic(theta=1.0, theta_c=0.5, delta_min=1e-2)
    s = np.linspace(-3, 3, 20001)
    v = potential_eval(pot, s, 1)
    quotients = np.abs(np.diff(v) / np.diff(s))
    assert np.max(quotients) < np.abs(potential_eval(pot, pot.clamp_bound, 2)) * 1.01


def test_stabilization_constant_double_well():
    pot = PotentialModel.double_well()
    assert stabilization_constant(pot, (-1.0, 1.0)) == pytest.approx(1.0)
    assert stabilization_constant(pot, (-1.2, 1.2)) == pytest.approx(1.66)


def test_stabilization_constant_logarithmic():
    theta, theta_c = 0.7, 0.3
    pot = PotentialModel.logarithmic(theta=theta, theta_c=theta_c, delta_min=0.01)
    S = stabilization_constant(pot, (-1.0, 1.0))
    expected = theta / (1 - 0.99**2) - theta_c / 2
    assert S == pytest.approx(expected)


def test_stabilization_constant_polynomial_sampled():
    pot = PotentialModel.polynomial([0.25, 0.0, -0.5, 0.0, 0.25])  # same as double well
    S = stabilization_constant(pot, (-1.0, 1.0))
    assert S == pytest.approx(1.1, rel=1e-3)  # 1.1 safety factor on max|F''|/2


def test_validate_assumptions_double_well():
    mat = MaterialModel.constant(1.0, 1.0)
    pot = PotentialModel.double_well()
    rep = validate_assumptions(mat, pot, (-2.0, 2.0), samples=1001)
    assert rep.all_passed
    assert rep.fpp_max == pytest.approx(11.0)
    assert rep.m_min == rep.m_max == 1.0


def test_validate_assumptions_flags_bad_mobility():
    mat = MaterialModel.constant(1.0, 1.0)
    # forge a mobility that dips to zero: declared bounds can't hold
    bad = MaterialModel(
        mobility=lambda s: np.abs(np.asarray(s)),  # hits 0 at s=0
        mobility_deriv=lambda s: np.sign(np.asarray(s)),
        viscosity=mat.viscosity, viscosity_deriv=mat.viscosity_deriv,
        m0=0.1, m1=2.0, eta0=1.0, eta1=1.0, constant_mobility=False, mobility_value=1.0)
    rep = validate_assumptions(bad, PotentialModel.double_well(), (-1.0, 1.0), 501)
    names = {c.name: c.passed for c in rep.checks}
    assert names["bounded-coefficients"] is False


def test_validate_assumptions_logarithmic_convexity_floor():
    pot = PotentialModel.logarithmic(theta=0.9, theta_c=1.5, delta_min=1e-3)
    mat = MaterialModel.constant()
    rep = validate_assumptions(mat, pot, (-0.99, 0.99), samples=1001)
    assert rep.alpha0 == pytest.approx(2 * 0.9, rel=1e-4)
    assert rep.alpha0 > 0


def test_validate_assumptions_requires_samples():
    with pytest.raises(ValueError):
        validate_assumptions(MaterialModel.constant(), PotentialModel.double_well(),
                             (-1, 1), samples=10)


def test_material_constructors_and_bounds():
    mat = MaterialModel.from_polynomials([1.0, 0.02], [1.0, 0.0, 0.1])
    assert not mat.constant_mobility
    assert mat.m0 > 0 and mat.eta0 > 0
    assert mat.eta_bar == pytest.approx(0.5 * (mat.eta0 + mat.eta1))
    with pytest.raises(ValueError):
        MaterialModel.constant(-1.0, 1.0)
    with pytest.raises(ValueError):
        MaterialModel.from_polynomials([0.0, 1.0], [1.0])  # mobility hits zero
