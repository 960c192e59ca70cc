"""
KdV coefficients, the KdV solver, the ansatz on the x-grid, its residual in
the (psi, s) system and the higher-order hierarchy.

Oracles: closed-form coefficients, the KdV invariants, Airy translation of a
small cosine, and a fourth-order difference of the ansatz along re-stepped
KdV states.
"""
import os

import numpy as np
import pytest

from eckhaus_kdv.components import kdv_approx
from eckhaus_kdv.components.fourier_core import SpectralField, SpectralGrid
from eckhaus_kdv.components.kdv_approx import (
    PROFILES,
    HierarchyCoefficientTable,
    HierarchyLevel,
    KdVState,
    ansatz_state,
    hierarchy_extend,
    kdv_profile,
    make_coefficients,
    marginal_defect,
    residual_V,
    scale_to_x_grid,
    smallest_working_eta,
    solve_kdv,
    strip_norms,
    strip_widths,
    tilde_coefficients,
    x_grid_for,
)
from eckhaus_kdv.entity.artifact_entity import Trajectory
from eckhaus_kdv.entity.params import CGLParams
from eckhaus_kdv.exception import (
    ConfigValidationError,
    DegenerateCaseError,
    EckhausKdVException,
    GridMismatchError,
    MissingCoefficientTableError,
    ParameterDomainError,
)

_TABLE_FILE_PATH = os.path.join(os.path.dirname(__file__), os.pardir, "config", "hierarchy_coefficients.yaml")
_PARAMS = CGLParams.marginal(1.0, 0.0, 0.1)
_XI = SpectralGrid(64, 4.0 * np.pi)


def _gaussian(grid=_XI, amplitude=1.0, width=1.5):
    return kdv_profile("gaussian-periodic", grid, amplitude=amplitude, width=width)


def _single(a):
    return Trajectory(times=np.array([0.0]), states=[KdVState(a)], steps=0, wall_time=0.0)


def test_coefficients_of_the_real_case():
    """alpha = 1, beta = 0: gamma_lin = gamma_non = -1, c = 2, nu0 = -1/sigma."""
    coeffs = make_coefficients(_PARAMS)
    assert coeffs.gamma_lin == pytest.approx(-1.0)
    assert coeffs.gamma_non == pytest.approx(-1.0)
    assert coeffs.c == pytest.approx(2.0)
    assert coeffs.nu0 == pytest.approx(-1.0 / _PARAMS.sigma)
    assert coeffs.nu1 == pytest.approx(-0.5 / _PARAMS.sigma)


def test_equal_alpha_beta_is_degenerate():
    with pytest.raises(DegenerateCaseError, match="Cahn-Hilliard"):
        make_coefficients(CGLParams(0.5, 0.5, zeta=0.5))


def test_marginal_defect_is_quadratic_in_eps():
    defects = [marginal_defect(make_coefficients(CGLParams.marginal(1.0, 0.0, eps))) for eps in (0.1, 0.05)]
    assert abs(defects[0]) < _PARAMS.epsilon ** 2
    assert defects[0] / defects[1] == pytest.approx(4.0, rel=0.02)


@pytest.mark.parametrize("alpha, beta", [(1.0, 0.0), (1.0, 0.5), (2.0, -0.3)])
def test_tilde_coefficients(alpha, beta):
    """The nonlinear one equals gamma_non for every sigma; the linear one tends to gamma_lin."""
    coarse, fine = CGLParams.marginal(alpha, beta, 0.2), CGLParams.marginal(alpha, beta, 0.05)
    assert tilde_coefficients(coarse)[1] == pytest.approx(beta - alpha, rel=1e-12)
    if beta == 0.0:
        gamma_lin = make_coefficients(fine).gamma_lin
        errors = [abs(tilde_coefficients(p)[0] - gamma_lin) for p in (coarse, fine)]
        assert errors[1] < errors[0]


@pytest.mark.parametrize("name", PROFILES)
def test_profiles_are_mean_free(name):
    a = kdv_profile(name, _XI, amplitude=0.7, width=2.0)
    assert a.is_real
    assert abs(a.mean()) < 1e-14
    assert a.sup() > 0.1


def test_unknown_profile():
    with pytest.raises(ConfigValidationError, match="unknown profile"):
        kdv_profile("soliton", _XI)


def test_kdv_conserves_mass_and_momentum():
    state = KdVState(_gaussian(SpectralGrid(128, 12.0 * np.pi)))
    coeffs = make_coefficients(_PARAMS)
    trajectory = solve_kdv(state, coeffs, t_end=1.0, dt=1e-3, record_stride=250)
    for recorded in trajectory.states:
        assert recorded.mass() == pytest.approx(state.mass(), abs=1e-12)
        assert recorded.momentum() == pytest.approx(state.momentum(), rel=1e-6)


def test_small_cosine_is_translated_by_airy():
    """A tiny cos(k xi) moves with speed gamma_lin k^2."""
    a0 = kdv_profile("cosine", _XI, amplitude=1e-6, width=2.0)
    coeffs = make_coefficients(_PARAMS)
    k, tau = 0.5, 1.0
    final = solve_kdv(KdVState(a0), coeffs, t_end=tau, dt=1e-3).final.a
    exact = a0.translate(coeffs.gamma_lin * k ** 2 * tau)
    assert (final - exact).sup() <= 1e-11


def test_x_grid_is_locked_to_the_xi_grid():
    x_grid = x_grid_for(_XI, 0.1, 4)
    assert x_grid.n == 256
    assert x_grid.length == pytest.approx(_XI.length / 0.1)
    with pytest.raises(ParameterDomainError):
        x_grid_for(_XI, 0.0)
    with pytest.raises(ParameterDomainError, match="exceeds the cap"):
        x_grid_for(SpectralGrid(1024, 4.0 * np.pi), 0.1, 32)


def test_scaling_onto_the_x_grid():
    u = SpectralField.from_physical(_XI, np.cos(0.5 * _XI.x) + 0.3 * np.sin(_XI.x))
    x_grid = x_grid_for(_XI, 0.1, 2)
    scaled = scale_to_x_grid(u, x_grid, 0.1, 0.01)
    x = x_grid.x
    assert np.allclose(scaled.physical(), 0.01 * (np.cos(0.05 * x) + 0.3 * np.sin(0.1 * x)), atol=1e-14)
    with pytest.raises(GridMismatchError, match="not locked"):
        scale_to_x_grid(u, SpectralGrid(128, 100.0), 0.1, 1.0)


def test_leading_order_ansatz():
    """psi = eps^2 A(eps x), s = eps^2 nu0 A(eps x)."""
    eps = _PARAMS.epsilon
    coeffs = make_coefficients(_PARAMS)
    a = _gaussian()
    x_grid = x_grid_for(_XI, eps, 2)
    v = ansatz_state(a, coeffs, _PARAMS, 0, x_grid)
    reference = scale_to_x_grid(a, x_grid, eps, eps ** 2).physical()
    assert np.allclose(v.psi_w.physical(), reference, atol=1e-15)
    assert np.allclose(v.s.physical(), coeffs.nu0 * reference, atol=1e-15)
    with pytest.raises(ParameterDomainError):
        ansatz_state(a, coeffs, _PARAMS, 2, x_grid)


def test_improved_ansatz_has_the_smaller_residual():
    coeffs = make_coefficients(_PARAMS)
    trajectory = _single(_gaussian())
    zeroth = residual_V(trajectory, coeffs, _PARAMS, 0)
    first = residual_V(trajectory, coeffs, _PARAMS, 1)
    assert zeroth.sup[0] > 3.0 * first.sup[0]
    assert first.times[0] == 0.0
    assert first.order == 1


def test_chain_rule_time_derivative_matches_finite_differences():
    coeffs = make_coefficients(_PARAMS)
    kdv = solve_kdv(KdVState(_gaussian()), coeffs, t_end=0.05, dt=1e-3, record_stride=10)
    series = residual_V(kdv, coeffs, _PARAMS, 1, cross_check=True)
    assert len(series.times) == 6
    assert series.times[-1] == pytest.approx(0.05 / _PARAMS.epsilon ** 3)
    assert series.derivative_check < 1e-6


def test_derivative_check_does_not_depend_on_the_record_stride():
    coeffs = make_coefficients(_PARAMS)
    kdv = solve_kdv(KdVState(_gaussian()), coeffs, t_end=0.2, dt=1e-3, record_stride=100)
    assert len(kdv.times) == 3
    for order in (0, 1):
        series = residual_V(kdv, coeffs, _PARAMS, order, cross_check=True)
        assert series.derivative_check < 1e-6


def test_derivative_check_catches_a_wrong_tendency(monkeypatch):
    coeffs = make_coefficients(_PARAMS)
    original = kdv_approx.kdv_tendency
    monkeypatch.setattr(kdv_approx, "kdv_tendency", lambda a, c: 1.001 * original(a, c))
    with pytest.raises(EckhausKdVException) as info:
        residual_V(_single(_gaussian()), coeffs, _PARAMS, 1, cross_check=True)
    assert info.value.category == "NumericalInstabilityError"


def test_residual_needs_a_valid_order():
    with pytest.raises(EckhausKdVException) as info:
        residual_V(_single(_gaussian()), make_coefficients(_PARAMS), _PARAMS, 3)
    assert info.value.category == "ParameterDomainError"


# ---------------------------------------------------------------- hierarchy


def test_coefficient_table_from_the_config_directory():
    table = HierarchyCoefficientTable.from_yaml(_TABLE_FILE_PATH)
    assert table.a_terms == {1: []}
    assert sorted(table.b_terms) == [0, 1, 2]
    table.require(1)
    with pytest.raises(MissingCoefficientTableError, match="levels \\[2\\]"):
        table.require(2)


@pytest.mark.parametrize(
    "document, message",
    [
        ({"forcing": {"A": {1: [{"coeff": 1.0, "factors": ["A1"]}]}}}, "may not use A1"),
        ({"forcing": {"B": {0: [{"coeff": 1.0, "factors": ["B0"]}]}}}, "may not use B0"),
        ({"forcing": {"A": {1: [{"coeff": 1.0, "factors": ["C0"]}]}}}, "bad factor name"),
        ({"forcing": {"A": {1: [{"coeff": 1.0, "factors": ["A0"], "symbols": ["kappa"]}]}}}, "unknown symbol"),
        ({"forcing": {"A": {1: []}}, "extra": 1}, "invalid coefficient table"),
    ],
)
def test_coefficient_table_validation(document, message):
    with pytest.raises(ConfigValidationError, match=message):
        HierarchyCoefficientTable.from_dict(document)


def test_strip_widths():
    assert np.allclose(strip_widths(2, 0.5, 0.1), [0.5, 0.3, 0.1])
    assert np.allclose(strip_widths(0, 0.5, 0.1), [0.5])


def _hierarchy(eta, t_end=0.05):
    coeffs = make_coefficients(_PARAMS)
    table = HierarchyCoefficientTable.from_yaml(_TABLE_FILE_PATH)
    a0 = kdv_profile("cosine", _XI, amplitude=0.5, width=2.0)
    return a0, coeffs, hierarchy_extend(
        [HierarchyLevel(0, a0)], coeffs, 1, table, _PARAMS.sigma_s, t_end=t_end, dt=1e-3, eta=eta, record_stride=10
    )


def test_hierarchy_levels():
    """Unforced A_1 stays zero, A_0 is the KdV solution and B_0 = nu0 A_0."""
    a0, coeffs, hierarchy = _hierarchy(eta=1.0)
    kdv = solve_kdv(KdVState(a0), coeffs, t_end=0.05, dt=1e-3, record_stride=10)
    assert len(hierarchy.levels) == len(kdv)
    assert hierarchy.mu.shape == (len(kdv), 2)
    for row, state in zip(hierarchy.levels, kdv.states):
        level0, level1 = row
        assert level1.a_m.sup() == 0.0
        assert (level0.a_m - state.a).sup() <= 1e-12
        assert (level0.b_m - coeffs.nu0 * level0.a_m).sup() <= 1e-12
        assert level0.algebraic_residual() <= 1e-12
    assert hierarchy.strip_exhausted_at is None
    assert smallest_working_eta(hierarchy, etas=(1.0,)) == 1.0


def test_hierarchy_strip_exhaustion():
    """mu_1(tau) = 0.1 - 8 tau reaches mu_star = 0.025 at tau = 0.009375, the first record after is tau = 0.01."""
    _, _, hierarchy = _hierarchy(eta=8.0)
    assert hierarchy.mu_star == pytest.approx(0.025)
    assert hierarchy.strip_exhausted_at == pytest.approx(0.01)
    assert np.isnan(hierarchy.weighted_norms[-1])
    assert np.isfinite(hierarchy.weighted_norms[0])


def test_strip_is_exhausted_at_mu_star_not_at_zero():
    _, _, hierarchy = _hierarchy(eta=1.0)
    times = hierarchy.times
    levels = hierarchy.levels
    mu0 = hierarchy.mu[0]
    _, _, never = strip_norms(times, levels, mu0, eta=1.0, mu_star=0.025)
    assert never is None
    _, norms, reached = strip_norms(times, levels, mu0, eta=1.0, mu_star=0.065)
    assert reached == pytest.approx(0.04)
    assert np.isnan(norms[4]) and np.isfinite(norms[3])


def test_hierarchy_rejects_strips_below_mu_star():
    coeffs = make_coefficients(_PARAMS)
    table = HierarchyCoefficientTable.from_yaml(_TABLE_FILE_PATH)
    with pytest.raises(EckhausKdVException) as info:
        hierarchy_extend(
            [HierarchyLevel(0, _gaussian())], coeffs, 1, table, _PARAMS.sigma_s, t_end=0.01, dt=1e-3, eta=1.0,
            mu_lower=0.02, mu_star=0.025,
        )
    assert info.value.category == "ParameterDomainError"


def test_hierarchy_without_a_table_entry():
    coeffs = make_coefficients(_PARAMS)
    table = HierarchyCoefficientTable.from_yaml(_TABLE_FILE_PATH)
    with pytest.raises(EckhausKdVException) as info:
        hierarchy_extend([HierarchyLevel(0, _gaussian())], coeffs, 2, table, _PARAMS.sigma_s, 0.01, 1e-3, 1.0)
    assert info.value.category == "MissingCoefficientTableError"
    assert info.value.exit_code == 2
