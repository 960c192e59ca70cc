"""
Periodic spectral infrastructure: grids, fields, multipliers, the three
transforms and the discretised norms.

Oracles: single-mode calculus, Parseval, scipy.integrate.quad for the
weighted integrals and scipy.stats.linregress for the scaling exponents.
"""
import numpy as np
import pytest
from scipy import integrate, stats

from eckhaus_kdv.components.fourier_core import (
    AnalyticNormParams,
    FieldPair,
    Multiplier,
    SpectralField,
    SpectralGrid,
    analytic_norm,
    antiderivative,
    apply_multiplier,
    hm_norm,
    padded_product,
    s_diag,
    s_diag_symbols,
    s_omega,
    s_theta,
    theta_hat,
    theta_inverse,
    theta_symbol,
    w_norm,
)
from eckhaus_kdv.components.spectral_analysis import eval_dispersion, eval_symbol_y
from eckhaus_kdv.entity.params import CGLParams
from eckhaus_kdv.exception import (
    EckhausKdVException,
    GridMismatchError,
    NumericalInstabilityError,
    ParameterDomainError,
    ZeroModePolicyError,
)

_RNG = np.random.default_rng(7)
_GRID = SpectralGrid(64, 2.0 * np.pi)
_WIDE = SpectralGrid(128, 8.0 * np.pi)
_PARAMS = CGLParams.marginal(1.0, 0.0, 0.1)


def _smooth(grid, shift=0.0):
    x = grid.x
    return np.exp(np.cos(2.0 * np.pi * (x - shift) / grid.length))


def test_grid_invariants():
    """Even n, spacing 2 pi / L and a symmetric wavenumber set up to the Nyquist mode."""
    k = _WIDE.wavenumbers
    assert _WIDE.dk == pytest.approx(2.0 * np.pi / _WIDE.length)
    assert np.sort(k)[0] == pytest.approx(-(_WIDE.n // 2 - 1) * _WIDE.dk)
    assert np.sort(k)[-1] == pytest.approx(_WIDE.n // 2 * _WIDE.dk)


@pytest.mark.parametrize("n, length", [(6, 1.0), (2, 1.0), (8, 0.0), (8, -1.0)])
def test_grid_rejects_bad_shape(n, length):
    with pytest.raises(ParameterDomainError):
        SpectralGrid(n, length)


def test_round_trip_physical_fourier():
    values = _RNG.standard_normal(_WIDE.n)
    field = SpectralField.from_physical(_WIDE, values)
    np.testing.assert_allclose(field.physical(), values, rtol=1e-12, atol=1e-12)
    assert field.is_real


def test_real_field_requires_conjugate_symmetry():
    coeffs = np.zeros(_GRID.n, dtype=complex)
    coeffs[1] = 1.0
    with pytest.raises(EckhausKdVException):
        SpectralField(_GRID, coeffs, is_real=True)
    assert not SpectralField(_GRID, coeffs, is_real=False).is_real


def test_nearly_equal_real_fields_subtract_to_a_real_field():
    """Only roundoff is left after the cancellation; the difference stays real and accurate."""
    grid = SpectralGrid(256, 20.0 * np.pi)
    base = 3.0 * np.exp(np.cos(grid.x / 10.0))
    u = SpectralField.from_physical(grid, base)
    v = SpectralField.from_physical(grid, base + 1e-11 * np.sin(grid.x / 10.0))
    difference = v - u
    assert difference.is_real
    np.testing.assert_allclose(difference.physical(), 1e-11 * np.sin(grid.x / 10.0), atol=2e-13)
    assert (u - u).sup() == 0.0


def test_large_weights_keep_real_fields_real():
    grid = SpectralGrid(128, 2.0 * np.pi)
    u = SpectralField.from_physical(grid, 1.0 / (2.0 - np.cos(grid.x)))
    weight = Multiplier(lambda k: np.exp(3.0 * np.abs(k)), "e^{3|k|}")
    out = apply_multiplier(weight, u)
    assert out.is_real
    np.testing.assert_array_equal(out.coeffs[1:], np.conj(out.coeffs[1:][::-1]))


def test_parseval():
    """Physical L2 norm equals the mu = 0, s = 0 analytic norm."""
    values = _smooth(_WIDE) + 0.3 * _RNG.standard_normal(_WIDE.n)
    field = SpectralField.from_physical(_WIDE, values)
    physical = np.sqrt(_WIDE.dx * np.sum(values ** 2))
    assert analytic_norm(field) == pytest.approx(physical, rel=1e-12)


def test_identity_multiplier():
    field = SpectralField.from_physical(_GRID, _smooth(_GRID))
    out = apply_multiplier(Multiplier(lambda k: np.ones_like(k), "id"), field)
    np.testing.assert_allclose(out.coeffs, field.coeffs, atol=1e-15)
    assert out.is_real


def test_derivative_symbol_on_sine():
    """ik applied to sin(x) on L = 2 pi gives cos(x)."""
    field = SpectralField.from_physical(_GRID, np.sin(_GRID.x))
    out = apply_multiplier(Multiplier(lambda k: 1j * k, "d"), field)
    np.testing.assert_allclose(out.physical(), np.cos(_GRID.x), atol=1e-12)


def test_multiplier_composition():
    field = SpectralField.from_physical(_WIDE, _smooth(_WIDE))
    g = Multiplier(lambda k: 1.0 / (1.0 + k ** 2), "g")
    h = Multiplier(lambda k: 1j * k, "h")
    twice = apply_multiplier(g, apply_multiplier(h, field))
    once = apply_multiplier(g * h, field)
    np.testing.assert_allclose(twice.coeffs, once.coeffs, rtol=1e-14, atol=1e-15)


@pytest.mark.parametrize("k, expected", [(2.0, 1j), (0.5, 0.5j), (-3.0, -1j), (1.0, 1j), (0.0, 0.0)])
def test_theta_symbol_values(k, expected):
    assert theta_symbol()(np.array([k]))[0] == pytest.approx(expected)


def test_theta_bounded_by_one():
    k = np.linspace(-50.0, 50.0, 1001)
    assert np.max(np.abs(theta_hat(k))) <= 1.0 + 1e-15


def test_theta_is_derivative_on_long_waves():
    """On a field supported on |k| <= 1 the theta operator is d/dx."""
    x = _WIDE.x
    field = SpectralField.from_physical(_WIDE, np.cos(0.5 * x) + np.sin(0.75 * x))
    np.testing.assert_allclose(
        apply_multiplier(theta_symbol(), field).coeffs, field.derivative().coeffs, atol=1e-13
    )


def test_theta_inverse_zero_mode_policy():
    field = SpectralField.from_physical(_WIDE, 1.0 + np.cos(_WIDE.x))
    with pytest.raises(ZeroModePolicyError):
        theta_inverse(field)
    dropped = theta_inverse(field, zero_mode="drop")
    assert abs(dropped.coeffs[0]) == 0.0


def test_antiderivative_splits_mean():
    """u = m + P' with P mean-free."""
    values = 0.7 + np.cos(_GRID.x) + 0.2 * np.sin(3 * _GRID.x)
    field = SpectralField.from_physical(_GRID, values)
    primitive, mean = antiderivative(field)
    assert mean == pytest.approx(0.7)
    assert abs(primitive.coeffs[0]) < 1e-14
    np.testing.assert_allclose(mean + primitive.derivative().physical(), values, atol=1e-12)


def test_s_theta_identity_on_long_waves():
    x = _WIDE.x
    pair = FieldPair(
        SpectralField.from_physical(_WIDE, np.cos(0.75 * x)), SpectralField.from_physical(_WIDE, np.sin(0.25 * x))
    )
    out = s_theta(pair)
    np.testing.assert_allclose(out.stack(), pair.stack(), atol=1e-14)


def test_s_theta_round_trip():
    values = _smooth(_WIDE)
    first = SpectralField.from_physical(_WIDE, values - values.mean())
    pair = FieldPair(first, SpectralField.from_physical(_WIDE, values))
    back = s_theta(s_theta(pair, "forward"), "inverse")
    np.testing.assert_allclose(back.stack(), pair.stack(), rtol=1e-12, atol=1e-12)


def test_s_diag_symbols_are_inverse():
    k = _RNG.uniform(-10.0, 10.0, 1000)
    forward, inverse = s_diag_symbols(_PARAMS, k)
    product = np.einsum("kij,kjl->kil", forward, inverse)
    np.testing.assert_allclose(product, np.broadcast_to(np.eye(2), product.shape), atol=1e-12)


def test_s_diag_diagonalises_chi_symbol():
    """S_diag^-1 diag(lambda_+, lambda_-) S_diag reproduces the (chi, s) symbol."""
    k = _RNG.uniform(-4.0, 4.0, 200)
    forward, inverse = s_diag_symbols(_PARAMS, k)
    sample = eval_dispersion(_PARAMS, k)
    diagonal = np.zeros((k.size, 2, 2), dtype=complex)
    diagonal[:, 0, 0] = sample.lambda_plus
    diagonal[:, 1, 1] = sample.lambda_minus
    rebuilt = np.einsum("kij,kjl,klm->kim", inverse, diagonal, forward)
    expected = eval_symbol_y(_PARAMS, k)
    scale = np.max(np.abs(expected), axis=(1, 2))[:, None, None]
    assert np.max(np.abs(rebuilt - expected) / scale) < 1e-10


def test_s_diag_finite_at_zero():
    forward, inverse = s_diag_symbols(_PARAMS, np.array([0.0]))
    assert np.all(np.isfinite(forward)) and np.all(np.isfinite(inverse))


def test_s_diag_round_trip():
    pair = FieldPair(
        SpectralField.from_physical(_WIDE, _smooth(_WIDE)), SpectralField.from_physical(_WIDE, _smooth(_WIDE, 1.0))
    )
    back = s_diag(_PARAMS, s_diag(_PARAMS, pair, "forward"), "inverse")
    np.testing.assert_allclose(back.stack(), pair.stack(), rtol=1e-10, atol=1e-12)


def test_s_omega_zero_weight_is_identity():
    pair = FieldPair(SpectralField.from_physical(_GRID, _smooth(_GRID)), SpectralField.zeros(_GRID))
    np.testing.assert_allclose(s_omega(0.0, pair).stack(), pair.stack(), atol=0.0)


def test_s_omega_round_trip():
    mu = 30.0 / _GRID.k_max
    pair = FieldPair(
        SpectralField.from_physical(_GRID, _smooth(_GRID)), SpectralField.from_physical(_GRID, _smooth(_GRID, 0.5))
    )
    back = s_omega(mu, s_omega(mu, pair, "forward"), "inverse")
    np.testing.assert_allclose(back.stack(), pair.stack(), rtol=1e-10, atol=1e-14)


def test_s_omega_overflow_reports_mode():
    pair = FieldPair(SpectralField.from_physical(_GRID, _smooth(_GRID)), SpectralField.zeros(_GRID))
    with pytest.raises(NumericalInstabilityError, match="k ="):
        s_omega(100.0, pair, "forward")


def test_s_omega_rejects_unknown_direction():
    pair = FieldPair(SpectralField.zeros(_GRID), SpectralField.zeros(_GRID))
    with pytest.raises(ParameterDomainError):
        s_omega(1.0, pair, "sideways")


def test_analytic_norm_trivial_cases():
    """Zero field has norm 0; a single unit coefficient has norm sqrt(dk)."""
    assert analytic_norm(SpectralField.zeros(_WIDE)) == 0.0
    coeffs = np.zeros(_WIDE.n, dtype=complex)
    coeffs[3] = 1.0
    single = SpectralField(_WIDE, coeffs, is_real=False)
    assert analytic_norm(single) == pytest.approx(np.sqrt(_WIDE.dk))


def test_analytic_norm_of_gaussian_matches_quadrature():
    """u = exp(-x^2/2) has u_hat = exp(-k^2/2); the mu = 1 norm is an explicit integral."""
    grid = SpectralGrid(1024, 80.0 * np.pi)
    x = grid.x - grid.length / 2.0
    field = SpectralField.from_physical(grid, np.exp(-0.5 * x ** 2))
    half, _ = integrate.quad(lambda k: np.exp(2.0 * k - k ** 2), 0.0, np.inf)
    exact = 2.0 * half
    assert analytic_norm(field, AnalyticNormParams(mu=1.0)) == pytest.approx(np.sqrt(exact), rel=1e-4)
    smooth, _ = integrate.quad(lambda k: (1.0 + k ** 2) * np.exp(-(k ** 2)), -np.inf, np.inf)
    assert hm_norm(field, 1.0) == pytest.approx(np.sqrt(smooth), rel=1e-10)


def test_analytic_norm_parameters_validated():
    with pytest.raises(ParameterDomainError):
        AnalyticNormParams(mu=-0.1)


def test_w_norm_trivial_cases():
    assert w_norm(SpectralField.zeros(_WIDE), m=2.0) == 0.0
    coeffs = np.zeros(_WIDE.n, dtype=complex)
    coeffs[5] = 1.0
    k0 = _WIDE.wavenumbers[5]
    single = SpectralField(_WIDE, coeffs, is_real=False)
    assert w_norm(single, mu=0.0, m=1.5) == pytest.approx(_WIDE.dk * (1.0 + abs(k0) ** 1.5))


def test_algebra_constant_stable_under_refinement():
    """||uv|| / (||u|| ||v||) for s = 1, mu = 0.25 agrees across refinements.

    e^{2 mu k_max} times the roundoff floor of the coefficients stays far below the
    signal up to n = 128.
    """
    p = AnalyticNormParams(mu=0.25, s=1.0)
    ratios = []
    for n in (32, 64, 128):
        grid = SpectralGrid(n, 2.0 * np.pi)
        u = SpectralField.from_physical(grid, 1.0 / (2.0 - np.cos(grid.x)))
        v = SpectralField.from_physical(grid, np.exp(np.sin(2.0 * grid.x)))
        ratios.append(analytic_norm(padded_product(u, v), p) / (analytic_norm(u, p) * analytic_norm(v, p)))
    assert np.all(np.isfinite(ratios))
    assert ratios[1] == pytest.approx(ratios[0], rel=1e-6)
    assert ratios[2] == pytest.approx(ratios[1], rel=1e-8)
    assert 0.0 < ratios[-1] < 10.0


def test_padded_product_is_exact_for_band_limited_fields():
    x = _GRID.x
    u = SpectralField.from_physical(_GRID, np.cos(10 * x))
    v = SpectralField.from_physical(_GRID, np.sin(12 * x))
    np.testing.assert_allclose(padded_product(u, v).physical(), np.cos(10 * x) * np.sin(12 * x), atol=1e-12)


def _long_wave(epsilon):
    grid = SpectralGrid(64, 2.0 * np.pi / epsilon)
    xi = epsilon * grid.x
    return SpectralField.from_physical(grid, np.cos(xi) + 0.5 * np.sin(2.0 * xi))


@pytest.mark.parametrize("theta0", [1, 2, 3])
def test_multiplier_scaling_on_long_waves(theta0):
    """Symbols ~ |k|^theta0 near 0 scale long waves A(eps x) like eps^(theta0 - 1/2)."""
    symbol = Multiplier(lambda k: (1j * k / (1.0 + np.abs(k))) ** theta0, f"g{theta0}")
    eps = np.array([0.02, 0.01, 0.005])
    norms = [hm_norm(apply_multiplier(symbol, _long_wave(e)), 0.0) for e in eps]
    slope = stats.linregress(np.log(eps), np.log(norms)).slope
    assert abs(slope - (theta0 - 0.5)) < 0.1


def test_half_theta_w_norm_has_no_loss():
    """||theta^(1/2) A(eps .)||_W scales like eps^(1/2)."""
    half = Multiplier(lambda k: np.sqrt(np.abs(theta_hat(k))), "theta^1/2")
    eps = np.array([0.2, 0.1, 0.05])
    norms = [w_norm(apply_multiplier(half, _long_wave(e)), m=1.0) for e in eps]
    assert stats.linregress(np.log(eps), np.log(norms)).slope >= 0.45


def test_point_evaluation_and_translation():
    field = SpectralField.from_physical(_GRID, _smooth(_GRID))
    assert field.at(1.234) == pytest.approx(np.exp(np.cos(1.234)), rel=1e-12)
    shifted = field.translate(0.5)
    np.testing.assert_allclose(shifted.physical(), _smooth(_GRID, 0.5), atol=1e-12)


def test_resample_keeps_the_interpolant():
    field = SpectralField.from_physical(_GRID, _smooth(_GRID))
    fine = field.resample(SpectralGrid(256, _GRID.length))
    np.testing.assert_allclose(fine.physical(), _smooth(fine.grid), atol=1e-12)
    with pytest.raises(GridMismatchError):
        field.resample(SpectralGrid(64, 3.0))


def test_grid_mismatch_on_combination():
    with pytest.raises(GridMismatchError):
        SpectralField.zeros(_GRID) + SpectralField.zeros(_WIDE)
