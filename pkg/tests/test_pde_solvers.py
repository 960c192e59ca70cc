"""
Time integration of the CGL equation and the (psi, s) system, and the
coordinate chain between them.

Oracles: exact equilibria (wave train, V = 0, homogeneous amplitude ODE),
scipy.linalg.expm of the 2x2 symbol per mode, Richardson-style
self-convergence, and the CGL run pushed through the extraction map.
"""
import dataclasses

import numpy as np
import pytest
from scipy import linalg

from eckhaus_kdv.components.fourier_core import SpectralField, SpectralGrid
from eckhaus_kdv.components.pde_solvers import (
    CGLField,
    ModulationState,
    build_modulated_cgl,
    cgl_grid_for,
    cgl_system,
    extract_modulation,
    global_phase,
    modulation_system,
    rhs_cgl,
    rhs_modulation_U,
    rhs_modulation_V,
    simulate,
    step,
    wave_train,
)
from eckhaus_kdv.components.spectral_analysis import eval_symbol_v
from eckhaus_kdv.entity.config_entity import Scheme, StepperConfig
from eckhaus_kdv.entity.params import CGLParams
from eckhaus_kdv.exception import EckhausKdVException, GridMismatchError

_STABLE = CGLParams(1.0, 0.5, zeta=0.5)
_MARGINAL = CGLParams.marginal(1.0, 0.0, 0.1)
_X_GRID = SpectralGrid(32, 8.0 * np.pi)
_LAB = SpectralGrid(32, 8.0 * np.pi)


def _smooth_state(grid, amplitude):
    x = grid.x
    dk = grid.dk
    psi = amplitude * (np.cos(2.0 * dk * x) + 0.5 * np.sin(3.0 * dk * x))
    s = 0.5 * amplitude * np.sin(dk * x + 0.3)
    return ModulationState(SpectralField.from_physical(grid, psi), SpectralField.from_physical(grid, s))


def _constant(grid, value):
    return SpectralField.from_physical(grid, np.full(grid.n, value))


def test_rhs_modulation_vanishes_at_zero():
    """V = 0 is an equilibrium of the (psi, s) system."""
    tendency = rhs_modulation_V(_STABLE, ModulationState.zeros(_X_GRID))
    assert tendency.sup() == 0.0


@pytest.mark.parametrize("s0", [-0.05, 0.01, 0.2])
def test_rhs_modulation_constant_amplitude(s0):
    """A flat amplitude shift relaxes by s_t = sigma (1 - exp(2 s))."""
    v = ModulationState(SpectralField.zeros(_X_GRID), _constant(_X_GRID, s0))
    tendency = rhs_modulation_V(_STABLE, v)
    assert tendency.psi_w.sup() < 1e-14
    expected = -_STABLE.sigma * np.expm1(2.0 * s0)
    assert np.allclose(tendency.s.physical(), expected, rtol=1e-12, atol=1e-15)


def test_rhs_phase_form_shares_the_amplitude_row():
    """The s tendency of (phi, s) equals that of (psi, s) with psi = phi_x."""
    v = _smooth_state(_X_GRID, 0.05)
    phi = SpectralField.from_physical(_X_GRID, 0.05 * np.sin(2.0 * _X_GRID.dk * _X_GRID.x))
    rate = rhs_modulation_U(_STABLE, phi, v.s)
    expected = rhs_modulation_V(_STABLE, ModulationState(phi.derivative(), v.s))
    assert np.allclose(rate.second.coeffs, expected.s.coeffs, atol=1e-14)


def test_rhs_cgl_of_the_wave_train():
    """Psi_per rotates at Omega0: its tendency is i Omega0 Psi_per."""
    field = wave_train(_STABLE, _LAB)
    tendency = rhs_cgl(_STABLE, field)
    expected = 1j * _STABLE.Omega0 * field.psi.physical()
    assert np.max(np.abs(tendency.psi.physical() - expected)) < 1e-12
    assert rhs_cgl(_STABLE, CGLField.zeros(_LAB)).sup() == 0.0


def test_wave_train_needs_a_periodic_carrier():
    """zeta L / 2 pi must be an integer."""
    with pytest.raises(GridMismatchError, match="not periodic"):
        wave_train(_STABLE, SpectralGrid(32, 7.0))


def test_simulate_zero_horizon_returns_the_initial_state():
    initial = _smooth_state(_X_GRID, 0.1)
    trajectory = simulate(initial, _STABLE, StepperConfig(dt=0.1, t_end=0.0))
    assert trajectory.steps == 0
    assert len(trajectory) == 1
    assert trajectory.final is initial


def test_simulate_adjusts_dt_to_hit_t_end():
    """t_end that is not a multiple of dt is reached exactly with a slightly smaller step."""
    trajectory = simulate(ModulationState.zeros(_X_GRID), _STABLE, StepperConfig(dt=0.3, t_end=1.0))
    assert trajectory.steps == 4
    assert trajectory.times[-1] == pytest.approx(1.0, abs=1e-12)


def test_modulation_zero_is_preserved():
    trajectory = simulate(
        ModulationState.zeros(_X_GRID), _MARGINAL, StepperConfig(dt=0.1, t_end=20.0, record_stride=50)
    )
    assert max(state.sup() for state in trajectory.states) <= 1e-10


def test_wave_train_survives_one_rotation():
    """One period 2 pi / |Omega0| of the wave train, compared with the exact rotation."""
    period = 2.0 * np.pi / abs(_STABLE.Omega0)
    trajectory = simulate(wave_train(_STABLE, _LAB), _STABLE, StepperConfig(dt=period / 5000, t_end=period))
    exact = wave_train(_STABLE, _LAB, trajectory.times[-1]).psi.physical()
    drift = np.max(np.abs(trajectory.final.psi.physical() - exact)) / _STABLE.psi0
    assert drift <= 1e-8


def test_wave_train_over_many_steps():
    trajectory = simulate(wave_train(_STABLE, _LAB), _STABLE, StepperConfig(dt=0.005, t_end=50.0, record_stride=2500))
    assert trajectory.steps == 10000
    for t, state in zip(trajectory.times, trajectory.states):
        exact = wave_train(_STABLE, _LAB, t).psi.physical()
        assert np.max(np.abs(state.psi.physical() - exact)) <= 1e-7


def test_homogeneous_amplitude_follows_the_logistic_law():
    """A spatially constant Psi solves |Psi|' = |Psi| (1 - |Psi|^2)."""
    a0, t_end = 0.1, 2.0
    initial = CGLField.from_physical(_LAB, np.full(_LAB.n, a0, dtype=complex))
    final = simulate(initial, _STABLE, StepperConfig(dt=0.005, t_end=t_end)).final
    growth = np.exp(2.0 * t_end)
    exact = np.sqrt(a0 ** 2 * growth / (1.0 + a0 ** 2 * (growth - 1.0)))
    assert np.max(np.abs(np.abs(final.psi.physical()) - exact)) <= 1e-8


@pytest.mark.parametrize("mode", [1, 2, 3, 4])
def test_single_mode_grows_at_the_symbol_rate(mode):
    """A tiny eigenvector of the (psi, s) symbol evolves as exp(lambda t)."""
    k = mode * _X_GRID.dk
    values, vectors = np.linalg.eig(eval_symbol_v(_STABLE, k))
    top = int(np.argmax(values.real))
    lam, vector = values[top], 1e-6 * vectors[:, top]
    stack = np.zeros((2, _X_GRID.n), dtype=complex)
    stack[:, mode] = vector
    stack[:, -mode] = np.conj(vector)
    initial = ModulationState.from_stack(_X_GRID, stack)
    t_end = 1.0
    final = simulate(initial, _STABLE, StepperConfig(dt=0.01, t_end=t_end)).final
    ratio = final.psi_w.coeffs[mode] / initial.psi_w.coeffs[mode]
    assert abs(ratio - np.exp(lam * t_end)) <= 1e-6 * abs(np.exp(lam * t_end))


def test_linear_step_is_the_matrix_exponential():
    """Without the nonlinearity one ETD step is exp(dt L(k)) mode by mode."""
    dt = 0.05
    system = dataclasses.replace(modulation_system(_STABLE, _X_GRID), nonlinear=lambda stack: np.zeros_like(stack))
    initial = _smooth_state(_X_GRID, 0.2)
    stepped = step(initial, StepperConfig(dt=dt, t_end=dt), system).stack()
    before = initial.stack()
    expected = np.zeros_like(before)
    for j, k in enumerate(_X_GRID.wavenumbers):
        expected[:, j] = linalg.expm(dt * eval_symbol_v(_STABLE, k)) @ before[:, j]
    assert np.max(np.abs(stepped - expected)) <= 1e-12 * np.max(np.abs(before))


def test_etd_rk4_self_convergence():
    """Halving dt divides the error against a fine reference by at least 8."""
    initial = _smooth_state(SpectralGrid(32, 4.0 * np.pi), 0.3)

    def final(dt):
        return simulate(initial, _STABLE, StepperConfig(dt=dt, t_end=1.0)).final

    reference = final(0.0125)
    coarse = (final(0.1) - reference).sup()
    fine = (final(0.05) - reference).sup()
    assert coarse / fine >= 8.0


def test_imex_agrees_with_etd():
    initial = _smooth_state(SpectralGrid(32, 4.0 * np.pi), 0.1)
    etd = simulate(initial, _STABLE, StepperConfig(dt=0.01, t_end=0.5)).final
    imex = simulate(initial, _STABLE, StepperConfig(dt=0.001, t_end=0.5, scheme=Scheme.IMEX_BDF2)).final
    assert (etd - imex).sup() <= 1e-4


def test_guard_trip_is_recorded_or_raised():
    grid = SpectralGrid(32, 2.0 * np.pi)
    big = ModulationState(SpectralField.from_physical(grid, 2.5 * np.cos(grid.x)), SpectralField.zeros(grid))
    config = StepperConfig(dt=0.001, t_end=1.0)

    trajectory = simulate(big, _STABLE, config, stop_on_guard=False)
    assert trajectory.guard_tripped
    assert trajectory.guard_time == pytest.approx(0.001)
    assert len(trajectory) == 2

    with pytest.raises(EckhausKdVException) as info:
        simulate(big, _STABLE, config)
    assert info.value.category == "NumericalInstabilityError"
    assert info.value.time == pytest.approx(0.001)


def test_oversized_step_is_rejected():
    """dt * max Re(lambda) above the ETD limit: the CGL linear part grows at rate 1 at k = 0."""
    with pytest.raises(EckhausKdVException) as info:
        simulate(wave_train(_STABLE, _LAB), _STABLE, StepperConfig(dt=10.0, t_end=10.0))
    assert info.value.category == "NumericalInstabilityError"
    assert info.value.exit_code == 3


def test_phase_tracker_of_a_resting_state():
    trajectory = simulate(
        ModulationState.zeros(_X_GRID), _STABLE, StepperConfig(dt=0.1, t_end=1.0, record_stride=2), phase_track=0.0
    )
    assert trajectory.phase is not None
    assert len(trajectory.phase) == len(trajectory)
    assert np.all(trajectory.phase == 0.0)


# ---------------------------------------------------------------- coordinate chain


def test_zero_modulation_builds_the_wave_train():
    field = build_modulated_cgl(_STABLE, ModulationState.zeros(_X_GRID))
    exact = wave_train(_STABLE, field.grid).psi.physical()
    assert np.max(np.abs(field.psi.physical() - exact)) <= 1e-13


def test_constant_s_scales_the_amplitude():
    s0 = 0.1
    v = ModulationState(SpectralField.zeros(_X_GRID), _constant(_X_GRID, s0))
    field = build_modulated_cgl(_STABLE, v)
    assert np.allclose(np.abs(field.psi.physical()), _STABLE.psi0 * np.exp(s0), rtol=1e-12)


def test_lab_grid_holds_the_carrier():
    grid = cgl_grid_for(_STABLE, _X_GRID)
    assert grid.length == pytest.approx(_X_GRID.length / _STABLE.zeta)
    assert grid.n >= _X_GRID.n
    assert grid.n & (grid.n - 1) == 0


@pytest.mark.parametrize("t", [0.0, 0.7])
def test_build_then_extract(t):
    v = _smooth_state(SpectralGrid(64, 8.0 * np.pi), 0.01)
    field = build_modulated_cgl(_STABLE, v, X0=1.0, t=t, phase=0.4)
    recovered, masked = extract_modulation(_STABLE, field, t, v.grid)
    assert masked == 0
    assert (recovered - v).sup() <= 1e-8


def test_global_phase_of_a_rotated_wave_train():
    field = build_modulated_cgl(_STABLE, ModulationState.zeros(_X_GRID), X0=2.0, phase=0.4)
    assert global_phase(_STABLE, field, 2.0, 0.0) == pytest.approx(0.4, abs=1e-12)


def test_fractional_winding_is_rejected():
    v = ModulationState(_constant(_X_GRID, 0.1), SpectralField.zeros(_X_GRID))
    with pytest.raises(EckhausKdVException) as info:
        build_modulated_cgl(_STABLE, v)
    assert info.value.category == "ZeroModePolicyError"
    dropped = build_modulated_cgl(_STABLE, v, zero_mode="drop")
    assert np.allclose(np.abs(dropped.psi.physical()), _STABLE.psi0, rtol=1e-12)


def test_cgl_run_matches_the_modulation_run():
    """The CGL solution seen through the extraction map is the (psi, s) solution."""
    params = _MARGINAL
    x_grid = SpectralGrid(64, 8.0 * np.pi)
    v0 = _smooth_state(x_grid, 1e-3)
    t_end, dt = 1.0, 0.01

    modulation = simulate(v0, params, StepperConfig(dt=dt, t_end=t_end)).final
    z2 = params.zeta ** 2
    lab = simulate(build_modulated_cgl(params, v0), params, StepperConfig(dt=dt / z2, t_end=t_end / z2)).final
    extracted, _ = extract_modulation(params, lab, t_end, x_grid)
    assert (extracted - modulation).sup() <= 1e-5
