"""Pseudospectral time integration of the CGL equation and the modulation system.

A run is described by an :class:`EvolutionSystem`: a diagonalisable linear
part (eigenvalues per mode and the transforms into eigen-coordinates), a
nonlinear tendency on coefficient stacks and a blow-up guard. Steppers treat
the linear part exactly (ETD-RK4) or implicitly (IMEX-BDF2) in the
eigen-coordinates; for the (psi, s) system these are Z = S_diag S_theta V, so
the third-derivative coupling of L never enters the explicit part.
"""
import sys
import time
from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np

from eckhaus_kdv.components.fourier_core import (
    FieldPair,
    SpectralField,
    SpectralGrid,
    antiderivative,
    apply_matrix_multiplier,
    check_same_grid,
    point_values,
    realify,
    s_diag_symbols,
)
from eckhaus_kdv.components.spectral_analysis import eval_dispersion, eval_symbol_v
from eckhaus_kdv.constants import (
    AMPLITUDE_MASK_THRESHOLD,
    CGL_BLOWUP_GUARD,
    ETD_CONTOUR_POINTS,
    ETD_MAX_GROWTH,
    IMEX_MAX_GROWTH,
    MODULATION_BLOWUP_GUARD,
    WINDING_TOL,
)
from eckhaus_kdv.entity.artifact_entity import Trajectory
from eckhaus_kdv.entity.config_entity import Scheme, StepperConfig
from eckhaus_kdv.entity.params import CGLParams
from eckhaus_kdv.exception import (
    EckhausKdVException,
    GridMismatchError,
    NumericalInstabilityError,
    ParameterDomainError,
    ZeroModePolicyError,
)
from eckhaus_kdv.logger import logging


@dataclass(frozen=True)
class ModulationState:
    """V = (psi, s) on the co-moving x-grid."""

    psi_w: SpectralField
    s: SpectralField

    def __post_init__(self):
        check_same_grid(self.psi_w.grid, self.s.grid)
        if not (self.psi_w.is_real and self.s.is_real):
            raise EckhausKdVException("modulation fields must be real", sys)

    @property
    def grid(self) -> SpectralGrid:
        return self.psi_w.grid

    @classmethod
    def zeros(cls, grid: SpectralGrid) -> "ModulationState":
        return cls(SpectralField.zeros(grid), SpectralField.zeros(grid))

    @classmethod
    def from_stack(cls, grid: SpectralGrid, coeffs: np.ndarray) -> "ModulationState":
        coeffs = realify(coeffs, grid)
        return cls(SpectralField(grid, coeffs[0]), SpectralField(grid, coeffs[1]))

    def stack(self) -> np.ndarray:
        return np.stack([self.psi_w.coeffs, self.s.coeffs])

    def as_pair(self) -> FieldPair:
        return FieldPair(self.psi_w, self.s)

    def sup(self) -> float:
        return max(self.psi_w.sup(), self.s.sup())

    def resample(self, grid: SpectralGrid) -> "ModulationState":
        return ModulationState(self.psi_w.resample(grid), self.s.resample(grid))

    def translate(self, dx: float) -> "ModulationState":
        return ModulationState(self.psi_w.translate(dx), self.s.translate(dx))

    def __sub__(self, other: "ModulationState") -> "ModulationState":
        return ModulationState(self.psi_w - other.psi_w, self.s - other.s)

    def __add__(self, other: "ModulationState") -> "ModulationState":
        return ModulationState(self.psi_w + other.psi_w, self.s + other.s)


@dataclass(frozen=True)
class CGLField:
    """Psi(X) on the lab-frame X-grid."""

    psi: SpectralField

    def __post_init__(self):
        if self.psi.is_real:
            object.__setattr__(self, "psi", SpectralField(self.psi.grid, self.psi.coeffs, is_real=False))

    @property
    def grid(self) -> SpectralGrid:
        return self.psi.grid

    @classmethod
    def from_physical(cls, grid: SpectralGrid, values: np.ndarray) -> "CGLField":
        return cls(SpectralField.from_physical(grid, np.asarray(values, dtype=complex), is_real=False))

    @classmethod
    def zeros(cls, grid: SpectralGrid) -> "CGLField":
        return cls(SpectralField.zeros(grid, is_real=False))

    def sup(self) -> float:
        return self.psi.sup()


@dataclass(frozen=True)
class LinearPart:
    """Per-mode eigenvalues (components, n) and optional 2x2 eigen-transforms (n, c, c)."""

    eigenvalues: np.ndarray
    to_eigen: Optional[np.ndarray] = None
    from_eigen: Optional[np.ndarray] = None
    label: str = ""

    @property
    def max_growth(self) -> float:
        return float(np.max(self.eigenvalues.real))

    def forward(self, coeffs: np.ndarray) -> np.ndarray:
        if self.to_eigen is None:
            return coeffs
        return np.einsum("kij,jk->ik", self.to_eigen, coeffs)

    def inverse(self, coeffs: np.ndarray) -> np.ndarray:
        if self.from_eigen is None:
            return coeffs
        return np.einsum("kij,jk->ik", self.from_eigen, coeffs)


@dataclass(frozen=True)
class EvolutionSystem:
    grid: SpectralGrid
    linear: LinearPart
    nonlinear: Callable[[np.ndarray], np.ndarray]
    pack: Callable[[object], np.ndarray]
    unpack: Callable[[np.ndarray], object]
    guard: Callable[[np.ndarray], Optional[str]]
    label: str


def _contour_means(lam_dt: np.ndarray, n_points: int):
    """phi-function combinations of ETD-RK4 by the trapezoidal rule on circles around lam_dt."""
    roots = np.exp(2j * np.pi * (np.arange(n_points) + 0.5) / n_points)
    lr = lam_dt[..., None] + roots
    e = np.exp(lr)
    q = np.mean((np.exp(0.5 * lr) - 1.0) / lr, axis=-1)
    f1 = np.mean((-4.0 - lr + e * (4.0 - 3.0 * lr + lr ** 2)) / lr ** 3, axis=-1)
    f2 = np.mean((2.0 + lr + e * (lr - 2.0)) / lr ** 3, axis=-1)
    f3 = np.mean((-4.0 - 3.0 * lr - lr ** 2 + e * (4.0 - lr)) / lr ** 3, axis=-1)
    return q, f1, f2, f3


def _check_growth(system: EvolutionSystem, dt: float, limit: float, scheme: str) -> None:
    growth = dt * system.linear.max_growth
    if growth > limit:
        raise NumericalInstabilityError(
            f"{scheme}: dt*max Re(lambda) = {growth:.6g} exceeds {limit} for {system.label}", sys
        )


class ETDRK4Stepper:
    """Fourth-order exponential time differencing in eigen-coordinates."""

    def __init__(self, system: EvolutionSystem, dt: float, n_contour: int = ETD_CONTOUR_POINTS):
        _check_growth(system, dt, ETD_MAX_GROWTH, Scheme.ETD_RK4.value)
        self.system = system
        self.dt = dt
        lam_dt = dt * system.linear.eigenvalues
        self.exp_full = np.exp(lam_dt)
        self.exp_half = np.exp(0.5 * lam_dt)
        q, f1, f2, f3 = _contour_means(lam_dt, n_contour)
        self.coeff_q = dt * q
        self.coeff_f1 = dt * f1
        self.coeff_f2 = dt * f2
        self.coeff_f3 = dt * f3

    def _tendency(self, z: np.ndarray) -> np.ndarray:
        linear = self.system.linear
        return linear.forward(self.system.nonlinear(linear.inverse(z)))

    def advance(self, z: np.ndarray) -> np.ndarray:
        n_0 = self._tendency(z)
        z_1 = self.exp_half * z + self.coeff_q * n_0
        n_1 = self._tendency(z_1)
        z_2 = self.exp_half * z + self.coeff_q * n_1
        n_2 = self._tendency(z_2)
        z_3 = self.exp_half * z_1 + self.coeff_q * (2.0 * n_2 - n_0)
        n_3 = self._tendency(z_3)
        return (
            self.exp_full * z
            + self.coeff_f1 * n_0
            + 2.0 * self.coeff_f2 * (n_1 + n_2)
            + self.coeff_f3 * n_3
        )


class IMEXBDF2Stepper:
    """Implicit BDF2 for the linear part, extrapolated nonlinearity; IMEX-Euler start."""

    def __init__(self, system: EvolutionSystem, dt: float):
        _check_growth(system, dt, IMEX_MAX_GROWTH, Scheme.IMEX_BDF2.value)
        self.system = system
        self.dt = dt
        self.lam = system.linear.eigenvalues
        self._previous = None

    def _tendency(self, z: np.ndarray) -> np.ndarray:
        linear = self.system.linear
        return linear.forward(self.system.nonlinear(linear.inverse(z)))

    def advance(self, z: np.ndarray) -> np.ndarray:
        dt = self.dt
        n_now = self._tendency(z)
        if self._previous is None:
            z_next = (z + dt * n_now) / (1.0 - dt * self.lam)
        else:
            z_prev, n_prev = self._previous
            z_next = (4.0 * z - z_prev + 2.0 * dt * (2.0 * n_now - n_prev)) / (3.0 - 2.0 * dt * self.lam)
        self._previous = (z, n_now)
        return z_next


def make_stepper(system: EvolutionSystem, dt: float, scheme: Scheme):
    if Scheme(scheme) == Scheme.ETD_RK4:
        return ETDRK4Stepper(system, dt)
    return IMEXBDF2Stepper(system, dt)


def _mask(grid: SpectralGrid, dealias: bool) -> np.ndarray:
    return grid.dealias_mask if dealias else np.ones(grid.n, dtype=bool)


# ---------------------------------------------------------------- modulation system


def _h(s):
    return np.expm1(2.0 * s) - 2.0 * s


def modulation_nonlinearity(params: CGLParams, grid: SpectralGrid, dealias: bool):
    ik = 1j * grid.wavenumbers
    mask = _mask(grid, dealias)
    a, b, sigma = params.alpha, params.beta, params.sigma

    def nonlinear(stack: np.ndarray) -> np.ndarray:
        psi_hat = stack[0] * mask
        s_hat = stack[1] * mask
        psi = grid.to_values(psi_hat).real
        s = grid.to_values(s_hat).real
        sx = grid.to_values(ik * s_hat).real
        h = _h(s)
        flux = a * sx ** 2 - sigma * b * h - a * psi ** 2 + 2.0 * psi * sx
        second = sx ** 2 - sigma * h - psi ** 2 - 2.0 * a * psi * sx
        out = np.stack([ik * grid.to_coeffs(flux), grid.to_coeffs(second)]) * mask
        return realify(out, grid)

    return nonlinear


def modulation_linear_part(params: CGLParams, grid: SpectralGrid) -> LinearPart:
    k = grid.wavenumbers
    sample = eval_dispersion(params, k)
    forward, inverse = s_diag_symbols(params, k)
    weight = np.minimum(1.0, 1.0 / np.maximum(np.abs(k), 1e-300))
    to_eigen = forward.copy()
    to_eigen[:, :, 0] *= weight[:, None]
    from_eigen = inverse.copy()
    from_eigen[:, 0, :] /= weight[:, None]
    return LinearPart(
        eigenvalues=np.stack([sample.lambda_plus, sample.lambda_minus]),
        to_eigen=to_eigen,
        from_eigen=from_eigen,
        label="lambda_+-",
    )


def _modulation_guard(grid: SpectralGrid):
    def guard(stack: np.ndarray) -> Optional[str]:
        sup_psi = float(np.max(np.abs(grid.to_values(stack[0]).real)))
        sup_s = float(np.max(np.abs(grid.to_values(stack[1]).real)))
        if sup_psi > MODULATION_BLOWUP_GUARD or sup_s > MODULATION_BLOWUP_GUARD:
            return f"blow-up guard: sup|psi|={sup_psi:.6g}, sup|s|={sup_s:.6g}"
        return None

    return guard


def modulation_system(params: CGLParams, grid: SpectralGrid, dealias: bool = True) -> EvolutionSystem:
    return EvolutionSystem(
        grid=grid,
        linear=modulation_linear_part(params, grid),
        nonlinear=modulation_nonlinearity(params, grid, dealias),
        pack=lambda state: state.stack(),
        unpack=lambda coeffs: ModulationState.from_stack(grid, coeffs),
        guard=_modulation_guard(grid),
        label=f"modulation system (n={grid.n}, L={grid.length:.6g})",
    )


def rhs_modulation_V(params: CGLParams, v: ModulationState, dealias: bool = True) -> ModulationState:
    """LV + N(V) with L applied as the 2x2 symbol of the (psi, s) system."""
    message = _modulation_guard(v.grid)(v.stack())
    if message:
        raise NumericalInstabilityError(message, sys)
    linear = apply_matrix_multiplier(lambda k: eval_symbol_v(params, k), v.as_pair())
    nonlinear = modulation_nonlinearity(params, v.grid, dealias)(v.stack())
    return ModulationState.from_stack(v.grid, linear.stack() + nonlinear)


def _phase_rate(params: CGLParams, psi, psi_x, s, s_x, s_xx):
    """d_t phi in the co-moving frame, pointwise: first row of L U + N(U) with phi_x = psi."""
    a, b, sigma = params.alpha, params.beta, params.sigma
    linear = psi_x + (params.c - 2.0 * a) * psi + a * s_xx + 2.0 * s_x - 2.0 * sigma * b * s
    nonlinear = a * s_x ** 2 - sigma * b * _h(s) - a * psi ** 2 + 2.0 * psi * s_x
    return linear + nonlinear


def rhs_modulation_U(params: CGLParams, phi: SpectralField, s: SpectralField, dealias: bool = True) -> FieldPair:
    """Tendency of U = (phi, s); the s row coincides with the one of the (psi, s) system."""
    check_same_grid(phi.grid, s.grid)
    grid = phi.grid
    psi = phi.derivative()
    rate = _phase_rate(
        params,
        psi.physical(),
        psi.derivative().physical(),
        s.physical(),
        s.derivative().physical(),
        s.derivative(2).physical(),
    )
    v_rate = rhs_modulation_V(params, ModulationState(psi, s), dealias)
    return FieldPair(SpectralField.from_physical(grid, rate), v_rate.s)


def _phase_tracker(params: CGLParams, grid: SpectralGrid, x0: float):
    ik = 1j * grid.wavenumbers

    def rate(stack: np.ndarray) -> float:
        rows = np.stack([stack[0], ik * stack[0], stack[1], ik * stack[1], ik ** 2 * stack[1]])
        return float(_phase_rate(params, *point_values(grid, rows, x0)))

    return rate


# ---------------------------------------------------------------- CGL equation


def cgl_linear_part(params: CGLParams, grid: SpectralGrid) -> LinearPart:
    k = grid.wavenumbers
    return LinearPart(eigenvalues=(-(1.0 + 1j * params.alpha) * k ** 2 + 1.0)[None, :], label="CGL")


def _cgl_nonlinearity(params: CGLParams, grid: SpectralGrid, dealias: bool):
    mask = _mask(grid, dealias)
    factor = -(1.0 + 1j * params.beta)

    def nonlinear(stack: np.ndarray) -> np.ndarray:
        u = grid.to_values(stack[0] * mask)
        return (grid.to_coeffs(factor * u * np.abs(u) ** 2) * mask)[None, :]

    return nonlinear


def _cgl_guard(grid: SpectralGrid):
    def guard(stack: np.ndarray) -> Optional[str]:
        sup = float(np.max(np.abs(grid.to_values(stack[0]))))
        return f"blow-up guard: sup|Psi|={sup:.6g}" if sup > CGL_BLOWUP_GUARD else None

    return guard


def cgl_system(params: CGLParams, grid: SpectralGrid, dealias: bool = True) -> EvolutionSystem:
    return EvolutionSystem(
        grid=grid,
        linear=cgl_linear_part(params, grid),
        nonlinear=_cgl_nonlinearity(params, grid, dealias),
        pack=lambda field: field.psi.coeffs[None, :],
        unpack=lambda coeffs: CGLField(SpectralField(grid, coeffs[0], is_real=False)),
        guard=_cgl_guard(grid),
        label=f"CGL (n={grid.n}, L={grid.length:.6g})",
    )


def rhs_cgl(params: CGLParams, u: CGLField, dealias: bool = True) -> CGLField:
    """(1 + i alpha) Psi_XX + Psi - (1 + i beta) Psi |Psi|^2."""
    message = _cgl_guard(u.grid)(u.psi.coeffs[None, :])
    if message:
        raise NumericalInstabilityError(message, sys)
    system = cgl_system(params, u.grid, dealias)
    stack = system.pack(u)
    tendency = system.linear.eigenvalues * stack + system.nonlinear(stack)
    return system.unpack(tendency)


# ---------------------------------------------------------------- driver


def evolution_system(initial, params: CGLParams, dealias: bool = True) -> EvolutionSystem:
    if isinstance(initial, ModulationState):
        return modulation_system(params, initial.grid, dealias)
    if isinstance(initial, CGLField):
        return cgl_system(params, initial.grid, dealias)
    raise ParameterDomainError(f"no evolution system for {type(initial).__name__}", sys)


def _step_count(config: StepperConfig) -> Tuple[int, float]:
    if config.t_end < 0.0 or config.dt <= 0.0:
        raise ParameterDomainError(f"need t_end >= 0 and dt > 0, got t_end={config.t_end}, dt={config.dt}", sys)
    n_steps = int(round(config.t_end / config.dt))
    if abs(n_steps * config.dt - config.t_end) <= 1e-9 * max(1.0, config.t_end):
        return n_steps, config.dt
    n_steps = int(np.ceil(config.t_end / config.dt))
    dt = config.t_end / n_steps
    logging.info(f"t_end={config.t_end} is not a multiple of dt={config.dt}; using dt={dt:.17g}")
    return n_steps, dt


def step(state, config: StepperConfig, system: EvolutionSystem):
    """One step of size config.dt (IMEX-BDF2 takes its IMEX-Euler start step)."""
    stepper = make_stepper(system, config.dt, config.scheme)
    coeffs = system.linear.inverse(stepper.advance(system.linear.forward(system.pack(state))))
    if not np.all(np.isfinite(coeffs)):
        raise NumericalInstabilityError(f"non-finite coefficients in {system.label} at t={config.dt:.6g}", sys, time=config.dt)
    return system.unpack(coeffs)


def simulate(
    initial,
    params: CGLParams,
    config: StepperConfig,
    system: Optional[EvolutionSystem] = None,
    phase_track: Optional[float] = None,
    stop_on_guard: bool = True,
) -> Trajectory:
    """
    Method Name :   simulate
    Description :   Integrates ``initial`` up to config.t_end, recording every
                    record_stride steps (and the final step). With
                    ``phase_track`` set to a co-moving position x0, the global
                    phase phi(x0, t) of a modulation run is integrated alongside
                    by the trapezoidal rule. With ``stop_on_guard=False`` a
                    blow-up guard trip ends the run and is recorded instead of
                    raised.

    Output      :   Trajectory artifact
    On Failure  :   NumericalInstabilityError with the time of detection
    """
    try:
        system = system or evolution_system(initial, params, config.dealias)
        n_steps, dt = _step_count(config)
        stepper = make_stepper(system, dt, config.scheme)
        stride = max(1, int(config.record_stride))
        tracker = _phase_tracker(params, system.grid, phase_track) if phase_track is not None else None

        coeffs = system.pack(initial)
        z = system.linear.forward(coeffs)
        times, states = [0.0], [initial]
        phase_value = 0.0
        phases = [0.0]
        rate_old = tracker(coeffs) if tracker else None
        guard_tripped, guard_time = False, None
        taken = 0
        start = time.perf_counter()

        for i in range(n_steps):
            z = stepper.advance(z)
            taken += 1
            t = (i + 1) * dt
            coeffs = system.linear.inverse(z)
            if not np.all(np.isfinite(coeffs)):
                raise NumericalInstabilityError(f"non-finite coefficients in {system.label} at t={t:.6g}", sys, time=t)
            message = system.guard(coeffs)
            if tracker:
                rate_new = tracker(coeffs)
                phase_value += 0.5 * dt * (rate_old + rate_new)
                rate_old = rate_new
            if message:
                if stop_on_guard:
                    raise NumericalInstabilityError(f"{message} in {system.label} at t={t:.6g}", sys, time=t)
                logging.warning(f"{message} in {system.label} at t={t:.6g}; run stopped")
                guard_tripped, guard_time = True, t
                times.append(t)
                states.append(system.unpack(coeffs))
                phases.append(phase_value)
                break
            if (i + 1) % stride == 0 or i + 1 == n_steps:
                times.append(t)
                states.append(system.unpack(coeffs))
                phases.append(phase_value)

        trajectory = Trajectory(
            times=np.asarray(times),
            states=states,
            steps=taken,
            wall_time=time.perf_counter() - start,
            guard_tripped=guard_tripped,
            guard_time=guard_time,
            phase=np.asarray(phases) if tracker else None,
        )
        logging.info(
            f"simulated {system.label}: {trajectory.steps} steps of dt={dt:.6g}, "
            f"{len(trajectory)} records, {trajectory.wall_time:.3f}s"
        )
        return trajectory
    except Exception as e:
        raise EckhausKdVException(e, sys) from e


# ---------------------------------------------------------------- coordinate chain


def _require_positive_zeta(params: CGLParams) -> None:
    if params.zeta <= 0.0:
        raise ParameterDomainError(f"the co-moving map is written for zeta > 0, got zeta={params.zeta}", sys)


def _next_pow2(value: float) -> int:
    return int(2 ** int(np.ceil(np.log2(max(value, 4.0)))))


def cgl_grid_for(params: CGLParams, x_grid: SpectralGrid) -> SpectralGrid:
    """Lab-frame grid of length L_x/zeta holding the carrier and the modulation band alias-free."""
    _require_positive_zeta(params)
    carrier_mode = x_grid.length / (2.0 * np.pi)
    n = _next_pow2(max(9.0 * carrier_mode, 3.0 * (carrier_mode + x_grid.n / 2) + 1.0, x_grid.n))
    return SpectralGrid(n, x_grid.length / params.zeta)


def wave_train(params: CGLParams, grid: SpectralGrid, T: float = 0.0) -> CGLField:
    """Psi_per = Psi0 exp(i(zeta X + Omega0 T)) sampled on a periodic grid."""
    winding = params.zeta * grid.length / (2.0 * np.pi)
    if abs(winding - round(winding)) > 1e-9 * max(1.0, abs(winding)):
        raise GridMismatchError(
            f"carrier exp(i zeta X) is not periodic on L={grid.length}: zeta L / 2pi = {winding:.12g}", sys
        )
    values = params.psi0 * np.exp(1j * (params.zeta * grid.x + params.Omega0 * T))
    return CGLField.from_physical(grid, values)


def _check_lab_grid(params: CGLParams, grid: SpectralGrid, x_grid: SpectralGrid) -> SpectralGrid:
    if abs(grid.length * params.zeta - x_grid.length) > 1e-9 * x_grid.length:
        raise GridMismatchError(
            f"lab grid L_X={grid.length} does not match L_x/zeta={x_grid.length / params.zeta}", sys
        )
    return SpectralGrid(grid.n, x_grid.length)


def build_modulated_cgl(
    params: CGLParams,
    v: ModulationState,
    X0: float = 0.0,
    t: float = 0.0,
    phase: float = 0.0,
    zero_mode: str = "reject",
    grid: Optional[SpectralGrid] = None,
) -> CGLField:
    """
    Method Name :   build_modulated_cgl
    Description :   Psi(X,T) = Psi_per(X,T) exp(s + i int_{x0}^{x} psi + i phase) with
                    x = zeta X - c t, t = zeta^2 T and x0 the co-moving image of X0.
                    The mean of psi must be an integer winding ("reject") or is
                    removed ("drop").

    Output      :   CGLField on the lab-frame grid
    On Failure  :   ZeroModePolicyError, GridMismatchError
    """
    try:
        _require_positive_zeta(params)
        x_grid = v.grid
        grid = grid or cgl_grid_for(params, x_grid)
        y_grid = _check_lab_grid(params, grid, x_grid)

        primitive, mean = antiderivative(v.psi_w)
        if zero_mode not in ("reject", "drop"):
            raise ParameterDomainError(f"zero_mode policy must be 'reject' or 'drop', got {zero_mode!r}", sys)
        winding = mean * x_grid.length / (2.0 * np.pi)
        if zero_mode == "reject" and abs(winding - round(winding)) > WINDING_TOL:
            raise ZeroModePolicyError(f"mean(psi)={mean:.6g} gives a non-integer winding {winding:.6g}", sys)
        if zero_mode == "drop" and mean != 0.0:
            logging.warning(f"dropping mean(psi)={mean:.6g} before reconstruction")
            mean = 0.0

        shift = params.c * t
        s_lab = v.s.resample(y_grid).translate(shift).physical()
        primitive_lab = primitive.resample(y_grid).translate(shift).physical()
        x_lab = y_grid.x - shift
        x0 = params.zeta * X0 - shift
        total_phase = phase + primitive_lab - primitive.at(x0) + mean * (x_lab - x0)

        carrier = wave_train(params, grid, T=t / params.zeta ** 2).psi.physical()
        return CGLField.from_physical(grid, carrier * np.exp(s_lab + 1j * total_phase))
    except Exception as e:
        raise EckhausKdVException(e, sys) from e


def extract_modulation(
    params: CGLParams,
    field: CGLField,
    t: float,
    x_grid: SpectralGrid,
    threshold: float = AMPLITUDE_MASK_THRESHOLD,
) -> Tuple[ModulationState, int]:
    """Inverse of build_modulated_cgl up to the global phase.

    s = log|Psi| - r0 and psi = (Im(Psi_X / Psi) - zeta) / zeta, so no phase
    unwrapping is needed. Points with |Psi| < threshold are masked (set to 0)
    and counted.
    """
    try:
        _require_positive_zeta(params)
        y_grid = _check_lab_grid(params, field.grid, x_grid)
        values = field.psi.physical()
        slope = field.psi.derivative().physical()
        amplitude = np.abs(values)
        masked = amplitude < threshold
        if np.any(masked):
            logging.warning(f"{int(masked.sum())} points with |Psi| < {threshold} masked in extraction")
        safe = np.where(masked, 1.0, amplitude)
        s_values = np.where(masked, 0.0, np.log(safe) - params.r0)
        psi_values = np.where(masked, 0.0, ((np.conj(values) * slope).imag / safe ** 2 - params.zeta) / params.zeta)

        shift = params.c * t
        psi_w = SpectralField.from_physical(y_grid, psi_values).translate(-shift).resample(x_grid)
        s = SpectralField.from_physical(y_grid, s_values).translate(-shift).resample(x_grid)
        return ModulationState(psi_w, s), int(masked.sum())
    except Exception as e:
        raise EckhausKdVException(e, sys) from e


def global_phase(params: CGLParams, field: CGLField, X0: float, T: float) -> float:
    """phi at X0: the argument of Psi / Psi_per there, in (-pi, pi]."""
    carrier = params.psi0 * np.exp(1j * (params.zeta * X0 + params.Omega0 * T))
    return float(np.angle(field.psi.at(X0) / carrier))
