"""KdV approximation of the (psi, s) modulation system.

psi_app(x, t) = eps^2 A(eps x, eps^3 t) and s_app = eps^2 B with B slaved to A
through nu0..nu3; A solves the KdV equation

    A_tau = gamma_lin A_xixixi + gamma_non (A^2)_xi.

The x-grid is locked to the xi-grid by L_x = L_xi / eps, so the scaling is a
re-indexing of Fourier modes.
"""
import re
import sys
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence

import numpy as np

from eckhaus_kdv.components.fourier_core import (
    AnalyticNormParams,
    SpectralField,
    SpectralGrid,
    analytic_norm,
    apply_matrix_multiplier,
    hm_norm,
    padded_product,
    real_or_complex,
    realify,
)
from eckhaus_kdv.components.pde_solvers import (
    EvolutionSystem,
    LinearPart,
    ModulationState,
    modulation_nonlinearity,
    simulate,
)
from eckhaus_kdv.components.spectral_analysis import eval_symbol_v
from eckhaus_kdv.constants import (
    DEFAULT_MU_STAR,
    ETA_BOUND_FACTOR,
    ETA_SWEEP,
    KDV_BLOWUP_GUARD,
    MAX_X_POINTS,
    TIME_DERIVATIVE_CHECK_STEP,
    TIME_DERIVATIVE_CHECK_TOL,
)
from eckhaus_kdv.entity.artifact_entity import AnsatzCoefficients, HierarchyTrajectory, ResidualSeries, Trajectory
from eckhaus_kdv.entity.config_entity import CoefficientTableSchema, Scheme, StepperConfig
from eckhaus_kdv.entity.params import CGLParams
from eckhaus_kdv.exception import (
    ConfigValidationError,
    DegenerateCaseError,
    EckhausKdVException,
    GridMismatchError,
    MissingCoefficientTableError,
    NumericalInstabilityError,
    ParameterDomainError,
)
from eckhaus_kdv.logger import logging
from eckhaus_kdv.utils.main_utils import read_yaml_file

PROFILES = ("gaussian-periodic", "cosine", "sech2")


def make_coefficients(params: CGLParams) -> AnsatzCoefficients:
    a, b, sigma = params.alpha, params.beta, params.sigma
    if sigma <= 0.0:
        raise ParameterDomainError(f"sigma={sigma} must be positive", sys)
    if a == b:
        raise DegenerateCaseError(f"alpha = beta = {a}: no KdV scaling (Cahn-Hilliard regime)", sys)
    nu0 = -1.0 / sigma
    nu1 = (2.0 * b / sigma - a) / (2.0 * sigma)
    nu2 = (-1.0 / sigma - 2.0 * b * nu1) / (2.0 * sigma)
    nu3 = (-2.0 / sigma - 1.0) / (2.0 * sigma)
    coeffs = AnsatzCoefficients(
        nu0=nu0,
        nu1=nu1,
        nu2=nu2,
        nu3=nu3,
        gamma_lin=(b - a) * (1.0 + a * b) / (1.0 + b ** 2),
        gamma_non=b - a,
        c=2.0 * (a - b),
        sigma=sigma,
        alpha=a,
        beta=b,
    )
    if 1.0 + a * b > 0.0 and params.epsilon > 0.0:
        logging.debug(
            f"marginal defect {marginal_defect(coeffs):.3e} at eps={params.epsilon} "
            f"(eps^2 = {params.epsilon ** 2:.3e})"
        )
    return coeffs


def marginal_defect(coeffs: AnsatzCoefficients) -> float:
    """1 + 2 nu0 - 2 beta sigma nu1; O(eps^2) in the marginal regime."""
    return 1.0 + 2.0 * coeffs.nu0 - 2.0 * coeffs.beta * coeffs.sigma * coeffs.nu1


def tilde_coefficients(params: CGLParams):
    """The sigma-dependent KdV coefficients of the local-wave-number equation at order eps^5.

    Returns (gamma_lin_tilde, gamma_non_tilde); the first tends to gamma_lin
    as sigma -> sigma_s, the second equals gamma_non for every sigma.
    """
    coeffs = make_coefficients(params)
    a, b, sigma = coeffs.alpha, coeffs.beta, coeffs.sigma
    gamma_lin = a * coeffs.nu0 - 2.0 * b * sigma * coeffs.nu2 + 2.0 * coeffs.nu1
    gamma_non = -(2.0 * b * sigma * coeffs.nu0 ** 2 + a + 2.0 * b * sigma * coeffs.nu3)
    return gamma_lin, gamma_non


# ---------------------------------------------------------------- KdV


@dataclass(frozen=True)
class KdVState:
    a: SpectralField
    mu_A: float = 0.0

    def __post_init__(self):
        if not self.a.is_real:
            raise EckhausKdVException("KdV amplitude must be a real field", sys)

    @property
    def grid(self) -> SpectralGrid:
        return self.a.grid

    def mass(self) -> float:
        return float(self.a.coeffs[0].real * np.sqrt(2.0 * np.pi))

    def momentum(self) -> float:
        return hm_norm(self.a, 0.0) ** 2

    def analytic(self) -> float:
        return analytic_norm(self.a, AnalyticNormParams(mu=self.mu_A))


def kdv_profile(
    name: str,
    grid: SpectralGrid,
    amplitude: float = 1.0,
    width: float = 1.0,
    center: Optional[float] = None,
    mean_free: bool = True,
) -> SpectralField:
    """Named periodic initial conditions; gaussian and sech^2 are wrapped over neighbouring periods."""
    xi = grid.x
    length = grid.length
    center = 0.5 * length if center is None else center
    if name == "gaussian-periodic":
        values = sum(np.exp(-(((xi - center + j * length) / width) ** 2)) for j in range(-3, 4))
    elif name == "sech2":
        values = sum(np.cosh((xi - center + j * length) / width) ** -2 for j in range(-3, 4))
    elif name == "cosine":
        periods = max(1, int(round(length / (2.0 * np.pi * width))))
        values = np.cos(2.0 * np.pi * periods * (xi - center) / length)
    else:
        raise ConfigValidationError(f"unknown profile {name!r}; expected one of {PROFILES}", sys)
    values = amplitude * values
    if mean_free:
        values = values - values.mean()
    return SpectralField.from_physical(grid, values)


def kdv_system(coeffs: AnsatzCoefficients, grid: SpectralGrid, dealias: bool = True) -> EvolutionSystem:
    k = grid.wavenumbers
    ik = 1j * k
    mask = grid.dealias_mask if dealias else np.ones(grid.n, dtype=bool)

    def nonlinear(stack: np.ndarray) -> np.ndarray:
        a = grid.to_values(stack[0] * mask).real
        return realify((coeffs.gamma_non * ik * grid.to_coeffs(a ** 2) * mask)[None, :], grid)

    def guard(stack: np.ndarray) -> Optional[str]:
        sup = float(np.max(np.abs(grid.to_values(stack[0]).real)))
        return f"blow-up guard: sup|A|={sup:.6g}" if sup > KDV_BLOWUP_GUARD else None

    return EvolutionSystem(
        grid=grid,
        linear=LinearPart(eigenvalues=(coeffs.gamma_lin * ik ** 3)[None, :], label="Airy"),
        nonlinear=nonlinear,
        pack=lambda state: state.a.coeffs[None, :],
        unpack=lambda stack: KdVState(SpectralField(grid, realify(stack, grid)[0])),
        guard=guard,
        label=f"KdV (n={grid.n}, L={grid.length:.6g})",
    )


def solve_kdv(
    initial: KdVState,
    coeffs: AnsatzCoefficients,
    t_end: float,
    dt: float,
    record_stride: int = 1,
    scheme: Scheme = Scheme.ETD_RK4,
) -> Trajectory:
    """ETD-RK4 with the Airy term in the exponential; (A^2)_xi dealiased."""
    config = StepperConfig(dt=dt, t_end=t_end, scheme=scheme, dealias=True, record_stride=record_stride)
    trajectory = simulate(initial, None, config, system=kdv_system(coeffs, initial.grid))
    if initial.mu_A:
        trajectory.states = [KdVState(state.a, initial.mu_A) for state in trajectory.states]
    return trajectory


def kdv_tendency(a: SpectralField, coeffs: AnsatzCoefficients) -> SpectralField:
    """A_tau with an alias-free square."""
    return coeffs.gamma_lin * a.derivative(3) + coeffs.gamma_non * padded_product(a, a).derivative()


# ---------------------------------------------------------------- ansatz


def x_grid_for(kdv_grid: SpectralGrid, epsilon: float, refine: int = 1) -> SpectralGrid:
    if epsilon <= 0.0:
        raise ParameterDomainError(f"epsilon={epsilon} must be positive", sys)
    n = kdv_grid.n * refine
    if n > MAX_X_POINTS:
        raise ParameterDomainError(f"x-grid with {n} points exceeds the cap {MAX_X_POINTS}", sys)
    return SpectralGrid(n, kdv_grid.length / epsilon)


def scale_to_x_grid(u: SpectralField, x_grid: SpectralGrid, epsilon: float, factor: float) -> SpectralField:
    """factor * u(eps x) on the x-grid; mode j of u lands on mode j."""
    if abs(x_grid.length * epsilon - u.grid.length) > 1e-9 * u.grid.length or x_grid.n < u.grid.n:
        raise GridMismatchError(
            f"x-grid (n={x_grid.n}, L={x_grid.length}) is not locked to the xi-grid "
            f"(n={u.grid.n}, L={u.grid.length}) at eps={epsilon}",
            sys,
        )
    locked = SpectralGrid(u.grid.n, x_grid.length)
    coeffs = factor * u.coeffs * (locked.scale / u.grid.scale)
    return real_or_complex(locked, coeffs, u.is_real).resample(x_grid)


def slaved_b(a: SpectralField, coeffs: AnsatzCoefficients, epsilon: float, order: int) -> SpectralField:
    b = coeffs.nu0 * a
    if order == 0:
        return b
    refinement = (
        epsilon * coeffs.nu1 * a.derivative()
        + epsilon ** 2 * coeffs.nu2 * a.derivative(2)
        + epsilon ** 2 * coeffs.nu3 * padded_product(a, a)
    )
    return b + refinement


def _check_order(order: int) -> None:
    if order not in (0, 1):
        raise ParameterDomainError(f"ansatz order must be 0 or 1, got {order}", sys)


def ansatz_state(
    a: SpectralField, coeffs: AnsatzCoefficients, params: CGLParams, order: int, x_grid: SpectralGrid
) -> ModulationState:
    _check_order(order)
    eps = params.epsilon
    b = slaved_b(a, coeffs, eps, order)
    return ModulationState(
        scale_to_x_grid(a, x_grid, eps, eps ** 2),
        scale_to_x_grid(b, x_grid, eps, eps ** 2),
    )


def ansatz_time_derivative(
    a: SpectralField, coeffs: AnsatzCoefficients, params: CGLParams, order: int, x_grid: SpectralGrid
) -> ModulationState:
    """d_t V_app through the chain rule, A_tau taken from the KdV right-hand side."""
    eps = params.epsilon
    a_tau = kdv_tendency(a, coeffs)
    b_tau = coeffs.nu0 * a_tau
    if order == 1:
        b_tau = b_tau + (
            eps * coeffs.nu1 * a_tau.derivative()
            + eps ** 2 * coeffs.nu2 * a_tau.derivative(2)
            + 2.0 * eps ** 2 * coeffs.nu3 * padded_product(a, a_tau)
        )
    return ModulationState(
        scale_to_x_grid(a_tau, x_grid, eps, eps ** 5),
        scale_to_x_grid(b_tau, x_grid, eps, eps ** 5),
    )


def build_ansatz_V(
    a_traj: Trajectory,
    coeffs: AnsatzCoefficients,
    params: CGLParams,
    order: int,
    x_grid: Optional[SpectralGrid] = None,
) -> Trajectory:
    """Ansatz trajectory on the x-grid; times converted to t = tau / eps^3."""
    try:
        eps = params.epsilon
        if x_grid is None:
            x_grid = x_grid_for(a_traj.states[0].grid, eps)
        states = [ansatz_state(state.a, coeffs, params, order, x_grid) for state in a_traj.states]
        return Trajectory(
            times=np.asarray(a_traj.times) / eps ** 3,
            states=states,
            steps=a_traj.steps,
            wall_time=a_traj.wall_time,
            guard_tripped=a_traj.guard_tripped,
            guard_time=None if a_traj.guard_time is None else a_traj.guard_time / eps ** 3,
        )
    except Exception as e:
        raise EckhausKdVException(e, sys) from e


def _padded_nonlinearity(params: CGLParams, v: ModulationState) -> ModulationState:
    fine = SpectralGrid(2 * v.grid.n, v.grid.length)
    stack = modulation_nonlinearity(params, fine, dealias=False)(v.resample(fine).stack())
    return ModulationState.from_stack(fine, stack).resample(v.grid)


def modulation_residual(params: CGLParams, v: ModulationState, dv_dt: ModulationState) -> ModulationState:
    """d_t V - L V - N(V)."""
    linear = apply_matrix_multiplier(lambda k: eval_symbol_v(params, k), v.as_pair())
    return dv_dt - ModulationState(linear.first, linear.second) - _padded_nonlinearity(params, v)


def pair_norm(state: ModulationState, norm) -> float:
    return float(np.hypot(norm(state.psi_w), norm(state.s)))


def residual_V(
    a_traj: Trajectory,
    coeffs: AnsatzCoefficients,
    params: CGLParams,
    order: int,
    x_grid: Optional[SpectralGrid] = None,
    m: float = 1.0,
    analytic: AnalyticNormParams = AnalyticNormParams(),
    cross_check: bool = False,
    check_step: float = TIME_DERIVATIVE_CHECK_STEP,
) -> ResidualSeries:
    """
    Method Name :   residual_V
    Description :   sup, H^m and analytic norms of Res(V_app) = d_t V_app - L V_app - N(V_app)
                    at the recorded KdV times. d_t V_app uses the chain rule through the
                    KdV right-hand side; with ``cross_check`` it is compared with a
                    fourth-order difference of the ansatz along KdV steps of
                    ``check_step`` taken from every record.

    Output      :   ResidualSeries with times in t = tau / eps^3
    On Failure  :   NumericalInstabilityError when the two time derivatives disagree
    """
    try:
        _check_order(order)
        eps = params.epsilon
        if x_grid is None:
            x_grid = x_grid_for(a_traj.states[0].grid, eps)
        times = np.asarray(a_traj.times) / eps ** 3
        states = [ansatz_state(s.a, coeffs, params, order, x_grid) for s in a_traj.states]
        rates = [ansatz_time_derivative(s.a, coeffs, params, order, x_grid) for s in a_traj.states]

        sup, hm, an = [], [], []
        for v, dv in zip(states, rates):
            residual = modulation_residual(params, v, dv)
            sup.append(residual.sup())
            hm.append(pair_norm(residual, lambda u: hm_norm(u, m)))
            an.append(pair_norm(residual, lambda u: analytic_norm(u, analytic)))

        derivative_check = (
            _derivative_check(a_traj, coeffs, params, order, x_grid, rates, check_step) if cross_check else None
        )
        logging.info(
            f"residual of the order-{order} ansatz at eps={eps}: max sup={max(sup):.6e}"
            + ("" if derivative_check is None else f", d/dt cross-check {derivative_check:.3e}")
        )
        return ResidualSeries(
            times=times,
            sup=np.asarray(sup),
            hm=np.asarray(hm),
            analytic=np.asarray(an),
            epsilon=eps,
            order=order,
            derivative_check=derivative_check,
        )
    except Exception as e:
        raise EckhausKdVException(e, sys) from e


def _derivative_check(
    a_traj: Trajectory,
    coeffs: AnsatzCoefficients,
    params: CGLParams,
    order: int,
    x_grid: SpectralGrid,
    rates: List[ModulationState],
    step: float,
) -> float:
    """Largest relative gap between the chain-rule rate and a one-sided fourth-order difference.

    The difference uses KdV states re-stepped by ``step`` in tau from every record, so it
    does not depend on the record stride.
    """
    if step <= 0.0:
        raise ParameterDomainError(f"finite-difference step {step} must be positive", sys)
    eps = params.epsilon
    weights = np.array([-25.0, 48.0, -36.0, 16.0, -3.0]) / (12.0 * step)
    worst = 0.0
    for state, rate in zip(a_traj.states, rates):
        path = solve_kdv(KdVState(state.a), coeffs, t_end=4.0 * step, dt=step)
        stacks = [ansatz_state(s.a, coeffs, params, order, x_grid).stack() for s in path.states]
        fd = eps ** 3 * sum(w * stack for w, stack in zip(weights, stacks))
        fd_state = ModulationState.from_stack(x_grid, fd)
        scale = max(rate.sup(), 1e-300)
        worst = max(worst, (fd_state - rate).sup() / scale)
    if worst > TIME_DERIVATIVE_CHECK_TOL:
        raise NumericalInstabilityError(
            f"chain-rule and finite-difference time derivatives disagree by {worst:.3e} "
            f"(> {TIME_DERIVATIVE_CHECK_TOL})",
            sys,
        )
    return worst


# ---------------------------------------------------------------- improved-ansatz hierarchy

_FACTOR = re.compile(r"^([AB])(\d+)$")
_SYMBOLS = ("nu0", "nu1", "nu2", "nu3", "gamma_lin", "gamma_non", "c", "sigma", "sigma_s", "alpha", "beta")


@dataclass(frozen=True)
class ForcingTerm:
    coeff: float
    dx: int
    factors: tuple
    symbols: tuple = ()

    def weight(self, namespace: Dict[str, float]) -> float:
        return self.coeff * float(np.prod([namespace[name] for name in self.symbols]))


class HierarchyCoefficientTable:
    """Forcings f_{A,m} and f_{B,m} of the amplitude hierarchy, read from a YAML document.

    ``forcing.A[m]`` may use A_i for i < m and B_i for i < m; ``forcing.B[j]``
    may use A_i for i <= j and B_i for i < j. An empty list declares a zero
    forcing.
    """

    def __init__(self, a_terms: Dict[int, List[ForcingTerm]], b_terms: Dict[int, List[ForcingTerm]]):
        self.a_terms = dict(sorted(a_terms.items()))
        self.b_terms = dict(sorted(b_terms.items()))
        for m, terms in self.a_terms.items():
            self._validate(terms, level=m, kind="A", max_a=m - 1, max_b=m - 1)
        for j, terms in self.b_terms.items():
            self._validate(terms, level=j, kind="B", max_a=j, max_b=j - 1)

    @staticmethod
    def _validate(terms, level, kind, max_a, max_b):
        for term in terms:
            for name in term.factors:
                match = _FACTOR.match(name)
                if not match:
                    raise ConfigValidationError(f"forcing {kind}{level}: bad factor name {name!r}", sys)
                limit = max_a if match.group(1) == "A" else max_b
                if int(match.group(2)) > limit:
                    raise ConfigValidationError(f"forcing {kind}{level} may not use {name}", sys)
            for symbol in term.symbols:
                if symbol not in _SYMBOLS:
                    raise ConfigValidationError(f"forcing {kind}{level}: unknown symbol {symbol!r}", sys)

    @classmethod
    def from_dict(cls, document: dict) -> "HierarchyCoefficientTable":
        try:
            schema = CoefficientTableSchema.model_validate(document)
        except Exception as e:
            raise ConfigValidationError(f"invalid coefficient table: {e}", sys) from e

        def terms(kind):
            return {
                int(m): [ForcingTerm(t.coeff, t.dx, tuple(t.factors), tuple(t.symbols)) for t in entries]
                for m, entries in schema.forcing.get(kind, {}).items()
            }

        return cls(terms("A"), terms("B"))

    @classmethod
    def from_yaml(cls, file_path: str) -> "HierarchyCoefficientTable":
        return cls.from_dict(read_yaml_file(file_path))

    def require(self, order: int) -> None:
        missing = [m for m in range(1, order + 1) if m not in self.a_terms]
        if missing:
            raise MissingCoefficientTableError(
                f"no forcing f_A for hierarchy levels {missing}; supply a coefficient table for order {order}", sys
            )


@dataclass(frozen=True)
class HierarchyLevel:
    """A_m with its algebraically slaved B_m = f_{B,m} / (2 sigma_s) when the table defines one."""

    index: int
    a_m: SpectralField
    b_m: Optional[SpectralField] = None
    b_forcing: Optional[SpectralField] = None
    sigma_s: Optional[float] = None

    def algebraic_residual(self) -> float:
        if self.b_m is None:
            return 0.0
        return (2.0 * self.sigma_s * self.b_m - self.b_forcing).sup()


def _namespace(coeffs: AnsatzCoefficients, sigma_s: float) -> Dict[str, float]:
    names = dict(coeffs.as_dict())
    names.update(alpha=coeffs.alpha, beta=coeffs.beta, sigma_s=sigma_s)
    return names


def _forcing_coeffs(terms, values: Dict[str, np.ndarray], grid: SpectralGrid, namespace, mask) -> np.ndarray:
    ik = 1j * grid.wavenumbers
    total = np.zeros(grid.n, dtype=complex)
    for term in terms:
        product = np.ones(grid.n)
        for name in term.factors:
            product = product * values[name]
        total += term.weight(namespace) * ik ** term.dx * grid.to_coeffs(product)
    return total * mask


def _slaved_levels(table, a_values, grid, namespace, sigma_s, mask):
    """B_j in increasing j, skipped when a factor is not available."""
    values = {f"A{i}": v for i, v in enumerate(a_values)}
    forcings = {}
    for j, terms in table.b_terms.items():
        if any(name not in values for term in terms for name in term.factors):
            continue
        f_b = _forcing_coeffs(terms, values, grid, namespace, mask)
        forcings[j] = f_b
        values[f"B{j}"] = grid.to_values(f_b / (2.0 * sigma_s)).real
    return values, forcings


def _hierarchy_system(coeffs, grid, table, order, sigma_s) -> EvolutionSystem:
    ik = 1j * grid.wavenumbers
    mask = grid.dealias_mask
    namespace = _namespace(coeffs, sigma_s)

    def nonlinear(stack: np.ndarray) -> np.ndarray:
        a_values = [grid.to_values(row * mask).real for row in stack]
        values, _ = _slaved_levels(table, a_values, grid, namespace, sigma_s, mask)
        out = np.empty_like(stack)
        out[0] = coeffs.gamma_non * ik * grid.to_coeffs(a_values[0] ** 2)
        for m in range(1, order + 1):
            out[m] = 2.0 * coeffs.gamma_non * ik * grid.to_coeffs(a_values[0] * a_values[m])
            out[m] += _forcing_coeffs(table.a_terms[m], values, grid, namespace, mask)
        return realify(out * mask, grid)

    def guard(stack: np.ndarray) -> Optional[str]:
        sup = float(np.max(np.abs(grid.to_values(stack).real)))
        return f"blow-up guard: sup|A_m|={sup:.6g}" if sup > KDV_BLOWUP_GUARD else None

    eigen = np.repeat((coeffs.gamma_lin * ik ** 3)[None, :], order + 1, axis=0)
    return EvolutionSystem(
        grid=grid,
        linear=LinearPart(eigenvalues=eigen, label="Airy hierarchy"),
        nonlinear=nonlinear,
        pack=lambda levels: np.stack([level.a_m.coeffs for level in levels]),
        unpack=lambda stack: realify(stack, grid),
        guard=guard,
        label=f"KdV hierarchy order {order} (n={grid.n})",
    )


def strip_widths(order: int, mu_upper: float, mu_lower: float) -> np.ndarray:
    """mu_{m,0}: the widest strip for A_0, the narrowest for A_order."""
    return mu_upper - (mu_upper - mu_lower) * np.arange(order + 1) / max(order, 1)


def strip_norms(
    times: np.ndarray,
    levels: Sequence[Sequence[HierarchyLevel]],
    mu0: np.ndarray,
    eta: float,
    mu_star: float = DEFAULT_MU_STAR,
):
    """sum_m ||A_m(tau)|| weighted by exp(mu_m(tau)|k|), mu_m(tau) = mu_{m,0} - eta tau.

    The strip is exhausted at the first record where some mu_m(tau) has come down to mu_star.
    """
    mu = mu0[None, :] - eta * np.asarray(times)[:, None]
    norms = np.full(len(times), np.nan)
    exhausted = None
    for i, row in enumerate(levels):
        if np.min(mu[i]) <= mu_star:
            exhausted = float(times[i])
            break
        norms[i] = sum(analytic_norm(level.a_m, AnalyticNormParams(mu=mu[i, m])) for m, level in enumerate(row))
    return mu, norms, exhausted


def hierarchy_extend(
    levels: List[HierarchyLevel],
    coeffs: AnsatzCoefficients,
    order: int,
    table: HierarchyCoefficientTable,
    sigma_s: float,
    t_end: float,
    dt: float,
    eta: float,
    mu_upper: float = 0.5,
    mu_lower: float = 0.1,
    record_stride: int = 1,
    mu_star: float = DEFAULT_MU_STAR,
) -> HierarchyTrajectory:
    """
    Method Name :   hierarchy_extend
    Description :   Integrates A_0 (KdV) jointly with A_1..A_order (linearised KdV with
                    forcing f_{A,m}) and slaves B_j = f_{B,j} / (2 sigma_s). Analytic
                    norms are recorded along the shrinking strips mu_m(tau) until the
                    narrowest one reaches mu_star.

    Output      :   HierarchyTrajectory
    On Failure  :   MissingCoefficientTableError when a level has no forcing table
    """
    try:
        table.require(order)
        if not mu_upper >= mu_lower > mu_star > 0.0:
            raise ParameterDomainError(
                f"strips need mu_upper >= mu_lower > mu_star > 0, got {mu_upper}, {mu_lower}, {mu_star}", sys
            )
        if not levels:
            raise ParameterDomainError("the hierarchy needs at least the KdV level A_0", sys)
        grid = levels[0].a_m.grid
        initial = [levels[m] if m < len(levels) else HierarchyLevel(m, SpectralField.zeros(grid)) for m in range(order + 1)]
        system = _hierarchy_system(coeffs, grid, table, order, sigma_s)
        config = StepperConfig(dt=dt, t_end=t_end, scheme=Scheme.ETD_RK4, dealias=True, record_stride=record_stride)
        trajectory = simulate(initial, None, config, system=system)

        namespace = _namespace(coeffs, sigma_s)
        ones = np.ones(grid.n, dtype=bool)
        recorded = []
        for state in trajectory.states:
            stack = state if isinstance(state, np.ndarray) else system.pack(state)
            a_fields = [real_or_complex(grid, row, True) for row in stack]
            values, forcings = _slaved_levels(table, [a.physical() for a in a_fields], grid, namespace, sigma_s, ones)
            row = []
            for m, a_m in enumerate(a_fields):
                if m in forcings:
                    f_b = real_or_complex(grid, forcings[m], True)
                    row.append(HierarchyLevel(m, a_m, (1.0 / (2.0 * sigma_s)) * f_b, f_b, sigma_s))
                else:
                    row.append(HierarchyLevel(m, a_m, sigma_s=sigma_s))
            recorded.append(row)

        mu0 = strip_widths(order, mu_upper, mu_lower)
        mu, norms, exhausted = strip_norms(trajectory.times, recorded, mu0, eta, mu_star)
        if exhausted is not None:
            logging.warning(f"strip exhausted at tau={exhausted:.6g} for eta={eta}")
        return HierarchyTrajectory(
            times=trajectory.times,
            levels=recorded,
            mu=mu,
            weighted_norms=norms,
            eta=eta,
            strip_exhausted_at=exhausted,
            mu_star=mu_star,
        )
    except Exception as e:
        raise EckhausKdVException(e, sys) from e


def smallest_working_eta(hierarchy: HierarchyTrajectory, etas: Sequence[float] = ETA_SWEEP) -> Optional[float]:
    """Smallest eta whose weighted norm stays within ETA_BOUND_FACTOR of its start without exhausting the strip."""
    mu0 = hierarchy.mu[0]
    for eta in sorted(etas):
        _, norms, exhausted = strip_norms(hierarchy.times, hierarchy.levels, mu0, eta, hierarchy.mu_star)
        if exhausted is None and np.nanmax(norms) <= ETA_BOUND_FACTOR * norms[0]:
            return float(eta)
    return None
