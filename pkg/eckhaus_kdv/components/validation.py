"""Experiments comparing the modulation system with the KdV ansatz.

Every sweep point builds A(xi) on the slow grid, solves the KdV equation up
to tau1, starts the (psi, s) system from the ansatz and measures the
difference at common record times. Slopes are least-squares fits on
(log eps, log error).
"""
import dataclasses
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from eckhaus_kdv.components.fourier_core import AnalyticNormParams, SpectralField, SpectralGrid, analytic_norm, hm_norm
from eckhaus_kdv.components.kdv_approx import (
    HierarchyCoefficientTable,
    HierarchyLevel,
    KdVState,
    ansatz_state,
    build_ansatz_V,
    hierarchy_extend,
    kdv_profile,
    make_coefficients,
    pair_norm,
    residual_V,
    smallest_working_eta,
    solve_kdv,
    x_grid_for,
)
from eckhaus_kdv.components.pde_solvers import (
    ModulationState,
    build_modulated_cgl,
    cgl_grid_for,
    extract_modulation,
    global_phase,
    simulate,
)
from eckhaus_kdv.components.spectral_analysis import classify_region, unstable_band
from eckhaus_kdv.constants import (
    CHAIN_TOL,
    DEFAULT_MU_STAR,
    DIFFERENCE_SLOPE_THRESHOLD,
    ENERGY_RATE_FLOOR,
    ENERGY_STABILITY_FACTOR,
    FAILURE_ESCAPE_FACTOR,
    HM_SLOPE_THRESHOLD,
    LOCKED_SLOPE_TOL,
    MAX_X_POINTS,
    MIN_FIT_POINTS,
    REFINEMENT_TOL,
    RESIDUAL_SLOPE_FLOOR,
    SUP_SLOPE_THRESHOLD,
    TAU1_HALVINGS,
    THEORY_SUP_SLOPE,
)
from eckhaus_kdv.entity.artifact_entity import (
    AnsatzCoefficients,
    EndToEndReport,
    EnergyTrace,
    FailureDemoReport,
    Region,
    SlopeFit,
    SweepPointResult,
    Trajectory,
    ValidationReport,
)
from eckhaus_kdv.entity.config_entity import GridSchema, StepperConfig, StepperSchema, SweepPlan, ValidateConfig
from eckhaus_kdv.entity.params import CGLParams
from eckhaus_kdv.exception import EckhausKdVException, ParameterDomainError, RegionRejectedError
from eckhaus_kdv.logger import logging

INSUFFICIENT = "insufficient points for fit"
FAILURE_DEMONSTRATED = "failure demonstrated (expected)"


def fit_slope(epsilons: Sequence[float], values: Sequence[float]) -> SlopeFit:
    """Least squares on (log eps, log value) with a 95 % t-interval for the slope."""
    eps = np.asarray(epsilons, dtype=float)
    vals = np.asarray(values, dtype=float)
    keep = (eps > 0.0) & np.isfinite(vals) & (vals > 0.0)
    n = int(keep.sum())
    if n < MIN_FIT_POINTS:
        logging.warning(f"{INSUFFICIENT}: {n} usable points")
        return SlopeFit(slope=None, n_points=n, note=INSUFFICIENT)
    fit = stats.linregress(np.log(eps[keep]), np.log(vals[keep]))
    half = float(stats.t.ppf(0.975, n - 2) * fit.stderr)
    return SlopeFit(
        slope=float(fit.slope),
        intercept=float(fit.intercept),
        stderr=float(fit.stderr),
        ci_low=float(fit.slope) - half,
        ci_high=float(fit.slope) + half,
        n_points=n,
    )


def fitted_value(fit: SlopeFit, epsilon: float) -> float:
    return float(np.exp(fit.intercept) * epsilon ** fit.slope)


# ---------------------------------------------------------------- one sweep point


@dataclass(frozen=True)
class RunSchedule:
    """Common record times of the modulation run in t and the KdV run in tau = eps^3 t."""

    epsilon: float
    tau1: float
    dt: float
    n_steps: int
    stride: int
    kdv_dt: float
    kdv_stride: int

    @property
    def t_end(self) -> float:
        return self.tau1 / self.epsilon ** 3

    def stepper(self, stepper: StepperSchema) -> StepperConfig:
        return StepperConfig(
            dt=self.dt, t_end=self.t_end, scheme=stepper.scheme, dealias=stepper.dealias, record_stride=self.stride
        )


def make_schedule(epsilon: float, tau1: float, stepper: StepperSchema) -> RunSchedule:
    stride = stepper.record_stride
    t_end = tau1 / epsilon ** 3
    if t_end == 0.0:
        return RunSchedule(epsilon, 0.0, stepper.dt, 0, stride, stepper.kdv_dt, 1)
    n_records = max(1, int(np.ceil(t_end / (stepper.dt * stride))))
    n_steps = n_records * stride
    record_tau = tau1 / n_records
    kdv_stride = max(1, int(np.ceil(record_tau / stepper.kdv_dt)))
    return RunSchedule(epsilon, tau1, t_end / n_steps, n_steps, stride, record_tau / kdv_stride, kdv_stride)


def xi_grid_for(grid: GridSchema) -> SpectralGrid:
    return SpectralGrid(grid.n_xi, 2.0 * np.pi * grid.periods)


def default_x_refine(n_xi: int, epsilon: float) -> int:
    """Power of two close to 1/eps, reduced until the x-grid fits under MAX_X_POINTS."""
    refine = 2 ** max(0, int(np.ceil(np.log2(1.0 / epsilon))))
    while refine > 1 and n_xi * refine > MAX_X_POINTS:
        refine //= 2
    return refine


def initial_amplitude(plan: SweepPlan, grid: SpectralGrid) -> KdVState:
    p = plan.profile
    return KdVState(kdv_profile(p.name, grid, p.amplitude, p.width, p.center, p.mean_free))


def _matched(first: Trajectory, second: Trajectory) -> int:
    """Number of leading records taken at the same time in both runs."""
    count = 0
    for t1, t2 in zip(first.times, second.times):
        if abs(t1 - t2) > 1e-9 * max(1.0, abs(t1)):
            break
        count += 1
    return count


def _hm(state: ModulationState, m: float) -> float:
    return pair_norm(state, lambda u: hm_norm(u, m))


def paired_errors(
    modulation: Trajectory,
    kdv: Trajectory,
    ansatz: Trajectory,
    coeffs: AnsatzCoefficients,
    params: CGLParams,
    order: int,
    x_grid: SpectralGrid,
    kdv_dt: float,
) -> Tuple[List[ModulationState], List[ModulationState]]:
    """
    V - V_app on the shared record grid, and the same list plus the error at a guard
    trip that fell between records. The ansatz for that state is stepped on from the
    last shared KdV record to tau = eps^3 t_trip.
    """
    n = _matched(modulation, ansatz)
    errors = [modulation.states[i] - ansatz.states[i] for i in range(n)]
    measured = list(errors)
    if modulation.guard_tripped and n < len(modulation):
        tau = params.epsilon ** 3 * modulation.times[-1]
        state = kdv.states[n - 1]
        gap = tau - kdv.times[n - 1]
        if gap > 1e-12 * max(1.0, tau):
            state = solve_kdv(state, coeffs, t_end=gap, dt=min(kdv_dt, gap)).final
        measured.append(modulation.final - ansatz_state(state.a, coeffs, params, order, x_grid))
    return errors, measured


def run_sweep_point(
    plan: SweepPlan, epsilon: float, keep_errors: bool = True, halve_on_blowup: bool = True
) -> SweepPointResult:
    """
    Method Name :   run_sweep_point
    Description :   KdV run, ansatz and modulation run at one epsilon. On a blow-up
                    guard trip tau1 is halved (up to TAU1_HALVINGS times) unless
                    ``halve_on_blowup`` is off, in which case the trip is recorded.

    Output      :   SweepPointResult
    On Failure  :   Write an exception log and then raise an exception
    """
    try:
        start = time.perf_counter()
        params = CGLParams.marginal(plan.alpha, plan.beta, epsilon)
        coeffs = make_coefficients(params)
        xi_grid = xi_grid_for(plan.grid)
        refine = plan.grid.x_refine or default_x_refine(plan.grid.n_xi, epsilon)
        x_grid = x_grid_for(xi_grid, epsilon, refine)
        a0 = initial_amplitude(plan, xi_grid)
        v0 = ansatz_state(a0.a, coeffs, params, plan.order, x_grid)
        logging.info(f"sweep point eps={epsilon}: xi n={xi_grid.n}, x n={x_grid.n}, L_x={x_grid.length:.6g}")

        tau1 = plan.tau1
        for attempt in range(TAU1_HALVINGS + 1):
            schedule = make_schedule(epsilon, tau1, plan.stepper)
            kdv = solve_kdv(a0, coeffs, schedule.tau1, schedule.kdv_dt, schedule.kdv_stride)
            modulation = simulate(v0, params, schedule.stepper(plan.stepper), stop_on_guard=False)
            if not modulation.guard_tripped or not halve_on_blowup or attempt == TAU1_HALVINGS:
                break
            logging.warning(f"modulation blow-up at t={modulation.guard_time:.6g}; halving tau1 to {tau1 / 2}")
            tau1 /= 2.0

        ansatz = build_ansatz_V(kdv, coeffs, params, plan.order, x_grid)
        errors, measured = paired_errors(modulation, kdv, ansatz, coeffs, params, plan.order, x_grid, schedule.kdv_dt)
        n = len(errors)
        norms = plan.norms
        analytic = AnalyticNormParams(mu=norms.mu, s=norms.s)
        sup_series = np.array([e.sup() for e in measured])
        hm_series = np.array([_hm(e, norms.m) for e in measured])
        an_series = np.array([pair_norm(e, lambda u: analytic_norm(u, analytic)) for e in measured])

        residual = residual_V(kdv, coeffs, params, plan.order, x_grid, m=norms.m, analytic=analytic)
        other = [ansatz_state(s.a, coeffs, params, 1 - plan.order, x_grid) for s in kdv.states]
        difference = max(_hm(a - b, norms.m) for a, b in zip(ansatz.states, other))

        result = SweepPointResult(
            epsilon=epsilon,
            tau1=tau1,
            sup_error=float(np.max(sup_series)),
            hm_error=float(np.max(hm_series)),
            analytic_error=float(np.max(an_series)),
            residual_sup=float(np.max(residual.sup)),
            residual_hm=float(np.max(residual.hm)),
            runtime=time.perf_counter() - start,
            guard_tripped=modulation.guard_tripped,
            guard_time=modulation.guard_time,
            times=np.asarray(modulation.times[:n]),
            sup_series=sup_series,
            hm_series=hm_series,
            error_states=errors if keep_errors else None,
            ansatz_difference_hm=float(difference),
        )
        logging.info(
            f"eps={epsilon}: sup error {result.sup_error:.6e}, H^m error {result.hm_error:.6e}, "
            f"residual {result.residual_sup:.6e}, tau1={tau1}, {result.runtime:.2f}s"
        )
        return result
    except Exception as e:
        raise EckhausKdVException(e, sys) from e


def run_sweep(plan: SweepPlan, keep_errors: bool = True, halve_on_blowup: bool = True) -> List[SweepPointResult]:
    """Sweep points in a process pool; results come back in the order of plan.epsilons."""
    n = len(plan.epsilons)
    workers = min(plan.max_workers or os.cpu_count() or 1, n)
    if workers <= 1:
        return [run_sweep_point(plan, eps, keep_errors, halve_on_blowup) for eps in plan.epsilons]
    logging.info(f"running {n} sweep points on {workers} workers")
    with ProcessPoolExecutor(max_workers=workers) as executor:
        return list(
            executor.map(run_sweep_point, [plan] * n, plan.epsilons, [keep_errors] * n, [halve_on_blowup] * n)
        )


# ---------------------------------------------------------------- energy


def _c_hat(times: np.ndarray, energy: np.ndarray, epsilon: float) -> float:
    rate = np.gradient(energy, times)
    # one-ulp jitter of a steady energy is not growth
    floor = ENERGY_RATE_FLOOR * max(1.0, float(np.max(np.abs(energy)))) / float(np.min(np.diff(times)))
    rate = np.where(np.abs(rate) <= floor, 0.0, rate)
    return float(max(0.0, np.max(rate / (epsilon ** 3 * (energy + 1.0)))))


def energy_diagnostic(error_traj: Trajectory, epsilon: float, kappa: float = 0.0, m: float = 1.0) -> EnergyTrace:
    """
    Smallest C with E'(t) <= C eps^3 (E + 1) along R = (V - V_app) / eps^kappa,
    E = (||R_1||_{H^m}^2 + ||R_2||_{H^m}^2) / 2. The estimate is flagged noisy
    when every second record alone changes it by more than a factor two.
    """
    times = np.asarray(error_traj.times, dtype=float)
    scale = epsilon ** (-2.0 * kappa)
    energy = np.array([0.5 * scale * (hm_norm(r.psi_w, m) ** 2 + hm_norm(r.s, m) ** 2) for r in error_traj.states])
    if len(times) < 3:
        note = "fewer than 3 records: no derivative"
        logging.warning(f"energy diagnostic at eps={epsilon}: {note}")
        return EnergyTrace(times, energy, 0.0, kappa, epsilon, noisy=True, note=note)

    c_hat = _c_hat(times, energy, epsilon)
    noisy, note = False, ""
    if len(times) >= 5:
        coarse = _c_hat(times[::2], energy[::2], epsilon)
        low, high = sorted((c_hat, coarse))
        if high > 0.0 and (low == 0.0 or high / low > 2.0):
            noisy, note = True, f"record stride too coarse: C={c_hat:.4g} vs {coarse:.4g} on every second record"
            logging.warning(f"energy diagnostic at eps={epsilon}: {note}")
    return EnergyTrace(times, energy, c_hat, kappa, epsilon, noisy=noisy, note=note)


def _error_trajectory(point: SweepPointResult) -> Trajectory:
    return Trajectory(times=point.times, states=point.error_states, steps=0, wall_time=0.0)


# ---------------------------------------------------------------- sweep


def _require_sideband_region(alpha: float, beta: float) -> None:
    verdict = classify_region(alpha, beta)
    if verdict.region != Region.SIDEBAND_AS or alpha == beta:
        raise RegionRejectedError(
            f"(alpha, beta) = ({alpha}, {beta}) is {verdict.region.value}; the KdV sweep needs SidebandAs, alpha != beta",
            sys,
        )


def _slope_verdict(fit: SlopeFit, threshold: float) -> str:
    if fit.slope is None:
        return INSUFFICIENT
    return "pass" if fit.slope >= threshold else "fail"


def overall_verdict(verdicts: Dict[str, str]) -> str:
    return "fail" if "fail" in verdicts.values() else "pass"


def _kappa(plan: SweepPlan, slopes: Dict[str, SlopeFit], notes: List[str]) -> float:
    if plan.kappa_source == "residual" and slopes["residual_sup"].slope is not None:
        return slopes["residual_sup"].slope - 3.0
    if plan.kappa_source == "error" and slopes["sup_error"].slope is not None:
        return slopes["sup_error"].slope
    notes.append(f"kappa falls back to {THEORY_SUP_SLOPE} ({INSUFFICIENT})")
    return THEORY_SUP_SLOPE


def sweep_slopes(points: List[SweepPointResult]) -> Dict[str, SlopeFit]:
    eps = [p.epsilon for p in points]
    return {
        "sup_error": fit_slope(eps, [p.sup_error for p in points]),
        "hm_error": fit_slope(eps, [p.hm_error for p in points]),
        "analytic_error": fit_slope(eps, [p.analytic_error for p in points]),
        "residual_sup": fit_slope(eps, [p.residual_sup for p in points]),
        "residual_hm": fit_slope(eps, [p.residual_hm for p in points]),
        "ansatz_difference_hm": fit_slope(eps, [p.ansatz_difference_hm for p in points]),
    }


def run_validation(plan: SweepPlan, order: Optional[int] = None) -> ValidationReport:
    """
    Method Name :   run_validation
    Description :   eps-sweep of modulation solution against the ansatz of the given
                    order; fits error, residual and difference slopes and the energy
                    constant, and turns them into verdicts.

    Output      :   ValidationReport
    On Failure  :   RegionRejectedError outside SidebandAs
    """
    try:
        _require_sideband_region(plan.alpha, plan.beta)
        if order is not None:
            plan = plan.replace(order=order)
        points = run_sweep(plan)
        slopes = sweep_slopes(points)
        notes = []

        kappa = _kappa(plan, slopes, notes)
        energy = {
            p.epsilon: energy_diagnostic(_error_trajectory(p), p.epsilon, kappa, plan.norms.m)
            for p in points
            if p.error_states
        }

        verdicts = {
            "hm_error_slope": _slope_verdict(slopes["hm_error"], HM_SLOPE_THRESHOLD),
            "sup_error_slope": _slope_verdict(slopes["sup_error"], SUP_SLOPE_THRESHOLD),
            "ansatz_difference_slope": _slope_verdict(slopes["ansatz_difference_hm"], DIFFERENCE_SLOPE_THRESHOLD),
        }
        residual = slopes["residual_sup"]
        if residual.slope is None:
            verdicts["residual_slope"] = INSUFFICIENT
        elif plan.locked_residual_slope is None:
            verdicts["residual_slope"] = "recorded"
            if residual.slope < RESIDUAL_SLOPE_FLOOR:
                notes.append(f"residual slope {residual.slope:.3f} is below {RESIDUAL_SLOPE_FLOOR}")
        else:
            close = abs(residual.slope - plan.locked_residual_slope) <= LOCKED_SLOPE_TOL
            verdicts["residual_slope"] = "pass" if close else "fail"

        constants = [trace.c_hat for trace in energy.values() if trace.c_hat > 0.0]
        if len(constants) < 2:
            verdicts["energy_constant"] = INSUFFICIENT
        else:
            stable = max(constants) / min(constants) <= ENERGY_STABILITY_FACTOR
            verdicts["energy_constant"] = "pass" if stable else "fail"

        for name, fit in slopes.items():
            if fit.slope is None:
                notes.append(f"{name}: {INSUFFICIENT}")
        if any(p.guard_tripped for p in points):
            notes.append("blow-up guard tripped at " + ", ".join(f"eps={p.epsilon}" for p in points if p.guard_tripped))
        achieved = sorted({p.tau1 for p in points})
        notes.append(f"achieved tau1: {achieved}")

        logging.info("validation slopes: " + ", ".join(f"{k}={v.slope}" for k, v in slopes.items()))
        return ValidationReport(
            alpha=plan.alpha,
            beta=plan.beta,
            order=plan.order,
            points=points,
            slopes=slopes,
            verdicts=verdicts,
            energy=energy,
            notes=notes,
        )
    except Exception as e:
        raise EckhausKdVException(e, sys) from e


def compare_orders(report: ValidationReport, plan: SweepPlan) -> Tuple[str, List[SweepPointResult]]:
    """Order-1 errors must not exceed order-0 errors at any eps of the sweep."""
    other = run_sweep(plan.replace(order=1 - report.order), keep_errors=False)
    first, zeroth = (report.points, other) if report.order == 1 else (other, report.points)
    ok = all(p1.hm_error <= p0.hm_error and p1.sup_error <= p0.sup_error for p1, p0 in zip(first, zeroth))
    return ("pass" if ok else "fail"), other


def refinement_check(plan: SweepPlan) -> dict:
    """Smallest eps again with twice the spatial points and half the time step."""
    eps = min(plan.epsilons)
    refine = plan.grid.x_refine or default_x_refine(plan.grid.n_xi, eps)
    base = run_sweep_point(plan.replace(grid=plan.grid.model_copy(update={"x_refine": refine})), eps, keep_errors=False)
    fine_plan = plan.replace(
        grid=plan.grid.model_copy(update={"n_xi": 2 * plan.grid.n_xi, "x_refine": refine}),
        stepper=plan.stepper.model_copy(
            update={"dt": plan.stepper.dt / 2.0, "record_stride": 2 * plan.stepper.record_stride}
        ),
        tau1=base.tau1,
    )
    fine = run_sweep_point(fine_plan, eps, keep_errors=False, halve_on_blowup=False)
    sup_change = abs(fine.sup_error - base.sup_error) / max(base.sup_error, 1e-300)
    hm_change = abs(fine.hm_error - base.hm_error) / max(base.hm_error, 1e-300)
    result = {
        "epsilon": eps,
        "sup_change": sup_change,
        "hm_change": hm_change,
        "pass": bool(max(sup_change, hm_change) < REFINEMENT_TOL),
    }
    logging.info(f"refinement check: {result}")
    return result


def hierarchy_diagnostic(plan: SweepPlan, order: int, table: HierarchyCoefficientTable, eta: float,
                         mu_upper: float, mu_lower: float, sweep_eta: bool, tau0: float,
                         mu_star: float = DEFAULT_MU_STAR) -> dict:
    eps = min(plan.epsilons)
    params = CGLParams.marginal(plan.alpha, plan.beta, eps)
    coeffs = make_coefficients(params)
    grid = xi_grid_for(plan.grid)
    a0 = initial_amplitude(plan, grid)
    n_steps = max(1, int(np.ceil(tau0 / plan.stepper.kdv_dt)))
    stride = max(1, n_steps // 50)
    trajectory = hierarchy_extend(
        [HierarchyLevel(0, a0.a)],
        coeffs,
        order,
        table,
        params.sigma_s,
        t_end=tau0,
        dt=tau0 / n_steps,
        eta=eta,
        mu_upper=mu_upper,
        mu_lower=mu_lower,
        record_stride=stride,
        mu_star=mu_star,
    )
    slaved = [level.algebraic_residual() for row in trajectory.levels for level in row]
    summary = {
        "order": order,
        "epsilon": eps,
        "eta": eta,
        "mu_star": mu_star,
        "strip_exhausted_at": trajectory.strip_exhausted_at,
        "max_weighted_norm": float(np.nanmax(trajectory.weighted_norms)),
        "initial_weighted_norm": float(trajectory.weighted_norms[0]),
        "max_algebraic_residual": float(max(slaved)),
    }
    if sweep_eta:
        summary["smallest_working_eta"] = smallest_working_eta(trajectory)
    logging.info(f"hierarchy diagnostic: {summary}")
    return summary


# ---------------------------------------------------------------- failure demonstration


def _resolving_refine(plan: SweepPlan, k_growth: float) -> int:
    """x_refine for which every x-grid of the sweep resolves 2 k_growth."""
    eps = min(plan.epsilons)
    refine = plan.grid.x_refine or default_x_refine(plan.grid.n_xi, eps)
    k_max = lambda r: np.pi * plan.grid.n_xi * r * eps / (2.0 * np.pi * plan.grid.periods)
    while k_max(refine) < 2.0 * k_growth:
        refine *= 2
    if plan.grid.n_xi * refine > MAX_X_POINTS:
        raise ParameterDomainError(
            f"resolving k={k_growth:.4g} needs {plan.grid.n_xi * refine} x-points (cap {MAX_X_POINTS})", sys
        )
    return refine


def failure_demo(alpha: float, beta: float, plan: SweepPlan, control: Tuple[float, float] = (1.0, 0.0)) -> FailureDemoReport:
    """
    Method Name :   failure_demo
    Description :   Runs the sweep at a HopfTuringAh point and at an A_s control
                    point. The failure is demonstrated when the error leaves the
                    control's fitted bound by FAILURE_ESCAPE_FACTOR or the blow-up
                    guard trips, while the control run stays clean.

    Output      :   FailureDemoReport
    On Failure  :   RegionRejectedError when (alpha, beta) is not a HopfTuringAh point
    """
    try:
        logging.info(f"{'>>' * 20} failure demonstration ({alpha}, {beta}) {'<<' * 20}")
        verdict = classify_region(alpha, beta)
        if verdict.region != Region.HOPF_TURING_AH:
            raise RegionRejectedError(f"({alpha}, {beta}) is {verdict.region.value}, not HopfTuringAh", sys)
        eps_ref = min(plan.epsilons)
        band = unstable_band(CGLParams.marginal(alpha, beta, eps_ref))
        control_band = unstable_band(CGLParams.marginal(control[0], control[1], eps_ref))
        logging.info(
            f"spectral precheck: max Re lambda_+ = {band.max_growth:.4g} at k={band.k_max_growth:.4g}; "
            f"control {control_band.max_growth:.4g}"
        )

        refine = _resolving_refine(plan, abs(band.k_max_growth))
        failing_plan = plan.replace(alpha=alpha, beta=beta, grid=plan.grid.model_copy(update={"x_refine": refine}))
        points = run_sweep(failing_plan, keep_errors=True, halve_on_blowup=False)
        control_points = run_sweep(
            plan.replace(alpha=control[0], beta=control[1]), keep_errors=False, halve_on_blowup=False
        )

        control_fit = fit_slope([p.epsilon for p in control_points], [p.sup_error for p in control_points])
        ratios = []
        for point, reference in zip(points, control_points):
            bound = fitted_value(control_fit, point.epsilon) if control_fit.slope is not None else reference.sup_error
            ratios.append(point.sup_error / max(bound, 1e-300))
        escape = float(np.nanmax(ratios)) if ratios else 0.0
        guard = any(p.guard_tripped for p in points)
        guard_times = [p.guard_time for p in points if p.guard_time is not None]
        failure_detected = guard or escape >= FAILURE_ESCAPE_FACTOR
        control_failure = any(p.guard_tripped for p in control_points)

        kappa_notes: List[str] = []
        kappa = _kappa(plan, sweep_slopes(control_points), kappa_notes)
        for note in kappa_notes:
            logging.warning(f"failure demonstration: {note}")
        c_hat = {
            p.epsilon: energy_diagnostic(_error_trajectory(p), p.epsilon, kappa, plan.norms.m).c_hat
            for p in points
            if p.error_states and len(p.error_states) > 0
        }
        report = FailureDemoReport(
            alpha=alpha,
            beta=beta,
            region=verdict.region.value,
            max_growth=band.max_growth,
            k_max_growth=band.k_max_growth,
            control_max_growth=control_band.max_growth,
            failure_detected=failure_detected,
            escape_factor=escape,
            guard_tripped=guard,
            guard_time=min(guard_times) if guard_times else None,
            control_failure_detected=control_failure,
            verdict=FAILURE_DEMONSTRATED if failure_detected and not control_failure else "failure not demonstrated",
            c_hat=c_hat,
            points=[dataclasses.replace(p, error_states=None) for p in points],
        )
        logging.info(f"failure demonstration verdict: {report.verdict} (escape {escape:.4g}, guard {guard})")
        return report
    except Exception as e:
        raise EckhausKdVException(e, sys) from e


# ---------------------------------------------------------------- CGL end to end


def _periodic_distance(x: np.ndarray, x0: float, length: float) -> np.ndarray:
    return np.abs((x - x0 + 0.5 * length) % length - 0.5 * length)


def cgl_end_to_end(plan: SweepPlan, X0: float, windows: Sequence[float], epsilon: Optional[float] = None) -> EndToEndReport:
    """
    Method Name :   cgl_end_to_end
    Description :   Full CGL run from the modulated ansatz next to the modulation run.
                    Measures |exp(-i phi(X0,T)) Psi - Psi_app| over windows
                    |X - X0| <= W, the growth of the global phase, and the agreement
                    of the extracted (psi, s) with the modulation run.

    Output      :   EndToEndReport
    On Failure  :   GridMismatchError when the carrier is not periodic on the lab grid
    """
    try:
        eps = epsilon or min(plan.epsilons)
        logging.info(f"{'>>' * 20} CGL end-to-end at eps={eps} {'<<' * 20}")
        _require_sideband_region(plan.alpha, plan.beta)
        params = CGLParams.marginal(plan.alpha, plan.beta, eps)
        coeffs = make_coefficients(params)
        xi_grid = xi_grid_for(plan.grid)
        x_grid = x_grid_for(xi_grid, eps, plan.grid.x_refine or default_x_refine(plan.grid.n_xi, eps))
        a0 = initial_amplitude(plan, xi_grid)
        schedule = make_schedule(eps, plan.tau1, plan.stepper)

        kdv = solve_kdv(a0, coeffs, schedule.tau1, schedule.kdv_dt, schedule.kdv_stride)
        ansatz = build_ansatz_V(kdv, coeffs, params, plan.order, x_grid)
        v0 = ansatz.states[0]
        modulation = simulate(v0, params, schedule.stepper(plan.stepper))

        lab_grid = cgl_grid_for(params, x_grid)
        zeta2 = params.zeta ** 2
        cgl_config = StepperConfig(
            dt=schedule.dt / zeta2,
            t_end=schedule.t_end / zeta2,
            scheme=plan.stepper.scheme,
            dealias=plan.stepper.dealias,
            record_stride=schedule.stride,
        )
        cgl = simulate(build_modulated_cgl(params, v0, X0=X0, grid=lab_grid), params, cgl_config)
        n = min(len(cgl), len(modulation), len(ansatz))

        phase = np.unwrap([global_phase(params, cgl.states[j], X0, cgl.times[j]) for j in range(n)])
        distance = _periodic_distance(lab_grid.x, X0, lab_grid.length)
        window_errors = np.zeros(len(windows))
        point_error = modulation_point_error = chain_error = 0.0
        masked_points = 0
        for j in range(n):
            t = modulation.times[j]
            field = cgl.states[j].psi
            aligned = SpectralField(lab_grid, np.exp(-1j * phase[j]) * field.coeffs, is_real=False)
            approx = build_modulated_cgl(params, ansatz.states[j], X0=X0, t=t, grid=lab_grid).psi
            at_x0 = abs(aligned.at(X0) - approx.at(X0))
            diff = np.abs(aligned.physical() - approx.physical())
            for i, width in enumerate(windows):
                inside = diff[distance <= width]
                window_errors[i] = max(window_errors[i], at_x0, float(inside.max()) if inside.size else 0.0)
            point_error = max(point_error, at_x0)

            x0 = params.zeta * X0 - params.c * t
            s_mod = modulation.states[j].s.at(x0)
            s_app = ansatz.states[j].s.at(x0)
            modulation_point_error = max(modulation_point_error, params.psi0 * abs(np.exp(s_mod) - np.exp(s_app)))

            extracted, masked = extract_modulation(params, cgl.states[j], t, x_grid)
            chain_error = max(chain_error, (extracted - modulation.states[j]).sup())
            masked_points = max(masked_points, masked)

        fit_a = fit_b = None
        if len(windows) >= 2:
            line = stats.linregress(np.asarray(windows, dtype=float), window_errors)
            fit_a, fit_b = float(line.intercept), float(line.slope)
        drift = float(np.max(np.abs(phase))) if n else 0.0
        agree = chain_error <= CHAIN_TOL and abs(point_error - modulation_point_error) <= CHAIN_TOL
        report = EndToEndReport(
            epsilon=eps,
            X0=X0,
            windows=list(windows),
            window_errors=window_errors.tolist(),
            fit_a=fit_a,
            fit_b=fit_b,
            point_error=point_error,
            modulation_point_error=modulation_point_error,
            phase_drift_max=drift,
            phase_drift_scaled=eps * drift,
            masked_points=masked_points,
            chain_error=chain_error,
            verdict="pass" if agree else "fail",
            times=np.asarray(modulation.times[:n]),
            phase=phase,
        )
        logging.info(
            f"end-to-end: chain error {chain_error:.3e}, point error {point_error:.3e} "
            f"vs {modulation_point_error:.3e}, phase drift {drift:.4g}"
        )
        return report
    except Exception as e:
        raise EckhausKdVException(e, sys) from e


# ---------------------------------------------------------------- component


class ModulationValidation:
    def __init__(self, validate_config: ValidateConfig):
        try:
            self.validate_config = validate_config
            self.plan = SweepPlan.from_config(validate_config)
        except Exception as e:
            raise EckhausKdVException(e, sys) from e

    def validate_sweep(self) -> ValidationReport:
        config = self.validate_config
        report = run_validation(self.plan)
        if config.compare_orders:
            report.verdicts["order_comparison"], _ = compare_orders(report, self.plan)
        if config.refinement_check:
            report.refinement = refinement_check(self.plan)
            report.verdicts["refinement"] = "pass" if report.refinement["pass"] else "fail"
        if config.hierarchy is not None:
            h = config.hierarchy
            table = HierarchyCoefficientTable.from_yaml(h.table)
            report.hierarchy = hierarchy_diagnostic(
                self.plan, h.order, table, h.eta, h.mu_upper, h.mu_lower, h.sweep_eta, config.tau0, h.mu_star
            )
            if report.hierarchy["strip_exhausted_at"] is not None:
                report.notes.append(f"analytic strip exhausted at tau={report.hierarchy['strip_exhausted_at']:.6g}")
        report.verdicts["overall"] = overall_verdict(report.verdicts)
        return report

    def initiate_validation(self):
        """
        Method Name :   initiate_validation
        Description :   Runs the experiment selected by ``mode``: the eps-sweep, the
                        failure demonstration or the CGL end-to-end comparison

        Output      :   ValidationReport, FailureDemoReport or EndToEndReport
        On Failure  :   Write an exception log and then raise an exception
        """
        try:
            config = self.validate_config
            logging.info(f"Entered initiate_validation (mode={config.mode}, eps={self.plan.epsilons})")
            if config.mode == "failure":
                report = failure_demo(
                    config.params.alpha, config.params.beta, self.plan, (config.control.alpha, config.control.beta)
                )
            elif config.mode == "end_to_end":
                report = cgl_end_to_end(self.plan, config.X0, config.windows)
            else:
                report = self.validate_sweep()
            logging.info("Exited initiate_validation")
            return report
        except Exception as e:
            raise EckhausKdVException(e, sys) from e
