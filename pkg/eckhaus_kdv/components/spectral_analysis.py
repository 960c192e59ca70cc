"""Closed-form linear theory of the wave-train modulation systems.

Symbols of the (phi, s), (psi, s) and (chi, s) linearisations, the spectral
curves lambda_+-, their Taylor coefficients at k = 0, the sideband threshold
and the classification of the (alpha, beta) plane.
"""
import sys
from typing import Tuple

import numpy as np

from eckhaus_kdv.components.fourier_core import gamma_over_theta, theta_hat
from eckhaus_kdv.constants import REGION_BOUNDARY_TOL
from eckhaus_kdv.entity.artifact_entity import (
    DispersionSample,
    ExpansionCoefficients,
    Region,
    RegionVerdict,
    SpectralBoundsReport,
    UnstableBand,
)
from eckhaus_kdv.entity.params import CGLParams, sideband_sigma
from eckhaus_kdv.exception import (
    DegenerateCaseError,
    EckhausKdVException,
    NumericalInstabilityError,
    ParameterDomainError,
    RegionRejectedError,
)
from eckhaus_kdv.logger import logging


def _require_positive_sigma(params: CGLParams) -> None:
    if params.sigma <= 0.0:
        raise ParameterDomainError(f"sigma={params.sigma} must be positive", sys)


def _shape_like(k, matrix: np.ndarray) -> np.ndarray:
    return matrix[0] if np.ndim(k) == 0 else matrix


def eval_symbol(params: CGLParams, k) -> np.ndarray:
    """Fourier symbol of the (phi, s) linearisation; shape (..., 2, 2)."""
    kk = np.atleast_1d(np.asarray(k, dtype=float))
    a, b, sigma = params.alpha, params.beta, params.sigma
    diag = -kk ** 2 + 1j * (params.c - 2.0 * a) * kk
    symbol = np.empty(kk.shape + (2, 2), dtype=complex)
    symbol[..., 0, 0] = diag
    symbol[..., 0, 1] = -a * kk ** 2 - 2.0 * b * sigma + 2j * kk
    symbol[..., 1, 0] = a * kk ** 2 - 2j * kk
    symbol[..., 1, 1] = diag - 2.0 * sigma
    return _shape_like(k, symbol)


def eval_symbol_v(params: CGLParams, k) -> np.ndarray:
    """Symbol of the (psi, s) system, psi = d_x phi."""
    kk = np.atleast_1d(np.asarray(k, dtype=float))
    a, b, sigma = params.alpha, params.beta, params.sigma
    diag = -kk ** 2 + 1j * (params.c - 2.0 * a) * kk
    symbol = np.empty(kk.shape + (2, 2), dtype=complex)
    symbol[..., 0, 0] = diag
    symbol[..., 0, 1] = -1j * a * kk ** 3 - 2.0 * kk ** 2 - 2j * sigma * b * kk
    symbol[..., 1, 0] = -1j * a * kk - 2.0
    symbol[..., 1, 1] = diag - 2.0 * sigma
    return _shape_like(k, symbol)


def eval_symbol_y(params: CGLParams, k) -> np.ndarray:
    """Symbol of the (chi, s) system, chi = theta(phi); finite at k = 0."""
    kk = np.atleast_1d(np.asarray(k, dtype=float))
    sigma, b = params.sigma, params.beta
    gamma = (params.alpha * kk ** 2 - 2j * kk) / sigma
    diag = -kk ** 2 + 1j * (params.c - 2.0 * params.alpha) * kk
    symbol = np.empty(kk.shape + (2, 2), dtype=complex)
    symbol[..., 0, 0] = diag
    symbol[..., 0, 1] = -sigma * theta_hat(kk) * (2.0 * b + gamma)
    symbol[..., 1, 0] = sigma * gamma_over_theta(params, kk)
    symbol[..., 1, 1] = diag - 2.0 * sigma
    return _shape_like(k, symbol)


def _spectral_curves(params: CGLParams, k: np.ndarray):
    """lambda_+-, gamma and upsilon for real or complex k (principal square root)."""
    sigma = params.sigma
    gamma = (params.alpha * k ** 2 - 2j * k) / sigma
    upsilon = np.sqrt(1.0 - gamma ** 2 - 2.0 * params.beta * gamma + 0j)
    base = 1j * (params.c - 2.0 * params.alpha) * k - k ** 2 - sigma
    return base + sigma * upsilon, base - sigma * upsilon, gamma, upsilon


def eval_dispersion(params: CGLParams, k) -> DispersionSample:
    _require_positive_sigma(params)
    kk = np.asarray(k, dtype=float)
    lam_plus, lam_minus, gamma, upsilon = _spectral_curves(params, kk)
    if not np.all(upsilon.real > 0.0):
        raise NumericalInstabilityError("principal root upsilon(k) left the right half plane", sys)
    return DispersionSample(k=kk, lambda_plus=lam_plus, lambda_minus=lam_minus, gamma=gamma, upsilon=upsilon)


def damped_dispersion(params: CGLParams, k, eta: float) -> Tuple[np.ndarray, np.ndarray]:
    """lambda_{2,+-}(k) = lambda_+-(k) - eps^2 eta |k|, the curves after the analytic weight."""
    sample = eval_dispersion(params, k)
    damping = params.epsilon ** 2 * eta * np.abs(sample.k)
    return sample.lambda_plus - damping, sample.lambda_minus - damping


def sideband_threshold(alpha: float, beta: float) -> Tuple[float, float]:
    sigma_s = sideband_sigma(alpha, beta)
    q = 1.0 + alpha * beta
    zeta_s = float(np.sqrt(q / (2.0 * (1.0 + beta ** 2) + q)))
    return sigma_s, zeta_s


def _j_factor(alpha: float, beta: float) -> float:
    return 1.0 + 5.0 * beta ** 2 + alpha ** 2 * (1.0 - 3.0 * beta ** 2) + 4.0 * alpha * beta * (beta ** 2 - 1.0)


def expansion_coeffs(params: CGLParams) -> ExpansionCoefficients:
    """lambda_+(k) = i c1 k - c2 k^2 + i c3 k^3 - c4 k^4 + O(k^5)."""
    _require_positive_sigma(params)
    a, b, sigma, c = params.alpha, params.beta, params.sigma, params.c
    p = 1.0 + b ** 2
    c1 = c - 2.0 * (a - b)
    c2 = 1.0 + a * b - 2.0 * p / sigma
    c3 = 2.0 * p * (a * sigma - 2.0 * b) / sigma ** 2
    c4 = p * (0.5 * a ** 2 * sigma ** 2 - 6.0 * a * b * sigma + 2.0 * (1.0 + 5.0 * b ** 2)) / sigma ** 3
    J = _j_factor(a, b)
    if 1.0 + a * b > 0.0:
        sigma_s = sideband_sigma(a, b)
        c3s = 2.0 * (a - b) / sigma_s
        c4s = (1.0 + a * b) * J / (4.0 * p ** 2)
    else:
        logging.warning(f"no sideband threshold for alpha={a}, beta={b}; c3s/c4s undefined")
        c3s = c4s = float("nan")
    return ExpansionCoefficients(c1=c1, c2=c2, c3=c3, c4=c4, c3s=c3s, c4s=c4s, J=J)


def fd_expansion_coeffs(params: CGLParams, radius: float = None, n_points: int = 64) -> ExpansionCoefficients:
    """Second evaluation of c1..c4: centred differences of lambda_+ on a circle in the complex k-plane.

    The trapezoidal rule on |k| = radius returns the Taylor coefficients of
    lambda_+ at k = 0 up to an aliasing error (radius/R)^n_points, R being
    the distance to the nearest branch point.
    """
    _require_positive_sigma(params)
    if radius is None:
        radius = 0.2 * min(1.0, params.sigma) / ((1.0 + abs(params.beta)) * (2.0 + abs(params.alpha)))
    nodes = radius * np.exp(2j * np.pi * np.arange(n_points) / n_points)
    lam_plus = _spectral_curves(params, nodes)[0]
    taylor = np.fft.fft(lam_plus) / n_points / radius ** np.arange(n_points)
    closed = expansion_coeffs(params)
    return ExpansionCoefficients(
        c1=float(taylor[1].imag),
        c2=float(-taylor[2].real),
        c3=float(taylor[3].imag),
        c4=float(-taylor[4].real),
        c3s=closed.c3s,
        c4s=closed.c4s,
        J=closed.J,
    )


def r_of_z(z: float) -> float:
    if not 0.0 < z < 1.0:
        raise ParameterDomainError(f"r(z) is defined for z in (0,1), got z={z}", sys)
    if z <= 1.0 / 3.0:
        return float(z ** -0.5)
    if z >= 0.75:
        return float("inf")
    a = z ** 2 * (4.0 * z - 3.0)
    b = 5.0 * z ** 2 - 4.0 * z + 1.0
    # a < 0 < b: the product of the roots in r^2 is 1/a < 0, one positive root
    root = 2.0 / (-b + np.sqrt(b ** 2 - 4.0 * a))
    return float(np.sqrt(root))


def classify_region(alpha: float, beta: float, tol: float = REGION_BOUNDARY_TOL) -> RegionVerdict:
    q = 1.0 + alpha * beta
    if q <= 0.0:
        return RegionVerdict(Region.UNSTABLE_HALF_PLANE)
    if q <= tol or (abs(alpha) <= tol and abs(beta) <= tol):
        return RegionVerdict(Region.BOUNDARY_INDETERMINATE)

    r = None
    if alpha != 0.0 and beta != 0.0 and 0.0 < beta / alpha <= 1.0:
        z = beta / alpha
        r = float("inf") if z >= 1.0 else r_of_z(z)

    scale = max(1.0, abs(alpha))
    by_first = -1.0 < alpha * beta < beta ** 2
    by_second = beta == 0.0 and alpha != 0.0
    by_third = r is not None and abs(alpha) < r
    if r is not None and np.isfinite(r) and abs(abs(alpha) - r) <= tol * scale:
        return RegionVerdict(Region.BOUNDARY_INDETERMINATE, r)
    if by_third and not (by_first or by_second) and abs(abs(beta) - abs(alpha)) <= tol * scale:
        return RegionVerdict(Region.BOUNDARY_INDETERMINATE, r)
    if by_first or by_second or by_third:
        return RegionVerdict(Region.SIDEBAND_AS, r)
    return RegionVerdict(Region.HOPF_TURING_AH, r)


def check_spectral_bounds(params: CGLParams, kmax: float = 10.0, n: int = 10001) -> SpectralBoundsReport:
    """Grid check of Re lambda_- <= -sigma_s/2 - k^2 and Re lambda_+ <= C eps^3 |k|.

    Reports the smallest C that works on the grid and the wavenumbers where the
    lambda_- bound (or, at eps = 0, Re lambda_+ <= 0) fails.
    """
    try:
        verdict = classify_region(params.alpha, params.beta)
        if verdict.region != Region.SIDEBAND_AS or params.alpha == params.beta:
            raise RegionRejectedError(
                f"spectral bounds need (alpha,beta) in A_s with alpha != beta, got {verdict.region.value}", sys
            )
        sigma_s = params.sigma_s
        if abs(params.sigma - (sigma_s - params.epsilon ** 2)) > 1e-12 * sigma_s:
            raise ParameterDomainError(
                f"sigma={params.sigma} is not the marginal value sigma_s - eps^2={sigma_s - params.epsilon ** 2}", sys
            )
        k = np.linspace(-kmax, kmax, n)
        sample = eval_dispersion(params, k)
        minus_margin = (-0.5 * sigma_s - k ** 2) - sample.lambda_minus.real
        tol = 1e-12 * (1.0 + sigma_s + k ** 2)
        violating = k[minus_margin < -tol]

        re_plus = sample.lambda_plus.real
        nonzero = k != 0.0
        eps3 = params.epsilon ** 3
        if eps3 > 0.0:
            constant = max(0.0, float(np.max(re_plus[nonzero] / (eps3 * np.abs(k[nonzero])))))
        else:
            bad = k[re_plus > tol]
            violating = np.union1d(violating, bad)
            constant = 0.0 if bad.size == 0 else float("inf")

        report = SpectralBoundsReport(
            holds=violating.size == 0,
            epsilon=params.epsilon,
            lambda_minus_margin=float(np.min(minus_margin)),
            lambda_plus_constant=constant,
            violating_k=[float(v) for v in violating],
        )
        logging.info(
            f"spectral bounds eps={params.epsilon}: holds={report.holds}, "
            f"margin={report.lambda_minus_margin:.3e}, C={report.lambda_plus_constant:.6g}"
        )
        return report
    except Exception as e:
        raise EckhausKdVException(e, sys) from e


def unstable_band(params: CGLParams, kmax: float = 10.0, n: int = 20001) -> UnstableBand:
    """Where Re lambda_+ > 0 on [0, kmax] and the largest growth rate there."""
    k = np.linspace(0.0, kmax, n)
    re_plus = eval_dispersion(params, k).lambda_plus.real
    best = int(np.argmax(re_plus))
    positive = k[re_plus > 1e-12]
    if positive.size == 0:
        return UnstableBand(k_low=None, k_high=None, max_growth=float(re_plus[best]), k_max_growth=float(k[best]))
    return UnstableBand(
        k_low=float(positive[0]),
        k_high=float(positive[-1]),
        max_growth=float(re_plus[best]),
        k_max_growth=float(k[best]),
    )


def eckhaus_boundary(alpha: float, beta: float, kmax: float = 10.0, n: int = 4001) -> float:
    """
    Method Name :   eckhaus_boundary
    Description :   zeta_bd, the largest |zeta| at which the wave train is spectrally stable.
                    Outside A_h this is the sideband threshold zeta_s. In A_h a Hopf-Turing
                    band at k != 0 opens first; zeta_bd is then bisected on (0, zeta_s] against
                    max Re lambda_+ over 0 < k <= kmax.

    Output      :   zeta_bd
    On Failure  :   ParameterDomainError when 1 + alpha beta <= 0
    """
    try:
        _, zeta_s = sideband_threshold(alpha, beta)
        if classify_region(alpha, beta).region != Region.HOPF_TURING_AH:
            return zeta_s
        k = np.linspace(kmax / n, kmax, n)

        def unstable(zeta: float) -> bool:
            sigma = zeta ** -2 - 1.0
            lam_plus = _spectral_curves(CGLParams(alpha=alpha, beta=beta, zeta=zeta), k)[0]
            return bool(np.max(lam_plus.real) > 1e-12 * (1.0 + sigma))

        low, high = 0.05 * zeta_s, zeta_s
        if unstable(low):
            raise DegenerateCaseError(f"wave train at zeta={low:.4g} is already unstable for ({alpha}, {beta})", sys)
        if not unstable(high):
            logging.warning(f"no Hopf-Turing band below zeta_s={zeta_s:.6g} on |k| <= {kmax} for ({alpha}, {beta})")
            return zeta_s
        while high - low > 1e-13 * zeta_s:
            mid = 0.5 * (low + high)
            if unstable(mid):
                high = mid
            else:
                low = mid
        logging.info(f"Eckhaus boundary of ({alpha}, {beta}) in A_h: zeta_bd={low:.12g} < zeta_s={zeta_s:.12g}")
        return float(low)
    except Exception as e:
        raise EckhausKdVException(e, sys) from e
