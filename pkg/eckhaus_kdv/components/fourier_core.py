"""Periodic spectral infrastructure.

Coefficients are stored as samples of the continuous Fourier transform,
``u_hat(k_j) = L / (sqrt(2 pi) n) * fft(u)_j``, so that the rectangle rule
``dk * sum |u_hat|^2`` is exactly the physical L2 norm and grid refinement
converges to the continuum integrals. Wavenumbers are kept in FFT order with
the Nyquist mode counted as ``+n/2``.
"""
import sys
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Tuple

import numpy as np

from eckhaus_kdv.constants import DEALIAS_FRACTION, OVERFLOW_EXPONENT, UPSILON_SINGULAR_TOL
from eckhaus_kdv.entity.params import CGLParams
from eckhaus_kdv.exception import (
    EckhausKdVException,
    GridMismatchError,
    NumericalInstabilityError,
    ParameterDomainError,
    ZeroModePolicyError,
)
from eckhaus_kdv.logger import logging

_DIRECTIONS = ("forward", "inverse")


@dataclass(frozen=True)
class SpectralGrid:
    n: int
    length: float

    def __post_init__(self):
        if self.n < 4 or self.n & (self.n - 1):
            raise ParameterDomainError(f"grid size n={self.n} must be a power of two >= 4", sys)
        if not self.length > 0.0:
            raise ParameterDomainError(f"grid length L={self.length} must be positive", sys)

    @cached_property
    def mode_index(self) -> np.ndarray:
        j = np.fft.fftfreq(self.n, d=1.0 / self.n)
        j[self.n // 2] = self.n // 2
        return j

    @cached_property
    def wavenumbers(self) -> np.ndarray:
        return 2.0 * np.pi * self.mode_index / self.length

    @property
    def dk(self) -> float:
        return 2.0 * np.pi / self.length

    @property
    def dx(self) -> float:
        return self.length / self.n

    @property
    def nyquist(self) -> int:
        return self.n // 2

    @property
    def k_max(self) -> float:
        return np.pi * self.n / self.length

    @cached_property
    def x(self) -> np.ndarray:
        return self.length * np.arange(self.n) / self.n

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        return np.abs(self.mode_index) < DEALIAS_FRACTION * self.n / 2

    @property
    def scale(self) -> float:
        return self.length / (np.sqrt(2.0 * np.pi) * self.n)

    def same_as(self, other: "SpectralGrid") -> bool:
        return self.n == other.n and abs(self.length - other.length) <= 1e-12 * self.length

    def to_coeffs(self, values: np.ndarray) -> np.ndarray:
        return self.scale * np.fft.fft(values, axis=-1)

    def to_values(self, coeffs: np.ndarray) -> np.ndarray:
        return np.fft.ifft(coeffs, axis=-1) / self.scale


def dealias_mask(grid: SpectralGrid) -> np.ndarray:
    return grid.dealias_mask


def check_same_grid(first: SpectralGrid, second: SpectralGrid) -> None:
    if not first.same_as(second):
        raise GridMismatchError(
            f"grid mismatch: (n={first.n}, L={first.length}) vs (n={second.n}, L={second.length})", sys
        )


def point_values(grid: SpectralGrid, coeffs: np.ndarray, x: float, real: bool = True):
    """Evaluate coefficient rows (..., n) at x; the Nyquist mode of real data contributes a cosine."""
    k = grid.wavenumbers
    phase = np.exp(1j * k * x)
    if real:
        phase[grid.nyquist] = np.cos(k[grid.nyquist] * x)
    values = np.asarray(coeffs) @ phase / (grid.scale * grid.n)
    return values.real if real else values


def realify(coeffs: np.ndarray, grid: SpectralGrid) -> np.ndarray:
    """Projection of coefficient rows onto the coefficients of real fields."""
    mirror = (-np.arange(grid.n)) % grid.n
    return 0.5 * (coeffs + np.conj(coeffs[..., mirror]))


def _is_conjugate_symmetric(values: np.ndarray, grid: SpectralGrid, rtol: float = 1e-12) -> bool:
    """values[-j] == conj(values[j]) for the modes that have a partner, values[0] real."""
    j = np.arange(1, grid.n // 2)
    first = values[..., j]
    partner = values[..., grid.n - j]
    scale = max(float(np.max(np.abs(values))), 1e-300)
    if np.max(np.abs(partner - np.conj(first)), initial=0.0) > rtol * scale:
        return False
    return bool(np.max(np.abs(np.imag(values[..., 0])), initial=0.0) <= rtol * scale)


def real_or_complex(grid: SpectralGrid, coeffs: np.ndarray, is_real: bool) -> "SpectralField":
    """Field from computed coefficients; real ones are projected onto real form, not checked."""
    coeffs = np.asarray(coeffs, dtype=complex)
    return SpectralField(grid, realify(coeffs, grid) if is_real else coeffs, is_real)


@dataclass(frozen=True, eq=False)
class SpectralField:
    grid: SpectralGrid
    coeffs: np.ndarray
    is_real: bool = True

    def __post_init__(self):
        coeffs = np.asarray(self.coeffs, dtype=complex)
        if coeffs.shape != (self.grid.n,):
            raise GridMismatchError(f"coefficient shape {coeffs.shape} does not match grid n={self.grid.n}", sys)
        if self.is_real:
            if not _is_conjugate_symmetric(coeffs, self.grid, rtol=1e-10):
                raise EckhausKdVException("coefficients of a real field are not conjugate symmetric", sys)
            coeffs = realify(coeffs, self.grid)
        object.__setattr__(self, "coeffs", coeffs)

    @classmethod
    def from_physical(cls, grid: SpectralGrid, values: np.ndarray, is_real: bool = None) -> "SpectralField":
        values = np.asarray(values)
        if is_real is None:
            is_real = not np.iscomplexobj(values)
        return real_or_complex(grid, grid.to_coeffs(values), is_real)

    @classmethod
    def zeros(cls, grid: SpectralGrid, is_real: bool = True) -> "SpectralField":
        return cls(grid=grid, coeffs=np.zeros(grid.n, dtype=complex), is_real=is_real)

    def physical(self) -> np.ndarray:
        values = self.grid.to_values(self.coeffs)
        return values.real if self.is_real else values

    def sup(self) -> float:
        return float(np.max(np.abs(self.physical())))

    def mean(self) -> complex:
        return complex(self.coeffs[0] * np.sqrt(2.0 * np.pi) / self.grid.length)

    def at(self, x: float):
        """Trigonometric interpolant evaluated at an arbitrary point."""
        value = point_values(self.grid, self.coeffs, x, real=self.is_real)
        return float(value) if self.is_real else complex(value)

    def derivative(self, order: int = 1) -> "SpectralField":
        return apply_multiplier(Multiplier(lambda k: (1j * k) ** order, f"d^{order}"), self)

    def translate(self, dx: float) -> "SpectralField":
        """v(x) = u(x - dx)."""
        k = self.grid.wavenumbers
        coeffs = self.coeffs * np.exp(-1j * k * dx)
        if self.is_real:
            nyq = self.grid.nyquist
            coeffs[nyq] = self.coeffs[nyq].real * np.cos(k[nyq] * dx)
        return real_or_complex(self.grid, coeffs, self.is_real)

    def resample(self, grid: SpectralGrid) -> "SpectralField":
        """Spectral interpolation onto a grid of the same length (padding or truncation)."""
        if abs(grid.length - self.grid.length) > 1e-12 * grid.length:
            raise GridMismatchError(
                f"cannot resample between lengths {self.grid.length} and {grid.length}", sys
            )
        if grid.n == self.grid.n:
            return SpectralField(grid, self.coeffs.copy(), self.is_real)
        src, m = self.coeffs, min(grid.n, self.grid.n) // 2
        out = np.zeros(grid.n, dtype=complex)
        out[:m] = src[:m]
        out[grid.n - m + 1:] = src[self.grid.n - m + 1:]
        if grid.n < self.grid.n:
            # both +-m modes land on the new Nyquist sample
            out[m] = src[m] + src[self.grid.n - m]
        else:
            out[m] = 0.5 * src[m]
            out[grid.n - m] = 0.5 * src[m]
        return real_or_complex(grid, out, self.is_real)

    def _combine(self, other: "SpectralField", op) -> "SpectralField":
        check_same_grid(self.grid, other.grid)
        return real_or_complex(self.grid, op(self.coeffs, other.coeffs), self.is_real and other.is_real)

    def __add__(self, other):
        return self._combine(other, np.add)

    def __sub__(self, other):
        return self._combine(other, np.subtract)

    def __mul__(self, scalar: float):
        return real_or_complex(self.grid, self.coeffs * scalar, self.is_real and np.isrealobj(scalar))

    __rmul__ = __mul__

    def __neg__(self):
        return SpectralField(self.grid, -self.coeffs, self.is_real)


@dataclass(frozen=True)
class FieldPair:
    first: SpectralField
    second: SpectralField

    def __post_init__(self):
        check_same_grid(self.first.grid, self.second.grid)

    @property
    def grid(self) -> SpectralGrid:
        return self.first.grid

    @property
    def is_real(self) -> bool:
        return self.first.is_real and self.second.is_real

    def stack(self) -> np.ndarray:
        return np.stack([self.first.coeffs, self.second.coeffs])

    @classmethod
    def from_stack(cls, grid: SpectralGrid, coeffs: np.ndarray, is_real: bool = True) -> "FieldPair":
        return cls(real_or_complex(grid, coeffs[0], is_real), real_or_complex(grid, coeffs[1], is_real))


@dataclass(frozen=True)
class Multiplier:
    symbol: Callable[[np.ndarray], np.ndarray]
    label: str = ""

    def __call__(self, k: np.ndarray) -> np.ndarray:
        return np.broadcast_to(np.asarray(self.symbol(np.asarray(k, dtype=float)), dtype=complex), np.shape(k))

    def __mul__(self, other: "Multiplier") -> "Multiplier":
        return Multiplier(lambda k: self(k) * other(k), f"{self.label}*{other.label}")


@dataclass(frozen=True)
class AnalyticNormParams:
    mu: float = 0.0
    s: float = 0.0

    def __post_init__(self):
        if self.mu < 0.0 or self.s < 0.0:
            raise ParameterDomainError(f"analytic norm needs mu >= 0 and s >= 0, got mu={self.mu}, s={self.s}", sys)


def apply_multiplier(m: Multiplier, u: SpectralField, grid: SpectralGrid = None) -> SpectralField:
    if grid is not None:
        check_same_grid(grid, u.grid)
    g = m(u.grid.wavenumbers)
    coeffs = g * u.coeffs
    is_real = u.is_real and _is_conjugate_symmetric(g, u.grid)
    return real_or_complex(u.grid, coeffs, is_real)


def apply_matrix_multiplier(symbol: Callable[[np.ndarray], np.ndarray], pair: FieldPair) -> FieldPair:
    """Per-wavenumber 2x2 product; ``symbol(k)`` has shape (n, 2, 2)."""
    g = np.asarray(symbol(pair.grid.wavenumbers), dtype=complex)
    coeffs = np.einsum("kij,jk->ik", g, pair.stack())
    flat = g.reshape(pair.grid.n, 4).T
    is_real = pair.is_real and _is_conjugate_symmetric(flat, pair.grid)
    return FieldPair.from_stack(pair.grid, coeffs, is_real)


def theta_hat(k: np.ndarray) -> np.ndarray:
    """ik min(1, 1/|k|): a derivative for |k| <= 1, bounded by 1 beyond."""
    k = np.asarray(k, dtype=float)
    return np.where(np.abs(k) <= 1.0, 1j * k, 1j * np.sign(k))


def theta_symbol() -> Multiplier:
    return Multiplier(theta_hat, "theta")


def _direction(direction: str) -> bool:
    if direction not in _DIRECTIONS:
        raise ParameterDomainError(f"direction must be one of {_DIRECTIONS}, got {direction!r}", sys)
    return direction == "forward"


def _zero_mode_check(u: SpectralField, zero_mode: str, what: str) -> None:
    if zero_mode not in ("reject", "drop"):
        raise ParameterDomainError(f"zero_mode policy must be 'reject' or 'drop', got {zero_mode!r}", sys)
    scale = max(float(np.max(np.abs(u.coeffs))), 1e-300)
    if abs(u.coeffs[0]) > 1e-12 * scale:
        if zero_mode == "reject":
            raise ZeroModePolicyError(f"{what}: nonzero mean {u.mean()} has no preimage at k=0", sys)
        logging.warning(f"{what}: dropping mean {u.mean()}")


def theta_inverse(u: SpectralField, zero_mode: str = "reject") -> SpectralField:
    _zero_mode_check(u, zero_mode, "theta inverse")
    k = u.grid.wavenumbers
    symbol = np.zeros_like(k, dtype=complex)
    nonzero = k != 0.0
    symbol[nonzero] = 1.0 / theta_hat(k[nonzero])
    return apply_multiplier(Multiplier(lambda _: symbol, "theta^-1"), u)


def antiderivative(u: SpectralField) -> Tuple[SpectralField, float]:
    """Mean-free periodic primitive P and the mean m of u, so that u = m + P'."""
    k = u.grid.wavenumbers
    symbol = np.zeros_like(k, dtype=complex)
    nonzero = k != 0.0
    symbol[nonzero] = 1.0 / (1j * k[nonzero])
    primitive = apply_multiplier(Multiplier(lambda _: symbol, "d^-1"), u)
    mean = u.mean()
    return primitive, (mean.real if u.is_real else mean)


def s_theta(v: FieldPair, direction: str = "forward") -> FieldPair:
    forward = _direction(direction)
    absk = np.abs(v.grid.wavenumbers)
    weight = np.minimum(1.0, 1.0 / np.maximum(absk, 1e-300)) if forward else np.maximum(1.0, absk)
    first = apply_multiplier(Multiplier(lambda _: weight, "S_theta"), v.first)
    return FieldPair(first, v.second)


def gamma_over_theta(params: CGLParams, k: np.ndarray) -> np.ndarray:
    """gamma(k)/theta_hat(k) written without the removable 0/0 at k = 0."""
    k = np.asarray(k, dtype=float)
    return -(2.0 + 1j * params.alpha * k) * np.maximum(1.0, np.abs(k)) / params.sigma


def _upsilon(params: CGLParams, k: np.ndarray) -> np.ndarray:
    gamma = (params.alpha * k ** 2 - 2j * k) / params.sigma
    return np.sqrt(1.0 - gamma ** 2 - 2.0 * params.beta * gamma + 0j)


def s_diag_symbols(params: CGLParams, k: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """The 2x2 symbols of S_diag and its inverse, shape (len(k), 2, 2)."""
    k = np.atleast_1d(np.asarray(k, dtype=float))
    upsilon = _upsilon(params, k)
    small = np.abs(upsilon) < UPSILON_SINGULAR_TOL
    if np.any(small):
        raise NumericalInstabilityError(
            f"near-singular upsilon at k={k[small].tolist()}: S_diag is not invertible there", sys
        )
    ratio = gamma_over_theta(params, k)
    forward = np.empty(k.shape + (2, 2), dtype=complex)
    forward[:, 0, 0] = 1.0
    forward[:, 0, 1] = -(1.0 - upsilon) / ratio
    forward[:, 1, 0] = -1.0
    forward[:, 1, 1] = (1.0 + upsilon) / ratio
    inverse = np.empty_like(forward)
    inverse[:, 0, 0] = 1.0 + upsilon
    inverse[:, 0, 1] = 1.0 - upsilon
    inverse[:, 1, 0] = ratio
    inverse[:, 1, 1] = ratio
    inverse /= (2.0 * upsilon)[:, None, None]
    return forward, inverse


def s_diag(params: CGLParams, y: FieldPair, direction: str = "forward") -> FieldPair:
    forward = _direction(direction)
    symbols = s_diag_symbols(params, y.grid.wavenumbers)
    chosen = symbols[0] if forward else symbols[1]
    return apply_matrix_multiplier(lambda _: chosen, y)


def s_omega(mu: float, y: FieldPair, direction: str = "forward") -> FieldPair:
    """Weight e^{+mu|k|} (forward) or e^{-mu|k|} (inverse) on both components."""
    sign = 1.0 if _direction(direction) else -1.0
    absk = np.abs(y.grid.wavenumbers)
    exponent = sign * mu * absk
    worst = int(np.argmax(exponent))
    if exponent[worst] > OVERFLOW_EXPONENT:
        raise NumericalInstabilityError(
            f"S_omega overflow: mu|k| = {exponent[worst]:.6g} at k = {y.grid.wavenumbers[worst]:.6g}", sys
        )
    weight = np.exp(exponent)
    pair = FieldPair(
        apply_multiplier(Multiplier(lambda _: weight, "S_omega"), y.first),
        apply_multiplier(Multiplier(lambda _: weight, "S_omega"), y.second),
    )
    if not (np.all(np.isfinite(pair.first.coeffs)) and np.all(np.isfinite(pair.second.coeffs))):
        bad = np.flatnonzero(~np.isfinite(pair.stack()).all(axis=0))
        k_bad = y.grid.wavenumbers[bad[np.argmax(absk[bad])]]
        raise NumericalInstabilityError(f"S_omega produced non-finite coefficients, largest at k = {k_bad:.6g}", sys)
    return pair


def analytic_norm(u: SpectralField, p: AnalyticNormParams = AnalyticNormParams()) -> float:
    """sqrt(dk * sum e^{2 mu |k|} (1+k^2)^s |u_hat|^2); +inf (logged) on overflow."""
    k = u.grid.wavenumbers
    with np.errstate(over="ignore", invalid="ignore"):
        weight = np.exp(2.0 * p.mu * np.abs(k)) * (1.0 + k ** 2) ** p.s
        total = u.grid.dk * np.sum(weight * np.abs(u.coeffs) ** 2)
    if not np.isfinite(total):
        logging.warning(f"analytic norm overflow for mu={p.mu}, s={p.s} on n={u.grid.n}")
        return float("inf")
    return float(np.sqrt(total))


def hm_norm(u: SpectralField, m: float) -> float:
    return analytic_norm(u, AnalyticNormParams(mu=0.0, s=m))


def w_norm(u: SpectralField, mu: float = 0.0, m: float = 0.0) -> float:
    """dk * sum (1+|k|^m) e^{mu|k|} |u_hat|."""
    absk = np.abs(u.grid.wavenumbers)
    with np.errstate(over="ignore"):
        total = u.grid.dk * np.sum((1.0 + absk ** m) * np.exp(mu * absk) * np.abs(u.coeffs))
    if not np.isfinite(total):
        logging.warning(f"W norm overflow for mu={mu}, m={m} on n={u.grid.n}")
        return float("inf")
    return float(total)


def padded_product(u: SpectralField, v: SpectralField) -> SpectralField:
    """Alias-free product of two fields (two-fold zero padding)."""
    check_same_grid(u.grid, v.grid)
    fine = SpectralGrid(2 * u.grid.n, u.grid.length)
    values = u.resample(fine).physical() * v.resample(fine).physical()
    return SpectralField.from_physical(fine, values, is_real=u.is_real and v.is_real).resample(u.grid)
