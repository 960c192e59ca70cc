import sys
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from eckhaus_kdv.exception import ParameterDomainError


@dataclass(frozen=True)
class CGLParams:
    """Parameter bundle of a CGL wave train Psi0 exp(i(zeta X + Omega0 T)).

    ``sigma`` defaults to zeta**-2 - 1. When the bundle is built with
    :meth:`marginal`, sigma is stored as sigma_s - epsilon**2 exactly and zeta
    is derived from it. ``c`` defaults to the group velocity 2(alpha - beta).
    """

    alpha: float
    beta: float
    zeta: float
    epsilon: float = 0.0
    c: Optional[float] = None
    sigma: Optional[float] = field(default=None)

    def __post_init__(self):
        if not (0.0 < abs(self.zeta) < 1.0):
            raise ParameterDomainError(f"zeta={self.zeta} must lie in (-1,1) without 0", sys)
        if self.epsilon < 0.0:
            raise ParameterDomainError(f"epsilon={self.epsilon} must be >= 0", sys)
        if self.sigma is None:
            object.__setattr__(self, "sigma", float(self.zeta ** -2 - 1.0))
        if self.c is None:
            object.__setattr__(self, "c", 2.0 * (self.alpha - self.beta))

    @classmethod
    def marginal(cls, alpha: float, beta: float, epsilon: float, c: Optional[float] = None) -> "CGLParams":
        """Wave train at distance epsilon**2 inside the Eckhaus boundary."""
        sigma_s = sideband_sigma(alpha, beta)
        sigma = sigma_s - epsilon ** 2
        if sigma <= 0.0:
            raise ParameterDomainError(
                f"sigma = sigma_s - eps^2 = {sigma} <= 0 for alpha={alpha}, beta={beta}, eps={epsilon}", sys
            )
        zeta = float((1.0 + sigma) ** -0.5)
        return cls(alpha=alpha, beta=beta, zeta=zeta, epsilon=epsilon, c=c, sigma=sigma)

    @property
    def psi0(self) -> float:
        return float(np.sqrt(1.0 - self.zeta ** 2))

    @property
    def r0(self) -> float:
        return float(np.log(self.psi0))

    @property
    def Omega0(self) -> float:
        return -self.alpha * self.zeta ** 2 - self.beta * self.psi0 ** 2

    @property
    def sigma_s(self) -> float:
        return sideband_sigma(self.alpha, self.beta)

    @property
    def zeta_bd(self) -> float:
        """zeta_s unless (alpha, beta) lies in A_h, where the Hopf-Turing threshold is bisected."""
        from eckhaus_kdv.components.spectral_analysis import eckhaus_boundary

        return eckhaus_boundary(self.alpha, self.beta)

    def as_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "beta": self.beta,
            "zeta": self.zeta,
            "epsilon": self.epsilon,
            "c": self.c,
            "sigma": self.sigma,
            "psi0": self.psi0,
            "Omega0": self.Omega0,
        }


def sideband_sigma(alpha: float, beta: float) -> float:
    """sigma_s = 2(1+beta^2)/(1+alpha beta); requires 1 + alpha beta > 0."""
    q = 1.0 + alpha * beta
    if q <= 0.0:
        raise ParameterDomainError(f"1 + alpha*beta = {q} <= 0: no sideband threshold", sys)
    return 2.0 * (1.0 + beta ** 2) / q
