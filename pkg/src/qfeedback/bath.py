"""Bosonic bath spectra: Ohmic thermal spectrum and its flat high-temperature limit.

Frequencies are in units with hbar = k_B = 1. The even Fourier transform of the
bath correlation function is ``gamma(w) = J(w) [1 + n_B(w)]`` with the Ohmic
density ``J(w) = 2 alpha w exp(-|w| / w_c)`` continued oddly to ``w < 0``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

OHMIC = "ohmic_thermal"
FLAT = "flat"


@dataclass(frozen=True)
class BathSpectrum:
    kind: str = FLAT
    alpha: float = 0.0
    omega_c: float = np.inf
    beta: float = 0.0
    gamma_flat: float = 1.0

    def __post_init__(self):
        if self.kind not in (OHMIC, FLAT):
            raise ValueError(f"unknown bath kind {self.kind!r}")
        if self.kind == OHMIC:
            if self.alpha < 0 or not self.beta > 0 or not self.omega_c > 0:
                raise ValueError("ohmic bath needs alpha >= 0, beta > 0 and omega_c > 0")
        elif not self.gamma_flat >= 0:
            raise ValueError("flat bath rate must be non-negative")

    @classmethod
    def flat(cls, gamma: float = 1.0) -> "BathSpectrum":
        return cls(kind=FLAT, gamma_flat=gamma)

    @classmethod
    def ohmic(cls, alpha: float, omega_c: float, beta: float) -> "BathSpectrum":
        return cls(kind=OHMIC, alpha=alpha, omega_c=omega_c, beta=beta, gamma_flat=np.nan)

    @property
    def is_flat(self) -> bool:
        return self.kind == FLAT


def bose(beta: float, omega: float) -> float:
    """Bose-Einstein occupation ``1 / (exp(beta w) - 1)``."""
    return 1.0 / np.expm1(beta * omega)


def spectral_density(s: BathSpectrum, omega: float) -> float:
    if s.kind != OHMIC:
        raise ValueError("a flat spectrum has no spectral density")
    return 2.0 * s.alpha * omega * np.exp(-abs(omega) / s.omega_c)


def gamma_of_omega(s: BathSpectrum, omega: float) -> float:
    """Even Fourier transform of the bath correlation function at frequency ``omega``.

    For the flat kind this is ``gamma_flat`` everywhere. For the Ohmic kind the
    removable singularity at ``omega = 0`` is evaluated as its limit ``2 alpha / beta``.
    """
    if s.kind == FLAT:
        return float(s.gamma_flat)
    if omega == 0.0:
        return 2.0 * s.alpha / s.beta
    # J(w) [1 + n_B(w)] = 2 alpha e^{-|w|/w_c} * w / (1 - e^{-beta w})
    with np.errstate(over="ignore"):
        denom = -np.expm1(-s.beta * omega)
    return float(2.0 * s.alpha * np.exp(-abs(omega) / s.omega_c) * omega / denom)


def thermal_sigma_z(s: BathSpectrum, omega0: float) -> float:
    """Stationary ``<sigma_z>`` of the thermalizing populations, ``(g_- - g_+) / (g_- + g_+)``."""
    g_plus = gamma_of_omega(s, omega0)
    g_minus = gamma_of_omega(s, -omega0)
    if g_plus + g_minus <= 0:
        raise ValueError("both transition rates vanish; thermal state undefined")
    return (g_minus - g_plus) / (g_minus + g_plus)
