"""State diagnostics and closed-form stationary predictions for the Bell scheme."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .hilbert import DensityMatrix, TwoQubitCorrelators, kron, pauli

_SYSY = kron(pauli("y"), pauli("y"))


def _mat(rho) -> np.ndarray:
    return rho.mat if isinstance(rho, DensityMatrix) else np.asarray(rho, dtype=complex)


def purity(rho) -> float:
    m = _mat(rho)
    return float(np.real(np.einsum("ij,ji->", m, m)))


def _psd_sqrt(m: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh(0.5 * (m + m.conj().T))
    vals = np.clip(vals, 0.0, None)
    return (vecs * np.sqrt(vals)) @ vecs.conj().T


def concurrence(rho) -> float:
    """Wootters concurrence of a two-qubit state."""
    m = _mat(rho)
    if m.shape != (4, 4):
        raise ValueError("concurrence is defined for 4x4 two-qubit states")
    root = _psd_sqrt(m)
    flipped = _SYSY @ m.conj() @ _SYSY
    mu = np.linalg.eigvalsh(root @ flipped @ root)
    if mu[0] < -1e-10:
        raise ValueError(f"spin-flipped product has negative eigenvalue {mu[0]:.3e}")
    s = np.sqrt(np.clip(mu, 0.0, None))[::-1]
    return float(max(0.0, s[0] - s[1] - s[2] - s[3]))


def fidelity_to_pure(rho, target) -> float:
    """``<psi| rho |psi>`` for a normalized target vector."""
    psi = np.asarray(target, dtype=complex).ravel()
    if abs(np.linalg.norm(psi) - 1.0) > 1e-10:
        raise ValueError("target state must be normalized")
    return float(np.real(psi.conj() @ _mat(rho) @ psi))


def bloch_modulus_squared(rho) -> float:
    m = _mat(rho)
    return float(sum(np.real(np.trace(pauli(a) @ m)) ** 2 for a in "xyz"))


@dataclass(frozen=True)
class StationaryBellPrediction:
    concurrence: float
    purity: float

    def __post_init__(self):
        if not (-1e-12 <= self.concurrence <= 1 + 1e-12):
            raise ValueError("concurrence out of [0, 1]")
        if not (0.25 - 1e-12 <= self.purity <= 1 + 1e-12):
            raise ValueError("two-qubit purity out of [1/4, 1]")


def bell_correlator_continuum(lambda_B: float, lambda_R: float) -> float:
    """Common value of ``<xx> = -<yy> = <zz>`` in the frequent-measurement limit."""
    b2, r2 = lambda_B**2, lambda_R**2
    if b2 + r2 == 0:
        raise ValueError("lambda_B and lambda_R cannot both vanish")
    return (r2 - b2) / (r2 + 3 * b2)


def stationary_bell_prediction(lambda_B: float, lambda_R: float) -> StationaryBellPrediction:
    """Stationary concurrence and purity in the frequent-measurement limit (step function with Theta(0) = 0)."""
    b2, r2 = lambda_B**2, lambda_R**2
    if b2 + r2 == 0:
        raise ValueError("lambda_B and lambda_R cannot both vanish")
    excess = r2 - 3 * b2
    conc = excess / (r2 + 3 * b2) if excess > 0 else 0.0
    pur = (r2**2 + 3 * b2**2) / (r2 + 3 * b2) ** 2
    return StationaryBellPrediction(conc, pur)


def bell_diagonal_correlators(xx: float, yy: float, zz: float, xy: float = 0.0, yx: float | None = None) -> TwoQubitCorrelators:
    yx = xy if yx is None else yx
    return TwoQubitCorrelators.from_expectations({"xx": xx, "yy": yy, "zz": zz, "xy": xy, "yx": yx})


def stationary_correlators_finite_dt(p) -> TwoQubitCorrelators:
    """Stationary two-qubit correlators of the Bell feedback iteration at finite ``dt``.

    Uses ``Omega = (omega1 + omega2) dt`` and ``Lambda_B/R = gamma dt lambda_B/R^2``.
    All local expectation values vanish; the non-zero ones are
    ``<xy> = <yx>``, ``<xx> = -<yy>`` and ``<zz>``.
    """
    lb, lr, om = p.Lambda_B, p.Lambda_R, p.Omega
    if not np.all(np.isfinite([lb, lr, om])):
        raise ValueError("Lambda_B, Lambda_R and Omega must be finite")
    e = np.exp
    cos, sin = np.cos(om), np.sin(om)
    den_xy = (
        e(6 * lr)
        + e(4 * lb + 2 * lr) * (3 - 4 * e(4 * lr))
        + (e(2 * lb) + e(2 * lr)) * (2 * e(2 * lb + 4 * lr) - e(2 * lb) - e(2 * lr)) * cos
    )
    den_zz = (
        -e(6 * lr)
        + e(4 * lb + 2 * lr) * (4 * e(4 * lr) - 3)
        + (e(4 * lb) + e(4 * lr) - 2 * e(4 * lb + 4 * lr) - 2 * e(2 * lb + 2 * lr) * (e(4 * lr) - 1)) * cos
    )
    if abs(den_xy) < 1e-14 or abs(den_zz) < 1e-14:
        raise ValueError("degenerate parameter point: vanishing denominator")
    num = 4 * e(3 * (lb + lr)) * np.sinh(lb - lr) * np.sinh(2 * lr)
    xy = num * sin / den_xy
    xx = num * cos / den_xy
    zz = (e(4 * lr) - e(4 * lb)) * (e(2 * lr) - cos) / den_zz
    return bell_diagonal_correlators(xx, -xx, zz, xy)
