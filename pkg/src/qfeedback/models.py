"""Concrete qubit models: measurement sets, conditioned generators and protocols.

Single qubit: ``H = (omega / 2) sigma_z`` with ``sigma_z |0> = +|0>``, so |0> is
the upper level and coherences rotate as ``rho_01 ~ exp(-i omega t)``. The
outcome-dependent dissipation couples ``lambda_pm (n_pm . sigma)`` to a bath,
treated in Born-Markov-secular form.

Two qubits: ``H = (omega1 / 2) sigma_z^1 + (omega2 / 2) sigma_z^2`` with both
qubits coupled through ``lambda_B/R (sigma_x^1 + sigma_x^2)`` to a flat bath,
measured by the Bell projector ``M_B = |Phi+><Phi+|`` and ``M_R = 1 - M_B``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .bath import BathSpectrum, gamma_of_omega
from .engine import EffectivePropagator, FeedbackProtocol, effective_propagator
from .hilbert import kron, pauli
from .superop import (
    QUBIT,
    TWO_QUBIT,
    MeasurementSet,
    SuperOperator,
    expm,
    lindblad_superop,
    liouvillian_from_rates,
    sandwich_superop,
)

PLUS, MINUS = "plus", "minus"
BELL, REST = "B", "R"


def _check_branch(branch: str, allowed) -> str:
    if branch not in allowed:
        raise ValueError(f"branch must be one of {allowed}, got {branch!r}")
    return branch


@dataclass(frozen=True)
class SingleQubitParams:
    """Parameters of the single-qubit feedback model.

    ``lamb_shift`` is the (purely imaginary) difference of odd Fourier
    transforms ``sigma(+omega) - sigma(-omega)`` entering the coherence
    equations; it is not computed from the bath.
    """

    omega: float = 5.0
    lambda_plus: float = 1.0
    lambda_minus: float = 5.0
    theta_plus: float = np.pi / 2
    theta_minus: float = np.pi / 2
    phi_plus: float = 0.0
    phi_minus: float = 0.0
    meas_theta: float = np.pi / 2
    meas_phi: float = 0.0
    bath: BathSpectrum = field(default_factory=BathSpectrum.flat)
    lamb_shift: complex = 0j

    def __post_init__(self):
        if self.lambda_plus < 0 or self.lambda_minus < 0:
            raise ValueError("coupling strengths lambda_plus/lambda_minus must be non-negative")
        angles = (self.theta_plus, self.theta_minus, self.phi_plus, self.phi_minus, self.meas_theta, self.meas_phi)
        if not np.all(np.isfinite(angles)) or not np.isfinite(self.omega):
            raise ValueError("angles and omega must be finite")
        if abs(complex(self.lamb_shift).real) > 1e-14:
            raise ValueError("lamb_shift must be purely imaginary")

    def coupling(self, branch: str) -> tuple[float, float]:
        """``(lambda, theta)`` of the given branch."""
        if _check_branch(branch, (PLUS, MINUS)) == PLUS:
            return self.lambda_plus, self.theta_plus
        return self.lambda_minus, self.theta_minus

    def direction(self, branch: str) -> np.ndarray:
        """Unit vector ``n`` of the dissipation channel for ``branch``."""
        theta = self.theta_plus if branch == PLUS else self.theta_minus
        phi = self.phi_plus if branch == PLUS else self.phi_minus
        return np.array([np.sin(theta) * np.cos(phi), np.sin(theta) * np.sin(phi), np.cos(theta)])


@dataclass(frozen=True)
class TwoQubitParams:
    omega1: float = 0.0
    omega2: float = 0.0
    lambda_B: float = 1.0
    lambda_R: float = 5.0
    gamma: float = 1.0
    dt: float = 0.01

    def __post_init__(self):
        if self.lambda_B < 0 or self.lambda_R < 0:
            raise ValueError("lambda_B and lambda_R must be non-negative")
        if self.dt < 0:
            raise ValueError("dt must be non-negative")
        if self.gamma < 0:
            raise ValueError("gamma must be non-negative")

    @property
    def Omega(self) -> float:
        """Dimensionless phase ``(omega1 + omega2) dt``."""
        return (self.omega1 + self.omega2) * self.dt

    @property
    def Lambda_B(self) -> float:
        return self.gamma * self.dt * self.lambda_B**2

    @property
    def Lambda_R(self) -> float:
        return self.gamma * self.dt * self.lambda_R**2


@dataclass(frozen=True)
class JumpParams:
    """Jump detection with unitary kick ``U_c`` after each click and background generator ``L0``."""

    gamma: float
    control_unitary: np.ndarray
    base_liouvillian: SuperOperator

    def __post_init__(self):
        u = np.array(self.control_unitary, dtype=complex)
        if u.shape != (2, 2) or np.max(np.abs(u.conj().T @ u - np.eye(2))) > 1e-10:
            raise ValueError("control_unitary must be a 2x2 unitary")
        if self.gamma < 0:
            raise ValueError("gamma must be non-negative")
        if self.base_liouvillian.convention != QUBIT:
            raise ValueError("base Liouvillian must act on a single qubit")
        u.setflags(write=False)
        object.__setattr__(self, "control_unitary", u)


# --- single qubit --------------------------------------------------------------


def measurement_set_general(theta: float, phi: float) -> MeasurementSet:
    """Projective measurement of ``n . sigma`` with ``n = (sin t cos p, sin t sin p, cos t)``."""
    n = (np.sin(theta) * np.cos(phi), np.sin(theta) * np.sin(phi), np.cos(theta))
    n_sigma = n[0] * pauli("x") + n[1] * pauli("y") + n[2] * pauli("z")
    ops = [0.5 * (np.eye(2) + n_sigma), 0.5 * (np.eye(2) - n_sigma)]
    return MeasurementSet.from_operators(ops, (PLUS, MINUS), QUBIT, projective=True)


def sigma_x_measurement() -> MeasurementSet:
    return measurement_set_general(np.pi / 2, 0.0)


def single_qubit_liouvillian(p: SingleQubitParams, branch: str) -> SuperOperator:
    """Born-Markov-secular generator of the ``branch`` coupling.

    Populations exchange at ``lambda^2 sin^2(theta) gamma(+-omega)``; the
    coherence ``rho_01`` rotates at ``-i omega`` and decays at
    ``lambda^2 [sin^2(theta) (gamma(+omega) + gamma(-omega)) / 2 + 2 cos^2(theta) gamma(0)]``.
    """
    lam, theta = p.coupling(branch)
    s2 = lam**2 * np.sin(theta) ** 2
    c2 = lam**2 * np.cos(theta) ** 2
    g_up = gamma_of_omega(p.bath, p.omega)
    g_down = gamma_of_omega(p.bath, -p.omega)
    g_zero = gamma_of_omega(p.bath, 0.0)
    block = [[-s2 * g_up, s2 * g_down], [s2 * g_up, -s2 * g_down]]
    damping = s2 * (g_up + g_down) / 2 + 2 * c2 * g_zero
    shift = s2 * complex(p.lamb_shift) / 2
    rates = [-1j * p.omega - shift - damping, 1j * p.omega + shift - damping]
    return liouvillian_from_rates(block, rates, (), QUBIT)


def dephasing_rate(p: SingleQubitParams, branch: str) -> float:
    """Decay rate of ``|rho_01|^2`` under the branch generator."""
    lam, theta = p.coupling(branch)
    g0 = gamma_of_omega(p.bath, 0.0)
    g_sum = gamma_of_omega(p.bath, p.omega) + gamma_of_omega(p.bath, -p.omega)
    return lam**2 * (4 * np.cos(theta) ** 2 * g0 + np.sin(theta) ** 2 * g_sum)


def single_qubit_protocol(p: SingleQubitParams, dt: float) -> FeedbackProtocol:
    """Measure ``n . sigma``, then evolve with ``L_plus`` or ``L_minus`` for ``dt``."""
    meas = measurement_set_general(p.meas_theta, p.meas_phi)
    gens = (single_qubit_liouvillian(p, PLUS), single_qubit_liouvillian(p, MINUS))
    return FeedbackProtocol.from_liouvillians(meas, gens, dt)


def zeno_propagator(omega: float, dt: float) -> SuperOperator:
    """Effective propagator of sigma_x measurements with free rotation and no dissipation."""
    if dt < 0:
        raise ValueError("dt must be non-negative")
    ph = np.exp(-1j * omega * dt)
    mat = 0.5 * np.array(
        [
            [1, 1, 0, 0],
            [1, 1, 0, 0],
            [0, 0, ph, ph],
            [0, 0, np.conj(ph), np.conj(ph)],
        ]
    )
    return SuperOperator(mat, QUBIT)


def zeno_power_closed_form(omega: float, dt: float, n: int) -> SuperOperator:
    """``zeno_propagator(omega, dt) ** n`` via ``diag(1, 1, c, c) P`` with ``c = cos(omega dt) ** (n - 1)``."""
    if n < 1:
        raise ValueError("n must be at least one")
    c = np.cos(omega * dt) ** (n - 1)
    return SuperOperator(np.diag([1, 1, c, c]) @ zeno_propagator(omega, dt).mat, QUBIT)


# --- two qubits ----------------------------------------------------------------


def _level_energy(index: int, omega1: float, omega2: float) -> float:
    a, b = divmod(index, 2)
    return 0.5 * omega1 * (-1) ** a + 0.5 * omega2 * (-1) ** b


# d rho_target / dt += lambda^2 gamma rho_source, for coherences between states
# with equal energy differences (|00>=0, |01>=1, |10>=2, |11>=3)
_BELL_COHERENCE_COUPLINGS = (
    ((0, 1), (2, 3)),
    ((0, 2), (1, 3)),
    ((1, 0), (3, 2)),
    ((1, 3), (0, 2)),
    ((2, 0), (3, 1)),
    ((2, 3), (0, 1)),
    ((3, 1), (2, 0)),
    ((3, 2), (1, 0)),
)


def two_qubit_liouvillian(p: TwoQubitParams, branch: str) -> SuperOperator:
    """Flat-bath generator for the collective ``sigma_x^1 + sigma_x^2`` coupling of ``branch``."""
    lam = p.lambda_B if _check_branch(branch, (BELL, REST)) == BELL else p.lambda_R
    k = lam**2 * p.gamma
    block = k * np.array(
        [
            [-2, 1, 1, 0],
            [1, -2, 0, 1],
            [1, 0, -2, 1],
            [0, 1, 1, -2],
        ],
        dtype=float,
    )
    rates = [
        -1j * (_level_energy(i, p.omega1, p.omega2) - _level_energy(j, p.omega1, p.omega2)) - 2 * k
        for i, j in (TWO_QUBIT.order[s] for s in TWO_QUBIT.coherence_slots)
    ]
    couplings = [(t, s, k) for t, s in _BELL_COHERENCE_COUPLINGS]
    return liouvillian_from_rates(block, rates, couplings, TWO_QUBIT)


def bell_state() -> np.ndarray:
    """``(|00> + |11>) / sqrt(2)``."""
    return np.array([1, 0, 0, 1], dtype=complex) / np.sqrt(2)


def bell_measurement_set() -> MeasurementSet:
    psi = bell_state()
    m_b = np.outer(psi, psi.conj())
    return MeasurementSet.from_operators([m_b, np.eye(4) - m_b], (BELL, REST), TWO_QUBIT, projective=True)


def two_qubit_protocol(p: TwoQubitParams) -> FeedbackProtocol:
    gens = (two_qubit_liouvillian(p, BELL), two_qubit_liouvillian(p, REST))
    return FeedbackProtocol.from_liouvillians(bell_measurement_set(), gens, p.dt)


# --- jump detection --------------------------------------------------------------


def jump_measurement_set(gamma: float, dt: float) -> MeasurementSet:
    """Click / no-click operators for detecting the decay |1> -> |0> within ``dt``."""
    p_click = gamma * dt
    if not 0 <= p_click <= 1:
        raise ValueError(f"gamma * dt must lie in [0, 1], got {p_click}")
    lower = np.array([[0, 1], [0, 0]], dtype=complex)
    m_c = np.sqrt(p_click) * lower
    m_nc = np.diag([1.0, np.sqrt(1.0 - p_click)]).astype(complex)
    return MeasurementSet.from_operators([m_c, m_nc], ("click", "no_click"), QUBIT, projective=False)


def feedback_liouvillian_jump(p: JumpParams) -> SuperOperator:
    """``L0 + gamma D[U_c |0><1|]``: continuum limit of jump detection with unitary kicks."""
    jump_op = p.control_unitary @ np.array([[0, 1], [0, 0]], dtype=complex)
    return p.base_liouvillian + lindblad_superop(None, [(p.gamma, jump_op)], QUBIT)


def jump_protocol(p: JumpParams, dt: float) -> FeedbackProtocol:
    """Discrete protocol: after a click apply ``U_c``; in both cases evolve with ``L0`` for ``dt``."""
    free = expm(p.base_liouvillian, dt)
    kick = sandwich_superop(p.control_unitary, QUBIT)
    return FeedbackProtocol(jump_measurement_set(p.gamma, dt), (free @ kick, free), dt)


def jump_effective_propagator(p: JumpParams, dt: float) -> EffectivePropagator:
    return effective_propagator(jump_protocol(p, dt))


def qubit_hamiltonian(omega: float) -> np.ndarray:
    return 0.5 * omega * pauli("z")


def two_qubit_hamiltonian(omega1: float, omega2: float) -> np.ndarray:
    return 0.5 * omega1 * kron(pauli("z"), pauli("0")) + 0.5 * omega2 * kron(pauli("0"), pauli("z"))
