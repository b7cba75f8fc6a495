"""Measurement-feedback propagation.

One period of the protocol measures the system, then evolves it with the map
conditioned on the outcome. Averaged over outcomes this is the linear map
``P = sum_m B_m M_m`` (``B_m = exp(L_m dt)`` for piecewise-constant generators),
and the density matrix follows the fixed-point iteration ``rho <- P rho``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .exceptions import NumericalError, StateValidationError
from .hilbert import BlochVector, DensityMatrix, first_invalid_density_matrix, pauli
from .superop import MeasurementSet, SuperOperator, devectorize, expm, trace_row, vectorize


class DegenerateFixedPointWarning(UserWarning):
    """More than one eigenvalue of the propagator lies within tolerance of one."""


@dataclass(frozen=True)
class FeedbackProtocol:
    """Measurement set plus one conditioned propagator per outcome.

    ``generators`` optionally keeps the Liouvillians the propagators were built
    from, which lets callers resolve the evolution inside a period.
    """

    measurements: MeasurementSet
    conditioned_props: tuple
    dt: float
    generators: tuple | None = None

    def __post_init__(self):
        props = tuple(self.conditioned_props)
        if len(props) != len(self.measurements):
            raise ValueError("need exactly one conditioned propagator per measurement outcome")
        for label, prop in zip(self.measurements.labels, props):
            if prop.convention != self.measurements.convention:
                raise ValueError(f"propagator for outcome {label!r} uses a different convention")
            if not prop.is_trace_preserving(1e-10):
                raise ValueError(f"conditioned propagator for outcome {label!r} is not trace preserving")
        if self.dt < 0:
            raise ValueError("dt must be non-negative")
        object.__setattr__(self, "conditioned_props", props)
        if self.generators is not None:
            object.__setattr__(self, "generators", tuple(self.generators))

    @classmethod
    def from_liouvillians(cls, measurements: MeasurementSet, liouvillians: Sequence[SuperOperator], dt: float):
        liouvillians = tuple(liouvillians)
        props = tuple(expm(gen, dt) for gen in liouvillians)
        return cls(measurements, props, dt, liouvillians)

    @property
    def convention(self):
        return self.measurements.convention


@dataclass(frozen=True)
class EffectivePropagator:
    superop: SuperOperator
    dt: float

    def __post_init__(self):
        if not self.superop.is_trace_preserving(1e-10):
            raise NumericalError(f"effective propagator is not trace preserving ({self.superop.trace_defect():.3e})")

    @property
    def convention(self):
        return self.superop.convention


def effective_propagator(p: FeedbackProtocol) -> EffectivePropagator:
    """Outcome-averaged one-period map ``sum_m B_m M_m``."""
    total = None
    for prop, meas in zip(p.conditioned_props, p.measurements.superops):
        term = prop @ meas
        total = term if total is None else total + term
    return EffectivePropagator(total, p.dt)


@dataclass
class IterationRecord:
    times: np.ndarray
    states: list
    observables: dict = field(default_factory=dict)


def iterate(
    p: EffectivePropagator,
    rho0,
    n_steps: int,
    observables: Mapping[str, object] | None = None,
    keep_states: bool = True,
) -> IterationRecord:
    """Apply the effective propagator ``n_steps`` times.

    Observables are either Hermitian matrices (evaluated as ``tr(A rho)``) or
    callables taking a :class:`DensityMatrix`. They are recorded for ``rho0``
    and after every full period. Every state is validated; a violation raises
    :class:`NumericalError` since it means the propagator is broken. With
    ``keep_states=False`` only the final state is stored.
    """
    if n_steps < 0:
        raise ValueError("n_steps must be non-negative")
    observables = dict(observables or {})
    conv = p.convention
    rho = rho0 if isinstance(rho0, DensityMatrix) else DensityMatrix(rho0)
    mat = p.superop.mat
    vecs = np.empty((n_steps + 1, conv.dim**2), dtype=complex)
    vecs[0] = vectorize(rho, conv)
    for step in range(1, n_steps + 1):
        vecs[step] = mat @ vecs[step - 1]

    flat = np.empty_like(vecs)
    flat[:, conv.row_major_index] = vecs
    mats = flat.reshape(n_steps + 1, conv.dim, conv.dim)
    bad = first_invalid_density_matrix(mats)
    if bad is not None:
        raise NumericalError(f"invalid state after step {bad[0]}: {bad[1]}")

    needs_states = keep_states or any(callable(obs) for obs in observables.values())
    states = [DensityMatrix(m) for m in mats] if needs_states else [DensityMatrix(mats[-1])]
    series = {}
    for name, obs in observables.items():
        if callable(obs):
            series[name] = np.array([float(obs(s)) for s in states])
        else:
            row = vectorize(np.asarray(obs, dtype=complex).T, conv)
            series[name] = np.real(vecs @ row)
    if not keep_states:
        states = states[-1:]
    times = p.dt * np.arange(n_steps + 1)
    return IterationRecord(times, states, series)


def fixed_points(p: EffectivePropagator | SuperOperator, tol: float = 1e-9) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues within ``tol`` of one and their (unnormalized) eigenvectors."""
    mat = p.superop.mat if isinstance(p, EffectivePropagator) else p.mat
    vals, vecs = np.linalg.eig(mat)
    mask = np.abs(vals - 1.0) <= tol
    return vals[mask], vecs[:, mask]


def stationary_state(p: EffectivePropagator, tol: float = 1e-9) -> DensityMatrix:
    """Trace-normalized eigenvector of the propagator with eigenvalue one.

    Raises :class:`NumericalError` when no eigenvalue lies within ``tol`` of
    one. When several do, a :class:`DegenerateFixedPointWarning` is emitted and
    the eigenvector closest to one is returned.
    """
    conv = p.convention
    vals, vecs = np.linalg.eig(p.superop.mat)
    dist = np.abs(vals - 1.0)
    best = int(np.argmin(dist))
    if dist[best] > tol:
        raise NumericalError(f"no eigenvalue within {tol:g} of one (closest {vals[best]:.12g})")
    if np.count_nonzero(dist <= tol) > 1:
        warnings.warn("fixed space of the effective propagator is degenerate", DegenerateFixedPointWarning, stacklevel=2)
    vec = vecs[:, best]
    tr = trace_row(conv) @ vec
    if abs(tr) < 1e-12:
        raise NumericalError("fixed-point eigenvector has vanishing trace")
    mat = devectorize(vec / tr, conv)
    mat = 0.5 * (mat + mat.conj().T)
    mat = mat / np.trace(mat).real
    try:
        return DensityMatrix(mat)
    except StateValidationError as exc:
        raise NumericalError(f"fixed point is not a valid state: {exc}") from exc


def measurement_projection(measurements: MeasurementSet) -> SuperOperator:
    """``sum_m M_m``: the dephasing map of a non-selective measurement."""
    return measurements.total()


def zeno_limit_generator(protocol: FeedbackProtocol) -> SuperOperator:
    """Generator of the frequent-measurement limit, ``Pi (sum_m L_m M_m)`` restricted to the range of ``Pi``.

    Here ``Pi = sum_m M_m``. For projective measurements, ``Pi rho`` evolves
    as ``d/dt Pi rho = G Pi rho`` when ``dt -> 0``; observables that commute
    with the measurement projectors therefore follow ``exp(G t)``. Requires
    the protocol to carry its generators.
    """
    if protocol.generators is None:
        raise ValueError("protocol was not built from Liouvillians")
    if not protocol.measurements.projective:
        raise ValueError("the frequent-measurement limit is defined here for projective measurements only")
    proj = measurement_projection(protocol.measurements)
    drive = None
    for gen, meas in zip(protocol.generators, protocol.measurements.superops):
        term = gen @ meas
        drive = term if drive is None else drive + term
    return proj @ drive


def zeno_limit_stationary(protocol: FeedbackProtocol, tol: float = 1e-9) -> DensityMatrix:
    """Stationary state of the frequent-measurement limit.

    ``Pi + h G`` has eigenvalue 0 on the kernel of ``Pi`` and ``1 + h mu`` on
    its range, so its eigenvalue-one vector is the null vector of ``G`` inside
    the measurement-consistent subspace.
    """
    gen = zeno_limit_generator(protocol)
    proj = measurement_projection(protocol.measurements)
    scale = max(1.0, float(np.max(np.abs(gen.mat))))
    step = proj + gen * (1.0 / scale)
    return stationary_state(EffectivePropagator(step, 0.0), tol)


def zeno_limit_evolution(protocol: FeedbackProtocol, rho0, times, observables: Mapping[str, object]) -> dict:
    """Observable time series in the frequent-measurement limit, starting from ``Pi rho0``."""
    gen = zeno_limit_generator(protocol)
    conv = protocol.convention
    proj = measurement_projection(protocol.measurements)
    vec0 = proj.mat @ vectorize(rho0, conv)
    out = {name: np.empty(len(times)) for name in observables}
    for k, t in enumerate(times):
        mat = devectorize(expm(gen, t).mat @ vec0, conv)
        for name, obs in observables.items():
            if callable(obs):
                out[name][k] = float(obs(DensityMatrix(0.5 * (mat + mat.conj().T))))
            else:
                out[name][k] = float(np.real(np.trace(np.asarray(obs) @ mat)))
    return out


# --- single-qubit observable maps ------------------------------------------------


def _flat_rate(params) -> float:
    if not params.bath.is_flat:
        raise ValueError("closed-form observable maps require a flat bath spectrum")
    return params.bath.gamma_flat


def _x_measurement(params) -> bool:
    return np.isclose(np.sin(params.meas_theta), 1.0) and np.isclose(np.cos(params.meas_phi), 1.0)


def branch_coherence_decay(params, branch: str) -> float:
    """``gamma lambda^2 [3 + cos(2 theta)] / 2`` of one branch: the flat-bath coherence decay rate."""
    gamma = _flat_rate(params)
    lam, theta = params.coupling(branch)
    return gamma * lam**2 * (3.0 + np.cos(2.0 * theta)) / 2.0


def bloch_iteration_step(params, dt: float, sx: float):
    """One period of the sigma_x-measurement protocol in Bloch coordinates.

    After a sigma_x measurement only ``<sigma_x>`` carries information, so the
    period maps ``sx`` to a new Bloch vector affinely. Requires a flat bath and
    the measurement axis along x.
    """
    if abs(sx) > 1 + 1e-12:
        raise ValueError("|sx| must not exceed one")
    if not _x_measurement(params):
        raise ValueError("the Bloch map assumes a sigma_x measurement")
    e_plus = np.exp(-branch_coherence_decay(params, "plus") * dt)
    e_minus = np.exp(-branch_coherence_decay(params, "minus") * dt)
    wdt = params.omega * dt
    diff = 0.5 * (e_plus - e_minus)
    summ = 0.5 * (e_plus + e_minus)
    return BlochVector(np.cos(wdt) * (diff + summ * sx), np.sin(wdt) * (diff + summ * sx), 0.0)


def continuum_ode_rhs(params) -> tuple[float, float]:
    """``(drift, decay)`` with ``d<sigma_x>/dt = -decay <sigma_x> + drift`` in the continuum limit."""
    k_plus = branch_coherence_decay(params, "plus")
    k_minus = branch_coherence_decay(params, "minus")
    return 0.5 * (k_minus - k_plus), 0.5 * (k_minus + k_plus)


def integrate_continuum(rhs: tuple[float, float], sx0: float, t_final: float, step: float):
    """Integrate ``dx/dt = drift - decay x`` with classical RK4.

    Returns ``(times, values)`` on the grid ``0, step, 2 step, ...`` up to
    ``t_final``. Internal substeps keep ``h * decay <= 1e-2``.
    """
    if not step > 0:
        raise ValueError("step must be positive")
    drift, decay = rhs
    n_out = int(np.floor(t_final / step + 1e-9))
    times = step * np.arange(n_out + 1)
    values = np.empty(n_out + 1)
    values[0] = sx0
    n_sub = max(1, int(np.ceil(step * abs(decay) / 1e-2)))
    h = step / n_sub

    def f(x):
        return drift - decay * x

    x = float(sx0)
    for k in range(1, n_out + 1):
        for _ in range(n_sub):
            k1 = f(x)
            k2 = f(x + 0.5 * h * k1)
            k3 = f(x + 0.5 * h * k2)
            k4 = f(x + h * k3)
            x += h * (k1 + 2 * k2 + 2 * k3 + k4) / 6.0
        values[k] = x
    return times, values


def continuum_exact(rhs: tuple[float, float], sx0: float, times) -> np.ndarray:
    """Closed-form solution of the continuum ``<sigma_x>`` equation."""
    drift, decay = rhs
    times = np.asarray(times, dtype=float)
    if decay == 0:
        return sx0 + drift * times
    xbar = drift / decay
    return xbar + (sx0 - xbar) * np.exp(-decay * times)


def _f_angle(theta: float, theta_i: float) -> float:
    return 5.0 - np.cos(2 * theta_i) - np.cos(2 * theta) * (1.0 + 3.0 * np.cos(2 * theta_i))


def stationary_bloch_modulus(params) -> float:
    """Squared length ``|r|^2`` of the stationary Bloch vector in the continuum limit.

    The closed form depends on the measurement polar angle and the two
    dissipation polar angles only; azimuthal angles drop out.
    """
    _flat_rate(params)
    a = params.lambda_plus**2 * _f_angle(params.meas_theta, params.theta_plus)
    b = params.lambda_minus**2 * _f_angle(params.meas_theta, params.theta_minus)
    if a + b == 0:
        raise ValueError("stationary Bloch modulus undefined when both couplings vanish")
    return (a - b) ** 2 / (a + b) ** 2


SIGMA_X, SIGMA_Y, SIGMA_Z = pauli("x"), pauli("y"), pauli("z")
