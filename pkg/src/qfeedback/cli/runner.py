"""Execute an :class:`ExperimentConfig` and write CSV + manifest files."""

from __future__ import annotations

import dataclasses
import hashlib
import io
import json
import math
import platform
import warnings
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np
import scipy

from .. import __version__
from ..bath import BathSpectrum
from ..engine import (
    DegenerateFixedPointWarning,
    EffectivePropagator,
    FeedbackProtocol,
    continuum_exact,
    continuum_ode_rhs,
    effective_propagator,
    integrate_continuum,
    iterate,
    stationary_bloch_modulus,
    stationary_state,
    zeno_limit_evolution,
    zeno_limit_stationary,
)
from ..exceptions import NumericalError, StateValidationError
from ..hilbert import BlochVector, DensityMatrix, bloch_from_rho, pauli, rho_from_bloch, two_qubit_pauli
from ..metrics import concurrence, purity, stationary_correlators_finite_dt
from ..models import (
    JumpParams,
    SingleQubitParams,
    TwoQubitParams,
    bell_state,
    feedback_liouvillian_jump,
    jump_protocol,
    measurement_set_general,
    qubit_hamiltonian,
    single_qubit_protocol,
    two_qubit_protocol,
    zeno_propagator,
)
from ..superop import QUBIT, expm, lindblad_superop
from ..trajectories import GENERATOR_ID, TrajectoryConfig, run_ensemble
from .config import METRICS, ExperimentConfig

NUMERICAL_ERRORS = (NumericalError, StateValidationError, ValueError, ArithmeticError, np.linalg.LinAlgError)

_SINGLE_OBS = {"sx": pauli("x"), "sy": pauli("y"), "sz": pauli("z")}
_TWO_OBS = {
    "Sxx": two_qubit_pauli("x", "x"),
    "Syy": two_qubit_pauli("y", "y"),
    "Szz": two_qubit_pauli("z", "z"),
    "Sxy": two_qubit_pauli("x", "y"),
}


# --- model construction -----------------------------------------------------------


def _bath(params: dict) -> BathSpectrum:
    bath = params.get("bath")
    if bath is None:
        return BathSpectrum.flat(params["gamma"])
    if bath["kind"] == "flat":
        return BathSpectrum.flat(bath["gamma"])
    return BathSpectrum.ohmic(bath["alpha"], bath["omega_c"], bath["beta"])


def single_qubit_params(experiment: str, params: dict) -> SingleQubitParams:
    general = experiment == "single_qubit_general_direction"
    return SingleQubitParams(
        omega=params["omega"],
        lambda_plus=params["lambda_plus"],
        lambda_minus=params["lambda_minus"],
        theta_plus=params["theta_plus"],
        theta_minus=params["theta_minus"],
        phi_plus=params["phi_plus"],
        phi_minus=params["phi_minus"],
        meas_theta=params["meas_theta"] if general else math.pi / 2,
        meas_phi=params["meas_phi"] if general else 0.0,
        bath=_bath(params),
        lamb_shift=1j * params["lamb_shift"],
    )


def two_qubit_params(params: dict) -> TwoQubitParams:
    return TwoQubitParams(**{k: params[k] for k in ("omega1", "omega2", "lambda_B", "lambda_R", "gamma", "dt")})


def jump_params(params: dict) -> JumpParams:
    angle = params["control_angle"]
    u = math.cos(angle / 2) * np.eye(2) - 1j * math.sin(angle / 2) * pauli(params["control_axis"])
    base = lindblad_superop(qubit_hamiltonian(params["omega"]), (), QUBIT)
    return JumpParams(params["gamma"], u, base)


def build_protocol(experiment: str, params: dict):
    """Feedback protocol of one parameter point; the Zeno model uses the same free generator for both outcomes."""
    if experiment.startswith("single_qubit"):
        return single_qubit_protocol(single_qubit_params(experiment, params), params["dt"])
    if experiment == "two_qubit_bell":
        return two_qubit_protocol(two_qubit_params(params))
    if experiment == "jump_limit":
        return jump_protocol(jump_params(params), params["dt"])
    return _zeno_protocol(params)


def _zeno_protocol(params: dict):
    free = lindblad_superop(qubit_hamiltonian(params["omega"]), (), QUBIT)
    meas = measurement_set_general(math.pi / 2, 0.0)
    return FeedbackProtocol.from_liouvillians(meas, (free, free), params["dt"])


def initial_state(cfg: ExperimentConfig) -> DensityMatrix:
    init = cfg.initial
    if cfg.experiment == "two_qubit_bell":
        return DensityMatrix.from_pure(bell_state()) if init == "bell" else DensityMatrix.maximally_mixed(4)
    if isinstance(init, list):
        return rho_from_bloch(BlochVector(*init))
    bloch = {"mixed": (0, 0, 0), "plus": (1, 0, 0), "minus": (-1, 0, 0), "zero": (0, 0, 1), "one": (0, 0, -1)}[init]
    return rho_from_bloch(BlochVector(*bloch))


def observable_ops(cfg: ExperimentConfig) -> dict:
    table = _TWO_OBS if cfg.experiment == "two_qubit_bell" else _SINGLE_OBS
    return {name: table[name] for name in cfg.observables}


def _has_sx_continuum(cfg: ExperimentConfig, params: dict) -> bool:
    return cfg.experiment == "single_qubit_feedback" and _bath(params).is_flat


# --- run kinds --------------------------------------------------------------------


def _effective_series(cfg, params, protocol):
    prop = effective_propagator(protocol)
    record = iterate(prop, initial_state(cfg), cfg.n_steps, observable_ops(cfg), keep_states=False)
    return record.times, record.observables


def _continuum_series(cfg, params, protocol, times) -> dict:
    """Frequent-measurement limit of each observable (only where it is defined)."""
    if cfg.experiment == "two_qubit_bell":
        return zeno_limit_evolution(protocol, initial_state(cfg), times, observable_ops(cfg))
    if _has_sx_continuum(cfg, params) and "sx" in cfg.observables:
        sp = single_qubit_params(cfg.experiment, params)
        sx0 = initial_state(cfg).expectation(pauli("x"))
        return {"sx": continuum_exact(continuum_ode_rhs(sp), sx0, times)}
    if cfg.experiment == "jump_limit":
        gen = feedback_liouvillian_jump(jump_params(params))
        rho0 = initial_state(cfg).mat
        out = {name: np.empty(len(times)) for name in cfg.observables}
        for k, t in enumerate(times):
            mat = expm(gen, t).apply(rho0)
            for name, op in observable_ops(cfg).items():
                out[name][k] = float(np.real(np.trace(op @ mat)))
        return {f"{name}@master": v for name, v in out.items()}
    return {}


def run_iterate(cfg: ExperimentConfig, threads: int = 1):
    params = cfg.params
    protocol = build_protocol(cfg.experiment, params)
    times, eff = _effective_series(cfg, params, protocol)
    cont = _continuum_series(cfg, params, protocol, times)
    header, cols = ["time"], [times]
    for name in cfg.observables:
        header.append(f"{name}_effective")
        cols.append(eff[name])
        for key, label in ((name, f"{name}_continuum"), (f"{name}@master", f"{name}_master")):
            if key in cont:
                header.append(label)
                cols.append(cont[key])
    return header, list(zip(*cols))


def run_trajectories(cfg: ExperimentConfig, threads: int = 1):
    params = cfg.params
    protocol = build_protocol(cfg.experiment, params)
    times, eff = _effective_series(cfg, params, protocol)
    cont = _continuum_series(cfg, params, protocol, times)
    tcfg = TrajectoryConfig(protocol, initial_state(cfg), cfg.n_steps, cfg.n_traj, cfg.seed, observable_ops(cfg))
    ens = run_ensemble(tcfg, workers=threads)
    header, cols = ["time"], [times]
    for name in cfg.observables:
        header.append(f"{name}_effective")
        cols.append(eff[name])
        if name in cont:
            header.append(f"{name}_continuum")
            cols.append(cont[name])
        header += [f"{name}_traj_mean", f"{name}_traj_stderr"]
        cols += [ens.mean_observables[name], ens.stderr_observables[name]]
    return header, list(zip(*cols))


def run_continuum(cfg: ExperimentConfig, threads: int = 1):
    params = cfg.params
    dt = params["dt"]
    times = dt * np.arange(cfg.n_steps + 1)
    if cfg.experiment == "two_qubit_bell":
        protocol = build_protocol(cfg.experiment, params)
        obs = dict(observable_ops(cfg))
        obs["concurrence"] = concurrence
        obs["purity"] = purity
        series = zeno_limit_evolution(protocol, initial_state(cfg), times, obs)
        header = ["time"] + [f"{name}_continuum" for name in obs]
        return header, list(zip(times, *(series[name] for name in obs)))
    if not _has_sx_continuum(cfg, params):
        raise ValueError("the continuum <sigma_x> equation needs a flat bath")
    sp = single_qubit_params(cfg.experiment, params)
    rhs = continuum_ode_rhs(sp)
    sx0 = initial_state(cfg).expectation(pauli("x"))
    t, rk4 = integrate_continuum(rhs, sx0, times[-1], dt)
    return ["time", "sx_continuum", "sx_exact"], list(zip(t, rk4, continuum_exact(rhs, sx0, t)))


def stationary_metrics(experiment: str, params: dict, n_steps: int = 1) -> dict:
    """All :data:`METRICS` of ``experiment`` at one parameter point; inapplicable ones are nan."""
    out = dict.fromkeys(METRICS[experiment], math.nan)
    if experiment == "zeno":
        omega, dt = params["omega"], params["dt"]
        dev = np.max(np.abs(zeno_propagator(omega, dt).power(n_steps).mat - zeno_propagator(omega, 0.0).mat))
        out["zeno_deviation"] = float(dev)
        out["coherence_factor"] = float(np.cos(omega * dt) ** (n_steps - 1))
        return out
    protocol = build_protocol(experiment, params)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("error", DegenerateFixedPointWarning)
            rho = stationary_state(effective_propagator(protocol))
    except DegenerateFixedPointWarning as exc:
        raise NumericalError(f"{exc}; no unique stationary state") from exc
    if experiment.startswith("single_qubit"):
        r = bloch_from_rho(rho)
        out.update(rx=r.rx, ry=r.ry, rz=r.rz, bloch_modulus2=r.norm**2)
        sp = single_qubit_params(experiment, params)
        if sp.bath.is_flat:
            out["bloch_modulus2_continuum"] = stationary_bloch_modulus(sp)
            if experiment == "single_qubit_feedback":
                drift, decay = continuum_ode_rhs(sp)
                out["sx_continuum"] = drift / decay if decay else math.nan
    elif experiment == "two_qubit_bell":
        for name, op in _TWO_OBS.items():
            out[name] = rho.expectation(op)
        out["concurrence"] = concurrence(rho)
        out["purity"] = purity(rho)
        try:
            closed = stationary_correlators_finite_dt(two_qubit_params(params))
            out["Sxx_closed_form"] = closed.expectation("x", "x")
            out["Szz_closed_form"] = closed.expectation("z", "z")
            out["Sxy_closed_form"] = closed.expectation("x", "y")
        except ValueError:
            pass
        cont = zeno_limit_stationary(protocol)
        out["Sxx_continuum"] = cont.expectation(_TWO_OBS["Sxx"])
        out["concurrence_continuum"] = concurrence(cont)
        out["purity_continuum"] = purity(cont)
    else:
        r = bloch_from_rho(rho)
        out.update(rx=r.rx, ry=r.ry, rz=r.rz)
        jp = jump_params(params)
        gen = feedback_liouvillian_jump(jp)
        dt = params["dt"]
        master = stationary_state(EffectivePropagator(expm(gen, 1.0), 1.0))
        rm = bloch_from_rho(master)
        out.update(rx_master=rm.rx, ry_master=rm.ry, rz_master=rm.rz)
        if dt > 0:
            eff = effective_propagator(protocol).superop.mat
            out["generator_error"] = float(np.max(np.abs((eff - np.eye(4)) / dt - gen.mat)))
    return out


def run_stationary(cfg: ExperimentConfig, threads: int = 1):
    metrics = stationary_metrics(cfg.experiment, cfg.params, cfg.n_steps)
    return list(metrics), [tuple(metrics.values())]


def point_params(cfg: ExperimentConfig, point: dict) -> dict:
    """Model parameters of one sweep point: direct axes first, derived axes after."""
    params = dict(cfg.params)
    for name, value in point.items():
        if name in params:
            params[name] = value
    for name, value in point.items():
        if name == "gamma_dt":
            gamma = params.get("gamma", 1.0) if "bath" not in params else 1.0
            if gamma <= 0:
                raise ValueError("gamma_dt axis needs gamma > 0")
            params["dt"] = value / gamma
        elif name == "omega_dt":
            if params["omega"] == 0:
                raise ValueError("omega_dt axis needs omega != 0")
            params["dt"] = value / params["omega"]
        elif name == "lambda_ratio":
            if cfg.experiment == "two_qubit_bell":
                params["lambda_R"] = value * params["lambda_B"]
            else:
                params["lambda_minus"] = value * params["lambda_plus"]
    return params


def _sweep_point(cfg: ExperimentConfig, point: dict):
    try:
        values = stationary_metrics(cfg.experiment, point_params(cfg, point), cfg.n_steps)
        return [values[m] for m in cfg.metrics], "ok"
    except (*NUMERICAL_ERRORS, Warning) as exc:
        return [math.nan] * len(cfg.metrics), f"error:{type(exc).__name__}"


def run_sweep(cfg: ExperimentConfig, threads: int = 1):
    """One row per grid point; failed points keep their row with nan metrics and an error status."""
    grid = cfg.grid()
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda pt: _sweep_point(cfg, pt), grid))
    else:
        results = [_sweep_point(cfg, pt) for pt in grid]
    header = [a.name for a in cfg.sweep_axes] + list(cfg.metrics) + ["status"]
    rows = [tuple(pt.values()) + tuple(vals) + (status,) for pt, (vals, status) in zip(grid, results)]
    return header, rows


RUNNERS = {
    "iterate": run_iterate,
    "trajectories": run_trajectories,
    "continuum": run_continuum,
    "stationary": run_stationary,
    "sweep": run_sweep,
}


# --- output -----------------------------------------------------------------------


def _cell(value) -> str:
    if isinstance(value, str):
        return value
    if isinstance(value, (int, np.integer)) and not isinstance(value, bool):
        return str(int(value))
    return format(float(np.real(value)), ".17g")


def format_csv(header, rows) -> str:
    buf = io.StringIO(newline="")
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(_cell(v) for v in row) + "\n")
    return buf.getvalue()


@dataclasses.dataclass
class RunResult:
    csv_path: Path
    manifest_path: Path
    n_rows: int
    n_failed: int


def run_experiment(cfg: ExperimentConfig, threads: int = 1) -> RunResult:
    """Run ``cfg`` and write ``<prefix>.csv`` plus ``<prefix>.manifest.json`` to ``cfg.output_dir``.

    Numerical failures propagate, except inside sweeps where they are recorded
    per grid point. Writing errors raise :class:`OSError`.
    """
    if threads < 1:
        raise ValueError("threads must be at least 1")
    header, rows = RUNNERS[cfg.run](cfg, threads)
    text = format_csv(header, rows)
    failed = sum(1 for r in rows if isinstance(r[-1], str) and r[-1].startswith("error")) if cfg.run == "sweep" else 0

    out_dir = Path(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / f"{cfg.file_prefix}.csv"
    with open(csv_path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    manifest = {
        "package": "qfeedback",
        "version": __version__,
        "config": cfg.resolved(),
        "config_source": cfg.source,
        "seed": cfg.seed,
        "random_generator": GENERATOR_ID,
        "threads": threads,
        "outputs": [{"file": csv_path.name, "rows": len(rows), "sha256": hashlib.sha256(text.encode()).hexdigest()}],
        "failed_points": failed,
        "environment": {"python": platform.python_version(), "numpy": np.__version__, "scipy": scipy.__version__},
    }
    manifest_path = out_dir / f"{cfg.file_prefix}.manifest.json"
    with open(manifest_path, "w", encoding="utf-8", newline="") as fh:
        fh.write(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return RunResult(csv_path, manifest_path, len(rows), failed)
