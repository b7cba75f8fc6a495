"""Experiment configuration files (TOML).

Example::

    experiment = "two_qubit_bell"
    run = "sweep"
    seed = 7

    [params]
    lambda_B = 1.0
    lambda_R = 5.0

    [[sweep.axes]]
    name = "gamma_dt"
    min = 1e-3
    max = 0.3
    count = 25
    spacing = "log"

All quantities are dimensionless: times in units of 1/gamma and frequencies
in units of gamma, where gamma is the flat bath rate.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from ..exceptions import ConfigError

HALF_PI = math.pi / 2

_SINGLE_QUBIT = {
    "omega": 5.0,
    "lambda_plus": 1.0,
    "lambda_minus": 5.0,
    "theta_plus": HALF_PI,
    "theta_minus": HALF_PI,
    "phi_plus": 0.0,
    "phi_minus": 0.0,
    "gamma": 1.0,
    "dt": 0.01,
    "lamb_shift": 0.0,
}

EXPERIMENTS = {
    "single_qubit_feedback": {
        "description": "sigma_x measurement with outcome-dependent dissipation strength",
        "params": dict(_SINGLE_QUBIT),
        "runs": ("iterate", "trajectories", "stationary", "continuum", "sweep"),
        "initial": "mixed",
    },
    "single_qubit_general_direction": {
        "description": "measurement along (meas_theta, meas_phi) with outcome-dependent dissipation",
        "params": {**_SINGLE_QUBIT, "meas_theta": HALF_PI, "meas_phi": 0.0},
        "runs": ("iterate", "trajectories", "stationary", "sweep"),
        "initial": "mixed",
    },
    "two_qubit_bell": {
        "description": "Bell-projector measurement with conditioned collective dissipation",
        "params": {"omega1": 0.0, "omega2": 0.0, "lambda_B": 1.0, "lambda_R": 5.0, "gamma": 1.0, "dt": 0.01},
        "runs": ("iterate", "trajectories", "stationary", "continuum", "sweep"),
        "initial": "mixed",
    },
    "zeno": {
        "description": "repeated sigma_x measurements with free precession, no dissipation",
        "params": {"omega": 1.0, "dt": 0.01},
        "runs": ("iterate", "trajectories", "sweep"),
        "initial": "plus",
    },
    "jump_limit": {
        "description": "quantum-jump detection with unitary kicks versus its feedback master equation",
        "params": {"gamma": 1.0, "omega": 1.0, "dt": 0.01, "control_axis": "x", "control_angle": 0.0},
        "runs": ("iterate", "trajectories", "stationary", "sweep"),
        "initial": "one",
    },
}

# derived sweep axes: name -> experiments supporting it
DERIVED_AXES = {
    "gamma_dt": ("single_qubit_feedback", "single_qubit_general_direction", "two_qubit_bell", "jump_limit"),
    "omega_dt": ("zeno",),
    "lambda_ratio": ("single_qubit_feedback", "single_qubit_general_direction", "two_qubit_bell"),
}

_SQ_METRICS = ("rx", "ry", "rz", "bloch_modulus2", "bloch_modulus2_continuum", "sx_continuum")
# stationary / sweep output columns per experiment; inapplicable entries are written as nan
METRICS = {
    "single_qubit_feedback": _SQ_METRICS,
    "single_qubit_general_direction": _SQ_METRICS,
    "two_qubit_bell": (
        "Sxx", "Syy", "Szz", "Sxy", "concurrence", "purity",
        "Sxx_closed_form", "Szz_closed_form", "Sxy_closed_form",
        "Sxx_continuum", "concurrence_continuum", "purity_continuum",
    ),
    "zeno": ("zeno_deviation", "coherence_factor"),
    "jump_limit": ("rx", "ry", "rz", "rx_master", "ry_master", "rz_master", "generator_error"),
}

OBSERVABLES = {
    "single_qubit_feedback": ("sx", "sy", "sz"),
    "single_qubit_general_direction": ("sx", "sy", "sz"),
    "two_qubit_bell": ("Sxx", "Syy", "Szz", "Sxy"),
    "zeno": ("sx", "sy", "sz"),
    "jump_limit": ("sx", "sy", "sz"),
}

INITIAL_STATES = ("mixed", "plus", "minus", "zero", "one", "bell")
TOP_LEVEL_KEYS = {"experiment", "run", "params", "initial", "observables", "n_steps", "n_traj", "seed", "sweep", "output"}
DEFAULT_SEED = 20130101


@dataclass(frozen=True)
class SweepAxis:
    name: str
    min: float
    max: float
    count: int
    spacing: str = "linear"

    def values(self) -> list[float]:
        if self.count == 1:
            return [float(self.min)]
        if self.spacing == "log":
            lo, hi = math.log10(self.min), math.log10(self.max)
            return [10 ** (lo + (hi - lo) * k / (self.count - 1)) for k in range(self.count)]
        return [self.min + (self.max - self.min) * k / (self.count - 1) for k in range(self.count)]


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    run: str
    params: dict
    initial: object = "mixed"
    n_steps: int = 200
    n_traj: int = 1000
    seed: int = DEFAULT_SEED
    observables: tuple = ()
    sweep_axes: tuple = ()
    metrics: tuple = ()
    output_dir: str = "."
    prefix: str = ""
    source: str = field(default="", repr=False, compare=False)

    def grid(self) -> list[dict]:
        """Sweep plan: one ``{axis: value}`` dict per grid point, first axis slowest."""
        if not self.sweep_axes:
            return [{}]
        names = [a.name for a in self.sweep_axes]
        return [dict(zip(names, combo)) for combo in itertools.product(*(a.values() for a in self.sweep_axes))]

    @property
    def file_prefix(self) -> str:
        return self.prefix or f"{self.experiment}_{self.run}"

    def resolved(self) -> dict:
        """Plain-data view used for manifests."""
        return {
            "experiment": self.experiment,
            "run": self.run,
            "params": dict(self.params),
            "initial": self.initial,
            "observables": list(self.observables),
            "n_steps": self.n_steps,
            "n_traj": self.n_traj,
            "seed": self.seed,
            "sweep_axes": [a.__dict__ for a in self.sweep_axes],
            "metrics": list(self.metrics),
            "output_dir": self.output_dir,
            "prefix": self.file_prefix,
        }


def _reject_unknown(section: dict, allowed, where: str) -> None:
    unknown = sorted(set(section) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(unknown)}")


def _number(value, key: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{key} must be a number, got {value!r}")
    if not math.isfinite(value):
        raise ConfigError(f"{key} must be finite")
    return float(value)


def _positive_int(value, key: str, minimum: int = 1) -> int:
    if isinstance(value, bool) or not isinstance(value, int) or value < minimum:
        raise ConfigError(f"{key} must be an integer >= {minimum}, got {value!r}")
    return value


def _validate_params(experiment: str, raw: dict) -> dict:
    defaults = EXPERIMENTS[experiment]["params"]
    allowed = set(defaults) | ({"bath"} if experiment.startswith("single_qubit") else set())
    _reject_unknown(raw, allowed, "[params]")
    params = dict(defaults)
    for key, value in raw.items():
        if key == "bath":
            params["bath"] = _validate_bath(value)
        elif key == "control_axis":
            if value not in ("x", "y", "z"):
                raise ConfigError("params.control_axis must be one of x, y, z")
            params[key] = value
        else:
            params[key] = _number(value, f"params.{key}")
    for key in ("lambda_plus", "lambda_minus", "lambda_B", "lambda_R", "gamma"):
        if key in params and params[key] < 0:
            raise ConfigError(f"params.{key} must be non-negative")
    if "dt" in params and params["dt"] < 0:
        raise ConfigError("params.dt must be non-negative")
    if experiment == "jump_limit" and params["gamma"] * params["dt"] > 1:
        raise ConfigError("params.gamma * params.dt must not exceed 1")
    if "bath" in params and "gamma" in raw:
        raise ConfigError("give either params.gamma (flat bath) or params.bath, not both")
    return params


def _validate_bath(value) -> dict:
    if not isinstance(value, dict):
        raise ConfigError("params.bath must be a table")
    _reject_unknown(value, {"kind", "alpha", "omega_c", "beta", "gamma"}, "[params.bath]")
    kind = value.get("kind", "flat")
    if kind == "flat":
        _reject_unknown(value, {"kind", "gamma"}, "[params.bath] of kind flat")
        gamma = _number(value.get("gamma", 1.0), "params.bath.gamma")
        if gamma < 0:
            raise ConfigError("params.bath.gamma must be non-negative")
        return {"kind": "flat", "gamma": gamma}
    if kind != "ohmic_thermal":
        raise ConfigError("params.bath.kind must be 'flat' or 'ohmic_thermal'")
    _reject_unknown(value, {"kind", "alpha", "omega_c", "beta"}, "[params.bath] of kind ohmic_thermal")
    out = {"kind": kind}
    for key in ("alpha", "omega_c", "beta"):
        if key not in value:
            raise ConfigError(f"params.bath.{key} is required for an ohmic_thermal bath")
        out[key] = _number(value[key], f"params.bath.{key}")
    if out["alpha"] < 0 or out["omega_c"] <= 0 or out["beta"] <= 0:
        raise ConfigError("ohmic bath needs alpha >= 0, omega_c > 0, beta > 0")
    return out


def _validate_initial(experiment: str, value):
    if isinstance(value, str):
        if value not in INITIAL_STATES:
            raise ConfigError(f"initial must be one of {', '.join(INITIAL_STATES)} or a Bloch vector")
        if (value == "bell") != (experiment == "two_qubit_bell") and value != "mixed":
            raise ConfigError(f"initial state {value!r} does not fit experiment {experiment!r}")
        return value
    if isinstance(value, list) and len(value) == 3 and experiment != "two_qubit_bell":
        vec = [_number(v, "initial") for v in value]
        if sum(v * v for v in vec) > 1 + 1e-9:
            raise ConfigError("initial Bloch vector must have length <= 1")
        return vec
    raise ConfigError("initial must be a state name or a 3-component Bloch vector")


def _validate_sweep(experiment: str, raw) -> tuple[tuple, tuple]:
    if not isinstance(raw, dict):
        raise ConfigError("[sweep] must be a table")
    _reject_unknown(raw, {"axes", "metrics"}, "[sweep]")
    axes_raw = raw.get("axes", [])
    if not isinstance(axes_raw, list) or not axes_raw:
        raise ConfigError("[sweep] needs at least one [[sweep.axes]] entry")
    allowed_names = set(EXPERIMENTS[experiment]["params"]) - {"control_axis"}
    allowed_names |= {name for name, exps in DERIVED_AXES.items() if experiment in exps}
    axes = []
    for k, ax in enumerate(axes_raw):
        where = f"sweep.axes[{k}]"
        if not isinstance(ax, dict):
            raise ConfigError(f"{where} must be a table")
        _reject_unknown(ax, {"name", "min", "max", "count", "spacing"}, where)
        for key in ("name", "min", "max", "count"):
            if key not in ax:
                raise ConfigError(f"{where}.{key} is required")
        if ax["name"] not in allowed_names:
            raise ConfigError(f"{where}.name {ax['name']!r} is not a sweepable parameter of {experiment}")
        spacing = ax.get("spacing", "linear")
        if spacing not in ("linear", "log"):
            raise ConfigError(f"{where}.spacing must be 'linear' or 'log'")
        lo, hi = _number(ax["min"], f"{where}.min"), _number(ax["max"], f"{where}.max")
        count = _positive_int(ax["count"], f"{where}.count")
        if spacing == "log" and (lo <= 0 or hi <= 0):
            raise ConfigError(f"{where}: log spacing needs positive bounds")
        axes.append(SweepAxis(ax["name"], lo, hi, count, spacing))
    if len({a.name for a in axes}) != len(axes):
        raise ConfigError("sweep axes must have distinct names")
    metrics = raw.get("metrics", list(METRICS[experiment]))
    if not isinstance(metrics, list) or not all(isinstance(m, str) for m in metrics) or not metrics:
        raise ConfigError("sweep.metrics must be a non-empty list of names")
    unknown = sorted(set(metrics) - set(METRICS[experiment]))
    if unknown:
        raise ConfigError(f"unknown sweep metric(s) for {experiment}: {', '.join(unknown)}")
    return tuple(axes), tuple(metrics)


def config_from_dict(doc: dict, source: str = "") -> ExperimentConfig:
    _reject_unknown(doc, TOP_LEVEL_KEYS, "top level")
    experiment = doc.get("experiment")
    if experiment not in EXPERIMENTS:
        raise ConfigError(f"experiment must be one of {', '.join(EXPERIMENTS)}, got {experiment!r}")
    info = EXPERIMENTS[experiment]
    run = doc.get("run", "iterate")
    if run not in info["runs"]:
        raise ConfigError(f"run {run!r} is not available for {experiment}; choose from {', '.join(info['runs'])}")
    params_raw = doc.get("params", {})
    if not isinstance(params_raw, dict):
        raise ConfigError("[params] must be a table")
    params = _validate_params(experiment, params_raw)
    initial = _validate_initial(experiment, doc.get("initial", info["initial"]))
    if run in ("iterate", "trajectories", "continuum") and params["dt"] <= 0:
        raise ConfigError(f"params.dt must be positive for run = {run!r}")
    observables = doc.get("observables", list(OBSERVABLES[experiment]))
    if not isinstance(observables, list) or not observables or not all(isinstance(o, str) for o in observables):
        raise ConfigError("observables must be a non-empty list of names")
    unknown = sorted(set(observables) - set(OBSERVABLES[experiment]))
    if unknown:
        raise ConfigError(f"unknown observable(s) for {experiment}: {', '.join(unknown)}")
    n_steps = _positive_int(doc.get("n_steps", 200), "n_steps")
    n_traj = _positive_int(doc.get("n_traj", 1000), "n_traj")
    seed = doc.get("seed", DEFAULT_SEED)
    if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed < 2**64:
        raise ConfigError("seed must be an integer in [0, 2**64)")
    axes, metrics = (), ()
    if run == "sweep":
        if "sweep" not in doc:
            raise ConfigError("run = 'sweep' requires a [sweep] section")
        axes, metrics = _validate_sweep(experiment, doc["sweep"])
    elif "sweep" in doc:
        raise ConfigError("[sweep] is only valid with run = 'sweep'")
    output = doc.get("output", {})
    if not isinstance(output, dict):
        raise ConfigError("[output] must be a table")
    _reject_unknown(output, {"dir", "prefix"}, "[output]")
    return ExperimentConfig(
        experiment=experiment,
        run=run,
        params=params,
        initial=initial,
        observables=tuple(observables),
        n_steps=n_steps,
        n_traj=n_traj,
        seed=seed,
        sweep_axes=axes,
        metrics=metrics,
        output_dir=str(output.get("dir", ".")),
        prefix=str(output.get("prefix", "")),
        source=source,
    )


def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate a TOML experiment description.

    Raises :class:`ConfigError`; syntax errors carry the TOML parser's
    line/column information.
    """
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"TOML parse error: {exc}") from exc
    return config_from_dict(doc, text)
