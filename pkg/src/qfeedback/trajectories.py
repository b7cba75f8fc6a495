"""Stochastic unraveling of measurement-feedback protocols.

Each trajectory draws an outcome with the Born probability, collapses the
state with the corresponding measurement operator, and applies the
conditioned propagator. Averages over trajectories estimate the
effective-propagator dynamics.

Random numbers come from ``numpy.random.PCG64`` streams spawned from
``numpy.random.SeedSequence(seed)``: trajectories are grouped into fixed-size
chunks, chunk ``k`` uses spawned child ``k``. Results therefore do not depend
on how many worker threads process the chunks.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .engine import FeedbackProtocol
from .exceptions import NumericalError, StateValidationError
from .hilbert import DensityMatrix, first_invalid_density_matrix
from .superop import devectorize, expm, trace_row, vectorize

GENERATOR_ID = "numpy.random.PCG64 seeded by numpy.random.SeedSequence(seed).spawn(n_chunks)"
CHUNK_SIZE = 1000
PROB_FLOOR = 1e-14
PROB_SUM_TOL = 1e-10


@dataclass(frozen=True)
class TrajectoryConfig:
    protocol: FeedbackProtocol
    rho0: DensityMatrix
    n_steps: int
    n_traj: int
    seed: int
    observables: Mapping[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        if self.n_traj < 1:
            raise ValueError("n_traj must be at least 1")
        if self.n_steps < 1:
            raise ValueError("n_steps must be at least 1")
        rho0 = self.rho0 if isinstance(self.rho0, DensityMatrix) else DensityMatrix(self.rho0)
        if rho0.dim != self.protocol.measurements.dim:
            raise ValueError("initial state dimension does not match the protocol")
        object.__setattr__(self, "rho0", rho0)
        object.__setattr__(self, "observables", {k: np.asarray(v, dtype=complex) for k, v in self.observables.items()})


@dataclass
class TrajectorySample:
    """One trajectory: states after each full period and the outcomes that produced them."""

    states: list
    outcomes: list
    fine_times: np.ndarray | None = None
    fine_states: list | None = None


@dataclass
class TrajectoryEnsembleResult:
    times: np.ndarray
    mean_observables: dict
    stderr_observables: dict
    n_traj: int
    generator: str = GENERATOR_ID


def _normalized_probabilities(probs: np.ndarray) -> np.ndarray:
    """Validate Born probabilities along the last axis and rescale tiny rounding drift."""
    probs = np.where(np.abs(probs) < PROB_FLOOR, 0.0, probs)
    if np.any(probs < 0):
        raise NumericalError(f"negative outcome probability {probs.min():.3e}")
    total = probs.sum(axis=-1, keepdims=True)
    if np.any(total < PROB_FLOOR):
        raise NumericalError("all outcome probabilities vanish; measurement set is broken")
    if np.any(np.abs(total - 1.0) > PROB_SUM_TOL):
        raise NumericalError(f"outcome probabilities sum to {total.ravel()[0]:.15g}")
    return probs / total


def _draw(probs: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Cumulative-probability inversion; ``probs`` has shape (n, n_outcomes)."""
    cum = np.cumsum(probs, axis=-1)
    idx = np.sum(u[..., None] >= cum, axis=-1)
    return np.minimum(idx, probs.shape[-1] - 1)


def sample_trajectory(cfg: TrajectoryConfig, stream: np.random.Generator, substeps: int = 0) -> TrajectorySample:
    """Run a single trajectory.

    With ``substeps > 0`` the conditioned evolution inside every period is also
    resolved on ``substeps`` equal intervals (starting right after the
    collapse); this needs a protocol built from generators.
    """
    protocol = cfg.protocol
    meas = protocol.measurements
    conv = protocol.convention
    sub_props = None
    if substeps:
        if protocol.generators is None:
            raise ValueError("intra-period resolution needs a protocol built from Liouvillians")
        h = protocol.dt / substeps
        sub_props = [expm(g, h) for g in protocol.generators]

    rho = cfg.rho0
    states, outcomes = [rho], []
    fine_t, fine_s = [], []
    for step in range(cfg.n_steps):
        probs = _normalized_probabilities(meas.probabilities(rho)[None, :])[0]
        m = int(_draw(probs[None, :], np.array([stream.random()]))[0])
        op = meas.operators[m]
        collapsed = op @ rho.mat @ op.conj().T / probs[m]
        if sub_props is not None:
            vec = vectorize(collapsed, conv)
            t0 = step * protocol.dt
            for k in range(substeps + 1):
                if k:
                    vec = sub_props[m].mat @ vec
                fine_t.append(t0 + k * protocol.dt / substeps)
                fine_s.append(DensityMatrix(devectorize(vec, conv)))
        try:
            rho = DensityMatrix(protocol.conditioned_props[m].apply(collapsed))
        except StateValidationError as exc:
            raise NumericalError(f"invalid conditioned state at step {step + 1}: {exc}") from exc
        states.append(rho)
        outcomes.append(meas.labels[m])
    if sub_props is None:
        return TrajectorySample(states, outcomes)
    return TrajectorySample(states, outcomes, np.array(fine_t), fine_s)


def _observable_rows(cfg: TrajectoryConfig) -> dict:
    """Row vectors ``a`` with ``a @ vectorize(rho) == tr(A rho)``."""
    conv = cfg.protocol.convention
    return {name: vectorize(np.asarray(op).T, conv) for name, op in cfg.observables.items()}


def _validate_batch(vecs: np.ndarray, conv, step: int) -> None:
    n = conv.dim
    flat = np.empty_like(vecs)
    flat[:, conv.row_major_index] = vecs
    bad = first_invalid_density_matrix(flat.reshape(-1, n, n))
    if bad is not None:
        raise NumericalError(f"invalid conditioned state at step {step} (trajectory {bad[0]}): {bad[1]}")


def _run_chunk(cfg: TrajectoryConfig, n: int, seed_seq: np.random.SeedSequence):
    """Simulate ``n`` trajectories in lock-step; return per-time (count, mean, M2) per observable."""
    rng = np.random.Generator(np.random.PCG64(seed_seq))
    protocol = cfg.protocol
    conv = protocol.convention
    meas_mats = [s.mat for s in protocol.measurements.superops]
    prop_mats = [b.mat for b in protocol.conditioned_props]
    tr = trace_row(conv)
    rows = _observable_rows(cfg)

    vecs = np.tile(vectorize(cfg.rho0, conv), (n, 1))
    values = {name: np.empty((cfg.n_steps + 1, n)) for name in rows}
    for name, row in rows.items():
        values[name][0] = np.real(vecs @ row)
    for step in range(1, cfg.n_steps + 1):
        collapsed = [vecs @ m.T for m in meas_mats]
        probs = np.stack([np.real(c @ tr) for c in collapsed], axis=1)
        probs = _normalized_probabilities(probs)
        choice = _draw(probs, rng.random(n))
        new = np.empty_like(vecs)
        for k, (coll, prop) in enumerate(zip(collapsed, prop_mats)):
            mask = choice == k
            if np.any(mask):
                new[mask] = (coll[mask] / probs[mask, k][:, None]) @ prop.T
        vecs = new
        _validate_batch(vecs, conv, step)
        for name, row in rows.items():
            values[name][step] = np.real(vecs @ row)
    stats = {}
    for name, val in values.items():
        mean = val.mean(axis=1)
        m2 = np.sum((val - mean[:, None]) ** 2, axis=1)
        stats[name] = (n, mean, m2)
    return stats


def _merge(a, b):
    """Chan et al. pairwise combination of (count, mean, M2)."""
    na, ma, sa = a
    nb, mb, sb = b
    n = na + nb
    delta = mb - ma
    return n, ma + delta * nb / n, sa + sb + delta**2 * na * nb / n


def run_ensemble(cfg: TrajectoryConfig, workers: int = 1, chunk_size: int = CHUNK_SIZE) -> TrajectoryEnsembleResult:
    """Average ``cfg.n_traj`` independent trajectories.

    Standard errors use the unbiased sample variance and are zero for a single
    trajectory. The result is bit-identical for a given seed and chunk size,
    whatever the number of workers.
    """
    sizes = [chunk_size] * (cfg.n_traj // chunk_size)
    if cfg.n_traj % chunk_size:
        sizes.append(cfg.n_traj % chunk_size)
    children = np.random.SeedSequence(cfg.seed).spawn(len(sizes))
    if workers > 1 and len(sizes) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(lambda args: _run_chunk(cfg, *args), zip(sizes, children)))
    else:
        chunks = [_run_chunk(cfg, n, ss) for n, ss in zip(sizes, children)]

    means, errs = {}, {}
    for name in cfg.observables:
        acc = chunks[0][name]
        for chunk in chunks[1:]:
            acc = _merge(acc, chunk[name])
        n, mean, m2 = acc
        means[name] = mean
        errs[name] = np.sqrt(m2 / (n - 1) / n) if n > 1 else np.zeros_like(mean)
    times = cfg.protocol.dt * np.arange(cfg.n_steps + 1)
    return TrajectoryEnsembleResult(times, means, errs, cfg.n_traj)
