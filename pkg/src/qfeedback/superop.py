"""Vectorized density matrices and superoperators.

A density matrix of dimension N is stored as a length-N^2 vector with the
populations first, followed by the coherences ``rho_ij`` (i != j) in row-major
order. For one qubit that is ``(rho_00, rho_11, rho_01, rho_10)``; for two
qubits it is the 16-slot order ``(rho_00,00, rho_01,01, rho_10,10, rho_11,11,
rho_00,01, rho_00,10, rho_00,11, rho_01,00, ...)``. The slot order is carried
by :class:`VectorizationConvention`, so other orders can be plugged in.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
import scipy.linalg

from .hilbert import DensityMatrix


@dataclass(frozen=True)
class VectorizationConvention:
    """Mapping from matrix index pairs ``(i, j)`` to vector slots."""

    dim: int
    order: tuple

    def __post_init__(self):
        order = tuple((int(i), int(j)) for i, j in self.order)
        expected = {(i, j) for i in range(self.dim) for j in range(self.dim)}
        if len(order) != self.dim**2 or set(order) != expected:
            raise ValueError("order must be a permutation of all (i, j) index pairs")
        object.__setattr__(self, "order", order)

    @classmethod
    def populations_first(cls, dim: int) -> "VectorizationConvention":
        diag = [(i, i) for i in range(dim)]
        off = [(i, j) for i in range(dim) for j in range(dim) if i != j]
        return cls(dim, tuple(diag + off))

    @property
    def row_major_index(self) -> np.ndarray:
        """``row_major_index[slot] = i * dim + j`` for the pair stored in ``slot``."""
        return np.array([i * self.dim + j for i, j in self.order])

    def slot(self, i: int, j: int) -> int:
        return self.order.index((i, j))

    @property
    def population_slots(self) -> list[int]:
        return [s for s, (i, j) in enumerate(self.order) if i == j]

    @property
    def coherence_slots(self) -> list[int]:
        return [s for s, (i, j) in enumerate(self.order) if i != j]


QUBIT = VectorizationConvention.populations_first(2)
TWO_QUBIT = VectorizationConvention.populations_first(4)


def convention_for(dim: int) -> VectorizationConvention:
    if dim == 2:
        return QUBIT
    if dim == 4:
        return TWO_QUBIT
    return VectorizationConvention.populations_first(dim)


def vectorize(rho, conv: VectorizationConvention | None = None) -> np.ndarray:
    mat = rho.mat if isinstance(rho, DensityMatrix) else np.asarray(rho, dtype=complex)
    if conv is None:
        conv = convention_for(mat.shape[0])
    if mat.shape != (conv.dim, conv.dim):
        raise ValueError(f"matrix shape {mat.shape} does not match convention dimension {conv.dim}")
    return mat.reshape(-1)[conv.row_major_index].astype(complex)


def devectorize(vec, conv: VectorizationConvention) -> np.ndarray:
    vec = np.asarray(vec, dtype=complex)
    if vec.shape != (conv.dim**2,):
        raise ValueError(f"vector of length {vec.size} does not match convention dimension {conv.dim}")
    flat = np.empty(conv.dim**2, dtype=complex)
    flat[conv.row_major_index] = vec
    return flat.reshape(conv.dim, conv.dim)


def trace_row(conv: VectorizationConvention) -> np.ndarray:
    """Row vector with ones at population slots: ``trace_row @ vectorize(rho) == tr(rho)``."""
    row = np.zeros(conv.dim**2)
    row[conv.population_slots] = 1.0
    return row


@dataclass(frozen=True)
class SuperOperator:
    """N^2 x N^2 matrix acting on density vectors in a fixed convention."""

    mat: np.ndarray = field(repr=False)
    convention: VectorizationConvention

    def __post_init__(self):
        mat = np.array(self.mat, dtype=complex)
        n2 = self.convention.dim**2
        if mat.shape != (n2, n2):
            raise ValueError(f"superoperator must be {n2}x{n2}, got {mat.shape}")
        mat.setflags(write=False)
        object.__setattr__(self, "mat", mat)

    @property
    def dim(self) -> int:
        return self.convention.dim

    @classmethod
    def identity(cls, conv: VectorizationConvention) -> "SuperOperator":
        return cls(np.eye(conv.dim**2), conv)

    @classmethod
    def zero(cls, conv: VectorizationConvention) -> "SuperOperator":
        return cls(np.zeros((conv.dim**2, conv.dim**2)), conv)

    @classmethod
    def from_row_major(cls, mat, conv: VectorizationConvention) -> "SuperOperator":
        """Re-index a matrix acting on row-major ``rho.reshape(-1)`` vectors."""
        idx = conv.row_major_index
        return cls(np.asarray(mat)[np.ix_(idx, idx)], conv)

    def _check(self, other: "SuperOperator"):
        if other.convention != self.convention:
            raise ValueError("superoperators use different vectorization conventions")

    def __matmul__(self, other):
        if isinstance(other, SuperOperator):
            self._check(other)
            return SuperOperator(self.mat @ other.mat, self.convention)
        return self.mat @ np.asarray(other)

    def __add__(self, other: "SuperOperator") -> "SuperOperator":
        self._check(other)
        return SuperOperator(self.mat + other.mat, self.convention)

    def __sub__(self, other: "SuperOperator") -> "SuperOperator":
        self._check(other)
        return SuperOperator(self.mat - other.mat, self.convention)

    def __mul__(self, scalar) -> "SuperOperator":
        return SuperOperator(self.mat * scalar, self.convention)

    __rmul__ = __mul__

    def power(self, n: int) -> "SuperOperator":
        return SuperOperator(np.linalg.matrix_power(self.mat, n), self.convention)

    def apply(self, rho) -> np.ndarray:
        """Apply to a density matrix (or raw matrix) and return the resulting matrix."""
        return devectorize(self.mat @ vectorize(rho, self.convention), self.convention)

    def trace_defect(self, generator: bool = False) -> float:
        """Max deviation of ``trace_row @ mat`` from ``trace_row`` (or from 0 for generators)."""
        row = trace_row(self.convention)
        target = np.zeros_like(row) if generator else row
        return float(np.max(np.abs(row @ self.mat - target)))

    def is_trace_preserving(self, atol: float = 1e-10) -> bool:
        return self.trace_defect() <= atol

    def is_trace_annihilating(self, atol: float = 1e-12) -> bool:
        return self.trace_defect(generator=True) <= atol


def sandwich_superop(m, conv: VectorizationConvention | None = None) -> SuperOperator:
    """Superoperator of ``rho -> m rho m^dag``."""
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError("sandwich_superop needs a square operator")
    if conv is None:
        conv = convention_for(m.shape[0])
    if m.shape[0] != conv.dim:
        raise ValueError(f"operator dimension {m.shape[0]} does not match convention dimension {conv.dim}")
    # row-major vec(A rho B) = (A kron B^T) vec(rho)
    return SuperOperator.from_row_major(np.kron(m, m.conj()), conv)


def left_right_superop(a, b, conv: VectorizationConvention) -> SuperOperator:
    """Superoperator of ``rho -> a rho b``."""
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    return SuperOperator.from_row_major(np.kron(a, b.T), conv)


def lindblad_superop(
    hamiltonian=None,
    jumps: Iterable[tuple[float, np.ndarray]] = (),
    conv: VectorizationConvention | None = None,
) -> SuperOperator:
    """Generator ``-i[H, rho] + sum_k rate_k (L rho L^dag - {L^dag L, rho}/2)``."""
    jumps = list(jumps)
    if conv is None:
        if hamiltonian is not None:
            conv = convention_for(np.asarray(hamiltonian).shape[0])
        elif jumps:
            conv = convention_for(np.asarray(jumps[0][1]).shape[0])
        else:
            raise ValueError("cannot infer dimension without a Hamiltonian or jump operator")
    eye = np.eye(conv.dim)
    mat = np.zeros((conv.dim**2, conv.dim**2), dtype=complex)
    if hamiltonian is not None:
        h = np.asarray(hamiltonian, dtype=complex)
        mat += -1j * (np.kron(h, eye) - np.kron(eye, h.T))
    for rate, op in jumps:
        op = np.asarray(op, dtype=complex)
        ldl = op.conj().T @ op
        mat += rate * (np.kron(op, op.conj()) - 0.5 * np.kron(ldl, eye) - 0.5 * np.kron(eye, ldl.T))
    return SuperOperator.from_row_major(mat, conv)


def liouvillian_from_rates(
    population_block,
    coherence_rates: Sequence[complex],
    coherence_couplings: Iterable[tuple[tuple[int, int], tuple[int, int], complex]] = (),
    conv: VectorizationConvention | None = None,
    atol: float = 1e-12,
) -> SuperOperator:
    """Assemble a generator that keeps populations and coherences in separate blocks.

    Parameters
    ----------
    population_block : (N, N) real array
        ``d rho_ii / dt = sum_k population_block[i, k] rho_kk``. Every column
        must sum to zero.
    coherence_rates : sequence of N^2 - N complex numbers
        Diagonal rate of each coherence, listed in the convention's coherence
        slot order.
    coherence_couplings : iterable of ``((i, j), (k, l), value)``
        Adds ``value * rho_kl`` to ``d rho_ij / dt``.
    """
    block = np.asarray(population_block, dtype=float)
    n = block.shape[0]
    if conv is None:
        conv = convention_for(n)
    if block.shape != (conv.dim, conv.dim):
        raise ValueError("population block shape does not match convention")
    col_sums = block.sum(axis=0)
    scale = max(1.0, float(np.max(np.abs(block), initial=0.0)))
    if np.max(np.abs(col_sums)) > atol * scale:
        raise ValueError(f"population block columns must sum to zero, got {col_sums}")
    coh = conv.coherence_slots
    rates = np.asarray(coherence_rates, dtype=complex)
    if rates.shape != (len(coh),):
        raise ValueError(f"expected {len(coh)} coherence rates, got {rates.size}")

    mat = np.zeros((conv.dim**2, conv.dim**2), dtype=complex)
    pop = conv.population_slots
    mat[np.ix_(pop, pop)] = block[np.ix_([conv.order[s][0] for s in pop], [conv.order[s][0] for s in pop])]
    mat[coh, coh] = rates
    for target, source, value in coherence_couplings:
        t, s = conv.slot(*target), conv.slot(*source)
        if t in pop or s in pop:
            raise ValueError("coherence couplings may only connect off-diagonal elements")
        mat[t, s] += value
    return SuperOperator(mat, conv)


def expm(s: SuperOperator, t: float = 1.0) -> SuperOperator:
    """Propagator ``exp(s * t)`` for ``t >= 0``."""
    if t < 0:
        raise ValueError("expm requires t >= 0")
    if t == 0:
        return SuperOperator.identity(s.convention)
    return SuperOperator(scipy.linalg.expm(s.mat * t), s.convention)


@dataclass(frozen=True)
class MeasurementSet:
    """Measurement operators ``{M_m}`` with their sandwich superoperators.

    Completeness ``sum_m M_m^dag M_m = 1`` is enforced on construction, and
    ``M_n M_m = delta_nm M_n`` when ``projective`` is True.
    """

    operators: tuple
    labels: tuple
    superops: tuple
    projective: bool = False

    def __post_init__(self):
        ops = tuple(np.array(m, dtype=complex) for m in self.operators)
        if len(ops) == 0 or len(ops) != len(self.labels) or len(ops) != len(self.superops):
            raise ValueError("operators, labels and superops must be non-empty and of equal length")
        dim = ops[0].shape[0]
        completeness = sum(m.conj().T @ m for m in ops)
        err = np.max(np.abs(completeness - np.eye(dim)))
        if err > 1e-10:
            raise ValueError(f"measurement operators are not complete (max deviation {err:.3e})")
        if self.projective:
            for a, ma in enumerate(ops):
                for b, mb in enumerate(ops):
                    target = ma if a == b else np.zeros_like(ma)
                    if np.max(np.abs(ma @ mb - target)) > 1e-10:
                        raise ValueError("operators flagged projective are not orthogonal projectors")
        for m in ops:
            m.setflags(write=False)
        object.__setattr__(self, "operators", ops)
        object.__setattr__(self, "labels", tuple(self.labels))
        object.__setattr__(self, "superops", tuple(self.superops))

    @classmethod
    def from_operators(cls, operators, labels, conv=None, projective: bool = False) -> "MeasurementSet":
        operators = [np.asarray(m, dtype=complex) for m in operators]
        if conv is None:
            conv = convention_for(operators[0].shape[0])
        superops = tuple(sandwich_superop(m, conv) for m in operators)
        return cls(tuple(operators), tuple(labels), superops, projective)

    @property
    def convention(self) -> VectorizationConvention:
        return self.superops[0].convention

    @property
    def dim(self) -> int:
        return self.convention.dim

    def __len__(self):
        return len(self.operators)

    def total(self) -> SuperOperator:
        """``sum_m M_m``; not the identity in general."""
        out = self.superops[0]
        for s in self.superops[1:]:
            out = out + s
        return out

    def probabilities(self, rho) -> np.ndarray:
        """Born probabilities ``tr(M_m^dag M_m rho)``."""
        mat = rho.mat if isinstance(rho, DensityMatrix) else np.asarray(rho)
        return np.array([np.real(np.trace(m.conj().T @ m @ mat)) for m in self.operators])
