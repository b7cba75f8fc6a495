"""Small-dimension operator algebra: Pauli matrices, states and their parameterizations.

Basis convention: a single qubit uses (|0>, |1>) with the standard matrix
``sigma_z = diag(1, -1)``, i.e. ``sigma_z |0> = +|0>``. Two qubits use the
product basis (|00>, |01>, |10>, |11>) built with :func:`numpy.kron`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .exceptions import StateValidationError

HERMITIAN_TOL = 1e-10
TRACE_TOL = 1e-10
POSITIVITY_TOL = 1e-9

AXES = ("0", "x", "y", "z")

_PAULI = {
    "0": np.eye(2, dtype=complex),
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "z": np.array([[1, 0], [0, -1]], dtype=complex),
}
for _m in _PAULI.values():
    _m.setflags(write=False)

Axis = Union[str, int]


def _axis_label(axis: Axis) -> str:
    if isinstance(axis, (int, np.integer)) and not isinstance(axis, bool):
        if 0 <= axis < 4:
            return AXES[int(axis)]
    elif isinstance(axis, str):
        label = axis.lower()
        if label in ("i", "1"):
            label = "0"
        if label in _PAULI:
            return label
    raise ValueError(f"invalid Pauli axis {axis!r}; expected one of 0, x, y, z")


def pauli(axis: Axis) -> np.ndarray:
    """Return the 2x2 Pauli matrix for ``axis`` in {0, x, y, z} (0 is the identity).

    Integer labels 0..3 are accepted as aliases. The returned array is a fresh copy.
    """
    return _PAULI[_axis_label(axis)].copy()


def kron(a, b) -> np.ndarray:
    """Kronecker product, ``result[i*p + k, j*q + l] = a[i, j] * b[k, l]``."""
    return np.kron(np.asarray(a, dtype=complex), np.asarray(b, dtype=complex))


def two_qubit_pauli(alpha: Axis, beta: Axis) -> np.ndarray:
    """Return ``sigma^alpha (x) sigma^beta``."""
    return kron(pauli(alpha), pauli(beta))


def is_hermitian(m, atol: float = HERMITIAN_TOL) -> bool:
    m = np.asarray(m)
    return m.ndim == 2 and m.shape[0] == m.shape[1] and np.max(np.abs(m - m.conj().T), initial=0.0) <= atol


def eig_hermitian(m, atol: float = HERMITIAN_TOL) -> tuple[np.ndarray, np.ndarray]:
    """Eigen-decomposition of a Hermitian matrix.

    Returns ascending real eigenvalues and the matrix whose columns are the
    matching orthonormal eigenvectors. Raises ``ValueError`` when ``m`` is not
    Hermitian within ``atol`` (max-norm).
    """
    m = np.asarray(m, dtype=complex)
    if not is_hermitian(m, atol):
        raise ValueError("eig_hermitian requires a Hermitian matrix")
    return np.linalg.eigh(0.5 * (m + m.conj().T))


def check_density_matrix(mat: np.ndarray) -> None:
    """Raise :class:`StateValidationError` unless ``mat`` is a valid density matrix."""
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1] or mat.shape[0] == 0:
        raise StateValidationError(f"density matrix must be square, got shape {mat.shape}")
    herm_err = np.max(np.abs(mat - mat.conj().T))
    if herm_err > HERMITIAN_TOL:
        raise StateValidationError(f"not Hermitian: max |rho - rho^dag| = {herm_err:.3e}")
    tr = np.trace(mat)
    if abs(tr - 1.0) > TRACE_TOL:
        raise StateValidationError(f"trace is {tr:.15g}, expected 1")
    lowest = np.linalg.eigvalsh(0.5 * (mat + mat.conj().T))[0]
    if lowest < -POSITIVITY_TOL:
        raise StateValidationError(f"not positive semidefinite: min eigenvalue {lowest:.3e}")


def first_invalid_density_matrix(mats: np.ndarray) -> tuple[int, str] | None:
    """Check a stack of matrices (shape ``(k, N, N)``) at once.

    Returns ``(index, reason)`` for the first invalid matrix, or None.
    """
    adj = np.conj(np.swapaxes(mats, -1, -2))
    herm = np.max(np.abs(mats - adj), axis=(-1, -2))
    trace = np.abs(np.trace(mats, axis1=-2, axis2=-1) - 1.0)
    lowest = np.linalg.eigvalsh(0.5 * (mats + adj))[..., 0]
    bad = (herm > HERMITIAN_TOL) | (trace > TRACE_TOL) | (lowest < -POSITIVITY_TOL)
    if not np.any(bad):
        return None
    k = int(np.argmax(bad))
    return k, f"hermiticity defect {herm[k]:.3e}, trace defect {trace[k]:.3e}, min eigenvalue {lowest[k]:.3e}"


@dataclass(frozen=True)
class DensityMatrix:
    """Validated, immutable N x N density matrix."""

    mat: np.ndarray = field(repr=False)

    def __post_init__(self):
        mat = np.array(self.mat, dtype=complex)
        check_density_matrix(mat)
        mat.setflags(write=False)
        object.__setattr__(self, "mat", mat)

    @property
    def dim(self) -> int:
        return self.mat.shape[0]

    @classmethod
    def from_pure(cls, psi) -> "DensityMatrix":
        psi = np.asarray(psi, dtype=complex).ravel()
        norm = np.linalg.norm(psi)
        if norm == 0:
            raise StateValidationError("zero state vector")
        psi = psi / norm
        return cls(np.outer(psi, psi.conj()))

    @classmethod
    def maximally_mixed(cls, dim: int) -> "DensityMatrix":
        return cls(np.eye(dim, dtype=complex) / dim)

    def expectation(self, op) -> float:
        """Real part of ``tr(op rho)``; meaningful for Hermitian ``op``."""
        return float(np.real(np.trace(np.asarray(op) @ self.mat)))

    def __repr__(self):
        return f"DensityMatrix(dim={self.dim})"


@dataclass(frozen=True)
class BlochVector:
    """Single-qubit Bloch vector, ``rho = (1 + r . sigma) / 2``."""

    rx: float
    ry: float
    rz: float

    def __post_init__(self):
        if self.rx**2 + self.ry**2 + self.rz**2 > 1 + 1e-9:
            raise StateValidationError("Bloch vector longer than one")

    def as_array(self) -> np.ndarray:
        return np.array([self.rx, self.ry, self.rz])

    @property
    def norm(self) -> float:
        return float(np.sqrt(self.rx**2 + self.ry**2 + self.rz**2))


def bloch_from_rho(rho) -> BlochVector:
    mat = rho.mat if isinstance(rho, DensityMatrix) else np.asarray(rho)
    if mat.shape != (2, 2):
        raise ValueError("Bloch vectors are defined for single qubits only")
    r = [float(np.real(np.trace(_PAULI[a] @ mat))) for a in "xyz"]
    return BlochVector(*r)


def rho_from_bloch(v: BlochVector) -> DensityMatrix:
    mat = 0.5 * (_PAULI["0"] + v.rx * _PAULI["x"] + v.ry * _PAULI["y"] + v.rz * _PAULI["z"])
    return DensityMatrix(mat)


@dataclass(frozen=True)
class TwoQubitCorrelators:
    """Coefficients ``r[a][b]`` of ``rho = sum_ab r[a][b] sigma^a (x) sigma^b``.

    ``r[0][0]`` is fixed to 1/4. Expectation values of the generators follow
    from trace orthogonality as ``<Sigma^ab> = 4 r[a][b]``.
    """

    r: np.ndarray = field(repr=False)

    def __post_init__(self):
        r = np.array(self.r, dtype=float)
        if r.shape != (4, 4):
            raise ValueError("correlator table must be 4x4")
        if abs(r[0, 0] - 0.25) > 1e-12:
            raise ValueError("r[0][0] must equal 1/4")
        r.setflags(write=False)
        object.__setattr__(self, "r", r)

    @classmethod
    def from_expectations(cls, values: dict) -> "TwoQubitCorrelators":
        """Build from ``{"xx": <Sigma^xx>, "z0": <sigma^z_1>, ...}``; missing entries are zero."""
        r = np.zeros((4, 4))
        r[0, 0] = 0.25
        for key, val in values.items():
            a, b = (_axis_label(c) for c in key)
            if (a, b) == ("0", "0"):
                raise ValueError("the identity component is fixed")
            r[AXES.index(a), AXES.index(b)] = val / 4.0
        return cls(r)

    def expectation(self, alpha: Axis, beta: Axis) -> float:
        return 4.0 * float(self.r[AXES.index(_axis_label(alpha)), AXES.index(_axis_label(beta))])


def correlators_from_rho(rho) -> TwoQubitCorrelators:
    mat = rho.mat if isinstance(rho, DensityMatrix) else np.asarray(rho)
    if mat.shape != (4, 4):
        raise ValueError("two-qubit correlators need a 4x4 matrix")
    r = np.empty((4, 4))
    for i, a in enumerate(AXES):
        for j, b in enumerate(AXES):
            r[i, j] = np.real(np.trace(two_qubit_pauli(a, b) @ mat)) / 4.0
    r[0, 0] = 0.25
    return TwoQubitCorrelators(r)


def rho_from_correlators(c: TwoQubitCorrelators, validate: bool = True):
    """Reconstruct the 4x4 matrix; returns a :class:`DensityMatrix` unless ``validate`` is False."""
    mat = np.zeros((4, 4), dtype=complex)
    for i, a in enumerate(AXES):
        for j, b in enumerate(AXES):
            if c.r[i, j] != 0.0:
                mat += c.r[i, j] * two_qubit_pauli(a, b)
    return DensityMatrix(mat) if validate else mat
