"""Dense complex linear algebra and quantum-state utilities for few-qubit systems.

Basis convention used throughout the package: |0> is the +1 eigenstate of
sigma_z, and composite bases are ordered with the leftmost subsystem label
slowest (so |01> = |0> (x) |1> sits at index 1 of a two-qubit state).
All states and operators are small dense complex matrices; everything here
is a pure function of its inputs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

HERMITICITY_TOL = 1e-10
TRACE_TOL = 1e-10
POSITIVITY_TOL = 1e-10
UNITARITY_TOL = 1e-10


class ValidationError(ValueError):
    """A matrix failed a quantum-state or operator invariant."""


class LabelError(KeyError):
    """A subsystem tag is unknown or duplicated."""


class DimensionMismatchError(ValueError):
    """Operands act on Hilbert spaces of different dimension."""


# Pauli matrices and friends, in the |0>, |1> basis.
SIGMA_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
SIGMA_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
SIGMA_Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)
SIGMA_PLUS = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex)   # |0><1|
SIGMA_MINUS = np.array([[0.0, 0.0], [1.0, 0.0]], dtype=complex)  # |1><0|
IDENTITY_2 = np.eye(2, dtype=complex)

# Two-qubit SWAP: |00><00| + |01><10| + |10><01| + |11><11|.
SWAP = np.array(
    [
        [1.0, 0.0, 0.0, 0.0],
        [0.0, 0.0, 1.0, 0.0],
        [0.0, 1.0, 0.0, 0.0],
        [0.0, 0.0, 0.0, 1.0],
    ],
    dtype=complex,
)


def ket(*bits: int) -> np.ndarray:
    """Computational-basis column vector |b1 b2 ...> for the given bits."""
    index = 0
    for b in bits:
        if b not in (0, 1):
            raise ValueError(f"bits must be 0 or 1, got {b}")
        index = 2 * index + b
    vec = np.zeros(2 ** len(bits), dtype=complex)
    vec[index] = 1.0
    return vec


def projector(vec: np.ndarray) -> np.ndarray:
    """|v><v| for a (not necessarily normalized) state vector."""
    v = np.asarray(vec, dtype=complex).ravel()
    return np.outer(v, v.conj())


def _as_square(matrix: np.ndarray, name: str) -> np.ndarray:
    m = np.asarray(matrix, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValidationError(f"{name} must be a square matrix, got shape {m.shape}")
    return m


def hermiticity_defect(m: np.ndarray) -> float:
    return float(np.max(np.abs(m - m.conj().T)))


def min_eigenvalue(m: np.ndarray) -> float:
    return float(np.linalg.eigvalsh(0.5 * (m + m.conj().T))[0])


@dataclass(frozen=True)
class DensityMatrix:
    """Hermitian, unit-trace, positive-semidefinite matrix over labelled qubits.

    ``labels`` names the tensor factors in basis order (leftmost slowest).
    ``atol`` is the invariant tolerance; integrators pass a relaxed value for
    sampled states (round-off accumulates along a trajectory).
    """

    matrix: np.ndarray
    labels: tuple[str, ...]
    atol: float = field(default=POSITIVITY_TOL, repr=False, compare=False)

    def __post_init__(self) -> None:
        m = _as_square(self.matrix, "density matrix")
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "labels", tuple(self.labels))
        if len(set(self.labels)) != len(self.labels):
            raise LabelError(f"duplicate subsystem labels: {self.labels}")
        if m.shape[0] != 2 ** len(self.labels):
            raise ValidationError(
                f"dimension {m.shape[0]} does not match {len(self.labels)} qubit labels"
            )
        if hermiticity_defect(m) > self.atol:
            raise ValidationError(
                f"not Hermitian: defect {hermiticity_defect(m):.3e} > {self.atol}"
            )
        if abs(np.trace(m) - 1.0) > self.atol:
            raise ValidationError(f"trace {np.trace(m):.12f} is not 1")
        low = min_eigenvalue(m)
        if low < -self.atol:
            raise ValidationError(f"not positive semidefinite: min eigenvalue {low:.3e}")

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_qubits(self) -> int:
        return len(self.labels)

    @classmethod
    def from_ket(cls, vec: np.ndarray, labels) -> "DensityMatrix":
        v = np.asarray(vec, dtype=complex).ravel()
        norm = np.linalg.norm(v)
        if norm == 0:
            raise ValidationError("zero state vector")
        return cls(projector(v / norm), tuple(labels))

    def purity(self) -> float:
        return float(np.real(np.trace(self.matrix @ self.matrix)))


@dataclass(frozen=True)
class Operator:
    """A matrix acting on one or more qubits; optionally checked unitary."""

    matrix: np.ndarray
    unitary: bool = False

    def __post_init__(self) -> None:
        m = _as_square(self.matrix, "operator")
        object.__setattr__(self, "matrix", m)
        if self.unitary:
            defect = np.max(np.abs(m.conj().T @ m - np.eye(m.shape[0])))
            if defect > UNITARITY_TOL:
                raise ValidationError(f"not unitary: defect {defect:.3e}")

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True)
class StatePair:
    """Two states on the same labelled space, e.g. the distinguishability pair."""

    a: DensityMatrix
    b: DensityMatrix

    def __post_init__(self) -> None:
        if self.a.labels != self.b.labels:
            raise LabelError(
                f"pair members live on different spaces: {self.a.labels} vs {self.b.labels}"
            )


def tensor(a, b):
    """Kronecker product of two same-kind objects.

    For ``DensityMatrix`` operands the labels are concatenated in operand
    order; for ``Operator`` operands the unitary flag is the conjunction.
    Raw arrays are combined as raw arrays.
    """
    if isinstance(a, DensityMatrix) and isinstance(b, DensityMatrix):
        overlap = set(a.labels) & set(b.labels)
        if overlap:
            raise LabelError(f"labels repeated across factors: {sorted(overlap)}")
        return DensityMatrix(np.kron(a.matrix, b.matrix), a.labels + b.labels)
    if isinstance(a, Operator) and isinstance(b, Operator):
        return Operator(np.kron(a.matrix, b.matrix), unitary=a.unitary and b.unitary)
    if isinstance(a, (DensityMatrix, Operator)) or isinstance(b, (DensityMatrix, Operator)):
        raise TypeError("tensor requires operands of the same kind")
    return np.kron(np.asarray(a, dtype=complex), np.asarray(b, dtype=complex))


def ptrace_qubits(matrix: np.ndarray, n_qubits: int, keep: tuple[int, ...]) -> np.ndarray:
    """Partial trace of a 2**n square matrix, keeping the given qubit positions."""
    m = np.asarray(matrix, dtype=complex)
    keep = tuple(keep)
    drop = tuple(i for i in range(n_qubits) if i not in keep)
    tensor_form = m.reshape((2,) * (2 * n_qubits))
    for offset, axis in enumerate(drop):
        # each trace removes one row and one column axis
        tensor_form = np.trace(
            tensor_form,
            axis1=axis - offset,
            axis2=axis - offset + n_qubits - offset,
        )
    dim = 2 ** len(keep)
    return tensor_form.reshape(dim, dim)


def partial_trace(rho: DensityMatrix, keep) -> DensityMatrix:
    """Reduced state over the subsystems named in ``keep`` (in current order)."""
    keep = tuple(keep)
    if not keep:
        raise LabelError("keep must name at least one subsystem")
    unknown = [tag for tag in keep if tag not in rho.labels]
    if unknown:
        raise LabelError(f"unknown subsystem tags {unknown}; state has {rho.labels}")
    positions = tuple(i for i, tag in enumerate(rho.labels) if tag in keep)
    reduced = ptrace_qubits(rho.matrix, rho.n_qubits, positions)
    reduced = 0.5 * (reduced + reduced.conj().T)
    return DensityMatrix(reduced, tuple(rho.labels[i] for i in positions))


def trace_distance(a: DensityMatrix, b: DensityMatrix) -> float:
    """Half the trace norm of (a - b); in [0, 1] for states."""
    if a.dim != b.dim:
        raise DimensionMismatchError(f"dimension mismatch: {a.dim} vs {b.dim}")
    return trace_distance_matrices(a.matrix, b.matrix)


def trace_distance_matrices(a: np.ndarray, b: np.ndarray) -> float:
    """Trace distance of two Hermitian matrices given as raw arrays."""
    diff = a - b
    diff = 0.5 * (diff + diff.conj().T)
    return float(0.5 * np.sum(np.abs(np.linalg.eigvalsh(diff))))


_YY = np.kron(SIGMA_Y, SIGMA_Y)


def concurrence(rho: DensityMatrix) -> float:
    """Wootters concurrence of a two-qubit state."""
    if rho.dim != 4:
        raise DimensionMismatchError("concurrence is defined for two-qubit states")
    return concurrence_matrix(rho.matrix)


def concurrence_matrix(rho: np.ndarray) -> float:
    """Concurrence from a raw 4x4 density matrix (assumed valid)."""
    flipped = _YY @ rho.conj() @ _YY
    eigs = np.linalg.eigvals(rho @ flipped)
    # spectrum of rho.rho~ is nonnegative up to round-off
    roots = np.sqrt(np.clip(eigs.real, 0.0, None))
    roots.sort()
    return float(max(0.0, roots[3] - roots[2] - roots[1] - roots[0]))


def expectation(rho: DensityMatrix, op: Operator) -> float:
    """Tr(rho O) for Hermitian O; the vanishing imaginary residue is discarded."""
    o = op.matrix
    if rho.dim != o.shape[0]:
        raise DimensionMismatchError(f"dimension mismatch: {rho.dim} vs {o.shape[0]}")
    if hermiticity_defect(o) > HERMITICITY_TOL:
        raise ValidationError("observable is not Hermitian")
    value = np.trace(rho.matrix @ o)
    return float(value.real)


def apply_unitary(rho: DensityMatrix, op: Operator) -> DensityMatrix:
    """U rho U^dag; validates that U is unitary and preserves state invariants."""
    u = op.matrix
    if rho.dim != u.shape[0]:
        raise DimensionMismatchError(f"dimension mismatch: {rho.dim} vs {u.shape[0]}")
    defect = np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0])))
    if defect > UNITARITY_TOL:
        raise ValidationError(f"operator is not unitary: defect {defect:.3e}")
    out = u @ rho.matrix @ u.conj().T
    out = 0.5 * (out + out.conj().T)
    return DensityMatrix(out, rho.labels)


def embed(op2: np.ndarray, position: int, n_qubits: int) -> np.ndarray:
    """Lift a single-qubit operator to qubit ``position`` of an n-qubit space."""
    out = np.eye(1, dtype=complex)
    for i in range(n_qubits):
        out = np.kron(out, op2 if i == position else IDENTITY_2)
    return out
