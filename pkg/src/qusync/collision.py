"""Repeated-interaction engine with tunable ancilla-to-ancilla memory.

One cycle consists of four pairwise unitaries on [s1, s2, e_n, e_{n+1}]:
(i) the qubits exchange excitations, (ii) s2 collides with the current
environment ancilla, (iii) the qubits evolve freely while a partial SWAP
passes ancilla information to the next ancilla, (iv) the used ancilla is
discarded. Between cycles only the 8-dimensional state of [s1, s2, carry]
is kept; fresh ancillas start in the ground state of H = -(omega/2) sz,
which is |0>.

Runs are strictly sequential and fully deterministic. The per-cycle map is
linear, so ``run`` iterates a precomputed channel matrix; ``step`` is the
literal four-stage reference path and the two are interchangeable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm

from .qcore import (
    DensityMatrix,
    IDENTITY_2,
    SIGMA_X,
    SIGMA_Y,
    SIGMA_Z,
    SWAP,
    concurrence_matrix,
    ket,
    projector,
    ptrace_qubits,
)

UNITARY_TOL = 1e-12
STEP_TOL = 1e-10
RUN_TOL = 1e-8


class InvariantViolation(RuntimeError):
    """The carried state broke a state invariant; message carries the cycle index."""


@dataclass(frozen=True)
class CollisionConfig:
    """Couplings, interaction times, and length of a collision-model run."""

    omega1: float
    lam: float
    swap_strength: float = 0.0          # partial-SWAP angle in [0, pi/2]
    omega2: float = 1.0
    env_coupling: float = 1.0           # s2-ancilla strength J
    dt_free: float = 0.2
    dt_system: float = 0.2              # s1-s2 interaction time
    dt_collision: float = 0.1           # s2-ancilla interaction time
    n_collisions: int = 10000

    def __post_init__(self) -> None:
        if self.lam < 0:
            raise ValueError(f"lam must be nonnegative, got {self.lam}")
        if not 0.0 <= self.swap_strength <= math.pi / 2:
            raise ValueError(
                f"swap_strength must lie in [0, pi/2], got {self.swap_strength}"
            )
        for name in ("dt_free", "dt_system", "dt_collision"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.n_collisions < 0:
            raise ValueError("n_collisions must be nonnegative")


@dataclass(frozen=True)
class CollisionState:
    """Carried state over [s1, s2, env]; env is the ancilla awaiting its swap."""

    rho: DensityMatrix

    def __post_init__(self) -> None:
        if self.rho.labels != ("s1", "s2", "env"):
            raise ValueError(f"carried state must be labelled (s1, s2, env), got {self.rho.labels}")


@dataclass(frozen=True)
class CollisionUnitaries:
    """The four stage unitaries plus their composition on [s1, s2, e_n, e_n+1]."""

    u_system: np.ndarray
    u_collision: np.ndarray
    u_free: np.ndarray
    u_swap: np.ndarray
    u_cycle: np.ndarray = field(repr=False)


def exchange_hamiltonian(strength: float) -> np.ndarray:
    """(strength/2) (sx sx + sy sy) on two qubits."""
    return 0.5 * strength * (np.kron(SIGMA_X, SIGMA_X) + np.kron(SIGMA_Y, SIGMA_Y))


def partial_swap(angle: float) -> np.ndarray:
    """cos(angle) I + i sin(angle) SWAP."""
    return math.cos(angle) * np.eye(4, dtype=complex) + 1j * math.sin(angle) * SWAP


def _assert_unitary(u: np.ndarray, name: str) -> np.ndarray:
    defect = np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0])))
    if defect > UNITARY_TOL:
        raise ValueError(f"{name} failed the unitarity check: defect {defect:.3e}")
    return u


def build_unitaries(cfg: CollisionConfig) -> CollisionUnitaries:
    """All cycle unitaries for a configuration, each checked unitary to 1e-12."""
    u_system = expm(-1j * exchange_hamiltonian(cfg.lam) * cfg.dt_system)
    u_collision = expm(-1j * exchange_hamiltonian(cfg.env_coupling) * cfg.dt_collision)
    # free Hamiltonian is -(omega/2) sz per qubit, so the propagator phase is +
    h_free = 0.5 * cfg.omega1 * np.kron(SIGMA_Z, IDENTITY_2)
    h_free = h_free + 0.5 * cfg.omega2 * np.kron(IDENTITY_2, SIGMA_Z)
    u_free = expm(1j * h_free * cfg.dt_free)
    u_swap = partial_swap(cfg.swap_strength)

    _assert_unitary(u_system, "u_system")
    _assert_unitary(u_collision, "u_collision")
    _assert_unitary(u_free, "u_free")
    _assert_unitary(u_swap, "u_swap")

    eye4 = np.eye(4, dtype=complex)
    stage_i = np.kron(u_system, eye4)
    stage_ii = np.kron(IDENTITY_2, np.kron(u_collision, IDENTITY_2))
    # stage (iii): free evolution of (s1, s2) and the ancilla partial swap act
    # on disjoint pairs, so one Kronecker factorization captures both
    stage_iii = np.kron(u_free, u_swap)
    u_cycle = stage_iii @ stage_ii @ stage_i
    return CollisionUnitaries(u_system, u_collision, u_free, u_swap, u_cycle)


def ground_ancilla() -> DensityMatrix:
    """Fresh environment qubit: ground state |0> of H = -(omega/2) sz."""
    return DensityMatrix.from_ket(ket(0), ("env",))


def initial_carried_state(rho_qubits: DensityMatrix) -> CollisionState:
    """Adjoin a ground-state carry ancilla to an (s1, s2) state."""
    if rho_qubits.dim != 4:
        raise ValueError("expected a two-qubit (s1, s2) state")
    m = np.kron(rho_qubits.matrix, projector(ket(0)))
    return CollisionState(DensityMatrix(m, ("s1", "s2", "env")))


def sync_initial_state() -> DensityMatrix:
    """(|0>+|1>) (x) (|0>-|1>) / 2 on (s1, s2)."""
    plus = (ket(0) + ket(1)) / math.sqrt(2.0)
    minus = (ket(0) - ket(1)) / math.sqrt(2.0)
    return DensityMatrix.from_ket(np.kron(plus, minus), ("s1", "s2"))


def pair_initial_states() -> tuple[DensityMatrix, DensityMatrix]:
    """s1 in (|0> +/- |1>)/sqrt(2), s2 in its ground state |0>."""
    plus = (ket(0) + ket(1)) / math.sqrt(2.0)
    minus = (ket(0) - ket(1)) / math.sqrt(2.0)
    ground = ket(0)
    return (
        DensityMatrix.from_ket(np.kron(plus, ground), ("s1", "s2")),
        DensityMatrix.from_ket(np.kron(minus, ground), ("s1", "s2")),
    )


def _apply_cycle(m8: np.ndarray, u_cycle: np.ndarray, ancilla: np.ndarray) -> np.ndarray:
    """One linear cycle on a raw carried matrix (no validation)."""
    m16 = np.kron(m8, ancilla)
    m16 = u_cycle @ m16 @ u_cycle.conj().T
    return ptrace_qubits(m16, 4, (0, 1, 3))


_SX1_8 = np.kron(SIGMA_X, np.eye(4, dtype=complex))
_SX2_8 = np.kron(IDENTITY_2, np.kron(SIGMA_X, IDENTITY_2))


@dataclass(frozen=True)
class StepReadout:
    sx1: float
    sx2: float
    rho_s1: DensityMatrix


def step(state: CollisionState, unitaries: CollisionUnitaries,
         fresh_ancilla: DensityMatrix | None = None) -> tuple[CollisionState, StepReadout]:
    """Literal four-stage cycle; returns the new carried state and readouts."""
    ancilla = ground_ancilla() if fresh_ancilla is None else fresh_ancilla
    if ancilla.dim != 2:
        raise ValueError("fresh ancilla must be a single qubit")
    m8 = _apply_cycle(state.rho.matrix, unitaries.u_cycle, ancilla.matrix)
    m8 = 0.5 * (m8 + m8.conj().T)
    new_state = CollisionState(DensityMatrix(m8, ("s1", "s2", "env"), atol=STEP_TOL))
    reduced = ptrace_qubits(m8, 3, (0,))
    reduced = 0.5 * (reduced + reduced.conj().T)
    readout = StepReadout(
        sx1=float(np.trace(m8 @ _SX1_8).real),
        sx2=float(np.trace(m8 @ _SX2_8).real),
        rho_s1=DensityMatrix(reduced, ("s1",), atol=STEP_TOL),
    )
    return new_state, readout


def cycle_channel(unitaries: CollisionUnitaries, carried_qubits: int = 3) -> np.ndarray:
    """The per-cycle CPTP map as a matrix on row-major flattened carried states.

    ``carried_qubits = 3`` is the plain [s1, s2, env] run; ``4`` prepends a
    non-interacting ancilla for the entanglement witness runs.
    """
    if carried_qubits == 3:
        u_full = unitaries.u_cycle
    elif carried_qubits == 4:
        u_full = np.kron(IDENTITY_2, unitaries.u_cycle)
    else:
        raise ValueError("carried space must hold 3 or 4 qubits")
    dim = 2 ** carried_qubits
    anc = projector(ket(0))
    n_total = carried_qubits + 1
    keep = tuple(i for i in range(n_total) if i != carried_qubits - 1)
    channel = np.empty((dim * dim, dim * dim), dtype=complex)
    basis = np.zeros((dim, dim), dtype=complex)
    for row in range(dim):
        for col in range(dim):
            basis[row, col] = 1.0
            big = np.kron(basis, anc)
            big = u_full @ big @ u_full.conj().T
            channel[:, row * dim + col] = ptrace_qubits(big, n_total, keep).ravel()
            basis[row, col] = 0.0
    return channel


def _reduction_matrix(n_qubits: int, keep: tuple[int, ...]) -> np.ndarray:
    """Matrix mapping a flattened n-qubit state to its flattened reduced state."""
    dim = 2 ** n_qubits
    kept = 2 ** len(keep)
    out = np.zeros((kept * kept, dim * dim))
    basis = np.zeros((dim, dim))
    for row in range(dim):
        for col in range(dim):
            basis[row, col] = 1.0
            out[:, row * dim + col] = ptrace_qubits(basis, n_qubits, keep).real.ravel()
            basis[row, col] = 0.0
    return out


def _check_carried(v: np.ndarray, dim: int, cycle: int, tol: float) -> None:
    m = v.reshape(dim, dim)
    trace_dev = abs(np.trace(m) - 1.0)
    if trace_dev > tol:
        raise InvariantViolation(f"trace deviation {trace_dev:.3e} at cycle {cycle}")
    herm = np.max(np.abs(m - m.conj().T))
    if herm > tol:
        raise InvariantViolation(f"hermiticity defect {herm:.3e} at cycle {cycle}")
    low = np.linalg.eigvalsh(0.5 * (m + m.conj().T))[0]
    if low < -tol:
        raise InvariantViolation(f"negative eigenvalue {low:.3e} at cycle {cycle}")


@dataclass
class CollisionRun:
    """Per-cycle observable record of a collision run (cycle index from 1)."""

    indices: np.ndarray
    sx1: np.ndarray
    sx2: np.ndarray
    rho_s1: np.ndarray          # shape (n, 2, 2)


def run(cfg: CollisionConfig, rho0: DensityMatrix | None = None,
        check_every: int = 100) -> CollisionRun:
    """Drive ``cfg.n_collisions`` cycles and record the local observables.

    Deterministic: identical configurations give bit-identical series.
    """
    if rho0 is None:
        rho0 = sync_initial_state()
    unitaries = build_unitaries(cfg)
    channel = cycle_channel(unitaries)
    reduce_s1 = _reduction_matrix(3, (0,))
    sx1_flat = _SX1_8.T.ravel()
    sx2_flat = _SX2_8.T.ravel()

    v = np.kron(rho0.matrix, projector(ket(0))).ravel()
    n = cfg.n_collisions
    sx1 = np.empty(n)
    sx2 = np.empty(n)
    rho_s1 = np.empty((n, 2, 2), dtype=complex)
    for cycle in range(1, n + 1):
        v = channel @ v
        sx1[cycle - 1] = np.dot(v, sx1_flat).real
        sx2[cycle - 1] = np.dot(v, sx2_flat).real
        rho_s1[cycle - 1] = (reduce_s1 @ v).reshape(2, 2)
        if check_every and cycle % check_every == 0:
            _check_carried(v, 8, cycle, RUN_TOL)
    return CollisionRun(np.arange(1, n + 1), sx1, sx2, rho_s1)


def _distance_2x2(diff: np.ndarray) -> float:
    tr = diff[0, 0].real + diff[1, 1].real
    det = (diff[0, 0] * diff[1, 1]).real - abs(diff[0, 1]) ** 2
    disc = math.sqrt(max(tr * tr - 4.0 * det, 0.0))
    return 0.5 * (abs(0.5 * (tr + disc)) + abs(0.5 * (tr - disc)))


@dataclass
class PairRun:
    """Distinguishability trace of the state pair (cycle index from 0)."""

    indices: np.ndarray
    distances: np.ndarray


def run_pair(cfg: CollisionConfig, check_every: int = 100) -> PairRun:
    """Trace distance of the reduced s1 states of the evolved pair, per cycle.

    Both members share every unitary; the two propagations are fused into one
    pass, which cannot change either trajectory (they never interact).
    """
    unitaries = build_unitaries(cfg)
    channel = cycle_channel(unitaries)
    reduce_s1 = _reduction_matrix(3, (0,))
    plus, minus = pair_initial_states()
    anc = projector(ket(0))
    v_plus = np.kron(plus.matrix, anc).ravel()
    v_minus = np.kron(minus.matrix, anc).ravel()

    n = cfg.n_collisions
    distances = np.empty(n + 1)
    distances[0] = _distance_2x2((reduce_s1 @ (v_plus - v_minus)).reshape(2, 2))
    for cycle in range(1, n + 1):
        v_plus = channel @ v_plus
        v_minus = channel @ v_minus
        distances[cycle] = _distance_2x2((reduce_s1 @ (v_plus - v_minus)).reshape(2, 2))
        if check_every and cycle % check_every == 0:
            _check_carried(v_plus, 8, cycle, RUN_TOL)
            _check_carried(v_minus, 8, cycle, RUN_TOL)
    return PairRun(np.arange(n + 1), distances)


@dataclass
class EntanglementRun:
    """Concurrence of the witness pair (ancilla, s1) per cycle (index from 0)."""

    indices: np.ndarray
    concurrence: np.ndarray


def run_entanglement(cfg: CollisionConfig, check_every: int = 100) -> EntanglementRun:
    """Propagate a Bell-paired witness ancilla alongside s1.

    The witness qubit never interacts; the carried space is [a1, s1, s2, env]
    and the per-cycle concurrence of the reduced (a1, s1) state is recorded.
    """
    unitaries = build_unitaries(cfg)
    channel = cycle_channel(unitaries, carried_qubits=4)
    reduce_pair = _reduction_matrix(4, (0, 1))
    bell = projector((ket(0, 0) + ket(1, 1)) / math.sqrt(2.0))
    ground = projector(ket(0))
    v = np.kron(np.kron(bell, ground), ground).ravel()

    n = cfg.n_collisions
    series = np.empty(n + 1)
    series[0] = concurrence_matrix((reduce_pair @ v).reshape(4, 4))
    for cycle in range(1, n + 1):
        v = channel @ v
        series[cycle] = concurrence_matrix((reduce_pair @ v).reshape(4, 4))
        if check_every and cycle % check_every == 0:
            _check_carried(v, 16, cycle, RUN_TOL)
    return EntanglementRun(np.arange(n + 1), series)
