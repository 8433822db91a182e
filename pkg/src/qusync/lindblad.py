"""Master-equation engine for the coupled qubit pair with one dissipative member.

The two-qubit Hamiltonian is

    H = (omega1/2) sz_1 + (omega2/2) sz_2 + lam (sp_1 sm_2 + sm_1 sp_2)

with qubit 2 coupled to a zero-temperature bath. After diagonalization the
secular master equation damps the two quasi-particle modes at rates
``decay1 = Gamma1 sin^2(theta)`` and ``decay2 = Gamma2 cos^2(theta)``; an
optional local sigma_z dephasing term on qubit 2 models an additional
low-frequency noise source.

A closed-form solution for the evolved distinguishability pair
(|0> +/- |1>)/sqrt(2) on qubit 1 is provided as an independent oracle for
the numerical integrator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .qcore import (
    DensityMatrix,
    Operator,
    SIGMA_Z,
    IDENTITY_2,
    ket,
    projector,
    ptrace_qubits,
)

SPECTRA = ("flat", "ohmic")

# Integrator defaults: the four-level system is non-stiff at the couplings
# studied here, so fixed-step classical RK4 with h = 0.01 (units of 1/omega2)
# keeps the global error orders of magnitude below the oracle tolerances.
DEFAULT_STEP = 0.01
DEFAULT_STRIDE = 10
ABORT_TOL = 1e-7


class DegenerateSpectrumError(ValueError):
    """The mode splitting vanishes (requires lam = 0 and omega1 = omega2)."""


class IntegrationAbort(RuntimeError):
    """A sampled state broke a state invariant beyond tolerance (step too large)."""


@dataclass(frozen=True)
class SystemParams:
    """Physical parameters of the master-equation model, in units of omega2."""

    omega1: float
    lam: float
    gamma0: float
    omega2: float = 1.0
    gamma_lf: float = 0.0
    spectrum: str = "flat"
    cutoff: float = 100.0  # documentation only; the exponential cutoff is neglected

    def __post_init__(self) -> None:
        if self.omega2 != 1.0:
            raise ValueError("omega2 is the energy scale and must be exactly 1")
        for name in ("lam", "gamma0", "gamma_lf"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative, got {getattr(self, name)}")
        if self.spectrum not in SPECTRA:
            raise ValueError(f"spectrum must be one of {SPECTRA}, got {self.spectrum!r}")
        if self.cutoff <= 0:
            raise ValueError("cutoff must be positive")

    @property
    def detuning(self) -> float:
        return self.omega1 - self.omega2

    def secular_ok(self) -> bool:
        """Validity of the full-secular form: lam above the bath coupling or
        below the absolute detuning."""
        return self.lam > self.gamma0 or self.lam < abs(self.detuning)


@dataclass(frozen=True)
class DerivedSpectrum:
    """Diagonalization data: mixing angle, mode energies, rates, mode operators."""

    theta: float
    splitting: float          # R
    omega_sum: float          # omega1 + omega2
    e1: float
    e2: float
    gamma1: float
    gamma2: float
    decay1: float             # Gamma1 sin^2(theta)
    decay2: float             # Gamma2 cos^2(theta)
    eta1: Operator
    eta2: Operator
    h_s: np.ndarray = field(repr=False)


def hamiltonian(omega1: float, omega2: float, lam: float) -> np.ndarray:
    """Two-qubit Hamiltonian with excitation-exchange coupling (4x4)."""
    h = 0.5 * omega1 * np.kron(SIGMA_Z, IDENTITY_2)
    h += 0.5 * omega2 * np.kron(IDENTITY_2, SIGMA_Z)
    exchange = np.zeros((4, 4), dtype=complex)
    exchange[1, 2] = 1.0  # |01><10|
    exchange[2, 1] = 1.0
    return h + lam * exchange


def mixing_angle(omega1: float, omega2: float, lam: float) -> float:
    """theta = arctan(2 lam / (omega1 - omega2)) / 2, with pi/4 at resonance."""
    delta = omega1 - omega2
    if delta == 0.0:
        return math.pi / 4
    return 0.5 * math.atan(2.0 * lam / delta)


def derive_spectrum(params: SystemParams) -> DerivedSpectrum:
    """Diagonalize the system Hamiltonian and attach the bath rates.

    The quasi-particle lowering operators are built from the single-excitation
    eigenvectors |v> = cos(theta)|01> + sin(theta)|10> and its orthogonal
    complement; they satisfy fermionic anticommutation relations.
    """
    theta = mixing_angle(params.omega1, params.omega2, params.lam)
    delta = params.omega1 - params.omega2
    splitting = math.hypot(delta, 2.0 * params.lam)
    omega_sum = params.omega1 + params.omega2
    e1 = 0.5 * (omega_sum - splitting)
    e2 = 0.5 * (omega_sum + splitting)
    if params.spectrum == "flat":
        gamma1 = gamma2 = params.gamma0
    else:  # ohmic density, exponential cutoff neglected
        gamma1 = params.gamma0 * e1
        gamma2 = params.gamma0 * e2

    c, s = math.cos(theta), math.sin(theta)
    mixed = c * ket(0, 1) + s * ket(1, 0)
    mixed_perp = -s * ket(0, 1) + c * ket(1, 0)
    vacuum = ket(1, 1)        # both qubits de-excited
    double = ket(0, 0)        # both excited
    # eta1^dag = |v><vac| - |dd><v_perp|, eta2^dag = |v_perp><vac| + |dd><v|
    eta1_dag = np.outer(mixed, vacuum.conj()) - np.outer(double, mixed_perp.conj())
    eta2_dag = np.outer(mixed_perp, vacuum.conj()) + np.outer(double, mixed.conj())

    return DerivedSpectrum(
        theta=theta,
        splitting=splitting,
        omega_sum=omega_sum,
        e1=e1,
        e2=e2,
        gamma1=gamma1,
        gamma2=gamma2,
        decay1=gamma1 * s * s,
        decay2=gamma2 * c * c,
        eta1=Operator(eta1_dag.conj().T),
        eta2=Operator(eta2_dag.conj().T),
        h_s=hamiltonian(params.omega1, params.omega2, params.lam),
    )


def _as_matrix(rho) -> np.ndarray:
    return rho.matrix if isinstance(rho, DensityMatrix) else np.asarray(rho, dtype=complex)


def _dissipator(op: np.ndarray, rho: np.ndarray) -> np.ndarray:
    opdop = op.conj().T @ op
    return op @ rho @ op.conj().T - 0.5 * (opdop @ rho + rho @ opdop)


def lindblad_rhs(rho, spec: DerivedSpectrum) -> np.ndarray:
    """d(rho)/dt of the secular master equation; traceless and Hermitian."""
    m = _as_matrix(rho)
    out = -1j * (spec.h_s @ m - m @ spec.h_s)
    out += spec.decay1 * _dissipator(spec.eta1.matrix, m)
    out += spec.decay2 * _dissipator(spec.eta2.matrix, m)
    return out


_SZ2 = np.kron(IDENTITY_2, SIGMA_Z)


def hybrid_rhs(rho, spec: DerivedSpectrum, gamma_lf: float) -> np.ndarray:
    """Secular master equation plus local sigma_z dephasing of qubit 2."""
    m = _as_matrix(rho)
    out = lindblad_rhs(m, spec)
    if gamma_lf != 0.0:
        out += gamma_lf * (_SZ2 @ m @ _SZ2 - m)
    return out


def liouvillian(spec: DerivedSpectrum, gamma_lf: float = 0.0) -> np.ndarray:
    """Generator as a 16x16 matrix acting on row-major flattened states."""

    def left_right(a: np.ndarray, b: np.ndarray) -> np.ndarray:
        # vec(A rho B) = (A kron B^T) vec(rho) for row-major vec
        return np.kron(a, b.T)

    eye = np.eye(4, dtype=complex)
    gen = -1j * (left_right(spec.h_s, eye) - left_right(eye, spec.h_s))
    for rate, op in ((spec.decay1, spec.eta1.matrix), (spec.decay2, spec.eta2.matrix)):
        opdop = op.conj().T @ op
        gen += rate * (
            left_right(op, op.conj().T)
            - 0.5 * left_right(opdop, eye)
            - 0.5 * left_right(eye, opdop)
        )
    if gamma_lf != 0.0:
        gen += gamma_lf * (left_right(_SZ2, _SZ2) - left_right(eye, eye))
    return gen


def params_liouvillian(params: SystemParams) -> np.ndarray:
    """Generator for the given parameters, including any dephasing term."""
    return liouvillian(derive_spectrum(params), params.gamma_lf)


# ---------------------------------------------------------------------------
# fixed-step RK4 integration
# ---------------------------------------------------------------------------


def _check_sample(m: np.ndarray, t: float, tol: float) -> None:
    trace_dev = abs(np.trace(m).real - 1.0) + abs(np.trace(m).imag)
    if trace_dev > tol:
        raise IntegrationAbort(f"trace deviation {trace_dev:.3e} at t={t:g}; reduce the step size")
    low = np.linalg.eigvalsh(m)[0]
    if low < -tol:
        raise IntegrationAbort(f"negative eigenvalue {low:.3e} at t={t:g}; reduce the step size")


def _sample_counts(t_end: float, h: float, stride: int) -> int:
    if h <= 0:
        raise ValueError("step size must be positive")
    if stride < 1:
        raise ValueError("sample stride must be at least 1")
    n_steps = int(round(t_end / h))
    if abs(n_steps * h - t_end) > 1e-9 or n_steps % stride:
        raise ValueError(
            f"t_end={t_end} is not a whole number of sample strides (h={h}, stride={stride})"
        )
    return n_steps // stride


def integrate(rhs, rho0: DensityMatrix, t_end: float, h: float = DEFAULT_STEP,
              sample_stride: int = DEFAULT_STRIDE, abort_tol: float = ABORT_TOL):
    """Classical RK4 trajectory of ``d rho/dt = rhs(rho)``.

    The state is re-symmetrized after every step; each retained sample is
    checked against the state invariants and the run aborts if a violation
    exceeds ``abort_tol``. Returns a list of ``(t, DensityMatrix)`` samples
    including t = 0.
    """
    n_samples = _sample_counts(t_end, h, sample_stride)
    m = _as_matrix(rho0).copy()
    labels = rho0.labels if isinstance(rho0, DensityMatrix) else None
    if labels is None:
        labels = tuple(f"q{i}" for i in range(int(np.log2(m.shape[0]))))
    out = [(0.0, DensityMatrix(m.copy(), labels, atol=abort_tol))]
    t = 0.0
    for k in range(1, n_samples + 1):
        for _ in range(sample_stride):
            k1 = rhs(m)
            k2 = rhs(m + 0.5 * h * k1)
            k3 = rhs(m + 0.5 * h * k2)
            k4 = rhs(m + h * k3)
            m = m + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            m = 0.5 * (m + m.conj().T)
        t = k * sample_stride * h
        _check_sample(m, t, abort_tol)
        out.append((t, DensityMatrix(m.copy(), labels, atol=abort_tol)))
    return out


def _transpose_permutation(dim: int) -> np.ndarray:
    perm = np.zeros((dim * dim, dim * dim))
    for i in range(dim):
        for j in range(dim):
            perm[dim * i + j, dim * j + i] = 1.0
    return perm


def rk4_step_matrix(gen: np.ndarray, h: float) -> np.ndarray:
    """One RK4 step of a linear generator as a matrix: the degree-4 Taylor
    polynomial of h*gen, which is exactly what classical RK4 applies."""
    a = h * gen
    step = np.eye(gen.shape[0], dtype=gen.dtype)
    term = np.eye(gen.shape[0], dtype=gen.dtype)
    for k in range(1, 5):
        term = term @ a / k
        step = step + term
    return step


def _real_step_matrix(gen: np.ndarray, h: float, dim: int) -> np.ndarray:
    """RK4 step plus symmetrization, on stacked (Re, Im) coordinates."""
    step = rk4_step_matrix(gen, h)
    n = dim * dim
    real_step = np.block([[step.real, -step.imag], [step.imag, step.real]])
    perm = _transpose_permutation(dim)
    eye = np.eye(n)
    sym = np.block(
        [[0.5 * (eye + perm), np.zeros((n, n))], [np.zeros((n, n)), 0.5 * (eye - perm)]]
    )
    return sym @ real_step


class SuperopPropagator:
    """Strided RK4 propagation of a linear generator with per-step symmetrization.

    Equivalent to :func:`integrate` for generator-driven dynamics (the RK4 map
    of a linear system is a fixed matrix polynomial), but advances one sample
    stride per matrix-vector product.
    """

    def __init__(self, gen: np.ndarray, h: float = DEFAULT_STEP,
                 stride: int = DEFAULT_STRIDE):
        self.dim = int(round(math.sqrt(gen.shape[0])))
        self.h = h
        self.stride = stride
        self.sample_dt = h * stride
        step = _real_step_matrix(gen, h, self.dim)
        self.sample_matrix = np.linalg.matrix_power(step, stride)

    def to_vec(self, m: np.ndarray) -> np.ndarray:
        flat = np.asarray(m, dtype=complex).ravel()
        return np.concatenate([flat.real, flat.imag])

    def to_matrix(self, v: np.ndarray) -> np.ndarray:
        n = self.dim * self.dim
        return (v[:n] + 1j * v[n:]).reshape(self.dim, self.dim)

    def advance(self, v: np.ndarray) -> np.ndarray:
        return self.sample_matrix @ v


def propagate_samples(gen: np.ndarray, rho0: np.ndarray, t_end: float,
                      h: float = DEFAULT_STEP, stride: int = DEFAULT_STRIDE,
                      abort_tol: float = ABORT_TOL, check_every: int = 1):
    """Yield ``(t, rho_matrix)`` samples of the generator-driven evolution."""
    n_samples = _sample_counts(t_end, h, stride)
    prop = SuperopPropagator(gen, h, stride)
    v = prop.to_vec(rho0)
    yield 0.0, prop.to_matrix(v)
    for k in range(1, n_samples + 1):
        v = prop.advance(v)
        m = prop.to_matrix(v)
        t = k * prop.sample_dt
        if check_every and k % check_every == 0:
            _check_sample(m, t, abort_tol)
        yield t, m


# ---------------------------------------------------------------------------
# canonical states and engine runs
# ---------------------------------------------------------------------------


def ground_state() -> DensityMatrix:
    """Both qubits de-excited (the zero-temperature fixed point)."""
    return DensityMatrix.from_ket(ket(1, 1), ("s1", "s2"))


def pair_initial_states() -> tuple[DensityMatrix, DensityMatrix]:
    """Distinguishability pair: qubit 1 in (|0> +/- |1>)/sqrt(2), qubit 2 de-excited."""
    down = ket(1)
    plus = (ket(0) + ket(1)) / math.sqrt(2.0)
    minus = (ket(0) - ket(1)) / math.sqrt(2.0)
    return (
        DensityMatrix.from_ket(np.kron(plus, down), ("s1", "s2")),
        DensityMatrix.from_ket(np.kron(minus, down), ("s1", "s2")),
    )


def sync_initial_state() -> DensityMatrix:
    """Product state (|0>+|1>) (x) (|0>-|1>) / 2 used for synchronization runs."""
    plus = (ket(0) + ket(1)) / math.sqrt(2.0)
    minus = (ket(0) - ket(1)) / math.sqrt(2.0)
    return DensityMatrix.from_ket(np.kron(plus, minus), ("s1", "s2"))


def _reduce_first(m: np.ndarray) -> np.ndarray:
    return ptrace_qubits(m, 2, (0,))


def _trace_distance_2x2(diff: np.ndarray) -> float:
    tr = diff[0, 0].real + diff[1, 1].real
    det = (diff[0, 0] * diff[1, 1]).real - abs(diff[0, 1]) ** 2
    disc = math.sqrt(max(tr * tr - 4.0 * det, 0.0))
    return 0.5 * (abs(0.5 * (tr + disc)) + abs(0.5 * (tr - disc)))


def observable_series(params: SystemParams, rho0: DensityMatrix, observables,
                      t_end: float = 500.0, h: float = DEFAULT_STEP,
                      stride: int = DEFAULT_STRIDE):
    """Sampled expectation values of the given 4x4 observables.

    Returns ``(times, columns)`` where ``columns[i]`` tracks ``observables[i]``.
    """
    gen = params_liouvillian(params)
    obs_flat = [np.asarray(o, dtype=complex).T.ravel() for o in observables]
    times, columns = [], [[] for _ in observables]
    for t, m in propagate_samples(gen, rho0.matrix, t_end, h, stride):
        flat = m.ravel()
        times.append(t)
        for col, o in zip(columns, obs_flat):
            col.append(float(np.dot(flat, o).real))
    return np.asarray(times), [np.asarray(c) for c in columns]


def pair_distance_series(params: SystemParams, t_end: float = 500.0,
                         h: float = DEFAULT_STEP, stride: int = DEFAULT_STRIDE):
    """Trace distance between the reduced qubit-1 states of the evolved pair.

    Returns ``(times, distances)`` sampled every ``h * stride``.
    """
    gen = params_liouvillian(params)
    plus, minus = pair_initial_states()
    sample_plus = propagate_samples(gen, plus.matrix, t_end, h, stride)
    sample_minus = propagate_samples(gen, minus.matrix, t_end, h, stride)
    times, dists = [], []
    for (t, mp), (_, mm) in zip(sample_plus, sample_minus):
        times.append(t)
        dists.append(_trace_distance_2x2(_reduce_first(mp - mm)))
    return np.asarray(times), np.asarray(dists)


@dataclass
class PairEvolution:
    """Reduced qubit-1 trajectories of the evolved distinguishability pair."""

    times: np.ndarray
    plus: list
    minus: list

    def distances(self) -> np.ndarray:
        return np.asarray(
            [_trace_distance_2x2(p.matrix - m.matrix) for p, m in zip(self.plus, self.minus)]
        )


def evolve_pair_states(params: SystemParams, t_end: float = 500.0,
                       h: float = DEFAULT_STEP, stride: int = DEFAULT_STRIDE) -> PairEvolution:
    """Integrate the pair and reduce each sample to qubit 1."""
    gen = params_liouvillian(params)
    plus0, minus0 = pair_initial_states()
    times = []
    reduced = {"plus": [], "minus": []}
    for name, rho0 in (("plus", plus0), ("minus", minus0)):
        for t, m in propagate_samples(gen, rho0.matrix, t_end, h, stride):
            if name == "plus":
                times.append(t)
            r = _reduce_first(m)
            r = 0.5 * (r + r.conj().T)
            reduced[name].append(DensityMatrix(r, ("s1",), atol=ABORT_TOL))
    return PairEvolution(np.asarray(times), reduced["plus"], reduced["minus"])


# ---------------------------------------------------------------------------
# closed-form reference solution for the evolved pair
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AnalyticReducedState:
    """Closed-form reduced qubit-1 evolution of the distinguishability pair.

    The off-diagonal coefficient combines the two damped mode coherences; the
    excited population equals its squared modulus at all times.
    """

    spec: DerivedSpectrum

    def coherence(self, t):
        """Off-diagonal coefficient of the reduced pair states."""
        t = np.asarray(t, dtype=float)
        s2 = math.sin(self.spec.theta) ** 2
        c2 = math.cos(self.spec.theta) ** 2
        rr, w0 = self.spec.splitting, self.spec.omega_sum
        term_fast = s2 * np.exp((-0.5j * (rr + w0) - 0.5 * self.spec.decay2) * t)
        term_slow = c2 * np.exp((+0.5j * (rr - w0) - 0.5 * self.spec.decay1) * t)
        return term_fast + term_slow

    def population(self, t):
        """Excited-state population coefficient; equals |coherence|^2."""
        return np.abs(self.coherence(t)) ** 2

    def trace_distance(self, t):
        return np.abs(self.coherence(t))

    def reduced_pair(self, t: float) -> tuple[np.ndarray, np.ndarray]:
        """The two reduced 2x2 states at time t."""
        q = complex(self.coherence(t))
        p = abs(q) ** 2
        out = []
        for sign in (1.0, -1.0):
            out.append(
                np.array(
                    [[0.5 * p, 0.5 * sign * q], [0.5 * sign * q.conjugate(), 1.0 - 0.5 * p]],
                    dtype=complex,
                )
            )
        return out[0], out[1]

    def full_pair(self, t: float) -> tuple[np.ndarray, np.ndarray]:
        """The two evolved 4x4 states at time t, in the computational basis."""
        sp = self.spec
        c, s = math.cos(sp.theta), math.sin(sp.theta)
        mixed = c * ket(0, 1) + s * ket(1, 0)
        mixed_perp = -s * ket(0, 1) + c * ket(1, 0)
        vac = ket(1, 1)
        rr, w0 = sp.splitting, sp.omega_sum
        g1, g2 = sp.decay1, sp.decay2

        pop_vac = 1.0 + s * s * (1.0 - math.exp(-g2 * t)) + c * c * (1.0 - math.exp(-g1 * t))
        base = pop_vac * projector(vac)
        base += s * s * math.exp(-g2 * t) * projector(mixed_perp)
        base += c * c * math.exp(-g1 * t) * projector(mixed)
        cross = -c * s * np.exp(-1j * rr * t - 0.5 * (g1 + g2) * t) * np.outer(
            mixed_perp, mixed.conj()
        )
        base += cross + cross.conj().T
        coh_fast = s * math.exp(-0.5 * g2 * t) * np.exp(-0.5j * (rr + w0) * t) * np.outer(
            mixed_perp, vac.conj()
        )
        coh_slow = c * math.exp(-0.5 * g1 * t) * np.exp(0.5j * (rr - w0) * t) * np.outer(
            mixed, vac.conj()
        )
        out = []
        for sign in (1.0, -1.0):
            m = base - sign * (coh_fast + coh_fast.conj().T) + sign * (coh_slow + coh_slow.conj().T)
            out.append(0.5 * m)
        return out[0], out[1]


def analytic_coherence(t, spec: DerivedSpectrum):
    return AnalyticReducedState(spec).coherence(t)


def analytic_trace_distance(t, spec: DerivedSpectrum):
    """|coherence(t)|; the exact trace distance of the reduced pair."""
    return AnalyticReducedState(spec).trace_distance(t)


def extrema_times(spec: DerivedSpectrum, t_max: float) -> tuple[list, list]:
    """Candidate revival maxima (2k pi / R) and minima ((2k-1) pi / R) up to t_max."""
    if spec.splitting <= 0.0:
        raise DegenerateSpectrumError("mode splitting is zero; no oscillation period exists")
    period = 2.0 * math.pi / spec.splitting
    edge = t_max * (1.0 + 1e-12)
    maxima = [k * period for k in range(1, int(math.floor(edge / period)) + 1)]
    minima = []
    k = 1
    while (2 * k - 1) * 0.5 * period <= edge:
        minima.append((2 * k - 1) * 0.5 * period)
        k += 1
    return maxima, minima
