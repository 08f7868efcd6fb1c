"""Quantum and classical propagation.

Amplitudes are always propagated in the diabatic basis with fixed-step RK4.
Adiabatic quantities are obtained by projection onto the gauge-tracked
eigenbasis at every integrator step, and the measure is accumulated at the
same cadence; ``record_stride`` only thins what is stored.

Models are duck-typed. They expose ``dim``, ``is_static``,
``default_target``, ``vibration_frequency``, ``hamiltonian(t, positions)``,
``dhdt(t, positions, velocities)``, ``energy_scale(positions)`` and
``describe()``; position-dependent models also provide
``dipole_gradient(positions)``, ``morse_forces(positions)`` and
``classical_potential(positions)``.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional

import numpy as np

from . import measure
from .errors import (
    DimensionMismatch,
    MonomerCollision,
    NearDegeneracy,
    StepTooLarge,
    SurfaceOutOfRange,
    ValidationError,
)
from .spectral import (
    DEGENERACY_TOL,
    OVERLAP_THRESHOLD,
    EigenDerivatives,
    EigenSystem,
    align_gauge,
    eigensolve,
    eigenvector_rates,
    finite_difference_rates,
)

log = logging.getLogger(__name__)

NORM_DRIFT_ABORT = 1e-6
DT_DIVISOR = 200


@dataclass(frozen=True)
class QuantumState:
    amplitudes: np.ndarray
    time: float = 0.0

    @classmethod
    def normalized(cls, amplitudes, time: float = 0.0) -> "QuantumState":
        c = np.asarray(amplitudes, dtype=complex)
        return cls(c / np.linalg.norm(c), time)

    @property
    def norm(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real)


@dataclass(frozen=True)
class AdiabaticDecomposition:
    """Adiabatic amplitudes ``coeffs[k] = moduli[k] * exp(1j * phases[k])``."""

    coeffs: np.ndarray
    moduli: np.ndarray
    phases: np.ndarray
    moduli_rates: Optional[np.ndarray] = None
    stamp: Optional[float] = None


@dataclass(frozen=True)
class ClassicalState:
    positions: np.ndarray
    velocities: np.ndarray
    mass: float
    surface_index: int = 0

    def __post_init__(self):
        X = np.asarray(self.positions, dtype=float)
        object.__setattr__(self, "positions", X)
        object.__setattr__(self, "velocities", np.asarray(self.velocities, dtype=float))
        if not self.mass > 0:
            raise ValidationError("mass must be > 0")
        if X.shape[0] > 1 and (X[1:] - X[:-1]).min() <= 0:
            raise MonomerCollision(f"positions not strictly increasing: {X}")

    @property
    def mobile(self) -> bool:
        return math.isfinite(self.mass)

    def kinetic_energy(self) -> float:
        if not self.mobile:
            return 0.0
        return 0.5 * self.mass * float(self.velocities @ self.velocities)


@dataclass(frozen=True)
class TimeGrid:
    dt: float
    t_end: float
    record_stride: int = 1

    def __post_init__(self):
        problems = []
        if not self.dt > 0:
            problems.append("grid.dt must be > 0")
        if not self.t_end > 0:
            problems.append("grid.t_end must be > 0")
        if int(self.record_stride) != self.record_stride or self.record_stride < 1:
            problems.append("grid.record_stride must be an integer >= 1")
        if problems:
            raise ValidationError(problems)

    @property
    def n_steps(self) -> int:
        return max(1, int(round(self.t_end / self.dt)))


@dataclass
class TrajectoryOptions:
    target_index: Optional[int] = None
    amp_floor: float = measure.AMP_FLOOR
    degeneracy_tol: float = DEGENERACY_TOL
    overlap_threshold: float = OVERLAP_THRESHOLD
    norm_drift_abort: float = NORM_DRIFT_ABORT
    surface_policy: str = "fixed"  # or "most_populated_each_step"
    surface_index: Optional[int] = None
    record_positions: bool = True
    fd_fraction: float = 1e-3
    metadata: dict = field(default_factory=dict)


@dataclass
class TrajectoryRecord:
    times: np.ndarray
    diabatic_pops: np.ndarray
    adiabatic_pops: np.ndarray
    t_field: np.ndarray
    T1_series: np.ndarray
    T2_series: np.ndarray
    classical_positions: Optional[np.ndarray]
    metadata: dict

    @property
    def n_sites(self) -> int:
        return self.diabatic_pops.shape[1]


# --------------------------------------------------------------------------
# quantum part


def schrodinger_rhs(model, state: QuantumState, classical: Optional[ClassicalState] = None) -> np.ndarray:
    """``dc/dt = -i H c`` (hbar = 1)."""
    c = np.asarray(state.amplitudes)
    if c.shape != (model.dim,):
        raise DimensionMismatch(f"state has shape {c.shape}, model dim {model.dim}")
    X = classical.positions if classical is not None else None
    return -1j * (model.hamiltonian(state.time, X) @ c)


def _rk4(c, h0, hm, h1, dt):
    k1 = -1j * (h0 @ c)
    k2 = -1j * (hm @ (c + 0.5 * dt * k1))
    k3 = -1j * (hm @ (c + 0.5 * dt * k2))
    k4 = -1j * (h1 @ (c + dt * k3))
    return c + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def rk4_step_matrix(H, dt: float) -> np.ndarray:
    """One RK4 step for a constant Hamiltonian as a matrix (Taylor polynomial to 4th order)."""
    A = -1j * dt * np.asarray(H)
    eye = np.eye(A.shape[0], dtype=complex)
    A2 = A @ A
    return eye + A + A2 / 2.0 + A2 @ A / 6.0 + A2 @ A2 / 24.0


def midpoint_positions(cl0: ClassicalState, cl1: ClassicalState, dt: float) -> np.ndarray:
    """Cubic Hermite interpolation of the positions at the half step."""
    return 0.5 * (cl0.positions + cl1.positions) + (dt / 8.0) * (cl0.velocities - cl1.velocities)


def _check_norm(c, norm0, abort, t):
    drift = abs(np.vdot(c, c).real - norm0)
    if drift > abort:
        raise StepTooLarge(f"norm drift {drift:.3e} exceeds {abort:.1e} at t={t:.6g}")
    return drift


def step_quantum(
    state: QuantumState,
    model,
    dt: float,
    classical: Optional[ClassicalState] = None,
    classical_end: Optional[ClassicalState] = None,
    dt_max: float = math.inf,
    norm_drift_abort: float = NORM_DRIFT_ABORT,
) -> QuantumState:
    """Advance the amplitudes by one RK4 step.

    For position-dependent models the Hamiltonian at the half step uses the
    Hermite-interpolated positions between ``classical`` and ``classical_end``.
    No renormalization is applied; excessive norm drift raises ``StepTooLarge``.
    """
    if not 0 < dt <= dt_max:
        raise ValidationError(f"dt must lie in (0, {dt_max}], got {dt}")
    c = np.asarray(state.amplitudes, dtype=complex)
    if c.shape != (model.dim,):
        raise DimensionMismatch(f"state has shape {c.shape}, model dim {model.dim}")
    t = state.time
    if classical is None:
        h0 = model.hamiltonian(t, None)
        hm = model.hamiltonian(t + 0.5 * dt, None)
        h1 = model.hamiltonian(t + dt, None)
    else:
        end = classical_end if classical_end is not None else classical
        h0 = model.hamiltonian(t, classical.positions)
        hm = model.hamiltonian(t + 0.5 * dt, midpoint_positions(classical, end, dt))
        h1 = model.hamiltonian(t + dt, end.positions)
    c1 = _rk4(c, h0, hm, h1, dt)
    _check_norm(c1, np.vdot(c, c).real, norm_drift_abort, t + dt)
    return QuantumState(c1, t + dt)


def project_adiabatic(
    state: QuantumState, eig: EigenSystem, prev_phases: Optional[np.ndarray] = None
) -> AdiabaticDecomposition:
    """``coeffs[k] = <phi_k|Psi>``; phases of vanishing amplitudes keep ``prev_phases``."""
    c = np.asarray(state.amplitudes)
    if c.shape != (eig.dim,):
        raise DimensionMismatch(f"state has shape {c.shape}, eigensystem dim {eig.dim}")
    coeffs = eig.vectors.conj().T @ c
    moduli = np.abs(coeffs)
    phases = np.angle(coeffs)
    zero = moduli == 0.0
    if zero.any():
        phases[zero] = 0.0 if prev_phases is None else np.asarray(prev_phases)[zero]
    return AdiabaticDecomposition(coeffs, moduli, phases, stamp=eig.stamp)


def adiabatic_rhs(decomp: AdiabaticDecomposition, eig: EigenSystem, derivs: EigenDerivatives) -> np.ndarray:
    """``d c~_k/dt = -i U_k c~_k - sum_m kappa_km c~_m``."""
    c = decomp.coeffs
    if c.shape != (eig.dim,) or derivs.kappa.shape != (eig.dim, eig.dim):
        raise DimensionMismatch("inconsistent adiabatic inputs")
    return -1j * eig.energies * c - derivs.kappa @ c


# --------------------------------------------------------------------------
# classical part


def hellmann_feynman_forces(model, eig: EigenSystem, surface: int, positions) -> np.ndarray:
    """Forces on the monomers from adiabatic surface ``surface`` plus the Morse bonds."""
    if not 0 <= surface < eig.dim:
        raise SurfaceOutOfRange(f"surface {surface} not in [0, {eig.dim})")
    phi = eig.vectors[:, surface]
    G = model.dipole_gradient(positions)
    # dU_s/dX_k = sum_m 2 Re[conj(phi_k) phi_m] G[k, m]
    rho = (phi.conj()[:, None] * phi[None, :]).real
    grad_surface = 2.0 * np.sum(rho * G, axis=1)
    return -grad_surface + model.morse_forces(positions)


class ClassicalStep(NamedTuple):
    state: ClassicalState
    forces: np.ndarray
    eig: Optional[EigenSystem]


def step_classical(
    classical: ClassicalState,
    forces_begin: np.ndarray,
    model,
    dt: float,
    eig_provider: Optional[Callable[[np.ndarray], EigenSystem]] = None,
) -> ClassicalStep:
    """One velocity-Verlet step on the surface ``classical.surface_index``.

    ``eig_provider`` maps new positions to an eigensystem (typically gauge
    aligned by the caller); it defaults to a plain :func:`eigensolve`.
    Returns the new state with the end-of-step forces and eigensystem.
    """
    if not dt > 0:
        raise ValidationError("dt must be > 0")
    if not classical.mobile:
        return ClassicalStep(classical, np.zeros_like(classical.positions), None)
    M = classical.mass
    v_half = classical.velocities + (0.5 * dt / M) * forces_begin
    X1 = classical.positions + dt * v_half
    if (X1[1:] - X1[:-1]).min() <= 0:
        raise MonomerCollision(f"monomer ordering lost during step: {X1}")
    if eig_provider is None:
        eig1 = eigensolve(model.hamiltonian(0.0, X1))
    else:
        eig1 = eig_provider(X1)
    F1 = hellmann_feynman_forces(model, eig1, classical.surface_index, X1)
    v1 = v_half + (0.5 * dt / M) * F1
    return ClassicalStep(ClassicalState(X1, v1, M, classical.surface_index), F1, eig1)


def classical_energy(model, classical: ClassicalState, eig: EigenSystem) -> float:
    """Kinetic + Morse + surface energy; conserved on a fixed surface."""
    return (
        classical.kinetic_energy()
        + model.classical_potential(classical.positions)
        + float(eig.energies[classical.surface_index])
    )


# --------------------------------------------------------------------------
# orchestration


def default_dt(model, positions=None, divisor: int = DT_DIVISOR) -> float:
    """``min(2 pi / energy scale, 2 pi / vibration frequency) / divisor``."""
    periods = [2.0 * np.pi / model.energy_scale(positions)]
    if model.vibration_frequency:
        periods.append(2.0 * np.pi / model.vibration_frequency)
    return min(periods) / divisor


def _rates(model, t, X, V, eig, dt, options, counters):
    hdot = model.dhdt(t, X, V)
    try:
        return eigenvector_rates(hdot, eig, options.degeneracy_tol)
    except NearDegeneracy:
        counters["fd_fallbacks"] += 1
        delta = options.fd_fraction * dt
        if X is None:
            return finite_difference_rates(lambda s: model.hamiltonian(s, None), t, delta, eig, options.degeneracy_tol)
        return finite_difference_rates(
            lambda s: model.hamiltonian(s, X + (s - t) * V), t, delta, eig, options.degeneracy_tol
        )


def run_trajectory(
    model,
    q0: QuantumState,
    cl0: Optional[ClassicalState],
    grid: TimeGrid,
    options: Optional[TrajectoryOptions] = None,
) -> TrajectoryRecord:
    """Propagate one trajectory and evaluate the adiabaticity measures.

    Every integrator step performs: eigensolve + gauge alignment, adiabatic
    projection, eigenvector rates, the transition-rate field and the
    trapezoidal update of T1/T2.
    """
    options = options or TrajectoryOptions()
    dim = model.dim
    c = np.asarray(q0.amplitudes, dtype=complex).copy()
    if c.shape != (dim,):
        raise DimensionMismatch(f"initial state has shape {c.shape}, model dim {dim}")
    target = model.default_target if options.target_index is None else options.target_index
    if not 0 <= target < dim:
        raise ValidationError(f"target index {target} outside [0, {dim})")
    dt = grid.dt
    n_steps = grid.n_steps
    stride = grid.record_stride
    t = float(q0.time)
    norm0 = float(np.vdot(c, c).real)

    cl = cl0
    mobile = cl is not None and cl.mobile and not model.is_static
    X = cl.positions if cl is not None else None
    static = model.is_static

    h_cur = model.hamiltonian(t, X)
    eig = eigensolve(h_cur, options.degeneracy_tol, stamp=t)
    if cl is not None:
        surface = options.surface_index
        if surface is None:
            surface = int(np.argmax(np.abs(eig.vectors.conj().T @ c)))
        if not 0 <= surface < dim:
            raise SurfaceOutOfRange(f"surface {surface} not in [0, {dim})")
        cl = ClassicalState(cl.positions, cl.velocities, cl.mass, surface)
    forces = hellmann_feynman_forces(model, eig, cl.surface_index, cl.positions) if mobile else None

    counters = {"gauge_swap_flags": 0, "degenerate_steps": 0, "fd_fallbacks": 0, "surface_switches": 0}
    max_resid = 0.0
    max_sum = 0.0
    max_drift = 0.0
    acc = measure.MeasureAccumulator(target)
    phases = None

    if static:
        step_matrix = rk4_step_matrix(model.hamiltonian(t, X), dt)
        zero_derivs = EigenDerivatives(np.zeros((dim, dim), complex), np.zeros((dim, dim), complex), None)

    rec_idx = list(range(0, n_steps + 1, stride))
    if rec_idx[-1] != n_steps:
        rec_idx.append(n_steps)
    n_rec = len(rec_idx)
    times = np.empty(n_rec)
    p_dia = np.empty((n_rec, dim))
    p_adia = np.empty((n_rec, dim))
    t_rec = np.empty((n_rec, dim))
    T1 = np.empty(n_rec)
    T2 = np.empty(n_rec)
    pos = np.empty((n_rec, dim)) if (cl is not None and options.record_positions) else None
    r = 0

    for i in range(n_steps + 1):
        # -- measure at t_i
        if static:
            derivs = zero_derivs
        else:
            derivs = _rates(model, t, X, cl.velocities if cl is not None else None, eig, dt, options, counters)
        coeffs = eig.vectors.conj().T @ c
        moduli = np.abs(coeffs)
        new_phases = np.angle(coeffs)
        if phases is not None:
            zero = moduli == 0.0
            new_phases[zero] = phases[zero]
        phases = new_phases
        cdot = -1j * eig.energies * coeffs - derivs.kappa @ coeffs
        adot = measure.moduli_rates(coeffs, moduli, cdot, options.amp_floor)
        tc = measure.rate_field_complex(coeffs, phases, adot, eig.vectors, derivs.vec_dot)
        tf = tc.real
        resid = float(np.max(np.abs(tc.imag)))
        if resid > measure.IMAG_RESIDUE_TOL:
            raise measure.ImaginaryResidue(f"imaginary residue {resid:.3e} at t={t:.6g}")
        max_resid = max(max_resid, resid)
        max_sum = max(max_sum, abs(float(tf.sum())))
        acc.update(tf, dt)

        if r < n_rec and rec_idx[r] == i:
            times[r] = t
            p_dia[r] = (c.conj() * c).real
            p_adia[r] = moduli**2
            t_rec[r] = tf
            T1[r] = acc.T1
            T2[r] = acc.T2
            if pos is not None:
                pos[r] = cl.positions
            r += 1
        if i == n_steps:
            break

        # -- advance to t_{i+1}
        t1 = q0.time + (i + 1) * dt
        if static:
            c = step_matrix @ c
        elif mobile:

            h_end = []

            def provider(X1, _eig=eig, _t1=t1):
                h_end.append(model.hamiltonian(_t1, X1))
                fresh = eigensolve(h_end[0], options.degeneracy_tol, stamp=_t1, validate=False)
                return align_gauge(_eig, fresh, options.overlap_threshold)

            stepped = step_classical(cl, forces, model, dt, provider)
            hm = model.hamiltonian(t + 0.5 * dt, midpoint_positions(cl, stepped.state, dt))
            c = _rk4(c, h_cur, hm, h_end[0], dt)
            h_cur = h_end[0]
            cl, forces, eig = stepped
            X = cl.positions
        else:
            h1 = model.hamiltonian(t1, X)
            c = _rk4(c, h_cur, model.hamiltonian(t + 0.5 * dt, X), h1, dt)
            h_cur = h1
            eig = align_gauge(
                eig, eigensolve(h1, options.degeneracy_tol, stamp=t1, validate=False), options.overlap_threshold
            )
        t = t1
        max_drift = max(max_drift, _check_norm(c, norm0, options.norm_drift_abort, t))
        if not static:
            counters["gauge_swap_flags"] += eig.swap_flag
            counters["degenerate_steps"] += eig.degenerate_flag
        if mobile and options.surface_policy == "most_populated_each_step":
            s = int(np.argmax(np.abs(eig.vectors.conj().T @ c)))
            if s != cl.surface_index:
                counters["surface_switches"] += 1
                cl = ClassicalState(cl.positions, cl.velocities, cl.mass, s)
                forces = hellmann_feynman_forces(model, eig, s, cl.positions)

    metadata = dict(options.metadata)
    metadata.update(model.describe())
    metadata.update(
        {
            "dt": dt,
            "n_steps": n_steps,
            "record_stride": stride,
            "t_end": t,
            "integrator": "RK4 (quantum, diabatic basis) + velocity Verlet (classical)",
            "target_index": target,
            "amp_floor": options.amp_floor,
            "degeneracy_tol": options.degeneracy_tol,
            "overlap_threshold": options.overlap_threshold,
            "norm_drift_abort": options.norm_drift_abort,
            "surface_policy": options.surface_policy,
            "surface_index": cl.surface_index if cl is not None else None,
            "max_norm_drift": max_drift,
            "max_imag_residue": max_resid,
            "max_abs_rate_sum": max_sum,
            **counters,
        }
    )
    return TrajectoryRecord(times, p_dia, p_adia, t_rec, T1, T2, pos, metadata)
