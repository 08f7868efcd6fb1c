"""Model Hamiltonians: the ramped three-level system and the 1D aggregate chain.

The three-level model is dimensionless. The aggregate model takes its
parameters in laboratory units (cm^-1, angstrom, kelvin, atomic-unit
mass and dipole) and works internally in Hartree atomic units.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import units
from .dynamics import ClassicalState
from .errors import MonomerCollision, ThermalSamplingFailure, ValidationError

# Stream order for SeedSequence.spawn; changing it changes every sampled ensemble.
DISORDER_STREAM, VELOCITY_STREAM, OFFSET_STREAM = 0, 1, 2
PRNG_NAME = "numpy.random.PCG64 via SeedSequence(seed).spawn(3)"


def seed_streams(seed: int) -> list[np.random.Generator]:
    """Independent generators for disorder, velocities and position offsets."""
    children = np.random.SeedSequence(seed).spawn(3)
    return [np.random.Generator(np.random.PCG64(s)) for s in children]


# --------------------------------------------------------------------------
# three-level system


@dataclass(frozen=True)
class ThreeLevelParams:
    energies: tuple = (0.0, 3.0, 0.0)
    mode: str = "ramped"
    J0: float = 2.0
    J10: float = 8.0
    J20: float = 8.0
    t_max: float = 50.0

    def __post_init__(self):
        problems = []
        if len(self.energies) != 3:
            problems.append("three_level.energies must have 3 entries")
        if self.mode not in ("constant", "ramped"):
            problems.append(f"three_level.mode must be constant or ramped, got {self.mode!r}")
        if self.mode == "ramped" and not self.t_max > 0:
            problems.append("three_level.t_max must be > 0 in ramped mode")
        if self.J10 < 0 or self.J20 < 0:
            problems.append("three_level.J10 and J20 must be >= 0")
        if problems:
            raise ValidationError(problems)
        object.__setattr__(self, "energies", tuple(float(e) for e in self.energies))


def couplings(p: ThreeLevelParams, t: float) -> tuple[float, float]:
    """Return ``(J1(t), J2(t))``; ramped values are clamped to ``[0, t_max]``."""
    if p.mode == "constant":
        return p.J0, p.J0
    tau = min(max(t, 0.0), p.t_max)
    arg = math.pi * tau / (2.0 * p.t_max)
    return p.J10 * math.sin(arg) ** 2, p.J20 * math.cos(arg) ** 2


def coupling_rates(p: ThreeLevelParams, t: float) -> tuple[float, float]:
    if p.mode == "constant" or t < 0.0 or t > p.t_max:
        return 0.0, 0.0
    s = (math.pi / (2.0 * p.t_max)) * math.sin(math.pi * t / p.t_max)
    return p.J10 * s, -p.J20 * s


def _three_level_matrix(diag, j1, j2) -> np.ndarray:
    H = np.diag(np.asarray(diag, dtype=float))
    H[0, 1] = H[1, 0] = j1
    H[1, 2] = H[2, 1] = j2
    return H


def three_level_hamiltonian(p: ThreeLevelParams, t: float) -> np.ndarray:
    j1, j2 = couplings(p, t)
    return _three_level_matrix(p.energies, j1, j2)


def three_level_dHdt(p: ThreeLevelParams, t: float) -> np.ndarray:
    j1, j2 = coupling_rates(p, t)
    return _three_level_matrix((0.0, 0.0, 0.0), j1, j2)


class ThreeLevelModel:
    dim = 3
    default_target = 2  # |C>
    vibration_frequency = None

    def __init__(self, params: ThreeLevelParams):
        self.params = params
        self.is_static = params.mode == "constant"

    def hamiltonian(self, t, positions=None):
        return three_level_hamiltonian(self.params, t)

    def dhdt(self, t, positions=None, velocities=None):
        return three_level_dHdt(self.params, t)

    def energy_scale(self, positions=None) -> float:
        """Largest of eigenvalue spread and modulus over the ramp."""
        ts = [0.0] if self.is_static else np.linspace(0.0, self.params.t_max, 17)
        scale = 0.0
        for t in ts:
            u = np.linalg.eigvalsh(self.hamiltonian(t))
            scale = max(scale, u[-1] - u[0], np.abs(u).max())
        return scale

    def describe(self) -> dict:
        p = self.params
        return {
            "model": "three_level",
            "energies": list(p.energies),
            "mode": p.mode,
            "J0": p.J0,
            "J10": p.J10,
            "J20": p.J20,
            "t_max": p.t_max,
        }


# --------------------------------------------------------------------------
# molecular aggregate


@dataclass(frozen=True)
class AggregateParams:
    """Aggregate parameters in laboratory units.

    ``D_e`` and ``X0`` are not fixed by any measurement here; the defaults are
    calibration choices (see README).
    """

    N: int = 5
    mu: float = 1.12  # a.u.
    mass: float = 902330.0  # electron masses
    D_e: float = 3000.0  # cm^-1
    alpha: float = 0.5  # 1/angstrom
    X0: float = 5.0  # angstrom
    sigma_E: float = 0.0  # cm^-1
    E0: float = 0.0  # cm^-1
    dd_exponent: int = 3
    temperature: float = 300.0  # K
    mobile: bool = True
    r_min: float = 0.1  # angstrom
    max_retries: int = 100

    # internal-unit mirrors, filled in __post_init__
    De_au: float = field(init=False, repr=False)
    alpha_au: float = field(init=False, repr=False)
    X0_au: float = field(init=False, repr=False)
    sigma_au: float = field(init=False, repr=False)
    E0_au: float = field(init=False, repr=False)
    kT_au: float = field(init=False, repr=False)
    r_min_au: float = field(init=False, repr=False)

    def __post_init__(self):
        problems = []
        if int(self.N) != self.N or self.N < 2:
            problems.append("aggregate.N must be an integer >= 2")
        for name in ("mu", "mass", "D_e", "alpha", "X0", "r_min"):
            if not getattr(self, name) > 0:
                problems.append(f"aggregate.{name} must be > 0")
        if self.sigma_E < 0:
            problems.append("aggregate.sigma_E must be >= 0")
        if self.temperature < 0:
            problems.append("aggregate.temperature must be >= 0")
        if self.dd_exponent not in (2, 3):
            problems.append("aggregate.dd_exponent must be 2 or 3")
        if problems:
            raise ValidationError(problems)
        set_ = object.__setattr__
        set_(self, "De_au", units.wavenumber_to_hartree(self.D_e))
        set_(self, "alpha_au", units.inv_angstrom_to_inv_bohr(self.alpha))
        set_(self, "X0_au", units.angstrom_to_bohr(self.X0))
        set_(self, "sigma_au", units.wavenumber_to_hartree(self.sigma_E))
        set_(self, "E0_au", units.wavenumber_to_hartree(self.E0))
        set_(self, "kT_au", units.kelvin_to_hartree(self.temperature))
        set_(self, "r_min_au", units.angstrom_to_bohr(self.r_min))

    @property
    def omega(self) -> float:
        """Harmonic frequency of the Morse well, ``alpha sqrt(2 D_e / M)`` (a.u.)."""
        return self.alpha_au * np.sqrt(2.0 * self.De_au / self.mass)

    def equilibrium_positions(self) -> np.ndarray:
        return np.arange(self.N, dtype=float) * self.X0_au


def morse(p: AggregateParams, r):
    """Morse pair energy (Hartree) at separation ``r`` (bohr)."""
    e = np.exp(-p.alpha_au * (np.asarray(r) - p.X0_au))
    return p.De_au * (e * e - 2.0 * e)


def morse_force(p: AggregateParams, r):
    """``-dV/dr`` of the Morse pair energy."""
    e = np.exp(-p.alpha_au * (np.asarray(r) - p.X0_au))
    return 2.0 * p.alpha_au * p.De_au * (e * e - e)


def _pair_geometry(p: AggregateParams, X: np.ndarray):
    """Signed separations ``R[n, m] = X_m - X_n`` and distances with a unit diagonal."""
    gaps = X[1:] - X[:-1]
    if gaps.min() < p.r_min_au:
        k = int(np.argmin(gaps))
        raise MonomerCollision(
            f"monomers {k + 1} and {k + 2} at separation {gaps[k]:.4g} bohr (min {p.r_min_au:.4g})"
        )
    R = X - X[:, None]
    dist = np.abs(R)
    dist.flat[:: X.shape[0] + 1] = 1.0
    return R, dist


def aggregate_hamiltonian(p: AggregateParams, X, site_energies) -> np.ndarray:
    """Single-exciton Hamiltonian with ``H_nm = mu^2 / |X_n - X_m|^eta`` off the diagonal."""
    X = np.asarray(X, dtype=float)
    _, dist = _pair_geometry(p, X)
    H = (p.mu * p.mu) / dist**p.dd_exponent
    H.flat[:: X.shape[0] + 1] = site_energies
    return H


def dipole_gradient(p: AggregateParams, X) -> np.ndarray:
    """``G[n, m] = dH_nm / dX_n``; the derivative w.r.t. ``X_m`` is ``-G[n, m]``."""
    X = np.asarray(X, dtype=float)
    R, dist = _pair_geometry(p, X)
    eta = p.dd_exponent
    # d/dX_n |X_m - X_n| = -sign(X_m - X_n); sign(0) = 0 clears the diagonal
    return (eta * p.mu * p.mu) * np.sign(R) / dist ** (eta + 1)


class AggregateModel:
    """Aggregate chain with fixed (already sampled) site energies.

    Monomers bind to their nearest neighbours through the Morse potential;
    dipole-dipole exchange acts between all pairs.
    """

    def __init__(self, params: AggregateParams, site_energies: Optional[Sequence[float]] = None):
        self.params = params
        if site_energies is None:
            site_energies = np.full(params.N, params.E0_au)
        self.site_energies = np.asarray(site_energies, dtype=float)
        if self.site_energies.shape != (params.N,):
            raise ValidationError(f"expected {params.N} site energies, got {self.site_energies.shape}")
        self.dim = params.N
        self.default_target = params.N - 1
        self.is_static = not params.mobile

    @property
    def vibration_frequency(self):
        return self.params.omega if self.params.mobile else None

    def hamiltonian(self, t, positions):
        return aggregate_hamiltonian(self.params, positions, self.site_energies)

    def dhdt(self, t, positions, velocities):
        G = dipole_gradient(self.params, positions)
        v = np.asarray(velocities, dtype=float)
        return G * (v[:, None] - v[None, :])

    def bond_lengths(self, positions):
        X = np.asarray(positions, dtype=float)
        return X[1:] - X[:-1]

    def classical_potential(self, positions) -> float:
        return float(np.sum(morse(self.params, self.bond_lengths(positions))))

    def dipole_gradient(self, positions) -> np.ndarray:
        return dipole_gradient(self.params, positions)

    def morse_forces(self, positions) -> np.ndarray:
        f_bond = morse_force(self.params, self.bond_lengths(positions))
        F = np.zeros(self.dim)
        F[1:] += f_bond
        F[:-1] -= f_bond
        return F

    def energy_scale(self, positions) -> float:
        u = np.linalg.eigvalsh(self.hamiltonian(0.0, positions))
        return max(u[-1] - u[0], np.abs(u).max())

    def describe(self) -> dict:
        p = self.params
        return {
            "model": "aggregate",
            "N": p.N,
            "mu_au": p.mu,
            "mass_au": p.mass,
            "D_e_cm-1": p.D_e,
            "alpha_1/angstrom": p.alpha,
            "X0_angstrom": p.X0,
            "sigma_E_cm-1": p.sigma_E,
            "E0_cm-1": p.E0,
            "dd_exponent": p.dd_exponent,
            "temperature_K": p.temperature,
            "mobile": p.mobile,
            "site_energies_hartree": [float(e) for e in self.site_energies],
            "calibrated_constants": ["D_e", "X0"],
        }


def sample_disorder(p: AggregateParams, seed: int) -> np.ndarray:
    """Gaussian site energies ``E_n ~ Normal(E0, sigma_E^2)`` in Hartree."""
    if p.sigma_E == 0:
        return np.full(p.N, p.E0_au)
    rng = seed_streams(seed)[DISORDER_STREAM]
    return p.E0_au + p.sigma_au * rng.standard_normal(p.N)


def sample_thermal(p: AggregateParams, seed: int) -> ClassicalState:
    """Thermal positions and velocities about the equilibrium chain.

    Offsets use the harmonic approximation of the Morse well; draws that
    break the monomer ordering are redrawn.
    """
    X_eq = p.equilibrium_positions()
    if not p.mobile:
        return ClassicalState(X_eq, np.zeros(p.N), np.inf)
    if p.temperature == 0:
        return ClassicalState(X_eq, np.zeros(p.N), p.mass)
    streams = seed_streams(seed)
    v = np.sqrt(p.kT_au / p.mass) * streams[VELOCITY_STREAM].standard_normal(p.N)
    sigma_x = np.sqrt(p.kT_au / (p.mass * p.omega**2))
    rng = streams[OFFSET_STREAM]
    for _ in range(p.max_retries):
        X = X_eq + sigma_x * rng.standard_normal(p.N)
        if np.all(np.diff(X) > p.r_min_au):
            return ClassicalState(X, v, p.mass)
    raise ThermalSamplingFailure(f"no ordered configuration after {p.max_retries} draws")
