"""Quick oracle checks run by ``adiabaticity selfcheck``.

Each check is small enough to finish in well under a second; the full
test suite covers the same ground at acceptance scale.
"""
from __future__ import annotations

import numpy as np

from . import dynamics, measure, spectral
from .dynamics import QuantumState, TimeGrid
from .models import AggregateModel, AggregateParams, ThreeLevelModel, ThreeLevelParams


class StaticModel:
    """Fixed Hamiltonian wrapped in the model interface."""

    default_target = 0
    vibration_frequency = None
    is_static = True

    def __init__(self, H):
        self.H = np.asarray(H, dtype=complex)
        self.dim = self.H.shape[0]
        self.default_target = self.dim - 1

    def hamiltonian(self, t, positions=None):
        return self.H

    def dhdt(self, t, positions=None, velocities=None):
        return np.zeros_like(self.H)

    def energy_scale(self, positions=None):
        u = np.linalg.eigvalsh(self.H)
        return max(u[-1] - u[0], np.abs(u).max())

    def describe(self):
        return {"model": "static", "dim": self.dim}


def random_hermitian(rng, n, scale=1.0):
    a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return scale * 0.5 * (a + a.conj().T)


def propagate_exact(H, c0, times):
    """``exp(-i H t) c0`` by eigendecomposition, one row per time."""
    u, v = np.linalg.eigh(H)
    w = v.conj().T @ c0
    return (v[None, :, :] * (np.exp(-1j * np.outer(times, u)) * w)[:, None, :]).sum(axis=2)


def check_nullity(rng) -> tuple[bool, str]:
    H = random_hermitian(rng, 4)
    c0 = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    model = StaticModel(H)
    dt = dynamics.default_dt(model)
    rec = dynamics.run_trajectory(model, QuantumState.normalized(c0), None, TimeGrid(dt, 200 * dt * 10))
    worst = max(np.abs(rec.T1_series).max(), np.abs(rec.T2_series).max())
    return worst <= 1e-6, f"static 4-level: max |T1|, |T2| = {worst:.1e}"


def check_beating(rng) -> tuple[bool, str]:
    H = random_hermitian(rng, 3)
    eig = spectral.eigensolve(H)
    c0 = (eig.vectors[:, 0] + eig.vectors[:, 1]) / np.sqrt(2)
    model = StaticModel(H)
    period = 2 * np.pi / (eig.energies[1] - eig.energies[0])
    rec = dynamics.run_trajectory(model, QuantumState(c0), None, TimeGrid(period / 400, 3 * period, 10))
    worst = max(np.abs(rec.diabatic_pops[:, n] - measure.beating_closed_form(eig, n, rec.times)).max() for n in range(3))
    return worst <= 1e-6, f"two-eigenstate beating vs closed form: {worst:.1e}"


def check_constant_three_level(rng) -> tuple[bool, str]:
    model = ThreeLevelModel(ThreeLevelParams(mode="constant"))
    rec = dynamics.run_trajectory(model, QuantumState(np.array([1, 0, 0], complex)), None, TimeGrid(0.0025, 5.0, 20))
    exact = np.abs(propagate_exact(model.hamiltonian(0), np.array([1, 0, 0], complex), rec.times)) ** 2
    worst = np.abs(rec.diabatic_pops - exact).max()
    return worst <= 1e-8, f"constant three-level vs exact propagator: {worst:.1e}"


def check_rates(rng) -> tuple[bool, str]:
    model = ThreeLevelModel(ThreeLevelParams())
    worst = 0.0
    for t in rng.uniform(1.0, 49.0, 5):
        eig = spectral.eigensolve(model.hamiltonian(t))
        pt = spectral.eigenvector_rates(model.dhdt(t), eig)
        fd = spectral.finite_difference_rates(model.hamiltonian, t, 1e-4, eig)
        worst = max(worst, np.abs(pt.vec_dot - fd.vec_dot).max() / np.abs(pt.vec_dot).max())
    return worst <= 1e-5, f"eigenvector rates vs finite differences: {worst:.1e} relative"


def check_forces(rng) -> tuple[bool, str]:
    p = AggregateParams(N=4, temperature=0)
    model = AggregateModel(p, rng.normal(0.0, 1e-3, 4))
    X = p.equilibrium_positions() + rng.normal(0.0, 0.3, 4)
    eig = spectral.eigensolve(model.hamiltonian(0, X))
    s = 0
    F = dynamics.hellmann_feynman_forces(model, eig, s, X)

    def potential(Y):
        return np.linalg.eigvalsh(model.hamiltonian(0, Y))[s] + model.classical_potential(Y)

    h = 1e-4
    fd = np.array([-(potential(X + h * e) - potential(X - h * e)) / (2 * h) for e in np.eye(4)])
    worst = np.abs(F - fd).max() / np.abs(fd).max()
    return worst <= 1e-6, f"Hellmann-Feynman forces vs finite differences: {worst:.1e} relative"


CHECKS = (check_nullity, check_beating, check_constant_three_level, check_rates, check_forces)


def run_all(seed: int = 20240101, verbose: bool = True) -> bool:
    rng = np.random.default_rng(seed)
    ok = True
    for check in CHECKS:
        passed, msg = check(rng)
        ok &= passed
        if verbose:
            print(f"{'PASS' if passed else 'FAIL'}  {msg}")
    return ok
