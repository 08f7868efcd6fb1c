"""Instantaneous eigenproblem with a tracked eigenvector gauge.

Eigenvectors are stored column-wise, ``vectors[n, k] = <n|phi_k>``, with
energies sorted ascending (adiabatic labelling). Along a trajectory the
phases are propagated by :func:`align_gauge` so that successive overlaps
``<phi_k(t)|phi_k(t + dt)>`` are real and positive (parallel transport).
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import (
    ConvergenceFailure,
    DegenerateGaugeAmbiguity,
    DimensionMismatch,
    NearDegeneracy,
    NonHermitianInput,
)

HERMITIAN_TOL = 1e-12
DEGENERACY_TOL = 1e-9
OVERLAP_THRESHOLD = 0.5
# phase corrections closer to 1 than this are skipped (keeps alignment idempotent)
_PHASE_EPS = 1e-14


@dataclass(frozen=True)
class HermitianOperator:
    """Dense Hermitian matrix in the diabatic basis.

    Entries within ``tol`` (relative to the largest entry) of Hermitian are
    symmetrized on construction; anything further off raises.
    """

    entries: np.ndarray
    tol: float = field(default=HERMITIAN_TOL, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "entries", hermitize(self.entries, self.tol))

    @property
    def dim(self) -> int:
        return self.entries.shape[0]


def hermitize(matrix, tol: float = HERMITIAN_TOL) -> np.ndarray:
    """Validate and symmetrize a square matrix, returning ``(H + H^dagger)/2``."""
    if isinstance(matrix, HermitianOperator):
        return matrix.entries
    h = np.asarray(matrix)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {h.shape}")
    if h.shape[0] < 2:
        raise DimensionMismatch("Hilbert space dimension must be at least 2")
    asym = np.max(np.abs(h - h.conj().T))
    if asym == 0.0:
        return h
    scale = max(np.max(np.abs(h)), 1.0)
    if asym > tol * scale:
        raise NonHermitianInput(f"max |H - H^dagger| = {asym:.3e} exceeds {tol:.1e} x {scale:.3e}")
    return 0.5 * (h + h.conj().T)


@dataclass(frozen=True)
class EigenSystem:
    energies: np.ndarray
    vectors: np.ndarray
    min_gap: float
    degenerate_flag: bool
    stamp: Optional[float] = None
    swap_flag: bool = False

    @property
    def dim(self) -> int:
        return self.energies.shape[0]


@dataclass(frozen=True)
class EigenDerivatives:
    """Time derivatives of the eigenvector columns and the couplings
    ``kappa[k, m] = <phi_k| d/dt |phi_m>``."""

    vec_dot: np.ndarray
    kappa: np.ndarray
    stamp: Optional[float] = None


def _fix_phase_largest_component(vectors: np.ndarray) -> np.ndarray:
    idx = np.argmax(np.abs(vectors), axis=0)
    cols = np.arange(vectors.shape[1])
    pivot = vectors[idx, cols]
    mag = np.abs(pivot)
    vectors = vectors * (mag / pivot)
    vectors[idx, cols] = mag
    return vectors


def eigensolve(
    H,
    degeneracy_tol: float = DEGENERACY_TOL,
    stamp: Optional[float] = None,
    hermitian_tol: float = HERMITIAN_TOL,
    validate: bool = True,
) -> EigenSystem:
    """Diagonalize ``H``; each eigenvector's largest component is made real positive.

    ``validate=False`` skips the Hermiticity check for matrices that are
    Hermitian by construction.
    """
    h = hermitize(H, hermitian_tol) if validate else H
    try:
        energies, vectors = np.linalg.eigh(h)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceFailure(str(exc)) from exc
    vectors = _fix_phase_largest_component(vectors.astype(complex, copy=False))
    min_gap = float((energies[1:] - energies[:-1]).min())
    return EigenSystem(
        energies=energies,
        vectors=vectors,
        min_gap=min_gap,
        degenerate_flag=min_gap < degeneracy_tol,
        stamp=stamp,
    )


def align_gauge(
    prev: EigenSystem, cur: EigenSystem, overlap_threshold: float = OVERLAP_THRESHOLD
) -> EigenSystem:
    """Rotate each column of ``cur`` so that its overlap with ``prev`` is real and >= 0.

    A diagonal overlap below ``overlap_threshold`` in modulus marks a possible
    label swap through ``swap_flag``.
    """
    if prev.vectors.shape != cur.vectors.shape:
        raise DimensionMismatch(f"{prev.vectors.shape} vs {cur.vectors.shape}")
    if cur.degenerate_flag:
        warnings.warn(
            f"degenerate spectrum (min gap {cur.min_gap:.2e}) at t={cur.stamp}",
            DegenerateGaugeAmbiguity,
            stacklevel=2,
        )
    overlap = (prev.vectors.conj() * cur.vectors).sum(axis=0)
    mag = np.abs(overlap)
    swap = bool(mag.min() < overlap_threshold)
    phase = np.where(mag > 0.0, overlap / np.where(mag > 0.0, mag, 1.0), 1.0)
    needs = np.abs(phase - 1.0) > _PHASE_EPS
    if needs.all():
        vectors = cur.vectors * phase.conj()
    elif needs.any():
        vectors = cur.vectors * np.where(needs, phase.conj(), 1.0)
    else:
        vectors = cur.vectors
    return EigenSystem(
        energies=cur.energies,
        vectors=vectors,
        min_gap=cur.min_gap,
        degenerate_flag=cur.degenerate_flag,
        stamp=cur.stamp,
        swap_flag=swap or cur.swap_flag,
    )


def eigenvector_rates(H_dot, eig: EigenSystem, degeneracy_tol: float = DEGENERACY_TOL) -> EigenDerivatives:
    """First-order perturbation theory for the eigenvector time derivatives.

    ``kappa[m, k] = <phi_m|dH/dt|phi_k> / (U_k - U_m)`` off the diagonal and
    zero on it (parallel transport); ``vec_dot = vectors @ kappa``.
    """
    hdot = H_dot.entries if isinstance(H_dot, HermitianOperator) else np.asarray(H_dot)
    if hdot.shape != (eig.dim, eig.dim):
        raise DimensionMismatch(f"dH/dt shape {hdot.shape} vs dim {eig.dim}")
    if eig.min_gap < degeneracy_tol:
        raise NearDegeneracy(f"min gap {eig.min_gap:.3e} below {degeneracy_tol:.1e}")
    V = eig.vectors
    hk = V.conj().T @ hdot @ V
    hk = 0.5 * (hk + hk.conj().T)
    U = eig.energies
    denom = U - U[:, None]
    denom.flat[:: eig.dim + 1] = np.inf  # zero diagonal
    kappa = hk / denom
    return EigenDerivatives(vec_dot=V @ kappa, kappa=kappa, stamp=eig.stamp)


def finite_difference_rates(
    hamiltonian_at: Callable[[float], np.ndarray],
    t: float,
    delta: float,
    eig: EigenSystem,
    degeneracy_tol: float = DEGENERACY_TOL,
) -> EigenDerivatives:
    """Central difference of gauge-aligned eigenvectors around ``t``.

    Used where the perturbation formula is singular. The diagonal of kappa
    is projected out so the result stays in the parallel-transport gauge.
    """
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DegenerateGaugeAmbiguity)
        plus = align_gauge(eig, eigensolve(hamiltonian_at(t + delta), degeneracy_tol))
        minus = align_gauge(eig, eigensolve(hamiltonian_at(t - delta), degeneracy_tol))
    vec_dot = (plus.vectors - minus.vectors) / (2.0 * delta)
    kappa = eig.vectors.conj().T @ vec_dot
    np.fill_diagonal(kappa, 0.0)
    return EigenDerivatives(vec_dot=eig.vectors @ kappa, kappa=kappa, stamp=eig.stamp)
