"""Adiabaticity measures.

The transition-rate field ``t_n`` is the rate of change of the diabatic
population ``p_n`` with the phase evolution of the adiabatic amplitudes
removed. Writing ``c~_k = a_k exp(i b_k)``, ``d_k(n) = <n|phi_k>`` and
``alpha_k = da_k/dt exp(i b_k)``,

    t_n = sum_{k,k'} [ (conj(alpha_k') c~_k + conj(c~_k') alpha_k) d_k(n) conj(d_k'(n))
                       + conj(c~_k') c~_k (dd_k(n) conj(d_k'(n)) + d_k(n) conj(dd_k'(n))) ]

Beating between occupied eigenstates only moves the phases ``b_k`` and so
drops out. T1 integrates half the total ``|t_n|``; T2 integrates the signed
``t_X`` of one target state.
"""
from __future__ import annotations

from typing import Optional

import numpy as np

from .errors import GaugeInconsistency, NumericalError, PremiseViolation

AMP_FLOOR = 1e-12
IMAG_RESIDUE_TOL = 1e-10


class ImaginaryResidue(NumericalError):
    pass


def moduli_rates(coeffs, moduli, cdot, amp_floor: float = AMP_FLOOR) -> np.ndarray:
    above = moduli >= amp_floor
    safe = np.where(above, moduli, 1.0)
    return np.where(above, (coeffs.conj() * cdot).real / safe, np.abs(cdot))


def amplitude_rates(decomp, cdot, amp_floor: float = AMP_FLOOR) -> np.ndarray:
    """Time derivative of the adiabatic moduli.

    ``Re[conj(c~_k) dc~_k/dt] / a_k`` where ``a_k >= amp_floor``; below the
    floor the modulus grows from zero at rate ``|dc~_k/dt|``.
    """
    return moduli_rates(decomp.coeffs, decomp.moduli, np.asarray(cdot), amp_floor)


def rate_field_complex(coeffs, phases, adot, vectors, vec_dot) -> np.ndarray:
    # The double sum factorizes over k and k' into products of the
    # diabatic-basis vectors below; the result is z + conj(z) term by term.
    alpha = adot * np.exp(1j * phases)
    u = vectors @ coeffs  # c_n
    w = vectors @ alpha
    z = vec_dot @ coeffs
    return w.conj() * u + u.conj() * w + z * u.conj() + u * z.conj()


def transition_rate_field(decomp, eig, derivs, adot) -> np.ndarray:
    """Phase-stripped population rates ``t_n`` (real).

    Raises ``GaugeInconsistency`` when the inputs carry different step
    stamps and ``ImaginaryResidue`` if the double sum is not real to 1e-10.
    """
    stamps = {s for s in (decomp.stamp, eig.stamp, derivs.stamp) if s is not None}
    if len(stamps) > 1:
        raise GaugeInconsistency(f"inputs from different steps: {sorted(stamps)}")
    tc = rate_field_complex(decomp.coeffs, decomp.phases, np.asarray(adot), eig.vectors, derivs.vec_dot)
    resid = float(np.max(np.abs(tc.imag)))
    if resid > IMAG_RESIDUE_TOL:
        raise ImaginaryResidue(f"imaginary residue {resid:.3e}")
    return tc.real


class MeasureAccumulator:
    """Running trapezoidal integrals of ``1/2 sum_n |t_n|`` (T1) and ``t_X`` (T2)."""

    def __init__(self, target_index: int):
        self.target_index = target_index
        self.T1 = 0.0
        self.T2 = 0.0
        self.last_t_field: Optional[np.ndarray] = None
        self._last_half_abs = 0.0

    def update(self, t_field, dt: float) -> "MeasureAccumulator":
        t_field = np.asarray(t_field, dtype=float)
        half_abs = 0.5 * float(np.sum(np.abs(t_field)))
        if self.last_t_field is not None:
            self.T1 += 0.5 * dt * (self._last_half_abs + half_abs)
            self.T2 += 0.5 * dt * (float(self.last_t_field[self.target_index]) + float(t_field[self.target_index]))
        self.last_t_field = t_field
        self._last_half_abs = half_abs
        return self


def accumulate(acc: MeasureAccumulator, t_field, dt: float) -> MeasureAccumulator:
    return acc.update(t_field, dt)


def integrate_measures(t_field_series, dt: float, target_index: int):
    """Recompute the T1 and T2 series from a per-step ``t_n`` history.

    Uses the same arithmetic as :class:`MeasureAccumulator`, so a run
    recorded at stride 1 reproduces its stored series bit for bit.
    """
    acc = MeasureAccumulator(target_index)
    T1, T2 = [], []
    for row in np.asarray(t_field_series, dtype=float):
        acc.update(row, dt)
        T1.append(acc.T1)
        T2.append(acc.T2)
    return np.array(T1), np.array(T2)


def beating_closed_form(eig, n: int, t, pair=(0, 1)):
    """Population ``p_n(t)`` for ``(|phi_k1> + |phi_k2>)/sqrt(2)`` under a static Hamiltonian.

    With ``ov_k = <phi_k|n>`` and ``w = conj(ov_k2) ov_k1``::

        p_n = 1/2 (|ov_k1|^2 + |ov_k2|^2
                   + 2 Re[w] cos((U_k2 - U_k1) t) + 2 Im[w] sin((U_k2 - U_k1) t))
    """
    k1, k2 = pair
    dim = eig.dim
    if k1 == k2 or not (0 <= k1 < dim and 0 <= k2 < dim):
        raise PremiseViolation(f"need two distinct eigenstates, got {pair}")
    if not 0 <= n < dim:
        raise PremiseViolation(f"basis index {n} outside [0, {dim})")
    ov1 = np.conj(eig.vectors[n, k1])
    ov2 = np.conj(eig.vectors[n, k2])
    w = np.conj(ov2) * ov1
    phase = (eig.energies[k2] - eig.energies[k1]) * np.asarray(t, dtype=float)
    return 0.5 * (abs(ov1) ** 2 + abs(ov2) ** 2 + 2.0 * w.real * np.cos(phase) + 2.0 * w.imag * np.sin(phase))
