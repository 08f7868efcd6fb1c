import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from adiabaticity.errors import DegenerateGaugeAmbiguity, DimensionMismatch, NearDegeneracy, NonHermitianInput
from adiabaticity.models import ThreeLevelModel, ThreeLevelParams
from adiabaticity.spectral import (
    HermitianOperator,
    align_gauge,
    eigensolve,
    eigenvector_rates,
    finite_difference_rates,
    hermitize,
)
from conftest import random_hermitian


def test_symmetric_two_level():
    eig = eigensolve(np.array([[0.0, 2.0], [2.0, 0.0]]))
    assert np.allclose(eig.energies, [-2.0, 2.0])
    s = 1 / np.sqrt(2)
    assert np.allclose(np.abs(eig.vectors), s)
    # largest component real positive, so columns are (1,-1)/sqrt2 and (1,1)/sqrt2 up to order
    assert np.isclose(eig.vectors[0, 1] * eig.vectors[1, 1], 0.5)
    assert np.isclose(eig.vectors[0, 0] * eig.vectors[1, 0], -0.5)


def test_diagonal_gives_permuted_identity():
    eig = eigensolve(np.diag([3.0, -1.0, 0.5]))
    assert np.allclose(eig.energies, [-1.0, 0.5, 3.0])
    assert np.allclose(eig.vectors, np.eye(3)[:, [1, 2, 0]])


def test_reconstruction_seed_1():
    H = random_hermitian(np.random.default_rng(1), 6)
    eig = eigensolve(H)
    rebuilt = (eig.vectors * eig.energies) @ eig.vectors.conj().T
    assert np.linalg.norm(rebuilt - H) <= 1e-10 * np.linalg.norm(H)


@settings(max_examples=40, deadline=None)
@given(n=st.integers(2, 7), seed=st.integers(0, 2**32 - 1))
def test_eigensystem_invariants(n, seed):
    H = random_hermitian(np.random.default_rng(seed), n)
    eig = eigensolve(H)
    V = eig.vectors
    assert np.abs(V.conj().T @ V - np.eye(n)).max() <= 1e-10
    assert np.all(np.diff(eig.energies) >= 0)
    assert np.isclose(eig.min_gap, np.diff(eig.energies).min())
    assert np.abs(H @ V - V * eig.energies).max() <= 1e-10 * max(1.0, np.abs(H).max())
    pivots = V[np.argmax(np.abs(V), axis=0), np.arange(n)]
    assert np.allclose(pivots.imag, 0.0) and np.all(pivots.real > 0)


def test_degenerate_flag():
    eig = eigensolve(np.diag([1.0, 1.0, 2.0]))
    assert eig.degenerate_flag and eig.min_gap == 0.0
    assert not eigensolve(np.diag([1.0, 1.1])).degenerate_flag


def test_input_validation():
    with pytest.raises(NonHermitianInput):
        eigensolve(np.array([[0.0, 1.0], [0.0, 0.0]]))
    with pytest.raises(DimensionMismatch):
        eigensolve(np.ones((2, 3)))
    with pytest.raises(DimensionMismatch):
        eigensolve(np.ones((1, 1)))
    # asymmetry below tolerance is symmetrized away
    h = hermitize(np.array([[0.0, 1.0 + 1e-14], [1.0, 0.0]]))
    assert np.array_equal(h, h.conj().T)
    assert np.array_equal(HermitianOperator(h).entries, h)


def test_align_pure_phase_removed(rng):
    prev = eigensolve(random_hermitian(rng, 4))
    theta = rng.uniform(0, 2 * np.pi, 4)
    cur = type(prev)(prev.energies, prev.vectors * np.exp(1j * theta), prev.min_gap, prev.degenerate_flag)
    out = align_gauge(prev, cur)
    assert np.abs(out.vectors - prev.vectors).max() <= 1e-15
    assert not out.swap_flag


def test_align_identity(rng):
    prev = eigensolve(random_hermitian(rng, 3))
    out = align_gauge(prev, prev)
    assert np.array_equal(out.vectors, prev.vectors)


def test_align_dense_sweep_two_level():
    # 2x2 avoided crossing with a complex coupling phase that winds slowly
    def H(t):
        j = 0.3 * np.exp(1j * 0.7 * t)
        return np.array([[-t, j], [np.conj(j), t]])

    prev = eigensolve(H(-3.0))
    for t in np.linspace(-3.0, 3.0, 2001)[1:]:
        cur = align_gauge(prev, eigensolve(H(t)))
        ov = np.sum(prev.vectors.conj() * cur.vectors, axis=0)
        assert np.all(np.abs(ov.imag) <= 1e-12) and np.all(ov.real > 0)
        prev = cur


def test_align_flags_swap_and_degeneracy():
    prev = eigensolve(np.diag([0.0, 1.0]))
    cur = type(prev)(prev.energies, prev.vectors[:, ::-1].copy(), 1.0, False)
    assert align_gauge(prev, cur).swap_flag
    deg = eigensolve(np.diag([1.0, 1.0]))
    with pytest.warns(DegenerateGaugeAmbiguity):
        align_gauge(deg, deg)


def test_rates_static_is_zero(rng):
    eig = eigensolve(random_hermitian(rng, 4))
    d = eigenvector_rates(np.zeros((4, 4)), eig)
    assert not d.kappa.any() and not d.vec_dot.any()


def test_rates_two_level_vs_finite_difference():
    delta = 1.0

    def H(t):
        J = 0.4 + 0.3 * np.sin(t)
        return np.array([[-delta / 2, J], [J, delta / 2]])

    t = 0.8
    Hdot = np.array([[0, 0.3 * np.cos(t)], [0.3 * np.cos(t), 0]])
    eig = eigensolve(H(t))
    pt = eigenvector_rates(Hdot, eig)
    fd = finite_difference_rates(H, t, 1e-6, eig)
    assert abs(pt.kappa[0, 1] - fd.kappa[0, 1]) <= 1e-5 * abs(pt.kappa[0, 1])


def test_rates_antisymmetric_on_ramp():
    model = ThreeLevelModel(ThreeLevelParams())
    t = model.params.t_max / 2
    d = eigenvector_rates(model.dhdt(t), eigensolve(model.hamiltonian(t)))
    assert np.abs(d.kappa + d.kappa.conj().T).max() <= 1e-10
    assert np.all(np.diag(d.kappa) == 0)


def test_rates_reject_degenerate():
    with pytest.raises(NearDegeneracy):
        eigenvector_rates(np.zeros((2, 2)), eigensolve(np.eye(2)))
    with pytest.raises(DimensionMismatch):
        eigenvector_rates(np.zeros((3, 3)), eigensolve(np.diag([0.0, 1.0])))


def test_vec_dot_columns_orthogonal_to_own_vector(rng):
    H = random_hermitian(rng, 5)
    eig = eigensolve(H)
    d = eigenvector_rates(random_hermitian(rng, 5), eig)
    diag = np.sum(eig.vectors.conj() * d.vec_dot, axis=0)
    assert np.abs(diag).max() <= 1e-12
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        align_gauge(eig, eig)
