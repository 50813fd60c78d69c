import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sepdmrg.spin_models import (Hamiltonian, TwoSiteTerm, assemble_bond_matrix, build_blbq,
                                 build_dimerised_heisenberg, build_model, spin_matrices)


def test_spin_half_and_one_sz():
    assert np.allclose(spin_matrices(0.5)[2], np.diag([0.5, -0.5]))
    assert np.allclose(spin_matrices(1)[2], np.diag([1, 0, -1]))


@pytest.mark.parametrize("s", [0.5, 1])
def test_spin_algebra(s):
    sx, sy, sz = spin_matrices(s)
    assert np.max(np.abs(sx @ sy - sy @ sx - 1j * sz)) < 1e-14
    casimir = sx @ sx + sy @ sy + sz @ sz
    assert np.allclose(casimir, s * (s + 1) * np.eye(len(sz)))


def test_spin_rejects_other_values():
    with pytest.raises(ValueError):
        spin_matrices(1.5)


@pytest.mark.parametrize("delta,coefs", [(0, [1, 1, 1]), (1, [2, 0, 2]), (-1, [0, 2, 0])])
def test_dimerised_coefficients(delta, coefs):
    h = build_dimerised_heisenberg(4, delta)
    assert len(h.terms) == 3
    assert [(t.site_a, t.site_b) for t in h.terms] == [(1, 2), (2, 3), (3, 4)]
    assert np.allclose(h.bond_coefficients(), coefs)


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 16), st.floats(-1, 1))
def test_dimerised_sign_flip(n, delta):
    a = np.array(build_dimerised_heisenberg(n, delta).bond_coefficients())
    b = np.array(build_dimerised_heisenberg(n, -delta).bond_coefficients())
    assert np.allclose(a + b, 2)
    if n % 2:
        # an even number of bonds: flipping delta mirrors the chain
        assert np.allclose(a, b[::-1])
    else:
        assert np.allclose(a, a[::-1])


def test_dimerised_needs_two_sites():
    with pytest.raises(ValueError):
        build_dimerised_heisenberg(1, 0.0)


@pytest.mark.parametrize("alpha", [-2.0, -0.7, 0.0, 1 / 3, 1.0, 2.0])
def test_blbq_bond_spectrum(alpha):
    w = np.linalg.eigvalsh(assemble_bond_matrix(build_blbq(2, alpha).terms[0]))
    expected = sorted([-2 + 4 * alpha] + [-1 + alpha] * 3 + [1 + alpha] * 5)
    assert np.allclose(w, expected, atol=1e-12)


def test_blbq_alpha_zero_is_heisenberg():
    sx, sy, sz = spin_matrices(1)
    heis = sum(np.kron(s, s) for s in (sx, sy, sz))
    assert np.allclose(assemble_bond_matrix(build_blbq(2, 0.0).terms[0]), heis)


def test_blbq_terms_and_summands():
    h = build_blbq(3, 0.4)
    assert [(t.site_a, t.site_b) for t in h.terms] == [(1, 2), (2, 3)]
    assert all(len(t.summands) <= 9 for t in h.terms)


def test_aklt_projector():
    m = assemble_bond_matrix(build_blbq(2, 1 / 3).terms[0])
    p = (m + 2 / 3 * np.eye(9)) / 2
    assert np.max(np.abs(p @ p - p)) < 1e-10


def test_bond_matrices():
    h = build_dimerised_heisenberg(4, 1.0)
    assert np.isclose(np.linalg.eigvalsh(assemble_bond_matrix(build_dimerised_heisenberg(2, 0).terms[0]))[0], -0.75)
    assert np.allclose(assemble_bond_matrix(h.terms[1]), 0)
    assert np.isclose(np.linalg.eigvalsh(assemble_bond_matrix(build_blbq(2, 1 / 3).terms[0]))[0], -2 / 3)


@pytest.mark.parametrize("model,value", [("dim_heisenberg", 0.3), ("blbq", -1.2)])
def test_bond_matrices_hermitian(model, value):
    for t in build_model(model, 5, value).terms:
        m = assemble_bond_matrix(t)
        assert np.max(np.abs(m - m.conj().T)) < 1e-12


def test_validation():
    sz = spin_matrices(0.5)[2]
    with pytest.raises(ValueError):
        TwoSiteTerm(2, 2, ((1.0, sz, sz),))
    with pytest.raises(ValueError):
        Hamiltonian(2, 2, (TwoSiteTerm(1, 3, ((1.0, sz, sz),)),))
    with pytest.raises(ValueError):
        build_model("ising", 4, 0.0)
