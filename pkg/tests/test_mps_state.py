from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sepdmrg.mps_state import (MatrixProductState, canonicalize, expectation, extract_factors,
                               from_dense_product, gauge_errors, load_mps, norm, normalized, overlap,
                               product_seeded_mps, product_state, random_mps, save_mps, to_dense)
from sepdmrg.partition import BondProfile, PartitionSpec, bond_profile, permute_hamiltonian, site_ordering
from sepdmrg.spin_models import build_dimerised_heisenberg, build_model
from sepdmrg.ed_oracle import dense_matrix
from sepdmrg.tensor_core import DimensionError

FIXTURES = Path(__file__).parent / "fixtures"
UP, DOWN = np.array([1.0, 0.0]), np.array([0.0, 1.0])


def uniform(n, D):
    return BondProfile((1,) + (D,) * (n - 1) + (1,))


def singlet_mps():
    a = np.zeros((1, 2, 2))
    a[0, 0, 0] = a[0, 1, 1] = 1
    b = np.zeros((2, 2, 1))
    b[0, 1, 0], b[1, 0, 0] = 1 / np.sqrt(2), -1 / np.sqrt(2)
    return MatrixProductState((a, b), 2)


def eq3_state():
    """|Phi+>_{1,4} (x) |0>_2 (x) |+>_3 laid out in MPS order (1, 4, 2, 3)."""
    a = np.zeros((1, 2, 2))
    a[0, 0, 0] = a[0, 1, 1] = 1 / np.sqrt(2)
    b = np.zeros((2, 2, 1))
    b[0, 0, 0] = b[1, 1, 0] = 1
    zero = UP.reshape(1, 2, 1)
    plus = (np.ones(2) / np.sqrt(2)).reshape(1, 2, 1)
    return MatrixProductState((a, b, zero, plus), 2)


def test_random_mps_deterministic():
    a = random_mps(5, 2, uniform(5, 4), seed=3)
    b = random_mps(5, 2, uniform(5, 4), seed=3)
    assert all(np.array_equal(x, y) for x, y in zip(a.tensors, b.tensors))


def test_unit_profile_gives_product():
    m = random_mps(4, 3, BondProfile((1, 1, 1, 1, 1)), seed=0)
    assert all(t.shape == (1, 3, 1) for t in m.tensors)


def test_random_norm_positive():
    assert all(norm(random_mps(4, 2, uniform(4, 3), s)) > 0 for s in range(100))


def test_random_mps_clips_bonds():
    m = random_mps(6, 2, uniform(6, 32), seed=1)
    assert m.profile.dims == (1, 2, 4, 8, 4, 2, 1)


def test_product_seeded_mps_is_near_product():
    m = normalized(product_seeded_mps(6, 2, uniform(6, 4), seed=1))
    prods = [np.abs(t[0, :, 0]) for t in m.tensors]
    assert all(np.allclose(p / np.linalg.norm(p), prods[0] / np.linalg.norm(prods[0]), atol=1e-5)
               for p in prods)


def test_shape_validation():
    with pytest.raises(DimensionError):
        MatrixProductState((np.zeros((2, 2, 1)),), 2)
    with pytest.raises(DimensionError):
        MatrixProductState((np.zeros((1, 2, 2)), np.zeros((3, 2, 1))), 2)


def test_canonicalize_idempotent():
    m = canonicalize(random_mps(5, 2, uniform(5, 3), seed=2), 2)
    m2 = canonicalize(m, 2)
    assert abs(abs(overlap(m, m2)) / norm(m) ** 2 - 1) < 1e-12
    assert max(gauge_errors(m2, 2)) < 1e-12


def test_canonicalize_n6():
    m = canonicalize(random_mps(6, 2, uniform(6, 4), seed=9), 2)
    assert max(gauge_errors(m, 2)) < 1e-10
    assert m.gauge_center == 2


def test_canonicalize_keeps_product_profile():
    m = canonicalize(random_mps(5, 2, BondProfile((1,) * 6), seed=4), 3)
    assert m.profile.dims == (1,) * 6


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 8), st.integers(1, 8), st.integers(0, 10**6), st.data())
def test_canonical_gauge_property(n, D, seed, data):
    center = data.draw(st.integers(0, n - 1))
    m = random_mps(n, 2, uniform(n, D), seed)
    c = canonicalize(m, center)
    assert max(gauge_errors(c, center), default=0) < 1e-10
    assert abs(overlap(c, m) - norm(m) ** 2) < 1e-9 * norm(m) ** 2


def test_overlaps():
    assert overlap(from_dense_product([UP, UP]), from_dense_product([DOWN, UP])) == 0
    m = normalized(random_mps(4, 2, uniform(4, 2), seed=5))
    assert abs(overlap(m, m) - 1) < 1e-12
    doubled = m.with_tensor(1, 2 * m.tensors[1])
    assert np.isclose(norm(doubled), 2 * norm(m))


def test_expectation_examples():
    h = build_dimerised_heisenberg(2, 0.0)
    assert np.isclose(expectation(from_dense_product([UP, UP]), h), 0.25)
    assert np.isclose(expectation(singlet_mps(), h), -0.75)
    zero = build_dimerised_heisenberg(4, 1.0)
    zero = type(zero)(4, 2, (zero.terms[1],))
    assert expectation(random_mps(4, 2, uniform(4, 2), seed=0), zero) == 0


@pytest.mark.parametrize("model,n,value", [("dim_heisenberg", 6, 0.4), ("blbq", 4, -0.8)])
def test_expectation_matches_dense(model, n, value):
    h = build_model(model, n, value)
    d = h.d
    m = random_mps(n, d, uniform(n, 3), seed=12)
    v = to_dense(m)
    ref = np.vdot(v, dense_matrix(h) @ v).real / np.vdot(v, v).real
    assert abs(expectation(m, h) - ref) < 1e-10
    assert abs(expectation(canonicalize(m, n // 2), h) - ref) < 1e-9


def test_expectation_of_factor_recombination():
    spec = PartitionSpec(((1, 4), (2, 5, 6), (3,)), 6)
    h = permute_hamiltonian(build_dimerised_heisenberg(6, 0.3), site_ordering(spec))
    m = random_mps(6, 2, bond_profile(spec, 4), seed=8)
    assert abs(expectation(m, h) - expectation(product_state(extract_factors(m)), h)) < 1e-9


def test_extract_factors_counts():
    m = random_mps(4, 2, BondProfile((1, 8, 1, 8, 1)), seed=0)
    fs = extract_factors(m)
    assert [f.n for f in fs] == [2, 2]
    assert all(abs(norm(f) - 1) < 1e-12 for f in fs)
    assert len(extract_factors(random_mps(5, 2, BondProfile((1,) * 6), seed=0))) == 5


def test_three_separable_fixture():
    m = eq3_state()
    fs = extract_factors(m)
    assert len(fs) == 3
    amp = to_dense(product_state(fs)).reshape(2, 2, 2, 2)  # axes: sites 1, 4, 2, 3
    amp = np.transpose(amp, (0, 2, 3, 1)).reshape(-1)  # sites 1, 2, 3, 4
    expected = np.zeros(16)
    for bits in ("0000", "1001", "0010", "1011"):
        expected[int(bits, 2)] = 0.5
    assert np.allclose(amp, expected, atol=1e-12)


def test_fixture_file_roundtrip(tmp_path):
    stored = load_mps(FIXTURES / "three_separable.json")
    assert np.allclose(to_dense(stored), to_dense(eq3_state()))
    path = tmp_path / "m.json"
    m = canonicalize(random_mps(4, 3, uniform(4, 3), seed=1), 1)
    save_mps(m, path)
    back = load_mps(path)
    assert back.gauge_center == 1
    assert all(np.array_equal(x, y) for x, y in zip(m.tensors, back.tensors))
