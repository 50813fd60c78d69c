import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sepdmrg.dmrg_solver import (EnvironmentCache, GaugeError, SolverConfig, constrained_ground_energy,
                                 effective_hamiltonian, ground_energy, local_update, minimize,
                                 norm_matrix, sweep)
from sepdmrg.ed_oracle import alternating_block_oracle, dense_ground_energy
from sepdmrg.mps_state import (canonicalize, expectation, from_dense_product,
                               normalized, random_mps)
from sepdmrg.partition import BondProfile, PartitionSpec, p_step_partition, permute_hamiltonian
from sepdmrg.spin_models import Hamiltonian, build_dimerised_heisenberg, build_model

UP = np.array([1.0, 0.0])


def uniform(n, D):
    return BondProfile((1,) + (D,) * (n - 1) + (1,))


def test_effective_hamiltonian_mean_field():
    h = build_dimerised_heisenberg(2, 0.0)
    m = canonicalize(from_dense_product([UP, UP]), 0)
    heff = effective_hamiltonian(m, h, 0)
    assert np.allclose(heff, np.diag([0.25, -0.25]))


def test_effective_hamiltonian_zero_and_shape():
    h = build_dimerised_heisenberg(4, 1.0)
    zero = Hamiltonian(4, 2, (h.terms[1],))
    m = canonicalize(random_mps(4, 2, BondProfile((1, 2, 1, 2, 1)), seed=0), 1)
    assert np.allclose(effective_hamiltonian(m, zero, 1), 0)
    assert effective_hamiltonian(m, h, 1).shape == (4, 4)


def test_effective_hamiltonian_needs_center():
    h = build_dimerised_heisenberg(3, 0.0)
    m = canonicalize(random_mps(3, 2, uniform(3, 2), seed=0), 0)
    with pytest.raises(GaugeError):
        effective_hamiltonian(m, h, 1)


@pytest.mark.parametrize("model,n,value,D", [("dim_heisenberg", 6, 0.3, 3), ("blbq", 4, 0.7, 2)])
def test_effective_hamiltonian_is_rayleigh_quotient(model, n, value, D):
    h = build_model(model, n, value)
    m = random_mps(n, h.d, uniform(n, D), seed=3)
    for i in range(n):
        c = normalized(canonicalize(m, i))
        assert np.allclose(norm_matrix(c, i), np.eye(c.tensors[i].size), atol=1e-10)
        v = c.tensors[i].reshape(-1)
        heff = effective_hamiltonian(c, h, i)
        assert np.allclose(heff, heff.conj().T, atol=1e-12)
        assert abs(np.vdot(v, heff @ v).real - expectation(c, h)) < 1e-10


def test_effective_apply_matches_dense():
    h = permute_hamiltonian(build_dimerised_heisenberg(6, -0.2), (1, 4, 2, 6, 3, 5))
    m = canonicalize(random_mps(6, 2, uniform(6, 4), seed=7), 2)
    from sepdmrg.dmrg_solver import _effective
    eff = _effective(m, 2, EnvironmentCache(h))
    v = np.random.default_rng(0).standard_normal(eff.dim) + 0j
    assert np.allclose(eff.apply(v), eff.dense() @ v, atol=1e-12)


def test_local_update_product_example():
    h = build_dimerised_heisenberg(2, 0.0)
    m = canonicalize(from_dense_product([UP, UP]), 0)
    new, e = local_update(m, h, 0, None, SolverConfig(D=1), direction=0)
    assert np.isclose(e, -0.25)
    assert np.isclose(abs(new.tensors[0].reshape(-1)[1]), 1)


def test_local_update_fixed_point():
    h = build_dimerised_heisenberg(4, 0.2)
    cfg = SolverConfig(D=2)
    m = normalized(canonicalize(random_mps(4, 2, uniform(4, 2), seed=1), 1))
    cache = EnvironmentCache(h)
    m1, e1 = local_update(m, h, 1, cache, cfg, direction=0)
    _, e2 = local_update(m1, h, 1, cache, cfg, direction=0)
    assert abs(e1 - e2) < 1e-12


def test_local_update_never_raises_energy():
    rng = np.random.default_rng(0)
    for k in range(100):
        model = "dim_heisenberg" if k % 2 else "blbq"
        n = int(rng.integers(2, 6))
        h = build_model(model, n, float(rng.uniform(-1, 1)))
        i = int(rng.integers(0, n))
        m = normalized(canonicalize(random_mps(n, h.d, uniform(n, int(rng.integers(1, 4))), k), i))
        before = expectation(m, h)
        after, e = local_update(m, h, i, None, SolverConfig(D=4), direction=0)
        assert e <= before + 1e-10
        assert abs(expectation(after, h) - e) < 1e-9


@pytest.mark.parametrize("seed", range(5))
def test_two_site_singlet_in_one_sweep(seed):
    h = build_dimerised_heisenberg(2, 0.0)
    for init in ("mean_field", "product", "random"):
        cfg = SolverConfig(D=2, init=init)
        m = normalized(canonicalize(cfg.initial_state(h, uniform(2, 2), 0, seed), 0))
        _, es = sweep(m, h, cfg)
        assert abs(es[-1] + 0.75) < 1e-10


def test_sweep_energies_non_increasing():
    h = build_dimerised_heisenberg(8, 0.4)
    cfg = SolverConfig(D=4, init="random")
    m = normalized(canonicalize(random_mps(8, 2, uniform(8, 4), seed=2), 0))
    cache = EnvironmentCache(h)
    seq = []
    for _ in range(4):
        m, es = sweep(m, h, cfg, cache)
        seq += es
    assert np.all(np.diff(seq) <= 1e-10)


def test_single_site_chain():
    h = Hamiltonian(1, 2, ())
    e, m, rep = minimize(h, BondProfile((1, 1)), SolverConfig(restarts=1, max_sweeps=3))
    assert e == 0
    assert len(rep.energies_per_update) == rep.sweeps_used


def test_gauge_check_mode():
    h = build_dimerised_heisenberg(6, 0.1)
    e, _, rep = ground_energy(h, SolverConfig(D=4, restarts=1, check_gauge=True))
    assert rep.converged
    assert e >= dense_ground_energy(h) - 1e-8


@pytest.mark.parametrize("delta", [1.0, 0.0])
def test_unconstrained_small_chains(delta):
    h = build_dimerised_heisenberg(4, delta)
    e, _, rep = ground_energy(h, SolverConfig(D=4, restarts=2))
    assert rep.converged
    assert abs(e - dense_ground_energy(h)) < 1e-8
    if delta == 1.0:
        assert abs(e + 3) < 1e-8


def test_p2_dimer_limit():
    h = build_dimerised_heisenberg(4, 1.0)
    e, m, _ = constrained_ground_energy(h, p_step_partition(4, 2), SolverConfig(D=4, restarts=2))
    assert m.profile.dims == (1, 2, 1, 2, 1)  # (1, 4, 1, 4, 1) after clipping
    assert abs(e + 3) < 1e-8


def test_constrained_against_oracle():
    h = build_dimerised_heisenberg(4, 0.0)
    spec = PartitionSpec(((1, 3), (2, 4)), 4)
    e, _, _ = constrained_ground_energy(h, spec, SolverConfig(D=4, restarts=20))
    e0, _, _ = ground_energy(h, SolverConfig(D=4, restarts=2))
    assert e >= e0 - 1e-8
    assert abs(e - alternating_block_oracle(h, spec, multistarts=20)) < 1e-6


def test_whole_spec_equals_minimize():
    h = build_dimerised_heisenberg(5, 0.3)
    cfg = SolverConfig(D=4, restarts=2)
    a = ground_energy(h, cfg)[0]
    b = minimize(h, uniform(5, 4), cfg)[0]
    assert a == b


@pytest.mark.parametrize("n", [4, 6, 8])
def test_exact_at_full_bond_dimension(n):
    h = build_dimerised_heisenberg(n, -0.35)
    e, _, _ = ground_energy(h, SolverConfig(D=2 ** (n // 2), restarts=2))
    assert abs(e - dense_ground_energy(h)) < 1e-8


def test_permutation_soundness():
    h = build_dimerised_heisenberg(6, 0.25)
    cfg = SolverConfig(D=8, restarts=2)
    e = ground_energy(h, cfg)[0]
    hp = permute_hamiltonian(h, (4, 1, 6, 2, 5, 3))
    assert abs(ground_energy(hp, cfg)[0] - e) < 1e-8


def test_report_contents():
    h = build_dimerised_heisenberg(6, 0.5)
    cfg = SolverConfig(D=4, restarts=3, base_seed=10)
    e, _, rep = ground_energy(h, cfg)
    assert len(rep.restart_updates) == 3
    assert rep.seed == 10 + rep.restart_index
    assert rep.energies_per_update[-1] == e
    assert len(rep.energies_per_update) == rep.sweeps_used * 2 * (6 - 1)


def test_deterministic_per_seed():
    h = build_model("blbq", 5, 0.9)
    cfg = SolverConfig(D=3, restarts=2, base_seed=4, init="mixed")
    a, b = ground_energy(h, cfg), ground_energy(h, cfg)
    assert a[0] == b[0]
    assert a[2].energies_per_update == b[2].energies_per_update


def test_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(D=0)
    with pytest.raises(ValueError):
        SolverConfig(init="zeros")


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 6), st.floats(-1, 1), st.integers(1, 6), st.integers(0, 2**20))
def test_variational_bound_property(n, delta, D, seed):
    h = build_dimerised_heisenberg(n, delta)
    spec = p_step_partition(n, 1) if n % 2 == 0 else PartitionSpec.whole(n)
    e, _, _ = constrained_ground_energy(h, spec, SolverConfig(D=D, restarts=1, max_sweeps=20,
                                                              base_seed=seed))
    assert e >= dense_ground_energy(h) - 1e-8



def test_mean_field_product_energies():
    from sepdmrg.dmrg_solver import mean_field_product
    h = build_dimerised_heisenberg(2, 0.0)
    # best product state of an antiferromagnetic bond
    assert np.isclose(expectation(from_dense_product(mean_field_product(h, seed=0)), h), -0.25)
    h = build_model("blbq", 4, 1.5)
    singles = PartitionSpec(tuple((s,) for s in range(1, 5)), 4)
    ref = constrained_ground_energy(h, singles, SolverConfig(D=1, restarts=4, init="random"))[0]
    e = min(expectation(from_dense_product(mean_field_product(h, seed)), h) for seed in range(4))
    assert abs(e - ref) < 1e-8
