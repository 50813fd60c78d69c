"""Minimal energies of partially separable spin-chain states via constrained DMRG."""
from .dmrg_solver import SolverConfig, SweepReport, constrained_ground_energy, ground_energy, minimize
from .ed_oracle import alternating_block_oracle, assemble_dense, dense_ground_energy, krylov_ground_energy
from .experiment import ExperimentConfig, format_config, oracle_compare, parse_config, run_experiment
from .mps_state import (MatrixProductState, canonicalize, expectation, extract_factors, load_mps,
                        product_state, random_mps, save_mps, to_dense)
from .partition import (BondProfile, PartitionSpec, bond_profile, p_step_partition,
                        permute_hamiltonian, site_ordering)
from .spin_models import Hamiltonian, TwoSiteTerm, build_blbq, build_dimerised_heisenberg, build_model

__version__ = "0.1.0"

__all__ = [
    "alternating_block_oracle",
    "assemble_dense",
    "bond_profile",
    "BondProfile",
    "build_blbq",
    "build_dimerised_heisenberg",
    "build_model",
    "canonicalize",
    "constrained_ground_energy",
    "dense_ground_energy",
    "expectation",
    "ExperimentConfig",
    "extract_factors",
    "format_config",
    "ground_energy",
    "Hamiltonian",
    "krylov_ground_energy",
    "load_mps",
    "MatrixProductState",
    "minimize",
    "oracle_compare",
    "p_step_partition",
    "parse_config",
    "PartitionSpec",
    "permute_hamiltonian",
    "product_state",
    "random_mps",
    "run_experiment",
    "save_mps",
    "site_ordering",
    "SolverConfig",
    "SweepReport",
    "to_dense",
    "TwoSiteTerm",
]
