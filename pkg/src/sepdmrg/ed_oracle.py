"""Exact-diagonalization references that share no code with the MPS path.

``assemble_dense`` builds the full ``d**n`` matrix from Kronecker products;
``krylov_ground_energy`` applies terms to a reshaped state vector and hands
the operator to ARPACK; ``alternating_block_oracle`` minimizes over
``|psi_A> (x) |psi_B>`` by alternating exact eigen-solves on each part.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
import scipy.linalg as sla_dense
import scipy.sparse.linalg as sla

from .partition import PartitionSpec
from .spin_models import Hamiltonian

log = logging.getLogger(__name__)

DENSE_CAP = 4096
KRYLOV_CAP = 2_100_000
PART_CAP = 256


class OracleSizeError(ValueError):
    pass


class OracleConvergenceError(ArithmeticError):
    pass


@dataclass
class DenseHamiltonian:
    dim: int
    matrix: Optional[np.ndarray] = None
    apply: Optional[Callable[[np.ndarray], np.ndarray]] = None


def _embed(n: int, d: int, sites_ops) -> np.ndarray:
    """Kronecker product with the given ``{site: op}`` and identities elsewhere."""
    out = np.ones((1, 1), dtype=complex)
    eye = np.eye(d, dtype=complex)
    for s in range(1, n + 1):
        out = np.kron(out, sites_ops.get(s, eye))
    return out


def dense_matrix(h: Hamiltonian) -> np.ndarray:
    dim = h.d ** h.n
    if dim > DENSE_CAP:
        raise OracleSizeError(f"dense assembly capped at {DENSE_CAP}, got d^n = {dim}")
    mat = np.zeros((dim, dim), dtype=complex)
    for t in h.terms:
        for c, a, b in t.summands:
            if c:
                mat += c * _embed(h.n, h.d, {t.site_a: a, t.site_b: b})
    return mat


def _matrix_free(h: Hamiltonian):
    n, d = h.n, h.d
    shape = (d,) * n

    def apply(v):
        psi = np.asarray(v).reshape(shape)
        out = np.zeros(shape, dtype=complex)
        for t in h.terms:
            i, j = t.site_a - 1, t.site_b - 1
            for c, a, b in t.summands:
                if not c:
                    continue
                x = np.moveaxis(np.tensordot(a, psi, axes=(1, i)), 0, i)
                x = np.moveaxis(np.tensordot(b, x, axes=(1, j)), 0, j)
                out += c * x
        return out.reshape(-1)

    return apply


def assemble_dense(h: Hamiltonian, matrix_free: Optional[bool] = None) -> DenseHamiltonian:
    """Full-space Hamiltonian; dense up to 4096 states, matrix-free above."""
    dim = h.d ** h.n
    if matrix_free is None:
        matrix_free = dim > DENSE_CAP
    if matrix_free:
        if dim > KRYLOV_CAP:
            raise OracleSizeError(f"matrix-free application capped at {KRYLOV_CAP}, got {dim}")
        return DenseHamiltonian(dim, apply=_matrix_free(h))
    return DenseHamiltonian(dim, matrix=dense_matrix(h))


def dense_ground_energy(h: Hamiltonian) -> float:
    return float(np.linalg.eigvalsh(dense_matrix(h))[0])


def krylov_ground_energy(h: Hamiltonian, tol: float = 1e-12, maxiter: int = 20000) -> float:
    op = assemble_dense(h, matrix_free=True)
    lin = sla.LinearOperator((op.dim, op.dim), matvec=op.apply, dtype=complex)
    v0 = np.random.default_rng(0).standard_normal(op.dim).astype(complex)
    try:
        vals, vecs = sla.eigsh(lin, k=1, which="SA", v0=v0, tol=tol, maxiter=maxiter)
    except sla.ArpackNoConvergence as exc:
        raise OracleConvergenceError(
            f"ARPACK did not converge within {maxiter} iterations") from exc
    lam = float(vals[0])
    v = vecs[:, 0]
    res = np.linalg.norm(op.apply(v) - lam * v)
    if res > 1e-8 * max(1.0, abs(lam)):
        raise OracleConvergenceError(f"Krylov residual {res:.3e} too large")
    return lam


# -- two-part product-state oracle -----------------------------------------------

def _part_operator(sites, d, ops_at) -> np.ndarray:
    """Operator on a part's space (sites in ascending order) with ``ops_at`` inserted."""
    out = np.ones((1, 1), dtype=complex)
    eye = np.eye(d, dtype=complex)
    for s in sites:
        out = np.kron(out, ops_at.get(s, eye))
    return out


class _SplitHamiltonian:
    """Terms sorted into part A, part B and cross terms ``c * opA (x) opB``."""

    def __init__(self, h: Hamiltonian, spec: PartitionSpec):
        if spec.k != 2:
            raise ValueError("the block oracle handles two-part partitions only")
        self.a_sites, self.b_sites = spec.parts
        for part in spec.parts:
            if h.d ** len(part) > PART_CAP:
                raise OracleSizeError(f"part dimension {h.d ** len(part)} exceeds {PART_CAP}")
        a_set = set(self.a_sites)
        da, db = h.d ** len(self.a_sites), h.d ** len(self.b_sites)
        self.ha = np.zeros((da, da), dtype=complex)
        self.hb = np.zeros((db, db), dtype=complex)
        self.cross = []  # (coef, op on A space, op on B space)
        for t in h.terms:
            for c, oa, ob in t.summands:
                if not c:
                    continue
                sa, sb = t.site_a in a_set, t.site_b in a_set
                if sa and sb:
                    self.ha += c * _part_operator(self.a_sites, h.d, {t.site_a: oa, t.site_b: ob})
                elif not sa and not sb:
                    self.hb += c * _part_operator(self.b_sites, h.d, {t.site_a: oa, t.site_b: ob})
                else:
                    (xa, opa), (xb, opb) = ((t.site_a, oa), (t.site_b, ob)) if sa else \
                        ((t.site_b, ob), (t.site_a, oa))
                    self.cross.append((c, _part_operator(self.a_sites, h.d, {xa: opa}),
                                       _part_operator(self.b_sites, h.d, {xb: opb})))

    def effective_a(self, psi_b):
        m = self.ha.copy()
        const = np.vdot(psi_b, self.hb @ psi_b).real
        for c, xa, xb in self.cross:
            m += c * np.vdot(psi_b, xb @ psi_b) * xa
        return m, const

    def effective_b(self, psi_a):
        m = self.hb.copy()
        const = np.vdot(psi_a, self.ha @ psi_a).real
        for c, xa, xb in self.cross:
            m += c * np.vdot(psi_a, xa @ psi_a) * xb
        return m, const


def _lowest(m):
    w, v = sla_dense.eigh(0.5 * (m + m.conj().T), subset_by_index=[0, 0], driver="evr")
    return float(w[0]), v[:, 0]


def alternating_block_oracle(h: Hamiltonian, spec: PartitionSpec, multistarts: int = 20,
                             seed: int = 0, tol: float = 1e-12, max_iter: int = 100000,
                             history: Optional[list] = None) -> float:
    """Best energy of ``|psi_A> (x) |psi_B>`` over seeded multistarts.

    Each start draws ``|psi_B>`` uniformly on the unit sphere, then alternates
    exact minimization of part A given B and part B given A until the energy
    changes by less than ``tol``.  Per-half-step energies of every start are
    appended to ``history`` when given.
    """
    if spec.k == 1:
        # only one part: the product constraint is empty
        return dense_ground_energy(h)
    split = _SplitHamiltonian(h, spec)
    rng = np.random.default_rng(seed)
    db = split.hb.shape[0]
    best = np.inf
    for start in range(multistarts):
        psi_b = rng.standard_normal(db) + 1j * rng.standard_normal(db)
        psi_b /= np.linalg.norm(psi_b)
        prev = np.inf
        trace = []
        for it in range(max_iter):
            ma, cb = split.effective_a(psi_b)
            ea, psi_a = _lowest(ma)
            trace.append(ea + cb)
            mb, ca = split.effective_b(psi_a)
            eb, psi_b = _lowest(mb)
            e = eb + ca
            trace.append(e)
            if abs(prev - e) < tol:
                break
            prev = e
        else:
            log.warning("block oracle start %d hit the iteration cap", start)
        if history is not None:
            history.append(trace)
        best = min(best, e)
    return float(best)


def product_energy(h: Hamiltonian, spec: PartitionSpec, psi_a, psi_b) -> float:
    """Energy of a given ``|psi_A> (x) |psi_B>`` (normalized vectors)."""
    split = _SplitHamiltonian(h, spec)
    m, c = split.effective_a(psi_b)
    return float(np.vdot(psi_a, m @ psi_a).real + c)
