"""Spin operators and two-site Hamiltonians for open chains.

Sites are labelled 1..n.  A :class:`Hamiltonian` is a flat list of
:class:`TwoSiteTerm` objects, each a real-weighted sum of operator pairs, so
the same data structure serves the exact-diagonalization oracle and the MPS
environments.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .tensor_core import DTYPE

MODEL_NAMES = ("dim_heisenberg", "blbq")


def spin_matrices(s) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return ``(Sx, Sy, Sz)`` for spin ``s`` (``1/2`` or ``1``).

    Basis states are ordered by descending ``m``, so ``Sz`` is
    ``diag(s, s-1, ..., -s)``.
    """
    s = Fraction(s).limit_denominator(2)
    if s not in (Fraction(1, 2), Fraction(1)):
        raise ValueError(f"only spin 1/2 and spin 1 are supported, got {s}")
    d = int(2 * s + 1)
    m = np.array([float(s) - k for k in range(d)])
    sz = np.diag(m).astype(DTYPE)
    sp = np.zeros((d, d), dtype=DTYPE)
    for k in range(1, d):
        # <m+1| S+ |m>
        sp[k - 1, k] = np.sqrt(float(s) * (float(s) + 1) - m[k] * (m[k] + 1))
    sx = 0.5 * (sp + sp.conj().T)
    sy = -0.5j * (sp - sp.conj().T)
    return sx, sy, sz


@dataclass(frozen=True)
class TwoSiteTerm:
    """``sum_k coef_k * op_a_k (x) op_b_k`` acting on ``(site_a, site_b)``."""

    site_a: int
    site_b: int
    summands: tuple[tuple[float, np.ndarray, np.ndarray], ...]

    def __post_init__(self):
        if self.site_a == self.site_b:
            raise ValueError("a two-site term needs two distinct sites")

    @property
    def coefficients(self) -> list[float]:
        return [c for c, _, _ in self.summands]


@dataclass(frozen=True)
class Hamiltonian:
    n: int
    d: int
    terms: tuple[TwoSiteTerm, ...]
    label: str = ""
    params: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        for t in self.terms:
            for s in (t.site_a, t.site_b):
                if not 1 <= s <= self.n:
                    raise ValueError(f"site {s} outside 1..{self.n}")
            for _, a, b in t.summands:
                if a.shape != (self.d, self.d) or b.shape != (self.d, self.d):
                    raise ValueError("operator dimension does not match d")

    def bond_coefficients(self) -> list[float]:
        """Leading coefficient of every term (the bond strength for chains)."""
        return [t.summands[0][0] if t.summands else 0.0 for t in self.terms]


def assemble_bond_matrix(t: TwoSiteTerm) -> np.ndarray:
    """Dense ``d^2 x d^2`` matrix of a term, first site as the slow index."""
    d = t.summands[0][1].shape[0]
    out = np.zeros((d * d, d * d), dtype=DTYPE)
    for c, a, b in t.summands:
        out += c * np.kron(a, b)
    return out


def _heisenberg_pairs(ops):
    return [(o, o) for o in ops]


def build_dimerised_heisenberg(n: int, delta: float) -> Hamiltonian:
    """Open spin-1/2 chain with bond ``i`` weighted by ``1 - (-1)**i * delta``.

    Bond ``i`` couples sites ``i`` and ``i + 1``; with ``delta > 0`` the odd
    bonds (1,2), (3,4), ... are the strong ones.
    """
    if n < 2:
        raise ValueError(f"need at least 2 sites, got n={n}")
    ops = spin_matrices(Fraction(1, 2))
    terms = []
    for i in range(1, n):
        c = 1.0 - (-1) ** i * delta
        terms.append(TwoSiteTerm(i, i + 1, tuple((c, a, b) for a, b in _heisenberg_pairs(ops))))
    return Hamiltonian(n, 2, tuple(terms), f"dim_heisenberg(n={n}, delta={delta:g})",
                       {"delta": delta})


def quadrupole_operators() -> list[tuple[float, np.ndarray]]:
    """Weighted symmetric products ``Q_ab = (S_a S_b + S_b S_a) / 2`` for spin 1.

    The weights (1 on the diagonal, 2 off it) make
    ``sum_k w_k Q_k (x) Q_k == sum_ab S_a S_b (x) S_a S_b``.
    """
    s = spin_matrices(1)
    out = []
    for a in range(3):
        for b in range(a, 3):
            q = 0.5 * (s[a] @ s[b] + s[b] @ s[a])
            out.append((1.0 if a == b else 2.0, q))
    return out


def build_blbq(n: int, alpha: float) -> Hamiltonian:
    """Open spin-1 chain with bonds ``S.S + alpha (S.S)^2``.

    Uses ``(S.S)^2 = sum_ab Q_ab (x) Q_ab - S.S / 2``, so every bond is nine
    Hermitian operator pairs: three dipole and six quadrupole channels.
    """
    if n < 2:
        raise ValueError(f"need at least 2 sites, got n={n}")
    spins = spin_matrices(1)
    quad = quadrupole_operators()
    lin = 1.0 - 0.5 * alpha
    summands = tuple([(lin, o, o) for o in spins] + [(alpha * w, q, q) for w, q in quad])
    terms = tuple(TwoSiteTerm(i, i + 1, summands) for i in range(1, n))
    return Hamiltonian(n, 3, terms, f"blbq(n={n}, alpha={alpha:g})", {"alpha": alpha})


def build_model(name: str, n: int, value: float) -> Hamiltonian:
    """Dispatch on the CLI model name; ``value`` is delta or alpha."""
    if name == "dim_heisenberg":
        return build_dimerised_heisenberg(n, value)
    if name == "blbq":
        return build_blbq(n, value)
    raise ValueError(f"unknown model {name!r}; expected one of {MODEL_NAMES}")


def model_parameter(name: str) -> str:
    return {"dim_heisenberg": "delta", "blbq": "alpha"}[name]


def model_dimension(name: str) -> int:
    return {"dim_heisenberg": 2, "blbq": 3}[name]


def relabel(h: Hamiltonian, pairs: Sequence[TwoSiteTerm], label=None) -> Hamiltonian:
    return Hamiltonian(h.n, h.d, tuple(pairs), h.label if label is None else label, h.params)
