"""Partitions of a chain into mutually separable parts.

A partition fixes an MPS site ordering (parts laid out one after another)
and a bond-dimension profile in which every bond between two parts has
dimension one.  Site labels are 1-based throughout this module.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .spin_models import Hamiltonian, TwoSiteTerm


@dataclass(frozen=True)
class PartitionSpec:
    """Ordered disjoint parts covering sites ``1..n``."""

    parts: tuple[tuple[int, ...], ...]
    n: int

    def __post_init__(self):
        parts = tuple(tuple(sorted(int(s) for s in p)) for p in self.parts)
        object.__setattr__(self, "parts", parts)
        if any(len(p) == 0 for p in parts):
            raise ValueError("partition has an empty part")
        flat = [s for p in parts for s in p]
        if len(flat) != len(set(flat)):
            raise ValueError(f"parts overlap: {parts}")
        if set(flat) != set(range(1, self.n + 1)):
            raise ValueError(f"parts {parts} do not cover sites 1..{self.n}")

    @property
    def k(self) -> int:
        return len(self.parts)

    def label(self) -> str:
        return "parts:" + "|".join(",".join(map(str, p)) for p in self.parts)

    @classmethod
    def whole(cls, n: int) -> "PartitionSpec":
        return cls((tuple(range(1, n + 1)),), n)

    @classmethod
    def parse(cls, text: str, n: int) -> "PartitionSpec":
        """Parse ``"1,2,5,6|3,4,7,8"`` (an optional ``parts=`` prefix is allowed)."""
        text = text.strip()
        for prefix in ("parts=", "parts:"):
            if text.startswith(prefix):
                text = text[len(prefix):]
        try:
            parts = tuple(tuple(int(s) for s in chunk.split(",") if s.strip())
                          for chunk in text.split("|"))
        except ValueError:
            raise ValueError(f"malformed partition {text!r}") from None
        return cls(parts, n)


@dataclass(frozen=True)
class BondProfile:
    """Bond dimensions ``dims[0..n]``; ``dims[0]`` and ``dims[n]`` are the edges."""

    dims: tuple[int, ...]

    def __post_init__(self):
        dims = tuple(int(x) for x in self.dims)
        object.__setattr__(self, "dims", dims)
        if len(dims) < 2 or dims[0] != 1 or dims[-1] != 1:
            raise ValueError(f"open-chain profile needs unit edge bonds: {dims}")
        if any(x < 1 for x in dims):
            raise ValueError(f"bond dimensions must be >= 1: {dims}")

    @property
    def n(self) -> int:
        return len(self.dims) - 1

    def unit_cuts(self) -> list[int]:
        """Internal bond indices ``j`` (between positions j-1 and j, 0-based) of dimension 1."""
        return [j for j in range(1, self.n) if self.dims[j] == 1]

    def clipped(self, d: int) -> "BondProfile":
        """Cap each bond at the largest dimension a segment between unit cuts can use.

        Inside a segment of physical dimension ``d`` spanning positions
        ``[s, e)``, bond ``j`` can carry at most ``min(d**(j-s), d**(e-j))``
        Schmidt values; larger tensors could not be brought into canonical form.
        """
        n = self.n
        edges = [0] + self.unit_cuts() + [n]
        dims = list(self.dims)
        for s, e in zip(edges[:-1], edges[1:]):
            for j in range(s + 1, e):
                dims[j] = min(dims[j], d ** min(j - s, e - j, 64))
        return BondProfile(tuple(dims))


def p_step_partition(n: int, p: int) -> PartitionSpec:
    """Blocks of ``p`` sites alternately assigned to two parts (odd blocks first)."""
    if p < 1:
        raise ValueError(f"p must be positive, got p={p}")
    if n % (2 * p) != 0:
        raise ValueError(f"n={n} is not an even multiple of p={p}")
    odd, even = [], []
    for b in range(n // p):
        block = range(b * p + 1, (b + 1) * p + 1)
        (odd if b % 2 == 0 else even).extend(block)
    return PartitionSpec((tuple(odd), tuple(even)), n)


def site_ordering(spec: PartitionSpec) -> tuple[int, ...]:
    """Permutation ``pi`` with ``pi[pos - 1]`` the physical site at MPS position ``pos``."""
    return tuple(s for part in spec.parts for s in part)


def inverse_ordering(pi: Sequence[int]) -> tuple[int, ...]:
    """``inv[site - 1]`` is the MPS position (1-based) holding ``site``."""
    inv = [0] * len(pi)
    for pos, site in enumerate(pi, start=1):
        inv[site - 1] = pos
    return tuple(inv)


def bond_profile(spec: PartitionSpec, D: int) -> BondProfile:
    if D < 1:
        raise ValueError(f"D must be >= 1, got {D}")
    owner = {s: i for i, part in enumerate(spec.parts) for s in part}
    order = site_ordering(spec)
    dims = [1]
    for j in range(1, spec.n):
        dims.append(D if owner[order[j - 1]] == owner[order[j]] else 1)
    dims.append(1)
    return BondProfile(tuple(dims))


def permute_hamiltonian(h: Hamiltonian, pi: Sequence[int]) -> Hamiltonian:
    """Relabel ``h`` from physical sites to MPS positions under ordering ``pi``.

    Each term is rewritten so that ``site_a < site_b``; when the order flips
    the operator pairs are swapped accordingly.
    """
    if sorted(pi) != list(range(1, h.n + 1)):
        raise ValueError(f"{tuple(pi)} is not a permutation of 1..{h.n}")
    pos = inverse_ordering(pi)
    terms = []
    for t in h.terms:
        a, b = pos[t.site_a - 1], pos[t.site_b - 1]
        if a < b:
            terms.append(TwoSiteTerm(a, b, t.summands))
        else:
            terms.append(TwoSiteTerm(b, a, tuple((c, ob, oa) for c, oa, ob in t.summands)))
    return Hamiltonian(h.n, h.d, tuple(terms), h.label, h.params)


def partition_label(entry) -> str:
    """CSV label: ``none``, ``p<k>`` or ``parts:<spec>``."""
    if entry is None:
        return "none"
    if isinstance(entry, int):
        return f"p{entry}"
    return entry.label()
