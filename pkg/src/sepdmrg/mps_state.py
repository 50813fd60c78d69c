"""Open-boundary matrix product states with per-bond dimensions.

Site tensors have axes ``(left bond, physical, right bond)``.  Positions are
0-based indices into :attr:`MatrixProductState.tensors`; a Hamiltonian handed
to :func:`expectation` must already be expressed in MPS positions (1-based
labels, as produced by :func:`~sepdmrg.partition.permute_hamiltonian`).
"""
from __future__ import annotations

import json
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from .partition import BondProfile
from .spin_models import Hamiltonian
from .tensor_core import DTYPE, DimensionError, as_tensor, split_orthonormal


@dataclass(frozen=True)
class MatrixProductState:
    tensors: tuple[np.ndarray, ...]
    d: int
    gauge_center: Optional[int] = None

    def __post_init__(self):
        ts = tuple(as_tensor(t) for t in self.tensors)
        object.__setattr__(self, "tensors", ts)
        if not ts:
            raise ValueError("an MPS needs at least one site")
        if ts[0].shape[0] != 1 or ts[-1].shape[2] != 1:
            raise DimensionError("open-boundary MPS needs unit edge bonds")
        for i, t in enumerate(ts):
            if t.ndim != 3 or t.shape[1] != self.d:
                raise DimensionError(f"site {i} has shape {t.shape}, expected (Dl, {self.d}, Dr)")
            if i and ts[i - 1].shape[2] != t.shape[0]:
                raise DimensionError(f"bond mismatch between sites {i - 1} and {i}")

    @property
    def n(self) -> int:
        return len(self.tensors)

    @property
    def profile(self) -> BondProfile:
        return BondProfile(tuple([1] + [t.shape[2] for t in self.tensors]))

    def with_tensor(self, i: int, t: np.ndarray, gauge_center=None) -> "MatrixProductState":
        ts = list(self.tensors)
        ts[i] = t
        return replace(self, tensors=tuple(ts), gauge_center=gauge_center)


def random_mps(n: int, d: int, profile: BondProfile, seed: int) -> MatrixProductState:
    """Seeded random state; bonds are first clipped to their usable maximum.

    Real and imaginary parts are independent standard normals.
    """
    if profile.n != n:
        raise ValueError(f"profile describes {profile.n} sites, expected {n}")
    dims = profile.clipped(d).dims
    for attempt in range(4):
        rng = np.random.default_rng(seed + attempt)
        ts = []
        for i in range(n):
            shape = (dims[i], d, dims[i + 1])
            ts.append(rng.standard_normal(shape) + 1j * rng.standard_normal(shape))
        m = MatrixProductState(tuple(ts), d)
        if norm(m) > 0:
            return m
    raise ArithmeticError(f"random_mps produced a zero-norm state for seed {seed}")


def product_seeded_mps(n: int, d: int, profile: BondProfile, seed: int,
                       noise: float = 1e-6, directions=None) -> MatrixProductState:
    """Product state plus small random bond content.

    Site ``i`` carries ``directions[i]`` on its first bond channel; without
    ``directions`` every site gets the same seeded random unit vector.  All
    entries then receive independent complex normal noise of scale ``noise``,
    which keeps every bond direction populated so sweeps can still build
    entanglement.
    """
    if profile.n != n:
        raise ValueError(f"profile describes {profile.n} sites, expected {n}")
    dims = profile.clipped(d).dims
    rng = np.random.default_rng(seed)
    if directions is None:
        phi = rng.standard_normal(d) + 1j * rng.standard_normal(d)
        directions = [phi] * n
    ts = []
    for i in range(n):
        shape = (dims[i], d, dims[i + 1])
        t = noise * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))
        t[0, :, 0] += directions[i] / np.linalg.norm(directions[i])
        ts.append(t)
    return MatrixProductState(tuple(ts), d)


# -- environment transport ------------------------------------------------------
# Left environments carry indices (bra, ket); right environments likewise.

def transport_left(env: np.ndarray, a: np.ndarray, op: Optional[np.ndarray] = None,
                   b: Optional[np.ndarray] = None) -> np.ndarray:
    """Push a left environment through one site, inserting ``op`` on the physical leg."""
    bra = a if b is None else b
    dl, d, dr = a.shape
    x = (env @ a.reshape(dl, d * dr)).reshape(bra.shape[0], d, dr)
    if op is not None:
        x = op @ x
    return bra.conj().reshape(-1, bra.shape[2]).T @ x.reshape(-1, dr)


def transport_right(env: np.ndarray, a: np.ndarray, op: Optional[np.ndarray] = None,
                    b: Optional[np.ndarray] = None) -> np.ndarray:
    """Push a right environment through one site, inserting ``op`` on the physical leg."""
    bra = a if b is None else b
    dl, d, dr = a.shape
    x = (a.reshape(dl * d, dr) @ env.T).reshape(dl, d, bra.shape[2])
    if op is not None:
        x = op @ x
    return bra.conj().reshape(bra.shape[0], -1) @ x.reshape(dl, -1).T


def overlap(a: MatrixProductState, b: MatrixProductState) -> complex:
    """``<a|b>``."""
    if a.n != b.n or a.d != b.d:
        raise DimensionError(f"cannot overlap states with (n, d) = {(a.n, a.d)} and {(b.n, b.d)}")
    env = np.ones((1, 1), dtype=DTYPE)
    for ta, tb in zip(a.tensors, b.tensors):
        env = transport_left(env, tb, b=ta)
    return complex(env[0, 0])


def norm(m: MatrixProductState) -> float:
    return float(np.sqrt(max(overlap(m, m).real, 0.0)))


def normalized(m: MatrixProductState) -> MatrixProductState:
    nrm = norm(m)
    if nrm == 0:
        raise ArithmeticError("cannot normalize a zero-norm state")
    i = m.gauge_center if m.gauge_center is not None else 0
    return m.with_tensor(i, m.tensors[i] / nrm, m.gauge_center)


def _left_step(t: np.ndarray, nxt: np.ndarray):
    q, r = split_orthonormal(t, [0, 1])
    return q, np.tensordot(r, nxt, axes=(1, 0))


def _right_step(t: np.ndarray, prev: np.ndarray):
    q, r = split_orthonormal(t, [1, 2])
    # q: (d, Dr, k), r: (k, Dl)  with  t[a,s,b] = sum_k q[s,b,k] r[k,a]
    return np.transpose(q, (2, 0, 1)), np.tensordot(prev, r, axes=(2, 1))


def move_center(tensors: list, i: int, direction: int) -> None:
    """Shift the orthogonality center from ``i`` to ``i + direction`` in place."""
    if direction > 0:
        tensors[i], tensors[i + 1] = _left_step(tensors[i], tensors[i + 1])
    else:
        tensors[i], tensors[i - 1] = _right_step(tensors[i], tensors[i - 1])


def canonicalize(m: MatrixProductState, center: int) -> MatrixProductState:
    """Return the same state with left-canonical sites before ``center`` and
    right-canonical sites after it."""
    if not 0 <= center < m.n:
        raise IndexError(f"center {center} outside 0..{m.n - 1}")
    ts = list(m.tensors)
    for i in range(center):
        move_center(ts, i, +1)
    for i in range(m.n - 1, center, -1):
        move_center(ts, i, -1)
    return MatrixProductState(tuple(ts), m.d, center)


def gauge_errors(m: MatrixProductState, center: int) -> list[float]:
    """Max deviation from the isometry condition at every site except ``center``."""
    errs = []
    for i, t in enumerate(m.tensors):
        dl, d, dr = t.shape
        if i < center:
            mat = t.reshape(dl * d, dr)
            g = mat.conj().T @ mat
        elif i > center:
            mat = t.reshape(dl, d * dr)
            g = mat @ mat.conj().T
        else:
            continue
        errs.append(float(np.max(np.abs(g - np.eye(g.shape[0])))))
    return errs


def expectation(m: MatrixProductState, h: Hamiltonian) -> float:
    """``<m|h|m> / <m|m>`` contracted term by term.

    Left and right norm environments are built once and reused by every term;
    each summand is then carried from its first to its second site.
    """
    if h.n != m.n or h.d != m.d:
        raise DimensionError("Hamiltonian and state disagree on n or d")
    ts = m.tensors
    n = m.n
    left = [np.ones((1, 1), dtype=DTYPE)]
    for t in ts:
        left.append(transport_left(left[-1], t))
    right = [np.ones((1, 1), dtype=DTYPE)]
    for t in reversed(ts):
        right.append(transport_right(right[-1], t))
    right.reverse()  # right[j] covers positions j..n-1
    nrm2 = left[n][0, 0].real
    if nrm2 <= 0:
        raise ArithmeticError("expectation of a zero-norm state")
    total = 0.0 + 0.0j
    for term in h.terms:
        i, k = term.site_a - 1, term.site_b - 1
        lo, hi = (i, k) if i < k else (k, i)
        for c, oa, ob in term.summands:
            if c == 0:
                continue
            op_lo, op_hi = (oa, ob) if i < k else (ob, oa)
            x = transport_left(left[lo], ts[lo], op_lo)
            for j in range(lo + 1, hi):
                x = transport_left(x, ts[j])
            x = transport_left(x, ts[hi], op_hi)
            total += c * np.sum(x * right[hi + 1])
    val = total / nrm2
    if abs(val.imag) > 1e-9 * max(1.0, abs(val.real)):
        raise ArithmeticError(f"expectation has imaginary part {val.imag:.3e}")
    return float(val.real)


def extract_factors(m: MatrixProductState) -> list[MatrixProductState]:
    """Split at every internal unit bond into normalized factor states."""
    cuts = m.profile.unit_cuts()
    edges = [0] + cuts + [m.n]
    out = []
    for s, e in zip(edges[:-1], edges[1:]):
        seg = MatrixProductState(m.tensors[s:e], m.d)
        out.append(normalized(seg))
    return out


def product_state(factors: Sequence[MatrixProductState]) -> MatrixProductState:
    """Tensor product of factor states laid out one after another."""
    ts = [t for f in factors for t in f.tensors]
    return MatrixProductState(tuple(ts), factors[0].d)


def to_dense(m: MatrixProductState) -> np.ndarray:
    """Amplitude vector of length ``d**n``; position 0 is the slowest index."""
    v = m.tensors[0].reshape(-1, m.tensors[0].shape[2])
    for t in m.tensors[1:]:
        v = (v @ t.reshape(t.shape[0], -1)).reshape(-1, t.shape[2])
    return v.reshape(-1)


def from_dense_product(vectors: Sequence[np.ndarray]) -> MatrixProductState:
    """Product state from one local vector per site."""
    vs = [np.asarray(v, dtype=DTYPE).reshape(1, -1, 1) for v in vectors]
    return MatrixProductState(tuple(vs), vs[0].shape[1])


def save_mps(m: MatrixProductState, path) -> None:
    """Write a JSON fixture: ``d``, ``gauge_center`` and per site ``shape``,
    ``re``, ``im`` (C-order, last axis fastest)."""
    doc = {
        "d": m.d,
        "gauge_center": m.gauge_center,
        "tensors": [{"shape": list(t.shape), "re": t.real.ravel().tolist(),
                     "im": t.imag.ravel().tolist()} for t in m.tensors],
    }
    with open(path, "w") as fh:
        json.dump(doc, fh)


def load_mps(path) -> MatrixProductState:
    with open(path) as fh:
        doc = json.load(fh)
    ts = [(np.array(t["re"]) + 1j * np.array(t["im"])).reshape(t["shape"]) for t in doc["tensors"]]
    return MatrixProductState(tuple(ts), doc["d"], doc.get("gauge_center"))
