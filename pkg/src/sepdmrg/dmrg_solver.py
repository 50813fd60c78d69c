"""Single-site variational MPS sweeps under a fixed bond profile.

The Hamiltonian is any list of two-site terms expressed in MPS positions, so
terms may be long-ranged after a partition reordering.  Environments are kept
per open operator channel: a left block at boundary ``j`` holds the summed
contribution of terms already closed to the left of ``j`` plus one matrix for
every ``(site, operator)`` pair still waiting for its partner to the right.

Because sites left of the orthogonality center are left-canonical, a channel
that has passed through a unit bond is an exact multiple of the identity and
is stored as that scalar.  A cut therefore turns everything on the far side
into local fields and constants, which is what keeps constrained runs as cheap
as ordinary ones.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import optimize

from .mps_state import (MatrixProductState, canonicalize, move_center, normalized,
                        product_seeded_mps, random_mps, transport_left, transport_right)
from .partition import (BondProfile, PartitionSpec, bond_profile, permute_hamiltonian,
                        site_ordering)
from .spin_models import Hamiltonian
from .tensor_core import DTYPE, EigensolverError, hermitian_lowest, lanczos_lowest

log = logging.getLogger(__name__)


@dataclass
class SolverConfig:
    D: int = 16
    max_sweeps: int = 200
    rel_tol: float = 1e-10
    restarts: int = 8
    base_seed: int = 0
    dense_threshold: int = 512
    max_krylov_iters: int = 400
    #: "mean_field" (optimized product state plus noise), "product" (one seeded
    #: direction on every site plus noise), "random", or "mixed" (alternating
    #: mean_field and random)
    init: str = "mean_field"
    #: rebuild the norm matrix at every solve and check it is the identity
    check_gauge: bool = False

    def __post_init__(self):
        if self.D < 1 or self.max_sweeps < 1 or self.restarts < 1 or not self.rel_tol > 0:
            raise ValueError(f"invalid solver configuration: {self}")
        if self.init not in INIT_KINDS:
            raise ValueError(f"unknown init {self.init!r}")

    def initial_state(self, h: Hamiltonian, profile: BondProfile, restart: int, seed: int):
        kind = self.init
        if kind == "mixed":
            kind = "mean_field" if restart % 2 == 0 else "random"
        if kind == "mean_field":
            dirs = mean_field_product(h, seed)
            return product_seeded_mps(h.n, h.d, profile, seed, directions=dirs)
        if kind == "product":
            return product_seeded_mps(h.n, h.d, profile, seed)
        return random_mps(h.n, h.d, profile, seed)


INIT_KINDS = ("mean_field", "product", "random", "mixed")


def mean_field_product(h: Hamiltonian, seed: int, tol: float = 1e-12) -> list:
    """Local vectors of a lowest-energy product state found from a seeded start.

    All sites are optimized together with L-BFGS, which removes long-wavelength
    twists that site-by-site updates relax only slowly.
    """
    n, d = h.n, h.d
    rows = [(t.site_a - 1, t.site_b - 1, c, a, b) for t in h.terms for c, a, b in t.summands if c]
    rng = np.random.default_rng(seed)
    x0 = rng.standard_normal(2 * n * d)

    def fun(x):
        v = (x[:n * d] + 1j * x[n * d:]).reshape(n, d)
        nrm2 = np.einsum("is,is->i", v.conj(), v).real
        u = v / np.sqrt(nrm2)[:, None]
        fields = np.zeros((n, d, d), dtype=DTYPE)
        e = 0.0
        for i, j, c, a, b in rows:
            ea = np.vdot(u[i], a @ u[i])
            eb = np.vdot(u[j], b @ u[j])
            e += (c * ea * eb).real
            fields[i] += c * eb * a
            fields[j] += c * ea * b
        hv = np.einsum("ist,it->is", fields, u)
        lam = np.einsum("is,is->i", u.conj(), hv).real
        g = 2 * (hv - lam[:, None] * u) / np.sqrt(nrm2)[:, None]
        return e, np.concatenate([g.real.ravel(), g.imag.ravel()])

    if not rows:
        x = x0
    else:
        x = optimize.minimize(fun, x0, jac=True, method="L-BFGS-B",
                              options={"gtol": tol, "ftol": tol, "maxiter": 5000}).x
    v = (x[:n * d] + 1j * x[n * d:]).reshape(n, d)
    return [row / np.linalg.norm(row) for row in v]


@dataclass
class SweepReport:
    energies_per_update: list = field(default_factory=list)
    sweeps_used: int = 0
    converged: bool = False
    restart_index: int = 0
    seed: int = 0
    #: per-update energies of every restart, best one included
    restart_updates: list = field(default_factory=list)
    restart_energies: list = field(default_factory=list)


class GaugeError(RuntimeError):
    """The state is not centered where an effective problem was requested."""


# -- compiled term list ---------------------------------------------------------

class _Terms:
    """Flattened non-zero summands ``(a, b, op_a id, op_b id, coef)`` with ``a < b`` (0-based)."""

    def __init__(self, h: Hamiltonian):
        self.n, self.d = h.n, h.d
        self.ops: list[np.ndarray] = []
        index: dict[bytes, int] = {}

        def op_id(o):
            key = np.ascontiguousarray(o, dtype=DTYPE).tobytes()
            if key not in index:
                index[key] = len(self.ops)
                self.ops.append(np.asarray(o, dtype=DTYPE))
            return index[key]

        rows = []
        for t in h.terms:
            a, b = t.site_a - 1, t.site_b - 1
            for c, oa, ob in t.summands:
                if c == 0:
                    continue
                if a < b:
                    rows.append((a, b, op_id(oa), op_id(ob), float(c)))
                else:
                    rows.append((b, a, op_id(ob), op_id(oa), float(c)))
        self.rows = rows
        n = self.n
        self.by_first = [[] for _ in range(n)]
        self.by_second = [[] for _ in range(n)]
        self.crossing = [[] for _ in range(n)]
        self.last_b: dict = {}
        self.first_a: dict = {}
        for r in rows:
            a, b, ia, ib, _ = r
            self.by_first[a].append(r)
            self.by_second[b].append(r)
            for i in range(a + 1, b):
                self.crossing[i].append(r)
            self.last_b[(a, ia)] = max(self.last_b.get((a, ia), -1), b)
            self.first_a[(b, ib)] = min(self.first_a.get((b, ib), n), a)


def _as_matrix(x, dim):
    return x * np.eye(dim, dtype=DTYPE) if np.isscalar(x) else x


def _accumulate(acc, x, dim):
    """Add a scalar-times-identity or a matrix onto ``acc`` (either kind)."""
    if acc is None:
        return x
    if np.isscalar(acc) and np.isscalar(x):
        return acc + x
    return _as_matrix(acc, dim) + _as_matrix(x, dim)


def _collapse(x):
    return complex(x[0, 0]) if not np.isscalar(x) and x.shape == (1, 1) else x


@dataclass
class _Block:
    """Environment at one boundary; ``closed`` and channel values are matrices or scalars."""

    closed: object
    chans: dict


def _grow_left(blk: _Block, a: np.ndarray, j: int, terms: _Terms) -> _Block:
    """Left block for boundary ``j + 1`` from the block at ``j`` and left-canonical site ``j``."""
    dr = a.shape[2]
    closed = blk.closed if np.isscalar(blk.closed) else transport_left(blk.closed, a)
    field_op = None
    mats: dict = {}
    for (pa, pb, ia, ib, c) in terms.by_second[j]:
        ch = blk.chans[(pa, ia)]
        o = c * terms.ops[ib]
        if np.isscalar(ch):
            field_op = ch * o if field_op is None else field_op + ch * o
        else:
            key = (pa, ia)
            mats[key] = o if key not in mats else mats[key] + o
    for key, o in mats.items():
        closed = _accumulate(closed, transport_left(blk.chans[key], a, o), dr)
    eye = None
    if field_op is not None:
        eye = np.eye(a.shape[0], dtype=DTYPE)
        closed = _accumulate(closed, transport_left(eye, a, field_op), dr)
    chans = {}
    for key, ch in blk.chans.items():
        if terms.last_b[key] > j:
            chans[key] = ch if np.isscalar(ch) else transport_left(ch, a)
    for (pa, pb, ia, ib, c) in terms.by_first[j]:
        key = (j, ia)
        if key not in chans:
            if eye is None:
                eye = np.eye(a.shape[0], dtype=DTYPE)
            chans[key] = transport_left(eye, a, terms.ops[ia])
    if dr == 1:
        closed = _collapse(closed)
        chans = {k: _collapse(v) for k, v in chans.items()}
    return _Block(closed, chans)


def _grow_right(blk: _Block, b: np.ndarray, j: int, terms: _Terms) -> _Block:
    """Right block for boundary ``j`` from the block at ``j + 1`` and right-canonical site ``j``."""
    dl = b.shape[0]
    closed = blk.closed if np.isscalar(blk.closed) else transport_right(blk.closed, b)
    field_op = None
    mats: dict = {}
    for (pa, pb, ia, ib, c) in terms.by_first[j]:
        ch = blk.chans[(pb, ib)]
        o = c * terms.ops[ia]
        if np.isscalar(ch):
            field_op = ch * o if field_op is None else field_op + ch * o
        else:
            key = (pb, ib)
            mats[key] = o if key not in mats else mats[key] + o
    for key, o in mats.items():
        closed = _accumulate(closed, transport_right(blk.chans[key], b, o), dl)
    eye = None
    if field_op is not None:
        eye = np.eye(b.shape[2], dtype=DTYPE)
        closed = _accumulate(closed, transport_right(eye, b, field_op), dl)
    chans = {}
    for key, ch in blk.chans.items():
        if terms.first_a[key] < j:
            chans[key] = ch if np.isscalar(ch) else transport_right(ch, b)
    for (pa, pb, ia, ib, c) in terms.by_second[j]:
        key = (j, ib)
        if key not in chans:
            if eye is None:
                eye = np.eye(b.shape[2], dtype=DTYPE)
            chans[key] = transport_right(eye, b, terms.ops[ib])
    if dl == 1:
        closed = _collapse(closed)
        chans = {k: _collapse(v) for k, v in chans.items()}
    return _Block(closed, chans)


def _edge_block() -> _Block:
    return _Block(0j, {})


class EnvironmentCache:
    """Left/right blocks for one Hamiltonian, valid for the current state's gauge.

    ``left[j]`` covers positions ``< j`` and ``right[j]`` positions ``>= j``.
    Entries are ``None`` until built; :meth:`invalidate` clears every block
    that depends on a changed site.
    """

    def __init__(self, h: Hamiltonian):
        self.terms = _Terms(h)
        n = h.n
        self.left: list = [None] * (n + 1)
        self.right: list = [None] * (n + 1)
        self.left[0] = _edge_block()
        self.right[n] = _edge_block()

    def invalidate(self, i: int) -> None:
        n = self.terms.n
        for j in range(i + 1, n + 1):
            self.left[j] = None
        for j in range(0, i + 1):
            self.right[j] = None
        self.left[0] = _edge_block()
        self.right[n] = _edge_block()

    def left_block(self, tensors, j: int) -> _Block:
        k = j
        while self.left[k] is None:
            k -= 1
        for p in range(k, j):
            self.left[p + 1] = _grow_left(self.left[p], tensors[p], p, self.terms)
        return self.left[j]

    def right_block(self, tensors, j: int) -> _Block:
        k = j
        while self.right[k] is None:
            k += 1
        for p in range(k - 1, j - 1, -1):
            self.right[p] = _grow_right(self.right[p + 1], tensors[p], p, self.terms)
        return self.right[j]


class EffectiveHamiltonian:
    """Quadratic form of the energy in the single tensor at position ``i``.

    Acts on vectors of shape ``(Dl, d, Dr)`` flattened in C order.
    """

    def __init__(self, left: _Block, right: _Block, i: int, shape, terms: _Terms):
        dl, d, dr = shape
        self.shape = shape
        self.const = 0.0 + 0.0j
        self.xl = None
        self.xr = None
        self.field = None
        left_local: dict = {}
        right_local: dict = {}
        cross: dict = {}

        def add_const(x):
            self.const += x

        if np.isscalar(left.closed):
            add_const(left.closed)
        else:
            self.xl = left.closed.copy()
        if np.isscalar(right.closed):
            add_const(right.closed)
        else:
            self.xr = right.closed.copy()

        def add_field(o):
            self.field = o.copy() if self.field is None else self.field + o

        for (pa, pb, ia, ib, c) in terms.by_second[i]:
            key = (pa, ia)
            ch = left.chans[key]
            o = c * terms.ops[ib]
            if np.isscalar(ch):
                add_field(ch * o)
            else:
                left_local[key] = o if key not in left_local else left_local[key] + o
        for (pa, pb, ia, ib, c) in terms.by_first[i]:
            key = (pb, ib)
            ch = right.chans[key]
            o = c * terms.ops[ia]
            if np.isscalar(ch):
                add_field(ch * o)
            else:
                right_local[key] = o if key not in right_local else right_local[key] + o
        for (pa, pb, ia, ib, c) in terms.crossing[i]:
            lk, rk = (pa, ia), (pb, ib)
            lch, rch = left.chans[lk], right.chans[rk]
            if np.isscalar(lch) and np.isscalar(rch):
                add_const(c * lch * rch)
            elif np.isscalar(rch):
                x = (c * rch) * lch
                self.xl = x if self.xl is None else self.xl + x
            elif np.isscalar(lch):
                x = (c * lch) * rch
                self.xr = x if self.xr is None else self.xr + x
            else:
                cross[lk] = c * rch if lk not in cross else cross[lk] + c * rch
        self.left_local = [(left.chans[k], o) for k, o in left_local.items()]
        self.right_local = [(o, right.chans[k]) for k, o in right_local.items()]
        self.cross = [(left.chans[k], r) for k, r in cross.items()]

    @property
    def dim(self) -> int:
        dl, d, dr = self.shape
        return dl * d * dr

    def apply(self, v: np.ndarray) -> np.ndarray:
        dl, d, dr = self.shape
        v = v.reshape(dl, d, dr)
        out = self.const * v
        if self.xl is not None:
            out = out + (self.xl @ v.reshape(dl, -1)).reshape(dl, d, dr)
        if self.xr is not None:
            out = out + (v.reshape(-1, dr) @ self.xr.T).reshape(dl, d, dr)
        if self.field is not None:
            out = out + self.field @ v
        for lm, o in self.left_local:
            out = out + o @ (lm @ v.reshape(dl, -1)).reshape(dl, d, dr)
        for o, rm in self.right_local:
            out = out + o @ (v.reshape(-1, dr) @ rm.T).reshape(dl, d, dr)
        for lm, rm in self.cross:
            out = out + ((lm @ v.reshape(dl, -1)).reshape(-1, dr) @ rm.T).reshape(dl, d, dr)
        return out.reshape(-1)

    def dense(self) -> np.ndarray:
        dl, d, dr = self.shape
        il, ip, ir = (np.eye(x, dtype=DTYPE) for x in (dl, d, dr))

        def k3(a, b, c):
            return np.kron(np.kron(a, b), c)

        h = self.const * np.eye(self.dim, dtype=DTYPE)
        if self.xl is not None:
            h += k3(self.xl, ip, ir)
        if self.xr is not None:
            h += k3(il, ip, self.xr)
        if self.field is not None:
            h += k3(il, self.field, ir)
        for lm, o in self.left_local:
            h += k3(lm, o, ir)
        for o, rm in self.right_local:
            h += k3(il, o, rm)
        for lm, rm in self.cross:
            h += k3(lm, ip, rm)
        return h


def _effective(m: MatrixProductState, i: int, cache: EnvironmentCache) -> EffectiveHamiltonian:
    if m.gauge_center != i:
        raise GaugeError(f"state is centered at {m.gauge_center}, not at site {i}")
    left = cache.left_block(m.tensors, i)
    right = cache.right_block(m.tensors, i + 1)
    return EffectiveHamiltonian(left, right, i, m.tensors[i].shape, cache.terms)


def effective_hamiltonian(m: MatrixProductState, h: Hamiltonian, i: int,
                          cache: Optional[EnvironmentCache] = None) -> np.ndarray:
    """Dense effective Hamiltonian at position ``i`` (0-based) of a state centered at ``i``."""
    cache = EnvironmentCache(h) if cache is None else cache
    return _effective(m, i, cache).dense()


def norm_matrix(m: MatrixProductState, i: int) -> np.ndarray:
    """Explicit normalization matrix at ``i``, computed without assuming any gauge."""
    nl = np.ones((1, 1), dtype=DTYPE)
    for t in m.tensors[:i]:
        nl = transport_left(nl, t)
    nr = np.ones((1, 1), dtype=DTYPE)
    for t in reversed(m.tensors[i + 1:]):
        nr = transport_right(nr, t)
    return np.kron(np.kron(nl, np.eye(m.d, dtype=DTYPE)), nr)


def _solve_site(m, i, cache, config):
    eff = _effective(m, i, cache)
    if config.check_gauge:
        nmat = norm_matrix(m, i)
        err = float(np.max(np.abs(nmat - np.eye(nmat.shape[0]))))
        if err > 1e-9:
            raise GaugeError(f"norm matrix at site {i} deviates from identity by {err:.3e}")
    try:
        if eff.dim <= config.dense_threshold:
            vals, vecs = hermitian_lowest(eff.dense(), 1, dense_threshold=config.dense_threshold)
        else:
            vals, vecs = lanczos_lowest(eff.apply, eff.dim, v0=m.tensors[i].reshape(-1),
                                        max_iter=config.max_krylov_iters)
    except EigensolverError as exc:
        raise EigensolverError(f"site {i}: {exc}") from exc
    return float(vals[0]), vecs[:, 0].reshape(m.tensors[i].shape)


def local_update(m: MatrixProductState, h: Hamiltonian, i: int,
                 cache: Optional[EnvironmentCache], config: SolverConfig,
                 direction: int = +1):
    """Replace site ``i`` by the lowest eigenvector of its effective Hamiltonian.

    The gauge center is then moved one step in ``direction`` (``+1``, ``-1``
    or ``0`` to stay) and the cache is refreshed for the new center.
    Returns ``(new_state, energy)``.
    """
    cache = EnvironmentCache(h) if cache is None else cache
    energy, t = _solve_site(m, i, cache, config)
    ts = list(m.tensors)
    ts[i] = t
    cache.invalidate(i)
    j = i
    if direction and 0 <= i + direction < m.n:
        move_center(ts, i, direction)
        j = i + direction
        if direction > 0:
            cache.left[j] = _grow_left(cache.left_block(ts, i), ts[i], i, cache.terms)
        else:
            cache.right[i] = _grow_right(cache.right_block(ts, i + 1), ts[i], i, cache.terms)
    return MatrixProductState(tuple(ts), m.d, j), energy


def sweep(m: MatrixProductState, h: Hamiltonian, config: SolverConfig,
          cache: Optional[EnvironmentCache] = None):
    """One left-to-right and one right-to-left pass of local updates.

    ``m`` must be centered at position 0.  Returns the state (centered at 0
    again) and the list of energies, one per update.
    """
    cache = EnvironmentCache(h) if cache is None else cache
    if m.gauge_center != 0:
        m = normalized(canonicalize(m, 0))
        cache.invalidate(0)
    energies = []
    n = m.n
    if n == 1:
        m, e = local_update(m, h, 0, cache, config, 0)
        return m, [e]
    for i in range(n - 1):
        m, e = local_update(m, h, i, cache, config, +1)
        energies.append(e)
    for i in range(n - 1, 0, -1):
        m, e = local_update(m, h, i, cache, config, -1)
        energies.append(e)
    return m, energies


def _run_restart(h, profile, config, restart, seed):
    m = config.initial_state(h, profile, restart, seed)
    m = normalized(canonicalize(m, 0))
    cache = EnvironmentCache(h)
    updates = []
    prev = None
    converged = False
    used = 0
    for used in range(1, config.max_sweeps + 1):
        m, es = sweep(m, h, config, cache)
        updates.extend(es)
        e = es[-1]
        if prev is not None and abs(prev - e) < config.rel_tol * max(1.0, abs(e)):
            converged = True
            break
        prev = e
    return m, updates, used, converged


def minimize(h: Hamiltonian, profile: BondProfile, config: SolverConfig):
    """Lowest energy over ``config.restarts`` seeded runs.

    Convergence means the energy at the end of consecutive sweeps changed by
    less than ``rel_tol * max(1, |E|)``.  The lowest converged restart wins;
    if none converged the lowest one is returned with ``converged=False``.

    Returns ``(energy, state, report)``.
    """
    if profile.n != h.n:
        raise ValueError(f"profile has {profile.n} sites, Hamiltonian {h.n}")
    profile = BondProfile(tuple(min(x, config.D) for x in profile.dims))
    runs = []
    for r in range(config.restarts):
        seed = config.base_seed + r
        m, updates, used, ok = _run_restart(h, profile, config, r, seed)
        runs.append((updates[-1], r, seed, m, updates, used, ok))
        log.debug("restart %d seed %d: E=%.12f sweeps=%d converged=%s",
                  r, seed, updates[-1], used, ok)
    pool = [x for x in runs if x[6]] or runs
    e, r, seed, m, updates, used, ok = min(pool, key=lambda x: (x[0], x[1]))
    report = SweepReport(updates, used, ok, r, seed,
                         [x[4] for x in runs], [x[0] for x in runs])
    if not ok:
        log.warning("no restart converged for %s; best E=%.12f", h.label, e)
    return e, m, report


def constrained_ground_energy(h: Hamiltonian, spec: PartitionSpec, config: SolverConfig):
    """Minimal energy over states separable with respect to ``spec``.

    Sites are reordered so each part is contiguous and the bonds between parts
    are set to one.  The returned state is in that MPS order.
    """
    if spec.n != h.n:
        raise ValueError(f"partition covers {spec.n} sites, Hamiltonian has {h.n}")
    pi = site_ordering(spec)
    hp = permute_hamiltonian(h, pi)
    return minimize(hp, bond_profile(spec, config.D), config)


def ground_energy(h: Hamiltonian, config: SolverConfig):
    """Unconstrained minimization (single-part partition)."""
    return constrained_ground_energy(h, PartitionSpec.whole(h.n), config)
