"""Dense tensor primitives shared by the MPS code.

Tensors are plain ``numpy.ndarray`` objects of dtype ``complex128`` stored in
C order (last axis fastest).  The helpers here add the shape checking and the
eigensolver policy the rest of the package relies on.
"""
from __future__ import annotations

from typing import Callable, Sequence

import numpy as np
import scipy.linalg as la

DTYPE = np.complex128

#: effective problems up to this size are solved densely
DENSE_THRESHOLD = 512


class DimensionError(ValueError):
    """Raised when paired tensor axes do not have matching lengths."""


class FactorizationError(ArithmeticError):
    """Raised when an orthonormal split is requested for a zero tensor."""


class EigensolverError(ArithmeticError):
    """Raised for non-Hermitian input or a Krylov solve that did not converge."""


def as_tensor(data) -> np.ndarray:
    """Return ``data`` as a C-ordered complex128 array with at least one axis."""
    t = np.ascontiguousarray(data, dtype=DTYPE)
    if t.ndim == 0:
        t = t.reshape(1)
    if any(s < 1 for s in t.shape):
        raise DimensionError(f"axis lengths must be positive, got {t.shape}")
    return t


def contract(a: np.ndarray, axes_a: Sequence[int], b: np.ndarray,
             axes_b: Sequence[int]) -> np.ndarray:
    """Sum over paired axes of ``a`` and ``b``.

    The result carries the free axes of ``a`` followed by the free axes of
    ``b``.  Contracting every axis yields a one-element tensor.
    """
    axes_a = list(axes_a)
    axes_b = list(axes_b)
    if len(axes_a) != len(axes_b):
        raise DimensionError(
            f"axis lists differ in length: {axes_a} vs {axes_b}")
    for i, j in zip(axes_a, axes_b):
        if a.shape[i] != b.shape[j]:
            raise DimensionError(
                f"cannot pair axis {i} of shape {a.shape} with axis {j} "
                f"of shape {b.shape}")
    return as_tensor(np.tensordot(a, b, axes=(axes_a, axes_b)))


def permute_axes(a: np.ndarray, perm: Sequence[int]) -> np.ndarray:
    perm = list(perm)
    if len(perm) != a.ndim or sorted(perm) != list(range(a.ndim)):
        raise DimensionError(
            f"{perm} is not a permutation of the {a.ndim} axes of {a.shape}")
    return np.ascontiguousarray(np.transpose(a, perm))


def split_orthonormal(a: np.ndarray, left_axes: Sequence[int]):
    """Thin QR split of ``a`` grouped as (left_axes | remaining axes).

    Returns ``q`` with shape ``left_shape + (k,)`` whose grouped matrix has
    orthonormal columns, and ``r`` with shape ``(k,) + right_shape`` such that
    contracting the last axis of ``q`` with the first axis of ``r`` gives back
    ``a`` with its axes ordered left-then-right.  The diagonal of ``r`` is made
    real and non-negative so the split is unique for full-rank input.
    """
    left_axes = list(left_axes)
    right_axes = [i for i in range(a.ndim) if i not in left_axes]
    t = permute_axes(a, left_axes + right_axes)
    lshape = t.shape[:len(left_axes)]
    rshape = t.shape[len(left_axes):]
    mat = t.reshape(int(np.prod(lshape)), int(np.prod(rshape)))
    if not np.any(mat):
        raise FactorizationError("cannot orthonormalize a zero tensor")
    q, r = np.linalg.qr(mat)
    diag = np.diagonal(r)
    phase = np.where(np.abs(diag) > 0, diag / np.where(diag == 0, 1, np.abs(diag)), 1)
    q = q * phase[None, :]
    r = phase.conj()[:, None] * r
    k = q.shape[1]
    return q.reshape(lshape + (k,)), r.reshape((k,) + rshape)


def _check_hermitian(m: np.ndarray) -> float:
    scale = np.linalg.norm(m)
    if np.linalg.norm(m - m.conj().T) > 1e-10 * max(scale, 1e-300):
        raise EigensolverError("matrix is not Hermitian within tolerance")
    return scale


def _eigh(m: np.ndarray, count=None):
    # LAPACK's divide-and-conquer driver (numpy's default) occasionally fails
    # on nearly diagonal input; use the relatively robust driver, then plain QR.
    subset = None if count is None else [0, count - 1]
    try:
        return la.eigh(m, subset_by_index=subset, driver="evr", check_finite=False)
    except la.LinAlgError:
        w, v = la.eigh(m, driver="ev", check_finite=False)
        return (w, v) if count is None else (w[:count], v[:, :count])


def dense_lowest(m: np.ndarray, count: int = 1):
    """Lowest ``count`` eigenpairs of a Hermitian matrix by a full dense solve."""
    return _eigh(m, count)


def hermitian_lowest(m: np.ndarray, count: int = 1, *, v0=None,
                     dense_threshold: int = DENSE_THRESHOLD,
                     max_iter: int = 400):
    """Lowest ``count`` eigenpairs of a Hermitian matrix.

    Matrices up to ``dense_threshold`` rows use a full dense solve; larger ones
    go through :func:`lanczos_lowest` with ``m @ v`` as the operator.

    Returns
    -------
    values : ndarray of shape (count,), ascending
    vectors : ndarray of shape (dim, count), unit columns
    """
    m = np.asarray(m, dtype=DTYPE)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionError(f"expected a square matrix, got {m.shape}")
    dim = m.shape[0]
    if not 1 <= count <= dim:
        raise ValueError(f"count must lie in [1, {dim}], got {count}")
    _check_hermitian(m)
    if dim <= dense_threshold:
        return dense_lowest(0.5 * (m + m.conj().T), count)
    return lanczos_lowest(m.dot, dim, count=count, v0=v0, max_iter=max_iter)


def lanczos_lowest(matvec: Callable[[np.ndarray], np.ndarray], dim: int, *,
                   count: int = 1, v0=None, tol: float = 1e-9,
                   krylov_dim: int = 40, max_iter: int = 400, seed: int = 0):
    """Thick-restart Lanczos with full reorthogonalization.

    ``matvec`` must apply a Hermitian operator to a vector of length ``dim``.
    Convergence is declared when every wanted Ritz pair has residual below
    ``tol`` times the largest Ritz value magnitude seen (a lower bound on the
    operator norm).  ``max_iter`` counts operator applications.
    """
    if not 1 <= count <= dim:
        raise ValueError(f"count must lie in [1, {dim}], got {count}")
    krylov_dim = min(max(krylov_dim, count + 2), dim)
    if v0 is None or not np.any(v0):
        rng = np.random.default_rng(seed)
        v0 = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    v = np.asarray(v0, dtype=DTYPE).ravel()

    basis = np.empty((krylov_dim, dim), dtype=DTYPE)
    images = np.empty((krylov_dim, dim), dtype=DTYPE)
    proj = np.zeros((krylov_dim, krylov_dim), dtype=DTYPE)
    k = 0
    applied = 0
    scale = 0.0
    while True:
        # two Gram-Schmidt passes keep the basis orthonormal to rounding
        for _ in range(2):
            if k:
                v = v - basis[:k].T @ (basis[:k].conj() @ v)
        nv = np.linalg.norm(v)
        if nv < 1e-14 * max(scale, 1.0) and k < min(count, dim):
            # invariant subspace found early; continue from a fresh vector
            rng = np.random.default_rng(seed + k + applied + 1)
            v = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
            continue
        exhausted = nv < 1e-14 * max(scale, 1.0)
        if not exhausted:
            basis[k] = v / nv
            images[k] = matvec(basis[k])
            applied += 1
            col = basis[:k + 1].conj() @ images[k]
            proj[:k + 1, k] = col
            proj[k, :k + 1] = col.conj()
            k += 1
        if k < count:
            v = images[k - 1]
            continue
        theta, y = _eigh(proj[:k, :k])
        scale = max(scale, float(np.max(np.abs(theta))))
        yw = y[:, :count].T
        ritz = yw @ basis[:k]
        resid = yw @ images[:k] - theta[:count, None] * ritz
        rnorm = np.linalg.norm(resid, axis=1)
        if np.all(rnorm <= tol * max(scale, 1e-300)) or k == dim or exhausted:
            vecs = ritz.T
            vecs = vecs / np.linalg.norm(vecs, axis=0)
            return theta[:count], vecs
        if applied >= max_iter:
            raise EigensolverError(
                f"Lanczos did not converge after {applied} operator "
                f"applications (residual {rnorm.max():.3e})")
        if k < krylov_dim:
            v = images[k - 1]
            continue
        keep = min(count + 4, k - 1)
        yk = y[:, :keep].T
        basis[:keep] = yk @ basis[:k]
        images[:keep] = yk @ images[:k]
        proj[:] = 0
        proj[:keep, :keep] = np.diag(theta[:keep])
        v = resid[int(np.argmax(rnorm))]
        k = keep
