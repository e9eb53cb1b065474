"""Dense tensor algebra.

Tensors are plain ``numpy.ndarray`` objects in C order (last index varying
fastest).  Mode indices are 0-based throughout the Python API.

Matricization follows the convention in which the column index of entry
``(i_1, ..., i_d)`` in ``M_z(T)`` runs over the remaining modes with the
*first* remaining index varying fastest, i.e. (1-based)

    j = 1 + sum_{l != z} (i_l - 1) prod_{m < l, m != z} n_m .
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from hoclust.errors import (
    ConvergenceError,
    DegenerateInputError,
    ModeIndexError,
    ParameterError,
    ShapeError,
    SliceError,
)


def as_tensor(T, min_order: int = 1) -> np.ndarray:
    T = np.asarray(T, dtype=float)
    if T.ndim < min_order:
        raise ShapeError(f"expected a tensor of order >= {min_order}, got order {T.ndim}")
    if T.size == 0:
        raise ShapeError("tensor dimensions must be positive")
    return T


def _check_mode(T: np.ndarray, z: int) -> int:
    z = int(z)
    if not 0 <= z < T.ndim:
        raise ModeIndexError(f"mode {z} out of range for an order-{T.ndim} tensor")
    return z


def matricize(T, z: int) -> np.ndarray:
    """Mode-``z`` unfolding, shape ``(n_z, prod_{j != z} n_j)``."""
    T = as_tensor(T)
    z = _check_mode(T, z)
    return np.moveaxis(T, z, 0).reshape(T.shape[z], -1, order="F")


def dematricize(M, z: int, dims) -> np.ndarray:
    """Inverse of :func:`matricize` for a tensor of shape ``dims``."""
    M = np.asarray(M, dtype=float)
    dims = tuple(int(n) for n in dims)
    if not 0 <= z < len(dims):
        raise ModeIndexError(f"mode {z} out of range for order {len(dims)}")
    rest = dims[:z] + dims[z + 1 :]
    if M.shape != (dims[z], int(np.prod(rest, dtype=np.int64))):
        raise ShapeError(f"matrix of shape {M.shape} does not unfold a tensor of shape {dims}")
    T = M.reshape((dims[z],) + rest, order="F")
    return np.ascontiguousarray(np.moveaxis(T, 0, z))


def mode_product(T, U, z: int) -> np.ndarray:
    """``T x_z U``: contract mode ``z`` of ``T`` with the columns of ``U``.

    A 1-d ``U`` is treated as a row vector, so the result keeps mode ``z``
    with size one.
    """
    T = as_tensor(T)
    z = _check_mode(T, z)
    U = np.asarray(U, dtype=float)
    if U.ndim == 1:
        U = U[None, :]
    if U.ndim != 2 or U.shape[1] != T.shape[z]:
        raise ShapeError(f"matrix with {U.shape[-1]} columns cannot act on mode {z} of size {T.shape[z]}")
    out = np.tensordot(U, T, axes=([1], [z]))
    return np.ascontiguousarray(np.moveaxis(out, 0, z))


def contract_all(T, vectors, skip: int | None = None) -> np.ndarray | float:
    """Contract every mode except ``skip`` with the given vectors.

    Returns a scalar when ``skip`` is None, otherwise a vector of length
    ``n_skip``.  ``vectors[skip]`` is ignored.
    """
    T = as_tensor(T)
    if len(vectors) != T.ndim:
        raise ShapeError("need one vector per mode")
    out = T
    # contract from the last mode so the remaining axis positions stay valid
    for z in range(T.ndim - 1, -1, -1):
        if z == skip:
            continue
        v = np.asarray(vectors[z], dtype=float)
        if v.shape != (T.shape[z],):
            raise ShapeError(f"vector for mode {z} has shape {v.shape}, expected ({T.shape[z]},)")
        out = np.tensordot(out, v, axes=([z], [0]))
    return float(out) if skip is None else np.asarray(out)


def outer_product(*vectors) -> np.ndarray:
    if not vectors:
        raise ParameterError("need at least one vector")
    vs = [np.asarray(v, dtype=float).ravel() for v in vectors]
    if any(v.size == 0 for v in vs):
        raise ParameterError("outer product of an empty vector")
    out = vs[0]
    for v in vs[1:]:
        out = np.multiply.outer(out, v)
    return out


@dataclass(frozen=True)
class SingularTriple:
    left: np.ndarray
    right: np.ndarray
    value: float


def _first_nonzero_sign(x: np.ndarray) -> float:
    big = np.abs(x) > 1e-12 * np.max(np.abs(x))
    idx = int(np.argmax(big))
    return 1.0 if x[idx] >= 0 else -1.0


def top_singular_triple(M, tol: float = 1e-10, max_iter: int = 10_000) -> SingularTriple:
    """Leading singular triple by power iteration on the smaller Gram matrix.

    The start vector is the normalized all-ones vector perturbed by
    alternating ``+-1e-6``.  The iteration operator is squared after every
    step (``x_t`` is proportional to ``G^(2^t - 1) x_0``), which resolves
    nearly tied leading values in a few dozen steps.  Convergence means
    ``||M right - value left|| <= tol * value``.  The left vector is signed
    so its first nonzero coordinate is positive.
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.size == 0:
        raise ShapeError("expected a nonempty matrix")
    if tol <= 0:
        raise ParameterError("tol must be positive")
    if not np.any(M):
        raise DegenerateInputError("all-zero matrix has no leading singular direction")
    # scale out the magnitude so tolerances are relative
    scale = np.max(np.abs(M))
    A = M / scale
    transposed = A.shape[0] > A.shape[1]
    if transposed:
        A = A.T
    G = A @ A.T
    m = G.shape[0]
    x = np.ones(m) + 1e-6 * np.where(np.arange(m) % 2 == 0, 1.0, -1.0)
    x /= np.linalg.norm(x)
    P = G / np.linalg.norm(G)
    restarted = False
    u = x
    for _ in range(max_iter):
        y = P @ x
        ny = np.linalg.norm(y)
        if ny <= 1e-14 * np.linalg.norm(P):
            if restarted:
                raise DegenerateInputError("power iteration collapsed to zero")
            # start vector orthogonal to the leading space: fixed fallback
            x = np.random.default_rng(0x5EED).standard_normal(m)
            x /= np.linalg.norm(x)
            P = G / np.linalg.norm(G)
            restarted = True
            continue
        u = y / ny
        w = A.T @ u
        sigma = np.linalg.norm(w)
        if sigma > 0:
            resid = np.linalg.norm(A @ (w / sigma) - sigma * u)
            if resid <= tol * sigma:
                return _finish(u, w / sigma, sigma * scale, transposed)
        x = u
        P = P @ P
        P = (P + P.T) / (2 * np.linalg.norm(P))
    w = A.T @ u
    sigma = np.linalg.norm(w)
    last = _finish(u, w / sigma if sigma > 0 else w, sigma * scale, transposed)
    raise ConvergenceError(f"power method did not converge in {max_iter} iterations", last=last)


def _finish(u, v, sigma, transposed) -> SingularTriple:
    left, right = (v, u) if transposed else (u, v)
    s = _first_nonzero_sign(left)
    return SingularTriple(left=s * left, right=s * right, value=float(sigma))


def fix_two_modes(T, k1: int, k2: int, j1: int, j2: int) -> np.ndarray:
    """Subtensor with mode ``k1`` fixed at ``j1`` and mode ``k2`` at ``j2``.

    For an order-2 input the result is a 1-element array.
    """
    T = as_tensor(T, 2)
    k1 = _check_mode(T, k1)
    k2 = _check_mode(T, k2)
    if k1 >= k2:
        raise ModeIndexError("need k1 < k2")
    if not (0 <= j1 < T.shape[k1] and 0 <= j2 < T.shape[k2]):
        raise SliceError(f"slice ({j1}, {j2}) out of range for modes ({k1}, {k2})")
    idx = [slice(None)] * T.ndim
    idx[k1] = j1
    idx[k2] = j2
    out = np.array(T[tuple(idx)])
    return out.reshape(1) if out.ndim == 0 else out


@dataclass(frozen=True)
class Aggregate:
    sum: float
    hs_norm: float
    max_abs: float
    argmax_abs: tuple[int, ...]


def aggregate(T) -> Aggregate:
    T = as_tensor(T)
    a = np.abs(T)
    flat = int(np.argmax(a))
    return Aggregate(
        sum=float(T.sum()),
        hs_norm=float(np.sqrt(np.sum(T * T))),
        max_abs=float(a.flat[flat]),
        argmax_abs=tuple(int(i) for i in np.unravel_index(flat, T.shape)),
    )


def sin_theta(u, v) -> float:
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    c = float(u @ v) / (np.linalg.norm(u) * np.linalg.norm(v))
    return float(np.sqrt(max(0.0, 1.0 - c * c)))
