"""Small dense linear-algebra helpers."""

from __future__ import annotations

import numpy as np
import scipy.linalg as sla


def _blocks(values: np.ndarray, rtol: float) -> list[np.ndarray]:
    """Index groups of (sorted-descending) values equal within ``rtol``."""
    groups, cur = [], [0]
    scale = max(float(values[0]), 1e-300)
    for i in range(1, len(values)):
        if abs(values[i] - values[cur[-1]]) <= rtol * scale:
            cur.append(i)
        else:
            groups.append(np.array(cur))
            cur = [i]
    groups.append(np.array(cur))
    return groups


def takagi(A: np.ndarray, rtol: float = 1e-10) -> tuple[np.ndarray, np.ndarray]:
    """Takagi factorization A = W diag(s) W^T of a complex symmetric matrix.

    Returns (s, W) with s >= 0 descending and W unitary.  Built from the SVD
    A = U S V^H: symmetry forces Z = U^H conj(V) to be a symmetric unitary
    that commutes with S, and with Y = sqrtm(Z) taken block by block over
    equal singular values, W = U Y.  A 1x1 input uses the scalar square root.
    """
    A = np.asarray(A, dtype=complex)
    n = A.shape[0]
    if n == 1:
        a = A[0, 0]
        s = abs(a)
        w = np.sqrt(a / s) if s > 0 else 1.0 + 0j
        return np.array([s]), np.array([[w]])
    U, s, Vh = np.linalg.svd(A)
    Z = U.conj().T @ Vh.T
    Y = np.zeros_like(Z)
    for idx in _blocks(s, rtol):
        blk = Z[np.ix_(idx, idx)]
        if len(idx) == 1:
            Y[idx[0], idx[0]] = np.sqrt(blk[0, 0])
        else:
            blk = 0.5 * (blk + blk.T)
            Y[np.ix_(idx, idx)] = sla.sqrtm(blk)
    return s, U @ Y


def symmetric_sqrt_factor(A: np.ndarray) -> np.ndarray:
    """S with A = S^T S, from the Takagi factorization (S = diag(sqrt s) W^T)."""
    s, W = takagi(A)
    return np.sqrt(s)[:, None] * W.T
