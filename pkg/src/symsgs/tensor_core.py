"""Dense 3x3 tensor algebra.

Every function accepts a single tensor of shape ``(3, 3)`` or a stack of
them with shape ``(..., 3, 3)`` and broadcasts over the leading axes, so the
same code path serves pointwise checks and whole-grid closure evaluation.

Velocity gradients use the convention ``grad[..., i, j] = du_i/dx_j``.
Units are by convention (1/time for gradients) and are not enforced.
"""
from __future__ import annotations

from typing import NamedTuple

import numpy as np

#: relative asymmetry accepted by :func:`as_sym` / :func:`as_skew` before rejecting
ASYMMETRY_TOL = 1e-12

IDENTITY = np.eye(3)


class TensorError(ValueError):
    """Raised for non-finite or structurally invalid tensor input."""


def as_tensor(a) -> np.ndarray:
    """Validate and return ``a`` as a float array of shape (..., 3, 3)."""
    arr = np.asarray(a, dtype=float)
    if arr.shape[-2:] != (3, 3):
        raise TensorError(f"expected trailing shape (3, 3), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        bad = np.argwhere(~np.isfinite(arr))[0]
        raise TensorError(f"non-finite tensor entry at index {tuple(bad)}")
    return arr


def _relative_defect(part: np.ndarray, whole: np.ndarray) -> float:
    scale = np.max(np.abs(whole)) if whole.size else 0.0
    if scale == 0.0:
        return 0.0
    return float(np.max(np.abs(part)) / scale)


def as_sym(a, tol: float = ASYMMETRY_TOL) -> np.ndarray:
    """Return an exactly symmetric copy of ``a``.

    Round-off asymmetry up to ``tol`` (relative to the largest entry) is
    projected away; anything larger is rejected because it usually means an
    upstream gradient bug.
    """
    arr = as_tensor(a)
    skew_part = 0.5 * (arr - transpose(arr))
    defect = _relative_defect(skew_part, arr)
    if defect > tol:
        raise TensorError(f"tensor is not symmetric (relative asymmetry {defect:.3e})")
    return 0.5 * (arr + transpose(arr))


def as_skew(a, tol: float = ASYMMETRY_TOL) -> np.ndarray:
    """Return an exactly antisymmetric copy of ``a`` (zero diagonal)."""
    arr = as_tensor(a)
    sym_part = 0.5 * (arr + transpose(arr))
    defect = _relative_defect(sym_part, arr)
    if defect > tol:
        raise TensorError(f"tensor is not antisymmetric (relative symmetry {defect:.3e})")
    return 0.5 * (arr - transpose(arr))


def transpose(a: np.ndarray) -> np.ndarray:
    return np.swapaxes(a, -1, -2)


def matmul(*factors: np.ndarray) -> np.ndarray:
    """Left-to-right product of any number of tensors."""
    out = factors[0]
    for f in factors[1:]:
        out = out @ f
    return out


def trace(a: np.ndarray) -> np.ndarray:
    return np.trace(a, axis1=-2, axis2=-1)


def sym(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + transpose(a))


def skew(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a - transpose(a))


def deviator(q: np.ndarray) -> np.ndarray:
    """Trace-free part ``q - tr(q)/3 * Id``."""
    q = np.asarray(q, dtype=float)
    return q - (trace(q) / 3.0)[..., None, None] * IDENTITY


def commutator(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """``[p, q] = pq - qp``."""
    return p @ q - q @ p


def inner(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Frobenius pairing ``tr(a^T b)``; equals ``tr(ab)`` when ``a`` is symmetric."""
    return np.einsum("...ij,...ij->...", a, b)


def frobenius_norm(a: np.ndarray) -> np.ndarray:
    return np.sqrt(inner(a, a))


def frobenius_norm_S(s: np.ndarray) -> np.ndarray:
    """``|S| = sqrt(tr(S^2))`` for symmetric ``S``."""
    return np.sqrt(np.maximum(trace(s @ s), 0.0))


class VelGradDecomposition(NamedTuple):
    grad: np.ndarray
    s: np.ndarray
    omega: np.ndarray


def decompose(grad) -> VelGradDecomposition:
    """Split a velocity gradient into strain rate and vorticity tensor.

    >>> d = decompose([[0, 1, 0], [0, 0, 0], [0, 0, 0]])
    >>> d.s[0, 1], d.omega[0, 1], d.omega[1, 0]
    (0.5, 0.5, -0.5)
    """
    g = as_tensor(grad)
    return VelGradDecomposition(g, sym(g), skew(g))


# Orthonormal basis (w.r.t. tr(AB)) of symmetric tensors: e_ii and
# (e_ij + e_ji)/sqrt(2).
def _symmetric_basis() -> np.ndarray:
    basis = []
    for i in range(3):
        e = np.zeros((3, 3))
        e[i, i] = 1.0
        basis.append(e)
    for i, j in ((0, 1), (0, 2), (1, 2)):
        e = np.zeros((3, 3))
        e[i, j] = e[j, i] = 1.0 / np.sqrt(2.0)
        basis.append(e)
    return np.array(basis)


def _deviatoric_basis() -> np.ndarray:
    d1 = np.diag([1.0, -1.0, 0.0]) / np.sqrt(2.0)
    d2 = np.diag([1.0, 1.0, -2.0]) / np.sqrt(6.0)
    return np.concatenate([np.array([d1, d2]), _symmetric_basis()[3:]])


SYM_BASIS = _symmetric_basis()
DEV_BASIS = _deviatoric_basis()
