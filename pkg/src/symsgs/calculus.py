"""Closed-form S-derivatives of the invariants and finite-difference oracles.

Derivatives with respect to a symmetric ``S`` are taken in the sense of the
pairing ``<B, H> = tr(BH)`` over symmetric ``H``: ``B`` is the unique
symmetric tensor with ``f(S + H) = f(S) + tr(BH) + o(H)``.  With this
convention ``dI1/dS = 2S`` holds literally and off-diagonal components need
no factor-of-two bookkeeping.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import invariants as inv_mod
from .tensor_core import DEV_BASIS, SYM_BASIS, frobenius_norm, frobenius_norm_S, inner, transpose


def grad_I1(s):
    return 2.0 * np.asarray(s, dtype=float)


def grad_I2(s):
    s = np.asarray(s, dtype=float)
    return 3.0 * (s @ s)


def grad_B1(s, omega):
    w2 = omega @ omega
    return s @ w2 + w2 @ s


def grad_B2(s=None, omega=None):
    shape = np.shape(s)[:-2] if s is not None else ()
    return np.zeros(shape + (3, 3))


def grad_B3(omega, s=None):
    return omega @ omega


def grad_B4(s, omega):
    """Symmetric part of ``C = S W^2 S W + W^2 S W S + W S^2 W^2``.

    Symmetrizing the assembled ``C`` keeps the result exactly symmetric in
    floating point.
    """
    s = np.asarray(s, dtype=float)
    w = np.asarray(omega, dtype=float)
    w2 = w @ w
    c = s @ w2 @ s @ w + w2 @ s @ w @ s + w @ s @ s @ w2
    return 0.5 * (c + transpose(c))


#: name -> (invariant as function of (s, omega), closed-form gradient as function of (s, omega))
INVARIANT_GRADIENTS: dict[str, tuple[Callable, Callable]] = {
    "I1": (lambda s, w: inv_mod.primitive_invariants(s, w).i1, lambda s, w: grad_I1(s)),
    "I2": (lambda s, w: inv_mod.primitive_invariants(s, w).i2, lambda s, w: grad_I2(s)),
    "B1": (lambda s, w: inv_mod.primitive_invariants(s, w).b1, grad_B1),
    "B2": (lambda s, w: inv_mod.primitive_invariants(s, w).b2, grad_B2),
    "B3": (lambda s, w: inv_mod.primitive_invariants(s, w).b3, lambda s, w: grad_B3(w)),
    "B4": (lambda s, w: inv_mod.primitive_invariants(s, w).b4, grad_B4),
}


@dataclass(frozen=True)
class SymDirection:
    h: np.ndarray
    step: float

    def __post_init__(self):
        if not self.step > 0:
            raise ValueError("step must be positive")
        h = np.asarray(self.h, dtype=float)
        if not np.allclose(h, transpose(h), rtol=0, atol=1e-14 * max(1.0, np.abs(h).max())):
            raise ValueError("direction must be symmetric")


def default_step(s, reference_scale: float = 1.0, rel: float = 1e-5):
    """``rel * max(|S|, reference_scale)``, broadcast over a stack of states."""
    return rel * np.maximum(frobenius_norm_S(np.asarray(s, dtype=float)), reference_scale)


def fd_directional(f: Callable, s, direction: SymDirection):
    """Central difference ``(f(s + t h) - f(s - t h)) / (2 t)``.

    ``f`` may be vectorized over a leading stack of states, in which case
    ``s`` and ``direction.h`` broadcast together.
    """
    s = np.asarray(s, dtype=float)
    h = np.asarray(direction.h, dtype=float)
    t = direction.step
    fp = np.asarray(f(s + t * h))
    fm = np.asarray(f(s - t * h))
    if not (np.all(np.isfinite(fp)) and np.all(np.isfinite(fm))):
        raise FloatingPointError("non-finite function value in finite-difference stencil")
    return (fp - fm) / (2.0 * t)


@dataclass(frozen=True)
class GradCheck:
    name: str
    max_rel_error: float
    states: int

    def passed(self, tol: float) -> bool:
        return self.max_rel_error <= tol


def gradient_check(name: str, s, omega, *, rel_step: float = 1e-5,
                   reference_scale: float = 1.0) -> GradCheck:
    """Compare a closed-form invariant gradient with central differences.

    Every state is probed along all six orthonormal symmetric directions.
    The error in direction ``E`` is ``|fd - tr(G E)| / max(|G|, tiny)``, i.e.
    relative to the gradient magnitude so that near-zero directional
    derivatives do not inflate it.
    """
    f, g = INVARIANT_GRADIENTS[name]
    s = np.asarray(s, dtype=float)
    omega = np.asarray(omega, dtype=float)
    batch = s.reshape(-1, 3, 3)
    wb = omega.reshape(-1, 3, 3)
    grad = g(batch, wb)
    # rel_step * max(|S|, ref) per state, shared across the six directions
    steps = default_step(batch, reference_scale, rel_step)
    gnorm = frobenius_norm(grad)
    scale = np.maximum(gnorm, 1e-300)
    worst = np.zeros(len(batch))
    for e in SYM_BASIS:
        t = steps[:, None, None]
        fd = (f(batch + t * e, wb) - f(batch - t * e, wb)) / (2.0 * steps)
        exact = inner(grad, e)
        err = np.abs(fd - exact)
        # a gradient that is exactly zero must give an exactly zero difference quotient
        err = np.where(gnorm == 0.0, err, err / scale)
        worst = np.maximum(worst, err)
    return GradCheck(name, float(worst.max()), len(batch))


@dataclass(frozen=True)
class HessianSymmetryReport:
    matrix: np.ndarray
    asymmetry: float
    basis: str
    step: float

    def passed(self, tol: float) -> bool:
        return self.asymmetry <= tol


def _tau_callable(model):
    if hasattr(model, "tau"):
        return model.tau
    return model


def tangent_matrix(model, s, omega, *, basis: str = "deviatoric", rel_step: float = 1e-5,
                   reference_scale: float = 1.0) -> tuple[np.ndarray, float]:
    """Matrix of ``H -> D_S tau^d[H]`` in an orthonormal basis, by central differences."""
    tau = _tau_callable(model)
    e = {"deviatoric": DEV_BASIS, "symmetric": SYM_BASIS}[basis]
    s = np.asarray(s, dtype=float)
    omega = np.asarray(omega, dtype=float)
    step = float(default_step(s, reference_scale, rel_step))
    stencil = np.concatenate([s + step * e, s - step * e])
    try:
        vals = tau(stencil, np.broadcast_to(omega, stencil.shape))
    except ArithmeticError as exc:
        raise ArithmeticError(f"closure evaluation failed near S={s.tolist()}, W={omega.tolist()}: {exc}") from exc
    k = len(e)
    dtau = (vals[:k] - vals[k:]) / (2.0 * step)
    # M[a, b] = <E_a, D tau[E_b]>
    m = np.einsum("aij,bij->ab", e, dtau)
    return m, step


def hessian_symmetry_check(model, s, omega, *, basis: str = "deviatoric",
                           rel_step: float = 1e-5, reference_scale: float = 1.0) -> HessianSymmetryReport:
    """Self-adjointness of the S-tangent map of a closure.

    A closure is the (deviatoric) S-gradient of a scalar potential exactly
    when this map is symmetric.  With ``basis="deviatoric"`` the test runs on
    the 5-dimensional trace-free subspace, which is where incompressible
    states live and where the projected-gradient form is a true gradient.
    """
    m, step = tangent_matrix(model, s, omega, basis=basis, rel_step=rel_step,
                             reference_scale=reference_scale)
    denom = np.linalg.norm(m)
    asym = float(np.linalg.norm(m - m.T) / denom) if denom > 0 else 0.0
    return HessianSymmetryReport(m, asym, basis, step)
