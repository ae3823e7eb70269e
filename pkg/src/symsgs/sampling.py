"""Random probe states used by the verification routines."""
from __future__ import annotations

import numpy as np
from scipy.spatial.transform import Rotation

from .tensor_core import DEV_BASIS, frobenius_norm, skew, sym


def rng_from(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def random_deviators(n: int, seed=None) -> np.ndarray:
    """Unit-norm trace-free symmetric tensors, uniform on the unit sphere.

    Five i.i.d. normal coordinates in an orthonormal deviatoric basis give a
    rotation-invariant distribution.
    """
    rng = rng_from(seed)
    coords = rng.standard_normal((n, 5))
    coords /= np.linalg.norm(coords, axis=1, keepdims=True)
    return np.einsum("na,aij->nij", coords, DEV_BASIS)


def random_skews(n: int, seed=None) -> np.ndarray:
    """Unit-Frobenius-norm antisymmetric tensors."""
    rng = rng_from(seed)
    w = skew(rng.standard_normal((n, 3, 3)))
    return w / frobenius_norm(w)[:, None, None]


def random_rotations(n: int, seed=None) -> np.ndarray:
    rng = rng_from(seed)
    return Rotation.random(n, random_state=rng).as_matrix()


def random_states(n: int, seed=None, *, trace_free: bool = True,
                  omega_ratio: tuple[float, float] | None = None):
    """Random ``(S, Omega)`` pairs.

    By default the pair is drawn from a normal velocity gradient made
    trace-free and scaled so that ``|grad u| = 1``.  With ``omega_ratio`` the
    ratio ``|Omega|/|S|`` is drawn log-uniformly from the given interval and
    ``|S| = 1``, which reaches strongly rotation-dominated states.
    """
    rng = rng_from(seed)
    if omega_ratio is None:
        g = rng.standard_normal((n, 3, 3))
        if trace_free:
            g -= (np.trace(g, axis1=1, axis2=2) / 3.0)[:, None, None] * np.eye(3)
        g /= frobenius_norm(g)[:, None, None]
        return sym(g), skew(g)
    s = random_deviators(n, rng)
    if not trace_free:
        s = s + rng.standard_normal(n)[:, None, None] * np.eye(3) / np.sqrt(3.0)
        s /= frobenius_norm(s)[:, None, None]
    lo, hi = np.log(omega_ratio[0]), np.log(omega_ratio[1])
    ratio = np.exp(rng.uniform(lo, hi, n))
    w = random_skews(n, rng) * ratio[:, None, None]
    return s, w
