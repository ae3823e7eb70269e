"""Scalar invariants of a strain-rate / vorticity pair.

Primitive invariants (units are powers of 1/time)::

    I1 = tr(S^2)      I2 = tr(S^3)     B1 = tr(S^2 W^2)
    B2 = tr(W^2)      B3 = tr(S W^2)   B4 = tr(S^2 W^2 S W)

and their scale-free versions ``v1 = I2/|S|^3``, ``v2 = B1/|S|^4``,
``v3 = B2/|S|^2``, ``v4 = B3/|S|^3``, ``v5 = B4/|S|^6``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import minimize

from .sampling import rng_from
from .tensor_core import DEV_BASIS, trace

PRIMITIVE_NAMES = ("i1", "i2", "b1", "b2", "b3", "b4")
SCALED_NAMES = ("v1", "v2", "v3", "v4", "v5")
# degree of homogeneity in |S| used to scale each primitive invariant into a v
SCALED_DEGREES = {"v1": ("i2", 3), "v2": ("b1", 4), "v3": ("b2", 2), "v4": ("b3", 3), "v5": ("b4", 6)}

#: sup of |tr(S^3)| over unit trace-free symmetric S, attained at diag(2,-1,-1)/sqrt(6)
V1_SUPREMUM = 1.0 / math.sqrt(6.0)
#: the two constants quoted for the v1 bound in the source material
V1_QUOTED_BOUNDS = {"remark": 1.0 / (3.0 * math.sqrt(6.0)), "positivity_theorem": 1.0 / math.sqrt(6.0)}


class SingularStateError(ArithmeticError):
    """Raised when a scale-free quantity is requested at (or near) S = 0."""


@dataclass(frozen=True)
class SingularityPolicy:
    """How to treat ``|S| -> 0`` when dividing by powers of ``|S|``.

    ``mode="error"`` raises below ``threshold * reference_scale``.
    ``mode="regularize"`` replaces ``|S|`` with ``sqrt(|S|^2 + eps^2)`` where
    ``eps = rel_eps * reference_scale``.
    """

    mode: str = "error"
    reference_scale: float = 1.0
    threshold: float = 1e-12
    rel_eps: float = 1e-12

    def __post_init__(self):
        if self.mode not in ("error", "regularize"):
            raise ValueError(f"unknown singularity mode {self.mode!r}")
        if self.reference_scale <= 0:
            raise ValueError("reference_scale must be positive")

    @classmethod
    def regularized(cls, eps: float, reference_scale: float = 1.0) -> "SingularityPolicy":
        return cls(mode="regularize", reference_scale=reference_scale, rel_eps=eps / reference_scale)

    @property
    def eps(self) -> float:
        return self.rel_eps * self.reference_scale

    def to_dict(self) -> dict:
        return {"mode": self.mode, "reference_scale": self.reference_scale,
                "threshold": self.threshold, "rel_eps": self.rel_eps}


ERROR_POLICY = SingularityPolicy()


@dataclass(frozen=True)
class InvariantSet:
    i1: np.ndarray
    i2: np.ndarray
    b1: np.ndarray
    b2: np.ndarray
    b3: np.ndarray
    b4: np.ndarray
    s_norm: np.ndarray
    v1: np.ndarray | None = None
    v2: np.ndarray | None = None
    v3: np.ndarray | None = None
    v4: np.ndarray | None = None
    v5: np.ndarray | None = None

    @property
    def primitive(self) -> tuple:
        return tuple(getattr(self, k) for k in PRIMITIVE_NAMES)

    @property
    def scaled(self) -> tuple:
        return tuple(getattr(self, k) for k in SCALED_NAMES)

    @property
    def has_scaled(self) -> bool:
        return self.v1 is not None

    def as_dict(self) -> dict:
        out = {k: getattr(self, k) for k in PRIMITIVE_NAMES}
        if self.has_scaled:
            out.update({k: getattr(self, k) for k in SCALED_NAMES})
        return out


def primitive_invariants(s, omega) -> InvariantSet:
    s = np.asarray(s, dtype=float)
    omega = np.asarray(omega, dtype=float)
    s2 = s @ s
    w2 = omega @ omega
    i1 = trace(s2)
    return InvariantSet(
        i1=i1,
        i2=trace(s2 @ s),
        b1=trace(s2 @ w2),
        b2=trace(w2),
        b3=trace(s @ w2),
        # left-to-right, no reassociation
        b4=trace(s @ s @ omega @ omega @ s @ omega),
        s_norm=np.sqrt(np.maximum(i1, 0.0)),
    )


def effective_norm(s_norm, policy: SingularityPolicy = ERROR_POLICY, inv: InvariantSet | None = None):
    """``|S|`` as used in denominators, after applying ``policy``."""
    s_norm = np.asarray(s_norm, dtype=float)
    if policy.mode == "regularize":
        return np.sqrt(s_norm**2 + policy.eps**2)
    cutoff = policy.threshold * policy.reference_scale
    bad = s_norm < cutoff
    if np.any(bad):
        idx = tuple(np.argwhere(np.atleast_1d(bad))[0])
        diverging = "all v"
        if inv is not None:
            diverging = ", ".join(
                f"{v} ({p}={np.atleast_1d(getattr(inv, p))[idx]:.3g})"
                for v, (p, _) in SCALED_DEGREES.items()
            )
        raise SingularStateError(
            f"|S| = {np.atleast_1d(s_norm)[idx]:.3g} below {cutoff:.3g} at state {idx}; "
            f"scaled invariants undefined: {diverging}"
        )
    return s_norm


def scaled_invariants(inv: InvariantSet, s_norm=None,
                      policy: SingularityPolicy = ERROR_POLICY) -> InvariantSet:
    """Fill in ``v1..v5`` by dividing each primitive invariant by ``|S|^k``."""
    n = effective_norm(inv.s_norm if s_norm is None else s_norm, policy, inv)
    vs = {v: getattr(inv, p) / n**k for v, (p, k) in SCALED_DEGREES.items()}
    return replace(inv, **vs)


def invariants(s, omega, policy: SingularityPolicy = ERROR_POLICY) -> InvariantSet:
    return scaled_invariants(primitive_invariants(s, omega), policy=policy)


def _abs_v1(s: np.ndarray) -> np.ndarray:
    n = np.sqrt(trace(s @ s))
    return np.abs(trace(s @ s @ s)) / n**3


def max_abs_v1(samples) -> tuple[float, np.ndarray]:
    """Largest ``|v1|`` over explicit symmetric samples (``v1`` uses the full ``S``)."""
    samples = np.asarray(samples, dtype=float).reshape(-1, 3, 3)
    vals = _abs_v1(samples)
    k = int(np.argmax(vals))
    return float(vals[k]), samples[k]


@dataclass(frozen=True)
class V1ScanResult:
    max_abs_v1: float
    argmax: np.ndarray
    samples: int
    polished: bool

    def report(self) -> dict:
        sup = V1_SUPREMUM
        return {
            "max_abs_v1": self.max_abs_v1,
            "samples": self.samples,
            "polished": self.polished,
            "theoretical_supremum": sup,
            "quoted_bounds": dict(V1_QUOTED_BOUNDS),
            "exceeds_remark_bound": self.max_abs_v1 > V1_QUOTED_BOUNDS["remark"],
            "within_positivity_bound": self.max_abs_v1 <= V1_QUOTED_BOUNDS["positivity_theorem"] + 1e-9,
            "note": ("the two quoted constants disagree; the sampled maximum "
                     "exceeds 1/(3*sqrt(6)) and approaches 1/sqrt(6)"),
        }


def v1_extremal_scan(sample_count: int, seed=0, *, polish: bool = True,
                     chunk: int = 65536) -> V1ScanResult:
    """Brute-force sup of ``|v1|`` over random unit trace-free symmetric tensors.

    Samples are uniform on the deviatoric unit sphere; the best sample is then
    refined by a local maximization in the 5 deviatoric coordinates.
    """
    if sample_count < 1:
        raise ValueError("sample_count must be >= 1")
    rng = rng_from(seed)
    best_val, best_x = -1.0, None
    remaining = sample_count
    while remaining > 0:
        m = min(chunk, remaining)
        x = rng.standard_normal((m, 5))
        x /= np.linalg.norm(x, axis=1, keepdims=True)
        vals = _abs_v1(np.einsum("na,aij->nij", x, DEV_BASIS))
        k = int(np.argmax(vals))
        if vals[k] > best_val:
            best_val, best_x = float(vals[k]), x[k]
        remaining -= m

    if polish:
        def objective(x):
            return -_abs_v1(np.einsum("a,aij->ij", x, DEV_BASIS))

        res = minimize(objective, best_x, method="BFGS", options={"gtol": 1e-12})
        if -res.fun > best_val:
            best_val = float(-res.fun)
            best_x = res.x / np.linalg.norm(res.x)
    argmax = np.einsum("a,aij->ij", best_x, DEV_BASIS)
    return V1ScanResult(best_val, argmax, sample_count, polish)
