"""Invariant subgrid closures and their total dissipation.

All closures return the deviatoric stress as a weighted sum of seven basis
tensors::

    S,  (S^2)^d,  (W^2)^d,  (W S W)^d,  [S, W],  [S^2, W],  [W S W, W]

``S`` enters through its deviator so the output is trace-free even for a
compressible gradient; for incompressible states the two coincide.  The
isotropic part of the stress is absorbed into the pressure and is not
modelled.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .g_functions import GFunction
from .invariants import (ERROR_POLICY, PRIMITIVE_NAMES, SCALED_NAMES, InvariantSet,
                         SingularityPolicy, effective_norm, primitive_invariants,
                         scaled_invariants)
from .tensor_core import commutator, deviator, inner, trace

#: power of |S| dividing each scale-free coefficient
SCALED_POWERS = (0, 1, 1, 2, 1, 2, 3)
BASIS_NAMES = ("S", "S2d", "W2d", "WSWd", "[S,W]", "[S2,W]", "[WSW,W]")


class CoefficientError(ArithmeticError):
    """A coefficient function failed; carries the invariants it was called with."""

    def __init__(self, index: int, inv: InvariantSet, cause: Exception):
        vals = {k: np.asarray(v).ravel()[:3].tolist() for k, v in inv.as_dict().items()}
        super().__init__(f"alpha{index + 1} failed ({cause!r}) at invariants {vals}")
        self.index = index
        self.invariants = inv


def basis_terms(s, omega) -> np.ndarray:
    """Stack of the seven basis tensors, shape (..., 7, 3, 3)."""
    s = np.asarray(s, dtype=float)
    w = np.asarray(omega, dtype=float)
    s2 = s @ s
    wsw = w @ s @ w
    return np.stack([
        deviator(s),
        deviator(s2),
        deviator(w @ w),
        deviator(wsw),
        commutator(s, w),
        commutator(s2, w),
        commutator(wsw, w),
    ], axis=-3)


@dataclass(frozen=True)
class StressResult:
    tau_dev: np.ndarray
    coefficients: np.ndarray
    basis_terms: np.ndarray
    invariants: InvariantSet | None = None


def combine(coefficients: np.ndarray, terms: np.ndarray) -> np.ndarray:
    return np.einsum("...k,...kij->...ij", coefficients, terms)


@dataclass(frozen=True)
class LinearForm:
    """Serializable coefficient ``const + sum(w * invariant)``.

    ``terms`` maps invariant names (``i1``..``b4`` or ``v1``..``v5``) to weights.
    """

    const: float = 0.0
    terms: tuple = ()

    @classmethod
    def of(cls, const: float = 0.0, **weights) -> "LinearForm":
        for k in weights:
            if k not in PRIMITIVE_NAMES + SCALED_NAMES:
                raise ValueError(f"unknown invariant {k!r}")
        return cls(float(const), tuple(sorted((k, float(v)) for k, v in weights.items())))

    def __call__(self, inv: InvariantSet):
        out = self.const + 0.0 * inv.i1
        for name, w in self.terms:
            val = getattr(inv, name)
            if val is None:
                raise ValueError(f"invariant {name} not available")
            out = out + w * val
        return out

    def to_config(self) -> dict:
        return {"const": self.const, **dict(self.terms)}

    @classmethod
    def from_config(cls, cfg) -> "LinearForm":
        if not isinstance(cfg, dict):
            return cls(float(cfg))
        cfg = dict(cfg)
        const = cfg.pop("const", 0.0)
        return cls.of(const, **cfg)


def _coerce_alphas(alphas: Sequence) -> tuple:
    alphas = tuple(alphas)
    if len(alphas) > 7:
        raise ValueError("at most seven coefficient functions")
    alphas = alphas + (None,) * (7 - len(alphas))
    out = []
    for a in alphas:
        if a is None or callable(a):
            out.append(a)
        else:
            out.append(LinearForm(float(a)))
    return tuple(out)


def _eval_coefficients(alphas, inv: InvariantSet, shape) -> np.ndarray:
    cols = []
    for k, a in enumerate(alphas):
        if a is None:
            cols.append(np.zeros(shape))
            continue
        try:
            val = np.broadcast_to(np.asarray(a(inv), dtype=float), shape)
        except Exception as exc:
            raise CoefficientError(k, inv, exc) from exc
        if not np.all(np.isfinite(val)):
            raise CoefficientError(k, inv, FloatingPointError("non-finite value"))
        cols.append(val)
    return np.stack(cols, axis=-1)


_TERM_BUILDERS = (
    lambda s, w: deviator(s),
    lambda s, w: deviator(s @ s),
    lambda s, w: deviator(w @ w),
    lambda s, w: deviator(w @ s @ w),
    lambda s, w: commutator(s, w),
    lambda s, w: commutator(s @ s, w),
    lambda s, w: commutator(w @ s @ w, w),
)


def combine_sparse(coefficients: np.ndarray, s, omega) -> np.ndarray:
    """Weighted basis sum that only builds the terms with a nonzero weight somewhere."""
    s = np.asarray(s, dtype=float)
    omega = np.asarray(omega, dtype=float)
    out = np.zeros(np.broadcast_shapes(s.shape, omega.shape))
    for k, build in enumerate(_TERM_BUILDERS):
        c = coefficients[..., k]
        if np.any(c != 0.0):
            out += c[..., None, None] * build(s, omega)
    return out


class ClosureModel:
    """Common interface.

    Subclasses implement ``coefficients``, returning the seven effective
    basis weights and the invariants they were computed from.
    """

    kind = "abstract"
    policy: SingularityPolicy = ERROR_POLICY

    def coefficients(self, s: np.ndarray, omega: np.ndarray):
        raise NotImplementedError

    def evaluate(self, s, omega) -> StressResult:
        s = np.asarray(s, dtype=float)
        omega = np.asarray(omega, dtype=float)
        coeffs, inv = self.coefficients(s, omega)
        terms = basis_terms(s, omega)
        return StressResult(combine(coeffs, terms), coeffs, terms, inv)

    def tau(self, s, omega) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        omega = np.asarray(omega, dtype=float)
        coeffs, _ = self.coefficients(s, omega)
        return combine_sparse(coeffs, s, omega)

    def to_config(self) -> dict:
        raise TypeError(f"{type(self).__name__} is not serializable")


@dataclass(frozen=True)
class ZeroModel(ClosureModel):
    """No subgrid stress (plain resolved Navier-Stokes)."""

    kind = "zero"
    policy: SingularityPolicy = ERROR_POLICY

    def coefficients(self, s, omega):
        return np.zeros(np.shape(s)[:-2] + (7,)), None

    def to_config(self):
        return {"kind": self.kind}


@dataclass(frozen=True)
class GeneralAlphaModel(ClosureModel):
    """Coefficients are functions of the primitive invariants ``I1, I2, B1..B4``."""

    alphas: tuple = ()
    kind = "general"
    policy: SingularityPolicy = ERROR_POLICY

    def __post_init__(self):
        object.__setattr__(self, "alphas", _coerce_alphas(self.alphas))

    def coefficients(self, s, omega):
        inv = primitive_invariants(s, omega)
        return _eval_coefficients(self.alphas, inv, s.shape[:-2]), inv

    def to_config(self):
        return _alphas_config(self.kind, self.alphas)


def eval_general(model: GeneralAlphaModel, s, omega) -> StressResult:
    return model.evaluate(s, omega)


@dataclass(frozen=True)
class ScaledAlphaModel(ClosureModel):
    """Scale-invariant form: ``alpha_k^0(v1..v5) / |S|^p_k`` multiplies basis tensor ``k``."""

    alphas: tuple = ()
    policy: SingularityPolicy = ERROR_POLICY
    kind = "scaled"

    def __post_init__(self):
        object.__setattr__(self, "alphas", _coerce_alphas(self.alphas))

    def coefficients(self, s, omega):
        inv = scaled_invariants(primitive_invariants(s, omega), policy=self.policy)
        norm = effective_norm(inv.s_norm, self.policy)
        a0 = _eval_coefficients(self.alphas, inv, s.shape[:-2])
        powers = np.asarray(SCALED_POWERS, dtype=float)
        return a0 / norm[..., None] ** powers, inv

    def to_general(self) -> GeneralAlphaModel:
        """Same closure written with coefficients ``I1^(-p/2) alpha^0(v(I))``."""
        policy = self.policy

        def lift(a, p):
            if a is None:
                return None

            def alpha(inv):
                full = scaled_invariants(inv, policy=policy)
                return a(full) / effective_norm(inv.s_norm, policy) ** p
            return alpha

        return GeneralAlphaModel(tuple(lift(a, p) for a, p in zip(self.alphas, SCALED_POWERS)))

    def to_config(self):
        return {**_alphas_config(self.kind, self.alphas), **_policy_config(self.policy)}


def eval_scaled(model: ScaledAlphaModel, s, omega) -> StressResult:
    return model.evaluate(s, omega)


@dataclass(frozen=True)
class PotentialModel(ClosureModel):
    """Closure derived from a scalar potential through a generator ``g(v1, v3, v4)``::

        tau^d = (2g - 3 v1 g_1 - 2 v3 g_3 - 3 v4 g_4) S
                + 3 g_1 (S^2)^d / |S| + g_4 (W^2)^d / |S|
    """

    g: GFunction
    policy: SingularityPolicy = ERROR_POLICY
    kind = "potential"

    def coefficients(self, s, omega):
        inv = scaled_invariants(primitive_invariants(s, omega), policy=self.policy)
        norm = effective_norm(inv.s_norm, self.policy)
        v1, v3, v4 = inv.v1, inv.v3, inv.v4
        g = self.g.value(v1, v3, v4)
        g1, g3, g4 = self.g.partials(v1, v3, v4)
        shape = s.shape[:-2]
        zero = np.zeros(shape)
        coeffs = np.stack([
            np.broadcast_to(2.0 * g - 3.0 * v1 * g1 - 2.0 * v3 * g3 - 3.0 * v4 * g4, shape),
            np.broadcast_to(3.0 * g1 / norm, shape),
            np.broadcast_to(g4 / norm, shape),
            zero, zero, zero, zero,
        ], axis=-1)
        return coeffs, inv

    def to_scaled(self) -> ScaledAlphaModel:
        g = self.g

        def a1(inv):
            g1, g3, g4 = g.partials(inv.v1, inv.v3, inv.v4)
            return 2.0 * g.value(inv.v1, inv.v3, inv.v4) - 3.0 * inv.v1 * g1 - 2.0 * inv.v3 * g3 - 3.0 * inv.v4 * g4

        def a2(inv):
            return 3.0 * g.partials(inv.v1, inv.v3, inv.v4)[0]

        def a3(inv):
            return g.partials(inv.v1, inv.v3, inv.v4)[2]

        return ScaledAlphaModel((a1, a2, a3), policy=self.policy)

    def dissipation_identity(self, nu: float, s, omega):
        """``2 I1 (nu - g + v3 g_3 + v4 g_4)``, valid for trace-free ``S``."""
        inv = scaled_invariants(primitive_invariants(s, omega), policy=self.policy)
        _, g3, g4 = self.g.partials(inv.v1, inv.v3, inv.v4)
        return 2.0 * inv.i1 * (nu - self.g.value(inv.v1, inv.v3, inv.v4) + inv.v3 * g3 + inv.v4 * g4)

    def to_config(self):
        return {"kind": self.kind, **{f"g.{k}": v for k, v in self.g.to_config().items()},
                **_policy_config(self.policy)}


def eval_potential(model: PotentialModel, s, omega) -> StressResult:
    return model.evaluate(s, omega)


def total_dissipation(model: ClosureModel, nu: float, s, omega):
    """``tr((2 nu S - tau) S)``: viscous plus subgrid dissipation."""
    s = np.asarray(s, dtype=float)
    tau = model.tau(s, omega)
    return 2.0 * nu * trace(s @ s) - inner(tau, s)


def subgrid_dissipation(model: ClosureModel, s, omega):
    """``-tr(tau S)``: the subgrid share of the total dissipation."""
    return -inner(model.tau(s, omega), np.asarray(s, dtype=float))


def _alphas_config(kind: str, alphas) -> dict:
    out = {"kind": kind}
    for k, a in enumerate(alphas, start=1):
        if a is None:
            continue
        if not isinstance(a, LinearForm):
            raise TypeError(f"alpha{k} is an opaque callable and cannot be serialized")
        for key, val in a.to_config().items():
            out[f"alpha{k}.{key}"] = val
    return out


def _policy_config(policy: SingularityPolicy) -> dict:
    if policy == ERROR_POLICY:
        return {}
    return {"singularity": policy.mode, "reference_scale": policy.reference_scale,
            "rel_eps": policy.rel_eps, "threshold": policy.threshold}
