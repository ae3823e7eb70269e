"""Scalar generators ``g(v1, v3, v4)`` of potential-derived closures.

``g`` carries units of kinematic viscosity.  A family provides its value and
the three partial derivatives; the polynomial family does so analytically,
other families can be registered with :func:`register_g_family`.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Callable, ClassVar

import numpy as np

from .invariants import V1_SUPREMUM, invariants
from .sampling import random_states, rng_from


class GFunction:
    """Base class: subclasses implement ``value`` and ``partials``."""

    family: ClassVar[str] = "abstract"
    #: True when the (v3, v4) Hessian does not depend on the state
    constant_hessian: ClassVar[bool] = False

    def value(self, v1, v3, v4):
        raise NotImplementedError

    def partials(self, v1, v3, v4):
        """Return ``(dg/dv1, dg/dv3, dg/dv4)``."""
        raise NotImplementedError

    def hessian_v3v4(self, v1, v3, v4, step: float = 1e-4):
        """2x2 Hessian in (v3, v4), by central differences of the partials."""
        v1, v3, v4 = np.broadcast_arrays(*(np.asarray(x, dtype=float) for x in (v1, v3, v4)))
        h3 = step * np.maximum(1.0, np.abs(v3))
        h4 = step * np.maximum(1.0, np.abs(v4))
        _, g3p, g4p = self.partials(v1, v3 + h3, v4)
        _, g3m, g4m = self.partials(v1, v3 - h3, v4)
        _, g3q, g4q = self.partials(v1, v3, v4 + h4)
        _, g3r, g4r = self.partials(v1, v3, v4 - h4)
        h33 = (g3p - g3m) / (2 * h3)
        h44 = (g4q - g4r) / (2 * h4)
        h34 = 0.5 * ((g4p - g4m) / (2 * h3) + (g3q - g3r) / (2 * h4))
        return np.stack([np.stack([h33, h34], -1), np.stack([h34, h44], -1)], -2)

    def to_config(self) -> dict:
        raise NotImplementedError


POLY_KEYS = ("c0", "c1", "c2", "l3", "l4", "q33", "q34", "q44")


@dataclass(frozen=True)
class PolynomialG(GFunction):
    """``g = c0 + c1 v1 + c2 v1^2 + l3 v3 + l4 v4 + q33 v3^2 + q34 v3 v4 + q44 v4^2``."""

    c0: float = 0.0
    c1: float = 0.0
    c2: float = 0.0
    l3: float = 0.0
    l4: float = 0.0
    q33: float = 0.0
    q34: float = 0.0
    q44: float = 0.0

    family: ClassVar[str] = "polynomial"
    constant_hessian: ClassVar[bool] = True

    def __post_init__(self):
        for k in POLY_KEYS:
            if not np.isfinite(getattr(self, k)):
                raise ValueError(f"coefficient {k} is not finite")

    def value(self, v1, v3, v4):
        return (self.c0 + self.c1 * v1 + self.c2 * v1 * v1 + self.l3 * v3 + self.l4 * v4
                + self.q33 * v3 * v3 + self.q34 * v3 * v4 + self.q44 * v4 * v4)

    def partials(self, v1, v3, v4):
        g1 = self.c1 + 2.0 * self.c2 * v1
        g3 = self.l3 + 2.0 * self.q33 * v3 + self.q34 * v4
        g4 = self.l4 + self.q34 * v3 + 2.0 * self.q44 * v4
        shape = np.broadcast(v1, v3, v4).shape
        return tuple(np.broadcast_to(np.asarray(x, dtype=float), shape) for x in (g1, g3, g4))

    def hessian_v3v4(self, v1=None, v3=None, v4=None, step=None):
        return np.array([[2.0 * self.q33, self.q34], [self.q34, 2.0 * self.q44]])

    def boundary_max(self, v_star: float) -> float:
        """max of ``g(v1, 0, 0)`` over ``[-v_star, v_star]`` (closed form)."""
        cand = [-v_star, v_star]
        if self.c2 != 0.0:
            vertex = -self.c1 / (2.0 * self.c2)
            if -v_star < vertex < v_star:
                cand.append(vertex)
        return max(float(self.c0 + self.c1 * v + self.c2 * v * v) for v in cand)

    def to_config(self) -> dict:
        return {"family": self.family, **{k: getattr(self, k) for k in POLY_KEYS}}


def make_polynomial_g(coeffs: dict | None = None, **kwargs) -> PolynomialG:
    params = dict(coeffs or {}, **kwargs)
    unknown = set(params) - set(POLY_KEYS)
    if unknown:
        raise ValueError(f"unknown polynomial coefficients: {sorted(unknown)}")
    return PolynomialG(**{k: float(v) for k, v in params.items()})


@dataclass(frozen=True)
class CallableG(GFunction):
    """Wraps plain callables; partials default to central differences."""

    func: Callable
    grad: Callable | None = None
    name: str = "callable"

    family: ClassVar[str] = "callable"

    def value(self, v1, v3, v4):
        return self.func(v1, v3, v4)

    def partials(self, v1, v3, v4):
        if self.grad is not None:
            return tuple(self.grad(v1, v3, v4))
        v = [np.asarray(x, dtype=float) for x in (v1, v3, v4)]
        out = []
        for i in range(3):
            h = 1e-6 * np.maximum(1.0, np.abs(v[i]))
            up = list(v)
            dn = list(v)
            up[i] = v[i] + h
            dn[i] = v[i] - h
            out.append((self.func(*up) - self.func(*dn)) / (2 * h))
        return tuple(out)

    def to_config(self) -> dict:
        raise TypeError(f"g function {self.name!r} wraps a callable and cannot be serialized")


_REGISTRY: dict[str, Callable[..., GFunction]] = {"polynomial": make_polynomial_g}


def register_g_family(name: str, factory: Callable[..., GFunction]) -> None:
    if name in _REGISTRY:
        raise ValueError(f"g family {name!r} already registered")
    _REGISTRY[name] = factory


def g_from_config(cfg: dict) -> GFunction:
    cfg = dict(cfg)
    family = cfg.pop("family", "polynomial")
    try:
        factory = _REGISTRY[family]
    except KeyError:
        raise ValueError(f"unknown g family {family!r}") from None
    return factory(cfg)


def check_partials(g: GFunction, points: np.ndarray, step: float = 1e-6) -> float:
    """Worst relative mismatch between ``g.partials`` and central differences of ``g.value``.

    ``points`` has shape (n, 3) with columns (v1, v3, v4).
    """
    v1, v3, v4 = (points[:, i] for i in range(3))
    analytic = g.partials(v1, v3, v4)
    cols = [v1, v3, v4]
    scale = max(float(np.max(np.abs(np.stack(analytic)))), abs(float(np.max(np.abs(g.value(v1, v3, v4))))), 1e-300)
    worst = 0.0
    for i in range(3):
        h = step * np.maximum(1.0, np.abs(cols[i]))
        up = list(cols)
        dn = list(cols)
        up[i] = cols[i] + h
        dn[i] = cols[i] - h
        fd = (g.value(*up) - g.value(*dn)) / (2 * h)
        worst = max(worst, float(np.max(np.abs(fd - analytic[i]))) / scale)
    return worst


@dataclass(frozen=True)
class VEnvelope:
    """Attainable ranges of (v1, v3, v4) measured on random states."""

    v1_max: float
    v3_min: float
    v4_max: float
    samples: int
    omega_ratio: tuple[float, float]


def measure_envelope(samples: int = 20000, seed=0, omega_ratio=(1e-2, 10.0)) -> VEnvelope:
    s, w = random_states(samples, seed, omega_ratio=omega_ratio)
    inv = invariants(s, w)
    return VEnvelope(float(np.max(np.abs(inv.v1))), float(np.min(inv.v3)),
                     float(np.max(np.abs(inv.v4))), samples, tuple(omega_ratio))


@dataclass
class PositivityCertificate:
    """Outcome of checking the two sufficient conditions for positive dissipation.

    ``worst_violation`` is the smaller of the least (v3, v4)-Hessian eigenvalue
    and ``nu - max g(v1, 0, 0)``; both are viscosities, and a negative value
    marks a failed condition.  ``method="sampled"`` conclusions are heuristic.
    """

    convex_in_v3v4: bool
    boundary_bound_ok: bool
    method: str
    worst_violation: float
    samples: int
    min_hessian_eigenvalue: float = 0.0
    boundary_max: float = 0.0
    nu: float = 0.0
    v_star: float = 0.0
    notes: list = field(default_factory=list)

    @property
    def positive(self) -> bool:
        return self.convex_in_v3v4 and self.boundary_bound_ok

    def to_dict(self) -> dict:
        out = asdict(self)
        out["positive"] = self.positive
        return out


def certify_positivity(g: GFunction, nu: float, v_star: float = V1_SUPREMUM, samples: int = 4096,
                       seed=0, method: str = "auto", tol: float = 1e-12) -> PositivityCertificate:
    """Check convexity of ``g`` in (v3, v4) and ``g(v1, 0, 0) <= nu`` on ``|v1| <= v_star``.

    Negative results are reported in the certificate, never raised.
    """
    if not nu > 0 or not v_star > 0:
        raise ValueError("nu and v_star must be positive")
    if method == "auto":
        method = "analytic" if g.constant_hessian else "sampled"
    rng = rng_from(seed)
    notes = []

    if method == "analytic":
        if not g.constant_hessian:
            raise ValueError("analytic certification needs a state-independent (v3, v4) Hessian")
        min_eig = float(np.linalg.eigvalsh(g.hessian_v3v4())[0])
        n_used = 0
    elif method == "sampled":
        # reachable (v1, v3, v4) triples from random physical states
        s, w = random_states(samples, rng, omega_ratio=(1e-2, 10.0))
        inv = invariants(s, w)
        v1 = np.clip(inv.v1, -v_star, v_star)
        hess = g.hessian_v3v4(v1, inv.v3, inv.v4)
        eig = np.linalg.eigvalsh(hess)
        min_eig = float(eig[..., 0].min())
        n_used = samples
        notes.append("convexity sampled on reachable states; heuristic, not a proof")
    else:
        raise ValueError(f"unknown method {method!r}")

    if isinstance(g, PolynomialG):
        bmax = g.boundary_max(v_star)
    else:
        grid = np.linspace(-v_star, v_star, 2001)
        bmax = float(np.max(g.value(grid, np.zeros_like(grid), np.zeros_like(grid))))
        notes.append("boundary bound evaluated on a 2001-point grid")
    hscale = max(1.0, abs(min_eig))
    convex = min_eig >= -tol * hscale
    bound_ok = bmax <= nu * (1.0 + tol)
    return PositivityCertificate(
        convex_in_v3v4=convex,
        boundary_bound_ok=bound_ok,
        method=method,
        worst_violation=min(min_eig, nu - bmax),
        samples=n_used,
        min_hessian_eigenvalue=min_eig,
        boundary_max=bmax,
        nu=nu,
        v_star=v_star,
        notes=notes,
    )


def dissipation_from_g(g: GFunction, nu: float, i1, v1, v3, v4):
    """``2 I1 (nu - g + v3 dg/dv3 + v4 dg/dv4)``: total dissipation of a potential closure."""
    _, g3, g4 = g.partials(v1, v3, v4)
    return 2.0 * i1 * (nu - g.value(v1, v3, v4) + v3 * g3 + v4 * g4)
