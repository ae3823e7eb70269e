"""Finite symmetry transformations of Navier-Stokes solutions and closure checks.

Five groups act on ``(t, x, u, p)``:

* time shift      ``(t + e, x, u, p)``
* Galilean        ``(t, x + a(t), u + a'(t), p - rho a''(t).x)``
* rotation        ``(t, R x, R u, p)``
* pressure shift  ``(t, x, u, p + xi(t))``
* scaling         ``(e^{2e} t, e^{e} x, e^{-e} u, e^{-2e} p)``

The function-valued parameters ``a`` and ``xi`` are sampled as polynomials
in ``t``.  A closure respects a group when ``tau`` evaluated on the
transformed gradient equals the expected transform of ``tau``: conjugation
``R tau R^T`` for rotations, the factor ``e^{-2e}`` for scaling, identity
otherwise.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from numpy.polynomial import polynomial as P

from .invariants import SingularStateError
from .sampling import random_rotations, rng_from
from .tensor_core import frobenius_norm, skew, sym

GROUP_KINDS = ("time", "galilean", "rotation", "pressure", "scaling")


@dataclass(frozen=True)
class AnalyticField:
    """Velocity/pressure field with an exact gradient.

    ``u(t, x)`` maps points of shape (..., 3) to velocities of shape (..., 3),
    ``grad(t, x)`` returns ``du_i/dx_j`` with shape (..., 3, 3), and ``p(t, x)``
    returns shape (...).
    """

    u: Callable
    grad: Callable
    p: Callable
    name: str = "field"
    divergence_free: bool = True
    rho: float = 1.0

    def divergence(self, t, x):
        return np.trace(self.grad(t, x), axis1=-2, axis2=-1)

    def gradient_fd_error(self, t, x, step: float = 1e-6) -> float:
        """Max relative mismatch of ``grad`` against central differences of ``u``."""
        x = np.asarray(x, dtype=float)
        g = self.grad(t, x)
        worst = 0.0
        scale = max(float(np.max(np.abs(g))), 1e-300)
        for j in range(3):
            e = np.zeros(3)
            e[j] = step
            col = (self.u(t, x + e) - self.u(t, x - e)) / (2 * step)
            worst = max(worst, float(np.max(np.abs(col - g[..., :, j]))))
        return worst / scale


# ---------------------------------------------------------------- group elements


class GroupElement:
    kind = "abstract"

    def map_point(self, t, x):
        raise NotImplementedError

    def act_on_field(self, f: AnalyticField) -> AnalyticField:
        raise NotImplementedError

    def state_transform(self, s, omega):
        """Induced action on a pointwise ``(S, W)`` pair."""
        return s, omega

    def expected_tau(self, tau):
        return tau

    def compose(self, first: "GroupElement") -> "GroupElement":
        """``self o first`` for elements of the same kind."""
        raise NotImplementedError

    def _same_kind(self, other):
        if type(other) is not type(self):
            raise TypeError("composition only implemented within one group")


@dataclass(frozen=True)
class TimeShift(GroupElement):
    eps: float
    kind = "time"

    def map_point(self, t, x):
        return t + self.eps, x

    def act_on_field(self, f):
        e = self.eps
        return AnalyticField(lambda t, x: f.u(t - e, x), lambda t, x: f.grad(t - e, x),
                             lambda t, x: f.p(t - e, x), f"{f.name}|time", f.divergence_free, f.rho)

    def compose(self, first):
        self._same_kind(first)
        return TimeShift(self.eps + first.eps)


def _poly_coeffs(c, width):
    c = np.asarray(c, dtype=float)
    if width and (c.ndim != 2 or c.shape[1] != width):
        raise ValueError(f"coefficients must have shape (degree+1, {width})")
    return c


@dataclass(frozen=True)
class Galilean(GroupElement):
    """Time-dependent frame shift ``a(t) = sum_k coeffs[k] t^k`` (vector coefficients)."""

    coeffs: np.ndarray
    kind = "galilean"

    def __post_init__(self):
        c = _poly_coeffs(self.coeffs, 3)
        object.__setattr__(self, "coeffs", c)

    def alpha(self, t):
        return P.polyval(t, self.coeffs)

    def alpha_dot(self, t):
        return P.polyval(t, P.polyder(self.coeffs)) if len(self.coeffs) > 1 else np.zeros(3)

    def alpha_ddot(self, t):
        return P.polyval(t, P.polyder(self.coeffs, 2)) if len(self.coeffs) > 2 else np.zeros(3)

    def map_point(self, t, x):
        return t, np.asarray(x) + self.alpha(t)

    def act_on_field(self, f):
        def u(t, x):
            return f.u(t, np.asarray(x) - self.alpha(t)) + self.alpha_dot(t)

        def grad(t, x):
            return f.grad(t, np.asarray(x) - self.alpha(t))

        def p(t, x):
            x0 = np.asarray(x) - self.alpha(t)
            return f.p(t, x0) - f.rho * (x0 @ self.alpha_ddot(t))

        return AnalyticField(u, grad, p, f"{f.name}|gal", f.divergence_free, f.rho)

    def compose(self, first):
        self._same_kind(first)
        n = max(len(self.coeffs), len(first.coeffs))
        c = np.zeros((n, 3))
        c[: len(self.coeffs)] += self.coeffs
        c[: len(first.coeffs)] += first.coeffs
        return Galilean(c)


@dataclass(frozen=True)
class Rotation(GroupElement):
    R: np.ndarray
    kind = "rotation"

    def __post_init__(self):
        r = np.asarray(self.R, dtype=float)
        if r.shape != (3, 3) or np.linalg.norm(r @ r.T - np.eye(3)) > 1e-12 or np.linalg.det(r) <= 0:
            raise ValueError("R must be a proper rotation (R R^T = Id, det R = 1)")
        object.__setattr__(self, "R", r)

    def map_point(self, t, x):
        return t, np.asarray(x) @ self.R.T

    def act_on_field(self, f):
        r = self.R

        def back(x):
            return np.asarray(x) @ r  # R^T x for row vectors

        return AnalyticField(lambda t, x: f.u(t, back(x)) @ r.T,
                             lambda t, x: r @ f.grad(t, back(x)) @ r.T,
                             lambda t, x: f.p(t, back(x)), f"{f.name}|rot", f.divergence_free, f.rho)

    def state_transform(self, s, omega):
        r = self.R
        return r @ s @ r.T, r @ omega @ r.T

    def expected_tau(self, tau):
        return self.R @ tau @ self.R.T

    def compose(self, first):
        self._same_kind(first)
        return Rotation(self.R @ first.R)


@dataclass(frozen=True)
class PressureShift(GroupElement):
    coeffs: np.ndarray
    kind = "pressure"

    def __post_init__(self):
        object.__setattr__(self, "coeffs", np.atleast_1d(np.asarray(self.coeffs, dtype=float)))

    def xi(self, t):
        return P.polyval(t, self.coeffs)

    def map_point(self, t, x):
        return t, x

    def act_on_field(self, f):
        return AnalyticField(f.u, f.grad, lambda t, x: f.p(t, x) + self.xi(t),
                             f"{f.name}|pres", f.divergence_free, f.rho)

    def compose(self, first):
        self._same_kind(first)
        return PressureShift(P.polyadd(self.coeffs, first.coeffs))


@dataclass(frozen=True)
class Scaling(GroupElement):
    eps: float
    kind = "scaling"

    @property
    def factor(self) -> float:
        """Factor applied to velocity gradients and to ``tau``: ``e^{-2 eps}``."""
        return float(np.exp(-2.0 * self.eps))

    def map_point(self, t, x):
        return np.exp(2.0 * self.eps) * t, np.exp(self.eps) * np.asarray(x)

    def act_on_field(self, f):
        e = self.eps
        a, b = np.exp(-2.0 * e), np.exp(-e)
        return AnalyticField(lambda t, x: b * f.u(a * t, b * np.asarray(x)),
                             lambda t, x: a * f.grad(a * t, b * np.asarray(x)),
                             lambda t, x: a * f.p(a * t, b * np.asarray(x)),
                             f"{f.name}|scale", f.divergence_free, f.rho)

    def state_transform(self, s, omega):
        return self.factor * s, self.factor * omega

    def expected_tau(self, tau):
        return self.factor * tau

    def compose(self, first):
        self._same_kind(first)
        return Scaling(self.eps + first.eps)


def induced_state_transform(g: GroupElement, s, omega):
    """``(S_hat, W_hat, expected)`` where ``expected`` maps ``tau`` to its required image."""
    s_hat, w_hat = g.state_transform(np.asarray(s, dtype=float), np.asarray(omega, dtype=float))
    return s_hat, w_hat, g.expected_tau


def act_on_field(g: GroupElement, f: AnalyticField) -> AnalyticField:
    return g.act_on_field(f)


def random_group_elements(kind: str, n: int, seed=None, *, epsilons=None, degree: int = 4) -> list:
    """``n`` random elements of one group.

    Scaling parameters are drawn with ``0.1 <= |eps| <= 1`` so that a
    scaling-breaking model shows an unambiguous defect on every probe.
    """
    rng = rng_from(seed)
    if epsilons is not None:
        eps = [float(epsilons[i % len(epsilons)]) for i in range(n)]
    if kind == "time":
        return [TimeShift(e) for e in (eps if epsilons is not None else rng.uniform(-1, 1, n))]
    if kind == "galilean":
        return [Galilean(rng.standard_normal((degree + 1, 3))) for _ in range(n)]
    if kind == "rotation":
        return [Rotation(r) for r in random_rotations(n, rng)]
    if kind == "pressure":
        return [PressureShift(rng.standard_normal(degree + 1)) for _ in range(n)]
    if kind == "scaling":
        if epsilons is None:
            eps = rng.uniform(0.1, 1.0, n) * rng.choice([-1.0, 1.0], n)
        return [Scaling(float(e)) for e in eps]
    raise ValueError(f"unknown group {kind!r}; expected one of {GROUP_KINDS}")


# ---------------------------------------------------------------- probe fields


def plane_shear(rate: float = 1.0) -> AnalyticField:
    g = np.zeros((3, 3))
    g[0, 1] = rate

    def u(t, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        out[..., 0] = rate * x[..., 1]
        return out

    return AnalyticField(u, lambda t, x: np.broadcast_to(g, np.shape(x)[:-1] + (3, 3)).copy(),
                         lambda t, x: np.zeros(np.shape(x)[:-1]), "plane_shear")


def solid_rotation(rate: float = 1.0) -> AnalyticField:
    g = np.zeros((3, 3))
    g[0, 1], g[1, 0] = -rate, rate

    def u(t, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        out[..., 0] = -rate * x[..., 1]
        out[..., 1] = rate * x[..., 0]
        return out

    def p(t, x):
        x = np.asarray(x, dtype=float)
        return 0.5 * rate**2 * (x[..., 0] ** 2 + x[..., 1] ** 2)

    return AnalyticField(u, lambda t, x: np.broadcast_to(g, np.shape(x)[:-1] + (3, 3)).copy(), p,
                         "solid_rotation")


def taylor_green(nu: float = 0.1) -> AnalyticField:
    """``(sin x cos y cos z, -cos x sin y cos z, 0) e^{-3 nu t}``.

    Divergence-free with the exact gradient, but not an exact Navier-Stokes
    solution in 3D; use :func:`taylor_green_2d` when one is needed.
    """

    def parts(t, x):
        x = np.asarray(x, dtype=float)
        sx, sy, sz = (np.sin(x[..., i]) for i in range(3))
        cx, cy, cz = (np.cos(x[..., i]) for i in range(3))
        return np.exp(-3.0 * nu * t), sx, sy, sz, cx, cy, cz

    def u(t, x):
        a, sx, sy, sz, cx, cy, cz = parts(t, x)
        return a * np.stack([sx * cy * cz, -cx * sy * cz, np.zeros_like(sx)], -1)

    def grad(t, x):
        a, sx, sy, sz, cx, cy, cz = parts(t, x)
        z = np.zeros_like(sx)
        rows = [
            np.stack([cx * cy * cz, -sx * sy * cz, -sx * cy * sz], -1),
            np.stack([sx * sy * cz, -cx * cy * cz, cx * sy * sz], -1),
            np.stack([z, z, z], -1),
        ]
        return a * np.stack(rows, -2)

    def p(t, x):
        a, sx, sy, sz, cx, cy, cz = parts(t, x)
        x = np.asarray(x, dtype=float)
        return a**2 / 16.0 * (np.cos(2 * x[..., 0]) + np.cos(2 * x[..., 1])) * (np.cos(2 * x[..., 2]) + 2)

    return AnalyticField(u, grad, p, "taylor_green")


def taylor_green_2d(nu: float = 0.1) -> AnalyticField:
    """Exact decaying Navier-Stokes solution ``(sin x cos y, -cos x sin y, 0) e^{-2 nu t}``."""

    def u(t, x):
        x = np.asarray(x, dtype=float)
        a = np.exp(-2.0 * nu * t)
        return a * np.stack([np.sin(x[..., 0]) * np.cos(x[..., 1]),
                             -np.cos(x[..., 0]) * np.sin(x[..., 1]), np.zeros(x.shape[:-1])], -1)

    def grad(t, x):
        x = np.asarray(x, dtype=float)
        a = np.exp(-2.0 * nu * t)
        sx, sy, cx, cy = np.sin(x[..., 0]), np.sin(x[..., 1]), np.cos(x[..., 0]), np.cos(x[..., 1])
        z = np.zeros_like(sx)
        return a * np.stack([np.stack([cx * cy, -sx * sy, z], -1),
                             np.stack([sx * sy, -cx * cy, z], -1),
                             np.stack([z, z, z], -1)], -2)

    def p(t, x):
        x = np.asarray(x, dtype=float)
        return 0.25 * np.exp(-4.0 * nu * t) * (np.cos(2 * x[..., 0]) + np.cos(2 * x[..., 1]))

    return AnalyticField(u, grad, p, "taylor_green_2d")


def abc_flow(a: float = 1.0, b: float = 0.8, c: float = 0.6) -> AnalyticField:
    def u(t, x):
        x = np.asarray(x, dtype=float)
        X, Y, Z = x[..., 0], x[..., 1], x[..., 2]
        return np.stack([a * np.sin(Z) + c * np.cos(Y), b * np.sin(X) + a * np.cos(Z),
                         c * np.sin(Y) + b * np.cos(X)], -1)

    def grad(t, x):
        x = np.asarray(x, dtype=float)
        X, Y, Z = x[..., 0], x[..., 1], x[..., 2]
        z = np.zeros_like(X)
        rows = [
            np.stack([z, -c * np.sin(Y), a * np.cos(Z)], -1),
            np.stack([b * np.cos(X), z, -a * np.sin(Z)], -1),
            np.stack([-b * np.sin(X), c * np.cos(Y), z], -1),
        ]
        return np.stack(rows, -2)

    return AnalyticField(u, grad, lambda t, x: np.zeros(np.shape(x)[:-1]), "abc")


def random_solenoidal(modes: int = 4, seed=None) -> AnalyticField:
    """Sum of ``a_k cos(k.x + phi_k) cos(w_k t)`` with ``a_k`` orthogonal to ``k``."""
    rng = rng_from(seed)
    ks = rng.integers(-2, 3, size=(modes, 3)).astype(float)
    ks[np.all(ks == 0, axis=1)] = (1.0, 0.0, 0.0)
    amps = rng.standard_normal((modes, 3))
    amps -= (np.sum(amps * ks, axis=1) / np.sum(ks * ks, axis=1))[:, None] * ks
    phases = rng.uniform(0, 2 * np.pi, modes)
    freqs = rng.uniform(0.5, 2.0, modes)

    def u(t, x):
        arg = np.asarray(x, dtype=float) @ ks.T + phases
        return (np.cos(arg) * np.cos(freqs * t)) @ amps

    def grad(t, x):
        arg = np.asarray(x, dtype=float) @ ks.T + phases
        w = -np.sin(arg) * np.cos(freqs * t)
        return np.einsum("...m,mi,mj->...ij", w, amps, ks)

    def p(t, x):
        arg = np.asarray(x, dtype=float) @ ks.T + phases
        return np.sum(np.sin(arg) * np.sin(freqs * t), axis=-1)

    return AnalyticField(u, grad, p, "random_solenoidal")


def probe_fields(seed=0) -> list[AnalyticField]:
    """Default field ensemble for field-path checks.

    Strain-free fields (solid rotation) are left out: there every closure that
    vanishes with ``S`` returns round-off, and a relative defect is meaningless.
    """
    rng = rng_from(seed)
    return [plane_shear(), taylor_green(), taylor_green_2d(), abc_flow(),
            random_solenoidal(4, rng), random_solenoidal(6, rng)]


def probe_points(n: int, seed=None):
    rng = rng_from(seed)
    return rng.uniform(0.0, 1.0, n), rng.uniform(0.0, 2 * np.pi, (n, 3))


# ---------------------------------------------------------------- defects


@dataclass
class DefectStats:
    group: str
    max_defect: float
    mean_defect: float
    min_defect: float
    count: int
    skipped: int = 0
    path: str = "state"

    def to_dict(self) -> dict:
        return {"group": self.group, "path": self.path, "max": self.max_defect, "mean": self.mean_defect,
                "min": self.min_defect, "count": self.count, "skipped": self.skipped}


def _relative_defect(tau_hat, expected, floor):
    diff = frobenius_norm(tau_hat - expected)
    return diff / np.maximum(frobenius_norm(expected), floor)


def _tau_or_none(model, s, w):
    try:
        return model.tau(s, w)
    except SingularStateError:
        return None


def state_defects(model, elements, s, w, floor: float = 1e-30):
    """Per-probe defects on pointwise states; singular probes come back as NaN."""
    s = np.asarray(s, dtype=float).reshape(-1, 3, 3)
    w = np.asarray(w, dtype=float).reshape(-1, 3, 3)
    if isinstance(elements, GroupElement):
        elements = [elements] * len(s)
    out = np.full(len(s), np.nan)
    for i, g in enumerate(elements):
        tau = _tau_or_none(model, s[i], w[i])
        s_hat, w_hat = g.state_transform(s[i], w[i])
        tau_hat = _tau_or_none(model, s_hat, w_hat)
        if tau is None or tau_hat is None:
            continue
        out[i] = _relative_defect(tau_hat, g.expected_tau(tau), floor)
    return out


def field_defects(model, elements, fields, t, x, floor: float = 1e-30):
    """Defects through the field path: transform the field, recompute the gradient at the
    mapped point, evaluate the closure.  Probe ``i`` uses ``fields[i % len(fields)]``."""
    if isinstance(elements, GroupElement):
        elements = [elements] * len(t)
    out = np.full(len(t), np.nan)
    for i, g in enumerate(elements):
        f = fields[i % len(fields)]
        grad = f.grad(t[i], x[i])
        th, xh = g.map_point(t[i], x[i])
        grad_hat = g.act_on_field(f).grad(th, xh)
        tau = _tau_or_none(model, sym(grad), skew(grad))
        tau_hat = _tau_or_none(model, sym(grad_hat), skew(grad_hat))
        if tau is None or tau_hat is None:
            continue
        out[i] = _relative_defect(tau_hat, g.expected_tau(tau), floor)
    return out


def path_agreement(model, elements, fields, t, x) -> float:
    """Max relative gap between ``tau`` from recomputed field gradients and from the
    induced state transform, over the same probes."""
    if isinstance(elements, GroupElement):
        elements = [elements] * len(t)
    worst = 0.0
    for i, g in enumerate(elements):
        f = fields[i % len(fields)]
        grad = f.grad(t[i], x[i])
        th, xh = g.map_point(t[i], x[i])
        grad_hat = g.act_on_field(f).grad(th, xh)
        s_hat, w_hat = g.state_transform(sym(grad), skew(grad))
        a = _tau_or_none(model, sym(grad_hat), skew(grad_hat))
        b = _tau_or_none(model, s_hat, w_hat)
        if a is None or b is None:
            continue
        scale = max(float(frobenius_norm(b)), 1e-30)
        worst = max(worst, float(frobenius_norm(a - b)) / scale)
    return worst


def _stats(kind, defects, path) -> DefectStats:
    ok = defects[~np.isnan(defects)]
    skipped = int(np.sum(np.isnan(defects)))
    if ok.size == 0:
        return DefectStats(kind, float("nan"), float("nan"), float("nan"), 0, skipped, path)
    return DefectStats(kind, float(ok.max()), float(ok.mean()), float(ok.min()), int(ok.size), skipped, path)


def equivariance_defect(model, elements, ensemble, *, path: str | None = None) -> DefectStats:
    """Defect statistics of ``model`` under ``elements`` over an ensemble.

    ``ensemble`` is either ``(S, W)`` stacks (state path) or
    ``(fields, t, x)`` (field path).
    """
    if isinstance(elements, GroupElement):
        kind = elements.kind
    else:
        kind = elements[0].kind
    if len(ensemble) == 2:
        s, w = ensemble
        return _stats(kind, state_defects(model, elements, s, w), path or "state")
    fields, t, x = ensemble
    return _stats(kind, field_defects(model, elements, fields, t, x), path or "field")
