"""Reference closures used to demonstrate symmetry breaking.

The filter width ``delta`` is a fixed model parameter: group actions never
rescale it, which is exactly why models carrying ``delta`` fail the scaling
test.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .g_functions import PolynomialG
from .invariants import (ERROR_POLICY, SingularityPolicy, effective_norm, primitive_invariants,
                         scaled_invariants)
from .models import ClosureModel, StressResult, _policy_config

#: conventional Smagorinsky constant; not a value derived here
DEFAULT_CS = 0.17


def _check_delta(delta):
    if not delta > 0:
        raise ValueError("filter width delta must be positive")


@dataclass(frozen=True)
class Smagorinsky(ClosureModel):
    """``tau^d = -2 (Cs delta)^2 |S| S``."""

    cs: float = DEFAULT_CS
    delta: float = 1.0
    kind = "smagorinsky"
    policy: SingularityPolicy = ERROR_POLICY

    def __post_init__(self):
        _check_delta(self.delta)

    def coefficients(self, s, omega):
        inv = primitive_invariants(s, omega)
        shape = s.shape[:-2]
        coeffs = np.zeros(shape + (7,))
        coeffs[..., 0] = -2.0 * (self.cs * self.delta) ** 2 * inv.s_norm
        return coeffs, inv

    def to_config(self):
        return {"kind": self.kind, "cs": self.cs, "delta": self.delta}


@dataclass(frozen=True)
class LundNovikov(ClosureModel):
    """``C1|S|D^2 S + C2 D^2 (S^2)^d + C3 D^2 (W^2)^d + C4 D^2 [S,W] + C5 D^2 [S^2,W]/|S|``."""

    c1: float = 0.0
    c2: float = 0.0
    c3: float = 0.0
    c4: float = 0.0
    c5: float = 0.0
    delta: float = 1.0
    policy: SingularityPolicy = ERROR_POLICY
    kind = "lund_novikov"

    def __post_init__(self):
        _check_delta(self.delta)

    def coefficients(self, s, omega):
        inv = primitive_invariants(s, omega)
        d2 = self.delta**2
        shape = s.shape[:-2]
        coeffs = np.zeros(shape + (7,))
        coeffs[..., 0] = self.c1 * inv.s_norm * d2
        coeffs[..., 1] = self.c2 * d2
        coeffs[..., 2] = self.c3 * d2
        coeffs[..., 4] = self.c4 * d2
        if self.c5 != 0.0:
            coeffs[..., 5] = self.c5 * d2 / effective_norm(inv.s_norm, self.policy, inv)
        return coeffs, inv

    def to_config(self):
        return {"kind": self.kind, "c1": self.c1, "c2": self.c2, "c3": self.c3,
                "c4": self.c4, "c5": self.c5, "delta": self.delta, **_policy_config(self.policy)}


def kosovic(c1: float, c2: float, c4: float, delta: float = 1.0) -> LundNovikov:
    """Special case of Lund-Novikov with ``C3 = C5 = 0``."""
    return LundNovikov(c1=c1, c2=c2, c3=0.0, c4=c4, c5=0.0, delta=delta)


@dataclass(frozen=True)
class RDH05(ClosureModel):
    """Strain-only invariant model ``nu (2g - 3 v1 g') S + 3 nu g' (S^2)^d / |S|``.

    ``g`` is dimensionless and depends on ``v1`` only; it is stored as a
    polynomial whose (v3, v4) coefficients must vanish.
    """

    g: PolynomialG = field(default_factory=lambda: PolynomialG(c0=1.0))
    nu: float = 1.0
    policy: SingularityPolicy = ERROR_POLICY
    kind = "rdh05"

    def __post_init__(self):
        if any(getattr(self.g, k) != 0.0 for k in ("l3", "l4", "q33", "q34", "q44")):
            raise ValueError("rdh05 generator must depend on v1 only")

    def coefficients(self, s, omega):
        inv = scaled_invariants(primitive_invariants(s, omega), policy=self.policy)
        norm = effective_norm(inv.s_norm, self.policy)
        v1 = inv.v1
        zero = np.zeros_like(v1)
        g = self.g.value(v1, zero, zero)
        g1 = self.g.partials(v1, zero, zero)[0]
        shape = s.shape[:-2]
        coeffs = np.zeros(shape + (7,))
        coeffs[..., 0] = self.nu * (2.0 * g - 3.0 * v1 * g1)
        coeffs[..., 1] = 3.0 * self.nu * g1 / norm
        return coeffs, inv

    def to_config(self):
        return {"kind": self.kind, "nu": self.nu,
                **{f"g.{k}": v for k, v in self.g.to_config().items()}, **_policy_config(self.policy)}


def eval_reference(model: ClosureModel, s, omega) -> StressResult:
    return model.evaluate(s, omega)


def breakage_report(model: ClosureModel, groups=None, *, probes: int = 100, seed=0,
                    epsilons=None) -> dict:
    """Per-group equivariance defect statistics on a random probe ensemble.

    Returns a JSON-ready dict with, for each group, the epsilon grid used (if
    any), max/mean/min defect and whether the group is preserved to 1e-11.
    """
    from .symmetry import GROUP_KINDS, equivariance_defect, random_group_elements
    from .sampling import random_states, rng_from

    groups = list(groups or GROUP_KINDS)
    rng = rng_from(seed)
    s, w = random_states(probes, rng)
    out = {"model": model.to_config() if _serializable(model) else type(model).__name__,
           "probes": probes, "groups": {}}
    for name in groups:
        elements = random_group_elements(name, probes, rng, epsilons=epsilons)
        stats = equivariance_defect(model, elements, (s, w))
        entry = stats.to_dict()
        if name == "scaling":
            entry["epsilons"] = [e.eps for e in elements]
        entry["preserved"] = stats.max_defect <= 1e-11
        out["groups"][name] = entry
    return out


def _serializable(model) -> bool:
    try:
        json.dumps(model.to_config())
        return True
    except TypeError:
        return False
