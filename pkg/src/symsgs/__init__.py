"""Symmetry-preserving subgrid-scale closures for large-eddy simulation.

Submodules:

* :mod:`symsgs.tensor_core` - 3x3 tensor algebra, broadcasting over stacks
* :mod:`symsgs.invariants` - primitive and scale-free invariants of (S, W)
* :mod:`symsgs.calculus` - closed-form invariant gradients and FD oracles
* :mod:`symsgs.g_functions` - generators of potential closures, positivity certificates
* :mod:`symsgs.models` - general, scale-invariant and potential closures
* :mod:`symsgs.model_zoo` - Smagorinsky, Lund-Novikov and related reference closures
* :mod:`symsgs.symmetry` - the five symmetry groups and equivariance defects
* :mod:`symsgs.les` - periodic-box solver with energy budgets
* :mod:`symsgs.cli` - the ``symsgs`` command
"""
from .invariants import InvariantSet, SingularityPolicy, SingularStateError
from .models import (ClosureModel, GeneralAlphaModel, LinearForm, PotentialModel, ScaledAlphaModel,
                     StressResult, ZeroModel)
from .g_functions import PolynomialG, certify_positivity, make_polynomial_g

__version__ = "0.1.0"

__all__ = [
    "ClosureModel", "GeneralAlphaModel", "InvariantSet", "LinearForm", "PolynomialG", "PotentialModel",
    "ScaledAlphaModel", "SingularStateError", "SingularityPolicy", "StressResult", "ZeroModel",
    "certify_positivity", "make_polynomial_g",
]
