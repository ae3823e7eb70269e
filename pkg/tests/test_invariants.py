import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from symsgs import invariants as iv
from symsgs.sampling import random_deviators, random_states

from conftest import generic_states


def test_primitive_strain_only():
    inv = iv.primitive_invariants(np.diag([1.0, -1.0, 0.0]), np.zeros((3, 3)))
    assert inv.primitive == (2.0, 0.0, 0.0, 0.0, 0.0, 0.0)


def test_primitive_plane_shear(shear):
    inv = iv.primitive_invariants(*shear)
    np.testing.assert_allclose(inv.primitive, (0.5, 0.0, -0.125, -0.5, 0.0, 0.0), atol=1e-16)


def test_primitive_solid_rotation():
    w = np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 0.0]])
    inv = iv.primitive_invariants(np.zeros((3, 3)), w)
    assert inv.primitive == (0.0, 0.0, 0.0, -2.0, 0.0, 0.0)


def test_scaled_plane_shear(shear):
    inv = iv.invariants(*shear)
    np.testing.assert_allclose(inv.scaled, (0.0, -0.5, -1.0, 0.0, 0.0), rtol=1e-14, atol=1e-16)


def test_scaled_extremal_strain():
    s = np.diag([2.0, -1.0, -1.0]) / np.sqrt(6.0)
    inv = iv.invariants(s, np.zeros((3, 3)))
    assert inv.v1 == pytest.approx(1.0 / np.sqrt(6.0), rel=1e-14)
    assert inv.scaled[1:] == (0.0, 0.0, 0.0, 0.0)


@pytest.mark.parametrize("lam", [1e-3, 1.0, 1e3])
def test_scaled_invariants_are_scale_free(lam):
    s, w = random_states(50, 3)
    ref = np.stack(iv.invariants(s, w).scaled)
    got = np.stack(iv.invariants(lam * s, lam * w).scaled)
    np.testing.assert_allclose(got, ref, rtol=1e-12, atol=1e-12 * np.abs(ref).max())


def test_singular_state_names_diverging_invariants():
    w = np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 0.0]])
    with pytest.raises(iv.SingularStateError, match=r"v3 \(b2=-2\)"):
        iv.invariants(np.zeros((3, 3)), w)


def test_regularized_policy_is_finite_at_zero_strain():
    w = np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 0.0]])
    pol = iv.SingularityPolicy.regularized(1e-3)
    inv = iv.invariants(np.zeros((3, 3)), w, pol)
    assert inv.v3 == pytest.approx(-2.0 / 1e-6)
    assert pol.eps == pytest.approx(1e-3)
    with pytest.raises(ValueError):
        iv.SingularityPolicy(mode="ignore")


def test_v1_matches_eigenvalue_closed_form():
    # unit trace-free S has eigenvalues sqrt(2/3) cos(theta + 2 pi k / 3) and v1 = cos(3 theta)/sqrt(6)
    s = random_deviators(200, 11)
    lam = np.linalg.eigvalsh(s)
    theta = np.arccos(np.clip(lam[:, 2] / np.sqrt(2.0 / 3.0), -1, 1))
    v1 = iv.invariants(s, np.zeros_like(s)).v1
    np.testing.assert_allclose(v1, np.cos(3 * theta) / np.sqrt(6.0), atol=1e-12)


def test_max_abs_v1_examples():
    best, arg = iv.max_abs_v1([np.diag([1.0, -1.0, 0.0]) / np.sqrt(2), np.diag([2.0, -1.0, -1.0]) / np.sqrt(6)])
    assert best == pytest.approx(1 / np.sqrt(6), rel=1e-14)
    np.testing.assert_allclose(arg, np.diag([2.0, -1.0, -1.0]) / np.sqrt(6))
    shear = np.array([[0.0, 1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 0.0]])
    assert iv.max_abs_v1([shear, 3.0 * shear])[0] == 0.0
    assert iv.max_abs_v1(np.diag([1.0, -1.0, 0.0]) / np.sqrt(2))[0] == 0.0


def test_v1_scan_reaches_supremum_and_reports_both_constants():
    res = iv.v1_extremal_scan(20000, seed=4)
    assert 0.40 <= res.max_abs_v1 <= iv.V1_SUPREMUM + 1e-9
    rep = res.report()
    assert rep["exceeds_remark_bound"] and rep["within_positivity_bound"]
    assert set(rep["quoted_bounds"]) == {"remark", "positivity_theorem"}
    unpolished = iv.v1_extremal_scan(100, seed=4, polish=False)
    assert unpolished.max_abs_v1 <= res.max_abs_v1
    with pytest.raises(ValueError):
        iv.v1_extremal_scan(0)


@given(generic_states())
def test_v1_bounded_by_supremum(state):
    s, w = state
    assert abs(iv.invariants(s, w).v1) <= iv.V1_SUPREMUM * (1 + 1e-12)


@given(generic_states(), st.floats(min_value=1e-3, max_value=1e3))
def test_degrees_of_homogeneity(state, lam):
    s, w = state
    a, b = iv.primitive_invariants(s, w), iv.primitive_invariants(lam * s, lam * w)
    for name, k in zip(iv.PRIMITIVE_NAMES, (2, 3, 4, 2, 3, 6)):
        x, y = getattr(a, name), getattr(b, name)
        assert y == pytest.approx(lam**k * x, rel=1e-9, abs=1e-12 * lam**k * max(1.0, np.abs(s).max() ** k))


@given(generic_states(), st.integers(0, 2**32 - 1))
def test_rotation_invariance(state, seed):
    from symsgs.sampling import random_rotations
    s, w = state
    r = random_rotations(1, seed)[0]
    a = iv.invariants(s, w)
    b = iv.invariants(r @ s @ r.T, r @ w @ r.T)
    scale = max(1.0, np.abs(s).max() + np.abs(w).max()) ** 6
    np.testing.assert_allclose(b.primitive, a.primitive, rtol=1e-9, atol=1e-11 * scale)
