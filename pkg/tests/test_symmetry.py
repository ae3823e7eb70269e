import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from symsgs import symmetry as sy
from symsgs.models import GeneralAlphaModel, LinearForm, ScaledAlphaModel
from symsgs.sampling import random_states

NU = 0.1
EXACT = {"plane_shear": sy.plane_shear, "solid_rotation": sy.solid_rotation,
         "taylor_green_2d": lambda: sy.taylor_green_2d(NU)}


def ns_residual(f, t, x, nu=NU, h=1e-4):
    """Pointwise momentum residual by central differences of u and p."""
    dudt = (f.u(t + h, x) - f.u(t - h, x)) / (2 * h)
    adv = f.grad(t, x) @ f.u(t, x)
    gp, lap = np.zeros(3), np.zeros(3)
    for j in range(3):
        e = np.zeros(3)
        e[j] = h
        gp[j] = (f.p(t, x + e) - f.p(t, x - e)) / (2 * h)
        lap += (f.u(t, x + e) - 2 * f.u(t, x) + f.u(t, x - e)) / h**2
    return np.abs(dudt + adv + gp / f.rho - nu * lap).max()


def invariant_model():
    return ScaledAlphaModel(tuple(LinearForm.of(0.1 * (k + 1), v1=0.2, v2=-0.1, v3=0.05, v5=0.3)
                                  for k in range(7)))


@pytest.mark.parametrize("kind", sy.GROUP_KINDS)
@pytest.mark.parametrize("name", sorted(EXACT))
def test_transformed_solutions_still_solve_the_equations(kind, name):
    rng = np.random.default_rng(5)
    f = EXACT[name]()
    for g in sy.random_group_elements(kind, 3, rng, degree=4):
        fh = g.act_on_field(f)
        for _ in range(3):
            t, x = rng.uniform(0, 0.5), rng.uniform(-1, 1, 3)
            scale = 1.0 + np.abs(fh.u(t, x)).max() ** 2 + np.abs(fh.grad(t, x)).max()
            assert ns_residual(fh, t, x) <= 1e-5 * scale, (kind, name, g)


def test_time_shift_leaves_steady_field_unchanged():
    f = sy.plane_shear()
    fh = sy.act_on_field(sy.TimeShift(0.7), f)
    x = np.random.default_rng(0).uniform(-1, 1, (10, 3))
    np.testing.assert_array_equal(fh.u(0.3, x), f.u(0.3, x))


def test_constant_velocity_boost():
    c = np.array([0.3, -0.2, 0.5])
    g = sy.Galilean(np.array([[0.0, 0.0, 0.0], c]))
    f = sy.abc_flow()
    fh = g.act_on_field(f)
    t, x = 0.4, np.array([0.1, 0.2, 0.3])
    th, xh = g.map_point(t, x)
    np.testing.assert_allclose(fh.u(th, xh), f.u(t, x) + c, atol=1e-15)
    np.testing.assert_allclose(fh.grad(th, xh), f.grad(t, x), atol=1e-15)


def test_scaling_plane_shear():
    eps = 0.5
    g = sy.Scaling(eps)
    fh = g.act_on_field(sy.plane_shear())
    xh = np.array([0.3, 0.7, -0.2])
    np.testing.assert_allclose(fh.u(1.0, xh), np.exp(-eps) * np.array([np.exp(-eps) * xh[1], 0, 0]))
    np.testing.assert_allclose(fh.grad(1.0, xh), np.exp(-2 * eps) * sy.plane_shear().grad(0.0, xh))


def test_induced_state_transforms(shear):
    s, w = shear
    r = np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]])
    sh, wh, expect = sy.induced_state_transform(sy.Rotation(r), s, w)
    np.testing.assert_allclose(sh, [[0, -0.5, 0], [-0.5, 0, 0], [0, 0, 0]], atol=1e-16)
    np.testing.assert_allclose(expect(s), sh)
    sh, wh, expect = sy.induced_state_transform(sy.Scaling(0.2), s, w)
    np.testing.assert_allclose(sh, np.exp(-0.4) * s)
    np.testing.assert_allclose(wh, np.exp(-0.4) * w)
    for g in (sy.PressureShift([1.0, 2.0]), sy.TimeShift(1.0), sy.Galilean(np.ones((5, 3)))):
        sh, wh, expect = sy.induced_state_transform(g, s, w)
        assert sh is not None and np.array_equal(sh, s) and np.array_equal(wh, w)


@pytest.mark.parametrize("field", sy.probe_fields(0), ids=lambda f: f.name)
def test_probe_fields_have_consistent_gradients(field):
    t, x = sy.probe_points(20, 1)
    for ti, xi in zip(t, x):
        assert field.gradient_fd_error(ti, xi) < 1e-8
        assert abs(field.divergence(ti, xi)) < 1e-12


@pytest.mark.parametrize("kind", sy.GROUP_KINDS)
def test_invariant_model_on_states_and_fields(kind):
    m = invariant_model()
    s, w = random_states(1000, 2)
    elements = sy.random_group_elements(kind, 1000, 3)
    assert sy.equivariance_defect(m, elements, (s, w)).max_defect <= 1e-11
    t, x = sy.probe_points(200, 4)
    stats = sy.equivariance_defect(m, elements[:200], (sy.probe_fields(5), t, x))
    assert stats.path == "field" and stats.count > 0 and stats.max_defect <= 1e-10
    assert sy.path_agreement(m, elements[:200], sy.probe_fields(5), t, x) <= 1e-10


def test_dimensionally_inconsistent_model():
    m = GeneralAlphaModel((LinearForm.of(i1=1.0),))
    s, w = random_states(100, 6)
    assert sy.equivariance_defect(m, sy.Scaling(0.3), (s, w)).min_defect > 0.1
    rot = sy.random_group_elements("rotation", 100, 7)
    assert sy.equivariance_defect(m, rot, (s, w)).max_defect <= 1e-12


def test_singular_probes_are_skipped_not_fatal():
    m = invariant_model()
    w = np.array([[[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 0.0]]])
    stats = sy.equivariance_defect(m, sy.Scaling(0.1), (np.zeros((1, 3, 3)), w))
    assert stats.skipped == 1 and stats.count == 0


def test_composition_on_fields():
    rng = np.random.default_rng(8)
    f = sy.random_solenoidal(4, 9)
    t, x = 0.3, np.array([0.4, -0.2, 1.1])
    for kind in sy.GROUP_KINDS:
        a, b = sy.random_group_elements(kind, 2, rng)
        two = b.act_on_field(a.act_on_field(f))
        one = b.compose(a).act_on_field(f)
        th, xh = b.compose(a).map_point(t, x)
        np.testing.assert_allclose(two.u(th, xh), one.u(th, xh), atol=1e-10)
        np.testing.assert_allclose(two.grad(th, xh), one.grad(th, xh), atol=1e-10)
        # pressures agree up to a function of time only
        e = np.array([0.5, 0.1, -0.3])
        d0 = two.p(th, xh) - one.p(th, xh)
        d1 = two.p(th, xh + e) - one.p(th, xh + e)
        assert d0 == pytest.approx(d1, abs=1e-9)


def test_group_validation():
    with pytest.raises(ValueError):
        sy.random_group_elements("reflection", 2)
    with pytest.raises(ValueError):
        sy.Rotation(np.diag([1.0, 1.0, -1.0]))
    with pytest.raises(ValueError):
        sy.Galilean(np.ones((3, 2)))
    with pytest.raises(TypeError):
        sy.Scaling(0.1).compose(sy.TimeShift(0.1))


def test_scaling_parameters_are_bounded_away_from_identity():
    eps = [g.eps for g in sy.random_group_elements("scaling", 500, 0)]
    assert min(abs(e) for e in eps) >= 0.1 and max(abs(e) for e in eps) <= 1.0


@given(st.floats(-1.0, 1.0), st.floats(-1.0, 1.0))
def test_scaling_is_a_one_parameter_group(e1, e2):
    s, w = random_states(1, 0)
    a, b = sy.Scaling(e1), sy.Scaling(e2)
    twice = b.state_transform(*a.state_transform(s, w))
    once = b.compose(a).state_transform(s, w)
    np.testing.assert_allclose(twice[0], once[0], rtol=1e-13)
