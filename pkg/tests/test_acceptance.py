"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v`` or directly with
``python3 tests/test_acceptance.py``; the PASS/FAIL lines are listed in the
"acceptance criteria" section of the pytest summary.
"""
from __future__ import annotations

import subprocess
import sys
import tempfile
import time
from pathlib import Path

import numpy as np
import pytest

from symsgs import calculus, les
from symsgs.g_functions import make_polynomial_g
from symsgs.invariants import V1_QUOTED_BOUNDS, V1_SUPREMUM, invariants, v1_extremal_scan
from symsgs.model_zoo import RDH05, LundNovikov, Smagorinsky, kosovic
from symsgs.models import (GeneralAlphaModel, LinearForm, PotentialModel, ScaledAlphaModel, ZeroModel,
                           eval_general, total_dissipation)
from symsgs.sampling import random_states, rng_from
from symsgs.symmetry import GROUP_KINDS, equivariance_defect, probe_fields, probe_points, \
    random_group_elements

NU = 0.01


#: result lines, printed together in the terminal summary (see conftest.py)
RESULTS: list[str] = []


def report(number: int, passed: bool, detail: str) -> None:
    line = f"{'PASS' if passed else 'FAIL'} criterion {number}: {detail}"
    RESULTS.append(line)
    print(line)


# ---------------------------------------------------------------- shared pieces


def _mm(a, b):
    return [[sum(a[i][k] * b[k][j] for k in range(3)) for j in range(3)] for i in range(3)]


def _sub(a, b):
    return [[a[i][j] - b[i][j] for j in range(3)] for i in range(3)]


def _dev(a):
    t = (a[0][0] + a[1][1] + a[2][2]) / 3.0
    return [[a[i][j] - (t if i == j else 0.0) for j in range(3)] for i in range(3)]


def hand_rolled_terms(s, w):
    """Pure-Python construction of the seven generators for one state."""
    s, w = s.tolist(), w.tolist()
    s2, w2 = _mm(s, s), _mm(w, w)
    wsw = _mm(_mm(w, s), w)
    return np.array([_dev(s), _dev(s2), _dev(w2), _dev(wsw), _sub(_mm(s, w), _mm(w, s)),
                     _sub(_mm(s2, w), _mm(w, s2)), _sub(_mm(wsw, w), _mm(w, wsw))])


def hand_rolled_invariants(s, w):
    s, w = s.tolist(), w.tolist()
    s2, w2 = _mm(s, s), _mm(w, w)
    tr = lambda a: a[0][0] + a[1][1] + a[2][2]
    return (tr(s2), tr(_mm(s2, s)), tr(_mm(s2, w2)), tr(w2), tr(_mm(s, w2)),
            tr(_mm(_mm(_mm(_mm(_mm(s, s), w), w), s), w)))


# every coefficient stays away from zero on unit-gradient states (|const| > sum |weights|),
# so the term-wise comparison is not polluted by cancellation inside the coefficient
GENERAL_ALPHAS = (
    LinearForm.of(-0.8, i1=0.3),
    LinearForm.of(0.7, i2=0.5),
    LinearForm.of(0.5, b2=0.2),
    LinearForm.of(-0.6, b1=0.4),
    LinearForm.of(0.4, b3=-0.3),
    LinearForm.of(0.3, b4=2.0),
    LinearForm.of(-0.5, i1=0.1, b2=0.1),
)


def random_scaled_model(seed) -> ScaledAlphaModel:
    rng = rng_from(seed)
    alphas = []
    for _ in range(7):
        w = rng.uniform(-1, 1, 6)
        alphas.append(LinearForm.of(w[0], v1=w[1], v2=w[2], v3=w[3], v4=w[4], v5=w[5]))
    return ScaledAlphaModel(tuple(alphas))


def all_closures():
    g = make_polynomial_g(c0=0.05, c1=0.02, c2=-0.01, l3=0.01, l4=0.02, q33=0.1, q34=0.02, q44=0.1)
    return {
        "zero": ZeroModel(),
        "general": GeneralAlphaModel(GENERAL_ALPHAS),
        "scaled": random_scaled_model(0),
        "potential": PotentialModel(g),
        "smagorinsky": Smagorinsky(),
        "lund_novikov": LundNovikov(c1=-0.0578, c2=0.01, c3=0.01, c4=0.02, c5=0.005),
        "kosovic": kosovic(-0.0578, 0.01, 0.02),
        "rdh05": RDH05(make_polynomial_g(c0=1.0, c1=0.5, c2=-0.2), nu=NU),
    }


# ---------------------------------------------------------------- criteria


def test_criterion_1_basis_evaluation():
    s, w = random_states(1000, 101)
    model = GeneralAlphaModel(GENERAL_ALPHAS)
    t0 = time.perf_counter()
    res = eval_general(model, s, w)
    elapsed = time.perf_counter() - t0
    worst = 0.0
    for n in range(len(s)):
        terms = hand_rolled_terms(s[n], w[n])
        i1, i2, b1, b2, b3, b4 = hand_rolled_invariants(s[n], w[n])
        inv = dict(i1=i1, i2=i2, b1=b1, b2=b2, b3=b3, b4=b4)
        coeffs = [a.const + sum(c * inv[k] for k, c in a.terms) for a in GENERAL_ALPHAS]
        for k in range(7):
            ref = coeffs[k] * terms[k]
            got = res.coefficients[n, k] * res.basis_terms[n, k]
            worst = max(worst, float(np.linalg.norm(got - ref) / np.linalg.norm(ref)))
        # the assembled sum is compared on the scale of its parts, since the terms may cancel
        parts = [c * t for c, t in zip(coeffs, terms)]
        scale = sum(float(np.linalg.norm(p)) for p in parts)
        worst = max(worst, float(np.linalg.norm(res.tau_dev[n] - sum(parts))) / scale)
    passed = worst <= 1e-13 and elapsed < 1.0
    report(1, passed, f"max term-wise relative error {worst:.2e} (<= 1e-13), eval time {elapsed:.3f}s (< 1 s)")
    assert passed


def test_criterion_2_rotation_equivariance():
    s, w = random_states(1000, 202)
    rots = random_group_elements("rotation", 1000, 203)
    worst = {}
    for name, model in all_closures().items():
        stats = equivariance_defect(model, rots, (s, w))
        worst[name] = stats.max_defect if stats.count == 1000 else float("nan")
    top = max(worst.values())
    passed = all(v <= 1e-11 for v in worst.values())
    report(2, passed, f"max SO(3) defect {top:.2e} over {len(worst)} closures x 1000 triples (<= 1e-11)")
    assert passed, worst


def test_criterion_3_full_group_invariance():
    rng = rng_from(303)
    probes = 100
    s, w = random_states(probes, rng)
    fields = probe_fields(rng)
    t, x = probe_points(probes, rng)
    elements = {k: random_group_elements(k, probes, rng, degree=4) for k in GROUP_KINDS}
    worst = 0.0
    for i in range(10):
        model = random_scaled_model(1000 + i)
        for kind in GROUP_KINDS:
            a = equivariance_defect(model, elements[kind], (s, w))
            b = equivariance_defect(model, elements[kind], (fields, t, x))
            assert a.count == probes and b.count == probes
            worst = max(worst, a.max_defect, b.max_defect)
    breaking = {}
    for name, model in (("smagorinsky", Smagorinsky()),
                        ("lund_novikov", LundNovikov(c1=-0.0578, c2=0.01, c3=0.01, c4=0.02, c5=0.005))):
        a = equivariance_defect(model, elements["scaling"], (s, w))
        b = equivariance_defect(model, elements["scaling"], (fields, t, x))
        breaking[name] = min(a.min_defect, b.min_defect)
    passed = worst <= 1e-10 and all(v >= 0.05 for v in breaking.values())
    report(3, passed, f"scale-invariant family max defect {worst:.2e} (<= 1e-10); scaling defect "
           f"smagorinsky >= {breaking['smagorinsky']:.3f}, lund_novikov >= {breaking['lund_novikov']:.3f} (>= 0.05)")
    assert passed


def test_criterion_4_gradient_oracle():
    s, w = random_states(1000, 404)
    t0 = time.perf_counter()
    checks = {name: calculus.gradient_check(name, s, w) for name in ("I1", "I2", "B1", "B2", "B3", "B4")}
    elapsed = time.perf_counter() - t0
    worst = max(c.max_rel_error for c in checks.values())
    passed = worst <= 1e-6 and elapsed < 5.0
    report(4, passed, f"max relative FD mismatch {worst:.2e} over 6 gradients x 1000 states (<= 1e-6), "
           f"time {elapsed:.2f}s (< 5 s)")
    assert passed


def _generic_states(n, seed):
    """States with comparable strain and vorticity that are far from commuting."""
    s, w = random_states(8 * n, seed, omega_ratio=(1e-2, 10.0))
    ns, nw = np.linalg.norm(s, axis=(1, 2)), np.linalg.norm(w, axis=(1, 2))
    comm = np.linalg.norm(s @ w - w @ s, axis=(1, 2)) / (ns * nw)
    keep = (nw / ns >= 0.5) & (nw / ns <= 2.0) & (comm >= 0.25)
    return s[keep][:n], w[keep][:n]


def test_criterion_5_potential_self_adjointness():
    g = make_polynomial_g(c0=0.05, c1=0.02, c2=-0.01, l3=0.01, l4=0.02, q33=0.1, q34=0.02, q44=0.1)
    pot = PotentialModel(g)
    a = pot.to_scaled().alphas
    injected = ScaledAlphaModel(a[:4] + (LinearForm(0.1),) + a[5:])
    s, w = _generic_states(200, 505)
    pot_asym = max(calculus.hessian_symmetry_check(pot, x, y).asymmetry for x, y in zip(s, w))
    inj_asym = min(calculus.hessian_symmetry_check(injected, x, y).asymmetry for x, y in zip(s, w))
    passed = len(s) == 200 and pot_asym <= 1e-5 and inj_asym > 0.01
    report(5, passed, f"potential asymmetry {pot_asym:.2e} (<= 1e-5); with commutator coefficient 0.1 "
           f"min asymmetry {inj_asym:.3f} (> 0.01) on {len(s)} generic states")
    assert passed


def test_criterion_6_dissipation_identity():
    s1, w1 = random_states(5000, 606)
    s2, w2 = random_states(5000, 607, omega_ratio=(1e-2, 10.0))
    s, w = np.concatenate([s1, s2]), np.concatenate([w1, w2])
    inv = invariants(s, w)
    i1 = inv.i1
    generators = {
        "general": make_polynomial_g(c0=0.003, c1=-0.004, c2=0.002, l3=0.001, l4=-0.002,
                                     q33=0.005, q34=-0.001, q44=0.003),
        "certified_v1": make_polynomial_g(c0=-NU, c1=NU),
    }
    worst_identity = 0.0
    for g in generators.values():
        m = PotentialModel(g)
        lhs = total_dissipation(m, NU, s, w)
        rhs = m.dissipation_identity(NU, s, w)
        _, g3, g4 = g.partials(inv.v1, inv.v3, inv.v4)
        scale = 2 * i1 * (NU + np.abs(g.value(inv.v1, inv.v3, inv.v4)) + np.abs(inv.v3 * g3) + np.abs(inv.v4 * g4))
        worst_identity = max(worst_identity, float(np.max(np.abs(lhs - rhs) / scale)))
    min_certified = min(float(np.min(total_dissipation(PotentialModel(generators[k]), NU, s, w) / (NU * i1)))
                        for k in ("certified_v1",))
    phi_bad = total_dissipation(PotentialModel(make_polynomial_g(c0=2 * NU)), NU, s, w)
    bad_err = float(np.max(np.abs(phi_bad + 2 * NU * i1) / (NU * i1)))
    passed = worst_identity <= 1e-10 and min_certified >= -1e-12 and bad_err <= 1e-12 and np.all(phi_bad < 0)
    report(6, passed, f"identity error {worst_identity:.2e} (<= 1e-10) on 1e4 states; certified "
           f"min Phi_T/(nu I1) = {min_certified:.3f} (>= -1e-12); g = 2 nu gives Phi_T = -2 nu I1 "
           f"to {bad_err:.1e}, all negative")
    assert passed


def test_criterion_7_v1_bound():
    res = v1_extremal_scan(100_000, seed=707)
    rep = res.report()
    passed = (0.40 <= res.max_abs_v1 <= V1_SUPREMUM + 1e-9 and res.polished
              and set(rep["quoted_bounds"].values()) == set(V1_QUOTED_BOUNDS.values())
              and rep["exceeds_remark_bound"])
    report(7, passed, f"max |v1| = {res.max_abs_v1:.15f} in [0.40, 1/sqrt(6) + 1e-9]; report quotes "
           f"remark bound {V1_QUOTED_BOUNDS['remark']:.5f} and positivity bound "
           f"{V1_QUOTED_BOUNDS['positivity_theorem']:.5f}")
    assert passed


def test_criterion_8_solver_stability():
    t0 = time.perf_counter()
    cfg = dict(n=16, nu=NU, steps=500, initial="taylor_green")
    good = les.run(les.RunConfig(model=PotentialModel(make_polynomial_g(c0=-NU, c1=NU)), **cfg))
    bad = les.run(les.RunConfig(model=PotentialModel(make_polynomial_g(c0=2 * NU)), **cfg))
    elapsed = time.perf_counter() - t0
    e = np.array(good.budget.energy)
    worst_growth = float(np.max(e[1:] / e[:-1] - 1.0))
    passed = (good.steps_taken == 500 and good.blowup is None and not good.growth_steps
              and worst_growth <= 1e-3 and min(bad.budget.phi_sgs) < 0 and elapsed <= 300)
    report(8, passed, f"certified run: 500 steps, max per-step energy growth {worst_growth:.2e} (<= 1e-3), "
           f"no blow-up; g = 2 nu run: min Phi_sgs = {min(bad.budget.phi_sgs):.3g} (< 0)"
           f"{', ' + bad.blowup if bad.blowup else ''}; time {elapsed:.0f}s (<= 300 s)")
    assert passed


CLI_RUNS = {
    "invariants": ["invariants", "--random", "100", "--seed", "7"],
    "check-symmetries": ["check-symmetries", "--preset", "lund_novikov", "--seed", "3"],
    "certify": ["certify", "--preset", "certified", "--seed", "3"],
    "gradcheck": ["gradcheck", "--seed", "3"],
    "simulate": ["simulate", "--preset", "taylor_green", "--steps", "40", "--dump"],
    "breakage": ["breakage", "--preset", "smagorinsky", "--seed", "3"],
}


def _cli_outputs(args, workdir: Path) -> dict:
    out_dir = workdir / "out"
    proc = subprocess.run([sys.executable, "-m", "symsgs.cli", *args, "--out", str(out_dir)],
                          capture_output=True, cwd=workdir, timeout=600)
    files = {p.name: p.read_bytes() for p in sorted(out_dir.iterdir())} if out_dir.exists() else {}
    return {"code": proc.returncode, "stdout": proc.stdout, "files": files}


def test_criterion_9_cli_determinism():
    mismatched = []
    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        for name, args in CLI_RUNS.items():
            runs = []
            for k in range(2):
                d = tmp / f"{name}-{k}"
                d.mkdir()
                runs.append(_cli_outputs(args, d))
            a, b = runs
            if a != b or not a["files"] or a["code"] == 2:
                mismatched.append(name)
    passed = not mismatched
    report(9, passed, f"{len(CLI_RUNS) - len(mismatched)}/{len(CLI_RUNS)} commands byte-identical across "
           f"two runs{'; differing: ' + ', '.join(mismatched) if mismatched else ''}")
    assert passed


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))
