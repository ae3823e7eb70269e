"""``symsgs`` command-line entry point.

Exit codes: 0 when every check passes, 1 for a verified negative result
(inverted by ``--expect-fail``), 2 for execution errors.  Outputs are
written with round-trip float formatting so identical config and seed give
identical bytes.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import calculus, les
from .config import Config, ConfigError, load_config, model_from_config, preset
from .g_functions import certify_positivity
from .invariants import (ERROR_POLICY, PRIMITIVE_NAMES, SCALED_NAMES, V1_SUPREMUM, SingularityPolicy,
                         primitive_invariants, scaled_invariants)
from .model_zoo import breakage_report
from .models import PotentialModel
from .sampling import random_states, rng_from
from .symmetry import (GROUP_KINDS, equivariance_defect, probe_fields, probe_points,
                       random_group_elements)
from .tensor_core import decompose

log = logging.getLogger("symsgs")

EXIT_PASS, EXIT_NEGATIVE, EXIT_ERROR = 0, 1, 2

DEFAULT_TOLERANCE = {
    "check-symmetries": 1e-11,
    "breakage": 1e-11,
    "gradcheck": 1e-6,
    "certify": 1e-12,
    "simulate": 1e-3,
}


# ---------------------------------------------------------------- output helpers


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


def dumps_json(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n"


def _emit(args, filename: str, text: str) -> None:
    if args.out is None:
        sys.stdout.write(text)
        return
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / filename).write_text(text, encoding="utf-8")


def _status(passed: bool, args) -> int:
    negative = not passed
    if args.expect_fail:
        negative = not negative
    return EXIT_NEGATIVE if negative else EXIT_PASS


def _tolerance(args, cfg: Config, command: str) -> float:
    if args.tolerance is not None:
        return args.tolerance
    return cfg.get("run", "tolerance", DEFAULT_TOLERANCE.get(command))


def _seed(args, cfg: Config) -> int:
    if args.seed is not None:
        return args.seed
    return cfg.get("run", "seed", 0)


# ---------------------------------------------------------------- invariants

_PRESET_GRADS = {
    "plane_shear": [[0.0, 1.0, 0.0], [0.0, 0.0, 0.0], [0.0, 0.0, 0.0]],
    "solid_rotation": [[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 0.0]],
    "extremal_strain": (np.diag([2.0, -1.0, -1.0]) / np.sqrt(6.0)).tolist(),
}


def _read_grads(path) -> np.ndarray:
    data = np.loadtxt(path, delimiter=",", ndmin=2, comments="#")
    if data.shape[1] != 9:
        raise ConfigError(f"{path}: expected 9 velocity-gradient columns per row, got {data.shape[1]}")
    return data.reshape(-1, 3, 3)


def _invariant_states(sec: dict, args, seed: int):
    if args.random is not None or "random" in sec:
        n = args.random if args.random is not None else sec["random"]
        s, w = random_states(n, seed)
        return s, w
    if args.input or "input" in sec:
        grads = _read_grads(args.input or sec["input"])
    elif args.grad or "grad" in sec:
        vals = [float(x) for x in (args.grad or sec["grad"]).split(",")]
        if len(vals) != 9:
            raise ConfigError("--grad needs 9 comma-separated entries (row-major)")
        grads = np.asarray(vals).reshape(1, 3, 3)
    else:
        name = sec.get("source", "plane_shear")
        if name not in _PRESET_GRADS:
            raise ConfigError(f"unknown state source {name!r}; available: {sorted(_PRESET_GRADS)}")
        grads = np.asarray(_PRESET_GRADS[name]).reshape(1, 3, 3)
    dec = decompose(grads)
    return dec.s, dec.omega


def invariants_table(s, w, policy: SingularityPolicy = ERROR_POLICY) -> str:
    """CSV of primitive and scaled invariants; scaled columns are ``nan`` on singular rows."""
    inv = primitive_invariants(s, w)
    n = len(s)
    scaled = np.full((n, 5), np.nan)
    if policy.mode == "regularize":
        ok = np.ones(n, dtype=bool)
    else:
        ok = inv.s_norm > policy.threshold * policy.reference_scale
    if np.any(ok):
        sub = scaled_invariants(primitive_invariants(s[ok], w[ok]), policy=policy)
        scaled[ok] = np.stack(sub.scaled, axis=-1)
    prim = np.stack(inv.primitive + (inv.s_norm,), axis=-1)
    rows = [",".join(PRIMITIVE_NAMES + ("s_norm",) + SCALED_NAMES)]
    for a, b in zip(prim, scaled):
        rows.append(",".join(repr(float(v)) for v in np.concatenate([a, b])))
    return "\n".join(rows) + "\n"


def cmd_invariants(args, cfg: Config) -> int:
    sec = cfg.section("invariants")
    s, w = _invariant_states(sec, args, _seed(args, cfg))
    if args.omega_zero or sec.get("omega_zero", False):
        w = np.zeros_like(w)
    policy = ERROR_POLICY
    if sec.get("singularity", "error") == "regularize":
        policy = SingularityPolicy.regularized(1e-8, sec.get("reference_scale", 1.0))
    _emit(args, "invariants.csv", invariants_table(s, w, policy))
    return EXIT_PASS


# ---------------------------------------------------------------- symmetries


def _model(cfg: Config):
    return model_from_config(cfg.section("model") or {"kind": "zero"})


def symmetry_report(model, groups, probes: int, seed: int, path: str = "state", degree: int = 4,
                    tolerance: float = 1e-11) -> dict:
    rng = rng_from(seed)
    s, w = random_states(probes, rng)
    fields = probe_fields(rng)
    t, x = probe_points(probes, rng)
    report = {"model": model.to_config(), "probes": probes, "seed": seed, "tolerance": tolerance,
              "groups": {}}
    passed = True
    for kind in groups:
        elements = random_group_elements(kind, probes, rng, degree=degree)
        entry = {}
        paths = ("state", "field") if path == "both" else (path,)
        for p in paths:
            ens = (s, w) if p == "state" else (fields, t, x)
            stats = equivariance_defect(model, elements, ens, path=p)
            ok = stats.count > 0 and stats.max_defect <= tolerance
            passed &= ok
            entry[p] = {**stats.to_dict(), "passed": ok}
        report["groups"][kind] = entry
    report["passed"] = passed
    return report


def cmd_check_symmetries(args, cfg: Config) -> int:
    sec = cfg.section("symmetries")
    groups = args.groups or sec.get("groups", GROUP_KINDS)
    for g in groups:
        if g not in GROUP_KINDS:
            raise ConfigError(f"unknown group {g!r}; expected one of {GROUP_KINDS}")
    tol = _tolerance(args, cfg, "check-symmetries")
    path = sec.get("path", "both")
    if path not in ("state", "field", "both"):
        raise ConfigError("symmetries.path must be state, field or both")
    report = symmetry_report(_model(cfg), groups, args.probes or sec.get("probes", 100), _seed(args, cfg),
                             path, sec.get("degree", 4), tol)
    _emit(args, "symmetries.json", dumps_json(report))
    return _status(report["passed"], args)


def cmd_breakage(args, cfg: Config) -> int:
    sec = cfg.section("breakage")
    tol = _tolerance(args, cfg, "breakage")
    names = sec.get("models")
    if names:
        models = [(n, model_from_config(preset(n).section("model"))) for n in names]
    else:
        models = [(None, _model(cfg))]
    groups = args.groups or sec.get("groups", GROUP_KINDS)
    probes = args.probes or sec.get("probes", 100)
    reports = []
    preserved = True
    for label, m in models:
        rep = breakage_report(m, groups, probes=probes, seed=_seed(args, cfg))
        if label is not None:
            rep["preset"] = label
        for entry in rep["groups"].values():
            entry["preserved"] = bool(entry["max"] <= tol)
            preserved &= entry["preserved"]
        reports.append(rep)
    out = {"tolerance": tol, "reports": reports, "all_preserved": preserved}
    _emit(args, "breakage.json", dumps_json(out))
    return _status(preserved, args)


# ---------------------------------------------------------------- certify / gradcheck


def cmd_certify(args, cfg: Config) -> int:
    model = _model(cfg)
    if not isinstance(model, PotentialModel):
        raise ConfigError("certify needs a [model] of kind 'potential'")
    sec = cfg.section("certify")
    if "nu" not in sec:
        raise ConfigError("certify needs [certify] nu")
    cert = certify_positivity(model.g, sec["nu"], v_star=sec.get("v_star", V1_SUPREMUM),
                              samples=sec.get("samples", 4096), seed=_seed(args, cfg),
                              method=sec.get("method", "auto"), tol=_tolerance(args, cfg, "certify"))
    out = {"generator": model.g.to_config(), **cert.to_dict()}
    _emit(args, "certificate.json", dumps_json(out))
    return _status(cert.positive, args)


def cmd_gradcheck(args, cfg: Config) -> int:
    sec = cfg.section("gradcheck")
    tol = _tolerance(args, cfg, "gradcheck")
    targets = sec.get("targets", tuple(calculus.INVARIANT_GRADIENTS))
    n = sec.get("states", 1000)
    seed = _seed(args, cfg)
    s, w = random_states(n, seed)
    out = {"tolerance": tol, "states": n, "seed": seed, "gradients": {}}
    passed = True
    for name in targets:
        if name not in calculus.INVARIANT_GRADIENTS:
            raise ConfigError(f"unknown gradient target {name!r}; available: {sorted(calculus.INVARIANT_GRADIENTS)}")
        chk = calculus.gradient_check(name, s, w, rel_step=sec.get("rel_step", 1e-5))
        ok = chk.passed(tol)
        passed &= ok
        out["gradients"][name] = {"max_rel_error": chk.max_rel_error, "passed": ok}
    if sec.get("hessian", False):
        model = _model(cfg)
        htol = sec.get("hessian_tolerance", 1e-5)
        hs, hw = random_states(sec.get("hessian_states", 50), seed + 1)
        worst = max(float(calculus.hessian_symmetry_check(model, a, b).asymmetry) for a, b in zip(hs, hw))
        ok = worst <= htol
        passed &= ok
        out["hessian"] = {"model": model.to_config(), "max_asymmetry": worst, "tolerance": htol,
                          "passed": ok}
    out["passed"] = passed
    _emit(args, "gradcheck.json", dumps_json(out))
    return _status(passed, args)


# ---------------------------------------------------------------- simulate

_RUN_KEYS = ("n", "length", "nu", "steps", "dt", "cfl", "diffusive", "initial", "amplitude",
             "sample_every", "blowup_factor", "energy_tol", "reg_rel_eps")


def run_config_from(cfg: Config, seed: int, tolerance: float | None = None) -> les.RunConfig:
    sec = cfg.section("simulate")
    kw = {k: sec[k] for k in _RUN_KEYS if k in sec}
    if tolerance is not None:
        kw["energy_tol"] = tolerance
    if kw.get("initial", "taylor_green") not in les.INITIAL_CONDITIONS:
        raise ConfigError(f"unknown initial condition {kw['initial']!r}; available: {sorted(les.INITIAL_CONDITIONS)}")
    return les.RunConfig(seed=seed, model=_model(cfg), **kw)


def cmd_simulate(args, cfg: Config) -> int:
    explicit_tol = args.tolerance if args.tolerance is not None else cfg.get("run", "tolerance")
    rc = run_config_from(cfg, _seed(args, cfg), explicit_tol)
    if args.steps is not None:
        rc = les.RunConfig(**{**rc.__dict__, "steps": args.steps})
    result = les.run(rc)
    _emit(args, "budget.csv", result.budget.to_csv())
    summary = {
        "model": rc.model.to_config(),
        "n": rc.n, "nu": rc.nu, "steps_requested": rc.steps, "steps_taken": result.steps_taken,
        "energy_tol": rc.energy_tol, "blowup": result.blowup, "growth_steps": result.growth_steps,
        "max_divergence": result.max_divergence, "energy_bounded": result.energy_bounded,
        "min_phi_sgs": min(result.budget.phi_sgs), "final_time": result.state.t,
    }
    if isinstance(rc.model, PotentialModel):
        summary["certificate"] = certify_positivity(rc.model.g, rc.nu, seed=_seed(args, cfg)).to_dict()
    if args.out is not None:
        _emit(args, "summary.json", dumps_json(summary))
        if args.dump or cfg.get("simulate", "dump", False):
            les.dump_fields(result.state, Path(args.out) / "fields.bin")
    elif args.dump:
        raise ConfigError("--dump needs --out")
    return _status(result.energy_bounded, args)


# ---------------------------------------------------------------- parser

COMMANDS = {
    "invariants": cmd_invariants,
    "check-symmetries": cmd_check_symmetries,
    "certify": cmd_certify,
    "gradcheck": cmd_gradcheck,
    "simulate": cmd_simulate,
    "breakage": cmd_breakage,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", action="append", default=[], metavar="FILE",
                        help="config file (repeatable; later files override earlier ones)")
    common.add_argument("--preset", action="append", default=[], metavar="NAME",
                        help="named preset applied before config files (repeatable)")
    common.add_argument("--seed", type=int, default=None, help="random seed (overrides [run] seed)")
    common.add_argument("--out", default=None, metavar="DIR", help="output directory (default: stdout)")
    common.add_argument("--tolerance", type=float, default=None, help="override the pass tolerance")
    common.add_argument("--expect-fail", action="store_true",
                        help="a negative result is the expected outcome: swap exit codes 0 and 1")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="symsgs", description="Invariant subgrid closures: verification and demo runs.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("invariants", parents=[common], help="tabulate invariants of velocity-gradient states")
    p.add_argument("--random", type=int, default=None, metavar="N", help="random ensemble of N unit states")
    p.add_argument("--grad", default=None, help="one inline gradient: 9 comma-separated row-major entries")
    p.add_argument("--input", default=None, help="CSV file with 9 gradient entries per row")
    p.add_argument("--omega-zero", action="store_true", help="drop the vorticity part")

    for name, text in (("check-symmetries", "equivariance defects of a closure"),
                       ("breakage", "symmetry-breakage report of one or more closures")):
        p = sub.add_parser(name, parents=[common], help=text)
        p.add_argument("--groups", type=lambda s: tuple(x for x in s.split(",") if x), default=None,
                       help=f"comma-separated subset of {','.join(GROUP_KINDS)}")
        p.add_argument("--probes", type=int, default=None)

    sub.add_parser("certify", parents=[common], help="positivity certificate of a potential generator")
    sub.add_parser("gradcheck", parents=[common], help="finite-difference check of invariant gradients")

    p = sub.add_parser("simulate", parents=[common], help="periodic-box run with energy budget")
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--dump", action="store_true", help="also write the final fields (needs --out)")
    return parser


def resolve_config(presets, files) -> Config:
    cfg = Config()
    for name in presets:
        cfg = cfg.merged(preset(name))
    for path in files:
        cfg = cfg.merged(load_config(path))
    return cfg


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args.preset, args.config)
        return COMMANDS[args.command](args, cfg)
    except Exception as exc:  # any failure to complete is an execution error
        if args.verbose:
            log.exception("command failed")
        print(f"symsgs {args.command}: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
