"""Flat ``key = value`` run configuration with sections, plus named presets.

Every section has a fixed key set; unknown sections and keys are rejected so
that a typo can never silently fall back to a default.  The ``[model]``
section is validated against the chosen ``kind``.
"""
from __future__ import annotations

import configparser
from dataclasses import dataclass, field

from .g_functions import POLY_KEYS, g_from_config
from .invariants import ERROR_POLICY, PRIMITIVE_NAMES, SCALED_NAMES, SingularityPolicy
from .model_zoo import DEFAULT_CS, RDH05, LundNovikov, Smagorinsky, kosovic
from .models import (ClosureModel, GeneralAlphaModel, LinearForm, PotentialModel, ScaledAlphaModel,
                     ZeroModel)


class ConfigError(ValueError):
    pass


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _names(text: str) -> tuple:
    return tuple(x.strip() for x in text.split(",") if x.strip())


def _opt_float(text: str):
    return None if text.strip().lower() in ("", "none", "auto") else float(text)


#: allowed keys and their parsers, per section (``model`` is checked separately)
SCHEMA = {
    "run": {"seed": int, "tolerance": float},
    "invariants": {"source": str, "random": int, "grad": str, "input": str, "omega_zero": _bool,
                   "singularity": str, "reference_scale": float},
    "symmetries": {"groups": _names, "probes": int, "path": str, "degree": int},
    "certify": {"nu": float, "v_star": float, "samples": int, "method": str},
    "gradcheck": {"targets": _names, "states": int, "rel_step": float, "hessian": _bool,
                  "hessian_states": int, "hessian_tolerance": float},
    "simulate": {"n": int, "length": float, "nu": float, "steps": int, "dt": _opt_float, "cfl": float,
                 "diffusive": float, "initial": str, "amplitude": float, "sample_every": int,
                 "blowup_factor": float, "energy_tol": float, "reg_rel_eps": float, "dump": _bool},
    "breakage": {"models": _names, "groups": _names, "probes": int},
    "model": None,
}


@dataclass
class Config:
    """Parsed sections: ``values[section][key]`` holds typed values."""

    values: dict = field(default_factory=dict)

    def section(self, name: str) -> dict:
        return dict(self.values.get(name, {}))

    def get(self, section: str, key: str, default=None):
        return self.values.get(section, {}).get(key, default)

    def set(self, section: str, key: str, value) -> None:
        self.values.setdefault(section, {})[key] = value

    def merged(self, other: "Config") -> "Config":
        out = {k: dict(v) for k, v in self.values.items()}
        for sec, vals in other.values.items():
            if sec == "model" and "kind" in vals:
                # a new model kind replaces the whole model description
                out[sec] = dict(vals)
            else:
                out.setdefault(sec, {}).update(vals)
        return Config(out)


def parse_config(text: str, source: str = "<config>") -> Config:
    parser = configparser.ConfigParser(interpolation=None, delimiters=("=",), comment_prefixes=("#", ";"),
                                       inline_comment_prefixes=("#",))
    parser.optionxform = str  # keys are case-sensitive
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from exc
    values = {}
    for sec in parser.sections():
        if sec not in SCHEMA:
            raise ConfigError(f"{source}: unknown section [{sec}]; expected one of {sorted(SCHEMA)}")
        schema = SCHEMA[sec]
        out = {}
        for key, raw in parser.items(sec):
            if schema is None:
                out[key] = raw.strip()
                continue
            if key not in schema:
                raise ConfigError(f"{source}: unknown key {key!r} in [{sec}]; allowed: {sorted(schema)}")
            try:
                out[key] = schema[key](raw.strip())
            except ValueError as exc:
                raise ConfigError(f"{source}: bad value for {sec}.{key}: {exc}") from exc
        values[sec] = out
    cfg = Config(values)
    if "model" in values:
        model_from_config(values["model"])  # validate eagerly
    return cfg


def load_config(path) -> Config:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read(), str(path))


# ---------------------------------------------------------------- models

_POLICY_KEYS = ("singularity", "reference_scale", "rel_eps", "threshold")
_MODEL_KEYS = {
    "zero": (),
    "smagorinsky": ("cs", "delta"),
    "lund_novikov": ("c1", "c2", "c3", "c4", "c5", "delta") + _POLICY_KEYS,
    "kosovic": ("c1", "c2", "c4", "delta"),
    "rdh05": ("nu",) + _POLICY_KEYS,
    "potential": _POLICY_KEYS,
    "scaled": _POLICY_KEYS,
    "general": (),
}


def _policy_from(cfg: dict) -> SingularityPolicy:
    if "singularity" not in cfg:
        extra = [k for k in _POLICY_KEYS if k in cfg]
        if extra:
            raise ConfigError(f"{extra} given without 'singularity'")
        return ERROR_POLICY
    kw = {"mode": str(cfg["singularity"])}
    for k in ("reference_scale", "rel_eps", "threshold"):
        if k in cfg:
            kw[k] = float(cfg[k])
    return SingularityPolicy(**kw)


def _split_prefixed(cfg: dict, prefix: str) -> dict:
    return {k[len(prefix):]: v for k, v in cfg.items() if k.startswith(prefix)}


def _g_from(cfg: dict):
    g_cfg = _split_prefixed(cfg, "g.")
    family = g_cfg.get("family", "polynomial")
    g_cfg = {k: (v if k == "family" else float(v)) for k, v in g_cfg.items()}
    g_cfg["family"] = family
    try:
        return g_from_config(g_cfg)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad generator: {exc}") from exc


def _alphas_from(cfg: dict, allowed_invariants) -> tuple:
    groups: dict[int, dict] = {}
    for key, val in cfg.items():
        head, _, name = key.partition(".")
        if not head.startswith("alpha") or not name:
            raise ConfigError(f"unknown model key {key!r}")
        try:
            k = int(head[5:])
        except ValueError:
            raise ConfigError(f"unknown model key {key!r}") from None
        if not 1 <= k <= 7:
            raise ConfigError(f"coefficient index out of range in {key!r}")
        if name != "const" and name not in allowed_invariants:
            raise ConfigError(f"{key!r}: coefficient may depend on {allowed_invariants} only")
        groups.setdefault(k, {})[name] = float(val)
    alphas = [None] * 7
    for k, terms in groups.items():
        alphas[k - 1] = LinearForm.from_config(terms)
    return tuple(alphas)


def model_from_config(cfg: dict) -> ClosureModel:
    """Build a closure from a flat dict such as ``ClosureModel.to_config()`` produces."""
    cfg = dict(cfg)
    kind = str(cfg.pop("kind", "zero"))
    if kind not in _MODEL_KEYS:
        raise ConfigError(f"unknown model kind {kind!r}; expected one of {sorted(_MODEL_KEYS)}")
    allowed = set(_MODEL_KEYS[kind])
    if kind in ("potential", "rdh05"):
        allowed |= {f"g.{k}" for k in POLY_KEYS} | {"g.family"}
    fixed = {k: v for k, v in cfg.items() if k in allowed}
    rest = {k: v for k, v in cfg.items() if k not in allowed}
    if rest and kind not in ("general", "scaled"):
        raise ConfigError(f"unknown keys for model kind {kind!r}: {sorted(rest)}")
    num = {k: float(v) for k, v in fixed.items() if k not in ("singularity", "g.family") and not k.startswith("g.")}
    try:
        if kind == "zero":
            return ZeroModel()
        if kind == "smagorinsky":
            return Smagorinsky(cs=num.get("cs", DEFAULT_CS), delta=num.get("delta", 1.0))
        if kind == "kosovic":
            return kosovic(num.get("c1", 0.0), num.get("c2", 0.0), num.get("c4", 0.0), num.get("delta", 1.0))
        policy = _policy_from(fixed)
        if kind == "lund_novikov":
            return LundNovikov(**{k: num[k] for k in ("c1", "c2", "c3", "c4", "c5", "delta") if k in num},
                               policy=policy)
        if kind == "rdh05":
            return RDH05(g=_g_from(fixed), nu=num.get("nu", 1.0), policy=policy)
        if kind == "potential":
            return PotentialModel(_g_from(fixed), policy=policy)
        if kind == "scaled":
            return ScaledAlphaModel(_alphas_from(rest, PRIMITIVE_NAMES + SCALED_NAMES), policy=policy)
        return GeneralAlphaModel(_alphas_from(rest, PRIMITIVE_NAMES))
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid {kind} model: {exc}") from exc


# ---------------------------------------------------------------- presets

_CERTIFIED_NU = 0.01

PRESETS = {
    # pointwise state sources
    "plane_shear": "[invariants]\nsource = plane_shear\n",
    "solid_rotation": "[invariants]\nsource = solid_rotation\n",
    # closures
    "scale_invariant": """
[model]
kind = scaled
alpha1.const = -0.3
alpha1.v1 = 0.2
alpha2.const = 0.1
alpha3.v3 = 0.05
alpha4.const = 0.02
alpha5.v2 = 0.04
alpha6.const = -0.03
alpha7.v5 = 0.01
""",
    "smagorinsky": "[model]\nkind = smagorinsky\ncs = 0.17\ndelta = 1.0\n",
    "lund_novikov": """
[model]
kind = lund_novikov
c1 = -0.0578
c2 = 0.01
c3 = 0.01
c4 = 0.02
c5 = 0.005
delta = 1.0
""",
    "kosovic": "[model]\nkind = kosovic\nc1 = -0.0578\nc2 = 0.01\nc4 = 0.02\ndelta = 1.0\n",
    "rdh05": "[model]\nkind = rdh05\nnu = 0.01\ng.c0 = 1.0\ng.c1 = 0.5\n",
    "constant_g": "[model]\nkind = potential\ng.c0 = 0.5\n\n[certify]\nnu = 1.0\n",
    "quadratic_g": ("[model]\nkind = potential\ng.c0 = 0.5\ng.q33 = 1.0\ng.q44 = 1.0\n\n"
                    "[certify]\nnu = 1.0\n"),
    "certified": f"""
[model]
kind = potential
g.c0 = {-_CERTIFIED_NU!r}
g.c1 = {_CERTIFIED_NU!r}

[certify]
nu = {_CERTIFIED_NU!r}

[simulate]
nu = {_CERTIFIED_NU!r}
""",
    "violating": f"""
[model]
kind = potential
g.c0 = {2 * _CERTIFIED_NU!r}

[certify]
nu = {_CERTIFIED_NU!r}

[simulate]
nu = {_CERTIFIED_NU!r}
""",
    "taylor_green": f"""
[model]
kind = potential
g.c0 = {-_CERTIFIED_NU!r}
g.c1 = {_CERTIFIED_NU!r}

[simulate]
n = 16
nu = {_CERTIFIED_NU!r}
steps = 500
initial = taylor_green
""",
}


def preset(name: str) -> Config:
    try:
        text = PRESETS[name]
    except KeyError:
        raise ConfigError(f"unknown preset {name!r}; available: {sorted(PRESETS)}") from None
    return parse_config(text, f"<preset {name}>")
