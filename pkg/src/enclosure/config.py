"""Run configuration in INI form.

Sections: ``[domain]``, ``[background]``, ``[inclusion.<name>]`` (any number),
``[cone.<name>]`` (any number), ``[probe]``, ``[mesh]``, ``[noise]`` and
``[output]``. Lists are comma separated; polygon vertices are ``x, y`` pairs
separated by ``;``. Unknown sections and keys are errors.
"""
from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import (
    SHAPE_KINDS,
    ConeFrame,
    DomainSpec,
    GeometryError,
    MaterialConfig,
    Shape,
    in_cone,
    tau,
)
from .reconstruct import DEFAULT_H_GRID, DEFAULT_PREFACTOR, DEFAULT_WINDOW, check_h_grid


class ConfigError(ValueError):
    """Invalid configuration; the message starts with the offending key path."""


AUTO = "auto"

# key -> (default, description); None marks a required key
SCHEMA = {
    "domain": {
        "center": (None, "center of the disc-shaped body, 'x, y'"),
        "radius": (None, "radius of the body"),
    },
    "background": {
        "lambda0": (None, "background Lame constant lambda"),
        "mu0": (None, "background shear modulus"),
        "k": (1.0, "frequency"),
    },
    "probe": {
        "epsBand": (0.05, "cutoff transition width in d"),
        "hGrid": (DEFAULT_H_GRID, "strictly decreasing h values"),
        "dMin": (AUTO, "smallest d of the bisection range (decay end); auto: 1/d 5% below the largest tau on the domain"),
        "dMax": (AUTO, "largest d of the bisection range (growth end); auto: 1/d 5% above the smallest tau on the domain"),
        "bisectionTol": (0.02, "final bracket width in 1/d"),
        "quadOrder": (48, "initial Gauss-Legendre order for the remainder integrals"),
        "angularGuard": (AUTO, "angular margin of the cutoff; auto: pi/(8N)"),
        "window": (DEFAULT_WINDOW, "number of smallest-h samples in each slope fit"),
        "prefactor": (DEFAULT_PREFACTOR, "exponent c in the fit of log|E| + c log h against 1/h"),
        "resolutionTol": (AUTO, "drop samples whose CGO reproduction error exceeds this; auto: keep all"),
    },
    "mesh": {
        "meshSize": (0.02, "target maximum edge length"),
        "refineInclusionBoundary": (False, "insert extra nodes along inclusion boundaries"),
    },
    "noise": {
        "level": (0.0, "multiplicative noise level on |E|"),
        "seed": (0, "seed of the noise streams"),
    },
    "output": {
        "directory": ("out", "output directory"),
        "plot": (False, "write SVG plots"),
    },
}

SHAPE_KEYS = {
    "disc": {"center": "point", "radius": "float"},
    "ellipse": {"center": "point", "semiaxes": "point", "angle": "float"},
    "polygon": {"vertices": "points"},
    "star": {"center": "point", "baseRadius": "float", "cosCoeffs": "floats", "sinCoeffs": "floats"},
}
SHAPE_DEFAULTS = {"angle": 0.0, "cosCoeffs": (), "sinCoeffs": ()}
SHAPE_ARGS = {"baseRadius": "base_radius", "cosCoeffs": "cos_coeffs", "sinCoeffs": "sin_coeffs"}
CONE_KEYS = {"N": (1, "cone order"), "theta0": (0.0, "axis angle"), "apex": (None, "apex outside the closed body, 'x, y'")}


@dataclass(frozen=True)
class ProbeSettings:
    eps_band: float = 0.05
    h_grid: tuple = DEFAULT_H_GRID
    d_min: float | None = None  # None = auto
    d_max: float | None = None
    bisection_tol: float = 0.02
    quad_order: int = 48
    angular_guard: float | None = None
    window: int = DEFAULT_WINDOW
    prefactor: float = DEFAULT_PREFACTOR
    resolution_tol: float | None = None


@dataclass(frozen=True)
class RunConfig:
    domain: DomainSpec
    material: MaterialConfig
    inclusion_names: tuple = ()
    cones: tuple = ()
    cone_names: tuple = ()
    probe: ProbeSettings = field(default_factory=ProbeSettings)
    mesh_size: float = 0.02
    refine_inclusions: bool = False
    noise_level: float = 0.0
    seed: int = 0
    out_dir: str = "out"
    plot: bool = False

    def d_range(self, frame: ConeFrame, nsample=2048):
        """Bisection range for one cone, filling ``auto`` ends from tau on the domain."""
        d_min, d_max = self.probe.d_min, self.probe.d_max
        if d_min is None or d_max is None:
            lo, hi = tau_range(self.domain, frame, nsample)
            span = hi - lo
            if d_min is None:
                d_min = 1.0 / (hi - 0.05 * span)
            if d_max is None:
                d_max = 1.0 / max(lo + 0.05 * span, 1e-12)
        return d_min, d_max


def tau_range(domain: DomainSpec, frame: ConeFrame, nsample=2048):
    """Smallest and largest tau over the part of the closed domain in the closed cone."""
    c, r = domain.center, domain.radius
    n = int(math.sqrt(nsample)) * 4
    g = np.linspace(-r, r, n)
    X, Y = np.meshgrid(c[0] + g, c[1] + g)
    pts = np.column_stack([X.ravel(), Y.ravel()])
    th = 2 * np.pi * np.arange(nsample) / nsample
    pts = np.vstack([pts[domain.contains(pts)], np.column_stack([c[0] + r * np.cos(th), c[1] + r * np.sin(th)])])
    zc, _ = frame.rel(pts)
    pts = pts[zc != 0]
    pts = pts[in_cone(frame, pts, closed=True)]
    if not len(pts):
        raise ConfigError("cone does not meet the domain")
    t = tau(frame, pts)
    return float(t.min()), float(t.max())


# ---------------------------------------------------------------------------
# value parsing


def _float(path, s):
    try:
        v = float(s)
    except ValueError:
        raise ConfigError(f"{path}: expected a number, got {s!r}") from None
    if not math.isfinite(v):
        raise ConfigError(f"{path}: value must be finite")
    return v


def _int(path, s):
    try:
        return int(s)
    except ValueError:
        raise ConfigError(f"{path}: expected an integer, got {s!r}") from None


def _bool(path, s):
    t = s.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"{path}: expected true or false, got {s!r}")


def _floats(path, s):
    s = s.strip()
    if not s:
        return ()
    return tuple(_float(path, p) for p in s.split(","))


def _point(path, s):
    v = _floats(path, s)
    if len(v) != 2:
        raise ConfigError(f"{path}: expected two numbers 'x, y'")
    return v


def _points(path, s):
    return tuple(_point(path, p) for p in s.split(";") if p.strip())


def _optional(path, s, conv):
    return None if s.strip().lower() == AUTO else conv(path, s)


PARSERS = {"float": _float, "floats": _floats, "point": _point, "points": _points}


def _fmt(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if v is None:
        return AUTO
    if isinstance(v, float):
        return repr(float(v))
    if isinstance(v, (tuple, list)):
        if v and isinstance(v[0], (tuple, list)):
            return "; ".join(_fmt(p) for p in v)
        return ", ".join(_fmt(float(x)) for x in v)
    return str(v)


# ---------------------------------------------------------------------------


def _section(cp, name, schema):
    sec = cp[name] if cp.has_section(name) else {}
    for key in sec:
        if key not in schema:
            raise ConfigError(f"unknown key '{name}.{key}'")
    out = {}
    for key, (default, _) in schema.items():
        if key in sec:
            out[key] = sec[key]
        elif default is None:
            raise ConfigError(f"{name}.{key}: required key missing")
        else:
            out[key] = default
    return out


def _guard(path, fn, *args, **kw):
    try:
        return fn(*args, **kw)
    except ConfigError:
        raise
    except (GeometryError, ValueError, TypeError) as exc:
        raise ConfigError(f"{path}: {exc}") from None


def _raw(v):
    return v if isinstance(v, str) else _fmt(v)


def _parse_shape(name, sec) -> Shape:
    path = f"inclusion.{name}"
    kind = sec.get("kind")
    if kind is None:
        raise ConfigError(f"{path}.kind: required key missing")
    if kind not in SHAPE_KEYS:
        raise ConfigError(f"{path}.kind: unknown shape kind {kind!r} (have {', '.join(SHAPE_KEYS)})")
    keys = SHAPE_KEYS[kind]
    for key in sec:
        if key not in keys and key not in ("kind", "lambdaD", "muD"):
            raise ConfigError(f"unknown key '{path}.{key}'")
    args = {}
    for key, typ in keys.items():
        if key in sec:
            args[SHAPE_ARGS.get(key, key)] = PARSERS[typ](f"{path}.{key}", sec[key])
        elif key in SHAPE_DEFAULTS:
            args[SHAPE_ARGS.get(key, key)] = SHAPE_DEFAULTS[key]
        else:
            raise ConfigError(f"{path}.{key}: required key missing")
    for key in ("lambdaD", "muD"):
        if key not in sec:
            raise ConfigError(f"{path}.{key}: required key missing")
    lam = _float(f"{path}.lambdaD", sec["lambdaD"])
    mu = _float(f"{path}.muD", sec["muD"])
    return _guard(path, SHAPE_KINDS[kind], lam, mu, **args)


def parse_config_text(text: str) -> RunConfig:
    cp = configparser.ConfigParser(interpolation=None, default_section="__none__")
    cp.optionxform = str  # keys are case sensitive
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed configuration: {exc}") from None
    for name in cp.sections():
        base = name.split(".", 1)[0]
        if name not in SCHEMA and not (base in ("inclusion", "cone") and "." in name):
            raise ConfigError(f"unknown section '{name}'")

    dom = _section(cp, "domain", SCHEMA["domain"])
    domain = _guard(
        "domain",
        DomainSpec,
        _point("domain.center", _raw(dom["center"])),
        _float("domain.radius", _raw(dom["radius"])),
    )
    bg = _section(cp, "background", SCHEMA["background"])
    lam0 = _float("background.lambda0", _raw(bg["lambda0"]))
    mu0 = _float("background.mu0", _raw(bg["mu0"]))
    k = _float("background.k", _raw(bg["k"]))

    inc_names = tuple(s.split(".", 1)[1] for s in cp.sections() if s.startswith("inclusion."))
    shapes = tuple(_parse_shape(n, cp[f"inclusion.{n}"]) for n in inc_names)
    material = _guard("background", MaterialConfig, lam0, mu0, k, ())
    for n, s in zip(inc_names, shapes):
        _guard(f"inclusion.{n}", MaterialConfig, lam0, mu0, k, (s,))
    material = MaterialConfig(lam0, mu0, k, shapes)
    try:
        material.check_domain(domain)
    except GeometryError as exc:
        msg = str(exc)
        for i, n in enumerate(inc_names):
            msg = msg.replace(f"inclusion {i} ", f"inclusion '{n}' ").replace(f" {i} overlap", f" '{n}' overlap")
        raise ConfigError(f"inclusion: {msg}") from None

    cone_names = tuple(s.split(".", 1)[1] for s in cp.sections() if s.startswith("cone."))
    cones = []
    for n in cone_names:
        sec = _section(cp, f"cone.{n}", CONE_KEYS)
        path = f"cone.{n}"
        frame = _guard(
            path,
            ConeFrame,
            _point(f"{path}.apex", _raw(sec["apex"])),
            _int(f"{path}.N", _raw(sec["N"])),
            _float(f"{path}.theta0", _raw(sec["theta0"])),
        )
        _guard(f"{path}.apex", frame.check_apex, domain)
        cones.append(frame)

    pr = _section(cp, "probe", SCHEMA["probe"])
    probe = ProbeSettings(
        eps_band=_float("probe.epsBand", _raw(pr["epsBand"])),
        h_grid=_floats("probe.hGrid", _raw(pr["hGrid"])),
        d_min=_optional("probe.dMin", _raw(pr["dMin"]), _float),
        d_max=_optional("probe.dMax", _raw(pr["dMax"]), _float),
        bisection_tol=_float("probe.bisectionTol", _raw(pr["bisectionTol"])),
        quad_order=_int("probe.quadOrder", _raw(pr["quadOrder"])),
        angular_guard=_optional("probe.angularGuard", _raw(pr["angularGuard"]), _float),
        window=_int("probe.window", _raw(pr["window"])),
        prefactor=_float("probe.prefactor", _raw(pr["prefactor"])),
        resolution_tol=_optional("probe.resolutionTol", _raw(pr["resolutionTol"]), _float),
    )
    _validate_probe(probe)

    ms = _section(cp, "mesh", SCHEMA["mesh"])
    mesh_size = _float("mesh.meshSize", _raw(ms["meshSize"]))
    if not mesh_size > 0:
        raise ConfigError("mesh.meshSize: must be positive")
    nz = _section(cp, "noise", SCHEMA["noise"])
    level = _float("noise.level", _raw(nz["level"]))
    if not 0 <= level < 1:
        raise ConfigError("noise.level: must lie in [0, 1)")
    seed = _int("noise.seed", _raw(nz["seed"]))
    if seed < 0:
        raise ConfigError("noise.seed: must be nonnegative")
    out = _section(cp, "output", SCHEMA["output"])
    return RunConfig(
        domain=domain,
        material=material,
        inclusion_names=inc_names,
        cones=tuple(cones),
        cone_names=cone_names,
        probe=probe,
        mesh_size=mesh_size,
        refine_inclusions=_bool("mesh.refineInclusionBoundary", _raw(ms["refineInclusionBoundary"])),
        noise_level=level,
        seed=seed,
        out_dir=str(out["directory"]),
        plot=_bool("output.plot", _raw(out["plot"])),
    )


def _validate_probe(p: ProbeSettings):
    if not p.eps_band > 0:
        raise ConfigError("probe.epsBand: must be positive")
    if not p.window >= 2:
        raise ConfigError("probe.window: must be at least 2")
    _guard("probe.hGrid", check_h_grid, p.h_grid, p.window)
    for key, v in (("dMin", p.d_min), ("dMax", p.d_max)):
        if v is not None and not v > 0:
            raise ConfigError(f"probe.{key}: must be positive")
    if p.d_min is not None and p.d_max is not None and not p.d_min < p.d_max:
        raise ConfigError("probe.dMin: must be smaller than probe.dMax")
    if not p.bisection_tol > 0:
        raise ConfigError("probe.bisectionTol: must be positive")
    if p.quad_order < 16:
        raise ConfigError("probe.quadOrder: must be at least 16")
    if p.angular_guard is not None and not p.angular_guard > 0:
        raise ConfigError("probe.angularGuard: must be positive")
    if p.resolution_tol is not None and not p.resolution_tol > 0:
        raise ConfigError("probe.resolutionTol: must be positive")


def parse_config(path) -> RunConfig:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read configuration {path}: {exc.strerror}") from None
    return parse_config_text(text)


def emit_config(cfg: RunConfig) -> str:
    """Fully resolved configuration; ``parse_config_text(emit_config(c)) == c``."""
    lines = ["[domain]", f"center = {_fmt(cfg.domain.center)}", f"radius = {_fmt(cfg.domain.radius)}", ""]
    m = cfg.material
    lines += ["[background]", f"lambda0 = {_fmt(m.lambda0)}", f"mu0 = {_fmt(m.mu0)}", f"k = {_fmt(m.k)}", ""]
    inv = {v: k for k, v in SHAPE_ARGS.items()}
    for name, s in zip(cfg.inclusion_names, m.inclusions):
        lines += [f"[inclusion.{name}]", f"kind = {s.kind}", f"lambdaD = {_fmt(s.lambda_d)}", f"muD = {_fmt(s.mu_d)}"]
        for arg in SHAPE_KEYS[s.kind]:
            attr = SHAPE_ARGS.get(arg, arg)
            lines.append(f"{inv.get(attr, arg)} = {_fmt(getattr(s, attr))}")
        lines.append("")
    for name, c in zip(cfg.cone_names, cfg.cones):
        lines += [f"[cone.{name}]", f"N = {c.order}", f"theta0 = {_fmt(c.axis)}", f"apex = {_fmt(c.apex)}", ""]
    p = cfg.probe
    lines += [
        "[probe]",
        f"epsBand = {_fmt(p.eps_band)}",
        f"hGrid = {_fmt(p.h_grid)}",
        f"dMin = {_fmt(p.d_min)}",
        f"dMax = {_fmt(p.d_max)}",
        f"bisectionTol = {_fmt(p.bisection_tol)}",
        f"quadOrder = {p.quad_order}",
        f"angularGuard = {_fmt(p.angular_guard)}",
        f"window = {p.window}",
        f"prefactor = {_fmt(p.prefactor)}",
        f"resolutionTol = {_fmt(p.resolution_tol)}",
        "",
        "[mesh]",
        f"meshSize = {_fmt(cfg.mesh_size)}",
        f"refineInclusionBoundary = {_fmt(cfg.refine_inclusions)}",
        "",
        "[noise]",
        f"level = {_fmt(cfg.noise_level)}",
        f"seed = {cfg.seed}",
        "",
        "[output]",
        f"directory = {cfg.out_dir}",
        f"plot = {_fmt(cfg.plot)}",
        "",
    ]
    return "\n".join(lines)


def describe_defaults() -> str:
    """Documentation of every key and its default, for ``--help``."""
    out = []
    for sec, keys in SCHEMA.items():
        out.append(f"[{sec}]")
        for key, (default, desc) in keys.items():
            d = "required" if default is None else f"default {_fmt(default)}"
            out.append(f"  {key}: {desc} ({d})")
    out.append("[cone.<name>] (one section per cone)")
    for key, (default, desc) in CONE_KEYS.items():
        d = "required" if default is None else f"default {_fmt(default)}"
        out.append(f"  {key}: {desc} ({d})")
    out.append("[inclusion.<name>] (one section per inclusion)")
    out.append("  kind: one of " + ", ".join(SHAPE_KEYS) + "; lambdaD, muD: coefficient contrasts (required)")
    for kind, keys in SHAPE_KEYS.items():
        out.append(f"  {kind}: " + ", ".join(f"{k}" + (f" (default {_fmt(SHAPE_DEFAULTS[k])})" if k in SHAPE_DEFAULTS else "") for k in keys))
    return "\n".join(out)
