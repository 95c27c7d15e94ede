"""Run configuration: a TOML document with fixed sections and named expressions.

Unknown keys are rejected with a close-match suggestion; every error names
the offending key and, where possible, the line it appears on.
"""
from dataclasses import dataclass, field, fields, replace
import difflib
import re

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .fixtures import CONTROLS, PAIR_FIELDS, VELOCITY_FIELDS
from .model import BUOYANCY_REGISTRY


class ConfigError(ValueError):
    """Invalid configuration; the message names the key and line."""


@dataclass(frozen=True)
class MeshConfig:
    n: int = 8


@dataclass(frozen=True)
class ModelConfig:
    nu0: float = 1.0
    gamma: float = 0.5
    g_T: float = 1.0
    g_S: float = 0.0
    Kinv: tuple = ((1.0, 0.0), (0.0, 1.0))
    D: tuple = ((1.0, 0.0), (0.0, 1.0))
    # "lambda" in the file
    lam: float = 1.0
    buoyancy: str = "linear"


@dataclass(frozen=True)
class DataConfig:
    yD: str = "zero"
    desired: str = "analytic"      # analytic | file | inverse-crime
    u_d: str = "zero"
    y_d: str = "zero"
    desired_file: str = ""
    ustar: str = "vortex"
    control: str = "zero"           # named control or path to a control CSV


@dataclass(frozen=True)
class BoundsConfig:
    lower: float = -1e3
    upper: float = 1e3


@dataclass(frozen=True)
class SolverConfig:
    newton_tol: float = 1e-10
    newton_max_iter: int = 30
    kkt_tol: float = 1e-6
    max_iter: int = 200
    step_rule: str = "lambda"
    ramp: tuple = (1.0,)


@dataclass(frozen=True)
class SSCConfig:
    epsilon: float = 0.0           # 0 selects the default rule
    n_dirs: int = 50
    n_samples: int = 100
    radius: float = 0.1


@dataclass(frozen=True)
class DiagnosticsSection:
    C6: float = 1.0
    C3: float = 1.0
    Cgn: float = 1.0
    Cp2: float = 1.0
    C4: float = 1.0
    C2r: float = 1.0
    poincare: float = 1.0


@dataclass(frozen=True)
class MMSConfig:
    ns: tuple = (8, 16, 32)


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    mesh: MeshConfig = field(default_factory=MeshConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    data: DataConfig = field(default_factory=DataConfig)
    bounds: BoundsConfig = field(default_factory=BoundsConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)
    ssc: SSCConfig = field(default_factory=SSCConfig)
    diagnostics: DiagnosticsSection = field(default_factory=DiagnosticsSection)
    mms: MMSConfig = field(default_factory=MMSConfig)


SECTIONS = {"mesh": MeshConfig, "model": ModelConfig, "data": DataConfig,
            "bounds": BoundsConfig, "solver": SolverConfig, "ssc": SSCConfig,
            "diagnostics": DiagnosticsSection, "mms": MMSConfig}
FILE_NAMES = {"lam": "lambda"}
ATTR_NAMES = {v: k for k, v in FILE_NAMES.items()}


def _line_of(text, key, section=None):
    """1-based line number of ``key = ...`` (inside ``[section]`` if given)."""
    current = None
    for i, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        m = re.match(r"^\[([^\]]+)\]", s)
        if m:
            current = m.group(1).strip()
            continue
        if re.match(rf"^\"?{re.escape(key)}\"?\s*=", s) and (section is None or current == section):
            return i
    return None


def _where(text, key, section):
    line = _line_of(text, key, section)
    name = f"{section}.{key}" if section else key
    return f"`{name}`" + (f" (line {line})" if line else "")


def _suggest(key, choices):
    close = difflib.get_close_matches(key, choices, n=1)
    return f"; did you mean `{close[0]}`?" if close else ""


def _coerce(value, default, where):
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{where}: expected a boolean, got {value!r}")
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{where}: expected an integer, got {value!r}")
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where}: expected a number, got {value!r}")
        return float(value)
    if isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigError(f"{where}: expected a string, got {value!r}")
        return value
    if isinstance(default, tuple):
        if not isinstance(value, list):
            raise ConfigError(f"{where}: expected an array, got {value!r}")
        try:
            return _to_tuple(value)
        except TypeError:
            raise ConfigError(f"{where}: array entries must be numbers") from None
    raise ConfigError(f"{where}: unsupported value {value!r}")


def _to_tuple(v):
    if isinstance(v, list):
        return tuple(_to_tuple(x) for x in v)
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise TypeError
    return v


def _build_section(cls, table, text, section):
    defaults = cls()
    attrs = {f.name for f in fields(cls)}
    allowed = sorted(FILE_NAMES.get(a, a) for a in attrs)
    kwargs = {}
    for key, value in table.items():
        attr = ATTR_NAMES.get(key, key)
        if attr not in attrs or (attr in FILE_NAMES and key != FILE_NAMES[attr]):
            raise ConfigError(f"unknown key {_where(text, key, section)} in [{section}]"
                              + _suggest(key, allowed))
        kwargs[attr] = _coerce(value, getattr(defaults, attr), _where(text, key, section))
    return replace(defaults, **kwargs)


def parse_config_text(text):
    """Parse and validate a configuration document."""
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"malformed configuration: {exc}") from None
    kwargs = {}
    top_allowed = sorted(list(SECTIONS) + ["seed"])
    for key, value in doc.items():
        if key == "seed":
            kwargs["seed"] = _coerce(value, 0, _where(text, "seed", None))
        elif key in SECTIONS:
            if not isinstance(value, dict):
                raise ConfigError(f"`{key}` must be a [section]")
            kwargs[key] = _build_section(SECTIONS[key], value, text, key)
        else:
            line = _line_of(text, key) or _section_line(text, key)
            raise ConfigError(f"unknown key `{key}`" + (f" (line {line})" if line else "")
                              + _suggest(key, top_allowed))
    cfg = RunConfig(**kwargs)
    validate_config(cfg, text)
    return cfg


def _section_line(text, name):
    for i, line in enumerate(text.splitlines(), 1):
        if line.strip().startswith(f"[{name}]"):
            return i
    return None


def parse_config(path):
    with open(path, encoding="utf-8") as fh:
        return parse_config_text(fh.read())


def _fail(text, section, key, msg):
    raise ConfigError(f"{_where(text, FILE_NAMES.get(key, key), section)}: {msg}")


def validate_config(cfg, text=""):
    """Check value invariants; raise :class:`ConfigError` naming the key."""
    if cfg.mesh.n < 1:
        _fail(text, "mesh", "n", "must be >= 1")
    m = cfg.model
    if not m.lam > 0:
        _fail(text, "model", "lam", f"must be positive, got {m.lam}")
    if not m.nu0 > 0:
        _fail(text, "model", "nu0", "must be positive")
    if not 0 <= m.gamma < 1:
        _fail(text, "model", "gamma", "must lie in [0, 1)")
    for key in ("Kinv", "D"):
        mat = getattr(m, key)
        if len(mat) != 2 or any(len(r) != 2 for r in mat):
            _fail(text, "model", key, "must be a 2x2 array")
    if m.buoyancy not in BUOYANCY_REGISTRY:
        _fail(text, "model", "buoyancy", f"unknown model; choose from {sorted(BUOYANCY_REGISTRY)}")
    d = cfg.data
    for key, reg in (("yD", PAIR_FIELDS), ("u_d", VELOCITY_FIELDS), ("y_d", PAIR_FIELDS),
                     ("ustar", CONTROLS)):
        if getattr(d, key) not in reg:
            _fail(text, "data", key, f"unknown expression {getattr(d, key)!r}; choose from "
                                     f"{sorted(reg)}")
    if d.desired not in ("analytic", "file", "inverse-crime"):
        _fail(text, "data", "desired", "must be 'analytic', 'file' or 'inverse-crime'")
    if d.desired == "file" and not d.desired_file:
        _fail(text, "data", "desired_file", "required when desired = 'file'")
    if cfg.bounds.lower > cfg.bounds.upper:
        _fail(text, "bounds", "lower", "must not exceed `bounds.upper`")
    s = cfg.solver
    for key in ("newton_tol", "kkt_tol"):
        if not getattr(s, key) > 0:
            _fail(text, "solver", key, "tolerances must be positive")
    if s.newton_max_iter < 1 or s.max_iter < 0:
        _fail(text, "solver", "max_iter", "iteration limits must be nonnegative")
    if s.step_rule not in ("lambda", "bb"):
        _fail(text, "solver", "step_rule", "must be 'lambda' or 'bb'")
    r = s.ramp
    if not r or r[-1] != 1.0 or any(b <= a for a, b in zip(r, r[1:])) or r[0] < 0:
        _fail(text, "solver", "ramp", "must be increasing in [0, 1] and end at 1")
    if cfg.ssc.epsilon < 0 or cfg.ssc.radius <= 0 or cfg.ssc.n_dirs < 1 or cfg.ssc.n_samples < 1:
        _fail(text, "ssc", "epsilon", "epsilon >= 0, radius > 0 and counts >= 1 required")
    for f in fields(DiagnosticsSection):
        if not getattr(cfg.diagnostics, f.name) > 0:
            _fail(text, "diagnostics", f.name, "must be positive")
    if not cfg.mms.ns or any(int(n) < 1 for n in cfg.mms.ns):
        _fail(text, "mms", "ns", "mesh sizes must be >= 1")
    return cfg


def with_overrides(cfg, n=None, lam=None, seed=None):
    """Apply command-line overrides and re-validate."""
    if n is not None:
        cfg = replace(cfg, mesh=replace(cfg.mesh, n=n))
    if lam is not None:
        cfg = replace(cfg, model=replace(cfg.model, lam=lam))
    if seed is not None:
        cfg = replace(cfg, seed=seed)
    return validate_config(cfg)
