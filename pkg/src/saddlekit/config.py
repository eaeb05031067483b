"""Run configuration: TOML schema, validation, and object construction.

A run file has up to six tables.  Keys outside this schema are rejected
so typos fail loudly instead of silently running with defaults.

    schema_version = 1          # optional

    [grid]
    nodes = 127                 # interior nodes per axis, required
    bounds = [0.0, 1.0]         # optional, default unit interval

    [problem]
    family = "aniso_resonant"   # radial_log | aniso_resonant | quadratic | expression
    # remaining keys are family parameters, checked by name and type

    [fields.a_zero]             # expression family only
    family = "constant"         # identity | diagonal | constant | expression
    matrix = [[2.0, 0.0], [0.0, 2.0]]

    [resonance]
    case = "st2_i"              # st1_i | st1_ii | st2_i | st2_ii | none
    k = 2                       # infinity resonance position, required unless none
    m = 3                       # optional declared origin resonance position

    [solver]                    # all optional, defaults below
    n_starts = 200
    radii = [0.1, 1.0, 10.0]

    [run]
    seed = 1234                 # required
    out = "runs/demo"           # optional output directory

Errors raise ConfigError with the offending key path in the message
(tomllib reports line and column for syntax errors itself).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

try:
    import tomllib
except ImportError:  # Python < 3.11
    import tomli as tomllib

import numpy as np

from .expressions import ExpressionError
from .fields import MatrixField, constant_field, diagonal_field, expression_field
from .grid import GridDomain, build_grid
from .problem import (
    NonlinearityModel,
    aniso_resonant_model,
    expression_model,
    quadratic_model,
    radial_log_model,
)
from .search import SearchStrategy
from .spectral import A_MINUS_CASE, A_PLUS_CASE, normalize_resonance

CASES = ("st1_i", "st1_ii", "st2_i", "st2_ii", "none")
PROBLEM_FAMILIES = ("radial_log", "aniso_resonant", "quadratic", "expression")
FIELD_FAMILIES = ("identity", "diagonal", "constant", "expression")
FIELD_NAMES = ("a_zero", "a_infinity", "beta")

_MAX_SEED = 2**64 - 1


class ConfigError(Exception):
    """Invalid run configuration; the message names the key path."""


@dataclass(frozen=True)
class SolverSettings:
    inner_tol: float = 1e-10
    residual_tol: float = 1e-8
    separation: float = 1e-3
    triviality: float = 1e-6
    n_starts: int = 200
    radii: tuple = (0.1, 1.0, 10.0)
    lbfgs_maxiter: int = 300
    eigen_pairs: int = 64
    clustering_tol: float = 1e-6
    deflation: bool = True
    newton_refine: bool = True


@dataclass(frozen=True)
class RunConfig:
    """Validated run description; builders below turn it into objects."""

    nodes: int
    bounds: tuple
    problem: dict | None
    field_specs: dict
    case: str
    k: int | None
    m: int | None
    solver: SolverSettings
    seed: int
    out: str | None
    source: str = "<config>"

    @property
    def side(self) -> str | None:
        """Spectral split side implied by the theorem case."""
        return case_side(self.case)


def case_side(case: str) -> str | None:
    if case.startswith("st1"):
        return A_PLUS_CASE
    if case.startswith("st2"):
        return A_MINUS_CASE
    return None


def case_origin_sign(case: str) -> str | None:
    if case == "none":
        return None
    return "plus" if case.endswith("_i") else "minus"


def case_infinity_sign(case: str) -> str | None:
    if case == "none":
        return None
    return "plus" if case.startswith("st1") else "minus"


# ---------------------------------------------------------------------------
# typed extraction helpers

def _check_keys(table: dict, path: str, allowed) -> None:
    extra = sorted(set(table) - set(allowed))
    if extra:
        raise ConfigError(
            f"{path}.{extra[0]}: unknown key (allowed: {', '.join(sorted(allowed))})"
        )


def _get_table(raw: dict, name: str, required: bool = False) -> dict:
    val = raw.get(name)
    if val is None:
        if required:
            raise ConfigError(f"{name}: missing required table")
        return {}
    if not isinstance(val, dict):
        raise ConfigError(f"{name}: expected a table, got {type(val).__name__}")
    return val


_REQUIRED = object()


def _get_int(table: dict, path: str, key: str, default=_REQUIRED, lo=None, hi=None):
    if key not in table:
        if default is _REQUIRED:
            raise ConfigError(f"{path}.{key}: missing required integer")
        return default
    val = table[key]
    if isinstance(val, bool) or not isinstance(val, int):
        raise ConfigError(f"{path}.{key}: expected an integer, got {val!r}")
    if lo is not None and val < lo:
        raise ConfigError(f"{path}.{key}: must be >= {lo}, got {val}")
    if hi is not None and val > hi:
        raise ConfigError(f"{path}.{key}: must be <= {hi}, got {val}")
    return val


def _get_float(table: dict, path: str, key: str, default=None, positive=False):
    if key not in table:
        if default is None:
            raise ConfigError(f"{path}.{key}: missing required number")
        return default
    val = table[key]
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise ConfigError(f"{path}.{key}: expected a number, got {val!r}")
    val = float(val)
    if positive and val <= 0:
        raise ConfigError(f"{path}.{key}: must be positive, got {val}")
    return val


def _get_str(table: dict, path: str, key: str, default=None, choices=None):
    if key not in table:
        if default is not None:
            return default
        raise ConfigError(f"{path}.{key}: missing required string")
    val = table[key]
    if not isinstance(val, str):
        raise ConfigError(f"{path}.{key}: expected a string, got {val!r}")
    if choices is not None and val not in choices:
        raise ConfigError(
            f"{path}.{key}: must be one of {', '.join(choices)}; got {val!r}"
        )
    return val


def _get_bool(table: dict, path: str, key: str, default: bool) -> bool:
    if key not in table:
        return default
    val = table[key]
    if not isinstance(val, bool):
        raise ConfigError(f"{path}.{key}: expected true/false, got {val!r}")
    return val


def _get_floats(table: dict, path: str, key: str, default, positive=False):
    if key not in table:
        return tuple(default)
    val = table[key]
    if not isinstance(val, list) or not val:
        raise ConfigError(f"{path}.{key}: expected a non-empty list of numbers")
    out = []
    for i, x in enumerate(val):
        if isinstance(x, bool) or not isinstance(x, (int, float)):
            raise ConfigError(f"{path}.{key}[{i}]: expected a number, got {x!r}")
        if positive and x <= 0:
            raise ConfigError(f"{path}.{key}[{i}]: must be positive, got {x}")
        out.append(float(x))
    return tuple(out)


# ---------------------------------------------------------------------------
# section validators

def _parse_grid(raw: dict) -> tuple:
    table = _get_table(raw, "grid", required=True)
    _check_keys(table, "grid", {"nodes", "bounds"})
    nodes = _get_int(table, "grid", "nodes", lo=3)
    bounds_raw = table.get("bounds", [0.0, 1.0])
    if (
        not isinstance(bounds_raw, list)
        or len(bounds_raw) != 2
        or any(isinstance(x, bool) or not isinstance(x, (int, float)) for x in bounds_raw)
    ):
        raise ConfigError("grid.bounds: expected [a, b] with two numbers")
    a, b = float(bounds_raw[0]), float(bounds_raw[1])
    if not a < b:
        raise ConfigError(f"grid.bounds: need a < b, got [{a}, {b}]")
    return nodes, (a, b)


_PROBLEM_PARAMS = {
    "radial_log": {"k", "log_coeff", "quartic_coeff"},
    "aniso_resonant": {
        "k", "minor_ratio", "origin_gain", "log_u", "quartic_u", "log_v", "sat_v",
    },
    "quadratic": {"k", "mat"},
    "expression": {"f", "lipschitz", "delta0", "origin_sign", "infinity_sign"},
}
_PROBLEM_REQUIRED = {
    "radial_log": set(),
    "aniso_resonant": set(),
    "quadratic": {"mat"},
    "expression": {"f", "lipschitz"},
}


def _parse_problem(raw: dict) -> dict | None:
    table = raw.get("problem")
    if table is None:
        return None
    if not isinstance(table, dict):
        raise ConfigError("problem: expected a table")
    family = _get_str(table, "problem", "family", choices=PROBLEM_FAMILIES)
    allowed = _PROBLEM_PARAMS[family] | {"family"}
    _check_keys(table, "problem", allowed)
    for key in _PROBLEM_REQUIRED[family]:
        if key not in table:
            raise ConfigError(
                f"problem.{key}: required for the {family} family"
            )
    spec = {"family": family}
    for key, val in table.items():
        if key == "family":
            continue
        spec[key] = _parse_problem_param(family, key, val)
    return spec


def _parse_problem_param(family: str, key: str, val):
    path = f"problem.{key}"
    if key == "mat":
        arr = np.asarray(val, dtype=object)
        try:
            arr = arr.astype(float)
        except (TypeError, ValueError):
            raise ConfigError(f"{path}: expected a 2x2 matrix of numbers") from None
        if arr.shape != (2, 2):
            raise ConfigError(f"{path}: expected a 2x2 matrix, got shape {arr.shape}")
        return arr.tolist()
    if key in ("f", "origin_sign", "infinity_sign"):
        if not isinstance(val, str):
            raise ConfigError(f"{path}: expected a string, got {val!r}")
        if key != "f" and val not in ("plus", "minus", "none"):
            raise ConfigError(f"{path}: must be plus, minus, or none; got {val!r}")
        return val
    if key == "k":
        if isinstance(val, bool) or not isinstance(val, int):
            raise ConfigError(f"{path}: expected an integer, got {val!r}")
        return val
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise ConfigError(f"{path}: expected a number, got {val!r}")
    if key in ("lipschitz", "delta0") and val <= 0:
        raise ConfigError(f"{path}: must be positive, got {val}")
    return float(val)


def _parse_field_spec(spec: dict, path: str) -> dict:
    if not isinstance(spec, dict):
        raise ConfigError(f"{path}: expected a table")
    family = _get_str(spec, path, "family", choices=FIELD_FAMILIES)
    allowed = {
        "identity": {"family", "scale"},
        "diagonal": {"family", "d1", "d2"},
        "constant": {"family", "matrix"},
        "expression": {"family", "a11", "a12", "a22"},
    }[family]
    if path.endswith("a_infinity"):
        allowed = allowed | {"normalize_lambda"}
    _check_keys(spec, path, allowed)
    out = {"family": family}
    if family == "identity":
        out["scale"] = _get_float(spec, path, "scale", default=1.0, positive=True)
    elif family == "diagonal":
        out["d1"] = _get_float(spec, path, "d1")
        out["d2"] = _get_float(spec, path, "d2")
    elif family == "constant":
        out["matrix"] = _parse_matrix(spec, path)
    else:
        for entry in ("a11", "a12", "a22"):
            out[entry] = _get_str(spec, path, entry)
    if "normalize_lambda" in spec:
        out["normalize_lambda"] = _get_int(spec, path, "normalize_lambda", lo=1)
    return out


def _parse_matrix(spec: dict, path: str):
    if "matrix" not in spec:
        raise ConfigError(f"{path}.matrix: missing required 2x2 matrix")
    arr = np.asarray(spec["matrix"], dtype=object)
    try:
        arr = arr.astype(float)
    except (TypeError, ValueError):
        raise ConfigError(f"{path}.matrix: expected a 2x2 matrix of numbers") from None
    if arr.shape != (2, 2):
        raise ConfigError(f"{path}.matrix: expected a 2x2 matrix, got shape {arr.shape}")
    return arr.tolist()


def _parse_fields(raw: dict, problem: dict | None) -> dict:
    table = raw.get("fields")
    if table is None:
        return {}
    if not isinstance(table, dict):
        raise ConfigError("fields: expected a table")
    if problem is None or problem["family"] != "expression":
        raise ConfigError(
            "fields: only the expression problem family reads this section; "
            "built-in families carry their own coefficient fields"
        )
    _check_keys(table, "fields", FIELD_NAMES)
    return {
        name: _parse_field_spec(table[name], f"fields.{name}")
        for name in table
    }


def _parse_resonance(raw: dict, problem: dict | None) -> tuple:
    table = _get_table(raw, "resonance")
    _check_keys(table, "resonance", {"case", "k", "m"})
    case = _get_str(table, "resonance", "case", default="none", choices=CASES)
    k = _get_int(table, "resonance", "k", default=None, lo=1)
    m = _get_int(table, "resonance", "m", default=None, lo=1)
    if case != "none":
        if problem is None:
            raise ConfigError(
                f"resonance.case: {case} needs a problem table to act on"
            )
        if k is None and "k" not in problem:
            raise ConfigError(f"resonance.k: required when case is {case}")
    if problem is not None:
        pk = problem.get("k")
        if pk is not None:
            if k is not None and pk != k:
                raise ConfigError(
                    f"resonance.k: conflicts with problem.k ({k} vs {pk})"
                )
            k = pk
    return case, k, m


def _parse_solver(raw: dict) -> SolverSettings:
    table = _get_table(raw, "solver")
    defaults = SolverSettings()
    _check_keys(
        table,
        "solver",
        {
            "inner_tol", "residual_tol", "separation", "triviality",
            "n_starts", "radii", "lbfgs_maxiter", "eigen_pairs",
            "clustering_tol", "deflation", "newton_refine",
        },
    )
    return SolverSettings(
        inner_tol=_get_float(table, "solver", "inner_tol", defaults.inner_tol, positive=True),
        residual_tol=_get_float(table, "solver", "residual_tol", defaults.residual_tol, positive=True),
        separation=_get_float(table, "solver", "separation", defaults.separation, positive=True),
        triviality=_get_float(table, "solver", "triviality", defaults.triviality, positive=True),
        n_starts=_get_int(table, "solver", "n_starts", defaults.n_starts, lo=1),
        radii=_get_floats(table, "solver", "radii", defaults.radii, positive=True),
        lbfgs_maxiter=_get_int(table, "solver", "lbfgs_maxiter", defaults.lbfgs_maxiter, lo=1),
        eigen_pairs=_get_int(table, "solver", "eigen_pairs", defaults.eigen_pairs, lo=1),
        clustering_tol=_get_float(table, "solver", "clustering_tol", defaults.clustering_tol, positive=True),
        deflation=_get_bool(table, "solver", "deflation", defaults.deflation),
        newton_refine=_get_bool(table, "solver", "newton_refine", defaults.newton_refine),
    )


def _parse_run(raw: dict) -> tuple:
    table = _get_table(raw, "run", required=True)
    _check_keys(table, "run", {"seed", "out"})
    seed = _get_int(table, "run", "seed", lo=0, hi=_MAX_SEED)
    out = table.get("out")
    if out is not None and not isinstance(out, str):
        raise ConfigError(f"run.out: expected a string path, got {out!r}")
    return seed, out


def parse_config(raw: dict, source: str = "<config>") -> RunConfig:
    """Validate a decoded TOML mapping into a RunConfig."""
    if not isinstance(raw, dict):
        raise ConfigError("top level: expected a table")
    _check_keys(
        raw, "top level",
        {"schema_version", "grid", "problem", "fields", "resonance", "solver", "run"},
    )
    version = raw.get("schema_version", 1)
    if version != 1:
        raise ConfigError(f"schema_version: unsupported version {version!r}")
    nodes, bounds = _parse_grid(raw)
    problem = _parse_problem(raw)
    field_specs = _parse_fields(raw, problem)
    case, k, m = _parse_resonance(raw, problem)
    if problem is not None and problem["family"] == "expression":
        missing = sorted(set(FIELD_NAMES) - set(field_specs))
        if missing:
            raise ConfigError(
                f"fields.{missing[0]}: required for the expression family"
            )
    solver = _parse_solver(raw)
    seed, out = _parse_run(raw)
    return RunConfig(
        nodes=nodes,
        bounds=bounds,
        problem=problem,
        field_specs=field_specs,
        case=case,
        k=k,
        m=m,
        solver=solver,
        seed=seed,
        out=out,
        source=source,
    )


def load_config(path) -> RunConfig:
    """Read and validate a TOML run file."""
    p = Path(path)
    try:
        data = p.read_bytes()
    except OSError as err:
        raise ConfigError(f"{p}: cannot read config file ({err})") from err
    try:
        raw = tomllib.loads(data.decode("utf-8"))
    except (tomllib.TOMLDecodeError, UnicodeDecodeError) as err:
        raise ConfigError(f"{p}: invalid TOML ({err})") from err
    return parse_config(raw, source=str(p))


# ---------------------------------------------------------------------------
# object builders

def build_grid_from(cfg: RunConfig) -> GridDomain:
    return build_grid(cfg.bounds, cfg.nodes)


def build_field_from(spec: dict, g: GridDomain, path: str) -> MatrixField:
    family = spec["family"]
    if family == "identity":
        fld = constant_field(spec["scale"] * np.eye(2), description="identity")
    elif family == "diagonal":
        fld = diagonal_field(spec["d1"], spec["d2"])
    elif family == "constant":
        fld = constant_field(spec["matrix"])
    else:
        try:
            fld = expression_field(spec["a11"], spec["a12"], spec["a22"])
        except ExpressionError as err:
            raise ConfigError(f"{path}: {err}") from err
    k = spec.get("normalize_lambda")
    if k is not None:
        fld = normalize_resonance(fld, k, g)
    return fld


def build_model_from(cfg: RunConfig, g: GridDomain) -> NonlinearityModel | None:
    """Instantiate the configured nonlinearity, or None without a problem table."""
    if cfg.problem is None:
        return None
    spec = dict(cfg.problem)
    family = spec.pop("family")
    if cfg.k is not None and "k" not in spec and family != "expression":
        spec["k"] = cfg.k
    try:
        if family == "radial_log":
            return radial_log_model(g, **spec)
        if family == "aniso_resonant":
            return aniso_resonant_model(g, **spec)
        if family == "quadratic":
            return quadratic_model(g, **spec)
        fields = {
            name: build_field_from(cfg.field_specs[name], g, f"fields.{name}")
            for name in FIELD_NAMES
        }
        return expression_model(
            g,
            f_text=spec["f"],
            lipschitz=spec["lipschitz"],
            a_zero=fields["a_zero"],
            a_infinity=fields["a_infinity"],
            beta=fields["beta"],
            delta0=spec.get("delta0", 1.0),
            origin_sign=spec.get("origin_sign", "none"),
            infinity_sign=spec.get("infinity_sign", "none"),
        )
    except ExpressionError as err:
        raise ConfigError(f"problem.f: {err}") from err
    except ConfigError:
        raise
    except ValueError as err:
        raise ConfigError(f"problem ({family}): {err}") from err


def strategy_from(cfg: RunConfig, seed: int | None = None) -> SearchStrategy:
    s = cfg.solver
    return SearchStrategy(
        n_starts=s.n_starts,
        radii=s.radii,
        deflation=s.deflation,
        newton_refine=s.newton_refine,
        seed=cfg.seed if seed is None else seed,
        residual_tol=s.residual_tol,
        separation=s.separation,
        triviality=s.triviality,
        lbfgs_maxiter=s.lbfgs_maxiter,
    )
