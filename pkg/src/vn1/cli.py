"""Command-line front end: ``vn1 <command> --config run.json``.

The configuration is a JSON document.  Complex numbers are written as
``[re, im]`` pairs (plain numbers are read as real), matrices are row-major
lists of rows.  Every slot takes exactly one specification::

    {
      "system": {"axis": [0, 0, 1]},            # or "matrix", "two_qubit_axis"
      "preparation": {"pure": [1, 0, 0]},       # or "matrix"
      "postselection": null,                    # or {"pure": ...} / {"matrix": ...}
      "detector": {"gaussian": {"sigma_q": 0.5}},
      "lambda": 0.7,
      "readout": "canonical_p",
      "sweep": {"parameter": "lambda", "from": 1e-4, "to": 1, "steps": 13, "scale": "log"},
      "tolerances": {"oracle": 1e-10}
    }

Exit codes: 0 success, 1 usage or configuration error, 2 orthogonal
preparation and postselection, 3 internal consistency failure.
"""

import argparse
import csv
import datetime
import hashlib
import io
import json
import math
import sys
from dataclasses import dataclass, field, replace

import jsonschema
import numpy as np

from . import __version__, oracle
from ._linalg import projector
from .detectors import (
    DiscreteCanonicalDetector,
    GaussianDetector,
    MatrixDetector,
    discrete_wigner,
    fourier_basis,
    q_eigenvalues,
    readout_labels,
)
from .engine import CONVENTIONS, MeasurementSetup, run
from .errors import ConsistencyError, OrthogonalityError, ValidationError, Vn1Error
from .spin import embed_two_qubit, make_spin1_axis, validate_operator
from .states import Postselection, SystemState
from .weaklimit import (
    DEFAULT_DELTA,
    VARIANTS,
    WCOND_THRESHOLD,
    convergence_scan,
    fit_slope,
    validity_check,
)
from .weakvalues import OMEGA_MIN, classify_special_case, weak_values

EXIT_OK, EXIT_CONFIG, EXIT_ORTHOGONAL, EXIT_CONSISTENCY = 0, 1, 2, 3
COMMANDS = ("weak-values", "measure", "sweep", "wigner", "oracle-check")
SWEEP_PARAMETERS = ("lambda", "mean_q", "mean_p", "sigma_q", "sigma_p", "cov")
DEFAULT_TOLERANCES = {
    "oracle": 1e-10,
    "omega_min": OMEGA_MIN,
    "wcond_threshold": WCOND_THRESHOLD,
    "delta": DEFAULT_DELTA,
    "n_max": 6,
    "marginal": 1e-12,
}
TOP_LEVEL_KEYS = {
    "system", "preparation", "postselection", "detector", "lambda",
    "readout", "sweep", "tolerances", "output",
}


class ConfigError(ValidationError):
    """Malformed or inconsistent configuration."""


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SweepSpec:
    parameter: str
    start: float
    stop: float
    steps: int
    scale: str = "linear"

    def values(self):
        if self.scale == "log":
            return np.logspace(math.log10(self.start), math.log10(self.stop), self.steps)
        return np.linspace(self.start, self.stop, self.steps)


@dataclass(frozen=True)
class RunConfig:
    setup: MeasurementSetup
    gaussian_sigma_p_default: bool = False
    sweep: SweepSpec = None
    tolerances: dict = field(default_factory=dict)
    output_format: str = None
    sha256: str = ""


def _finite(x, where):
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise ConfigError(f"{where}: expected a number, got {x!r}")
    if not math.isfinite(x):
        raise ConfigError(f"{where}: value must be finite")
    return float(x)


def _complex(x, where):
    if isinstance(x, list):
        if len(x) != 2:
            raise ConfigError(f"{where}: complex entries are [re, im] pairs, got {x!r}")
        return complex(_finite(x[0], where + "[0]"), _finite(x[1], where + "[1]"))
    return complex(_finite(x, where))


def parse_vector(v, where):
    if not isinstance(v, list) or not v:
        raise ConfigError(f"{where}: expected a non-empty list")
    return np.array([_complex(x, f"{where}[{i}]") for i, x in enumerate(v)])


def parse_matrix(m, where):
    if not isinstance(m, list) or not m or not all(isinstance(r, list) for r in m):
        raise ConfigError(f"{where}: expected a list of rows")
    n = len(m)
    if any(len(r) != n for r in m):
        raise ConfigError(f"{where}: matrix must be square ({n} rows)")
    return np.array([[_complex(x, f"{where}[{i}][{j}]") for j, x in enumerate(r)] for i, r in enumerate(m)])


def _one_of(spec, options, where):
    if not isinstance(spec, dict):
        raise ConfigError(f"{where}: expected an object with exactly one of {options}")
    given = [k for k in options if k in spec]
    extra = set(spec) - set(options)
    if extra:
        raise ConfigError(f"{where}: unknown keys {sorted(extra)}")
    if len(given) != 1:
        raise ConfigError(f"{where}: exactly one of {options} must be given, found {given or 'none'}")
    return given[0], spec[given[0]]


def _wrap(func, where, *args):
    try:
        return func(*args)
    except ConfigError:
        raise
    except ValidationError as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def _parse_system(spec):
    kind, val = _one_of(spec, ("axis", "matrix", "two_qubit_axis"), "system")
    if kind == "axis":
        return _wrap(make_spin1_axis, "system.axis", [_finite(x, "system.axis") for x in val])
    if kind == "two_qubit_axis":
        axis = _wrap(make_spin1_axis, "system.two_qubit_axis", [_finite(x, "system.two_qubit_axis") for x in val])
        return embed_two_qubit(axis)
    return _wrap(validate_operator, "system.matrix", parse_matrix(val, "system.matrix"))


def _parse_preparation(spec):
    kind, val = _one_of(spec, ("pure", "matrix"), "preparation")
    if kind == "pure":
        vec = parse_vector(val, "preparation.pure")
        if np.linalg.norm(vec) == 0:
            raise ConfigError("preparation.pure: zero vector")
        return _wrap(SystemState.pure, "preparation.pure", vec)
    return _wrap(SystemState, "preparation.matrix", parse_matrix(val, "preparation.matrix"))


def _parse_postselection(spec):
    if spec is None:
        return None
    kind, val = _one_of(spec, ("pure", "matrix"), "postselection")
    if kind == "pure":
        vec = parse_vector(val, "postselection.pure")
        if np.linalg.norm(vec) == 0:
            raise ConfigError("postselection.pure: zero vector")
        return _wrap(Postselection.pure, "postselection.pure", vec)
    return _wrap(Postselection, "postselection.matrix", parse_matrix(val, "postselection.matrix"))


def pure_sigma_p(sigma_q, cov=0.0):
    """Momentum spread of the pure Gaussian with the given ``sigma_q`` and covariance."""
    return math.sqrt(0.25 + cov**2) / sigma_q


def _parse_gaussian(g):
    where = "detector.gaussian"
    if not isinstance(g, dict):
        raise ConfigError(f"{where}: expected an object")
    allowed = {"mean_q", "mean_p", "sigma_q", "sigma_p", "cov"}
    if set(g) - allowed:
        raise ConfigError(f"{where}: unknown keys {sorted(set(g) - allowed)}")
    sigma_q = _finite(g.get("sigma_q", 0.5), where + ".sigma_q")
    if sigma_q <= 0:
        raise ConfigError(f"{where}.sigma_q: must be positive")
    cov = _finite(g.get("cov", 0.0), where + ".cov")
    derived = "sigma_p" not in g
    sigma_p = pure_sigma_p(sigma_q, cov) if derived else _finite(g["sigma_p"], where + ".sigma_p")
    det = _wrap(
        GaussianDetector,
        where,
        _finite(g.get("mean_q", 0.0), where + ".mean_q"),
        _finite(g.get("mean_p", 0.0), where + ".mean_p"),
        sigma_q,
        sigma_p,
        cov,
    )
    return det, derived


def _parse_discrete(g):
    where = "detector.discrete"
    if not isinstance(g, dict) or "d" not in g:
        raise ConfigError(f"{where}: needs an integer 'd'")
    d = g["d"]
    if isinstance(d, bool) or not isinstance(d, int):
        raise ConfigError(f"{where}.d: expected an integer, got {d!r}")
    rest = {k: v for k, v in g.items() if k != "d"}
    kind, val = _one_of(rest, ("basis_index", "pure", "matrix"), where)
    if kind == "basis_index":
        return _wrap(DiscreteCanonicalDetector.basis_state, where, d, _finite(val, where + ".basis_index"))
    if kind == "pure":
        return _wrap(DiscreteCanonicalDetector, where, d, projector(parse_vector(val, where + ".pure")))
    return _wrap(DiscreteCanonicalDetector, where, d, parse_matrix(val, where + ".matrix"))


def _parse_matrix_detector(g):
    where = "detector.matrix"
    if not isinstance(g, dict) or set(g) != {"rho", "q_op", "o_op"}:
        raise ConfigError(f"{where}: needs exactly the keys rho, q_op, o_op")
    mats = [parse_matrix(g[k], f"{where}.{k}") for k in ("rho", "q_op", "o_op")]
    return _wrap(MatrixDetector, where, *mats)


def _parse_detector(spec):
    kind, val = _one_of(spec, ("gaussian", "discrete", "matrix"), "detector")
    if kind == "gaussian":
        return _parse_gaussian(val)
    if kind == "discrete":
        return _parse_discrete(val), False
    return _parse_matrix_detector(val), False


def _parse_sweep(spec):
    if spec is None:
        return None
    where = "sweep"
    required = {"parameter", "from", "to", "steps"}
    if not isinstance(spec, dict) or not required <= set(spec):
        raise ConfigError(f"{where}: needs the keys {sorted(required)} (and optionally 'scale')")
    if set(spec) - required - {"scale"}:
        raise ConfigError(f"{where}: unknown keys {sorted(set(spec) - required - {'scale'})}")
    param = spec["parameter"]
    if param not in SWEEP_PARAMETERS:
        raise ConfigError(f"{where}.parameter: must be one of {SWEEP_PARAMETERS}, got {param!r}")
    start, stop = _finite(spec["from"], where + ".from"), _finite(spec["to"], where + ".to")
    steps = spec["steps"]
    if isinstance(steps, bool) or not isinstance(steps, int) or steps < 1:
        raise ConfigError(f"{where}.steps: empty sweep (need a positive integer, got {steps!r})")
    if steps > 1 and start == stop:
        raise ConfigError(f"{where}: empty sweep range (from == to == {start:g})")
    scale = spec.get("scale", "linear")
    if scale not in ("linear", "log"):
        raise ConfigError(f"{where}.scale: must be 'linear' or 'log', got {scale!r}")
    if scale == "log" and (start <= 0 or stop <= 0):
        raise ConfigError(f"{where}: log scale needs positive bounds")
    return SweepSpec(param, start, stop, steps, scale)


def _parse_tolerances(spec):
    tol = dict(DEFAULT_TOLERANCES)
    if spec is None:
        return tol
    if not isinstance(spec, dict):
        raise ConfigError("tolerances: expected an object")
    for key, val in spec.items():
        if key not in DEFAULT_TOLERANCES:
            raise ConfigError(f"tolerances: unknown key {key!r}")
        tol[key] = int(val) if key == "n_max" else _finite(val, f"tolerances.{key}")
    return tol


def config_from_dict(raw, sha256=""):
    """Validate a parsed configuration document.

    Raises:
        ConfigError: naming the offending field.
    """
    if not isinstance(raw, dict):
        raise ConfigError("configuration must be a JSON object")
    unknown = set(raw) - TOP_LEVEL_KEYS
    if unknown:
        raise ConfigError(f"unknown top-level keys {sorted(unknown)}")
    for key in ("system", "preparation", "detector"):
        if key not in raw:
            raise ConfigError(f"missing required section {key!r}")
    spin = _parse_system(raw["system"])
    state = _parse_preparation(raw["preparation"])
    post = _parse_postselection(raw.get("postselection"))
    det, sigma_p_default = _parse_detector(raw["detector"])
    lam = _finite(raw.get("lambda", 0.0), "lambda")
    setup = _wrap(MeasurementSetup, "setup", state, spin, det, lam, post, raw.get("readout"))
    out = raw.get("output") or {}
    fmt = out.get("format") if isinstance(out, dict) else None
    if fmt not in (None, "csv", "record"):
        raise ConfigError(f"output.format: must be 'csv' or 'record', got {fmt!r}")
    return RunConfig(
        setup=setup,
        gaussian_sigma_p_default=sigma_p_default,
        sweep=_parse_sweep(raw.get("sweep")),
        tolerances=_parse_tolerances(raw.get("tolerances")),
        output_format=fmt,
        sha256=sha256,
    )


def load_config(path):
    """Read and validate a JSON run configuration.

    Raises:
        ConfigError: unreadable file, JSON syntax error (with line and
            column) or a field that fails validation.
    """
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
    try:
        raw = json.loads(data.decode("utf-8"))
    except UnicodeDecodeError as exc:
        raise ConfigError(f"{path}: not UTF-8 text") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    return config_from_dict(raw, hashlib.sha256(data).hexdigest())


# ---------------------------------------------------------------------------
# emission
# ---------------------------------------------------------------------------


def format_float(x):
    """17 significant digits, so the text round-trips to the same double."""
    return "%.17g" % (x + 0.0)  # + 0.0 turns -0.0 into 0.0


def _scalar(x):
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating,)):
        return float(x)
    return x


def dumps_record(obj, indent=0):
    """Serialize to JSON text with fixed float formatting (non-finite values become ``null``)."""
    obj = _scalar(obj)
    pad, inner = "  " * indent, "  " * (indent + 1)
    if obj is None:
        return "null"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        return format_float(obj) if math.isfinite(obj) else "null"
    if isinstance(obj, str):
        return json.dumps(obj, ensure_ascii=False)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{inner}{json.dumps(str(k))}: {dumps_record(v, indent + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        items = [dumps_record(v, indent + 1) for v in obj]
        if all("\n" not in s for s in items) and sum(len(s) for s in items) < 100:
            return "[" + ", ".join(items) + "]"
        return "[\n" + ",\n".join(inner + s for s in items) + "\n" + pad + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


_NUM = {"type": ["number", "null"]}
_PAIR = {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2}
_WV = {
    "type": "object",
    "required": ["omega", "A", "B", "C", "D", "E"],
    "properties": {"omega": _NUM, **{k: _PAIR for k in "ABCDE"}},
}
_BASE = {
    "type": "object",
    "required": ["command", "version", "config_sha256", "conventions"],
    "properties": {
        "command": {"enum": list(COMMANDS)},
        "version": {"type": "string"},
        "config_sha256": {"type": "string", "pattern": "^[0-9a-f]{64}$|^$"},
        "conventions": {"type": "object", "additionalProperties": {"type": "string"}},
        "timestamps": {"type": "object"},
    },
}
RECORD_SCHEMAS = {
    "weak-values": {
        "allOf": [_BASE],
        "required": ["weak_values", "special_cases"],
        "properties": {"weak_values": _WV, "special_cases": {"type": "object"}},
    },
    "measure": {
        "allOf": [_BASE],
        "required": ["p_f", "avg_output", "terms", "prefactor", "offset", "weak_values", "validity"],
        "properties": {
            "p_f": _NUM,
            "avg_output": _NUM,
            "terms": {"type": "object", "additionalProperties": _NUM},
            "weak_values": _WV,
            "validity": {"type": "object"},
            "oracle": {"type": "object", "required": ["p_f", "avg_output", "dp_f", "davg"]},
        },
    },
    "oracle-check": {
        "allOf": [_BASE],
        "required": ["engine", "oracle", "comparison"],
        "properties": {"comparison": {"type": "object", "required": ["passed", "tol", "dp_f", "davg"]}},
    },
    "sweep": {
        "allOf": [_BASE],
        "required": ["parameter", "columns", "rows", "slopes"],
        "properties": {"rows": {"type": "array", "items": {"type": "array"}}},
    },
    "wigner": {
        "allOf": [_BASE],
        "required": ["d", "columns", "rows", "max_marginal_error"],
        "properties": {"rows": {"type": "array", "items": {"type": "array"}}},
    },
}


def render_record(record):
    """Serialize ``record`` and check the emitted text against its schema."""
    text = dumps_record(record) + "\n"
    try:
        jsonschema.validate(json.loads(text), RECORD_SCHEMAS[record["command"]])
    except jsonschema.ValidationError as exc:
        raise ConsistencyError(f"emitted record fails its schema: {exc.message}") from exc
    return text


def _csv_cell(x):
    x = _scalar(x)
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, float):
        return format_float(x) if math.isfinite(x) else ""
    if x is None:
        return ""
    return str(x)


def render_csv(columns, rows, conventions, trailer=()):
    """CSV with ``#`` comment lines for the conventions block and any trailer notes."""
    buf = io.StringIO()
    for key, val in conventions.items():
        buf.write(f"# {key}: {val}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_csv_cell(x) for x in row])
    for line in trailer:
        buf.write(f"# {line}\n")
    return buf.getvalue()


def _flatten(obj, prefix=""):
    if isinstance(obj, dict):
        for k, v in obj.items():
            yield from _flatten(v, f"{prefix}.{k}" if prefix else str(k))
    elif isinstance(obj, (list, tuple)) and obj and not any(isinstance(v, (dict, list, tuple)) for v in obj):
        for i, v in enumerate(obj):
            yield f"{prefix}[{i}]", v
    elif isinstance(obj, (list, tuple)):
        for i, v in enumerate(obj):
            yield from _flatten(v, f"{prefix}[{i}]")
    else:
        yield prefix, obj


def record_as_csv(record):
    skip = {"conventions", "columns", "rows"}
    pairs = [(k, v) for k, v in _flatten({k: v for k, v in record.items() if k not in skip})]
    if "rows" in record:
        return render_csv(record["columns"], record["rows"], record["conventions"], [f"{k}={_csv_cell(v)}" for k, v in pairs])
    return render_csv(["quantity", "value"], pairs, record["conventions"])


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def _base(command, cfg):
    return {
        "command": command,
        "version": __version__,
        "config_sha256": cfg.sha256,
        "conventions": dict(CONVENTIONS),
    }


def _wv_block(wv):
    return {k: list(v) if isinstance(v, tuple) else v for k, v in wv.as_dict().items()}


def _validity_block(setup, tol):
    rep = validity_check(
        setup.detector,
        setup.coupling,
        delta=tol["delta"],
        n_max=tol["n_max"],
        threshold=tol["wcond_threshold"],
    )
    return {
        "wcond_value": rep.wcond_value,
        "wcond_pass": rep.wcond_pass,
        "wcond_threshold": tol["wcond_threshold"],
        "delta": rep.delta,
        "moment_bound_margin": list(rep.moment_bound_margin),
        "gauge_offset_applied": rep.gauge_offset_applied,
        "coherence_scale": rep.coherence_scale,
        "kennard_ok": rep.kennard_ok,
    }


def _result_block(res):
    return {
        "p_f": res.p_f,
        "avg_output": res.avg_output,
        "terms": dict(res.terms),
        "prefactor": res.prefactor,
        "offset": res.offset,
    }


def cmd_weak_values(cfg):
    s = cfg.setup
    omega_min = cfg.tolerances["omega_min"]
    wv = weak_values(s.system, s.postselection, s.observable, omega_min=omega_min)
    report = classify_special_case(s.system, s.postselection, s.observable, omega_min=omega_min)
    rec = _base("weak-values", cfg)
    rec["weak_values"] = _wv_block(wv)
    rec["special_cases"] = {
        name: {"applies": bool(report.flags[name]), "residuals": report.residuals[name]}
        for name in report.flags
    }
    return rec


def cmd_measure(cfg, with_oracle=False):
    s = cfg.setup
    res = run(s, omega_min=cfg.tolerances["omega_min"])
    rec = _base("measure", cfg)
    rec.update(_result_block(res))
    rec["lambda"] = s.coupling
    rec["readout"] = s.readout
    rec["route"] = res.metadata["route"]
    rec["weak_values"] = _wv_block(res.weak_values)
    rec["validity"] = _validity_block(s, cfg.tolerances)
    if "wigner_route_difference" in res.metadata:
        rec["discrete_wigner_route"] = {
            "avg_output": res.metadata["wigner_route_avg"],
            "difference": res.metadata["wigner_route_difference"],
            "integer_coupling": res.metadata["integer_coupling"],
        }
    if with_oracle:
        orc = oracle.run_oracle(s)
        rec["oracle"] = {
            "p_f": orc.p_f,
            "avg_output": orc.avg_output,
            "error_bar": orc.error_bar,
            "dp_f": res.p_f - orc.p_f,
            "davg": res.avg_output - orc.avg_output,
        }
    return rec


def cmd_oracle_check(cfg, tol=None):
    s = cfg.setup
    tol = cfg.tolerances["oracle"] if tol is None else tol
    res = run(s, omega_min=cfg.tolerances["omega_min"])
    orc = oracle.run_oracle(s)
    # a Gaussian pointer is discretized by the oracle; its grid spread widens the tolerance
    rep = oracle.compare(res, orc, tol + orc.error_bar)
    rec = _base("oracle-check", cfg)
    rec["engine"] = _result_block(res)
    rec["oracle"] = {"p_f": orc.p_f, "avg_output": orc.avg_output, "error_bar": orc.error_bar}
    rec["comparison"] = {
        "passed": rep.passed,
        "tol": tol,
        "dp_f": rep.dp_f,
        "davg": rep.davg,
        "rel_p_f": rep.rel_p_f,
        "rel_avg": rep.rel_avg,
        "suspect_terms": list(rep.suspects),
    }
    return rec


SWEEP_COLUMNS = (
    ["exact_p_f", "exact_avg"]
    + list(VARIANTS)
    + [f"err_{v}" for v in VARIANTS]
    + ["linear_valid", "wcond", "wcond_pass"]
)


def _swept_setup(cfg, param, value):
    s = cfg.setup
    if param == "lambda":
        return replace(s, coupling=float(value))
    det = s.detector
    if not isinstance(det, GaussianDetector):
        raise ConfigError(f"sweep.parameter {param!r} needs a gaussian detector")
    changes = {"cov_qp" if param == "cov" else param: float(value)}
    if cfg.gaussian_sigma_p_default and param in ("sigma_q", "cov"):
        changes["sigma_p"] = pure_sigma_p(changes.get("sigma_q", det.sigma_q), changes.get("cov_qp", det.cov_qp))
    try:
        return replace(s, detector=replace(det, **changes))
    except ValidationError as exc:
        raise ConfigError(f"sweep at {param} = {value:g}: {exc}") from exc


def cmd_sweep(cfg):
    if cfg.sweep is None:
        raise ConfigError("sweep: the configuration has no 'sweep' section")
    sw, tol = cfg.sweep, cfg.tolerances
    values = [float(v) for v in sw.values()]
    rows, notes = [], []
    for v in values:
        setup = _swept_setup(cfg, sw.parameter, v)
        if setup.coupling <= 0:
            raise ConfigError("sweep: the coupling must be positive at every point")
        scan = convergence_scan(setup, [setup.coupling])
        r = scan.rows[0]
        rep = validity_check(setup.detector, setup.coupling, threshold=tol["wcond_threshold"])
        lead = [v] if sw.parameter == "lambda" else [v, setup.coupling]
        rows.append(lead + [r[c] for c in SWEEP_COLUMNS[:-2]] + [rep.wcond_value, rep.wcond_pass])
    slopes = {v: None for v in VARIANTS}
    if sw.parameter == "lambda":
        lo, hi = 1e-4, 1e-2
        inside = [row for row in rows if lo <= row[0] <= hi]
        for i, name in enumerate(VARIANTS):
            col = 3 + len(VARIANTS) + i  # lambda, exact_p_f, exact_avg, variants, then err_*
            slopes[name] = fit_slope([row[0] for row in inside], [row[col] for row in inside])
            if slopes[name] is None:
                notes.append(f"{name}: slope not applicable (fewer than three points above the noise floor in [1e-4, 1e-2])")
    rec = _base("sweep", cfg)
    rec["parameter"] = sw.parameter
    rec["scale"] = sw.scale
    lead = ["lambda"] if sw.parameter == "lambda" else [sw.parameter, "lambda"]
    rec["columns"] = lead + SWEEP_COLUMNS
    rec["rows"] = rows
    rec["slopes"] = slopes
    rec["notes"] = notes
    return rec


def cmd_wigner(cfg):
    det = cfg.setup.detector
    if not isinstance(det, DiscreteCanonicalDetector):
        raise ConfigError("wigner: needs a discrete detector")
    d, tol = det.d, cfg.tolerances["marginal"]
    w = discrete_wigner(det)
    p_marg, q_marg = w.sum(axis=1), w.sum(axis=0)
    f = fourier_basis(d)
    p_ref = np.real(np.diag(det.rho))
    q_ref = np.real(np.einsum("jk,jl,lk->k", f.conj(), det.rho, f))
    err = float(max(np.max(np.abs(p_marg - p_ref)), np.max(np.abs(q_marg - q_ref))))
    if err > tol:
        raise ConsistencyError(f"Wigner marginals deviate from the state by {err:.3e} > {tol:g}")
    labels = readout_labels(d)
    p_vals, q_vals = labels / np.sqrt(d), q_eigenvalues(d)
    rows = [
        [float(labels[j]), float(labels[k]), float(p_vals[j]), float(q_vals[k]), float(w[j, k]), float(p_marg[j]), float(q_marg[k])]
        for j in range(d)
        for k in range(d)
    ]
    rec = _base("wigner", cfg)
    rec["d"] = d
    rec["columns"] = ["j", "k", "P_j", "Q_k", "W", "marginal_P", "marginal_Q"]
    rec["rows"] = rows
    rec["max_marginal_error"] = err
    return rec


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser():
    p = _Parser(prog="vn1", description="Exact von Neumann measurement statistics for spin-1 observables.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", required=True, help="JSON run configuration")
    p.add_argument("--oracle", action="store_true", help="add brute-force oracle deltas (measure)")
    p.add_argument("--format", choices=("csv", "record"), help="output format (default: csv for sweep/wigner, record otherwise)")
    p.add_argument("--out", help="write to this path instead of stdout")
    p.add_argument("--tol", type=float, help="oracle-check tolerance (default 1e-10)")
    p.add_argument("--timestamp", action="store_true", help="include a creation time (output is then not reproducible)")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    return p


def execute(args):
    """Run one command; returns ``(text, exit_code)``."""
    cfg = load_config(args.config)
    if args.command == "weak-values":
        rec = cmd_weak_values(cfg)
    elif args.command == "measure":
        rec = cmd_measure(cfg, with_oracle=args.oracle)
    elif args.command == "oracle-check":
        rec = cmd_oracle_check(cfg, tol=args.tol)
    elif args.command == "sweep":
        rec = cmd_sweep(cfg)
    else:
        rec = cmd_wigner(cfg)
    if args.timestamp:
        rec["timestamps"] = {"created": datetime.datetime.now(datetime.timezone.utc).isoformat()}
    fmt = args.format or cfg.output_format or ("csv" if args.command in ("sweep", "wigner") else "record")
    text = render_record(rec)  # schema check runs for both formats
    if fmt == "csv":
        text = record_as_csv(rec)
    code = EXIT_OK
    if args.command == "oracle-check" and not rec["comparison"]["passed"]:
        code = EXIT_CONSISTENCY
    return text, code


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        text, code = execute(args)
    except OrthogonalityError as exc:
        print(f"vn1: orthogonality error: {exc}", file=sys.stderr)
        return EXIT_ORTHOGONAL
    except ConsistencyError as exc:
        print(f"vn1: consistency error: {exc}", file=sys.stderr)
        return EXIT_CONSISTENCY
    except (ValidationError, Vn1Error) as exc:
        print(f"vn1: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
