"""Command-line front end: ``magtrace <command> --config FILE``.

Configs are TOML documents with flat sections.  Every problem found while
validating is collected and reported together.  Exit status is 0 on
success, 1 for configuration or domain errors and 2 for numerical
non-convergence.
"""
from __future__ import annotations

import argparse
import datetime as _dt
import sys
from dataclasses import dataclass, field

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import asymptotics, coeff, geometry, special1d
from ._format import dumps_csv, dumps_json
from .errors import ConfigError, MagtraceError, NumericError
from .testfunctions import from_dict as function_from_dict

COMMANDS = ("coeffs", "model1d", "verify", "kunz", "thermo")
FORMATS = ("json", "csv")

# allowed sections and keys per command; None means "any keys, validated by the builder"
SECTIONS = {
    "coeffs": {"domain": None, "field": None, "f": None,
               "tolerance": {"abs_tol", "k_cap"}, "output": {"path", "format"}},
    "model1d": {"model1d": {"xi", "k_max", "points_per_unit"}, "output": {"path", "format"}},
    "verify": {"domain": None, "field": None, "f": None,
               "verify": {"mode", "h", "L", "E", "K", "n_grid", "trace_tol"},
               "tolerance": {"abs_tol", "k_cap"}, "output": {"path", "format"}},
    "kunz": {"kunz": {"B", "K", "E"}, "output": {"path", "format"}},
    "thermo": {"thermo": {"B", "beta", "mu", "L", "R0"},
               "tolerance": {"abs_tol", "k_cap"}, "output": {"path", "format"}},
}
REQUIRED = {
    "coeffs": ("domain", "field", "f"),
    "model1d": ("model1d",),
    "verify": ("domain", "field", "verify"),
    "kunz": ("kunz",),
    "thermo": ("thermo",),
}


@dataclass
class RunConfig:
    command: str
    params: dict = field(default_factory=dict)
    out_path: str | None = None
    out_format: str = "json"


def _number(errors, where, value, positive=False, integer=False, minimum=None):
    ok = isinstance(value, (int, float)) and not isinstance(value, bool)
    if ok and integer and int(value) != value:
        ok = False
    if not ok:
        errors.append(f"{where}: expected {'an integer' if integer else 'a number'}, got {value!r}")
        return None
    if positive and not value > 0:
        errors.append(f"{where}: must be > 0, got {value}")
        return None
    if minimum is not None and value < minimum:
        errors.append(f"{where}: must be >= {minimum}, got {value}")
        return None
    return int(value) if integer else float(value)


def _number_list(errors, where, value, positive=False):
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        value = [value]
    if not isinstance(value, list) or not value:
        errors.append(f"{where}: expected a non-empty array of numbers")
        return None
    out = [_number(errors, f"{where}[{i}]", v, positive) for i, v in enumerate(value)]
    return None if any(v is None for v in out) else out


def _build(errors, where, builder, spec):
    if spec is None:
        return None  # missing sections are reported by _check_keys
    try:
        return builder(spec)
    except MagtraceError as exc:
        errors.append(f"{where}: {exc}")
    except TypeError as exc:
        errors.append(f"{where}: {exc}")
    return None


def _tolerance(errors, doc):
    sec = doc.get("tolerance", {})
    abs_tol = sec.get("abs_tol", 1e-10)
    k_cap = sec.get("k_cap", 200)
    a = _number(errors, "tolerance.abs_tol", abs_tol, positive=True)
    k = _number(errors, "tolerance.k_cap", k_cap, integer=True, minimum=1)
    if a is None or k is None:
        return None
    return _build(errors, "tolerance", lambda _: coeff.SeriesTolerance(a, k), {})


def _check_keys(errors, command, doc):
    allowed = SECTIONS[command]
    for name, value in doc.items():
        if name not in allowed:
            errors.append(f"unknown section [{name}] for command '{command}'")
            continue
        if not isinstance(value, dict):
            errors.append(f"'{name}' must be a section")
            continue
        keys = allowed[name]
        if keys is not None:
            for key in value:
                if key not in keys:
                    errors.append(f"unknown key '{name}.{key}'")
    for name in REQUIRED[command]:
        if name not in doc:
            errors.append(f"missing section [{name}]")


def _parse_coeffs(errors, doc, p):
    p["domain"] = _build(errors, "domain", geometry.domain_from_dict, doc.get("domain"))
    p["field"] = _build(errors, "field", geometry.field_from_dict, doc.get("field"))
    p["f"] = _build(errors, "f", function_from_dict, doc.get("f"))
    p["tol"] = _tolerance(errors, doc)


def _parse_model1d(errors, doc, p):
    sec = doc.get("model1d", {})
    p["xi"] = _number_list(errors, "model1d.xi", sec.get("xi"))
    p["k_max"] = _number(errors, "model1d.k_max", sec.get("k_max"), integer=True, minimum=1)
    p["points_per_unit"] = _number(errors, "model1d.points_per_unit",
                                   sec.get("points_per_unit", 64), integer=True, minimum=8)


def _gap_error(errors, where, E, K, b_min, b_max):
    if not (2 * K - 1) * b_max < E < (2 * K + 1) * b_min:
        errors.append(f"{where}: gap condition fails, E={E} not in "
                      f"((2K-1)B_max, (2K+1)B_min) = ({(2 * K - 1) * b_max:g}, "
                      f"{(2 * K + 1) * b_min:g}) for K={K}")


def _parse_verify(errors, doc, p):
    p["domain"] = _build(errors, "domain", geometry.domain_from_dict, doc.get("domain"))
    p["field"] = _build(errors, "field", geometry.field_from_dict, doc.get("field"))
    p["tol"] = _tolerance(errors, doc)
    sec = doc.get("verify", {})
    mode = sec.get("mode", "trace")
    if mode not in ("trace", "count"):
        errors.append(f"verify.mode: expected 'trace' or 'count', got {mode!r}")
    p["mode"] = mode
    if ("h" in sec) == ("L" in sec):
        errors.append("verify: give exactly one of 'h' or 'L'")
        p["h"] = None
    elif "h" in sec:
        p["h"] = _number_list(errors, "verify.h", sec["h"], positive=True)
    else:
        Ls = _number_list(errors, "verify.L", sec["L"], positive=True)
        p["h"] = None if Ls is None else [1.0 / L ** 2 for L in Ls]
    if p["h"] is not None and any(b >= a for a, b in zip(p["h"], p["h"][1:])):
        errors.append("verify: h values must be strictly decreasing (L increasing)")
    p["n_grid"] = _number(errors, "verify.n_grid", sec.get("n_grid", 128), integer=True, minimum=64)
    p["trace_tol"] = _number(errors, "verify.trace_tol", sec.get("trace_tol", 1e-8), positive=True)
    if mode == "trace":
        if "f" not in doc:
            errors.append("missing section [f] (required for mode='trace')")
        p["f"] = _build(errors, "f", function_from_dict, doc.get("f"))
    elif mode == "count":
        p["E"] = _number(errors, "verify.E", sec.get("E"), positive=True)
        p["K"] = _number(errors, "verify.K", sec.get("K", 1), integer=True, minimum=1)
        if None not in (p["E"], p["K"], p["domain"], p["field"]):
            b_min, b_max = geometry.field_range(p["domain"], p["field"])
            _gap_error(errors, "verify", p["E"], p["K"], b_min, b_max)


def _parse_kunz(errors, doc, p):
    sec = doc.get("kunz", {})
    p["B"] = _number(errors, "kunz.B", sec.get("B"), positive=True)
    p["K"] = _number(errors, "kunz.K", sec.get("K", 1), integer=True, minimum=1)
    p["E"] = _number_list(errors, "kunz.E", sec.get("E"))
    if None not in (p["B"], p["K"], p["E"]):
        for i, E in enumerate(p["E"]):
            _gap_error(errors, f"kunz.E[{i}]", E, p["K"], p["B"], p["B"])


def _parse_thermo(errors, doc, p):
    sec = doc.get("thermo", {})
    p["B"] = _number(errors, "thermo.B", sec.get("B"), positive=True)
    beta = _number(errors, "thermo.beta", sec.get("beta"), positive=True)
    mu = _number(errors, "thermo.mu", sec.get("mu"))
    p["L"] = _number_list(errors, "thermo.L", sec.get("L"), positive=True)
    if p["L"] is not None and min(p["L"]) < 1:
        errors.append("thermo.L: every L must be >= 1")
    p["R0"] = _number(errors, "thermo.R0", sec.get("R0", 1.0), positive=True)
    p["f"] = None
    if beta is not None and mu is not None:
        p["f"] = _build(errors, "thermo", function_from_dict,
                        {"kind": "log_pressure", "beta": beta, "mu": mu})
    p["tol"] = _tolerance(errors, doc)


PARSERS = {"coeffs": _parse_coeffs, "model1d": _parse_model1d, "verify": _parse_verify,
           "kunz": _parse_kunz, "thermo": _parse_thermo}


def parse_config(text, command):
    """Validate a TOML config for ``command``; raises ConfigError listing every problem."""
    if command not in COMMANDS:
        raise ConfigError(f"unknown command {command!r}; expected one of {COMMANDS}")
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"syntax error: {exc}") from exc
    errors = []
    _check_keys(errors, command, doc)
    params = {}
    PARSERS[command](errors, doc, params)
    out = doc.get("output", {})
    fmt = out.get("format", "json")
    if fmt not in FORMATS:
        errors.append(f"output.format: expected one of {FORMATS}, got {fmt!r}")
    path = out.get("path")
    if path is not None and not isinstance(path, str):
        errors.append("output.path: expected a string")
    if errors:
        raise ConfigError(errors)
    return RunConfig(command, params, path, fmt)


def _timestamp():
    return _dt.datetime.now(_dt.timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def _run_coeffs(p, fmt):
    dom, fld, f, tol = p["domain"], p["field"], p["f"], p["tol"]
    c0 = geometry.c0(f, dom, fld, tol)
    c1 = geometry.c1(f, dom, fld, tol)
    series = None
    if isinstance(fld, geometry.ConstantField):
        series = coeff.s_series(fld.B0, f, tol)
    if fmt == "csv":
        if series is not None:
            return coeff.s_table_csv(series)
        return dumps_csv(["quantity", "value", "err_est"],
                         [("c0", c0.value, c0.err_est), ("c1", c1.value, c1.err_est)])
    doc = {"command": "coeffs", "geometry": geometry.describe(dom, fld), "f": f.to_dict(),
           "c0": c0.value, "c0_err": c0.err_est, "c1": c1.value, "c1_err": c1.err_est}
    if series is not None:
        doc["s_terms"] = [{"k": t.k, "s_k": t.value, "err_est": t.err_est,
                           "k_window_lo": t.xi_lo, "k_window_hi": t.xi_hi}
                          for t in series.terms]
        doc["k_used"] = series.k_used
    return doc


def _run_model1d(p, fmt):
    if fmt == "csv":
        return special1d.model_table_csv(p["xi"], p["k_max"], p["points_per_unit"])
    rows = []
    for xi in p["xi"]:
        for pair in special1d.model_eigensystem(xi, p["k_max"],
                                                points_per_unit=p["points_per_unit"]):
            rows.append({"xi": xi, "k": pair.k, "e": pair.e, "dpsi0_sq": pair.dpsi0 ** 2,
                         "err_est": pair.err_est})
    return {"command": "model1d", "rows": rows}


def _run_verify(p, fmt):
    if p["mode"] == "trace":
        rep = asymptotics.convergence_study(p["domain"], p["field"], p["f"], p["h"], p["tol"],
                                            p["trace_tol"], p["n_grid"])
        extra = {"f": p["f"].to_dict()}
    else:
        rep = asymptotics.counting_vs_exact(p["domain"], p["field"], p["E"], p["K"], p["h"],
                                            p["tol"].abs_tol)
        extra = {"E": p["E"], "K": p["K"]}
    if fmt == "csv":
        return rep.to_csv()
    return {"command": "verify", "mode": p["mode"], "domain": p["domain"].to_dict(),
            "field": p["field"].to_dict(), **extra, **rep.to_dict()}


def _run_kunz(p, fmt):
    res = [asymptotics.kunz_shift(p["B"], E, p["K"]) for E in p["E"]]
    if fmt == "csv":
        return dumps_csv(["E", "kunz", "err_est"], [(r.E, r.value, r.err_est) for r in res])
    return {"command": "kunz", "B": p["B"], "K": p["K"],
            "rows": [{"E": r.E, "kunz": r.value, "err_est": r.err_est,
                      "thresholds": r.thresholds} for r in res]}


def _run_thermo(p, fmt):
    rows = []
    for L in p["L"]:
        r = asymptotics.thermo_density(p["B"], p["f"], L, p["R0"], p["tol"])
        rows.append(r)
    if fmt == "csv":
        return dumps_csv(["L", "left", "right", "gap", "gap_times_L"],
                         [(r.L, r.left, r.right, r.gap, r.gap * r.L) for r in rows])
    return {"command": "thermo", "B": p["B"], "f": p["f"].to_dict(), "R0": p["R0"],
            "rows": [{"L": r.L, "left": r.left, "right": r.right, "gap": r.gap,
                      "gap_times_L": r.gap * r.L, "bulk": r.bulk, "boundary": r.boundary,
                      "bookkeeping_exact": r.bookkeeping_exact} for r in rows]}


RUNNERS = {"coeffs": _run_coeffs, "model1d": _run_model1d, "verify": _run_verify,
           "kunz": _run_kunz, "thermo": _run_thermo}


def render(config):
    """Output text for a validated config (JSON gets a ``generated_at`` stamp)."""
    out = RUNNERS[config.command](config.params, config.out_format)
    if isinstance(out, str):
        return out
    return dumps_json({**out, "generated_at": _timestamp()})


def run(config, stdout=None):
    """Execute ``config``; returns the exit status."""
    stdout = stdout or sys.stdout
    try:
        text = render(config)
    except NumericError as exc:
        print(f"error: numerical non-convergence: {exc}", file=sys.stderr)
        if exc.diagnostics:
            print(dumps_json({"diagnostics": exc.diagnostics}), file=sys.stderr, end="")
        return 2
    except MagtraceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if config.out_path:
        with open(config.out_path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        stdout.write(text)
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="magtrace",
        description="Two-term trace and counting asymptotics for 2D magnetic Dirichlet operators.")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", required=True, help="TOML configuration file")
    parser.add_argument("--out", help="output path (default: stdout)")
    parser.add_argument("--format", choices=FORMATS, help="output format (default: json)")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        with open(args.config, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return 1
    try:
        config = parse_config(text, args.command)
    except ConfigError as exc:
        for msg in exc.errors:
            print(f"config error: {msg}", file=sys.stderr)
        return 1
    if args.out:
        config.out_path = args.out
    if args.format:
        config.out_format = args.format
    return run(config)


if __name__ == "__main__":
    sys.exit(main())
