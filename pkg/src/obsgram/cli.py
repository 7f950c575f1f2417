"""Command-line front end.

    obsgram <command> --config run.json [--seed N] [--eps E] [--t1 T] [--dt H]
                      [--samples M] [--out PATH] [--format csv|json]

Commands: gramian, bound, expected, stochtest, ensemble, sweep, decompose,
headings.  Exit status is 0 on success, 1 for an invalid configuration and
2 for a numerical failure.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import io
import json
import math
import sys
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__
from .bounds import weak_observability_bound
from .closed_form import bs_expected_gramian, ou_expected_gramian, stochastic_observability_test
from .ensemble import EnsembleConfig, EnsembleError, empirical_decomposition, heading_experiment, run_ensemble, sweep
from .gramian import empirical_gramian
from .integrate import IntegrationError, TimeGrid
from .systems import SYSTEM_NAMES, ControlSignal, build_system

__all__ = ["ConfigError", "RunConfig", "parse_config", "execute", "render", "run", "main", "COMMANDS"]

COMMANDS = ("gramian", "bound", "expected", "stochtest", "ensemble", "sweep", "decompose", "headings")
_TABLE_COMMANDS = ("ensemble", "sweep", "decompose", "headings")
_NEEDS_X0 = ("gramian", "bound", "ensemble", "sweep", "decompose")
_KEYS = {
    "command", "system", "x0", "control", "eps", "t1", "dt", "seed", "samples", "sweep",
    "output", "format", "mode", "n_points", "dx", "tol", "heading_deg",
}


class ConfigError(ValueError):
    """Invalid configuration; ``path`` names the offending field."""

    def __init__(self, path, message):
        super().__init__(f"{path}: {message}")
        self.path = path


@dataclass(frozen=True)
class RunConfig:
    command: str
    system: dict
    t1: float
    x0: tuple | None = None
    control: dict | None = None
    eps: float = 1e-2
    dt: float = 1e-3
    seed: int = 0
    samples: int = 500
    sweep: dict | None = None
    output: str | None = None
    format: str = "json"
    mode: str = "deterministic"
    n_points: int = 5
    dx: float | None = None
    tol: float = 1e-8
    heading_deg: float = 45.0

    def to_dict(self):
        d = asdict(self)
        if d["x0"] is not None:
            d["x0"] = list(d["x0"])
        return d


def _num(doc, key, positive=False, integer=False, default=None):
    if key not in doc or doc[key] is None:
        return default
    val = doc[key]
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise ConfigError(key, "must be a number")
    if integer:
        if isinstance(val, float) and not val.is_integer():
            raise ConfigError(key, "must be an integer")
        val = int(val)
    else:
        val = float(val)
        if not math.isfinite(val):
            raise ConfigError(key, "must be finite")
    if positive and not val > 0:
        raise ConfigError(key, "must be > 0")
    return val


def _control(doc):
    ctl = doc.get("control")
    if ctl is None:
        return None
    if not isinstance(ctl, dict) or len(ctl) != 1:
        raise ConfigError("control", "must be one of {zero: m}, {constant: [...]}, {piecewise: {...}}")
    (kind, val), = ctl.items()
    if kind not in ("zero", "constant", "piecewise"):
        raise ConfigError("control", f"unknown control kind {kind!r}")
    try:
        _build_control({kind: val})
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"control.{kind}", str(exc)) from None
    return {kind: val}


def _build_control(ctl):
    if ctl is None:
        return None
    (kind, val), = ctl.items()
    if kind == "zero":
        return ControlSignal.zero(int(val))
    if kind == "constant":
        return ControlSignal.constant(val)
    return ControlSignal.piecewise(val["times"], val["values"])


def parse_config(text):
    """Validate a JSON run description and fill in defaults.

    Raises
    ------
    ConfigError
        With ``path`` set to the first offending field, e.g. ``sweep.param``.
    """
    try:
        doc = json.loads(text) if isinstance(text, str) else dict(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("<document>", f"invalid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError("<document>", "must be a JSON object")
    unknown = sorted(set(doc) - _KEYS)
    if unknown:
        raise ConfigError(unknown[0], "unknown field")

    command = doc.get("command")
    if command not in COMMANDS:
        raise ConfigError("command", f"must be one of {', '.join(COMMANDS)}")

    system = doc.get("system")
    if not isinstance(system, dict) or "name" not in system:
        raise ConfigError("system.name", "required")
    if system["name"] not in SYSTEM_NAMES:
        raise ConfigError("system.name", f"unknown system {system['name']!r}")
    params = system.get("params", {})
    if not isinstance(params, dict):
        raise ConfigError("system.params", "must be an object")
    system = {"name": system["name"], "params": params}

    t1 = _num(doc, "t1", positive=True)
    if t1 is None:
        raise ConfigError("t1", "required")
    dt = _num(doc, "dt", positive=True, default=1e-3)
    try:
        TimeGrid(t1, dt)
    except ValueError as exc:
        raise ConfigError("dt", str(exc)) from None

    x0 = doc.get("x0")
    if x0 is not None:
        if not isinstance(x0, list) or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in x0):
            raise ConfigError("x0", "must be a list of numbers")
        x0 = tuple(float(v) for v in x0)
    elif command in _NEEDS_X0:
        raise ConfigError("x0", f"required for {command}")

    sw = doc.get("sweep")
    if command == "sweep":
        if not isinstance(sw, dict) or not sw.get("param"):
            raise ConfigError("sweep.param", "required for sweep")
        vals = sw.get("values")
        if not isinstance(vals, list) or not vals:
            raise ConfigError("sweep.values", "must be a non-empty list")
        if not all(isinstance(v, (int, float)) and math.isfinite(v) for v in vals):
            raise ConfigError("sweep.values", "must be finite numbers")
        if any(b < a for a, b in zip(vals, vals[1:])):
            raise ConfigError("sweep.values", "must be sorted ascending")
        sw = {"param": str(sw["param"]), "values": [float(v) for v in vals]}
    elif sw is not None:
        raise ConfigError("sweep", f"conflicts with command {command!r}")

    if command in ("expected",) and system["name"] not in ("ou_linear", "bs_linear"):
        raise ConfigError("system.name", "expected needs ou_linear or bs_linear")
    if command == "stochtest" and system["name"] != "bs_linear":
        raise ConfigError("system.name", "stochtest needs bs_linear")
    if command == "headings" and system["name"] != "unicycle_sde":
        raise ConfigError("system.name", "headings needs unicycle_sde")

    mode = doc.get("mode", "deterministic")
    if mode not in ("deterministic", "stochastic"):
        raise ConfigError("mode", "must be 'deterministic' or 'stochastic'")
    fmt = doc.get("format") or ("csv" if command in _TABLE_COMMANDS else "json")
    if fmt not in ("csv", "json"):
        raise ConfigError("format", "must be 'csv' or 'json'")
    output = doc.get("output")
    if output is not None and not isinstance(output, str):
        raise ConfigError("output", "must be a path string")

    cfg = RunConfig(
        command=command,
        system=system,
        t1=t1,
        x0=x0,
        control=_control(doc),
        eps=_num(doc, "eps", positive=True, default=1e-2),
        dt=dt,
        seed=_num(doc, "seed", integer=True, default=0),
        samples=_num(doc, "samples", positive=True, integer=True, default=500),
        sweep=sw,
        output=output,
        format=fmt,
        mode=mode,
        n_points=_num(doc, "n_points", positive=True, integer=True, default=5),
        dx=_num(doc, "dx", positive=True),
        tol=_num(doc, "tol", positive=True, default=1e-8),
        heading_deg=_num(doc, "heading_deg", default=45.0),
    )
    if cfg.seed < 0:
        raise ConfigError("seed", "must be >= 0")
    try:
        model = build_system(cfg.system["name"], cfg.system["params"]) if command != "sweep" else None
    except ValueError as exc:
        raise ConfigError("system.params", str(exc)) from None
    if model is not None and x0 is not None and len(x0) != model.n:
        raise ConfigError("x0", f"{model.name} has {model.n} states, got {len(x0)}")
    if model is not None and cfg.control is not None and _build_control(cfg.control).m != model.m:
        raise ConfigError("control", f"{model.name} takes {model.m} controls")
    return cfg


# -- execution ------------------------------------------------------------------


def _linear_spec(cfg):
    return build_system(cfg.system["name"], cfg.system["params"]).params["spec"]


def execute(cfg):
    """Return ``(result_dict, table)``; table is ``(columns, rows)`` or None."""
    grid = TimeGrid(cfg.t1, cfg.dt)
    u = _build_control(cfg.control)
    name, params = cfg.system["name"], cfg.system["params"]
    c = cfg.command
    if c == "gramian":
        model = build_system(name, params)
        res = empirical_gramian(model, cfg.x0, u, cfg.eps, grid, mode=cfg.mode, seed=cfg.seed)
        return res.to_dict(), None
    if c == "bound":
        model = build_system(name, params)
        rep = weak_observability_bound(model, cfg.x0, u, cfg.eps, grid, cfg.n_points, cfg.dx)
        return rep.to_dict(), None
    if c == "expected":
        spec = _linear_spec(cfg)
        fn = ou_expected_gramian if name == "ou_linear" else bs_expected_gramian
        return fn(spec, cfg.eps, cfg.t1, cfg.dt).to_dict(), None
    if c == "stochtest":
        out = stochastic_observability_test(_linear_spec(cfg), cfg.t1, cfg.tol, dt=cfg.dt)
        return {k: (v.tolist() if isinstance(v, np.ndarray) else v) for k, v in out.items()}, None
    if c in ("ensemble", "sweep"):
        econf = EnsembleConfig(
            system=name, params=params, x0=cfg.x0, eps=cfg.eps, t1=cfg.t1, dt=cfg.dt,
            samples=cfg.samples, base_seed=cfg.seed, control=u,
            sweep_param=cfg.sweep["param"] if cfg.sweep else None,
            sweep_values=tuple(cfg.sweep["values"]) if cfg.sweep else (),
        )
        if c == "ensemble":
            res = run_ensemble(econf)
            cols = ["sample_index", "lambda_min", "lambda_max", "nu", "kappa"]
            rows = [[k, g.sigma_min, g.lambda_max, g.nu, g.kappa] for k, g in zip(res.sample_indices, res.gramians)]
            summ = _summary_dict(res.summary)
            return {"summary": summ, "samples": [dict(zip(cols, r)) for r in rows]}, (cols, rows)
        cols = ["param_value", "metric", "median", "q25", "q75", "p5", "p95", "mean", "n_degenerate"]
        rows = []
        for row in sweep(econf):
            for metric, s in row.summary.metrics.items():
                rows.append([row.param_value, metric, s.median, s.q25, s.q75, s.p5, s.p95, s.mean, s.n_degenerate])
        return {"rows": [dict(zip(cols, r)) for r in rows]}, (cols, rows)
    if c == "decompose":
        model = build_system(name, params)
        dec = empirical_decomposition(model, cfg.x0, u, cfg.eps, grid, cfg.samples, cfg.seed)
        cols = ["matrix", "i", "j", "value"]
        rows = []
        mats = {
            "W_bar": dec.W_bar, "W_hat": dec.W_hat, "W_hat_separate": dec.W_hat_separate,
            "mean_sample_gramian": dec.mean_sample_gramian,
        }
        for key, M in mats.items():
            for i in range(M.shape[0]):
                for j in range(M.shape[1]):
                    rows.append([key, i, j, float(M[i, j])])
        result = {k: v.tolist() for k, v in mats.items()}
        result["offdiag_gap"] = dec.offdiag_gap
        result["samples"] = dec.samples
        return result, (cols, rows)
    if c == "headings":
        h = heading_experiment(
            params.get("q", 0.0), cfg.samples, cfg.t1, cfg.seed, cfg.dt, cfg.heading_deg,
            params.get("noise_channel", "speed"),
        )
        cols = ["bin_start", "bin_end", "count"]
        rows = [[float(a), float(b), int(n)] for a, b, n in zip(h.edges[:-1], h.edges[1:], h.counts)]
        return {"angles": h.angles.tolist(), "bins": [dict(zip(cols, r)) for r in rows], "n_excluded": h.n_excluded}, (cols, rows)
    raise ConfigError("command", f"unknown command {c!r}")


def _summary_dict(summary):
    return {
        "metrics": {k: asdict(v) for k, v in summary.metrics.items()},
        "mean_gramian": summary.mean_gramian.tolist(),
        "gramian_se": summary.gramian_se.tolist(),
        "n_samples": summary.n_samples,
        "n_failed": summary.n_failed,
    }


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, str):
        return v
    return json.dumps(v)


def _metadata(cfg):
    return {
        "tool": "obsgram",
        "version": __version__,
        "generated": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
        "config": cfg.to_dict(),
    }


def render(cfg, result, table):
    """Serialize a result as CSV or JSON text (metadata first)."""
    meta = _metadata(cfg)
    if cfg.format == "json":
        return json.dumps({"metadata": meta, "result": result}, indent=2, sort_keys=True) + "\n"
    buf = io.StringIO()
    for key in ("tool", "version", "generated"):
        buf.write(f"# {key}: {meta[key]}\n")
    buf.write(f"# config: {json.dumps(meta['config'], sort_keys=True)}\n")
    if table is None:
        cols, rows = ["field", "value"], [[k, v] for k, v in result.items()]
    else:
        cols, rows = table
    buf.write(",".join(cols) + "\n")
    for r in rows:
        buf.write(",".join(_fmt(v) if not isinstance(v, (list, dict)) else '"' + json.dumps(v).replace('"', '""') + '"' for v in r) + "\n")
    return buf.getvalue()


def run(cfg, stdout=None, stderr=None):
    """Execute a validated config and write its artifact.  Returns the exit code."""
    stdout = sys.stdout if stdout is None else stdout
    stderr = sys.stderr if stderr is None else stderr
    try:
        result, table = execute(cfg)
    except ConfigError as exc:
        print(f"error: {exc}", file=stderr)
        return 1
    except (IntegrationError, EnsembleError, np.linalg.LinAlgError, FloatingPointError, OverflowError) as exc:
        print(f"numerical failure: {exc}", file=stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=stderr)
        return 1
    text = render(cfg, result, table)
    if cfg.output:
        with open(cfg.output, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        stdout.write(text)
    return 0


def main(argv=None):
    ap = argparse.ArgumentParser(prog="obsgram", description=__doc__.split("\n\n")[0])
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", required=True, help="JSON run description")
    ap.add_argument("--seed", type=int)
    ap.add_argument("--eps", type=float)
    ap.add_argument("--t1", type=float)
    ap.add_argument("--dt", type=float)
    ap.add_argument("--samples", type=int)
    ap.add_argument("--out", dest="output")
    ap.add_argument("--format", choices=("csv", "json"))
    args = ap.parse_args(argv)
    try:
        with open(args.config, encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return 1
    if not isinstance(doc, dict):
        print("error: <document>: must be a JSON object", file=sys.stderr)
        return 1
    if doc.get("command", args.command) != args.command:
        print(f"error: command: config says {doc['command']!r}, command line says {args.command!r}", file=sys.stderr)
        return 1
    doc["command"] = args.command
    for key in ("seed", "eps", "t1", "dt", "samples", "output", "format"):
        val = getattr(args, key)
        if val is not None:
            doc[key] = val
    try:
        cfg = parse_config(doc)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
