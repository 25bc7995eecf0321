"""Command-line front end: ``rdlattice <command> --config cfg.json [--set k=v ...]``.

Commands: rd-curve, slb, fbl, lattice-entropy, simulate, dc.  Every CSV starts
with a comment line recording version, seed and unit, followed by a header.
A copy of the effective configuration is written next to each output.

Exit codes: 0 success, 2 configuration error, 3 numeric failure,
4 every requested bound was vacuous.
"""

from __future__ import annotations

import argparse
import copy
import csv
import io
import json
import math
import sys
from pathlib import Path

from . import __version__
from .distortion import DistortionError, DistortionMeasure
from .infomath import LN2

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_VACUOUS = 0, 2, 3, 4
COMMANDS = ("rd-curve", "slb", "fbl", "lattice-entropy", "simulate", "dc")


class ConfigError(ValueError):
    """Invalid or missing configuration field."""


class VacuousResult(RuntimeError):
    pass


# -- configuration -------------------------------------------------------------------

def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_overrides(cfg: dict, overrides) -> dict:
    """Set dotted keys, e.g. ``grid.d=[0.1,0.2]`` or ``seed=7``."""
    cfg = copy.deepcopy(cfg)
    for item in overrides or ():
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        key, val = item.split("=", 1)
        node = cfg
        parts = key.strip().split(".")
        for p in parts[:-1]:
            node = node.setdefault(p, {})
            if not isinstance(node, dict):
                raise ConfigError(f"override {key!r} descends into a non-object field")
        node[parts[-1]] = _parse_value(val)
    return cfg


def _need(cfg: dict, key: str):
    node = cfg
    for p in key.split("."):
        if not isinstance(node, dict) or p not in node:
            raise ConfigError(f"missing config field '{key}'")
        node = node[p]
    return node


def _grid(cfg: dict, name: str, cast=float) -> list:
    vals = _need(cfg, f"grid.{name}")
    if not isinstance(vals, list) or not vals:
        raise ConfigError(f"config field 'grid.{name}' must be a nonempty list")
    try:
        return [cast(v) for v in vals]
    except (TypeError, ValueError):
        raise ConfigError(f"config field 'grid.{name}' has a non-numeric entry") from None


def _seed(cfg: dict) -> int:
    seed = _need(cfg, "seed")
    if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
        raise ConfigError("config field 'seed' must be a nonnegative integer")
    return seed


def _unit(cfg: dict) -> str:
    unit = cfg.get("unit", "nats")
    if unit not in ("nats", "bits"):
        raise ConfigError("config field 'unit' must be 'bits' or 'nats'")
    return unit


def _source(cfg: dict):
    from .sources import source_from_json

    try:
        return source_from_json(_need(cfg, "source"))
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"config field 'source' is invalid: {exc}") from None


def _distortion(cfg: dict, default=None) -> DistortionMeasure:
    if "distortion" not in cfg:
        if default is not None:
            return default
        raise ConfigError("missing config field 'distortion'")
    try:
        return DistortionMeasure.from_json(cfg["distortion"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"config field 'distortion' is invalid: {exc}") from None


def _finite_source(cfg):
    from .sources import FiniteSource

    src = _source(cfg)
    if not isinstance(src, FiniteSource):
        raise ConfigError("config field 'source' must be a finite source {pmf, distortion}")
    return src


# -- output helpers ----------------------------------------------------------------------

def _scale(x: float, unit: str) -> float:
    return x / LN2 if unit == "bits" else x


def render_csv(rows: list, columns: list, seed: int, unit: str) -> str:
    buf = io.StringIO()
    buf.write(f"# rdlattice {__version__} seed={seed} unit={unit}\n")
    w = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: _fmt(r.get(k, "")) for k in columns})
    return buf.getvalue()


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, bool):
        return "true" if v else "false"
    return v


# -- commands ------------------------------------------------------------------------------

def cmd_rd_curve(cfg: dict):
    from .rdfinite import blahut_arimoto, slb_equality_test
    from .sources import FiniteSource
    from .tilted import classical_slb

    seed, unit = _seed(cfg), _unit(cfg)
    src = _source(cfg)
    ds = _grid(cfg, "d")
    rows = []
    if isinstance(src, FiniteSource):
        dist = src.distortion
        try:
            from .distortion import difference_profile
            difference_profile(dist)
            grouped = True
        except DistortionError:
            grouped = False
        for d in ds:
            sol = blahut_arimoto(src, d)
            slb = classical_slb(src, dist, d).slb_rate
            eq = slb_equality_test(src, d).holds if grouped else abs(sol.rate_nats - slb) <= 1e-6
            rows.append({"d": d, "rate": _scale(sol.rate_nats, unit), "slb": _scale(slb, unit),
                         "equality_flag": bool(eq)})
    else:
        dist = _distortion(cfg, DistortionMeasure.mse())
        if src.dimension != 1:
            raise ConfigError("rd-curve takes a single-letter continuous source")
        for d in ds:
            slb = classical_slb(src, dist, d).slb_rate
            rate = math.nan
            if src.family == "gaussian" and dist.kind == "mse":
                var = dict(src.params)["var"]
                rate = max(0.0, 0.5 * math.log(var / d))
            eq = (not math.isnan(rate)) and abs(rate - max(slb, 0.0)) <= 1e-12
            rows.append({"d": d, "rate": _scale(rate, unit), "slb": _scale(slb, unit),
                         "equality_flag": bool(eq)})
    return render_csv(rows, ["d", "rate", "slb", "equality_flag"], seed, unit)


def cmd_slb(cfg: dict):
    from .tilted import classical_slb

    seed, unit = _seed(cfg), _unit(cfg)
    src = _source(cfg)
    dist = getattr(src, "distortion", None) or _distortion(cfg, DistortionMeasure.mse())
    rows = []
    for d in _grid(cfg, "d"):
        rec = classical_slb(src, dist, d).to_record(d)
        rec["phi_nats"] = _scale(rec["phi_nats"], unit)
        rec["slb_nats"] = _scale(rec["slb_nats"], unit)
        rows.append(rec)
    cols = ["d", "lambda", "phi_nats", "slb_nats", "varentropy_nats2"]
    return render_csv(rows, cols, seed, unit)


FBL_BOUNDS = ("converse_ca", "converse_c", "converse_c_expansion", "achievability_lattice",
              "gaussian", "slb", "memory", "converse_cj")


def cmd_fbl(cfg: dict):
    from . import fbl
    from .sources import FiniteSource

    seed, unit = _seed(cfg), _unit(cfg)
    src = _source(cfg)
    ns = _grid(cfg, "n", int)
    ds = _grid(cfg, "d")
    es = _grid(cfg, "eps")
    bounds = cfg.get("bounds", ["converse_ca", "converse_c", "achievability_lattice", "gaussian"])
    bad = [b for b in bounds if b not in FBL_BOUNDS]
    if bad:
        raise ConfigError(f"config field 'bounds' has unknown entries {bad}")
    samples = int(cfg.get("samples", 1_000_000))
    family = cfg.get("lattice", {}).get("family", "an_star")
    points = []
    finite = isinstance(src, FiniteSource)
    dist = None if finite else _distortion(cfg, DistortionMeasure.mse())
    for n in ns:
        for d in ds:
            for e in es:
                if finite:
                    points.extend(_fbl_finite(src, bounds, n, d, e))
                    continue
                if "converse_ca" in bounds:
                    points.append(fbl.converse_ca(src, dist, n, d, e))
                if "converse_c" in bounds:
                    points.append(fbl.converse_c_beta(src, dist, n, d, e))
                if "converse_c_expansion" in bounds:
                    points.append(fbl.converse_c_expansion(src, dist, n, d, e))
                if "achievability_lattice" in bounds:
                    pt = fbl.achievability_lattice(src, n, d, e, family=family, samples=samples,
                                                   seed=seed)
                    points.append(pt)
                    points.append(pt.metadata["analytic"])
                if "gaussian" in bounds:
                    points.append(fbl.gaussian_approx(src, dist, n, d, e))
                if "slb" in bounds:
                    points.append(fbl.slb_point(src, dist, n, d, e))
                if "memory" in bounds:
                    mb = fbl.memory_bounds(fbl.ProcessDescriptor.from_source(src), n, d, e, family)
                    points.extend([mb["converse"], mb["achievability"]])
    rows = []
    for p in points:
        r = p.row()
        r["rate_nats"] = p.rate_nats
        r["rate_bits"] = p.rate_bits
        rows.append(r)
    lower = [p for p in points if p.label.startswith("converse") and p.label != "converse_c_expansion"]
    if lower and all(p.vacuous for p in lower) and len(lower) == len(points):
        raise VacuousResult(render_csv(rows, _FBL_COLS, seed, unit))
    return render_csv(rows, _FBL_COLS, seed, unit)


_FBL_COLS = ["n", "d", "eps", "label", "rate_nats", "rate_bits", "gamma", "mc_se", "flags"]


def _fbl_finite(src, bounds, n, d, e):
    from . import fbl
    from .rdfinite import blahut_arimoto, converse_cj_rate

    out = []
    if "converse_cj" in bounds or "converse_ca" in bounds:
        sol = blahut_arimoto(src, d)
        rate = converse_cj_rate(sol, n, e)
        out.append(fbl.BoundPoint(n, d, e, "converse_cj", rate,
                                  flags=("vacuous",) if rate <= 0 else ()))
    if "gaussian" in bounds:
        out.append(fbl.gaussian_approx(src, None, n, d, e, mode="discrete"))
    return out


def cmd_lattice_entropy(cfg: dict):
    from .lattice import (entropy_upper_bound_thm8, lattice_d_entropy_bounds, make_lattice,
                          output_info_spectrum, scale_to_distortion)

    seed, unit = _seed(cfg), _unit(cfg)
    src = _source(cfg)
    dist = _distortion(cfg, DistortionMeasure.mse())
    lat_cfg = cfg.get("lattice", {"family": "zn"})
    family = lat_cfg.get("family", "zn")
    n = src.dimension
    samples = int(cfg.get("samples", 1_000_000))
    rogers_c = float(cfg.get("rogers_c", 2.0))
    try:
        base = make_lattice(family, n)
    except ValueError as exc:
        raise ConfigError(f"config field 'lattice' is invalid: {exc}") from None
    rows = []
    for d in _grid(cfg, "d"):
        lat = scale_to_distortion(base, dist, d)
        sp = output_info_spectrum(lat, src, samples, seed)
        b = entropy_upper_bound_thm8(lat, src)
        lb = lattice_d_entropy_bounds(src, d, rogers_c=rogers_c)
        rows.append({"d": d, "H_mc": _scale(sp.entropy, unit), "H_se": _scale(sp.se, unit),
                     "bound_thm8": _scale(b.entropy_bound, unit),
                     "h_minus_logV": _scale(b.base, unit),
                     "lattice_entropy_lower": _scale(lb.lower, unit),
                     "lattice_entropy_upper": _scale(lb.upper, unit), "rogers_c": rogers_c})
    cols = ["d", "H_mc", "H_se", "bound_thm8", "h_minus_logV", "lattice_entropy_lower",
            "lattice_entropy_upper", "rogers_c"]
    return render_csv(rows, cols, seed, unit)


def cmd_simulate(cfg: dict):
    from .codec import simulate_fixed_length, simulate_variable_length
    from .lattice import make_lattice, scale_to_distortion

    seed = _seed(cfg)
    src = _source(cfg)
    dist = _distortion(cfg, DistortionMeasure.mse())
    lat_cfg = cfg.get("lattice", {"family": "zn"})
    samples = int(cfg.get("samples", 1_000_000))
    try:
        base = make_lattice(lat_cfg.get("family", "zn"), src.dimension,
                            shift=lat_cfg.get("shift"))
    except ValueError as exc:
        raise ConfigError(f"config field 'lattice' is invalid: {exc}") from None
    if "cells" in lat_cfg:
        # K equal cells tiling the support of a uniform letter
        K = int(lat_cfg["cells"])
        P = dict(src.params)
        width = (P["b"] - P["a"]) / K
        lat = make_lattice(lat_cfg.get("family", "zn"), src.dimension, scale=width,
                           shift=P["a"] / width + 0.5)
        d = width * width / 4
    else:
        d = float(_need(cfg, "d"))
        lat = scale_to_distortion(base, dist, d)
    result = {"variable_length": simulate_variable_length(src, lat, samples, seed, d).to_json()}
    if "M" in cfg:
        result["fixed_length"] = simulate_fixed_length(src, lat, int(cfg["M"]), samples, seed,
                                                       d).to_json()
    return json.dumps(result, indent=2, sort_keys=True) + "\n"


def cmd_dc(cfg: dict):
    from .rdfinite import critical_distortion

    src = _finite_source(cfg)
    try:
        res = critical_distortion(src)
    except DistortionError as exc:
        raise ConfigError(f"config field 'source.distortion' is invalid: {exc}") from None
    return json.dumps({"d_c": round(res.d_c, 6), "d_c_raw": res.d_c, "verified": res.verified},
                      indent=2) + "\n"


HANDLERS = {"rd-curve": cmd_rd_curve, "slb": cmd_slb, "fbl": cmd_fbl,
            "lattice-entropy": cmd_lattice_entropy, "simulate": cmd_simulate, "dc": cmd_dc}


def run(command: str, cfg: dict) -> str:
    """Execute a command on a configuration dict and return the rendered output."""
    if command not in HANDLERS:
        raise ConfigError(f"unknown command {command!r}")
    return HANDLERS[command](cfg)


def _write(path, text):
    if path is None:
        sys.stdout.write(text)
        return
    Path(path).write_text(text)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="rdlattice", description=__doc__.split("\n")[0])
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", "-c", help="JSON configuration file")
    parser.add_argument("--set", "-s", action="append", default=[], metavar="KEY=VALUE",
                        help="override a (dotted) config field; value parsed as JSON if possible")
    parser.add_argument("--out", "-o", help="output file (default: stdout)")
    args = parser.parse_args(argv)

    from .rdfinite import ConvergenceError
    from .tilted import NonMonotoneTiltError, TiltRangeError

    try:
        cfg = {}
        if args.config:
            try:
                cfg = json.loads(Path(args.config).read_text())
            except (OSError, json.JSONDecodeError) as exc:
                raise ConfigError(f"cannot read config: {exc}") from None
        cfg = apply_overrides(cfg, args.set)
        text = run(args.command, cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except VacuousResult as res:
        _write(args.out, str(res))
        print("all requested bounds are vacuous", file=sys.stderr)
        return EXIT_VACUOUS
    except (ConvergenceError, TiltRangeError, NonMonotoneTiltError, FloatingPointError,
            ArithmeticError, DistortionError, ValueError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    _write(args.out, text)
    if args.out:
        Path(str(args.out) + ".config.json").write_text(
            json.dumps({"command": args.command, **cfg}, indent=2, sort_keys=True) + "\n")
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
