"""Command-line front end.

Subcommands: ``table1``, ``curve``, ``toy`` and ``well2d``.  Every command
writes a JSON report (stable key order, one document per run) and, where
tabular data exists, a CSV file.  ``--out STEM`` writes ``STEM.json`` and
``STEM.csv``; without it only the JSON is written, to stdout.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import json
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import __version__, montwell, toymodel
from .magschrod2d import wells
from .magschrod2d.gauge import GaugeParseError, parse_gauge_text

# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Range:
    lo: float
    hi: float
    steps: int
    log: bool = False

    def values(self) -> np.ndarray:
        if self.log:
            return np.geomspace(self.lo, self.hi, self.steps)
        return np.linspace(self.lo, self.hi, self.steps)


def parse_range(text: str) -> Range:
    """``lo:hi:steps[:log]``."""
    parts = text.split(":")
    if len(parts) not in (3, 4) or (len(parts) == 4 and parts[3] not in ("log", "lin")):
        raise ValueError(f"range must be lo:hi:steps[:log], got {text!r}")
    lo, hi, steps = float(parts[0]), float(parts[1]), int(parts[2])
    log = len(parts) == 4 and parts[3] == "log"
    if steps < 1 or (steps > 1 and lo == hi):
        raise ValueError(f"empty range {text!r}")
    if log and (lo <= 0 or hi <= 0):
        raise ValueError("log ranges need positive endpoints")
    return Range(lo, hi, steps, log)


def parse_k(text: str) -> list[int]:
    """``3`` or an inclusive span ``1:7``."""
    if ":" in text:
        a, b = (int(x) for x in text.split(":"))
        if b < a:
            raise ValueError(f"empty k range {text!r}")
        return list(range(a, b + 1))
    return [int(text)]


def parse_pair(text: str) -> tuple[float, float]:
    a, b = (float(x) for x in text.split(":"))
    return a, b


@dataclass
class RunConfig:
    command: str
    params: dict
    out: str | None = None
    tol: float | None = None
    jobs: int = 1

    def echo(self) -> dict:
        return {"command": self.command, "params": _jsonable(self.params), "tol": self.tol, "jobs": self.jobs}


# flags shared by the config file, keyed by their destination names
_TYPES = {
    "k": parse_k,
    "range": parse_range,
    "h_sweep": parse_range,
    "tol": float,
    "out": str,
    "jobs": int,
    "actions": lambda s: [a for a in s.split(",") if a],
    "window": parse_pair,
    "alpha1": float,
    "beta1": float,
    "L": float,
    "p_range": lambda s: tuple(int(x) for x in s.split(":")),
    "gauge": str,
    "mode": str,
    "m": int,
}


def read_config(path: str, allowed: set[str]) -> dict:
    """``key = value`` lines (``#`` comments).  Keys mirror the long flags;
    dashes and underscores are interchangeable.  Unknown keys are errors."""
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    cp = configparser.ConfigParser(interpolation=None, comment_prefixes=("#",), inline_comment_prefixes=("#",))
    cp.optionxform = str
    cp.read_string("[run]\n" + text)
    out = {}
    for key, raw in cp["run"].items():
        name = key.strip().replace("-", "_")
        if name not in allowed:
            raise SystemExit(f"config {path}: unknown key {key!r} (allowed: {', '.join(sorted(allowed))})")
        out[name] = _TYPES[name](raw.strip())
    return out


# ---------------------------------------------------------------------------
# output helpers
# ---------------------------------------------------------------------------


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, Range):
        return {"lo": x.lo, "hi": x.hi, "steps": x.steps, "log": x.log}
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.floating, float)):
        v = float(x)
        return v if math.isfinite(v) else str(v)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


@dataclass
class ReportBundle:
    config: RunConfig
    records: list = field(default_factory=list)
    notes: list = field(default_factory=list)
    started: float = field(default_factory=time.time)

    def document(self) -> dict:
        return {
            "command": self.config.echo(),
            "version": __version__,
            "records": _jsonable(self.records),
            "notes": list(self.notes),
            "timing": {"wall_clock_s": round(time.time() - self.started, 3)},
        }


def _write_csv(rows: list[dict], columns: list[str], stream):
    w = csv.DictWriter(stream, fieldnames=columns, lineterminator="\n", extrasaction="ignore")
    w.writeheader()
    for r in rows:
        w.writerow({c: _fmt(r.get(c)) for c in columns})


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def emit(bundle: ReportBundle, rows: list[dict] | None, columns: list[str] | None, stdout=None):
    stdout = stdout or sys.stdout
    doc = json.dumps(bundle.document(), sort_keys=True, indent=2)
    out = bundle.config.out
    if out:
        with open(out + ".json", "w", encoding="utf-8", newline="\n") as fh:
            fh.write(doc + "\n")
        if rows is not None:
            with open(out + ".csv", "w", encoding="utf-8", newline="") as fh:
                _write_csv(rows, columns, fh)
    else:
        stdout.write(doc + "\n")


def _pool_map(fn, items, jobs):
    """Keyed, order-preserving fan-out."""
    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(fn, items))


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

TABLE_COLUMNS = ["k", "alpha_min", "nu_hat", "lambda1", "d2lambda0", "ref_alpha_min", "ref_nu_hat",
                 "ref_lambda1", "verdict", "tol_alpha", "error"]


def _table_row(args):
    k, tol = args
    row = {"k": k, "tol_alpha": tol}
    try:
        mn = montwell.minimize(k, tol_alpha=tol)
    except Exception as exc:  # surfaced per row
        row.update(verdict="error", error=f"{type(exc).__name__}: {exc}")
        return row
    row.update(alpha_min=mn.alpha_min, nu_hat=mn.nu_hat, lambda1=mn.lambda1_at_min, d2lambda0=mn.d2_lambda0,
               method="scan + golden section on Richardson/Sturm eigenvalues")
    ref = montwell.TABLE1.get(k)
    if ref is None:
        row["verdict"] = "no reference"
    else:
        row.update(ref_alpha_min=ref[0], ref_nu_hat=ref[1], ref_lambda1=ref[2])
        ok = all(abs(a - b) <= 0.01 for a, b in zip((mn.alpha_min, mn.nu_hat, mn.lambda1_at_min), ref))
        row["verdict"] = "pass" if ok else "fail"
    return row


def cmd_table1(cfg: RunConfig, stdout=None) -> ReportBundle:
    ks = cfg.params.get("k") or list(range(1, 8))
    if min(ks) < 1 or max(ks) > 12:
        raise SystemExit("table1: k must lie in 1..12")
    tol = cfg.tol or 1e-5
    bundle = ReportBundle(cfg)
    rows = _pool_map(_table_row, [(k, tol) for k in ks], cfg.jobs)
    bundle.records = rows
    bundle.notes.append("verdicts compare to the reference table with absolute tolerance 0.01")
    emit(bundle, rows, TABLE_COLUMNS, stdout)
    return bundle


CURVE_COLUMNS = ["alpha", "lambda0", "lambda1", "lambda_quad"]


def cmd_curve(cfg: RunConfig, stdout=None) -> ReportBundle:
    ks = cfg.params.get("k") or [1]
    if len(ks) != 1:
        raise SystemExit("curve: give a single k")
    rng = cfg.params.get("range") or Range(-1.0, 3.0, 41)
    if rng.log:
        raise SystemExit("curve: alpha ranges are linear")
    c = montwell.curve(ks[0], (rng.lo, rng.hi), max(rng.steps, 2))
    rows = [{"alpha": a, "lambda0": l0, "lambda1": l1, "lambda_quad": q}
            for a, l0, l1, q in zip(c.alpha_samples, c.lambda0, c.lambda1, c.quad_approx)]
    bundle = ReportBundle(cfg, records=[{"k": ks[0], "alpha_min": c.minimum.alpha_min, "nu_hat": c.minimum.nu_hat,
                                         "d2lambda0": c.minimum.d2_lambda0, "points": len(rows),
                                         "tolerance": 1e-8}])
    emit(bundle, rows, CURVE_COLUMNS, stdout)
    return bundle


BAND_COLUMNS = ["h", "p", "j", "value"]
TOY_ACTIONS = ("spectrum", "gaps", "splitting", "crossings")


def _toy_h(args):
    base, h, actions, window = args
    c = base.with_h(h)
    rec = {"h": h}
    bands = []
    if "spectrum" in actions or "gaps" in actions:
        inf, p0 = toymodel.ground_level(c)
        E_top = window[1] * c.energy_scale
        union = toymodel.spectrum_union(c, E_top * 1.25)
        bands = [{"h": h, "p": p, "j": j, "value": v} for v, p, j in union.entries]
        if "spectrum" in actions:
            rec["spectrum"] = {"inf": inf, "argmin_fiber": p0, "E_max": union.E_max, "levels": len(union.entries),
                               "p_range": union.p_range, "criterion": union.criterion,
                               "tolerance": toymodel.BAND_TOL * c.energy_scale}
        if "gaps" in actions:
            g = toymodel.detect_gaps(c, (window[0] * c.energy_scale, E_top), union=union)
            rec["gaps"] = {"interval": g.interval, "scaled_interval": g.scaled_interval, "count": g.count,
                           "unresolved": g.unresolved, "resolution": g.resolution,
                           "gaps": [[x.lo, x.hi, x.margin] for x in g.gaps]}
    return rec, bands


def cmd_toy(cfg: RunConfig, stdout=None) -> ReportBundle:
    P = cfg.params
    actions = P.get("actions") or []
    bad = [a for a in actions if a not in TOY_ACTIONS]
    if bad:
        raise SystemExit(f"toy: unknown actions {bad}; choose from {TOY_ACTIONS}")
    ks = P.get("k") or [1]
    base = toymodel.ToyConfig(k=ks[0], h=1.0, L=P.get("L", 2 * math.pi), alpha1=P.get("alpha1", 0.0),
                              beta1=P.get("beta1", 1.0))
    hs = sorted((P.get("h_sweep") or Range(1e-1, 1e-3, 5, True)).values(), reverse=True)
    window = P.get("window", (0.6, 1.9))
    bundle = ReportBundle(cfg)
    rows = []
    if not actions:
        emit(bundle, None, None, stdout)
        return bundle
    per_h = _pool_map(_toy_h, [(base, float(h), tuple(actions), window) for h in hs], cfg.jobs)
    for rec, bands in per_h:
        bundle.records.append(rec)
        rows += bands
    if "splitting" in actions:
        split = toymodel.splitting_sweep(base, hs)
        bundle.records.append({"splitting": [{"h": r.h, "lambda0": r.lambda0, "lambda1": r.lambda1,
                                              "splitting": r.splitting, "splitting_over_h2": r.scaled_splitting,
                                              "levels": r.labels} for r in split]})
    if "crossings" in actions:
        notes = []
        pr = P.get("p_range", (1, 8))
        ev = toymodel.find_crossings(base.with_h(hs[0]), range(pr[0], pr[1] + 1), notes=notes)
        bundle.records.append({"crossings": [{"p": e.p, "h_p": e.h_p, "bands": e.bands, "witness": e.witness,
                                              "bracket": e.bracket, "is_ground": e.is_ground, "tie": e.tie,
                                              "rtol": 1e-6} for e in ev]})
        bundle.notes += notes
    emit(bundle, rows or None, BAND_COLUMNS, stdout)
    return bundle


SWEEP_COLUMNS = ["h", "m", "lambda", "ratio", "residual"]


def cmd_well2d(cfg: RunConfig, stdout=None) -> ReportBundle:
    P = cfg.params
    path = P.get("gauge")
    if not path:
        raise SystemExit("well2d: --gauge FILE is required")
    with open(path, encoding="utf-8") as fh:
        try:
            gauge = parse_gauge_text(fh.read())
        except GaugeParseError as exc:
            raise SystemExit(f"well2d: {path}: {exc}")
    mode = P.get("mode", "asymptotics")
    m = P.get("m", 1)
    bundle = ReportBundle(cfg)
    rows = None
    if mode == "model-operator":
        fa = wells.analyze_field(gauge)
        w = wells.single_well(fa, "point")
        spec = wells.ModelOperatorSpec.at_point(gauge.b, round(w.location[0], 12), round(w.location[1], 12))
        ms = wells.model_operator_spectrum(spec, m=m, tol=cfg.tol or 1e-6)
        bundle.records.append({"k": spec.k, "model_field": str(spec.b0), "mu": ms.values, "boxes": ms.boxes,
                               "discretization_error": ms.errors, "converged": ms.converged})
        rows = [{"h": 1.0, "m": j, "lambda": v, "ratio": v, "residual": e}
                for j, (v, e) in enumerate(zip(ms.values, ms.errors))]
    elif mode == "asymptotics":
        hs = (P.get("h_sweep") or Range(1e-2, 1e-3, 5, True)).values()
        r = wells.asymptotics_check_discrete_well(gauge, hs, m=m)
        fa = wells.analyze_field(gauge)
        loc = fa.wells[0].location
        spec = wells.ModelOperatorSpec.at_point(gauge.b, round(loc[0], 12), round(loc[1], 12))
        ms = wells.model_operator_spectrum(spec, m=m)
        bundle.records.append({"k": r.k, "h": r.h, "ratios": r.ratios, "extrapolated": r.limit, "mu": ms.values,
                               "exponent": r.exponent, "expected_exponent": (2 * r.k + 2) / (r.k + 2),
                               "ratio_range": r.ratio_range, "settled": r.settled, "grid": r.grid,
                               "upper_window_h43": r.upper_window, "lower_window_h54": r.lower_window})
        rows = [{"h": h, "m": j, "lambda": r.values[i, j], "ratio": r.ratios[i, j], "residual": r.errors[i, j]}
                for i, h in enumerate(r.h) for j in range(m)]
    elif mode == "nonzero-bottom":
        hs = (P.get("h_sweep") or Range(1e-1, 3e-3, 6, True)).values()
        r = wells.nonzero_bottom_expansion(gauge, hs)
        bundle.records.append({"b0": r.b0, "location": r.location, "a": r.a, "target": r.target,
                               "fitted": r.fitted, "coefficients": r.coefficients, "above_bottom": r.above_bottom,
                               "boundary_mass": r.boundary_mass, "fit": "c2 + c3 h^(1/2) + c4 h"})
        rows = [{"h": h, "m": 0, "lambda": v, "ratio": c, "residual": e}
                for h, v, c, e in zip(r.h, r.values, r.coefficients, r.errors)]
    else:
        raise SystemExit(f"well2d: unknown mode {mode!r}")
    emit(bundle, rows, SWEEP_COLUMNS, stdout)
    return bundle


COMMANDS = {"table1": cmd_table1, "curve": cmd_curve, "toy": cmd_toy, "well2d": cmd_well2d}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="magwells", description="Magnetic-well spectra: tables, curves, sweeps.")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)
    ap.subcommands = {}

    def common(p):
        p.add_argument("--config", help="key = value file mirroring the flags")
        p.add_argument("--tol", type=float)
        p.add_argument("--out", help="output stem: writes STEM.json and STEM.csv")
        p.add_argument("--jobs", type=int)

    p = sub.add_parser("table1", help="minimum, bottom value and second level of the 1-D well for each k")
    p.add_argument("--k", type=parse_k, help="k or lo:hi (default 1:7)")
    common(p)
    ap.subcommands["table1"] = p

    p = sub.add_parser("curve", help="lowest two eigenvalues against alpha, with the quadratic fit")
    p.add_argument("--k", type=parse_k)
    p.add_argument("--range", type=parse_range, help="alpha range lo:hi:steps")
    common(p)
    ap.subcommands["curve"] = p

    p = sub.add_parser("toy", help="fibered cylinder model: spectrum, gaps, splitting, crossings")
    p.add_argument("--k", type=parse_k)
    p.add_argument("--h-sweep", dest="h_sweep", type=parse_range)
    p.add_argument("--actions", type=_TYPES["actions"], help="comma list from " + ",".join(TOY_ACTIONS))
    p.add_argument("--window", type=parse_pair, help="scaled energy window a:b (default 0.6:1.9)")
    p.add_argument("--alpha1", type=float)
    p.add_argument("--beta1", type=float)
    p.add_argument("--L", type=float)
    p.add_argument("--p-range", dest="p_range", type=_TYPES["p_range"], help="fiber pairs p0:p1 for crossings")
    common(p)
    ap.subcommands["toy"] = p

    p = sub.add_parser("well2d", help="two-dimensional field: model operator and small-h sweeps")
    p.add_argument("--gauge", help="gauge file (lines 'A1 = ...', 'A2 = ...' or 'b = ...')")
    p.add_argument("--mode", choices=["asymptotics", "nonzero-bottom", "model-operator"])
    p.add_argument("--h-sweep", dest="h_sweep", type=parse_range)
    p.add_argument("--m", type=int)
    common(p)
    ap.subcommands["well2d"] = p
    return ap


def make_config(ns: argparse.Namespace, parser: argparse.ArgumentParser) -> RunConfig:
    sub = parser.subcommands[ns.command]
    allowed = {a.dest for a in sub._actions if a.dest not in ("help", "config")}
    params = {}
    if ns.config:
        try:
            params.update(read_config(ns.config, allowed))
        except (ValueError, configparser.Error) as exc:
            raise SystemExit(f"config {ns.config}: {exc}")
    for key in allowed:
        v = getattr(ns, key, None)
        if v is not None:
            params[key] = v
    tol = params.pop("tol", None)
    if tol is not None and tol <= 0:
        raise SystemExit("--tol must be positive")
    out = params.pop("out", None)
    jobs = params.pop("jobs", None) or 1
    return RunConfig(ns.command, params, out, tol, jobs)


def main(argv=None, stdout=None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    cfg = make_config(ns, parser)
    COMMANDS[ns.command](cfg, stdout)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
