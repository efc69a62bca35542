"""Command-line driver: bounds and/or simulations over a one-axis parameter sweep.

Config file (YAML or JSON)::

    params:
      mu_m: 1/600
      alpha: 0.9
      k: 6
      b0: 0
      lambda_h: 1/5
      delay: {kind: erlang, shape: 2, rate: 1}
    sweep: k=1..25            # or {axis: k, values: [1, 2, 3]}
    mode: bounds              # bounds | simulate | both
    sim: {trials: 1000000, seed: 0, premine_cycles: 1000, race_cutoff: 64}
    output: {path: out.csv, format: csv}
    eps_tail: 1e-18
    eps_residual: 1e-18

Flags override the file. Exit status: 0 on success, 1 if any sweep point failed
with a stability or convergence error (the other rows are still written), 2 on
configuration errors.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .bounds import compute_bounds, mempool_sanity
from .delays import ModelParams, _number
from .errors import NonConvergence, StabilityViolation
from .lead import EPS_RESIDUAL
from .pmf import EPS_TAIL
from .sim import SimConfig, simulate

AXES = ("k", "alpha", "b0", "lambda_h", "delay-scale")
INT_AXES = ("k", "b0")
MODES = ("bounds", "simulate", "both")
FORMATS = ("csv", "json")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Sweep:
    axis: str
    values: tuple

    def apply(self, base: ModelParams, value) -> ModelParams:
        if self.axis == "delay-scale":
            return base.replace(delay=base.delay.scaled(value))
        return base.replace(**{self.axis: value})


@dataclass(frozen=True)
class RunConfig:
    base: ModelParams
    sweep: Sweep | None = None
    mode: str = "bounds"
    sim: dict = field(default_factory=dict)
    out: str | None = None
    format: str = "csv"
    eps_tail: float = EPS_TAIL
    eps_residual: float = EPS_RESIDUAL
    intermediates: bool = False
    jobs: int = 1

    def points(self) -> list[tuple[object, ModelParams]]:
        if self.sweep is None:
            return [(None, self.base)]
        return [(v, self.sweep.apply(self.base, v)) for v in self.sweep.values]


def parse_sweep(spec) -> Sweep:
    """``"k=1..25"``, ``"b0=0,100"`` or ``{"axis": ..., "values": [...]}``."""
    if isinstance(spec, dict):
        axis, values = spec.get("axis"), spec.get("values")
        if isinstance(values, str):
            return parse_sweep(f"{axis}={values}")
        raw = list(values or [])
    else:
        axis, sep, rhs = str(spec).partition("=")
        if not sep:
            raise ConfigError(f"sweep {spec!r} must look like axis=values")
        axis, rhs = axis.strip(), rhs.strip()
        if ".." in rhs:
            lo, _, hi = rhs.partition("..")
            try:
                lo, hi = int(lo), int(hi)
            except ValueError:
                raise ConfigError(f"range {rhs!r} needs integer ends") from None
            if hi < lo:
                raise ConfigError(f"empty range {rhs!r}")
            raw = list(range(lo, hi + 1))
        else:
            raw = [x.strip() for x in rhs.split(",") if x.strip()]
    if axis not in AXES:
        raise ConfigError(f"unknown sweep axis {axis!r}; expected one of {AXES}")
    if not raw:
        raise ConfigError("sweep has no values")
    try:
        values = [_number(v) for v in raw]
    except (ValueError, ZeroDivisionError):
        raise ConfigError(f"bad sweep value in {raw!r}") from None
    if axis in INT_AXES:
        if any(v != int(v) for v in values):
            raise ConfigError(f"{axis} takes integer values")
        values = [int(v) for v in values]
    return Sweep(axis, tuple(sorted(set(values))))


def load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise ConfigError(f"cannot read config: {e}") from None
    try:
        data = yaml.safe_load(text)  # JSON is a subset of YAML
    except yaml.YAMLError as e:
        raise ConfigError(f"cannot parse {path}: {e}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return data


def build_config(args: argparse.Namespace) -> RunConfig:
    data = load_config(args.config)
    known = {"params", "sweep", "mode", "sim", "output", "eps_tail", "eps_residual"}
    if set(data) - known:
        raise ConfigError(f"unknown config key(s): {sorted(set(data) - known)}")
    if "params" not in data:
        raise ConfigError("config needs a 'params' section")
    try:
        base = ModelParams.from_dict(data["params"])
    except (KeyError, TypeError, ValueError, ZeroDivisionError) as e:
        raise ConfigError(f"bad params: {e}") from None

    sweep_spec = args.sweep if args.sweep is not None else data.get("sweep")
    sweep = parse_sweep(sweep_spec) if sweep_spec is not None else None

    output = data.get("output") or {}
    sim = dict(data.get("sim") or {})
    if set(sim) - {"trials", "seed", "premine_cycles", "race_cutoff"}:
        raise ConfigError(f"unknown sim key(s): {sorted(set(sim) - {'trials', 'seed', 'premine_cycles', 'race_cutoff'})}")
    if args.trials is not None:
        sim["trials"] = args.trials
    if args.seed is not None:
        sim["seed"] = args.seed

    try:
        cfg = RunConfig(
            base=base,
            sweep=sweep,
            mode=args.mode or data.get("mode", "bounds"),
            sim={k: int(v) for k, v in sim.items()},
            out=args.out or output.get("path"),
            format=args.format or output.get("format", "csv"),
            eps_tail=_number(args.eps_tail if args.eps_tail is not None else data.get("eps_tail", EPS_TAIL)),
            eps_residual=_number(
                args.eps_residual if args.eps_residual is not None else data.get("eps_residual", EPS_RESIDUAL)
            ),
            intermediates=args.intermediates,
            jobs=args.jobs,
        )
    except (TypeError, ValueError, ZeroDivisionError) as e:
        raise ConfigError(str(e)) from None
    if cfg.mode not in MODES:
        raise ConfigError(f"mode must be one of {MODES}")
    if cfg.format not in FORMATS:
        raise ConfigError(f"format must be one of {FORMATS}")
    if not (0 <= cfg.eps_tail < 1 and 0 < cfg.eps_residual < 1):
        raise ConfigError("eps_tail must lie in [0, 1) and eps_residual in (0, 1)")
    try:
        points = cfg.points()
    except ValueError as e:
        raise ConfigError(f"bad sweep point: {e}") from None
    for _, p in points:
        try:
            SimConfig(p, **cfg.sim)
        except (TypeError, ValueError) as e:
            raise ConfigError(f"bad sim settings: {e}") from None
    return cfg


def evaluate_point(cfg: RunConfig, params: ModelParams) -> dict:
    """One output row (without the sweep column). Raises on stability errors."""
    row = {}
    if cfg.mode in ("bounds", "both"):
        rep = compute_bounds(params, cfg.eps_tail, cfg.eps_residual)
        row.update(upper=rep.upper, upper_error=rep.upper_error, lower=rep.lower, lower_error=rep.lower_error)
        if cfg.intermediates:
            row["intermediates"] = rep.to_dict(intermediates=True)["intermediates"]
    if cfg.mode in ("simulate", "both"):
        out = simulate(SimConfig(params, **cfg.sim))
        row.update(
            sim_frequency=out.frequency,
            sim_ci_low=out.wilson_ci_95[0],
            sim_ci_high=out.wilson_ci_95[1],
            sim_cutoff_truncation_bound=out.cutoff_truncation_bound,
        )
    return row


def _guarded(cfg: RunConfig, params: ModelParams):
    try:
        return evaluate_point(cfg, params), None
    except (StabilityViolation, NonConvergence) as e:
        return None, f"{type(e).__name__}: {e}"


def run(cfg: RunConfig, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    points = cfg.points()

    seen = set()
    for _, p in points:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            for msg in mempool_sanity(p):
                if msg not in seen:
                    seen.add(msg)
                    print(f"warning: {msg}", file=stderr)

    if cfg.jobs > 1 and len(points) > 1:
        with ProcessPoolExecutor(cfg.jobs) as ex:
            results = list(ex.map(_guarded, [cfg] * len(points), [p for _, p in points]))
    else:
        results = [_guarded(cfg, p) for _, p in points]

    axis = cfg.sweep.axis if cfg.sweep else None
    rows, failed = [], False
    for (value, _), (row, err) in zip(points, results):
        if err is not None:
            failed = True
            where = f" at {axis}={value}" if axis else ""
            print(f"error{where}: {err}", file=stderr)
            continue
        rows.append(({axis: value} if axis else {}) | row)

    text = render(cfg, rows)
    if cfg.out:
        Path(cfg.out).write_text(text)
    else:
        stdout.write(text)
    return 1 if failed else 0


def render(cfg: RunConfig, rows: list[dict]) -> str:
    if cfg.format == "json":
        doc = {
            "params": cfg.base.to_dict(),
            "sweep": None if cfg.sweep is None else {"axis": cfg.sweep.axis, "values": list(cfg.sweep.values)},
            "mode": cfg.mode,
            "sim": cfg.sim,
            "eps_tail": cfg.eps_tail,
            "eps_residual": cfg.eps_residual,
            "rows": rows,
        }
        return json.dumps(doc, indent=2) + "\n"
    cols = []
    if cfg.sweep is not None:
        cols.append(cfg.sweep.axis)
    if cfg.mode in ("bounds", "both"):
        cols += ["upper", "upper_error", "lower", "lower_error"]
    if cfg.mode in ("simulate", "both"):
        cols += ["sim_frequency", "sim_ci_low", "sim_ci_high"]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(cols)
    for r in rows:
        w.writerow([repr(r[c]) if isinstance(r[c], float) else r[c] for c in cols])
    return buf.getvalue()


def make_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="seclat", description=__doc__.split("\n\n")[0])
    ap.add_argument("--config", help="YAML or JSON run configuration")
    ap.add_argument("--mode", choices=MODES)
    ap.add_argument("--out", help="output file (default: stdout)")
    ap.add_argument("--format", choices=FORMATS)
    ap.add_argument("--seed", type=int)
    ap.add_argument("--trials", type=int)
    ap.add_argument("--eps-tail", type=str)
    ap.add_argument("--eps-residual", type=str)
    ap.add_argument("--sweep", help="e.g. k=1..25, b0=0,100, delay-scale=0.5,1,2")
    ap.add_argument("--intermediates", action="store_true", help="include intermediate pmfs (JSON only)")
    ap.add_argument("--jobs", type=int, default=1, help="worker processes for sweep points")
    return ap


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    try:
        if args.config is None:
            raise ConfigError("--config is required")
        cfg = build_config(args)
        if cfg.jobs < 1:
            raise ConfigError("--jobs must be >= 1")
        if cfg.out:
            parent = Path(cfg.out).resolve().parent
            if not parent.is_dir():
                raise ConfigError(f"output directory {parent} does not exist")
    except ConfigError as e:
        print(f"seclat: config error: {e}", file=sys.stderr)
        return 2
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
