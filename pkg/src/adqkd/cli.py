"""Batch command line: single-point key lengths, optimisation, sweeps and oracle runs.

Configuration is a JSON object with optional sections whose keys are the
field names of the types they build::

    {
      "protocol": {"N": 1e8, "b": 3, "mu": [0.5, 0.1, 0.0], ...},
      "channel": {"eta": 1.0, "p_noise": 0.0, "delta_mis": 0.17},
      "optimization": {"enabled": true, "restarts": 20, "budget": 2000, ...},
      "sweep": {"variable": "delta_mis", "start": 0.1, "stop": 0.4, "step": 0.02,
                "b_values": [1, 2, 3], "tol": 0.001},
      "oracle": {"suite": "all", "trials": 100000, "pipeline_trials": 1000},
      "seed": 0, "variant": "both", "skl_constant": "derivation",
      "monotonicity": "grid", "threads": 1, "svg": null
    }

Unknown keys are rejected. Angles are in radians. Command-line flags
override the file.

Sweep CSV columns, in order:

    sweep_var      swept quantity (delta_mis or eta), or crossing_lo / crossing_hi
                   for the bracket of the zero-rate crossing of a series
    sweep_value    its value
    variant        ad or bb84
    b              block size (empty for bb84)
    mu1 mu2 mu3 p_mu1 p_mu2 p_z q_t   protocol parameters used
    phi_k          key-set error rate
    s_kbar_minus   lower bound on accepted single-photon blocks (ad only)
    phi_xbar_plus  upper bound on the logical X error rate (ad only)
    lambda_ir      bits leaked by error correction
    ell            secure key length in bits
    rate           ell / N
    valid          whether every estimator condition held
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from typing import Any, Sequence

import numpy as np

from .ad import MONOTONICITY_POLICIES
from .mc_oracle.suites import SUITES, run_suite
from .optimize import COORDS, OptimizationProblem, optimize_key_rate, threshold_scan
from .params import ChannelParams, ParameterError, ProtocolParams
from .skl import SKL_CONSTANTS, SklResult, secure_key_length

EXIT_OK, EXIT_CONFIG, EXIT_ORACLE, EXIT_RUNTIME = 0, 2, 3, 4

COLUMNS = ["sweep_var", "sweep_value", "variant", "b", "mu1", "mu2", "mu3", "p_mu1", "p_mu2",
           "p_z", "q_t", "phi_k", "s_kbar_minus", "phi_xbar_plus", "lambda_ir", "ell", "rate",
           "valid"]
SWEEP_VARIABLES = ("delta_mis", "eta")
VARIANT_CHOICES = ("ad", "bb84", "both")


class ConfigError(ParameterError):
    """Configuration problem; ``field`` is the dotted path of the offending key."""


@dataclass
class OptimizationSettings:
    enabled: bool = True
    free_params: list[str] | None = None
    budget: int = 2000
    restarts: int = 20
    warm_restarts: int = 2
    simplex_edge: float = 0.1
    restart_spread: float = 0.5

    def __post_init__(self):
        if self.budget < 1:
            raise ConfigError("optimization.budget", "must be >= 1")
        if self.restarts < 0 or self.warm_restarts < 0:
            raise ConfigError("optimization.restarts", "must be >= 0")
        if self.free_params is not None:
            bad = [p for p in self.free_params if p not in COORDS]
            if bad:
                raise ConfigError("optimization.free_params", f"unknown parameters {bad}")


@dataclass
class SweepSettings:
    variable: str = "delta_mis"
    start: float = 0.0
    stop: float = 0.0
    step: float = 1.0
    values: list[float] | None = None
    b_values: list[int] | None = None
    tol: float | None = None

    def __post_init__(self):
        if self.variable not in SWEEP_VARIABLES:
            raise ConfigError("sweep.variable", f"must be one of {SWEEP_VARIABLES}")
        if self.values is None and self.step <= 0:
            raise ConfigError("sweep.step", "must be positive")
        if self.b_values is not None and any(int(b) != b or b < 1 for b in self.b_values):
            raise ConfigError("sweep.b_values", "block sizes must be integers >= 1")

    def grid(self) -> list[float]:
        if self.values is not None:
            return [float(v) for v in self.values]
        n = int(math.floor((self.stop - self.start) / self.step + 1e-9)) + 1
        return [self.start + i * self.step for i in range(max(n, 0))] if self.stop >= self.start else []

    def default_tol(self) -> float:
        # about 0.05 degrees of misalignment, or 0.1 dB of loss (in decades)
        if self.tol is not None:
            return self.tol
        return math.radians(0.05) if self.variable == "delta_mis" else 0.01


@dataclass
class OracleSettings:
    suite: str = "all"
    trials: int | None = None
    pipeline_trials: int | None = None
    nu_scale: float = 1.0

    def __post_init__(self):
        if self.suite not in SUITES:
            raise ConfigError("oracle.suite", f"must be one of {SUITES}")
        for name in ("trials", "pipeline_trials"):
            v = getattr(self, name)
            if v is not None and (int(v) != v or v < 1):
                raise ConfigError(f"oracle.{name}", "must be a positive integer")


@dataclass
class RunConfig:
    protocol: ProtocolParams
    channel: ChannelParams
    optimization: OptimizationSettings = field(default_factory=OptimizationSettings)
    sweep: SweepSettings = field(default_factory=SweepSettings)
    oracle: OracleSettings = field(default_factory=OracleSettings)
    seed: int = 0
    variant: str = "both"
    skl_constant: str = "derivation"
    monotonicity: str = "grid"
    threads: int = 1
    svg: str | None = None

    def __post_init__(self):
        if self.variant not in VARIANT_CHOICES:
            raise ConfigError("variant", f"must be one of {VARIANT_CHOICES}")
        if self.skl_constant not in SKL_CONSTANTS:
            raise ConfigError("skl_constant", f"must be one of {SKL_CONSTANTS}")
        if self.monotonicity not in MONOTONICITY_POLICIES:
            raise ConfigError("monotonicity", f"must be one of {MONOTONICITY_POLICIES}")
        if int(self.threads) != self.threads or self.threads < 1:
            raise ConfigError("threads", "must be a positive integer")
        if int(self.seed) != self.seed or not 0 <= self.seed < 2**64:
            raise ConfigError("seed", "must be an integer in [0, 2**64)")

    def to_dict(self) -> dict[str, Any]:
        out = dataclasses.asdict(self)
        out["protocol"]["mu"] = list(self.protocol.mu)
        out["protocol"]["p_mu"] = list(self.protocol.p_mu)
        return out


SECTIONS = {
    "protocol": ProtocolParams,
    "channel": ChannelParams,
    "optimization": OptimizationSettings,
    "sweep": SweepSettings,
    "oracle": OracleSettings,
}


def _build(cls, data: Any, path: str):
    if not isinstance(data, dict):
        raise ConfigError(path, "must be a JSON object")
    names = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        raise ConfigError(f"{path}.{unknown[0]}", "unknown field")
    try:
        return cls(**data)
    except ConfigError:
        raise
    except ParameterError as exc:
        raise ConfigError(f"{path}.{exc.field}", str(exc).split(": ", 1)[-1]) from None
    except TypeError as exc:
        raise ConfigError(path, str(exc)) from None


def parse_config(data: dict[str, Any]) -> RunConfig:
    """Validate a configuration object and build every typed section."""
    if not isinstance(data, dict):
        raise ConfigError("config", "must be a JSON object")
    top = {f.name for f in fields(RunConfig)}
    unknown = sorted(set(data) - top)
    if unknown:
        raise ConfigError(unknown[0], "unknown field")
    if "N" not in data.get("protocol", {}):
        raise ConfigError("protocol.N", "is required")
    kwargs: dict[str, Any] = {}
    for name, cls in SECTIONS.items():
        section = data.get(name, {} if name != "channel" else {"eta": 1.0})
        kwargs[name] = _build(cls, section, name)
    for name in top - set(SECTIONS):
        if name in data:
            kwargs[name] = data[name]
    try:
        return RunConfig(**kwargs)
    except TypeError as exc:
        raise ConfigError("config", str(exc)) from None


def load_config(path: str | None, args: argparse.Namespace) -> RunConfig:
    data: dict[str, Any] = {}
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                data = json.load(fh)
        except OSError as exc:
            raise ConfigError("config", f"cannot read {path}: {exc.strerror}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError("config", f"invalid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError("config", "must be a JSON object")
    data = json.loads(json.dumps(data))
    for flag, key in (("seed", "seed"), ("variant", "variant"), ("skl_constant", "skl_constant"),
                      ("threads", "threads"), ("svg", "svg")):
        v = getattr(args, flag, None)
        if v is not None:
            data[key] = v
    if getattr(args, "b", None) is not None:
        data.setdefault("protocol", {})["b"] = args.b
        data.setdefault("sweep", {})["b_values"] = [args.b]
    for flag in ("suite", "trials"):
        v = getattr(args, flag, None)
        if v is not None:
            data.setdefault("oracle", {})[flag] = v
    return parse_config(data)


def _variants(cfg: RunConfig) -> list[str]:
    return ["bb84", "ad"] if cfg.variant == "both" else [cfg.variant]


def _fmt(v: Any) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def result_row(sweep_var: str, sweep_value: float | str, variant: str, pp: ProtocolParams,
               res: SklResult) -> dict[str, Any]:
    """One output row; every number is taken from ``res`` unchanged."""
    d = res.diagnostics
    ad = d.get("ad")
    return {
        "sweep_var": sweep_var,
        "sweep_value": sweep_value,
        "variant": variant,
        "b": pp.b if variant == "ad" else None,
        "mu1": pp.mu[0], "mu2": pp.mu[1], "mu3": pp.mu[2],
        "p_mu1": pp.p_mu[0], "p_mu2": pp.p_mu[1],
        "p_z": pp.p_z, "q_t": pp.q_t,
        "phi_k": d.get("phi_K"),
        "s_kbar_minus": ad.S_K_bar_minus if ad is not None else None,
        "phi_xbar_plus": ad.Phi_X_bar_plus if ad is not None else None,
        "lambda_ir": d.get("lambda_ir"),
        "ell": res.ell,
        "rate": res.rate,
        "valid": res.valid,
    }


def write_csv(rows: Sequence[dict[str, Any]], out) -> None:
    w = csv.writer(out, lineterminator="\n")
    w.writerow(COLUMNS)
    for r in rows:
        w.writerow([_fmt(r[c]) for c in COLUMNS])


def _channel_at(ch: ChannelParams, variable: str, value: float) -> ChannelParams:
    return dataclasses.replace(ch, **{variable: value})


def _problem(cfg: RunConfig, variant: str, pp: ProtocolParams, ch: ChannelParams,
             restarts: int) -> OptimizationProblem:
    o = cfg.optimization
    return OptimizationProblem(
        channel=ch, template=pp, variant=variant,
        free_params=tuple(o.free_params) if o.free_params else None,
        budget=o.budget, restarts=restarts, seed=cfg.seed, simplex_edge=o.simplex_edge,
        restart_spread=o.restart_spread, constant=cfg.skl_constant,
        monotonicity=cfg.monotonicity)


def evaluate_point(cfg: RunConfig, variant: str, pp: ProtocolParams, ch: ChannelParams,
                   optimize: bool, warm: ProtocolParams | None = None) -> tuple[ProtocolParams, SklResult]:
    if variant == "bb84":
        pp = dataclasses.replace(pp, q_t=0.0)
    if not optimize:
        return pp, secure_key_length(pp, ch, variant, cfg.skl_constant, cfg.monotonicity)
    start = pp if warm is None else dataclasses.replace(warm, b=pp.b)
    restarts = cfg.optimization.restarts if warm is None else cfg.optimization.warm_restarts
    opt = optimize_key_rate(_problem(cfg, variant, start, ch, restarts))
    return opt.params, opt.result


def run_series(cfg: RunConfig, variant: str, b: int) -> list[dict[str, Any]]:
    """Rows of one (variant, b) series across the sweep, plus its crossing bracket."""
    sw = cfg.sweep
    pp = dataclasses.replace(cfg.protocol, b=b)
    values = sw.grid()
    if not values:
        return []

    def make(value, warm):
        ch = _channel_at(cfg.channel, sw.variable, value)
        start = pp if warm is None else dataclasses.replace(warm, b=b)
        if variant == "bb84":
            start = dataclasses.replace(start, q_t=0.0)
        restarts = cfg.optimization.restarts if warm is None else cfg.optimization.warm_restarts
        return _problem(cfg, variant, start, ch, restarts)

    rows = []
    if cfg.optimization.enabled:
        scan = threshold_scan(make, values, tol=sw.default_tol(),
                              refine_restarts=cfg.optimization.warm_restarts,
                              log=sw.variable == "eta")
        for p in scan.points:
            rows.append(result_row(sw.variable, p.value, variant, p.params, p.result))
        if scan.bracket is not None and scan.crossing is not None:
            lo, hi = scan.bracket
            c = scan.crossing
            rows.append(result_row("crossing_lo", lo, variant, c.params, c.result))
            hi_res = secure_key_length(c.params, _channel_at(cfg.channel, sw.variable, hi), variant,
                                       cfg.skl_constant, cfg.monotonicity)
            rows.append(result_row("crossing_hi", hi, variant, c.params, hi_res))
    else:
        prev = None
        for v in values:
            ch = _channel_at(cfg.channel, sw.variable, v)
            p, res = evaluate_point(cfg, variant, pp, ch, optimize=False)
            rows.append(result_row(sw.variable, v, variant, p, res))
            if prev is not None and prev[1].rate > 0 and res.rate <= 0:
                rows.append(result_row("crossing_lo", prev[0], variant, p, prev[1]))
                rows.append(result_row("crossing_hi", v, variant, p, res))
            prev = (v, res)
    return rows


def _series_list(cfg: RunConfig) -> list[tuple[str, int]]:
    out = []
    for variant in _variants(cfg):
        if variant == "bb84":
            out.append(("bb84", 1))
        else:
            for b in cfg.sweep.b_values or [cfg.protocol.b]:
                out.append(("ad", int(b)))
    return out


def _series_job(args):
    cfg, variant, b = args
    return run_series(cfg, variant, b)


def order_rows(cfg: RunConfig, results: Sequence[list[dict[str, Any]]]) -> list[dict[str, Any]]:
    """Sweep rows by sweep value then series, followed by the crossing rows."""
    series = _series_list(cfg)
    points, crossings = [], []
    for rows in results:
        for r in rows:
            (crossings if r["sweep_var"].startswith("crossing") else points).append(r)
    grid = {v: i for i, v in enumerate(cfg.sweep.grid())}
    order = {s: i for i, s in enumerate(series)}
    points.sort(key=lambda r: (grid[r["sweep_value"]], order[(r["variant"], r["b"] or 1)]))
    return points + crossings


def cmd_sweep(cfg: RunConfig, done: list | None = None) -> list[dict[str, Any]]:
    """Every series of the sweep; rows come out in a fixed order whatever the thread count.

    Finished series are appended to ``done`` as they complete, so an
    interrupted run can still write them.
    """
    done = [] if done is None else done
    jobs = [(cfg, v, b) for v, b in _series_list(cfg)]
    if cfg.threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=cfg.threads) as ex:
            for rows in ex.map(_series_job, jobs):
                done.append(rows)
    else:
        for j in jobs:
            done.append(_series_job(j))
    return order_rows(cfg, done)


def cmd_skl(cfg: RunConfig) -> list[dict[str, Any]]:
    rows = []
    for variant in _variants(cfg):
        pp, res = evaluate_point(cfg, variant, cfg.protocol, cfg.channel, optimize=False)
        rows.append(result_row("", "", variant, pp, res))
    return rows


def cmd_optimize(cfg: RunConfig) -> list[dict[str, Any]]:
    rows = []
    for variant in _variants(cfg):
        pp, res = evaluate_point(cfg, variant, cfg.protocol, cfg.channel, optimize=True)
        rows.append(result_row("", "", variant, pp, res))
    return rows


def svg_chart(rows: Sequence[dict[str, Any]], x_key: str = "sweep_value", width: int = 640,
              height: int = 400) -> str:
    """Self-contained SVG line chart of log10(rate) per series."""
    series: dict[str, list[tuple[float, float]]] = {}
    for r in rows:
        if r["sweep_var"].startswith("crossing") or not r["rate"] or r["rate"] <= 0:
            continue
        name = r["variant"] if r["variant"] == "bb84" else f"ad b={r['b']}"
        x = r[x_key] if r[x_key] is not None else r["sweep_value"]
        series.setdefault(name, []).append((float(x), math.log10(r["rate"])))
    pad = 50
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}">',
           '<rect width="100%" height="100%" fill="white"/>']
    pts = [p for s in series.values() for p in s]
    if pts:
        xs, ys = [p[0] for p in pts], [p[1] for p in pts]
        x0, x1 = min(xs), max(xs)
        y0, y1 = math.floor(min(ys)), math.ceil(max(ys))
        x1 = x1 if x1 > x0 else x0 + 1.0
        y1 = y1 if y1 > y0 else y0 + 1.0

        def sx(x):
            return pad + (x - x0) / (x1 - x0) * (width - 2 * pad)

        def sy(y):
            return height - pad - (y - y0) / (y1 - y0) * (height - 2 * pad)

        out.append(f'<path d="M{pad},{pad} V{height - pad} H{width - pad}" stroke="black" fill="none"/>')
        for y in range(int(y0), int(y1) + 1):
            out.append(f'<text x="{pad - 6}" y="{sy(y):.1f}" font-size="10" text-anchor="end">1e{y}</text>')
        out.append(f'<text x="{pad}" y="{height - pad + 16}" font-size="10">{x0:.4g}</text>')
        out.append(f'<text x="{width - pad}" y="{height - pad + 16}" font-size="10" '
                   f'text-anchor="end">{x1:.4g}</text>')
        palette = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2",
                   "#7f7f7f", "#bcbd22", "#17becf"]
        for i, (name, s) in enumerate(series.items()):
            colour = palette[i % len(palette)]
            d = " ".join(f"{'M' if j == 0 else 'L'}{sx(x):.2f},{sy(y):.2f}" for j, (x, y) in enumerate(s))
            out.append(f'<path d="{d}" stroke="{colour}" fill="none" stroke-width="1.5"/>')
            out.append(f'<text x="{width - pad + 4}" y="{pad + 14 * i}" font-size="10" '
                       f'fill="{colour}">{name}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="adqkd", description="Finite-size key rates for decoy-state BB84 with advantage distillation.",
        epilog="Sweep CSV columns: " + ", ".join(COLUMNS) + ". See the module docstring for details.")
    sub = p.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON configuration file")
    common.add_argument("--seed", type=int, help="random seed (unsigned 64-bit)")
    common.add_argument("--out", help="output path (default: stdout)")
    common.add_argument("--threads", type=int, help="worker processes for sweeps")
    common.add_argument("--emit-config", help="write the effective configuration as JSON")
    keyed = argparse.ArgumentParser(add_help=False)
    keyed.add_argument("--variant", choices=VARIANT_CHOICES)
    keyed.add_argument("--b", type=int, help="block size (overrides protocol.b and sweep.b_values)")
    keyed.add_argument("--skl-constant", dest="skl_constant", choices=SKL_CONSTANTS)
    sub.add_parser("skl", parents=[common, keyed], help="key length at the configured point")
    sub.add_parser("optimize", parents=[common, keyed], help="optimise parameters at the configured point")
    sw = sub.add_parser("sweep", parents=[common, keyed], help="sweep a channel variable, writing CSV")
    sw.add_argument("--svg", help="also write an SVG chart of the rates")
    orc = sub.add_parser("oracle", parents=[common], help="run Monte Carlo oracle suites")
    orc.add_argument("--suite", choices=SUITES)
    orc.add_argument("--trials", type=int)
    return p


def _open_out(path: str | None):
    return open(path, "w", encoding="utf-8", newline="") if path else sys.stdout


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "oracle" and getattr(args, "trials", None) is not None and args.trials < 1:
            raise ConfigError("oracle.trials", "must be a positive integer")
        if args.config is None and args.command != "oracle":
            raise ConfigError("config", "--config is required")
        if args.config is None:
            cfg = parse_config({"protocol": {"N": 1e8}, **({"seed": args.seed} if args.seed is not None else {}),
                                "oracle": {k: v for k, v in (("suite", args.suite), ("trials", args.trials))
                                           if v is not None}})
        else:
            cfg = load_config(args.config, args)
    except ParameterError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    if args.emit_config:
        with open(args.emit_config, "w", encoding="utf-8") as fh:
            json.dump(cfg.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    rows: list[dict[str, Any]] = []
    done: list[list[dict[str, Any]]] = []
    try:
        if args.command == "oracle":
            o = cfg.oracle
            report = run_suite(o.suite, cfg.seed, o.trials, o.nu_scale, o.pipeline_trials)
            out = _open_out(args.out)
            try:
                json.dump(report.to_dict(), out, indent=2)
                out.write("\n")
            finally:
                if out is not sys.stdout:
                    out.close()
            return EXIT_OK if report.passed else EXIT_ORACLE
        if args.command == "skl":
            rows = cmd_skl(cfg)
        elif args.command == "optimize":
            rows = cmd_optimize(cfg)
        else:
            rows = cmd_sweep(cfg, done)
    except KeyboardInterrupt:
        _emit(rows or order_rows(cfg, done), args.out)
        print("interrupted; partial results written", file=sys.stderr)
        return EXIT_RUNTIME
    except ParameterError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - any failure maps to the runtime exit code
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    _emit(rows, args.out)
    if args.command == "sweep" and cfg.svg:
        with open(cfg.svg, "w", encoding="utf-8") as fh:
            fh.write(svg_chart(rows, "phi_k" if cfg.sweep.variable == "delta_mis" else "sweep_value"))
    return EXIT_OK


def _emit(rows, path):
    buf = io.StringIO()
    write_csv(rows, buf)
    out = _open_out(path)
    try:
        out.write(buf.getvalue())
    finally:
        if out is not sys.stdout:
            out.close()


if __name__ == "__main__":
    sys.exit(main())
