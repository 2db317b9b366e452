"""Batch command-line interface.

Every command reads a JSON config, writes its files into ``--out`` and
exits 0, or prints one ``error: <Kind>: <message>`` line to stderr and
exits 1 without leaving any output files behind.
"""
from __future__ import annotations

import argparse
import csv
import json
import shutil
import sys
import tempfile
from pathlib import Path

from .ddesolve import (
    DelaySpec,
    TrendField,
    fundamental_solution_linear,
    simulate_delay_sde,
    solve_delay_ode,
)
from .errors import ConfigurationError, FbmDelayError
from .estimator import (
    EstimatorConfig,
    estimate_trend_at_level,
    estimate_trend_at_time,
    parse_bandwidth_rule,
)
from .fbm import read_path, write_path
from .harness import ExperimentConfig, export_report, run_mse_experiment
from .kernels import KernelSpec, check_kernel

SCHEMA_VERSION = 1


class _AtomicDir:
    """Stage outputs in a temp dir next to ``out``; move them in on success."""

    def __init__(self, out):
        self.out = Path(out)
        self.tmp = None

    def __enter__(self):
        parent = self.out.resolve().parent
        parent.mkdir(parents=True, exist_ok=True)
        self.tmp = Path(tempfile.mkdtemp(prefix=f".{self.out.name}-", dir=parent))
        return self.tmp

    def __exit__(self, exc_type, exc, tb):
        try:
            if exc_type is None:
                self.out.mkdir(parents=True, exist_ok=True)
                for f in sorted(self.tmp.iterdir()):
                    f.replace(self.out / f.name)
        finally:
            shutil.rmtree(self.tmp, ignore_errors=True)
        return False


def _load_config(path) -> tuple:
    path = Path(path)
    try:
        obj = json.loads(path.read_text())
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"config {path} is not valid JSON: {exc}") from None
    if not isinstance(obj, dict):
        raise ConfigurationError(f"config {path} must be a JSON object")
    if obj.get("schema", SCHEMA_VERSION) != SCHEMA_VERSION:
        raise ConfigurationError(f"unsupported schema {obj.get('schema')!r}")
    return obj, path.parent


def _require(obj: dict, fields: dict, where: str = "config") -> None:
    """Check presence and type of every field; report all problems at once."""
    problems = []
    for name, kind in fields.items():
        if name not in obj:
            problems.append(f"missing field '{name}'")
            continue
        v = obj[name]
        if kind == "number" and (isinstance(v, bool) or not isinstance(v, (int, float))):
            problems.append(f"field '{name}' must be a number")
        elif kind == "int" and (isinstance(v, bool) or not isinstance(v, int)):
            problems.append(f"field '{name}' must be an integer")
        elif kind == "object" and not isinstance(v, dict):
            problems.append(f"field '{name}' must be an object")
        elif kind == "list" and not isinstance(v, list):
            problems.append(f"field '{name}' must be a list")
    if problems:
        raise ConfigurationError(f"{where}: " + "; ".join(problems))


_SIM_FIELDS = {"trend": "object", "spec": "object", "H": "number", "epsilon": "number",
               "dt": "number", "seed": "int"}


def _simulate(cfg: dict, seed_override):
    _require(cfg, _SIM_FIELDS)
    S = TrendField.from_json(cfg["trend"])
    spec = DelaySpec.from_json(cfg["spec"])
    seed = cfg["seed"] if seed_override is None else seed_override
    X, W = simulate_delay_sde(S, spec, cfg["epsilon"], cfg["H"], cfg["dt"], seed,
                              cfg.get("fbm_method", "davies_harte"))
    return S, spec, X, W


def cmd_simulate(args) -> None:
    cfg, _ = _load_config(args.config)
    S, spec, X, W = _simulate(cfg, args.seed)
    x = solve_delay_ode(S, spec, cfg["dt"])
    with _AtomicDir(args.out) as tmp:
        meta = {}
        for name, p in (("X", X), ("W", W), ("x_noiseless", x)):
            write_path(p, tmp / f"{name}.csv", tmp / f"{name}.json")
            meta[name] = json.loads((tmp / f"{name}.json").read_text())
        meta["config"] = {**cfg, "seed": X.metadata["seed"]}
        (tmp / "metadata.json").write_text(json.dumps(meta, indent=2) + "\n")


def cmd_estimate(args) -> None:
    cfg, base = _load_config(args.config)
    mode = cfg.get("mode")
    if mode not in ("level", "time"):
        raise ConfigurationError("config: field 'mode' must be 'level' or 'time'")
    targets_key = "levels" if mode == "level" else "times"
    alpha = cfg.get("alpha")
    x0 = cfg.get("x0")
    if "simulate" in cfg:
        S, spec, X, _ = _simulate(cfg["simulate"], args.seed)
        sim = cfg["simulate"]
        defaults = {"epsilon": sim["epsilon"], "H": sim["H"], "tau": spec.tau}
        alpha = S.alpha if alpha is None else alpha
        x0 = spec.x0 if x0 is None else x0
    elif "path" in cfg:
        csv_path = base / cfg["path"]
        meta_path = csv_path.with_suffix(".json")
        if not csv_path.exists():
            raise ConfigurationError(f"config: path {csv_path} does not exist")
        X = read_path(csv_path, meta_path if meta_path.exists() else None)
        defaults = {"epsilon": X.metadata.get("epsilon"), "H": X.metadata.get("H"),
                    "tau": X.metadata.get("tau")}
    else:
        raise ConfigurationError("config: need either 'path' or 'simulate'")
    merged = {**{k: v for k, v in defaults.items() if v is not None}, **cfg}
    _require(merged, {"epsilon": "number", "H": "number", "tau": "number",
                      targets_key: "list"})
    rule, smoothness, bandwidth = parse_bandwidth_rule(cfg.get("bandwidth_rule", "theorem31"))
    ec = EstimatorConfig.from_rule(merged["epsilon"], merged["H"], merged["tau"], rule,
                                   smoothness, bandwidth)
    K = KernelSpec.from_json(cfg.get("kernel", {"name": "epanechnikov"}))
    results = []
    for target in merged[targets_key]:
        try:
            if mode == "level":
                est = estimate_trend_at_level(X, target, ec, K, alpha=alpha, x0=x0)
            else:
                est = estimate_trend_at_time(X, target, ec, K)
        except FbmDelayError as exc:
            raise type(exc)(f"{mode} {target!r}: {exc}") from exc
        results.append(est)
    with _AtomicDir(args.out) as tmp:
        (tmp / "estimates.json").write_text(
            json.dumps([e.to_json() for e in results], indent=2) + "\n")
        with (tmp / "summary.csv").open("w", newline="") as fh:
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(["mode", "target", "value", "hitting_time", "edge_clipped",
                         "fallback_used", "bandwidth"])
            for t, e in zip(merged[targets_key], results):
                wr.writerow([mode, format(float(t), ".17g"), format(e.value, ".17g"),
                             format(e.hitting_time, ".17g"), int(e.edge_clipped),
                             int(e.fallback_used), format(e.bandwidth, ".17g")])


def cmd_rate_experiment(args) -> None:
    cfg, _ = _load_config(args.config)
    if args.seed is not None:
        cfg = {**cfg, "base_seed": args.seed}
    config = ExperimentConfig.from_json(cfg)
    report = run_mse_experiment(config, threads=args.threads)
    with _AtomicDir(args.out) as tmp:
        export_report(report, tmp / "report.json", "json")
        export_report(report, tmp / "report.csv", "csv")
    slope = report.fit["slope"]
    theo = report.theoretical_slope
    print(f"fitted_slope={slope!r} theoretical_slope={theo!r}")


def cmd_kernel_check(args) -> None:
    cfg, _ = _load_config(args.config)
    spec = cfg.get("kernel", cfg)
    K = KernelSpec.from_json(spec, validate=False)
    report = check_kernel(K)
    with _AtomicDir(args.out) as tmp:
        with (tmp / "moments.csv").open("w", newline="") as fh:
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(["j", "moment"])
            for j, m in report["moments"]:
                wr.writerow([j, format(m, ".17g")])
        out = {"kernel": K.to_json(), "passed": report["passed"],
               "conditions": report["conditions"]}
        (tmp / "kernel_check.json").write_text(json.dumps(out, indent=2) + "\n")
    print("PASS" if report["passed"] else "FAIL")


def cmd_fundamental_solution(args) -> None:
    cfg, _ = _load_config(args.config)
    _require(cfg, {"a": "number", "b": "number", "T": "number", "dt": "number"})
    x0 = fundamental_solution_linear(cfg["a"], cfg["b"], cfg["T"], cfg["dt"])
    with _AtomicDir(args.out) as tmp:
        write_path(x0, tmp / "x0.csv", tmp / "x0.json")


COMMANDS = {
    "simulate": cmd_simulate,
    "estimate": cmd_estimate,
    "rate-experiment": cmd_rate_experiment,
    "kernel-check": cmd_kernel_check,
    "fundamental-solution": cmd_fundamental_solution,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fbmdelay",
        description="Small-noise fBm delay SDEs: simulation, kernel trend estimation, rate experiments.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="JSON config file")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--threads", type=int, default=1, help="cap on worker threads")
    return parser


def _one_line(msg: str) -> str:
    return " ".join(str(msg).split())


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads < 1:
        print("error: ConfigurationError: --threads must be >= 1", file=sys.stderr)
        return 1
    try:
        COMMANDS[args.command](args)
    except (FbmDelayError, ValueError, KeyError, TypeError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {_one_line(exc)}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
