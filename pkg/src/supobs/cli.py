"""Command-line front end: certificate checking, scenario runs, parameter sweeps.

Exit codes: 0 success, 1 domain failure (failed certificate check or state
guard breach), 2 usage or parse error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from importlib import resources
from pathlib import Path

from .engine import (
    ScenarioConfig,
    convergence_metrics,
    run_scenario,
    scenario_from_dict,
)
from .lmi import Certificate, check_certificate, load_certificate
from .model import ConfigurationError

EXIT_OK = 0
EXIT_DOMAIN = 1
EXIT_USAGE = 2

SWEEP_AXES = {
    "N": "n_observers",
    "lambda": "forgetting",
    "alpha": ("zoom", "factor"),
    "M_d": ("zoom", "period"),
}


def _data_path(*parts: str) -> Path:
    return Path(resources.files("supobs").joinpath("/".join(parts)))


def default_certificate_path() -> Path:
    return _data_path("data", "case_study_certificate.json")


def bundled_scenario_path(name: str) -> Path:
    if not name.endswith(".json"):
        name = name + ".json"
    return _data_path("data", "scenarios", name)


def resolve_scenario_path(spec: str) -> Path:
    """A scenario argument is a file path or the bare name of a bundled scenario."""
    path = Path(spec)
    if path.exists():
        return path
    bundled = bundled_scenario_path(spec)
    if bundled.exists():
        return bundled
    raise ConfigurationError(f"scenario {spec!r} is neither a file nor a bundled scenario")


def _load_scenario_dict(spec: str) -> dict:
    path = resolve_scenario_path(spec)
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"scenario file {path} is not valid JSON: {exc}") from exc


def _load_certificate_arg(path_arg: str | None) -> Certificate:
    path = Path(path_arg) if path_arg else default_certificate_path()
    if not path.exists():
        raise ConfigurationError(f"certificate file {path} does not exist")
    return load_certificate(path)


def _check_report(cert: Certificate, config: ScenarioConfig, grid: int = 0):
    plant = config.plant
    return check_certificate(cert, plant.parameter_box(), plant, grid=grid)


def cmd_check(args) -> int:
    cert = _load_certificate_arg(args.certificate)
    if args.scenario:
        config = scenario_from_dict(_load_scenario_dict(args.scenario))
        plant = config.plant
    else:
        from .model import PlantConfig

        plant = PlantConfig()
    report = check_certificate(cert, plant.parameter_box(), plant, grid=args.grid)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "certificate_check.json").write_text(json.dumps(report.to_dict(), indent=2) + "\n")
    (out / "certificate_check.txt").write_text(report.render_text())
    sys.stdout.write(report.render_text())
    return EXIT_OK if report.passed else EXIT_DOMAIN


def _write_run_outputs(trace, config: ScenarioConfig, out: Path) -> dict:
    out.mkdir(parents=True, exist_ok=True)
    trace.to_csv(out / "trace.csv")
    metrics = convergence_metrics(trace, config.resolved_margin, config.trailing_fraction)
    (out / "metrics.json").write_text(json.dumps(metrics, indent=2) + "\n")
    return metrics


def _summarize(metrics: dict) -> str:
    entry = metrics["entry_time"]
    entry_text = "never" if entry is None else str(entry)
    return (
        f"entry time (err_p <= {metrics['margin']:g}): {entry_text}; "
        f"trailing max err_p: {metrics['trailing_max_err_p']}; "
        f"trailing max err_x: {metrics['trailing_max_err_x']}"
    )


def cmd_run(args) -> int:
    config = scenario_from_dict(_load_scenario_dict(args.scenario))
    if args.seed is not None:
        from dataclasses import replace

        config = replace(config, seed=args.seed)
    cert = _load_certificate_arg(args.certificate)
    if not args.skip_check:
        report = _check_report(cert, config)
        if not report.passed:
            sys.stderr.write("certificate check failed:\n")
            for line in report.failures():
                sys.stderr.write(f"  {line}\n")
            return EXIT_DOMAIN
    trace = run_scenario(config, cert)
    metrics = _write_run_outputs(trace, config, Path(args.out))
    sys.stdout.write(_summarize(metrics) + "\n")
    if trace.aborted:
        sys.stderr.write(f"run aborted: {trace.abort_message}\n")
        return EXIT_DOMAIN
    return EXIT_OK


def _apply_axis(data: dict, axis: str, value: float) -> dict:
    updated = json.loads(json.dumps(data))
    target = SWEEP_AXES[axis]
    if isinstance(target, tuple):
        section, key = target
        updated.setdefault(section, {})[key] = value
    else:
        updated[target] = int(value) if axis == "N" else value
    return updated


def _sweep_worker(task) -> dict:
    index, scenario_data, axis, value, cert_dict, seed = task
    row = {"value": value, "entry_time": None, "trailing_err_p": None, "trailing_err_x": None}
    try:
        data = _apply_axis(scenario_data, axis, value)
        config = scenario_from_dict(data)
        if seed is not None:
            from dataclasses import replace

            config = replace(config, seed=seed)
        cert = load_certificate(cert_dict)
        trace = run_scenario(config, cert)
        metrics = convergence_metrics(trace, config.resolved_margin, config.trailing_fraction)
        row["entry_time"] = metrics["entry_time"]
        row["trailing_err_p"] = metrics["trailing_max_err_p"]
        row["trailing_err_x"] = metrics["trailing_max_err_x"]
        row["status"] = "aborted" if trace.aborted else "ok"
        row["trace"] = trace
        row["config"] = config
    except Exception as exc:  # per-run failures are recorded, the sweep continues
        row["status"] = f"error: {exc}"
    row["index"] = index
    return row


def cmd_sweep(args) -> int:
    values = [v for v in (s.strip() for s in args.values.split(",")) if v]
    if not values:
        raise ConfigurationError("sweep needs a non-empty comma-separated --values list")
    parsed = [int(v) if args.axis in ("N", "M_d") else float(v) for v in values]
    scenario_data = _load_scenario_dict(args.scenario)
    cert = _load_certificate_arg(args.certificate)
    from .lmi import certificate_to_dict

    cert_dict = certificate_to_dict(cert)
    if not args.skip_check:
        config = scenario_from_dict(scenario_data)
        report = _check_report(cert, config)
        if not report.passed:
            sys.stderr.write("certificate check failed; aborting sweep\n")
            return EXIT_DOMAIN

    tasks = [
        (i, scenario_data, args.axis, value, cert_dict, args.seed)
        for i, value in enumerate(parsed)
    ]
    max_workers = int(os.environ.get("SUPOBS_THREADS", "1"))
    if max_workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=max_workers) as pool:
            rows = list(pool.map(_sweep_worker, tasks))
    else:
        rows = [_sweep_worker(task) for task in tasks]
    rows.sort(key=lambda row: row["index"])

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for row in rows:
        run_dir = out / f"run_{row['index']:03d}"
        if "trace" in row:
            _write_run_outputs(row.pop("trace"), row.pop("config"), run_dir)

    lines = ["value,entry_time,trailing_err_p,trailing_err_x,status"]
    for row in rows:
        entry = row["entry_time"]
        lines.append(
            ",".join(
                [
                    format(row["value"], ".17g"),
                    "never" if entry is None else str(entry),
                    "" if row["trailing_err_p"] is None else format(row["trailing_err_p"], ".17g"),
                    "" if row["trailing_err_x"] is None else format(row["trailing_err_x"], ".17g"),
                    row["status"],
                ]
            )
        )
    summary = "\n".join(lines) + "\n"
    (out / "summary.csv").write_text(summary)
    sys.stdout.write(summary)
    return EXIT_OK if all(row["status"] == "ok" for row in rows) else EXIT_DOMAIN


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="supobs",
        description="Supervisory multi-observer parameter and state estimation",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    check = sub.add_parser("check", help="validate a gain certificate over the parameter box")
    check.add_argument("--certificate", help="certificate JSON (default: bundled)")
    check.add_argument("--scenario", help="scenario supplying the plant model (optional)")
    check.add_argument("--out", default=".", help="directory for report files")
    check.add_argument("--grid", type=int, default=0, help="extra per-axis audit points")
    check.set_defaults(func=cmd_check)

    run = sub.add_parser("run", help="simulate one scenario and write trace + metrics")
    run.add_argument("--scenario", required=True, help="scenario JSON path or bundled name")
    run.add_argument("--certificate", help="certificate JSON (default: bundled)")
    run.add_argument("--out", default=".", help="output directory")
    run.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    run.add_argument("--skip-check", action="store_true", help="skip the certificate check")
    run.set_defaults(func=cmd_run)

    sweep = sub.add_parser("sweep", help="run a scenario across one swept parameter")
    sweep.add_argument("--scenario", required=True, help="scenario JSON path or bundled name")
    sweep.add_argument("--axis", required=True, choices=sorted(SWEEP_AXES))
    sweep.add_argument("--values", required=True, help="comma-separated values")
    sweep.add_argument("--certificate", help="certificate JSON (default: bundled)")
    sweep.add_argument("--out", default=".", help="output directory")
    sweep.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    sweep.add_argument("--skip-check", action="store_true", help="skip the certificate check")
    sweep.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigurationError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_USAGE
    except OSError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
