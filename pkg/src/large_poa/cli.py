"""Command line entry point: ``large-poa run <scenario>`` and ``large-poa list``."""

from __future__ import annotations

import argparse
import configparser
import csv
import io
import json
import math
import sys
from pathlib import Path

from . import __version__
from .scenarios import REGISTRY, Row, Scenario, coerce, run_safely


class ConfigError(ValueError):
    pass


def _fmt(x) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, float):
        if math.isnan(x):
            return "nan"
        return repr(x)
    return str(x)


def _line_of(path: str, key: str) -> int | None:
    for no, line in enumerate(Path(path).read_text().splitlines(), start=1):
        if line.split("=")[0].strip() == key:
            return no
    return None


def read_config(path: str) -> tuple[dict, dict]:
    """Read an INI file with a [run] section (scenario, seed, trials, format)
    and a [params] section of scenario parameters."""
    parser = configparser.ConfigParser()
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    run = dict(parser["run"]) if parser.has_section("run") else {}
    params = dict(parser["params"]) if parser.has_section("params") else {}
    for key in run:
        if key not in ("scenario", "seed", "trials", "format"):
            raise ConfigError(f"{path}:{_line_of(path, key)}: unknown key {key!r} in [run]")
    return run, {k: (v, _line_of(path, k)) for k, v in params.items()}


def resolve_params(scenario: Scenario, pairs: dict, origin: str = "--param") -> dict:
    params = dict(scenario.params)
    for key, raw in pairs.items():
        text, line = raw if isinstance(raw, tuple) else (raw, None)
        where = f"{origin}:{line}" if line else origin
        if key not in scenario.params:
            raise ConfigError(f"{where}: unknown parameter {key!r} for {scenario.id} "
                              f"(known: {', '.join(sorted(scenario.params))})")
        try:
            params[key] = coerce(scenario.params[key], text)
        except ValueError as exc:
            raise ConfigError(f"{where}: bad value for {key!r}: {exc}") from exc
    return params


def serialize_config(scenario_id: str, params: dict, seed: int, trials: int, fmt: str) -> str:
    parser = configparser.ConfigParser()
    parser["run"] = {"scenario": scenario_id, "seed": str(seed), "trials": str(trials), "format": fmt}
    parser["params"] = {k: _fmt(v) for k, v in sorted(params.items())}
    buf = io.StringIO()
    parser.write(buf)
    return buf.getvalue()


def write_outputs(rows: list[Row], out: Path, scenario_id: str, params: dict, seed: int,
                  trials: int, fmt: str) -> list[Path]:
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    if fmt == "csv":
        path = out / f"{scenario_id}.csv"
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(Row.FIELDS)
            for r in rows:
                w.writerow([_fmt(x) for x in r.values()])
    else:
        path = out / f"{scenario_id}.jsonl"
        with open(path, "w") as fh:
            for r in rows:
                fh.write(json.dumps(dict(zip(Row.FIELDS, [_fmt(x) for x in r.values()]))) + "\n")
    paths.append(path)
    summary = out / f"{scenario_id}_summary.txt"
    failed = [r for r in rows if r.passed is False]
    lines = [
        f"scenario: {scenario_id}",
        f"version: {__version__}",
        f"seed: {seed}",
        f"trials: {trials}",
        "params: " + json.dumps({k: params[k] for k in sorted(params)}),
        f"rows: {len(rows)}  checked: {sum(r.passed != '' for r in rows)}  failed: {len(failed)}",
        "",
    ]
    for r in rows:
        flag = {True: "PASS", False: "FAIL"}.get(r.passed, "info")
        target = f" target={_fmt(r.target)}" if r.target != "" else ""
        se = f" +- {_fmt(r.stderr)}" if r.stderr != "" else ""
        lines.append(f"[{flag}] n={r.n} {r.metric} = {_fmt(r.estimate)}{se}{target}")
    summary.write_text("\n".join(lines) + "\n")
    paths.append(summary)
    return paths


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="large-poa", description=__doc__)
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run one scenario")
    run.add_argument("scenario", nargs="?", help="scenario id (see `list`)")
    run.add_argument("--param", action="append", default=[], metavar="KEY=VALUE")
    run.add_argument("--seed", type=int)
    run.add_argument("--trials", type=int)
    run.add_argument("--out", default="results")
    run.add_argument("--format", choices=["csv", "jsonl"])
    run.add_argument("--config", help="INI file with [run] and [params] sections")
    sub.add_parser("list", help="list scenarios and their parameters")
    return ap


def list_scenarios(registry=None) -> list[str]:
    registry = REGISTRY if registry is None else registry
    out = []
    for s in registry.values():
        params = ", ".join(f"{k}={_fmt(v)}" for k, v in s.params.items())
        out.append(f"{s.id}: {s.claim}\n    trials={s.trials}  {params}")
    return out


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    if args.command == "list":
        print("\n".join(list_scenarios()))
        return 0
    try:
        run_cfg, file_params = read_config(args.config) if args.config else ({}, {})
        sid = args.scenario or run_cfg.get("scenario")
        if sid not in REGISTRY:
            ap.error(f"unknown scenario {sid!r}; choose from {', '.join(REGISTRY)}")
        scenario = REGISTRY[sid]
        params = resolve_params(scenario, file_params, args.config or "config")
        cli_pairs = {}
        for item in args.param:
            if "=" not in item:
                raise ConfigError(f"--param expects KEY=VALUE, got {item!r}")
            key, value = item.split("=", 1)
            cli_pairs[key.strip()] = value.strip()
        params = resolve_params(scenario, {**{k: _fmt(v) for k, v in params.items() if k in file_params},
                                           **cli_pairs})
        seed = args.seed if args.seed is not None else int(run_cfg.get("seed", 0))
        trials = args.trials if args.trials is not None else int(run_cfg.get("trials", scenario.trials))
        fmt = args.format or run_cfg.get("format", "csv")
        if fmt not in ("csv", "jsonl"):
            raise ConfigError(f"unknown format {fmt!r}")
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    rows = run_safely(scenario, params, seed, trials)
    paths = write_outputs(rows, Path(args.out), sid, params, seed, trials, fmt)
    print(paths[-1].read_text(), end="")
    return 1 if any(r.passed is False for r in rows) else 0


if __name__ == "__main__":
    sys.exit(main())
