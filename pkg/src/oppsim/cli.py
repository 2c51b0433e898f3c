"""Command-line front end: single experiments, protocol comparisons, TTL sweeps.

Every invocation that produces output also writes the fully-resolved config
next to the results, so any CSV can be reproduced from its own directory.
Exit codes: 0 success, 1 validation/usage error, 2 I/O error.
"""

from __future__ import annotations

import argparse
import hashlib
import os
import sys
from dataclasses import replace
from pathlib import Path

from . import engine, metrics, scenario, traffic
from .mapgraph import MapError, dump_map, load_map
from .scenario import HOUR, ConfigError, ScenarioConfig, ValidationError

ENV_OUT = "OPPSIM_OUT"


class CliError(Exception):
    def __init__(self, message: str, code: int = 1):
        super().__init__(message)
        self.code = code


def _load_base_config(args) -> ScenarioConfig:
    if args.config:
        try:
            text = Path(args.config).read_text(encoding="utf-8")
        except OSError as exc:
            raise CliError(f"cannot read config: {exc}", code=2) from exc
    else:
        text = ""
    cfg = scenario.load_config(text)
    overrides = {}
    for item in args.set or []:
        if "=" not in item:
            raise CliError(f"--set expects key=value, got '{item}'")
        key, value = item.split("=", 1)
        overrides[key.strip()] = value.strip()
    if overrides:
        cfg = scenario.apply_overrides(cfg, overrides)
    if getattr(args, "protocol", None):
        if args.protocol not in scenario.PROTOCOLS:
            raise CliError(f"unknown protocol '{args.protocol}' "
                           f"(valid: {', '.join(scenario.PROTOCOLS)})")
        cfg = scenario.validate(replace(cfg, protocol=args.protocol))
    if getattr(args, "runs", None) is not None:
        cfg = scenario.validate(replace(cfg, runs=args.runs))
    if getattr(args, "seed", None) is not None:
        cfg = scenario.validate(replace(cfg, base_seed=args.seed))
    return cfg


def _out_dir(args) -> Path:
    out = args.out or os.environ.get(ENV_OUT) or "results"
    path = Path(out)
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise CliError(f"cannot create output directory {path}: {exc}", code=2) from exc
    return path


def _write(path: Path, text: str) -> None:
    try:
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise CliError(f"cannot write {path}: {exc}", code=2) from exc


def _load_world(cfg: ScenarioConfig, args):
    if getattr(args, "map", None):
        try:
            m = load_map(Path(args.map).read_text(encoding="utf-8"))
        except OSError as exc:
            raise CliError(f"cannot read map: {exc}", code=2) from exc
        except MapError as exc:
            raise CliError(f"invalid map file: {exc}") from exc
        return m
    m, _ = engine.build_world(cfg)
    return m


def _sha256(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def cmd_run(args) -> int:
    cfg = _load_base_config(args)
    out = _out_dir(args)
    m = _load_world(cfg, args)
    schedule = engine.build_traffic(cfg)
    results = engine.run_experiment(cfg, jobs=args.jobs, map_graph=m,
                                    schedule=schedule,
                                    progress=not args.quiet)
    for r in results:
        _write(out / f"run_{r.seed}.txt", r.to_text())
    ttl_hours = cfg.traffic.ttl / HOUR
    report = metrics.build_report(f"{cfg.protocol}_ttl{ttl_hours:g}",
                                  cfg.protocol, ttl_hours, results)
    _write(out / "results.csv", metrics.render_csv([report]))
    _write(out / "config.resolved.ini", scenario.dump_config(cfg))
    _write(out / "schedule.txt", traffic.dump_schedule(schedule))
    if not args.quiet:
        print(f"wrote {out / 'results.csv'}", file=sys.stderr)
    return 0


def cmd_compare(args) -> int:
    cfg = _load_base_config(args)
    protocols = [p.strip() for p in args.protocols.split(",") if p.strip()]
    for p in protocols:
        if p not in scenario.PROTOCOLS:
            raise CliError(f"unknown protocol '{p}' "
                           f"(valid: {', '.join(scenario.PROTOCOLS)})")
    try:
        ttls = [float(v) for v in args.ttl_hours.split(",") if v.strip()]
    except ValueError as exc:
        raise CliError(f"--ttl-hours expects numbers: {exc}") from exc
    if not protocols or not ttls:
        raise CliError("need at least one protocol and one TTL")

    out = _out_dir(args)
    m = _load_world(cfg, args)
    # one schedule for every cell: the fairness contract is structural
    schedule = engine.build_traffic(cfg)
    schedule_text = traffic.dump_schedule(schedule)
    _write(out / "schedule.txt", schedule_text)
    schedule_hash = _sha256(schedule_text)

    reports = []
    provenance = [f"schedule_sha256={schedule_hash}"]
    for protocol in protocols:
        for ttl_h in ttls:
            cell = scenario.validate(replace(
                cfg, protocol=protocol,
                traffic=replace(cfg.traffic, ttl=ttl_h * HOUR)))
            results = engine.run_experiment(cell, jobs=args.jobs, map_graph=m,
                                            schedule=schedule,
                                            progress=not args.quiet)
            name = f"{protocol}_ttl{ttl_h:g}"
            for r in results:
                _write(out / f"{name}_run_{r.seed}.txt", r.to_text())
            reports.append(metrics.build_report(name, protocol, ttl_h, results))
            provenance.append(f"cell={name} schedule_sha256={schedule_hash}")
            if not args.quiet:
                print(f"cell {name} finished", file=sys.stderr)
    _write(out / "results.csv", metrics.render_csv(reports))
    _write(out / "config.resolved.ini", scenario.dump_config(cfg))
    _write(out / "provenance.txt", "\n".join(provenance) + "\n")
    return 0


def cmd_export_trace(args) -> int:
    cfg = _load_base_config(args)
    out = _out_dir(args)
    m = _load_world(cfg, args)
    schedule = engine.build_traffic(cfg)
    seed = args.seed if args.seed is not None else cfg.base_seed
    result = engine.run(cfg, seed, map_graph=m, schedule=schedule,
                        collect_trace=True, progress=not args.quiet)
    lines = ["# a b start end"]
    for ev in result.contact_events:
        lines.append(f"{ev.a} {ev.b} {ev.start:.3f} {ev.end:.3f}")
    _write(out / "contacts.txt", "\n".join(lines) + "\n")
    _write(out / "schedule.txt", traffic.dump_schedule(schedule))
    _write(out / "map.txt", dump_map(m))
    _write(out / "config.resolved.ini", scenario.dump_config(cfg))
    return 0


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="INI config file (defaults used if omitted)")
    parser.add_argument("--map", help="optional map file (otherwise generated)")
    parser.add_argument("--out", help=f"output directory (or ${ENV_OUT})")
    parser.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE",
                        help="override any config key")
    parser.add_argument("--seed", type=int, help="base seed")
    parser.add_argument("--jobs", type=int, default=1,
                        help="run this many seeds concurrently")
    parser.add_argument("--quiet", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="oppsim",
        description="benchmark opportunistic routing protocols under one "
                    "shared scenario")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one protocol")
    _add_common(p_run)
    p_run.add_argument("--protocol", help="epidemic | prophet | bubblerap")
    p_run.add_argument("--runs", type=int, help="number of seeds")
    p_run.set_defaults(func=cmd_run)

    p_cmp = sub.add_parser("compare", help="run a protocol x TTL matrix on "
                                           "the identical workload")
    _add_common(p_cmp)
    p_cmp.add_argument("--protocols", default=",".join(scenario.PROTOCOLS))
    p_cmp.add_argument("--ttl-hours", default="24")
    p_cmp.add_argument("--runs", type=int, help="number of seeds per cell")
    p_cmp.set_defaults(func=cmd_compare)

    p_exp = sub.add_parser("export-trace",
                           help="write contact trace + schedule for one seed")
    _add_common(p_exp)
    p_exp.set_defaults(func=cmd_export_trace)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except (ConfigError, ValidationError, traffic.TrafficError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
