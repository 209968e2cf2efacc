"""Command-line entry point: ``tewa run|batch|compare|serve|validate``."""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Sequence

from .baseline import compare_methods
from .engine import Metrics, apply_mode, run_scenario, select_mode, snapshot
from .io.scenario import ScenarioError, load_scenario
from .io.trace import TraceError, write_trace

TABLE_FIELDS = [
    ("threats_total", "threats"),
    ("threats_allocated", "allocated to a DA"),
    ("threats_scheduled", "scheduled on a WS"),
    ("threats_neutralized", "neutralized"),
    ("leakers", "leakers"),
    ("exited", "exited"),
    ("alive", "still alive"),
    ("ammo_spent", "ammo spent"),
    ("mean_time_to_neutralize", "mean time to neutralize (s)"),
    ("surviving_da_value", "surviving DA value"),
    ("surviving_threat_value", "surviving threat value"),
    ("max_scheduled_per_ws", "max scheduled per WS"),
    ("engaged_mode", "mode when engaged"),
    ("final_mode", "final mode"),
    ("ticks", "ticks"),
]


def format_metrics(m: Metrics) -> str:
    d = m.to_dict()
    rows = []
    for key, label in TABLE_FIELDS:
        v = d[key]
        if isinstance(v, float):
            v = f"{v:.3f}"
        rows.append((label, "-" if v is None else str(v)))
    rows.append(("idle weapons", ", ".join(d["idle_weapons"]) or "none"))
    rows.append(("threats per DA", ", ".join(f"{k}:{n}" for k, n in d["da_load"].items()) or "none"))
    width = max(len(r[0]) for r in rows)
    return "\n".join(f"{label:<{width}}  {value}" for label, value in rows)


def _write_json(obj: object, dest: str) -> None:
    text = json.dumps(obj, indent=1, sort_keys=True) + "\n"
    if dest == "-":
        sys.stdout.write(text)
    else:
        Path(dest).write_text(text, encoding="utf-8")


def cmd_validate(args: argparse.Namespace) -> int:
    spec = load_scenario(args.scenario)
    print(f"ok: {args.scenario} ({len(spec.das)} DAs, {len(spec.weapons)} WSs, {len(spec.threats)} threats)")
    return 0


def cmd_run(args: argparse.Namespace) -> int:
    spec = load_scenario(args.scenario)
    trace, metrics = run_scenario(spec, args.seed)
    if args.trace:
        Path(args.trace).write_text(write_trace(trace), encoding="utf-8")
    if args.metrics != "-":
        print(format_metrics(metrics))
    if args.metrics:
        _write_json(metrics.to_dict(), args.metrics)
    return 0


def _run_one(path: str, seed: int | None) -> tuple[str, dict]:
    spec = load_scenario(path)
    _, metrics = run_scenario(spec, seed)
    return path, metrics.to_dict()


def cmd_batch(args: argparse.Namespace) -> int:
    paths = sorted(str(p) for p in Path(args.directory).glob("*.json"))
    if not paths:
        print(f"error: no scenario files in {args.directory}", file=sys.stderr)
        return 1
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_run_one, paths, [args.seed] * len(paths)))
    else:
        results = [_run_one(p, args.seed) for p in paths]
    per_run = dict(results)
    keys = ["threats_total", "threats_neutralized", "leakers", "exited", "ammo_spent"]
    totals = {k: sum(m[k] for m in per_run.values()) for k in keys}
    totals["surviving_da_value"] = sum(m["surviving_da_value"] for m in per_run.values())
    totals["surviving_threat_value"] = sum(m["surviving_threat_value"] for m in per_run.values())
    totals["scenarios"] = len(per_run)
    if args.summary:
        for path, m in per_run.items():
            print(f"{Path(path).name:<24} threats={m['threats_total']:<3} neutralized={m['threats_neutralized']:<3} "
                  f"leakers={m['leakers']:<3} ammo={m['ammo_spent']}")
        print("total " + " ".join(f"{k}={v:.3f}" if isinstance(v, float) else f"{k}={v}" for k, v in totals.items()))
    if args.metrics:
        _write_json({"scenarios": per_run, "totals": totals}, args.metrics)
    return 0


def cmd_compare(args: argparse.Namespace) -> int:
    spec = load_scenario(args.scenario)
    tracks, clock = snapshot(spec)
    weapons = {w.ws_id: w for w in spec.weapons}
    up = sum(1 for w in spec.weapons if w.is_up)
    mode = select_mode(len(tracks), up, spec.weights) or spec.initial_mode
    report = compare_methods(tracks, spec.das, weapons, spec.libraries, apply_mode(mode, spec.weights), clock)
    report["mode"] = mode.value
    if args.json:
        _write_json(report, "-")
        return 0
    print(f"snapshot at t={clock:g}s, {len(tracks)} threats, mode {mode.value}")
    for name in ("two_stage", "greedy", "oracle"):
        r = report[name]
        if "skipped" in r:
            print(f"{name:<10} skipped: {r['skipped']}")
            continue
        line = f"{name:<10} value={r['value']:.4f} scheduled={r['scheduled']}"
        if "unassigned" in r:
            line += f" unassigned={','.join(r['unassigned']) or 'none'}"
        line += " locked=" + (",".join(f"{w}:{t}" for w, t in r["locked"].items()) or "none")
        if r["queued"]:
            line += " queued=" + ",".join(f"{w}:{'+'.join(q)}" for w, q in r["queued"].items())
        print(line)
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    from .io.protocol import parse_endpoint, serve_protocol

    spec = load_scenario(args.deployment)
    address = parse_endpoint(args.listen)
    print(f"listening on {address[0]}:{address[1]}", file=sys.stderr)
    sessions = serve_protocol(address, spec, args.seed, args.max_sessions)
    if args.trace and sessions:
        Path(args.trace).write_text(write_trace(sessions[-1].trace), encoding="utf-8")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tewa", description="Two-stage threat evaluation and weapon assignment.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run a scenario and print its metrics")
    p.add_argument("scenario")
    p.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    p.add_argument("--trace", help="write the event trace (JSON Lines) here")
    p.add_argument("--metrics", help="write metrics as JSON to this path, or '-' for stdout only")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("batch", help="run every *.json scenario in a directory")
    p.add_argument("directory")
    p.add_argument("--summary", action="store_true", help="print one line per scenario plus totals")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    p.add_argument("--metrics", help="write aggregate metrics as JSON here, or '-'")
    p.set_defaults(func=cmd_batch)

    p = sub.add_parser("compare", help="two-stage vs greedy vs exhaustive on the opening snapshot")
    p.add_argument("scenario")
    p.add_argument("--json", action="store_true", help="print the report as JSON")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("serve", help="run the simulator protocol server")
    p.add_argument("deployment", help="scenario file providing DAs, WSs and libraries")
    p.add_argument("--listen", default="127.0.0.1:7400", help="host:port (port 0 picks a free one)")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--max-sessions", type=int, default=None, help="exit after this many sessions")
    p.add_argument("--trace", help="write the last session's trace here")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("validate", help="parse and validate a scenario")
    p.add_argument("scenario")
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ScenarioError, TraceError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except KeyboardInterrupt:
        return 130


if __name__ == "__main__":
    sys.exit(main())
