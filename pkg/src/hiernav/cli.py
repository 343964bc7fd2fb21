"""Command-line entry points: run, gen, bench, serve-mock."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from .agent import AgentConfig, Episode
from .backend import MockService, make_backend
from .explore import EXPLORE_MODES
from .metrics import BenchConfig, place_obstacles, run_bench, with_obstacles
from .svg import render_svg
from .world import ScenarioError, generate_scenario, load_scenario, save_scenario

log = logging.getLogger("hiernav")

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def _setup_logging() -> None:
    level = os.environ.get("HIERNAV_LOG", "error").upper()
    logging.basicConfig(level=getattr(logging, level, logging.ERROR), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")


def _fail(msg: str) -> int:
    print(f"error: {msg}", file=sys.stderr)
    return EXIT_CONFIG


def _write_trace(path: str, trace: list[dict]) -> None:
    with open(path, "w") as fh:
        for ev in trace:
            fh.write(json.dumps(ev, separators=(",", ":")) + "\n")


def cmd_run(args) -> int:
    try:
        s = load_scenario(args.scenario)
    except FileNotFoundError:
        return _fail(f"scenario file not found: {args.scenario}")
    except (ScenarioError, OSError) as exc:
        return _fail(str(exc))
    if not 0 <= args.task < len(s.tasks):
        return _fail(f"task {args.task} out of range (scenario has {len(s.tasks)} tasks)")
    cfg = AgentConfig(explore=args.explore, no_global=args.no_global, no_local=args.no_local, seed=args.seed,
                      backend=args.backend)
    try:
        backend = make_backend(args.backend, cfg.backend_timeout_s)
    except ValueError as exc:
        return _fail(str(exc))
    ep = Episode(s, args.task, cfg, backend)
    try:
        res = ep.run()
    finally:
        backend.close()
    if args.trace:
        _write_trace(args.trace, res.trace)
    if args.svg:
        wps = [tuple(p) for ev in res.trace if ev["event"] == "local_plan" for p in ev["waypoints"]]
        Path(args.svg).write_text(render_svg(s, [res.trajectory], ep.graph, wps))
    print(f"termination={res.termination} success={str(res.success).lower()} "
          f"path_length_m={res.path_length_m:.3f} sim_time_s={res.sim_time_s:.2f} "
          f"replans_local={res.replans['local']} replans_global={res.replans['global']}")
    return EXIT_OK if res.termination == "Arrived" else EXIT_FAIL


def cmd_gen(args) -> int:
    try:
        s = generate_scenario(args.rooms, (args.room_min, args.room_max), seed=args.seed)
    except ValueError as exc:
        return _fail(str(exc))
    if args.out:
        save_scenario(s, args.out)
        print(f"rooms={len(s.rooms)} doors={len(s.doors)} seed={args.seed}")
    else:
        sys.stdout.write(s.to_json())
        print(f"rooms={len(s.rooms)} doors={len(s.doors)} seed={args.seed}", file=sys.stderr)
    return EXIT_OK


def _bench_scenarios(args):
    if args.scenarios:
        root = Path(args.scenarios)
        if not root.is_dir():
            raise ScenarioError(f"not a directory: {root}")
        files = sorted(root.glob("*.json"))
        if not files:
            raise ScenarioError(f"no scenario files in {root}")
        return [load_scenario(f) for f in files]
    lo, hi = args.rooms
    return [generate_scenario(lo + k % (hi - lo + 1), seed=args.gen_seed + k) for k in range(args.generate)]


def cmd_bench(args) -> int:
    try:
        scenarios = _bench_scenarios(args)
        tasks = tuple(int(t) for t in args.tasks.split(",")) if args.tasks else None
        seeds = tuple(int(t) for t in args.seeds.split(","))
        if args.backend not in (None, "scripted"):
            make_backend(args.backend)
    except (ScenarioError, ValueError, OSError) as exc:
        return _fail(str(exc))
    cfg = BenchConfig(tasks=tasks, episodes_per_task=args.episodes, seeds=seeds,
                      no_global="no-global" in args.ablate, no_local="no-local" in args.ablate,
                      backend=args.backend, explore=args.explore, workers=args.workers)
    if args.obstacles:
        from .agent import run_episode
        placed = []
        for s in scenarios:
            t = 0 if tasks is None else tasks[0] % len(s.tasks)
            clean = run_episode(s, t, BenchConfig(explore=args.explore).agent_config(seeds[0]))
            placed.append(with_obstacles(s, place_obstacles(s, clean.trajectory, args.obstacles, seed=seeds[0],
                                                            goal=clean.p_end)))
        scenarios = placed
    report = run_bench(scenarios, cfg)
    report.write(args.out, args.csv)
    print(f"SR={report.sr!r} SPL={report.spl!r}")
    return EXIT_OK


def cmd_serve_mock(args) -> int:
    srv = MockService(args.host, args.port)
    print(f"mock decision service on {srv.address}", flush=True)
    try:
        srv.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        srv.server_close()
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hiernav", description="Hierarchical object-goal navigation in 2D scenes.")
    sub = p.add_subparsers(dest="cmd", required=True)

    r = sub.add_parser("run", help="run one episode")
    r.add_argument("--scenario", required=True)
    r.add_argument("--task", type=int, default=0)
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--trace")
    r.add_argument("--svg")
    r.add_argument("--no-global", action="store_true")
    r.add_argument("--no-local", action="store_true")
    r.add_argument("--backend", default="scripted", help="'scripted' or host:port of a decision service")
    r.add_argument("--explore", choices=EXPLORE_MODES, default="oracle")
    r.set_defaults(func=cmd_run)

    g = sub.add_parser("gen", help="generate a scenario")
    g.add_argument("--rooms", type=int, required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out")
    g.add_argument("--room-min", type=float, default=4.0)
    g.add_argument("--room-max", type=float, default=6.0)
    g.set_defaults(func=cmd_gen)

    b = sub.add_parser("bench", help="benchmark a scenario set")
    src = b.add_mutually_exclusive_group(required=True)
    src.add_argument("--scenarios", help="directory of scenario JSON files")
    src.add_argument("--generate", type=int, help="number of scenarios to generate")
    b.add_argument("--rooms", type=int, nargs=2, default=(5, 10), metavar=("MIN", "MAX"))
    b.add_argument("--gen-seed", type=int, default=0)
    b.add_argument("--tasks", help="comma-separated task indices (default: all)")
    b.add_argument("--episodes", type=int, default=1)
    b.add_argument("--seeds", default="0")
    b.add_argument("--ablate", action="append", choices=("no-global", "no-local"), default=[])
    b.add_argument("--backend", default=None)
    b.add_argument("--explore", choices=EXPLORE_MODES, default="oracle")
    b.add_argument("--obstacles", type=int, default=0, help="obstacles placed on the full-system route")
    b.add_argument("--out", default="report.json")
    b.add_argument("--csv")
    b.add_argument("--workers", type=int, default=1)
    b.set_defaults(func=cmd_bench)

    m = sub.add_parser("serve-mock", help="serve the scripted policy over the decision protocol")
    m.add_argument("--host", default="127.0.0.1")
    m.add_argument("--port", type=int, default=7777)
    m.set_defaults(func=cmd_serve_mock)
    return p


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
