"""Command line front end.

Subcommands: gen (synthesize a scenario), run (single simulation), sweep
(outage-goal sweep plus reference runs), msgstats (aggregate a message
log). Exit codes: 0 success, 1 usage or input error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from . import engine, scenario
from .scenario import ScenarioError


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage errors; this tool reserves 2 for runtime
    # failures
    def error(self, message):
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="coosim",
                description="Closed-loop cell switching simulator")
    sub = p.add_subparsers(dest="command", required=True,
                          parser_class=_Parser)

    g = sub.add_parser("gen",
                       help="generate a synthetic scenario file")
    g.add_argument("--preset", choices=sorted(scenario.PRESETS), default="desk")
    g.add_argument("--seed", type=int, default=7)
    g.add_argument("--out", required=True, help="output scenario JSON path")

    r = sub.add_parser("run", help="simulate one run")
    r.add_argument("--scenario", required=True)
    r.add_argument("--config", help="JSON run config (same keys as SimConfig)")
    r.add_argument("--horizon", type=int, help="override horizon in seconds")
    r.add_argument("--seed", type=int, help="override traffic seed")
    r.add_argument("--outdir", default="out")
    r.add_argument("--no-xapp", action="store_true",
                   help="disable the switching loop")
    r.add_argument("--no-rapp", action="store_true",
                   help="freeze thresholds at their initial values")
    r.add_argument("--no-msglog", action="store_true",
                   help="skip the per-message ndjson log")
    r.add_argument("--no-plots", action="store_true")

    s = sub.add_parser("sweep",
                       help="run once per outage goal and write the trade-off table")
    s.add_argument("--scenario", required=True)
    s.add_argument("--config")
    s.add_argument("--goals", required=True,
                   help="comma separated outage goals in percent, e.g. 5,10,15")
    s.add_argument("--horizon", type=int)
    s.add_argument("--seed", type=int)
    s.add_argument("--outdir", default="out")
    s.add_argument("--no-references", action="store_true",
                   help="skip the all-on / capacity-off baseline runs")
    s.add_argument("--no-plots", action="store_true")

    m = sub.add_parser("msgstats",
                       help="summarize a message log")
    m.add_argument("--log", required=True, help="msglog.ndjson from a run")
    m.add_argument("--plot", help="also render a bar chart to this path")
    return p


def _load_config(args) -> engine.SimConfig:
    if args.config:
        try:
            doc = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as e:
            raise ScenarioError([f"config {args.config}: {e}"])
        cfg = engine.config_from_dict(doc)
    else:
        cfg = engine.SimConfig()
    updates = {}
    if getattr(args, "horizon", None) is not None:
        updates["horizon_s"] = args.horizon
    if getattr(args, "no_xapp", False):
        updates["xapp_enabled"] = False
    if getattr(args, "no_rapp", False):
        updates["rapp_enabled"] = False
    if getattr(args, "no_msglog", False):
        updates["log_messages"] = False
    if updates:
        cfg = replace(cfg, **updates)
    return cfg


def _cmd_gen(args) -> int:
    params = (scenario.dt_like_params() if args.preset == "dt-like"
              else scenario.desk_params())
    sc = scenario.generate_synthetic(params, args.seed)
    scenario.save_scenario(sc, args.out)
    print(f"wrote {args.out}: {len(sc.sites)} sites, {len(sc.cells)} cells, "
          f"{len(sc.pixels)} pixels")
    return 0


def _progress_printer(horizon: int):
    if horizon < 7200:
        return None

    def show(t, total):
        print(f"  ... {t // 3600} h / {total / 3600:.0f} h", file=sys.stderr)
    return show


def _cmd_run(args) -> int:
    sc = scenario.load_scenario(args.scenario)
    cfg = _load_config(args)
    outdir = Path(args.outdir)
    result = engine.run(sc, cfg, seed=args.seed,
                        progress=_progress_printer(cfg.horizon_s))
    engine.write_timeseries_csv(result, outdir / "timeseries.csv")
    engine.write_events_csv(result, outdir / "events.csv")
    written = ["timeseries.csv", "events.csv"]
    if result.msglog is not None:
        engine.write_msglog_ndjson(result, outdir / "msglog.ndjson")
        written.append("msglog.ndjson")
    if not args.no_plots:
        from . import report
        report.render_timeseries(result, outdir / "timeseries.png")
        written.append("timeseries.png")
        if result.msglog is not None:
            stats = report.message_stats(result.msglog)
            report.render_msgstats(stats, outdir / "msgstats.png")
            written.append("msgstats.png")
    print(engine.summarize(result))
    print(f"outputs in {outdir}/: " + ", ".join(written))
    return 0


def _cmd_sweep(args) -> int:
    sc = scenario.load_scenario(args.scenario)
    cfg = _load_config(args)
    try:
        goals = [float(g) for g in args.goals.split(",") if g.strip()]
    except ValueError:
        raise ScenarioError([f"bad --goals value: {args.goals!r}"])
    if not goals:
        raise ScenarioError(["--goals must list at least one percentage"])

    def progress(label):
        print(f"  running {label}", file=sys.stderr)

    rows = engine.sweep_outage_goals(sc, cfg, goals, seed=args.seed,
                                     include_references=not args.no_references,
                                     progress=progress)
    outdir = Path(args.outdir)
    engine.write_sweep_csv(rows, outdir / "sweep.csv")
    written = ["sweep.csv"]
    if not args.no_plots:
        from . import report
        report.render_sweep(rows, outdir / "sweep.png")
        written.append("sweep.png")
    for r in rows:
        goal = f"goal {r.goal_pct:g}%" if r.goal_pct is not None else r.label
        print(f"  {goal:>22}: outage {r.outage_pct:6.2f}%  "
              f"power {r.power_w / 1e3:7.2f} kW")
    print(f"outputs in {outdir}/: " + ", ".join(written))
    return 0


def _cmd_msgstats(args) -> int:
    records = []
    try:
        with open(args.log) as f:
            for line in f:
                line = line.strip()
                if line:
                    records.append(json.loads(line))
    except (OSError, json.JSONDecodeError) as e:
        raise ScenarioError([f"log {args.log}: {e}"])
    from . import report
    stats = report.message_stats(records)
    total = 0
    for (iface, kind), n in sorted(stats.items()):
        print(f"  {iface:>3} {kind:<18} {n:>12,}")
        total += n
    print(f"  {'':>3} {'total':<18} {total:>12,}")
    if args.plot:
        report.render_msgstats(stats, args.plot)
        print(f"wrote {args.plot}")
    return 0


_COMMANDS = {"gen": _cmd_gen, "run": _cmd_run, "sweep": _cmd_sweep,
             "msgstats": _cmd_msgstats}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ScenarioError as e:
        print(f"coosim: {e}", file=sys.stderr)
        return 1
    except ValueError as e:
        print(f"coosim: {e}", file=sys.stderr)
        return 1
    except KeyboardInterrupt:
        return 2
    except Exception as e:  # runtime failure, distinct from bad input
        print(f"coosim: {type(e).__name__}: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
