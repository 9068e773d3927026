"""Command-line entry points: sim, replay, report, serve.

Exit codes: 0 success, 1 replay divergence, 2 usage/bad input,
3 I/O failure, 4 schema/format violation. ERPLOOP_OUT sets the default
output directory for sim and report.
"""

from __future__ import annotations

import argparse
import asyncio
import json
import os
import sys

from .engine import EngineConfig
from .errors import EngineError, InputError, RecorderError, SchemaError
from .replay import replay_session
from .report import render_summary_text, write_report
from .service import ServeOptions, WireServer
from .simulate import ProtocolConfig, SimConfig, run_sweep
from .version import ENGINE_VERSION

EXIT_OK = 0
EXIT_DIVERGED = 1
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_SCHEMA = 4


def _profile_overrides(args) -> dict:
    overrides = {}
    for name in ("erp_amp", "n200_amp", "noise_rms", "lapse_rate", "learning_rate"):
        value = getattr(args, name)
        if value is not None:
            overrides[name] = value
    return overrides


def _add_profile_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--erp-amp", type=float, default=None, help="P300 amplitude in uV (default 5)")
    p.add_argument("--n200-amp", type=float, default=None, help="N200 amplitude in uV (default -3)")
    p.add_argument("--noise-rms", type=float, default=None, help="pink-noise RMS in uV (default 10)")
    p.add_argument("--lapse-rate", type=float, default=None, help="per-flash lapse probability")
    p.add_argument("--learning-rate", type=float, default=None, help="per-run amplitude increment")


def cmd_sim(args) -> int:
    out_dir = args.out or os.environ.get("ERPLOOP_OUT")
    config = SimConfig(
        n_subjects=args.subjects,
        master_seed=args.seed,
        texture_policy=args.texture,
        out_dir=out_dir,
        profile_overrides=_profile_overrides(args),
        engine=EngineConfig(selection_timeout_s=args.selection_timeout),
        protocol=ProtocolConfig(
            n_cues=args.cues,
            compliance=args.compliance,
            timed_deadline_s=args.deadline,
            accept_free_play=args.free_play,
        ),
    )
    results, summary = run_sweep(config)
    print(render_summary_text(_summary_rows(summary)))
    aborted = summary["aborted_subjects"]
    if aborted:
        print(f"aborted after repeated red calibrations: {', '.join(aborted)}")
    print(f"{config.n_subjects} subject(s) in {summary['wall_time_s']} s wall time")
    if out_dir:
        print(f"sessions written under {out_dir}")
    if args.json:
        print(json.dumps(summary, sort_keys=True))
    return EXIT_OK


def _summary_rows(summary: dict) -> list[dict]:
    rows = []
    for row in summary["rows"]:
        flat = {"phase": row["tag"].split("/")[0], "task_type": row["tag"].split("/")[1],
                "n_runs": row["n_runs"]}
        for metric in ("accuracy", "task_time_s", "itr_bits_per_selection", "itr_bits_per_min"):
            stats = row.get(metric)
            if stats:
                for k, v in stats.items():
                    flat[f"{metric}_{k}"] = v
        rows.append(flat)
    return rows


def cmd_replay(args) -> int:
    result = replay_session(args.session)
    if result.ok:
        print(
            f"replay ok: {result.n_runs} run(s), {result.n_activations} activation(s) "
            f"reproduced exactly"
        )
        return EXIT_OK
    print("replay diverged from the recording:", file=sys.stderr)
    for m in result.mismatches:
        print(f"  - {m}", file=sys.stderr)
    return EXIT_DIVERGED


def cmd_report(args) -> int:
    out_dir = args.out or os.environ.get("ERPLOOP_OUT") or (str(args.root) + "-report")
    written = write_report(args.root, out_dir)
    for path in written:
        print(path)
    summary_txt = [p for p in written if p.name == "summary.txt"]
    if summary_txt:
        print()
        print(summary_txt[0].read_text(), end="")
    return EXIT_OK


def cmd_serve(args) -> int:
    options = ServeOptions(
        seed=args.seed,
        pace=args.pace,
        texture=args.texture,
        frontend_dir=args.frontend_dir,
    )
    server = WireServer(options, host=args.host, port=args.port, http_port=args.http_port)
    print(f"ndjson: tcp://{args.host}:{args.port}")
    print(f"http:   http://{args.host}:{args.http_port}/")
    try:
        asyncio.run(server.serve_forever())
    except KeyboardInterrupt:
        pass
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="erploop",
        description="Closed-loop ERP game simulator: calibration, tasks, metrics, live service.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {ENGINE_VERSION}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("sim", help="run the scripted protocol for simulated subjects")
    p_sim.add_argument("--subjects", type=int, default=1)
    p_sim.add_argument("--seed", type=int, default=0)
    p_sim.add_argument("--texture", choices=("checker", "grain", "alternate"), default="alternate")
    p_sim.add_argument("--out", default=None, help="write session trees here (or $ERPLOOP_OUT)")
    p_sim.add_argument("--cues", type=int, default=6, help="speller selections per run")
    p_sim.add_argument("--compliance", type=float, default=0.95)
    p_sim.add_argument("--deadline", type=float, default=90.0, help="timed-run deadline in s")
    p_sim.add_argument("--selection-timeout", type=float, default=20.0)
    p_sim.add_argument("--free-play", action="store_true", help="script the optional free-play block")
    p_sim.add_argument("--json", action="store_true", help="also print the summary as JSON")
    _add_profile_args(p_sim)
    p_sim.set_defaults(func=cmd_sim)

    p_rep = sub.add_parser("replay", help="re-run a recorded session and verify its decisions")
    p_rep.add_argument("session", help="session directory (contains session.json)")
    p_rep.set_defaults(func=cmd_replay)

    p_rpt = sub.add_parser("report", help="render figures and summaries for sessions")
    p_rpt.add_argument("root", help="session directory or sweep root")
    p_rpt.add_argument("--out", default=None, help="report output directory")
    p_rpt.set_defaults(func=cmd_report)

    p_srv = sub.add_parser("serve", help="run the live NDJSON/HTTP session service")
    p_srv.add_argument("--host", default="127.0.0.1")
    p_srv.add_argument("--port", type=int, default=8750)
    p_srv.add_argument("--http-port", type=int, default=8751)
    p_srv.add_argument("--seed", type=int, default=0)
    p_srv.add_argument("--pace", choices=("wall", "fast"), default="wall")
    p_srv.add_argument("--texture", choices=("checkerboard", "grain"), default="checkerboard")
    p_srv.add_argument("--frontend-dir", default=None, help="static files for the browser client")
    p_srv.set_defaults(func=cmd_serve)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except SchemaError as exc:
        print(f"schema error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except (InputError, EngineError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except RecorderError as exc:
        print(f"recorder error: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
