"""Command line entry point.

  run     batch experiments: scenario x schemes x seeds -> CSVs, traces,
          figures
  replay  re-drive an audited session bundle on a fresh twin and verify
  report  render figures from an existing metrics.csv
  serve   start the HTTP gateway for the operator console
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path


def _parse_seeds(text: str) -> list[int]:
    """"0..9" or "0,3,7" or a single integer."""
    text = text.strip()
    if ".." in text:
        lo, hi = text.split("..", 1)
        return list(range(int(lo), int(hi) + 1))
    return [int(t) for t in text.split(",") if t.strip() != ""]


def cmd_run(args: argparse.Namespace) -> int:
    from .runner import run_experiment, ScriptedOperator
    from .sim.scenario import ScenarioInvalidError

    schemes = [s.strip() for s in args.schemes.split(",") if s.strip()]
    seeds = _parse_seeds(args.seeds)
    operator = (
        ScriptedOperator.from_file(args.operator) if args.operator else None
    )
    try:
        results = run_experiment(
            args.scenario,
            schemes,
            seeds,
            out_dir=args.out,
            operator=operator,
            n_slots=args.slots,
        )
    except ScenarioInvalidError as exc:
        print(f"scenario invalid: {exc}", file=sys.stderr)
        return 2
    for r in results:
        print(
            f"{r.scheme:>20s} seed={r.seed:<3d} isr={r.isr:.4f} "
            f"ee={r.ee_mbit_per_joule:.3f} Mbit/J"
        )
    if args.out and args.figures:
        from .report import render_from_results

        for p in render_from_results(results, args.out):
            print(f"figure: {p}")
    expected = len(schemes) * len(seeds)
    return 0 if len(results) == expected else 1


def cmd_replay(args: argparse.Namespace) -> int:
    from .runner import replay_audit

    outcome = replay_audit(args.audit)
    status = "MATCH" if outcome["match"] else "MISMATCH"
    print(f"replay: {status}")
    for orig, new in zip(outcome["original_reports"], outcome["replayed_reports"]):
        print(f"  original: {orig}")
        print(f"  replayed: {new}")
    return 0 if outcome["match"] else 1


def cmd_report(args: argparse.Namespace) -> int:
    from .report import read_metrics_csv, render_figures

    rows = read_metrics_csv(args.metrics)
    out = args.out or str(Path(args.metrics).parent)
    for p in render_figures(rows, out):
        print(f"figure: {p}")
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    import os

    import uvicorn

    from .gateway import make_app
    from .sim.scenario import ScenarioInvalidError

    # environment overrides, lowest precedence under explicit flags
    env = os.environ
    scenario = args.scenario or env.get("LAWNET_SCENARIO")
    corpus = args.corpus or env.get("LAWNET_CORPUS_DIR")
    port = args.port if args.port is not None else int(env.get("LAWNET_PORT", "8440"))
    host = args.host or env.get("LAWNET_HOST", "127.0.0.1")
    reasoner_mode = args.reasoner or env.get("LAWNET_REASONER_MODE", "rule")
    llm_endpoint = args.llm_endpoint or env.get("LAWNET_LLM_ENDPOINT")
    llm_key = env.get("LAWNET_LLM_API_KEY")

    try:
        app = make_app(
            scenario_path=scenario,
            seed=args.seed,
            corpus_dir=corpus,
            reasoner_mode=reasoner_mode,
            llm_endpoint=llm_endpoint,
            llm_api_key=llm_key,
        )
    except ScenarioInvalidError as exc:
        print(f"scenario invalid: {exc}", file=sys.stderr)
        return 2
    uvicorn.run(app, host=host, port=port, log_level="info")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lawnet-copilot",
        description="Intent-driven HITL management of a simulated UAV network",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="batch experiment over schemes and seeds")
    p_run.add_argument("--scenario", required=True, help="scenario JSON path")
    p_run.add_argument(
        "--schemes",
        default="intent_weighted_pf,round_robin,max_sinr",
        help="comma-separated scheme names",
    )
    p_run.add_argument("--seeds", default="0..9", help='e.g. "0..9" or "1,2,5"')
    p_run.add_argument("--out", default=None, help="output directory")
    p_run.add_argument("--slots", type=int, default=None, help="override run length")
    p_run.add_argument("--operator", default=None, help="scripted operator JSON")
    p_run.add_argument(
        "--figures",
        action=argparse.BooleanOptionalAction,
        default=True,
        help="render PNG figures next to the CSVs",
    )
    p_run.set_defaults(fn=cmd_run)

    p_replay = sub.add_parser("replay", help="verify an audited session bundle")
    p_replay.add_argument("--audit", required=True, help="audit bundle JSON path")
    p_replay.set_defaults(fn=cmd_replay)

    p_report = sub.add_parser("report", help="render figures from metrics.csv")
    p_report.add_argument("--metrics", required=True, help="metrics.csv path")
    p_report.add_argument("--out", default=None, help="figure output directory")
    p_report.set_defaults(fn=cmd_report)

    p_serve = sub.add_parser("serve", help="start the operator gateway")
    p_serve.add_argument("--scenario", default=None, help="scenario JSON path")
    p_serve.add_argument("--seed", type=int, default=None)
    p_serve.add_argument("--corpus", default=None, help="extra corpus directory")
    p_serve.add_argument("--host", default=None)
    p_serve.add_argument("--port", type=int, default=None)
    p_serve.add_argument(
        "--reasoner", choices=["rule", "chat"], default=None,
        help="rationale backend; chat needs an LLM endpoint",
    )
    p_serve.add_argument("--llm-endpoint", default=None, help="chat-completion URL")
    p_serve.set_defaults(fn=cmd_serve)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    raise SystemExit(main())
