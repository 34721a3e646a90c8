"""Command-line front end.

Exit codes: 0 success, 1 validation error, 2 numerical failure, 3 I/O error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from .analytic import ConvergenceError, analyze
from .harness import (
    MODES,
    PRESET_NAMES,
    emit_csv,
    load_sweep,
    preset_sweep,
    run_sweep,
    sweep_metadata,
)
from .model import ScenarioValidationError, build_transmissibility, load_scenario
from .netgen import dump_graph, generate_multilayer
from .simulate import load_fixture, oracle_crosscheck, run_trials


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return obj


def _report_lines(pairs):
    return [f"{key} = {_fmt_value(val)}" for key, val in pairs]


def _fmt_value(val):
    if isinstance(val, np.ndarray):
        return "[" + ", ".join(format(float(x), ".10g") for x in val) + "]"
    if isinstance(val, float):
        return format(val, ".10g")
    return str(val)


def _write_output(pairs, out_path):
    text = "\n".join(_report_lines(pairs))
    print(text)
    if out_path:
        payload = {key: _jsonable(val) for key, val in pairs}
        Path(out_path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


def _cmd_analyze(args) -> int:
    cfg = load_scenario(args.config)
    rep = analyze(cfg)
    _write_output(
        [
            ("pe_by_type", rep.pe_by_type),
            ("pe_avg", rep.pe_avg),
            ("rho", rep.rho),
            ("es_by_type", rep.es_by_type),
            ("es_total", rep.es_total),
            ("extinction_iterations", rep.extinction_iterations),
            ("size_iterations", rep.size_iterations),
        ],
        args.out,
    )
    return 0


def _cmd_simulate(args) -> int:
    cfg = load_scenario(args.config)
    summary = run_trials(cfg, args.trials, args.seed, workers=args.threads)
    _write_output(
        [
            ("trials", summary.trials),
            ("n_epidemic", summary.n_epidemic),
            ("pe_hat", summary.pe_hat),
            ("pe_se", summary.pe_se),
            ("es_hat", math.nan if summary.es_hat is None else summary.es_hat),
            ("es_se", math.nan if summary.es_se is None else summary.es_se),
            (
                "es_by_type_hat",
                np.array([]) if summary.es_by_type_hat is None else summary.es_by_type_hat,
            ),
            ("mean_size_unconditional", summary.mean_size_unconditional),
        ],
        args.out,
    )
    return 0


def _run_and_emit(spec, args) -> int:
    rows = run_sweep(spec, args.seed, workers=args.threads, timing=args.timing)
    meta = sweep_metadata(spec, args.seed)
    emit_csv(rows, args.out, metadata=meta)
    failures = sum(1 for r in rows if r.error)
    print(f"wrote {len(rows)} rows to {args.out}" + (f" ({failures} failed)" if failures else ""))
    return 2 if failures else 0


def _cmd_sweep(args) -> int:
    spec = load_sweep(args.config)
    if args.trials is not None:
        spec = type(spec)(spec.base, spec.axes, args.trials, spec.mode, spec.label)
    if args.mode is not None:
        spec = type(spec)(spec.base, spec.axes, spec.trials, args.mode, spec.label)
    return _run_and_emit(spec, args)


def _cmd_preset(args) -> int:
    spec = preset_sweep(args.name, trials=args.trials or 200, mode=args.mode or "both")
    return _run_and_emit(spec, args)


def _cmd_oracle_check(args) -> int:
    cfg = load_scenario(args.config)
    T = build_transmissibility(cfg)
    paths = []
    for entry in args.fixtures:
        p = Path(entry)
        paths.extend(sorted(p.glob("*.txt")) if p.is_dir() else [p])
    if not paths:
        raise ScenarioValidationError(["no fixture files found"])
    all_ok = True
    for i, path in enumerate(paths):
        graph, assignment = load_fixture(path)
        threshold = graph.n // 2 + 1  # strict majority of nodes infected
        res = oracle_crosscheck(
            graph, assignment, T, threshold, args.runs, (args.seed, i)
        )
        status = "PASS" if res.passed else "FAIL"
        print(
            f"{status} {path.name}: size {res.mc_mean:.5f} vs exact {res.exact_mean:.5f} "
            f"(z={res.z_mean:+.2f}); exceed {res.mc_exceed:.5f} vs {res.exact_exceed:.5f} "
            f"(z={res.z_exceed:+.2f})"
        )
        all_ok &= res.passed
    return 0 if all_ok else 2


def _cmd_graph(args) -> int:
    cfg = load_scenario(args.config)
    graph = generate_multilayer(cfg, args.seed)
    dump_graph(graph, args.out, alpha=cfg.alpha, seed=args.seed)
    print(f"wrote {graph.edges_c.shape[0]} community and {graph.edges_s.shape[0]} school edges")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="maskspread",
        description="Spreading over two-layer contact networks with mask heterogeneity",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out_required=False):
        p.add_argument("--config", required=True, help="scenario or sweep file")
        p.add_argument("--out", required=out_required, default=None, help="output path")
        p.add_argument("--seed", type=int, default=0, help="master RNG seed")
        p.add_argument("--threads", type=int, default=1, help="worker processes")

    p = sub.add_parser("analyze", help="solve one scenario analytically")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default=None, help="optional JSON output path")
    p.set_defaults(func=_cmd_analyze)

    p = sub.add_parser("simulate", help="Monte-Carlo trials on one scenario")
    common(p)
    p.add_argument("--trials", type=int, default=1000)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("sweep", help="run a sweep file, write CSV")
    common(p, out_required=True)
    p.add_argument("--trials", type=int, default=None, help="override sweep trials")
    p.add_argument("--mode", choices=MODES, default=None, help="override sweep mode")
    p.add_argument("--timing", action="store_true", help="fill wall_time_s (breaks byte-reproducibility)")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("preset", help="run a stock experiment sweep, write CSV")
    p.add_argument("name", choices=PRESET_NAMES)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--mode", choices=MODES, default=None)
    p.add_argument("--timing", action="store_true")
    p.set_defaults(func=_cmd_preset)

    p = sub.add_parser("oracle-check", help="exact enumeration vs Monte-Carlo on fixtures")
    p.add_argument("--config", required=True, help="scenario supplying masks and transmissibilities")
    p.add_argument("--fixtures", nargs="+", required=True, help="fixture files or directories")
    p.add_argument("--runs", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_oracle_check)

    p = sub.add_parser("graph", help="sample one multilayer graph, write its edge list")
    common(p, out_required=True)
    p.set_defaults(func=_cmd_graph)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ScenarioValidationError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return 1
    except ConvergenceError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
