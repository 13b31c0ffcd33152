"""Command-line runner.

    varmetro run CONFIG.json
    varmetro reproduce FIG_ID [--out DIR] [--max-n K] [--restarts R] [--budget-per-dim B] [--seed S]
    varmetro analyze STATE.json

Exit codes: 0 success, 2 invalid input, 3 numerical failure. Failures also
print a JSON error record on stderr and, when an output directory is known,
write it to ``error.json`` there.
"""

import argparse
import json
import sys
from pathlib import Path

from varmetro import __version__, analysis
from varmetro.errors import NumericalError
from varmetro.experiments import FIGURES, InvalidConfig, Runner, figure_config, load_config, state_from_json

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_NUMERICAL = 3


def _fail(code, exc, out_dir=None, stage=None):
    record = {"exit_code": code, "error": type(exc).__name__, "message": str(exc), "stage": stage}
    text = json.dumps(record, sort_keys=True)
    print(text, file=sys.stderr)
    if out_dir is not None:
        try:
            Path(out_dir).mkdir(parents=True, exist_ok=True)
            (Path(out_dir) / "error.json").write_text(text + "\n", encoding="utf-8")
        except OSError:
            pass
    return code


def _execute(config, out_dir=None):
    out = out_dir or config.output_dir
    try:
        records = Runner(config, out).run()
    except NumericalError as exc:
        return _fail(EXIT_NUMERICAL, exc, out, exc.stage or "unknown")
    except InvalidConfig as exc:
        return _fail(EXIT_INVALID, exc, out)
    for r in records:
        if "precision" in r:
            print(f"{r['family']:>10} N={r['n_qubits']:<2d} precision={r['precision']:.6g} gamma_t={r['gamma_t']:.4g}")
        else:
            print(f"N={r['n_qubits']:<2d} F_a={r['f_a']:.6g} F_s={r['f_s']:.6g} ratio={r['ratio']:.6g}")
    print(f"results written to {out}")
    return EXIT_OK


def cmd_run(args):
    try:
        config = load_config(args.config)
    except InvalidConfig as exc:
        return _fail(EXIT_INVALID, exc)
    return _execute(config)


def cmd_reproduce(args):
    overrides = {k: v for k, v in (("restarts", args.restarts), ("budget_per_dim", args.budget_per_dim),
                                   ("pretrain_starts", args.pretrain_starts)) if v is not None}
    out = args.out or f"results/{args.figure}"
    try:
        config = figure_config(args.figure, out, args.max_n, overrides, args.seed)
    except InvalidConfig as exc:
        return _fail(EXIT_INVALID, exc, out)
    return _execute(config)


def cmd_analyze(args):
    try:
        data = json.loads(Path(args.state).read_text(encoding="utf-8"))
        psi = state_from_json(data)
    except (OSError, json.JSONDecodeError) as exc:
        return _fail(EXIT_INVALID, exc)
    except InvalidConfig as exc:
        return _fail(EXIT_INVALID, exc)
    report = analysis.state_report(psi)
    print(json.dumps({"state": str(args.state), **report.to_dict()}, indent=2, sort_keys=True))
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="varmetro", description="Variational probe optimisation for noisy metrology.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run an experiment config")
    p.add_argument("config")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("reproduce", help="run a bundled figure config")
    p.add_argument("figure", help=f"one of {', '.join(sorted(FIGURES))}")
    p.add_argument("--out")
    p.add_argument("--max-n", type=int)
    p.add_argument("--restarts", type=int)
    p.add_argument("--budget-per-dim", type=int)
    p.add_argument("--pretrain-starts", type=int)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_reproduce)

    p = sub.add_parser("analyze", help="entanglement and symmetry report for a saved state")
    p.add_argument("state")
    p.set_defaults(func=cmd_analyze)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
