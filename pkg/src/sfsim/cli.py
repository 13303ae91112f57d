"""Command-line front end.

Subcommands:
  run      run the experiment matrix from a config file into an output dir
  attack   run an attack scenario file; exit 2 when a verdict deviates
  compare  per-cell PER delta between two result directories

Exit codes: 0 success, 1 config error, 2 attack verdict mismatch.
"""

from __future__ import annotations

import argparse
import os
import sys

from .adversary import run_scenario_file, verdicts_to_json
from .configio import load_experiment_config
from .experiment import (
    MissingPair,
    compare_encrypted_delta,
    export_results,
    run_experiment,
    write_delta_report,
)
from .protocol import ConfigError


def _cmd_run(args) -> int:
    try:
        cfg = load_experiment_config(args.config)
        if args.seed is not None:
            cfg.seed = args.seed
        if args.paper_scale:
            cfg.duration_s = 3000
        cfg.validate()
        rows, aggregates = run_experiment(cfg, jobs=args.jobs)
        csv_path, manifest_path = export_results(rows, aggregates, cfg, args.out)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 1
    print(f"wrote {csv_path} ({len(rows)} rows) and {manifest_path}")
    return 0


def _cmd_attack(args) -> int:
    try:
        verdicts, ok = run_scenario_file(args.scenario)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 1
    text = verdicts_to_json(verdicts)
    if args.out:
        with open(args.out, "w") as f:
            f.write(text + "\n")
    for v in verdicts:
        print(f"{v.scenario}: {'succeeded' if v.succeeded else 'failed'}")
    if not ok:
        print("verdict mismatch against scenario expectations", file=sys.stderr)
        return 2
    return 0


def _cmd_compare(args) -> int:
    try:
        report = compare_encrypted_delta(args.unencrypted_dir, args.encrypted_dir)
    except (ConfigError, MissingPair) as e:
        print(f"compare error: {e}", file=sys.stderr)
        return 1
    out = args.out or os.path.join(args.encrypted_dir, "delta_report.csv")
    write_delta_report(report, out)
    for r in report:
        print(
            f"{r['phy']} p{r['payload_bytes']} r{r['repeat']}: "
            f"delta={r['delta']:+.6f} analytic={r['analytic_delta']:+.6f}"
        )
    print(f"wrote {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sfsim", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run the experiment matrix")
    p_run.add_argument("--config", required=True, help="experiment config (YAML)")
    p_run.add_argument("--out", required=True, help="output directory")
    p_run.add_argument("--seed", type=int, default=None, help="override the master seed")
    p_run.add_argument(
        "--paper-scale", action="store_true", help="3000 s runs (6000 floods) instead of desk scale"
    )
    p_run.add_argument("--jobs", type=int, default=1, help="parallel engine processes")
    p_run.set_defaults(func=_cmd_run)

    p_att = sub.add_parser("attack", help="run attack scenarios")
    p_att.add_argument("scenario", help="scenario file (YAML)")
    p_att.add_argument("--out", default=None, help="write verdicts JSON here")
    p_att.set_defaults(func=_cmd_attack)

    p_cmp = sub.add_parser("compare", help="PER delta between two result dirs")
    p_cmp.add_argument("unencrypted_dir")
    p_cmp.add_argument("encrypted_dir")
    p_cmp.add_argument("--out", default=None, help="delta report CSV path")
    p_cmp.set_defaults(func=_cmd_compare)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
