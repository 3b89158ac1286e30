"""Command-line entry point.

Examples::

    secure-swipt single --rate 1 --trials 3
    secure-swipt sweep-rate --rates 0.5,1,2,3,4 --trials 50 --out rate.csv
    secure-swipt sweep-energy --energies-dbm=-20,-15,-10 --out energy.csv
    secure-swipt convergence --energies-dbm=-20,-10 --out conv.csv
    secure-swipt complexity --nt 4 --l 2 --k 3 --nr 2 --d 100 --q 8

Powers given on the command line or in the YAML config (keys ending in
``_dbm``) are in dBm and converted to watts here.  On failure a single JSON
line ``{"error": ..., "message": ...}`` goes to stderr and the exit code is 1.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys

import yaml

from .complexity import ComplexityParams, flops_one_d, flops_spca
from .harness import (
    METHODS,
    ExperimentConfig,
    dump_convergence,
    dump_records,
    experiment_from_dict,
    run_convergence,
    run_experiment,
    summarize,
)

KIND_OF = {"single": "single", "sweep-rate": "rate_sweep", "sweep-energy": "energy_sweep",
           "convergence": "convergence"}


def _floats(text: str) -> list:
    return [float(v) for v in text.split(",") if v.strip()]


def _methods(text: str) -> list:
    out = [m.strip() for m in text.split(",") if m.strip()]
    bad = [m for m in out if m not in METHODS]
    if bad:
        raise argparse.ArgumentTypeError(f"unknown methods {bad}; choose from {', '.join(METHODS)}")
    return out


def _common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="YAML file with experiment settings and a 'system' section")
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--trials", type=int, help="number of channel realizations")
    p.add_argument("--grid", type=int, help="grid points of the 1-D search")
    p.add_argument("--out", help="CSV output path (stdout when omitted)")
    p.add_argument("--jobs", type=int, default=1, help="worker processes")
    p.add_argument("--p-dbm", type=float, help="transmit power budget")
    p.add_argument("--e-er-dbm", type=float, help="harvested-power target at each ER")
    p.add_argument("--e-cr-dbm", type=float, help="harvested-power target at each CR")


class UsageError(ValueError):
    """Bad command-line arguments."""


class _Parser(argparse.ArgumentParser):
    # report usage errors through the same JSON line as every other failure
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="secure-swipt", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("single", help="all methods at one rate target")
    _common(p)
    p.add_argument("--rate", type=float, help="secrecy-rate target in bits/s/Hz")
    p.add_argument("--methods", type=_methods)
    p.add_argument("--timing", action="store_true", help="record wall-clock times (breaks byte-identical reruns)")

    p = sub.add_parser("sweep-rate", help="average power versus secrecy-rate target")
    _common(p)
    p.add_argument("--rates", type=_floats, help="comma-separated rate targets in bits/s/Hz")
    p.add_argument("--methods", type=_methods)
    p.add_argument("--timing", action="store_true")

    p = sub.add_parser("sweep-energy", help="average power versus CR harvested-power target")
    _common(p)
    p.add_argument("--energies-dbm", type=_floats, help="comma-separated CR energy targets")
    p.add_argument("--methods", type=_methods)
    p.add_argument("--timing", action="store_true")

    p = sub.add_parser("convergence", help="SPCA objective per iteration")
    _common(p)
    p.add_argument("--energies-dbm", type=_floats, help="energy targets applied to CRs and ERs alike")

    p = sub.add_parser("complexity", help="analytic operation counts of both methods")
    p.add_argument("--nt", type=int, default=4)
    p.add_argument("--l", dest="l_count", type=int, default=2)
    p.add_argument("--k", dest="k_count", type=int, default=3)
    p.add_argument("--nr", type=int, default=2)
    p.add_argument("--d", dest="d_steps", type=int, default=100)
    p.add_argument("--q", dest="q_iters", type=int, default=8)
    p.add_argument("--out", help="CSV output path (stdout when omitted)")
    return parser


def config_from_args(args) -> ExperimentConfig:
    data = {}
    if args.config:
        with open(args.config) as fh:
            data = yaml.safe_load(fh) or {}
        if not isinstance(data, dict):
            raise ValueError("config file must hold a mapping")
    data["kind"] = KIND_OF[args.command]
    system = dict(data.get("system") or {})
    for flag, key in (("p_dbm", "p_budget_dbm"), ("e_er_dbm", "e_er_target_dbm"), ("e_cr_dbm", "e_cr_target_dbm")):
        value = getattr(args, flag, None)
        if value is not None:
            system.pop(key[:-4], None)
            system[key] = value
    data["system"] = system
    for flag, key in (("seed", "seed"), ("trials", "trials"), ("grid", "grid_points"), ("out", "out"),
                      ("methods", "methods")):
        value = getattr(args, flag, None)
        if value is not None:
            data[key] = value
    sweep = getattr(args, "rates", None) or getattr(args, "energies_dbm", None)
    if getattr(args, "rate", None) is not None:
        sweep = [args.rate]
    if sweep is not None:
        data["sweep"] = sweep
    return experiment_from_dict(data)


def _complexity(args) -> None:
    p = ComplexityParams(args.nt, args.l_count, args.k_count, args.nr, args.d_steps, args.q_iters)
    rows = [("method", "flops"), ("one_d", repr(flops_one_d(p))), ("spca", repr(flops_spca(p)))]
    fh = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        csv.writer(fh, lineterminator="\n").writerows(rows)
    finally:
        if args.out:
            fh.close()


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "complexity":
            _complexity(args)
            return 0
        ec = config_from_args(args)
        if ec.kind == "convergence":
            rows = run_convergence(ec, jobs=args.jobs)
            if ec.out is None:
                dump_convergence(rows, sys.stdout)
            return 0
        records = run_experiment(ec, jobs=args.jobs, timing=args.timing)
        if ec.out is None:
            dump_records(records, sys.stdout)
        else:
            for row in summarize(records):
                print(f"{row['sweep_name']}={row['sweep_value']:g} {row['method']:>9}: "
                      f"{row['mean_obj_dbm']:8.3f} dBm over {row['feasible']} feasible, "
                      f"{row['infeasible']} infeasible")
        return 0
    except (ValueError, OSError, RuntimeError, yaml.YAMLError) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
