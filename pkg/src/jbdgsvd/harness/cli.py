"""Command-line entry point: ``jbdgsvd [flags]``."""

from __future__ import annotations

import argparse
import logging
import sys

from ..errors import JbdError
from .experiment import EXIT_ERROR, make_config, read_config_file, run_experiment, run_sweep


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="jbdgsvd",
        description="Partial GSVD of a sparse pair {A, L} by joint bidiagonalization.",
    )
    src = ap.add_mutually_exclusive_group()
    src.add_argument("--a", metavar="PATH", help="Matrix Market file holding A")
    src.add_argument("--gen", metavar="NAME:ARGS",
                     help="synthetic pair: a1l1:N,KAPPA | a2l2:N | random:M,P,N[,SEED]")
    ap.add_argument("--l", metavar="PATH", help="Matrix Market file holding L, or l1d[:SCALE]")
    ap.add_argument("--steps", type=int, metavar="K")
    ap.add_argument("--tau", type=float, metavar="T", help="inner LSQR tolerance")
    ap.add_argument("--tau-bar", type=float, metavar="T", help="tolerance of the x-recovery solve")
    ap.add_argument("--reorth", choices=("none", "cgs", "mgs"))
    ap.add_argument("--inner", choices=("lsqr", "exact"))
    ap.add_argument("--extract", metavar="COUNT:{largest|smallest}:{b|bhat}")
    ap.add_argument("--seed", type=int)
    ap.add_argument("--out", metavar="DIR")
    ap.add_argument("--dense-cap", type=int, metavar="N")
    ap.add_argument("--kappa", type=float, metavar="X", help="condition number used for bound lines")
    ap.add_argument("--diag", choices=("off", "basic", "full"))
    ap.add_argument("--config", metavar="FILE", help="key=value file; flags override it")
    ap.add_argument("--sweep-tau", metavar="T1,T2,...",
                    help="run once per tau, each into OUT/tau_<value>")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    keys = ("a", "gen", "l", "steps", "tau", "tau_bar", "reorth", "inner", "extract", "seed",
            "out", "dense_cap", "kappa", "diag")
    try:
        file_values = read_config_file(args.config) if args.config else {}
        cfg = make_config(file_values, **{k: getattr(args, k) for k in keys})
        if args.sweep_tau:
            taus = [float(t) for t in args.sweep_tau.split(",") if t]
            outcomes = run_sweep(cfg, taus)
        else:
            outcomes = [run_experiment(cfg)]
    except (JbdError, OSError, ValueError) as exc:
        print(f"jbdgsvd: {exc}", file=sys.stderr)
        return EXIT_ERROR
    for oc in outcomes:
        k = oc.factorization.k if oc.factorization is not None else 0
        print(f"{oc.out_dir}: {oc.message} ({k} steps)")
        for e in oc.estimates:
            print(f"  c_{e.index} = {e.c:.15g}  s_{e.index} = {e.s:.15g}  residual = {e.residual:.3e}")
    codes = {oc.exit_code for oc in outcomes}
    return EXIT_ERROR if EXIT_ERROR in codes else max(codes)


if __name__ == "__main__":
    sys.exit(main())
