"""``simulate`` command-line entry point."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from ..config import ConfigError, NumericalError, load_config
from ..scheduler import SolverSettings
from .experiments import EXPERIMENTS, POLICY_SERIES, ExperimentSpec, run_experiment
from .output import write_csv

EXIT_OK, EXIT_SPEC, EXIT_NUMERIC = 0, 2, 3

log = logging.getLogger("lifi_supercell")


def _list(kind):
    def parse(text: str):
        try:
            return tuple(kind(v) for v in text.split(",") if v.strip())
        except ValueError as exc:
            raise argparse.ArgumentTypeError(str(exc)) from None
    return parse


def _upper_list(text: str) -> tuple[str, ...]:
    return tuple(v.strip().upper() for v in text.split(",") if v.strip())


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="simulate",
        description="Run a super-cell experiment and write its results as CSV.",
    )
    p.add_argument("experiment", choices=EXPERIMENTS)
    p.add_argument("--config", type=Path, help="flat YAML file of system parameters")
    p.add_argument("--seed", type=int, default=0, help="root RNG seed (u64)")
    p.add_argument("--out", type=Path, required=True, help="output CSV path")
    p.add_argument("--realizations", type=int, help="Monte Carlo realizations per grid point")
    p.add_argument("--nt", type=_list(int), help="tier counts, comma separated")
    p.add_argument("--lambda", dest="ue_density", type=_list(float), help="UE densities (UE/cell)")
    p.add_argument("--kb", type=_list(float), help="backhaul power ratios")
    p.add_argument("--bw-ratio", type=_list(float), help="B_b / B_a values")
    p.add_argument("--policy", type=_upper_list, help=f"subset of {','.join(POLICY_SERIES)}")
    p.add_argument("--scheme", type=_upper_list, help="power-control schemes (NPC,MSPC,ASPC,ARPC)")
    p.add_argument("--workers", type=int, default=1, help="worker processes (results do not depend on it)")
    p.add_argument("--projection", choices=("clip", "simplex"), default="clip",
                   help="feasibility step after each subgradient update")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    if args.seed < 0 or args.seed >= 2**64:
        print("error: --seed must be an unsigned 64-bit integer", file=sys.stderr)
        return EXIT_SPEC
    try:
        cfg = load_config(args.config)
        spec = ExperimentSpec.create(
            args.experiment,
            n_tiers=args.nt,
            ue_density=args.ue_density,
            k_b=args.kb,
            bw_ratio=args.bw_ratio,
            policies=args.policy,
            schemes=args.scheme,
            realizations=args.realizations,
            seed=args.seed,
            workers=args.workers,
            solver=SolverSettings(projection=args.projection),
        )
        log.info("running %s (config %s)", spec.kind, cfg.digest())
        table = run_experiment(spec, cfg)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SPEC
    except (NumericalError, FloatingPointError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    try:
        write_csv(table, args.out)
    except OSError as exc:
        print(f"error: cannot write {args.out}: {exc}", file=sys.stderr)
        return EXIT_SPEC
    log.info("wrote %d rows to %s", len(table.rows), args.out)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
