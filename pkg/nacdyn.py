"""
Command line for the nacdyn pipeline.

    python nacdyn.py validate config.json
    python nacdyn.py run config.json
    python nacdyn.py dynamics config.json        # one stage against existing artifacts
    python nacdyn.py plotdata run/ --figures
    python nacdyn.py synth demo/                 # synthetic manifest, bundle and config

Exit status: 0 ok, 1 input error, 2 numeric failure.
"""
import argparse
import logging
import sys
from pathlib import Path

from config import STAGES, GridSpec, load_config, log_level
from exceptions import NacdynError

logger = logging.getLogger("nacdyn")


def _configure_logging(verbosity: int) -> None:
    level = logging.DEBUG if verbosity > 1 else logging.INFO if verbosity == 1 else getattr(logging, log_level(), logging.INFO)
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nacdyn", description="SSVQE surfaces, NACs and coupled wavepacket dynamics")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="-v for INFO, -vv for DEBUG")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a run config and report fatal problems and warnings")
    p.add_argument("config", type=Path)

    p = sub.add_parser("run", help="run the stages selected in the config")
    p.add_argument("config", type=Path)
    p.add_argument("--stages", nargs="+", choices=STAGES, help="override the config's stage selection")
    p.add_argument("--workers", type=int, default=None, help="process-pool size (default NACDYN_WORKERS)")
    p.add_argument("--no-progress", action="store_true")

    for stage in STAGES[:-1]:
        p = sub.add_parser(stage, help=f"run only the {stage} stage")
        p.add_argument("config", type=Path)
        p.add_argument("--workers", type=int, default=None)
        p.add_argument("--no-progress", action="store_true")

    p = sub.add_parser("plotdata", help="write plot-ready tables for a finished run")
    p.add_argument("run_dir", type=Path)
    p.add_argument("--figures", action="store_true", help="also render PNG figures")

    p = sub.add_parser("synth", help="write a synthetic conical-intersection manifest, bundle and config")
    p.add_argument("out_dir", type=Path)
    p.add_argument("--coarse", nargs=2, type=int, default=(5, 5), metavar=("N_R", "N_THETA"))
    p.add_argument("--grid", nargs=2, type=int, default=(32, 32), metavar=("N_R", "N_THETA"))
    p.add_argument("--t-final", type=float, default=15.0, help="propagated time (fs)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    _configure_logging(args.verbose)
    from pipeline import PipelineUtils

    try:
        if args.command == "validate":
            report = PipelineUtils.validate(args.config)
            print(report.render())
            return 0 if report.ok else 1
        if args.command == "plotdata":
            for path in PipelineUtils.emit_plot_data(args.run_dir, figures=args.figures):
                print(path)
            return 0
        if args.command == "synth":
            from functional.synthetic import write_synthetic_run

            grid = GridSpec(n_r=args.grid[0], n_theta=args.grid[1])
            print(write_synthetic_run(args.out_dir, coarse_shape=tuple(args.coarse), grid=grid, t_final_fs=args.t_final))
            return 0

        config = load_config(args.config)
        if args.command != "run":
            config = config.model_copy(update={"stages": [args.command]})
        elif args.stages:
            config = config.model_copy(update={"stages": list(args.stages)})
        return PipelineUtils.run(config, progress=not args.no_progress, workers=args.workers)
    except NacdynError as e:
        logger.error("%s", e)
        return e.exit_code


if __name__ == "__main__":
    sys.exit(main())
