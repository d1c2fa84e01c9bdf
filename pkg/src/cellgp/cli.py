"""
Command-line front end.

    cellgp fit      --data cells.csv --out model.txt [--scenario a] [--latent 2] ...
    cellgp forecast --model model.txt --cell B0005 --cycles 101..168 [--out f.csv]
    cellgp bench    --data cells.csv --scenario a [--models mcgp,igp_linear] [--out dir]

Exit codes: 0 success, 1 usage, 2 data, 3 numerical/fit failure.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys

import numpy as np

from . import __version__
from .bench import MODELS, ForecastDump, run_scenario
from .data import BUILTIN_SCENARIOS, TrainingSet, build_scenario, downsample, load_csv, load_scenario
from .errors import (
    CellGPError,
    DataError,
    ModelFormatError,
    NotPositiveDefinite,
    ObjectiveFailure,
    OptimizerFailed,
    UnknownCell,
)
from .mcgp import load_model, mcgp_fit, save_model
from .optimizer import OptimizerConfig

EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 1, 2, 3

log = logging.getLogger("cellgp")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _nonneg_int(s: str) -> int:
    v = int(s)
    if v < 0:
        raise argparse.ArgumentTypeError(f"{s} is negative")
    return v


def _pos_int(s: str) -> int:
    v = int(s)
    if v < 1:
        raise argparse.ArgumentTypeError(f"{s} is not positive")
    return v


def parse_cycles(spec: str) -> np.ndarray:
    """Inclusive integer range ``A..B``."""
    parts = spec.split("..")
    if len(parts) != 2:
        raise UsageError(f"--cycles expects A..B, got {spec!r}")
    try:
        a, b = int(parts[0]), int(parts[1])
    except ValueError:
        raise UsageError(f"--cycles bounds must be integers, got {spec!r}") from None
    if a > b:
        raise UsageError(f"--cycles range {spec!r} is reversed")
    if a < 1:
        raise UsageError("--cycles must start at 1 or later")
    return np.arange(a, b + 1, dtype=np.float64)


def _shared(p: argparse.ArgumentParser, data_required: bool = True) -> None:
    p.add_argument("--data", required=data_required, help="capacity CSV (cell_id,cycle,capacity_ah)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--latent", type=_pos_int, default=2, help="number of latent functions")
    p.add_argument("--restarts", type=_pos_int, default=10)
    p.add_argument("--max-iterations", type=_pos_int, default=500)
    p.add_argument("--stride", type=_pos_int, default=None, help="training downsample stride (3)")
    p.add_argument("--phase", type=_nonneg_int, default=None, help="training downsample phase (0)")
    p.add_argument("--out")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="cellgp", description="Multi-output convolved GP capacity forecasting")
    parser.add_argument("--version", action="version", version=f"cellgp {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("fit", help="fit a multi-output model and save it")
    _shared(p)
    p.add_argument("--scenario", help="train on a scenario split: a, b, c or a JSON file")

    p = sub.add_parser("forecast", help="forecast one cell from a saved model")
    p.add_argument("--model", required=True)
    p.add_argument("--cell", required=True)
    p.add_argument("--cycles", required=True, help="inclusive range A..B")
    p.add_argument("--data", help="optional capacity CSV used to fill the truth column")
    p.add_argument("--noise", action="store_true", help="include measurement noise in stddev")
    p.add_argument("--out")

    p = sub.add_parser("bench", help="run a hide-the-tail scenario for MCGP and IGP")
    _shared(p)
    p.add_argument("--scenario", required=True, help="a, b, c or a JSON scenario file")
    p.add_argument("--models", default=",".join(MODELS), help="comma list of mcgp, igp_linear")
    return parser


def _flag_echo(args: argparse.Namespace) -> str:
    items = [f"--{k.replace('_', '-')}={v}" for k, v in sorted(vars(args).items())
             if k not in ("command", "verbose") and v is not None]
    return f"command: {args.command} " + " ".join(items)


def _resolve_scenario(name: str, stride, phase):
    if name in BUILTIN_SCENARIOS:
        sc = BUILTIN_SCENARIOS[name]
    elif os.path.isfile(name):
        sc = load_scenario(name)
    else:
        raise UsageError(f"unknown scenario {name!r}: use a, b, c or a scenario JSON file")
    return sc.with_downsampling(stride if stride is not None else sc.downsample_stride,
                                phase if phase is not None else sc.downsample_phase)


def _check_downsampling(args) -> tuple[int, int]:
    stride = 3 if args.stride is None else args.stride
    phase = 0 if args.phase is None else args.phase
    if phase >= stride:
        raise UsageError(f"--phase {phase} must be smaller than --stride {stride}")
    return stride, phase


def _write(path: str | None, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
        return
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _cfg(args) -> OptimizerConfig:
    return OptimizerConfig(max_iterations=args.max_iterations, restarts=args.restarts,
                           seed=args.seed)


def cmd_fit(args) -> int:
    if args.out is None:
        raise UsageError("fit needs --out")
    stride, phase = _check_downsampling(args)
    series = load_csv(args.data)
    if not series:
        raise DataError(f"{args.data} contains no observations")
    if args.scenario:
        sc = _resolve_scenario(args.scenario, args.stride, args.phase)
        train, _ = build_scenario(series, sc)
    else:
        train = TrainingSet.from_series(downsample(s, stride, phase) for s in series)
    model = mcgp_fit(train, R=args.latent, restarts=args.restarts, seed=args.seed, cfg=_cfg(args))
    model.metadata["header"] = [f"cellgp {__version__}", _flag_echo(args)]
    save_model(model, args.out)
    r = model.fit_report
    print(f"cells: {','.join(train.cells)}  training points: {train.T}")
    print(f"deviance {r.final_deviance:.6e}  log-likelihood {r.final_loglik:.6e}")
    print(f"iterations {r.iterations} ({r.termination}), restarts converged "
          f"{r.restarts_converged}/{r.restarts_used}, jitter {r.jitter_used:.1e}")
    print(f"model written to {args.out}")
    return 0


def cmd_forecast(args) -> int:
    cycles = parse_cycles(args.cycles)
    try:
        model = load_model(args.model)
    except OSError as exc:
        raise DataError(f"cannot read model: {exc}") from None
    pred = model.predict(args.cell, cycles, include_noise=args.noise)
    truth = None
    if args.data:
        by_id = {s.cell_id: s for s in load_csv(args.data)}
        if args.cell in by_id:
            s = by_id[args.cell]
            lookup = dict(zip(s.cycles.tolist(), s.capacities.tolist()))
            truth = [lookup.get(int(c)) for c in cycles]
    dump = ForecastDump.from_prediction(pred)
    if truth is not None:
        dump.truth = truth
    _write(args.out, dump.to_csv([f"cellgp {__version__}", _flag_echo(args)]))
    return 0


def cmd_bench(args) -> int:
    models = [m.strip().lower() for m in args.models.split(",") if m.strip()]
    models = ["igp_linear" if m == "igp" else m for m in models]
    bad = [m for m in models if m not in MODELS]
    if bad or not models:
        raise UsageError(f"unknown model(s) {bad}; choose from {', '.join(MODELS)}")
    sc = _resolve_scenario(args.scenario, args.stride, args.phase)
    series = load_csv(args.data)
    report = run_scenario(series, sc, models, R=args.latent, cfg=_cfg(args))
    header = [f"cellgp {__version__}", _flag_echo(args)]
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        _write(os.path.join(args.out, "report.txt"), report.dumps(header))
        for name, dump in report.forecasts.items():
            _write(os.path.join(args.out, f"forecast_{name}.csv"),
                   dump.to_csv(header + [f"model: {name}", f"cell: {sc.target_cell}"]))
    print(report.format_table())
    return 0


COMMANDS = {"fit": cmd_fit, "forecast": cmd_forecast, "bench": cmd_bench}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"cellgp: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NotPositiveDefinite, OptimizerFailed, ObjectiveFailure) as exc:
        print(f"cellgp: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (DataError, UnknownCell, ModelFormatError) as exc:
        print(f"cellgp: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"cellgp: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except CellGPError as exc:
        print(f"cellgp: error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
