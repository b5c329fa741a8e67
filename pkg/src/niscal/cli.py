"""Command-line entry point: ``niscal {synthesize,fit-reflection,calibrate,range-study}``.

Exit codes: 0 success, 2 input or configuration error, 3 numerical or fit
failure.
"""

import argparse
import sys

from . import pipeline
from .calibration import PowerFitError
from .io import InputError
from .reflection import FitError
from .tunneling import QuadratureError

EXIT_INPUT = 2
EXIT_NUMERICAL = 3


def _pair(text):
    try:
        lo, hi = (float(x) for x in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected lo:hi, got {text!r}") from None
    if not lo < hi:
        raise argparse.ArgumentTypeError("lo must be below hi")
    return [lo, hi]


def _seed(text):
    value = int(text)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def build_parser():
    parser = argparse.ArgumentParser(
        prog="niscal",
        description="Amplifier-chain calibration with a voltage-biased SINIS junction.",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML run configuration")
    common.add_argument("--out", help="output directory (overrides output_dir)")
    common.add_argument("--seed", type=_seed, help="random seed (u64)")
    common.add_argument("--window", type=_pair, help="power-fit window lo:hi in units of 2Δ/e")
    common.add_argument("--band", type=_pair, help="integration band lo:hi in GHz")
    common.add_argument("--plot", action="store_true", help="also write SVG figures")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("fit-reflection", parents=[common], help="fit reflection traces, write rates.json")
    sub.add_parser("calibrate", parents=[common], help="fit the power curve, write report.json")
    sub.add_parser("synthesize", parents=[common], help="write synthetic reflection and power CSVs")
    sub.add_parser("range-study", parents=[common], help="Monte Carlo fitting-range study")
    return parser


def _overrides(args):
    out = {}
    if args.out is not None:
        out["output_dir"] = args.out
    if args.seed is not None:
        out["seed"] = args.seed
    cal = {}
    if args.window is not None:
        cal["window_gap_units"] = args.window
    if args.band is not None:
        cal["band_GHz"] = args.band
    if cal:
        out["calibration"] = cal
    return out


def run(args):
    cfg = pipeline.RunConfig.load(args.config, _overrides(args))
    if args.command == "fit-reflection":
        rates, _ = pipeline.fit_reflection(cfg)
        print(pipeline.format_rates(rates))
    elif args.command == "calibrate":
        result, _ = pipeline.calibrate_run(cfg, plot=args.plot)
        print(f"a = {result.a:.6e} W/V  (V = V_b/2)")
        print(f"G = {result.gain_dB:.3f} +/- {result.gain_sigma_dB:.3f} dB")
        print(f"T_amp = {result.noise_temperature:.3f} K")
    elif args.command == "synthesize":
        model = pipeline.synthesize(cfg)
        print(f"wrote synthetic data (G = {model.gain_dB:.2f} dB) to {cfg.output_dir}")
    elif args.command == "range-study":
        result = pipeline.range_study(cfg, plot=args.plot)
        print("upper_gap_units  mean_rel_error  mean_reported_sigma  n_failed")
        from .constants import bias_to_gap_units

        for u, e, s, n in zip(bias_to_gap_units(result.upper_bounds, cfg.gap), result.mean_rel_error,
                              result.mean_reported_sigma, result.n_failed):
            print(f"{u:15.3f}  {e:14.4f}  {s:19.4f}  {n:8d}")


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        run(args)
    except (pipeline.ConfigError, InputError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (FitError, PowerFitError, QuadratureError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return 0


if __name__ == "__main__":
    sys.exit(main())
