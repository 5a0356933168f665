#!/usr/bin/env python3
"""
Sub-Nyquist Photonic Blind Source Separation Simulator - Main Entry Point
"""
import argparse
import json
import logging
import os
import sys
from typing import Optional

from dotenv import load_dotenv

from src.api.pipeline import run_pipeline
from src.api.sweep import emit_sweep, run_sweep
from src.core.config import load_config, parse_si
from src.core.errors import ConfigError, SeparationError
from src.core.version import get_system_info, get_version
from src.data.alphabets import SourceAlphabets
from src.utils.reporting import emit_curves, summarize_report

logger = logging.getLogger(__name__)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description='Sub-Nyquist photonic blind source separation simulator',
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  python main.py run --config scenarios/acceptance.json --out results/acceptance
  python main.py sweep --config scenarios/acceptance.json --ratios 1e-2,1e-3,1e-4,1e-5 --trials 32 --out results/sweep
  python main.py validate --config scenario_config.json
  python main.py info
        """
    )
    parser.add_argument('--verbose', '-v', action='count', default=0,
                        help='Log progress (-v) or fitted parameters too (-vv)')
    parser.add_argument('--version', action='version', version=f'%(prog)s {get_version()}')
    commands = parser.add_subparsers(dest='command', required=True)

    run = commands.add_parser('run', help='Run one scenario end to end')
    run.add_argument('--config', '-c', required=True, help='Scenario JSON file')
    run.add_argument('--out', '-o', help='Directory for moment2.csv, moment4.csv, eye.csv and report.json')
    run.add_argument('--seed', type=int, help='Override the master seed (or set SUBNYQ_SEED)')
    run.add_argument('--timings', action='store_true', help='Include wall-clock timings in report.json')

    sweep = commands.add_parser('sweep', help='Sweep the sampling ratio with seeded trials')
    sweep.add_argument('--config', '-c', required=True, help='Base scenario JSON file')
    sweep.add_argument('--ratios', required=True, help='Comma-separated sampling ratios, e.g. 1e-2,1e-3')
    sweep.add_argument('--trials', type=int, default=8, help='Seeded trials per ratio')
    sweep.add_argument('--workers', type=int, default=1, help='Concurrent trials')
    sweep.add_argument('--out', '-o', help='Directory for sweep.csv and trials.csv')
    sweep.add_argument('--seed', type=int, help='Override the master seed (or set SUBNYQ_SEED)')

    validate = commands.add_parser('validate', help='Parse and check a scenario without running it')
    validate.add_argument('--config', '-c', required=True, help='Scenario JSON file')

    commands.add_parser('info', help='Show version and supported features')
    return parser


def configure_logging(verbosity: int):
    level = os.getenv('SUBNYQ_LOG_LEVEL', 'WARNING').upper()
    if verbosity == 1:
        level = 'INFO'
    elif verbosity >= 2:
        level = 'DEBUG'
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format='%(asctime)s %(levelname)s %(name)s: %(message)s')


def seed_override(args) -> Optional[int]:
    if getattr(args, 'seed', None) is not None:
        return args.seed
    env_seed = os.getenv('SUBNYQ_SEED')
    if env_seed is None or env_seed == '':
        return None
    try:
        seed = int(env_seed)
    except ValueError:
        raise ConfigError(f"SUBNYQ_SEED: expected an unsigned integer, got {env_seed!r}")
    if seed < 0:
        raise ConfigError(f"SUBNYQ_SEED: expected an unsigned integer, got {env_seed!r}")
    return seed


def parse_ratios(text: str):
    ratios = [parse_si(part.strip(), 'ratios') for part in text.split(',') if part.strip()]
    if not ratios:
        raise ConfigError("ratios: at least one sampling ratio is required")
    return ratios


def command_run(args) -> int:
    cfg = load_config(args.config, seed_override(args))
    print(f"Running scenario {args.config} (seed {cfg.master_seed})")
    print("=" * 60)
    report = run_pipeline(cfg)
    display_run_results(report)
    if args.out:
        paths = emit_curves(report, args.out, include_timings=args.timings)
        print(f"\nResults saved to: {', '.join(str(p) for p in paths)}")
    return report.exit_code


def command_sweep(args) -> int:
    cfg = load_config(args.config, seed_override(args))
    ratios = parse_ratios(args.ratios)
    print(f"Sweeping {len(ratios)} sampling ratio(s), {args.trials} trial(s) each")
    print("=" * 60)
    result = run_sweep(cfg, ratios, args.trials, args.workers)
    display_sweep_results(result)
    if args.out:
        paths = emit_sweep(result, args.out)
        print(f"\nResults saved to: {', '.join(str(p) for p in paths)}")
    return 0


def command_validate(args) -> int:
    cfg = load_config(args.config, seed_override(args))
    print(f"Scenario {args.config} is valid")
    alphabets = SourceAlphabets()
    soi_name = alphabets.get_source_info(cfg.soi.kind.value)["name"]
    int_name = alphabets.get_source_info(cfg.interference.kind.value)["name"]
    print(f"  SOI: {soi_name} at {cfg.soi.rate_hz:.6g} Hz, rms {cfg.soi.rms:g}")
    print(f"  Interference: {int_name} at {cfg.interference.rate_hz:.6g} Hz, "
          f"rms {cfg.interference.rms:g}")
    print(f"  Mixing: {cfg.mixing.as_array().tolist()} "
          f"(det {cfg.mixing.determinant:.3g}, cond {cfg.mixing.condition_number:.3g})")
    print(f"  Pulses: {cfg.pulse.rep_rate_hz:.6g} Hz, {cfg.pulse.pulse_width_s:.3g} s {cfg.pulse.shape.value}")
    print(f"  Simulation: {cfg.n_samples} samples, master seed {cfg.master_seed}")
    return 0


def command_info(args) -> int:
    print(json.dumps(get_system_info(), indent=2))
    return 0


COMMANDS = {
    'run': command_run,
    'sweep': command_sweep,
    'validate': command_validate,
    'info': command_info,
}


def main(argv=None) -> int:
    """Main entry point for the separation simulator"""

    # Load environment variables
    load_dotenv()

    args = build_parser().parse_args(argv)
    configure_logging(args.verbose)

    try:
        return COMMANDS[args.command](args)
    except SeparationError as e:
        print(f"Error: {e}", file=sys.stderr)
        return e.exit_code
    except KeyboardInterrupt:
        print("\nRun interrupted by user", file=sys.stderr)
        return 1


def display_run_results(report):
    """Display a run report in a readable format"""
    print(summarize_report(report))
    if report.moment2:
        print("\n2nd-order moment curve (theory vs estimated):")
        for row in report.moment2:
            theory = row.get('moment_theory')
            theory = f"{theory:.5g}" if theory is not None else "n/a"
            print(f"  theta={row['theta_deg']:6.1f}  theory={theory:>10}  estimated={row['moment_estimated']:.5g}")
    if report.moment4:
        print("\n4th-order moment curve of whitened samples (theory vs estimated):")
        for row in report.moment4:
            theory = row.get('moment_theory')
            theory = f"{theory:.5g}" if theory is not None else "n/a"
            print(f"  phi={row['phi_deg']:6.1f}  theory={theory:>10}  estimated={row['moment_estimated']:.5g}")


def display_sweep_results(result):
    """Display the per-ratio sweep table"""
    print(result.table.to_string(index=False, float_format=lambda v: f"{v:.4g}"))
    failures = int(result.table['failures'].sum())
    if failures:
        print(f"\n{failures} trial(s) did not complete cleanly; see trials.csv")
    print(f"\nMedian corr_soi monotone in ratio: {'yes' if result.is_monotone() else 'no'}")


if __name__ == "__main__":
    sys.exit(main())
