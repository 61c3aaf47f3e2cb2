# -*- coding: utf-8 -*-
"""
Command-line surface: predict, fit-orbach, fit-diffusion, fit-echo, regime,
convert and simulate.

Exit codes: 0 success, 2 input or configuration error, 3 fit did not converge.
"""

import argparse
import logging
import sys
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from config import CLI_CONFIG, FIT_CONFIG, Quantity, channel_names, load_config_document
from datasets import load_echo_csv, load_relaxation_csv, write_echo_csv, write_relaxation_csv
from echodecay import DecayKind, classify_regime, concentration_criterion, crossover_diffusion, scaling_exponent
from exceptions import InputError, RelaxkitError
from fitting import FitOutcome, fit_diffusion, fit_echo, fit_orbach
from mechanisms import DiffusionChannel, compose_channels, rates_to_times
from model_factory import build_channels, build_diffusion_fit, build_echo_model, echo_settings, regime_inputs
from physconst import CONSTANTS, convert
from reporting import ReportDocument, render_text, write_report
from synthetic import simulate_echo, simulate_relaxation

logger = logging.getLogger(__name__)

EXIT_CODES = CLI_CONFIG['exit_codes']


# === ARGUMENT HELPERS ===

def parse_grid(text: str, positive: bool = True) -> np.ndarray:
    """'lo:hi:n' to n evenly spaced values from lo to hi inclusive"""
    parts = text.split(':')
    if len(parts) != 3:
        raise InputError(f"grid '{text}' must have the form lo:hi:n")
    try:
        lo, hi, n = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise InputError(f"grid '{text}': lo and hi must be numbers and n an integer")
    if n < 1:
        raise InputError(f"grid '{text}': n must be at least 1")
    if hi < lo:
        raise InputError(f"grid '{text}': hi must not be below lo")
    if positive and lo <= 0:
        raise InputError(f"grid '{text}': values must be positive")
    if n == 1:
        return np.array([lo])
    return np.linspace(lo, hi, n)


def _parse_assignments(pairs: Sequence[str]) -> Dict[str, float]:
    values = {}
    for pair in pairs or []:
        key, sep, text = pair.partition('=')
        if not sep:
            raise InputError(f"'{pair}' must have the form name=value")
        try:
            values[key.strip()] = float(text)
        except ValueError:
            raise InputError(f"'{pair}': value is not a number")
    return values


def _parse_scaling_pairs(pairs: Sequence[str]) -> Tuple[List[float], List[float]]:
    T2s, Ds = [], []
    for pair in pairs:
        left, sep, right = pair.partition('=')
        try:
            if not sep:
                raise ValueError
            T2s.append(float(left))
            Ds.append(float(right))
        except ValueError:
            raise InputError(f"--scaling '{pair}' must have the form T2_us=D_cm2_s")
    return T2s, Ds


def _outcome_results(outcome: FitOutcome) -> Dict:
    results = outcome.as_dict()
    results.pop('warnings')
    return results


def _fit_exit_code(outcome: FitOutcome) -> int:
    return EXIT_CODES['success'] if outcome.converged else EXIT_CODES['not_converged']


# === COMMANDS ===

def cmd_predict(args) -> Tuple[ReportDocument, int]:
    """Composite and per-channel T1/T2 on a temperature grid"""
    document = load_config_document(args.config)
    channels = build_channels(document)
    names = channel_names(document)
    temps = parse_grid(args.temps)

    rows = []
    out_of_range: Dict[str, List[float]] = {}
    for T in temps:
        T = float(T)
        total = rates_to_times(T, compose_channels(channels, T))
        row = {'temperature_K': T,
               'T1_total_us': total.T1 / CONSTANTS.s_per_us,
               'T2_total_us': total.T2 / CONSTANTS.s_per_us}
        for name, channel in zip(names, channels):
            times = rates_to_times(T, channel.rates(T))
            row[f'T1_{name}_us'] = times.T1 / CONSTANTS.s_per_us
            row[f'T2_{name}_us'] = times.T2 / CONSTANTS.s_per_us
            if isinstance(channel, DiffusionChannel):
                mech = channel.mechanism
                if not (mech.total_diffusion(T).in_range and mech.concentration.evaluate(T).in_range):
                    out_of_range.setdefault(name, []).append(T)
        rows.append(row)

    warnings = [f"channel {name}: {len(ts)} temperature(s) outside solvent model validity ({ts[0]:g} .. {ts[-1]:g} K)"
                for name, ts in out_of_range.items()]
    table = pd.DataFrame(rows)
    report = ReportDocument(
        command='predict',
        inputs={'config': args.config, 'temps': args.temps, 'field_B0_T': document['field_B0'],
                'channels': names},
        results={'rows': rows},
        warnings=warnings,
        table=table,
        table_name=CLI_CONFIG['plot_tsv'],
        table_comment='relaxkit predict: times in microseconds, null where a rate vanishes',
    )
    logger.info(f"📈 Predicted {len(rows)} temperatures for {len(channels)} channel(s)")
    return report, EXIT_CODES['success']


def cmd_fit_orbach(args) -> Tuple[ReportDocument, int]:
    document = load_config_document(args.config)
    dataset = load_relaxation_csv(args.data, Quantity.T1)
    outcome = fit_orbach(dataset, weighted=bool(document['fit'].get('weighted', FIT_CONFIG['weighted'])))
    report = ReportDocument(
        command='fit-orbach',
        inputs={'config': args.config, 'data': args.data, 'points': len(dataset)},
        results=_outcome_results(outcome),
        warnings=outcome.warnings,
    )
    return report, _fit_exit_code(outcome)


def cmd_fit_diffusion(args) -> Tuple[ReportDocument, int]:
    document = load_config_document(args.config)
    quantity = Quantity(args.quantity)
    datasets = [load_relaxation_csv(path, quantity) for path in args.data]
    spec = build_diffusion_fit(document, datasets)
    outcome = fit_diffusion(spec)

    table = pd.DataFrame(outcome.derived.get('diffusion_table', []))
    report = ReportDocument(
        command='fit-diffusion',
        inputs={'config': args.config, 'data': list(args.data), 'mode': spec.mode,
                'quantity': quantity.value, 'labels': [t.dataset.label for t in spec.targets]},
        results=_outcome_results(outcome),
        warnings=outcome.warnings,
        table=table if not table.empty else None,
        table_comment='relaxkit fit-diffusion: diffusion coefficients in cm^2/s',
    )
    return report, _fit_exit_code(outcome)


def cmd_fit_echo(args) -> Tuple[ReportDocument, int]:
    document = load_config_document(args.config)
    kind, fixed = echo_settings(document)
    if args.kind:
        kind = DecayKind(args.kind)
    for key, value in _parse_assignments(args.fix).items():
        fixed[key] = value * CONSTANTS.s_per_us if key.startswith('T2') else value
    trace = load_echo_csv(args.data)
    outcome = fit_echo(trace, kind, weighted=bool(document['fit'].get('weighted', FIT_CONFIG['weighted'])),
                       fixed=fixed)
    report = ReportDocument(
        command='fit-echo',
        inputs={'config': args.config, 'data': args.data, 'kind': kind.value, 'fixed': fixed,
                'points': len(trace)},
        results=_outcome_results(outcome),
        warnings=outcome.warnings,
    )
    return report, _fit_exit_code(outcome)


def cmd_regime(args) -> Tuple[ReportDocument, int]:
    """Spectral-diffusion regime at a given D, optional scaling exponent from (T2, D) pairs"""
    document = load_config_document(args.config)
    species, d, c = regime_inputs(document)
    if args.D < 0:
        raise InputError(f"--D must be non-negative, got {args.D}")
    D = args.D * CONSTANTS.m2_s_per_cm2_s
    D_min = crossover_diffusion(species, d)
    c_d3, _ = concentration_criterion(c, d)
    regime = classify_regime(D, D_min, c_d3)

    results = regime.as_dict()
    results.update({
        'species': species.label,
        'd_nm': d / CONSTANTS.m_per_nm,
        'D_cm2_s': args.D,
        'D_min_cm2_s': D_min / CONSTANTS.m2_s_per_cm2_s,
        'c_per_cm3': c / CONSTANTS.per_m3_per_per_cm3,
    })
    warnings = []
    if not regime.low_concentration:
        warnings.append(f"c*d^3 = {c_d3:.3g}: bath is not dilute, regime boundaries are approximate")

    if args.scaling:
        T2s, Ds = _parse_scaling_pairs(args.scaling)
        p, stderr = scaling_exponent(T2s, Ds)
        results['scaling_exponent'] = p
        results['scaling_exponent_stderr'] = stderr

    report = ReportDocument(
        command='regime',
        inputs={'config': args.config, 'D_cm2_s': args.D, 'scaling': list(args.scaling or [])},
        results=results,
        warnings=warnings,
    )
    logger.info(f"🧊 D = {args.D:g} cm^2/s classified as {regime.regime.value}")
    return report, EXIT_CODES['success']


def cmd_convert(args) -> Tuple[ReportDocument, int]:
    value = convert(args.value, args.from_unit, args.to_unit)
    report = ReportDocument(
        command='convert',
        inputs={'value': args.value, 'from': args.from_unit, 'to': args.to_unit},
        results={'value': value, 'unit': args.to_unit},
    )
    return report, EXIT_CODES['success']


def cmd_simulate(args) -> Tuple[ReportDocument, int]:
    """Synthetic CSV fixture from the configured forward model"""
    document = load_config_document(args.config)
    seed = args.seed if args.seed is not None else document['fit'].get('seed')
    if args.kind == 'echo':
        model = build_echo_model(document)
        taus = parse_grid(args.taus, positive=False) * CONSTANTS.s_per_us
        if taus[0] < 0:
            raise InputError("--taus values must be non-negative")
        trace = simulate_echo(model, taus, args.noise, seed)
        write_echo_csv(args.output, trace, f"relaxkit simulate echo noise={args.noise!r} seed={seed}")
        points = len(trace)
    else:
        channels = build_channels(document)
        quantity = Quantity(args.quantity)
        dataset = simulate_relaxation(channels, parse_grid(args.temps), quantity, args.noise, seed)
        write_relaxation_csv(args.output, dataset,
                             f"relaxkit simulate {quantity.value} noise={args.noise!r} seed={seed}")
        points = len(dataset)

    report = ReportDocument(
        command='simulate',
        inputs={'config': args.config, 'kind': args.kind, 'noise': args.noise, 'seed': seed},
        results={'output': args.output, 'points': points},
    )
    return report, EXIT_CODES['success']


# === PARSER ===

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='relaxkit', description='Electron-spin relaxation modelling and fitting')
    parser.add_argument('--log-level', default=None, help='override the configured log level')
    parser.add_argument('--log-json', action='store_true', help='emit logs as JSON lines')
    sub = parser.add_subparsers(dest='command', required=True)

    def with_output(p):
        p.add_argument('--out', default=None, help='directory for report.json, report.txt and tables')

    p = sub.add_parser('predict', help='forward-model T1/T2 over a temperature grid')
    p.add_argument('--config', required=True)
    p.add_argument('--temps', default=CLI_CONFIG['default_temperature_grid'], help='lo:hi:n in K')
    with_output(p)
    p.set_defaults(handler=cmd_predict)

    p = sub.add_parser('fit-orbach', help='Arrhenius fit of T1 data')
    p.add_argument('--config', default=None)
    p.add_argument('--data', required=True, help='CSV temperature_K,time_us,sigma_us')
    with_output(p)
    p.set_defaults(handler=cmd_fit_orbach)

    p = sub.add_parser('fit-diffusion', help='joint diffusion-model fit across datasets')
    p.add_argument('--config', required=True)
    p.add_argument('--data', action='append', required=True, help='CSV per dataset, in fit.diffusion.targets order')
    p.add_argument('--quantity', choices=[q.value for q in Quantity], default=Quantity.T2.value)
    with_output(p)
    p.set_defaults(handler=cmd_fit_diffusion)

    p = sub.add_parser('fit-echo', help='fit an echo-decay trace')
    p.add_argument('--config', default=None)
    p.add_argument('--data', required=True, help='CSV tau_us,amplitude,sigma')
    p.add_argument('--kind', choices=[k.value for k in DecayKind], default=None)
    p.add_argument('--fix', action='append', default=[], help='name=value, times in us (e.g. n=1.125)')
    with_output(p)
    p.set_defaults(handler=cmd_fit_echo)

    p = sub.add_parser('regime', help='classify the spectral-diffusion regime')
    p.add_argument('--config', required=True)
    p.add_argument('--D', type=float, required=True, help='diffusion coefficient in cm^2/s')
    p.add_argument('--scaling', action='append', default=[], help='T2_us=D_cm2_s pair (repeat)')
    with_output(p)
    p.set_defaults(handler=cmd_regime)

    p = sub.add_parser('convert', help='unit conversion')
    p.add_argument('value', type=float)
    p.add_argument('from_unit')
    p.add_argument('to_unit')
    with_output(p)
    p.set_defaults(handler=cmd_convert)

    p = sub.add_parser('simulate', help='write a synthetic CSV from the forward model')
    p.add_argument('--config', required=True)
    p.add_argument('--kind', choices=['relaxation', 'echo'], default='relaxation')
    p.add_argument('--quantity', choices=[q.value for q in Quantity], default=Quantity.T2.value)
    p.add_argument('--temps', default=CLI_CONFIG['default_temperature_grid'], help='lo:hi:n in K')
    p.add_argument('--taus', default='0:1000:50', help='lo:hi:n in us')
    p.add_argument('--noise', type=float, default=0.0)
    p.add_argument('--seed', type=int, default=None)
    p.add_argument('--output', required=True, help='CSV path')
    with_output(p)
    p.set_defaults(handler=cmd_simulate)

    return parser


def run(args) -> int:
    """Dispatch a parsed command and emit its report; never raises"""
    try:
        report, code = args.handler(args)
    except RelaxkitError as e:
        logger.error(f"❌ {args.command}: {e}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CODES['input_error']
    except Exception as e:
        logger.exception(f"💥 {args.command} failed unexpectedly")
        print(f"error: {args.command} failed: {e}", file=sys.stderr)
        return EXIT_CODES['input_error']

    if args.out:
        try:
            write_report(report, args.out)
        except OSError as e:
            print(f"error: cannot write report to {args.out}: {e}", file=sys.stderr)
            return EXIT_CODES['input_error']
    sys.stdout.write(render_text(report))
    if code == EXIT_CODES['not_converged']:
        print(f"warning: {args.command} did not converge", file=sys.stderr)
    return code


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    return run(args)
