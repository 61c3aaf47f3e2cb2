"""
CSV ingestion for relaxation series and echo traces.

Files are comma-separated with a header row; '#' comment lines and blank lines are
ignored. Diagnostics name the file and the 1-based line number in that file.
"""

import io
import logging
import os
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from config import FIT_CONFIG, HyperfineLine, Quantity
from exceptions import DataFileError, InputError
from fitting import EchoPoint, EchoTrace, RelaxationDataset, RelaxationPoint
from physconst import CONSTANTS

logger = logging.getLogger(__name__)

RELAXATION_COLUMNS = ('temperature_K', 'time_us', 'sigma_us')
ECHO_COLUMNS = ('tau_us', 'amplitude', 'sigma')


def _read_table(path: str) -> Tuple[pd.DataFrame, int, List[int]]:
    """DataFrame of string cells, the header line number and the line number of every data row"""
    if not os.path.exists(path):
        raise DataFileError("file not found", path)
    try:
        with open(path, 'r', encoding='utf-8') as f:
            raw_lines = f.read().splitlines()
    except (OSError, UnicodeDecodeError) as e:
        raise DataFileError(f"cannot read file ({e})", path)

    kept, line_numbers = [], []
    for number, line in enumerate(raw_lines, start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith('#'):
            continue
        kept.append(stripped)
        line_numbers.append(number)

    if not kept:
        raise DataFileError("file is empty", path)
    if len(kept) == 1:
        raise DataFileError("no data rows after header", path, line_numbers[0])

    n_fields = len(kept[0].split(','))
    for line, number in zip(kept[1:], line_numbers[1:]):
        found = len(line.split(','))
        if found > n_fields:
            raise DataFileError(f"expected {n_fields} fields, found {found}", path, number)

    try:
        frame = pd.read_csv(io.StringIO("\n".join(kept)), dtype=str, skipinitialspace=True,
                            keep_default_na=False)
    except pd.errors.ParserError as e:
        raise DataFileError(f"malformed CSV ({e})", path)
    frame.columns = [str(c).strip() for c in frame.columns]
    return frame, line_numbers[0], line_numbers[1:]


def _require_columns(frame: pd.DataFrame, required: Tuple[str, ...], path: str, header_line: int):
    missing = [c for c in required if c not in frame.columns]
    if missing:
        raise DataFileError(f"missing column(s): {', '.join(missing)}", path, header_line)


def _cell(frame: pd.DataFrame, column: str, index: int, path: str, row: int,
          positive: bool = False, non_negative: bool = False) -> float:
    text = _text(frame, column, index)
    try:
        value = float(text)
    except ValueError:
        raise DataFileError(f"column {column}: '{text}' is not a number", path, row)
    if not np.isfinite(value):
        raise DataFileError(f"column {column}: value must be finite", path, row)
    if positive and value <= 0:
        raise DataFileError(f"column {column}: value must be positive, got {text}", path, row)
    if non_negative and value < 0:
        raise DataFileError(f"column {column}: value must be non-negative, got {text}", path, row)
    return value


def _text(frame: pd.DataFrame, column: str, index: int) -> str:
    value = frame.at[index, column]
    return '' if pd.isna(value) else str(value).strip()


def _has_value(frame: pd.DataFrame, column: str, index: int) -> bool:
    return column in frame.columns and _text(frame, column, index) != ''


def load_relaxation_csv(path: str, quantity: Quantity = Quantity.T2,
                        label: Optional[str] = None) -> RelaxationDataset:
    """Read temperature_K,time_us,sigma_us[,line]; SI output sorted by temperature"""
    frame, header_line, rows = _read_table(path)
    _require_columns(frame, RELAXATION_COLUMNS[:2], path, header_line)
    if 'sigma_us' not in frame.columns:
        logger.warning(f"⚠️ {path}: no sigma_us column, using {FIT_CONFIG['default_sigma_fraction']:.0%} of each time")

    points: List[RelaxationPoint] = []
    lines = set()
    for index, row in enumerate(rows):
        T = _cell(frame, 'temperature_K', index, path, row, positive=True)
        time_us = _cell(frame, 'time_us', index, path, row, positive=True)
        if _has_value(frame, 'sigma_us', index):
            sigma_us = _cell(frame, 'sigma_us', index, path, row, positive=True)
        else:
            sigma_us = FIT_CONFIG['default_sigma_fraction'] * time_us
        if _has_value(frame, 'line', index):
            value = _text(frame, "line", index)
            try:
                lines.add(HyperfineLine(value))
            except ValueError:
                known = ', '.join(h.value for h in HyperfineLine)
                raise DataFileError(f"column line: unknown hyperfine line '{value}' (known: {known})", path, row)
        points.append(RelaxationPoint(T, time_us * CONSTANTS.s_per_us, sigma_us * CONSTANTS.s_per_us))

    if len(lines) > 1:
        raise DataFileError("a file may hold a single hyperfine line", path)

    dataset = RelaxationDataset(
        quantity=quantity,
        points=points,
        label=label or os.path.splitext(os.path.basename(path))[0],
        hyperfine_line=lines.pop() if lines else None,
    )
    logger.info(f"📂 Loaded {len(dataset)} {quantity.value} points from {path}")
    return dataset


def load_echo_csv(path: str, label: Optional[str] = None) -> EchoTrace:
    """Read tau_us,amplitude,sigma; amplitudes may be negative"""
    frame, header_line, rows = _read_table(path)
    _require_columns(frame, ECHO_COLUMNS[:2], path, header_line)

    taus: Dict[float, int] = {}
    parsed = []
    for index, row in enumerate(rows):
        tau_us = _cell(frame, 'tau_us', index, path, row, non_negative=True)
        amplitude = _cell(frame, 'amplitude', index, path, row)
        sigma = _cell(frame, 'sigma', index, path, row, positive=True) if _has_value(frame, 'sigma', index) else None
        if tau_us in taus:
            raise DataFileError(f"duplicate tau_us {tau_us} (first at row {taus[tau_us]})", path, row)
        taus[tau_us] = row
        parsed.append((tau_us, amplitude, sigma))

    default_sigma = FIT_CONFIG['default_sigma_fraction'] * max(abs(a) for _, a, _ in parsed)
    if any(s is None for _, _, s in parsed):
        if default_sigma <= 0:
            raise DataFileError("all amplitudes are zero and sigma is missing", path)
        logger.warning(f"⚠️ {path}: missing sigma, using {default_sigma:.6g}")

    parsed.sort(key=lambda item: item[0])
    try:
        trace = EchoTrace(
            points=[EchoPoint(tau * CONSTANTS.s_per_us, a, s if s is not None else default_sigma)
                    for tau, a, s in parsed],
            label=label or os.path.splitext(os.path.basename(path))[0],
        )
    except InputError as e:
        raise DataFileError(str(e), path)
    logger.info(f"📂 Loaded echo trace with {len(trace)} points from {path}")
    return trace


def write_relaxation_csv(path: str, dataset: RelaxationDataset, comment: str = ""):
    """Inverse of load_relaxation_csv, used for synthetic fixtures"""
    frame = pd.DataFrame({
        'temperature_K': dataset.temperatures,
        'time_us': dataset.times / CONSTANTS.s_per_us,
        'sigma_us': dataset.sigmas / CONSTANTS.s_per_us,
    })
    _write_csv(path, frame, comment)


def write_echo_csv(path: str, trace: EchoTrace, comment: str = ""):
    frame = pd.DataFrame({
        'tau_us': trace.taus / CONSTANTS.s_per_us,
        'amplitude': trace.amplitudes,
        'sigma': trace.sigmas,
    })
    _write_csv(path, frame, comment)


def _write_csv(path: str, frame: pd.DataFrame, comment: str):
    with open(path, 'w', encoding='utf-8', newline='') as f:
        if comment:
            f.write(f"# {comment}\n")
        frame.to_csv(f, index=False, float_format='%.17g')
