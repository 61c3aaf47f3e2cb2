"""
Report rendering: machine-readable JSON, human-readable text and TSV tables.

Both renderings print floats with repr(), so every number in report.txt is
character-identical to the one in report.json, and repeated runs are byte-stable.
"""

import json
import logging
import math
import os
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional

import numpy as np
import pandas as pd

from config import CLI_CONFIG

logger = logging.getLogger(__name__)

NULL_SENTINEL = "null"   # vanished rates and other non-finite values, JSON and TSV alike


@dataclass
class ReportDocument:
    command: str
    inputs: Dict[str, Any] = field(default_factory=dict)
    results: Dict[str, Any] = field(default_factory=dict)
    warnings: List[str] = field(default_factory=list)
    table: Optional[pd.DataFrame] = None
    table_name: str = CLI_CONFIG['table_tsv']
    table_comment: str = ""

    def as_dict(self) -> Dict[str, Any]:
        return plain({
            'command': self.command,
            'inputs': self.inputs,
            'results': self.results,
            'warnings': self.warnings,
        })


def plain(value: Any) -> Any:
    """JSON-safe copy: numpy scalars to Python, enums to values, non-finite floats to None"""
    if isinstance(value, dict):
        return {str(k): plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return [plain(v) for v in value.tolist()]
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else None
    return value


def render_json(report: ReportDocument) -> str:
    return json.dumps(report.as_dict(), sort_keys=True, indent=2, allow_nan=False) + "\n"


def _text_lines(value: Any, indent: int) -> List[str]:
    pad = "  " * indent
    lines = []
    if isinstance(value, dict):
        for key in sorted(value):
            item = value[key]
            if isinstance(item, (dict, list)) and item:
                lines.append(f"{pad}{key}:")
                lines.extend(_text_lines(item, indent + 1))
            else:
                lines.append(f"{pad}{key}: {_scalar(item)}")
    elif isinstance(value, list):
        for item in value:
            if isinstance(item, (dict, list)) and item:
                lines.append(f"{pad}-")
                lines.extend(_text_lines(item, indent + 1))
            else:
                lines.append(f"{pad}- {_scalar(item)}")
    else:
        lines.append(f"{pad}{_scalar(value)}")
    return lines


def _scalar(value: Any) -> str:
    if value is None:
        return "n/a"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (dict, list)):
        return "(none)"
    return str(value)


def render_text(report: ReportDocument) -> str:
    data = report.as_dict()
    lines = [f"relaxkit {data['command']}", "=" * (9 + len(data['command']))]
    for section in ('inputs', 'results'):
        lines.append("")
        lines.append(f"[{section}]")
        lines.extend(_text_lines(data[section], 1))
    lines.append("")
    lines.append("[warnings]")
    if data['warnings']:
        lines.extend(f"  - {w}" for w in data['warnings'])
    else:
        lines.append("  (none)")
    return "\n".join(lines) + "\n"


def render_tsv(frame: pd.DataFrame, comment: str = "") -> str:
    """Tab-separated table; non-finite cells are written as null, as in report.json"""
    finite = frame.replace([np.inf, -np.inf], np.nan)
    body = finite.to_csv(sep='\t', index=False, lineterminator='\n', na_rep=NULL_SENTINEL)
    return (f"# {comment}\n" if comment else "") + body


def write_report(report: ReportDocument, out_dir: str) -> Dict[str, str]:
    """Write report.json, report.txt and the optional table; returns the written paths"""
    os.makedirs(out_dir, exist_ok=True)
    outputs = {
        'json': os.path.join(out_dir, CLI_CONFIG['report_json']),
        'text': os.path.join(out_dir, CLI_CONFIG['report_text']),
    }
    contents = {'json': render_json(report), 'text': render_text(report)}
    if report.table is not None:
        outputs['table'] = os.path.join(out_dir, report.table_name)
        contents['table'] = render_tsv(report.table, report.table_comment)

    for key, path in outputs.items():
        with open(path, 'w', encoding='utf-8', newline='') as f:
            f.write(contents[key])
    logger.info(f"💾 Report written to {out_dir}")
    return outputs
