"""
Frostlab Reports Module
CSV/JSON emission and the ratio-stability criteria

This module provides:
- SCHEMAS: the header of every CSV the lab writes
- emit_report: results.csv (one file per schema when several appear) and summary.json
- Criteria over multi-scale runs: per-step ratio growth, log² growth and
  the classical L² stability window
- verify: re-derives ratios and pass flags from the raw columns of a results CSV
"""

import csv
import json
import logging
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any, Dict, List, NamedTuple, Sequence, Tuple, Union

from .errors import ConfigError
from .furstenberg import FURSTENBERG_COLUMNS
from .projector import REPORT_COLUMNS
from .sumproduct import EPSILON_SLACK, SUMPRODUCT_COLUMNS

logger = logging.getLogger(__name__)

SCHEMAS: Dict[str, Tuple[str, ...]] = {
    'bound': REPORT_COLUMNS,
    'energy': ('measure', 'level', 'quantity', 'exponent', 'value'),
    'gen': ('kind', 'level', 's', 'cells', 'audit_constant', 'audit_pass'),
    'furstenberg': FURSTENBERG_COLUMNS,
    'sumproduct': SUMPRODUCT_COLUMNS,
}

# Largest allowed ratio_{j+1}/ratio_j between consecutive levels
RATIO_STEP_LIMIT = 1.5
L2_WINDOW = 4.0
RELATIVE_TOLERANCE = 1e-9


class ReportRow(NamedTuple):
    schema: str
    order: int
    level: int
    values: Dict[str, Any]


@dataclass
class Criterion:
    experiment: str
    name: str
    passed: bool
    detail: str
    advisory: bool = False


def format_value(value: Any) -> str:
    """Deterministic text for CSV cells"""
    if value is None:
        return ''
    if isinstance(value, bool):
        return 'true' if value else 'false'
    if isinstance(value, float):
        if math.isnan(value):
            return 'nan'
        if math.isinf(value):
            return 'inf' if value > 0 else '-inf'
        return format(value, '.17g')
    return str(value)


def ratio_growth_ok(levels: Sequence[int], ratios: Sequence[float],
                    limit: float = RATIO_STEP_LIMIT) -> Tuple[bool, str]:
    """ratio_{j+1}/ratio_j <= limit for every consecutive pair of levels"""
    steps = []
    for before, after in zip(ratios, ratios[1:]):
        if before <= 0:
            steps.append(math.inf if after > 0 else 1.0)
        else:
            steps.append(after / before)
    worst = max(steps, default=1.0)
    passed = all(math.isfinite(r) for r in ratios) and worst <= limit
    return passed, f"levels {list(levels)}: largest step {worst:.4g} (limit {limit})"


def log_growth_ok(levels: Sequence[int], ratios: Sequence[float],
                  factor: float = L2_WINDOW) -> Tuple[bool, str]:
    """ratio_j <= factor·ratio_first·(j/first)²: growth no faster than log²(1/δ)"""
    first_level, first = levels[0], ratios[0]
    allowed = [factor * first * (level / first_level) ** 2 for level in levels]
    passed = all(r <= a for r, a in zip(ratios, allowed))
    return passed, f"levels {list(levels)}: log² envelope {'held' if passed else 'exceeded'}"


def l2_window_ok(levels: Sequence[int], ratios: Sequence[float],
                 window: float = L2_WINDOW) -> Tuple[bool, str]:
    """max/min < window and nothing above window × the first ratio"""
    low, high = min(ratios), max(ratios)
    spread = high / low if low > 0 else math.inf
    passed = spread < window and high <= window * ratios[0]
    return passed, f"levels {list(levels)}: spread {spread:.4g} (window {window})"


def _csv_name(schema: str, schemas: Sequence[str]) -> str:
    return 'results.csv' if len(schemas) <= 1 else f"results_{schema}.csv"


def emit_report(rows: Sequence[ReportRow], summary: Dict[str, Any],
                out_dir: Union[str, Path]) -> List[Path]:
    """
    Write the CSV file(s) and summary.json into out_dir

    Rows are sorted by (experiment position, level) and written with CRLF
    line endings and minimal quoting. With no rows a header-only results.csv
    in the bound schema is written.
    """
    out_dir = Path(out_dir)
    schemas = []
    for row in rows:
        if row.schema not in schemas:
            schemas.append(row.schema)
    if not schemas:
        schemas = ['bound']

    paths = []
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        for schema in schemas:
            columns = SCHEMAS[schema]
            selected = sorted((row for row in rows if row.schema == schema),
                              key=lambda row: (row.order, row.level))
            path = out_dir / _csv_name(schema, schemas)
            with open(path, 'w', newline='', encoding='utf-8') as f:
                writer = csv.writer(f, lineterminator='\r\n')
                writer.writerow(columns)
                for row in selected:
                    writer.writerow([format_value(row.values.get(column)) for column in columns])
            paths.append(path)

        summary_path = out_dir / 'summary.json'
        with open(summary_path, 'w', encoding='utf-8') as f:
            json.dump(summary, f, indent=2, ensure_ascii=False, default=_json_default)
            f.write('\n')
        paths.append(summary_path)
    except OSError as e:
        raise ConfigError(f"cannot write results to {out_dir}: {e.strerror}")

    logger.info("Wrote %s", ', '.join(str(path) for path in paths))
    return paths


def _json_default(value: Any):
    if isinstance(value, Path):
        return str(value)
    if isinstance(value, Criterion):
        return asdict(value)
    if hasattr(value, 'item'):
        return value.item()
    raise TypeError(f"{type(value).__name__} is not JSON serializable")


def _float(text: str) -> float:
    return float(text) if text else math.nan


def _verify_bound_rows(records: List[Dict[str, str]]) -> List[str]:
    problems = []
    groups: Dict[Tuple[str, ...], List[Tuple[int, float]]] = {}
    for number, record in enumerate(records, start=2):
        lhs, rhs = _float(record['lhs']), _float(record['rhs'])
        ratio = lhs / rhs if rhs > 0 else (0.0 if lhs == 0 else math.inf)
        stored = _float(record['ratio'])
        if not math.isclose(ratio, stored, rel_tol=RELATIVE_TOLERANCE) and not (
                math.isinf(ratio) and math.isinf(stored)):
            problems.append(f"row {number}: ratio {stored} but lhs/rhs = {ratio}")
        key = tuple(record[c] for c in ('check', 'd', 'n', 's', 'sigma', 'alpha'))
        groups.setdefault(key, []).append((int(record['level']), ratio))

    for key, entries in groups.items():
        entries.sort()
        if len(entries) < 2:
            continue
        passed, detail = ratio_growth_ok([e[0] for e in entries], [e[1] for e in entries])
        if not passed:
            problems.append(f"{key[0]}: ratio growth criterion failed ({detail})")
    return problems


def _verify_sumproduct_rows(records: List[Dict[str, str]]) -> List[str]:
    problems = []
    for number, record in enumerate(records, start=2):
        level = int(record['level'])
        maxsize, bound = _float(record['maxsize']), _float(record['bound'])
        expected = maxsize >= bound * 2.0 ** (-level * EPSILON_SLACK)
        if format_value(expected) != record['pass']:
            problems.append(f"row {number}: pass flag {record['pass']} but sizes give {format_value(expected)}")
    return problems


def verify(path: Union[str, Path]) -> Tuple[bool, List[str]]:
    """Recompute ratios and pass flags of a results CSV; returns (ok, problems)"""
    try:
        with open(path, newline='', encoding='utf-8') as f:
            reader = csv.DictReader(f)
            header = tuple(reader.fieldnames or ())
            records = list(reader)
    except OSError as e:
        raise ConfigError(f"cannot read {path}: {e.strerror}")

    if header == SCHEMAS['bound']:
        problems = _verify_bound_rows(records)
    elif header == SCHEMAS['sumproduct']:
        problems = _verify_sumproduct_rows(records)
    elif header in SCHEMAS.values():
        problems = []
    else:
        raise ConfigError(f"{path}: header matches no known schema")
    return not problems, problems
