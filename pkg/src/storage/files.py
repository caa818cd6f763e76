import csv
import logging
from pathlib import Path
from typing import Any, List, Type, TypeVar

import numpy as np
import orjson
from pydantic import BaseModel, ValidationError

from src.core.exceptions import ConfigError, DataError
from src.models.experiment import ExperimentReport, ReportTable

logger = logging.getLogger(__name__)

FLOAT_FORMAT = '%.17g'

ModelT = TypeVar('ModelT', bound=BaseModel)


def _format_cell(value: Any) -> str:
    if isinstance(value, (float, np.floating)):
        return FLOAT_FORMAT % value
    return str(value)


def describe_validation_error(error: ValidationError) -> str:
    return '; '.join(
        f'{" -> ".join(str(part) for part in item["loc"])}: {item["msg"]}' for item in error.errors()
    )


def read_json(path: Path) -> Any:
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise ConfigError(f'cannot read {path}: {exc.strerror}') from exc
    try:
        return orjson.loads(raw)
    except orjson.JSONDecodeError as exc:
        raise ConfigError(f'{path}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}') from exc


def load_model(path: Path, model: Type[ModelT]) -> ModelT:
    document = read_json(path)
    try:
        return model.parse_obj(document)
    except ValidationError as exc:
        raise ConfigError(f'{path}: {describe_validation_error(exc)}') from exc


def write_json(path: Path, document: Any) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(orjson.dumps(document, option=orjson.OPT_SERIALIZE_NUMPY | orjson.OPT_INDENT_2))
    logger.info('wrote %s', path)
    return path


def read_matrix(path: Path) -> np.ndarray:
    """Real matrix stored one channel per CSV row."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise DataError(f'cannot read {path}: {exc.strerror}') from exc
    rows: List[List[float]] = []
    for line_number, row in enumerate(csv.reader(text.splitlines()), start=1):
        if not row or all(not cell.strip() for cell in row):
            continue
        try:
            rows.append([float(cell) for cell in row])
        except ValueError as exc:
            raise DataError(f'{path}, line {line_number}: {exc}') from exc
        if len(rows[-1]) != len(rows[0]):
            raise DataError(f'{path}, line {line_number}: expected {len(rows[0])} columns, found {len(rows[-1])}')
    if not rows:
        raise DataError(f'{path}: no data rows')
    matrix = np.array(rows)
    if not np.all(np.isfinite(matrix)):
        raise DataError(f'{path}: non-finite values')
    return matrix


def write_matrix(path: Path, matrix: np.ndarray) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    np.savetxt(path, np.atleast_2d(matrix), fmt=FLOAT_FORMAT, delimiter=',')
    logger.info('wrote %s', path)
    return path


def write_table(path: Path, table: ReportTable) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open('w', newline='') as handle:
        writer = csv.writer(handle)
        writer.writerow(table.columns)
        for row in table.rows:
            writer.writerow([_format_cell(value) for value in row])
    logger.info('wrote %s', path)
    return path


def write_report(out_dir: Path, report: ExperimentReport) -> List[Path]:
    paths = [write_table(Path(out_dir) / f'{report.name}_{name}.csv', table) for name, table in report.tables.items()]
    paths.append(write_json(Path(out_dir) / f'{report.name}_summary.json', report.summary))
    return paths
