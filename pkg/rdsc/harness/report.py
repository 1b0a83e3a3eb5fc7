"""Report tables and their on-disk form.

An output directory holds

    report.csv       one row per (image, model, condition, epsilon)
    report.json      the rows plus config identity, summary and failures
    summary.csv      per condition mean/median of the configured metrics
    histograms.csv   per condition histograms over ranges shared by all conditions
    timing.csv       encode wall/cpu time per row
    timing_summary.csv

Everything except the timing files is a pure function of config, checkpoints and dataset.
"""
import json
import logging
import math
from dataclasses import dataclass, field
from typing import Any, NamedTuple

import numpy as np
import pyarrow
import pyarrow.csv

from rdsc.codec.losses import RDRecord
from rdsc.duckdb import execute_sql
from rdsc.fs import LocalFs
from rdsc.harness.dataset import Skipped
from rdsc.metrics import EvalSummary, histogram


LOG = logging.getLogger(__name__)


SIGNIFICANT_DIGITS = 6

# config metric name -> report column
METRIC_COLUMNS = {
    'bpp': 'bpp',
    'distortion': 'distortion',
    'psnr': 'psnr_db',
    'ms_ssim': 'ms_ssim',
    'rd_loss': 'rd_loss',
}


class ReportRow(NamedTuple):
    image_id: str
    model: str
    condition: str
    attack: str
    defense: str
    epsilon: float
    bpp: float
    distortion: float
    psnr_db: float
    ms_ssim: float
    rd_loss: float

    @classmethod
    def of(
            cls,
            image_id: str,
            model: str,
            attack: str,
            defense: str,
            epsilon: float,
            record: RDRecord,
            condition: str | None = None
    ) -> 'ReportRow':
        """Values are rounded to the precision they are reported with."""
        return cls(
            image_id=image_id,
            model=model,
            condition=condition or f'{attack}/{defense}',
            attack=attack,
            defense=defense,
            epsilon=round_sig(epsilon),
            bpp=round_sig(record.rate_bpp),
            distortion=round_sig(record.distortion),
            psnr_db=round_sig(record.psnr_db),
            ms_ssim=round_sig(record.ms_ssim),
            rd_loss=round_sig(record.rd_loss)
        )

    def record(self) -> RDRecord:
        return RDRecord(
            rate_bpp=self.bpp,
            distortion=self.distortion,
            rd_loss=self.rd_loss,
            psnr_db=self.psnr_db,
            ms_ssim=self.ms_ssim
        )


class TimingRow(NamedTuple):
    image_id: str
    model: str
    condition: str
    epsilon: float
    encode_ms: float
    cpu_ms: float


class Failure(NamedTuple):
    image_id: str
    model: str
    error: str


ROW_SCHEMA = pyarrow.schema([
    ('image_id', pyarrow.string()),
    ('model', pyarrow.string()),
    ('condition', pyarrow.string()),
    ('attack', pyarrow.string()),
    ('defense', pyarrow.string()),
    ('epsilon', pyarrow.float64()),
    ('bpp', pyarrow.float64()),
    ('distortion', pyarrow.float64()),
    ('psnr_db', pyarrow.float64()),
    ('ms_ssim', pyarrow.float64()),
    ('rd_loss', pyarrow.float64()),
])


TIMING_SCHEMA = pyarrow.schema([
    ('image_id', pyarrow.string()),
    ('model', pyarrow.string()),
    ('condition', pyarrow.string()),
    ('epsilon', pyarrow.float64()),
    ('encode_ms', pyarrow.float64()),
    ('cpu_ms', pyarrow.float64()),
])


@dataclass
class Report:
    name: str
    experiment: str
    config: dict[str, Any]
    rows: list[ReportRow] = field(default_factory=list)
    timing: list[TimingRow] = field(default_factory=list)
    failures: list[Failure] = field(default_factory=list)
    skipped: list[Skipped] = field(default_factory=list)

    def metrics(self) -> list[str]:
        return list(self.config.get('metrics') or METRIC_COLUMNS)

    def histogram_bins(self) -> int:
        return int(self.config.get('histogram_bins', 10))


def round_sig(value: float) -> float:
    if not math.isfinite(value):
        return value
    return float(f'{value:.{SIGNIFICANT_DIGITS}g}')


def _rounded(table: pyarrow.Table) -> pyarrow.Table:
    columns = []
    for col, f in zip(table.columns, table.schema):
        if pyarrow.types.is_floating(f.type):
            col = pyarrow.array([round_sig(v) for v in col.to_pylist()], type=f.type)
        columns.append(col)
    return pyarrow.Table.from_arrays(columns, schema=table.schema)


def rows_table(rows: list[ReportRow]) -> pyarrow.Table:
    return pyarrow.Table.from_pylist([r._asdict() for r in rows], schema=ROW_SCHEMA)


def timing_table(rows: list[TimingRow]) -> pyarrow.Table:
    return pyarrow.Table.from_pylist([r._asdict() for r in rows], schema=TIMING_SCHEMA)


def summary_table(report: Report) -> pyarrow.Table:
    rows = rows_table(report.rows).append_column(
        'seq',
        pyarrow.array(np.arange(len(report.rows)), type=pyarrow.int64())
    )
    aggregates = []
    for name in report.metrics():
        col = METRIC_COLUMNS[name]
        aggregates.append(f'avg({col}) AS mean_{col}')
        aggregates.append(f'median({col}) AS median_{col}')
    sql = f"""
        SELECT
            model,
            condition,
            attack,
            defense,
            epsilon,
            count(*) AS images,
            {', '.join(aggregates)}
        FROM report_rows
        GROUP BY model, condition, attack, defense, epsilon
        ORDER BY min(seq)
    """
    return _rounded(execute_sql(sql, tables={'report_rows': rows}))


def timing_summary_table(report: Report) -> pyarrow.Table:
    timing = timing_table(report.timing).append_column(
        'seq',
        pyarrow.array(np.arange(len(report.timing)), type=pyarrow.int64())
    )
    sql = """
        SELECT
            model,
            condition,
            epsilon,
            count(*) AS images,
            avg(encode_ms) AS mean_encode_ms,
            avg(cpu_ms) AS mean_cpu_ms
        FROM timing_rows
        GROUP BY model, condition, epsilon
        ORDER BY min(seq)
    """
    return _rounded(execute_sql(sql, tables={'timing_rows': timing}))


def _group_key(row: ReportRow) -> tuple[str, str, float]:
    return row.model, row.condition, row.epsilon


def summarize(report: Report) -> list[EvalSummary]:
    """One EvalSummary per (model, condition, epsilon), in first-appearance order."""
    groups: dict[tuple[str, str, float], EvalSummary] = {}
    timing = {(t.image_id, t.model, t.condition, t.epsilon): t.encode_ms for t in report.timing}
    for row in report.rows:
        key = _group_key(row)
        s = groups.get(key)
        if s is None:
            s = groups[key] = EvalSummary(condition_label(*key))
        s.add(row.image_id, row.record(), timing.get((row.image_id, *key), 0.0))
    return list(groups.values())


def condition_label(model: str, condition: str, epsilon: float) -> str:
    return f'{model}:{condition}@{round_sig(epsilon):g}'


def histograms_table(report: Report) -> pyarrow.Table:
    """Histograms of every metric, bin ranges shared across conditions of the same metric."""
    bins = report.histogram_bins()
    summaries = summarize(report)
    out = []
    for name in report.metrics():
        values = np.array([getattr(r.record(), _record_field(name)) for r in report.rows], dtype=np.float64)
        values = values[np.isfinite(values)]
        if values.size == 0:
            continue
        lo, hi = float(values.min()), float(values.max())
        if lo == hi:
            hi = lo + 1
        for s in summaries:
            col = s.column(_record_field(name))
            col = col[np.isfinite(col)]
            if col.size == 0:
                continue
            h = histogram(col, bins, (lo, hi))
            for i, count in enumerate(h.counts):
                out.append({
                    'metric': name,
                    'condition': s.condition,
                    'bin': i,
                    'lo': float(h.edges[i]),
                    'hi': float(h.edges[i + 1]),
                    'count': int(count)
                })
    schema = pyarrow.schema([
        ('metric', pyarrow.string()),
        ('condition', pyarrow.string()),
        ('bin', pyarrow.int64()),
        ('lo', pyarrow.float64()),
        ('hi', pyarrow.float64()),
        ('count', pyarrow.int64()),
    ])
    return _rounded(pyarrow.Table.from_pylist(out, schema=schema))


def _record_field(metric: str) -> str:
    col = METRIC_COLUMNS[metric]
    return 'rate_bpp' if col == 'bpp' else col


def _json_value(v: Any) -> Any:
    if isinstance(v, float):
        v = round_sig(v)
        return v if math.isfinite(v) else None
    return v


def to_json(report: Report) -> dict[str, Any]:
    return {
        'name': report.name,
        'experiment': report.experiment,
        'config': report.config,
        'rows': [{k: _json_value(v) for k, v in r._asdict().items()} for r in report.rows],
        'summary': [
            {k: _json_value(v) for k, v in item.items()}
            for item in summary_table(report).to_pylist()
        ] if report.rows else [],
        'failures': [f._asdict() for f in report.failures],
        'skipped': [s._asdict() for s in report.skipped],
    }


def from_json(data: dict[str, Any]) -> Report:
    def num(v):
        return float('nan') if v is None else float(v)

    rows = []
    for item in data['rows']:
        rows.append(ReportRow(**{
            k: num(item[k]) if ROW_SCHEMA.field(k).type == pyarrow.float64() else item[k]
            for k in ROW_SCHEMA.names
        }))
    return Report(
        name=data['name'],
        experiment=data['experiment'],
        config=data['config'],
        rows=rows,
        failures=[Failure(**f) for f in data.get('failures', [])],
        skipped=[Skipped(**s) for s in data.get('skipped', [])]
    )


def load_report(path: str) -> Report:
    with open(path) as f:
        return from_json(json.load(f))


def _write_csv(fs: LocalFs, dest: str, table: pyarrow.Table) -> None:
    with fs.open(dest, 'wb') as f:
        pyarrow.csv.write_csv(table, f)


def emit_report(report: Report, output_dir: str) -> str:
    """Write all report files into `output_dir/report.name`, replacing an earlier run."""
    if not report.rows:
        raise ValueError(f'report {report.name} has no rows')

    fs = LocalFs(output_dir)
    with fs.transact(report.name) as tx:
        _write_csv(tx, 'report.csv', _rounded(rows_table(report.rows)))
        _write_csv(tx, 'summary.csv', summary_table(report))
        _write_csv(tx, 'histograms.csv', histograms_table(report))
        if report.timing:
            _write_csv(tx, 'timing.csv', _rounded(timing_table(report.timing)))
            _write_csv(tx, 'timing_summary.csv', timing_summary_table(report))
        tx.write_text('report.json', json.dumps(to_json(report), indent=2) + '\n')

    dest = fs.abs(report.name)
    LOG.info(f'report written to {dest}', extra={
        'rows': len(report.rows),
        'failures': len(report.failures)
    })
    return dest
