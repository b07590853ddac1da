"""
レポート出力ユーティリティ

シナリオごとに
  - <name>.report   : 版数つきヘッダ行 + キーを整列したJSON（経過時間は含めない）
  - <name>_<suite>.csv : level, h_max, 各項, 判定量, order の平坦な表
を書き、実行全体の経過時間は timings.csv にまとめる
"""

import json
import logging
import math
from pathlib import Path
from typing import Any, Dict, List, Sequence, Union

import pandas as pd

from src.reilly_workbench.errors import UsageError
from src.reilly_workbench.schemas.reports import REPORT_SCHEMA_VERSION, RunReport, SuiteResult

logger = logging.getLogger(__name__)

REPORT_HEADER = f"# reilly-workbench report schema={REPORT_SCHEMA_VERSION}"
CSV_FLOAT_FORMAT = "%.17g"
TIMINGS_FILE = "timings.csv"


def json_safe(value: Any) -> Any:
    """NaN・無限大を null にする（JSONに書けないため）"""
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, dict):
        return {k: json_safe(v) for k, v in value.items()}
    if isinstance(value, list):
        return [json_safe(v) for v in value]
    return value


def report_to_text(report: RunReport) -> str:
    payload = json_safe(report.model_dump(mode="python", exclude={"timings"}))
    body = json.dumps(payload, sort_keys=True, indent=2, ensure_ascii=False, allow_nan=False, default=str)
    return f"{REPORT_HEADER}\n{body}\n"


def suite_table(result: SuiteResult) -> pd.DataFrame:
    """
    スイート結果の平坦な表

    order 列は一つ前のレベルとの観測次数（最初の行は NaN）
    """
    term_names: List[str] = []
    for row in result.rows:
        for name in row.terms:
            if name not in term_names:
                term_names.append(name)

    records = []
    for k, row in enumerate(result.rows):
        record: Dict[str, Any] = {"level": row.level, "h_max": row.h_max}
        for name in term_names:
            record[name] = row.terms.get(name, math.nan)
        record[result.quantity_name or "quantity"] = row.quantity
        order = result.orders[k - 1] if 0 < k <= len(result.orders) else None
        record["order"] = math.nan if order is None else order
        records.append(record)
    columns = ["level", "h_max", *term_names, result.quantity_name or "quantity", "order"]
    return pd.DataFrame.from_records(records, columns=columns)


def write_report(report: RunReport, out_dir: Union[str, Path]) -> List[Path]:
    """レポートと表を書き出し、書いたパスを返す"""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []

    report_path = out_dir / f"{report.name}.report"
    report_path.write_text(report_to_text(report), encoding="utf-8")
    written.append(report_path)

    for result in report.suites:
        if not result.rows:
            continue
        table_path = out_dir / f"{report.name}_{result.suite}.csv"
        suite_table(result).to_csv(table_path, index=False, float_format=CSV_FLOAT_FORMAT, na_rep="nan")
        written.append(table_path)

    logger.info(f"Wrote {len(written)} files for {report.name} to {out_dir}")
    return written


def write_timings(reports: Sequence[RunReport], out_dir: Union[str, Path]) -> Path:
    rows = [
        {"scenario": report.name, "stage": stage, "seconds": seconds}
        for report in reports
        for stage, seconds in report.timings.items()
    ]
    path = Path(out_dir) / TIMINGS_FILE
    pd.DataFrame(rows, columns=["scenario", "stage", "seconds"]).to_csv(
        path, index=False, float_format="%.6f"
    )
    return path


def read_report(path: Union[str, Path]) -> Dict[str, Any]:
    """
    レポートファイルを読み込む

    Raises:
        UsageError: ヘッダ行が無い・版数が違う場合
    """
    text = Path(path).read_text(encoding="utf-8")
    header, _, body = text.partition("\n")
    if header != REPORT_HEADER:
        raise UsageError(f"not a schema {REPORT_SCHEMA_VERSION} report: {path}")
    return json.loads(body)
