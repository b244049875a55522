"""CSV / JSON emission of sweep tables and Monte Carlo summaries.

CSV layout: ``# key=value`` metadata lines, then a mandatory header row,
then data rows.  Floats are written with ``repr`` so parsing returns the
exact values.  The ``generated_at`` line is the only non-deterministic
content; :func:`payload` strips it.
"""

from __future__ import annotations

import csv
import io
import json
from datetime import datetime, timezone
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

from .. import __version__
from .config import Scenario
from .runner import MonteCarloSummary
from .sweeps import SweepTable

TIMESTAMP_KEY = "generated_at"
SUMMARY_COLUMNS = ("metric", "mean", "std", "n", "ci95")


def metadata(scenario: Scenario, command: str, trials: Optional[int] = None) -> Dict[str, str]:
    return {
        "tool": f"momasim {__version__}",
        "command": command,
        "scenario_hash": scenario.hash,
        "seed": str(scenario.run.seed),
        "trials": str(scenario.run.trials if trials is None else trials),
        TIMESTAMP_KEY: datetime.now(timezone.utc).isoformat(timespec="seconds"),
    }


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def table_rows(table: SweepTable) -> Tuple[List[str], List[list]]:
    header = [table.x_name]
    for s in table.series:
        header += [s, f"{s}_std", f"{s}_n"]
    rows = []
    for r in table.rows:
        row = [r.x]
        for s in table.series:
            a = r.cells[s]
            row += [a.mean, a.std, a.n]
        rows.append(row)
    return header, rows


def summary_rows(summary: MonteCarloSummary) -> Tuple[List[str], List[list]]:
    rows = [[name, a.mean, a.std, a.n, a.ci95] for name, a in sorted(summary.aggregates.items())]
    return list(SUMMARY_COLUMNS), rows


def to_csv(header: List[str], rows: List[list], meta: Dict[str, str]) -> str:
    buf = io.StringIO()
    for k, v in meta.items():
        buf.write(f"# {k}={v}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def to_json(header: List[str], rows: List[list], meta: Dict[str, str]) -> str:
    doc = {"metadata": meta, "columns": header,
           "rows": [dict(zip(header, row)) for row in rows]}
    return json.dumps(doc, indent=2, sort_keys=True, allow_nan=True) + "\n"


def render(obj: Union[SweepTable, MonteCarloSummary], fmt: str, meta: Dict[str, str]) -> str:
    if isinstance(obj, SweepTable):
        header, rows = table_rows(obj)
    elif isinstance(obj, MonteCarloSummary):
        header, rows = summary_rows(obj)
    else:
        header, rows = obj
    if fmt == "csv":
        return to_csv(header, rows, meta)
    if fmt == "json":
        return to_json(header, rows, meta)
    raise ValueError(f"unknown format {fmt!r}")


def emit(obj, fmt: str, destination: Union[str, Path, None], meta: Dict[str, str]) -> str:
    """Render ``obj`` and write it to ``destination`` (stdout when None)."""
    text = render(obj, fmt, meta)
    if destination is None:
        return text
    path = Path(destination)
    try:
        path.write_text(text, encoding="utf-8")
    except OSError as e:
        raise OSError(f"cannot write {path}: {e}") from e
    return text


def payload(text: str) -> str:
    """Emitted text without the timestamp, for byte-level comparisons."""
    if text.lstrip().startswith("{"):
        doc = json.loads(text)
        doc["metadata"].pop(TIMESTAMP_KEY, None)
        return json.dumps(doc, sort_keys=True)
    return "".join(line for line in text.splitlines(keepends=True)
                   if not line.startswith(f"# {TIMESTAMP_KEY}="))


def _parse(v: str):
    for cast in (int, float):
        try:
            return cast(v)
        except ValueError:
            pass
    return v


def read_csv(text: str):
    """Parse emitted CSV back into ``(metadata, header, rows)``."""
    meta, body = {}, []
    for line in text.splitlines():
        if line.startswith("# "):
            k, _, v = line[2:].partition("=")
            meta[k] = v
        else:
            body.append(line)
    reader = csv.reader(body)
    header = next(reader)
    rows = [[_parse(v) for v in row] for row in reader]
    return meta, header, rows
