"""CSV, text and SVG artifacts."""
import csv
import io
import os
from typing import Dict, List, Sequence

from spwdsched.merge import MergeReport
from spwdsched.wf_model import WspInstance


def _fmt(value):
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, float):
        return f"{value:.9g}"
    return value


def csv_text(columns: Sequence[str], rows: Sequence[Dict[str, object]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt(row[c]) for c in columns])
    return buf.getvalue()


def write_text(path: str, text: str):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", newline="") as f:
        f.write(text)


def write_csv(path: str, columns: Sequence[str], rows: Sequence[Dict[str, object]]):
    write_text(path, csv_text(columns, rows))


SCHEDULE_COLUMNS = ("task_name", "machine_name", "exec_time_s", "cost")


def schedule_csv(report: MergeReport, instance: WspInstance) -> str:
    tasks, machines = instance.workflow.tasks, instance.machines
    rows = []
    for t, m in sorted(report.schedule.assignment.items()):
        rows.append({
            "task_name": tasks[t].name,
            "machine_name": machines[m].name,
            "exec_time_s": float(instance.time_matrix[t, m]),
            "cost": float(instance.cost_matrix[t, m]),
        })
    s = report.schedule
    summary = (f"# total_cost={_fmt(s.cost)},max_path_time_s={_fmt(s.max_path_time)},"
               f"deadline_s={_fmt(instance.deadline)},feasible={_fmt(s.feasible)}\n")
    return csv_text(SCHEDULE_COLUMNS, rows) + summary


def write_summary(path: str, entries: Dict[str, object]):
    write_text(path, "".join(f"{k}: {_fmt(v)}\n" for k, v in entries.items()))


def sweep_svg(rows: List[Dict[str, object]], width: int = 480, height: int = 320) -> str:
    """Line chart of cost ratio against max subgraph size (%)."""
    pad = 40
    points = sorted((float(r["s_pct"]), float(r["cost_ratio_vs_undivided"])) for r in rows)
    ys = [y for _, y in points] or [1.0]
    lo, hi = min(min(ys), 1.0), max(max(ys), 1.0)
    span = (hi - lo) or 1.0

    def sx(x):
        return pad + (100.0 - x) / 100.0 * (width - 2 * pad)

    def sy(y):
        return height - pad - (y - lo) / span * (height - 2 * pad)

    coords = " ".join(f"{sx(x):.1f},{sy(y):.1f}" for x, y in points)
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f'<line x1="{pad}" y1="{height - pad}" x2="{width - pad}" y2="{height - pad}" stroke="black"/>',
        f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{height - pad}" stroke="black"/>',
        f'<text x="{width / 2:.0f}" y="{height - 8}" text-anchor="middle">max subgraph size (%)</text>',
        f'<text x="12" y="{pad - 12}">cost ratio ({lo:.3f} - {hi:.3f})</text>',
        f'<polyline fill="none" stroke="steelblue" stroke-width="2" points="{coords}"/>',
    ]
    for x, y in points:
        parts.append(f'<circle cx="{sx(x):.1f}" cy="{sy(y):.1f}" r="3" fill="steelblue"/>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
