"""CSV output for result rows and a helper that writes a plotting script."""

from __future__ import annotations

import csv
import io
from pathlib import Path

from .experiments import ResultRow

HEADER = ("experiment", "snr_db", "metric", "value", "ci95", "trials")


def _num(x: float) -> str:
    # repr is locale-independent and round-trips exactly
    return repr(float(x))


def rows_to_csv(rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(HEADER)
    for r in rows:
        writer.writerow([r.experiment, _num(r.snr_db), r.metric, _num(r.value), _num(r.ci95), r.trials])
    return buf.getvalue()


def emit_csv(rows, path) -> Path:
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(rows_to_csv(rows))
    return path


def parse_csv(text: str) -> list[ResultRow]:
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    if tuple(header) != HEADER:
        raise ValueError(f"unexpected CSV header {header}")
    return [
        ResultRow(exp, float(snr), metric, float(value), float(ci), int(trials))
        for exp, snr, metric, value, ci, trials in reader
    ]


def read_csv(path) -> list[ResultRow]:
    return parse_csv(Path(path).read_text(encoding="utf-8"))


PLOT_TEMPLATE = '''"""Plot {csv_name}; generated by mocsim."""
import csv
from collections import defaultdict

import matplotlib.pyplot as plt

series = defaultdict(list)
with open({csv_path!r}, newline="") as fh:
    for row in csv.DictReader(fh):
        series[(row["experiment"], row["metric"])].append(
            (float(row["snr_db"]), float(row["value"]), float(row["ci95"]))
        )

for (experiment, metric), pts in sorted(series.items()):
    fig, ax = plt.subplots()
    snr, val, ci = zip(*pts)
    ax.errorbar(snr, val, yerr=ci, marker="o", capsize=3)
    if metric == "ber":
        ax.set_yscale("log")
    ax.set_xlabel("SNR (dB)")
    ax.set_ylabel(metric)
    ax.set_title(experiment)
    ax.grid(True, which="both", alpha=0.3)
    fig.savefig(f"{{experiment}}-{{metric}}.png", dpi=150, bbox_inches="tight")
'''


def plot_script(csv_path) -> str:
    """Source of a standalone matplotlib script that plots every series in the CSV."""
    csv_path = str(csv_path)
    return PLOT_TEMPLATE.format(csv_path=csv_path, csv_name=Path(csv_path).name)
