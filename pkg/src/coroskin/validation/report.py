"""Per-phase metrics rows and their CSV report."""

import csv
import io
from dataclasses import dataclass

import numpy as np

from ..errors import InputError

HEADER = ("Phase", "HD_mm", "MSD_mm", "BCR", "BCS")


@dataclass
class MetricsRow:
    phase: int
    hd_mm: float
    msd_mm: float
    bcr: float
    bcs: float

    def values(self):
        return np.array([self.hd_mm, self.msd_mm, self.bcr, self.bcs], dtype=float)


def summarize(rows):
    """Column means and population standard deviations, in header order."""
    if not rows:
        raise InputError("no metrics rows to summarize")
    M = np.array([r.values() for r in rows])
    return M.mean(axis=0), M.std(axis=0, ddof=0)


def emit_report(rows, path=None, digits=6):
    """CSV text with one row per phase followed by Mean and STD rows.

    Also written to ``path`` when given.
    """
    mean, std = summarize(rows)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(HEADER)
    fmt = f"{{:.{digits}f}}"
    for r in sorted(rows, key=lambda r: r.phase):
        w.writerow([f"{int(r.phase):02d}"] + [fmt.format(v) for v in r.values()])
    w.writerow(["Mean"] + [fmt.format(v) for v in mean])
    w.writerow(["STD"] + [fmt.format(v) for v in std])
    text = buf.getvalue()
    if path is not None:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    return text


def read_report(path_or_text):
    """Parse a report back into (rows, mean, std)."""
    text = path_or_text
    if "\n" not in str(path_or_text):
        with open(path_or_text) as fh:
            text = fh.read()
    lines = list(csv.reader(io.StringIO(text)))
    if tuple(lines[0]) != HEADER:
        raise InputError(f"unexpected report header {lines[0]}")
    rows, mean, std = [], None, None
    for rec in lines[1:]:
        vals = [float(v) for v in rec[1:]]
        if rec[0] == "Mean":
            mean = np.array(vals)
        elif rec[0] == "STD":
            std = np.array(vals)
        else:
            rows.append(MetricsRow(int(rec[0]), *vals))
    return rows, mean, std
