"""Report emitters: evaluation CSV/Markdown, ranked method comparison
and the normal-vs-hard performance-drop table.

Dataset CSV layout (one row per method):

    method,max-F,ave-F,Fbw,MAE,SM,EM

Floats are written with repr so files round-trip exactly and identical
runs produce identical bytes.  Markdown tables use 3-decimal display
with the leading zero stripped (".905" style).
"""

import csv
import io

from ..metrics import LOWER_IS_BETTER, EvalReport

CSV_COLUMNS = ("method", "max-F", "ave-F", "Fbw", "MAE", "SM", "EM")
COLUMN_KEYS = {
    "max-F": "max_f",
    "ave-F": "ave_f",
    "Fbw": "fbw",
    "MAE": "mae",
    "SM": "s_measure",
    "EM": "e_measure",
}
KEY_COLUMNS = {v: k for k, v in COLUMN_KEYS.items()}


def _fmt(value):
    return repr(float(value))


def format_point3(value):
    """3-decimal display with the leading zero stripped: 0.044 -> .044"""
    text = "%.3f" % float(value)
    if text.startswith("0."):
        text = text[1:]
    elif text.startswith("-0."):
        text = "-" + text[2:]
    return text


# the drop table reuses the same compact style
format_delta = format_point3


# ---------------------------------------------------------------------------
# evaluation reports

def report_to_csv(report):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    row = [report.method]
    for col in CSV_COLUMNS[1:]:
        key = COLUMN_KEYS[col]
        row.append(_fmt(report.dataset[key]) if key in report.dataset else "")
    writer.writerow(row)
    for key in ("max_f_image_mean", "ave_f_image_mean"):
        if key in report.dataset:
            buf.write("# %s=%s\n" % (key, _fmt(report.dataset[key])))
    for note in report.footnotes:
        buf.write("# %s\n" % note)
    return buf.getvalue()


def report_images_to_csv(report):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(("image_id",) + CSV_COLUMNS[1:])
    for r in report.records:
        writer.writerow([r.image_id] + [
            _fmt(getattr(r, COLUMN_KEYS[c])) if COLUMN_KEYS[c]
            in report.dataset else "" for c in CSV_COLUMNS[1:]])
    return buf.getvalue()


def report_to_markdown(report):
    lines = [
        "| method | " + " | ".join(CSV_COLUMNS[1:]) + " |",
        "|" + "---|" * len(CSV_COLUMNS),
    ]
    cells = [report.method]
    for col in CSV_COLUMNS[1:]:
        key = COLUMN_KEYS[col]
        cells.append(format_point3(report.dataset[key])
                     if key in report.dataset else "-")
    lines.append("| " + " | ".join(cells) + " |")
    for note in report.footnotes:
        lines.append("")
        lines.append("_%s_" % note)
    return "\n".join(lines) + "\n"


def write_eval_report(report, out_base):
    """Write <out_base>.csv, <out_base>.md and <out_base>.images.csv."""
    paths = {}
    for suffix, text in (
            (".csv", report_to_csv(report)),
            (".md", report_to_markdown(report)),
            (".images.csv", report_images_to_csv(report))):
        path = out_base + suffix
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        paths[suffix] = path
    return paths


def load_report_csv(path):
    """Read a dataset report CSV back into a minimal EvalReport.

    Only the method name and dataset values survive the round trip;
    comment footer lines become footnotes.
    """
    notes = []
    rows = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            if line.startswith("#"):
                notes.append(line.lstrip("#").strip())
                continue
            rows.append(next(csv.reader([line])))
    if len(rows) < 2 or tuple(rows[0]) != CSV_COLUMNS:
        raise ValueError(
            "%s is not a dataset report CSV (expected header %s)"
            % (path, ",".join(CSV_COLUMNS)))
    values = rows[1]
    report = EvalReport(method=values[0])
    for col, cell in zip(CSV_COLUMNS[1:], values[1:]):
        if cell != "":
            report.dataset[COLUMN_KEYS[col]] = float(cell)
    report.footnotes = tuple(notes)
    return report


# ---------------------------------------------------------------------------
# method comparison

def _ranks(values_by_method, lower_is_better):
    """Competition ranks (1224 style): equal values share a rank."""
    sign = 1.0 if lower_is_better else -1.0
    ordered = sorted(values_by_method, key=lambda mv: (sign * mv[1], mv[0]))
    ranks = {}
    for pos, (method, value) in enumerate(ordered):
        prev = ordered[pos - 1][1] if pos else None
        if pos and value == prev:
            ranks[method] = ranks[ordered[pos - 1][0]]
        else:
            ranks[method] = pos + 1
    return ranks


def compare_reports(reports):
    """Rank >= 2 reports per metric; returns (markdown, csv) strings.

    Markdown annotates the top three of each column with ^1/^2/^3
    markers; the CSV adds a rank column per metric.  Rows are ordered by
    method name so ties and reruns are stable.
    """
    if len(reports) < 2:
        raise ValueError("need >= 2 methods to compare, got %d" % len(reports))
    names = [r.method for r in reports]
    if len(set(names)) != len(names):
        dup = sorted(n for n in set(names) if names.count(n) > 1)[0]
        raise ValueError("duplicated method name %r" % dup)
    reports = sorted(reports, key=lambda r: r.method)
    shared = [k for k in COLUMN_KEYS.values()
              if all(k in r.dataset for r in reports)]
    rank_by_metric = {
        key: _ranks([(r.method, r.dataset[key]) for r in reports],
                    key in LOWER_IS_BETTER)
        for key in shared}

    md = ["| method | " + " | ".join(
        KEY_COLUMNS[k] for k in shared) + " |",
        "|" + "---|" * (len(shared) + 1)]
    for r in reports:
        cells = [r.method]
        for key in shared:
            rank = rank_by_metric[key][r.method]
            mark = "^%d" % rank if rank <= 3 else ""
            cells.append(format_point3(r.dataset[key]) + mark)
        md.append("| " + " | ".join(cells) + " |")

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    header = ["method"]
    for key in shared:
        header += [KEY_COLUMNS[key], KEY_COLUMNS[key] + "-rank"]
    writer.writerow(header)
    for r in reports:
        row = [r.method]
        for key in shared:
            row += [_fmt(r.dataset[key]), rank_by_metric[key][r.method]]
        writer.writerow(row)
    return "\n".join(md) + "\n", buf.getvalue()


# ---------------------------------------------------------------------------
# performance drop

class DropReport(dict):
    """Per-metric degradation from the normal to the hard subset.

    Holds metric-key -> delta.  Deltas are oriented so that larger
    means worse degradation: value(normal) - value(hard) for the scores
    where higher is better, and value(hard) - value(normal) for MAE.
    """

    methods = ("", "")


def drop_report(report_normal, report_hard):
    drop = DropReport()
    drop.methods = (report_normal.method, report_hard.method)
    for key in COLUMN_KEYS.values():
        a = report_normal.dataset.get(key)
        b = report_hard.dataset.get(key)
        if a is None or b is None:
            raise ValueError(
                "metric %r missing from %s"
                % (KEY_COLUMNS[key],
                   "both reports" if a is None and b is None
                   else report_normal.method if a is None
                   else report_hard.method))
        drop[key] = (b - a) if key in LOWER_IS_BETTER else (a - b)
    return drop


def drop_to_csv(drop):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(("normal", "hard") + CSV_COLUMNS[1:])
    writer.writerow(list(drop.methods)
                    + [_fmt(drop[COLUMN_KEYS[c]]) for c in CSV_COLUMNS[1:]])
    return buf.getvalue()


def drop_to_markdown(drop):
    lines = [
        "| normal vs hard | " + " | ".join(CSV_COLUMNS[1:]) + " |",
        "|" + "---|" * len(CSV_COLUMNS),
        "| %s / %s | " % drop.methods + " | ".join(
            format_delta(drop[COLUMN_KEYS[c]]) for c in CSV_COLUMNS[1:])
        + " |",
    ]
    return "\n".join(lines) + "\n"
