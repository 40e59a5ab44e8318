"""Output rendering.

CSV: a `# config_hash=<sha256>` comment line, a header row, then one row per
record; numbers in scientific notation with 12 significant digits, poles as
pole_flag=1 with the bracketing interval instead of infinities.
JSON: the same records, numbers rounded to the same precision, sorted keys.
gnuplot: whitespace-separated columns, a blank line at every pole so curves
break there.
"""

import csv
import io
import json
import math

import numpy as np

NUMBER_FORMAT = ".11e"


def format_number(value):
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        if not math.isfinite(value):
            return ""
        return format(float(value), NUMBER_FORMAT)
    return str(value)


def _round(value):
    if isinstance(value, dict):
        return {str(key): _round(item) for key, item in value.items()}
    if isinstance(value, (list, tuple, np.ndarray)):
        return [_round(item) for item in value]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        if not math.isfinite(value):
            return None
        return float(format(float(value), NUMBER_FORMAT))
    return value


def render_json(data):
    return json.dumps(_round(data), indent=2, sort_keys=True) + "\n"


def render_csv(columns, rows, digest):
    """
    :param columns: header names
    :param rows: sequences of cell values, same length as columns
    :param digest: configuration hash recorded in the leading comment

    :returns: str
    """
    buffer = io.StringIO()
    buffer.write(f"# config_hash={digest}\n")
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([format_number(value) for value in row])
    return buffer.getvalue()


def render_records(records, columns, digest, output_format):
    """Render dict records as CSV or JSON"""
    if output_format == "json":
        return render_json({"config_hash": digest, "records": records})
    rows = [[record.get(column) for column in columns] for record in records]
    return render_csv(columns, rows, digest)


def render_gnuplot(columns, rows):
    lines = ["# " + " ".join(columns)]
    for row in rows:
        if any(
            isinstance(value, float) and not math.isfinite(value) for value in row
        ):
            lines.append("")
            continue
        lines.append(" ".join(format_number(value) for value in row))
    return "\n".join(lines) + "\n"


def render_key_values(pairs):
    return "".join(f"{key}={format_number(value)}\n" for key, value in pairs)


def curve_records(curve, resonances):
    """Scan rows: abscissa, M0, pole flag and the bracket of a pole point"""
    records = []
    for x, value, flag in curve.rows():
        record = {"axis": x, "M0": value, "pole_flag": int(bool(flag))}
        if flag:
            for resonance in resonances:
                lo, hi = resonance.bracket
                if lo <= x <= hi:
                    record["bracket_lo"], record["bracket_hi"] = lo, hi
                    break
            record["M0"] = None
        records.append(record)

    # refined poles between grid points
    for resonance in resonances:
        if any(record["axis"] == resonance.position for record in records):
            continue
        lo, hi = resonance.bracket
        records.append(
            {
                "axis": resonance.position,
                "M0": None,
                "pole_flag": 1,
                "bracket_lo": lo,
                "bracket_hi": hi,
            }
        )
    records.sort(key=lambda record: record["axis"])
    return records
