"""CSV traces with provenance comments, JSON sidecars and flat config files.

CSV layout::

    # key=value          (provenance, one per line, values JSON-encoded)
    x,y[,sigma]          (column header)
    0.0,1.0
    ...

Floats are written with ``repr`` (shortest text that parses back to the
same double), so write -> read -> write is a fixpoint.
"""

import io as _io
import json
from pathlib import Path

import numpy as np

from .trace import Trace


class CsvError(ValueError):
    def __init__(self, message, line=None):
        super().__init__(f"line {line}: {message}" if line is not None else message)
        self.line = line


def _fmt(v):
    return repr(float(v))


def format_trace(trace: Trace, provenance=None) -> str:
    out = _io.StringIO()
    meta = dict(provenance or {})
    for k in sorted(meta):
        if "\n" in str(k) or "=" in str(k):
            raise ValueError(f"bad provenance key {k!r}")
        out.write(f"# {k}={json.dumps(meta[k], sort_keys=True)}\n")
    cols = ["x", "y"] + (["sigma"] if trace.sigma is not None else [])
    out.write(",".join(cols) + "\n")
    for i in range(len(trace)):
        row = [trace.x[i], trace.y[i]] + ([trace.sigma[i]] if trace.sigma is not None else [])
        out.write(",".join(_fmt(v) for v in row) + "\n")
    return out.getvalue()


def write_trace(trace: Trace, path, provenance=None):
    text = format_trace(trace, provenance)
    Path(path).write_text(text)
    return text


def parse_trace(text: str) -> Trace:
    """Read the CSV layout above; the column header is optional."""
    meta = {}
    xs, ys, ss = [], [], []
    ncol = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if "=" in body:
                k, v = body.split("=", 1)
                try:
                    meta[k.strip()] = json.loads(v)
                except json.JSONDecodeError:
                    meta[k.strip()] = v.strip()
            continue
        parts = [p.strip() for p in line.split(",")]
        if parts[0].lower() == "x" and ncol is None and not xs:
            if parts not in (["x", "y"], ["x", "y", "sigma"]):
                raise CsvError(f"unexpected column header {line!r}", lineno)
            ncol = len(parts)
            continue
        if ncol is None:
            ncol = len(parts)
        if len(parts) != ncol or ncol not in (2, 3):
            raise CsvError(f"expected {ncol or 2} columns, got {len(parts)}", lineno)
        try:
            vals = [float(p) for p in parts]
        except ValueError:
            raise CsvError(f"malformed number in row {line!r}", lineno) from None
        xs.append(vals[0])
        ys.append(vals[1])
        if ncol == 3:
            ss.append(vals[2])
    if not xs:
        raise CsvError("no data rows")
    return Trace(np.array(xs), np.array(ys), sigma=np.array(ss) if ncol == 3 else None, meta=meta)


def read_trace(path) -> Trace:
    return parse_trace(Path(path).read_text())


def write_json(obj, path):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _value(text):
    t = text.strip()
    try:
        return json.loads(t)
    except json.JSONDecodeError:
        return t


def read_config(path) -> dict:
    """Flat ``key = value`` text, or a JSON sidecar (its ``params`` mapping)."""
    text = Path(path).read_text()
    if text.lstrip().startswith("{"):
        obj = json.loads(text)
        return dict(obj.get("params", obj))
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise CsvError(f"expected 'key = value', got {raw.strip()!r}", lineno)
        k, v = line.split("=", 1)
        out[k.strip()] = _value(v)
    return out
