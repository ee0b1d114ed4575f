"""Row serialisation: versioned CSV with a header comment, and a JSON mirror."""
import csv
import hashlib
import io
import json
import math

import numpy as np

from . import __version__

SCHEMA_VERSION = 1


def stable_hash(obj, n=12):
    blob = json.dumps(obj, sort_keys=True, default=_plain)
    return hashlib.sha256(blob.encode()).hexdigest()[:n]


def _plain(x):
    if isinstance(x, (np.floating,)):
        return float(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, (set, tuple)):
        return list(x)
    raise TypeError(f"not serialisable: {type(x)}")


def clean(obj):
    """Recursively convert numpy scalars/arrays; non-finite floats become None in JSON."""
    if isinstance(obj, dict):
        return {str(k): clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return clean(obj.tolist())
    return obj


def stamp_rows(rows, config_hash, grid_hash, seed):
    out = []
    for r in rows:
        r = dict(r)
        r.update({"config_hash": config_hash, "grid_hash": grid_hash, "seed": seed,
                  "version": __version__})
        out.append(r)
    return out


def to_csv(command, rows, summary=None):
    buf = io.StringIO()
    buf.write(f"# kaclab schema={SCHEMA_VERSION} command={command} version={__version__}\n")
    if summary:
        buf.write("# summary=" + json.dumps(clean(summary), sort_keys=True) + "\n")
    if rows:
        cols = []
        for r in rows:
            for k in r:
                if k not in cols:
                    cols.append(k)
        w = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: _fmt(r.get(k)) for k in cols})
    return buf.getvalue()


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (dict, list)):
        return json.dumps(clean(v), sort_keys=True)
    return "" if v is None else v


def to_json(command, rows, summary=None):
    doc = {"schema": SCHEMA_VERSION, "command": command, "version": __version__,
           "rows": clean(rows), "summary": clean(summary or {})}
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def read_csv(text):
    lines = [ln for ln in text.splitlines() if not ln.startswith("#")]
    return list(csv.DictReader(lines))
