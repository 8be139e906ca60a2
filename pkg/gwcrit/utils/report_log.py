import csv
import io
import json
import os
import tempfile
import numpy as np
from typing import Any, Dict, Optional


def _fmt(x: Any) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def to_jsonable(obj: Any) -> Any:
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray) or hasattr(obj, "__array__"):
        return to_jsonable(np.asarray(obj).tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        # JSON has no inf/nan literals.
        return x if np.isfinite(x) else str(x)
    return obj


class ReportLog(object):
    def __init__(self, out_dir: Optional[str] = None, fmt: str = "csv", verbose: bool = False):
        """Atomic CSV / JSON writer for report tables and summaries."""
        if fmt not in ("csv", "json"):
            raise ValueError(f"Unknown report format {fmt}.")
        self.out_dir = out_dir
        self.fmt = fmt
        self.verbose = verbose

    def path(self, name: str, suffix: Optional[str] = None) -> str:
        suffix = self.fmt if suffix is None else suffix
        base = f"{name}.{suffix}"
        return base if self.out_dir is None else os.path.join(self.out_dir, base)

    def _write(self, filename: str, text: str):
        """Write via a temporary file in the target directory, then rename."""
        directory = os.path.dirname(os.path.abspath(filename))
        os.makedirs(directory, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
        try:
            with os.fdopen(fd, "w", encoding="utf-8", newline="") as handle:
                handle.write(text)
            os.replace(tmp, filename)
        except BaseException:
            if os.path.exists(tmp):
                os.remove(tmp)
            raise
        if self.verbose:
            print(f"ReportLog: wrote {filename}")

    def dumps_csv(self, columns: Dict[str, Any]) -> str:
        names = list(columns.keys())
        cols = [np.atleast_1d(np.asarray(columns[k])) for k in names]
        rows = cols[0].shape[0]
        assert all(c.shape[0] == rows for c in cols), "CSV columns differ in length"
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(names)
        for i in range(rows):
            writer.writerow([_fmt(c[i]) for c in cols])
        return buf.getvalue()

    def save_csv(self, columns: Dict[str, Any], filename: str):
        self._write(filename, self.dumps_csv(columns))

    def load_csv(self, filename: str) -> Dict[str, np.ndarray]:
        """Columns named `n`, `j`, `k` or `J` come back as int64, the rest as float64."""
        with open(filename, "r", encoding="utf-8", newline="") as handle:
            reader = csv.reader(handle)
            names = next(reader)
            data = [row for row in reader]
        out = {}
        for i, name in enumerate(names):
            raw = [row[i] for row in data]
            if name in ("n", "j", "k", "J"):
                out[name] = np.asarray([int(v) for v in raw], dtype=np.int64)
            else:
                out[name] = np.asarray([float(v) for v in raw], dtype=np.float64)
        return out

    def save_json(self, obj: Dict[str, Any], filename: str):
        text = json.dumps(to_jsonable(obj), indent=2, sort_keys=True) + "\n"
        self._write(filename, text)

    def load_json(self, filename: str) -> Dict[str, Any]:
        with open(filename, "r", encoding="utf-8") as handle:
            return json.load(handle)

    def save(self, name: str, columns: Dict[str, Any], summary: Optional[Dict[str, Any]] = None) -> str:
        """Store a table in the configured format; JSON wraps it with the summary."""
        filename = self.path(name)
        if self.fmt == "csv":
            self.save_csv(columns, filename)
        else:
            self.save_json({"columns": columns, "summary": summary or {}}, filename)
        return filename

    def load(self, filename: str) -> Dict[str, np.ndarray]:
        if filename.endswith(".csv"):
            return self.load_csv(filename)
        cols = self.load_json(filename)["columns"]
        return {k: np.asarray(v) for k, v in cols.items()}
