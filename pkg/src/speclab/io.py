"""File output: CSV and JSON writers and run manifests.

CSV files are comma separated with a header row and LF line endings; floats
are printed with 17 significant digits so data files are bit-stable.
"""

import csv
import hashlib
import json
import os
import platform
from datetime import datetime, timezone

import numpy as np

from . import __version__


def fmt(x):
    return format(float(x), ".17g")


def write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])
    return path


def _default(obj):
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def dumps(data):
    return json.dumps(data, indent=2, sort_keys=True, default=_default) + "\n"


def write_json(path, data):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps(data))
    return path


def matrix_rows(A):
    """Rows of ``A`` with real and imaginary parts interleaved per column."""
    A = np.asarray(A, dtype=complex)
    for row in A:
        out = []
        for z in row:
            out += [fmt(z.real), fmt(z.imag)]
        yield out


def write_matrix_csv(path, A):
    n = np.asarray(A).shape[1]
    header = [f"c{j}_{part}" for j in range(n) for part in ("re", "im")]
    return write_csv(path, header, matrix_rows(A))


def read_matrix_csv(path):
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return data[:, 0::2] + 1j * data[:, 1::2]


def sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()


def now():
    return datetime.now(timezone.utc).isoformat()


class Manifest:
    """Collects run metadata and the digests of every emitted file.

    Meant to be used as a context manager; the manifest is written on exit
    whether or not the run succeeded.
    """

    def __init__(self, out_dir, command, config, seeds=(), conventions=None):
        self.out_dir = out_dir
        self.data = {
            "tool": "speclab",
            "version": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "command": command,
            "config": config,
            "seeds": list(seeds),
            "conventions": conventions or {},
            "exclusions": {},
            "files": {},
            "status": "running",
        }

    @property
    def path(self):
        return os.path.join(self.out_dir, "manifest.json")

    def add_file(self, path):
        self.data["files"][os.path.relpath(path, self.out_dir)] = sha256(path)
        return path

    def __enter__(self):
        os.makedirs(self.out_dir, exist_ok=True)
        self.data["started"] = now()
        return self

    def __exit__(self, exc_type, exc, tb):
        self.data["finished"] = now()
        if exc_type is not None:
            self.data["status"] = "error"
            self.data["error"] = f"{exc_type.__name__}: {exc}"
        elif self.data["status"] == "running":
            self.data["status"] = "ok"
        write_json(self.path, self.data)
        return False


def verify_manifest(path):
    """Names of files whose digest no longer matches (empty when all match)."""
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    base = os.path.dirname(path)
    bad = []
    for name, digest in data["files"].items():
        full = os.path.join(base, name)
        if not os.path.exists(full) or sha256(full) != digest:
            bad.append(name)
    return bad
