"""
File formats: fixed-precision CSV tables, run manifests and realization dumps.
"""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

FLOAT_FMT = "{:.12g}"
DUMP_MAGIC = "hmimo-realizations"


def fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (float, np.floating)):
        return FLOAT_FMT.format(float(value))
    return str(value)


def write_csv(path: str | Path, header: Sequence[str], rows: Iterable[Sequence], comments: Sequence[str] = ()) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        for line in comments:
            fh.write(f"# {line}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])
    return path


def read_csv(path: str | Path) -> tuple[list[str], list[dict[str, str]]]:
    """Return (comment lines, rows as dicts)."""
    comments, body = [], []
    with Path(path).open() as fh:
        for line in fh:
            if line.startswith("#"):
                comments.append(line[1:].strip())
            else:
                body.append(line)
    return comments, list(csv.DictReader(body))


def manifest_path(out: str | Path) -> Path:
    return Path(out).with_suffix(".manifest")


def write_manifest(path: str | Path, entries: dict) -> Path:
    """Structured ``key = value`` text, one entry per line, in insertion order."""
    path = Path(path)
    with path.open("w") as fh:
        for key, value in entries.items():
            if isinstance(value, (list, tuple)):
                value = ",".join(fmt(v) for v in value)
            fh.write(f"{key} = {fmt(value)}\n")
    return path


def read_manifest(path: str | Path) -> dict[str, str]:
    out = {}
    for line in Path(path).read_text().splitlines():
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        key, _, value = line.partition("=")
        out[key.strip()] = value.strip()
    return out


def parse_key_values(text: str) -> dict[str, str]:
    """Parse a ``key = value`` config file; ``#`` starts a comment."""
    out = {}
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line {n}: expected key = value")
        key, _, value = line.partition("=")
        out[key.strip().replace("-", "_")] = value.strip()
    return out


def _dump_header(meta: dict) -> str:
    return DUMP_MAGIC + " " + " ".join(f"{k}={v}" for k, v in meta.items())


def write_realizations(path: str | Path, H: np.ndarray, meta: dict, fmt_: str = "csv") -> Path:
    """Dump ``H`` of shape ``(count, Nr, Nt)``.

    ``csv``: a ``#`` header line with ``key=value`` metadata, a column header
    ``realization,rx,re_0,im_0,...``, then one row per receive element.
    ``bin``: the same header line, a newline, then little-endian float64
    values in ``(count, Nr, Nt, re/im)`` order.
    """
    path = Path(path)
    count, nr, nt = H.shape
    meta = dict(meta, count=count, shape=f"{nr}x{nt}", format=fmt_)
    header = _dump_header(meta)
    if fmt_ == "csv":
        cols = ["realization", "rx"] + [f"{p}_{j}" for j in range(nt) for p in ("re", "im")]

        def rows():
            for k in range(count):
                for i in range(nr):
                    vals = np.empty(2 * nt)
                    vals[0::2] = H[k, i].real
                    vals[1::2] = H[k, i].imag
                    yield [k, i, *vals]

        return write_csv(path, cols, rows(), comments=[header])
    if fmt_ == "bin":
        data = np.stack([H.real, H.imag], axis=-1).astype("<f8")
        with path.open("wb") as fh:
            fh.write((header + "\n").encode("ascii"))
            fh.write(data.tobytes())
        return path
    raise ValueError(f"unknown dump format {fmt_!r}")


def read_realizations(path: str | Path) -> tuple[dict[str, str], np.ndarray]:
    path = Path(path)
    raw = path.read_bytes()
    first, _, rest = raw.partition(b"\n")
    first = first.decode("ascii").lstrip("# ").strip()
    if not first.startswith(DUMP_MAGIC):
        raise ValueError(f"{path} is not a realization dump")
    meta = dict(tok.split("=", 1) for tok in first[len(DUMP_MAGIC):].split())
    count = int(meta["count"])
    nr, nt = (int(v) for v in meta["shape"].split("x"))
    if meta["format"] == "bin":
        data = np.frombuffer(rest, dtype="<f8").reshape(count, nr, nt, 2)
        return meta, data[..., 0] + 1j * data[..., 1]
    _, rows = read_csv(path)
    H = np.empty((count, nr, nt), dtype=complex)
    for row in rows:
        k, i = int(row["realization"]), int(row["rx"])
        H[k, i] = [float(row[f"re_{j}"]) + 1j * float(row[f"im_{j}"]) for j in range(nt)]
    return meta, H
