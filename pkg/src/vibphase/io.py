"""Record CSV format, packed window stores and phase-audit files.

Record CSV layout::

    # sample_rate_hz=3000
    # label=Class1
    # axes=x,y,z
    x,y,z
    0.12,-0.03,0.88
    ...

Header lines start with ``#`` and hold ``key=value`` pairs; all are optional
when the caller supplies the sample rate. ``axes`` names the columns holding
the X, Y and Z samples (default ``x,y,z``, matched case-insensitively), so
vendor files with extra columns such as a timestamp read unchanged.
"""

from __future__ import annotations

import csv
import io as _io
import os
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .segmentation import WindowStack
from .types import ClassLabel, SamplingSpec, TriAxialRecord


class IngestError(ValueError):
    """Base class for record parsing failures."""


class MissingColumnsError(IngestError):
    pass


class NonNumericCellError(IngestError):
    def __init__(self, path, row: int, column: str, value: str):
        self.row, self.column, self.value = row, column, value
        super().__init__(f"{path}: row {row}, column {column!r}: {value!r} is not a finite number")


class LengthMismatchError(IngestError):
    pass


class UnknownSampleRateError(IngestError):
    pass


def _parse_header(lines: list[str]) -> dict[str, str]:
    meta = {}
    for line in lines:
        body = line.lstrip("#").strip()
        if "=" in body:
            key, _, value = body.partition("=")
            meta[key.strip().lower()] = value.strip()
    return meta


def ingest_csv(path: str | os.PathLike, spec_override: SamplingSpec | float | None = None) -> TriAxialRecord:
    """Read a three-axis record.

    ``spec_override`` (a SamplingSpec or bare rate in Hz) takes precedence
    over the ``sample_rate_hz`` header key.
    """
    path = Path(path)
    text = path.read_text()
    lines = text.splitlines()
    n_meta = 0
    while n_meta < len(lines) and lines[n_meta].startswith("#"):
        n_meta += 1
    meta = _parse_header(lines[:n_meta])
    if n_meta >= len(lines):
        raise MissingColumnsError(f"{path}: no column header")

    columns = [c.strip().lower() for c in lines[n_meta].split(",")]
    wanted = [a.strip().lower() for a in meta.get("axes", "x,y,z").split(",")]
    if len(wanted) != 3:
        raise MissingColumnsError(f"{path}: axes header must name three columns, got {wanted}")
    missing = [w for w in wanted if w not in columns]
    if missing:
        raise MissingColumnsError(f"{path}: missing columns {missing}; found {columns}")
    col_idx = [columns.index(w) for w in wanted]

    if isinstance(spec_override, SamplingSpec):
        rate = spec_override.sample_rate_hz
    elif spec_override is not None:
        rate = float(spec_override)
    elif "sample_rate_hz" in meta:
        try:
            rate = float(meta["sample_rate_hz"])
        except ValueError:
            raise UnknownSampleRateError(f"{path}: bad sample_rate_hz {meta['sample_rate_hz']!r}") from None
    else:
        raise UnknownSampleRateError(f"{path}: no sample_rate_hz header and no override given")

    body = "\n".join(lines[n_meta + 1 :])
    first_row = n_meta + 2  # 1-based file line of the first data row
    try:
        table = np.loadtxt(_io.StringIO(body), delimiter=",", ndmin=2, usecols=col_idx)
    except ValueError:
        _scan_rows(path, body, columns, col_idx, first_row)
        raise
    if table.size == 0:
        raise LengthMismatchError(f"{path}: no data rows")
    bad = np.argwhere(~np.isfinite(table))
    if bad.size:
        r, c = bad[0]
        raise NonNumericCellError(path, first_row + int(r), wanted[c], str(table[r, c]))

    if isinstance(spec_override, SamplingSpec) and spec_override.n_samples != table.shape[0]:
        raise LengthMismatchError(
            f"{path}: {table.shape[0]} rows but override expects {spec_override.n_samples}"
        )
    label = ClassLabel.parse(meta["label"]) if meta.get("label") else None
    return TriAxialRecord(
        SamplingSpec(rate, table.shape[0]),
        table.T,
        label=label,
        source_id=meta.get("source_id", path.stem),
        unit=meta.get("unit", "arb"),
    )


def _scan_rows(path, body: str, columns: list[str], col_idx: list[int], first_row: int) -> None:
    """Locate the cell that made the fast parser fail and raise a precise error."""
    for offset, row in enumerate(csv.reader(_io.StringIO(body))):
        if not row:
            continue
        line_no = first_row + offset
        if len(row) != len(columns):
            raise LengthMismatchError(
                f"{path}: row {line_no} has {len(row)} cells, header has {len(columns)}"
            )
        for c in col_idx:
            try:
                float(row[c])
            except ValueError:
                raise NonNumericCellError(path, line_no, columns[c], row[c]) from None


def write_csv(record: TriAxialRecord, path: str | os.PathLike, extra_meta: dict | None = None) -> None:
    """Write ``record`` in the format :func:`ingest_csv` reads; output is byte-stable."""
    lines = [f"# {k}={v}" for k, v in (extra_meta or {}).items()]
    lines.append(f"# sample_rate_hz={record.spec.sample_rate_hz!r}")
    if record.label is not None:
        lines.append(f"# label={record.label.tag}")
    if record.source_id:
        lines.append(f"# source_id={record.source_id}")
    lines.append(f"# unit={record.unit}")
    lines.append("# axes=x,y,z")
    lines.append("x,y,z")
    rows = record.data.T
    lines.extend(f"{a!r},{b!r},{c!r}" for a, b, c in rows.tolist())
    Path(path).write_text("\n".join(lines) + "\n")


# Packed window store:
#   magic  b"PALN1"
#   <I     header byte length H
#   H      UTF-8 text "L=..;fs=..;label=..;mode=..;n=..;source=..;residual_s=.."
#   n x (<q origin_index, 3*L <f8 samples ordered X row, Y row, Z row)
MAGIC = b"PALN1"


@dataclass(frozen=True)
class WindowStore:
    mode: str
    stack: WindowStack


def write_paln1(stack: WindowStack, mode: str, path: str | os.PathLike) -> None:
    L = stack.data.shape[-1]
    label = stack.label.tag if stack.label is not None else ""
    header = (
        f"L={L};fs={stack.sample_rate_hz!r};label={label};mode={mode};"
        f"n={len(stack)};source={stack.source_id};residual_s={stack.residual_s!r}"
    ).encode()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(header)))
        fh.write(header)
        rec = np.zeros(len(stack), dtype=[("origin", "<i8"), ("samples", "<f8", (3 * L,))])
        rec["origin"] = stack.origins
        rec["samples"] = stack.data.reshape(len(stack), 3 * L)
        fh.write(rec.tobytes())


def read_paln1(path: str | os.PathLike) -> WindowStore:
    raw = Path(path).read_bytes()
    if raw[:5] != MAGIC:
        raise IngestError(f"{path}: not a PALN1 window store")
    (hlen,) = struct.unpack_from("<I", raw, 5)
    fields = dict(kv.split("=", 1) for kv in raw[9 : 9 + hlen].decode().split(";"))
    L, n = int(fields["L"]), int(fields["n"])
    rec = np.frombuffer(raw, dtype=[("origin", "<i8"), ("samples", "<f8", (3 * L,))], offset=9 + hlen, count=n)
    stack = WindowStack(
        rec["samples"].reshape(n, 3, L).copy(),
        rec["origin"].astype(np.int64),
        float(fields["fs"]),
        float(fields["residual_s"]),
        ClassLabel.parse(fields["label"]) if fields["label"] else None,
        fields["source"],
    )
    return WindowStore(fields["mode"], stack)


def write_window_csvs(stack: WindowStack, mode: str, directory: str | os.PathLike) -> list[Path]:
    """One CSV per window, readable by :func:`ingest_csv`."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for i, (w, origin) in enumerate(zip(stack.data, stack.origins)):
        rec = TriAxialRecord(
            SamplingSpec(stack.sample_rate_hz, w.shape[-1]),
            w,
            label=stack.label,
            source_id=f"{stack.source_id}#{int(origin)}",
        )
        p = directory / f"{stack.source_id}_w{i:04d}.csv"
        write_csv(rec, p, {"mode": mode, "origin_index": int(origin)})
        paths.append(p)
    return paths


AUDIT_FIELDS = (
    "source_id",
    "window",
    "origin_index",
    "freq_hz",
    "pre_phase_x",
    "pre_phase_y",
    "pre_phase_z",
    "post_phase_x",
    "post_phase_y",
    "post_phase_z",
    "dt_x",
    "dt_y",
    "dt_z",
)


def write_audit(rows: list[dict], path: str | os.PathLike) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=AUDIT_FIELDS)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})


def read_audit(path: str | os.PathLike) -> list[dict]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    for row in rows:
        for k in AUDIT_FIELDS[2:]:
            row[k] = float(row[k]) if k != "origin_index" else int(row[k])
        row["window"] = int(row["window"])
    return rows
