"""CSV and JSON readers/writers for sweeps, impulse responses, profiles and reports."""
from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from pathlib import Path

import numpy as np

from .dsp import FrequencySweep, ImpulseResponse, SweepGeometry
from .extraction import MultipathProfile

SWEEP_HEADER = ("freq_hz", "re", "im")
CIR_HEADER = ("time_s", "re", "im")
PROFILE_HEADER = ("delay_s", "power_linear")
BER_HEADER = ("ebn0_db", "ber", "bits", "errors")
SPACING_RTOL = 1e-6


class FormatError(ValueError):
    """Malformed input file; ``line`` is 1-based."""

    def __init__(self, path, line: int | None, message: str):
        self.path, self.line = str(path), line
        where = f"{path}:{line}" if line is not None else str(path)
        super().__init__(f"{where}: {message}")


def atomic_write(path, text: str) -> Path:
    """Write ``text`` through a temporary file in the target directory and rename it into place."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def _fmt(x) -> str:
    return repr(float(x))


def _rows_to_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def read_header(path) -> tuple[str, ...]:
    with open(path, encoding="utf-8", newline="") as fh:
        first = fh.readline()
    return tuple(c.strip() for c in first.strip().split(","))


def _read_table(path, header):
    """Parse a numeric CSV with an exact header; returns an ``(n, len(header))`` array."""
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            got = next(reader)
        except StopIteration:
            raise FormatError(path, 1, "empty file") from None
        if tuple(c.strip() for c in got) != tuple(header):
            raise FormatError(path, 1, f"expected header {','.join(header)!r}, got {','.join(got)!r}")
        rows = []
        for row in reader:
            line = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise FormatError(path, line, f"expected {len(header)} fields, got {len(row)}")
            try:
                vals = [float(c) for c in row]
            except ValueError:
                raise FormatError(path, line, f"non-numeric field in {row!r}") from None
            if not all(math.isfinite(v) for v in vals):
                raise FormatError(path, line, "non-finite value")
            rows.append((line, vals))
    if not rows:
        raise FormatError(path, None, "no data rows")
    lines = np.array([r[0] for r in rows])
    return lines, np.array([r[1] for r in rows], dtype=float)


# --- sweeps ------------------------------------------------------------------

def read_sweep(path, label: str | None = None) -> FrequencySweep:
    lines, a = _read_table(path, SWEEP_HEADER)
    f = a[:, 0]
    if f.size < 2:
        raise FormatError(path, int(lines[0]), "a sweep needs at least two frequencies")
    df = np.diff(f)
    bad = np.flatnonzero(df <= 0)
    if bad.size:
        raise FormatError(path, int(lines[bad[0] + 1]), "frequencies must be strictly ascending")
    # the first interval is the reference so the report points at the first deviating row
    off = np.flatnonzero(np.abs(df - df[0]) > SPACING_RTOL * df[0])
    step = (f[-1] - f[0]) / (f.size - 1)
    if off.size:
        raise FormatError(path, int(lines[off[0] + 1]), "non-uniform frequency spacing")
    # the grid convention puts the last sample one step below f_max
    geom = SweepGeometry(float(f[0]), float(f[0] + f.size * step), f.size)
    return FrequencySweep(geom, a[:, 1] + 1j * a[:, 2], Path(path).stem if label is None else label)


def write_sweep(path, sweep: FrequencySweep) -> Path:
    rows = ((_fmt(f), _fmt(z.real), _fmt(z.imag)) for f, z in zip(sweep.frequencies(), sweep.samples))
    return atomic_write(path, _rows_to_text(SWEEP_HEADER, rows))


# --- impulse responses and profiles ------------------------------------------

def read_cir(path, label: str | None = None, sample_period: float | None = None) -> ImpulseResponse:
    """Read a CIR CSV; a single-row file needs ``sample_period`` supplied."""
    lines, a = _read_table(path, CIR_HEADER)
    t = a[:, 0]
    if t.size == 1:
        if sample_period is None:
            raise FormatError(path, int(lines[0]), "a single-sample CIR needs an explicit sample period")
        return ImpulseResponse(sample_period, a[:, 1] + 1j * a[:, 2], float(t[0]),
                               Path(path).stem if label is None else label)
    dt = np.diff(t)
    step = (t[-1] - t[0]) / (t.size - 1)
    off = np.flatnonzero(np.abs(dt - step) > SPACING_RTOL * abs(step))
    if not step > 0 or off.size:
        raise FormatError(path, int(lines[(off[0] if off.size else 0) + 1]),
                          "CIR times must be uniformly spaced and ascending")
    return ImpulseResponse(step, a[:, 1] + 1j * a[:, 2], float(t[0]),
                           Path(path).stem if label is None else label)


def write_cir(path, cir: ImpulseResponse) -> Path:
    rows = ((_fmt(t), _fmt(z.real), _fmt(z.imag)) for t, z in zip(cir.times(), cir.samples))
    return atomic_write(path, _rows_to_text(CIR_HEADER, rows))


def read_profile(path, threshold_db: float | None = None) -> MultipathProfile:
    lines, a = _read_table(path, PROFILE_HEADER)
    try:
        return MultipathProfile(a[:, 0], a[:, 1], threshold_db)
    except ValueError as exc:
        raise FormatError(path, None, str(exc)) from None


def write_profile(path, profile: MultipathProfile) -> Path:
    rows = ((_fmt(t), _fmt(p)) for t, p in zip(profile.times, profile.powers))
    return atomic_write(path, _rows_to_text(PROFILE_HEADER, rows))


# --- JSON --------------------------------------------------------------------

def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def _clean(obj):
    """Replace NaN with ``None``; infinities stay and serialize as ``Infinity``."""
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (float, np.floating)) and math.isnan(obj):
        return None
    return obj


def dumps_json(obj) -> str:
    return json.dumps(_clean(obj), indent=2, sort_keys=False, default=_json_default) + "\n"


def write_json(path, obj) -> Path:
    return atomic_write(path, dumps_json(obj))


def read_json(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise FormatError(path, exc.lineno, exc.msg) from None


def sidecar_path(path) -> Path:
    """``run/x_0001.cir.csv`` -> ``run/x_0001.json``."""
    p = Path(path)
    name = p.name
    for suffix in (".cir.csv", ".profile.csv", ".csv"):
        if name.endswith(suffix):
            return p.with_name(name[: -len(suffix)] + ".json")
    return p.with_suffix(".json")


def read_sidecar(path) -> dict:
    sc = sidecar_path(path)
    return read_json(sc) if sc.exists() else {}


# --- BER ---------------------------------------------------------------------

def write_ber(path, curve, reference_columns: dict[str, np.ndarray] | None = None) -> Path:
    header = list(BER_HEADER)
    cols = reference_columns or {}
    header += list(cols)
    rows = []
    for i, p in enumerate(curve.points):
        row = [_fmt(p.eb_n0), _fmt(p.ber), str(p.bits), str(p.errors)]
        row += [_fmt(v[i]) for v in cols.values()]
        rows.append(row)
    return atomic_write(path, _rows_to_text(header, rows))


def read_ber(path) -> list[tuple[float, float, int, int]]:
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header[:4]) != BER_HEADER:
            raise FormatError(path, 1, f"expected header starting with {','.join(BER_HEADER)!r}")
        return [(float(r[0]), float(r[1]), int(r[2]), int(r[3])) for r in reader if r]
