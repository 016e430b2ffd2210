"""Text container formats for FRF tensors and time series.

An FRF container is a directory (or a ``.zip`` archive of the same two
members) holding ``meta.json`` and ``frf.csv``; rows of ``frf.csv`` are
``f_hz,out_id,in_id,re,im`` ordered by frequency, then output, then
input, in the channel order given by ``meta.json``. A time-series
container holds ``meta.json`` and ``ts.csv`` with a ``t`` column followed
by one column per channel.
"""

from __future__ import annotations

import csv
import io
import json
import os
import zipfile
from pathlib import Path

import numpy as np

from .errors import FormatError
from .frf import ChannelMeta, FrfDataset, ResponseKind, TimeSeriesSet
from .serialization import dump_json, fmt_float

FRF_FORMAT = "loewner-shm/frf"
TS_FORMAT = "loewner-shm/time-series"
FORMAT_VERSION = 1
_ZIP_DATE = (1980, 1, 1, 0, 0, 0)


def _grid_descriptor(f: np.ndarray) -> dict:
    d = {"count": int(f.size), "first_hz": float(f[0]), "last_hz": float(f[-1])}
    steps = np.diff(f)
    uniform = bool(f.size < 2 or np.allclose(steps, steps[0], rtol=1e-9, atol=0.0))
    d["uniform"] = uniform
    if uniform and f.size > 1:
        d["step_hz"] = float(steps[0])
    return d


def frf_meta(frf: FrfDataset) -> dict:
    return {
        "format": FRF_FORMAT,
        "version": FORMAT_VERSION,
        "response_kind": frf.response_kind.value,
        "outputs": [c.to_dict() for c in frf.output_meta],
        "inputs": [c.to_dict() for c in frf.input_meta],
        "frequency_grid": _grid_descriptor(frf.frequencies),
    }


def frf_csv_text(frf: FrfDataset) -> str:
    out_ids = [c.id for c in frf.output_meta]
    in_ids = [c.id for c in frf.input_meta]
    lines = ["f_hz,out_id,in_id,re,im"]
    for k, f in enumerate(frf.frequencies):
        fs = fmt_float(f)
        block = frf.values[:, :, k]
        for i, oid in enumerate(out_ids):
            for j, iid in enumerate(in_ids):
                h = block[i, j]
                lines.append(f"{fs},{oid},{iid},{fmt_float(h.real)},{fmt_float(h.imag)}")
    return "\n".join(lines) + "\n"


def _write_members(path: Path, members: dict[str, str]) -> None:
    if path.suffix == ".zip":
        path.parent.mkdir(parents=True, exist_ok=True)
        with zipfile.ZipFile(path, "w", compression=zipfile.ZIP_DEFLATED) as zf:
            for name, text in members.items():
                info = zipfile.ZipInfo(name, date_time=_ZIP_DATE)
                info.compress_type = zipfile.ZIP_DEFLATED
                info.external_attr = 0o644 << 16
                zf.writestr(info, text.encode("utf-8"))
    else:
        path.mkdir(parents=True, exist_ok=True)
        for name, text in members.items():
            with open(path / name, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(text)


def _read_member(path: Path, name: str) -> str:
    if path.suffix == ".zip":
        if not path.is_file():
            raise FileNotFoundError(str(path))
        with zipfile.ZipFile(path) as zf:
            try:
                return zf.read(name).decode("utf-8")
            except KeyError:
                raise FormatError(f"{path} has no member {name!r}") from None
    member = path / name
    if not member.is_file():
        raise FileNotFoundError(str(member))
    return member.read_text(encoding="utf-8")


def write_frf(frf: FrfDataset, path: str | os.PathLike) -> Path:
    """Write ``frf`` to a container directory, or a zip archive if ``path`` ends in ``.zip``."""
    path = Path(path)
    _write_members(path, {"meta.json": dump_json(frf_meta(frf)), "frf.csv": frf_csv_text(frf)})
    return path


def _parse_meta(text: str, expected_format: str) -> dict:
    try:
        meta = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"meta.json is not valid JSON: {exc}") from None
    fmt = meta.get("format", expected_format)
    if fmt != expected_format:
        raise FormatError(f"expected format {expected_format!r}, found {fmt!r}")
    return meta


def read_frf(path: str | os.PathLike) -> FrfDataset:
    path = Path(path)
    meta = _parse_meta(_read_member(path, "meta.json"), FRF_FORMAT)
    kind = meta.get("response_kind")
    try:
        kind = ResponseKind(kind)
    except ValueError:
        raise FormatError(f"unknown response_kind {kind!r}") from None
    try:
        outs = tuple(ChannelMeta.from_dict(c) for c in meta["outputs"])
        ins = tuple(ChannelMeta.from_dict(c) for c in meta["inputs"])
        grid = meta["frequency_grid"]
        count = int(grid["count"])
    except (KeyError, ValueError, TypeError) as exc:
        raise FormatError(f"malformed FRF meta.json: {exc}") from None

    p, m = len(outs), len(ins)
    rows = list(csv.reader(io.StringIO(_read_member(path, "frf.csv"))))
    if not rows or [h.strip() for h in rows[0]] != ["f_hz", "out_id", "in_id", "re", "im"]:
        raise FormatError("frf.csv header must be f_hz,out_id,in_id,re,im")
    body = rows[1:]
    if len(body) != count * p * m:
        raise FormatError(f"frf.csv has {len(body)} rows, expected {count * p * m}")

    out_ids = [c.id for c in outs]
    in_ids = [c.id for c in ins]
    freqs = np.empty(count)
    values = np.empty((p, m, count), dtype=complex)
    r = 0
    try:
        for k in range(count):
            for i in range(p):
                for j in range(m):
                    f_s, oid, iid, re_s, im_s = body[r]
                    if oid != out_ids[i] or iid != in_ids[j]:
                        raise FormatError(f"frf.csv row {r + 2}: expected ({out_ids[i]}, {in_ids[j]}), got ({oid}, {iid})")
                    f = float(f_s)
                    if i == 0 and j == 0:
                        freqs[k] = f
                    elif f != freqs[k]:
                        raise FormatError(f"frf.csv row {r + 2}: frequency changes inside a bin block")
                    values[i, j, k] = complex(float(re_s), float(im_s))
                    r += 1
    except ValueError as exc:
        if isinstance(exc, FormatError):
            raise
        raise FormatError(f"frf.csv row {r + 2}: {exc}") from None
    if count and (freqs[0] != float(grid["first_hz"]) or freqs[-1] != float(grid["last_hz"])):
        raise FormatError("frequency_grid descriptor does not match frf.csv")
    try:
        return FrfDataset(freqs, values, outs, ins, kind)
    except ValueError as exc:
        raise FormatError(f"invalid FRF data: {exc}") from None


def write_time_series(ts: TimeSeriesSet, path: str | os.PathLike) -> Path:
    path = Path(path)
    meta = {
        "format": TS_FORMAT,
        "version": FORMAT_VERSION,
        "sample_rate": ts.sample_rate,
        "n_samples": ts.n_samples,
        "channels": [c.to_dict() for c in ts.channels],
    }
    cols = np.vstack([ts.time[None, :], ts.samples])
    lines = ["t," + ",".join(ts.channel_ids)]
    lines.extend(",".join(fmt_float(v) for v in row) for row in cols.T)
    _write_members(path, {"meta.json": dump_json(meta), "ts.csv": "\n".join(lines) + "\n"})
    return path


def read_time_series(path: str | os.PathLike) -> TimeSeriesSet:
    path = Path(path)
    meta = _parse_meta(_read_member(path, "meta.json"), TS_FORMAT)
    try:
        channels = tuple(ChannelMeta.from_dict(c) for c in meta["channels"])
        fs = float(meta["sample_rate"])
    except (KeyError, ValueError, TypeError) as exc:
        raise FormatError(f"malformed time-series meta.json: {exc}") from None
    rows = list(csv.reader(io.StringIO(_read_member(path, "ts.csv"))))
    header = rows[0] if rows else []
    if header != ["t"] + [c.id for c in channels]:
        raise FormatError("ts.csv header does not match meta.json channels")
    try:
        data = np.array([[float(v) for v in row] for row in rows[1:]])
    except ValueError as exc:
        raise FormatError(f"ts.csv: {exc}") from None
    if data.ndim != 2 or data.shape[1] != len(channels) + 1:
        raise FormatError("ts.csv has inconsistent column counts")
    return TimeSeriesSet(fs, data[:, 1:].T, channels)
