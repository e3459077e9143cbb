"""Time-series persistence: compact binary layout plus lossless CSV export.

Binary layout (little-endian): 16-byte magic+version, dt as f64, length
as u64, length-prefixed UTF-8 label (u32 prefix), 32-byte params
fingerprint, then the samples as contiguous f64.  Text storage of 1e7
samples is slow and lossy; the CSV export uses 17 significant digits so a
round trip through text is still exact.

All writes go to a temporary file in the target directory and are renamed
into place, so readers never see a partial file.
"""

import os
import struct
import tempfile
from pathlib import Path

import numpy as np

from .evolve import TimeSeries

MAGIC = b"kerrchaos-ts\x00\x00\x00\x01"
assert len(MAGIC) == 16


class FileFormatError(ValueError):
    """Not a valid time-series file."""


def _atomic_write(path: Path, payload: bytes):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_series(path, ts: TimeSeries):
    label = ts.label.encode("utf-8")
    header = MAGIC + struct.pack("<dQI", ts.dt, len(ts.values), len(label))
    payload = header + label + ts.params_hash + ts.values.astype("<f8").tobytes()
    _atomic_write(Path(path), payload)


def read_series(path) -> TimeSeries:
    raw = Path(path).read_bytes()
    if len(raw) < 16 + 20 or raw[:16] != MAGIC:
        raise FileFormatError(f"{path}: not a kerrchaos time-series file")
    dt, length, label_len = struct.unpack_from("<dQI", raw, 16)
    off = 16 + 20
    label = raw[off : off + label_len].decode("utf-8")
    off += label_len
    params_hash = raw[off : off + 32]
    off += 32
    expected = off + 8 * length
    if len(raw) != expected:
        raise FileFormatError(
            f"{path}: payload is {len(raw)} bytes, header implies {expected}"
        )
    values = np.frombuffer(raw, dtype="<f8", count=length, offset=off).copy()
    return TimeSeries(dt=dt, values=values, label=label, params_hash=params_hash)


def write_series_csv(path, ts: TimeSeries):
    """Lossless text export: 17-significant-digit decimals round-trip f64."""
    lines = [
        f"# dt = {ts.dt!r}",
        f"# label = {ts.label}",
        f"# params_hash = {ts.params_hash.hex()}",
        "index,value",
    ]
    lines.extend(f"{i},{v:.17g}" for i, v in enumerate(ts.values))
    _atomic_write(Path(path), ("\n".join(lines) + "\n").encode("utf-8"))


def read_series_csv(path) -> TimeSeries:
    dt = None
    label = ""
    params_hash = bytes(32)
    values = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, _, val = line[1:].partition("=")
                key = key.strip()
                if key == "dt":
                    dt = float(val)
                elif key == "label":
                    label = val.strip()
                elif key == "params_hash":
                    params_hash = bytes.fromhex(val.strip())
            elif not line.startswith("index"):
                values.append(float(line.split(",")[1]))
    if dt is None:
        raise FileFormatError(f"{path}: missing '# dt =' header")
    return TimeSeries(dt=dt, values=np.array(values), label=label, params_hash=params_hash)


def write_table_csv(path, columns, rows):
    """Small plot-ready tables (spectra, histograms, divergence curves)."""
    lines = [",".join(str(c) for c in columns)]
    for row in rows:
        cells = [f"{v:.17g}" if isinstance(v, float) else str(v) for v in row]
        lines.append(",".join(cells))
    _atomic_write(Path(path), ("\n".join(lines) + "\n").encode("utf-8"))
