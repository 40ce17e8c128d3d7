"""Single-file dataset container: text header + checksummed binary payload.

Byte layout (version 1):

    NVDS 1\\n                      magic and format version
    header <n>\\n                  byte length of the JSON header
    <n bytes of UTF-8 JSON>       kind, aborted flag, metadata, fits,
                                  axis names/units, array directory
    \\n                            separator
    <payload>                     the directory's arrays, concatenated,
                                  little-endian, C order
    crc <crc32 hex8> <bytes>\\n    CRC-32 and byte length of the payload

The header stays greppable text while the numeric payload stays compact
binary. Arrays are written in bounded chunks so multi-megapixel scans
stream to disk without a second in-memory copy, with the CRC accumulated
on the fly. Saves go to a temporary file in the target directory and are
renamed into place, so an interrupted save never leaves a file that
parses as valid: any truncation breaks the length or CRC check.
"""

import json
import os
import zlib
from pathlib import Path
from typing import Union

import numpy as np

from ..analysis.fit import FitResult
from ..experiments.dataset import Axis, Dataset

MAGIC = b"NVDS 1\n"
_CHUNK_BYTES = 1 << 22  # 4 MiB write granularity


class DataFileError(ValueError):
    """Corrupt, truncated, or unsupported dataset file."""


def _json_default(obj):
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    raise TypeError(f"metadata value of type {type(obj).__name__} "
                    "is not serializable")


def _le_dtype(arr: np.ndarray) -> np.dtype:
    dt = arr.dtype
    if dt.kind not in "fiub":
        dt = np.dtype("float64")
    return dt.newbyteorder("<")


def _array_directory(ds: Dataset):
    """(name, array) pairs in payload order plus their header entries."""
    arrays = []
    for ax in ds.axes:
        arrays.append((f"axis:{ax.name}", np.asarray(ax.values)))
    arrays.append(("values", ds.values))
    if ds.uncertainty is not None:
        arrays.append(("uncertainty", ds.uncertainty))
    entries = [{"name": name, "dtype": _le_dtype(a).str,
                "shape": list(a.shape)} for name, a in arrays]
    return arrays, entries


def _write_array(f, arr: np.ndarray, crc: int) -> int:
    data = np.ascontiguousarray(arr, dtype=_le_dtype(arr))
    view = data.reshape(-1).view(np.uint8)
    step = max(1, _CHUNK_BYTES)
    for start in range(0, view.nbytes, step):
        chunk = view[start:start + step].tobytes()
        crc = zlib.crc32(chunk, crc)
        f.write(chunk)
    return crc


def save_dataset(ds: Dataset, path: Union[str, Path]) -> None:
    """Atomically write a Dataset; see the module docstring for layout."""
    target = Path(path)
    arrays, entries = _array_directory(ds)
    header = {
        "kind": ds.kind,
        "aborted": bool(ds.aborted),
        "metadata": ds.metadata,
        "fits": [f.to_dict() for f in ds.fits],
        "axes": [{"name": ax.name, "unit": ax.unit} for ax in ds.axes],
        "arrays": entries,
    }
    blob = json.dumps(header, default=_json_default,
                      separators=(",", ":")).encode("utf-8")
    tmp = target.with_name(target.name + ".part")
    try:
        with open(tmp, "wb") as f:
            f.write(MAGIC)
            f.write(b"header %d\n" % len(blob))
            f.write(blob)
            f.write(b"\n")
            crc = 0
            total = 0
            for _, arr in arrays:
                crc = _write_array(f, arr, crc)
                total += np.ascontiguousarray(arr).size * _le_dtype(arr).itemsize
            f.write(b"crc %08x %d\n" % (crc & 0xFFFFFFFF, total))
            f.flush()
            os.fsync(f.fileno())
        os.replace(tmp, target)
    finally:
        if tmp.exists():
            tmp.unlink()


def _read_exact(f, n: int, what: str) -> bytes:
    data = f.read(n)
    if len(data) != n:
        raise DataFileError(f"truncated file: {what} is incomplete")
    return data


def load_dataset(path: Union[str, Path]) -> Dataset:
    """Read and verify a dataset file written by save_dataset."""
    p = Path(path)
    with open(p, "rb") as f:
        magic = f.readline(len(MAGIC) + 1)
        if magic != MAGIC:
            raise DataFileError(
                f"{p.name}: not a dataset file or unsupported version")
        hline = f.readline(64)
        parts = hline.split()
        if len(parts) != 2 or parts[0] != b"header" or not parts[1].isdigit():
            raise DataFileError(f"{p.name}: malformed header length line")
        blob = _read_exact(f, int(parts[1]), "header")
        try:
            header = json.loads(blob.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as ex:
            raise DataFileError(f"{p.name}: corrupt header: {ex}") from None
        if _read_exact(f, 1, "header separator") != b"\n":
            raise DataFileError(f"{p.name}: missing header separator")
        crc = 0
        total = 0
        payload = {}
        for entry in header.get("arrays", []):
            shape = tuple(int(n) for n in entry["shape"])
            dtype = np.dtype(entry["dtype"])
            nbytes = int(np.prod(shape, dtype=np.int64)) * dtype.itemsize
            buf = _read_exact(f, nbytes, f"array {entry['name']!r}")
            crc = zlib.crc32(buf, crc)
            total += nbytes
            payload[entry["name"]] = np.frombuffer(
                buf, dtype=dtype).reshape(shape)
        footer = f.readline(64)
        fparts = footer.split()
        if not footer.endswith(b"\n") or len(fparts) != 3 or fparts[0] != b"crc":
            raise DataFileError(f"{p.name}: truncated file: missing checksum")
        try:
            want_crc = int(fparts[1], 16)
            want_len = int(fparts[2])
        except ValueError:
            raise DataFileError(f"{p.name}: malformed checksum line") from None
        if want_len != total or want_crc != (crc & 0xFFFFFFFF):
            raise DataFileError(f"{p.name}: checksum mismatch")
        if f.read(1):
            raise DataFileError(f"{p.name}: trailing data after checksum")
    axes = []
    for ax in header.get("axes", []):
        key = f"axis:{ax['name']}"
        if key not in payload:
            raise DataFileError(f"{p.name}: missing axis array {ax['name']!r}")
        axes.append(Axis(name=ax["name"], values=payload[key],
                         unit=ax.get("unit", "")))
    if "values" not in payload:
        raise DataFileError(f"{p.name}: missing values array")
    try:
        return Dataset(
            kind=header["kind"],
            axes=tuple(axes),
            values=payload["values"],
            uncertainty=payload.get("uncertainty"),
            metadata=header.get("metadata", {}),
            fits=[FitResult.from_dict(d) for d in header.get("fits", [])],
            aborted=bool(header.get("aborted", False)))
    except (KeyError, ValueError) as ex:
        raise DataFileError(f"{p.name}: inconsistent contents: {ex}") from None
