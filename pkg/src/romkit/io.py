"""File formats.

The binary matrix container (``.dmat``) is a 21-byte header — magic
``DMAT``, a version byte, row and column counts as little-endian
uint64 — followed by the entries as little-endian float64 in
column-major order.  Malformed files raise :class:`ParseError` with
the byte offset of the first problem.  CSV is supported for small
matrices so results stay greppable; writes above 1000 elements are
refused in favour of the binary format.

Markov-parameter sequences, snapshot matrices, systems and reduced
models are stored as matrix files plus a small JSON sidecar carrying
the metadata that a bare matrix cannot (sample period, variable
blocks, provenance, ...).
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, DataError, ParseError
from .lti import BalancedROM, ContinuousLTI, DiscreteLTI

__all__ = [
    "atomic_write_bytes",
    "atomic_write_text",
    "write_json",
    "read_json",
    "read_descriptor",
    "write_dmat",
    "read_dmat",
    "write_csv_matrix",
    "read_csv_matrix",
    "write_matrix",
    "read_matrix",
    "write_markov",
    "read_markov",
    "write_snapshots",
    "read_snapshots",
    "save_system",
    "load_system",
    "save_rom",
    "load_rom",
    "sha256_file",
]

_MAGIC = b"DMAT"
_VERSION = 1
_HEADER_BYTES = 21
_CSV_ELEMENT_LIMIT = 1000


# ---------------------------------------------------------------------------
# primitives


def atomic_write_bytes(path, payload):
    """Write ``payload`` to ``path`` via a same-directory temp file and
    rename, so readers never observe a half-written file."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def atomic_write_text(path, text):
    atomic_write_bytes(path, text.encode("utf-8"))


def write_json(path, obj):
    atomic_write_text(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def read_json(path):
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError("cannot read %s: %s" % (path, exc)) from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError("%s: %s" % (path, exc.msg), offset=exc.pos) from exc


def read_descriptor(descriptor):
    """A descriptor argument may be a mapping or a path to a JSON file."""
    if isinstance(descriptor, dict):
        return descriptor
    obj = read_json(descriptor)
    if not isinstance(obj, dict):
        raise DataError("descriptor %s must hold a JSON object"
                        % (descriptor,))
    return obj


def sha256_file(path):
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


# ---------------------------------------------------------------------------
# DMAT


def write_dmat(path, matrix):
    m = np.asarray(matrix, dtype=float)
    if m.ndim == 1:
        m = m[:, None]
    if m.ndim != 2:
        raise ConfigurationError("DMAT stores 2-D matrices, got ndim=%d"
                                 % m.ndim)
    if not np.all(np.isfinite(m)):
        raise DataError("refusing to write non-finite entries")
    rows, cols = m.shape
    payload = (_MAGIC + bytes([_VERSION])
               + rows.to_bytes(8, "little") + cols.to_bytes(8, "little")
               + m.astype("<f8").tobytes(order="F"))
    atomic_write_bytes(path, payload)


def read_dmat(path):
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise DataError("cannot read %s: %s" % (path, exc)) from exc
    if len(raw) < 4 or raw[:4] != _MAGIC:
        raise ParseError("%s: bad magic, not a DMAT file" % path, offset=0)
    if len(raw) < 5:
        raise ParseError("%s: missing version byte" % path, offset=4)
    if raw[4] != _VERSION:
        raise ParseError("%s: unsupported version %d" % (path, raw[4]),
                         offset=4)
    if len(raw) < _HEADER_BYTES:
        raise ParseError("%s: truncated header" % path, offset=len(raw))
    rows = int.from_bytes(raw[5:13], "little")
    cols = int.from_bytes(raw[13:21], "little")
    expected = _HEADER_BYTES + rows * cols * 8
    if len(raw) < expected:
        raise ParseError(
            "%s: truncated data, expected %d bytes, file has %d"
            % (path, expected, len(raw)), offset=len(raw))
    if len(raw) > expected:
        raise ParseError("%s: %d trailing bytes" % (path, len(raw) - expected),
                         offset=expected)
    flat = np.frombuffer(raw, dtype="<f8", count=rows * cols,
                         offset=_HEADER_BYTES)
    return flat.reshape((rows, cols), order="F").copy()


# ---------------------------------------------------------------------------
# CSV


def write_csv_matrix(path, matrix):
    m = np.asarray(matrix, dtype=float)
    if m.ndim == 1:
        m = m[:, None]
    if m.size > _CSV_ELEMENT_LIMIT:
        raise ConfigurationError(
            "CSV writes are limited to %d elements (%d requested); "
            "use the binary matrix format" % (_CSV_ELEMENT_LIMIT, m.size))
    lines = "\n".join(",".join("%.17g" % v for v in row) for row in m)
    atomic_write_text(path, lines + "\n")


def read_csv_matrix(path):
    path = Path(path)
    try:
        m = np.loadtxt(path, delimiter=",", ndmin=2)
    except OSError as exc:
        raise DataError("cannot read %s: %s" % (path, exc)) from exc
    except ValueError as exc:
        raise ParseError("%s: %s" % (path, exc)) from exc
    return m


def write_matrix(path, matrix):
    path = Path(path)
    if path.suffix == ".dmat":
        write_dmat(path, matrix)
    elif path.suffix == ".csv":
        write_csv_matrix(path, matrix)
    else:
        raise ConfigurationError("unknown matrix format %r (use .dmat or "
                                 ".csv)" % path.suffix)


def read_matrix(path):
    path = Path(path)
    if path.suffix == ".dmat":
        return read_dmat(path)
    if path.suffix == ".csv":
        return read_csv_matrix(path)
    raise ConfigurationError("unknown matrix format %r (use .dmat or .csv)"
                             % path.suffix)


# ---------------------------------------------------------------------------
# composite records (matrix + JSON sidecar)


def _sidecar(path):
    return Path(path).with_suffix(".json")


def write_markov(path, seq):
    """Store a Markov sequence as the vertical stack of its q x p
    samples plus a sidecar with the grid metadata."""
    count, q, p = seq.samples.shape
    write_matrix(path, seq.samples.reshape(count * q, p))
    write_json(_sidecar(path), {
        "record": "markov",
        "sample_period": seq.sample_period,
        "count": count, "q": q, "p": p,
    })


def read_markov(path):
    from .era import MarkovSequence

    meta = read_json(_sidecar(path))
    if meta.get("record") != "markov":
        raise DataError("%s does not describe a Markov sequence"
                        % _sidecar(path))
    stacked = read_matrix(path)
    count, q, p = (int(meta[k]) for k in ("count", "q", "p"))
    if stacked.shape != (count * q, p):
        raise DataError(
            "%s: stacked shape %s does not match sidecar (%d x %d x %d)"
            % (path, stacked.shape, count, q, p))
    return MarkovSequence(samples=stacked.reshape(count, q, p),
                          sample_period=float(meta["sample_period"]))


def write_snapshots(path, snaps):
    write_matrix(path, snaps.data)
    write_json(_sidecar(path), {
        "record": "snapshots",
        "step": snaps.step,
        "variable_blocks": [[name, start, stop]
                            for name, (start, stop) in snaps.variable_blocks],
    })


def read_snapshots(path):
    from .snapshots import SnapshotMatrix

    meta = read_json(_sidecar(path))
    if meta.get("record") != "snapshots":
        raise DataError("%s does not describe snapshots" % _sidecar(path))
    data = read_matrix(path)
    blocks = [(name, (int(start), int(stop)))
              for name, start, stop in meta["variable_blocks"]]
    return SnapshotMatrix(data=data, step=float(meta["step"]),
                          variable_blocks=blocks)


def save_system(directory, sys):
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    write_dmat(directory / "a.dmat", sys.a_matrix)
    write_dmat(directory / "b.dmat", sys.b_matrix)
    write_dmat(directory / "c.dmat", sys.c_matrix)
    meta = {"record": "system",
            "kind": "discrete" if isinstance(sys, DiscreteLTI)
            else "continuous"}
    if isinstance(sys, DiscreteLTI):
        meta["step"] = sys.step
    write_json(directory / "system.json", meta)
    return directory


def load_system(directory):
    directory = Path(directory)
    meta = read_json(directory / "system.json")
    if meta.get("record") != "system":
        raise DataError("%s does not describe a system" % directory)
    a = read_dmat(directory / "a.dmat")
    b = read_dmat(directory / "b.dmat")
    c = read_dmat(directory / "c.dmat")
    if meta.get("kind") == "discrete":
        return DiscreteLTI(a_matrix=a, b_matrix=b, c_matrix=c,
                           step=float(meta["step"]))
    if meta.get("kind") == "continuous":
        return ContinuousLTI(a_matrix=a, b_matrix=b, c_matrix=c)
    raise DataError("%s: unknown system kind %r"
                    % (directory, meta.get("kind")))


def save_rom(directory, rom):
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    write_dmat(directory / "a_r.dmat", rom.a_r)
    write_dmat(directory / "b_r.dmat", rom.b_r)
    write_dmat(directory / "c_r.dmat", rom.c_r)
    write_dmat(directory / "hsv.dmat", rom.hsv)
    write_json(directory / "rom.json", {
        "record": "rom",
        "provenance": rom.provenance,
        "step": rom.step,
        "order": rom.order,
    })
    return directory


def load_rom(directory):
    directory = Path(directory)
    meta = read_json(directory / "rom.json")
    if meta.get("record") != "rom":
        raise DataError("%s does not describe a reduced model" % directory)
    step = meta.get("step")
    return BalancedROM(
        a_r=read_dmat(directory / "a_r.dmat"),
        b_r=read_dmat(directory / "b_r.dmat"),
        c_r=read_dmat(directory / "c_r.dmat"),
        hsv=read_dmat(directory / "hsv.dmat").ravel(),
        provenance=str(meta.get("provenance")),
        step=None if step is None else float(step),
    )
