"""File formats: Matrix Market, PGM images, factor containers and sketch reports."""
import csv
import json
import struct
from pathlib import Path

import numpy as np

from .driver import SketchReport
from .exceptions import IngestionError
from .sparsemat import SparseMatrix, from_triplets

REPORT_SCHEMA_VERSION = 1
REPORT_CSV_COLUMNS = ["k", "est_rel_err", "true_rel_err", "eps_local", "deflations", "elapsed_s"]
FACTOR_MAGIC = b"SKFM"
FACTOR_VERSION = 1


# Matrix Market

def read_matrix_market(path):
    """Read a real Matrix Market file.

    Coordinate files become a canonical :class:`SparseMatrix` (duplicates
    summed), array files a dense ``ndarray``. Symmetric and skew-symmetric
    storage is expanded to general. Integer fields are read as real.
    """
    path = Path(path)
    with open(path, "r", encoding="ascii", errors="replace") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise IngestionError(f"{path}:1: empty file")
    header = lines[0].split()
    if len(header) != 5 or header[0] != "%%MatrixMarket" or header[1].lower() != "matrix":
        raise IngestionError(f"{path}:1: malformed Matrix Market header {lines[0]!r}")
    fmt, fld, sym = (h.lower() for h in header[2:])
    if fmt not in ("coordinate", "array"):
        raise IngestionError(f"{path}:1: unsupported format {fmt!r}")
    if fld not in ("real", "integer", "double"):
        raise IngestionError(f"{path}:1: unsupported field {fld!r}; only real matrices are accepted")
    if sym not in ("general", "symmetric", "skew-symmetric"):
        raise IngestionError(f"{path}:1: unsupported symmetry {sym!r}")

    body = ((no, ln) for no, ln in enumerate(lines[1:], start=2)
            if ln.strip() and not ln.lstrip().startswith("%"))
    try:
        size_no, size_line = next(body)
    except StopIteration:
        raise IngestionError(f"{path}: missing size line") from None
    dims = _ints(size_line, path, size_no)
    if fmt == "coordinate":
        if len(dims) != 3:
            raise IngestionError(f"{path}:{size_no}: expected 'rows cols nnz'")
        rows, cols, nnz = dims
        return _read_coordinate(body, rows, cols, nnz, sym, path)
    if len(dims) != 2:
        raise IngestionError(f"{path}:{size_no}: expected 'rows cols'")
    return _read_array(body, *dims, sym, path)


def _ints(line, path, no):
    try:
        return [int(t) for t in line.split()]
    except ValueError:
        raise IngestionError(f"{path}:{no}: expected integers, got {line!r}") from None


def _read_coordinate(body, rows, cols, nnz, sym, path):
    triplets = []
    count = 0
    for no, line in body:
        parts = line.split()
        if len(parts) != 3:
            raise IngestionError(f"{path}:{no}: expected 'i j value', got {line!r}")
        try:
            i, j, v = int(parts[0]), int(parts[1]), float(parts[2])
        except ValueError:
            raise IngestionError(f"{path}:{no}: cannot parse entry {line!r}") from None
        if not (1 <= i <= rows and 1 <= j <= cols):
            raise IngestionError(f"{path}:{no}: index ({i}, {j}) out of bounds for {rows}x{cols}")
        count += 1
        if count > nnz:
            raise IngestionError(f"{path}:{no}: more entries than the {nnz} declared")
        triplets.append((i - 1, j - 1, v))
        if sym != "general" and i != j:
            triplets.append((j - 1, i - 1, -v if sym == "skew-symmetric" else v))
    if count != nnz:
        raise IngestionError(f"{path}: header declares {nnz} entries, found {count}")
    return from_triplets(rows, cols, triplets)


def _read_array(body, rows, cols, sym, path):
    values = []
    for no, line in body:
        for tok in line.split():
            try:
                values.append(float(tok))
            except ValueError:
                raise IngestionError(f"{path}:{no}: cannot parse value {tok!r}") from None
    if sym == "general":
        if len(values) != rows * cols:
            raise IngestionError(f"{path}: expected {rows * cols} values, found {len(values)}")
        return np.array(values, dtype=np.float64).reshape((cols, rows)).T.copy()
    if rows != cols:
        raise IngestionError(f"{path}: symmetric storage requires a square matrix")
    skew = sym == "skew-symmetric"
    expected = rows * (rows - 1) // 2 if skew else rows * (rows + 1) // 2
    if len(values) != expected:
        raise IngestionError(f"{path}: expected {expected} values, found {len(values)}")
    out = np.zeros((rows, cols))
    it = iter(values)
    for j in range(cols):
        for i in range(j + 1 if skew else j, rows):
            v = next(it)
            out[i, j] = v
            out[j, i] = -v if skew else v
    return out


def write_matrix_market(path, a):
    """Write a dense array (array format) or :class:`SparseMatrix` (coordinate format).

    Values are written with 17 significant digits so they read back exactly.
    """
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        if isinstance(a, SparseMatrix):
            fh.write("%%MatrixMarket matrix coordinate real general\n")
            fh.write(f"{a.rows} {a.cols} {a.nnz}\n")
            for i, j, v in zip(*a.to_triplets()):
                fh.write(f"{i + 1} {j + 1} {v:.17g}\n")
        else:
            a = np.asarray(a, dtype=np.float64)
            fh.write("%%MatrixMarket matrix array real general\n")
            fh.write(f"{a.shape[0]} {a.shape[1]}\n")
            fh.writelines(f"{v:.17g}\n" for v in a.T.ravel())


# PGM

def _pgm_tokens(data, count):
    # whitespace-separated header tokens with '#' comments; returns tokens and end offset
    tokens, pos = [], 0
    while len(tokens) < count:
        while pos < len(data) and (data[pos:pos + 1].isspace() or data[pos:pos + 1] == b"#"):
            if data[pos:pos + 1] == b"#":
                while pos < len(data) and data[pos:pos + 1] not in (b"\n", b"\r"):
                    pos += 1
            else:
                pos += 1
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace() and data[pos:pos + 1] != b"#":
            pos += 1
        if start == pos:
            raise IngestionError(f"truncated PGM header at byte {pos}")
        tokens.append(data[start:pos])
    return tokens, pos


def read_pgm(path):
    """Read a P2 or P5 grayscale image as a float matrix scaled to ``[0, 1]``."""
    data = Path(path).read_bytes()
    magic = data[:2]
    if magic not in (b"P2", b"P5"):
        raise IngestionError(f"{path}: not a PGM file (magic {magic!r} at byte 0)")
    tokens, pos = _pgm_tokens(data, 4)
    try:
        width, height, maxval = (int(t) for t in tokens[1:])
    except ValueError:
        raise IngestionError(f"{path}: malformed PGM dimensions {tokens[1:]!r}") from None
    if width < 1 or height < 1 or not 0 < maxval < 65536:
        raise IngestionError(f"{path}: invalid PGM dimensions {width}x{height} maxval {maxval}")
    count = width * height
    if magic == b"P5":
        pos += 1
        itemsize = 1 if maxval < 256 else 2
        need = count * itemsize
        if len(data) - pos < need:
            raise IngestionError(f"{path}: truncated PGM payload at byte {len(data)}, "
                                 f"expected {need} bytes from byte {pos}")
        dtype = np.uint8 if itemsize == 1 else ">u2"
        pixels = np.frombuffer(data, dtype=dtype, count=count, offset=pos).astype(np.float64)
    else:
        raw = data[pos:].split()
        if len(raw) < count:
            raise IngestionError(f"{path}: truncated PGM payload at byte {len(data)}, "
                                 f"found {len(raw)} of {count} pixels")
        try:
            pixels = np.array([int(t) for t in raw[:count]], dtype=np.float64)
        except ValueError:
            raise IngestionError(f"{path}: non-integer pixel in P2 payload") from None
    if np.any(pixels > maxval):
        raise IngestionError(f"{path}: pixel value exceeds maxval {maxval}")
    return pixels.reshape((height, width)) / maxval


def write_pgm(path, img, maxval=255, binary=True):
    """Write a matrix with entries in ``[0, 1]`` as a P5 (or P2) image."""
    img = np.asarray(img, dtype=np.float64)
    pix = np.rint(np.clip(img, 0.0, 1.0) * maxval).astype(np.int64)
    h, w = pix.shape
    with open(path, "wb") as fh:
        fh.write(f"{'P5' if binary else 'P2'}\n{w} {h}\n{maxval}\n".encode("ascii"))
        if binary:
            fh.write(pix.astype(np.uint8 if maxval < 256 else ">u2").tobytes())
        else:
            for row in pix:
                fh.write((" ".join(map(str, row)) + "\n").encode("ascii"))


# factor container

def write_factor(path, x):
    """Binary container: ``SKFM``, uint32 version, uint64 rows, uint64 cols, float64 row-major (little-endian)."""
    x = np.ascontiguousarray(x, dtype="<f8")
    with open(path, "wb") as fh:
        fh.write(FACTOR_MAGIC + struct.pack("<IQQ", FACTOR_VERSION, *x.shape))
        fh.write(x.tobytes())


def read_factor(path):
    data = Path(path).read_bytes()
    if data[:4] != FACTOR_MAGIC:
        raise IngestionError(f"{path}: bad factor magic {data[:4]!r}")
    version, rows, cols = struct.unpack_from("<IQQ", data, 4)
    if version != FACTOR_VERSION:
        raise IngestionError(f"{path}: unsupported factor version {version}")
    payload = data[24:]
    if len(payload) != rows * cols * 8:
        raise IngestionError(f"{path}: payload has {len(payload)} bytes, expected {rows * cols * 8}")
    return np.frombuffer(payload, dtype="<f8").reshape((rows, cols)).astype(np.float64)


# reports

def _cell(v):
    return "" if v is None else repr(v)


def write_report(report, fmt, path):
    """Write a :class:`SketchReport` as ``csv`` (one row per iteration) or ``json``."""
    if fmt == "csv":
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(REPORT_CSV_COLUMNS)
            for r in report.records:
                w.writerow([_cell(getattr(r, c)) for c in REPORT_CSV_COLUMNS])
    elif fmt == "json":
        doc = {"schema_version": REPORT_SCHEMA_VERSION, **report.to_dict()}
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
            fh.write("\n")
    else:
        raise ValueError(f"unknown report format {fmt!r}")


def read_report(path):
    """Load a JSON report written by :func:`write_report`."""
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    version = doc.pop("schema_version", None)
    if version != REPORT_SCHEMA_VERSION:
        raise IngestionError(f"{path}: unsupported report schema_version {version}")
    return SketchReport.from_dict(doc)
