"""File formats: design/output CSVs, the model container, references.

CSV dialect: comma-separated, ``.`` decimal, ``#``-prefixed comment
lines before one header row of column names.  Floats are written with
shortest round-trip precision, so identical data produces identical
bytes.

Model container layout (little-endian throughout):

    bytes 0..7    magic ``PSENSMDL``
    bytes 8..11   uint32 format version (currently 1)
    bytes 12..19  uint64 byte length L of the JSON header
    bytes 20..    UTF-8 JSON header, then the raw array payload

The header's ``arrays`` list gives name, dtype and shape of each array
in payload order; payload arrays are C-order with no padding.
"""

from __future__ import annotations

import json
import os
import struct
import tempfile

import numpy as np

from .metrics import ReferenceStats
from .multires import (Decomposition, DegreeIndexSet, PiecewiseBasis)
from .polybasis import OrthonormalBasis1D
from .qmc import DesignMatrix
from .surrogate import DataError, SurrogateModel

MAGIC = b"PSENSMDL"
FORMAT_VERSION = 1


class FormatError(DataError):
    """File does not match the documented layout or version."""


def _fmt(x):
    """Shortest round-trip decimal text for a float."""
    return repr(float(x))


def atomic_write_bytes(path, data: bytes):
    """Write via a temp file + rename so failures leave no partial file."""
    d = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-polysens-")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path, text: str):
    atomic_write_bytes(path, text.encode("utf-8"))


# ---------------------------------------------------------------- CSV

def design_to_csv(design: DesignMatrix) -> str:
    if design.provenance == "qmc":
        head = f"# qmc skip={design.meta.get('skip', 0)} dims={','.join(design.names)}"
    elif design.provenance == "mc":
        head = f"# mc seed={design.meta.get('seed', 0)} dims={','.join(design.names)}"
    else:
        head = f"# external dims={','.join(design.names)}"
    lines = [head, ",".join(design.names)]
    for row in design.values:
        lines.append(",".join(_fmt(v) for v in row))
    return "\n".join(lines) + "\n"


def save_design(path, design: DesignMatrix):
    atomic_write_text(path, design_to_csv(design))


def load_design(path) -> DesignMatrix:
    provenance, meta, names = "external", {}, None
    rows = []
    with open(path) as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                tokens = line[1:].split()
                if tokens and tokens[0] in ("qmc", "mc", "external"):
                    provenance = tokens[0]
                    for tok in tokens[1:]:
                        if "=" in tok:
                            k, v = tok.split("=", 1)
                            meta[k] = v
                continue
            if names is None:
                names = [t.strip() for t in line.split(",")]
                continue
            rows.append([float(t) for t in line.split(",")])
    if names is None:
        raise FormatError(f"{path}: no header row found")
    dims = meta.pop("dims", None)
    if dims is not None and dims.split(",") != names:
        raise FormatError(f"{path}: dims comment disagrees with header row")
    for k in ("skip", "seed"):
        if k in meta:
            meta[k] = int(meta[k])
    values = np.array(rows, dtype=float).reshape(len(rows), len(names))
    return DesignMatrix(values=values, names=tuple(names),
                        provenance=provenance, meta=meta)


def outputs_to_csv(outputs, grid=None, components=("y",)) -> str:
    Y = np.atleast_2d(np.asarray(outputs, dtype=float))
    lines = []
    if grid is not None:
        lines.append(f"# grid rows={grid[0]} cols={grid[1]} "
                     f"components={','.join(components)}")
    lines.append(",".join(f"cell_{j}" for j in range(Y.shape[1])))
    for row in Y:
        lines.append(",".join(_fmt(v) for v in row))
    return "\n".join(lines) + "\n"


def save_outputs(path, outputs, grid=None, components=("y",)):
    atomic_write_text(path, outputs_to_csv(outputs, grid, components))


def load_outputs(path):
    """Returns (outputs array, grid tuple or None, components tuple)."""
    grid, components = None, ("y",)
    columns = None
    rows = []
    with open(path) as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                tokens = line[1:].split()
                if tokens and tokens[0] == "grid":
                    kv = dict(tok.split("=", 1) for tok in tokens[1:] if "=" in tok)
                    grid = (int(kv["rows"]), int(kv["cols"]))
                    components = tuple(kv.get("components", "y").split(","))
                continue
            if columns is None:
                columns = len(line.split(","))
                continue
            rows.append([float(t) for t in line.split(",")])
    if columns is None:
        raise FormatError(f"{path}: no header row found")
    Y = np.array(rows, dtype=float).reshape(len(rows), columns)
    return Y, grid, components


# ------------------------------------------------------- model container

def _pack(header: dict, arrays: list) -> bytes:
    listed = []
    payload = []
    for name, arr in arrays:
        arr = np.ascontiguousarray(arr)
        dtype = "<f8" if arr.dtype.kind == "f" else "<i8"
        arr = arr.astype(dtype)
        listed.append({"name": name, "dtype": dtype, "shape": list(arr.shape)})
        payload.append(arr.tobytes(order="C"))
    header = dict(header, arrays=listed)
    hjson = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
    return b"".join([MAGIC, struct.pack("<I", FORMAT_VERSION),
                     struct.pack("<Q", len(hjson)), hjson] + payload)


def _unpack(data: bytes):
    if data[:8] != MAGIC:
        raise FormatError("not a polysens model container")
    version, = struct.unpack("<I", data[8:12])
    if version != FORMAT_VERSION:
        raise FormatError(f"container version {version} unsupported "
                          f"(expected {FORMAT_VERSION})")
    hlen, = struct.unpack("<Q", data[12:20])
    header = json.loads(data[20:20 + hlen].decode())
    offset = 20 + hlen
    arrays = {}
    for spec in header["arrays"]:
        count = int(np.prod(spec["shape"])) if spec["shape"] else 1
        nbytes = count * 8
        arr = np.frombuffer(data[offset:offset + nbytes], dtype=spec["dtype"])
        arrays[spec["name"]] = arr.reshape(spec["shape"]).copy()
        offset += nbytes
    return header, arrays


def save_model(path, model: SurrogateModel):
    basis = model.basis
    dec = basis.decomposition
    M, nbins, order = basis.M, dec.n_bins, basis.order
    rec_a = np.zeros((M, nbins, max(order, 1)))
    rec_b = np.zeros((M, nbins, max(order, 1)))
    mono = np.zeros((M, nbins, order + 1, order + 1))
    shift = np.zeros((M, nbins))
    scale = np.zeros((M, nbins))
    gram = np.zeros((M, nbins))
    for j in range(M):
        for l in range(nbins):
            b = basis.bases[j][l]
            rec_a[j, l, :order] = b.rec_a
            rec_b[j, l, :order] = b.rec_b
            mono[j, l] = b.coeffs
            shift[j, l] = b.shift
            scale[j, l] = b.scale
            gram[j, l] = b.gram_tol
    diag = model.diagnostics
    header = {
        "kind": "surrogate",
        "meta": model.meta,
        "level": basis.level,
        "order": order,
        "q": model.q,
        "basis_gram_tol": basis.gram_tol,
        "decomposition_warnings": list(dec.warnings),
        "diag_scalar": {
            "gram_dev_max": diag.get("gram_dev_max", 0.0),
            "underdetermined": diag.get("underdetermined", []),
            "warnings": diag.get("warnings", []),
        },
    }
    arrays = [
        ("breakpoints", dec.breakpoints),
        ("degrees", model.degrees.indices),
        ("coeffs", model.coeffs),
        ("rec_a", rec_a),
        ("rec_b", rec_b),
        ("mono", mono),
        ("shift", shift),
        ("scale", scale),
        ("gram", gram),
        ("sd_rows", diag.get("sd_rows", np.zeros(0, dtype=np.int64))),
        ("sd_rank", diag.get("sd_rank", np.zeros(0, dtype=np.int64))),
        ("sd_cond", diag.get("sd_cond", np.zeros(0))),
        ("sd_gram_dev", diag.get("sd_gram_dev", np.zeros(0))),
    ]
    atomic_write_bytes(path, _pack(header, arrays))


def load_model(path) -> SurrogateModel:
    with open(path, "rb") as f:
        header, arrays = _unpack(f.read())
    if header.get("kind") != "surrogate":
        raise FormatError(f"{path}: container holds {header.get('kind')!r}, "
                          "not a surrogate model")
    level = int(header["level"])
    order = int(header["order"])
    dec = Decomposition(level=level, breakpoints=arrays["breakpoints"],
                        warnings=tuple(header.get("decomposition_warnings", ())))
    M, nbins = dec.M, dec.n_bins
    bases = []
    for j in range(M):
        per_bin = []
        for l in range(nbins):
            per_bin.append(OrthonormalBasis1D(
                rec_a=arrays["rec_a"][j, l, :order],
                rec_b=arrays["rec_b"][j, l, :order],
                coeffs=arrays["mono"][j, l],
                shift=float(arrays["shift"][j, l]),
                scale=float(arrays["scale"][j, l]),
                gram_tol=float(arrays["gram"][j, l])))
        bases.append(tuple(per_bin))
    basis = PiecewiseBasis(decomposition=dec, order=order, bases=tuple(bases),
                           gram_tol=float(header.get("basis_gram_tol", 0.0)))
    degrees = DegreeIndexSet(M=M, order=order, q=float(header["q"]),
                             indices=arrays["degrees"])
    diag_scalar = header.get("diag_scalar", {})
    diagnostics = {
        "sd_rows": arrays["sd_rows"],
        "sd_rank": arrays["sd_rank"],
        "sd_cond": arrays["sd_cond"],
        "sd_gram_dev": arrays["sd_gram_dev"],
        "gram_dev_max": diag_scalar.get("gram_dev_max", 0.0),
        "underdetermined": diag_scalar.get("underdetermined", []),
        "warnings": diag_scalar.get("warnings", []),
        "basis_gram_tol": basis.gram_tol,
    }
    return SurrogateModel(basis=basis, degrees=degrees, coeffs=arrays["coeffs"],
                          diagnostics=diagnostics, meta=header["meta"])


def save_reference(path, ref: ReferenceStats):
    header = {"kind": "reference", "n": ref.n, "seed": ref.seed}
    atomic_write_bytes(path, _pack(header, [("mean", ref.mean), ("sd", ref.sd)]))


def load_reference(path) -> ReferenceStats:
    with open(path, "rb") as f:
        header, arrays = _unpack(f.read())
    if header.get("kind") != "reference":
        raise FormatError(f"{path}: not a reference-statistics container")
    return ReferenceStats(mean=arrays["mean"], sd=arrays["sd"],
                          n=int(header["n"]), seed=int(header["seed"]))


# ------------------------------------------------------------- reports

def _json_safe(obj):
    """Recursively convert numpy scalars/arrays and map NaN to None."""
    if isinstance(obj, dict):
        return {str(k): _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_json_safe(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if np.isfinite(v) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    return obj


def dump_json(payload: dict) -> str:
    return json.dumps(_json_safe(payload), sort_keys=True, indent=1) + "\n"


def save_json(path, payload: dict):
    atomic_write_text(path, dump_json(payload))
