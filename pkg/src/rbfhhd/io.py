"""Reading and writing samples, models, residuals and grids."""
from __future__ import annotations

import csv
import io as _io
import json
from pathlib import Path

import numpy as np

from .errors import SampleError
from .kernels import Kernel
from .model import SampleSet, ScalarPotentialModel, VectorPotentialModel

MODEL_FORMAT = "rbfhhd-model/1"
_SCALAR_COLUMNS = ("f", "fx", "u")


# -- samples ----------------------------------------------------------------------


def _cell(text, line, column):
    text = text.strip()
    if text == "":
        return None
    try:
        value = float(text)
    except ValueError:
        raise SampleError(f"column {column!r}: cannot parse {text!r} as a number", line=line) from None
    if not np.isfinite(value):
        raise SampleError(f"column {column!r}: non-finite value {text!r}", line=line)
    return value


def parse_samples(text: str, dedupe: bool = False) -> SampleSet:
    """Parse sample CSV text.

    The header names the columns: ``x,y[,z]`` coordinates, an optional
    scalar column (``f``, ``fx`` or ``u``) and optional vector columns
    ``vx,vy[,vz]``. Blank cells mean "no constraint"; a vector constraint
    needs all of its components. Lines starting with ``#`` are comments.
    """
    rows = []
    header = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.strip()
        if not stripped or stripped.startswith("#"):
            continue
        cells = next(csv.reader([raw]))
        if header is None:
            header = [c.strip().lower() for c in cells]
            header_line = lineno
            continue
        if len(cells) != len(header):
            raise SampleError(f"expected {len(header)} fields, got {len(cells)}", line=lineno)
        rows.append((lineno, cells))
    if header is None:
        raise SampleError("empty sample file")
    if header[:2] != ["x", "y"]:
        raise SampleError("header must start with x,y", line=header_line)
    d = 3 if "z" in header else 2
    vec_cols = ["vx", "vy", "vz"][:d]
    scalar_col = next((c for c in _SCALAR_COLUMNS if c in header), None)
    has_vec = any(c in header for c in vec_cols)
    if has_vec and not all(c in header for c in vec_cols):
        raise SampleError(f"vector columns must be {','.join(vec_cols)}", line=header_line)
    known = {"x", "y", "z"} | set(vec_cols) | {scalar_col}
    extra = [c for c in header if c not in known]
    if extra:
        raise SampleError(f"unknown column(s) {', '.join(extra)}", line=header_line)
    pos = {c: header.index(c) for c in header}
    pts, si, sv, vi, vv, lines = [], [], [], [], [], []
    for i, (lineno, cells) in enumerate(rows):
        p = []
        for c in ("x", "y", "z")[:d]:
            value = _cell(cells[pos[c]], lineno, c)
            if value is None:
                raise SampleError(f"missing coordinate {c}", line=lineno)
            p.append(value)
        pts.append(p)
        lines.append(lineno)
        if scalar_col:
            f = _cell(cells[pos[scalar_col]], lineno, scalar_col)
            if f is not None:
                si.append(i)
                sv.append(f)
        if has_vec:
            comps = [_cell(cells[pos[c]], lineno, c) for c in vec_cols]
            filled = [c is not None for c in comps]
            if all(filled):
                vi.append(i)
                vv.append(comps)
            elif any(filled):
                raise SampleError("incomplete vector: fill all components or none", line=lineno)
    if not pts:
        raise SampleError("no sample rows")
    pts = np.array(pts, float)
    samples = SampleSet(pts, np.array(si, int), np.array(sv), np.array(vi, int),
                        np.array(vv).reshape(-1, d), check_coincident=False)
    if dedupe:
        return samples.deduplicated()
    from .model import coincident_pairs

    pairs = coincident_pairs(pts)
    if pairs:
        shown = ", ".join(f"lines {lines[a]} and {lines[b]}" for a, b in pairs[:5])
        raise SampleError(f"coincident points: {shown} (use --dedupe to keep the first)",
                          indices=sorted({b for _, b in pairs}))
    return samples


def read_samples(path, dedupe: bool = False) -> SampleSet:
    return parse_samples(Path(path).read_text(encoding="utf-8"), dedupe=dedupe)


def format_samples(samples: SampleSet, comments=()) -> str:
    d = samples.dimension
    coords = ["x", "y", "z"][:d]
    header = list(coords)
    if len(samples.scalar_index):
        header.append("f")
    if len(samples.vector_index):
        header += ["vx", "vy", "vz"][:d]
    scalar = dict(zip(samples.scalar_index.tolist(), samples.scalar_values.tolist()))
    vector = dict(zip(samples.vector_index.tolist(), samples.vector_values.tolist()))
    buf = _io.StringIO()
    for c in comments:
        buf.write(f"# {c}\n")
    buf.write(",".join(header) + "\n")
    for i, p in enumerate(samples.points.tolist()):
        row = [repr(x) for x in p]
        if len(samples.scalar_index):
            row.append(repr(scalar[i]) if i in scalar else "")
        if len(samples.vector_index):
            row += [repr(x) for x in vector[i]] if i in vector else [""] * d
        buf.write(",".join(row) + "\n")
    return buf.getvalue()


def write_samples(path, samples: SampleSet, comments=()):
    Path(path).write_text(format_samples(samples, comments), encoding="utf-8")


# -- models -----------------------------------------------------------------------


def model_to_dict(model) -> dict:
    kind = "vector" if isinstance(model, VectorPotentialModel) else "scalar"
    coeffs = model.coefficients.tolist()
    return {
        "format": MODEL_FORMAT,
        "kind": kind,
        "dimension": model.dimension,
        "kernel": model.kernel.to_dict(),
        "centres": model.centres.tolist(),
        "coefficients": coeffs,
    }


def model_from_dict(data: dict):
    if data.get("format") != MODEL_FORMAT:
        raise SampleError(f"unsupported model format {data.get('format')!r}")
    kernel = Kernel.from_dict(data["kernel"])
    centres = np.array(data["centres"], float).reshape(-1, int(data["dimension"]))
    cls = VectorPotentialModel if data.get("kind") == "vector" else ScalarPotentialModel
    return cls(kernel, centres, np.array(data["coefficients"], float))


def write_model(path, model):
    # json writes floats with repr, the shortest string that round-trips
    Path(path).write_text(json.dumps(model_to_dict(model)) + "\n", encoding="utf-8")


def read_model(path):
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SampleError(f"model file is not valid JSON: {exc.msg}", line=exc.lineno) from None
    return model_from_dict(data)


# -- tables -----------------------------------------------------------------------


def write_residuals(path, report):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["index", "type", "residual"])
        for idx, kind, r in report.rows():
            w.writerow([idx, kind, repr(r)])


def write_table(path, header, rows, comments=()):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        for c in comments:
            fh.write(f"# {c}\n")
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in row])


def write_vtk(path, axes, arrays: dict, title: str = "rbfhhd grid"):
    """Legacy ASCII STRUCTURED_POINTS file with 9 significant digits.

    ``axes`` are the per-axis node coordinates (uniformly spaced); every
    array is ordered with x varying fastest and has one row per node.
    """
    axes = [np.asarray(a, float) for a in axes]
    dims = [len(a) for a in axes] + [1] * (3 - len(axes))
    origin = [a[0] for a in axes] + [0.0] * (3 - len(axes))
    spacing = [(a[-1] - a[0]) / (len(a) - 1) for a in axes] + [1.0] * (3 - len(axes))
    n = int(np.prod(dims))
    out = [
        "# vtk DataFile Version 3.0",
        title[:255],
        "ASCII",
        "DATASET STRUCTURED_POINTS",
        "DIMENSIONS " + " ".join(str(x) for x in dims),
        "ORIGIN " + " ".join(f"{x:.9g}" for x in origin),
        "SPACING " + " ".join(f"{x:.9g}" for x in spacing),
        f"POINT_DATA {n}",
    ]
    for name, values in arrays.items():
        values = np.asarray(values, float)
        if values.ndim == 1:
            out.append(f"SCALARS {name} double 1")
            out.append("LOOKUP_TABLE default")
            out += [f"{x:.9g}" for x in values]
        else:
            vec = np.zeros((len(values), 3))
            vec[:, : values.shape[1]] = values
            out.append(f"VECTORS {name} double")
            out += [" ".join(f"{x:.9g}" for x in row) for row in vec]
    Path(path).write_text("\n".join(out) + "\n", encoding="utf-8")
