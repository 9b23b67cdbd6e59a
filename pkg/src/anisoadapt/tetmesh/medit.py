"""ASCII MEDIT ``.mesh`` / ``.sol`` reader and writer.

Files are 1-based; numbers are written with 12 significant digits and LF
line endings.  Symmetric tensors in ``.sol`` files use the MEDIT entry order
``a11 a21 a22 a31 a32 a33``.
"""
import re
from pathlib import Path

import numpy as np

from ..errors import ParseError, SizeMismatch, TopologyError
from .mesh import Field, TetMesh

FMT = "{:.12g}"
SOL_TYPES = {1: 1, 2: 3, 3: 6}
_TENSOR_ORDER = [(0, 0), (1, 0), (1, 1), (2, 0), (2, 1), (2, 2)]


def fmt(x):
    s = FMT.format(float(x))
    return "0" if s == "-0" else s


class _Tokens:
    """Whitespace tokenizer that remembers line numbers and skips ``#`` comments."""

    def __init__(self, path):
        self.path = str(path)
        self.items = []
        with open(path, "r", encoding="ascii", errors="replace") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.split("#", 1)[0]
                for tok in line.split():
                    self.items.append((tok, lineno))
        self.pos = 0

    def peek(self):
        return self.items[self.pos][0] if self.pos < len(self.items) else None

    def line(self):
        if self.pos < len(self.items):
            return self.items[self.pos][1]
        return self.items[-1][1] if self.items else 0

    def next(self):
        if self.pos >= len(self.items):
            raise ParseError("unexpected end of file", self.path, self.line())
        tok = self.items[self.pos]
        self.pos += 1
        return tok

    def int(self):
        tok, line = self.next()
        try:
            return int(tok)
        except ValueError:
            raise ParseError(f"expected an integer, got {tok!r}", self.path, line) from None

    def float(self):
        tok, line = self.next()
        try:
            return float(tok.replace("D", "e").replace("d", "e"))
        except ValueError:
            raise ParseError(f"expected a number, got {tok!r}", self.path, line) from None

    def block(self, rows, ints, floats):
        """Read ``rows`` records of ``ints`` integer columns after ``floats`` float columns."""
        out_f = np.empty((rows, floats))
        out_i = np.empty((rows, ints), dtype=np.int64)
        for r in range(rows):
            for c in range(floats):
                out_f[r, c] = self.float()
            for c in range(ints):
                out_i[r, c] = self.int()
        return out_f, out_i


def _indices(raw, nv, what, tokens, line):
    if raw.size and raw.min() < 1:
        raise ParseError(f"{what} uses index {int(raw.min())}; MEDIT indices are 1-based", tokens.path, line)
    if raw.size and raw.max() > nv:
        raise TopologyError(f"{tokens.path}:{line}: {what} references vertex {int(raw.max())} of {nv}")
    return raw - 1


def read_medit(path):
    """Read an ASCII MEDIT mesh (Vertices, Triangles, Tetrahedra sections)."""
    tok = _Tokens(path)
    vertices = None
    tets = np.zeros((0, 4), dtype=np.int64)
    tet_tags = np.zeros(0, dtype=np.int64)
    tris = np.zeros((0, 3), dtype=np.int64)
    tri_tags = np.zeros(0, dtype=np.int64)
    pending = []
    while tok.peek() is not None:
        key, line = tok.next()
        low = key.lower()
        if low == "meshversionformatted":
            tok.int()
        elif low == "dimension":
            dim = tok.int()
            if dim != 3:
                raise ParseError(f"only 3D meshes are supported, got dimension {dim}", tok.path, line)
        elif low == "vertices":
            n = tok.int()
            coords, _ = tok.block(n, 1, 3)
            vertices = coords
        elif low == "tetrahedra":
            n = tok.int()
            start = tok.line()
            _, raw = tok.block(n, 5, 0)
            pending.append(("tets", raw, start))
        elif low == "triangles":
            n = tok.int()
            start = tok.line()
            _, raw = tok.block(n, 4, 0)
            pending.append(("tris", raw, start))
        elif low == "end":
            break
        elif re.fullmatch(r"[A-Za-z]+", key):
            # unsupported section: skip its records
            n = tok.int()
            width = {"edges": 3, "corners": 1, "ridges": 1, "requiredvertices": 1,
                     "requiredtriangles": 1, "quadrilaterals": 5, "hexahedra": 9}.get(low)
            if width is None:
                raise ParseError(f"unknown section {key!r}", tok.path, line)
            tok.block(n, width, 0)
        else:
            raise ParseError(f"unexpected token {key!r}", tok.path, line)
    if vertices is None:
        raise ParseError("missing Vertices section", tok.path, tok.line())
    nv = len(vertices)
    for kind, raw, line in pending:
        if kind == "tets":
            tets = _indices(raw[:, :4], nv, "Tetrahedra", tok, line)
            tet_tags = raw[:, 4]
        else:
            tris = _indices(raw[:, :3], nv, "Triangles", tok, line)
            tri_tags = raw[:, 3]
    return TetMesh(vertices, tets, tet_tags, tris, tri_tags)


def write_medit(mesh, path):
    path = Path(path)
    lines = ["MeshVersionFormatted 2", "", "Dimension 3", "", "Vertices", str(mesh.n_vertices)]
    lines += [f"{fmt(x)} {fmt(y)} {fmt(z)} 0" for x, y, z in mesh.vertices]
    if len(mesh.facets):
        lines += ["", "Triangles", str(len(mesh.facets))]
        lines += [f"{a + 1} {b + 1} {c + 1} {t}" for (a, b, c), t in zip(mesh.facets.tolist(), mesh.facet_tags.tolist())]
    lines += ["", "Tetrahedra", str(mesh.n_elements)]
    lines += [f"{a + 1} {b + 1} {c + 1} {d + 1} {t}" for (a, b, c, d), t in zip(mesh.tets.tolist(), mesh.tet_tags.tolist())]
    lines += ["", "End", ""]
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("\n".join(lines))
    return path


def _pack_tensor(t):
    return [t[i, j] for i, j in _TENSOR_ORDER]


def _unpack_tensor(row):
    t = np.empty((3, 3))
    for v, (i, j) in zip(row, _TENSOR_ORDER):
        t[i, j] = t[j, i] = v
    return t


def write_sol(field, path):
    """Write a scalar, vector or symmetric-tensor :class:`Field` as MEDIT ``.sol``."""
    path = Path(path)
    kind = field.kind
    code = {"scalar": 1, "vector": 2, "tensor": 3}[kind]
    section = "SolAtVertices" if field.location == "vertices" else "SolAtTetrahedra"
    lines = ["MeshVersionFormatted 2", "", "Dimension 3", "", section, str(len(field)), f"1 {code}"]
    vals = field.values
    for v in vals:
        if kind == "scalar":
            row = [v]
        elif kind == "vector":
            row = list(v)
        else:
            row = _pack_tensor(v)
        lines.append(" ".join(fmt(x) for x in row))
    lines += ["", "End", ""]
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("\n".join(lines))
    return path


def read_sol(path, mesh=None):
    """Read a MEDIT ``.sol`` file holding one solution field.

    With ``mesh`` given, the entry count is checked against its vertex or
    element count (:class:`SizeMismatch` otherwise).
    """
    tok = _Tokens(path)
    field = None
    while tok.peek() is not None:
        key, line = tok.next()
        low = key.lower()
        if low == "meshversionformatted":
            tok.int()
        elif low == "dimension":
            dim = tok.int()
            if dim != 3:
                raise ParseError(f"only 3D solutions are supported, got dimension {dim}", tok.path, line)
        elif low in ("solatvertices", "solattetrahedra"):
            n = tok.int()
            ntypes = tok.int()
            if ntypes != 1:
                raise ParseError("exactly one solution field per file is supported", tok.path, line)
            code = tok.int()
            if code not in SOL_TYPES:
                raise ParseError(f"unknown solution type {code}", tok.path, line)
            width = SOL_TYPES[code]
            raw, _ = tok.block(n, 0, width)
            if code == 1:
                values = raw[:, 0]
            elif code == 2:
                values = raw
            else:
                values = np.array([_unpack_tensor(r) for r in raw]).reshape(n, 3, 3)
            field = Field(values, "vertices" if low == "solatvertices" else "elements")
        elif low == "end":
            break
        else:
            raise ParseError(f"unexpected token {key!r}", tok.path, line)
    if field is None:
        raise ParseError("no SolAtVertices or SolAtTetrahedra section", tok.path, tok.line())
    if mesh is not None:
        n = mesh.n_vertices if field.location == "vertices" else mesh.n_elements
        if len(field) != n:
            raise SizeMismatch(f"{path}: {len(field)} entries for {n} {field.location}")
    return field
