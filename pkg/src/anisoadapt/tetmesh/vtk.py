"""Legacy ASCII VTK unstructured-grid export (cell type 10, tetrahedra)."""
import re
from pathlib import Path

import numpy as np

from .medit import fmt
from .mesh import Field

VTK_TETRA = 10


def _name(key):
    return re.sub(r"\s+", "_", str(key)) or "field"


def _block(name, field):
    v = field.values
    kind = field.kind
    if kind == "scalar":
        head = [f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
        body = [fmt(x) for x in v]
    elif kind == "vector":
        head = [f"VECTORS {name} double"]
        body = [" ".join(fmt(x) for x in row) for row in v]
    else:
        head = [f"TENSORS {name} double"]
        body = []
        for t in v:
            body += [" ".join(fmt(x) for x in row) for row in t]
            body.append("")
        body = body[:-1]
    return head + body


def write_vtk(mesh, fields=None, path="mesh.vtk", title="anisoadapt"):
    """Write ``mesh`` plus named :class:`Field` objects (or raw arrays).

    Raw arrays are placed by length: vertex count first, then element count.
    Element region tags are always exported as the ``region`` cell array.
    """
    path = Path(path)
    point_fields, cell_fields = [], [("region", Field(mesh.tet_tags.astype(float), "elements"))]
    for key, f in (fields or {}).items():
        if not isinstance(f, Field):
            arr = np.asarray(f, dtype=float)
            if len(arr) == mesh.n_vertices:
                f = Field(arr, "vertices")
            elif len(arr) == mesh.n_elements:
                f = Field(arr, "elements")
            else:
                raise ValueError(f"field {key!r} has {len(arr)} entries; matches neither vertices nor elements")
        f.check(mesh)
        (point_fields if f.location == "vertices" else cell_fields).append((_name(key), f))

    n, nv = mesh.n_elements, mesh.n_vertices
    lines = ["# vtk DataFile Version 3.0", title.replace("\n", " ")[:255], "ASCII", "DATASET UNSTRUCTURED_GRID",
             f"POINTS {nv} double"]
    lines += [f"{fmt(x)} {fmt(y)} {fmt(z)}" for x, y, z in mesh.vertices]
    lines.append(f"CELLS {n} {5 * n}")
    lines += [f"4 {a} {b} {c} {d}" for a, b, c, d in mesh.tets.tolist()]
    lines.append(f"CELL_TYPES {n}")
    lines += [str(VTK_TETRA)] * n
    lines.append(f"CELL_DATA {n}")
    for name, f in cell_fields:
        lines += _block(name, f)
    if point_fields:
        lines.append(f"POINT_DATA {nv}")
        for name, f in point_fields:
            lines += _block(name, f)
    lines.append("")
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("\n".join(lines))
    return path
