"""Mesh data model, structured generators and file formats."""
from .generators import HOLE_TAG, cube_with_hole_mesh, diagonal_orthoscheme_mesh, uniform_cube_mesh
from .medit import read_medit, read_sol, write_medit, write_sol
from .mesh import ElementField, Field, NodalField, TetMesh
from .vtk import write_vtk

__all__ = [
    "TetMesh", "Field", "NodalField", "ElementField",
    "uniform_cube_mesh", "cube_with_hole_mesh", "diagonal_orthoscheme_mesh", "HOLE_TAG",
    "read_medit", "write_medit", "read_sol", "write_sol", "write_vtk",
]
