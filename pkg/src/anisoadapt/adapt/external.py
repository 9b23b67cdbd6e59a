"""Bridge to an external metric-based remesher driven by a command template."""
import shlex
import subprocess
import tempfile
from pathlib import Path

import numpy as np

from ..errors import AnisoError, ExternalFailure, FormatError, MissingOutput
from ..metric import vertex_average
from ..tetmesh import NodalField, read_medit, write_medit, write_sol

PLACEHOLDERS = ("in_mesh", "in_sol", "out_mesh")


def format_command(template, **paths):
    """Substitute ``{in_mesh}``, ``{in_sol}`` and ``{out_mesh}`` (shell-quoted) into ``template``."""
    try:
        return template.format(**{k: shlex.quote(str(v)) for k, v in paths.items()})
    except (KeyError, IndexError) as exc:
        raise ExternalFailure(f"bad mesher command template {template!r}: unknown placeholder {exc}") from exc


def external_mesher_roundtrip(mesh, metric, command, workdir=None, timeout=None):
    """Write ``mesh`` and its vertex metric, run ``command``, and read the mesh it produces."""
    tensors = np.broadcast_to(np.asarray(getattr(metric, "tensors", metric), dtype=float),
                              (mesh.n_elements, 3, 3))
    with tempfile.TemporaryDirectory(dir=workdir) as tmp:
        tmp = Path(tmp)
        paths = {"in_mesh": tmp / "in.mesh", "in_sol": tmp / "in.sol", "out_mesh": tmp / "out.mesh"}
        write_medit(mesh, paths["in_mesh"])
        write_sol(NodalField(vertex_average(mesh, tensors)), paths["in_sol"])
        cmd = format_command(command, **paths)
        try:
            proc = subprocess.run(cmd, shell=True, capture_output=True, text=True, timeout=timeout)
        except subprocess.TimeoutExpired as exc:
            raise ExternalFailure(f"mesher timed out after {timeout} s: {cmd}") from exc
        if proc.returncode != 0:
            raise ExternalFailure(f"mesher exited with status {proc.returncode}: {cmd}\n{proc.stderr.strip()}",
                                  proc.stdout, proc.stderr, proc.returncode)
        if not paths["out_mesh"].exists():
            raise MissingOutput(f"mesher produced no output mesh at {paths['out_mesh'].name}",
                                proc.stdout, proc.stderr, proc.returncode)
        try:
            out = read_medit(paths["out_mesh"])
            out.check_topology()
        except (FormatError, AnisoError) as exc:
            raise ExternalFailure(f"mesher output rejected: {exc}", proc.stdout, proc.stderr,
                                  proc.returncode) from exc
    if len(out.facets) == 0:
        raise ExternalFailure("mesher output has no boundary triangles, so boundary tags are lost",
                              proc.stdout, proc.stderr, proc.returncode)
    return out
