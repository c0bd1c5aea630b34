"""
OBJ / PLY mesh export and loading

OBJ: "v x y z [r g b]" vertex lines (colors as floats in [0, 1]) and 1-based
"f i j k" faces. PLY: binary little-endian, float32 positions, optional uchar
red/green/blue per vertex, faces as uchar-counted int32 index lists.
"""

from __future__ import annotations

import logging
import os
from typing import List, Optional

import numpy as np

from ..conditioning.imageio import to_uint8
from .mesh import TriMesh

logger = logging.getLogger(__name__)

MESH_FORMATS = ('obj', 'ply')


def mesh_format(path: str, fmt: Optional[str] = None) -> str:
    fmt = (fmt or os.path.splitext(path)[1].lstrip('.')).lower()
    if fmt not in MESH_FORMATS:
        raise ValueError(f"Unsupported mesh format {fmt!r} for {path}; expected one of {MESH_FORMATS}")
    return fmt


def export_mesh(mesh: TriMesh, path: str, fmt: Optional[str] = None) -> str:
    """Write `mesh` as OBJ or PLY (chosen by `fmt` or the file suffix)"""
    fmt = mesh_format(path, fmt)
    directory = os.path.dirname(path)
    try:
        if directory:
            os.makedirs(directory, exist_ok=True)
        if fmt == 'obj':
            _write_obj(mesh, path)
        else:
            _write_ply(mesh, path)
    except OSError as e:
        raise OSError(f"Cannot write mesh to {path}: {e}") from e
    logger.info(f"Mesh exported: {path} ({mesh.n_vertices} vertices, {mesh.n_triangles} triangles)")
    return path


def _write_obj(mesh: TriMesh, path: str) -> None:
    lines: List[str] = [f"# occufield mesh: {mesh.n_vertices} vertices, {mesh.n_triangles} faces"]
    for i, v in enumerate(mesh.vertices):
        if mesh.colors is not None:
            r, g, b = mesh.colors[i]
            lines.append(f"v {v[0]:.9g} {v[1]:.9g} {v[2]:.9g} {r:.6g} {g:.6g} {b:.6g}")
        else:
            lines.append(f"v {v[0]:.9g} {v[1]:.9g} {v[2]:.9g}")
    for tri in mesh.triangles + 1:
        lines.append(f"f {tri[0]} {tri[1]} {tri[2]}")
    with open(path, 'w') as f:
        f.write("\n".join(lines) + "\n")


def _vertex_dtype(colored: bool) -> np.dtype:
    fields = [('x', '<f4'), ('y', '<f4'), ('z', '<f4')]
    if colored:
        fields += [('red', 'u1'), ('green', 'u1'), ('blue', 'u1')]
    return np.dtype(fields)


_FACE_DTYPE = np.dtype([('count', 'u1'), ('i', '<i4'), ('j', '<i4'), ('k', '<i4')])


def _write_ply(mesh: TriMesh, path: str) -> None:
    colored = mesh.colors is not None
    header = ["ply", "format binary_little_endian 1.0", f"element vertex {mesh.n_vertices}",
              "property float x", "property float y", "property float z"]
    if colored:
        header += ["property uchar red", "property uchar green", "property uchar blue"]
    header += [f"element face {mesh.n_triangles}", "property list uchar int vertex_indices", "end_header"]

    vertices = np.zeros(mesh.n_vertices, dtype=_vertex_dtype(colored))
    for axis, name in enumerate('xyz'):
        vertices[name] = mesh.vertices[:, axis]
    if colored:
        rgb = to_uint8(mesh.colors)
        for axis, name in enumerate(('red', 'green', 'blue')):
            vertices[name] = rgb[:, axis]
    faces = np.zeros(mesh.n_triangles, dtype=_FACE_DTYPE)
    faces['count'] = 3
    for axis, name in enumerate('ijk'):
        faces[name] = mesh.triangles[:, axis]

    with open(path, 'wb') as f:
        f.write(("\n".join(header) + "\n").encode('ascii'))
        f.write(vertices.tobytes())
        f.write(faces.tobytes())


def load_mesh(path: str) -> TriMesh:
    """Read a mesh written by export_mesh"""
    fmt = mesh_format(path)
    return _read_obj(path) if fmt == 'obj' else _read_ply(path)


def _read_obj(path: str) -> TriMesh:
    vertices, colors, faces = [], [], []
    with open(path) as f:
        for line in f:
            parts = line.split()
            if not parts:
                continue
            if parts[0] == 'v':
                values = [float(x) for x in parts[1:]]
                vertices.append(values[:3])
                if len(values) >= 6:
                    colors.append(values[3:6])
            elif parts[0] == 'f':
                faces.append([int(token.split('/')[0]) - 1 for token in parts[1:4]])
    if colors and len(colors) != len(vertices):
        raise ValueError(f"{path}: only {len(colors)} of {len(vertices)} vertices carry colors")
    return TriMesh(np.array(vertices).reshape(-1, 3), np.array(faces, dtype=np.int64).reshape(-1, 3),
                   np.array(colors) if colors else None)


def _read_ply(path: str) -> TriMesh:
    with open(path, 'rb') as f:
        blob = f.read()
    marker = b"end_header\n"
    end = blob.find(marker)
    if not blob.startswith(b"ply") or end < 0:
        raise ValueError(f"Not a PLY file: {path}")
    header = blob[:end].decode('ascii').splitlines()
    if "format binary_little_endian 1.0" not in header:
        raise ValueError(f"{path}: only binary little-endian PLY is supported")
    counts = {}
    for line in header:
        parts = line.split()
        if parts[:1] == ['element']:
            counts[parts[1]] = int(parts[2])
    colored = "property uchar red" in header
    offset = end + len(marker)
    vertex_dtype = _vertex_dtype(colored)
    n_vertices, n_faces = counts.get('vertex', 0), counts.get('face', 0)
    vertices = np.frombuffer(blob, dtype=vertex_dtype, count=n_vertices, offset=offset)
    offset += n_vertices * vertex_dtype.itemsize
    faces = np.frombuffer(blob, dtype=_FACE_DTYPE, count=n_faces, offset=offset)
    if n_faces and np.any(faces['count'] != 3):
        raise ValueError(f"{path}: only triangle faces are supported")
    positions = np.stack([vertices[name].astype(np.float64) for name in 'xyz'], axis=-1)
    triangles = np.stack([faces[name].astype(np.int64) for name in 'ijk'], axis=-1)
    colors = None
    if colored:
        colors = np.stack([vertices[name] for name in ('red', 'green', 'blue')], axis=-1) / 255.0
    return TriMesh(positions, triangles, colors)
