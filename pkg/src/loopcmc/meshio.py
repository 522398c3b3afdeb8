"""Deterministic mesh export: OBJ (text) and binary little-endian PLY.

Vertices and vertex normals are emitted for valid nodes only, quad faces
over grid cells whose four corners are valid.  Float formatting is fixed
(%.12e) so identical meshes produce identical bytes.
"""

from __future__ import annotations

import struct

import numpy as np

from .mesh import SurfaceMesh

__all__ = ["obj_bytes", "ply_bytes", "write_mesh"]


def _vertex_table(mesh: SurfaceMesh):
    ny, nx = mesh.mask.shape
    index = -np.ones((ny, nx), dtype=int)
    order = np.nonzero(mesh.mask)
    index[order] = np.arange(len(order[0]))
    verts = mesh.f[order]
    normals = mesh.normal[order]
    faces = []
    for j in range(ny - 1):
        for i in range(nx - 1):
            if mesh.mask[j, i] and mesh.mask[j, i + 1] \
                    and mesh.mask[j + 1, i + 1] and mesh.mask[j + 1, i]:
                faces.append((index[j, i], index[j, i + 1],
                              index[j + 1, i + 1], index[j + 1, i]))
    return verts, normals, faces


def obj_bytes(mesh: SurfaceMesh, comment="") -> bytes:
    verts, normals, faces = _vertex_table(mesh)
    lines = []
    if comment:
        for ln in comment.splitlines():
            lines.append(f"# {ln}")
    lines.append(f"# vertices {len(verts)} faces {len(faces)}")
    for v in verts:
        lines.append("v %.12e %.12e %.12e" % (v[0], v[1], v[2]))
    for n in normals:
        lines.append("vn %.12e %.12e %.12e" % (n[0], n[1], n[2]))
    for f in faces:
        a, b, c, d = (k + 1 for k in f)
        lines.append(f"f {a}//{a} {b}//{b} {c}//{c} {d}//{d}")
    return ("\n".join(lines) + "\n").encode()


def ply_bytes(mesh: SurfaceMesh) -> bytes:
    verts, normals, faces = _vertex_table(mesh)
    header = "\n".join([
        "ply",
        "format binary_little_endian 1.0",
        f"element vertex {len(verts)}",
        "property double x", "property double y", "property double z",
        "property double nx", "property double ny", "property double nz",
        f"element face {len(faces)}",
        "property list uchar int vertex_indices",
        "end_header", ""]).encode()
    body = bytearray()
    for v, n in zip(verts, normals):
        body += struct.pack("<6d", v[0], v[1], v[2], n[0], n[1], n[2])
    for f in faces:
        body += struct.pack("<B4i", 4, *f)
    return header + bytes(body)


def write_mesh(mesh: SurfaceMesh, path, fmt="obj", comment="") -> None:
    if fmt == "obj":
        data = obj_bytes(mesh, comment)
    elif fmt == "ply":
        data = ply_bytes(mesh)
    else:
        raise ValueError(f"unknown mesh format {fmt!r}")
    with open(path, "wb") as fh:
        fh.write(data)
