"""Triangulations of the closed unit disk.

The mesher lays vertices on concentric rings (6j vertices on ring j at
radius j/n_rings) and triangulates each annulus with an angular merge
sweep, so element quality is uniform and the construction is exactly
reproducible.  Boundary vertices land on the unit circle up to the
accuracy of cos/sin, and the boundary edges form a single positively
oriented loop.

A small plain-text format stores vertices to 17 significant digits so
a written mesh reloads bit for bit.
"""

import hashlib
import math
from dataclasses import dataclass, field

import numpy as np

from swellrom.errors import MeshGenerationFailure, ShapeMismatch

# Ring count padding keeps every element edge below about 1.25 * target_h
# while the boundary vertex count stays at or above ceil(2*pi/target_h).
RING_FACTOR = 1.1

_BOUNDARY_TOL = 1e-12


@dataclass(frozen=True)
class Mesh:
    """Conforming triangulation of the unit disk.

    Attributes
    ----------
    vertices : ndarray, shape (nv, 2)
    cells : ndarray, shape (nc, 3)
        Vertex indices, counterclockwise per cell.
    boundary_edges : ndarray, shape (nb, 2)
        Consecutive vertex pairs forming one counterclockwise loop.
    boundary_vertices : ndarray, shape (nb,)
        Loop-ordered boundary vertex indices; entry k is the first
        vertex of ``boundary_edges[k]``.
    cell_size : ndarray, shape (nc,)
        Longest edge length per cell.
    """

    vertices: np.ndarray
    cells: np.ndarray
    boundary_edges: np.ndarray
    boundary_vertices: np.ndarray
    cell_size: np.ndarray = field(default=None)

    def __post_init__(self):
        verts = np.ascontiguousarray(self.vertices, dtype=np.float64)
        cells = np.ascontiguousarray(self.cells, dtype=np.int64)
        bedges = np.ascontiguousarray(self.boundary_edges, dtype=np.int64)
        bverts = np.ascontiguousarray(self.boundary_vertices, dtype=np.int64)
        if verts.ndim != 2 or verts.shape[1] != 2:
            raise ShapeMismatch("vertices must have shape (nv, 2)")
        if cells.ndim != 2 or cells.shape[1] != 3:
            raise ShapeMismatch("cells must have shape (nc, 3)")
        if bedges.ndim != 2 or bedges.shape[1] != 2:
            raise ShapeMismatch("boundary_edges must have shape (nb, 2)")
        object.__setattr__(self, "vertices", verts)
        object.__setattr__(self, "cells", cells)
        object.__setattr__(self, "boundary_edges", bedges)
        object.__setattr__(self, "boundary_vertices", bverts)

        areas = _signed_areas(verts, cells)
        if np.any(areas <= 0.0):
            bad = int(np.argmin(areas))
            raise MeshGenerationFailure(
                f"cell {bad} is degenerate or clockwise (area {areas[bad]:.3e})"
            )

        if not np.array_equal(bverts, bedges[:, 0]):
            raise MeshGenerationFailure("boundary vertices are not loop ordered")
        if not np.array_equal(np.roll(bedges[:, 0], -1), bedges[:, 1]):
            raise MeshGenerationFailure("boundary edges do not form a closed loop")
        radii = np.hypot(verts[bverts, 0], verts[bverts, 1])
        if np.max(np.abs(radii - 1.0)) > _BOUNDARY_TOL:
            raise MeshGenerationFailure("boundary vertices are off the unit circle")
        loop = verts[bverts]
        nxt = np.roll(loop, -1, axis=0)
        loop_area = 0.5 * np.sum(loop[:, 0] * nxt[:, 1] - loop[:, 1] * nxt[:, 0])
        if loop_area <= 0.0:
            raise MeshGenerationFailure("boundary loop is clockwise")

        sizes = _longest_edges(verts, cells)
        if self.cell_size is None:
            object.__setattr__(self, "cell_size", sizes)
        else:
            given = np.ascontiguousarray(self.cell_size, dtype=np.float64)
            if given.shape != sizes.shape or np.max(np.abs(given - sizes)) > 1e-12:
                raise ShapeMismatch("cell_size disagrees with cell geometry")
            object.__setattr__(self, "cell_size", given)

    @property
    def n_vertices(self):
        return self.vertices.shape[0]

    @property
    def n_cells(self):
        return self.cells.shape[0]

    @property
    def n_boundary(self):
        return self.boundary_vertices.shape[0]


def _signed_areas(verts, cells):
    p = verts[cells]
    e1 = p[:, 1] - p[:, 0]
    e2 = p[:, 2] - p[:, 0]
    return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])


def _longest_edges(verts, cells):
    p = verts[cells]
    e01 = np.linalg.norm(p[:, 1] - p[:, 0], axis=1)
    e12 = np.linalg.norm(p[:, 2] - p[:, 1], axis=1)
    e20 = np.linalg.norm(p[:, 0] - p[:, 2], axis=1)
    return np.maximum(e01, np.maximum(e12, e20))


def local_mesh_size(mesh):
    """Per-cell mesh size (longest edge), shape (nc,)."""
    return mesh.cell_size


def generate_disk_mesh(target_h):
    """Triangulate the unit disk with elements no larger than ~target_h.

    Parameters
    ----------
    target_h : float
        Requested mesh size, must lie in (0, 1).

    Returns
    -------
    Mesh

    Notes
    -----
    Ring j of ``n_rings = ceil(RING_FACTOR / target_h)`` carries 6j
    vertices at radius j / n_rings, giving 1 + 3 n (n+1) vertices and
    6 n^2 cells.  Each annulus is triangulated by advancing whichever
    ring has the angularly nearer next vertex, which keeps all cells
    counterclockwise and the aspect ratios bounded independently of h.
    """
    if not (0.0 < target_h < 1.0):
        raise MeshGenerationFailure(
            f"target_h must lie in (0, 1), got {target_h!r}"
        )
    n_rings = max(2, math.ceil(RING_FACTOR / target_h))

    verts = [np.zeros((1, 2))]
    ring_start = [0]  # index of the first vertex of each ring, ring 0 = center
    for j in range(1, n_rings + 1):
        m = 6 * j
        ring_start.append(1 + 3 * j * (j - 1))
        angles = 2.0 * np.pi * np.arange(m) / m
        radius = j / n_rings
        verts.append(radius * np.column_stack([np.cos(angles), np.sin(angles)]))
    vertices = np.vstack(verts)

    cells = []
    first = ring_start[1]
    for k in range(6):
        cells.append((0, first + k, first + (k + 1) % 6))
    for j in range(2, n_rings + 1):
        cells.extend(_zip_annulus(ring_start[j - 1], 6 * (j - 1), ring_start[j], 6 * j))
    cells = np.array(cells, dtype=np.int64)

    m = 6 * n_rings
    bverts = ring_start[n_rings] + np.arange(m, dtype=np.int64)
    bedges = np.column_stack([bverts, np.roll(bverts, -1)])
    return Mesh(vertices, cells, bedges, bverts)


def _zip_annulus(inner_start, n_inner, outer_start, n_outer):
    """Triangles between two rings, advancing by next-vertex angle.

    The comparison (o+1)/n_outer <= (i+1)/n_inner is done with integer
    cross multiplication so ties resolve identically on every platform.
    """
    cells = []
    i = 0
    o = 0
    while i < n_inner or o < n_outer:
        advance_outer = o < n_outer and (
            i == n_inner or (o + 1) * n_inner <= (i + 1) * n_outer
        )
        if advance_outer:
            cells.append(
                (outer_start + o % n_outer,
                 outer_start + (o + 1) % n_outer,
                 inner_start + i % n_inner)
            )
            o += 1
        else:
            cells.append(
                (inner_start + i % n_inner,
                 outer_start + o % n_outer,
                 inner_start + (i + 1) % n_inner)
            )
            i += 1
    return cells


def mesh_text(mesh):
    """Serialize a mesh to the plain-text exchange format.

    Vertices are written with 17 significant digits, so float64
    coordinates survive a round trip exactly.
    """
    lines = [f"vertices {mesh.n_vertices}"]
    for x, y in mesh.vertices:
        lines.append(f"{x:.17g} {y:.17g}")
    lines.append(f"cells {mesh.n_cells}")
    for a, b, c in mesh.cells:
        lines.append(f"{a} {b} {c}")
    lines.append(f"bedges {mesh.n_boundary}")
    for a, b in mesh.boundary_edges:
        lines.append(f"{a} {b}")
    return "\n".join(lines) + "\n"


def mesh_from_text(text):
    """Inverse of :func:`mesh_text`."""
    tokens = text.split()
    pos = 0

    def expect(word):
        nonlocal pos
        if pos >= len(tokens) or tokens[pos] != word:
            raise ShapeMismatch(f"malformed mesh text, expected '{word}'")
        pos += 1
        count = int(tokens[pos])
        pos += 1
        return count

    nv = expect("vertices")
    verts = np.array(tokens[pos:pos + 2 * nv], dtype=np.float64).reshape(nv, 2)
    pos += 2 * nv
    nc = expect("cells")
    cells = np.array(tokens[pos:pos + 3 * nc], dtype=np.int64).reshape(nc, 3)
    pos += 3 * nc
    nb = expect("bedges")
    bedges = np.array(tokens[pos:pos + 2 * nb], dtype=np.int64).reshape(nb, 2)
    pos += 2 * nb
    if pos != len(tokens):
        raise ShapeMismatch("trailing tokens in mesh text")
    return Mesh(verts, cells, bedges, bedges[:, 0].copy())


def save_mesh(mesh, path):
    with open(path, "w") as fh:
        fh.write(mesh_text(mesh))


def load_mesh(path):
    with open(path) as fh:
        return mesh_from_text(fh.read())


def mesh_hash(mesh):
    """SHA-256 hex digest of the canonical text serialization."""
    return hashlib.sha256(mesh_text(mesh).encode("utf-8")).hexdigest()
