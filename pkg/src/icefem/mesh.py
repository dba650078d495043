"""Planar triangulations with the edge topology needed by the CR element.

Edge ``e`` carries a canonical unit normal ``n`` that points out of its
lower-indexed adjacent cell (out of the domain on the boundary) and the
tangent ``tau = e_r x n``, i.e. ``n`` rotated counterclockwise by 90 degrees.
Local edge ``i`` of a cell is the edge opposite local vertex ``i``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True, eq=False)
class Mesh:
    vertices: np.ndarray  # (V, 2) meters
    cells: np.ndarray  # (C, 3) counterclockwise vertex indices
    edges: np.ndarray  # (E, 2) vertex pairs, oriented along tau
    cell_edges: np.ndarray  # (C, 3) edge opposite local vertex i
    cell_edge_sign: np.ndarray  # (C, 3) +1 where the outward normal equals n
    edge_cells: np.ndarray  # (E, 2) lower cell first; -1 on the boundary
    edge_midpoint: np.ndarray  # (E, 2)
    edge_normal: np.ndarray  # (E, 2)
    edge_tangent: np.ndarray  # (E, 2)
    edge_length: np.ndarray  # (E,)
    cell_area: np.ndarray  # (C,)
    cell_height: np.ndarray  # (C, 3) distance from vertex i to the opposite edge
    boundary_flag: np.ndarray  # (E,) bool
    meta: dict = field(default_factory=dict)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def cell_centroid(self) -> np.ndarray:
        return self.vertices[self.cells].mean(axis=1)

    @property
    def interior_edges(self) -> np.ndarray:
        return np.flatnonzero(~self.boundary_flag)

    def outward_normals(self) -> np.ndarray:
        """(C, 3, 2) outward unit normals of each cell on its local edges."""
        return self.cell_edge_sign[..., None] * self.edge_normal[self.cell_edges]

    def euler_characteristic(self) -> int:
        return self.n_vertices - self.n_edges + self.n_cells

    @classmethod
    def from_triangles(cls, vertices, cells, **meta) -> "Mesh":
        """Build topology and geometry from a vertex list and a triangle list.

        Clockwise triangles are reoriented. Raises ``ValueError`` for
        degenerate triangles or edges shared by more than two cells.
        """
        vertices = np.asarray(vertices, dtype=float).reshape(-1, 2)
        cells = np.array(cells, dtype=np.int64).reshape(-1, 3)
        p = vertices[cells]
        signed = 0.5 * ((p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
                        - (p[:, 2, 0] - p[:, 0, 0]) * (p[:, 1, 1] - p[:, 0, 1]))
        if np.any(np.abs(signed) <= 1e-14 * max(1.0, np.ptp(vertices) ** 2)):
            raise ValueError("degenerate triangle in cell list")
        flip = signed < 0
        cells[flip] = cells[flip][:, [0, 2, 1]]
        area = np.abs(signed)

        n_cells = len(cells)
        # local edge i runs from vertex i+1 to vertex i+2 (counterclockwise)
        start = cells[:, [1, 2, 0]]
        stop = cells[:, [2, 0, 1]]
        key = np.sort(np.stack([start, stop], axis=-1).reshape(-1, 2), axis=1)
        uniq, inverse = np.unique(key, axis=0, return_inverse=True)
        inverse = inverse.reshape(-1)
        n_edges = len(uniq)
        cell_edges = inverse.reshape(n_cells, 3)

        counts = np.bincount(inverse, minlength=n_edges)
        if counts.max() > 2:
            raise ValueError("non-manifold mesh: an edge has more than two cells")
        edge_cells = np.full((n_edges, 2), -1, dtype=np.int64)
        edge_local = np.full((n_edges, 2), -1, dtype=np.int64)
        flat_cell = np.repeat(np.arange(n_cells), 3)
        flat_local = np.tile(np.arange(3), n_cells)
        # cells are visited in increasing order, so slot 0 gets the lower cell
        order = np.argsort(inverse, kind="stable")
        sorted_edges = inverse[order]
        first = np.ones(len(order), dtype=bool)
        first[1:] = sorted_edges[1:] != sorted_edges[:-1]
        slot = np.where(first, 0, 1)
        edge_cells[sorted_edges, slot] = flat_cell[order]
        edge_local[sorted_edges, slot] = flat_local[order]

        owner = edge_cells[:, 0]
        loc = edge_local[:, 0]
        a = cells[owner, (loc + 1) % 3]
        b = cells[owner, (loc + 2) % 3]
        edges = np.stack([a, b], axis=1)
        d = vertices[b] - vertices[a]
        length = np.hypot(d[:, 0], d[:, 1])
        tangent = d / length[:, None]
        normal = np.stack([tangent[:, 1], -tangent[:, 0]], axis=1)
        midpoint = 0.5 * (vertices[a] + vertices[b])

        sign = np.where(edge_cells[cell_edges, 0] == np.arange(n_cells)[:, None], 1.0, -1.0)
        height = 2.0 * area[:, None] / length[cell_edges]
        boundary = edge_cells[:, 1] < 0

        return cls(vertices=vertices, cells=cells, edges=edges, cell_edges=cell_edges,
                   cell_edge_sign=sign, edge_cells=edge_cells, edge_midpoint=midpoint,
                   edge_normal=normal, edge_tangent=tangent, edge_length=length,
                   cell_area=area, cell_height=height, boundary_flag=boundary, meta=meta)


def _zip_rows(bottom: np.ndarray, top: np.ndarray, xb: np.ndarray, xt: np.ndarray) -> list:
    """Triangulate the strip between two rows of vertices sorted by x."""
    tris = []
    i = j = 0
    nb, nt = len(bottom), len(top)
    while i < nb - 1 or j < nt - 1:
        advance_bottom = j == nt - 1 or (i < nb - 1 and xb[i + 1] <= xt[j + 1] + 1e-9 * abs(xt[-1]))
        if advance_bottom:
            tris.append((bottom[i], bottom[i + 1], top[j]))
            i += 1
        else:
            tris.append((bottom[i], top[j + 1], top[j]))
            j += 1
    return tris


def build_uniform_mesh(Lx: float, Ly: float, target_h: float) -> Mesh:
    """Structured near-equilateral triangulation of ``[0, Lx] x [0, Ly]``.

    Vertex rows are spaced ``target_h * sqrt(3)/2`` apart (rounded to fit
    ``Ly``); every other row is shifted by half a spacing and closed by
    boundary vertices, and neighbouring rows are zipped into triangles.
    With a single column the shift is dropped and each strip becomes one
    rectangle cut along a diagonal.
    """
    if not (Lx > 0 and Ly > 0 and target_h > 0):
        raise ValueError("domain size and target_h must be positive")
    if target_h > min(Lx, Ly) * (1 + 1e-12):
        raise ValueError(f"target_h={target_h} exceeds the smaller domain side {min(Lx, Ly)}")

    nx = max(1, int(round(Lx / target_h)))
    ny = max(1, int(round(Ly / (target_h * math.sqrt(3.0) / 2.0))))
    dx = Lx / nx
    offset = nx >= 2

    rows = []
    verts = []
    for j in range(ny + 1):
        y = Ly * j / ny
        if offset and j % 2 == 1:
            xs = np.concatenate([[0.0], (np.arange(nx) + 0.5) * dx, [Lx]])
        else:
            xs = np.arange(nx + 1) * dx
            xs[-1] = Lx
        ids = np.arange(len(verts), len(verts) + len(xs))
        verts.extend((x, y) for x in xs)
        rows.append((ids, xs))

    tris = []
    for j in range(ny):
        (ib, xb), (it, xt) = rows[j], rows[j + 1]
        tris.extend(_zip_rows(ib, it, xb, xt))

    return Mesh.from_triangles(np.array(verts), np.array(tris), Lx=Lx, Ly=Ly,
                               target_h=target_h, nx=nx, ny=ny)


def boundary_edges(mesh: Mesh) -> set[int]:
    return set(np.flatnonzero(mesh.boundary_flag).tolist())


def unit_square_two_triangles() -> Mesh:
    """The smallest rectangle mesh: one square cut along its diagonal."""
    return Mesh.from_triangles([(0, 0), (1, 0), (1, 1), (0, 1)], [(0, 1, 2), (0, 2, 3)])
