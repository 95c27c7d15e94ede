"""Structured triangulation of the unit square."""
from dataclasses import dataclass

import numpy as np

# boundary markers
BOTTOM, RIGHT, TOP, LEFT = 1, 2, 3, 4


@dataclass(frozen=True)
class TriMesh:
    """Conforming triangle mesh.

    Attributes
    ----------
    vertices : (nv, 2) array
    triangles : (nt, 3) int array, counter-clockwise
    edges : (ned, 2) int array, each edge once with sorted vertex ids
    tri_edges : (nt, 3) int array; local edge k joins local vertices k and k+1 (mod 3)
    boundary_edges : (nb,) int array of indices into ``edges``
    boundary_markers : (nb,) int array (1 bottom, 2 right, 3 top, 4 left)
    """

    n: int
    vertices: np.ndarray
    triangles: np.ndarray
    edges: np.ndarray
    tri_edges: np.ndarray
    boundary_edges: np.ndarray
    boundary_markers: np.ndarray

    @property
    def num_vertices(self):
        return self.vertices.shape[0]

    @property
    def num_triangles(self):
        return self.triangles.shape[0]

    @property
    def num_edges(self):
        return self.edges.shape[0]

    def signed_areas(self):
        p = self.vertices[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def centroids(self):
        return self.vertices[self.triangles].mean(axis=1)

    def boundary_vertex_mask(self):
        mask = np.zeros(self.num_vertices, dtype=bool)
        mask[self.edges[self.boundary_edges].ravel()] = True
        return mask

    def boundary_edge_mask(self):
        mask = np.zeros(self.num_edges, dtype=bool)
        mask[self.boundary_edges] = True
        return mask


def build_unit_square_mesh(n):
    """Split each of the n x n cells along its SW-NE diagonal."""
    if int(n) != n or n < 1:
        raise ValueError(f"n must be a positive integer, got {n!r}")
    n = int(n)
    t = np.linspace(0.0, 1.0, n + 1)
    X, Y = np.meshgrid(t, t)
    vertices = np.column_stack([X.ravel(), Y.ravel()])

    j, i = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    sw = (j * (n + 1) + i).ravel()
    se, nw = sw + 1, sw + n + 1
    ne = nw + 1
    lower = np.column_stack([sw, se, ne])
    upper = np.column_stack([sw, ne, nw])
    triangles = np.empty((2 * n * n, 3), dtype=np.int64)
    triangles[0::2] = lower
    triangles[1::2] = upper

    local = triangles[:, [[0, 1], [1, 2], [2, 0]]].reshape(-1, 2)
    local = np.sort(local, axis=1)
    edges, inverse, counts = np.unique(local, axis=0, return_inverse=True,
                                       return_counts=True)
    tri_edges = inverse.reshape(-1, 3)

    boundary = np.flatnonzero(counts == 1)
    mid = vertices[edges[boundary]].mean(axis=1)
    markers = np.select(
        [np.isclose(mid[:, 1], 0.0), np.isclose(mid[:, 0], 1.0),
         np.isclose(mid[:, 1], 1.0), np.isclose(mid[:, 0], 0.0)],
        [BOTTOM, RIGHT, TOP, LEFT], default=0)
    return TriMesh(n, vertices, triangles, edges.astype(np.int64),
                   tri_edges.astype(np.int64), boundary, markers)
