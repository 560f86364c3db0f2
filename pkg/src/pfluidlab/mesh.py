"""Periodic structured simplicial meshes of the box (0, 2*pi)^d.

A uniform n^d grid of cells is subdivided by the Kuhn pattern: each square
splits into 2 triangles along the same diagonal, each cube into 6 tetrahedra
along vertex-monotone lattice paths (one per permutation of the axes).  The
pattern is translation-consistent, so the triangulation is conformal on the
torus, and every simplex belongs to a single similarity class per dimension,
which makes the shape-regularity ratio independent of n.

Vertices are identified periodically (quotient construction, no ghost
layers).  Because distinct geometric entities on the torus can share the
same vertex set for small n, edges and faces are keyed by quantized midpoint
modulo the lattice together with their translation-invariant offsets, never
by vertex pairs.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

__all__ = ["PeriodicMesh", "Patch", "build_structured", "patch", "quality_report"]

BOX_LENGTH = 2.0 * np.pi

# local edges of the reference d-simplex, lexicographic vertex pairs
SIMPLEX_EDGES = {
    2: ((0, 1), (0, 2), (1, 2)),
    3: ((0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)),
}


@dataclass
class Patch:
    """Neighborhood of simplex `K`: all simplices touching it, K included."""

    simplex: int
    members: np.ndarray


@dataclass
class PeriodicMesh:
    dim: int
    n: int
    vertices: np.ndarray        # (nv, d) representative coordinates in [0, 2pi)
    simplices: np.ndarray       # (ne, d+1) periodic vertex ids
    cell_lattice: np.ndarray    # (ne, d+1, d) unwrapped integer lattice corners
    cell_coords: np.ndarray     # (ne, d+1, d) unwrapped corner coordinates
    h_K: np.ndarray             # per-simplex diameter
    rho_K: np.ndarray           # per-simplex inscribed-ball diameter
    volumes: np.ndarray         # per-simplex measure
    edge_of_cell: np.ndarray    # (ne, n_local_edges) global edge ids
    n_edges: int
    edge_midpoints: np.ndarray  # (n_edges, d) representative midpoints in [0, 2pi)
    _vertex_to_simplices: list = field(default_factory=list, repr=False)

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def n_simplices(self) -> int:
        return self.simplices.shape[0]

    @property
    def h(self) -> float:
        return float(self.h_K.max())

    def vertex_star(self, v: int) -> np.ndarray:
        """Ids of simplices containing vertex v."""
        return self._vertex_to_simplices[v]

    def dump_text(self, path) -> None:
        """Plain-text dump: one line per vertex (coordinates), then one line
        per simplex (vertex ids)."""
        with open(path, "w") as fh:
            fh.write(f"# vertices {self.n_vertices} dim {self.dim}\n")
            for v in self.vertices:
                fh.write(" ".join(f"{x:.17g}" for x in v) + "\n")
            fh.write(f"# simplices {self.n_simplices}\n")
            for s in self.simplices:
                fh.write(" ".join(str(i) for i in s) + "\n")


def _vertex_id(lattice: np.ndarray, n: int) -> np.ndarray:
    """Periodic vertex id of integer lattice points, stacked over last axis."""
    wrapped = np.mod(lattice, n)
    vid = wrapped[..., 0]
    for k in range(1, lattice.shape[-1]):
        vid = vid * n + wrapped[..., k]
    return vid


def _kuhn_cells(dim: int, n: int) -> np.ndarray:
    """Unwrapped integer corner coordinates of all simplices, (ne, d+1, d)."""
    axes = [np.arange(n)] * dim
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, dim)
    cells = []
    eye = np.eye(dim, dtype=int)
    for perm in itertools.permutations(range(dim)):
        corners = [np.zeros(dim, dtype=int)]
        for ax in perm:
            corners.append(corners[-1] + eye[ax])
        corners = np.array(corners)  # (d+1, d) offsets
        cells.append(grid[:, None, :] + corners[None, :, :])
    return np.concatenate(cells, axis=0)


def _entity_key(corners_lattice: np.ndarray, n: int):
    """Torus-unique key of a sub-simplex given its unwrapped lattice corners.

    Two entities are periodically identified iff they differ by a lattice
    translation of n per axis: the (scaled) centroid modulo the lattice plus
    the sorted translation-invariant offsets pin that down exactly.
    """
    m = corners_lattice.shape[0]
    s = corners_lattice.sum(axis=0)
    rel = sorted(tuple(int(x) for x in (m * c - s)) for c in corners_lattice)
    return (tuple(int(x) for x in np.mod(s, m * n)), tuple(rel))


def _geometry(dim, cell_coords):
    X0 = cell_coords[:, 0, :]
    J = np.swapaxes(cell_coords[:, 1:, :] - X0[:, None, :], 1, 2)  # (ne, d, d)
    detJ = np.linalg.det(J)
    fact = 1.0
    for k in range(2, dim + 1):
        fact *= k
    volumes = np.abs(detJ) / fact

    # diameter: max pairwise corner distance
    diffs = cell_coords[:, :, None, :] - cell_coords[:, None, :, :]
    h_K = np.sqrt((diffs**2).sum(-1)).max(axis=(1, 2))

    # inscribed-ball diameter: 2 * d * |K| / (sum of facet measures)
    ne = cell_coords.shape[0]
    facet_sum = np.zeros(ne)
    idx = list(range(dim + 1))
    for drop in idx:
        keep = [i for i in idx if i != drop]
        F = cell_coords[:, keep, :]
        if dim == 2:
            facet_sum += np.sqrt(((F[:, 1] - F[:, 0]) ** 2).sum(-1))
        else:
            cr = np.cross(F[:, 1] - F[:, 0], F[:, 2] - F[:, 0])
            facet_sum += 0.5 * np.sqrt((cr**2).sum(-1))
    rho_K = 2.0 * dim * volumes / facet_sum
    return h_K, rho_K, volumes


def build_structured(dim: int, n: int) -> PeriodicMesh:
    """Kuhn-subdivided periodic mesh of (0, 2*pi)^dim with n cells per axis.

    n >= 2 is required: with a single cell per axis, periodic identification
    would glue a simplex to itself along a face.
    """
    if dim not in (2, 3):
        raise ValueError(f"dim must be 2 or 3, got {dim}")
    if not (isinstance(n, (int, np.integer)) and n >= 2):
        raise ValueError(f"n must be an integer >= 2, got {n!r}")
    n = int(n)

    a = BOX_LENGTH / n
    lattice = _kuhn_cells(dim, n)                   # (ne, d+1, d) ints
    cell_coords = a * lattice.astype(float)
    simplices = _vertex_id(lattice, n)              # (ne, d+1)

    axes = [np.arange(n)] * dim
    vgrid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, dim)
    vertices = a * vgrid.astype(float)

    h_K, rho_K, volumes = _geometry(dim, cell_coords)

    # periodic edge enumeration for quadratic elements
    local_edges = SIMPLEX_EDGES[dim]
    ne = lattice.shape[0]
    edge_of_cell = np.zeros((ne, len(local_edges)), dtype=np.int64)
    edge_index: dict = {}
    midpoints = []
    for e in range(ne):
        for li, (i, j) in enumerate(local_edges):
            key = _entity_key(lattice[e, [i, j], :], n)
            eid = edge_index.get(key)
            if eid is None:
                eid = len(edge_index)
                edge_index[key] = eid
                mid = 0.5 * (cell_coords[e, i] + cell_coords[e, j])
                midpoints.append(np.mod(mid, BOX_LENGTH))
            edge_of_cell[e, li] = eid

    mesh = PeriodicMesh(
        dim=dim,
        n=n,
        vertices=vertices,
        simplices=simplices,
        cell_lattice=lattice,
        cell_coords=cell_coords,
        h_K=h_K,
        rho_K=rho_K,
        volumes=volumes,
        edge_of_cell=edge_of_cell,
        n_edges=len(edge_index),
        edge_midpoints=np.array(midpoints),
    )

    star = [[] for _ in range(mesh.n_vertices)]
    for e in range(ne):
        for v in set(int(v) for v in simplices[e]):
            star[v].append(e)
    mesh._vertex_to_simplices = [np.array(sorted(s), dtype=np.int64) for s in star]
    return mesh


def patch(mesh: PeriodicMesh, K: int) -> Patch:
    """Simplices touching K (sharing at least a vertex, periodically)."""
    if not 0 <= K < mesh.n_simplices:
        raise ValueError(f"simplex id {K} out of range")
    members = set()
    for v in set(int(v) for v in mesh.simplices[K]):
        members.update(int(e) for e in mesh.vertex_star(v))
    return Patch(simplex=K, members=np.array(sorted(members), dtype=np.int64))


def quality_report(mesh: PeriodicMesh) -> dict:
    """Mesh-quality metrics: global h, shape-regularity ratio, smallest rho_K."""
    return {
        "h": mesh.h,
        "gamma0": float((mesh.h_K / mesh.rho_K).max()),
        "min_rho": float(mesh.rho_K.min()),
    }


def facet_counts(mesh: PeriodicMesh) -> dict:
    """Number of simplices sharing each (d-1)-facet, keyed per periodic facet.

    Conformality of the periodic triangulation means every count is exactly 2.
    """
    counts: dict = {}
    idx = list(range(mesh.dim + 1))
    for e in range(mesh.n_simplices):
        for drop in idx:
            keep = [i for i in idx if i != drop]
            key = _entity_key(mesh.cell_lattice[e, keep, :], mesh.n)
            counts[key] = counts.get(key, 0) + 1
    return counts
