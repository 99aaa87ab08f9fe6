"""Structured simplicial meshes: 1D intervals and right-triangulated rectangles.

Meshes are immutable after construction.  All rectangles are split along the
lower-left to upper-right diagonal so the mesh-size function stays smooth on
uniform grids.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, GeometryError, PairingError

# Local edges of the reference triangle (vertex index pairs).
TRI_EDGES = ((0, 1), (1, 2), (2, 0))


@dataclass(frozen=True)
class CellGeometry:
    """Geometric data of a single cell: measure, circumradius and affine map.

    The affine map is ``x = origin + jacobian @ xi`` with ``xi`` in the
    reference cell ([0,1] segment or unit right triangle).
    """

    measure: float
    circumradius: float
    origin: np.ndarray
    jacobian: np.ndarray

    def __post_init__(self):
        if self.measure <= 0.0:
            raise GeometryError(f"degenerate cell: measure {self.measure}")


def circumradius(vertices: np.ndarray) -> float:
    """Circumradius of a segment (half length) or triangle (abc / 4A)."""
    v = np.asarray(vertices, dtype=float)
    if v.shape[0] == 2:
        length = float(np.linalg.norm(v[1] - v[0]))
        if length <= 0.0:
            raise GeometryError("zero-length segment")
        return 0.5 * length
    if v.shape[0] == 3:
        a = float(np.linalg.norm(v[1] - v[0]))
        b = float(np.linalg.norm(v[2] - v[1]))
        c = float(np.linalg.norm(v[0] - v[2]))
        e1 = v[1] - v[0]
        e2 = v[2] - v[0]
        area = 0.5 * abs(e1[0] * e2[1] - e1[1] * e2[0])
        if area <= 0.0:
            raise GeometryError("zero-area triangle")
        return a * b * c / (4.0 * area)
    raise GeometryError(f"unsupported cell with {v.shape[0]} vertices")


@dataclass(frozen=True)
class Mesh:
    """Conforming simplicial mesh of an axis-aligned box.

    ``vertices``: (nv, dim) coordinates; ``cells``: (nc, dim+1) vertex ids;
    ``boundary_facets``: per tag, an array of (cell, local_facet) pairs.
    ``periodic_axes`` lists the axes with periodic identification and
    ``periodic_map`` maps slave boundary vertices onto their masters.
    """

    dim: int
    lower: np.ndarray
    upper: np.ndarray
    cells_per_axis: tuple
    vertices: np.ndarray
    cells: np.ndarray
    boundary_facets: dict
    periodic_axes: frozenset = frozenset()
    periodic_map: dict = field(default_factory=dict)

    def __post_init__(self):
        for arr in (self.vertices, self.cells, self.lower, self.upper):
            arr.flags.writeable = False
        measures = self.cell_measures()
        if np.any(measures <= 0.0):
            raise GeometryError("mesh contains degenerate cells")
        box = float(np.prod(self.upper - self.lower))
        total = float(measures.sum())
        if abs(total - box) > 1e-12 * box:
            raise GeometryError(
                f"cells do not tile the domain: sum {total} vs |Omega| {box}")

    # -- geometric quantities ------------------------------------------------

    def cell_vertices(self) -> np.ndarray:
        """(nc, dim+1, dim) coordinates of each cell's vertices."""
        return self.vertices[self.cells]

    def cell_measures(self) -> np.ndarray:
        cv = self.cell_vertices()
        if self.dim == 1:
            return np.abs(cv[:, 1, 0] - cv[:, 0, 0])
        e1 = cv[:, 1] - cv[:, 0]
        e2 = cv[:, 2] - cv[:, 0]
        return 0.5 * np.abs(e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    def cell_circumradii(self) -> np.ndarray:
        cv = self.cell_vertices()
        if self.dim == 1:
            return 0.5 * np.abs(cv[:, 1, 0] - cv[:, 0, 0])
        a = np.linalg.norm(cv[:, 1] - cv[:, 0], axis=1)
        b = np.linalg.norm(cv[:, 2] - cv[:, 1], axis=1)
        c = np.linalg.norm(cv[:, 0] - cv[:, 2], axis=1)
        return a * b * c / (4.0 * self.cell_measures())

    def cell_jacobians(self) -> tuple:
        """Affine maps of all cells: (origins, jacobians, dets, inverses)."""
        cv = self.cell_vertices()
        origins = cv[:, 0]
        if self.dim == 1:
            jac = (cv[:, 1] - cv[:, 0])[:, :, None]
            det = jac[:, 0, 0].copy()
            inv = 1.0 / jac
        else:
            jac = np.stack([cv[:, 1] - cv[:, 0], cv[:, 2] - cv[:, 0]], axis=2)
            det = jac[:, 0, 0] * jac[:, 1, 1] - jac[:, 0, 1] * jac[:, 1, 0]
            inv = np.empty_like(jac)
            inv[:, 0, 0] = jac[:, 1, 1]
            inv[:, 0, 1] = -jac[:, 0, 1]
            inv[:, 1, 0] = -jac[:, 1, 0]
            inv[:, 1, 1] = jac[:, 0, 0]
            inv /= det[:, None, None]
        if np.any(det <= 0.0):
            raise GeometryError("negative Jacobian: inconsistent orientation")
        return origins, jac, det, inv

    def cell_geometry(self, cell: int) -> CellGeometry:
        cv = self.vertices[self.cells[cell]]
        origins, jac, _, _ = self.cell_jacobians()
        return CellGeometry(
            measure=float(self.cell_measures()[cell]),
            circumradius=circumradius(cv),
            origin=origins[cell].copy(),
            jacobian=jac[cell].copy(),
        )

    @property
    def extent(self) -> np.ndarray:
        return self.upper - self.lower


def build_structured_mesh(lower, upper, cells_per_axis, dim=None) -> Mesh:
    """Uniform mesh of the box [lower, upper]: segments (1D) or right
    triangles (2D, two per rectangle, lower-left to upper-right diagonal).
    """
    lower = np.atleast_1d(np.asarray(lower, dtype=float))
    upper = np.atleast_1d(np.asarray(upper, dtype=float))
    if np.isscalar(cells_per_axis) or isinstance(cells_per_axis, int):
        cells_per_axis = (int(cells_per_axis),) * len(lower)
    cells_per_axis = tuple(int(n) for n in cells_per_axis)
    if dim is None:
        dim = len(lower)
    if dim not in (1, 2):
        raise ConfigurationError(f"dim must be 1 or 2, got {dim}")
    if len(lower) != dim or len(cells_per_axis) != dim:
        raise ConfigurationError("domain/cell counts inconsistent with dim")
    if np.any(upper - lower <= 0.0):
        raise ConfigurationError("domain box must have positive extent")
    if any(n < 1 for n in cells_per_axis):
        raise ConfigurationError("need at least one cell per axis")

    if dim == 1:
        nx = cells_per_axis[0]
        x = np.linspace(lower[0], upper[0], nx + 1)
        vertices = x[:, None]
        cells = np.column_stack([np.arange(nx), np.arange(1, nx + 1)])
        boundary = {
            "left": np.array([[0, 0]], dtype=np.int64),
            "right": np.array([[nx - 1, 1]], dtype=np.int64),
        }
        return Mesh(dim=1, lower=lower, upper=upper,
                    cells_per_axis=cells_per_axis,
                    vertices=vertices, cells=cells.astype(np.int64),
                    boundary_facets=boundary)

    nx, ny = cells_per_axis
    x = np.linspace(lower[0], upper[0], nx + 1)
    y = np.linspace(lower[1], upper[1], ny + 1)
    xx, yy = np.meshgrid(x, y, indexing="xy")
    vertices = np.column_stack([xx.ravel(), yy.ravel()])

    def vid(i, j):
        return j * (nx + 1) + i

    ii, jj = np.meshgrid(np.arange(nx), np.arange(ny), indexing="xy")
    ii = ii.ravel()
    jj = jj.ravel()
    v00 = vid(ii, jj)
    v10 = vid(ii + 1, jj)
    v01 = vid(ii, jj + 1)
    v11 = vid(ii + 1, jj + 1)
    lower_tris = np.column_stack([v00, v10, v11])
    upper_tris = np.column_stack([v00, v11, v01])
    cells = np.empty((2 * nx * ny, 3), dtype=np.int64)
    cells[0::2] = lower_tris
    cells[1::2] = upper_tris

    # rectangle (i, j) owns cells 2*(j*nx+i) (lower) and +1 (upper)
    def rect(i, j):
        return 2 * (j * nx + i)

    boundary = {}
    i_arr = np.arange(nx)
    j_arr = np.arange(ny)
    boundary["bottom"] = np.column_stack(
        [rect(i_arr, 0), np.zeros(nx, dtype=np.int64)])
    boundary["top"] = np.column_stack(
        [rect(i_arr, ny - 1) + 1, np.full(nx, 1, dtype=np.int64)])
    boundary["right"] = np.column_stack(
        [rect(nx - 1, j_arr), np.full(ny, 1, dtype=np.int64)])
    boundary["left"] = np.column_stack(
        [rect(0, j_arr) + 1, np.full(ny, 2, dtype=np.int64)])

    return Mesh(dim=2, lower=lower, upper=upper,
                cells_per_axis=cells_per_axis,
                vertices=vertices, cells=cells, boundary_facets=boundary)


def periodic_pairing(mesh: Mesh, axes) -> dict:
    """Identify boundary vertices across each periodic axis.

    Returns a slave -> master vertex map.  Vertices on a high boundary map to
    the matching vertex on the low boundary; when several axes are periodic
    the maps compose, so all four corners of a doubly periodic rectangle
    collapse onto one master.
    """
    axes = sorted(set(int(a) for a in axes))
    for a in axes:
        if a < 0 or a >= mesh.dim:
            raise ConfigurationError(f"periodic axis {a} out of range")
    verts = mesh.vertices
    extent = mesh.extent
    tol = 1e-10 * float(np.max(extent))
    mapping = {}
    for axis in axes:
        hi = np.where(np.abs(verts[:, axis] - mesh.upper[axis]) <= tol)[0]
        lo = np.where(np.abs(verts[:, axis] - mesh.lower[axis]) <= tol)[0]
        # match by the remaining coordinates
        others = [a for a in range(mesh.dim) if a != axis]
        if others:
            key = np.round(verts[lo][:, others] / tol).astype(np.int64)
            table = {tuple(k): int(v) for k, v in zip(key, lo)}
        else:
            table = {(): int(lo[0])}
        for s in hi:
            k = (tuple(np.round(verts[s, others] / tol).astype(np.int64))
                 if others else ())
            if k not in table:
                raise PairingError(
                    f"no matching vertex on axis {axis} for vertex {s}")
            mapping[int(s)] = table[k]
    # resolve chains (corners mapped through both axes)
    def resolve(v):
        seen = set()
        while v in mapping:
            if v in seen:
                raise PairingError("cyclic periodic identification")
            seen.add(v)
            v = mapping[v]
        return v

    return {s: resolve(m) for s, m in mapping.items()}


def with_periodic(mesh: Mesh, axes) -> Mesh:
    """Copy of the mesh carrying a periodic vertex identification."""
    pmap = periodic_pairing(mesh, axes)
    return Mesh(dim=mesh.dim, lower=mesh.lower.copy(), upper=mesh.upper.copy(),
                cells_per_axis=mesh.cells_per_axis,
                vertices=mesh.vertices.copy(), cells=mesh.cells.copy(),
                boundary_facets=mesh.boundary_facets,
                periodic_axes=frozenset(int(a) for a in axes),
                periodic_map=pmap)
