"""Lagrange P1-P3 scalar spaces on simplicial meshes.

Provides reference bases (values and gradients), Gauss quadrature on the
segment and symmetric/conical rules on the triangle, global DOF numbering
with periodic identification, node adjacency sets, and the projected
mesh-size field used by the viscosity scalings.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import roots_jacobi

from .errors import ConfigurationError
from .mesh import Mesh, TRI_EDGES

_MAX_QUAD_ORDER = 40


# ---------------------------------------------------------------------------
# reference elements
# ---------------------------------------------------------------------------

def reference_nodes(dim: int, degree: int) -> np.ndarray:
    """Equispaced Lagrange nodes: vertices first, then edge nodes, then the
    cell node (P3 triangles only)."""
    if degree not in (1, 2, 3):
        raise ConfigurationError(f"unsupported degree {degree}")
    if dim == 1:
        verts = [[0.0], [1.0]]
        inner = [[i / degree] for i in range(1, degree)]
        return np.array(verts + inner)
    if dim == 2:
        verts = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]
        nodes = list(verts)
        va = np.array(verts)
        for (a, b) in TRI_EDGES:
            for i in range(1, degree):
                nodes.append(list(va[a] + (va[b] - va[a]) * i / degree))
        if degree == 3:
            nodes.append([1.0 / 3.0, 1.0 / 3.0])
        return np.array(nodes)
    raise ConfigurationError(f"unsupported dim {dim}")


def _monomial_powers(dim: int, degree: int):
    if dim == 1:
        return [(a,) for a in range(degree + 1)]
    return [(a, b) for tot in range(degree + 1)
            for a in range(tot, -1, -1) for b in (tot - a,)]


_BASIS_CACHE: dict = {}


def _basis_coefficients(dim: int, degree: int):
    key = (dim, degree)
    if key not in _BASIS_CACHE:
        nodes = reference_nodes(dim, degree)
        powers = _monomial_powers(dim, degree)
        a = np.empty((len(nodes), len(powers)))
        for m, p in enumerate(powers):
            a[:, m] = np.prod(nodes ** np.array(p), axis=1)
        _BASIS_CACHE[key] = (np.linalg.inv(a), powers)
    return _BASIS_CACHE[key]


def basis_eval(dim: int, degree: int, ref_points) -> tuple:
    """Evaluate all Lagrange basis functions and gradients at reference
    points.  Returns (values (npts, nloc), grads (npts, nloc, dim))."""
    pts = np.atleast_2d(np.asarray(ref_points, dtype=float))
    tol = 1e-12
    if dim == 1:
        inside = (pts[:, 0] >= -tol) & (pts[:, 0] <= 1.0 + tol)
    else:
        inside = (pts >= -tol).all(axis=1) & (pts.sum(axis=1) <= 1.0 + tol)
    if not inside.all():
        raise ConfigurationError("reference point outside reference cell")
    coeff, powers = _basis_coefficients(dim, degree)
    npts = pts.shape[0]
    nmono = len(powers)
    mono = np.empty((npts, nmono))
    dmono = np.zeros((npts, nmono, dim))
    for m, p in enumerate(powers):
        mono[:, m] = np.prod(pts ** np.array(p), axis=1)
        for d in range(dim):
            if p[d] == 0:
                continue
            q = list(p)
            q[d] -= 1
            dmono[:, m, d] = p[d] * np.prod(pts ** np.array(q), axis=1)
    values = mono @ coeff
    grads = np.einsum("pmd,mn->pnd", dmono, coeff)
    return values, grads


# ---------------------------------------------------------------------------
# quadrature
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class QuadratureRule:
    points: np.ndarray   # (nq, dim) reference coordinates
    weights: np.ndarray  # (nq,)
    order: int           # guaranteed polynomial exactness

    def __post_init__(self):
        if np.any(self.weights <= 0.0):
            raise ConfigurationError("quadrature weights must be positive")


# Symmetric positive triangle rules (barycentric orbits and weights summing
# to 1).  Symmetry under coordinate permutations matters beyond aesthetics:
# mirror-image cells must integrate mirror-image integrands identically, or
# quadrature error seeds asymmetric noise in components that the exact
# dynamics keeps constant.
_TRI_RULES = {
    4: [(3, 0.108103018168070, 0.445948490915965, 0.223381589678011),
        (3, 0.816847572980459, 0.091576213509771, 0.109951743655322)],
    5: [(1, 1 / 3, 1 / 3, 0.225),
        (3, 0.059715871789770, 0.470142064105115, 0.132394152788506),
        (3, 0.797426985353087, 0.101286507323456, 0.125939180544827)],
    6: [(3, 0.501426509658179, 0.249286745170910, 0.116786275726379),
        (3, 0.873821971016996, 0.063089014491502, 0.050844906370207),
        (6, 0.053145049844816, 0.310352451033785, 0.082851075618374)],
}


def _expand_orbits(orbits):
    pts = []
    wts = []
    for norb, a, b, w in orbits:
        if norb == 1:
            bary = [(1 / 3, 1 / 3, 1 / 3)]
        elif norb == 3:
            bary = [(a, b, b), (b, a, b), (b, b, a)]
        else:
            c = 1.0 - a - b
            bary = [(a, b, c), (a, c, b), (b, a, c),
                    (b, c, a), (c, a, b), (c, b, a)]
        for l1, l2, l3 in bary:
            pts.append((l2, l3))
            wts.append(w * 0.5)
    return np.array(pts), np.array(wts)


def quadrature_rule(dim: int, order: int) -> QuadratureRule:
    """Rule integrating all monomials of total degree <= order exactly."""
    if order < 0 or order > _MAX_QUAD_ORDER:
        raise ConfigurationError(f"unsupported quadrature order {order}")
    order = max(order, 1)
    if dim == 1:
        n = (order + 2) // 2
        t, w = np.polynomial.legendre.leggauss(n)
        return QuadratureRule(points=((t + 1.0) / 2.0)[:, None],
                              weights=w / 2.0, order=2 * n - 1)
    if dim == 2:
        if order == 1:
            return QuadratureRule(points=np.array([[1 / 3, 1 / 3]]),
                                  weights=np.array([0.5]), order=1)
        if order == 2:
            pts = np.array([[1 / 6, 1 / 6], [2 / 3, 1 / 6], [1 / 6, 2 / 3]])
            return QuadratureRule(points=pts,
                                  weights=np.full(3, 1 / 6), order=2)
        for exact in sorted(_TRI_RULES):
            if order <= exact:
                pts, wts = _expand_orbits(_TRI_RULES[exact])
                return QuadratureRule(points=pts, weights=wts, order=exact)
        # high orders (test oracles): conical product symmetrized over the
        # coordinate swap; positive weights by construction
        n = (order + 2) // 2
        tx, wx = np.polynomial.legendre.leggauss(n)
        xi = (tx + 1.0) / 2.0
        ax = wx / 2.0
        ty, wy = roots_jacobi(n, 1.0, 0.0)
        eta = (ty + 1.0) / 2.0
        ay = wy / 4.0
        pts = np.empty((n * n, 2))
        wts = np.empty(n * n)
        k = 0
        for j in range(n):
            for i in range(n):
                pts[k] = (xi[i] * (1.0 - eta[j]), eta[j])
                wts[k] = ax[i] * ay[j]
                k += 1
        pts = np.vstack([pts, pts[:, ::-1]])
        wts = np.concatenate([wts, wts]) / 2.0
        return QuadratureRule(points=pts, weights=wts, order=2 * n - 1)
    raise ConfigurationError(f"unsupported dim {dim}")


# ---------------------------------------------------------------------------
# global space
# ---------------------------------------------------------------------------

class FESpace:
    """Scalar Lagrange space of degree k on a mesh.

    Global DOFs are numbered vertices first, then edge nodes, then cell
    nodes.  When the mesh carries a periodic identification, paired
    boundary DOFs are merged and all arrays use the reduced numbering.
    """

    def __init__(self, mesh: Mesh, degree: int):
        if degree not in (1, 2, 3):
            raise ConfigurationError(f"unsupported degree {degree}")
        self.mesh = mesh
        self.degree = degree
        self.dim = mesh.dim
        self.ref_nodes = reference_nodes(self.dim, degree)
        self.nloc = len(self.ref_nodes)
        self._build_dofs()
        self._build_adjacency()
        self._build_boundary()
        self._quad_cache: dict = {}
        self._origins, self._jac, self._detj, self._jinv = \
            mesh.cell_jacobians()
        self._mass = {}

    # -- DOF generation ------------------------------------------------------

    def _build_dofs(self):
        mesh = self.mesh
        k = self.degree
        nv = len(mesh.vertices)
        coords = [mesh.vertices]
        ncells = len(mesh.cells)
        cell_dofs = np.empty((ncells, self.nloc), dtype=np.int64)
        cell_dofs[:, :self.dim + 1] = mesh.cells

        next_id = nv
        if k >= 2:
            if self.dim == 1:
                # interior nodes of each segment, left to right
                v0 = mesh.vertices[mesh.cells[:, 0]]
                v1 = mesh.vertices[mesh.cells[:, 1]]
                for i in range(1, k):
                    coords.append(v0 + (v1 - v0) * i / k)
                ids = next_id + np.arange((k - 1) * ncells).reshape(
                    k - 1, ncells)
                for i in range(k - 1):
                    cell_dofs[:, 2 + i] = ids[i]
                next_id += (k - 1) * ncells
            else:
                edges = {}
                edge_nodes = []
                for c in range(ncells):
                    for le, (a, b) in enumerate(TRI_EDGES):
                        ga, gb = mesh.cells[c, a], mesh.cells[c, b]
                        key = (min(ga, gb), max(ga, gb))
                        if key not in edges:
                            edges[key] = next_id
                            pa = mesh.vertices[key[0]]
                            pb = mesh.vertices[key[1]]
                            for i in range(1, k):
                                edge_nodes.append(pa + (pb - pa) * i / k)
                            next_id += k - 1
                        base = edges[key]
                        for i in range(k - 1):
                            # local edge nodes run from local vertex a to b
                            frac_index = i if ga == key[0] else k - 2 - i
                            cell_dofs[c, 3 + le * (k - 1) + i] = \
                                base + frac_index
                if edge_nodes:
                    coords.append(np.array(edge_nodes))
                if k == 3:
                    centroids = mesh.cell_vertices().mean(axis=1)
                    coords.append(centroids)
                    cell_dofs[:, -1] = next_id + np.arange(ncells)
                    next_id += ncells

        geo_coords = np.vstack(coords)
        self.n_geo_dofs = next_id

        # periodic reduction: wrap coordinates on high boundaries, then merge
        if mesh.periodic_axes:
            canon = geo_coords.copy()
            tol = 1e-9 * float(np.max(mesh.extent))
            for axis in sorted(mesh.periodic_axes):
                on_hi = np.abs(canon[:, axis] - mesh.upper[axis]) <= tol
                canon[on_hi, axis] = mesh.lower[axis]
            keys = np.round(canon / tol).astype(np.int64)
            _, first, inverse = np.unique(
                keys, axis=0, return_index=True, return_inverse=True)
            # keep geometric ordering of the masters
            order = np.argsort(first, kind="stable")
            rank = np.empty_like(order)
            rank[order] = np.arange(len(order))
            self.geo_to_dof = rank[inverse]
            self.n_dofs = len(first)
            self.dof_coords = canon[first[order]]
        else:
            self.geo_to_dof = np.arange(self.n_geo_dofs)
            self.n_dofs = self.n_geo_dofs
            self.dof_coords = geo_coords

        self.cell_dofs = self.geo_to_dof[cell_dofs]
        self.vertex_dofs = self.geo_to_dof[:len(mesh.vertices)]
        self.dof_coords.flags.writeable = False
        self.cell_dofs.flags.writeable = False

    # -- adjacency I(i) ------------------------------------------------------

    def _build_adjacency(self):
        n = self.n_dofs
        nloc = self.nloc
        cd = self.cell_dofs
        rows = np.repeat(cd, nloc, axis=1).ravel()
        cols = np.tile(cd, (1, nloc)).ravel()
        pairs = np.unique(np.stack([rows, cols], axis=1), axis=0)
        counts = np.bincount(pairs[:, 0], minlength=n)
        indptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(counts, out=indptr[1:])
        self.adjacency_indptr = indptr
        self.adjacency_indices = pairs[:, 1]

    def node_adjacency(self, i: int) -> np.ndarray:
        """I(i): all DOFs sharing a cell with DOF i (includes i)."""
        lo, hi = self.adjacency_indptr[i], self.adjacency_indptr[i + 1]
        return self.adjacency_indices[lo:hi]

    def local_extrema(self, w: np.ndarray) -> tuple:
        """Per-node max and min of w over the adjacency set I(i)."""
        vals = w[self.adjacency_indices]
        wmax = np.maximum.reduceat(vals, self.adjacency_indptr[:-1])
        wmin = np.minimum.reduceat(vals, self.adjacency_indptr[:-1])
        return wmax, wmin

    # -- boundary ------------------------------------------------------------

    def _build_boundary(self):
        mesh = self.mesh
        tol = 1e-9 * float(np.max(mesh.extent))
        names_lo = {0: "left", 1: "bottom"}
        names_hi = {0: "right", 1: "top"}
        self.boundary_dofs = {}
        self.boundary_normals = {}
        for axis in range(self.dim):
            if axis in mesh.periodic_axes:
                continue
            for side, name in ((0, names_lo[axis]), (1, names_hi[axis])):
                target = (mesh.lower[axis], mesh.upper[axis])[side]
                ids = np.where(
                    np.abs(self.dof_coords[:, axis] - target) <= tol)[0]
                self.boundary_dofs[name] = ids
                normal = np.zeros(self.dim)
                normal[axis] = -1.0 if side == 0 else 1.0
                self.boundary_normals[name] = normal

    def boundary_facet_quadrature(self, tag: str, order: int):
        """Quadrature on the facets of a boundary tag.

        Returns (cells, ref_points (nf, nq, dim), weights (nf, nq), normal).
        Weights include the facet measure.
        """
        mesh = self.mesh
        facets = mesh.boundary_facets[tag]
        normal = self.boundary_normals[tag]
        if self.dim == 1:
            cells = facets[:, 0]
            loc = facets[:, 1]
            ref = np.where(loc[:, None, None] == 0, 0.0, 1.0)
            wts = np.ones((len(cells), 1))
            return cells, ref, wts, normal
        rule = quadrature_rule(1, order)
        t = rule.points[:, 0]
        cells = facets[:, 0]
        nf = len(cells)
        nq = len(t)
        ref = np.empty((nf, nq, 2))
        wts = np.empty((nf, nq))
        cv = mesh.vertices[mesh.cells[cells]]
        origins, _, _, jinv = mesh.cell_jacobians()
        for f in range(nf):
            a, b = TRI_EDGES[facets[f, 1]]
            pa, pb = cv[f, a], cv[f, b]
            phys = pa[None, :] + t[:, None] * (pb - pa)[None, :]
            ref[f] = (phys - origins[cells[f]]) @ jinv[cells[f]].T
            wts[f] = rule.weights * np.linalg.norm(pb - pa)
        return cells, ref, wts, normal

    # -- quadrature workspaces -----------------------------------------------

    def default_order(self) -> int:
        return 2 * self.degree + 1

    def tables(self, order=None):
        """Cached per-cell quadrature tables for a given exactness order.

        Returns (rule, V (nq, nloc), Gphys (nc, nq, nloc, dim),
        wdet (nc, nq)) with wdet the quadrature weights times |det J|.
        """
        if order is None:
            order = self.default_order()
        if order not in self._quad_cache:
            rule = quadrature_rule(self.dim, order)
            v, gref = basis_eval(self.dim, self.degree, rule.points)
            gphys = np.einsum("qnj,cji->cqni", gref, self._jinv)
            wdet = rule.weights[None, :] * np.abs(self._detj)[:, None]
            self._quad_cache[order] = (rule, v, gphys, wdet)
        return self._quad_cache[order]

    def quad_points(self, order=None) -> np.ndarray:
        """Physical coordinates of the quadrature points, (nc, nq, dim)."""
        rule, _, _, _ = self.tables(order)
        return (self._origins[:, None, :]
                + np.einsum("qk,cik->cqi", rule.points, self._jac))

    # -- field evaluation ----------------------------------------------------

    def eval_at_quad(self, w: np.ndarray, order=None) -> np.ndarray:
        """Interpolate a nodal field to quadrature points, (nc, nq)."""
        _, v, _, _ = self.tables(order)
        return np.einsum("qn,cn->cq", v, w[self.cell_dofs])

    def grad_at_quad(self, w: np.ndarray, order=None) -> np.ndarray:
        """Gradient of a nodal field at quadrature points, (nc, nq, dim)."""
        _, _, gphys, _ = self.tables(order)
        return np.einsum("cqni,cn->cqi", gphys, w[self.cell_dofs])

    def interpolate(self, fn) -> np.ndarray:
        """Nodal interpolation of fn(coords) -> (n_dofs,)."""
        return np.asarray(fn(self.dof_coords), dtype=float)

    # -- integrals -----------------------------------------------------------

    def integrate(self, values_at_quad: np.ndarray, order=None) -> float:
        """Integrate per-quad-point values (nc, nq) over the domain."""
        _, _, _, wdet = self.tables(order)
        return float(np.sum(values_at_quad * wdet))

    def rhs_from_scalar(self, g: np.ndarray, order=None) -> np.ndarray:
        """Assemble (g, Phi_i) from quad-point values g (nc, nq)."""
        _, v, _, wdet = self.tables(order)
        local = np.einsum("cq,qn->cn", g * wdet, v)
        return np.bincount(self.cell_dofs.ravel(), weights=local.ravel(),
                           minlength=self.n_dofs)

    def rhs_from_vector(self, f: np.ndarray, order=None) -> np.ndarray:
        """Assemble (f, grad Phi_i) from quad-point values f (nc, nq, dim)."""
        _, _, gphys, wdet = self.tables(order)
        local = np.einsum("cqi,cqni->cn", f * wdet[:, :, None], gphys)
        return np.bincount(self.cell_dofs.ravel(), weights=local.ravel(),
                           minlength=self.n_dofs)

    def circumradius_field(self) -> np.ndarray:
        """Per-cell circumradius divided by the polynomial degree."""
        return self.mesh.cell_circumradii() / self.degree


def node_adjacency(space: FESpace):
    """All adjacency sets I(i), as a list of index arrays."""
    return [space.node_adjacency(i) for i in range(space.n_dofs)]


def mesh_size_field(space: FESpace, tol: float = 1e-12) -> np.ndarray:
    """Nodal mesh-size field: L2 projection of h_K / k onto the space,
    solved with the consistent mass matrix."""
    from . import assembly  # deferred to avoid an import cycle

    hk = space.circumradius_field()
    _, _, _, wdet = space.tables()
    g = np.broadcast_to(hk[:, None], wdet.shape)
    rhs = space.rhs_from_scalar(np.asarray(g))
    mass = assembly.assemble_mass(space, lumped=False)
    h = assembly.apply_mass_inverse(mass, rhs, tol=tol)
    if np.any(h <= 0.0):
        raise ConfigurationError("mesh-size field lost positivity")
    return h
