"""Weak-form operators of the semi-discrete MHD system.

The Galerkin flux term is assembled in integrated-by-parts form,
rhs_i = (F, grad Phi_i) - (n . F, Phi_i)_Gamma, which equals the weak
divergence term with the sign convention M dU/dt = rhs.  Pointwise
nonlinear quantities (velocity, pressure, temperature) are evaluated at the
nodes and interpolated with the Lagrange basis, as are the viscosity
coefficients.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import physics
from .errors import PositivityError, SolverError
from .fe_space import FESpace, basis_eval
from .linalg import CsrMatrix, cg_solve
from .physics import NVEC, primitive_arrays


class ConservedField:
    """Nodal coefficients of (rho, m, E, B [, psi]) over one scalar space.

    Stored as a single (ncomp, n_dofs) array so Runge-Kutta updates are
    plain array arithmetic.
    """

    def __init__(self, space: FESpace, has_psi: bool = False, data=None):
        self.space = space
        self.has_psi = has_psi
        ncomp = 2 * NVEC + 2 + (1 if has_psi else 0)
        if data is None:
            self.data = np.zeros((ncomp, space.n_dofs))
        else:
            if data.shape != (ncomp, space.n_dofs):
                raise ValueError(f"bad field shape {data.shape}")
            self.data = data

    # component views ---------------------------------------------------
    @property
    def rho(self):
        return self.data[0]

    @property
    def m(self):
        return self.data[1:1 + NVEC]

    @property
    def E(self):
        return self.data[1 + NVEC]

    @property
    def B(self):
        return self.data[2 + NVEC:2 + 2 * NVEC]

    @property
    def psi(self):
        return self.data[2 + 2 * NVEC] if self.has_psi else None

    @property
    def ncomp(self):
        return self.data.shape[0]

    def component_names(self):
        names = ["rho", "m_x", "m_y", "E", "B_x", "B_y"]
        if self.has_psi:
            names.append("psi")
        return names

    def copy(self) -> "ConservedField":
        return ConservedField(self.space, self.has_psi, self.data.copy())

    def like(self, data) -> "ConservedField":
        return ConservedField(self.space, self.has_psi, data)

    def check_finite(self):
        if not np.isfinite(self.data).all():
            bad = np.argwhere(~np.isfinite(self.data))
            raise SolverError(f"non-finite solution entries at {bad[:5]}")


@dataclass
class MassMatrix:
    matrix: CsrMatrix
    lumped: bool
    diag: np.ndarray | None = None


def _assemble_matrix(space: FESpace, local, symmetric=False) -> CsrMatrix:
    """Scatter local (nc, nloc, nloc) blocks into a global CSR matrix."""
    cd = space.cell_dofs
    nloc = space.nloc
    rows = np.repeat(cd, nloc, axis=1).ravel()
    cols = np.tile(cd, (1, nloc)).ravel()
    return CsrMatrix.from_coo(space.n_dofs, rows, cols, local.ravel(),
                              symmetric=symmetric)


def assemble_mass(space: FESpace, lumped: bool = False) -> MassMatrix:
    """Consistent mass M_ij = (Phi_j, Phi_i), or its lumped diagonal
    m_i = (1, Phi_i).  Periodic DOFs are already merged by the space."""
    key = "lumped" if lumped else "consistent"
    if key in space._mass:
        return space._mass[key]
    if lumped:
        _, _, _, wdet = space.tables()
        diag = space.rhs_from_scalar(np.ones_like(wdet))
        mat = CsrMatrix.from_coo(space.n_dofs, np.arange(space.n_dofs),
                                 np.arange(space.n_dofs), diag,
                                 symmetric=True)
        out = MassMatrix(matrix=mat, lumped=True, diag=diag)
    else:
        _, v, _, wdet = space.tables()
        local = np.einsum("qm,qn,cq->cmn", v, v, wdet)
        out = MassMatrix(matrix=_assemble_matrix(space, local,
                                                 symmetric=True),
                         lumped=False)
    space._mass[key] = out
    return out


def apply_mass_inverse(mass: MassMatrix, rhs, tol: float = 1e-10):
    """Solve M x = rhs: division for lumped mass, Jacobi-CG otherwise.
    rhs may be (n,) or blocked (n, k)."""
    rhs = np.asarray(rhs, dtype=float)
    if mass.lumped:
        if np.any(mass.diag <= 0.0):
            raise SolverError("lumped mass has nonpositive entries")
        return rhs / (mass.diag if rhs.ndim == 1 else mass.diag[:, None])
    x, _ = cg_solve(mass.matrix, rhs, tol=tol)
    return x


def assemble_gradient(space: FESpace, axis: int) -> CsrMatrix:
    """C_ij = (d Phi_j / d x_axis, Phi_i)."""
    _, v, gphys, wdet = space.tables()
    local = np.einsum("qm,cqn,cq->cmn", v, gphys[..., axis], wdet)
    return _assemble_matrix(space, local)


def assemble_stiffness(space: FESpace) -> CsrMatrix:
    """A_ij = (grad Phi_j, grad Phi_i)."""
    _, _, gphys, wdet = space.tables()
    local = np.einsum("cqmi,cqni,cq->cmn", gphys, gphys, wdet)
    return _assemble_matrix(space, local, symmetric=True)


def diffusion_spectral_radius(space: FESpace, mass: MassMatrix,
                              iterations: int = 40) -> float:
    """Power-iteration estimate of the largest eigenvalue of M^-1 A, the
    unit-coefficient diffusion operator; used for the explicit-step
    viscous stability bound."""
    a = assemble_stiffness(space)
    rng = np.random.default_rng(1234)
    v = rng.standard_normal(space.n_dofs)
    lam = 0.0
    for _ in range(iterations):
        v /= np.linalg.norm(v)
        w = apply_mass_inverse(mass, a @ v, tol=1e-8)
        lam = float(v @ w)
        v = w
    return lam * 1.05


# ---------------------------------------------------------------------------
# nodal primitives and flux evaluation
# ---------------------------------------------------------------------------

def nodal_primitives(U: ConservedField, gamma: float, check=True):
    """(u, p, T) nodal fields; positivity is enforced at the nodes."""
    u, p, T, _ = primitive_arrays(U.rho, U.m, U.E, U.B, gamma,
                                  check=check, context="nodal")
    return u, p, T


def _primitive_quad(rho_q, mq, bq, eq, gamma, cells=None):
    """Velocity and pressure from interpolated conserved values.

    Density must stay positive at the quadrature points; the offending
    cells are reported.  Pressure only enters the flux linearly, so small
    interpolation undershoots of the internal energy are tolerated here
    and positivity of e is enforced at the nodes."""
    if np.any(rho_q <= 0.0):
        bad = np.unique(np.nonzero(rho_q <= 0.0)[0])
        raise PositivityError(
            f"density lost positivity at quadrature points of cells "
            f"{bad[:5].tolist()}", where=bad)
    uq = mq / rho_q
    kinetic = 0.5 * np.einsum("j...,j...->...", mq, uq)
    magnetic = 0.5 * np.einsum("j...,j...->...", bq, bq)
    pq = (gamma - 1.0) * (eq - kinetic - magnetic)
    return uq, pq


def _quad_fields(U: ConservedField, gamma: float, order=None):
    """Interpolate the conserved state to quadrature points and evaluate
    velocity and pressure there."""
    sp = U.space
    rho_q = sp.eval_at_quad(U.rho, order)
    mq = np.stack([sp.eval_at_quad(U.m[j], order) for j in range(NVEC)])
    bq = np.stack([sp.eval_at_quad(U.B[j], order) for j in range(NVEC)])
    eq = sp.eval_at_quad(U.E, order)
    uq, pq = _primitive_quad(rho_q, mq, bq, eq, gamma)
    return mq, bq, uq, eq, pq


def _flux_arrays(mq, bq, uq, eq, pq, dim):
    """Total inviscid flux per component along each mesh direction.

    Returns a list of (dim, ...) arrays ordered like the conserved rows
    (rho, m_x, m_y, E, B_x, B_y).
    """
    bb = np.einsum("j...,j...->...", bq, bq)
    bu = np.einsum("j...,j...->...", bq, uq)
    out = []
    f_rho = mq[:1] if dim == 1 else mq
    out.append(f_rho)
    for j in range(NVEC):
        f = np.empty((dim,) + mq.shape[1:])
        for i in range(dim):
            f[i] = mq[i] * uq[j] - bq[i] * bq[j]
            if i == j:
                f[i] += pq + 0.5 * bb
        out.append(f)
    f_e = np.empty((dim,) + mq.shape[1:])
    for i in range(dim):
        f_e[i] = uq[i] * (eq + pq) + 0.5 * bb * uq[i] - bq[i] * bu
    out.append(f_e)
    for j in range(NVEC):
        f = np.empty((dim,) + mq.shape[1:])
        for i in range(dim):
            f[i] = uq[i] * bq[j] - bq[i] * uq[j]
        out.append(f)
    return out


def nodal_flux_arrays(U: ConservedField, gamma: float):
    """Group-interpolation fluxes: flux rows evaluated at the nodes,
    shaped (dim, n_dofs) per component.  Used by the residual."""
    dim = U.space.dim
    u, p, _ = nodal_primitives(U, gamma)
    return _flux_arrays(U.m, U.B, u, U.E, p, dim)


def flux_divergence_at_quad(space: FESpace, nodal_flux, order=None):
    """div of the nodally interpolated flux at quad points, per component."""
    out = []
    for f in nodal_flux:
        div = np.zeros(space.tables(order)[3].shape)
        for i in range(space.dim):
            div += space.grad_at_quad(f[i], order)[..., i]
        out.append(div)
    return out


# ---------------------------------------------------------------------------
# Galerkin flux term
# ---------------------------------------------------------------------------

@dataclass
class GlmTerms:
    """Per-step hyperbolic-cleaning coefficients: transport speed c_h and
    the nodal damping rate field c_r * c_h / h_h."""
    c_h: float
    damping: np.ndarray


def flux_divergence_rhs(U: ConservedField, gamma: float, glm: GlmTerms = None,
                        order=None) -> np.ndarray:
    """Right-hand side of M dU/dt = rhs for the inviscid terms.

    Assembles (F, grad Phi_i) minus the boundary consistency term
    (n . F, Phi_i) on non-periodic boundaries, so a constant state yields an
    exactly zero right-hand side.  When GLM cleaning is active the psi
    transport row and the induction/energy source rows are included.
    """
    sp = U.space
    dim = sp.dim
    mq, bq, uq, eq, pq = _quad_fields(U, gamma, order)
    fluxes = _flux_arrays(mq, bq, uq, eq, pq, dim)

    rhs = np.zeros_like(U.data)
    for c, f in enumerate(fluxes):
        # f has shape (dim, nc, nq) -> (nc, nq, dim)
        rhs[c] = sp.rhs_from_vector(np.moveaxis(f, 0, -1), order)

    _boundary_flux_term(U, gamma, rhs, order)

    if glm is not None:
        if U.psi is None:
            raise SolverError("GLM terms require a psi component")
        i_e = 1 + NVEC
        i_b = 2 + NVEC
        i_psi = 2 + 2 * NVEC
        gpsi = sp.grad_at_quad(U.psi, order)                 # (nc, nq, dim)
        divb = np.zeros(gpsi.shape[:2])
        for i in range(dim):
            divb += sp.grad_at_quad(U.B[i], order)[..., i]
        damp_nodal = glm.damping * U.psi
        damp_q = sp.eval_at_quad(damp_nodal, order)
        rhs[i_psi] = -glm.c_h * sp.rhs_from_scalar(divb, order) \
            - sp.rhs_from_scalar(damp_q, order)
        source_e = np.zeros(gpsi.shape[:2])
        for i in range(dim):
            rhs[i_b + i] -= sp.rhs_from_scalar(gpsi[..., i], order)
            source_e += bq[i] * gpsi[..., i]
        rhs[i_e] -= sp.rhs_from_scalar(source_e, order)
    return rhs


def _boundary_flux_term(U, gamma, rhs, order=None):
    """Subtract (n . F, Phi_i) over every non-periodic boundary."""
    sp = U.space
    dim = sp.dim
    if len(sp.boundary_dofs) == 0:
        return
    face_order = sp.default_order() if order is None else order
    for tag in sp.boundary_dofs:
        cells, ref, wts, normal = sp.boundary_facet_quadrature(
            tag, face_order)
        nf, nq = wts.shape
        v, _ = basis_eval(dim, sp.degree, ref.reshape(-1, dim))
        v = v.reshape(nf, nq, sp.nloc)
        cd = sp.cell_dofs[cells]                        # (nf, nloc)

        def at_face(w):
            return np.einsum("fqn,fn->fq", v, w[cd])

        rho_q = at_face(U.rho)
        mq = np.stack([at_face(U.m[j]) for j in range(NVEC)])
        bq = np.stack([at_face(U.B[j]) for j in range(NVEC)])
        eq = at_face(U.E)
        uq, pq = _primitive_quad(rho_q, mq, bq, eq, gamma)
        fluxes = _flux_arrays(mq, bq, uq, eq, pq, dim)
        for c, f in enumerate(fluxes):
            g = np.einsum("i,ifq->fq", normal[:dim], f)   # n . F
            local = np.einsum("fq,fqn->fn", g * wts, v)
            np.subtract.at(rhs[c], cd.ravel(), local.ravel())


# ---------------------------------------------------------------------------
# viscous term
# ---------------------------------------------------------------------------

def viscous_rhs(U: ConservedField, visc, gamma: float, neumann_tags=(),
                order=None, lambda_bulk: float = 0.0) -> np.ndarray:
    """Regularization term: -(F_V, grad Phi_i) plus the boundary integral
    (n . F_V, Phi_i) on Neumann-tagged boundaries.

    ``visc`` provides nodal fields mu, nu, kappa, eta (nonnegative).  The
    viscous flux rows are nu grad(rho); tau; u.tau + kappa grad(T) +
    eta B.(grad B - grad B^T); eta (grad B - grad B^T), with
    tau = mu (grad u + grad u^T) + lambda_bulk div(u) I.
    """
    sp = U.space
    for name in ("mu", "nu", "kappa", "eta"):
        fld = getattr(visc, name)
        if np.any(fld < 0.0):
            raise SolverError(f"negative viscosity field {name}")

    fv = _viscous_flux_quad(U, visc, gamma, sp, order, lambda_bulk)
    rhs = np.zeros_like(U.data)
    for c in range(len(fv)):
        rhs[c] = -sp.rhs_from_vector(fv[c], order)
    # the psi row, when present, carries no viscous flux

    for tag in neumann_tags:
        _viscous_boundary_term(U, visc, gamma, rhs, tag, order, lambda_bulk)
    return rhs


def _viscous_flux_rows(uq, grad_u, grad_rho, grad_t, bq, grad_b,
                       muq, nuq, kappaq, etaq, dim, lambda_bulk):
    """Viscous flux rows from point values; gradients are (..., dim).

    Two carriers differ from the naive primitive gradients, both because
    1/rho amplification makes the explicit step unusable near vacuum:

    * grad_t is the gradient of the volumetric internal energy
      p/(gamma-1) rather than of T = p/rho (whose grad/Laplacian blow up
      quadratically in 1/rho);
    * grad_u carries the density-weighted velocity gradient
      (rho grad u)_ij = d_i m_j - u_j d_i rho, so the shear stress is the
      density-weighted mu (rho grad u + (rho grad u)^T).  Every factor is
      bounded by conserved-variable gradients; with rho = O(1) this is the
      printed stress up to the local density factor.
    """
    def grad(j, i, g):
        # d(component j)/d(x_i); derivatives beyond the mesh dim vanish
        return g[j][..., i]

    div_u = sum(grad(i, i, grad_u) for i in range(dim))
    rows = []
    rows.append(nuq[..., None] * grad_rho)                       # mass
    for j in range(NVEC):
        f = np.empty(grad_rho.shape)
        for i in range(dim):
            dju_i = grad(i, j, grad_u) if j < dim else 0.0
            f[..., i] = muq * (grad(j, i, grad_u) + dju_i)
            if i == j:
                f[..., i] += lambda_bulk * div_u
        rows.append(f)
    f_e = kappaq[..., None] * grad_t
    for i in range(dim):
        acc = np.zeros(muq.shape)
        for j in range(NVEC):
            dju_i = grad(i, j, grad_u) if j < dim else 0.0
            tau_ij = muq * (grad(j, i, grad_u) + dju_i)
            if i == j:
                tau_ij = tau_ij + lambda_bulk * div_u
            acc += uq[j] * tau_ij
            djb_i = grad(i, j, grad_b) if j < dim else 0.0
            acc += etaq * bq[j] * (grad(j, i, grad_b) - djb_i)
        f_e[..., i] += acc
    rows.append(f_e)
    for j in range(NVEC):
        f = np.empty(grad_rho.shape)
        for i in range(dim):
            djb_i = grad(i, j, grad_b) if j < dim else 0.0
            f[..., i] = etaq * (grad(j, i, grad_b) - djb_i)
        rows.append(f)
    return rows


def thermal_field(U: ConservedField, gamma: float) -> np.ndarray:
    """Nodal carrier of the heat flux: internal energy p/(gamma-1)."""
    _, p, _ = nodal_primitives(U, gamma)
    return p / (gamma - 1.0)


def _viscous_flux_quad(U, visc, gamma, sp, order, lambda_bulk):
    u_nod, _, _ = nodal_primitives(U, gamma)
    t_nod = thermal_field(U, gamma)
    grad_rho = sp.grad_at_quad(U.rho, order)
    grad_t = sp.grad_at_quad(t_nod, order)
    uq = np.stack([sp.eval_at_quad(u_nod[j], order) for j in range(NVEC)])
    # density-weighted velocity gradient: d_i m_j - u_j d_i rho
    grad_u = [sp.grad_at_quad(U.m[j], order) - uq[j][..., None] * grad_rho
              for j in range(NVEC)]
    grad_b = [sp.grad_at_quad(U.B[j], order) for j in range(NVEC)]
    bq = np.stack([sp.eval_at_quad(U.B[j], order) for j in range(NVEC)])
    muq = sp.eval_at_quad(visc.mu, order)
    nuq = sp.eval_at_quad(visc.nu, order)
    kappaq = sp.eval_at_quad(visc.kappa, order)
    etaq = sp.eval_at_quad(visc.eta, order)
    return _viscous_flux_rows(uq, grad_u, grad_rho, grad_t, bq, grad_b,
                              muq, nuq, kappaq, etaq, sp.dim, lambda_bulk)


def _viscous_boundary_term(U, visc, gamma, rhs, tag, order, lambda_bulk):
    sp = U.space
    dim = sp.dim
    face_order = sp.default_order() if order is None else order
    cells, ref, wts, normal = sp.boundary_facet_quadrature(tag, face_order)
    nf, nq = wts.shape
    v, gref = basis_eval(dim, sp.degree, ref.reshape(-1, dim))
    v = v.reshape(nf, nq, sp.nloc)
    gref = gref.reshape(nf, nq, sp.nloc, dim)
    _, _, _, jinv = U.space.mesh.cell_jacobians()
    gphys = np.einsum("fqnj,fji->fqni", gref, jinv[cells])
    cd = sp.cell_dofs[cells]

    def val(w):
        return np.einsum("fqn,fn->fq", v, w[cd])

    def grd(w):
        return np.einsum("fqni,fn->fqi", gphys, w[cd])

    u_nod, _, _ = nodal_primitives(U, gamma)
    t_nod = thermal_field(U, gamma)
    uq = np.stack([val(u_nod[j]) for j in range(NVEC)])
    grad_rho = grd(U.rho)
    grad_u = [grd(U.m[j]) - uq[j][..., None] * grad_rho
              for j in range(NVEC)]
    rows = _viscous_flux_rows(
        uq, grad_u, grad_rho, grd(t_nod),
        np.stack([val(U.B[j]) for j in range(NVEC)]),
        [grd(U.B[j]) for j in range(NVEC)],
        val(visc.mu), val(visc.nu), val(visc.kappa), val(visc.eta),
        dim, lambda_bulk)
    for c, f in enumerate(rows):
        g = np.einsum("i,fqi->fq", normal[:dim], f)
        local = np.einsum("fq,fqn->fn", g * wts, v)
        np.add.at(rhs[c], cd.ravel(), local.ravel())
