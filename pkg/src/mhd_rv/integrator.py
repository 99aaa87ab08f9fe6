"""Explicit Runge-Kutta time integration of the stabilized MHD system.

Each advance performs the five-step loop: (1) build the artificial
viscosity from the solution history, (2) take a classical RK4 step with the
viscosity frozen, (3) run the configured divergence correction, (4) impose
Dirichlet/slip conditions strongly, (5) evaluate the new wave speeds and
the next CFL step size.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import assembly, divclean, physics
from . import stabilization as stab_mod
from .errors import ConfigurationError, PositivityError
from .fe_space import FESpace, mesh_size_field
from .physics import NVEC


@dataclass
class ButcherTableau:
    """Explicit tableau; the classical RK4 preset drives every benchmark."""
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray

    def __post_init__(self):
        self.a = np.asarray(self.a, dtype=float)
        self.b = np.asarray(self.b, dtype=float)
        self.c = np.asarray(self.c, dtype=float)
        if abs(self.b.sum() - 1.0) > 1e-14:
            raise ConfigurationError("tableau weights must sum to 1")
        if np.any(np.triu(self.a) != 0.0):
            raise ConfigurationError("tableau must be explicit")

    @property
    def stages(self) -> int:
        return len(self.b)

    @classmethod
    def classical_rk4(cls) -> "ButcherTableau":
        a = np.zeros((4, 4))
        a[1, 0] = 0.5
        a[2, 1] = 0.5
        a[3, 2] = 1.0
        return cls(a=a, b=np.array([1, 2, 2, 1]) / 6.0,
                   c=np.array([0.0, 0.5, 0.5, 1.0]))


def runge_kutta_step(y: np.ndarray, tau: float, rhs, tableau: ButcherTableau):
    """One explicit RK step for dy/dt = rhs(y) on a plain array."""
    ks = []
    for l in range(tableau.stages):
        w = y
        for j in range(l):
            if tableau.a[l, j] != 0.0:
                w = w + tau * tableau.a[l, j] * ks[j]
        ks.append(rhs(w))
    out = y.copy()
    for l, bl in enumerate(tableau.b):
        out += tau * bl * ks[l]
    return out


# ---------------------------------------------------------------------------
# boundary conditions
# ---------------------------------------------------------------------------

@dataclass
class BoundaryCondition:
    kind: str                     # periodic | dirichlet | neumann | slip
    data: object = None           # dirichlet: data(coords, t) -> (6, n)

    def __post_init__(self):
        if self.kind not in ("periodic", "dirichlet", "neumann", "slip"):
            raise ConfigurationError(f"unknown BC kind {self.kind}")
        if self.kind == "dirichlet" and self.data is None:
            raise ConfigurationError("dirichlet BC needs a data function")


class BoundaryConditionSet:
    """Per-tag boundary treatment.  Periodic tags must come in opposite
    pairs and be baked into the mesh identification."""

    OPPOSITE = {"left": "right", "right": "left",
                "bottom": "top", "top": "bottom"}

    def __init__(self, conditions: dict):
        self.conditions = dict(conditions)
        for tag, bc in self.conditions.items():
            if bc.kind == "periodic":
                opp = self.OPPOSITE[tag]
                other = self.conditions.get(opp)
                if other is None or other.kind != "periodic":
                    raise ConfigurationError(
                        f"periodic tag {tag} needs periodic {opp}")

    def neumann_tags(self):
        return tuple(t for t, bc in self.conditions.items()
                     if bc.kind == "neumann")

    @classmethod
    def all_periodic(cls, dim: int) -> "BoundaryConditionSet":
        tags = ["left", "right"] + (["bottom", "top"] if dim == 2 else [])
        return cls({t: BoundaryCondition("periodic") for t in tags})


def apply_boundary_conditions(U: assembly.ConservedField,
                              bcs: BoundaryConditionSet, t: float) -> None:
    """Strong correction after the RK step: overwrite Dirichlet nodes,
    project slip-node momentum tangentially.  Periodic identification is
    structural and Neumann acts through the weak boundary term."""
    sp = U.space
    for tag, bc in bcs.conditions.items():
        if bc.kind == "dirichlet":
            ids = sp.boundary_dofs.get(tag)
            if ids is None:
                raise ConfigurationError(
                    f"no boundary {tag} on this mesh (periodic axis?)")
            vals = np.asarray(bc.data(sp.dof_coords[ids], t), dtype=float)
            U.data[:2 * NVEC + 2, ids] = vals
        elif bc.kind == "slip":
            ids = sp.boundary_dofs.get(tag)
            if ids is None:
                raise ConfigurationError(f"no boundary {tag} on this mesh")
            n = sp.boundary_normals[tag]
            mn = sum(U.m[j, ids] * n[j] for j in range(sp.dim))
            for j in range(sp.dim):
                U.m[j, ids] -= mn * n[j]


# ---------------------------------------------------------------------------
# CFL step and the advance loop
# ---------------------------------------------------------------------------

def cfl_timestep(h_field: np.ndarray, lambda_nodal: np.ndarray,
                 cfl: float) -> float:
    """tau = CFL * min h_h / max lambda."""
    lam = float(np.max(lambda_nodal))
    if lam <= 0.0:
        raise ConfigurationError("all wave speeds vanish; cannot set a step")
    return cfl * float(np.min(h_field)) / lam


@dataclass
class StepDiagnostics:
    step: int
    t: float
    tau: float
    min_rho: float
    min_p: float
    max_mu: float
    div_b: float
    visc_mode: str
    visc_evaluations: int


@dataclass
class IntegratorConfig:
    gamma: float
    cfl: float = 0.3
    stabilization: str = "rv"        # rv | first_order | none
    rv_params: stab_mod.RVParameters = field(
        default_factory=stab_mod.RVParameters)
    cleaning: divclean.CleaningConfig = field(
        default_factory=divclean.CleaningConfig)
    mass_tol: float = 1e-12
    lambda_bulk: float = 0.0
    mass_lumping: str = "auto"       # auto | lumped | consistent
    quad_order: int | None = None    # None -> the space default 2k+1
    # The very first step runs with the first-order viscosity everywhere
    # (no residual history yet).  That much viscosity at the nominal CFL
    # step is diffusion-unstable for higher degrees, so the startup step
    # is shortened by this factor.
    startup_dt_fraction: float = 0.05
    # Explicit-diffusion stability margin: tau is also limited by
    # visc_stability / (mu_max * spectral radius of the diffusion operator).
    # The convective CFL alone presumes the lumped-P1 spectral scaling and
    # is not safe for consistent-mass P2/P3 once mu saturates at mu^L.
    visc_stability: float = 0.9

    def __post_init__(self):
        if self.stabilization not in ("rv", "first_order", "none"):
            raise ConfigurationError(
                f"unknown stabilization {self.stabilization}")
        if self.mass_lumping not in ("auto", "lumped", "consistent"):
            raise ConfigurationError(
                f"unknown mass treatment {self.mass_lumping}")


class TimeIntegrator:
    """Owns the state, history, and per-step diagnostics of one run."""

    def __init__(self, U: assembly.ConservedField, config: IntegratorConfig,
                 bcs: BoundaryConditionSet, t0: float = 0.0,
                 tableau: ButcherTableau = None):
        self.U = U
        self.space: FESpace = U.space
        self.config = config
        self.bcs = bcs
        self.tableau = tableau or ButcherTableau.classical_rk4()
        self.t = float(t0)
        self.step_count = 0
        self.h_field = mesh_size_field(self.space)
        # Lumping keeps the explicit step stable at the nominal CFL for
        # P1/P3; the lumped P2 mass is singular at triangle vertices, so
        # P2 always uses the consistent matrix.
        if config.mass_lumping == "auto":
            lumped = self.space.degree != 2
        else:
            lumped = config.mass_lumping == "lumped"
        self.mass = assembly.assemble_mass(self.space, lumped=lumped)
        self.history = stab_mod.SolutionHistory()
        self._last_visc = None
        if config.stabilization == "none":
            self._lap_radius = 0.0
        else:
            self._lap_radius = assembly.diffusion_spectral_radius(
                self.space, self.mass)
        apply_boundary_conditions(self.U, bcs, self.t)
        self.history.push(self.t, U.data)
        self.tau = cfl_timestep(self.h_field, self._lambda_field(U),
                                config.cfl)
        if config.stabilization != "none":
            self.tau *= config.startup_dt_fraction

    # -- helpers -------------------------------------------------------------

    def _lambda_field(self, U: assembly.ConservedField) -> np.ndarray:
        return physics.lambda_max_arrays(U.rho, U.m, U.E, U.B,
                                         self.config.gamma, self.space.dim,
                                         context="wave-speed")

    def _viscosity(self):
        cfg = self.config
        lam = self._lambda_field(self.U)
        if cfg.stabilization == "none":
            zero = np.zeros(self.space.n_dofs)
            return stab_mod.ViscosityField(
                mu=zero, mu_low=zero.copy(), mu_high=zero.copy()), "off"
        if cfg.stabilization == "first_order":
            mu = stab_mod.first_order_viscosity(
                self.h_field, lam, cfg.rv_params.c_max)
            return stab_mod.ViscosityField(
                mu=mu.copy(), mu_low=mu, mu_high=mu.copy()), "low"
        viscous_rate = None
        if self._last_visc is not None and np.any(self._last_visc.mu > 0.0):
            rhs = assembly.viscous_rhs(self.U, self._last_visc, cfg.gamma,
                                       neumann_tags=self.bcs.neumann_tags(),
                                       order=cfg.quad_order,
                                       lambda_bulk=cfg.lambda_bulk)
            viscous_rate = assembly.apply_mass_inverse(
                self.mass, rhs.T, tol=cfg.mass_tol).T
        return stab_mod.compute_viscosity(
            self.history, self.space, cfg.gamma, cfg.rv_params,
            self.h_field, lam, order=cfg.quad_order,
            viscous_rate=viscous_rate)

    def _rhs(self, visc, glm):
        cfg = self.config
        gamma = cfg.gamma
        neumann = self.bcs.neumann_tags()
        use_viscous = np.any(visc.mu > 0.0) or cfg.lambda_bulk != 0.0

        def rhs(data):
            W = self.U.like(data)
            out = assembly.flux_divergence_rhs(W, gamma, glm=glm,
                                               order=cfg.quad_order)
            if use_viscous:
                out += assembly.viscous_rhs(W, visc, gamma,
                                            neumann_tags=neumann,
                                            order=cfg.quad_order,
                                            lambda_bulk=cfg.lambda_bulk)
            return assembly.apply_mass_inverse(
                self.mass, out.T, tol=cfg.mass_tol).T

        return rhs

    def rk_step(self, visc, glm) -> np.ndarray:
        """One RK step with frozen viscosity; positivity faults are
        annotated with the stage index."""
        rhs = self._rhs(visc, glm)
        stage = [0]

        def counting_rhs(data):
            stage[0] += 1
            try:
                return rhs(data)
            except PositivityError as err:
                raise PositivityError(
                    f"{err} (RK stage {stage[0]}, t = {self.t:.6g})",
                    where=err.where, stage=stage[0], time=self.t) from None

        return runge_kutta_step(self.U.data, self.tau, counting_rhs,
                                self.tableau)

    # -- the five-step advance ------------------------------------------------

    def advance(self) -> StepDiagnostics:
        cfg = self.config

        # (1) residual and viscosity, frozen for the whole step
        visc, mode = self._viscosity()
        self._last_visc = visc

        # explicit-diffusion stability: z = 2 mu_max tau Lambda inside the
        # RK4 real-axis interval (~2.785); factor 2 covers the symmetric
        # gradient in the shear stress
        mu_max = float(visc.mu.max())
        if mu_max > 0.0 and self._lap_radius > 0.0:
            tau_visc = cfg.visc_stability * 2.785 / (
                2.0 * mu_max * self._lap_radius)
            self.tau = min(self.tau, tau_visc)

        # (2) Runge-Kutta solve of the regularized system
        glm = None
        if cfg.cleaning.method == "glm":
            if self.U.psi is None:
                raise ConfigurationError("GLM cleaning needs a psi field")
            glm = divclean.glm_coefficients(self.U, self.h_field,
                                            cfg.cleaning.c_r, cfg.gamma)
        new_data = self.rk_step(visc, glm)
        self.U.data[:] = new_data
        self.U.check_finite()
        self.t += self.tau
        tau_used = self.tau
        self.step_count += 1

        # (3) projection or pseudo time-stepping correction
        divclean.apply_cleaning(self.U, cfg.cleaning, self.h_field)

        # (4) strong boundary correction
        apply_boundary_conditions(self.U, self.bcs, self.t)

        # (5) wave speeds and next step size
        lam = self._lambda_field(self.U)
        self.tau = cfl_timestep(self.h_field, lam, cfg.cfl)
        self.history.push(self.t, self.U.data)

        _, p, _, _ = physics.primitive_arrays(
            self.U.rho, self.U.m, self.U.E, self.U.B, cfg.gamma,
            check=False)
        return StepDiagnostics(
            step=self.step_count, t=self.t, tau=tau_used,
            min_rho=float(self.U.rho.min()), min_p=float(p.min()),
            max_mu=float(visc.mu.max()),
            div_b=divclean.divergence_integral(self.space, self.U.B),
            visc_mode=mode, visc_evaluations=1)

    def run_until(self, t_final: float, max_steps: int = 10 ** 7,
                  callback=None):
        """Advance to t_final, clipping the last step; yields diagnostics
        through the optional callback and returns the full list."""
        rows = []
        while self.t < t_final - 1e-14 * max(1.0, abs(t_final)):
            if self.step_count >= max_steps:
                raise ConfigurationError(f"exceeded {max_steps} steps")
            self.tau = min(self.tau, t_final - self.t)
            row = self.advance()
            rows.append(row)
            if callback is not None:
                callback(row)
        return rows
