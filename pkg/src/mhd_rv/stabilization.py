"""Residual-based artificial viscosity.

Per time step: a first-order Lax-Friedrichs-type floor mu^L = C_max h lambda,
a high-order candidate mu^H = C_R h^2 Rtilde built from the normalized
strong residual of the MHD system (BDF time derivative plus the divergence
of the nodally interpolated flux), and the nodal min-blend of the two.

The viscosity is computed once per step from the previous time levels and
stays frozen across Runge-Kutta stages.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import assembly
from .errors import ConfigurationError
from .fe_space import FESpace
from .physics import NVEC


@dataclass
class RVParameters:
    """Tuning constants of the viscosity construction.

    ``constant_guard`` extends the division guard to almost-constant
    components: the guard epsilon for component q is raised to
    (constant_guard * max|q|)^2, so sub-percent wiggles on an otherwise
    constant field do not dominate the normalized residual.  For such
    wiggles the ratio R/n approaches the mode's growth rate regardless of
    its (tiny) amplitude, and machine epsilon alone only protects
    variations below ~1e-8.
    """
    c_max: float = 0.5
    c_r: float = 1.0
    c_l: float = 0.4
    epsilon: float = 2.2e-16
    constant_guard: float = 0.05

    def __post_init__(self):
        if self.c_max <= 0.0 or self.c_r <= 0.0 or self.epsilon <= 0.0:
            raise ConfigurationError("C_max, C_R and epsilon must be > 0")
        if not 0.0 < self.c_l < 1.0:
            raise ConfigurationError("C_l must lie in (0, 1)")
        if self.constant_guard < 0.0:
            raise ConfigurationError("constant_guard must be >= 0")


@dataclass
class ViscosityField:
    """Nodal viscosity mu = min(mu_low, mu_high); nu, kappa and eta alias
    mu since all coefficients share the same field."""
    mu: np.ndarray
    mu_low: np.ndarray
    mu_high: np.ndarray

    def __post_init__(self):
        if not (np.isfinite(self.mu).all() and np.isfinite(self.mu_low).all()
                and np.isfinite(self.mu_high).all()):
            raise ConfigurationError("viscosity fields must be finite")
        if np.any(self.mu < 0.0) or np.any(self.mu > self.mu_low * (1 + 1e-14)):
            raise ConfigurationError("viscosity must satisfy 0 <= mu <= mu_low")

    @property
    def nu(self):
        return self.mu

    @property
    def kappa(self):
        return self.mu

    @property
    def eta(self):
        return self.mu


class SolutionHistory:
    """Up to three past solution snapshots with strictly increasing times."""

    def __init__(self, max_snapshots: int = 3):
        self.max_snapshots = max_snapshots
        self._items: list = []  # newest first: [(t_n, data_n), ...]

    def push(self, t: float, data: np.ndarray):
        if self._items and t <= self._items[0][0]:
            raise ConfigurationError("history times must increase")
        self._items.insert(0, (float(t), data.copy()))
        del self._items[self.max_snapshots:]

    def __len__(self):
        return len(self._items)

    def snapshot(self, k: int):
        """(t, data) of the k-th newest snapshot (k = 0 is current)."""
        return self._items[k]


def first_order_viscosity(h: np.ndarray, lambda_max: np.ndarray,
                          c_max: float) -> np.ndarray:
    """mu^L_i = C_max * h_i * lambda_max_i."""
    return c_max * h * lambda_max


def normalization(w: np.ndarray, space: FESpace, c_l: float) -> np.ndarray:
    """n(w)_i = Sbar(w) * (1 - C_l * local_jump_i / global_jump).

    Sbar is the max deviation from the arithmetic nodal mean.  For a
    constant field both factors vanish and the result is identically zero;
    the caller guards the division by n(w).
    """
    w = np.asarray(w, dtype=float)
    gmax = w.max()
    gmin = w.min()
    jump = gmax - gmin
    sbar = np.abs(w - w.mean()).max()
    if jump == 0.0:
        return np.zeros_like(w)
    lmax, lmin = space.local_extrema(w)
    return sbar * (1.0 - c_l * (lmax - lmin) / jump)


def bdf_derivative(snapshots) -> np.ndarray:
    """Backward-difference time derivative at the newest time level.

    ``snapshots`` is [(t_n, q_n), (t_nm1, q_nm1)[, (t_nm2, q_nm2)]], newest
    first.  Two entries give BDF1; three give the variable-step BDF2 from
    the divided-difference form of the quadratic interpolant.  A single
    snapshot has no usable derivative and yields zero (startup step).
    """
    if len(snapshots) < 2:
        return np.zeros_like(snapshots[0][1])
    (t0, q0), (t1, q1) = snapshots[0], snapshots[1]
    tau_n = t0 - t1
    d1 = (q0 - q1) / tau_n
    if len(snapshots) < 3:
        return d1
    t2, q2 = snapshots[2]
    d0 = (q1 - q2) / (t1 - t2)
    d2 = (d1 - d0) / (t0 - t2)
    return d1 + tau_n * d2


def component_residual(snapshots, flux_div_quad, space: FESpace,
                       mass: assembly.MassMatrix, order=None,
                       tol: float = 1e-10) -> np.ndarray:
    """Nodal projection of |BDF(q) + div f(q)| for one scalar component.

    ``snapshots`` holds (t, nodal q) pairs, newest first; ``flux_div_quad``
    is the flux divergence at quadrature points (broadcastable to the
    quadrature shape).  The absolute value is taken pointwise at the
    quadrature points before projecting.
    """
    dq = bdf_derivative(snapshots)
    integrand = np.abs(space.eval_at_quad(dq, order) + flux_div_quad)
    rhs = space.rhs_from_scalar(integrand, order)
    out = assembly.apply_mass_inverse(mass, rhs, tol=tol)
    # the projection of a nonnegative integrand can undershoot zero where
    # basis functions are partially negative (P2/P3); a negative residual
    # would turn the blend antidiffusive
    return np.maximum(out, 0.0)


def guarded_ratio(r: np.ndarray, n: np.ndarray, epsilon: float) -> np.ndarray:
    """R * n / (n^2 + eps): the division-safe form of R / n."""
    return r * n / (n * n + epsilon)


def normalized_residual(residuals, normalizations, epsilon) -> np.ndarray:
    """Nodal max over components of the guarded residual ratios.

    ``epsilon`` is a scalar or one guard value per component."""
    if np.isscalar(epsilon):
        epsilon = [epsilon] * len(residuals)
    out = None
    for r, n, eps in zip(residuals, normalizations, epsilon):
        g = guarded_ratio(r, n, eps)
        out = g if out is None else np.maximum(out, g)
    return out


def blend_viscosity(mu_low: np.ndarray, rtilde: np.ndarray, h: np.ndarray,
                    c_r: float) -> ViscosityField:
    """mu_i = min(mu^L_i, C_R h_i^2 Rtilde_i); both branches retained."""
    mu_high = c_r * h * h * rtilde
    return ViscosityField(mu=np.minimum(mu_low, mu_high),
                          mu_low=mu_low.copy(), mu_high=mu_high)


def residual_mass(space: FESpace) -> assembly.MassMatrix:
    """Projection mass for the residual: lumped for P1/P3, whose lumped
    entries are strictly positive, consistent for P2 (vertex entries of the
    lumped P2 mass vanish on triangles)."""
    return assembly.assemble_mass(space, lumped=space.degree != 2)


def compute_viscosity(history: SolutionHistory, space: FESpace, gamma: float,
                      params: RVParameters, h_field: np.ndarray,
                      lambda_max_nodal: np.ndarray, order=None,
                      viscous_rate=None):
    """Viscosity for the step starting at the newest history snapshot.

    Returns (ViscosityField, mode) with mode one of "galerkin-init" (no
    history yet), "bdf1", "bdf2".

    The first step runs unstabilized on a shortened step: the first-order
    floor everywhere is diffusion-unstable near vacuum at the nominal CFL,
    and the flux-divergence residual alone is blind to discontinuities in
    components that start out constant (their normalization vanishes and
    the division guard nulls the ratio).  One short Galerkin step breaks
    both degeneracies, after which the BDF1 residual sees the jump through
    every component.

    ``viscous_rate``, when given, holds the nodal rates M^-1 F_V(U^n)
    contributed by the regularization that is currently acting.  The BDF
    term tracks the rate of the viscous solution, so without this
    correction the residual reads the viscosity's own action as equation
    error and re-amplifies it; near vacuum that feedback loop is unstable.
    Subtracting it makes R the residual of the regularized system.
    """
    mu_low = first_order_viscosity(h_field, lambda_max_nodal, params.c_max)
    if len(history) < 2:
        zero = np.zeros_like(mu_low)
        return ViscosityField(mu=zero, mu_low=mu_low,
                              mu_high=zero.copy()), "galerkin-init"
    _, data0 = history.snapshot(0)
    n_mhd = 2 * NVEC + 2  # rho, m, E, B rows; psi is excluded
    current = assembly.ConservedField(
        space, has_psi=data0.shape[0] == n_mhd + 1, data=data0)
    nodal_flux = assembly.nodal_flux_arrays(current, gamma)
    div_quad = assembly.flux_divergence_at_quad(space, nodal_flux, order)

    mass = residual_mass(space)
    residuals = []
    norms = []
    guards = []
    for c in range(n_mhd):
        snaps = [(history.snapshot(k)[0], history.snapshot(k)[1][c])
                 for k in range(len(history))]
        strong = div_quad[c]
        if viscous_rate is not None:
            strong = strong - space.eval_at_quad(viscous_rate[c], order)
        residuals.append(component_residual(snaps, strong, space, mass,
                                            order))
        norms.append(normalization(data0[c], space, params.c_l))
        scale = params.constant_guard * np.abs(data0[c]).max()
        guards.append(max(params.epsilon, scale * scale))
    rtilde = normalized_residual(residuals, norms, guards)
    mode = "bdf1" if len(history) == 2 else "bdf2"
    return blend_viscosity(mu_low, rtilde, h_field, params.c_r), mode
