"""Ideal MHD state algebra: primitive conversions, flux tensors, wave speeds.

States carry two vector components for momentum and magnetic field even on
1D meshes: the shock-tube benchmarks have a transverse magnetic field whose
Maxwell stress drives transverse momentum, so the 1D system is the standard
"1.5D" reduction with fluxes along x only.

All formulas operate on numpy arrays of any shape, so the same kernels serve
single-state evaluation and whole nodal fields.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractViolation, PositivityError

# number of vector components carried by m and B, in any mesh dimension
NVEC = 2


@dataclass
class ConservedState:
    """Point value of the conserved variables (rho, m, E, B [, psi])."""
    rho: float
    m: np.ndarray
    E: float
    B: np.ndarray
    psi: float | None = None

    def __post_init__(self):
        self.m = np.atleast_1d(np.asarray(self.m, dtype=float))
        self.B = np.atleast_1d(np.asarray(self.B, dtype=float))
        if self.m.shape != (NVEC,) or self.B.shape != (NVEC,):
            raise ContractViolation(
                f"m and B must have {NVEC} components")


@dataclass
class PrimitiveState:
    rho: float
    u: np.ndarray
    p: float
    T: float
    e: float
    gamma: float


@dataclass
class WaveSpeeds:
    """Characteristic speeds along a direction: sound speed squared a2,
    signed Alfven speed b, fast/slow magnetosonic speeds, and the eight
    eigenvalues sorted ascending."""
    a2: float
    b: float
    cf: float
    cs: float
    lambdas: np.ndarray


def _report_positivity(mask, what, context=""):
    idx = np.flatnonzero(np.atleast_1d(mask))
    head = ", ".join(str(i) for i in idx[:5])
    suffix = f" (+{len(idx) - 5} more)" if len(idx) > 5 else ""
    where = f" at {context} nodes [{head}]{suffix}" if idx.size else ""
    raise PositivityError(f"{what} lost positivity{where}", where=idx)


def primitive_arrays(rho, m, E, B, gamma, check=True, context=""):
    """(u, p, T, e) from conserved arrays; m and B have a leading NVEC axis.

    With check=True a nonpositive density or internal energy raises
    PositivityError identifying the offending entries.
    """
    rho = np.asarray(rho, dtype=float)
    if check and np.any(rho <= 0.0):
        _report_positivity(rho <= 0.0, "density", context)
    u = m / rho
    kinetic = 0.5 * rho * np.einsum("i...,i...->...", u, u)
    magnetic = 0.5 * np.einsum("i...,i...->...", B, B)
    e = E - kinetic - magnetic
    if check and np.any(e <= 0.0):
        _report_positivity(e <= 0.0, "internal energy", context)
    p = (gamma - 1.0) * e
    return u, p, p / rho, e


def primitives(state: ConservedState, gamma: float) -> PrimitiveState:
    u, p, t, e = primitive_arrays(state.rho, state.m, state.E, state.B, gamma)
    return PrimitiveState(rho=float(state.rho), u=u, p=float(p), T=float(t),
                          e=float(e), gamma=gamma)


def conserved_from_primitives(rho, u, p, B, gamma, psi=None) -> ConservedState:
    u = np.asarray(u, dtype=float)
    B = np.asarray(B, dtype=float)
    E = p / (gamma - 1.0) + 0.5 * rho * u @ u + 0.5 * B @ B
    return ConservedState(rho=rho, m=rho * u, E=E, B=B.copy(), psi=psi)


# ---------------------------------------------------------------------------
# flux tensors
# ---------------------------------------------------------------------------

@dataclass
class FluxTensor:
    """Directional fluxes of each conserved row.

    Index layout: first axis is the spatial direction (mesh dimension),
    second axis (momentum and magnetic rows) is the vector component.
    """
    rho: np.ndarray   # (dim,)
    m: np.ndarray     # (dim, NVEC)
    E: np.ndarray     # (dim,)
    B: np.ndarray     # (dim, NVEC)


def euler_flux(state: ConservedState, gamma: float, dim: int = NVEC):
    """Hydrodynamic flux: (m; m x u + p I; u (E + p); 0)."""
    prim = primitives(state, gamma)
    u, p = prim.u, prim.p
    m = state.m
    f_rho = m[:dim].copy()
    f_m = np.empty((dim, NVEC))
    for i in range(dim):
        for j in range(NVEC):
            f_m[i, j] = m[i] * u[j] + (p if i == j else 0.0)
    f_e = u[:dim] * (state.E + p)
    f_b = np.zeros((dim, NVEC))
    return FluxTensor(rho=f_rho, m=f_m, E=f_e, B=f_b)


def maxwell_stress(B: np.ndarray) -> np.ndarray:
    """beta = -(B.B)/2 I + B x B."""
    bb = B @ B
    return np.outer(B, B) - 0.5 * bb * np.eye(len(B))


def magnetic_flux(state: ConservedState, dim: int = NVEC):
    """Magnetic flux: (0; -beta; -u.beta; u x B - B x u)."""
    if state.rho <= 0.0:
        _report_positivity(np.array([True]), "density")
    u = state.m / state.rho
    B = state.B
    beta = maxwell_stress(B)
    f_rho = np.zeros(dim)
    f_m = -beta[:dim]
    f_e = -(beta @ u)[:dim]
    f_b = np.empty((dim, NVEC))
    for i in range(dim):
        for j in range(NVEC):
            f_b[i, j] = u[i] * B[j] - B[i] * u[j]
    return FluxTensor(rho=f_rho, m=f_m, E=f_e, B=f_b)


# ---------------------------------------------------------------------------
# wave speeds
# ---------------------------------------------------------------------------

def fast_slow_speeds(a2, bb_over_rho, b2):
    """Fast/slow magnetosonic speeds from a2 = gamma p / rho,
    bb_over_rho = |B|^2 / rho and b2 = (B.e)^2 / rho.

    The discriminant is clamped at zero: it is nonnegative analytically but
    round-off can push it slightly negative.
    """
    x = a2 + bb_over_rho
    disc = np.sqrt(np.maximum(x * x - 4.0 * a2 * b2, 0.0))
    cf = np.sqrt(np.maximum(0.5 * (x + disc), 0.0))
    cs = np.sqrt(np.maximum(0.5 * (x - disc), 0.0))
    return cf, cs


def wave_speeds(state: ConservedState, e_dir, gamma: float) -> WaveSpeeds:
    """Eigenvalues of the ideal MHD system along a unit direction."""
    e = np.zeros(NVEC)
    e_dir = np.asarray(e_dir, dtype=float)
    e[:len(e_dir)] = e_dir
    if abs(e @ e - 1.0) > 1e-12:
        raise ContractViolation("direction vector must have unit length")
    prim = primitives(state, gamma)
    if prim.p < 0.0:
        _report_positivity(np.array([True]), "pressure")
    a2 = gamma * prim.p / prim.rho
    bb = state.B @ state.B / prim.rho
    b = (state.B @ e) / np.sqrt(prim.rho)
    cf, cs = fast_slow_speeds(a2, bb, b * b)
    ue = prim.u @ e
    lam = np.array([ue - cf, ue - abs(b), ue - cs, ue,
                    ue, ue + cs, ue + abs(b), ue + cf])
    return WaveSpeeds(a2=float(a2), b=float(b), cf=float(cf), cs=float(cs),
                      lambdas=lam)


def max_wave_speed(state: ConservedState, gamma: float, dim: int) -> float:
    """max |lambda_i| over the coordinate directions."""
    out = 0.0
    for axis in range(dim):
        e = np.zeros(dim)
        e[axis] = 1.0
        ws = wave_speeds(state, e, gamma)
        out = max(out, float(np.max(np.abs(ws.lambdas))))
    return out


def lambda_max_arrays(rho, m, E, B, gamma, dim, check=True, context=""):
    """Nodal max wave speed over coordinate directions, vectorized."""
    u, p, _, _ = primitive_arrays(rho, m, E, B, gamma, check=check,
                                  context=context)
    a2 = gamma * p / rho
    bb = np.einsum("i...,i...->...", B, B) / rho
    out = np.zeros_like(np.asarray(rho, dtype=float))
    for axis in range(dim):
        cf, _ = fast_slow_speeds(a2, bb, B[axis] * B[axis] / rho)
        np.maximum(out, np.abs(u[axis]) + cf, out=out)
    return out


# ---------------------------------------------------------------------------
# GLM source
# ---------------------------------------------------------------------------

def glm_source(state: ConservedState, grad_psi) -> dict:
    """Source added by the hyperbolic cleaning scalar:
    energy row -B . grad(psi), induction row -grad(psi)."""
    if state.psi is None:
        raise ContractViolation("GLM source requires a psi component")
    grad_psi = np.asarray(grad_psi, dtype=float)
    induction = np.zeros(NVEC)
    induction[:len(grad_psi)] = -grad_psi
    return {
        "rho": 0.0,
        "m": np.zeros(NVEC),
        "E": float(-(state.B[:len(grad_psi)] @ grad_psi)),
        "B": induction,
        "psi": 0.0,
    }
