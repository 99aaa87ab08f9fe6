"""Error norms against analytic solutions and convergence rates.

Norms are volume-averaged: L1 = (1/|O|) int |e|, L2 = ((1/|O|) int e^2)^1/2,
Linf = max over quadrature points.  This is the convention that reproduces
the published error tables, and it makes L1 <= L2 <= Linf hold on any
domain.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import divclean
from ..assembly import ConservedField
from ..errors import ConfigurationError
from .problems import exact_solution


@dataclass
class ErrorReport:
    """Per-component error norms plus run metadata.

    ``components`` maps a field name to (L1, L2, Linf); scalar conserved
    components plus the velocity and magnetic-field vector magnitudes.
    """
    components: dict
    dofs: int
    wall_time: float = 0.0

    def __post_init__(self):
        for name, (l1, l2, linf) in self.components.items():
            if not (-1e-12 <= l1 <= l2 * (1 + 1e-10) + 1e-300
                    and l2 <= linf * (1 + 1e-10) + 1e-300):
                raise ConfigurationError(
                    f"norm ordering violated for {name}: "
                    f"{l1} <= {l2} <= {linf}")

    def __getitem__(self, key):
        return self.components[key]


def _norms(space, err_q, order):
    volume = float(np.prod(space.mesh.extent))
    l1 = space.integrate(np.abs(err_q), order) / volume
    l2 = float(np.sqrt(space.integrate(err_q ** 2, order) / volume))
    linf = float(np.abs(err_q).max())
    return l1, l2, linf


def error_norms(U: ConservedField, problem: str, t: float,
                order=None, wall_time: float = 0.0) -> ErrorReport:
    """Errors of the numerical solution against the analytic state at time
    t, integrated with quadrature of order >= 2k+2."""
    space = U.space
    if order is None:
        order = 2 * space.degree + 2
    pts = space.quad_points(order)
    flat = pts.reshape(-1, space.dim)
    if space.dim == 1:
        flat = np.column_stack([flat[:, 0], np.zeros(len(flat))])
    exact = exact_solution(problem, flat, t)
    qshape = pts.shape[:2]

    names = ["rho", "m_x", "m_y", "E", "B_x", "B_y"]
    num_q = {}
    for c, name in enumerate(names):
        num_q[name] = space.eval_at_quad(U.data[c], order)
    out = {}
    for c, name in enumerate(names):
        out[name] = _norms(space, num_q[name] - exact[c].reshape(qshape),
                           order)

    # vector magnitudes of the velocity and magnetic errors
    rho_ex = exact[0].reshape(qshape)
    rho_q = num_q["rho"]
    du = [num_q[f"m_{a}"] / rho_q - exact[1 + j].reshape(qshape) / rho_ex
          for j, a in enumerate("xy")]
    db = [num_q[f"B_{a}"] - exact[4 + j].reshape(qshape)
          for j, a in enumerate("xy")]
    out["u"] = _norms(space, np.sqrt(du[0] ** 2 + du[1] ** 2), order)
    out["B"] = _norms(space, np.sqrt(db[0] ** 2 + db[1] ** 2), order)
    return ErrorReport(components=out, dofs=space.n_dofs,
                       wall_time=wall_time)


def convergence_rate(e1: float, e2: float, n1: int, n2: int,
                     dim: int) -> float:
    """DOF-based rate d ln(e1/e2) / ln(N2/N1); NaN when an error
    vanishes (rate undefined)."""
    if e1 <= 0.0 or e2 <= 0.0:
        return float("nan")
    if n2 <= n1:
        raise ConfigurationError("need n2 > n1 for a rate")
    return dim * float(np.log(e1 / e2) / np.log(n2 / n1))


def divergence_monitor(B, space) -> float:
    """int |div B_h| over the domain."""
    return divclean.divergence_integral(space, B)
