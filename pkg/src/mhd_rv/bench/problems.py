"""Benchmark problem definitions: domains, initial data, exact solutions.

All states are returned as (6, n) arrays ordered (rho, m_x, m_y, E, B_x,
B_y) at the given coordinates.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .. import divclean, integrator
from ..errors import ConfigurationError
from ..stabilization import RVParameters

VORTEX_STRENGTH = 5.389489439
ROTOR_R0 = 0.1
ROTOR_R1 = 0.115
ROTOR_U0 = 2.0


def _pack(rho, ux, uy, p, bx, by, gamma):
    rho = np.asarray(rho, dtype=float)
    out = np.zeros((6, rho.size))
    out[0] = rho
    out[1] = rho * ux
    out[2] = rho * uy
    out[3] = p / (gamma - 1.0) + 0.5 * rho * (ux * ux + uy * uy) \
        + 0.5 * (bx * bx + by * by)
    out[4] = bx
    out[5] = by
    return out


def smooth_wave_state(coords, t, gamma=1.4):
    x, y = coords[:, 0], coords[:, 1]
    rho = 1.0 + 0.99 * np.sin(x + y - 2.0 * t)
    one = np.ones_like(rho)
    return _pack(rho, one, one, one, 0.1 * one, 0.1 * one, gamma)


def smooth_vortex_state(coords, t, gamma=5.0 / 3.0):
    """Advected vortex; background pressure 1 so the perturbed pressure
    stays (barely) positive at the core."""
    x, y = coords[:, 0], coords[:, 1]
    r1 = (x - t + 10.0) % 20.0 - 10.0
    r2 = (y - t + 10.0) % 20.0 - 10.0
    rsq = r1 * r1 + r2 * r2
    expf = np.exp((1.0 - rsq) / 2.0)
    du = VORTEX_STRENGTH / (np.sqrt(2.0) * np.pi) * expf
    db = VORTEX_STRENGTH / (2.0 * np.pi) * expf
    ux = 1.0 - du * r2
    uy = 1.0 + du * r1
    bx = 0.1 - db * r2
    by = 0.1 + db * r1
    p = 1.0 - VORTEX_STRENGTH ** 2 * (1.0 + rsq) * np.exp(1.0 - rsq) \
        / (8.0 * np.pi ** 2)
    return _pack(np.ones_like(x), ux, uy, p, bx, by, gamma)


BRIO_WU_LEFT = (1.0, 0.0, 1.0, 0.75, 1.0)      # rho, u, p, Bx, By
BRIO_WU_RIGHT = (0.125, 0.0, 0.1, 0.75, -1.0)


def brio_wu_state(coords, t=0.0, gamma=2.0):
    x = coords[:, 0]
    left = x < 0.5
    rho = np.where(left, BRIO_WU_LEFT[0], BRIO_WU_RIGHT[0])
    u = np.where(left, BRIO_WU_LEFT[1], BRIO_WU_RIGHT[1])
    p = np.where(left, BRIO_WU_LEFT[2], BRIO_WU_RIGHT[2])
    by = np.where(left, BRIO_WU_LEFT[4], BRIO_WU_RIGHT[4])
    zeros = np.zeros_like(rho)
    return _pack(rho, u, zeros, p, 0.75 + zeros, by, gamma)


def orszag_tang_state(coords, t=0.0, gamma=5.0 / 3.0):
    x, y = coords[:, 0], coords[:, 1]
    rho = np.full_like(x, 25.0 / (36.0 * np.pi))
    ux = -np.sin(2.0 * np.pi * y)
    uy = np.sin(2.0 * np.pi * x)
    bx = -np.sin(2.0 * np.pi * y) / np.sqrt(4.0 * np.pi)
    by = np.sin(4.0 * np.pi * x) / np.sqrt(4.0 * np.pi)
    p = np.full_like(x, 5.0 / (12.0 * np.pi))
    return _pack(rho, ux, uy, p, bx, by, gamma)


def rotor_state(coords, t=0.0, gamma=1.4):
    """Dense spinning disc in a light ambient with a uniform field; the
    taper interpolates density and momentum between disc and ambient."""
    x, y = coords[:, 0], coords[:, 1]
    r = np.sqrt((x - 0.5) ** 2 + (y - 0.5) ** 2)
    f = np.clip((ROTOR_R1 - r) / (ROTOR_R1 - ROTOR_R0), 0.0, 1.0)
    rho = 1.0 + 9.0 * f
    r_safe = np.maximum(r, 1e-300)
    scale = np.where(r < ROTOR_R0, ROTOR_U0 / ROTOR_R0,
                     f * ROTOR_U0 / r_safe)
    ux = scale * (0.5 - y)
    uy = scale * (x - 0.5)
    p = np.ones_like(x)
    bx = np.full_like(x, 5.0 / np.sqrt(4.0 * np.pi))
    return _pack(rho, ux, uy, p, bx, np.zeros_like(x), gamma)


@dataclass(frozen=True)
class ProblemSpec:
    name: str
    dim: int
    lower: tuple
    upper: tuple
    gamma: float
    t_final: float
    smooth: bool                   # analytic solution available
    state: object                  # state(coords, t, gamma) -> (6, n)
    periodic: bool = True
    default_cleaning: str = "none"
    default_mass: str = "auto"     # auto -> lumped P1/P3; consistent for P2
    default_cells: tuple = (40, 40)


PROBLEMS = {
    "smooth_wave": ProblemSpec(
        name="smooth_wave", dim=2, lower=(0.0, 0.0),
        upper=(2.0 * np.pi, 2.0 * np.pi), gamma=1.4, t_final=0.1,
        smooth=True, state=smooth_wave_state,
        default_mass="consistent", default_cells=(30, 30)),
    "smooth_vortex": ProblemSpec(
        name="smooth_vortex", dim=2, lower=(-10.0, -10.0),
        upper=(10.0, 10.0), gamma=5.0 / 3.0, t_final=0.05,
        smooth=True, state=smooth_vortex_state,
        default_mass="consistent", default_cells=(60, 60)),
    "brio_wu": ProblemSpec(
        name="brio_wu", dim=1, lower=(0.0,), upper=(1.0,), gamma=2.0,
        t_final=0.2, smooth=False, state=brio_wu_state, periodic=False,
        default_cells=(599,)),
    "orszag_tang_2d": ProblemSpec(
        name="orszag_tang_2d", dim=2, lower=(0.0, 0.0), upper=(1.0, 1.0),
        gamma=5.0 / 3.0, t_final=1.0, smooth=False,
        state=orszag_tang_state, default_cleaning="projection",
        default_cells=(40, 40)),
    "rotor": ProblemSpec(
        name="rotor", dim=2, lower=(0.0, 0.0), upper=(1.0, 1.0),
        gamma=1.4, t_final=0.15, smooth=False, state=rotor_state,
        default_cleaning="projection", default_cells=(100, 100)),
}


def initial_condition(problem: str, coords, t: float = 0.0):
    if problem not in PROBLEMS:
        raise ConfigurationError(f"unknown problem {problem!r}")
    spec = PROBLEMS[problem]
    return spec.state(np.atleast_2d(coords), t, spec.gamma)


def exact_solution(problem: str, coords, t: float):
    spec = PROBLEMS.get(problem)
    if spec is None:
        raise ConfigurationError(f"unknown problem {problem!r}")
    if not spec.smooth:
        raise ConfigurationError(f"{problem} has no analytic solution")
    return spec.state(np.atleast_2d(coords), t, spec.gamma)


@dataclass
class BenchmarkConfig:
    """Declarative description of one benchmark run."""
    problem: str
    degree: int = 1
    cells_per_axis: tuple | None = None
    gamma: float | None = None
    final_time: float | None = None
    cfl: float = 0.3
    stabilization: str = "rv"           # rv | first_order | none
    rv_params: RVParameters = field(default_factory=RVParameters)
    cleaning: divclean.CleaningConfig | None = None
    mass_lumping: str | None = None     # None -> problem default
    output_dir: str | None = None
    unsafe: bool = False
    max_steps: int = 10 ** 6

    def __post_init__(self):
        if self.problem not in PROBLEMS:
            raise ConfigurationError(f"unknown problem {self.problem!r}")
        spec = PROBLEMS[self.problem]
        if self.cells_per_axis is None:
            self.cells_per_axis = spec.default_cells
        if np.isscalar(self.cells_per_axis):
            self.cells_per_axis = (int(self.cells_per_axis),) * spec.dim
        self.cells_per_axis = tuple(int(c) for c in self.cells_per_axis)
        if len(self.cells_per_axis) == 1 and spec.dim == 2:
            self.cells_per_axis = self.cells_per_axis * 2
        if len(self.cells_per_axis) != spec.dim:
            raise ConfigurationError(
                f"{self.problem} needs {spec.dim} cell counts")
        if self.gamma is None:
            self.gamma = spec.gamma
        elif self.gamma != spec.gamma and not self.unsafe:
            raise ConfigurationError(
                f"{self.problem} uses gamma={spec.gamma}; pass unsafe=True "
                f"to override")
        if self.final_time is None:
            self.final_time = spec.t_final
        if self.cleaning is None:
            self.cleaning = divclean.CleaningConfig(
                method=spec.default_cleaning)
        if self.mass_lumping is None:
            self.mass_lumping = spec.default_mass
        if self.cleaning.method in ("projection", "pseudo", "glm") \
                and spec.dim == 1 and not self.unsafe:
            raise ConfigurationError(
                "divergence cleaning applies to 2D problems")

    @property
    def spec(self) -> ProblemSpec:
        return PROBLEMS[self.problem]

    def integrator_config(self) -> integrator.IntegratorConfig:
        return integrator.IntegratorConfig(
            gamma=self.gamma, cfl=self.cfl,
            stabilization=self.stabilization, rv_params=self.rv_params,
            cleaning=self.cleaning, mass_lumping=self.mass_lumping)
