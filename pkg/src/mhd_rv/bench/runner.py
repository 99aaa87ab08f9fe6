"""Benchmark driver: set up a configured problem, advance it to the final
time, and write the run artifacts (time series, field dumps, error and
convergence tables)."""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import assembly, mesh as mesh_mod
from ..errors import MhdError, PositivityError
from ..fe_space import FESpace
from ..integrator import (BoundaryCondition, BoundaryConditionSet,
                          TimeIntegrator)
from .norms import ErrorReport, convergence_rate, error_norms
from .problems import BenchmarkConfig, initial_condition

FLOAT_FMT = "{:.17g}"

TIMESERIES_COLUMNS = ("t", "tau", "min_rho", "min_p", "max_mu", "div_b")


def _fmt(v) -> str:
    return FLOAT_FMT.format(float(v))


@dataclass
class RunResult:
    config: BenchmarkConfig
    completed: bool
    steps: int
    final_time: float
    wall_time: float
    timeseries: list
    errors: ErrorReport | None = None
    failure: str | None = None
    artifacts: dict = field(default_factory=dict)


def build_solver(config: BenchmarkConfig) -> TimeIntegrator:
    spec = config.spec
    msh = mesh_mod.build_structured_mesh(spec.lower, spec.upper,
                                         config.cells_per_axis,
                                         dim=spec.dim)
    if spec.periodic:
        msh = mesh_mod.with_periodic(msh, range(spec.dim))
        bcs = BoundaryConditionSet.all_periodic(spec.dim)
    else:
        data = _dirichlet_from_initial(config)
        tags = ["left", "right"] + (["bottom", "top"] if spec.dim == 2
                                    else [])
        bcs = BoundaryConditionSet(
            {t: BoundaryCondition("dirichlet", data) for t in tags})
    space = FESpace(msh, config.degree)
    U = assembly.ConservedField(
        space, has_psi=config.cleaning.method == "glm")
    coords = space.dof_coords
    if spec.dim == 1:
        coords = np.column_stack([coords[:, 0], np.zeros(space.n_dofs)])
    U.data[:6] = initial_condition(config.problem, coords, 0.0)
    return TimeIntegrator(U, config.integrator_config(), bcs)


def _dirichlet_from_initial(config: BenchmarkConfig):
    problem = config.problem

    def data(coords, t):
        if coords.shape[1] == 1:
            coords = np.column_stack([coords[:, 0],
                                      np.zeros(len(coords))])
        return initial_condition(problem, coords, 0.0)

    return data


def run(config: BenchmarkConfig, progress=None) -> RunResult:
    """Advance the configured benchmark to its final time.

    Writes timeseries.csv, final_fields.csv and final_fields.vtk (plus
    errors.csv for problems with an analytic solution) into
    config.output_dir when set.  A positivity abort is recorded together
    with the last valid snapshot instead of propagating.
    """
    solver = build_solver(config)
    rows = []
    start = time.perf_counter()
    failure = None
    try:
        while solver.t < config.final_time - 1e-14 * max(
                1.0, config.final_time):
            if solver.step_count >= config.max_steps:
                raise MhdError(f"exceeded {config.max_steps} steps")
            solver.tau = min(solver.tau, config.final_time - solver.t)
            row = solver.advance()
            rows.append(row)
            if progress is not None:
                progress(row)
    except (PositivityError, MhdError) as err:
        failure = str(err)
    wall = time.perf_counter() - start

    errors = None
    if failure is None and config.spec.smooth:
        errors = error_norms(solver.U, config.problem, solver.t,
                             wall_time=wall)

    result = RunResult(config=config, completed=failure is None,
                       steps=solver.step_count, final_time=solver.t,
                       wall_time=wall, timeseries=rows, errors=errors,
                       failure=failure)
    if config.output_dir is not None:
        _write_artifacts(result, solver)
    return result


def sweep(config: BenchmarkConfig, cells_list) -> list:
    """Run the same problem over a mesh sequence; convergence rates use
    the DOF-based convention."""
    results = []
    for cells in cells_list:
        cfg_kwargs = dict(
            problem=config.problem, degree=config.degree,
            cells_per_axis=cells, gamma=config.gamma,
            final_time=config.final_time, cfl=config.cfl,
            stabilization=config.stabilization, rv_params=config.rv_params,
            cleaning=config.cleaning, mass_lumping=config.mass_lumping,
            unsafe=config.unsafe)
        sub = BenchmarkConfig(**cfg_kwargs)
        if config.output_dir is not None:
            sub.output_dir = str(Path(config.output_dir) /
                                 f"cells_{np.atleast_1d(cells)[0]}")
        results.append(run(sub))
    if config.output_dir is not None:
        _write_convergence(config, results)
    return results


# ---------------------------------------------------------------------------
# artifact writers
# ---------------------------------------------------------------------------

def _write_artifacts(result: RunResult, solver: TimeIntegrator):
    outdir = Path(result.config.output_dir)
    outdir.mkdir(parents=True, exist_ok=True)

    ts_path = outdir / "timeseries.csv"
    with open(ts_path, "w") as f:
        f.write(",".join(TIMESERIES_COLUMNS) + "\n")
        for row in result.timeseries:
            f.write(",".join(_fmt(v) for v in (
                row.t, row.tau, row.min_rho, row.min_p, row.max_mu,
                row.div_b)) + "\n")
    result.artifacts["timeseries"] = str(ts_path)

    csv_path = outdir / "final_fields.csv"
    _write_fields_csv(csv_path, solver)
    result.artifacts["fields_csv"] = str(csv_path)

    vtk_path = outdir / "final_fields.vtk"
    _write_fields_vtk(vtk_path, solver)
    result.artifacts["fields_vtk"] = str(vtk_path)

    if result.errors is not None:
        err_path = outdir / "errors.csv"
        with open(err_path, "w") as f:
            # wall time is kept on the report object only: CSV artifacts
            # must reproduce bitwise across reruns
            f.write("component,l1,l2,linf\n")
            for name, (l1, l2, linf) in result.errors.components.items():
                f.write(f"{name},{_fmt(l1)},{_fmt(l2)},{_fmt(linf)}\n")
            f.write(f"dofs,{result.errors.dofs},,\n")
        result.artifacts["errors"] = str(err_path)

    if result.failure is not None:
        status = outdir / "status.txt"
        status.write_text(f"FAILED at t = {_fmt(result.final_time)} after "
                          f"{result.steps} steps\n{result.failure}\n")
        result.artifacts["status"] = str(status)


def _field_columns(solver: TimeIntegrator):
    U = solver.U
    cols = [("rho", U.rho), ("m_x", U.m[0]), ("m_y", U.m[1]), ("E", U.E),
            ("B_x", U.B[0]), ("B_y", U.B[1])]
    if U.has_psi:
        cols.append(("psi", U.psi))
    if solver._last_visc is not None:
        cols.append(("mu", solver._last_visc.mu))
        cols.append(("mu_low", solver._last_visc.mu_low))
        cols.append(("mu_high", solver._last_visc.mu_high))
    return cols


def _write_fields_csv(path, solver: TimeIntegrator):
    sp = solver.space
    cols = _field_columns(solver)
    headers = ["x", "y"][:sp.dim] + [name for name, _ in cols]
    with open(path, "w") as f:
        f.write(",".join(headers) + "\n")
        for i in range(sp.n_dofs):
            vals = [sp.dof_coords[i, a] for a in range(sp.dim)]
            vals += [arr[i] for _, arr in cols]
            f.write(",".join(_fmt(v) for v in vals) + "\n")


def _write_fields_vtk(path, solver: TimeIntegrator):
    """Legacy ASCII unstructured grid carrying the vertex values."""
    sp = solver.space
    msh = sp.mesh
    verts = msh.vertices
    cols = _field_columns(solver)
    vertex_ids = sp.vertex_dofs
    with open(path, "w") as f:
        f.write("# vtk DataFile Version 3.0\n")
        f.write("mhd-rv fields\nASCII\nDATASET UNSTRUCTURED_GRID\n")
        f.write(f"POINTS {len(verts)} double\n")
        for v in verts:
            x = v[0]
            y = v[1] if msh.dim == 2 else 0.0
            f.write(f"{_fmt(x)} {_fmt(y)} 0\n")
        nc = len(msh.cells)
        npc = msh.dim + 1
        f.write(f"CELLS {nc} {nc * (npc + 1)}\n")
        for cell in msh.cells:
            f.write(" ".join([str(npc)] + [str(v) for v in cell]) + "\n")
        f.write(f"CELL_TYPES {nc}\n")
        ctype = "5" if msh.dim == 2 else "3"
        f.write("\n".join([ctype] * nc) + "\n")
        f.write(f"POINT_DATA {len(verts)}\n")
        for name, arr in cols:
            f.write(f"SCALARS {name} double 1\nLOOKUP_TABLE default\n")
            for vid in vertex_ids:
                f.write(_fmt(arr[vid]) + "\n")


def _write_convergence(config: BenchmarkConfig, results):
    outdir = Path(config.output_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    path = outdir / "convergence.csv"
    with open(path, "w") as f:
        f.write("dofs,component,l1,l2,linf,rate_l1\n")
        prev = {}
        for res in results:
            if res.errors is None:
                continue
            for name, (l1, l2, linf) in res.errors.components.items():
                rate = ""
                if name in prev:
                    p_dofs, p_l1 = prev[name]
                    rate = _fmt(convergence_rate(p_l1, l1, p_dofs,
                                                 res.errors.dofs,
                                                 res.config.spec.dim))
                f.write(f"{res.errors.dofs},{name},{_fmt(l1)},{_fmt(l2)},"
                        f"{_fmt(linf)},{rate}\n")
                prev[name] = (res.errors.dofs, l1)
    return path
