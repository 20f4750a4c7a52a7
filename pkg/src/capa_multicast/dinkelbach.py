"""Outer ratio loop: alternate inner solves with eta <- R/P until the ratio stalls.

Each inner solver is warm-started from the previous iterate, which makes the
eta sequence nondecreasing (the warm start scores exactly zero objective at
the fresh eta, and the inner descent never accepts a worse point).
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import cov_bcd, zf_bcd
from .beams import BeamCoefficients, PerfReport, energy_efficiency
from .errors import InfeasibleProblemError
from .problem import MulticastProblem

DEFAULT_TOL = 1e-4
MAX_OUTER = 100


@dataclass(eq=False)
class InnerSolution:
    beams: BeamCoefficients
    warm: object
    inner_iters: int
    objective_trace: list
    warning: str | None = None


@dataclass(eq=False)
class IterationRecord:
    eta: float
    report: PerfReport
    inner_iters: int
    wall_seconds: float
    warning: str | None = None


@dataclass(eq=False)
class DinkelbachRun:
    etas: list = field(default_factory=list)          # eta iterates, starting at eta0
    iterations: list = field(default_factory=list)    # IterationRecord per outer step
    beams: BeamCoefficients | None = None
    report: PerfReport | None = None
    converged: bool = False
    warning: str | None = None

    @property
    def eta(self) -> float:
        return self.etas[-1] if self.etas else 0.0

    @property
    def outer_iterations(self) -> int:
        return len(self.iterations)


def run(
    inner_solver,
    problem: MulticastProblem,
    eta0: float = 0.0,
    tol: float = DEFAULT_TOL,
    max_outer: int = MAX_OUTER,
) -> DinkelbachRun:
    """Drive `inner_solver(eta, warm) -> InnerSolution` to a stationary ratio."""
    if eta0 < 0:
        raise ValueError("eta0 must be nonnegative")
    if tol <= 0:
        raise ValueError("tol must be positive")
    out = DinkelbachRun(etas=[float(eta0)])
    eta = float(eta0)
    warm = None
    best_eta = -np.inf
    for _ in range(max_outer):
        t0 = time.perf_counter()
        sol = inner_solver(eta, warm)
        wall = time.perf_counter() - t0
        report = energy_efficiency(sol.beams, problem)
        if report.power <= 0.0:
            out.warning = "inner solver returned zero power; stopping at best iterate"
            break
        eta_new = report.sum_rate / report.power
        if eta_new < eta:
            # warm starts make the exact ratio nondecreasing, so a dip is the
            # inner solver's noise floor: stop at the best iterate, unrecorded
            out.warning = "ratio reached the inner solver's noise floor"
            out.converged = True
            break
        out.iterations.append(
            IterationRecord(eta_new, report, sol.inner_iters, wall, sol.warning)
        )
        out.etas.append(float(eta_new))
        if eta_new >= best_eta:
            best_eta = eta_new
            out.beams = sol.beams
            out.report = report
        # tolerance scales with the ratio so termination is unit-independent
        if abs(eta_new - eta) <= tol * max(1.0, abs(eta)):
            out.converged = True
            break
        eta = eta_new
        warm = sol.warm
    else:
        out.warning = f"outer loop stopped at max_outer={max_outer}"
    return out


def starting_zf_beams(problem: MulticastProblem, basis: zf_bcd.ZfBasis) -> BeamCoefficients:
    """Zero-forcing directions with an even budget split, falling back to the
    minimal floor-meeting allocation when the even split misses a floor."""
    dirs = zf_bcd.DirectionSet.from_zf(basis)
    rho = zf_bcd.feasible_start_rho(dirs, problem)
    return BeamCoefficients(np.sqrt(rho)[:, None] * basis.directions.coeffs)


def polish_group_powers(
    beams: BeamCoefficients,
    eta: float,
    problem: MulticastProblem,
    tol: float = DEFAULT_TOL,
    backend: str | None = None,
) -> BeamCoefficients:
    """Re-optimize per-group powers along the given directions; restores exact
    floor feasibility and can only improve the fixed-eta objective."""
    coeffs = beams.coeffs.copy()
    power = np.array([np.real(c.conj() @ problem.gram @ c) for c in coeffs])
    floor_power = 1e-12 * max(problem.power_budget, 1.0)
    for g in np.flatnonzero(power <= floor_power):
        # dead beam: hand the group a matched filter toward its first user
        i = problem.group_indices(g)[0]
        coeffs[g] = 0.0
        coeffs[g, i] = 1.0
        power[g] = np.real(problem.gram[i, i])
    dirs = zf_bcd.DirectionSet.from_beams(BeamCoefficients(coeffs), problem)
    rho0 = np.where(power <= floor_power, 0.0, power)
    if not zf_bcd.floors_met(rho0, dirs, problem):
        rho0 = zf_bcd.min_floor_power_allocation(dirs, problem)
    res = zf_bcd.solve_power_dinkelbach_subproblem(
        eta, dirs, problem, rho0, tol=tol, backend=backend
    )
    return res.beams


def make_cov_solver(
    problem: MulticastProblem,
    bcd_tol: float = DEFAULT_TOL,
    ell_tol: float | None = None,
    backend: str | None = None,
):
    """Inner solver running the optimal-beamformer BCD, warm-started with
    evenly powered zero-forcing beams on the first call."""
    basis = zf_bcd.build_zf_basis(zf_bcd.select_representatives(problem), problem)

    def inner(eta: float, warm) -> InnerSolution:
        warm_beams = warm if warm is not None else starting_zf_beams(problem, basis)
        res = cov_bcd.solve_dinkelbach_subproblem(
            eta, problem, warm_beams, tol=bcd_tol, ell_tol=ell_tol, backend=backend,
            check_warm_start=warm is None,
        )
        beams = res.beams
        warning = res.warning
        report = energy_efficiency(beams, problem)
        if not report.feasible:
            beams = polish_group_powers(beams, eta, problem, tol=bcd_tol, backend=backend)
        return InnerSolution(
            beams=beams,
            warm=beams,
            inner_iters=len(res.trace),
            objective_trace=list(res.trace.objective),
            warning=warning,
        )

    return inner


def make_zf_solver(
    problem: MulticastProblem,
    tol: float = DEFAULT_TOL,
    backend: str | None = None,
):
    """Inner solver running the power-allocation BCD on fixed ZF directions."""
    basis = zf_bcd.build_zf_basis(zf_bcd.select_representatives(problem), problem)
    dirs = zf_bcd.DirectionSet.from_zf(basis)

    def inner(eta: float, warm) -> InnerSolution:
        rho0 = (
            np.asarray(warm, dtype=float)
            if warm is not None
            else zf_bcd.feasible_start_rho(dirs, problem)
        )
        res = zf_bcd.solve_power_dinkelbach_subproblem(
            eta, dirs, problem, rho0, tol=tol, backend=backend
        )
        return InnerSolution(
            beams=res.beams,
            warm=res.rho,
            inner_iters=len(res.trace),
            objective_trace=list(res.trace.objective),
            warning=res.warning,
        )

    return inner


def optimize_cov(
    problem: MulticastProblem,
    tol: float = DEFAULT_TOL,
    eta0: float = 0.0,
    max_outer: int = MAX_OUTER,
    ell_tol: float | None = None,
    backend: str | None = None,
) -> DinkelbachRun:
    inner = make_cov_solver(problem, bcd_tol=tol, ell_tol=ell_tol, backend=backend)
    return run(inner, problem, eta0=eta0, tol=tol, max_outer=max_outer)


def optimize_zf(
    problem: MulticastProblem,
    tol: float = DEFAULT_TOL,
    eta0: float = 0.0,
    max_outer: int = MAX_OUTER,
    backend: str | None = None,
) -> DinkelbachRun:
    inner = make_zf_solver(problem, tol=tol, backend=backend)
    return run(inner, problem, eta0=eta0, tol=tol, max_outer=max_outer)
