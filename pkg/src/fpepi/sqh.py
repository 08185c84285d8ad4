"""Sequential quadratic Hamiltonian iteration with adaptive proximal weight.

Each outer iteration solves the costate equation once, then repeatedly
minimizes the augmented Hamiltonian pointwise in time until the resulting
control passes the sufficient-decrease test

    J_new - J_old <= -mu * tau,    tau = |u_new - u_old|^2 in (L2[0,T])^3.

A failed test multiplies the proximal weight by ``lam`` and redoes only the
minimization and the forward solve from the same density/costate pair; a
passing test shrinks the weight by ``zeta`` and advances.  Iteration stops
when tau of an accepted step falls below ``kappa``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .adjoint_solver import solve_adjoint
from .cost import CostSpec, evaluate_J
from .dynamics import control_bounds
from .fp_solver import solve_forward
from .grid import AdjointField, ControlTrajectory, DensityField, GridSpec, make_initial_density
from .hamiltonian import extract_coeffs, minimize_coeffs

__all__ = ["SqhParams", "SqhIteration", "SqhTrace", "SqhResult", "SqhStalledError",
           "tau_norm", "run_sqh"]


@dataclass(frozen=True)
class SqhParams:
    """Hyperparameters of the iteration (``lam`` is the rejection growth factor)."""

    eps0: float = 1.0
    mu: float = 1e-9
    zeta: float = 0.9
    lam: float = 1.1
    kappa: float = 1e-3
    k_max: int = 150
    inner_max: int = 200

    def __post_init__(self) -> None:
        if self.eps0 <= 0 or self.mu <= 0 or self.kappa <= 0:
            raise ValueError("eps0, mu, and kappa must be positive")
        if not 0.0 < self.zeta < 1.0:
            raise ValueError(f"zeta must lie in (0, 1), got {self.zeta}")
        if self.lam <= 1.0:
            raise ValueError(f"lam must exceed 1, got {self.lam}")
        if self.k_max < 1 or self.inner_max < 1:
            raise ValueError("k_max and inner_max must be >= 1")


@dataclass(frozen=True)
class SqhIteration:
    """One proposal: the objective it reached and the penalty that made it."""

    iteration: int
    J: float
    tau: float
    eps: float
    accepted: bool
    retries: int


@dataclass
class SqhTrace:
    """Proposal log plus the final status of the iteration.

    Status is one of ``converged_tau``, ``max_iter``, ``stalled_eps``.
    """

    iterations: list[SqhIteration] = field(default_factory=list)
    status: str = "max_iter"
    initial_J: float = float("nan")

    def accepted(self) -> list[SqhIteration]:
        return [it for it in self.iterations if it.accepted]

    def accepted_count(self) -> int:
        return len(self.accepted())


@dataclass
class SqhResult:
    control: ControlTrajectory
    density: DensityField
    adjoint: AdjointField
    trace: SqhTrace
    objective: float


class SqhStalledError(RuntimeError):
    """Raised after ``inner_max`` consecutive rejections at one iteration."""

    def __init__(self, eps: float, trace: SqhTrace):
        super().__init__(f"no acceptable control update found; penalty grew to eps={eps:.3e}")
        self.eps = eps
        self.trace = trace


def tau_norm(u_new, u_old, grid: GridSpec) -> float:
    """Squared (L2[0,T])^3 norm of the control difference, by trapezoid."""
    a = u_new.values if isinstance(u_new, ControlTrajectory) else np.asarray(u_new, dtype=float)
    b = u_old.values if isinstance(u_old, ControlTrajectory) else np.asarray(u_old, dtype=float)
    if a.shape != (grid.nt, 3) or b.shape != (grid.nt, 3):
        raise ValueError("control arrays do not match the control grid")
    sq = ((a - b) ** 2).sum(axis=1)
    return float(np.trapezoid(sq, grid.times()))


def run_sqh(scenario, *, u0: np.ndarray | None = None, callback=None) -> SqhResult:
    """Resolve the optimal control map for a scenario configuration.

    Args:
        scenario: a ScenarioConfig (model, grid, cost, sqh, initial density).
        u0: optional initial control values of shape (nt, 3); default zero.
        callback: optional ``callback(iteration: SqhIteration)`` hook, called
            for every proposal (useful for progress printing).

    Returns:
        SqhResult with the final accepted control, its density, the costate
        solved for that control, the proposal trace, and the objective.

    Raises:
        SqhStalledError: after ``inner_max`` consecutive rejections.
    """
    p = scenario.model
    grid = scenario.grid
    cost: CostSpec = scenario.cost
    params: SqhParams = scenario.sqh
    bounds = control_bounds(p)

    f0 = make_initial_density(scenario.init_center, scenario.init_variance, grid)
    if u0 is None:
        u = np.zeros((grid.nt, 3))
    else:
        u = np.array(u0, dtype=float)
    traj = ControlTrajectory(u.copy(), grid)
    traj.check_admissible(bounds)

    f = solve_forward(f0, u, p, grid)
    J = evaluate_J(f, u, cost, grid)
    trace = SqhTrace(initial_J=J)
    eps = params.eps0

    for k in range(params.k_max):
        q = solve_adjoint(u, cost, p, grid)
        coeffs = [extract_coeffs(i, f, q, cost, p, grid) for i in range(grid.nt)]

        retries = 0
        while True:
            u_new = np.stack([
                minimize_coeffs(coeffs[i], u[i], eps, bounds) for i in range(grid.nt)
            ])
            f_new = solve_forward(f0, u_new, p, grid)
            J_new = evaluate_J(f_new, u_new, cost, grid)
            tau = tau_norm(u_new, u, grid)

            if J_new - J > -params.mu * tau:
                record = SqhIteration(k, J_new, tau, eps, False, retries)
                trace.iterations.append(record)
                if callback is not None:
                    callback(record)
                eps *= params.lam
                retries += 1
                if retries >= params.inner_max:
                    trace.status = "stalled_eps"
                    raise SqhStalledError(eps, trace)
            else:
                record = SqhIteration(k, J_new, tau, eps, True, retries)
                trace.iterations.append(record)
                if callback is not None:
                    callback(record)
                eps *= params.zeta
                u, f, J = u_new, f_new, J_new
                break

        if tau < params.kappa:
            trace.status = "converged_tau"
            break
    else:
        trace.status = "max_iter"

    q = solve_adjoint(u, cost, p, grid)
    return SqhResult(
        control=ControlTrajectory(u, grid),
        density=f,
        adjoint=q,
        trace=trace,
        objective=J,
    )
