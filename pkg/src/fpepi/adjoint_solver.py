"""Backward-in-time costate solver with homogeneous Neumann boundaries.

The costate equation has no conservation structure, so it is discretized in
non-divergence form: first-order upwinding for the drift term (upwind side
picked per node from the sign of each drift component), centered second
differences for the diffusion term, ghost nodes mirrored across the boundary
for the zero-normal-derivative condition, and the same SSP-RK3 stepping as
the forward solver, run in reversed time.  Upwinding plus the forward-Euler
step bound give a discrete maximum principle, which is what the sign and
comparison tests lean on.
"""

from __future__ import annotations

import math

import numpy as np

from .cost import CostSpec
from .dynamics import ModelParams, control_bounds, diffusion_sq, drift
from .fp_solver import CFL_SAFETY, CflError, SolverError
from .grid import AdjointField, ControlTrajectory, GridSpec

__all__ = ["advective_term", "solve_adjoint", "solve_adjoint_fields"]


def _mirror_pad(q: np.ndarray) -> np.ndarray:
    """Pad with ghost nodes mirrored across the boundary (q[-1] := q[1])."""
    return np.pad(q, 1, mode="reflect")


def advective_term(q: np.ndarray, u_k, p: ModelParams, grid: GridSpec) -> np.ndarray:
    """Upwinded F·grad(q) on the grid for a single control value.

    For each component the difference is one-sided against the information
    flow of the reversed-time march (forward difference where the drift
    component is positive); at the boundary the mirrored ghost keeps the
    stencil consistent with a vanishing normal derivative.
    """
    x = grid.mesh()
    F = drift(x, u_k, p)
    h = grid.h
    qp = _mirror_pad(q)
    fwd1 = (qp[2:, 1:-1] - q) / h
    bwd1 = (q - qp[:-2, 1:-1]) / h
    fwd2 = (qp[1:-1, 2:] - q) / h
    bwd2 = (q - qp[1:-1, :-2]) / h
    term1 = np.maximum(F[0], 0.0) * fwd1 + np.minimum(F[0], 0.0) * bwd1
    term2 = np.maximum(F[1], 0.0) * fwd2 + np.minimum(F[1], 0.0) * bwd2
    return term1 + term2


class _BackwardOperator:
    """Reversed-time right-hand side F·grad(q) + C*lap(q) - G for fixed u."""

    def __init__(self, u_k, G: np.ndarray, p: ModelParams, grid: GridSpec):
        x = grid.mesh()
        F = drift(x, u_k, p)
        self.h = grid.h
        self.F1_pos = np.maximum(F[0], 0.0)
        self.F1_neg = np.minimum(F[0], 0.0)
        self.F2_pos = np.maximum(F[1], 0.0)
        self.F2_neg = np.minimum(F[1], 0.0)
        sig2 = diffusion_sq(x, u_k, p)
        self.C1 = 0.5 * sig2[0]
        self.C2 = 0.5 * sig2[1]
        self.G = G
        # Exact forward-Euler bound of the max principle: the diagonal
        # coefficient 1 - dt*(|F1|/h + |F2|/h + 2(C1+C2)/h^2) must stay >= 0.
        rate = (np.abs(F[0]) + np.abs(F[1])) / self.h \
            + 2.0 * (self.C1 + self.C2) / self.h ** 2
        peak = rate.max()
        self.dt_stable = math.inf if peak <= 0.0 else 1.0 / float(peak)

    def rhs(self, q: np.ndarray) -> np.ndarray:
        h = self.h
        qp = _mirror_pad(q)
        fwd1 = (qp[2:, 1:-1] - q) / h
        bwd1 = (q - qp[:-2, 1:-1]) / h
        fwd2 = (qp[1:-1, 2:] - q) / h
        bwd2 = (q - qp[1:-1, :-2]) / h
        adv = self.F1_pos * fwd1 + self.F1_neg * bwd1 \
            + self.F2_pos * fwd2 + self.F2_neg * bwd2
        lap1 = (qp[2:, 1:-1] - 2.0 * q + qp[:-2, 1:-1]) / h ** 2
        lap2 = (qp[1:-1, 2:] - 2.0 * q + qp[1:-1, :-2]) / h ** 2
        return adv + self.C1 * lap1 + self.C2 * lap2 - self.G

    def fe(self, q: np.ndarray, dt: float) -> np.ndarray:
        return q + dt * self.rhs(q)

    def rk3(self, q: np.ndarray, dt: float) -> np.ndarray:
        q1 = self.fe(q, dt)
        q2 = 0.75 * q + 0.25 * self.fe(q1, dt)
        return q / 3.0 + (2.0 / 3.0) * self.fe(q2, dt)


def solve_adjoint_fields(u, G: np.ndarray, K: np.ndarray, p: ModelParams,
                         grid: GridSpec, *, auto_substeps: bool = True) -> AdjointField:
    """Backward march with explicit running-cost and terminal-cost fields.

    ``G`` and ``K`` are nodal (nx, nx) arrays; the terminal slice is set to
    ``-K`` exactly.  This lower-level entry point exists so tests can drive
    the solver with cost shapes outside the scenario vocabulary.
    """
    uv = u.values if isinstance(u, ControlTrajectory) else np.asarray(u, dtype=float)
    if uv.shape != (grid.nt, 3):
        raise ValueError(f"control values shape {uv.shape} != ({grid.nt}, 3)")
    bounds = control_bounds(p)
    if np.any(uv < -1e-12) or np.any(uv > bounds[None, :] + 1e-12):
        raise ValueError("control trajectory leaves the admissible box")
    G = np.asarray(G, dtype=float)
    K = np.asarray(K, dtype=float)
    shape = (grid.nx, grid.nx)
    if G.shape != shape or K.shape != shape:
        raise ValueError("cost field shape does not match the grid")

    dt_c = grid.dt_control
    history = np.empty((grid.nt, grid.nx, grid.nx))
    q = -K.copy()
    history[grid.nt - 1] = q

    for k in range(grid.nt - 2, -1, -1):
        op = _BackwardOperator(uv[k], G, p, grid)
        dt_max = CFL_SAFETY * op.dt_stable
        required = 1 if math.isinf(dt_max) else max(1, math.ceil(dt_c / dt_max))
        if required > grid.substeps_per_interval and not auto_substeps:
            raise CflError(required, grid.substeps_per_interval, f"adjoint interval {k}")
        n_sub = max(required, grid.substeps_per_interval)
        dt = dt_c / n_sub
        for _ in range(n_sub):
            q = op.rk3(q, dt)
        if not np.all(np.isfinite(q)):
            raise SolverError(f"non-finite costate after interval {k}")
        history[k] = q

    return AdjointField(history, grid)


def solve_adjoint(u, cost: CostSpec, p: ModelParams, grid: GridSpec, *,
                  auto_substeps: bool = True) -> AdjointField:
    """Backward costate solve for a scenario's configured cost shapes."""
    return solve_adjoint_fields(
        u, cost.running_grid(grid), cost.terminal_grid(grid), p, grid,
        auto_substeps=auto_substeps,
    )
