"""Control cost, running cost, terminal cost, and the full objective.

Cost shapes are encoded as compact strings so scenario files round-trip
verbatim:

    running:   "zero" | "linear_in_i:<coeff>" | "indicator:<threshold>"
    terminal:  "zero" | "neg_susceptible_surplus:<threshold>"

``linear_in_i`` charges proportionally to the infected fraction,
``indicator`` charges 1 wherever the infected fraction reaches the threshold
(closed set: the threshold itself is charged), and
``neg_susceptible_surplus`` pays out ``-max(S - threshold, 0)`` at the final
time, rewarding mass that ends with a large susceptible fraction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import ControlTrajectory, DensityField, GridSpec, quadrature

__all__ = ["CostSpec", "control_cost", "evaluate_J", "evaluate_J_parts"]

_RUNNING_KINDS = ("zero", "linear_in_i", "indicator")
_TERMINAL_KINDS = ("zero", "neg_susceptible_surplus")


def _parse_variant(text: str, allowed: tuple[str, ...], label: str) -> tuple[str, float | None]:
    kind, sep, arg = text.partition(":")
    if kind not in allowed:
        raise ValueError(f"unknown {label} cost '{text}' (expected one of {allowed})")
    if kind == "zero":
        if sep:
            raise ValueError(f"{label} cost 'zero' takes no parameter, got '{text}'")
        return kind, None
    if not sep:
        raise ValueError(f"{label} cost '{kind}' needs a parameter, e.g. '{kind}:0.15'")
    value = float(arg)
    if kind == "linear_in_i":
        if value < 0:
            raise ValueError(f"linear_in_i coefficient must be >= 0, got {value}")
    elif not 0.0 < value < 1.0:
        raise ValueError(f"{label} threshold must lie in (0, 1), got {value}")
    return kind, value


@dataclass(frozen=True)
class CostSpec:
    """Weights of the mixed L1/L2 control cost plus state-cost shapes."""

    beta1: float = 0.2
    beta2: float = 0.1
    running: str = "zero"
    terminal: str = "zero"

    def __post_init__(self) -> None:
        if self.beta1 < 0 or self.beta2 < 0:
            raise ValueError("control cost weights must be nonnegative")
        _parse_variant(self.running, _RUNNING_KINDS, "running")
        _parse_variant(self.terminal, _TERMINAL_KINDS, "terminal")

    @property
    def is_state_free(self) -> bool:
        """True when both state costs vanish, making zero control optimal."""
        return self.running == "zero" and self.terminal == "zero"

    def eval_running_G(self, x) -> np.ndarray:
        """Running cost density at state points ``x = (x1, x2)``."""
        x2 = np.asarray(x[1], dtype=float)
        kind, arg = _parse_variant(self.running, _RUNNING_KINDS, "running")
        if kind == "zero":
            return np.zeros_like(x2)
        if kind == "linear_in_i":
            return arg * x2
        return np.where(x2 >= arg, 1.0, 0.0)

    def eval_terminal_K(self, x) -> np.ndarray:
        """Terminal cost at state points ``x = (x1, x2)``."""
        x1 = np.asarray(x[0], dtype=float)
        kind, arg = _parse_variant(self.terminal, _TERMINAL_KINDS, "terminal")
        if kind == "zero":
            return np.zeros_like(x1)
        return -np.maximum(x1 - arg, 0.0)

    def running_grid(self, grid: GridSpec) -> np.ndarray:
        return self.eval_running_G(grid.mesh())

    def terminal_grid(self, grid: GridSpec) -> np.ndarray:
        return self.eval_terminal_K(grid.mesh())


def control_cost(u_k, spec: CostSpec) -> float:
    """Pointwise control cost beta1*|u|_1 + (beta2/2)*|u|_2^2.

    Controls are componentwise nonnegative in the admissible box, so the
    L1 norm is the plain sum.
    """
    u = np.asarray(u_k, dtype=float)
    return float(spec.beta1 * u.sum() + 0.5 * spec.beta2 * (u ** 2).sum())


def evaluate_J_parts(f: DensityField, u, spec: CostSpec, grid: GridSpec) -> dict[str, float]:
    """Objective split into control, running, and terminal contributions.

    All time integrals use trapezoidal quadrature on the control grid; the
    spatial integrals use the grid's trapezoidal weights.
    """
    uv = u.values if isinstance(u, ControlTrajectory) else np.asarray(u, dtype=float)
    if uv.shape != (grid.nt, 3):
        raise ValueError(f"control values shape {uv.shape} != ({grid.nt}, 3)")
    if f.values.shape != (grid.nt, grid.nx, grid.nx):
        raise ValueError("density field does not match the grid")

    times = grid.times()
    ell = spec.beta1 * uv.sum(axis=1) + 0.5 * spec.beta2 * (uv ** 2).sum(axis=1)
    control_part = float(np.trapezoid(ell, times))

    cw = grid.cell_weights()
    G = spec.running_grid(grid)
    running_series = np.einsum("ij,kij->k", cw * G, f.values)
    running_part = float(np.trapezoid(running_series, times))

    K = spec.terminal_grid(grid)
    terminal_part = quadrature(K * f.values[-1], grid)

    return {
        "control": control_part,
        "running": running_part,
        "terminal": terminal_part,
        "total": control_part + running_part + terminal_part,
    }


def evaluate_J(f: DensityField, u, spec: CostSpec, grid: GridSpec) -> float:
    """Total objective for a solved density and the control that produced it."""
    return evaluate_J_parts(f, u, spec, grid)["total"]
