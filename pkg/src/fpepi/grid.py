"""Spatial mesh on the unit square, control-time mesh, and field containers.

The spatial grid is vertex-centered: ``nx`` equally spaced nodes per axis
including both boundaries, so the spacing is ``h = (x_hi - x_lo)/(nx - 1)``.
Trapezoidal quadrature weights (half weight on boundary nodes) double as the
finite-volume cell sizes of the conservative solver, which is what makes the
discrete mass of the scheme agree exactly with the quadrature of the field.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "GridSpec",
    "DensityField",
    "AdjointField",
    "ControlTrajectory",
    "make_initial_density",
    "quadrature",
]


@dataclass(frozen=True)
class GridSpec:
    """Mesh sizes for the square state domain and the control-time axis.

    ``substeps_per_interval`` is a floor on the number of solver substeps
    taken inside each control interval; the PDE solvers escalate beyond it
    automatically when their stability bounds require more.
    """

    nx: int = 41
    nt: int = 81
    T: float = 10.0
    x_lo: float = 0.0
    x_hi: float = 1.0
    substeps_per_interval: int = 1

    def __post_init__(self) -> None:
        if self.nx < 3:
            raise ValueError(f"GridSpec.nx must be >= 3, got {self.nx}")
        if self.nt < 2:
            raise ValueError(f"GridSpec.nt must be >= 2, got {self.nt}")
        if not self.x_hi > self.x_lo:
            raise ValueError("GridSpec requires x_hi > x_lo")
        if not self.T > 0:
            raise ValueError("GridSpec.T must be positive")
        if self.substeps_per_interval < 1:
            raise ValueError("GridSpec.substeps_per_interval must be >= 1")

    @property
    def h(self) -> float:
        return (self.x_hi - self.x_lo) / (self.nx - 1)

    @property
    def dt_control(self) -> float:
        return self.T / (self.nt - 1)

    def axis(self) -> np.ndarray:
        """Node coordinates along one spatial axis."""
        return np.linspace(self.x_lo, self.x_hi, self.nx)

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        """(X1, X2) node coordinate arrays with ``ij`` indexing."""
        ax = self.axis()
        return np.meshgrid(ax, ax, indexing="ij")

    def times(self) -> np.ndarray:
        """Control-grid times 0..T."""
        return np.linspace(0.0, self.T, self.nt)

    def weights1d(self) -> np.ndarray:
        """Trapezoidal weights along one axis (h/2 at the two boundary nodes)."""
        w = np.full(self.nx, self.h)
        w[0] = w[-1] = 0.5 * self.h
        return w

    def cell_weights(self) -> np.ndarray:
        """2D tensor-product quadrature weights, also the FV cell areas."""
        w = self.weights1d()
        return np.outer(w, w)

    def time_index(self, t: float, tol: float = 1e-9) -> int:
        """Index of the control-grid node nearest ``t`` (must be within tol)."""
        k = int(round(t / self.dt_control))
        k = min(max(k, 0), self.nt - 1)
        if abs(k * self.dt_control - t) > tol * max(1.0, self.T):
            raise ValueError(f"time {t} is not on the control grid (dt={self.dt_control})")
        return k


def quadrature(field_slice: np.ndarray, grid: GridSpec) -> float:
    """2D trapezoidal quadrature of a nodal field over the domain."""
    f = np.asarray(field_slice)
    if f.shape != (grid.nx, grid.nx):
        raise ValueError(f"field shape {f.shape} does not match grid ({grid.nx}, {grid.nx})")
    w = grid.weights1d()
    return float(w @ f @ w)


def make_initial_density(center, variance, grid: GridSpec) -> np.ndarray:
    """Truncated Gaussian initial density, normalized to discrete mass one.

    ``variance`` may be a scalar (isotropic) or a pair of per-axis variances.
    The Gaussian is evaluated at grid nodes, implicitly truncated to the
    domain, and rescaled so the trapezoidal mass equals 1.
    """
    var = np.asarray(variance, dtype=float)
    if var.ndim == 0:
        var = np.array([float(var), float(var)])
    if var.shape != (2,) or np.any(var <= 0):
        raise ValueError(f"variance must be a positive scalar or pair, got {variance}")
    c1, c2 = float(center[0]), float(center[1])
    x1, x2 = grid.mesh()
    values = np.exp(-0.5 * ((x1 - c1) ** 2 / var[0] + (x2 - c2) ** 2 / var[1]))
    mass = quadrature(values, grid)
    if mass <= 0.0:
        raise ValueError(f"initial density vanishes on the grid (center={center})")
    return values / mass


@dataclass
class DensityField:
    """Time-indexed probability density on the grid, shape (nt, nx, nx)."""

    values: np.ndarray
    grid: GridSpec

    def __post_init__(self) -> None:
        expected = (self.grid.nt, self.grid.nx, self.grid.nx)
        if self.values.shape != expected:
            raise ValueError(f"DensityField values shape {self.values.shape} != {expected}")

    def mass(self) -> np.ndarray:
        """Discrete mass at every control time."""
        w = self.grid.weights1d()
        return np.einsum("i,kij,j->k", w, self.values, w)

    def mean_state(self) -> np.ndarray:
        """(nt, 2) array of E[S](t), E[I](t) under the density."""
        x1, x2 = self.grid.mesh()
        cw = self.grid.cell_weights()
        es = np.einsum("ij,kij->k", cw * x1, self.values)
        ei = np.einsum("ij,kij->k", cw * x2, self.values)
        return np.stack((es, ei), axis=1)

    def region_mass(self, k: int, x1_range=None, x2_range=None) -> float:
        """Quadrature of slice ``k`` restricted to an axis-aligned box.

        Ranges are inclusive node-coordinate intervals; ``None`` spans the
        whole axis.  Weights are re-trapezoidalized on the sub-box so that a
        full-domain box reproduces the plain quadrature.
        """
        ax = self.grid.axis()

        def sub_weights(rng):
            if rng is None:
                return self.grid.weights1d()
            lo, hi = rng
            mask = (ax >= lo - 1e-12) & (ax <= hi + 1e-12)
            w = np.where(mask, self.grid.h, 0.0)
            idx = np.nonzero(mask)[0]
            if idx.size == 0:
                return np.zeros_like(ax)
            w[idx[0]] *= 0.5
            w[idx[-1]] *= 0.5
            return w

        w1 = sub_weights(x1_range)
        w2 = sub_weights(x2_range)
        return float(w1 @ self.values[k] @ w2)


@dataclass
class AdjointField:
    """Time-indexed costate field on the grid, shape (nt, nx, nx)."""

    values: np.ndarray
    grid: GridSpec

    def __post_init__(self) -> None:
        expected = (self.grid.nt, self.grid.nx, self.grid.nx)
        if self.values.shape != expected:
            raise ValueError(f"AdjointField values shape {self.values.shape} != {expected}")


@dataclass
class ControlTrajectory:
    """Piecewise-constant control map on the control grid, shape (nt, 3).

    Row ``k`` is held on the interval ``[t_k, t_{k+1})``; the final row only
    affects time quadratures of the cost and the update norm.
    """

    values: np.ndarray
    grid: GridSpec

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.grid.nt, 3):
            raise ValueError(f"ControlTrajectory values shape {self.values.shape} != ({self.grid.nt}, 3)")

    @classmethod
    def zeros(cls, grid: GridSpec) -> "ControlTrajectory":
        return cls(np.zeros((grid.nt, 3)), grid)

    def check_admissible(self, bounds: np.ndarray, tol: float = 1e-12) -> None:
        """Raise if any row leaves the box [0, bounds]."""
        v = self.values
        if np.any(v < -tol) or np.any(v > bounds[None, :] + tol):
            raise ValueError("control trajectory leaves the admissible box")
