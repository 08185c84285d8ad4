"""Shared fixtures and field generators for the test suite."""

import numpy as np
import pytest

from fpepi.dynamics import ModelParams
from fpepi.grid import AdjointField, DensityField, GridSpec


@pytest.fixture
def reference_model() -> ModelParams:
    return ModelParams()


@pytest.fixture
def small_grid() -> GridSpec:
    return GridSpec(nx=15, nt=9, T=1.0)


def smooth_field(grid: GridSpec, seed: int, amplitude: float = 1.0) -> np.ndarray:
    """Deterministic random smooth nodal field from a low-order trig series."""
    rng = np.random.default_rng(seed)
    x1, x2 = grid.mesh()
    out = np.zeros_like(x1)
    for _ in range(4):
        a, b = rng.uniform(0.5, 3.0, size=2)
        p1, p2 = rng.uniform(0, 2 * np.pi, size=2)
        out += rng.normal() * np.sin(a * np.pi * x1 + p1) * np.cos(b * np.pi * x2 + p2)
    return amplitude * out


def smooth_density(grid: GridSpec, seed: int) -> DensityField:
    """Time-indexed positive smooth fields (not solver output; test input)."""
    rng = np.random.default_rng(seed)
    slices = []
    for k in range(grid.nt):
        f = np.exp(0.5 * smooth_field(grid, seed + 101 * k))
        slices.append(f / f.mean())
    return DensityField(np.stack(slices), grid)


def smooth_adjoint(grid: GridSpec, seed: int) -> AdjointField:
    slices = [smooth_field(grid, seed + 37 * k) for k in range(grid.nt)]
    return AdjointField(np.stack(slices), grid)
