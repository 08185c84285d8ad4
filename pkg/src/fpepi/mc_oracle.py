"""Independent cross-checks: SDE path ensembles and a deterministic ODE.

The path simulator is a plain Euler-Maruyama scheme for the planar (S, I)
dynamics with two independent noise channels of magnitude
``sqrt(noise_coeff) * (1 - alpha) * S * I`` each, matching the diagonal
diffusion the density solver evolves.  Paths are reflected (or clamped)
back into the domain, mirroring the zero-flux boundary of the density
equation.

Randomness comes from per-block Philox streams spawned from one seed, so
ensembles are reproducible byte-for-byte, blocks are independent, and a
parallel driver could process blocks in any order without changing results.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import ModelParams, control_bounds, diffusion_sq, drift, sir3_rhs
from .grid import ControlTrajectory, GridSpec, quadrature

__all__ = [
    "EnsembleSpec",
    "EnsembleResult",
    "make_gaussian_sampler",
    "em_ensemble",
    "histogram_density",
    "l1_distance",
    "rk4_sir3",
]

_BLOCK = 1 << 14  # paths per RNG stream
_MAX_REJECTION_ROUNDS = 1000


@dataclass(frozen=True)
class EnsembleSpec:
    """Size, step, seed, and boundary policy of one path ensemble."""

    n_paths: int = 100_000
    dt_em: float = 0.0125
    seed: int = 0
    boundary_policy: str = "reflect"  # "reflect" | "clamp"

    def __post_init__(self) -> None:
        if self.n_paths < 1:
            raise ValueError("n_paths must be >= 1")
        if self.dt_em <= 0:
            raise ValueError("dt_em must be positive")
        if self.boundary_policy not in ("reflect", "clamp"):
            raise ValueError(f"unknown boundary policy '{self.boundary_policy}'")


@dataclass
class EnsembleResult:
    """Per-control-time moments plus full-path snapshots at chosen times."""

    times: np.ndarray
    mean: np.ndarray        # (nt, 2) ensemble mean of (S, I)
    second_moment: np.ndarray  # (nt, 2) ensemble mean of (S^2, I^2)
    n_paths: int
    snapshots: dict[float, np.ndarray]

    def std_error(self, k: int) -> np.ndarray:
        var = self.second_moment[k] - self.mean[k] ** 2
        return np.sqrt(np.maximum(var, 0.0) / self.n_paths)


def make_gaussian_sampler(center, variance, lo: float, hi: float):
    """Rejection sampler for a Gaussian truncated to the square [lo, hi]^2.

    Returns ``sampler(rng, n) -> (n, 2)`` suitable for :func:`em_ensemble`.
    """
    var = np.asarray(variance, dtype=float)
    if var.ndim == 0:
        var = np.array([float(var), float(var)])
    if np.any(var <= 0):
        raise ValueError("variance must be positive")
    sd = np.sqrt(var)
    c = np.asarray(center, dtype=float)

    def sampler(rng: np.random.Generator, n: int) -> np.ndarray:
        out = np.empty((n, 2))
        filled = 0
        for _ in range(_MAX_REJECTION_ROUNDS):
            draw = c + sd * rng.standard_normal((max(n - filled, 1) * 2, 2))
            keep = draw[np.all((draw >= lo) & (draw <= hi), axis=1)]
            take = min(keep.shape[0], n - filled)
            out[filled:filled + take] = keep[:take]
            filled += take
            if filled == n:
                return out
        raise ValueError("sampler failed to produce in-domain points "
                         f"after {_MAX_REJECTION_ROUNDS} rounds")

    return sampler


def _fold_reflect(x: np.ndarray, lo: float, hi: float) -> np.ndarray:
    """Mirror positions back into [lo, hi], handling arbitrary overshoot."""
    span = hi - lo
    y = np.mod(x - lo, 2.0 * span)
    return lo + np.minimum(y, 2.0 * span - y)


def em_ensemble(f0_sampler, u, p: ModelParams, spec: EnsembleSpec,
                snapshot_times, grid: GridSpec) -> EnsembleResult:
    """Euler-Maruyama ensemble under a piecewise-constant control schedule.

    Args:
        f0_sampler: ``sampler(rng, n) -> (n, 2)`` initial-state draw.
        u: ControlTrajectory or (nt, 3) array on the control grid.
        p: model parameters.
        spec: ensemble size/step/seed/boundary policy.
        snapshot_times: times (on the control grid) at which to keep every
            path's position.
        grid: supplies the control grid and the domain bounds.

    Returns:
        EnsembleResult; identical inputs give bitwise-identical outputs.
    """
    uv = u.values if isinstance(u, ControlTrajectory) else np.asarray(u, dtype=float)
    if uv.shape != (grid.nt, 3):
        raise ValueError(f"control values shape {uv.shape} != ({grid.nt}, 3)")
    if spec.dt_em > grid.dt_control * (1 + 1e-12):
        raise ValueError("dt_em must not exceed the control interval")
    bounds = control_bounds(p)
    if np.any(uv < -1e-12) or np.any(uv > bounds[None, :] + 1e-12):
        raise ValueError("control trajectory leaves the admissible box")

    lo, hi = grid.x_lo, grid.x_hi
    # Integer substeps per control interval, snapping dt_em downward.
    m = max(1, round(grid.dt_control / spec.dt_em))
    dt = grid.dt_control / m
    sqdt = np.sqrt(dt)

    snap_idx = {grid.time_index(t): float(t) for t in snapshot_times}
    sum_x = np.zeros((grid.nt, 2))
    sum_x2 = np.zeros((grid.nt, 2))
    snaps = {t: [] for t in snap_idx.values()}

    root = np.random.SeedSequence(spec.seed)
    n_blocks = (spec.n_paths + _BLOCK - 1) // _BLOCK
    children = root.spawn(n_blocks)

    for blk in range(n_blocks):
        n = min(_BLOCK, spec.n_paths - blk * _BLOCK)
        rng = np.random.Generator(np.random.Philox(children[blk]))
        x = f0_sampler(rng, n)
        if x.shape != (n, 2) or np.any(x < lo) or np.any(x > hi):
            raise ValueError("sampler returned malformed or out-of-domain points")
        sum_x[0] += x.sum(axis=0)
        sum_x2[0] += (x ** 2).sum(axis=0)
        if 0 in snap_idx:
            snaps[snap_idx[0]].append(x.copy())

        for k in range(grid.nt - 1):
            w = uv[k]
            for _ in range(m):
                xs = (x[:, 0], x[:, 1])
                F = drift(xs, w, p)
                sig = np.sqrt(diffusion_sq(xs, w, p))
                noise = rng.standard_normal((2, n))
                x = x + dt * F.T + sqdt * (sig * noise).T
                if spec.boundary_policy == "reflect":
                    x = _fold_reflect(x, lo, hi)
                else:
                    x = np.clip(x, lo, hi)
            sum_x[k + 1] += x.sum(axis=0)
            sum_x2[k + 1] += (x ** 2).sum(axis=0)
            if k + 1 in snap_idx:
                snaps[snap_idx[k + 1]].append(x.copy())

    snapshots = {t: np.concatenate(parts) for t, parts in snaps.items()}
    return EnsembleResult(
        times=grid.times(),
        mean=sum_x / spec.n_paths,
        second_moment=sum_x2 / spec.n_paths,
        n_paths=spec.n_paths,
        snapshots=snapshots,
    )


def histogram_density(snapshot: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Empirical density on the grid's node-centered cells, mass one.

    Each node owns the cell of the trapezoidal weight around it, so the
    quadrature of the returned field is exactly 1.
    """
    pts = np.asarray(snapshot, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] == 0:
        raise ValueError("snapshot must be a nonempty (n, 2) array")
    if np.any(pts < grid.x_lo - 1e-12) or np.any(pts > grid.x_hi + 1e-12):
        raise ValueError("snapshot points leave the domain")
    idx = np.rint((pts - grid.x_lo) / grid.h).astype(int)
    idx = np.clip(idx, 0, grid.nx - 1)
    flat = idx[:, 0] * grid.nx + idx[:, 1]
    counts = np.bincount(flat, minlength=grid.nx * grid.nx).reshape(grid.nx, grid.nx)
    return counts / (pts.shape[0] * grid.cell_weights())


def l1_distance(field_a: np.ndarray, field_b: np.ndarray, grid: GridSpec) -> float:
    """Quadrature of |a - b| over the domain."""
    a = np.asarray(field_a)
    b = np.asarray(field_b)
    if a.shape != b.shape:
        raise ValueError(f"field shapes differ: {a.shape} vs {b.shape}")
    return quadrature(np.abs(a - b), grid)


def rk4_sir3(s0: float, i0: float, r0: float, u, p: ModelParams,
             grid: GridSpec, substeps: int = 4) -> np.ndarray:
    """Classical RK4 for the 3-compartment ODE under zero-order-hold controls.

    Returns an (nt, 3) array of (S, I, R) on the control grid.
    """
    if min(s0, i0, r0) < 0:
        raise ValueError("initial compartments must be nonnegative")
    uv = u.values if isinstance(u, ControlTrajectory) else np.asarray(u, dtype=float)
    if uv.shape != (grid.nt, 3):
        raise ValueError(f"control values shape {uv.shape} != ({grid.nt}, 3)")

    out = np.empty((grid.nt, 3))
    y = np.array([s0, i0, r0], dtype=float)
    out[0] = y
    dt = grid.dt_control / substeps
    for k in range(grid.nt - 1):
        w = uv[k]
        for _ in range(substeps):
            k1 = sir3_rhs(*y, w, p)
            k2 = sir3_rhs(*(y + 0.5 * dt * k1), w, p)
            k3 = sir3_rhs(*(y + 0.5 * dt * k2), w, p)
            k4 = sir3_rhs(*(y + dt * k3), w, p)
            y = y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        out[k + 1] = y
    return out
