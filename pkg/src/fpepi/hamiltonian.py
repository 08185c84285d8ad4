"""Pointwise-in-time Hamiltonian: evaluation, coefficients, box minimization.

At a fixed time the Hamiltonian is

    H(w) = ell(w) - int f * F(x, w) . grad(q) dx
                  - int f * (sigma^2(x, w) / 2) * (q_x1x1 + q_x2x2) dx,

a separable polynomial in the control components: quadratic in w1 (the
squared noise carries (1 - w1)^2, the control cost w1^2) and quadratic in w2
and w3 through the control cost alone, with no cross terms.  Extracting the
per-component coefficients once per time slice makes the proximal
minimization exact and essentially free, which is what the outer iteration
leans on when it retries a step with a larger penalty.

Derivatives of q use centered differences with mirrored ghost nodes, the
same boundary treatment as the backward solve.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cost import CostSpec, control_cost
from .dynamics import ModelParams, control_bounds, diffusion_sq, drift
from .grid import AdjointField, DensityField, GridSpec

__all__ = [
    "HamiltonianCoeffs",
    "eval_H",
    "extract_coeffs",
    "minimize_coeffs",
    "minimize_H_eps",
]


@dataclass(frozen=True)
class HamiltonianCoeffs:
    """Per-component polynomial coefficients of H at one time slice.

    ``H(w) = offset + sum_i (lin[i] * w_i + quad[i] * w_i**2)``.
    """

    lin: np.ndarray
    quad: np.ndarray
    offset: float

    def value(self, w) -> float:
        w = np.asarray(w, dtype=float)
        return float(self.offset + self.lin @ w + self.quad @ (w * w))


def _centered_derivatives(q: np.ndarray, h: float):
    qp = np.pad(q, 1, mode="reflect")
    dq1 = (qp[2:, 1:-1] - qp[:-2, 1:-1]) / (2.0 * h)
    dq2 = (qp[1:-1, 2:] - qp[1:-1, :-2]) / (2.0 * h)
    d2q1 = (qp[2:, 1:-1] - 2.0 * q + qp[:-2, 1:-1]) / h ** 2
    d2q2 = (qp[1:-1, 2:] - 2.0 * q + qp[1:-1, :-2]) / h ** 2
    return dq1, dq2, d2q1, d2q2


def eval_H(k: int, f: DensityField, q: AdjointField, w, spec: CostSpec,
           p: ModelParams, grid: GridSpec) -> float:
    """Direct evaluation of H at time index ``k`` and control value ``w``."""
    fk = f.values[k]
    qk = q.values[k]
    dq1, dq2, d2q1, d2q2 = _centered_derivatives(qk, grid.h)
    x = grid.mesh()
    F = drift(x, w, p)
    sig2 = diffusion_sq(x, w, p)
    integrand = fk * (F[0] * dq1 + F[1] * dq2) \
        + 0.5 * fk * (sig2[0] * d2q1 + sig2[1] * d2q2)
    cw = grid.cell_weights()
    return control_cost(w, spec) - float(np.sum(cw * integrand))


def extract_coeffs(k: int, f: DensityField, q: AdjointField, spec: CostSpec,
                   p: ModelParams, grid: GridSpec) -> HamiltonianCoeffs:
    """Exact polynomial coefficients of H in the control components."""
    fk = f.values[k]
    qk = q.values[k]
    dq1, dq2, d2q1, d2q2 = _centered_derivatives(qk, grid.h)
    x1, x2 = grid.mesh()
    cw = grid.cell_weights()
    wf = cw * fk

    # Drift split F = F0 + w1*Fa + w2*Fv + w3*Fe (affine in each component).
    F0_1 = p.b - p.beta * x1 * x2 - p.delta * x1
    F0_2 = p.beta * x1 * x2 - (p.gamma + p.delta) * x2
    i_base = float(np.sum(wf * (F0_1 * dq1 + F0_2 * dq2)))
    i_alpha = float(np.sum(wf * p.beta * x1 * x2 * (dq1 - dq2)))
    i_v = float(np.sum(wf * x1 * dq1))
    i_eta = float(np.sum(wf * x2 * dq2))
    # Squared noise carries (1 - w1)^2 times this integral.
    i_diff = float(np.sum(wf * 0.5 * p.noise_coeff * x1 ** 2 * x2 ** 2 * (d2q1 + d2q2)))

    half_b2 = 0.5 * spec.beta2
    lin = np.array([
        spec.beta1 - i_alpha + 2.0 * i_diff,
        spec.beta1 + i_v,
        spec.beta1 + i_eta,
    ])
    quad = np.array([half_b2 - i_diff, half_b2, half_b2])
    return HamiltonianCoeffs(lin=lin, quad=quad, offset=-i_base - i_diff)


def minimize_coeffs(coeffs: HamiltonianCoeffs, u_prev, eps: float,
                    bounds: np.ndarray) -> np.ndarray:
    """Exact minimizer of H(w) + eps*|w - u_prev|^2 over the control box.

    Separable: each component minimizes A*w^2 + B*w on [0, hi] with
    A = quad + eps and B = lin - 2*eps*u_prev.  Convex components clamp the
    stationary point; concave or flat ones compare endpoints, ties broken
    toward the smaller control value.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    u_prev = np.asarray(u_prev, dtype=float)
    out = np.empty(3)
    for i in range(3):
        hi = float(bounds[i])
        A = coeffs.quad[i] + eps
        B = coeffs.lin[i] - 2.0 * eps * u_prev[i]
        if A > 0.0:
            out[i] = min(max(-B / (2.0 * A), 0.0), hi)
        else:
            at_hi = A * hi * hi + B * hi
            out[i] = hi if at_hi < 0.0 else 0.0
    return out


def minimize_H_eps(k: int, f: DensityField, q: AdjointField, u_prev_k,
                   eps: float, spec: CostSpec, p: ModelParams,
                   grid: GridSpec) -> np.ndarray:
    """Global box minimizer of the proximally augmented Hamiltonian at ``k``."""
    coeffs = extract_coeffs(k, f, q, spec, p, grid)
    return minimize_coeffs(coeffs, u_prev_k, eps, control_bounds(p))
