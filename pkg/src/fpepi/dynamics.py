"""Controlled SIR vector field, noise intensities, and the 3-compartment ODE.

State convention: the reduced planar state is ``x = (x1, x2) = (S, I)``,
both fractions of the total population.  Controls are ``u = (u1, u2, u3) =
(alpha, v, eta)``: infectivity reduction through non-pharmaceutical
interventions, vaccination rate, and treatment-driven extra recovery rate.

All evaluators broadcast over numpy arrays, so the same functions serve
scalar sanity checks, grid-face assembly in the PDE solvers, and vectorized
Monte-Carlo path updates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "ModelParams",
    "drift",
    "diffusion_sq",
    "half_diffusion_grad",
    "sir3_rhs",
    "control_bounds",
]


@dataclass(frozen=True)
class ModelParams:
    """Epidemiological rates, noise strength, and the control box.

    ``noise_coeff`` is the squared noise scale: the noise intensity on each
    channel is ``sqrt(noise_coeff) * (1 - alpha) * S * I``.  ``eta_max`` is
    stored as an absolute rate (0.25 corresponds to a 25% boost of the unit
    recovery rate used in the reference parameterization).
    """

    b: float = 0.01
    delta: float = 0.01
    beta: float = 3.0
    gamma: float = 1.0
    noise_coeff: float = 0.02
    alpha_max: float = 0.85
    v_max: float = 0.1
    eta_max: float = 0.25

    def __post_init__(self) -> None:
        for name in ("b", "delta", "beta", "gamma", "noise_coeff",
                     "alpha_max", "v_max", "eta_max"):
            value = getattr(self, name)
            if not np.isfinite(value) or value < 0:
                raise ValueError(f"ModelParams.{name} must be finite and >= 0, got {value}")
        if self.alpha_max >= 1.0:
            raise ValueError(f"ModelParams.alpha_max must be < 1, got {self.alpha_max}")


def control_bounds(p: ModelParams) -> np.ndarray:
    """Upper corner of the admissible control box (lower corner is 0)."""
    return np.array([p.alpha_max, p.v_max, p.eta_max])


def drift(x, u, p: ModelParams) -> np.ndarray:
    """Planar drift of the controlled (S, I) dynamics.

    Args:
        x: pair ``(x1, x2)`` of scalars or broadcastable arrays.
        u: control triple ``(u1, u2, u3)``.
        p: model parameters.

    Returns:
        Array with leading axis of size 2: the S- and I-drift components.
    """
    x1, x2 = np.asarray(x[0], dtype=float), np.asarray(x[1], dtype=float)
    u1, u2, u3 = u
    infection = (1.0 - u1) * p.beta * x1 * x2
    f1 = p.b - infection - (u2 + p.delta) * x1
    f2 = infection - (p.gamma + u3 + p.delta) * x2
    return np.stack(np.broadcast_arrays(f1, f2))


def diffusion_sq(x, u, p: ModelParams) -> np.ndarray:
    """Squared noise intensities (sigma_1^2, sigma_2^2); both channels equal."""
    x1, x2 = np.asarray(x[0], dtype=float), np.asarray(x[1], dtype=float)
    u1 = u[0]
    s2 = p.noise_coeff * (1.0 - u1) ** 2 * x1 ** 2 * x2 ** 2
    return np.stack((s2, np.copy(s2)))


def half_diffusion_grad(x, u, p: ModelParams) -> np.ndarray:
    """Analytic gradient of ``sigma_j^2 / 2`` along its own axis.

    Component ``j`` is ``d/dx_j (sigma_j^2 / 2)``, used to assemble the
    effective advection of the flux-form Fokker-Planck operator without a
    numerical differencing error.
    """
    x1, x2 = np.asarray(x[0], dtype=float), np.asarray(x[1], dtype=float)
    u1 = u[0]
    scale = p.noise_coeff * (1.0 - u1) ** 2
    g1 = scale * x1 * x2 ** 2
    g2 = scale * x1 ** 2 * x2
    return np.stack(np.broadcast_arrays(g1, g2))


def sir3_rhs(s, i, r, u, p: ModelParams) -> np.ndarray:
    """Right-hand side of the full 3-compartment controlled SIR ODE.

    The recovered compartment is carried only for trajectory plots; the sum
    of the three components equals ``b - delta * (s + i + r)`` identically.
    """
    s = np.asarray(s, dtype=float)
    i = np.asarray(i, dtype=float)
    r = np.asarray(r, dtype=float)
    u1, u2, u3 = u
    infection = (1.0 - u1) * p.beta * s * i
    ds = p.b - infection - (u2 + p.delta) * s
    di = infection - (p.gamma + u3 + p.delta) * i
    dr = (p.gamma + u3) * i + u2 * s - p.delta * r
    return np.stack(np.broadcast_arrays(ds, di, dr))
