"""Fast self-test battery behind the ``check`` CLI subcommand.

Each check is a cheap, deterministic invariant that a healthy build passes
in well under a minute total; failures print the offending detail.  The
full verification story lives in the test suite - this battery exists so a
deployed binary can vouch for itself.
"""

from __future__ import annotations

import math

import numpy as np

from .cost import CostSpec, control_cost
from .adjoint_solver import solve_adjoint_fields
from .dynamics import ModelParams, control_bounds, sir3_rhs
from .fp_solver import build_axis_operators, chang_cooper_weights, solve_forward
from .grid import ControlTrajectory, GridSpec, make_initial_density, quadrature
from .hamiltonian import HamiltonianCoeffs, minimize_coeffs
from .mc_oracle import EnsembleSpec, em_ensemble, histogram_density, make_gaussian_sampler
from .sqh import tau_norm

__all__ = ["run_battery"]


def _check_quadrature():
    g = GridSpec(nx=21, nt=2, T=1.0)
    x1, x2 = g.mesh()
    assert abs(quadrature(np.ones_like(x1), g) - 1.0) < 1e-12
    assert abs(quadrature(x1, g) - 0.5) < 1e-12
    assert abs(quadrature(x1 * x2, g) - 0.25) < 1e-12


def _check_initial_density():
    g = GridSpec(nx=41, nt=2, T=1.0)
    f0 = make_initial_density((0.99, 0.01), 0.025, g)
    assert abs(quadrature(f0, g) - 1.0) < 1e-12
    assert f0.min() >= 0.0


def _check_chang_cooper_limits():
    d0 = chang_cooper_weights(np.array([0.0]), np.array([1.0]), 0.1)
    assert abs(d0[0] - 0.5) < 1e-12
    d1 = chang_cooper_weights(np.array([10.0]), np.array([1.0]), 0.1)
    assert abs(d1[0] - (1.0 - 1.0 / math.expm1(1.0))) < 1e-12
    big = chang_cooper_weights(np.array([1e6, -1e6]), np.array([1.0, 1.0]), 1.0)
    assert big[0] < 1e-5 and big[1] > 1.0 - 1e-5


def _check_conservation_positivity():
    g = GridSpec(nx=21, nt=9, T=1.0)
    p = ModelParams()
    f0 = make_initial_density((0.9, 0.1), 0.02, g)
    f = solve_forward(f0, ControlTrajectory.zeros(g), p, g)
    mass = f.mass()
    assert np.max(np.abs(mass - 1.0)) < 1e-10
    assert f.values.min() >= 0.0


def _check_adjoint_constant():
    g = GridSpec(nx=15, nt=5, T=1.0)
    p = ModelParams()
    K = np.full((g.nx, g.nx), 0.7)
    q = solve_adjoint_fields(ControlTrajectory.zeros(g), np.zeros((g.nx, g.nx)), K, p, g)
    assert np.max(np.abs(q.values + 0.7)) < 1e-12


def _check_minimizer():
    rng = np.random.default_rng(7)
    p = ModelParams()
    bounds = control_bounds(p)
    for _ in range(50):
        coeffs = HamiltonianCoeffs(lin=rng.normal(size=3), quad=rng.normal(size=3),
                                   offset=0.0)
        u_prev = rng.uniform(0, 1, size=3) * bounds
        eps = 10.0 ** rng.uniform(-3, 2)
        w_star = minimize_coeffs(coeffs, u_prev, eps, bounds)

        def h_eps(w):
            return coeffs.value(w) + eps * float(((np.asarray(w) - u_prev) ** 2).sum())

        best = h_eps(w_star)
        for _ in range(40):
            w = rng.uniform(0, 1, size=3) * bounds
            assert best <= h_eps(w) + 1e-10


def _check_tau_norm():
    g = GridSpec(nx=3, nt=81, T=10.0)
    a = np.zeros((g.nt, 3))
    b = np.zeros((g.nt, 3))
    b[:, 0] = 1.0
    assert abs(tau_norm(a, b, g) - 10.0) < 1e-12


def _check_cost_values():
    spec = CostSpec(beta1=0.2, beta2=0.1)
    assert control_cost((0.0, 0.0, 0.0), spec) == 0.0
    assert abs(control_cost((1.0, 1.0, 1.0), spec) - 0.75) < 1e-12


def _check_sir_conservation():
    p = ModelParams()
    rng = np.random.default_rng(3)
    for _ in range(20):
        s, i, r = rng.uniform(0, 1, size=3)
        u = rng.uniform(0, 1, size=3) * control_bounds(p)
        total = sir3_rhs(s, i, r, u, p).sum()
        assert abs(total - (p.b - p.delta * (s + i + r))) < 1e-12


def _check_mc_determinism():
    g = GridSpec(nx=11, nt=5, T=0.5)
    p = ModelParams()
    sampler = make_gaussian_sampler((0.5, 0.5), 0.01, g.x_lo, g.x_hi)
    spec = EnsembleSpec(n_paths=500, dt_em=g.dt_control / 2, seed=42)
    a = em_ensemble(sampler, ControlTrajectory.zeros(g), p, spec, [g.T], g)
    b = em_ensemble(sampler, ControlTrajectory.zeros(g), p, spec, [g.T], g)
    assert np.array_equal(a.snapshots[g.T], b.snapshots[g.T])
    hist = histogram_density(a.snapshots[g.T], g)
    assert abs(quadrature(hist, g) - 1.0) < 1e-12


def _check_cfl_positive():
    g = GridSpec(nx=21, nt=5, T=1.0)
    p = ModelParams()
    op1, op2 = build_axis_operators(np.zeros(3), p, g)
    assert op1.dt_stable > 0 and op2.dt_stable > 0


_CHECKS = [
    ("quadrature exactness", _check_quadrature),
    ("initial density normalization", _check_initial_density),
    ("face weight limits", _check_chang_cooper_limits),
    ("forward conservation and positivity", _check_conservation_positivity),
    ("backward constant solution", _check_adjoint_constant),
    ("box minimizer optimality", _check_minimizer),
    ("control update norm", _check_tau_norm),
    ("control cost values", _check_cost_values),
    ("compartment flow conservation", _check_sir_conservation),
    ("path ensemble determinism", _check_mc_determinism),
    ("stability bound assembly", _check_cfl_positive),
]


def run_battery(verbose: bool = True) -> int:
    """Run every check; returns the number of failures."""
    failures = 0
    for name, fn in _CHECKS:
        try:
            fn()
        except Exception as exc:  # report and keep going
            failures += 1
            if verbose:
                print(f"[fail] {name}: {exc}")
        else:
            if verbose:
                print(f"[ok] {name}")
    if verbose:
        print(f"{len(_CHECKS) - failures}/{len(_CHECKS)} checks passed")
    return failures
