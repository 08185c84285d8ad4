"""Backward costate solver: exact cases, upwinding, maximum principle."""

import math

import numpy as np
import pytest

from conftest import smooth_field
from fpepi.adjoint_solver import advective_term, solve_adjoint, solve_adjoint_fields
from fpepi.cost import CostSpec
from fpepi.dynamics import ModelParams, drift
from fpepi.fp_solver import CflError
from fpepi.grid import ControlTrajectory, GridSpec


def test_constant_terminal_cost_gives_constant_costate(reference_model):
    g = GridSpec(nx=21, nt=9, T=1.0)
    K = np.full((g.nx, g.nx), 0.37)
    q = solve_adjoint_fields(ControlTrajectory.zeros(g), np.zeros((g.nx, g.nx)),
                             K, reference_model, g)
    assert np.max(np.abs(q.values + 0.37)) < 1e-12


def test_pure_time_integration_of_running_cost():
    # F = 0, sigma = 0, G = 1, K = 0: the costate is -(T - t) exactly.
    g = GridSpec(nx=11, nt=9, T=2.0)
    p = ModelParams(b=0, delta=0, beta=0, gamma=0, noise_coeff=0)
    G = np.ones((g.nx, g.nx))
    q = solve_adjoint_fields(ControlTrajectory.zeros(g), G, np.zeros_like(G), p, g)
    times = g.times()
    for k in range(g.nt):
        assert np.max(np.abs(q.values[k] + (g.T - times[k]))) < 1e-12


def test_terminal_slice_matches_susceptible_surplus(reference_model):
    g = GridSpec(nx=41, nt=5, T=1.0)
    cost = CostSpec(running="zero", terminal="neg_susceptible_surplus:0.3")
    q = solve_adjoint(ControlTrajectory.zeros(g), cost, reference_model, g)
    x1, _ = g.mesh()
    assert np.array_equal(q.values[-1], np.maximum(x1 - 0.3, 0.0))


class TestAdvectiveTerm:
    def test_constant_field_gives_zero(self, reference_model):
        g = GridSpec(nx=15, nt=3, T=1.0)
        q = np.full((g.nx, g.nx), 3.3)
        out = advective_term(q, (0.1, 0.0, 0.0), reference_model, g)
        assert np.array_equal(out, np.zeros_like(q))

    def test_linear_field_constant_drift(self):
        # F = (a, 0); on interior nodes one-sided differences of a linear
        # field are exact.  The mirrored boundary ghosts enforce a zero
        # normal derivative, so boundary rows are excluded on the F1 axis.
        a, s = 0.7, 1.3
        p = ModelParams(b=a, delta=0, beta=0, gamma=0, noise_coeff=0)
        g = GridSpec(nx=17, nt=3, T=1.0)
        x1, _ = g.mesh()
        q = s * x1
        out = advective_term(q, (0.0, 0.0, 0.0), p, g)
        assert np.allclose(out[1:-1, :], a * s, atol=1e-12)

    def test_upwind_error_first_order_against_central_oracle(self):
        p = ModelParams(b=0.0, delta=0.0, beta=3.0, gamma=1.0, noise_coeff=0.0)
        u = (0.1, 0.02, 0.05)
        errors = []
        for nx in (21, 41, 81):
            g = GridSpec(nx=nx, nt=3, T=1.0)
            x1, x2 = g.mesh()
            q = np.sin(2.1 * x1 + 0.3) * np.cos(1.7 * x2) + 0.5 * x1 * x2
            F = drift((x1, x2), u, p)
            qp = np.pad(q, 1, mode="reflect")
            c1 = (qp[2:, 1:-1] - qp[:-2, 1:-1]) / (2 * g.h)
            c2 = (qp[1:-1, 2:] - qp[1:-1, :-2]) / (2 * g.h)
            central = F[0] * c1 + F[1] * c2
            upwind = advective_term(q, u, p, g)
            errors.append(np.abs(upwind - central)[1:-1, 1:-1].max())
        slopes = [math.log2(errors[i] / errors[i + 1]) for i in range(2)]
        assert all(0.8 <= s <= 1.2 for s in slopes), (errors, slopes)


def test_sign_comparison_principle(reference_model):
    # nonnegative running and terminal costs force a nonpositive costate
    g = GridSpec(nx=21, nt=17, T=2.0)
    cost = CostSpec(running="linear_in_i:1.5", terminal="zero")
    q = solve_adjoint(ControlTrajectory.zeros(g), cost, reference_model, g)
    assert q.values.max() <= 1e-14


def test_linearity_in_costs(reference_model):
    g = GridSpec(nx=17, nt=9, T=1.0)
    u = ControlTrajectory.zeros(g)
    G1 = np.abs(smooth_field(g, 5)) + 0.1
    G2 = np.abs(smooth_field(g, 6))
    K1 = smooth_field(g, 7)
    K2 = smooth_field(g, 8)
    q1 = solve_adjoint_fields(u, G1, K1, reference_model, g).values
    q2 = solve_adjoint_fields(u, G2, K2, reference_model, g).values
    q12 = solve_adjoint_fields(u, G1 + G2, K1 + K2, reference_model, g).values
    assert np.max(np.abs(q12 - (q1 + q2))) < 1e-10


def test_strict_substeps_raise(reference_model):
    g = GridSpec(nx=21, nt=5, T=1.0)
    cost = CostSpec(running="linear_in_i:1.5", terminal="zero")
    with pytest.raises(CflError):
        solve_adjoint(ControlTrajectory.zeros(g), cost, reference_model, g,
                      auto_substeps=False)


def test_field_shape_validation(reference_model):
    g = GridSpec(nx=9, nt=3, T=1.0)
    with pytest.raises(ValueError):
        solve_adjoint_fields(ControlTrajectory.zeros(g), np.zeros((3, 3)),
                             np.zeros((g.nx, g.nx)), reference_model, g)
