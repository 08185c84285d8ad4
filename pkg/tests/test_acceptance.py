"""Acceptance gate: one test per criterion, each printing pass/fail lines.

Run with ``pytest tests/test_acceptance.py -v -s`` to see every line.

Several criteria are expected to fail at the reference resolution and are
asserted here exactly as stated rather than loosened; the failure messages
carry the measured values.  The analysis lives in the project notes: the
density transport scheme is formally first-order in advection-dominated
regions, so pointwise density comparisons against the path-ensemble oracle
(criterion 10 and the related objective cross-check) sit far above their
stated tolerances while converging under refinement; the ensemble mean of
the infected fraction genuinely peaks near t=1.25 under the wide initial
spread (criterion 2, confirmed independently by the path ensemble); and the
iteration's stopping rule at kappa=1e-3 halts while a few early time nodes
are still creeping toward the pointwise Hamiltonian minimizer (parts of
criterion 6, PMP spot check), while the terminal-reward scenario's
documented control shape is unreachable by a monotone-descent method from
a zero start under the configured control-cost weights (criterion 6,
scenario 3).
"""

import math
import os

import numpy as np
import pytest

from fpepi.cli import main as cli_main
from fpepi.cost import evaluate_J
from fpepi.dynamics import control_bounds
from fpepi.fp_solver import solve_forward
from fpepi.grid import AdjointField, ControlTrajectory, DensityField, GridSpec, make_initial_density
from fpepi.hamiltonian import eval_H, extract_coeffs, minimize_coeffs
from fpepi.adjoint_solver import solve_adjoint, solve_adjoint_fields
from fpepi.mc_oracle import (EnsembleSpec, em_ensemble, histogram_density,
                             l1_distance, make_gaussian_sampler, rk4_sir3)
from fpepi.scenario import preset
from fpepi.sqh import run_sqh

from conftest import smooth_field

SCENARIOS = ("scenario1", "scenario2", "scenario3")


def _report(name, checks):
    for label, ok, detail in checks:
        print(f"[{name}] {'PASS' if ok else 'FAIL'} {label}: {detail}")
    failed = [(label, detail) for label, ok, detail in checks if not ok]
    assert not failed, f"{name}: " + "; ".join(f"{l} ({d})" for l, d in failed)


@pytest.fixture(scope="module")
def scenario_results():
    out = {}
    for name in SCENARIOS:
        out[name] = run_sqh(preset(name))
    return out


@pytest.fixture(scope="module")
def uncontrolled_density():
    cfg = preset("uncontrolled")
    f0 = make_initial_density(cfg.init_center, cfg.init_variance, cfg.grid)
    return solve_forward(f0, ControlTrajectory.zeros(cfg.grid), cfg.model, cfg.grid)


@pytest.fixture(scope="module")
def mc_ensemble():
    cfg = preset("uncontrolled")
    g = cfg.grid
    sampler = make_gaussian_sampler(cfg.init_center, cfg.init_variance, g.x_lo, g.x_hi)
    spec = EnsembleSpec(n_paths=100_000, dt_em=g.dt_control / 10, seed=0,
                        boundary_policy="reflect")
    return em_ensemble(sampler, ControlTrajectory.zeros(g), cfg.model, spec, [5.0], g)


def test_criterion_01_conservation_and_positivity(scenario_results, uncontrolled_density):
    checks = []
    fields = {"uncontrolled": uncontrolled_density}
    fields.update({name: scenario_results[name].density for name in SCENARIOS})
    for name, field in fields.items():
        drift_max = float(np.abs(field.mass() - 1.0).max())
        vmin = float(field.values.min())
        checks.append((f"{name} mass", drift_max <= 1e-8, f"max |mass-1| = {drift_max:.3e}"))
        checks.append((f"{name} positivity", vmin >= 0.0, f"min value = {vmin:.3e}"))
    _report("criterion 1", checks)


def test_criterion_02_uncontrolled_baseline(uncontrolled_density):
    cfg = preset("uncontrolled")
    g = cfg.grid
    sir = rk4_sir3(0.99, 0.01, 0.0, ControlTrajectory.zeros(g), cfg.model, g)
    k_ode = int(sir[:, 1].argmax())
    ode_peak, ode_t = float(sir[k_ode, 1]), float(g.times()[k_ode])

    mean_i = uncontrolled_density.mean_state()[:, 1]
    k_fp = int(mean_i.argmax())
    fp_peak, fp_t = float(mean_i[k_fp]), float(g.times()[k_fp])

    checks = [
        ("ode peak value", 0.25 <= ode_peak <= 0.35, f"I_max = {ode_peak:.4f}"),
        ("ode peak time", 2.5 <= ode_t <= 3.5, f"t_peak = {ode_t:.4f}"),
        ("fp mean peak value", 0.25 <= fp_peak <= 0.35, f"E[I]_max = {fp_peak:.4f}"),
        ("fp mean peak time", 2.5 <= fp_t <= 3.5,
         f"t_peak = {fp_t:.4f} (ensemble average of staggered outbreak times "
         "peaks early under the wide initial spread; the path-ensemble oracle "
         "agrees, see notes)"),
    ]
    _report("criterion 2", checks)


def test_criterion_03_uncontrolled_terminal_mass(uncontrolled_density):
    g = uncontrolled_density.grid
    corner = uncontrolled_density.region_mass(g.nt - 1, (0.0, 0.25), (0.0, 0.25))
    _report("criterion 3", [
        ("corner mass at horizon", corner >= 0.8, f"mass in [0,0.25]^2 = {corner:.4f}"),
    ])


def test_criterion_04_monotone_descent(scenario_results):
    checks = []
    for name in SCENARIOS:
        trace = scenario_results[name].trace
        mu = preset(name).sqh.mu
        ok = True
        prev = trace.initial_J
        worst = -math.inf
        for it in trace.iterations:
            if it.accepted:
                slack = (it.J - prev) + mu * it.tau
                worst = max(worst, slack)
                if slack > 0:
                    ok = False
                prev = it.J
        checks.append((name, ok, f"max (dJ + mu*tau) over accepted = {worst:.3e}"))
    _report("criterion 4", checks)


def test_criterion_05_termination(scenario_results):
    checks = []
    for name in SCENARIOS:
        trace = scenario_results[name].trace
        n = trace.accepted_count()
        ok = trace.status == "converged_tau" and n < 150
        checks.append((name, ok, f"status={trace.status}, accepted={n}"))
    _report("criterion 5", checks)


def test_criterion_06_scenario_shapes(scenario_results):
    checks = []
    g = preset("scenario1").grid
    times = g.times()

    # scenario 1: treatment pinned at its bound on an initial segment >= 1
    r1 = scenario_results["scenario1"]
    eta_max = preset("scenario1").model.eta_max
    at_bound = r1.control.values[:, 2] >= 0.99 * eta_max
    run_end = 0
    while run_end < g.nt and at_bound[run_end]:
        run_end += 1
    initial_run = times[run_end - 1] if run_end > 0 else -1.0
    checks.append((
        "scenario1 treatment at bound from t=0",
        run_end > 0 and initial_run >= 1.0,
        f"eta(0)={r1.control.values[0, 2]:.4f} vs bound {eta_max}, "
        f"at-bound run from t=0 has length {max(initial_run, 0):.3f} "
        f"(bound holds on [{times[at_bound.argmax()]:.3f}, "
        f"{times[len(at_bound) - 1 - at_bound[::-1].argmax()]:.3f}]; the "
        "stopping tolerance halts the first node mid-creep, see notes)",
    ))

    # scenario 2: vaccination maxed at the controlled infection peak, and
    # the worst-time mass above the hospital threshold smaller than scenario 1
    r2 = scenario_results["scenario2"]
    v_max = preset("scenario2").model.v_max
    mean_i2 = r2.density.mean_state()[:, 1]
    k_peak2 = int(mean_i2.argmax())
    v_at_peak = float(r2.control.values[k_peak2, 1])
    checks.append((
        "scenario2 vaccination maxed at peak",
        v_at_peak >= 0.999 * v_max,
        f"v(t_peak={times[k_peak2]:.3f}) = {v_at_peak:.4f} vs bound {v_max}",
    ))
    worst1 = max(r1.density.region_mass(k, None, (0.15, 1.0)) for k in range(g.nt))
    worst2 = max(r2.density.region_mass(k, None, (0.15, 1.0)) for k in range(g.nt))
    checks.append((
        "scenario2 flattens mass above threshold",
        worst2 < worst1,
        f"worst mass above I=0.15: {worst2:.4f} (scenario 2) vs {worst1:.4f} (scenario 1)",
    ))

    # scenario 3: strong NPIs early, no vaccination, split terminal mass
    r3 = scenario_results["scenario3"]
    alpha_max = preset("scenario3").model.alpha_max
    strong = r3.control.values[:, 0] >= 0.9 * alpha_max
    checks.append((
        "scenario3 strong NPIs on an initial segment",
        bool(strong[0]),
        f"alpha(0) = {r3.control.values[0, 0]:.4f} vs 0.9*bound = "
        f"{0.9 * alpha_max:.4f} (zero control is a pointwise-minimum fixed "
        "point here: the configured control-cost weights exceed the marginal "
        "terminal reward, see notes)",
    ))
    checks.append((
        "scenario3 vaccination disabled",
        float(np.abs(r3.control.values[:, 1]).max()) == 0.0,
        f"max |v| = {np.abs(r3.control.values[:, 1]).max():.2e}",
    ))
    m3 = r3.density.region_mass(g.nt - 1, (0.3, 1.0), None)
    checks.append((
        "scenario3 terminal susceptible-surplus mass",
        0.0 < m3 < 0.5,
        f"terminal mass in {{S >= 0.3}} = {m3:.4f}",
    ))
    _report("criterion 6", checks)


def test_criterion_07_minimizer_grid_oracle():
    cfg = preset("scenario1")
    g = GridSpec(nx=41, nt=2, T=10.0)
    p, cost = cfg.model, cfg.cost
    bounds = control_bounds(p)
    grids = [np.linspace(0.0, b, 200) for b in bounds]
    cells = np.array([b / 199 for b in bounds])
    rng = np.random.default_rng(77)

    worst_gap = -math.inf
    worst_cell = 0.0
    for trial in range(100):
        f_slice = np.exp(smooth_field(g, 1000 + trial))
        q_slice = smooth_field(g, 2000 + trial, amplitude=2.0)
        f = DensityField(np.stack([f_slice, f_slice]), g)
        q = AdjointField(np.stack([q_slice, q_slice]), g)
        coeffs = extract_coeffs(0, f, q, cost, p, g)
        u_prev = rng.uniform(0, 1, 3) * bounds
        eps = 10.0 ** rng.uniform(-3, 2)

        w_star = minimize_coeffs(coeffs, u_prev, eps, bounds)
        phis = [
            (coeffs.quad[i] + eps) * grids[i] ** 2
            + (coeffs.lin[i] - 2 * eps * u_prev[i]) * grids[i]
            for i in range(3)
        ]
        h_grid = (phis[0][:, None, None] + phis[1][None, :, None]
                  + phis[2][None, None, :])
        idx = np.unravel_index(np.argmin(h_grid), h_grid.shape)
        w_grid = np.array([grids[i][idx[i]] for i in range(3)])

        def h_eps(w):
            return coeffs.value(w) + eps * float(((w - u_prev) ** 2).sum())

        worst_cell = max(worst_cell, float(np.max(np.abs(w_star - w_grid) - cells)))
        worst_gap = max(worst_gap, h_eps(w_star) - h_eps(w_grid))
        if trial % 10 == 0:
            # independent route: direct spatial-integral evaluation
            direct_star = eval_H(0, f, q, tuple(w_star), cost, p, g) \
                + eps * float(((w_star - u_prev) ** 2).sum())
            direct_grid = eval_H(0, f, q, tuple(w_grid), cost, p, g) \
                + eps * float(((w_grid - u_prev) ** 2).sum())
            assert direct_star <= direct_grid + 1e-9

    _report("criterion 7", [
        ("within one grid cell", worst_cell <= 1e-12,
         f"worst overshoot beyond one cell = {worst_cell:.3e}"),
        ("closed form at least as good", worst_gap <= 1e-12,
         f"worst H_eps(closed) - H_eps(grid) = {worst_gap:.3e}"),
    ])


def _segment_controls(rng, bounds, n_seg=8):
    return rng.uniform(0, 1, size=(n_seg, 3)) * bounds[None, :]


def _sample_segments(seg_values, g):
    idx = np.minimum((g.times() / g.T * seg_values.shape[0]).astype(int),
                     seg_values.shape[0] - 1)
    return seg_values[idx]


def _lemma_mismatch(cfg, g, seg_u, seg_ub):
    p, cost = cfg.model, cfg.cost
    f0 = make_initial_density(cfg.init_center, cfg.init_variance, g)
    u = _sample_segments(seg_u, g)
    ub = _sample_segments(seg_ub, g)
    f = solve_forward(f0, u, p, g)
    fb = solve_forward(f0, ub, p, g)
    q = solve_adjoint(u, cost, p, g)
    dJ = evaluate_J(f, u, cost, g) - evaluate_J(fb, ub, cost, g)
    dH = np.array([
        eval_H(k, fb, q, tuple(u[k]), cost, p, g)
        - eval_H(k, fb, q, tuple(ub[k]), cost, p, g)
        for k in range(g.nt)
    ])
    dH_int = float(np.trapezoid(dH, g.times()))
    return abs(dJ - dH_int) / max(abs(dJ), abs(dH_int), 1e-12)


def test_criterion_08_objective_hamiltonian_identity():
    cfg = preset("scenario1")
    rng = np.random.default_rng(2024)
    bounds = control_bounds(cfg.model)
    pairs = [(_segment_controls(rng, bounds), _segment_controls(rng, bounds))
             for _ in range(10)]
    g_coarse = cfg.grid
    g_fine = GridSpec(nx=81, nt=161, T=g_coarse.T)

    rel_coarse = [_lemma_mismatch(cfg, g_coarse, su, sb) for su, sb in pairs]
    rel_fine = [_lemma_mismatch(cfg, g_fine, su, sb) for su, sb in pairs]
    worst = max(rel_coarse)
    checks = [
        ("pairwise mismatch within 5%", worst <= 0.05,
         f"worst relative mismatch = {worst:.3f}, mean = {np.mean(rel_coarse):.3f} "
         "(the forward flux scheme and the non-divergence backward scheme are "
         "deliberately not discrete transposes; the gap is first-order, see notes)"),
        ("mismatch decreases under refinement",
         float(np.mean(rel_fine)) < float(np.mean(rel_coarse)),
         f"mean mismatch {np.mean(rel_coarse):.3f} -> {np.mean(rel_fine):.3f}"),
    ]
    _report("criterion 8", checks)


def test_criterion_09_adjoint_exactness_and_linearity():
    cfg = preset("uncontrolled")
    g, p = cfg.grid, cfg.model
    u = ControlTrajectory.zeros(g)

    K_const = np.full((g.nx, g.nx), 0.37)
    q = solve_adjoint_fields(u, np.zeros((g.nx, g.nx)), K_const, p, g)
    const_err = float(np.abs(q.values + 0.37).max())

    G1 = np.abs(smooth_field(g, 5)) + 0.1
    G2 = np.abs(smooth_field(g, 6))
    K1 = smooth_field(g, 7)
    K2 = smooth_field(g, 8)
    q1 = solve_adjoint_fields(u, G1, K1, p, g).values
    q2 = solve_adjoint_fields(u, G2, K2, p, g).values
    q12 = solve_adjoint_fields(u, G1 + G2, K1 + K2, p, g).values
    lin_err = float(np.abs(q12 - (q1 + q2)).max())

    _report("criterion 9", [
        ("constant terminal cost", const_err <= 1e-12, f"max |q + c| = {const_err:.2e}"),
        ("linearity in costs", lin_err <= 1e-10, f"max deviation = {lin_err:.2e}"),
    ])


def test_criterion_10_fp_vs_path_ensemble(uncontrolled_density, mc_ensemble):
    g = uncontrolled_density.grid
    k5 = g.time_index(5.0)
    hist = histogram_density(mc_ensemble.snapshots[5.0], g)
    dist = l1_distance(uncontrolled_density.values[k5], hist, g)

    fp_mean = float(uncontrolled_density.mean_state()[k5, 1])
    em_mean = float(mc_ensemble.mean[k5, 1])
    se = float(mc_ensemble.std_error(k5)[1])
    gap = abs(em_mean - fp_mean)

    _report("criterion 10", [
        ("L1 distance at t=5", dist <= 0.15,
         f"L1 = {dist:.3f} (first-order transport smearing at h=1/40 "
         "dominates; the distance shrinks under grid refinement, see notes)"),
        ("ensemble mean within 3 standard errors", gap <= 3 * se,
         f"|E_em[I] - E_fp[I]| = {gap:.5f} vs 3*SE = {3 * se:.5f} "
         "(the grid bias of the density solver exceeds the statistical "
         "error of 1e5 paths by two orders of magnitude, see notes)"),
    ])


def test_objective_against_path_ensemble(uncontrolled_density, mc_ensemble):
    # cross-check of the running-cost quadrature: the linear-in-I objective
    # at zero control equals 1.5 * integral of E[I](t) dt on both routes
    cfg = preset("scenario1")
    g = cfg.grid
    J_fp = evaluate_J(uncontrolled_density, ControlTrajectory.zeros(g), cfg.cost, g)
    J_mc = 1.5 * float(np.trapezoid(mc_ensemble.mean[:, 1], g.times()))
    rel = abs(J_fp - J_mc) / abs(J_mc)
    _report("objective cross-check", [
        ("relative difference within 5%", rel <= 0.05,
         f"J_fp = {J_fp:.4f}, J_mc = {J_mc:.4f}, rel = {rel:.3f} "
         "(same first-order density bias as criterion 10, see notes)"),
    ])


def test_pmp_pointwise_optimality_at_convergence(scenario_results):
    # at the accepted stopping point the control should minimize the final
    # Hamiltonian pointwise up to 1e-3*(1+|H|) against sampled alternatives
    res = scenario_results["scenario1"]
    cfg = preset("scenario1")
    g, p, cost = cfg.grid, cfg.model, cfg.cost
    bounds = control_bounds(p)
    rng = np.random.default_rng(11)
    worst_slack, worst_k = -math.inf, -1
    for k in range(g.nt):
        coeffs = extract_coeffs(k, res.density, res.adjoint, cost, p, g)
        h_star = coeffs.value(res.control.values[k])
        tol = 1e-3 * (1.0 + abs(h_star))
        for _ in range(200):
            w = rng.uniform(0, 1, 3) * bounds
            slack = h_star - coeffs.value(w) - tol
            if slack > worst_slack:
                worst_slack, worst_k = slack, k
    _report("pmp spot check", [
        ("pointwise minimality within tolerance", worst_slack <= 0.0,
         f"worst violation = {worst_slack:.4e} at time index {worst_k} "
         "(the stopping rule halts while early nodes still creep toward the "
         "pointwise minimizer, see notes)"),
    ])


def test_criterion_11_deterministic_artifacts(tmp_path):
    def run_twice(args_builder):
        outputs = []
        for tag in ("a", "b"):
            out = tmp_path / f"{args_builder.__name__}_{tag}"
            code = cli_main(args_builder(str(out)))
            assert code == 0
            blobs = {}
            for name in sorted(os.listdir(out)):
                if name.endswith(".csv") or name.endswith(".txt"):
                    blobs[name] = (out / name).read_bytes()
            outputs.append(blobs)
        return outputs

    def baseline_args(out):
        return ["baseline", "uncontrolled", "--out", out, "--no-figures"]

    cfg_path = tmp_path / "reduced.cfg"
    cfg_path.write_text(
        "base = scenario1\ngrid.nx = 21\ngrid.nt = 21\ngrid.T = 5.0\n"
        "sqh.k_max = 6\n")

    def scenario_args(out):
        return ["run", str(cfg_path), "--out", out, "--no-figures",
                "--snapshots", "0,2.5,5"]

    def mc_args(out):
        return ["validate-mc", str(cfg_path), "--paths", "3000",
                "--seed", "9", "--time", "2.5", "--out", out]

    checks = []
    for builder, label in ((baseline_args, "baseline uncontrolled"),
                           (scenario_args, "reduced scenario run"),
                           (mc_args, "path-ensemble validation")):
        a, b = run_twice(builder)
        same = a.keys() == b.keys() and all(a[k] == b[k] for k in a)
        checks.append((label, same, f"{len(a)} artifacts byte-compared"))
    _report("criterion 11", checks)
