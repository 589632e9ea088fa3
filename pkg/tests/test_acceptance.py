"""Acceptance gate: nine end-to-end criteria with pinned tolerances.

Each test prints exactly one line

    [criterion N] <name>: PASS|FAIL (<measured quantities>, <elapsed> s < <budget> s)

through the capture barrier, so the verdict is visible in any pytest run.
Every criterion also asserts its runtime budget.
"""

import json
import math
import subprocess
import sys
import time

import numpy as np

import oracles
from conftest import build_random_instance, random_state
from gasnet.estimate import (
    EstimationNlp,
    EstimationOptions,
    build_estimation_problem,
    solve_estimation,
)
from gasnet.network import network_from_dict, network_to_dict, save_network
from gasnet.nondim import (
    NondimProfiles,
    default_scales,
    nondimensionalize,
    nondimensionalize_network,
)
from gasnet.refinement import check_window, refine_graph, segment_count
from gasnet.report import read_friction_csv
from gasnet.simulate import (
    NoiseSpec,
    inject_noise,
    simulate_network,
    steady_state_solve,
)
from gasnet.synthetic import (
    paper_scale_mask,
    paper_scale_network,
    paper_scale_profiles,
    six_node_network,
    six_node_profiles,
)
from gasnet.timeseries import MeasurementSet, write_profiles


def _report(capsys, num, name, ok, detail):
    with capsys.disabled():
        print(
            "\n[criterion %d] %s: %s (%s)"
            % (num, name, "PASS" if ok else "FAIL", detail)
        )
    assert ok, "[criterion %d] %s: %s" % (num, name, detail)


def _six_node_truth(n_steps=24):
    """Simulated truth plus exact full-metering measurements for twins."""
    net = six_node_network()
    prof = six_node_profiles(n_steps)
    state, refined, dae = simulate_network(net, prof)
    scales = refined.scales
    _, ndprof = nondimensionalize(net, prof, scales)
    b = net.n_slack
    dens, wd = {}, {}
    for jid in net.nonslack_ids():
        row = net.junction_index[jid] - b
        dens[jid] = state.density[row] * scales.density
        wd[jid] = ndprof.withdrawal[row] * scales.flux
    measurements = MeasurementSet(
        dt_seconds=state.grid.dt * scales.time, density=dens, withdrawal=wd
    )
    est_prof = NondimProfiles(
        grid=ndprof.grid,
        supply=ndprof.supply,
        withdrawal=np.zeros_like(ndprof.withdrawal),
        ratio=dict(ndprof.ratio),
    )
    return net, state, refined, ndprof, est_prof, measurements


def test_criterion_1_residual_matrix_vs_scalar(capsys):
    """Vectorized residual equals the scalar-loop oracle on random networks."""
    budget, tol = 10.0, 1e-12
    start = time.perf_counter()
    rng = np.random.default_rng(101)
    worst = 0.0
    for i in range(50):
        net, refined, ndprof, dae = build_random_instance(rng, 3 + i % 6)
        density, flux, withdrawal, friction = random_state(rng, dae)
        for smooth in (False, True):
            got = dae.residual(density, flux, withdrawal, friction, smooth=smooth)
            want = oracles.full_residual(
                refined, dae.alpha_lo, dae.alpha_hi, dae.supply,
                density, flux, withdrawal, friction, ndprof.grid.dt, smooth,
            )
            worst = max(worst, float(np.max(np.abs(got - want))))
    elapsed = time.perf_counter() - start
    ok = worst < tol and elapsed < budget
    _report(
        capsys, 1, "matrix residual vs scalar oracle, 50 networks", ok,
        "max |diff| %.2e < %g, %.1f s < %g s" % (worst, tol, elapsed, budget),
    )


def test_criterion_2_steady_single_pipe_closed_form(capsys):
    """Newton steady state matches the analytic single-pipe density drop."""
    budget, tol = 1.0, 1e-10
    start = time.perf_counter()
    rng = np.random.default_rng(202)
    worst = 0.0
    for _ in range(20):
        L = rng.uniform(10e3, 80e3)
        D = rng.uniform(0.3, 1.0)
        lam = rng.uniform(0.008, 0.02)
        doc = {
            "gas": {"sound_speed": 377.0},
            "junctions": [
                {"id": "a", "kind": "slack"},
                {
                    "id": "b", "kind": "non-slack",
                    "density_min": 1.0, "density_max": 80.0,
                },
            ],
            "pipes": [
                {
                    "id": "p", "from": "a", "to": "b",
                    "length": L, "diameter": D, "friction": lam,
                }
            ],
        }
        net = network_from_dict(doc)
        scales = default_scales(net.gas)
        refined = refine_graph(
            nondimensionalize_network(net, scales), 1.5 * L / scales.length
        )
        assert refined.n_edges == 1
        coef = refined.length[0] * scales.length * lam / refined.diameter[0]
        rho_in = rng.uniform(0.75, 1.1)
        frac = rng.uniform(0.05, 0.5)
        phi = float(rng.choice([-1.0, 1.0])) * math.sqrt(frac * rho_in**2 / coef)
        area = math.pi * D * D / 4.0
        rho, flux = steady_state_solve(
            refined, np.array([rho_in]), np.array([phi * area])
        )
        expected = oracles.steady_edge_rho_out(rho_in, coef, phi)
        worst = max(worst, abs(rho[0] - expected), abs(flux[0] - phi))
    elapsed = time.perf_counter() - start
    ok = worst < tol and elapsed < budget
    _report(
        capsys, 2, "single-pipe steady state vs closed form", ok,
        "max |diff| %.2e < %g, %.2f s < %g s" % (worst, tol, elapsed, budget),
    )


def test_criterion_3_period_mass_conservation(capsys):
    """Supplied mass equals withdrawn mass over the period on a solved run."""
    budget, tol = 30.0, 1e-8
    start = time.perf_counter()
    net = six_node_network()
    state, refined, dae = simulate_network(net, six_node_profiles())
    supplied, withdrawn = oracles.period_mass_totals(
        refined, dae.alpha_lo, dae.alpha_hi, dae.supply,
        state.density, state.flux, dae.known_withdrawal, state.grid.dt,
    )
    rel = abs(supplied - withdrawn) / max(abs(withdrawn), 1e-300)
    elapsed = time.perf_counter() - start
    ok = rel < tol and elapsed < budget
    _report(
        capsys, 3, "period mass conservation, six-node transient", ok,
        "relative defect %.2e < %g, %.1f s < %g s" % (rel, tol, elapsed, budget),
    )


def test_criterion_4_refinement_window(capsys):
    """Chosen segment counts keep L/n inside the admissible spacing window."""
    budget = 1.0
    start = time.perf_counter()
    rng = np.random.default_rng(404)
    checked = 0
    for _ in range(1000):
        L = 10.0 ** rng.uniform(-2, 6)
        delta = 10.0 ** rng.uniform(-2, 6)
        n = segment_count(L, delta)
        check_window(L, delta, n)  # raises on violation
        seg = L / n
        lower = delta * L / (delta + L)
        slack = 1e-12 * max(1.0, delta)  # documented boundary slack
        assert lower - slack < seg < delta + slack
        checked += 1
    elapsed = time.perf_counter() - start
    ok = checked == 1000 and elapsed < budget
    _report(
        capsys, 4, "refinement window, 1000 random (L, delta)", ok,
        "%d pairs in window with 1e-12 slack, %.2f s < %g s"
        % (checked, elapsed, budget),
    )


def test_criterion_5_derivatives_vs_finite_differences(capsys):
    """Objective gradient and constraint Jacobian match central differences."""
    budget, tol = 60.0, 1e-6
    start = time.perf_counter()
    net, state, refined, ndprof, est_prof, measurements = _six_node_truth()
    problem = build_estimation_problem(net, refined, est_prof, measurements)
    nlp = EstimationNlp(problem)
    dae = problem.dae
    b = refined.n_slack
    lo, hi = refined.rho_min[b:], refined.rho_max[b:]
    rng = np.random.default_rng(505)
    h = 1e-6
    worst_grad = worst_jac = 0.0
    for _ in range(20):
        density = lo[:, None] + (hi - lo)[:, None] * rng.uniform(
            0.15, 0.85, (dae.M, dae.N)
        )
        flux = rng.uniform(0.3, 1.0, (dae.E, dae.N)) * rng.choice(
            [-1.0, 1.0], (dae.E, dae.N)
        )
        withdrawal = problem.d_target + rng.uniform(-0.2, 0.2, problem.d_target.shape)
        friction = problem.friction_prior * rng.uniform(0.5, 2.0, dae.P)
        x = nlp.pack(density, flux, withdrawal, friction)
        grad = nlp.gradient(x)
        J = nlp.jacobian(x).toarray()
        for idx in range(nlp.n):
            e = np.zeros(nlp.n)
            e[idx] = h
            fd_g = (nlp.objective(x + e) - nlp.objective(x - e)) / (2 * h)
            worst_grad = max(
                worst_grad, abs(grad[idx] - fd_g) / (1.0 + abs(fd_g))
            )
            fd_c = (nlp.constraints(x + e) - nlp.constraints(x - e)) / (2 * h)
            worst_jac = max(
                worst_jac,
                float(np.max(np.abs(J[:, idx] - fd_c) / (1.0 + np.abs(fd_c)))),
            )
    elapsed = time.perf_counter() - start
    ok = worst_grad < tol and worst_jac < tol and elapsed < budget
    _report(
        capsys, 5, "gradient and Jacobian vs central differences", ok,
        "max rel err: gradient %.2e, Jacobian %.2e < %g, %.1f s < %g s"
        % (worst_grad, worst_jac, tol, elapsed, budget),
    )


def test_criterion_6_noiseless_twin_recovery(capsys):
    """Friction priors at twice truth recover the truth without noise."""
    budget = 60.0
    friction_tol, state_tol, kkt_tol = 1e-3, 1e-6, 1e-4
    start = time.perf_counter()
    net, state, refined, ndprof, est_prof, measurements = _six_node_truth()
    doc = network_to_dict(net)
    for pipe in doc["pipes"]:
        pipe["friction"] *= 2.0
    doubled = network_from_dict(doc)
    scales = refined.scales
    refined2 = refine_graph(
        nondimensionalize_network(doubled, scales), 10.0e3 / scales.length
    )
    problem = build_estimation_problem(doubled, refined2, est_prof, measurements)
    truth = np.array([p.friction for p in net.pipes])
    np.testing.assert_allclose(problem.friction_prior, 2.0 * truth)
    solution = solve_estimation(
        problem, est_prof, EstimationOptions(tol=1e-7, max_iter=300)
    )
    rel = float(np.max(np.abs(solution.friction - truth) / truth))
    diff = np.concatenate([
        (solution.state.density - state.density).ravel(),
        (solution.state.flux - state.flux).ravel(),
    ])
    rmse = float(np.sqrt(np.mean(diff**2)))
    elapsed = time.perf_counter() - start
    ok = (
        solution.converged
        and rel < friction_tol
        and rmse < state_tol
        and solution.kkt_error <= kkt_tol
        and elapsed < budget
    )
    _report(
        capsys, 6, "noiseless twin, friction from doubled prior", ok,
        "max rel friction err %.2e < %g, state RMSE %.2e < %g, KKT %.2e <= %g, "
        "%d iterations, %.1f s < %g s"
        % (rel, friction_tol, rmse, state_tol, solution.kkt_error, kkt_tol,
           solution.iterations, elapsed, budget),
    )


def test_criterion_7_noise_ladder_monotone(capsys):
    """Median friction error does not grow as measurement noise shrinks."""
    budget, headroom = 900.0, 1.1
    start = time.perf_counter()
    net, state, refined, ndprof, est_prof, _ = _six_node_truth()
    truth = np.array([p.friction for p in net.pipes])
    sigmas = (0.02, 0.01, 0.005, 0.0025)
    options = EstimationOptions(tol=1e-6, max_iter=1500)
    medians = []
    for sigma in sigmas:
        errors = []
        for seed in range(5):
            noisy = inject_noise(
                state, ndprof,
                NoiseSpec(density_rel=sigma, withdrawal_rel=sigma, seed=seed),
                refined, net,
            )
            problem = build_estimation_problem(net, refined, est_prof, noisy)
            solution = solve_estimation(problem, est_prof, options)
            assert solution.converged, "ladder solve at sigma=%g seed=%d: %s" % (
                sigma, seed, solution.status,
            )
            errors.append(float(np.max(np.abs(solution.friction - truth) / truth)))
        medians.append(float(np.median(errors)))
    monotone = all(
        medians[i + 1] <= headroom * medians[i] for i in range(len(medians) - 1)
    )
    elapsed = time.perf_counter() - start
    ok = monotone and elapsed < budget
    _report(
        capsys, 7, "noise ladder, median friction error", ok,
        "medians at %s: %s (each next <= %.1fx previous), %.0f s < %g s"
        % (
            "/".join("%g%%" % (100 * s) for s in sigmas),
            "/".join("%.3f" % m for m in medians),
            headroom, elapsed, budget,
        ),
    )


def test_criterion_8_paper_scale_cli(tmp_path, capsys):
    """The estimate command converges on the 78-junction masked instance."""
    budget = 1800.0
    net = paper_scale_network()
    prof = paper_scale_profiles(net)
    mask_ids = paper_scale_mask(net)
    net_path = tmp_path / "network.json"
    prof_path = tmp_path / "profiles.csv"
    mask_path = tmp_path / "mask.txt"
    save_network(net, str(net_path))
    write_profiles(str(prof_path), prof)
    mask_path.write_text("".join(jid + "\n" for jid in mask_ids))
    gen_dir = tmp_path / "gen"
    est_dir = tmp_path / "est"
    gen = subprocess.run(
        [
            sys.executable, "-m", "gasnet.cli", "gen-synthetic",
            "--network", str(net_path),
            "--profiles", str(prof_path),
            "--mask", str(mask_path),
            "--noise-density", "0.005",
            "--noise-withdrawal", "0.005",
            "--seed", "7",
            "--out", str(gen_dir),
        ],
        capture_output=True, text=True, timeout=600,
    )
    assert gen.returncode == 0, gen.stderr
    start = time.perf_counter()
    est = subprocess.run(
        [
            sys.executable, "-m", "gasnet.cli", "estimate",
            "--network", str(net_path),
            "--measurements", str(gen_dir / "measurements.csv"),
            "--tol", "1e-4",
            "--max-iter", "300",
            "--out", str(est_dir),
        ],
        capture_output=True, text=True, timeout=budget + 300,
    )
    elapsed = time.perf_counter() - start
    rows = read_friction_csv(str(est_dir / "friction_estimates.csv"))
    estimates = np.array([row["friction_estimate"] for row in rows])
    deviations = np.array([row["relative_deviation"] for row in rows])
    diag = json.loads((est_dir / "diagnostics.json").read_text())
    ok = est.returncode == 0 and elapsed < budget and len(rows) == 95
    # Friction estimates and their spread are reported, not judged: with 31
    # of 77 junctions metered the per-pipe values are not claimed recovered.
    _report(
        capsys, 8, "paper-scale CLI estimate, 31-junction mask", ok,
        "exit %d, %d pipes, estimates in [%.4f, %.4f], "
        "max |rel deviation from prior| %.2f, %d iterations, %.0f s < %g s"
        % (est.returncode, len(rows), float(estimates.min()),
           float(estimates.max()), float(np.max(np.abs(deviations))),
           diag["iterations"], elapsed, budget),
    )


def test_criterion_9_temporal_convergence_order(capsys):
    """Trajectory differences shrink at second order under step doubling."""
    budget, min_order = 300.0, 1.8
    start = time.perf_counter()
    net = six_node_network()
    solved = {}
    for n_steps in (24, 48, 96):
        state, refined, dae = simulate_network(net, six_node_profiles(n_steps))
        solved[n_steps] = np.vstack([state.density, state.flux])
    e1 = float(np.max(np.abs(solved[24] - solved[48][:, ::2])))
    e2 = float(np.max(np.abs(solved[48] - solved[96][:, ::2])))
    order = math.log2(e1 / e2)
    elapsed = time.perf_counter() - start
    ok = order >= min_order and elapsed < budget
    _report(
        capsys, 9, "temporal order under step doubling", ok,
        "errors %.3e -> %.3e, observed order %.2f >= %g, %.1f s < %g s"
        % (e1, e2, order, min_order, elapsed, budget),
    )
