"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Trained desk-scale models are expensive (minutes each); they are built once
per configuration and cached under ``tests/_artifacts`` keyed by their full
configuration, so repeated runs reuse them.  Delete the directory (or set
OPSTEP_TEST_ARTIFACTS=fresh) to retrain everything from scratch.
"""

import hashlib
import json
import os
import time
from pathlib import Path

import numpy as np
import pytest

from opstep import problems
from opstep.artifacts import load_checkpoint, save_checkpoint
from opstep.autodiff import Tape, grad, jet_seed
from opstep.config import build_operator_net, default_config
from opstep.metrics import rel_l2
from opstep.networks import Mlp, MlpSpec
from opstep.operator_nets import OperatorNet, onet_residual, query_jet
from opstep.rollout import (
    FlowMapPropagator,
    OperatorPropagator,
    QuadraturePropagator,
    RolloutPlan,
    error_vs_horizon,
    rollout,
    rollout_forced,
)
from opstep.sampling import fourier_field_function, make_train_set, sensor_grid_for
from opstep.solvers import stiff_implicit
from opstep.training import train

from oracles import fd_gradient, rel_close

ARTIFACTS = Path(__file__).parent / "_artifacts"


def _report(criterion, passed, detail):
    status = "PASS" if passed else "FAIL"
    print(f"\nACCEPTANCE {criterion}: {status} — {detail}")
    assert passed, f"criterion {criterion}: {detail}"


def _train_cached(tag, cfg, loss_weights=None, ic_output_weights=None):
    """Train (or load) a desk model; cache key covers the full configuration."""
    key_src = json.dumps(
        {"cfg": cfg.to_dict(), "lw": loss_weights, "icw": ic_output_weights},
        sort_keys=True,
    )
    key = hashlib.sha256(key_src.encode()).hexdigest()[:16]
    if os.environ.get("OPSTEP_TEST_ARTIFACTS") == "fresh":
        ARTIFACTS_ok = False
    else:
        ARTIFACTS_ok = (ARTIFACTS / f"{tag}-{key}.ckpt.json").exists()
    path = ARTIFACTS / f"{tag}-{key}"
    problem = problems.get(
        cfg.problem, dt=cfg.dt, loss_weights=loss_weights,
        ic_output_weights=ic_output_weights,
    )
    if ARTIFACTS_ok:
        net, _ = load_checkpoint(path)
        return problem, net
    ARTIFACTS.mkdir(exist_ok=True)
    net = build_operator_net(cfg)
    trainset = make_train_set(
        problem, cfg.n_train, cfg.n_cond, cfg.n_colloc, seed=cfg.seed_data,
        m=cfg.m or None,
    )
    t0 = time.perf_counter()
    _, log = train(
        problem, net, trainset, cfg.iters, cfg.batch_size, cfg.seed_train, lr0=cfg.lr0
    )
    print(f"\n[trained {tag}: {cfg.iters} iters in {time.perf_counter() - t0:.0f}s]")
    save_checkpoint(path, net, problem.id, iteration=cfg.iters)
    np.save(path.with_suffix(".losses.npy"), log.totals())
    return problem, net


def _cached_losses(tag, cfg, loss_weights=None, ic_output_weights=None):
    key_src = json.dumps(
        {"cfg": cfg.to_dict(), "lw": loss_weights, "icw": ic_output_weights},
        sort_keys=True,
    )
    key = hashlib.sha256(key_src.encode()).hexdigest()[:16]
    return np.load(ARTIFACTS / f"{tag}-{key}.losses.npy")


# ---------------------------------------------------------------------------
# trained-model fixtures
# ---------------------------------------------------------------------------


@pytest.fixture(scope="session")
def pendulum_model():
    cfg = default_config("pendulum", "desk")
    return _train_cached("pendulum", cfg)


@pytest.fixture(scope="session")
def inhom_model():
    cfg = default_config("inhom-ode", "desk")
    return _train_cached("inhom", cfg)


@pytest.fixture(scope="session")
def kdv_data_model():
    cfg = default_config("kdv", "desk")
    return _train_cached("kdv-data", cfg, loss_weights={"data": 1.0, "r": 0.0})


@pytest.fixture(scope="session")
def stiff_models():
    base = default_config("stiff-kinetics", "desk")
    scaled = _train_cached("stiff-scaled", base)
    unscaled_cfg = default_config("stiff-kinetics", "desk", out_scale=[1.0, 1.0, 1.0])
    unscaled = _train_cached(
        "stiff-unscaled", unscaled_cfg, ic_output_weights=[1.0, 1.0, 1.0]
    )
    return scaled, unscaled


@pytest.fixture(scope="session")
def dr_models():
    out = {}
    for dt in (0.5, 1.0, 2.0):
        cfg = default_config("diffusion-reaction", "desk", dt=dt)
        out[dt] = _train_cached(f"dr-dt{dt:g}", cfg)
    return out


@pytest.fixture(scope="session")
def pinn_run():
    cache = ARTIFACTS / "pinn_run.npz"
    if cache.exists() and os.environ.get("OPSTEP_TEST_ARTIFACTS") != "fresh":
        data = np.load(cache)
        return data["times"], data["traj"], data["totals"]
    ARTIFACTS.mkdir(exist_ok=True)
    net = Mlp.glorot(MlpSpec(1, 2, width=64, depth=4), seed=0)
    t0 = time.perf_counter()
    times, traj, log = problems.pinn_baseline(net, T=20.0, iters=20_000, seed=0, n_colloc=128)
    print(f"\n[trained PINN baseline in {time.perf_counter() - t0:.0f}s]")
    totals = log.totals()
    np.savez(cache, times=times, traj=traj, totals=totals)
    return times, traj, totals


# ---------------------------------------------------------------------------
# criterion 1: autodiff oracle equivalence
# ---------------------------------------------------------------------------


def _tiny_cfg(problem_id, seed):
    rng = np.random.default_rng(seed)
    width = int(rng.integers(4, 8))
    depth = int(rng.integers(1, 3))
    variant = ["standard", "modified"][int(rng.integers(0, 2))]
    problem = problems.get(problem_id)
    n_out = problem.n_out
    latent = n_out * int(rng.integers(2, 4))
    partition = list(range(0, latent + 1, latent // n_out))
    cfg = default_config(problem_id, "desk")
    cfg.branch_depth = cfg.trunk_depth = depth
    cfg.branch_width = cfg.trunk_width = width
    cfg.variant = variant
    cfg.latent = latent
    cfg.partition = partition
    cfg.out_scale = [1.0] * n_out if problem_id != "stiff-kinetics" else [1.0, 1e-4, 1.0]
    cfg.m = min(cfg.m, 8) or cfg.m
    cfg.seed_init = seed
    return cfg, problem


def test_acceptance_1_autodiff_oracle_equivalence():
    # 204 random tiny networks (34 per benchmark); per network, a random
    # subset of <=100 parameter components is checked against central
    # differences.  Components are compared relative to their own size with a
    # floor at 1e-6 of the gradient's max magnitude, which is the resolution
    # limit of float64 central differences for the stiff problem's large loss.
    t0 = time.perf_counter()
    n_nets = 0
    worst_grad = 0.0
    worst_jet = 0.0
    per_problem = 34
    comp_rng = np.random.default_rng(99)
    for problem_id in problems.PROBLEM_IDS:
        for k in range(per_problem):
            seed = 1000 * n_nets + k
            cfg, problem = _tiny_cfg(problem_id, seed)
            net = build_operator_net(cfg)
            batch = make_train_set(problem, 2, 3, 3, seed=seed, m=cfg.m or None)

            tape = Tape()
            params = net.on_tape(tape)
            report = problems.loss(problem, net, batch, params=params)
            leaves = [p for g_ in params[0] for p in g_] + list(params[1])
            got_full = np.concatenate([g.ravel() for g in grad(report.root, leaves)])

            flat0 = net.flatten()
            n_check = min(100, flat0.size)
            idx = comp_rng.choice(flat0.size, size=n_check, replace=False)

            def loss_at(flat, net=net, problem=problem, batch=batch):
                net.load_flat(flat)
                return problems.loss(problem, net, batch).total

            h_fd = 2e-5
            want = fd_gradient(loss_at, flat0, h=h_fd, indices=idx, richardson=True)
            net.load_flat(flat0)
            got = got_full[idx]
            # the FD oracle cannot resolve differences below its own roundoff,
            # ~eps * |loss| / h; floor the relative comparison there
            fd_noise = 30.0 * np.finfo(float).eps * max(1.0, abs(report.total)) / h_fd
            denom = np.maximum(np.maximum(np.abs(got), np.abs(want)), fd_noise / 1e-5)
            worst_grad = max(worst_grad, float(np.max(np.abs(got - want) / denom)))
            n_nets += 1

    # jet input-derivatives, orders 1..3, against Richardson-extrapolated
    # central differences
    from oracles import central_diff_rich

    rng = np.random.default_rng(0)
    for k in range(30):
        net = Mlp.glorot(
            MlpSpec(1, 1, width=8, depth=2, variant=["standard", "modified"][k % 2]),
            seed=k,
        )
        x0 = float(rng.uniform(-1, 1))
        out = net(jet_seed(np.array([[x0]]), 3))

        def scalar(x, net=net):
            return float(net(np.array([[x]]))[0, 0])

        for order in (1, 2, 3):
            fd = central_diff_rich(scalar, x0, order)
            jet_val = float(np.asarray(out.coeffs[order]).ravel()[0])
            denom = max(abs(fd), abs(jet_val), 1e-3)
            worst_jet = max(worst_jet, abs(jet_val - fd) / denom)

    elapsed = time.perf_counter() - t0
    ok = worst_grad < 1e-5 and worst_jet < 1e-4 and elapsed < 120
    _report(
        1, ok,
        f"{n_nets} nets: worst param-grad rel err {worst_grad:.2e} (<1e-5), "
        f"worst jet rel err {worst_jet:.2e} (<1e-4), runtime {elapsed:.0f}s (<120s)",
    )


# ---------------------------------------------------------------------------
# criterion 2: exact-solution annihilation
# ---------------------------------------------------------------------------


def test_acceptance_2_exact_solution_annihilation():
    from opstep.autodiff import Jet

    wave = problems.get("wave")

    class ExactWave:
        def branch_features(self, u, u0=None, params=None):
            return None

        def trunk_features(self, query, params=None):
            return query

        def merge(self, bf, tf, paired=None):
            def col(j):
                if isinstance(tf, Jet):
                    return Jet([c if isinstance(c, float) else c[:, j : j + 1] for c in tf.coeffs])
                return tf[:, j : j + 1]

            from opstep.autodiff import gcos, gsin

            val = gsin(np.pi * col(0)) * gcos(np.pi * col(1))
            return [val.reshape(1, -1)]

        def eval(self, u, query, u0=None, paired=None, params=None):
            return self.merge(None, query, paired)

    grid = sensor_grid_for(wave, 33).points
    ts = make_train_set(wave, 1, 64, 128, seed=0, m=33)
    ts.arrays["u"] = np.sin(np.pi * grid)[None, :]
    ts.arrays["u_ic"] = np.sin(np.pi * ts.arrays["x_ic"])
    report = problems.loss(wave, ExactWave(), ts)
    wave_ok = max(report.terms.values()) < 1e-10

    kdv = problems.get("kdv")
    a, c = 1.0, 1.5

    class ExactSoliton:
        def branch_features(self, u, u0=None, params=None):
            return None

        def trunk_features(self, query, params=None):
            return query

        def merge(self, bf, tf, paired=None):
            x = Jet([cc if isinstance(cc, float) else cc[:, 0:1] for cc in tf.coeffs])
            t = Jet([cc if isinstance(cc, float) else cc[:, 1:2] for cc in tf.coeffs])
            z = (np.sqrt(c) / 2.0) * (5.0 * x - 0.1 * c * t - a)
            val = (c / 2.0) * (1.0 - z.tanh().square())
            return [val.reshape(1, -1)]

    rng = np.random.default_rng(7)
    queries = {"x": rng.uniform(0, 5, (1, 1000)), "t": rng.uniform(0, 10, (1, 1000))}
    (res,) = onet_residual(ExactSoliton(), kdv, np.zeros((1, 1)), queries)
    kdv_rms = float(np.sqrt(np.mean(np.asarray(res) ** 2)))

    ok = wave_ok and kdv_rms < 1e-8
    _report(
        2, ok,
        f"wave stub losses max {max(report.terms.values()):.2e} (<1e-10), "
        f"soliton residual RMS {kdv_rms:.2e} (<1e-8)",
    )


# ---------------------------------------------------------------------------
# criterion 3: stiff conservation identities
# ---------------------------------------------------------------------------


def test_acceptance_3_stiff_conservation():
    problem = problems.get("stiff-kinetics")
    rng = np.random.default_rng(5)
    worst = 0.0
    for seed in range(5):
        branch = Mlp.glorot(MlpSpec(3, 9, width=8, depth=2, variant="modified"), seed)
        trunk = Mlp.glorot(MlpSpec(1, 9, width=8, depth=2, variant="modified"), seed + 50)
        net = OperatorNet(branch, trunk, [0, 3, 6, 9], out_scale=[1.0, 1e-4, 1.0])
        u = rng.uniform(0, 1, size=(3, 3))
        t_col = rng.uniform(0, 1, size=(3, 6))
        res = onet_residual(net, problem, u, {"t": t_col})
        jets = net.eval(u, query_jet([t_col.reshape(-1, 1)], 0, 1), paired=6)
        lhs = sum(np.asarray(r) for r in res)
        rhs = sum(np.asarray(j.coeffs[1]) for j in jets)
        worst = max(worst, float(np.max(np.abs(lhs - rhs))))

    res = stiff_implicit(
        problems.ode_system(problem), np.array([1.0, 0.0, 0.0]), 500.0,
        rtol=1e-8, atol=1e-12,
    )
    drift = float(np.max(np.abs(res.ys.sum(axis=1) - 1.0)))
    ok = worst < 1e-12 and drift < 1e-9
    _report(
        3, ok,
        f"residual-sum identity worst {worst:.2e} (<1e-12), "
        f"solver mass drift on [0,500] {drift:.2e} (<1e-9)",
    )


# ---------------------------------------------------------------------------
# criterion 4: rollout plumbing oracles
# ---------------------------------------------------------------------------


def test_acceptance_4_rollout_plumbing():
    plan = RolloutPlan.make(100.0, 1.0, points_per_window=11)
    prop = FlowMapPropagator(lambda u, t: u[None, :] * np.exp(-t)[:, None])
    res = rollout(prop, np.array([1.0]), plan)
    decay_err = float(np.max(np.abs(res.field[:, 0] - np.exp(-res.times))))

    plan2 = RolloutPlan.make(50.0, 1.0, points_per_window=11)
    res2 = rollout_forced(QuadraturePropagator(), 0.0, np.cos, plan2)
    forced_err = float(np.max(np.abs(res2.field[:, 0] - np.sin(res2.times))))

    ok = decay_err < 1e-12 and forced_err < 1e-10
    _report(
        4, ok,
        f"exact-flow rollout (N=100) max err {decay_err:.2e} (<1e-12), "
        f"quadrature-forced cos->sin over T=50 max err {forced_err:.2e} (<1e-10)",
    )


# ---------------------------------------------------------------------------
# criteria 5 and 6: pendulum end-to-end and the whole-domain baseline collapse
# ---------------------------------------------------------------------------


def _pendulum_errors(problem, net):
    rng = np.random.default_rng(123)
    ics = rng.uniform(-2, 2, size=(20, 2))
    plan = RolloutPlan.make(20.0, 1.0, points_per_window=11)
    prop = OperatorPropagator(net)
    errs, results, refs = [], [], []
    for ic in ics:
        res = rollout(prop, ic, plan)
        ref = problems.reference_trajectory(problem, ic, res.times)
        errs.append(rel_l2(res.field, ref))
        results.append(res)
        refs.append(ref)
    return np.array(errs), results, refs


@pytest.mark.slow
def test_acceptance_5_pendulum_end_to_end(pendulum_model):
    problem, net = pendulum_model
    t0 = time.perf_counter()
    errs, _, _ = _pendulum_errors(problem, net)
    ok = errs.mean() < 0.10
    _report(
        5, ok,
        f"mean relative L2 error at T=20 over 20 ICs: {errs.mean():.4f} (<0.10), "
        f"max {errs.max():.4f}, eval {time.perf_counter() - t0:.0f}s",
    )


@pytest.mark.slow
def test_acceptance_6_baseline_collapse(pinn_run, pendulum_model):
    times, traj, totals = pinn_run
    problem = problems.get("pendulum")
    ref = problems.reference_trajectory(problem, np.array([1.0, 1.0]), times)
    early = times <= 10.0
    pinn_ratio = rel_l2(traj[~early], ref[~early]) / rel_l2(traj[early], ref[early])

    _, net = pendulum_model
    plan = RolloutPlan.make(20.0, 1.0, points_per_window=11)
    res = rollout(OperatorPropagator(net), np.array([1.0, 1.0]), plan)
    oref = problems.reference_trajectory(problem, np.array([1.0, 1.0]), res.times)
    oearly = res.times <= 10.0
    onet_ratio = rel_l2(res.field[~oearly], oref[~oearly]) / rel_l2(
        res.field[oearly], oref[oearly]
    )
    ok = pinn_ratio >= 5.0 and onet_ratio < 5.0
    _report(
        6, ok,
        f"whole-domain baseline late/early error ratio {pinn_ratio:.1f} (>=5), "
        f"windowed operator ratio {onet_ratio:.2f} (<5)",
    )


@pytest.mark.slow
def test_acceptance_6b_pinn_loss_history_sane(pinn_run):
    _, _, totals = pinn_run
    assert np.all(np.isfinite(totals))
    # non-increasing in coarse (1000-iteration) moving average
    window = max(1, 1000 // 100)  # log interval is 100 iterations
    means = [np.mean(totals[i : i + window]) for i in range(0, len(totals) - window, window)]
    drops = np.diff(means) <= np.abs(np.asarray(means[:-1])) * 0.05 + 1e-12
    assert bool(np.all(drops)), "moving-average loss increased"


@pytest.mark.slow
def test_pendulum_training_loss_collapses(pendulum_model):
    # the desk run must shed at least three decades relative to iteration 0,
    # and its coarse moving average must not increase
    totals = _cached_losses("pendulum", default_config("pendulum", "desk"))
    assert np.all(np.isfinite(totals))
    tail = float(np.mean(totals[-5:]))
    assert tail < 1e-3 * totals[0], (totals[0], tail)
    window = 10  # log interval 100 -> 1000-iteration windows
    means = [np.mean(totals[i : i + window]) for i in range(0, len(totals) - window, window)]
    drops = np.diff(means) <= np.abs(np.asarray(means[:-1])) * 0.05 + 1e-12
    assert bool(np.all(drops)), "1000-iteration moving average increased"


# ---------------------------------------------------------------------------
# criterion 7: inhomogeneous ODE
# ---------------------------------------------------------------------------


@pytest.mark.slow
def test_acceptance_7_forced_ode(inhom_model):
    problem, net = inhom_model
    prop = OperatorPropagator(net)
    m = net.branches[0].spec.in_dim
    sensor_times = np.linspace(0.0, problem.dt, m)

    forcings = [fourier_field_function(0.5, seed=900 + i) for i in range(20)]
    u0s = np.random.default_rng(901).uniform(-2, 2, size=20)

    T_list = [10.0, 25.0, 50.0]
    per_T = {T: [] for T in T_list}
    for f, u0 in zip(forcings, u0s):
        plan = RolloutPlan.make(50.0, problem.dt, points_per_window=11)
        res = rollout_forced(prop, u0, f, plan, sensor_times)
        ref = u0 + f.antiderivative(res.times) - f.antiderivative(0.0)
        for T in T_list:
            mask = res.times <= T + 1e-12
            per_T[T].append(rel_l2(res.field[mask, 0], ref[mask]))
    table = [(T, float(np.mean(per_T[T]))) for T in T_list]
    err50 = table[-1][1]
    rows = "; ".join(f"T={T:g}: {e:.4f}" for T, e in table)
    ok = err50 < 0.10 and len(table) == 3
    _report(7, ok, f"error-vs-T table [{rows}]; mean at T=50 {err50:.4f} (<0.10)")


# ---------------------------------------------------------------------------
# criterion 8: diffusion-reaction window-size robustness
# ---------------------------------------------------------------------------


@pytest.mark.slow
def test_acceptance_8_dr_dt_robustness(dr_models):
    errs = {}
    for dt, (problem, net) in dr_models.items():
        m = net.branches[0].spec.in_dim
        grid = sensor_grid_for(problem, m)
        prop = OperatorPropagator(net)
        plan = RolloutPlan.make(10.0, dt, points_per_window=11, x_grid=grid.points)
        vals = []
        from opstep.sampling import GrfSpec, grf_sample

        for i in range(10):
            u0 = grf_sample(GrfSpec(problem.input_space["l"], grid), (777, i))
            res = rollout(prop, u0, plan)
            ref = problems.reference_trajectory(problem, u0, res.times, x_grid=grid.points)
            vals.append(rel_l2(res.field, ref))
        errs[dt] = float(np.mean(vals))
    emax, emin = max(errs.values()), min(errs.values())
    finite = all(np.isfinite(v) for v in errs.values())
    ok = finite and emax / emin < 4.0 and errs[1.0] < emax
    detail = ", ".join(f"dt={k:g}: {v:.4f}" for k, v in sorted(errs.items()))
    _report(8, ok, f"errors at T=10 [{detail}]; spread x{emax / emin:.2f} (<4), dt=1 not worst")


# ---------------------------------------------------------------------------
# criterion 9: output scaling ablation for the stiff system
# ---------------------------------------------------------------------------


def _stiff_s2_error(problem, net, n_test=20):
    prop = OperatorPropagator(net)
    rng = np.random.default_rng(444)
    errs = []
    times = np.linspace(0.0, 1.0, 11)
    for _ in range(n_test):
        u0 = np.array([rng.uniform(0, 1), rng.uniform(0, 1e-4), rng.uniform(0, 1)])
        block = prop.propagate(u0, times)
        ref = problems.reference_trajectory(problem, u0, times)
        errs.append(rel_l2(block[:, 1], ref[:, 1]))
    return float(np.mean(errs))


@pytest.mark.slow
def test_acceptance_9_stiff_scaling_ablation(stiff_models):
    (problem_s, net_scaled), (problem_u, net_unscaled) = stiff_models
    err_scaled = _stiff_s2_error(problem_s, net_scaled)
    err_unscaled = _stiff_s2_error(problem_u, net_unscaled)
    ratio = err_unscaled / err_scaled
    ok = ratio >= 5.0
    _report(
        9, ok,
        f"intermediate-species error: scaled {err_scaled:.4f}, "
        f"unscaled {err_unscaled:.4f}, ratio x{ratio:.1f} (>=5)",
    )


# ---------------------------------------------------------------------------
# criterion 10: determinism and persistence
# ---------------------------------------------------------------------------


def test_acceptance_10_determinism_and_persistence(tmp_path):
    cfg = default_config("pendulum", "desk", n_train=16, n_colloc=6, iters=25, batch_size=8)
    cfg.branch_depth = cfg.trunk_depth = 1
    cfg.branch_width = cfg.trunk_width = 8
    cfg.latent = 8
    cfg.partition = [0, 4, 8]
    cfg.out_scale = [1.0, 1.0]
    problem = problems.get("pendulum")

    paths = []
    csvs = []
    for run in range(2):
        net = build_operator_net(cfg)
        ts = make_train_set(problem, cfg.n_train, 1, cfg.n_colloc, seed=cfg.seed_data)
        _, log = train(problem, net, ts, cfg.iters, cfg.batch_size, cfg.seed_train)
        p = save_checkpoint(tmp_path / f"run{run}", net, "pendulum", iteration=cfg.iters)
        paths.append(p)
        csvs.append(log.to_csv())
    same_ckpt = (
        paths[0].read_bytes() == paths[1].read_bytes()
        and (tmp_path / "run0.ckpt.bin").read_bytes() == (tmp_path / "run1.ckpt.bin").read_bytes()
    )
    same_csv = csvs[0] == csvs[1]

    net, _ = load_checkpoint(paths[0])
    p2 = save_checkpoint(tmp_path / "reload", net, "pendulum", iteration=cfg.iters)
    roundtrip = (
        p2.read_bytes() == paths[0].read_bytes()
        and (tmp_path / "reload.ckpt.bin").read_bytes() == (tmp_path / "run0.ckpt.bin").read_bytes()
    )
    ok = same_ckpt and same_csv and roundtrip
    _report(
        10, ok,
        f"identical checkpoints {same_ckpt}, identical CSVs {same_csv}, "
        f"byte-identical roundtrip {roundtrip}",
    )


# ---------------------------------------------------------------------------
# KdV at desk scale: data-only fit of the soliton
# ---------------------------------------------------------------------------


@pytest.mark.slow
def test_acceptance_kdv_data_fit(kdv_data_model):
    problem, net = kdv_data_model
    m = net.branches[0].spec.in_dim
    grid = sensor_grid_for(problem, m)
    prop = OperatorPropagator(net)
    plan = RolloutPlan.make(10.0, 10.0, points_per_window=11, x_grid=grid.points)
    u0 = problems.soliton(grid.points, 0.0, 1.0, 1.5)
    res = rollout(prop, u0, plan)
    ref = problems.reference_trajectory(
        problem, u0, res.times, u_descriptor={"a": 1.0, "c": 1.5}, x_grid=grid.points
    )
    err = rel_l2(res.field, ref)
    ok = err < 0.05
    _report(
        "KdV", ok,
        f"data-only soliton fit (N=500), relative L2 on [0,10]: {err:.4f} (<0.05)",
    )
