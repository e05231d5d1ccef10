import numpy as np
import pytest

from opstep import problems
from opstep.autodiff import Tape
from opstep.networks import Mlp, MlpSpec
from opstep.operator_nets import OperatorNet
from opstep.sampling import TrainSet, make_train_set

from test_operator_nets import const_mlp


def test_catalog_constants_match_defaults():
    p = problems.get("pendulum")
    assert p.constants == {"b": 0.05, "m": 1.0, "g": 9.81, "L": 1.0}
    s = problems.get("stiff-kinetics")
    assert s.constants == {"k1": 0.04, "k2": 3.0e4, "k3": 1.0e7}
    assert s.ic_output_weights == (1.0, 1.0e6, 1.0)
    w = problems.get("wave")
    assert w.constants["c"] == 1.0 and w.deriv_orders == {"t": 2, "x": 2}
    d = problems.get("diffusion-reaction")
    assert d.constants == {"D": 0.001, "k": 0.001}
    k = problems.get("kdv")
    assert k.constants == {"eps": 0.12, "mu": 8.0e-4}
    assert k.dt == 10.0 and k.x_domain == (0.0, 5.0)
    assert problems.get("pendulum", dt=0.5).dt == 0.5


def test_unknown_problem_rejected():
    with pytest.raises(ValueError):
        problems.get("navier-stokes")


def _pendulum_stub_batch(c1, c2, n=4, q=3):
    u = np.tile([c1, c2], (n, 1))
    t_col = np.random.default_rng(0).uniform(0, 1, size=(n, q))
    return TrainSet("pendulum", {"u": u, "t_col": t_col}, {})


def test_pendulum_loss_on_constant_stub():
    problem = problems.get("pendulum")
    c1, c2 = 0.35, -1.2
    net = OperatorNet(const_mlp(2, [1.0, 1.0]), const_mlp(1, [c1, c2]), [0, 1, 2])
    batch = _pendulum_stub_batch(c1, c2)
    report = problems.loss(problem, net, batch)
    assert report.terms["ic"] < 1e-28  # exact IC fit
    want_r = c2**2 + (0.05 * c2 + 9.81 * np.sin(c1)) ** 2
    assert np.isclose(report.terms["r"], want_r, rtol=1e-12)
    assert np.isclose(report.total, sum(report.weighted.values()), rtol=1e-15)


def test_stiff_ic_weighted_sum():
    # every per-output IC squared error equals eps -> L_ic = (1 + 1e6 + 1) eps
    problem = problems.get("stiff-kinetics")
    eps = 0.04
    err = np.sqrt(eps)
    net = OperatorNet(
        const_mlp(3, [1.0, 1.0, 1.0]), const_mlp(1, [err, err, err]), [0, 1, 2, 3]
    )
    u = np.zeros((5, 3))
    batch = TrainSet("stiff-kinetics", {"u": u, "t_col": np.full((5, 2), 0.3)}, {})
    report = problems.loss(problem, net, batch)
    assert np.isclose(report.terms["ic"], (1.0 + 1e6 + 1.0) * eps, rtol=1e-9)


def test_kdv_data_term_zero_on_exact_fit():
    problem = problems.get("kdv")
    # constant field c0 everywhere; measurements equal to c0 -> data term 0
    c0 = 0.7
    net = OperatorNet(const_mlp(4, [1.0]), const_mlp(2, [c0]), [0, 1])
    n, p, q = 3, 5, 4
    rng = np.random.default_rng(1)
    batch = TrainSet("kdv", {
        "u": np.zeros((n, 4)),
        "x_dat": rng.uniform(0, 5, (n, p)), "t_dat": rng.uniform(0, 10, (n, p)),
        "s_dat": np.full((n, p), c0),
        "x_col": rng.uniform(0, 5, (n, q)), "t_col": rng.uniform(0, 10, (n, q)),
    }, {})
    report = problems.loss(problem, net, batch)
    assert report.terms["data"] == 0.0
    assert report.terms["r"] == 0.0  # constant field solves the equation too


def test_zero_weight_skips_term():
    problem = problems.get("kdv", loss_weights={"r": 0.0})
    net = OperatorNet(const_mlp(4, [1.0]), const_mlp(2, [0.3]), [0, 1])
    rng = np.random.default_rng(2)
    batch = TrainSet("kdv", {
        "u": np.zeros((2, 4)),
        "x_dat": rng.uniform(0, 5, (2, 3)), "t_dat": rng.uniform(0, 10, (2, 3)),
        "s_dat": np.zeros((2, 3)),
        "x_col": rng.uniform(0, 5, (2, 3)), "t_col": rng.uniform(0, 10, (2, 3)),
    }, {})
    report = problems.loss(problem, net, batch)
    assert report.weighted["r"] == 0.0
    assert report.total == report.weighted["data"]


def test_empty_batch_rejected():
    problem = problems.get("pendulum")
    net = OperatorNet(const_mlp(2, [1.0, 1.0]), const_mlp(1, [0.0, 0.0]), [0, 1, 2])
    empty = TrainSet("pendulum", {"u": np.zeros((0, 2)), "t_col": np.zeros((0, 3))}, {})
    with pytest.raises(ValueError):
        problems.loss(problem, net, empty)


def test_loss_invariant_under_batch_permutation():
    problem = problems.get("diffusion-reaction")
    rng = np.random.default_rng(3)
    branch = Mlp.glorot(MlpSpec(9, 6, width=8, depth=2), 0)
    trunk = Mlp.glorot(MlpSpec(2, 6, width=8, depth=2), 1)
    net = OperatorNet(branch, trunk, [0, 6])
    ts = make_train_set(problem, 6, 4, 5, seed=7, m=9)
    perm = rng.permutation(6)
    a = problems.loss(problem, net, ts)
    b = problems.loss(problem, net, ts.subset(perm))
    assert np.isclose(a.total, b.total, rtol=1e-12)


def test_doubling_one_weight_doubles_that_term_only():
    base = problems.get("wave")
    boosted = problems.get("wave", loss_weights={"bc": 2.0})
    branch = Mlp.glorot(MlpSpec(9, 6, width=8, depth=2), 5)
    trunk = Mlp.glorot(MlpSpec(2, 6, width=8, depth=2), 6)
    net = OperatorNet(branch, trunk, [0, 6])
    ts = make_train_set(base, 4, 3, 5, seed=8, m=9)
    a = problems.loss(base, net, ts)
    b = problems.loss(boosted, net, ts)
    assert np.isclose(b.weighted["bc"], 2.0 * a.weighted["bc"], rtol=1e-12)
    assert np.isclose(b.weighted["ic"], a.weighted["ic"], rtol=1e-15)
    assert np.isclose(b.weighted["r"], a.weighted["r"], rtol=1e-15)


def test_loss_records_on_tape_and_total_matches():
    problem = problems.get("pendulum")
    branch = Mlp.glorot(MlpSpec(2, 8, width=8, depth=2, variant="modified"), 2)
    trunk = Mlp.glorot(MlpSpec(1, 8, width=8, depth=2, variant="modified"), 3)
    net = OperatorNet(branch, trunk, [0, 4, 8])
    ts = make_train_set(problem, 5, 1, 6, seed=4)
    tape = Tape()
    params = net.on_tape(tape)
    report = problems.loss(problem, net, ts, params=params)
    assert report.root is not None and report.root.tape is tape
    plain = problems.loss(problem, net, ts)
    assert np.isclose(plain.total, report.total, rtol=0, atol=0)


# -- closed forms ---------------------------------------------------------------


def test_wave_exact_solution_values():
    problem = problems.get("wave")
    assert np.isclose(problems.exact_solution(problem, "sin-pi-x", 0.5, 1.0), -1.0)
    x = np.linspace(0, 1, 11)
    assert np.allclose(
        problems.exact_solution(problem, "sin-pi-x", x, 0.0), np.sin(np.pi * x)
    )
    # time derivative at t=0 vanishes
    h = 1e-6
    dt0 = (
        problems.exact_solution(problem, "sin-pi-x", x, h)
        - problems.exact_solution(problem, "sin-pi-x", x, -h)
    ) / (2 * h)
    assert np.max(np.abs(dt0)) < 1e-9


def test_kdv_exact_peak_value():
    problem = problems.get("kdv")
    val = problems.exact_solution(problem, {"a": 1.0, "c": 1.5}, 0.2, 0.0)
    assert np.isclose(val, 0.75, rtol=1e-12)  # c/2 at the crest


def test_exact_solution_unavailable_for_other_problems():
    assert problems.exact_solution(problems.get("pendulum"), None, 0.1, 0.2) is None
    assert problems.exact_solution(problems.get("wave"), "random-grf", 0.1, 0.2) is None


def test_wave_stub_loss_annihilated_by_exact_solution():
    # the closed-form field is a global minimizer: all terms < 1e-10
    problem = problems.get("wave")

    class ExactWave:
        n_out = 1

        def branch_features(self, u, u0=None, params=None):
            return None

        def trunk_features(self, query, params=None):
            return query

        def merge(self, bf, tf, paired=None):
            from opstep.autodiff import Jet

            x = tf[:, 0:1] if not isinstance(tf, Jet) else Jet(
                [c if isinstance(c, float) else c[:, 0:1] for c in tf.coeffs]
            )
            t = tf[:, 1:2] if not isinstance(tf, Jet) else Jet(
                [c if isinstance(c, float) else c[:, 1:2] for c in tf.coeffs]
            )
            from opstep.autodiff import gsin, gcos

            val = gsin(np.pi * x) * gcos(np.pi * t)
            return [val.reshape(1, -1)]

        def eval(self, u, query, u0=None, paired=None, params=None):
            return self.merge(None, query, paired)

    ts = make_train_set(problem, 1, 40, 60, seed=0, m=9)
    # replace the sampled profile by the closed-form initial condition
    from opstep.sampling import sensor_grid_for

    grid = sensor_grid_for(problem, 9).points
    ts.arrays["u"] = np.sin(np.pi * grid)[None, :]
    ts.arrays["u_ic"] = np.sin(np.pi * ts.arrays["x_ic"])
    report = problems.loss(problem, ExactWave(), ts)
    assert report.terms["ic"] < 1e-10
    assert report.terms["bc"] < 1e-10
    assert report.terms["r"] < 1e-10


def test_stiff_residual_identity_at_loss_level():
    # the sum identity holds inside the loss path as well
    problem = problems.get("stiff-kinetics")
    branch = Mlp.glorot(MlpSpec(3, 9, width=8, depth=2), 11)
    trunk = Mlp.glorot(MlpSpec(1, 9, width=8, depth=2), 12)
    net = OperatorNet(branch, trunk, [0, 3, 6, 9], out_scale=[1.0, 1e-4, 1.0])
    ts = make_train_set(problem, 3, 1, 7, seed=13)
    from opstep.operator_nets import onet_residual, query_jet

    res = onet_residual(net, problem, ts.arrays["u"], {"t": ts.arrays["t_col"]})
    jets = net.eval(
        ts.arrays["u"], query_jet([ts.arrays["t_col"].reshape(-1, 1)], 0, 1), paired=7
    )
    lhs = sum(np.asarray(r) for r in res)
    rhs = sum(np.asarray(j.coeffs[1]) for j in jets)
    assert np.max(np.abs(lhs - rhs)) < 1e-12
