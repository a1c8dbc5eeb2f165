import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import double_pendulum, elbow_sweep, mixed_chain, reduced_mass_point_errors, rel_err
from inertial_muscles.paths import Anchor, MassPointLayout
from inertial_muscles.spatial import Transform
from inertial_muscles.wrap import (
    MLPWeights,
    SamplingError,
    SamplingRanges,
    SurrogateEvaluator,
    TrainConfig,
    WrapCylinder,
    WrapDataset,
    WrapGeometryError,
    analytic_wrap,
    generate_dataset,
    mlp_forward,
    mlp_input_jacobian,
    mlp_train,
    tangent_points,
    typeIII_jacobians,
    wrap_batch,
)
from inertial_muscles.wrap.dataset import draw_candidates

# -- analytic oracle ------------------------------------------------------------


def relaxed_length(P, Q, r, side, n=200):
    """Shortest path outside the cylinder by repeated midpoint averaging and projection.

    Starts from a detour on the requested side and refines until ``n`` nodes.
    """
    d = (Q - P)[:2]
    out = side * np.array([d[1], -d[0]])
    out /= np.linalg.norm(out)
    W = np.r_[2 * r * out, (P[2] + Q[2]) / 2]
    t = np.linspace(0, 1, 9)[:, None]
    pts = np.vstack([P + (W - P) * t, W + (Q - W) * t[1:]])
    while True:
        for _ in range(4000):
            pts[1:-1] = 0.5 * (pts[:-2] + pts[2:])
            rho = np.hypot(pts[:, 0], pts[:, 1])
            inside = rho < r
            pts[inside, :2] *= (r / rho[inside])[:, None]
        if len(pts) >= n:
            break
        mid = 0.5 * (pts[:-1] + pts[1:])
        new = np.empty((2 * len(pts) - 1, 3))
        new[0::2], new[1::2] = pts, mid
        pts = new
    return np.linalg.norm(np.diff(pts, axis=0), axis=1).sum()


def test_no_contact_is_straight_line():
    r = 0.05
    P, Q = np.array([-2 * r, 2 * r, 0.0]), np.array([2 * r, 2 * r, 0.0])
    for side in (1, -1):
        x, l, L = analytic_wrap(P, Q, r, side, 0.3)
        assert l == 0.0 and L == pytest.approx(4 * r)
        assert np.allclose(x, 0.7 * P + 0.3 * Q)


def test_symmetric_endpoints_midpoint_on_surface():
    r = 0.05
    for side, y0 in ((1, -0.01), (-1, 0.01)):
        x, l, L = analytic_wrap([-0.2, y0, 0.0], [0.2, y0, 0.0], r, side, 0.5)
        assert l > 0.0
        assert abs(x[0]) < 1e-12 and np.hypot(x[0], x[1]) == pytest.approx(r, abs=1e-12)


def test_endpoint_inside_cylinder_raises():
    with pytest.raises(WrapGeometryError):
        analytic_wrap([0.01, 0.0, 0.0], [0.2, 0.0, 0.0], 0.05, 1, 0.5)
    with pytest.raises(ValueError):
        analytic_wrap([0.1, 0.0, 0.0], [0.2, 0.0, 0.0], 0.05, 1, 1.5)


def test_wrapped_length_matches_relaxation_oracle():
    rng = np.random.default_rng(0)
    checked = 0
    while checked < 4:
        r = rng.uniform(0.02, 0.06)
        P = np.r_[rng.uniform(-0.2, 0.2), rng.uniform(0.05, 0.3), rng.uniform(-0.05, 0.05)]
        Q = np.r_[rng.uniform(-0.2, 0.2), rng.uniform(-0.3, -0.05), rng.uniform(-0.05, 0.05)]
        side = int(rng.choice([1, -1]))
        try:
            _, l, L = analytic_wrap(P, Q, r, side, 0.5)
        except WrapGeometryError:
            continue
        if l == 0.0:
            continue
        checked += 1
        assert abs(relaxed_length(P, Q, r, side) - L) / L < 1e-3


@settings(max_examples=50, deadline=None)
@given(st.floats(0.3, 2.5), st.floats(-2.5, -0.3), st.floats(0.08, 0.2), st.floats(0.08, 0.2),
       st.floats(-0.05, 0.05), st.lists(st.sampled_from([1e-4, -1e-4]), min_size=4, max_size=4))
def test_tangent_perturbation_never_shortens(phi_p, phi_q, rho_p, rho_q, dz, d):
    r = 0.04
    P = np.array([rho_p * np.cos(phi_p), rho_p * np.sin(phi_p), 0.0])
    Q = np.array([rho_q * np.cos(phi_q), rho_q * np.sin(phi_q), dz])
    tp = tangent_points(P, Q, r, -1)
    if tp is None:
        return
    T1, T2 = tp
    a1, a2 = np.arctan2(T1[1], T1[0]), np.arctan2(T2[1], T2[0])

    def length(b1, b2, z1, z2):
        # straight -> helix (clockwise from b1 to b2) -> straight
        c1 = np.array([r * np.cos(b1), r * np.sin(b1), z1])
        c2 = np.array([r * np.cos(b2), r * np.sin(b2), z2])
        helix = np.hypot(r * np.mod(b1 - b2, 2 * np.pi), z2 - z1)
        return np.linalg.norm(P - c1) + helix + np.linalg.norm(Q - c2)

    L0 = length(a1, a2, T1[2], T2[2])
    _, _, L = wrap_batch(P[None], Q[None], r, -1, 0.0)
    assert L0 == pytest.approx(L[0], rel=1e-12)
    assert length(a1 + d[0], a2 + d[1], T1[2] + d[2], T2[2] + d[3]) > L0


def test_wrap_batch_matches_scalar_oracle(rng):
    P = np.column_stack([rng.uniform(0.06, 0.2, 50), rng.uniform(0.05, 0.2, 50), rng.uniform(-0.05, 0.05, 50)])
    Q = np.column_stack([rng.uniform(-0.2, 0.2, 50), rng.uniform(-0.2, -0.06, 50), rng.uniform(-0.05, 0.05, 50)])
    a = rng.uniform(0, 1, 50)
    x, l, L = wrap_batch(P, Q, 0.05, -1, a)
    for k in range(50):
        xs, ls, Ls = analytic_wrap(P[k], Q[k], 0.05, "negative", a[k])
        assert np.array_equal(xs, x[k]) and ls == l[k] and Ls == L[k]


# -- dataset --------------------------------------------------------------------


def ranges(**kw):
    base = dict(x_ori_lo=(0.08, 0.2, -0.03), x_ori_hi=(0.12, 0.66, 0.03),
                x_ins_lo=(0.08, -2.36, -0.03), x_ins_hi=(0.13, 0.0, 0.03),
                radius=(0.04, 0.05), wrap_side=-1, frame="cylindrical")
    base.update(kw)
    return SamplingRanges(**base)


def test_dataset_discard_band_and_recount():
    rg = ranges()
    ds = generate_dataset(rg, 10_000, 0.01, seed=3)
    frac = ds.wrapped_len / ds.total_len
    assert not np.any((frac > 0) & (frac < 0.01))
    assert np.any(ds.wrapped_len == 0.0) and np.any(ds.wrapped_len > 0.0)
    P, Q, a, r = draw_candidates(rg, 10_000, 3)
    band = 0
    for k in range(10_000):
        _, l, L = analytic_wrap(P[k], Q[k], r[k], -1, a[k])
        band += 0.0 < l / L < 0.01
    assert ds.n_discarded == band and len(ds) + band == 10_000


def test_collapsed_ranges_give_identical_samples():
    p, q = (0.1, 0.1, 0.0), (0.1, -0.1, 0.0)  # chord misses the cylinder
    rg = SamplingRanges(p, p, q, q, radius=(0.03, 0.03), alpha=(0.4, 0.4))
    ds = generate_dataset(rg, 20, seed=0)
    assert len(ds) == 20 and ds.n_discarded == 0
    assert np.all(ds.wrapped_len == 0.0)
    assert np.all(ds.data == ds.data[0])


def test_dataset_errors():
    with pytest.raises(SamplingError):
        generate_dataset(ranges(), 0)
    with pytest.raises(ValueError):
        ranges(x_ori_lo=(0.2, 0.2, 0.0))
    with pytest.raises(SamplingError):  # every draw inside the cylinder
        generate_dataset(SamplingRanges((0, 0, 0), (0.01, 0.01, 0), (0, 0, 0), (0.01, 0.01, 0)), 5)


def test_dataset_csv_round_trip(tmp_path):
    ds = generate_dataset(ranges(), 200, seed=1)
    ds.save(tmp_path / "d.csv")
    back = WrapDataset.load(tmp_path / "d.csv")
    assert np.array_equal(back.data, ds.data)
    assert back.n_discarded == ds.n_discarded and back.ranges == ds.ranges


def test_dataset_is_deterministic():
    a = generate_dataset(ranges(), 500, seed=9)
    b = generate_dataset(ranges(), 500, seed=9)
    assert np.array_equal(a.data, b.data)


# -- MLP ------------------------------------------------------------------------


def random_net(rng, sizes=(8, 16, 16, 3)):
    return MLPWeights.init(list(sizes), rng, in_mean=rng.normal(size=sizes[0]) * 0.1,
                           in_scale=rng.uniform(0.05, 0.2, sizes[0]),
                           out_mean=rng.normal(size=sizes[-1]) * 0.1,
                           out_scale=rng.uniform(0.05, 0.2, sizes[-1]))


def test_zero_weights_give_output_mean(rng):
    net = random_net(rng)
    for W, b in zip(net.weights, net.biases):
        W[:] = 0.0
        b[:] = 0.0
    x = rng.normal(size=(4, 8))
    assert np.array_equal(mlp_forward(net, x), np.tile(net.out_mean, (4, 1)))
    assert np.array_equal(mlp_input_jacobian(net, x), np.zeros((4, 3, 8)))


def test_linear_network_picks_first_three_inputs(rng):
    W = np.hstack([np.eye(3), np.zeros((3, 5))])
    net = MLPWeights([W], [np.zeros(3)], np.zeros(8), np.ones(8), np.zeros(3), np.ones(3))
    x = rng.normal(size=(5, 8))
    assert np.array_equal(mlp_forward(net, x), x[:, :3])
    assert np.array_equal(mlp_input_jacobian(net, x[0]), W)


def test_input_jacobian_matches_fd(rng):
    net = random_net(rng)
    for _ in range(10):
        x = net.in_mean + net.in_scale * rng.normal(size=8)
        h = 1e-6 * net.in_scale
        fd = np.column_stack([(mlp_forward(net, x + h[k] * e) - mlp_forward(net, x - h[k] * e)) / (2 * h[k])
                              for k, e in enumerate(np.eye(8))])
        assert rel_err(mlp_input_jacobian(net, x), fd) < 1e-6


def test_forward_is_smooth_second_order_fd(rng):
    net = random_net(rng)
    x = net.in_mean + net.in_scale * rng.normal(size=8)
    d = rng.normal(size=8) * net.in_scale
    J = mlp_input_jacobian(net, x) @ d
    errs = []
    for h in (1e-2, 5e-3):
        fd = (mlp_forward(net, x + h * d) - mlp_forward(net, x - h * d)) / (2 * h)
        errs.append(np.abs(fd - J).max())
    assert 3.5 < errs[0] / errs[1] < 4.5


def test_weights_json_round_trip(tmp_path, rng):
    net = random_net(rng)
    net.meta["wrap_side"] = -1
    net.save(tmp_path / "w.json")
    back = MLPWeights.load(tmp_path / "w.json")
    x = rng.normal(size=(3, 8))
    assert np.array_equal(mlp_forward(back, x), mlp_forward(net, x)) and back.meta == net.meta


def test_training_memorizes_and_shuffled_labels_do_worse():
    rng = np.random.default_rng(0)
    X = rng.uniform(-1, 1, size=(8, 8))
    Y = np.column_stack([np.sin(X[:, 0]), X[:, 1] * X[:, 2], np.cos(X[:, 3])])
    cfg = TrainConfig(hidden=(32, 32), learning_rate=3e-3, steps=2000, batch_size=8)
    assert mlp_train(X, Y, cfg, seed=0).final_loss < 1e-4

    # a smooth target generalizes across a larger set; shuffled labels cannot be fit as well
    X = rng.uniform(-1, 1, size=(400, 8))
    Y = np.column_stack([np.sin(X[:, 0]), X[:, 1] * X[:, 2], np.cos(X[:, 3])])
    cfg = TrainConfig(hidden=(16, 16), learning_rate=3e-3, steps=1500, batch_size=64)
    real = mlp_train(X, Y, cfg, seed=0).final_loss
    shuffled = mlp_train(X, Y[rng.permutation(400)], cfg, seed=0).final_loss
    assert shuffled > 10 * real


def test_training_is_deterministic():
    rng = np.random.default_rng(1)
    X, Y = rng.normal(size=(50, 8)), rng.normal(size=(50, 3))
    cfg = TrainConfig(hidden=(8,), steps=50, batch_size=16)
    a, b = mlp_train(X, Y, cfg, seed=4), mlp_train(X, Y, cfg, seed=4)
    assert all(np.array_equal(p, q) for p, q in zip(a.weights.weights, b.weights.weights))


# -- Type III surrogate ---------------------------------------------------------


def test_bundled_weights_track_oracle_on_both_sides(scenes):
    net = scenes("wrap_pendulum").model.muscles[0].weights
    rg = SamplingRanges.from_dict(net.meta["sampling_ranges"])
    ds = generate_dataset(rg, 2000, seed=11)
    pred = mlp_forward(net, ds.inputs)
    err = np.linalg.norm(pred - ds.targets, axis=1)
    assert np.sqrt(np.mean(err**2)) < 0.01 * ds.total_len.mean()
    # the opposite side is served by mirroring
    ev = SurrogateEvaluator(WrapCylinder(-1, radius=0.045, wrap_side=1), net)
    M = np.diag([1.0, -1.0, 1.0])
    X = ds.inputs[:200]
    x, _, L = wrap_batch(X[:, :3] @ M, X[:, 3:6] @ M, X[:, 7], 1, X[:, 6])
    got = np.array([ev.positions(xo @ M, xi @ M, [a])[0] for xo, xi, a in zip(X[:, :3], X[:, 3:6], X[:, 6])])
    assert np.sqrt(np.mean(np.sum((got - x) ** 2, axis=1))) < 0.01 * L.mean()


def test_type3_zero_rate_and_rigid_transport(scenes):
    sc = scenes("wrap_pendulum")
    sk, mus = sc.model.skeleton, sc.model.muscles[0]
    kin = sk.kinematics(sc.initial_state.q, np.zeros(2))
    Jam, Jam_dot, _ = mus.mass_points(kin)
    assert np.array_equal(Jam @ kin.twists.ravel(), np.zeros(Jam.shape[0]))
    assert np.abs(Jam_dot).max() == 0.0
    # root-only rotation carries cylinder and both anchors rigidly
    w = 1.3
    kin = sk.kinematics(sc.initial_state.q, np.array([w, 0.0]))
    Jam, _, x = mus.mass_points(kin)
    v = (Jam @ kin.twists.ravel()).reshape(-1, 3)
    assert rel_err(v, np.cross([0, 0, w], x)) < 1e-6
    e_vel, _ = reduced_mass_point_errors(mus.mass_points, sk, sc.initial_state.q, np.array([w, 0.0]))
    assert e_vel < 1e-6


def test_type3_fig2_fd(scenes, rng):
    sc = scenes("fig2_type3")
    sk, mus = sc.model.skeleton, sc.model.muscles[0]
    for _ in range(10):
        q = sc.initial_state.q + rng.uniform(-0.2, 0.2, sc.dof)
        e_vel, e_rate = reduced_mass_point_errors(mus.mass_points, sk, q, rng.normal(size=sc.dof))
        assert e_vel < 1e-4 and e_rate < 1e-3


@pytest.mark.parametrize("side", [1, -1])
def test_type3_random_network_mixed_chain_fd(side):
    rng = np.random.default_rng(5)
    sk = mixed_chain(rng)
    net = random_net(rng)
    net.meta["wrap_side"] = 1
    cyl = WrapCylinder(1, Transform.from_rotvec([0.1, 0.2, 0.3], [0.01, 0.02, 0.0]), 0.04, side)
    o, i = Anchor(0, [0.05, 0.1, 0]), Anchor(2, [0.04, 0.0, -0.02])
    layout = MassPointLayout.uniform(5, 0.5)

    def fn(kin, wd):
        return typeIII_jacobians(cyl, net, o, i, layout, kin, wd)

    for _ in range(5):
        q, v = 0.7 * rng.normal(size=sk.dof), rng.normal(size=sk.dof)
        e_vel, e_rate = reduced_mass_point_errors(fn, sk, q, v)
        assert e_vel < 1e-6 and e_rate < 1e-3


def test_type3_world_cylinder_fd(rng):
    sk = double_pendulum()
    net = random_net(rng)
    cyl = WrapCylinder(-1, Transform.from_translation([0.0, -0.3, 0.0]), 0.04, 1)
    o, i = Anchor(0, [0.05, 0.1, 0]), Anchor(1, [0.03, -0.05, 0])
    layout = MassPointLayout.uniform(4, 0.4)

    def fn(kin, wd):
        return typeIII_jacobians(cyl, net, o, i, layout, kin, wd)

    for _ in range(5):
        e_vel, e_rate = reduced_mass_point_errors(fn, sk, rng.uniform(-1, 1, 2), rng.normal(size=2))
        assert e_vel < 1e-6 and e_rate < 1e-3


# -- sweeps across the tangency ---------------------------------------------------


def test_detached_sweep_tracks_oracle(scenes):
    rep = elbow_sweep(scenes, -0.35, 0.6, 40)
    assert np.all(rep.wrapped_len == 0.0)
    assert rep.position_error().max() < 1e-2


def test_tangency_sweep_jump_ratio(scenes):
    rep = elbow_sweep(scenes, -1.0, 0.6, 161)
    assert np.any(rep.wrapped_len == 0.0) and np.any(rep.wrapped_len > 0.0)
    assert rep.max_jump_oracle >= 10 * rep.max_jump_network
    assert rep.relative_rmse() < 0.01


def test_identical_sweeps_are_bit_identical(scenes, tmp_path):
    a = elbow_sweep(scenes, -1.0, 0.6, 30)
    b = elbow_sweep(scenes, -1.0, 0.6, 30)
    a.write_csv(tmp_path / "a.csv")
    b.write_csv(tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
