import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from inertial_muscles.spatial import (
    Transform,
    compose,
    cross_matrix,
    exp_so3,
    gamma,
    invert,
    log_so3,
    orthonormalize,
    rotation_rate,
)

vec3 = arrays(np.float64, 3, elements=st.floats(-10, 10, allow_nan=False))
small_rotvec = arrays(np.float64, 3, elements=st.floats(-1.5, 1.5, allow_nan=False))


def transform(w, p):
    return Transform(exp_so3(w), p)


def test_cross_matrix_examples():
    assert np.array_equal(cross_matrix(np.zeros(3)), np.zeros((3, 3)))
    assert np.allclose(cross_matrix([1.0, 0, 0]) @ [0, 1.0, 0], [0, 0, 1.0])


@given(vec3, vec3)
def test_cross_matrix_matches_cross_product(v, w):
    assert np.allclose(cross_matrix(v) @ w, np.cross(v, w), atol=1e-12)


@given(vec3)
def test_cross_matrix_is_skew(x):
    assert np.array_equal(cross_matrix(x).T, -cross_matrix(x))


def test_gamma_examples():
    om, nu = np.array([0.3, -1.0, 2.0]), np.array([1.0, 2.0, 3.0])
    assert np.allclose(gamma(np.zeros(3)) @ np.r_[om, nu], nu)
    assert np.allclose(gamma(np.array([0.4, 0.5, 0.6])) @ np.r_[0, 0, 0, nu], nu)
    assert np.allclose(gamma(np.array([0, 0, 1.0])) @ np.r_[0, 1.0, 0, 0, 0, 0], [1.0, 0, 0])


def test_gamma_is_point_velocity_formula(rng):
    for _ in range(100):
        x, om, nu = rng.normal(size=(3, 3))
        assert np.allclose(gamma(x) @ np.r_[om, nu], np.cross(om, x) + nu, rtol=0, atol=1e-14)


def test_rotation_rate_examples():
    assert np.array_equal(rotation_rate(np.eye(3), np.zeros(3)), np.zeros((3, 3)))
    assert np.allclose(rotation_rate(np.eye(3), [0, 0, 1.0]), cross_matrix([0, 0, 1.0]))


def test_rotation_rate_matches_fd_of_rotating_frame(rng):
    om = rng.normal(size=3)
    t = 0.37
    errs = []
    for h in (1e-2, 5e-3):
        fd = (exp_so3(om * (t + h)) - exp_so3(om * (t - h))) / (2 * h)
        errs.append(np.abs(fd - rotation_rate(exp_so3(om * t), om)).max())
    assert errs[1] < errs[0] / 3.5  # O(h^2)


def test_compose_invert_examples(rng):
    b = transform(rng.normal(size=3), rng.normal(size=3))
    c = compose(Transform.identity(), b)
    assert np.allclose(c.rotation, b.rotation) and np.allclose(c.translation, b.translation)
    i = invert(Transform.identity())
    assert np.allclose(i.rotation, np.eye(3)) and np.allclose(i.translation, 0.0)
    for _ in range(20):
        a = transform(rng.normal(size=3), rng.normal(size=3))
        e = compose(invert(a), a)
        assert np.abs(e.rotation - np.eye(3)).max() < 1e-12
        assert np.abs(e.translation).max() < 1e-12


@settings(max_examples=50)
@given(small_rotvec, vec3, small_rotvec, vec3, small_rotvec, vec3)
def test_compose_is_associative(w1, p1, w2, p2, w3, p3):
    a, b, c = transform(w1, p1), transform(w2, p2), transform(w3, p3)
    l = compose(compose(a, b), c)
    r = compose(a, compose(b, c))
    assert np.abs(l.rotation - r.rotation).max() < 1e-12
    assert np.abs(l.translation - r.translation).max() < 1e-12


@given(small_rotvec)
def test_exp_log_round_trip(w):
    assert np.allclose(log_so3(exp_so3(w)), w, atol=1e-10)


def test_orthonormalize_repairs_drift(rng):
    R = exp_so3(rng.normal(size=3)) + 1e-6 * rng.normal(size=(3, 3))
    Q = orthonormalize(R)
    assert np.abs(Q.T @ Q - np.eye(3)).max() < 1e-12
    assert np.linalg.det(Q) > 0
