import numpy as np
import pytest
from hypothesis import given, settings, assume, strategies as st

from ris_locate import geometry as geo
from ris_locate.geometry import GeometryError, RisPose

TX, RX = np.array([0.0, 2.0]), np.array([2.0, 2.0])
C = 3e8

angles = st.floats(-10.0, 10.0, allow_nan=False)
coords = st.floats(-5.0, 5.0, allow_nan=False)


def test_rotation_examples():
    np.testing.assert_allclose(geo.rotation_matrix(0.0), np.eye(2))
    np.testing.assert_allclose(geo.rotation_matrix(np.pi / 2), [[0, -1], [1, 0]], atol=1e-15)
    np.testing.assert_allclose(geo.rotation_matrix(np.pi / 6), [[0.86603, -0.5], [0.5, 0.86603]], atol=1e-5)


def test_rotation_derivative_matches_fd():
    a, h = 0.7, 1e-6
    fd = (geo.rotation_matrix(a + h) - geo.rotation_matrix(a - h)) / (2 * h)
    np.testing.assert_allclose(geo.rotation_matrix_derivative(a), fd, atol=1e-9)


@given(angles)
def test_rotation_orthogonal(a):
    R = geo.rotation_matrix(a)
    np.testing.assert_allclose(R.T @ R, np.eye(2), atol=1e-14)


def test_element_positions_examples():
    p = geo.element_positions(RisPose((0, 0), 0.0), 0.005, 3)
    np.testing.assert_allclose(p, [[-0.005, 0], [0, 0], [0.005, 0]], atol=1e-18)
    one = geo.element_positions(RisPose((1.5, -2.0), 1.1), 0.005, 1)
    np.testing.assert_allclose(one, [[1.5, -2.0]])
    p64 = geo.element_positions(RisPose((0, 0), np.pi / 6), 0.005, 64)
    x0 = -31.5 * 0.005
    np.testing.assert_allclose(p64[0], [x0 * np.cos(np.pi / 6), x0 * np.sin(np.pi / 6)], atol=1e-16)
    np.testing.assert_allclose(p64[0], [-0.136399, -0.07875], atol=1e-6)


@given(coords, coords, angles, st.integers(1, 257))
def test_element_centroid(x, y, a, M):
    p = geo.element_positions(RisPose((x, y), a), 0.005, M)
    np.testing.assert_allclose(p.mean(axis=0), [x, y], atol=1e-12)


def test_pose_wraps_alpha():
    assert RisPose((0, 0), 3 * np.pi).alpha == pytest.approx(np.pi)
    assert RisPose((0, 0), -np.pi).alpha == pytest.approx(np.pi)
    with pytest.raises(ValueError):
        RisPose((np.nan, 0), 0.0)


def test_path_delay():
    assert geo.path_delay(TX, RX, (0, 0), C) == pytest.approx((2 + np.sqrt(8)) / C, rel=1e-15)
    assert geo.path_delay(TX, RX, (0, 0), C) == pytest.approx(1.60948e-8, rel=1e-5)
    assert geo.path_delay((0, 0), (2, 0), (1, 0), C) == pytest.approx(2 / C)
    with pytest.raises(GeometryError):
        geo.path_delay(TX, RX, TX, C)


def test_anchor_angles():
    th_tx, th_rx = geo.anchor_angles(TX, RX, (0, 0))
    assert th_tx == pytest.approx(0.0, abs=1e-15)
    assert th_rx == pytest.approx(-np.pi / 4)
    assert geo.anchor_angles((0, 5), (3, 0), (0, 0)) == pytest.approx((0.0, -np.pi / 2))


@given(coords, coords, coords, coords)
def test_anchor_angles_wrapped(x, y, u, v):
    assume(np.hypot(x - u, y - v) > 1e-6 and np.hypot(u, v) > 1e-6 and np.hypot(x, y) > 1e-6)
    for th in geo.anchor_angles((u, v), (x, y), (0.0, 0.0)):
        assert -np.pi < th <= np.pi


def test_omega_of():
    assert geo.omega_of(0.0, -np.pi / 4, np.pi / 6) == pytest.approx(0.24118, abs=1e-5)
    assert geo.omega_of(0.0, 0.0, 0.0) == 0.0
    assert geo.omega_of(np.pi / 2 - 0.3, np.pi / 2 - 0.3, 0.3) == pytest.approx(2.0)


def test_ellipse_reference_scene():
    e = geo.ellipse_from_toa(TX, RX, geo.path_delay(TX, RX, (0, 0), C), C)
    np.testing.assert_allclose(e.center, [1, 2])
    assert e.beta == 0.0
    assert e.semi_major == pytest.approx(2.41421, abs=1e-5)
    assert e.semi_minor == pytest.approx(2.19737, abs=1e-5)
    nu = np.arctan2(-2 / e.semi_minor, -1 / e.semi_major)
    assert nu == pytest.approx(-1.99787, abs=1e-5)
    np.testing.assert_allclose(geo.ellipse_point(e, nu), [0, 0], atol=1e-9)
    assert geo.ellipse_nu(e, (0, 0)) == pytest.approx(nu, abs=1e-12)
    np.testing.assert_allclose(geo.ellipse_point(e, 0.0), e.center + [e.semi_major, 0])


def test_ellipse_degenerate_cases():
    e = geo.ellipse_from_toa((1, 1), (1, 1), 2e-8, C)
    assert e.semi_major == pytest.approx(3.0) and e.semi_minor == pytest.approx(3.0)
    with pytest.raises(GeometryError):
        geo.ellipse_from_toa(TX, RX, 2.0 / C, C)


@settings(max_examples=300)
@given(coords, coords, coords, coords, st.floats(0.01, 10.0), st.floats(-10, 10))
def test_ellipse_sum_of_distances(x1, y1, x2, y2, extra, nu):
    sep = np.hypot(x1 - x2, y1 - y2)
    tau = (sep + extra) / C
    e = geo.ellipse_from_toa((x1, y1), (x2, y2), tau, C)
    assert e.semi_major >= e.semi_minor >= 0
    p = geo.ellipse_point(e, nu)
    total = np.hypot(*(p - (x1, y1))) + np.hypot(*(p - (x2, y2)))
    assert total == pytest.approx(2 * e.semi_major, rel=1e-12)


def test_alpha_from_nu_examples():
    e = geo.ellipse_from_toa(TX, RX, geo.path_delay(TX, RX, (0, 0), C), C)
    nu = geo.ellipse_nu(e, (0, 0))
    w = geo.omega_of(0.0, -np.pi / 4, np.pi / 6)
    assert geo.alpha_from_nu(nu, w, e, TX, RX) == pytest.approx(np.pi / 6, abs=1e-9)
    assert geo.alpha_from_nu(nu, 2.5, e, TX, RX) is None
    # symmetric anchors on both sides of boresight
    e2 = geo.ellipse_from_toa((-1, 0), (1, 0), 2 * np.hypot(1, 1) / C, C)
    nu2 = geo.ellipse_nu(e2, (0, -1))
    assert geo.alpha_from_nu(nu2, 0.0, e2, (-1, 0), (1, 0)) == pytest.approx(0.0, abs=1e-12)


@settings(max_examples=300)
@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(-np.pi, np.pi), st.floats(-3, 3), st.floats(-3, 3),
       st.floats(-3, 3), st.floats(-3, 3))
def test_alpha_round_trip(px, py, alpha, tx, ty, rx, ry):
    p, a_tx, a_rx = np.array([px, py]), np.array([tx, ty]), np.array([rx, ry])
    assume(min(np.linalg.norm(p - a_tx), np.linalg.norm(p - a_rx), np.linalg.norm(a_tx - a_rx)) > 0.2)
    th_tx, th_rx = geo.anchor_angles(a_tx, a_rx, p)
    assume(abs(np.cos((th_tx - th_rx) / 2)) > 0.05)
    w = geo.omega_of(th_tx, th_rx, alpha)
    e = geo.ellipse_from_toa(a_tx, a_rx, geo.path_delay(a_tx, a_rx, p, C), C)
    nu = geo.ellipse_nu(e, p)
    cands = [geo.alpha_from_nu(nu, w, e, a_tx, a_rx, br) for br in (0, 1)]
    assert all(c is not None for c in cands)
    for c in cands:
        assert -np.pi < c <= np.pi
        assert geo.omega_of(th_tx, th_rx, c) == pytest.approx(w, abs=1e-10)
    assert min(abs(geo.wrap_angle(c - alpha)) for c in cands) < 1e-9


def test_pose_omega_uses_physical_sign():
    # element phases grow along the array axis at the rate given by pose_omega
    w = geo.pose_omega(TX, RX, RisPose((0, 0), np.pi / 6))
    assert w == pytest.approx(geo.omega_of(0.0, -np.pi / 4, -np.pi / 6))


def test_anchors_in_front():
    front = geo.anchors_in_front(TX, RX, np.array([[0.0, 0.0], [0.0, 0.0]]), np.array([np.pi / 6, np.pi + np.pi / 6]))
    assert front.tolist() == [True, False]


def test_fraunhofer_distance():
    assert geo.fraunhofer_distance(64, 0.005, 0.01) == pytest.approx(20.48)
    assert geo.fraunhofer_distance(1, 0.005, 0.01) == pytest.approx(2 * 0.005 ** 2 / 0.01)
