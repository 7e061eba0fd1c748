import mpmath
import numpy as np
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from branching_clt.expm import expm, expm_action


def test_zero_and_scalar():
    np.testing.assert_allclose(expm(np.zeros((3, 3))), np.eye(3), rtol=0, atol=1e-15)
    np.testing.assert_allclose(expm(np.array([[1.0]])), [[np.e]], rtol=1e-15)


def test_nilpotent_is_exact_polynomial():
    N = np.diag([1.0, 1.0], k=1)
    np.testing.assert_allclose(expm(3 * N), [[1, 3, 4.5], [0, 1, 3], [0, 0, 1]], rtol=1e-14)


def test_rotation():
    th = 0.7
    R = expm(np.array([[0, th], [-th, 0]]))
    np.testing.assert_allclose(R, [[np.cos(th), np.sin(th)], [-np.sin(th), np.cos(th)]], atol=1e-15)


@given(arrays(float, (4, 4), elements=st.floats(-3, 3)))
def test_matches_high_precision(a):
    mpmath.mp.dps = 40
    ref = np.array(mpmath.expm(mpmath.matrix(a.tolist())).tolist(), dtype=float)
    ours = expm(a)
    assert np.linalg.norm(ours - ref, 2) <= 1e-12 * max(1.0, np.linalg.norm(ref, 2))


@given(arrays(float, (3, 3), elements=st.floats(-2, 2)), st.floats(0, 2), st.floats(0, 2))
def test_semigroup_composition(a, s, t):
    lhs = expm(s * a) @ expm(t * a)
    rhs = expm((s + t) * a)
    assert np.abs(lhs - rhs).max() <= 1e-11 * max(1.0, np.abs(rhs).max())


def test_action_matches_matrix():
    a = np.array([[-1.0, 1.0], [2.0, -2.0]])
    f = np.array([1.0, -3.0])
    np.testing.assert_allclose(expm_action(a, 0.4, f), expm(0.4 * a) @ f, rtol=1e-14)
