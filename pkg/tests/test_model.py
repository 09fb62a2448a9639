import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from arxschur import linalg
from arxschur.errors import RejectedInputError
from arxschur.model import (
    ArxModel,
    build_pi,
    check_causality,
    check_strong_controllability,
    companion,
    load_model,
    pack_theta,
    pk_coefficient,
    random_causal_model,
    regressor,
    regressor_matrix,
    unpack_theta,
)


def pk_by_companion_powers(model, kmax):
    """P_k from the series of B(z)^{-1}: its m-th coefficient is the leading block of C^m."""
    d, p, q = model.d, model.p, model.q
    c = companion(model) if q else np.zeros((0, 0))
    binv = []
    power = np.eye(d * q) if q else None
    for m in range(kmax + 1):
        binv.append(power[:d, :d].copy() if q else (np.eye(d) if m == 0 else np.zeros((d, d))))
        if q:
            power = power @ c
    out = [np.zeros((d, d))]
    for k in range(1, kmax + 1):
        acc = np.zeros((d, d))
        for i in range(1, min(p, k) + 1):
            acc -= binv[k - i] @ model.A[i - 1]
        out.append(acc)
    return out


def alt_pi_matrix(model):
    A1, A2 = model.A
    B1, B2 = model.B
    A3 = np.zeros_like(A1)
    off = A2 - B1 @ A1
    return np.block([[A1, off], [off, A3 - B1 @ A2 + (B1 @ B1 - B2) @ A1]])


def test_p1_p2_closed_forms(rng):
    m = random_causal_model(rng, 2, 2, 2)
    np.testing.assert_array_equal(pk_coefficient(m, 1), -m.A[0])
    np.testing.assert_allclose(pk_coefficient(m, 2), m.B[0] @ m.A[0] - m.A[1], atol=1e-14)


def test_demo_p3(demo):
    np.testing.assert_allclose(demo.pk(3), np.diag([-9 / 8, -1 / 4]), atol=1e-15)


def test_pk_rejects_nonpositive(demo):
    with pytest.raises(RejectedInputError):
        pk_coefficient(demo, 0)


@pytest.mark.parametrize("dpq", [(1, 1, 1), (2, 2, 1), (2, 1, 3), (3, 3, 2), (1, 2, 3)])
def test_pk_matches_companion_oracle(dpq):
    r = np.random.default_rng(sum(dpq))
    m = random_causal_model(r, *dpq, rho=0.7)
    ref = pk_by_companion_powers(m, 40)
    for k in range(1, 41):
        np.testing.assert_allclose(m.pk(k), ref[k], atol=1e-10 * (1 + np.abs(ref[k]).max()))


def test_recursion_residual(rng):
    m = random_causal_model(rng, 2, 2, 3, rho=0.9)
    for k in range(1, 80):
        ak = m.A[k - 1] if k <= m.p else np.zeros((2, 2))
        res = m.pk(k) + ak
        for j in range(1, min(m.q, k - 1) + 1):
            res += m.B[j - 1] @ m.pk(k - j)
        assert np.abs(res).max() <= 1e-12 * (1 + np.abs(ak).max())


def test_geometric_decay_real_modes(rng):
    tol = 1e-10
    for _ in range(5):
        b = np.diag(rng.uniform(-0.8, 0.8, size=2))
        m = ArxModel(2, 1, 1, (rng.standard_normal((2, 2)),), (b,), np.eye(2))
        causal, rho = check_causality(m, tol)
        assert causal
        for k in range(1, 150):
            ratio = linalg.frobenius(m.pk(k + 10)) / linalg.frobenius(m.pk(k))
            assert ratio <= (rho + 2 * tol) ** 10 + 1e-9


def test_geometric_decay_windowed(rng):
    # complex dominant pairs make ||P_k|| oscillate, so compare maxima over windows
    tol = 1e-10
    for _ in range(5):
        m = random_causal_model(rng, 2, 1, 2, rho=0.8)
        causal, rho = check_causality(m, tol)
        assert causal
        norms = np.array([linalg.frobenius(m.pk(k)) for k in range(1, 400)])
        for k in range(50, 350, 10):
            assert norms[k + 10:k + 30].max() <= 2.0 * (rho + 2 * tol) ** 10 * norms[k:k + 20].max()


def test_q0_stream():
    m = ArxModel(2, 2, 0, (np.eye(2), 2 * np.eye(2)), (), np.eye(2))
    np.testing.assert_array_equal(m.pk(1), -np.eye(2))
    np.testing.assert_array_equal(m.pk(2), -2 * np.eye(2))
    for k in range(3, 10):
        assert not m.pk(k).any()


def test_causality_examples(demo):
    q0 = ArxModel(1, 1, 0, ([[0.5]],), (), [[1.0]])
    assert check_causality(q0, 1e-10) == (True, 0.0)
    causal, rho = check_causality(demo, 1e-10)
    assert causal and abs(rho - 0.75) <= 1e-10
    bad = ArxModel(1, 1, 1, ([[1.0]],), ([[-1.25]],), [[1.0]])
    causal, rho = check_causality(bad, 1e-10)
    assert not causal and abs(rho - 1.25) <= 1.25e-10
    with pytest.raises(RejectedInputError):
        check_causality(demo, 0.1)


def test_causality_against_polynomial_roots(rng):
    for _ in range(20):
        d, q = int(rng.integers(1, 3)), int(rng.integers(1, 4))
        B = tuple(rng.standard_normal((d, d)) * 0.7 for _ in range(q))
        m = ArxModel(d, 1, q, (np.eye(d),), B, np.eye(d))
        # zeros of det B(z) via the companion eigenvalues of the reversed polynomial
        eig = np.linalg.eigvals(companion(m))
        expected = np.max(np.abs(eig))
        _, rho = check_causality(m, 1e-9)
        assert rho == pytest.approx(expected, rel=1e-6, abs=1e-8)


def test_pi_layouts(rng):
    m = random_causal_model(rng, 2, 1, 1)
    np.testing.assert_array_equal(build_pi(m), -m.A[0])

    m = random_causal_model(rng, 2, 2, 1)
    np.testing.assert_allclose(build_pi(m), m.B[0] @ m.A[0] - m.A[1], atol=1e-14)

    m = random_causal_model(rng, 2, 1, 2)
    pi = build_pi(m)
    P1, P2 = m.pk(1), m.pk(2)
    np.testing.assert_allclose(pi, np.block([[P1, P2], [np.zeros((2, 2)), P1]]), atol=1e-14)
    assert linalg.det(pi) == pytest.approx(np.linalg.det(m.A[0]) ** 2, rel=1e-10)

    m = random_causal_model(rng, 1, 3, 2)
    pi = build_pi(m)
    np.testing.assert_allclose(pi, [[m.pk(3)[0, 0], m.pk(4)[0, 0]], [m.pk(2)[0, 0], m.pk(3)[0, 0]]])


def test_pi_undefined_for_q0():
    with pytest.raises(RejectedInputError):
        build_pi(ArxModel(1, 1, 0, ([[0.5]],), (), [[1.0]]))


def test_alternative_pi_matrix_equivalence():
    r = np.random.default_rng(7)
    for _ in range(100):
        m = random_causal_model(r, 2, 2, 2, rho=0.8)
        det_pi = linalg.det(build_pi(m))
        det_rem = np.linalg.det(alt_pi_matrix(m))
        assert abs(det_pi) == pytest.approx(abs(det_rem), rel=1e-8, abs=1e-12)
        sc, _, _ = check_strong_controllability(m)
        assert sc == (abs(det_rem) > 1e-10 * np.linalg.norm(alt_pi_matrix(m)) ** 4)


def test_demo_strongly_controllable(demo):
    sc, causal, det_pi = check_strong_controllability(demo)
    assert sc and causal
    assert abs(det_pi) == pytest.approx(2.0, rel=1e-14)


def test_singular_a1_not_sc():
    m = ArxModel(2, 1, 1, (np.diag([1.0, 0.0]),), (np.diag([0.5, 0.25]),), np.eye(2))
    assert check_strong_controllability(m) == (False, True, 0.0)


def test_noncausal_not_sc():
    m = ArxModel(2, 1, 1, (np.eye(2),), (-1.25 * np.eye(2),), np.eye(2))
    sc, causal, det_pi = check_strong_controllability(m)
    assert not sc and not causal and abs(det_pi) == pytest.approx(1.0)


def test_sc_verdict_scale_invariant(rng):
    m = random_causal_model(rng, 2, 2, 2)
    for s in (1e-4, 1e4):
        scaled = ArxModel(2, 2, 2, tuple(s * a for a in m.A), m.B, m.Gamma)
        assert check_strong_controllability(scaled)[0] == check_strong_controllability(m)[0]


def test_q0_sc_convention():
    m = ArxModel(1, 1, 0, ([[0.5]],), (), [[1.0]])
    assert check_strong_controllability(m) == (True, True, 1.0)


def test_pack_theta(demo, rng):
    theta = pack_theta(demo)
    assert theta.shape == (4, 2)
    np.testing.assert_array_equal(theta, np.array([[2, 0], [0, 1], [0.75, 0], [0, -0.5]]))
    zero = ArxModel(2, 1, 2, (np.zeros((2, 2)),), (np.zeros((2, 2)),) * 2, np.eye(2))
    assert not pack_theta(zero).any()
    with pytest.raises(RejectedInputError):
        unpack_theta(np.zeros((5, 2)), 2, 1, 1)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_pack_roundtrip(seed):
    r = np.random.default_rng(seed)
    d, p, q = int(r.integers(1, 4)), int(r.integers(0, 4)), int(r.integers(0, 4))
    if p + q == 0:
        p = 1
    m = ArxModel(d, p, q, tuple(r.standard_normal((d, d)) for _ in range(p)),
                 tuple(r.standard_normal((d, d)) for _ in range(q)), np.eye(d))
    A, B = unpack_theta(pack_theta(m), d, p, q)
    for x, y in zip(A + B, m.A + m.B):
        assert np.array_equal(x, y)


def test_theta_reproduces_model_equation(rng):
    m = random_causal_model(rng, 2, 2, 3)
    X = rng.standard_normal((6, 2))
    U = rng.standard_normal((6, 2))
    n = 4
    phi = regressor(X, U, n, m.p, m.q)
    direct = sum(m.A[i] @ X[n - i] for i in range(m.p)) + sum(m.B[j - 1] @ U[n - j] for j in range(1, m.q + 1))
    np.testing.assert_allclose(pack_theta(m).T @ phi, direct, atol=1e-13)


def test_regressor_zero_history_and_matrix(rng):
    X = rng.standard_normal((5, 2))
    U = rng.standard_normal((5, 2))
    phi0 = regressor(X, U, 0, 2, 2)
    np.testing.assert_array_equal(phi0, np.r_[X[0], 0, 0, 0, 0, 0, 0])
    mat = regressor_matrix(X, U, 2, 2)
    for n in range(5):
        np.testing.assert_array_equal(mat[n], regressor(X, U, n, 2, 2))


def test_model_validation():
    with pytest.raises(RejectedInputError):
        ArxModel(2, 0, 0, (), (), np.eye(2))
    with pytest.raises(RejectedInputError):
        ArxModel(2, 1, 1, (np.eye(2),), (np.eye(3),), np.eye(2))
    with pytest.raises(RejectedInputError):
        ArxModel(2, 1, 1, (np.eye(2),), (np.eye(2),), np.array([[1.0, 2.0], [2.0, 1.0]]))
    with pytest.raises(RejectedInputError):
        ArxModel(2, 1, 1, (np.eye(2),), (np.eye(2),), np.array([[1.0, 0.1], [0.0, 1.0]]))
    with pytest.raises(RejectedInputError):
        ArxModel(1, 2, 0, ([[1.0]],), (), [[1.0]])


def test_load_model(tmp_path, models_dir, demo):
    m = load_model(models_dir / "demo.json")
    assert m.to_dict() == demo.to_dict()
    path = tmp_path / "m.json"
    path.write_text(json.dumps({"d": 2, "p": 1, "q": 0, "A": [[[0.5, 0], [0, 0.5]]]}))
    np.testing.assert_array_equal(load_model(path).Gamma, np.eye(2))
    path.write_text("{not json")
    with pytest.raises(RejectedInputError):
        load_model(path)
    path.write_text(json.dumps({"d": 2, "p": 1, "q": 0, "A": [[1, 2, 3]]}))
    with pytest.raises(RejectedInputError):
        load_model(path)
    path.write_text("[1, 2]")
    with pytest.raises(RejectedInputError):
        load_model(path)


def test_random_causal_model_radius(rng):
    for q in (1, 2, 3):
        m = random_causal_model(rng, 2, 1, q, rho=0.6)
        assert check_causality(m)[1] == pytest.approx(0.6, abs=1e-8)


def test_pk_stream_thread_safe(rng):
    from concurrent.futures import ThreadPoolExecutor

    m = random_causal_model(rng, 2, 2, 2)
    ref = pk_by_companion_powers(random_causal_model(np.random.default_rng(0), 2, 2, 2), 1)  # warm import
    del ref
    with ThreadPoolExecutor(8) as pool:
        got = list(pool.map(lambda k: m.pk(k), range(200, 0, -1)))
    for k, pk in zip(range(200, 0, -1), got):
        assert np.array_equal(pk, m.pk(k))
