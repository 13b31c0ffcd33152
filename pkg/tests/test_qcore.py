import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from varmetro import qcore
from varmetro.probes import ghz


def plus():
    return np.array([1, 1], dtype=complex) / np.sqrt(2)


def test_fidelity_examples(rng):
    rho = qcore.random_density_matrix(2, rng)
    assert qcore.fidelity(rho, rho) == pytest.approx(1.0, abs=1e-10)
    zero, one = qcore.ket_to_dm([1, 0]), qcore.ket_to_dm([0, 1])
    assert qcore.fidelity(zero, one) == pytest.approx(0.0, abs=1e-12)
    assert qcore.fidelity(zero, qcore.ket_to_dm(plus())) == pytest.approx(0.5, abs=1e-12)


def test_fidelity_errors(rng):
    with pytest.raises(ValueError):
        qcore.fidelity(np.eye(2) / 2, np.eye(4) / 4)
    bad = np.array([[0.5, 0.3], [0.0, 0.5]], dtype=complex)
    with pytest.raises(ValueError):
        qcore.fidelity(bad, np.eye(2) / 2)


def test_fidelity_pure_states_and_symmetry(rng):
    for _ in range(50):
        a, b = qcore.random_pure_state(3, rng), qcore.random_pure_state(3, rng)
        f = qcore.fidelity(qcore.ket_to_dm(a), qcore.ket_to_dm(b))
        assert f == pytest.approx(qcore.pure_fidelity(a, b), abs=1e-9)
    for _ in range(20):
        a = qcore.random_density_matrix(2, rng)
        b = qcore.random_density_matrix(2, rng, rank=2)
        assert qcore.fidelity(a, b) == pytest.approx(qcore.fidelity(b, a), abs=1e-9)
        assert 0 <= qcore.fidelity(a, b) <= 1 + 1e-12


def test_fidelity_matches_textbook_formula(rng):
    a = qcore.random_density_matrix(2, rng)
    b = qcore.random_density_matrix(2, rng)
    sa = qcore.hermitian_matrix_function(a, "sqrt")
    inner = qcore.hermitian_matrix_function(sa @ b @ sa, "sqrt")
    assert qcore.fidelity(a, b) == pytest.approx(np.trace(inner).real ** 2, abs=1e-10)


def test_partial_trace_examples():
    bell = np.array([1, 0, 0, 1], dtype=complex) / np.sqrt(2)
    assert np.allclose(qcore.partial_trace_keep(qcore.ket_to_dm(bell), 1), np.eye(2) / 2, atol=1e-12)
    prod = np.kron([1, 0], plus())
    assert np.allclose(qcore.partial_trace_keep(qcore.ket_to_dm(prod), 2), qcore.ket_to_dm(plus()), atol=1e-12)
    assert np.allclose(qcore.partial_trace_keep(ghz(3), 2), np.eye(2) / 2, atol=1e-12)
    with pytest.raises(ValueError):
        qcore.partial_trace_keep(ghz(3), 4)
    with pytest.raises(ValueError):
        qcore.partial_trace_keep(ghz(3), 0)


def test_partial_trace_of_tensor_product(rng):
    for n_rest in (1, 2, 3):
        rho = qcore.random_density_matrix(n_rest, rng)
        sigma = qcore.random_density_matrix(1, rng)
        joint = np.kron(rho, sigma)
        out = qcore.partial_trace_keep(joint, n_rest + 1)
        assert np.max(np.abs(out - sigma)) < 1e-12
        assert np.trace(out).real == pytest.approx(1.0, abs=1e-12)


def test_apply_unitary_examples():
    s = qcore.basis_state(2, 0)
    assert np.allclose(qcore.apply_unitary(s, qcore.X, 1), qcore.basis_state(2, 0b10))
    psi = np.array([0.6, 0.8j, 0, 0])
    assert np.allclose(qcore.apply_unitary(psi, np.eye(2), 2), psi)
    twice = qcore.apply_unitary(qcore.apply_unitary(psi, qcore.H, 1), qcore.H, 1)
    assert np.max(np.abs(twice - psi)) < 1e-12


def test_apply_unitary_rejects_non_unitary():
    with pytest.raises(ValueError):
        qcore.apply_unitary(qcore.basis_state(1, 0), np.array([[1, 1], [0, 1]]), 1)
    with pytest.raises(ValueError):
        qcore.apply_unitary(qcore.basis_state(2, 0), qcore.CNOT, (1, 1))
    with pytest.raises(ValueError):
        qcore.apply_unitary(qcore.basis_state(2, 0), qcore.X, 3)


def test_apply_unitary_matches_dense_kron(rng):
    n = 4
    for targets in [(1,), (3,), (2, 4), (4, 1), (1, 3, 4)]:
        u = qcore.random_unitary(1 << len(targets), rng)
        psi = qcore.random_pure_state(n, rng)
        # dense reference: permute target qubits to the front
        order = list(targets) + [q for q in range(1, n + 1) if q not in targets]
        t = psi.reshape((2,) * n).transpose([q - 1 for q in order]).reshape(1 << len(targets), -1)
        ref = (u @ t).reshape((2,) * n).transpose(np.argsort([q - 1 for q in order])).reshape(-1)
        assert np.allclose(qcore.apply_unitary(psi, u, targets), ref, atol=1e-12)


def test_apply_unitary_preserves_invariants(rng):
    # 1000 random gates on states and density matrices
    for i in range(1000):
        n = int(rng.integers(1, 4))
        k = 1 if n == 1 else int(rng.integers(1, 3))
        targets = tuple(int(x) for x in rng.choice(np.arange(1, n + 1), size=k, replace=False))
        u = qcore.random_unitary(1 << k, rng)
        if i % 2:
            out = qcore.apply_unitary(qcore.random_pure_state(n, rng), u, targets)
            assert abs(np.linalg.norm(out) - 1) < 1e-12
        else:
            out = qcore.apply_unitary(qcore.random_density_matrix(n, rng), u, targets)
            qcore.check_density_matrix(out)


def test_hermitian_matrix_function_examples():
    assert np.allclose(qcore.hermitian_matrix_function(np.eye(3), "sqrt"), np.eye(3))
    assert np.allclose(qcore.hermitian_matrix_function(np.zeros((2, 2)), "exp"), np.eye(2))
    assert np.allclose(qcore.hermitian_matrix_function(np.diag([4.0, 9.0]), "sqrt"), np.diag([2.0, 3.0]))
    assert np.allclose(qcore.hermitian_matrix_function(np.diag([1.0, np.e]), "log"), np.diag([0.0, 1.0]))
    with pytest.raises(ValueError):
        qcore.hermitian_matrix_function(np.diag([1.0, 0.0]), "log")
    with pytest.raises(ValueError):
        qcore.hermitian_matrix_function(np.diag([1.0, 2.0]), "cube")


def test_sqrt_clamps_negative_roundoff():
    m = np.diag([1.0, -1e-13])
    assert np.allclose(qcore.hermitian_matrix_function(m, "sqrt"), np.diag([1.0, 0.0]))


@pytest.mark.parametrize("n", range(1, 7))
def test_jz_eigenvalues(n):
    jz = qcore.collective_operator("Jz", n)
    for idx in range(1 << n):
        e = qcore.basis_state(n, idx)
        assert np.array_equal(jz @ e, ((n - 2 * bin(idx).count("1")) / 2) * e)


def test_collective_operators_commutation():
    n = 3
    jx, jy, jz = (qcore.collective_operator(k, n) for k in ("Jx", "Jy", "Jz"))
    assert np.allclose(jx @ jy - jy @ jx, 1j * jz)
    assert np.allclose(qcore.collective_operator("Jz2", n), jz @ jz)
    assert np.allclose(qcore.collective_operator("Jz", n),
                       sum(qcore.operator_on(qcore.Z, k, n) for k in range(1, n + 1)) / 2)


def test_qubit_one_is_most_significant():
    assert qcore.bits_to_index("100") == 4
    assert np.allclose(qcore.operator_on(qcore.X, 1, 3) @ qcore.basis_state(3, 0), qcore.basis_state(3, 4))


def test_renormalize():
    rho = np.diag([0.5, 0.5 + 1e-12]).astype(complex)
    assert np.array_equal(qcore.renormalize(rho), rho)
    out = qcore.renormalize(np.diag([1.0, 1.0]).astype(complex))
    assert np.trace(out).real == pytest.approx(1.0)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 4), st.integers(0, 2 ** 32 - 1))
def test_random_states_are_valid(n, seed):
    r = np.random.default_rng(seed)
    assert abs(np.linalg.norm(qcore.random_pure_state(n, r)) - 1) < 1e-12
    qcore.check_density_matrix(qcore.random_density_matrix(n, r))
    u = qcore.random_unitary(1 << n, r)
    qcore.check_unitary(u)
