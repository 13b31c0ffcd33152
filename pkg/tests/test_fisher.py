import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from varmetro import fisher, qcore
from varmetro.channels import (
    AMPLITUDE_DAMPING, DEPHASING, INHOMOGENEOUS_PAULI, ORNSTEIN_UHLENBECK, NoiseModel, sense,
)
from varmetro.errors import NumericalError
from varmetro.probes import GHZ, dicke, ghz, preparation_circuit, product_plus

ALL_KINDS = [DEPHASING, AMPLITUDE_DAMPING, INHOMOGENEOUS_PAULI, ORNSTEIN_UHLENBECK]
NOISELESS = NoiseModel(DEPHASING, rate=1e-300)


def circuit_unitary(n, gates):
    u = np.eye(2 ** n, dtype=complex)
    for gate, targets in gates:
        u = qcore.apply_left(u, gate, targets)
    return u


# classical Fisher information

def test_cfi_examples():
    assert fisher.cfi([0.5, 0.5], [0.0, 0.0]) == 0.0
    t, x = 1.7, 0.3
    p = [np.cos(x) ** 2, np.sin(x) ** 2]
    dp = [-2 * t * np.cos(x) * np.sin(x), 2 * t * np.cos(x) * np.sin(x)]
    assert fisher.cfi(p, dp) == pytest.approx(4 * t * t, rel=1e-12)


def test_cfi_errors():
    with pytest.raises(ValueError):
        fisher.cfi([0.5, 0.6], [0.0, 0.0])
    with pytest.raises(ValueError):
        fisher.cfi([0.5, 0.5], [0.1, 0.0])
    with pytest.raises(NumericalError):
        fisher.cfi([1.0, 0.0], [-1e-3, 1e-3])
    assert fisher.cfi([1.0, 0.0], [1e-12, -1e-12]) == pytest.approx(1e-24)


# SLD route

def test_qfi_sld_examples():
    for n in (1, 2, 3, 5):
        t = 1.0 if n != 2 else 0.7
        gen = t * qcore.collective_operator("Jz", n)
        for psi, expected in ((ghz(n), n * n * t * t), (product_plus(n), n * t * t)):
            rho = qcore.ket_to_dm(psi)
            drho = -1j * (gen @ rho - rho @ gen)
            assert fisher.qfi_sld(rho, drho) == pytest.approx(expected, rel=1e-10)
    rho = qcore.ket_to_dm(ghz(3))
    assert fisher.qfi_sld(rho, np.zeros_like(rho)) == 0.0
    with pytest.raises(ValueError):
        fisher.qfi_sld(rho, np.eye(8))


def test_sld_is_hermitian(rng):
    for _ in range(20):
        rho = qcore.random_density_matrix(2, rng)
        h = qcore.random_density_matrix(2, rng)
        drho = -1j * (h @ rho - rho @ h)
        l, _, _ = fisher.sld(rho, drho)
        assert np.max(np.abs(l - l.conj().T)) < 1e-9


def test_qfi_equals_four_variance_for_pure_states(rng):
    n = 3
    gen = qcore.collective_operator("Jz", n)
    for _ in range(20):
        psi = qcore.random_pure_state(n, rng)
        var = np.real(np.vdot(psi, gen @ gen @ psi) - np.vdot(psi, gen @ psi) ** 2)
        rho = qcore.ket_to_dm(psi)
        assert fisher.qfi_sld(rho, -1j * (gen @ rho - rho @ gen)) == pytest.approx(4 * var, rel=1e-9)


# fidelity route

def test_qfi_fidelity_examples():
    assert fisher.qfi_fidelity(ghz(3), NOISELESS, 1.0, 1e-4) == pytest.approx(9, rel=1e-3)
    assert fisher.qfi_fidelity(ghz(3), NoiseModel(DEPHASING), 0.0) == 0.0
    with pytest.raises(ValueError):
        fisher.qfi_fidelity(ghz(3), NoiseModel(DEPHASING), 20.0, 1e-4)


def test_fidelity_estimate_breakdown():
    with pytest.raises(NumericalError):
        fisher.fidelity_estimate(1 + 1e-6, 1e-4)
    assert fisher.fidelity_estimate(1.0, 1e-4) == 0.0


@pytest.mark.parametrize("n", [1, 2, 4, 6])
def test_ghz_noiseless_heisenberg_scaling(n):
    for t in (0.3, 1.0):
        assert fisher.qfi_fidelity(ghz(n), NOISELESS, t, 1e-4) == pytest.approx(n * n * t * t, rel=1e-3)
        assert fisher.qfi_commuting(ghz(n), NOISELESS, t) == pytest.approx(n * n * t * t, rel=1e-10)
        assert fisher.qfi_commuting(product_plus(n), NOISELESS, t) == pytest.approx(n * t * t, rel=1e-10)


@pytest.mark.parametrize("n", [2, 3, 4, 6])
def test_ghz_dephasing_optimum(n):
    model = NoiseModel(DEPHASING)
    t = 1 / (2 * n)
    for method in fisher.METHODS:
        assert fisher.dimensionless_precision(ghz(n), model, t, method=method) == pytest.approx(n / (2 * np.e), rel=1e-3)


def test_dimensionless_precision_examples():
    model = NoiseModel(DEPHASING)
    assert fisher.dimensionless_precision(ghz(4), model, 1 / 8) == pytest.approx(4 / (2 * np.e), rel=1e-2)
    assert fisher.dimensionless_precision(product_plus(4), model, 1 / 2) == pytest.approx(4 / (2 * np.e), rel=1e-2)
    with pytest.raises(ValueError):
        fisher.dimensionless_precision(ghz(4), model, 0.0)
    with pytest.raises(ValueError):
        fisher.qfi(ghz(2), model, 0.5, method="bures")


@pytest.mark.parametrize("kind", ALL_KINDS)
def test_rate_invariance(kind, rng):
    psi = qcore.random_pure_state(3, rng)
    t = 0.4
    slow = fisher.dimensionless_precision(psi, NoiseModel(kind, rate=1.0), t, domega=1e-4)
    fast = fisher.dimensionless_precision(psi, NoiseModel(kind, rate=10.0), t / 10, domega=1e-3)
    assert fast == pytest.approx(slow, rel=1e-6)


@pytest.mark.parametrize("kind", ALL_KINDS)
def test_fidelity_and_sld_oracles_agree(kind):
    rng = np.random.default_rng(hash(kind) % 2 ** 32)
    model = NoiseModel(kind)
    for _ in range(50):
        n = int(rng.integers(2, 4))
        psi = qcore.random_pure_state(n, rng)
        t = float(rng.uniform(0.05, 1.0))
        a = fisher.qfi_fidelity(psi, model, t)
        b = fisher.qfi_sld_numeric(psi, model, t)
        assert a == pytest.approx(b, rel=1e-3)


@pytest.mark.parametrize("kind", [DEPHASING, AMPLITUDE_DAMPING, ORNSTEIN_UHLENBECK])
def test_commuting_route_matches_numeric_sld(kind, rng):
    model = NoiseModel(kind)
    for _ in range(10):
        psi = qcore.random_pure_state(3, rng)
        t = float(rng.uniform(0.05, 1.5))
        assert fisher.qfi_commuting(psi, model, t) == pytest.approx(fisher.qfi_sld_numeric(psi, model, t), rel=1e-6)
    with pytest.raises(ValueError):
        fisher.qfi_commuting(psi, NoiseModel(INHOMOGENEOUS_PAULI), 0.5)


def test_density_matrix_probe_accepted(rng):
    rho = qcore.random_density_matrix(2, rng)
    model = NoiseModel(AMPLITUDE_DAMPING)
    assert fisher.qfi_fidelity(rho, model, 0.5) == pytest.approx(fisher.qfi_commuting(rho, model, 0.5), rel=1e-3)


def _step_slope(psi, model, t, steps):
    rho0 = sense(psi, 0.0, t, model)
    vals = np.array([fisher.fidelity_estimate(qcore.fidelity(rho0, sense(psi, d, t, model)), d) for d in steps])
    inc = np.abs(np.diff(vals))
    return np.polyfit(np.log(steps[:-1]), np.log(inc), 1)[0]


def test_fidelity_bias_is_first_order_for_noncommuting_noise():
    rng = np.random.default_rng(7)
    model = NoiseModel(INHOMOGENEOUS_PAULI)
    steps = 0.02 * 2.0 ** -np.arange(6)
    slopes = []
    for _ in range(10):
        psi = qcore.random_pure_state(int(rng.integers(1, 4)), rng)
        slopes.append(_step_slope(psi, model, float(rng.uniform(0.3, 1.0)), steps))
    assert abs(np.median(slopes) - 1) <= 0.3


@pytest.mark.parametrize("kind", [DEPHASING, AMPLITUDE_DAMPING])
def test_fidelity_bias_is_second_order_for_commuting_noise(kind, rng):
    # the estimator is even in the step when the noise commutes with the field
    steps = 0.2 * 2.0 ** -np.arange(6)
    for _ in range(3):
        slope = _step_slope(qcore.random_pure_state(2, rng), NoiseModel(kind), 0.5, steps)
        assert abs(slope - 2) <= 0.3


def test_default_step_halving_changes_little(rng):
    psi = qcore.random_pure_state(3, rng)
    for kind in ALL_KINDS:
        model = NoiseModel(kind)
        a = fisher.qfi_fidelity(psi, model, 0.5, 1e-4)
        b = fisher.qfi_fidelity(psi, model, 0.5, 5e-5)
        assert abs(a - b) <= 1e-3 * b


def test_ghz_dephasing_precision_is_unimodal():
    model = NoiseModel(DEPHASING)
    grid = np.linspace(0.01, 2.0, 200)
    vals = np.array([fisher.dimensionless_precision(ghz(4), model, t) for t in grid])
    d = np.sign(np.diff(vals))
    assert np.count_nonzero(np.diff(d) != 0) == 1
    assert 0 < np.argmax(vals) < len(grid) - 1


# device CFI

def test_device_cfi_ghz_saturates():
    for n in (2, 3, 4):
        decoder = circuit_unitary(n, preparation_circuit(GHZ, n, [0.0])).conj().T
        t = 0.8
        val = fisher.device_cfi(ghz(n, np.pi / 2), NOISELESS, t, decoder, domega=1e-6)
        assert val == pytest.approx(n * n * t * t, rel=1e-3)


def test_device_cfi_blind_identity():
    rho = np.diag([0.5, 0.25, 0.125, 0.125]).astype(complex)
    assert fisher.device_cfi(rho, NoiseModel(DEPHASING), 0.5, np.eye(4)) == pytest.approx(0, abs=1e-9)
    with pytest.raises(ValueError):
        fisher.device_cfi(rho, NoiseModel(DEPHASING), 0.5, np.ones((4, 4)))


def test_device_cfi_respects_quantum_bound():
    rng = np.random.default_rng(11)
    psi = dicke(2, 0) * np.sqrt(0.5) + ghz(2) * np.sqrt(0.5)
    psi = psi / np.linalg.norm(psi)
    for kind in (DEPHASING, AMPLITUDE_DAMPING):
        model = NoiseModel(kind)
        bound = fisher.qfi_fidelity(psi, model, 0.6)
        for _ in range(100):
            u = qcore.random_unitary(4, rng)
            assert fisher.device_cfi(psi, model, 0.6, u) <= bound + 1e-6


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.sampled_from(ALL_KINDS), st.floats(0.05, 1.0))
def test_precision_nonnegative(seed, kind, t):
    psi = qcore.random_pure_state(2, np.random.default_rng(seed))
    model = NoiseModel(kind)
    for method in fisher.METHODS:
        assert fisher.dimensionless_precision(psi, model, t, method=method) >= 0
