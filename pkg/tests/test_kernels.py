import os
import subprocess
import sys

import numpy as np
import pytest

from varmetro import _kernels, qcore
from varmetro.probes import AnsatzLayout

NP = _kernels.numpy_backend
NB = _kernels.numba_backend

needs_numba = pytest.mark.skipif(NB is None, reason="numba not installed")


def rand_c(rng, *shape):
    return rng.normal(size=shape) + 1j * rng.normal(size=shape)


@needs_numba
@pytest.mark.parametrize("n", [1, 2, 3, 5])
def test_left_1q_backends_agree(n, rng):
    mat = rand_c(rng, 2 ** n, 3)
    u = qcore.random_unitary(2, rng)
    for bit in range(n):
        a = NP.left_1q(mat.copy(), u, bit)
        b = NB.left_1q(mat.copy(), u, bit)
        assert np.max(np.abs(a - b)) < 1e-13


@needs_numba
@pytest.mark.parametrize("n", [2, 3, 5])
def test_left_2q_backends_agree(n, rng):
    mat = rand_c(rng, 2 ** n, 2)
    u = qcore.random_unitary(4, rng)
    for a_bit in range(n):
        for b_bit in range(n):
            if a_bit == b_bit:
                continue
            a = NP.left_2q(mat.copy(), u, a_bit, b_bit)
            b = NB.left_2q(mat.copy(), u, a_bit, b_bit)
            assert np.max(np.abs(a - b)) < 1e-13


@needs_numba
@pytest.mark.parametrize("n", [1, 2, 4])
def test_superop_backends_agree(n, rng):
    rho = qcore.random_density_matrix(n, rng)
    s = rand_c(rng, 4, 4)
    for bit in range(n):
        assert np.max(np.abs(NP.superop_1q(rho.copy(), s, bit) - NB.superop_1q(rho.copy(), s, bit))) < 1e-13


@needs_numba
def test_qfi_unitary_backends_agree(rng):
    for d in (2, 8, 32):
        p = np.sort(rng.random(d))
        p[: d // 4] = 0.0
        p /= p.sum()
        g = rng.random((d, d))
        g = np.ascontiguousarray(g + g.T)
        assert NP.qfi_unitary(p, g, 1e-10) == pytest.approx(NB.qfi_unitary(p, g, 1e-10), rel=1e-12)


@needs_numba
@pytest.mark.parametrize("n", [1, 2, 3, 6])
def test_ansatz_backends_agree(n, rng):
    layout = AnsatzLayout()
    for blocks in (layout.codes, AnsatzLayout(("B2", "B1")).codes):
        count = int(sum(n if b == 1 else 2 * n for b in blocks))
        theta = rng.uniform(-np.pi, np.pi, count)
        a = NP.ansatz_ket(theta, n, blocks)
        b = NB.ansatz_ket(theta, n, blocks)
        assert np.max(np.abs(a - b)) < 1e-13


def test_numpy_left_1q_matches_kron(rng):
    n = 3
    mat = rand_c(rng, 8, 1)
    u = qcore.random_unitary(2, rng)
    for k in range(1, n + 1):
        dense = np.kron(np.kron(np.eye(2 ** (k - 1)), u), np.eye(2 ** (n - k)))
        assert np.allclose(NP.left_1q(mat, u, n - k), dense @ mat)


def _backend_name(env_value):
    env = dict(os.environ, VARMETRO_BACKEND=env_value)
    return subprocess.run([sys.executable, "-c", "from varmetro import _kernels; print(_kernels.BACKEND)"],
                          env=env, capture_output=True, text=True)


def test_env_flag_selects_backend():
    assert _backend_name("numpy").stdout.strip() == "numpy"
    if NB is not None:
        assert _backend_name("numba").stdout.strip() == "numba"
        assert _backend_name("auto").stdout.strip() == "numba"
    bad = _backend_name("fortran")
    assert bad.returncode != 0 and "VARMETRO_BACKEND" in bad.stderr


def test_numpy_backend_runs_library_end_to_end():
    code = (
        "import numpy as np\n"
        "from varmetro import _kernels, fisher\n"
        "from varmetro.channels import NoiseModel\n"
        "from varmetro.probes import ghz, ansatz_state\n"
        "assert _kernels.BACKEND == 'numpy'\n"
        "v = fisher.dimensionless_precision(ghz(4), NoiseModel('dephasing'), 0.125, method='sld')\n"
        "assert abs(v - 4 / (2 * np.e)) < 1e-9, v\n"
        "assert abs(np.linalg.norm(ansatz_state(3, np.linspace(0, 1, 30))) - 1) < 1e-12\n"
        "print('ok')\n"
    )
    env = dict(os.environ, VARMETRO_BACKEND="numpy")
    res = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True)
    assert res.stdout.strip() == "ok", res.stderr
