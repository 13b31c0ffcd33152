"""Dense N-qubit linear algebra.

States are plain numpy arrays: a pure state is a complex vector of length
2**N, a density matrix a complex (2**N, 2**N) array. Qubit 1 is the most
significant bit of the basis index. Qubit arguments are 1-based throughout.
"""

from functools import lru_cache

import numpy as np

from varmetro import _kernels
from varmetro.errors import NumericalError

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
PAULIS = {"I": I2, "X": X, "Y": Y, "Z": Z}

HERMITIAN_ATOL = 1e-10
UNITARY_ATOL = 1e-10
SQRT_FLOOR = 1e-14


def n_qubits_of(x) -> int:
    d = np.shape(x)[0]
    n = int(d).bit_length() - 1
    if d < 2 or (1 << n) != d:
        raise ValueError(f"dimension {d} is not a power of two >= 2")
    return n


def basis_state(n: int, index: int) -> np.ndarray:
    psi = np.zeros(1 << n, dtype=complex)
    psi[index] = 1.0
    return psi


def bits_to_index(bits) -> int:
    """Basis index of a bit string such as '0110' or [0, 1, 1, 0]."""
    idx = 0
    for b in bits:
        idx = (idx << 1) | int(b)
    return idx


def ket_to_dm(psi: np.ndarray) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex)
    return np.outer(psi, psi.conj())


def as_density_matrix(state) -> np.ndarray:
    state = np.asarray(state, dtype=complex)
    return ket_to_dm(state) if state.ndim == 1 else state


def rx(theta: float) -> np.ndarray:
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([[c, -1j * s], [-1j * s, c]], dtype=complex)


def ry(theta: float) -> np.ndarray:
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


def rz(theta: float) -> np.ndarray:
    return np.diag([np.exp(-0.5j * theta), np.exp(0.5j * theta)])


def controlled(u: np.ndarray) -> np.ndarray:
    """4x4 controlled-u with the control as the first (high) qubit."""
    out = np.eye(4, dtype=complex)
    out[2:, 2:] = u
    return out


CNOT = controlled(X)


def check_unitary(u: np.ndarray, atol: float = UNITARY_ATOL) -> None:
    d = u.shape[0]
    if u.shape != (d, d) or not np.allclose(u.conj().T @ u, np.eye(d), atol=atol, rtol=0):
        raise ValueError("gate is not unitary within tolerance")


def check_hermitian(m: np.ndarray, atol: float = HERMITIAN_ATOL) -> None:
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    dev = np.max(np.abs(m - m.conj().T)) if m.size else 0.0
    if dev > atol:
        raise ValueError(f"matrix is not Hermitian (max deviation {dev:.3g})")


def check_density_matrix(rho: np.ndarray, atol: float = HERMITIAN_ATOL, psd_atol: float = 1e-9) -> None:
    """Raise ValueError unless rho is Hermitian, unit trace and numerically PSD."""
    n_qubits_of(rho)
    check_hermitian(rho, atol)
    tr = np.trace(rho).real
    if abs(tr - 1) > atol:
        raise ValueError(f"trace is {tr!r}, expected 1")
    lo = np.linalg.eigvalsh(rho).min()
    if lo < -psd_atol:
        raise ValueError(f"density matrix has eigenvalue {lo:.3g} < 0")


def _targets_to_bits(targets, n):
    targets = tuple(int(t) for t in np.atleast_1d(targets))
    if len(set(targets)) != len(targets):
        raise ValueError(f"targets must be distinct, got {targets}")
    for t in targets:
        if not 1 <= t <= n:
            raise ValueError(f"qubit index {t} out of range 1..{n}")
    return targets, [n - t for t in targets]


def apply_left(mat: np.ndarray, gate: np.ndarray, targets) -> np.ndarray:
    """Left-multiply the row index of ``mat`` (d x m) by ``gate`` on ``targets``.

    No unitarity check; this is the building block used by the circuit code.
    """
    n = n_qubits_of(mat)
    targets, bits = _targets_to_bits(targets, n)
    mat = np.ascontiguousarray(mat, dtype=complex)
    gate = np.ascontiguousarray(gate, dtype=complex)
    if len(bits) == 1:
        return _kernels.left_1q(mat, gate, bits[0])
    if len(bits) == 2:
        return _kernels.left_2q(mat, gate, bits[0], bits[1])
    k = len(bits)
    t = mat.reshape((2,) * n + (mat.shape[1],))
    axes = [n - 1 - b for b in bits]
    out = np.tensordot(gate.reshape((2,) * (2 * k)), t, axes=(list(range(k, 2 * k)), axes))
    out = np.moveaxis(out, list(range(k)), axes)
    return np.ascontiguousarray(out).reshape(mat.shape)


def apply_unitary(state: np.ndarray, gate: np.ndarray, targets) -> np.ndarray:
    """Apply a unitary on the given (1-based) qubits of a pure state or density matrix."""
    gate = np.asarray(gate, dtype=complex)
    check_unitary(gate)
    targets = tuple(np.atleast_1d(targets))
    if gate.shape[0] != 1 << len(targets):
        raise ValueError("gate size does not match the number of targets")
    state = np.asarray(state, dtype=complex)
    if state.ndim == 1:
        return apply_left(state[:, None], gate, targets)[:, 0]
    half = apply_left(state, gate, targets)
    return apply_left(half.conj().T, gate, targets).conj().T


def apply_superop_1q(rho: np.ndarray, superop: np.ndarray, qubit: int) -> np.ndarray:
    """Apply a column-stacking 4x4 superoperator to one qubit of rho."""
    n = n_qubits_of(rho)
    _, bits = _targets_to_bits(qubit, n)
    return _kernels.superop_1q(
        np.ascontiguousarray(rho, dtype=complex),
        np.ascontiguousarray(superop, dtype=complex),
        bits[0],
    )


def partial_trace_keep(state: np.ndarray, keep: int) -> np.ndarray:
    """Reduced 2x2 density matrix of qubit ``keep`` (pure state or density matrix)."""
    state = np.asarray(state, dtype=complex)
    n = n_qubits_of(state)
    _targets_to_bits(keep, n)
    a, b = 1 << (keep - 1), 1 << (n - keep)
    if state.ndim == 1:
        t = state.reshape(a, 2, b)
        return np.einsum("xiy,xjy->ij", t, t.conj())
    t = state.reshape(a, 2, b, a, 2, b)
    return np.einsum("xiyxjy->ij", t)


def _eigh_checked(m):
    m = np.asarray(m, dtype=complex)
    check_hermitian(m)
    return np.linalg.eigh(0.5 * (m + m.conj().T))


def hermitian_matrix_function(m: np.ndarray, f) -> np.ndarray:
    """Apply ``f`` in {"sqrt", "exp", "log"} to a Hermitian matrix through its eigenbasis.

    sqrt clamps eigenvalues below ``SQRT_FLOOR`` to zero; log rejects a
    non-positive spectrum.
    """
    w, v = _eigh_checked(m)
    if f == "sqrt":
        fw = np.sqrt(np.where(w > SQRT_FLOOR, w, 0.0))
    elif f == "exp":
        fw = np.exp(w)
    elif f == "log":
        if w.min() <= 0:
            raise ValueError(f"log of non-positive spectrum (min eigenvalue {w.min():.3g})")
        fw = np.log(w)
    else:
        raise ValueError(f"unsupported matrix function {f!r}")
    return (v * fw) @ v.conj().T


def _psd_sqrt_factors(rho):
    w, v = _eigh_checked(rho)
    return v, np.sqrt(np.clip(w, 0.0, None))


def fidelity(a: np.ndarray, b: np.ndarray) -> float:
    """Uhlmann fidelity (Tr sqrt(sqrt(a) b sqrt(a)))**2 of two density matrices.

    Computed as the squared nuclear norm of sqrt(a) sqrt(b), evaluated in the
    eigenbases of a and b. This equals the textbook expression exactly but
    never takes square roots of round-off eigenvalues of the product, which
    would swamp 1 - F when the two states are close.
    """
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch {a.shape} vs {b.shape}")
    va, sa = _psd_sqrt_factors(a)
    vb, sb = _psd_sqrt_factors(b)
    core = (sa[:, None] * (va.conj().T @ vb)) * sb[None, :]
    s = np.linalg.svd(core, compute_uv=False)
    return float(np.sum(s) ** 2)


def pure_fidelity(psi: np.ndarray, phi: np.ndarray) -> float:
    return float(abs(np.vdot(psi, phi)) ** 2)


@lru_cache(maxsize=None)
def _popcounts(n):
    idx = np.arange(1 << n)
    return np.array([bin(i).count("1") for i in idx])


def excitations(n: int) -> np.ndarray:
    """Number of ones in each computational basis index."""
    return _popcounts(n).copy()


def jz_diagonal(n: int) -> np.ndarray:
    """Diagonal of Jz = sum_k sigma_z^(k) / 2, i.e. (N - 2 popcount) / 2."""
    return (n - 2 * _popcounts(n)) / 2.0


def operator_on(op: np.ndarray, qubit: int, n: int) -> np.ndarray:
    """Embed a single-qubit operator on ``qubit`` into the n-qubit space."""
    _targets_to_bits(qubit, n)
    return np.kron(np.kron(np.eye(1 << (qubit - 1)), op), np.eye(1 << (n - qubit)))


def collective_operator(kind: str, n: int) -> np.ndarray:
    """Jx, Jy, Jz (spin-1/2 convention sum sigma/2) or Jz2 = Jz @ Jz."""
    if kind == "Jz":
        return np.diag(jz_diagonal(n)).astype(complex)
    if kind == "Jz2":
        return np.diag(jz_diagonal(n) ** 2).astype(complex)
    pauli = {"Jx": X, "Jy": Y}.get(kind)
    if pauli is None:
        raise ValueError(f"unknown collective operator {kind!r}")
    return sum(operator_on(pauli, k, n) for k in range(1, n + 1)) / 2


def random_pure_state(n: int, rng: np.random.Generator) -> np.ndarray:
    psi = rng.normal(size=1 << n) + 1j * rng.normal(size=1 << n)
    return psi / np.linalg.norm(psi)


def random_density_matrix(n: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    d = 1 << n
    g = rng.normal(size=(d, rank or d)) + 1j * rng.normal(size=(d, rank or d))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def random_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    z = (rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    ph = np.diag(r) / np.abs(np.diag(r))
    return q * ph[None, :]


def renormalize(rho: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    """Hermitize, and rescale the trace only if it drifted beyond ``tol``."""
    rho = 0.5 * (rho + rho.conj().T)
    tr = np.trace(rho).real
    if not np.isfinite(tr) or tr <= 0:
        raise NumericalError(f"density matrix trace collapsed to {tr!r}")
    if abs(tr - 1) > tol:
        rho = rho / tr
    return rho
