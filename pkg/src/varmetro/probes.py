"""Probe-state families: GHZ, product, squeezed, symmetric (Dicke) and the layered ansatz.

Every family maps a flat real parameter vector to a pure state through
``ProbeFamily.state``. Ansatz parameter vectors are ordered block-major,
qubit-minor: a B1 block owns N X-rotation angles, a B2 block owns N
controlled-Y angles (ring pair k -> k+1 mod N, in k order) followed by N
Z-rotation angles.
"""

from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from math import comb

import numpy as np
import scipy.linalg

from varmetro import _kernels, channels, qcore

GHZ = "ghz"
PRODUCT = "product"
SQUEEZED = "squeezed"
SYMMETRIC = "symmetric"
ANSATZ = "ansatz"
FAMILIES = (GHZ, PRODUCT, SQUEEZED, SYMMETRIC, ANSATZ)

DEFAULT_BLOCKS = ("B1", "B2", "B2", "B1", "B2", "B2")


def ghz(n: int, phi: float = 0.0) -> np.ndarray:
    """(|0...0> + exp(-i phi) |1...1>) / sqrt(2)."""
    _check_n(n)
    psi = np.zeros(1 << n, dtype=complex)
    psi[0] = 1 / np.sqrt(2)
    psi[-1] = np.exp(-1j * phi) / np.sqrt(2)
    return psi


def product_plus(n: int, phi: float = 0.0) -> np.ndarray:
    """[(|0> + exp(-i phi) |1>) / sqrt(2)] ** n."""
    _check_n(n)
    amp0, amp1 = 1 / np.sqrt(2), np.exp(-1j * phi) / np.sqrt(2)
    k = qcore.excitations(n)
    return amp0 ** (n - k) * amp1 ** k


def squeezed(n: int, theta1: float, theta2: float, theta3: float) -> np.ndarray:
    """One-axis-twisted state exp(-i th3 Jz) exp(-i th2 Jx) exp(-i th1 Jz^2) |+>^n."""
    jz = qcore.jz_diagonal(n)
    psi = product_plus(n) * np.exp(-1j * theta1 * jz ** 2)
    if theta2:
        psi = np.ascontiguousarray(psi)
        rot = qcore.rx(theta2)
        for k in range(1, n + 1):
            psi = qcore.apply_left(psi[:, None], rot, k)[:, 0]
    return psi * np.exp(-1j * theta3 * jz)


def _check_n(n):
    if int(n) != n or n < 1:
        raise ValueError(f"number of qubits must be a positive integer, got {n!r}")


def dicke_excitations(n: int, k: int) -> np.ndarray:
    """Equal superposition of all basis states with exactly k ones."""
    _check_n(n)
    if not 0 <= k <= n:
        raise ValueError(f"excitation number {k} out of range 0..{n}")
    psi = (qcore.excitations(n) == k).astype(complex)
    return psi / np.sqrt(comb(n, k))


def dicke(n: int, m) -> np.ndarray:
    """Dicke state |J=N/2, m> with N/2 - m ones; |J, J> = |0...0>."""
    k = Fraction(n, 2) - Fraction(m).limit_denominator(2)
    if k.denominator != 1 or not 0 <= k <= n:
        raise ValueError(f"m={m!r} is not a valid projection for N={n}")
    return dicke_excitations(n, int(k))


def symmetric_state(n: int, coeffs, normalize: bool = False) -> np.ndarray:
    """sum_m c_m |J, m>, coefficients ordered m = N/2, N/2 - 1, ..., -N/2.

    Index k of ``coeffs`` therefore multiplies the k-excitation Dicke state.
    """
    c = np.asarray(coeffs, dtype=complex)
    if c.shape != (n + 1,):
        raise ValueError(f"expected {n + 1} coefficients, got {c.shape}")
    norm = np.linalg.norm(c)
    if norm == 0:
        raise ValueError("coefficient vector is zero")
    if normalize:
        c = c / norm
    elif abs(norm - 1) > 1e-9:
        raise ValueError(f"coefficients have norm {norm!r}; pass normalize=True")
    k = qcore.excitations(n)
    weights = np.array([1 / np.sqrt(comb(n, j)) for j in range(n + 1)])
    return c[k] * weights[k]


@dataclass(frozen=True)
class AnsatzLayout:
    """Execution-ordered block sequence of the hardware ansatz (ring coupling)."""

    blocks: tuple = DEFAULT_BLOCKS

    def __post_init__(self):
        blocks = tuple(self.blocks)
        if not blocks or any(b not in ("B1", "B2") for b in blocks):
            raise ValueError(f"blocks must be a non-empty sequence of 'B1'/'B2', got {blocks}")
        object.__setattr__(self, "blocks", blocks)

    @property
    def codes(self) -> np.ndarray:
        return np.array([1 if b == "B1" else 2 for b in self.blocks], dtype=np.int64)

    def param_count(self, n: int) -> int:
        return sum(n if b == "B1" else 2 * n for b in self.blocks)

    @staticmethod
    def ring_pairs(n: int):
        # N = 1 has no coupling; N = 2 yields (1, 2) and (2, 1)
        return [(k, k % n + 1) for k in range(1, n + 1)] if n > 1 else []

    def gates(self, n: int, theta):
        """Yield (matrix, targets, n_params_used) in execution order."""
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.param_count(n),):
            raise ValueError(f"ansatz for N={n} needs {self.param_count(n)} parameters, got {theta.shape}")
        i = 0
        out = []
        for block in self.blocks:
            if block == "B1":
                for q in range(1, n + 1):
                    out.append((qcore.rx(theta[i]), (q,)))
                    i += 1
            else:
                for c, tq in self.ring_pairs(n):
                    out.append((qcore.controlled(qcore.ry(theta[i])), (c, tq)))
                    i += 1
                i += n - len(self.ring_pairs(n))
                for q in range(1, n + 1):
                    out.append((qcore.rz(theta[i]), (q,)))
                    i += 1
        return out

    def to_dict(self):
        return {"blocks": list(self.blocks)}


def ansatz_param_count(n: int, layout: AnsatzLayout = AnsatzLayout()) -> int:
    return layout.param_count(n)


def ansatz_state(n: int, theta, layout: AnsatzLayout = AnsatzLayout()) -> np.ndarray:
    _check_n(n)
    theta = np.ascontiguousarray(theta, dtype=float)
    if theta.shape != (layout.param_count(n),):
        raise ValueError(f"ansatz for N={n} needs {layout.param_count(n)} parameters, got {theta.shape}")
    return _kernels.ansatz_ket(theta, n, layout.codes)


def ansatz_state_from_gates(n: int, theta, layout: AnsatzLayout = AnsatzLayout()) -> np.ndarray:
    """Same state built gate by gate from ``layout.gates`` (reference path)."""
    _check_n(n)
    psi = np.zeros((1 << n, 1), dtype=complex)
    psi[0, 0] = 1
    for gate, targets in layout.gates(n, theta):
        psi = qcore.apply_left(psi, gate, targets)
    return psi[:, 0]


def preparation_circuit(kind: str, n: int, theta, layout: AnsatzLayout = AnsatzLayout()):
    """Gate list (matrix, targets) preparing the family state from |0...0>.

    GHZ: H and phase on qubit 1, then a CNOT ladder. Product: one H-plus-phase
    gate per qubit. Squeezed: H per qubit, a ZZ rotation on every pair (Jz^2
    up to a global phase), Rx per qubit, Rz per qubit.
    """
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    if kind == ANSATZ:
        return layout.gates(n, theta)
    if kind == GHZ:
        prep = np.diag([1, np.exp(-1j * theta[0])]) @ qcore.H
        return [(prep, (1,))] + [(qcore.CNOT, (k, k + 1)) for k in range(1, n)]
    if kind == PRODUCT:
        prep = np.diag([1, np.exp(-1j * theta[0])]) @ qcore.H
        return [(prep, (k,)) for k in range(1, n + 1)]
    if kind == SQUEEZED:
        t1, t2, t3 = theta
        zz = np.diag(np.exp(-0.5j * t1 * np.array([1, -1, -1, 1])))
        gates = [(qcore.H, (k,)) for k in range(1, n + 1)]
        gates += [(zz, pair) for pair in combinations(range(1, n + 1), 2)]
        gates += [(qcore.rx(t2), (k,)) for k in range(1, n + 1)]
        gates += [(qcore.rz(t3), (k,)) for k in range(1, n + 1)]
        return gates
    raise ValueError(f"no preparation circuit for family {kind!r}")


def run_noisy_circuit(n: int, gates, p1: float, p2: float) -> np.ndarray:
    """Density-matrix simulation with depolarizing noise after every gate."""
    rho = np.zeros((1 << n, 1 << n), dtype=complex)
    rho[0, 0] = 1
    noise = {1: channels.depolarizing_gate_noise(p1, 1), 2: channels.depolarizing_gate_noise(p2, 2)}
    for gate, targets in gates:
        half = qcore.apply_left(rho, gate, targets)
        rho = qcore.apply_left(half.conj().T, gate, targets).conj().T
        if (p1 if len(targets) == 1 else p2) > 0:
            rho = channels.apply_kraus(rho, noise[len(targets)].ops, targets)
    return rho


@dataclass(frozen=True)
class ProbeFamily:
    kind: str
    n_qubits: int
    layout: AnsatzLayout = field(default_factory=AnsatzLayout)

    def __post_init__(self):
        if self.kind not in FAMILIES:
            raise ValueError(f"unknown probe family {self.kind!r}; expected one of {FAMILIES}")
        _check_n(self.n_qubits)

    @property
    def param_count(self) -> int:
        n = self.n_qubits
        return {
            GHZ: 1,
            PRODUCT: 1,
            SQUEEZED: 3,
            SYMMETRIC: 2 * (n + 1),
        }.get(self.kind) or self.layout.param_count(n)

    def bounds(self):
        """Per-parameter (low, high, periodic) search box."""
        if self.kind == SYMMETRIC:
            return [(-1.0, 1.0, False)] * self.param_count
        return [(-np.pi, np.pi, True)] * self.param_count

    def state(self, theta) -> np.ndarray:
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        if theta.shape != (self.param_count,):
            raise ValueError(f"{self.kind} family needs {self.param_count} parameters, got {theta.shape}")
        n = self.n_qubits
        if self.kind == GHZ:
            return ghz(n, theta[0])
        if self.kind == PRODUCT:
            return product_plus(n, theta[0])
        if self.kind == SQUEEZED:
            return squeezed(n, *theta)
        if self.kind == SYMMETRIC:
            return symmetric_state(n, theta[: n + 1] + 1j * theta[n + 1:], normalize=True)
        return ansatz_state(n, theta, self.layout)

    def noisy_density(self, theta, p1: float = channels.DEFAULT_DEPOLARIZING[1],
                      p2: float = channels.DEFAULT_DEPOLARIZING[2]) -> np.ndarray:
        """Probe prepared by its circuit with depolarizing gate noise."""
        if self.kind == SYMMETRIC:
            raise ValueError("arbitrary symmetric states have no preparation circuit")
        gates = preparation_circuit(self.kind, self.n_qubits, theta, self.layout)
        return run_noisy_circuit(self.n_qubits, gates, p1, p2)

    @staticmethod
    def symmetric_params(coeffs) -> np.ndarray:
        c = np.asarray(coeffs, dtype=complex)
        return np.concatenate([c.real, c.imag])

    def to_dict(self):
        d = {"kind": self.kind, "n_qubits": self.n_qubits}
        if self.kind == ANSATZ:
            d["layout"] = self.layout.to_dict()
        return d


def collective_rotation(psi: np.ndarray, axis: str, angle: float) -> np.ndarray:
    """exp(-i angle J_axis) |psi> built from single-qubit rotations."""
    n = qcore.n_qubits_of(psi)
    if axis == "z":
        return psi * np.exp(-1j * angle * qcore.jz_diagonal(n))
    gate = {"x": qcore.rx, "y": qcore.ry}[axis](angle)
    out = np.asarray(psi, dtype=complex)[:, None]
    for k in range(1, n + 1):
        out = qcore.apply_left(out, gate, k)
    return out[:, 0]


def expm_state(generator: np.ndarray, psi: np.ndarray, angle: float) -> np.ndarray:
    """exp(-i angle G) |psi> by dense matrix exponential (reference path for tests)."""
    return scipy.linalg.expm(-1j * angle * generator) @ psi
