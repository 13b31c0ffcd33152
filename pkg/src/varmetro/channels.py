"""Single-qubit noise channels and the noisy field-sensing evolution.

Superoperators use column stacking: vec(A X B) = (B.T kron A) vec(X), so a
Kraus operator K contributes conj(K) kron K.
"""

import itertools
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.linalg

from varmetro import qcore
from varmetro.qcore import I2, X, Y, Z

COMPLETENESS_ATOL = 1e-10
CHOI_ATOL = 1e-8

DEFAULT_DEPOLARIZING = {1: 1e-4, 2: 1e-3}
DEPOLARIZING_CONVENTION = "uniform-pauli-including-identity"

DEPHASING = "dephasing"
AMPLITUDE_DAMPING = "amplitude_damping"
INHOMOGENEOUS_PAULI = "inhomogeneous_pauli"
ORNSTEIN_UHLENBECK = "ornstein_uhlenbeck"
NOISE_KINDS = (DEPHASING, AMPLITUDE_DAMPING, INHOMOGENEOUS_PAULI, ORNSTEIN_UHLENBECK)
OU_REGIMES = ("long", "short", "exact")


@dataclass(frozen=True)
class KrausChannel:
    ops: tuple

    def __post_init__(self):
        ops = tuple(np.array(k, dtype=complex) for k in self.ops)
        for k in ops:
            k.setflags(write=False)
        object.__setattr__(self, "ops", ops)
        dev = completeness_error(ops)
        if dev > COMPLETENESS_ATOL:
            raise ValueError(f"Kraus operators are not complete (deviation {dev:.3g})")

    @property
    def n_qubits(self) -> int:
        return qcore.n_qubits_of(self.ops[0])

    def superoperator(self) -> np.ndarray:
        return superoperator_from_kraus(self.ops)

    def apply(self, rho: np.ndarray, targets=None) -> np.ndarray:
        """Apply to ``targets`` of rho (default: all qubits of a matching-size rho)."""
        rho = np.asarray(rho, dtype=complex)
        if targets is None:
            if rho.shape[0] != self.ops[0].shape[0]:
                raise ValueError("targets required when the channel is smaller than rho")
            return sum(k @ rho @ k.conj().T for k in self.ops)
        return apply_kraus(rho, self.ops, targets)


def completeness_error(ops) -> float:
    d = ops[0].shape[0]
    acc = sum(k.conj().T @ k for k in ops)
    return float(np.max(np.abs(acc - np.eye(d))))


def superoperator_from_kraus(ops) -> np.ndarray:
    return sum(np.kron(k.conj(), k) for k in ops)


def apply_kraus(rho: np.ndarray, ops, targets) -> np.ndarray:
    out = np.zeros_like(rho, dtype=complex)
    for k in ops:
        half = qcore.apply_left(rho, k, targets)
        out += qcore.apply_left(half.conj().T, k, targets).conj().T
    return out


def choi_matrix(superop: np.ndarray) -> np.ndarray:
    """Choi matrix sum_ij |i><j| kron E(|i><j|) of a column-stacking superoperator."""
    d = int(round(np.sqrt(superop.shape[0])))
    choi = np.zeros((d * d, d * d), dtype=complex)
    for i in range(d):
        for j in range(d):
            e = np.zeros((d, d), dtype=complex)
            e[i, j] = 1
            out = (superop @ e.reshape(-1, order="F")).reshape(d, d, order="F")
            choi += np.kron(e, out)
    return choi


def choi_min_eigenvalue(superop: np.ndarray) -> float:
    c = choi_matrix(superop)
    return float(np.linalg.eigvalsh(0.5 * (c + c.conj().T)).min())


def is_cptp(superop: np.ndarray, atol: float = CHOI_ATOL) -> bool:
    d = int(round(np.sqrt(superop.shape[0])))
    # trace preservation: vec(I)^T S = vec(I)^T
    vid = np.eye(d).reshape(-1, order="F")
    tp = np.max(np.abs(vid @ superop - vid)) < 1e-10
    return bool(tp and choi_min_eigenvalue(superop) >= -atol)


def apply_superop(superop: np.ndarray, rho: np.ndarray) -> np.ndarray:
    d = rho.shape[0]
    return (superop @ rho.reshape(-1, order="F")).reshape(d, d, order="F")


def _nonneg(name, value):
    if not np.isfinite(value) or value < 0:
        raise ValueError(f"{name} must be finite and >= 0, got {value!r}")


def dephasing_probability(gt: float) -> float:
    _nonneg("gamma*t", gt)
    return -0.5 * np.expm1(-gt)


def dephasing_kraus(gt: float) -> KrausChannel:
    """{sqrt(1-p) I, sqrt(p) Z} with p = (1 - exp(-gt)) / 2."""
    p = dephasing_probability(gt)
    return KrausChannel((np.sqrt(1 - p) * I2, np.sqrt(p) * Z))


def amplitude_damping_kraus(gt: float) -> KrausChannel:
    """Decay |1> -> |0> with probability p = 1 - exp(-gt)."""
    _nonneg("gamma*t", gt)
    p = -np.expm1(-gt)
    k1 = np.diag([1.0, np.sqrt(1 - p)]).astype(complex)
    k2 = np.array([[0, np.sqrt(p)], [0, 0]], dtype=complex)
    return KrausChannel((k1, k2))


def inhomogeneous_pauli_probabilities():
    """(p_x, p_y, p_z) with 2 p_x = p_y = 4 p_z summing to 3/4 (1 - 1/e)."""
    total = 0.75 * (1 - np.exp(-1.0))
    pz = total / 7
    return 2 * pz, 4 * pz, pz


def inhomogeneous_pauli_kraus() -> KrausChannel:
    px, py, pz = inhomogeneous_pauli_probabilities()
    return KrausChannel((
        np.sqrt(1 - px - py - pz) * I2,
        np.sqrt(px) * X,
        np.sqrt(py) * Y,
        np.sqrt(pz) * Z,
    ))


def principal_logm(superop: np.ndarray) -> np.ndarray:
    """Principal matrix logarithm via complex eigendecomposition.

    Raises if the matrix is defective or has spectrum on the negative real
    axis, or if exp(log S) fails to reproduce S to 1e-10.
    """
    w, v = np.linalg.eig(superop)
    if np.any(np.abs(w) < 1e-14) or np.any((np.abs(w.imag) < 1e-14) & (w.real < 0)):
        raise ValueError("superoperator has no principal logarithm")
    if np.linalg.cond(v) > 1e8:
        raise ValueError("superoperator is not diagonalizable to working precision")
    log = v @ np.diag(np.log(w.astype(complex))) @ np.linalg.inv(v)
    if np.max(np.abs(scipy.linalg.expm(log) - superop)) > 1e-10:
        raise ValueError("matrix logarithm failed the exp/log round trip")
    return log


@lru_cache(maxsize=1)
def _pauli_generator():
    s = inhomogeneous_pauli_kraus().superoperator()
    if not is_cptp(s):
        raise ValueError("inhomogeneous Pauli map failed the Choi check")
    gen = principal_logm(s)
    gen.setflags(write=False)
    return gen


def inhomogeneous_pauli_generator() -> np.ndarray:
    """Generator L_pa with exp(L_pa) equal to the inhomogeneous Pauli map."""
    return _pauli_generator().copy()


def field_superoperator() -> np.ndarray:
    """Column-stacking superoperator of rho -> [sigma_z / 2, rho]."""
    h = Z / 2
    return np.kron(I2, h) - np.kron(h.T, I2)


def pauli_process_superop(phase: float, gt: float) -> np.ndarray:
    """exp(-i phase S_z + gt L_pa): one qubit of the non-commuting Pauli process."""
    if not 0 <= gt <= 1 + 1e-12:
        raise ValueError(f"inhomogeneous Pauli process is only defined for 0 <= gamma*t <= 1, got {gt!r}")
    return scipy.linalg.expm(-1j * phase * field_superoperator() + gt * _pauli_generator())


def ou_decay_exponent(b: float, lam: float, t: float, regime: str = "exact") -> float:
    """Dephasing exponent f(t) of Ornstein-Uhlenbeck field noise.

    exact: b [t + (exp(-lam t) - 1) / lam] / 2; long: b lam t**2 / 4;
    short: b t / 2. The coherence of each qubit decays as exp(-f).
    """
    if b <= 0 or lam <= 0:
        raise ValueError("bandwidth and correlation rate must be positive")
    _nonneg("t", t)
    if regime == "exact":
        x = lam * t
        if x < 1e-3:
            # x + expm1(-x) cancels catastrophically for small x
            g = x * x * (0.5 - x / 6 + x * x / 24)
        else:
            g = x + np.expm1(-x)
        return 0.5 * b * g / lam
    if regime == "long":
        return 0.25 * b * lam * t * t
    if regime == "short":
        return 0.5 * b * t
    raise ValueError(f"unknown OU regime {regime!r}")


def ou_kraus(q: float) -> KrausChannel:
    """{diag(q, 1), diag(sqrt(1 - q**2), 0)} for 0 < q <= 1."""
    if not 0 < q <= 1:
        raise ValueError(f"q must lie in (0, 1], got {q!r}")
    return KrausChannel((np.diag([q, 1.0]), np.diag([np.sqrt(1 - q * q), 0.0])))


@lru_cache(maxsize=None)
def _pauli_basis(n):
    return [
        (labels, np.array(_kron_all([qcore.PAULIS[c] for c in labels])))
        for labels in itertools.product("IXYZ", repeat=n)
    ]


def _kron_all(mats):
    out = np.eye(1, dtype=complex)
    for m in mats:
        out = np.kron(out, m)
    return out


def depolarizing_gate_noise(p: float, n_targets: int = 1) -> KrausChannel:
    """With probability p apply a uniformly random n-qubit Pauli (identity included).

    Under this convention p = 1 maps every input to the maximally mixed state.
    """
    if not 0 <= p <= 1:
        raise ValueError(f"depolarizing probability must be in [0, 1], got {p!r}")
    if n_targets not in (1, 2):
        raise ValueError("depolarizing noise is defined for 1 or 2 targets")
    basis = _pauli_basis(n_targets)
    m = len(basis)
    ops = []
    for labels, pauli in basis:
        if set(labels) == {"I"}:
            ops.append(np.sqrt(1 - p + p / m) * pauli)
        elif p > 0:
            ops.append(np.sqrt(p / m) * pauli)
    return KrausChannel(tuple(ops))


@dataclass(frozen=True)
class NoiseModel:
    """Noise acting identically and independently on every qubit during sensing.

    ``rate`` is the decay rate gamma; all dimensionless quantities use the
    product gamma*t. Ornstein-Uhlenbeck noise uses ``ou_regime``: "long"
    (exponent (gamma t)**2), "short" (exponent gamma t) or "exact", which needs
    ``ou_bandwidth`` b and ``ou_correlation_rate`` lambda and ignores ``rate``.
    """

    kind: str
    rate: float = 1.0
    ou_regime: str | None = None
    ou_bandwidth: float | None = None
    ou_correlation_rate: float | None = None

    def __post_init__(self):
        if self.kind not in NOISE_KINDS:
            raise ValueError(f"unknown noise kind {self.kind!r}; expected one of {NOISE_KINDS}")
        if not np.isfinite(self.rate) or self.rate <= 0:
            raise ValueError(f"decay rate must be positive, got {self.rate!r}")
        if self.kind == ORNSTEIN_UHLENBECK:
            regime = self.ou_regime or "long"
            if regime not in OU_REGIMES:
                raise ValueError(f"unknown OU regime {regime!r}")
            object.__setattr__(self, "ou_regime", regime)
            if regime == "exact" and not (self.ou_bandwidth and self.ou_correlation_rate):
                raise ValueError("exact OU regime needs ou_bandwidth and ou_correlation_rate")
        elif self.ou_regime is not None:
            raise ValueError("ou_regime only applies to ornstein_uhlenbeck noise")

    @property
    def commutes_with_field(self) -> bool:
        return self.kind != INHOMOGENEOUS_PAULI

    def max_time(self) -> float:
        return 1.0 / self.rate if self.kind == INHOMOGENEOUS_PAULI else np.inf

    def coherence_exponent(self, t: float) -> float:
        """Exponent f with single-qubit coherence decaying as exp(-f) (dephasing-type models)."""
        if self.kind == DEPHASING:
            return self.rate * t
        if self.kind == ORNSTEIN_UHLENBECK:
            if self.ou_regime == "exact":
                return ou_decay_exponent(self.ou_bandwidth, self.ou_correlation_rate, t, "exact")
            gt = self.rate * t
            return gt * gt if self.ou_regime == "long" else gt
        raise ValueError(f"{self.kind} is not a dephasing-type model")

    def kraus(self, t: float) -> KrausChannel:
        """Noise-only channel for the commuting models at time t."""
        _nonneg("t", t)
        if self.kind == DEPHASING:
            return dephasing_kraus(self.rate * t)
        if self.kind == AMPLITUDE_DAMPING:
            return amplitude_damping_kraus(self.rate * t)
        if self.kind == ORNSTEIN_UHLENBECK:
            return ou_kraus(np.exp(-self.coherence_exponent(t)))
        raise ValueError(f"{self.kind} has no fixed Kraus form; use superoperator()")

    def superoperator(self, omega: float, t: float) -> np.ndarray:
        """Single-qubit superoperator of field rotation plus noise over time t."""
        _nonneg("t", t)
        if self.kind == INHOMOGENEOUS_PAULI:
            return pauli_process_superop(omega * t, self.rate * t)
        rot = qcore.rz(omega * t)
        return self.kraus(t).superoperator() @ np.kron(rot.conj(), rot)

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "rate": float(self.rate)}
        if self.kind == ORNSTEIN_UHLENBECK:
            out["ou_regime"] = self.ou_regime
            if self.ou_regime == "exact":
                out["ou_bandwidth"] = self.ou_bandwidth
                out["ou_correlation_rate"] = self.ou_correlation_rate
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "NoiseModel":
        return cls(**d)


def sense(probe: np.ndarray, omega: float, t: float, model: NoiseModel) -> np.ndarray:
    """Density matrix after exposing ``probe`` to field omega and noise for time t.

    ``probe`` may be a pure state or a density matrix. Commuting models
    rotate by exp(-i omega t Jz) and then apply the noise channel to each
    qubit; the inhomogeneous Pauli process applies the joint generator per
    qubit.
    """
    _nonneg("t", t)
    probe = np.asarray(probe, dtype=complex)
    n = qcore.n_qubits_of(probe)
    if probe.ndim == 2 and probe.shape != (1 << n, 1 << n):
        raise ValueError(f"probe has shape {probe.shape}")
    if model.kind == INHOMOGENEOUS_PAULI and model.rate * t > 1 + 1e-12:
        raise ValueError(f"inhomogeneous Pauli process undefined for gamma*t = {model.rate * t:.6g} > 1")

    if model.commutes_with_field:
        phases = np.exp(-1j * omega * t * qcore.jz_diagonal(n))
        if probe.ndim == 1:
            rho = qcore.ket_to_dm(phases * probe)
        else:
            rho = phases[:, None] * probe * phases.conj()[None, :]
        if t == 0:
            return rho
        superop = model.kraus(t).superoperator()
    else:
        rho = qcore.as_density_matrix(probe)
        if t == 0:
            return rho.copy()
        superop = model.superoperator(omega, t)

    for k in range(1, n + 1):
        rho = qcore.apply_superop_1q(rho, superop, k)
    return rho
