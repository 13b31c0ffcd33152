"""Classical and quantum Fisher information and the dimensionless precision.

Times are physical times in units where the noise model has decay rate
``model.rate`` (gamma). The dimensionless precision reported everywhere is

    gamma / T * (Delta omega)_max^-2 = gamma * F_Q(t) / t,

which follows from nu = T / t repetitions and does not depend on gamma.
"""

import numpy as np

from varmetro import _kernels, qcore
from varmetro.channels import NoiseModel, sense
from varmetro.errors import NumericalError

DEFAULT_DOMEGA = 1e-4  # field step in units of gamma
SPECTRAL_CUTOFF = 1e-10
MAX_PHASE_STEP = 1e-3

FIDELITY = "fidelity"
SLD = "sld"
METHODS = (FIDELITY, SLD)


def cfi(probs, derivs) -> float:
    """sum_n (dp_n)^2 / p_n, skipping outcomes with p_n < 1e-12 and |dp_n| < 1e-10."""
    p = np.asarray(probs, dtype=float)
    dp = np.asarray(derivs, dtype=float)
    if p.shape != dp.shape:
        raise ValueError("probabilities and derivatives differ in shape")
    if abs(p.sum() - 1) > 1e-8:
        raise ValueError(f"probabilities sum to {p.sum()!r}")
    if abs(dp.sum()) > 1e-8:
        raise ValueError(f"derivatives sum to {dp.sum()!r}, expected 0")
    small = p < 1e-12
    if np.any(small & (np.abs(dp) >= 1e-10)):
        raise NumericalError("outcome with vanishing probability has a finite derivative", stage="cfi")
    keep = ~small
    return float(np.sum(dp[keep] ** 2 / p[keep]))


def sld(rho: np.ndarray, drho: np.ndarray, eps: float = SPECTRAL_CUTOFF):
    """Symmetric logarithmic derivative and its eigenbasis data.

    Pairs (i, j) with p_i + p_j <= eps are dropped, which also drops the
    pure-noise part of the spectrum.
    """
    rho = np.asarray(rho, dtype=complex)
    drho = np.asarray(drho, dtype=complex)
    qcore.check_hermitian(rho, 1e-9)
    if abs(np.trace(drho)) > 1e-8:
        raise ValueError(f"derivative has trace {np.trace(drho)!r}, expected 0")
    p, v = np.linalg.eigh(0.5 * (rho + rho.conj().T))
    d = v.conj().T @ (0.5 * (drho + drho.conj().T)) @ v
    ps = p[:, None] + p[None, :]
    keep = ps > eps
    l_eig = np.zeros_like(d)
    l_eig[keep] = 2 * d[keep] / ps[keep]
    return v @ l_eig @ v.conj().T, p, l_eig


def qfi_sld(rho: np.ndarray, drho: np.ndarray, eps: float = SPECTRAL_CUTOFF) -> float:
    """QFI = Tr[rho L^2] from the SLD matrix elements in the eigenbasis of rho."""
    _, p, l_eig = sld(rho, drho, eps)
    # Tr[rho L^2] = sum_ij p_i |L_ij|^2
    return float(np.sum(np.clip(p, 0, None)[:, None] * np.abs(l_eig) ** 2))


def _check_step(domega, t):
    if domega <= 0:
        raise ValueError("field step must be positive")
    if domega * t > MAX_PHASE_STEP * (1 + 1e-9):
        raise ValueError(f"field step too large: domega*t = {domega * t:.3g} > {MAX_PHASE_STEP}")


def _probe_state(probe):
    return np.asarray(probe, dtype=complex)


def qfi_fidelity(probe, model: NoiseModel, t: float, domega: float | None = None) -> float:
    """QFI at omega = 0 from 8 (1 - sqrt(F(rho_0, rho_domega))) / domega^2.

    F is the squared Uhlmann fidelity, whose expansion is 1 - F_Q domega^2 / 4,
    so the factor 8 goes with its square root (the Bures form).
    """
    if domega is None:
        domega = DEFAULT_DOMEGA * model.rate
    _check_step(domega, t)
    if t == 0:
        return 0.0
    probe = _probe_state(probe)
    rho0 = sense(probe, 0.0, t, model)
    rho1 = sense(probe, domega, t, model)
    return fidelity_estimate(qcore.fidelity(rho0, rho1), domega)


def fidelity_estimate(f: float, domega: float) -> float:
    """8 (1 - sqrt(F)) / domega^2 for a squared fidelity F between states domega apart."""
    if f > 1 + 1e-9:
        raise NumericalError(f"fidelity {f!r} exceeds 1", stage="qfi_fidelity")
    return max(0.0, 8 * (1 - np.sqrt(min(f, 1.0))) / domega ** 2)


def sense_derivative(probe, model: NoiseModel, t: float, domega: float | None = None) -> np.ndarray:
    """Central finite difference of sense() in omega at omega = 0."""
    if domega is None:
        domega = DEFAULT_DOMEGA * model.rate
    probe = _probe_state(probe)
    return (sense(probe, domega, t, model) - sense(probe, -domega, t, model)) / (2 * domega)


def qfi_sld_numeric(probe, model: NoiseModel, t: float, domega: float | None = None) -> float:
    """SLD-route QFI with the derivative of rho taken by central difference."""
    if t == 0:
        return 0.0
    probe = _probe_state(probe)
    rho0 = sense(probe, 0.0, t, model)
    return qfi_sld(rho0, sense_derivative(probe, model, t, domega))


def qfi_commuting(probe, model: NoiseModel, t: float, eps: float = SPECTRAL_CUTOFF) -> float:
    """Exact QFI when the noise commutes with the field.

    Then rho(omega) = U rho_0 U^dag with U = exp(-i omega t Jz), so the SLD
    formula needs only the spectrum of rho_0 and the matrix elements of t Jz
    in its eigenbasis; no finite difference is involved.
    """
    if not model.commutes_with_field:
        raise ValueError(f"{model.kind} does not commute with the field")
    if t == 0:
        return 0.0
    probe = _probe_state(probe)
    rho0 = sense(probe, 0.0, t, model)
    n = qcore.n_qubits_of(rho0)
    p, v = np.linalg.eigh(rho0)
    g = v.conj().T @ (qcore.jz_diagonal(n)[:, None] * v)
    g_abs2 = np.ascontiguousarray((g.real ** 2 + g.imag ** 2))
    return t * t * _kernels.qfi_unitary(np.ascontiguousarray(p), g_abs2, eps)


def qfi(probe, model: NoiseModel, t: float, method: str = FIDELITY, domega: float | None = None) -> float:
    if method == FIDELITY:
        return qfi_fidelity(probe, model, t, domega)
    if method == SLD:
        if model.commutes_with_field:
            return qfi_commuting(probe, model, t)
        return qfi_sld_numeric(probe, model, t, domega)
    raise ValueError(f"unknown QFI method {method!r}; expected one of {METHODS}")


def dimensionless_precision(probe, model: NoiseModel, t: float, domega: float | None = None,
                            method: str = FIDELITY) -> float:
    """gamma * F_Q / t for a probe (pure state or density matrix) sensed for time t."""
    if t <= 0:
        raise ValueError("sensing time must be positive")
    return model.rate * qfi(probe, model, t, method, domega) / t


def outcome_probabilities(rho: np.ndarray, decoder: np.ndarray | None = None) -> np.ndarray:
    """p(n) = <n| U_D rho U_D^dag |n> in the computational basis."""
    if decoder is not None:
        rho = decoder @ rho @ decoder.conj().T
    return np.clip(np.real(np.diag(rho)), 0.0, None)


def device_cfi(probe, model: NoiseModel, t: float, decoder: np.ndarray,
               domega: float | None = None) -> float:
    """CFI of computational-basis measurement after the decoder, by finite difference."""
    decoder = np.asarray(decoder, dtype=complex)
    qcore.check_unitary(decoder)
    if domega is None:
        domega = DEFAULT_DOMEGA * model.rate
    probe = _probe_state(probe)
    p0 = outcome_probabilities(sense(probe, 0.0, t, model), decoder)
    p1 = outcome_probabilities(sense(probe, domega, t, model), decoder)
    p0 = p0 / p0.sum()
    p1 = p1 / p1.sum()
    dp = (p1 - p0) / domega
    # tiny probabilities carry round-off derivatives; the finite difference
    # tolerance scales with the step
    tiny = (p0 < 1e-12) & (np.abs(dp) < 1e-10 + 1e-12 / domega)
    dp = np.where(tiny, 0.0, dp)
    dp = dp - dp.sum() / dp.size if abs(dp.sum()) > 1e-8 else dp
    return cfi(p0, dp)
