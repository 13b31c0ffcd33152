"""Characterisation of optimised probes and the non-symmetric amplitude-damping states.

``psi_a`` mixes |1...1>, the pair-excited state |D> and |0...0>; ``psi_s`` is its
permutation-symmetric analogue with |D> replaced by the two-excitation Dicke
state. After a single relaxation event T_+ = |0><1| on qubit k, the
non-symmetric state still reveals which qubit decayed, which is where its
extra Fisher information comes from.
"""

import csv
from dataclasses import dataclass, field
from itertools import combinations
from math import comb

import numpy as np

from varmetro import qcore
from varmetro.channels import AMPLITUDE_DAMPING, NoiseModel, sense
from varmetro.probes import dicke_excitations

ENTROPY_FLOOR = 1e-14
SYMMETRIC_ATOL = 1e-6
BROKEN_ATOL = 1e-3
DEFAULT_B1 = 1 / np.sqrt(2)
DEFAULT_B2 = -1j / np.sqrt(2)  # b1 = exp(i pi/2) b2


def _unit(psi):
    psi = np.asarray(psi, dtype=complex)
    norm = np.linalg.norm(psi)
    if abs(norm - 1) > 1e-9:
        raise ValueError(f"state has norm {norm!r}, expected 1")
    return psi


def von_neumann_entropy(rho: np.ndarray) -> float:
    """Entropy in bits; eigenvalues below 1e-14 contribute nothing."""
    w = np.linalg.eigvalsh(rho)
    w = w[w > ENTROPY_FLOOR]
    return float(-np.sum(w * np.log2(w)))


def s_avg(psi: np.ndarray) -> float:
    """Mean von Neumann entropy of the single-qubit marginals."""
    psi = _unit(psi)
    n = qcore.n_qubits_of(psi)
    return float(np.mean([von_neumann_entropy(qcore.partial_trace_keep(psi, k)) for k in range(1, n + 1)]))


def transpose_qubits(psi: np.ndarray, i: int, j: int) -> np.ndarray:
    """Swap the roles of qubits i and j (1-based)."""
    n = qcore.n_qubits_of(psi)
    axes = list(range(n))
    axes[i - 1], axes[j - 1] = axes[j - 1], axes[i - 1]
    return np.asarray(psi).reshape((2,) * n).transpose(axes).reshape(-1)


def p_avg(psi: np.ndarray) -> float:
    """Mean squared overlap of psi with its images under all C(N,2) transpositions."""
    psi = _unit(psi)
    n = qcore.n_qubits_of(psi)
    if n == 1:
        return 1.0
    vals = [abs(np.vdot(psi, transpose_qubits(psi, i, j))) ** 2 for i, j in combinations(range(1, n + 1), 2)]
    return float(np.mean(vals))


def dicke_probabilities(psi: np.ndarray) -> np.ndarray:
    """|c_m|^2 for m = N/2, ..., -N/2 (index k = number of excitations)."""
    n = qcore.n_qubits_of(psi)
    return np.array([abs(np.vdot(dicke_excitations(n, k), psi)) ** 2 for k in range(n + 1)])


@dataclass
class StateReport:
    s_avg: float
    p_avg: float
    dicke_probs: list | None
    symmetry_broken: bool

    def to_dict(self):
        return {"s_avg": self.s_avg, "p_avg": self.p_avg, "dicke_probs": self.dicke_probs,
                "symmetry_broken": self.symmetry_broken}


def state_report(psi: np.ndarray) -> StateReport:
    s, p = s_avg(psi), p_avg(psi)
    probs = None
    if p > 1 - SYMMETRIC_ATOL:
        probs = [float(x) for x in dicke_probabilities(psi)]
    return StateReport(s_avg=s, p_avg=p, dicke_probs=probs, symmetry_broken=p < 1 - BROKEN_ATOL)


# --- non-symmetric family ------------------------------------------------

def _check_even(n):
    # at N = 2 the pair state |D> coincides with |11>
    if n < 4 or n % 2:
        raise ValueError(f"N must be even and >= 4, got {n}")


def pair_partner(j: int) -> int:
    """Partner of qubit j in the adjacent pairing (1,2), (3,4), ..."""
    return j + 1 if j % 2 else j - 1


def ones_state(n: int, qubits) -> np.ndarray:
    """Basis state with exactly the listed qubits in |1>."""
    bits = [0] * n
    for q in qubits:
        bits[q - 1] = 1
    return qcore.basis_state(n, qcore.bits_to_index(bits))


def d_state(n: int) -> np.ndarray:
    """sqrt(2/N) times the sum of the N/2 adjacent-pair double excitations."""
    _check_even(n)
    psi = sum(ones_state(n, (q, q + 1)) for q in range(1, n, 2))
    return psi * np.sqrt(2 / n)


def _coeffs(c1, c2, c3, normalize):
    c = np.array([c1, c2, c3], dtype=complex)
    norm = np.linalg.norm(c)
    if normalize:
        if norm == 0:
            raise ValueError("coefficients are all zero")
        return c / norm
    if abs(norm - 1) > 1e-9:
        raise ValueError(f"coefficients have norm {norm!r}; pass normalize=True")
    return c


def psi_a(n: int, c1, c2, c3, normalize: bool = False) -> np.ndarray:
    """c1 |1...1> + c2 |D> + c3 |0...0>."""
    _check_even(n)
    c = _coeffs(c1, c2, c3, normalize)
    psi = c[1] * d_state(n)
    psi[-1] += c[0]
    psi[0] += c[2]
    return psi


def psi_s(n: int, c1, c2, c3, normalize: bool = False) -> np.ndarray:
    """c1 |1...1> + c2 |J, N/2-2> + c3 |0...0>."""
    _check_even(n)
    c = _coeffs(c1, c2, c3, normalize)
    psi = c[1] * dicke_excitations(n, 2)
    psi[-1] += c[0]
    psi[0] += c[2]
    return psi


def t_plus(psi: np.ndarray, k: int) -> np.ndarray:
    """T_+ = |0><1| applied to qubit k (1-based)."""
    return qcore.apply_left(np.asarray(psi, dtype=complex)[:, None],
                            np.array([[0, 1], [0, 0]], dtype=complex), k)[:, 0]


def _check_b(b1, b2):
    if abs(abs(b1) ** 2 + abs(b2) ** 2 - 1) > 1e-9:
        raise ValueError("need |b1|^2 + |b2|^2 = 1")


def aj_bases(n: int, b1=DEFAULT_B1, b2=DEFAULT_B2):
    """[(label, state)] for T_+^(j)(b1 |1...1> +/- b2 sqrt(N/2) |D>), + branch first.

    States with different j are always orthogonal; the two branches of the
    same j are orthogonal only when |b1| = |b2|.
    """
    _check_even(n)
    _check_b(b1, b2)
    ones = qcore.basis_state(n, (1 << n) - 1)
    d = d_state(n) * np.sqrt(n / 2)
    out = []
    for sign, tag in ((1, "+"), (-1, "-")):
        for j in range(1, n + 1):
            psi = t_plus(b1 * ones + sign * b2 * d, j)
            norm = np.linalg.norm(psi)
            if norm < 1e-12:
                raise ValueError("degenerate basis state")
            out.append((f"A{j}{tag}", psi / norm))
    return out


def s_bases(n: int, b1=DEFAULT_B1, b2=DEFAULT_B2):
    """[(label, state)] for b1 |J, J-1> +/- b2 |J, -J+1>."""
    _check_b(b1, b2)
    lo, hi = dicke_excitations(n, 1), dicke_excitations(n, n - 1)
    out = []
    for sign, tag in ((1, "+"), (-1, "-")):
        psi = b1 * lo + sign * b2 * hi
        norm = np.linalg.norm(psi)
        if norm < 1e-12:
            raise ValueError("degenerate basis state")
        out.append((f"S{tag}", psi / norm))
    return out


def overlap_top(n: int) -> float:
    """<J,-J+1| T_+^(k) |J,-J> = 1/sqrt(N)."""
    return 1 / np.sqrt(n)


def overlap_low(n: int) -> float:
    """<J,J-1| T_+^(k) |J,J-2> = (N-1) / (sqrt(N) sqrt(C(N,2)))."""
    return (n - 1) / (np.sqrt(n) * np.sqrt(comb(n, 2)))


def overlap_brute_force(n: int, k: int):
    """Both overlaps by explicit matrix elements, for qubit k."""
    top = np.vdot(dicke_excitations(n, n - 1), t_plus(dicke_excitations(n, n), k))
    low = np.vdot(dicke_excitations(n, 1), t_plus(dicke_excitations(n, 2), k))
    return top, low


@dataclass(frozen=True)
class NonSymmetricFamily:
    n: int
    c1: complex
    c2: complex
    c3: complex
    b1: complex = DEFAULT_B1
    b2: complex = DEFAULT_B2
    normalize: bool = False

    def __post_init__(self):
        _check_even(self.n)
        c = _coeffs(self.c1, self.c2, self.c3, self.normalize)
        object.__setattr__(self, "c1", c[0])
        object.__setattr__(self, "c2", c[1])
        object.__setattr__(self, "c3", c[2])
        object.__setattr__(self, "normalize", False)
        _check_b(self.b1, self.b2)

    def psi_a(self):
        return psi_a(self.n, self.c1, self.c2, self.c3)

    def psi_s(self):
        return psi_s(self.n, self.c1, self.c2, self.c3)


@dataclass
class FisherBreakdown:
    f_a: float
    f_s: float
    rows: list = field(default_factory=list)  # (scheme, label, probability, derivative, contribution)

    @property
    def ratio(self):
        return self.f_a / self.f_s

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["scheme", "basis_label", "probability", "derivative", "contribution"])
            w.writerows(self.rows)


def _first_order(psi, bases, omega, t, p):
    """Sum over single relaxation events of |<B| T_+^(k) e^{i omega t Jz} |psi>|^2 and its omega-derivative."""
    n = qcore.n_qubits_of(psi)
    jz = qcore.jz_diagonal(n)
    evolved = psi * np.exp(1j * omega * t * jz)
    d_evolved = 1j * t * jz * evolved
    jumped = [t_plus(evolved, k) for k in range(1, n + 1)]
    d_jumped = [t_plus(d_evolved, k) for k in range(1, n + 1)]
    rows = []
    for label, b in bases:
        amps = np.array([np.vdot(b, x) for x in jumped])
        d_amps = np.array([np.vdot(b, x) for x in d_jumped])
        prob = p * float(np.sum(np.abs(amps) ** 2))
        deriv = p * float(np.sum(2 * np.real(np.conj(amps) * d_amps)))
        contrib = deriv ** 2 / prob if prob > 1e-300 else 0.0
        rows.append((label, prob, deriv, contrib))
    return rows


def fisher_contributions(family: NonSymmetricFamily, omega: float, t: float, gamma_t: float) -> FisherBreakdown:
    """First-order relaxation contributions F_a (2N bases A_j) and F_s (bases S).

    The relaxation probability 1 - exp(-gamma t) multiplies every
    probability and derivative alike, so it cancels in F_a / F_s.
    """
    if gamma_t < 0:
        raise ValueError("gamma_t must be non-negative")
    p = -np.expm1(-gamma_t)
    rows_a = _first_order(family.psi_a(), aj_bases(family.n, family.b1, family.b2), omega, t, p)
    rows_s = _first_order(family.psi_s(), s_bases(family.n, family.b1, family.b2), omega, t, p)
    rows = [("symmetric",) + r for r in rows_s] + [("non_symmetric",) + r for r in rows_a]
    return FisherBreakdown(f_a=sum(r[3] for r in rows_a), f_s=sum(r[3] for r in rows_s), rows=rows)


def fisher_contributions_exact(family: NonSymmetricFamily, t: float, gamma_t: float,
                               domega: float = 1e-5) -> FisherBreakdown:
    """Same bookkeeping on the full amplitude-damped density matrix, at omega = 0.

    Probabilities <B|rho|B> come from the sensed state; derivatives by
    central difference in omega.
    """
    rate = gamma_t / t
    model = NoiseModel(AMPLITUDE_DAMPING, rate=rate)
    out = {}
    for scheme, psi, bases in (("symmetric", family.psi_s(), s_bases(family.n, family.b1, family.b2)),
                               ("non_symmetric", family.psi_a(), aj_bases(family.n, family.b1, family.b2))):
        r0 = sense(psi, 0.0, t, model)
        rp = sense(psi, domega, t, model)
        rm = sense(psi, -domega, t, model)
        rows = []
        for label, b in bases:
            prob = float(np.real(np.vdot(b, r0 @ b)))
            deriv = float(np.real(np.vdot(b, (rp - rm) @ b))) / (2 * domega)
            rows.append((label, prob, deriv, deriv ** 2 / prob if prob > 1e-300 else 0.0))
        out[scheme] = rows
    rows = [("symmetric",) + r for r in out["symmetric"]] + [("non_symmetric",) + r for r in out["non_symmetric"]]
    return FisherBreakdown(f_a=sum(r[3] for r in out["non_symmetric"]),
                           f_s=sum(r[3] for r in out["symmetric"]), rows=rows)
