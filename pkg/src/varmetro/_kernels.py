"""Hot inner loops for gate, channel and QFI evaluation.

Two interchangeable backends are provided: explicit loops compiled with
numba, and reshape/einsum formulations in pure numpy. The active backend is
chosen at import time:

    VARMETRO_BACKEND=numpy   force the numpy path
    VARMETRO_BACKEND=numba   require numba (ImportError if missing)

Default is numba when importable. Both backends are always importable as
``numpy_backend`` / ``numba_backend`` (the latter may be None) so tests and
benchmarks can compare them directly.

Bit convention: ``bit`` is the position counted from the least significant
bit, so qubit k (1-based, qubit 1 = most significant) has bit = n - k.
Matrices are operated on along their first axis ("left" application).
"""

import os
import types

import numpy as np

try:
    import numba
    from numba import njit
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None


# ---------------------------------------------------------------------------
# numpy implementations
# ---------------------------------------------------------------------------

def _np_left_1q(mat, u, bit):
    d, m = mat.shape
    stride = 1 << bit
    view = mat.reshape(d // (2 * stride), 2, stride, m)
    return np.einsum("ab,xbym->xaym", u, view).reshape(d, m)


def _np_left_2q(mat, u, bit_a, bit_b):
    # u acts on |a b>, a being the high index of u.
    d, m = mat.shape
    n = d.bit_length() - 1
    t = mat.reshape((2,) * n + (m,))
    ax_a, ax_b = n - 1 - bit_a, n - 1 - bit_b
    u4 = u.reshape(2, 2, 2, 2)
    out = np.tensordot(u4, t, axes=([2, 3], [ax_a, ax_b]))
    out = np.moveaxis(out, [0, 1], [ax_a, ax_b])
    return np.ascontiguousarray(out).reshape(d, m)


def _np_superop_1q(rho, s, bit):
    # s acts on the column-stacked 2x2 block [r0c0, r1c0, r0c1, r1c1].
    d = rho.shape[0]
    stride = 1 << bit
    a = d // (2 * stride)
    view = rho.reshape(a, 2, stride, a, 2, stride)
    s4 = s.reshape(2, 2, 2, 2)  # [c', r', c, r]
    out = np.einsum("abcd,xdyXcY->xbyXaY", s4, view)
    return out.reshape(d, d)


def _np_qfi_weights(p, eps):
    ps = p[:, None] + p[None, :]
    diff = p[:, None] - p[None, :]
    w = np.zeros_like(ps)
    keep = ps > eps
    w[keep] = 2.0 * diff[keep] ** 2 / ps[keep]
    return w


def _np_qfi_unitary(p, g_abs2, eps):
    return float(np.sum(_np_qfi_weights(p, eps) * g_abs2))


def _np_ansatz_ket(theta, n, blocks):
    # blocks: int array, 1 = Rx layer, 2 = CRy ring followed by an Rz layer
    d = 1 << n
    psi = np.zeros(d, dtype=np.complex128)
    psi[0] = 1.0
    idx = np.arange(d)
    i = 0
    for b in blocks:
        if b == 1:
            for q in range(1, n + 1):
                mask = 1 << (n - q)
                c, s = np.cos(theta[i] / 2), np.sin(theta[i] / 2)
                lo = idx[(idx & mask) == 0]
                a0, a1 = psi[lo].copy(), psi[lo | mask].copy()
                psi[lo] = c * a0 - 1j * s * a1
                psi[lo | mask] = -1j * s * a0 + c * a1
                i += 1
        else:
            if n > 1:
                for k in range(1, n + 1):
                    cm, tm = 1 << (n - k), 1 << (n - (k % n + 1))
                    c, s = np.cos(theta[i] / 2), np.sin(theta[i] / 2)
                    lo = idx[((idx & cm) != 0) & ((idx & tm) == 0)]
                    a0, a1 = psi[lo].copy(), psi[lo | tm].copy()
                    psi[lo] = c * a0 - s * a1
                    psi[lo | tm] = s * a0 + c * a1
                    i += 1
            else:
                i += 1
            # Rz layer: phase exp(-i theta/2) on |0>, exp(+i theta/2) on |1>
            bits = (idx[:, None] >> (n - 1 - np.arange(n))[None, :]) & 1
            psi = psi * np.exp(1j * (bits * 2 - 1) @ theta[i:i + n] / 2)
            i += n
    return psi


numpy_backend = types.SimpleNamespace(
    name="numpy",
    left_1q=_np_left_1q,
    left_2q=_np_left_2q,
    superop_1q=_np_superop_1q,
    qfi_unitary=_np_qfi_unitary,
    ansatz_ket=_np_ansatz_ket,
)


# ---------------------------------------------------------------------------
# numba implementations
# ---------------------------------------------------------------------------

def _build_numba_backend():
    @njit(cache=True)
    def left_1q(mat, u, bit):
        d, m = mat.shape
        out = np.empty_like(mat)
        stride = 1 << bit
        u00, u01, u10, u11 = u[0, 0], u[0, 1], u[1, 0], u[1, 1]
        for i in range(d):
            if i & stride:
                continue
            j = i | stride
            for c in range(m):
                a0 = mat[i, c]
                a1 = mat[j, c]
                out[i, c] = u00 * a0 + u01 * a1
                out[j, c] = u10 * a0 + u11 * a1
        return out

    @njit(cache=True)
    def left_2q(mat, u, bit_a, bit_b):
        d, m = mat.shape
        out = np.empty_like(mat)
        sa = 1 << bit_a
        sb = 1 << bit_b
        idx = np.empty(4, dtype=np.int64)
        amp = np.empty(4, dtype=mat.dtype)
        for i in range(d):
            if (i & sa) or (i & sb):
                continue
            idx[0] = i
            idx[1] = i | sb
            idx[2] = i | sa
            idx[3] = i | sa | sb
            for c in range(m):
                for k in range(4):
                    amp[k] = mat[idx[k], c]
                for r in range(4):
                    acc = 0j
                    for k in range(4):
                        acc += u[r, k] * amp[k]
                    out[idx[r], c] = acc
        return out

    @njit(cache=True)
    def superop_1q(rho, s, bit):
        d = rho.shape[0]
        out = np.empty_like(rho)
        stride = 1 << bit
        v = np.empty(4, dtype=rho.dtype)
        for r in range(d):
            if r & stride:
                continue
            r1 = r | stride
            for c in range(d):
                if c & stride:
                    continue
                c1 = c | stride
                v[0] = rho[r, c]
                v[1] = rho[r1, c]
                v[2] = rho[r, c1]
                v[3] = rho[r1, c1]
                out[r, c] = s[0, 0] * v[0] + s[0, 1] * v[1] + s[0, 2] * v[2] + s[0, 3] * v[3]
                out[r1, c] = s[1, 0] * v[0] + s[1, 1] * v[1] + s[1, 2] * v[2] + s[1, 3] * v[3]
                out[r, c1] = s[2, 0] * v[0] + s[2, 1] * v[1] + s[2, 2] * v[2] + s[2, 3] * v[3]
                out[r1, c1] = s[3, 0] * v[0] + s[3, 1] * v[1] + s[3, 2] * v[2] + s[3, 3] * v[3]
        return out

    @njit(cache=True)
    def qfi_unitary(p, g_abs2, eps):
        d = p.shape[0]
        total = 0.0
        for i in range(d):
            for j in range(i + 1, d):
                ps = p[i] + p[j]
                if ps > eps:
                    diff = p[i] - p[j]
                    total += 2.0 * diff * diff / ps * (g_abs2[i, j] + g_abs2[j, i])
        return total

    @njit(cache=True)
    def ansatz_ket(theta, n, blocks):
        d = 1 << n
        psi = np.zeros(d, dtype=np.complex128)
        psi[0] = 1.0
        i = 0
        for b in blocks:
            if b == 1:
                for q in range(1, n + 1):
                    mask = 1 << (n - q)
                    c, s = np.cos(theta[i] / 2), np.sin(theta[i] / 2)
                    for x in range(d):
                        if x & mask == 0:
                            a0, a1 = psi[x], psi[x | mask]
                            psi[x] = c * a0 - 1j * s * a1
                            psi[x | mask] = -1j * s * a0 + c * a1
                    i += 1
            else:
                if n > 1:
                    for k in range(1, n + 1):
                        cm, tm = 1 << (n - k), 1 << (n - (k % n + 1))
                        c, s = np.cos(theta[i] / 2), np.sin(theta[i] / 2)
                        for x in range(d):
                            if (x & cm) != 0 and (x & tm) == 0:
                                a0, a1 = psi[x], psi[x | tm]
                                psi[x] = c * a0 - s * a1
                                psi[x | tm] = s * a0 + c * a1
                        i += 1
                else:
                    i += 1
                for x in range(d):
                    ph = 0.0
                    for q in range(n):
                        bit = (x >> (n - 1 - q)) & 1
                        ph += (2 * bit - 1) * theta[i + q]
                    psi[x] *= np.exp(0.5j * ph)
                i += n
        return psi

    return types.SimpleNamespace(
        name="numba",
        left_1q=left_1q,
        left_2q=left_2q,
        superop_1q=superop_1q,
        qfi_unitary=qfi_unitary,
        ansatz_ket=ansatz_ket,
    )


numba_backend = _build_numba_backend() if numba is not None else None


def _select():
    choice = os.environ.get("VARMETRO_BACKEND", "").strip().lower()
    if choice == "numpy":
        return numpy_backend
    if choice == "numba":
        if numba_backend is None:
            raise ImportError("VARMETRO_BACKEND=numba but numba is not installed")
        return numba_backend
    if choice not in ("", "auto"):
        raise ValueError(f"unknown VARMETRO_BACKEND {choice!r}")
    return numba_backend if numba_backend is not None else numpy_backend


backend = _select()
BACKEND = backend.name


def left_1q(mat, u, bit):
    return backend.left_1q(mat, u, bit)


def left_2q(mat, u, bit_a, bit_b):
    return backend.left_2q(mat, u, bit_a, bit_b)


def superop_1q(rho, s, bit):
    return backend.superop_1q(rho, s, bit)


def qfi_unitary(p, g_abs2, eps):
    return backend.qfi_unitary(p, g_abs2, eps)


def ansatz_ket(theta, n, blocks):
    return backend.ansatz_ket(theta, n, blocks)
