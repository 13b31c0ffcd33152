"""Time the numba kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--n 8] [--repeat 20]

Each row reports the median wall time per call for both backends and the
speedup. Results are also checked for agreement before timing.
"""

import argparse
import statistics
import time

import numpy as np

from varmetro import _kernels, qcore
from varmetro.probes import AnsatzLayout


def median_time(fn, repeat):
    fn()  # warm-up (also triggers numba compilation)
    samples = []
    for _ in range(repeat):
        start = time.perf_counter()
        fn()
        samples.append(time.perf_counter() - start)
    return statistics.median(samples)


def cases(n, rng):
    d = 1 << n
    rho = qcore.random_density_matrix(n, rng)
    u1 = qcore.random_unitary(2, rng)
    u2 = qcore.random_unitary(4, rng)
    s = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    p = np.linalg.eigvalsh(rho)
    g = np.ascontiguousarray(rng.random((d, d)))
    codes = AnsatzLayout().codes
    theta = rng.uniform(-np.pi, np.pi, AnsatzLayout().param_count(n))
    return {
        "left_1q (rho)": lambda b: b.left_1q(rho, u1, n // 2),
        "left_2q (rho)": lambda b: b.left_2q(rho, u2, n - 1, 0),
        "superop_1q": lambda b: b.superop_1q(rho, s, n // 2),
        "qfi_unitary": lambda b: b.qfi_unitary(p, g, 1e-10),
        "ansatz_ket": lambda b: b.ansatz_ket(theta, n, codes),
    }


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--n", type=int, default=8, help="number of qubits")
    parser.add_argument("--repeat", type=int, default=20)
    args = parser.parse_args(argv)
    if _kernels.numba_backend is None:
        raise SystemExit("numba is not installed; nothing to compare")
    rng = np.random.default_rng(0)
    np_b, nb_b = _kernels.numpy_backend, _kernels.numba_backend
    print(f"N = {args.n}, median of {args.repeat} calls")
    print(f"{'kernel':<16}{'numpy [ms]':>12}{'numba [ms]':>12}{'speedup':>10}")
    for name, call in cases(args.n, rng).items():
        a, b = call(np_b), call(nb_b)
        if not np.allclose(a, b, atol=1e-10):
            raise SystemExit(f"{name}: backends disagree")
        t_np = median_time(lambda: call(np_b), args.repeat)
        t_nb = median_time(lambda: call(nb_b), args.repeat)
        print(f"{name:<16}{1e3 * t_np:>12.3f}{1e3 * t_nb:>12.3f}{t_np / t_nb:>10.1f}")


if __name__ == "__main__":
    main()
