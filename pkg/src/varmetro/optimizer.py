"""Randomised adaptive coordinate descent over probe parameters and sensing time.

The search works on an internal vector x = (theta, log t). Angles wrap
periodically, bounded reals and log t are clipped to their box. Every
restart draws from its own child of one SeedSequence, so results do not
depend on whether restarts run serially or in a thread pool.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.optimize

from varmetro import fisher, probes
from varmetro.channels import AMPLITUDE_DAMPING, DEPHASING, NoiseModel
from varmetro.errors import NumericalError

STEP_FLOOR = 1e-6
STALL_SWEEPS = 5
ANGLE_STEP = 0.3
AMPLITUDE_STEP = 0.2
TIME_STEP = 0.1
DEFAULT_T_MAX = 2.0
DEFAULT_T_MIN = 1e-3


class BudgetExhausted(RuntimeError):
    pass


@dataclass(frozen=True)
class SearchSpec:
    """Search box and stopping rules.

    ``bounds`` holds one (low, high, periodic) triple per theta coordinate.
    When ``optimize_time`` is false the objective is called with ``t_fixed``.
    """

    bounds: tuple
    restarts: int = 4
    budget: int | None = None
    seed: int = 0
    tolerance: float = 1e-6
    t_max: float = DEFAULT_T_MAX
    t_min: float = DEFAULT_T_MIN
    optimize_time: bool = True
    t_fixed: float | None = None
    workers: int = 1

    def __post_init__(self):
        bounds = tuple((float(lo), float(hi), bool(per)) for lo, hi, per in self.bounds)
        object.__setattr__(self, "bounds", bounds)
        if any(hi <= lo for lo, hi, _ in bounds):
            raise ValueError("every bound needs low < high")
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")
        if self.dimension < 1:
            raise ValueError("search dimension must be >= 1")
        if self.budget is None:
            object.__setattr__(self, "budget", 2000 * self.dimension * self.restarts)
        if self.budget < self.restarts * 10 * self.dimension:
            raise ValueError(
                f"budget {self.budget} below restarts x 10 x dimension = {self.restarts * 10 * self.dimension}")
        if not 0 < self.t_min < self.t_max:
            raise ValueError("need 0 < t_min < t_max")
        if not self.optimize_time and (self.t_fixed is None or self.t_fixed <= 0):
            raise ValueError("a fixed-time search needs a positive t_fixed")
        if not 0 <= self.seed < 2 ** 64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if self.tolerance < 0:
            raise ValueError("tolerance must be non-negative")

    @property
    def dimension(self) -> int:
        return len(self.bounds) + (1 if self.optimize_time else 0)

    def box(self):
        lo = [b[0] for b in self.bounds]
        hi = [b[1] for b in self.bounds]
        periodic = [b[2] for b in self.bounds]
        steps = [ANGLE_STEP if b[2] else AMPLITUDE_STEP for b in self.bounds]
        if self.optimize_time:
            lo.append(np.log(self.t_min))
            hi.append(np.log(self.t_max))
            periodic.append(False)
            steps.append(TIME_STEP)
        return np.array(lo), np.array(hi), np.array(periodic), np.array(steps)

    def to_dict(self):
        return {
            "restarts": self.restarts, "budget": self.budget, "seed": self.seed,
            "tolerance": self.tolerance, "t_max": self.t_max, "t_min": self.t_min,
            "optimize_time": self.optimize_time, "t_fixed": self.t_fixed,
        }


@dataclass
class OptimizerTrace:
    """Best-so-far objective after each evaluation, merged over restarts."""

    evaluations: list = field(default_factory=list)
    best: list = field(default_factory=list)

    def append(self, value):
        prev = self.best[-1] if self.best else -np.inf
        self.evaluations.append(len(self.evaluations) + 1)
        self.best.append(max(prev, value))

    def rows(self):
        return list(zip(self.evaluations, self.best))


@dataclass
class OptimizerResult:
    theta: np.ndarray
    t: float
    value: float
    trace: OptimizerTrace
    restart_values: list
    evaluations: int


def _project(x, lo, hi, periodic):
    width = hi - lo
    wrapped = lo + np.mod(x - lo, width)
    return np.where(periodic, wrapped, np.clip(x, lo, hi))


class _Run:
    """One restart of the coordinate search."""

    def __init__(self, objective, spec, budget, rng, x0):
        self.objective = objective
        self.spec = spec
        self.budget = budget
        self.rng = rng
        self.lo, self.hi, self.periodic, self.steps = spec.box()
        self.values = []
        self.resolution = max(np.sqrt(spec.tolerance), STEP_FLOOR)
        self.x = _project(np.asarray(x0, dtype=float), self.lo, self.hi, self.periodic)
        self.fx = self._eval(self.x)

    def _split(self, x):
        if self.spec.optimize_time:
            return x[:-1], float(np.exp(x[-1]))
        return x, float(self.spec.t_fixed)

    def _eval(self, x):
        if len(self.values) >= self.budget:
            raise BudgetExhausted
        theta, t = self._split(x)
        v = float(self.objective(theta, t))
        if not np.isfinite(v):
            raise NumericalError(f"objective returned {v!r} at t={t!r}", stage="objective")
        self.values.append(v)
        return v

    def sweep(self):
        for i in self.rng.permutation(self.x.size):
            for sign in (1.0, -1.0):
                trial = self.x.copy()
                trial[i] += sign * self.steps[i]
                trial = _project(trial, self.lo, self.hi, self.periodic)
                if trial[i] == self.x[i]:
                    continue
                ft = self._eval(trial)
                if ft > self.fx:
                    self.x, self.fx = trial, ft
                    self.steps[i] *= 2.0
                    break
            else:
                self.steps[i] = max(0.5 * self.steps[i], STEP_FLOOR)

    def run(self):
        try:
            self.sweep()
        except BudgetExhausted:
            raise BudgetExhausted(
                f"budget of {self.budget} evaluations per restart exhausted before the first sweep") from None
        stalled = 0
        try:
            while stalled < STALL_SWEEPS:
                before = self.fx
                self.sweep()
                gain = self.fx - before
                flat = gain <= self.spec.tolerance * max(abs(before), 1e-300)
                # near a smooth maximum the objective moves by ~step^2, so stalls
                # only count once every step has resolved the tolerance
                resolved = self.steps.max() <= self.resolution
                stalled = stalled + 1 if flat and resolved else 0
        except BudgetExhausted:
            pass
        return self


def _uniform_start(spec, rng):
    lo, hi, _, _ = spec.box()
    return rng.uniform(lo, hi)


def optimize(objective, spec: SearchSpec, warm_start=None) -> OptimizerResult:
    """Maximise objective(theta, t) over the search box.

    ``warm_start`` is an optional (theta, t) pair used by the first restart;
    the others start from uniform samples.
    """
    children = np.random.SeedSequence(spec.seed).spawn(spec.restarts)
    budget = spec.budget // spec.restarts

    def one(r):
        rng = np.random.default_rng(children[r])
        x0 = _uniform_start(spec, rng)
        if r == 0 and warm_start is not None:
            theta0, t0 = warm_start
            x0 = np.asarray(theta0, dtype=float)
            if spec.optimize_time:
                x0 = np.append(x0, np.log(t0))
            if x0.size != spec.dimension:
                raise ValueError(f"warm start has {x0.size} coordinates, search has {spec.dimension}")
        return _Run(objective, spec, budget, rng, x0).run()

    if spec.workers > 1:
        with ThreadPoolExecutor(spec.workers) as pool:
            runs = list(pool.map(one, range(spec.restarts)))
    else:
        runs = [one(r) for r in range(spec.restarts)]

    trace = OptimizerTrace()
    for run in runs:
        for v in run.values:
            trace.append(v)
    # ties go to the lowest restart index
    best = max(range(len(runs)), key=lambda r: (runs[r].fx, -r))
    theta, t = runs[best]._split(runs[best].x)
    return OptimizerResult(
        theta=np.asarray(theta), t=t, value=runs[best].fx, trace=trace,
        restart_values=[r.fx for r in runs], evaluations=sum(len(r.values) for r in runs),
    )


@dataclass
class ScanResult:
    times: np.ndarray
    values: np.ndarray
    t_best: float
    value_best: float


def scan_time(probe, model: NoiseModel, times, method: str = fisher.FIDELITY,
              domega: float | None = None) -> ScanResult:
    """Precision on a time grid, with the argmax refined by a three-point parabola."""
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or times.size == 0 or np.any(times <= 0) or np.any(np.diff(times) <= 0):
        raise ValueError("time grid must be a sorted, positive, non-empty 1-D array")

    def f(t):
        return fisher.dimensionless_precision(probe, model, t, domega, method)

    values = np.array([f(t) for t in times])
    k = int(np.argmax(values))
    t_best, v_best = times[k], values[k]
    if 0 < k < times.size - 1:
        x0, x1, x2 = times[k - 1:k + 2]
        y0, y1, y2 = values[k - 1:k + 2]
        denom = (x0 - x1) * (x0 - x2) * (x1 - x2)
        a = (x2 * (y1 - y0) + x1 * (y0 - y2) + x0 * (y2 - y1)) / denom
        b = (x2 ** 2 * (y0 - y1) + x1 ** 2 * (y2 - y0) + x0 ** 2 * (y1 - y2)) / denom
        if a < 0:
            t_vertex = -b / (2 * a)
            if x0 < t_vertex < x2:
                v_vertex = f(t_vertex)
                if v_vertex > v_best:
                    t_best, v_best = t_vertex, v_vertex
    return ScanResult(times, values, float(t_best), float(v_best))


# --- family-level driver -------------------------------------------------

@dataclass
class PrecisionResult:
    family: str
    n_qubits: int
    noise: dict
    theta: np.ndarray
    t: float
    precision: float
    trace: OptimizerTrace

    def to_dict(self):
        return {
            "family": self.family, "n_qubits": self.n_qubits, "noise": self.noise,
            "theta": [float(x) for x in self.theta], "gamma_t": self.t * self.noise["rate"],
            "t": self.t, "precision": self.precision,
        }


def family_spec(family: probes.ProbeFamily, model: NoiseModel, **kw) -> SearchSpec:
    kw.setdefault("t_max", min(DEFAULT_T_MAX, model.max_time()))
    return SearchSpec(bounds=tuple(family.bounds()), **kw)


def precision_objective(family: probes.ProbeFamily, model: NoiseModel, method: str = fisher.FIDELITY,
                        domega: float | None = None, noisy_preparation: tuple | None = None):
    """theta, t -> dimensionless precision of the family state.

    ``noisy_preparation`` = (p1, p2) prepares the probe by its circuit under
    depolarizing gate noise instead of using the ideal state.
    """
    def objective(theta, t):
        if noisy_preparation is not None:
            state = family.noisy_density(theta, *noisy_preparation)
        else:
            state = family.state(theta)
        return fisher.dimensionless_precision(state, model, t, domega, method)
    return objective


@dataclass
class WarmTarget:
    """Reference state given as weighted components whose relative phases are free."""

    components: list
    weights: np.ndarray
    t: float

    def state(self) -> np.ndarray:
        return sum(w * c for w, c in zip(self.weights, self.components))

    def overlap(self, psi: np.ndarray) -> float:
        """Overlap with the best choice of relative phases, (sum_k w_k |<c_k|psi>|)^2."""
        return float(sum(w * abs(np.vdot(c, psi)) for w, c in zip(self.weights, self.components)) ** 2)


def warm_target(model: NoiseModel, n: int, method: str = fisher.SLD) -> WarmTarget:
    """Where a good probe is expected to live, with a guess for t.

    GHZ-like for Pauli and OU noise, an optimised one-axis-twisted state for
    dephasing, and the three-component non-symmetric state for amplitude
    damping (even N >= 4 only; GHZ-like otherwise).
    """
    t_grid = np.geomspace(0.01, min(DEFAULT_T_MAX, model.max_time()), 60)
    dim = 1 << n
    zeros, ones = np.eye(1, dim, 0, dtype=complex)[0], np.eye(1, dim, dim - 1, dtype=complex)[0]
    if model.kind == DEPHASING and n > 1:
        fam = probes.ProbeFamily(probes.SQUEEZED, n)
        res = optimize(precision_objective(fam, model, method), family_spec(fam, model, restarts=2, budget=600, seed=1),
                       warm_start=((0.0, 0.0, 0.0), 0.5))
        return WarmTarget([fam.state(res.theta)], np.ones(1), res.t)
    if model.kind == AMPLITUDE_DAMPING and n >= 4 and n % 2 == 0:
        from varmetro.analysis import d_state
        w = np.array([0.77, 0.55, 0.33])
        target = WarmTarget([ones, d_state(n), zeros], w / np.linalg.norm(w), 0.0)
    else:
        target = WarmTarget([zeros, ones], np.full(2, np.sqrt(0.5)), 0.0)
    target.t = scan_time(target.state(), model, t_grid, method).t_best
    return target


def symmetric_projection_params(target: np.ndarray) -> np.ndarray:
    """Symmetric-family parameters of the projection of target onto the Dicke basis."""
    n = int(np.log2(target.size))
    coeffs = np.array([np.vdot(probes.dicke_excitations(n, k), target) for k in range(n + 1)])
    if np.linalg.norm(coeffs) < 1e-12:
        coeffs = np.zeros(n + 1, dtype=complex)
        coeffs[[0, -1]] = 1
    coeffs = coeffs / np.abs(coeffs).max()
    return probes.ProbeFamily.symmetric_params(coeffs)


def pretrain_ansatz(family: probes.ProbeFamily, target: WarmTarget, starts: int = 8, seed: int = 0,
                    maxiter: int = 3000):
    """Fit ansatz angles to a warm target; returns (theta, overlap).

    Multi-start L-BFGS on 1 - overlap. This only seeds the first restart of
    the precision search, which itself is the coordinate descent above.
    """
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(0xA5,)))

    def loss(theta):
        return 1.0 - target.overlap(family.state(theta))

    best_x, best_f = None, np.inf
    for _ in range(starts):
        res = scipy.optimize.minimize(loss, rng.uniform(-np.pi, np.pi, family.param_count), method="L-BFGS-B",
                                      options={"maxiter": maxiter})
        if res.fun < best_f:
            best_x, best_f = res.x, res.fun
    return _wrap_angles(best_x), 1.0 - best_f


def _wrap_angles(theta):
    return np.mod(np.asarray(theta) + np.pi, 2 * np.pi) - np.pi


def family_warm_start(family: probes.ProbeFamily, model: NoiseModel, seed: int = 0, pretrain_starts: int = 8):
    """(theta, t) starting point for the first restart of a family search."""
    if family.kind == probes.PRODUCT:
        return np.zeros(1), 0.5
    if family.kind == probes.SQUEEZED:
        # the product state; the 4-dimensional search needs no better guess
        return np.zeros(3), 0.5
    target = warm_target(model, family.n_qubits)
    if family.kind == probes.GHZ:
        return np.zeros(1), target.t
    if family.kind == probes.SYMMETRIC:
        return symmetric_projection_params(target.state()), target.t
    theta, _ = pretrain_ansatz(family, target, pretrain_starts, seed)
    return theta, target.t


def optimize_family(family: probes.ProbeFamily, model: NoiseModel, spec: SearchSpec | None = None,
                    method: str = fisher.FIDELITY, domega: float | None = None,
                    warm: bool = True, warm_start=None, noisy_preparation: tuple | None = None,
                    pretrain_starts: int = 8) -> PrecisionResult:
    if spec is None:
        spec = family_spec(family, model)
    if warm and warm_start is None:
        warm_start = family_warm_start(family, model, spec.seed, pretrain_starts)
        if warm_start is not None:
            theta0, t0 = warm_start
            warm_start = (theta0, float(np.clip(t0, spec.t_min, spec.t_max)))
    objective = precision_objective(family, model, method, domega, noisy_preparation)
    res = optimize(objective, spec, warm_start)
    return PrecisionResult(family=family.kind, n_qubits=family.n_qubits, noise=model.to_dict(),
                           theta=res.theta, t=res.t, precision=res.value, trace=res.trace)
