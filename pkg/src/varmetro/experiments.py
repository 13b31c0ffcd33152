"""Declarative experiment configs and the batch runner behind the command line.

A run writes into ``output_dir``:

    config.json                 normalised config
    records/<family>_N<n>.json  one result record per (family, N)
    curve.csv                   config_hash, family, n_qubits, precision, t_opt
    measures.csv                S_avg / P_avg per optimised state
    traces/<family>_N<n>.csv    optimiser best-so-far trace
    states/<family>_N<n>.json   optimised probe amplitudes

Cells run in sorted (family, N) order so file contents are deterministic.
"""

import csv
import hashlib
import json
import os
import time
from pathlib import Path
from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from varmetro import __version__, analysis, fisher, optimizer, probes
from varmetro.channels import DEFAULT_DEPOLARIZING, NOISE_KINDS, NoiseModel
from varmetro.probes import AnsatzLayout, ProbeFamily

THREADS_ENV = "VARMETRO_THREADS"


class InvalidConfig(ValueError):
    pass


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class NoiseConfig(_Strict):
    kind: Literal[NOISE_KINDS]
    rate: float = Field(1.0, gt=0)
    ou_regime: Literal["long", "short", "exact"] | None = None
    ou_bandwidth: float | None = Field(None, gt=0)
    ou_correlation_rate: float | None = Field(None, gt=0)

    def model(self) -> NoiseModel:
        return NoiseModel(**self.model_dump())

    @model_validator(mode="after")
    def _valid(self):
        try:
            self.model()
        except ValueError as exc:
            raise ValueError(str(exc)) from None
        return self


class SearchConfig(_Strict):
    restarts: int = Field(4, ge=1)
    budget: int | None = Field(None, ge=1)
    budget_per_dim: int = Field(2000, ge=10)
    tolerance: float = Field(1e-6, ge=0)
    t_max: float = Field(optimizer.DEFAULT_T_MAX, gt=0)
    t_min: float = Field(optimizer.DEFAULT_T_MIN, gt=0)
    warm_start: bool = True
    pretrain_starts: int = Field(8, ge=1)


class NoisyPreparation(_Strict):
    enabled: bool = False
    p1: float = Field(DEFAULT_DEPOLARIZING[1], ge=0, le=1)
    p2: float = Field(DEFAULT_DEPOLARIZING[2], ge=0, le=1)


class TimeGrid(_Strict):
    start: float = Field(0.01, gt=0)
    stop: float = Field(2.0, gt=0)
    num: int = Field(200, ge=1)
    spacing: Literal["linear", "log"] = "linear"

    def values(self):
        if self.stop <= self.start and self.num > 1:
            raise InvalidConfig("time grid needs start < stop")
        if self.spacing == "log":
            return np.geomspace(self.start, self.stop, self.num)
        return np.linspace(self.start, self.stop, self.num)


class NonSymmetricConfig(_Strict):
    c: tuple[float, float, float] = (0.77, 0.55, 0.33)
    b1: tuple[float, float] = (float(analysis.DEFAULT_B1), 0.0)
    b2: tuple[float, float] = (0.0, float(analysis.DEFAULT_B2.imag))
    t: float = Field(1.0, gt=0)
    gamma_t: float = Field(0.1, ge=0)
    omega: float = 0.0


class ExperimentConfig(_Strict):
    kind: Literal["optimize", "scan_time", "analyze"] = "optimize"
    n_qubits: list[int]
    families: list[Literal[probes.FAMILIES]] = ["ghz"]
    layout: list[Literal["B1", "B2"]] = list(probes.DEFAULT_BLOCKS)
    noise: NoiseConfig = NoiseConfig(kind="dephasing")
    search: SearchConfig = SearchConfig()
    method: Literal["fidelity", "sld"] = "fidelity"
    domega: float = Field(fisher.DEFAULT_DOMEGA, gt=0)
    noisy_preparation: NoisyPreparation = NoisyPreparation()
    time_grid: TimeGrid = TimeGrid()
    theta: dict[str, list[float]] = {}
    nonsymmetric: NonSymmetricConfig = NonSymmetricConfig()
    output_dir: str = "results"
    seed: int = Field(0, ge=0, lt=2 ** 64)

    @field_validator("n_qubits", mode="before")
    @classmethod
    def _n_list(cls, v):
        if isinstance(v, int):
            return [v]
        if isinstance(v, dict):
            if set(v) != {"start", "stop"}:
                raise ValueError("an N range needs exactly the keys start and stop (inclusive)")
            return list(range(v["start"], v["stop"] + 1))
        return v

    @field_validator("n_qubits")
    @classmethod
    def _n_valid(cls, v):
        if not v:
            raise ValueError("empty sweep")
        if any(n < 1 or n > 12 for n in v):
            raise ValueError("n_qubits entries must lie in 1..12")
        return sorted(set(v))

    @model_validator(mode="after")
    def _cross(self):
        if not self.families:
            raise ValueError("empty sweep")
        if self.search.budget_per_dim < 10 * self.search.restarts:
            raise ValueError("search.budget_per_dim must be at least 10 x restarts")
        if self.search.t_min >= self.search.t_max:
            raise ValueError("search.t_min must be below search.t_max")
        if self.kind == "analyze" and any(n % 2 or n < 4 for n in self.n_qubits):
            raise ValueError("the non-symmetric analysis needs even N >= 4")
        if self.noisy_preparation.enabled and probes.SYMMETRIC in self.families:
            raise ValueError("symmetric states have no preparation circuit")
        return self

    def config_hash(self) -> str:
        """Hash of everything that determines the results (the output location does not)."""
        canon = json.dumps(self.model_dump(mode="json", exclude={"output_dir"}), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()[:16]


def parse_config(data) -> ExperimentConfig:
    """Strictly parse a dict or JSON text; errors come back as InvalidConfig."""
    from pydantic import ValidationError
    try:
        if isinstance(data, (str, bytes)):
            data = json.loads(data)
        return ExperimentConfig.model_validate(data)
    except json.JSONDecodeError as exc:
        raise InvalidConfig(f"config is not valid JSON: {exc}") from None
    except ValidationError as exc:
        msgs = "; ".join(f"{'.'.join(map(str, e['loc'])) or 'config'}: {e['msg']}" for e in exc.errors())
        raise InvalidConfig(msgs) from None


def load_config(path) -> ExperimentConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise InvalidConfig(f"cannot read config: {exc}") from None
    return parse_config(text)


def thread_count() -> int:
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        n = int(raw)
    except ValueError:
        raise InvalidConfig(f"{THREADS_ENV} must be an integer, got {raw!r}") from None
    if n < 1:
        raise InvalidConfig(f"{THREADS_ENV} must be >= 1")
    return n


def cell_seed(root: int, family: str, n: int) -> int:
    """Counter-based child seed for one (family, N) cell."""
    ss = np.random.SeedSequence(root, spawn_key=(probes.FAMILIES.index(family), n))
    return int(ss.generate_state(1, np.uint64)[0])


def state_to_json(psi: np.ndarray, **meta) -> dict:
    psi = np.asarray(psi, dtype=complex)
    inter = np.empty(2 * psi.size)
    inter[0::2] = psi.real
    inter[1::2] = psi.imag
    return {"n_qubits": int(np.log2(psi.size)), "qubit_order": "qubit 1 is the most significant bit",
            "amplitudes": inter.tolist(), **meta}


def state_from_json(d: dict) -> np.ndarray:
    if "amplitudes" not in d:
        raise InvalidConfig("state file lacks 'amplitudes'")
    a = np.asarray(d["amplitudes"], dtype=float)
    if a.size % 2:
        raise InvalidConfig("amplitude array must interleave real and imaginary parts")
    psi = a[0::2] + 1j * a[1::2]
    n = int(round(np.log2(psi.size))) if psi.size else -1
    if n < 1 or psi.size != 1 << n or ("n_qubits" in d and d["n_qubits"] != n):
        raise InvalidConfig("amplitude count is not 2^n_qubits")
    norm = np.linalg.norm(psi)
    if abs(norm - 1) > 1e-8:
        raise InvalidConfig(f"state has norm {norm!r}")
    return psi


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def _write_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


class Runner:
    def __init__(self, config: ExperimentConfig, output_dir=None):
        self.config = config
        self.out = Path(output_dir or config.output_dir)
        self.hash = config.config_hash()
        self.workers = thread_count()

    def _spec(self, family: ProbeFamily, model: NoiseModel, seed: int):
        s = self.config.search
        dim = family.param_count + 1
        budget = s.budget or s.budget_per_dim * dim
        return optimizer.family_spec(family, model, restarts=s.restarts, budget=budget, seed=seed,
                                     tolerance=s.tolerance, t_max=min(s.t_max, model.max_time()),
                                     t_min=s.t_min, workers=self.workers)

    def run(self) -> list:
        self.out.mkdir(parents=True, exist_ok=True)
        _write_json(self.out / "config.json", self.config.model_dump(mode="json"))
        if self.config.kind == "analyze":
            return self._analyze()
        for sub in ("records", "traces", "states"):
            (self.out / sub).mkdir(exist_ok=True)
        records = []
        for family in sorted(self.config.families):
            for n in self.config.n_qubits:
                records.append(self._cell(family, n))
        _write_csv(self.out / "curve.csv", ["config_hash", "family", "n_qubits", "precision", "t_opt"],
                   [[self.hash, r["family"], r["n_qubits"], repr(r["precision"]), repr(r["gamma_t"])]
                    for r in records])
        _write_csv(self.out / "measures.csv",
                   ["config_hash", "family", "n_qubits", "s_avg", "p_avg", "symmetry_broken"],
                   [[self.hash, r["family"], r["n_qubits"], repr(r["state_report"]["s_avg"]),
                     repr(r["state_report"]["p_avg"]), r["state_report"]["symmetry_broken"]] for r in records])
        return records

    def _cell(self, kind: str, n: int) -> dict:
        cfg = self.config
        started = time.perf_counter()
        family = ProbeFamily(kind, n, AnsatzLayout(tuple(cfg.layout)))
        model = cfg.noise.model()
        domega = cfg.domega * model.rate
        seed = cell_seed(cfg.seed, kind, n)
        noisy = (cfg.noisy_preparation.p1, cfg.noisy_preparation.p2) if cfg.noisy_preparation.enabled else None
        trace_rows = []
        scan_rows = None
        if cfg.kind == "scan_time":
            theta = np.asarray(cfg.theta.get(kind, np.zeros(family.param_count)), dtype=float)
            if theta.shape != (family.param_count,):
                raise InvalidConfig(f"theta for {kind} needs {family.param_count} entries")
            probe = family.noisy_density(theta, *noisy) if noisy else family.state(theta)
            grid = cfg.time_grid.values() / model.rate
            scan = optimizer.scan_time(probe, model, grid, cfg.method, domega)
            scan_rows = [[self.hash, kind, n, repr(t * model.rate), repr(v)] for t, v in zip(scan.times, scan.values)]
            t_opt, value = scan.t_best, scan.value_best
        else:
            spec = self._spec(family, model, seed)
            res = optimizer.optimize_family(family, model, spec, cfg.method, domega, warm=cfg.search.warm_start,
                                            pretrain_starts=cfg.search.pretrain_starts)
            theta, t_opt, value = res.theta, res.t, res.precision
            trace_rows = [[self.hash, i, repr(v)] for i, v in res.trace.rows()]
            if noisy:
                # keep the noiseless parameters, re-optimise only the sensing time under gate noise
                rho = family.noisy_density(theta, *noisy)
                tspec = optimizer.SearchSpec(bounds=(), restarts=1, budget=400, seed=seed, t_max=spec.t_max,
                                             t_min=spec.t_min, tolerance=cfg.search.tolerance)
                tres = optimizer.optimize(
                    lambda _th, t: fisher.dimensionless_precision(rho, model, t, domega, cfg.method),
                    tspec, warm_start=((), t_opt))
                trace_rows = [[self.hash, i, repr(v)] for i, v in tres.trace.rows()]
                t_opt, value = tres.t, tres.value
        psi = family.state(theta)
        report = analysis.state_report(psi)
        record = {
            "config_hash": self.hash,
            "family": kind,
            "n_qubits": n,
            "noise": model.to_dict(),
            "method": cfg.method,
            "noisy_preparation": cfg.noisy_preparation.model_dump() if noisy else None,
            "theta": [float(x) for x in theta],
            "t": float(t_opt),
            "gamma_t": float(t_opt * model.rate),
            "precision": float(value),
            "state_report": report.to_dict(),
            "seed": seed,
            "version": __version__,
            "wall_clock": time.perf_counter() - started,
        }
        stem = f"{kind}_N{n}"
        _write_json(self.out / "records" / f"{stem}.json", record)
        _write_json(self.out / "states" / f"{stem}.json", state_to_json(psi, family=kind, config_hash=self.hash))
        if trace_rows:
            _write_csv(self.out / "traces" / f"{stem}.csv", ["config_hash", "evaluation_index", "best_value"],
                       trace_rows)
        if scan_rows:
            _write_csv(self.out / f"scan_{stem}.csv", ["config_hash", "family", "n_qubits", "gamma_t", "precision"],
                       scan_rows)
        return record

    def _analyze(self) -> list:
        ns = self.config.nonsymmetric
        records = []
        for n in self.config.n_qubits:
            fam = analysis.NonSymmetricFamily(n, *ns.c, b1=complex(*ns.b1), b2=complex(*ns.b2), normalize=True)
            br = analysis.fisher_contributions(fam, ns.omega, ns.t, ns.gamma_t)
            br.write_csv(self.out / f"fisher_breakdown_N{n}.csv")
            top, low = analysis.overlap_brute_force(n, 1)
            records.append({
                "config_hash": self.hash, "n_qubits": n, "f_a": br.f_a, "f_s": br.f_s, "ratio": br.ratio,
                "overlap_top": analysis.overlap_top(n), "overlap_top_brute": float(top.real),
                "overlap_low": analysis.overlap_low(n), "overlap_low_brute": float(low.real),
                "psi_a_report": analysis.state_report(fam.psi_a()).to_dict(),
                "psi_s_report": analysis.state_report(fam.psi_s()).to_dict(),
                "version": __version__,
            })
        _write_csv(self.out / "fisher_ratio.csv", ["config_hash", "n_qubits", "f_a", "f_s", "ratio"],
                   [[self.hash, r["n_qubits"], repr(r["f_a"]), repr(r["f_s"]), repr(r["ratio"])] for r in records])
        _write_json(self.out / "analysis.json", records)
        return records


# --- bundled figure configs ---------------------------------------------

_DESK_SEARCH = {"restarts": 4, "budget_per_dim": 4000}

FIGURES = {
    "fig3-dephasing": {"n_qubits": {"start": 2, "stop": 8}, "noise": {"kind": "dephasing"},
                       "families": ["ghz", "product", "squeezed", "symmetric", "ansatz"], "method": "sld"},
    "fig3-damping": {"n_qubits": {"start": 2, "stop": 8}, "noise": {"kind": "amplitude_damping"},
                     "families": ["ghz", "symmetric", "ansatz"], "method": "sld"},
    "fig3-pauli": {"n_qubits": {"start": 2, "stop": 8}, "noise": {"kind": "inhomogeneous_pauli"},
                   "families": ["ghz", "symmetric", "ansatz"], "method": "fidelity"},
    "fig5-ou": {"n_qubits": {"start": 2, "stop": 8}, "noise": {"kind": "ornstein_uhlenbeck", "ou_regime": "long"},
                "families": ["ghz", "product", "symmetric", "ansatz"], "method": "sld"},
    "fig7-measures": {"n_qubits": {"start": 2, "stop": 8}, "noise": {"kind": "amplitude_damping"},
                      "families": ["ansatz"], "method": "sld"},
    "fig8-nonsymm": {"kind": "analyze", "n_qubits": [4, 6, 8], "families": ["ansatz"],
                     "noise": {"kind": "amplitude_damping"}},
    "appD-noisy-prep": {"n_qubits": [8], "noise": {"kind": "amplitude_damping"},
                        "families": ["ghz", "ansatz"], "method": "sld", "noisy_preparation": {"enabled": True}},
}


def figure_config(fig_id: str, output_dir: str, max_n: int | None = None, overrides: dict | None = None,
                  seed: int = 0) -> ExperimentConfig:
    if fig_id not in FIGURES:
        raise InvalidConfig(f"unknown figure id {fig_id!r}; expected one of {sorted(FIGURES)}")
    raw = json.loads(json.dumps(FIGURES[fig_id]))
    raw.setdefault("search", dict(_DESK_SEARCH))
    raw["search"].update(overrides or {})
    raw["output_dir"] = output_dir
    raw["seed"] = seed
    cfg = parse_config(raw)
    if max_n is not None:
        ns = [n for n in cfg.n_qubits if n <= max_n]
        raw["n_qubits"] = ns
        cfg = parse_config(raw)
    return cfg


def fit_exponent(ns, values) -> float:
    """Least-squares slope of log(value) against log(N)."""
    return float(np.polyfit(np.log(np.asarray(ns, float)), np.log(np.asarray(values, float)), 1)[0])
