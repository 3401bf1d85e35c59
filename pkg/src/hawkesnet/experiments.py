"""Monte-Carlo experiment harness: replicate scheduling, per-edge testing,
and pooled metric aggregation.

Replicate r of an experiment with master seed s simulates with seed
s XOR splitmix64(r), so replicate streams never overlap and do not depend on
how many replicates the run asks for.  Within a replicate, auxiliary draws
(edge subsampling) chain splitmix64 once more so they cannot collide with
the simulation stream.

Every output value is a pure function of (config, seed); wall-clock timing
is the one exception and is therefore collected only when ``timing`` is
switched on (the metrics column stays present but empty otherwise).
"""

from __future__ import annotations

import csv
import io
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .inference import (
    DegenerateDesign,
    SingularUpsilon,
    fit_nuisance,
    one_step_ci,
    oracle_fit_nuisance,
    score_test,
)
from .model import DEFAULT_SIGMA_FLOOR, KernelSpec
from .simulate import SimConfig, StructureSpec, make_structure, simulate
from .solver import SeqCVSpec, cv_fold_bounds

__all__ = [
    "ExperimentConfig",
    "MetricsRow",
    "EdgeRecord",
    "ExperimentResult",
    "derive_seed",
    "run_replicate",
    "run_experiment",
    "metrics_to_csv",
    "metrics_from_csv",
    "config_to_json",
    "config_from_json",
    "METRICS_HEADER",
]

_MASK64 = (1 << 64) - 1


def _splitmix64(v: int) -> int:
    v = (v + 0x9E3779B97F4A7C15) & _MASK64
    v = ((v ^ (v >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    v = ((v ^ (v >> 27)) * 0x94D049BB133111EB) & _MASK64
    return v ^ (v >> 31)


def derive_seed(seed: int, index: int) -> int:
    """Per-replicate seed: seed XOR splitmix64(index).

    splitmix64 bijectively scrambles the replicate index, so distinct
    replicates get distinct, well-separated generator seeds regardless of
    the master seed, and adding replicates never disturbs earlier ones.
    """
    return (int(seed) ^ _splitmix64(int(index))) & _MASK64


@dataclass(frozen=True)
class ExperimentConfig:
    """Declarative description of one Monte-Carlo experiment.

    ``edge_subset`` selects which ordered pairs (i, j) are tested in each
    replicate: ``"all"`` scans every pair, an integer k tests every true
    edge plus k zero entries sampled per replicate (self-pairs included in
    the zero pool).
    """

    structure: StructureSpec
    T_list: tuple[int, ...]
    n_replicates: int
    alpha: float = 0.05
    cv: SeqCVSpec = field(default_factory=SeqCVSpec)
    sigma_floor: float = DEFAULT_SIGMA_FLOOR
    seed: int = 0
    edge_subset: int | str = 50
    oracle: bool = False
    ci: bool = False
    burn_in: int = 500
    clip_bounds: tuple[float, float] = (0.001, 0.999)
    kernel_decay: float = 1.0
    timing: bool = False

    def __post_init__(self):
        t_list = tuple(int(T) for T in self.T_list)
        if not t_list or any(b <= a for a, b in zip(t_list, t_list[1:])):
            raise ValueError(f"T_list must be non-empty and ascending, got {self.T_list!r}")
        if any(T < 1 for T in t_list):
            raise ValueError(f"all T must be >= 1, got {self.T_list!r}")
        object.__setattr__(self, "T_list", t_list)
        if self.n_replicates < 1:
            raise ValueError(f"n_replicates must be >= 1, got {self.n_replicates}")
        if not 0 < self.alpha < 1:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha!r}")
        if not 0 < self.sigma_floor <= 0.25:
            raise ValueError(f"sigma_floor must lie in (0, 0.25], got {self.sigma_floor!r}")
        if isinstance(self.edge_subset, str):
            if self.edge_subset != "all":
                raise ValueError(
                    f'edge_subset must be "all" or a non-negative integer, got {self.edge_subset!r}'
                )
        elif int(self.edge_subset) < 0:
            raise ValueError(f"edge_subset must be >= 0, got {self.edge_subset!r}")
        else:
            object.__setattr__(self, "edge_subset", int(self.edge_subset))
        if not math.isfinite(self.kernel_decay) or self.kernel_decay <= 0:
            raise ValueError(f"kernel_decay must be finite and > 0, got {self.kernel_decay!r}")

    def kernel(self) -> KernelSpec:
        return KernelSpec(decay_rate=self.kernel_decay)

    def model(self):
        return make_structure(self.structure, self.kernel())


@dataclass(frozen=True)
class EdgeRecord:
    """One test outcome: row i tested against column j in replicate ``rep``."""

    T: int
    rep: int
    method: str
    i: int
    j: int
    true_beta: float
    U_hat: float
    p_value: float
    reject: bool
    b_hat: float = float("nan")
    ci_lo: float = float("nan")
    ci_hi: float = float("nan")


@dataclass(frozen=True)
class MetricsRow:
    """Pooled per-(T, method) summary over all replicates."""

    structure: str
    T: int
    method: str
    type1_rate: float
    power: float
    ci0_coverage: float
    cia_coverage: float
    n_tests_zero: int
    n_tests_nonzero: int
    mean_runtime_ms: float | None
    seed: int
    n_failed: int


@dataclass(frozen=True)
class ExperimentResult:
    rows: list[MetricsRow]
    records: list[EdgeRecord]
    failures: list[tuple[int, int, str]]  # (T, replicate, message)


def _select_edges(theta: np.ndarray, edge_subset, rng: np.random.Generator):
    """Ordered pairs to test: all true edges, plus either every zero entry
    ("all") or a per-replicate sample of k zero entries (self-pairs count as
    zero entries)."""
    p = theta.shape[0]
    pairs = [(i, j) for i in range(p) for j in range(p)]
    true_edges = [(i, j) for (i, j) in pairs if theta[i, j] != 0.0]
    zeros = [(i, j) for (i, j) in pairs if theta[i, j] == 0.0]
    if edge_subset == "all":
        chosen_zeros = zeros
    else:
        k = min(int(edge_subset), len(zeros))
        idx = np.sort(rng.choice(len(zeros), size=k, replace=False)) if k else []
        chosen_zeros = [zeros[int(m)] for m in idx]
    return sorted(true_edges + chosen_zeros)


def run_replicate(
    config: ExperimentConfig, T: int, rep: int
) -> tuple[list[EdgeRecord], dict[str, float]]:
    """Simulate one replicate and run every selected edge test on it.

    Stage-1 nuisance fits are shared across all target columns of the same
    row (they are identical by construction); every stage-2 projection still
    gets its own cross-validation.  Returns the per-edge records plus, when
    timing is enabled, per-method wall milliseconds spent testing.
    """
    model = config.model()
    kernel = config.kernel()
    rep_seed = derive_seed(config.seed, rep)
    spikes, _ = simulate(
        model,
        SimConfig(T=T, burn_in=config.burn_in, seed=rep_seed, clip_bounds=config.clip_bounds),
    )
    edge_rng = np.random.default_rng(_splitmix64(rep_seed))
    edges = _select_edges(model.theta, config.edge_subset, edge_rng)
    by_row: dict[int, list[int]] = {}
    for i, j in edges:
        by_row.setdefault(i, []).append(j)

    methods = ["ds"] + (["oracle"] if config.oracle else [])
    records: list[EdgeRecord] = []
    timings: dict[str, float] = {}
    for method in methods:
        start = time.perf_counter() if config.timing else 0.0
        for i in sorted(by_row):
            cols = by_row[i]
            if method == "ds":
                fit = fit_nuisance(
                    spikes,
                    kernel,
                    i,
                    cols,
                    cv=config.cv,
                    sigma_floor=config.sigma_floor,
                )
            else:
                support = np.flatnonzero(model.theta[i]).tolist()
                fit = oracle_fit_nuisance(
                    spikes, kernel, i, cols, support, sigma_floor=config.sigma_floor
                )
            for j in cols:
                sub = fit.restrict(j) if len(cols) > 1 else fit
                res = score_test(spikes, kernel, sub, config.alpha)
                b_hat = ci_lo = ci_hi = float("nan")
                if config.ci:
                    region = one_step_ci(spikes, kernel, sub, config.alpha)
                    b_hat = float(region.b_hat[0])
                    ci_lo, ci_hi = region.interval
                records.append(
                    EdgeRecord(
                        T=T,
                        rep=rep,
                        method=method,
                        i=i,
                        j=j,
                        true_beta=float(model.theta[i, j]),
                        U_hat=res.U_hat,
                        p_value=res.p_value,
                        reject=res.reject,
                        b_hat=b_hat,
                        ci_lo=ci_lo,
                        ci_hi=ci_hi,
                    )
                )
        if config.timing:
            timings[method] = (time.perf_counter() - start) * 1000.0
    return records, timings


def _replicate_task(config: ExperimentConfig, T: int, rep: int):
    try:
        records, timings = run_replicate(config, T, rep)
        return T, rep, records, timings, None
    except (SingularUpsilon, DegenerateDesign, np.linalg.LinAlgError) as exc:
        return T, rep, None, None, f"{type(exc).__name__}: {exc}"


def _rate(values: list[bool]) -> float:
    return float(np.mean(values)) if values else float("nan")


def run_experiment(config: ExperimentConfig, threads: int = 1) -> ExperimentResult:
    """Run the full replicate grid and pool per-edge outcomes.

    Type-I error pools every test of a zero entry; power pools every test of
    a true edge; coverage splits the same way against the one-step
    intervals.  Replicates that fail numerically are dropped from every
    pool and surface in ``failures`` and the ``n_failed`` column.
    Parallelism (``threads`` > 1) farms replicates out to worker processes;
    results are reassembled in deterministic order regardless.
    """
    if threads < 1:
        raise ValueError(f"threads must be >= 1, got {threads}")
    # Surface infeasible CV layouts before burning replicate time.
    for T in config.T_list:
        cv_fold_bounds(T, config.cv)

    tasks = [(T, rep) for T in config.T_list for rep in range(config.n_replicates)]
    outcomes = {}
    if threads == 1:
        for T, rep in tasks:
            outcomes[(T, rep)] = _replicate_task(config, T, rep)
    else:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            futures = {(T, rep): pool.submit(_replicate_task, config, T, rep) for T, rep in tasks}
            for key, fut in futures.items():
                outcomes[key] = fut.result()

    methods = ["ds"] + (["oracle"] if config.oracle else [])
    all_records: list[EdgeRecord] = []
    failures: list[tuple[int, int, str]] = []
    rows: list[MetricsRow] = []
    for T in config.T_list:
        rep_records: list[EdgeRecord] = []
        timings: dict[str, list[float]] = {m: [] for m in methods}
        n_failed = 0
        for rep in range(config.n_replicates):
            _, _, records, rep_timings, error = outcomes[(T, rep)]
            if error is not None:
                n_failed += 1
                failures.append((T, rep, error))
                continue
            rep_records.extend(records)
            for m, ms in (rep_timings or {}).items():
                timings[m].append(ms)
        all_records.extend(rep_records)
        for method in methods:
            recs = [r for r in rep_records if r.method == method]
            zero = [r for r in recs if r.true_beta == 0.0]
            nonzero = [r for r in recs if r.true_beta != 0.0]
            covers = lambda r: bool(r.ci_lo <= r.true_beta <= r.ci_hi)  # noqa: E731
            rows.append(
                MetricsRow(
                    structure=config.structure.kind,
                    T=T,
                    method=method,
                    type1_rate=_rate([r.reject for r in zero]),
                    power=_rate([r.reject for r in nonzero]),
                    ci0_coverage=_rate([covers(r) for r in zero]) if config.ci else float("nan"),
                    cia_coverage=_rate([covers(r) for r in nonzero]) if config.ci else float("nan"),
                    n_tests_zero=len(zero),
                    n_tests_nonzero=len(nonzero),
                    mean_runtime_ms=(
                        float(np.mean(timings[method])) if timings[method] else None
                    ),
                    seed=config.seed,
                    n_failed=n_failed,
                )
            )
    return ExperimentResult(rows=rows, records=all_records, failures=failures)


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

METRICS_HEADER = [
    "structure",
    "T",
    "method",
    "type1_rate",
    "power",
    "ci0_coverage",
    "cia_coverage",
    "n_tests_zero",
    "n_tests_nonzero",
    "mean_runtime_ms",
    "seed",
    "n_failed",
]


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def metrics_to_csv(rows: list[MetricsRow]) -> str:
    """Render metric rows to CSV text (header + one line per row)."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(METRICS_HEADER)
    for r in rows:
        writer.writerow(
            [
                r.structure,
                r.T,
                r.method,
                _fmt(r.type1_rate),
                _fmt(r.power),
                _fmt(r.ci0_coverage),
                _fmt(r.cia_coverage),
                r.n_tests_zero,
                r.n_tests_nonzero,
                _fmt(r.mean_runtime_ms),
                r.seed,
                r.n_failed,
            ]
        )
    return buf.getvalue()


def metrics_from_csv(text: str) -> list[MetricsRow]:
    """Inverse of :func:`metrics_to_csv`."""
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header != METRICS_HEADER:
        raise ValueError(f"unexpected metrics header: {header!r}")
    rows = []
    for rec in reader:
        if len(rec) != len(METRICS_HEADER):
            raise ValueError(f"malformed metrics row: {rec!r}")
        rows.append(
            MetricsRow(
                structure=rec[0],
                T=int(rec[1]),
                method=rec[2],
                type1_rate=float(rec[3]),
                power=float(rec[4]),
                ci0_coverage=float(rec[5]),
                cia_coverage=float(rec[6]),
                n_tests_zero=int(rec[7]),
                n_tests_nonzero=int(rec[8]),
                mean_runtime_ms=float(rec[9]) if rec[9] else None,
                seed=int(rec[10]),
                n_failed=int(rec[11]),
            )
        )
    return rows


_CONFIG_KEYS = {
    "structure",
    "T_list",
    "n_replicates",
    "alpha",
    "cv",
    "sigma_floor",
    "seed",
    "edge_subset",
    "oracle",
    "ci",
    "burn_in",
    "clip_bounds",
    "kernel_decay",
    "timing",
}
_STRUCTURE_KEYS = {
    "kind",
    "p",
    "block_size",
    "density",
    "beta_scale",
    "mu_scale",
    "seed",
    "allow_self_edges",
}
_CV_KEYS = {"n_folds", "lambda_grid", "min_train_frac"}


def config_to_json(config: ExperimentConfig) -> str:
    """Serialize a config to JSON (field names match the dataclasses)."""
    doc = {
        "structure": {
            "kind": config.structure.kind,
            "p": config.structure.p,
            "block_size": config.structure.block_size,
            "density": config.structure.density,
            "beta_scale": config.structure.beta_scale,
            "mu_scale": config.structure.mu_scale,
            "seed": config.structure.seed,
            "allow_self_edges": config.structure.allow_self_edges,
        },
        "T_list": list(config.T_list),
        "n_replicates": config.n_replicates,
        "alpha": config.alpha,
        "cv": {
            "n_folds": config.cv.n_folds,
            "lambda_grid": list(config.cv.lambda_grid) if config.cv.lambda_grid else None,
            "min_train_frac": config.cv.min_train_frac,
        },
        "sigma_floor": config.sigma_floor,
        "seed": config.seed,
        "edge_subset": config.edge_subset,
        "oracle": config.oracle,
        "ci": config.ci,
        "burn_in": config.burn_in,
        "clip_bounds": list(config.clip_bounds),
        "kernel_decay": config.kernel_decay,
        "timing": config.timing,
    }
    return json.dumps(doc, indent=2) + "\n"


def _check_keys(doc: dict, allowed: set, what: str):
    unknown = set(doc) - allowed
    if unknown:
        raise ValueError(f"unknown {what} keys: {sorted(unknown)}")


def config_from_json(source) -> ExperimentConfig:
    """Parse an :class:`ExperimentConfig` from JSON text or a parsed dict.

    Unknown keys are rejected so config typos fail loudly instead of being
    silently ignored.
    """
    doc = json.loads(source) if isinstance(source, str) else dict(source)
    if not isinstance(doc, dict):
        raise ValueError(f"experiment config must be a JSON object, got {type(doc).__name__}")
    _check_keys(doc, _CONFIG_KEYS, "config")
    if "structure" not in doc or "T_list" not in doc or "n_replicates" not in doc:
        raise ValueError("config requires at least: structure, T_list, n_replicates")
    sdoc = doc["structure"]
    if not isinstance(sdoc, dict):
        raise ValueError("config key 'structure' must be an object")
    _check_keys(sdoc, _STRUCTURE_KEYS, "structure")
    structure = StructureSpec(**sdoc)
    cvdoc = doc.get("cv", {})
    if not isinstance(cvdoc, dict):
        raise ValueError("config key 'cv' must be an object")
    _check_keys(cvdoc, _CV_KEYS, "cv")
    if cvdoc.get("lambda_grid") is not None:
        cvdoc = dict(cvdoc, lambda_grid=tuple(cvdoc["lambda_grid"]))
    cv = SeqCVSpec(**cvdoc)
    kwargs = {k: doc[k] for k in doc if k not in {"structure", "cv"}}
    kwargs["T_list"] = tuple(kwargs["T_list"])
    if "clip_bounds" in kwargs:
        kwargs["clip_bounds"] = tuple(kwargs["clip_bounds"])
    return ExperimentConfig(structure=structure, cv=cv, **kwargs)


def apply_overrides(config: ExperimentConfig, **overrides) -> ExperimentConfig:
    """Non-None overrides replace the corresponding config fields."""
    changes = {k: v for k, v in overrides.items() if v is not None}
    return replace(config, **changes) if changes else config
