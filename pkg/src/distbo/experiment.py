"""Experiment harness: trials with common random numbers, regret curves, CSV/SVG.

A comparison derives each trial's randomness from (master seed, trial)
only, never from the method, so every method sees the same initial design
and network randomness within a trial (common random numbers). Traces
carry per-evaluation best-so-far values and immediate regret when the
objective's minimum is known, falling back to best-value curves otherwise.
"""

from __future__ import annotations

import csv
import json
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .acquisition import AcquisitionKind, AcquisitionSpec
from .errors import ConfigurationError
from .kernels import KernelFamily, KernelSpec
from .netsim import NetMode, NetworkConfig, RunTrace
from .netsim import run as net_run
from .node import Node, NodeConfig
from .objectives import Objective, get_objective
from .policy import (
    GreedyPolicy,
    MHConfig,
    StochasticPolicy,
    TemperatureSchedule,
    ThompsonPolicy,
)
from .space import make_ld_table
from .surrogate import FitConfig

__all__ = [
    "METHODS",
    "ExperimentConfig",
    "ExperimentResult",
    "TracePoint",
    "RegretTrace",
    "Summary",
    "SummaryRow",
    "run_experiment",
    "aggregate",
    "emit_csv",
    "emit_plot",
    "read_traces_csv",
    "read_summary_csv",
    "PRESETS",
    "preset_config",
]

METHODS = ("SP-EI", "SP-PI", "SP-UCB", "PDTS", "SequentialEI")

_SP_KINDS = {"SP-EI": AcquisitionKind.EI, "SP-PI": AcquisitionKind.PI, "SP-UCB": AcquisitionKind.UCB}

_CONFIG_KEYS = {
    "objective",
    "objective_params",
    "method",
    "fleet",
    "n_nodes",
    "mode",
    "trials",
    "budget",
    "p",
    "seed",
    "kernel",
    "acquisition",
    "schedule",
    "mh",
    "network",
    "output_dir",
}

# Seed streams per trial, spawned from (master seed, trial, stream).
_S_LDTABLE = 0
_S_NODES = 1
_S_NETWORK = 2
_S_OBJECTIVE = 3


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment: objective x method x trials under a network mode."""

    objective: str
    method: str | None = "SP-EI"
    fleet: tuple[dict, ...] | None = None
    objective_params: dict = field(default_factory=dict)
    n_nodes: int = 10
    mode: str = "sync"
    trials: int = 10
    budget: int = 100
    p: int = 2
    seed: int = 0
    kernel: dict = field(default_factory=dict)
    acquisition: dict = field(default_factory=dict)
    schedule: dict = field(default_factory=dict)
    mh: dict = field(default_factory=dict)
    network: dict = field(default_factory=dict)
    output_dir: str = "results"

    def __post_init__(self):
        if self.trials < 1:
            raise ConfigurationError(f"trials must be >= 1, got {self.trials}")
        if self.budget < 0:
            raise ConfigurationError(f"budget must be >= 0, got {self.budget}")
        if self.n_nodes < 1:
            raise ConfigurationError(f"n_nodes must be >= 1, got {self.n_nodes}")
        if self.p < 1:
            raise ConfigurationError(f"p must be >= 1, got {self.p}")
        if (self.method is None) == (self.fleet is None):
            raise ConfigurationError("exactly one of method / fleet must be set")
        if self.method is not None and self.method not in METHODS:
            raise ConfigurationError(f"unknown method {self.method!r}; choose from {METHODS}")
        if self.fleet is not None:
            object.__setattr__(self, "fleet", tuple(dict(e) for e in self.fleet))
        NetMode(self.mode)

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        unknown = set(raw) - _CONFIG_KEYS
        if unknown:
            raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
        raw = dict(raw)
        if "fleet" in raw and raw["fleet"] is not None:
            raw.setdefault("method", None)
        return cls(**raw)

    @classmethod
    def from_json_file(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    @property
    def label(self) -> str:
        return self.method if self.method is not None else "fleet"


@dataclass(frozen=True)
class TracePoint:
    eval_index: int
    node_id: int
    tick: int
    x: tuple[float, ...]
    y: float
    best_so_far: float
    regret: float | None


@dataclass(frozen=True)
class RegretTrace:
    """Per-evaluation progress of one (method, trial) run."""

    method: str
    trial: int
    points: tuple[TracePoint, ...]
    metric: str  # "immediate_regret" or "best_value"


@dataclass(frozen=True)
class ExperimentResult:
    traces: tuple[RegretTrace, ...]
    failures: tuple[tuple[int, str], ...] = ()


@dataclass(frozen=True)
class SummaryRow:
    method: str
    eval_index: int
    mean: float
    median: float
    ci_lo: float
    ci_hi: float


@dataclass(frozen=True)
class Summary:
    rows: tuple[SummaryRow, ...]
    methods: tuple[str, ...]
    notes: tuple[str, ...] = ()


# -- fleet construction -----------------------------------------------------


def _fit_config(config: ExperimentConfig) -> tuple[KernelFamily, FitConfig]:
    kern = dict(config.kernel)
    family = KernelFamily(kern.pop("family", "matern52"))
    isotropic = bool(kern.pop("isotropic", False))
    fixed = bool(kern.pop("fixed", False))
    fixed_spec = None
    fixed_noise = float(kern.pop("noise_variance", 0.0))
    if fixed:
        ls = kern.pop("lengthscales")
        sv = float(kern.pop("signal_variance", 1.0))
        rq = float(kern.pop("rq_shape", 1.0))
        fixed_spec = KernelSpec(family, tuple(ls), sv, rq)
    else:
        kern.pop("lengthscales", None)
        kern.pop("signal_variance", None)
        kern.pop("rq_shape", None)
    standardize = bool(kern.pop("standardize", True))
    if kern:
        raise ConfigurationError(f"unknown kernel config keys: {sorted(kern)}")
    fit = FitConfig(
        fixed=fixed,
        fixed_spec=fixed_spec,
        fixed_noise=fixed_noise,
        standardize=standardize,
        isotropic=isotropic,
    )
    return family, fit


def _acq_spec(config: ExperimentConfig, kind: AcquisitionKind) -> AcquisitionSpec:
    acq = dict(config.acquisition)
    acq.pop("thompson_grid", None)
    acq.pop("kind", None)
    return AcquisitionSpec(kind=kind, **acq)


def _thompson_grid(config: ExperimentConfig) -> int:
    return int(config.acquisition.get("thompson_grid", 512))


def build_fleet(config: ExperimentConfig, domain, base_seed: int, ld_table) -> list[Node]:
    """Instantiate the nodes a method (or custom fleet spec) calls for."""
    family, fit = _fit_config(config)
    schedule = TemperatureSchedule(**config.schedule) if config.schedule else TemperatureSchedule()
    mh = MHConfig(**config.mh) if config.mh else MHConfig()
    common = dict(kernel_family=family, fit=fit)

    def make(node_id, policy, p):
        cfg = NodeConfig(policy=policy, p=p, **common)
        return Node(node_id, domain, cfg, base_seed=base_seed, ld_table=ld_table)

    if config.fleet is not None:
        nodes = []
        for entry in config.fleet:
            entry = dict(entry)
            count = int(entry.pop("count", 1))
            policy = _fleet_policy(config, entry, schedule, mh)
            for _ in range(count):
                nodes.append(make(len(nodes), policy, config.p))
        return nodes

    method = config.method
    if method == "SequentialEI":
        policy = GreedyPolicy(acquisition=_acq_spec(config, AcquisitionKind.EI))
        return [make(0, policy, config.p * config.n_nodes)]
    if method == "PDTS":
        policy = ThompsonPolicy(grid_size=_thompson_grid(config))
        return [make(i, policy, config.p) for i in range(config.n_nodes)]
    kind = _SP_KINDS[method]
    policy = StochasticPolicy(acquisition=_acq_spec(config, kind), schedule=schedule, mh=mh)
    return [make(i, policy, config.p) for i in range(config.n_nodes)]


def _fleet_policy(config, entry: dict, default_schedule, default_mh):
    name = entry.pop("policy", "stochastic")
    kind = AcquisitionKind(entry.pop("kind", "ei"))
    schedule = (
        TemperatureSchedule(**entry.pop("schedule")) if "schedule" in entry else default_schedule
    )
    mh = MHConfig(**entry.pop("mh")) if "mh" in entry else default_mh
    restarts = int(entry.pop("restarts", 8))
    grid_size = int(entry.pop("grid_size", _thompson_grid(config)))
    if entry:
        raise ConfigurationError(f"unknown fleet entry keys: {sorted(entry)}")
    if name == "stochastic":
        return StochasticPolicy(acquisition=_acq_spec(config, kind), schedule=schedule, mh=mh)
    if name == "greedy":
        return GreedyPolicy(acquisition=_acq_spec(config, kind), restarts=restarts)
    if name == "thompson":
        return ThompsonPolicy(grid_size=grid_size)
    raise ConfigurationError(f"unknown fleet policy {name!r}")


# -- trial orchestration ----------------------------------------------------


def _trial_seed(config: ExperimentConfig, trial: int, stream: int) -> np.random.SeedSequence:
    return np.random.SeedSequence((config.seed, trial, stream))


def _objective_for_trial(config: ExperimentConfig, trial: int) -> Objective:
    params = dict(config.objective_params)
    if config.objective.startswith("gp-") and params.get("seed") is None:
        params["seed"] = _trial_seed(config, trial, _S_OBJECTIVE)
    return get_objective(config.objective, params)


def run_trial(config: ExperimentConfig, trial: int) -> tuple[RunTrace, Objective]:
    """One seeded run of config's method; shared streams across methods."""
    objective = _objective_for_trial(config, trial)
    domain = objective.bounds
    p_total = config.p * config.n_nodes
    ld_table = make_ld_table(
        domain.dim, p_total, seed=np.random.default_rng(_trial_seed(config, trial, _S_LDTABLE))
    )
    base_seed = int(_trial_seed(config, trial, _S_NODES).generate_state(1)[0])
    net_seed = int(_trial_seed(config, trial, _S_NETWORK).generate_state(1)[0])
    net_kw = dict(config.network)
    bad = set(net_kw) & {"mode", "seed"}
    if bad:
        raise ConfigurationError(
            f"network config keys {sorted(bad)} are set from the top-level mode/seed"
        )
    network = NetworkConfig(mode=config.mode, seed=net_seed, **net_kw)
    nodes = build_fleet(config, domain, base_seed, ld_table)
    trace = net_run(nodes, objective, network, budget=p_total + config.budget)
    return trace, objective


def to_regret_trace(
    run_trace: RunTrace, objective: Objective, method: str, trial: int
) -> RegretTrace:
    """Convert a network trace into a best-so-far / regret series."""
    points = []
    best = np.inf
    known_min = objective.f_min is not None
    for ev in run_trace.evals:
        best = min(best, ev.y)
        regret = max(0.0, best - objective.f_min) if known_min else None
        points.append(
            TracePoint(ev.global_index, ev.node_id, ev.tick, ev.x, ev.y, best, regret)
        )
    metric = "immediate_regret" if known_min else "best_value"
    return RegretTrace(method=method, trial=trial, points=tuple(points), metric=metric)


def run_experiment(config: ExperimentConfig) -> ExperimentResult:
    """All trials of one method; failed trials are recorded and skipped."""
    traces = []
    failures = []
    for trial in range(config.trials):
        try:
            run_trace, objective = run_trial(config, trial)
        except Exception as exc:  # noqa: BLE001 - a bad trial must not kill the sweep
            warnings.warn(f"trial {trial} failed: {exc!r}")
            failures.append((trial, repr(exc)))
            continue
        traces.append(to_regret_trace(run_trace, objective, config.label, trial))
    return ExperimentResult(traces=tuple(traces), failures=tuple(failures))


# -- aggregation ------------------------------------------------------------


def _trace_values(trace: RegretTrace) -> np.ndarray:
    if trace.metric == "immediate_regret":
        return np.array([p.regret for p in trace.points])
    return np.array([p.best_so_far for p in trace.points])


def aggregate(traces, t_interval: bool = False) -> Summary:
    """Per-eval-index mean, median and 95% CI of regret for each method.

    The default CI is the normal approximation mean +/- 1.96 sd/sqrt(n);
    ``t_interval=True`` swaps in the Student multiplier. Methods with a
    single trial report the mean alone (zero-width CI) and are noted.
    """
    traces = list(traces)
    if not traces:
        raise ValueError("no traces to aggregate")
    by_method: dict[str, list[RegretTrace]] = {}
    for tr in traces:
        by_method.setdefault(tr.method, []).append(tr)
    rows = []
    notes = []
    for method, group in by_method.items():
        lengths = {len(tr.points) for tr in group}
        n_evals = min(lengths)
        if len(lengths) > 1:
            notes.append(f"{method}: unequal trace lengths, truncated to {n_evals}")
        values = np.stack([_trace_values(tr)[:n_evals] for tr in group])
        n = values.shape[0]
        mean = values.mean(axis=0)
        median = np.median(values, axis=0)
        if n == 1:
            notes.append(f"{method}: single trial, CI undefined (reported as mean)")
            half = np.zeros(n_evals)
        else:
            sd = values.std(axis=0, ddof=1)
            if t_interval:
                from scipy.stats import t as student_t

                mult = float(student_t.ppf(0.975, n - 1))
            else:
                mult = 1.96
            half = mult * sd / np.sqrt(n)
        for i in range(n_evals):
            rows.append(
                SummaryRow(method, i, float(mean[i]), float(median[i]),
                           float(mean[i] - half[i]), float(mean[i] + half[i]))
            )
    return Summary(rows=tuple(rows), methods=tuple(by_method), notes=tuple(notes))


# -- serialization ----------------------------------------------------------


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def emit_csv(data, path) -> None:
    """Write traces or a summary as CSV (17 significant digits, lossless)."""
    if isinstance(data, Summary):
        rows = data.rows
        if not rows:
            raise ValueError("empty summary; nothing to write")
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["method", "eval_index", "mean", "median", "ci_lo", "ci_hi"])
            for r in rows:
                writer.writerow(
                    [r.method, r.eval_index, _fmt(r.mean), _fmt(r.median), _fmt(r.ci_lo), _fmt(r.ci_hi)]
                )
        return
    traces = list(data)
    if not traces or all(not tr.points for tr in traces):
        raise ValueError("empty trace list; nothing to write")
    dim = len(traces[0].points[0].x)
    header = (
        ["method", "trial", "eval_index", "node_id", "tick"]
        + [f"x_{j}" for j in range(dim)]
        + ["y", "best_so_far", "immediate_regret"]
    )
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for tr in traces:
            for p in tr.points:
                regret = "" if p.regret is None else _fmt(p.regret)
                writer.writerow(
                    [tr.method, tr.trial, p.eval_index, p.node_id, p.tick]
                    + [_fmt(v) for v in p.x]
                    + [_fmt(p.y), _fmt(p.best_so_far), regret]
                )


def read_traces_csv(path) -> list[RegretTrace]:
    """Parse a traces CSV back into RegretTrace objects (full precision)."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        dim = sum(1 for h in header if h.startswith("x_"))
        grouped: dict[tuple[str, int], list[TracePoint]] = {}
        for row in reader:
            method, trial = row[0], int(row[1])
            x = tuple(float(v) for v in row[5 : 5 + dim])
            regret = None if row[7 + dim] == "" else float(row[7 + dim])
            point = TracePoint(
                int(row[2]), int(row[3]), int(row[4]), x,
                float(row[5 + dim]), float(row[6 + dim]), regret,
            )
            grouped.setdefault((method, trial), []).append(point)
    out = []
    for (method, trial), points in grouped.items():
        metric = "best_value" if points[0].regret is None else "immediate_regret"
        out.append(RegretTrace(method, trial, tuple(points), metric))
    return out


def read_summary_csv(path) -> Summary:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        next(reader)
        rows = [
            SummaryRow(r[0], int(r[1]), float(r[2]), float(r[3]), float(r[4]), float(r[5]))
            for r in reader
        ]
    methods = tuple(dict.fromkeys(r.method for r in rows))
    return Summary(rows=tuple(rows), methods=methods)


def emit_plot(summary: Summary, path) -> None:
    """Regret curves with CI bands as a deterministic standalone SVG."""
    if not summary.rows:
        raise ValueError("empty summary; nothing to plot")
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "distbo"
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for method in summary.methods:
        rows = sorted(
            (r for r in summary.rows if r.method == method), key=lambda r: r.eval_index
        )
        idx = np.array([r.eval_index for r in rows])
        mean = np.array([r.mean for r in rows])
        lo = np.array([r.ci_lo for r in rows])
        hi = np.array([r.ci_hi for r in rows])
        (line,) = ax.plot(idx, mean, label=method)
        ax.fill_between(idx, lo, hi, alpha=0.2, color=line.get_color())
    ax.set_yscale("log")
    ax.set_xlabel("function evaluations")
    ax.set_ylabel("immediate regret")
    ax.legend(loc="best")
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


# -- named presets ----------------------------------------------------------


PRESETS: dict[str, dict] = {
    "branin": {
        "objective": "branin",
        "n_nodes": 10,
        "p": 2,
        "budget": 100,
        "trials": 10,
        "mode": "sync",
    },
    "bohachevsky": {
        "objective": "bohachevsky",
        "n_nodes": 10,
        "p": 2,
        "budget": 100,
        "trials": 10,
        "mode": "sync",
    },
    "schubert": {
        "objective": "schubert",
        "n_nodes": 10,
        "p": 2,
        "budget": 100,
        "trials": 10,
        "mode": "sync",
    },
    "within-model": {
        "objective": "gp-matern52",
        "objective_params": {"dim": 2, "anchors": 1000, "lengthscale": 0.25},
        "n_nodes": 10,
        "p": 2,
        "budget": 60,
        "trials": 10,
        "mode": "sync",
    },
    "out-of-model": {
        "objective": "gp-rational_quadratic",
        "objective_params": {"dim": 2, "anchors": 1000, "lengthscale": 0.25},
        "n_nodes": 10,
        "p": 2,
        "budget": 60,
        "trials": 10,
        "mode": "sync",
    },
    "smoke": {
        "objective": "branin",
        "n_nodes": 4,
        "p": 2,
        "budget": 8,
        "trials": 2,
        "mode": "sync",
    },
}


def preset_config(name: str, method: str, seed: int = 0, **overrides) -> ExperimentConfig:
    if name not in PRESETS:
        raise ConfigurationError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    raw = dict(PRESETS[name])
    raw.update(overrides)
    raw["method"] = method
    raw["seed"] = seed
    return ExperimentConfig.from_dict(raw)
