"""The distributed optimization agent: init, collect, update, select, broadcast.

Each node owns a dataset fed by its own evaluations and by broadcast
records from peers, keeps a GP surrogate fitted to that dataset, and picks
its next query with its configured policy. Nodes never share state except
through broadcast messages, so any delivery order (or loss) leaves them
internally consistent.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .acquisition import acquisition_range, incumbent_of
from .errors import ConfigurationError
from .kernels import KernelFamily, KernelSpec
from .policy import (
    GreedyPolicy,
    MHConfig,
    ScheduleMode,
    StochasticPolicy,
    TemperatureSchedule,
    ThompsonPolicy,
    boltzmann_sample_with_stats,
    glie_beta,
    greedy_argmax,
    thompson_select,
)
from .space import Box
from .surrogate import (
    Dataset,
    FitConfig,
    GPModel,
    ObservationRecord,
    build_model,
    default_kernel_spec,
    fit_hyperparameters,
)

__all__ = ["BroadcastMessage", "NodeConfig", "Node", "init_design", "join"]

# Seed-stream ids so the per-step selection and the hyperparameter fit
# draw from disjoint deterministic streams.
_STREAM_SELECT = 0
_STREAM_FIT = 1


@dataclass(frozen=True)
class BroadcastMessage:
    """One observation record in flight; delivery is idempotent."""

    record: ObservationRecord


@dataclass(frozen=True)
class NodeConfig:
    """Per-node behavior: policy, init size, budget, surrogate settings."""

    policy: StochasticPolicy | GreedyPolicy | ThompsonPolicy
    p: int = 4
    budget: int | None = None
    kernel_family: KernelFamily = KernelFamily.MATERN52
    fit: FitConfig = field(default_factory=FitConfig)
    refit_dense_factor: int = 20  # refit every update while n <= factor * d
    refit_every: int = 5
    glie_local_t: bool = False

    def __post_init__(self):
        object.__setattr__(self, "kernel_family", KernelFamily(self.kernel_family))
        if self.p < 1:
            raise ConfigurationError(f"p must be >= 1, got {self.p}")
        if self.budget is not None and self.budget < 0:
            raise ConfigurationError(f"budget must be >= 0, got {self.budget}")
        if self.fit.fixed and self.fit.fixed_spec is None:
            raise ConfigurationError("fixed-hyperparameter mode requires fit.fixed_spec")


def default_init_count(dim: int) -> int:
    """Default init points per node: 2 d + 2."""
    return 2 * dim + 2


def init_design(node_id: int, p: int, dim: int, domain: Box, ld_table: np.ndarray) -> np.ndarray:
    """Node k's slice of the shared low-discrepancy table, scaled to the box.

    Node k takes rows [k p, (k+1) p), so designs are disjoint across nodes
    and deterministic given the table.
    """
    ld_table = np.asarray(ld_table, dtype=float)
    if ld_table.ndim != 2 or ld_table.shape[1] != dim:
        raise ConfigurationError(
            f"ld_table must have shape (n, {dim}), got {ld_table.shape}"
        )
    lo = node_id * p
    hi = (node_id + 1) * p
    if hi > ld_table.shape[0]:
        raise ConfigurationError(
            f"ld_table too short: node {node_id} needs rows [{lo}, {hi}) "
            f"but table has {ld_table.shape[0]}"
        )
    return domain.from_unit(ld_table[lo:hi])


class Node:
    """One optimization agent; owned by a single execution context."""

    def __init__(
        self,
        node_id: int,
        domain: Box,
        config: NodeConfig,
        base_seed: int = 0,
        ld_table: np.ndarray | None = None,
    ):
        self.node_id = int(node_id)
        self.domain = domain
        self.config = config
        self.base_seed = int(base_seed)
        self.ld_table = ld_table
        self.dataset = Dataset(domain)
        self.model: GPModel | None = None
        self.seq = 0  # records this node has produced
        self.steps_taken = 0  # post-init evaluations
        self.flags: list[str] = []
        self._init_done = False
        self._stale = True
        self._hypers: tuple[KernelSpec, float] | None = None
        self._update_count = 0
        self._last_fit_update = 0

    # -- lifecycle -------------------------------------------------------

    @property
    def initialized(self) -> bool:
        return self._init_done

    @property
    def done(self) -> bool:
        return self.config.budget is not None and self.steps_taken >= self.config.budget

    @property
    def t_known(self) -> int:
        """Total observations this node knows about."""
        return len(self.dataset)

    def initial_design(self) -> np.ndarray:
        if self.ld_table is None:
            raise ConfigurationError(f"node {self.node_id} has no LD table for init")
        return init_design(self.node_id, self.config.p, self.domain.dim, self.domain, self.ld_table)

    def run_init(self, objective) -> list[BroadcastMessage]:
        """Evaluate this node's init slice; returns the records to broadcast."""
        if self._init_done:
            raise RuntimeError(f"node {self.node_id} already initialized")
        msgs = []
        for x in self.initial_design():
            msgs.append(self._record_evaluation(x, objective))
        self._init_done = True
        return msgs

    def ingest(self, msgs) -> int:
        """Insert broadcast records (set semantics); returns how many were new."""
        fresh = 0
        for msg in msgs:
            if self.dataset.insert(msg.record):
                fresh += 1
        if fresh:
            self._stale = True
        return fresh

    def join_from(self, history) -> None:
        """Adopt the broadcast history instead of LD initialization.

        With a non-empty history the node skips its init slice entirely;
        an empty history leaves it to initialize like a fresh node.
        """
        history = list(history)
        if history:
            self.ingest(history)
            self._init_done = True

    def step(self, objective) -> BroadcastMessage | None:
        """One collect-update-select-evaluate-broadcast iteration.

        Returns None (terminal) once the local budget is exhausted.
        """
        if not self._init_done:
            raise RuntimeError(f"node {self.node_id}: init phase not complete")
        if self.done:
            return None
        self._update_model()
        x = self._select()
        msg = self._record_evaluation(x, objective)
        self.steps_taken += 1
        return msg

    # -- internals -------------------------------------------------------

    def _record_evaluation(self, x, objective) -> BroadcastMessage:
        y = float(objective(np.asarray(x, dtype=float)))
        rec = ObservationRecord(self.node_id, self.seq, tuple(float(v) for v in x), y)
        self.seq += 1
        self.dataset.insert(rec)
        self._stale = True
        return BroadcastMessage(rec)

    def _seed_for(self, stream: int, k: int) -> np.random.SeedSequence:
        return np.random.SeedSequence((self.base_seed, self.node_id, stream, k))

    def _update_model(self) -> None:
        if self.model is not None and not self._stale:
            return
        n = len(self.dataset)
        self._update_count += 1
        fit_cfg = self.config.fit
        dense_phase = n <= self.config.refit_dense_factor * self.domain.dim
        due = dense_phase or (self._update_count - self._last_fit_update) >= self.config.refit_every
        if fit_cfg.fixed:
            self._hypers = (fit_cfg.fixed_spec, fit_cfg.fixed_noise)
        elif n >= 2 and (due or self._hypers is None):
            seed = int(self._seed_for(_STREAM_FIT, self._update_count).generate_state(1)[0])
            prev_spec = self._hypers[0] if self._hypers else None
            prev_noise = self._hypers[1] if self._hypers else None
            result = fit_hyperparameters(
                self.dataset,
                self.config.kernel_family,
                replace(fit_cfg, seed=seed, init_spec=prev_spec, init_noise=prev_noise),
            )
            if result.used_fallback:
                self.flags.append(f"fit_fallback node={self.node_id} n={n}")
            self._hypers = (result.spec, result.noise_variance)
            self._last_fit_update = self._update_count
        elif self._hypers is None:
            _, y = self.dataset.arrays()
            y_var = float(np.var(y)) if len(y) > 1 else 1.0
            spec = default_kernel_spec(self.config.kernel_family, self.domain, max(y_var, 1e-12))
            self._hypers = (spec, 1e-2 * max(y_var, 1e-12))
        spec, noise = self._hypers
        self.model = build_model(spec, noise, self.dataset, standardize=fit_cfg.standardize)
        self._stale = False

    def _select(self) -> np.ndarray:
        policy = self.config.policy
        seed = self._seed_for(_STREAM_SELECT, self.seq)
        if isinstance(policy, ThompsonPolicy):
            return thompson_select(self.model, self.domain, policy.grid_size, seed)
        inc = incumbent_of(self.dataset)
        if isinstance(policy, GreedyPolicy):
            return greedy_argmax(
                self.model, policy.acquisition, inc, self.domain, policy.restarts, seed
            )
        s_range, s_draw = seed.spawn(2)
        beta = self._beta(policy, s_range, inc)
        x, stats = boltzmann_sample_with_stats(
            self.model, policy.acquisition, inc, beta, self.domain, policy.mh, s_draw
        )
        if stats.low_acceptance:
            self.flags.append(
                f"low_acceptance node={self.node_id} seq={self.seq} "
                f"rate={stats.acceptance_rate:.4f}"
            )
        return x

    def _beta(self, policy: StochasticPolicy, seed, inc) -> float:
        sched = policy.schedule
        if sched.mode is ScheduleMode.FIXED:
            return sched.beta
        t = self.seq if self.config.glie_local_t else self.t_known
        C = acquisition_range(
            self.model, policy.acquisition, inc, self.domain, sched.glie_grid_size, seed
        )
        return glie_beta(max(t, 1), C)


def join(
    node_id: int,
    domain: Box,
    config: NodeConfig,
    base_seed: int,
    history,
    ld_table: np.ndarray | None = None,
) -> Node:
    """Spin up a node mid-run from the broadcast history.

    The joiner ingests every record (duplicates collapse, conflicts raise)
    and skips the LD init phase; its posterior is then identical to any
    incumbent node holding the same record set. An empty history falls
    back to a fresh init node.
    """
    node = Node(node_id, domain, config, base_seed, ld_table)
    node.join_from(history)
    return node
