"""Refinement campaigns: pruning-guided AMR, interpolation-error AMR and uniform refinement."""

from __future__ import annotations

import dataclasses
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .lowrank import DegenerateMatrixError, InterpDecomp, interp_decomp
from .mesh import Element, MeshTree, VertexValues, multilinear, sample_uniform
from .metrics import IterationRecord, default_total_samples, global_sample, rmse
from .network import Mlp, rebuild_pruned, restrict

log = logging.getLogger(__name__)

MODES = ("pruning", "basic", "uniform")


@dataclass(frozen=True)
class RunConfig:
    """Campaign settings. ``None`` fields are resolved against the network by :meth:`resolve`."""

    mode: str = "pruning"
    T: float = 1e-3
    P: float = 0.1
    tau: float = 1e-3
    eps: float = 1e-3
    K_max: int = 5
    n_err: int = 256
    n_ID: int | None = None
    n_total_err: int | None = None
    seed: int = 0
    initial_uniform_levels: int | None = None
    time_slices: tuple[float, ...] | None = None
    dof_budget: int | None = None
    threads: int = 1

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        for name in ("T", "tau"):
            if not getattr(self, name) >= 0:
                raise ValueError(f"{name} must be non-negative")
        for name in ("P", "eps"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        for name in ("K_max", "n_err", "threads"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be at least 1")
        if self.n_ID is not None and self.n_ID < 1:
            raise ValueError("n_ID must be at least 1")
        if self.n_total_err is not None and self.n_total_err < 1:
            raise ValueError("n_total_err must be at least 1")
        if self.initial_uniform_levels is not None and self.initial_uniform_levels < 0:
            raise ValueError("initial_uniform_levels must be non-negative")
        if self.dof_budget is not None and self.dof_budget < 1:
            raise ValueError("dof_budget must be positive")
        if self.time_slices is not None:
            object.__setattr__(self, "time_slices", tuple(float(t) for t in self.time_slices))

    def resolve(self, net: Mlp) -> "RunConfig":
        d = net.input_dim
        return dataclasses.replace(
            self,
            n_ID=self.n_ID or max(net.hidden_widths, default=1),
            n_total_err=self.n_total_err or default_total_samples(d),
            initial_uniform_levels=(
                self.initial_uniform_levels
                if self.initial_uniform_levels is not None
                else (0 if d == 2 else 2)
            ),
        )


@dataclass(frozen=True)
class PruneOutcome:
    p: float
    error: float
    pruned_sizes: tuple[int, ...]


@dataclass
class Campaign:
    mesh: MeshTree
    vertex_values: VertexValues
    report: list[IterationRecord]
    config: RunConfig
    # paths of the elements whose refinement decision was evaluated, per iteration
    evaluated: list[list[tuple]] = field(default_factory=list)

    def __iter__(self):
        return iter((self.mesh, self.vertex_values, self.report))


def relative_floor(values: np.ndarray) -> float:
    """Smallest denominator allowed in relative errors, scaled to the field's range."""
    span = float(np.ptp(values)) if values.size else 0.0
    if span > 0:
        return 1e-8 * span
    peak = float(np.max(np.abs(values))) if values.size else 0.0
    return 1e-8 * peak if peak > 0 else 1.0


def mean_relative_error(reference: np.ndarray, approx: np.ndarray, floor: float) -> float:
    denom = np.maximum(np.abs(reference), max(floor, np.finfo(np.float64).tiny))
    return float(np.mean(np.abs(reference - approx) / denom))


def _decompose(Z: np.ndarray, eps: float) -> InterpDecomp:
    try:
        return interp_decomp(Z, eps)
    except DegenerateMatrixError:
        # dead layer on this element: one neuron carrying zero weight is exact
        return InterpDecomp(np.array([0]), np.zeros((1, Z.shape[1])), 0.0)


def prune_on_element(net: Mlp, element: Element, eps: float, n_ID: int, seed: int):
    """Prune `net` using activations sampled inside `element`.

    Returns the pruned network and the number of neurons kept in each hidden
    layer. The per-layer decompositions are independent; the network rewrite
    runs first layer to last.
    """
    X = sample_uniform(element, n_ID, seed, "id")
    decomps = [_decompose(Z, eps) for Z in net.hidden_activations(X)]
    return rebuild_pruned(net, decomps), tuple(d.k for d in decomps)


def pruning_outcome(net: Mlp, element: Element, cfg: RunConfig, floor: float = 0.0) -> PruneOutcome:
    if net.num_neurons == 0:
        raise ValueError("pruning needs a network with at least one hidden layer")
    n_ID = cfg.n_ID or max(net.hidden_widths)
    pruned, sizes = prune_on_element(net, element, cfg.eps, n_ID, cfg.seed)
    X = sample_uniform(element, cfg.n_err, cfg.seed, "err")
    error = mean_relative_error(net(X), pruned(X), floor)
    return PruneOutcome(sum(sizes) / net.num_neurons, error, sizes)


def _pruning_refines(outcome: PruneOutcome, cfg: RunConfig) -> bool:
    return outcome.error > cfg.T or outcome.p > cfg.P


def element_decision_pruning(net: Mlp, element: Element, cfg: RunConfig, floor: float = 0.0):
    """Refine if the pruned network is too inaccurate or keeps too many neurons.

    Marks the element done when it passes both thresholds.
    """
    outcome = pruning_outcome(net, element, cfg, floor)
    refine = _pruning_refines(outcome, cfg)
    if not refine:
        element.done_refining = True
    return refine, outcome


def basic_error(net: Mlp, element: Element, cfg: RunConfig, vertex_values: VertexValues, floor: float = 0.0) -> float:
    X = sample_uniform(element, cfg.n_err, cfg.seed, "basic")
    lo, hi = element.lo, element.hi
    corner = vertex_values.lookup(element.corner_keys())
    approx = multilinear((X - lo) / (hi - lo), np.broadcast_to(corner, (len(X), corner.size)))
    return mean_relative_error(net(X), approx, floor)


def element_decision_basic(net: Mlp, element: Element, cfg: RunConfig, vertex_values: VertexValues, floor: float = 0.0) -> bool:
    return basic_error(net, element, cfg, vertex_values, floor) > cfg.tau


def run_campaign(net: Mlp, cfg: RunConfig) -> Campaign:
    """Refine a mesh over ``net.domain`` according to ``cfg.mode``.

    Each iteration evaluates every leaf not yet marked done, refines the marked
    ones in tree order, samples the INR at the new vertices and records DOFs and
    the global RMSE. Stops after ``K_max`` iterations, when nothing is marked,
    or when the DOF budget was already exceeded before an iteration starts.
    """
    cfg = cfg.resolve(net)
    mesh = MeshTree(net.domain)
    mesh.refine_uniform(cfg.initial_uniform_levels)
    Xg = global_sample(net.domain, cfg.n_total_err, cfg.seed)
    fg = net(Xg)
    floor = relative_floor(fg)
    vertex_values = VertexValues.from_function(mesh, net)

    if cfg.mode == "pruning":
        decide = lambda e: _pruning_refines(pruning_outcome(net, e, cfg, floor), cfg)
    elif cfg.mode == "basic":
        decide = lambda e: basic_error(net, e, cfg, vertex_values, floor) > cfg.tau
    else:
        decide = None

    campaign = Campaign(mesh, vertex_values, [], cfg)
    start = time.perf_counter()
    pool = ThreadPoolExecutor(cfg.threads) if cfg.threads > 1 and decide is not None else None
    try:
        for it in range(1, cfg.K_max + 1):
            if cfg.dof_budget is not None and mesh.dofs > cfg.dof_budget:
                log.info("DOF budget %d exceeded (%d), stopping", cfg.dof_budget, mesh.dofs)
                break
            if decide is None:
                marked = list(mesh.leaves)
            else:
                active = [e for e in mesh.leaves if not e.done_refining]
                campaign.evaluated.append([e.path for e in active])
                flags = list(pool.map(decide, active)) if pool else [decide(e) for e in active]
                marked = []
                for e, flag in zip(active, flags):
                    if flag:
                        marked.append(e)
                    else:
                        e.done_refining = True
            if marked:
                mesh.refine_many(marked)
                vertex_values.update(mesh, net)
            err = rmse(fg, mesh.interpolate(vertex_values, Xg))
            rec = IterationRecord(it, mesh.dofs, err, mesh.leaf_count, time.perf_counter() - start)
            campaign.report.append(rec)
            log.info("iteration %d: %d marked, %d dofs, rmse %.4g", it, len(marked), rec.dofs, rec.rmse)
            if not marked:
                break
    finally:
        if pool is not None:
            pool.shutdown()
    return campaign


def neuron_count_map(net: Mlp, mesh: MeshTree, eps: float, n_ID: int | None = None, seed: int = 0) -> np.ndarray:
    """Total hidden neurons kept after pruning on each leaf, in leaf order."""
    n_ID = n_ID or max(net.hidden_widths)
    return np.array([sum(prune_on_element(net, e, eps, n_ID, seed)[1]) for e in mesh.leaves], dtype=np.int64)


@dataclass
class SliceCampaign:
    t: float
    campaign: Campaign

    @property
    def mesh(self) -> MeshTree:
        return self.campaign.mesh


def run_time_slices(net: Mlp, cfg: RunConfig) -> list[SliceCampaign]:
    """Independent campaigns on ``f(., t)`` for each ``t`` in ``cfg.time_slices``.

    The last input axis is time.
    """
    if not cfg.time_slices:
        raise ValueError("time_slices must list at least one time value")
    axis = net.input_dim - 1
    lo, hi = net.domain.lo[axis], net.domain.hi[axis]
    bad = [t for t in cfg.time_slices if not lo <= t <= hi]
    if bad:
        raise ValueError(f"time slices {bad} outside the time extent [{lo}, {hi}]")
    return [SliceCampaign(t, run_campaign(restrict(net, axis, t), cfg)) for t in cfg.time_slices]


def uniform_dofs(levels: int, dim: int) -> int:
    return (2**levels + 1) ** dim
