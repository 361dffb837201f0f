"""Communication rounds: local training, graph-filtered aggregation, broadcast,
cost accounting and evaluation."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import seeding
from .config import ExperimentConfig
from .datagen import DeviceData, LabeledPool, PartitionSpec, load_mnist_idx, partition, synth_gaussian_pool
from .filtering import AggregationError, FilterCache, aggregate, aggregation_weights
from .graph import (
    Graph,
    GraphError,
    Spectrum,
    build_adjacency_from_positions,
    connected_components,
    eigendecompose,
    laplacian,
    load_adjacency_file,
    load_positions_file,
    sample_room_layout,
)
from .learner import ModelConfig, client_update, flops_per_sample, init_weights, num_params, predict
from .optimizer import RoundPlan, ScheduleBounds, densify, fixed_plan, solve_round_plan, sparsify
from .sysmodel import DeviceSpec, SpecRanges, heterogeneity_indicator, sample_device_specs

log = logging.getLogger(__name__)

__all__ = [
    "ClassificationMetrics",
    "RoundRecord",
    "MetricsLog",
    "Federation",
    "confusion_matrix",
    "classification_metrics",
    "evaluate",
    "build_graph",
    "load_device_specs",
    "build_federation",
    "round_plan",
    "run_round",
    "run_experiment",
    "simulate_costs",
]


@dataclass(frozen=True)
class ClassificationMetrics:
    accuracy: float   # I1
    precision: float  # I2, macro
    recall: float     # I3, macro
    f1: float         # I4
    total: int


@dataclass(frozen=True)
class RoundRecord:
    round: int
    acc_local: np.ndarray
    acc_global: np.ndarray
    local: ClassificationMetrics
    global_: ClassificationMetrics
    flops: float      # this round
    T: float
    desync: float
    alphas: tuple
    qs: tuple
    zs: tuple

    @property
    def acc_local_mean(self):
        return float(self.acc_local.mean())

    @property
    def acc_global_mean(self):
        return float(self.acc_global.mean())


@dataclass
class MetricsLog:
    H: float
    baseline: RoundRecord | None = None
    rounds: list[RoundRecord] = field(default_factory=list)

    def cumulative(self, name: str) -> np.ndarray:
        return np.cumsum([getattr(r, name) for r in self.rounds])

    @property
    def I5(self) -> float:
        return float(sum(r.flops for r in self.rounds))

    @property
    def I6(self) -> float:
        return float(sum(r.T for r in self.rounds))

    @property
    def I7(self) -> float:
        return float(sum(r.desync for r in self.rounds))

    @property
    def final(self) -> RoundRecord:
        return self.rounds[-1]


def confusion_matrix(true, pred, num_classes: int) -> np.ndarray:
    cm = np.zeros((num_classes, num_classes), dtype=np.int64)
    np.add.at(cm, (np.asarray(true, dtype=int), np.asarray(pred, dtype=int)), 1)
    return cm


def classification_metrics(cm) -> ClassificationMetrics:
    """Accuracy and macro precision/recall/F1 of a (pooled) confusion matrix.

    Rows are true classes, columns predictions.  A class with no predicted
    (or no true) samples contributes 0 to the macro precision (recall).
    """
    cm = np.asarray(cm, dtype=float)
    total = cm.sum()
    if total == 0:
        raise ValueError("empty confusion matrix")
    tp = np.diag(cm)
    pred_pos = cm.sum(axis=0)
    true_pos = cm.sum(axis=1)
    prec = np.divide(tp, pred_pos, out=np.zeros_like(tp), where=pred_pos > 0)
    rec = np.divide(tp, true_pos, out=np.zeros_like(tp), where=true_pos > 0)
    i2, i3 = prec.mean(), rec.mean()
    i4 = 2 * i2 * i3 / (i2 + i3) if i2 + i3 > 0 else 0.0
    return ClassificationMetrics(float(tp.sum() / total), float(i2), float(i3), float(i4), int(total))


def evaluate(model: ModelConfig, weights, local_tests, global_test: LabeledPool):
    """Per-device accuracies and pooled metrics on local and global tests.

    Returns ``(acc_local, acc_global, local_metrics, global_metrics)``.
    """
    n_c = model.num_classes
    cm_local = np.zeros((n_c, n_c), dtype=np.int64)
    cm_global = np.zeros((n_c, n_c), dtype=np.int64)
    acc_local, acc_global = [], []
    for w, test in zip(weights, local_tests):
        if len(test) == 0 or len(global_test) == 0:
            raise ValueError("empty test set")
        cm = confusion_matrix(test.labels, predict(model, w, test.inputs), n_c)
        cm_local += cm
        acc_local.append(np.trace(cm) / cm.sum())
        cm = confusion_matrix(global_test.labels, predict(model, w, global_test.inputs), n_c)
        cm_global += cm
        acc_global.append(np.trace(cm) / cm.sum())
    return (np.array(acc_local), np.array(acc_global),
            classification_metrics(cm_local), classification_metrics(cm_global))


def build_graph(cfg: ExperimentConfig, max_tries: int = 1000) -> Graph:
    g = cfg.graph
    if g.source == "adjacency":
        graph = load_adjacency_file(g.path)
    elif g.source == "positions":
        graph = load_positions_file(g.path, g.d_max)
    else:
        rng = seeding.stream(cfg.run.seed, seeding.GRAPH)
        for _ in range(max_tries):
            pos, ids = sample_room_layout(rng, g.num_devices, g.num_rooms, g.room_size,
                                          tuple(g.devices_per_room))
            graph = build_adjacency_from_positions(pos, g.d_max, ids)
            if not g.require_connected or len(connected_components(graph)) == 1:
                break
        else:
            raise GraphError(f"no connected layout in {max_tries} draws; raise graph.d_max")
    if g.require_connected and len(connected_components(graph)) != 1:
        raise GraphError("graph is not connected")
    return graph


def load_device_specs(path) -> list[DeviceSpec]:
    """CSV with header ``rho,f,p_tran,xi_db,b[,varsigma,E_max]``."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return [DeviceSpec(**{k: float(v) for k, v in row.items()}) for row in rows]


@dataclass
class Federation:
    """Everything a run needs, built once from the config."""

    cfg: ExperimentConfig
    graph: Graph
    spectrum: Spectrum
    filters: FilterCache
    model: ModelConfig
    devices: list[DeviceData]
    global_test: LabeledPool
    specs: list[DeviceSpec]
    kappa: np.ndarray
    weights: np.ndarray                      # K x B, one row per device
    rngs: list[np.random.Generator]
    plan: RoundPlan | None = None

    @property
    def num_devices(self) -> int:
        return self.weights.shape[0]

    @property
    def data_sizes(self) -> list[int]:
        return [len(d.train) for d in self.devices]


def _pool(cfg: ExperimentConfig) -> LabeledPool:
    d = cfg.data
    if d.source == "mnist":
        return load_mnist_idx(d.mnist_images, d.mnist_labels)
    rng = seeding.stream(cfg.run.seed, seeding.POOL)
    return synth_gaussian_pool(rng, d.num_classes, d.dim, d.per_class, d.separation)


def _specs(cfg: ExperimentConfig, k: int) -> list[DeviceSpec]:
    s = cfg.system
    if s.specs_path:
        specs = load_device_specs(s.specs_path)
        if len(specs) != k:
            raise ValueError(f"{s.specs_path}: {len(specs)} device specs for {k} devices")
        return specs
    ranges = SpecRanges(tuple(s.rho), tuple(s.f), tuple(s.p_tran), tuple(s.xi_db),
                        s.bandwidth, s.varsigma, s.e_max)
    return sample_device_specs(seeding.stream(cfg.run.seed, seeding.SPECS), k, ranges)


def build_federation(cfg: ExperimentConfig) -> Federation:
    seed = cfg.run.seed
    graph = build_graph(cfg)
    spectrum = eigendecompose(laplacian(graph))
    pool = _pool(cfg)
    d = cfg.data
    pspec = PartitionSpec(d.labels_per_device, d.train_per_device, d.local_test_per_device,
                          d.global_test_size, d.setup)
    devices, global_test = partition(pool, pspec, graph.clusters,
                                     seeding.stream(seed, seeding.PARTITION))
    model = ModelConfig((pool.inputs.shape[1], *cfg.model.hidden, pool.num_classes), seed=seed)
    w0 = init_weights(model, seeding.stream(seed, seeding.INIT))
    k = graph.num_nodes
    fed = Federation(
        cfg=cfg,
        graph=graph,
        spectrum=spectrum,
        filters=FilterCache(spectrum),
        model=model,
        devices=devices,
        global_test=global_test,
        specs=_specs(cfg, k),
        kappa=aggregation_weights([len(dd.train) for dd in devices]),
        weights=np.tile(w0, (k, 1)),
        rngs=[seeding.stream(seed, seeding.CLIENT, i) for i in range(k)],
    )
    fed.plan = round_plan(fed)
    return fed


def round_plan(fed: Federation) -> RoundPlan:
    cfg = fed.cfg
    b = num_params(fed.model)
    n0 = cfg.system.n0_dbm_hz
    if cfg.run.optimize:
        return solve_round_plan(fed.specs, fed.data_sizes, b, cfg.schedule, n0)
    return fixed_plan(fed.specs, fed.data_sizes, b, cfg.run.alpha, 1.0, 1.0, n0)


def _aggregate(fed: Federation, grads: np.ndarray) -> np.ndarray:
    run = fed.cfg.run
    if run.aggregator == "fedavg":
        mean = (fed.kappa / fed.kappa.sum()) @ grads
        return np.broadcast_to(mean, grads.shape)
    return aggregate(fed.filters(run.mu_s), fed.kappa, grads)


def _record(fed: Federation, round_index: int, plan: RoundPlan, flops: float) -> RoundRecord:
    acc_l, acc_g, m_l, m_g = evaluate(fed.model, fed.weights,
                                      [d.local_test for d in fed.devices], fed.global_test)
    taus = plan.taus
    T = float(taus.max())
    return RoundRecord(
        round=round_index,
        acc_local=acc_l,
        acc_global=acc_g,
        local=m_l,
        global_=m_g,
        flops=flops,
        T=T,
        desync=float(T - taus.min()),
        alphas=tuple(p.alpha for p in plan.devices),
        qs=tuple(p.q for p in plan.devices),
        zs=tuple(p.z for p in plan.devices),
    )


def run_round(fed: Federation, round_index: int) -> RoundRecord:
    """One synchronous round; updates ``fed.weights`` in place."""
    run = fed.cfg.run
    plan = fed.plan
    b = fed.weights.shape[1]
    grads = np.empty_like(fed.weights)
    phi = flops_per_sample(fed.model)
    flops = 0.0
    for i, (dev, p) in enumerate(zip(fed.devices, plan.devices)):
        new = client_update(fed.model, fed.weights[i], dev.train.inputs, dev.train.labels,
                            p.alpha, p.q, run.batch_size, run.eta, fed.rngs[i])
        g = new - fed.weights[i]
        if not np.all(np.isfinite(g)):
            raise AggregationError(f"non-finite gradient from device {i}")
        if p.z < 1:
            g = densify(*sparsify(g, p.z), b)
        grads[i] = g
        flops += p.alpha * phi * p.n_samples
    fed.weights += _aggregate(fed, grads)
    return _record(fed, round_index, plan, flops)


def run_experiment(cfg: ExperimentConfig, fed: Federation | None = None, progress=None) -> MetricsLog:
    """Run ``cfg.run.rounds`` rounds and return the per-round metrics."""
    fed = fed or build_federation(cfg)
    h = heterogeneity_indicator(fed.specs, n0_dbm_per_hz=cfg.system.n0_dbm_hz)
    metrics = MetricsLog(H=h, baseline=_record(fed, 0, fed.plan, 0.0))
    for t in range(1, cfg.run.rounds + 1):
        metrics.rounds.append(run_round(fed, t))
        if progress:
            progress(metrics.rounds[-1])
        log.debug("round %d acc_local=%.4f", t, metrics.rounds[-1].acc_local_mean)
    return metrics


def simulate_costs(specs, data_sizes, num_params_: int, rounds: int, *,
                   optimize: bool, alpha: int = 3, bounds: ScheduleBounds | None = None,
                   n0: float = -174.0, phi: float = 0.0) -> dict:
    """Cost indices I5-I7 over ``rounds`` rounds without training.

    Returns cumulative FLOPs, latency and desynchronization plus the plan.
    """
    if optimize:
        plan = solve_round_plan(specs, data_sizes, num_params_, bounds or ScheduleBounds(), n0)
    else:
        plan = fixed_plan(specs, data_sizes, num_params_, alpha, 1.0, 1.0, n0)
    taus = plan.taus
    per_round_flops = sum(p.alpha * phi * p.n_samples for p in plan.devices)
    T = float(taus.max())
    return {
        "plan": plan,
        "I5": rounds * per_round_flops,
        "I6": rounds * T,
        "I7": rounds * float(T - taus.min()),
    }
