"""Experiment runner: dataset generation, solver selection, metric emission.

Reports are written as comma-separated per-instance rows plus a JSON summary,
with fixed float formatting so identical configurations produce byte-identical
output. Train and test splits use disjoint seed ranges, so regenerating a
dataset can never leak test instances into training.
"""

from __future__ import annotations

import csv
import io
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import __version__
from .affinity import AffinityConfig, assemble_affinity, objective
from .graphs import build_aa_graph, synthesize_pair
from .linalg import binary_score, perm_matrix
from .predictor import (
    LossConfig,
    PredictorConfig,
    evaluate,
    init_params,
    learned_affinity,
    train,
)
from .solvers import (
    SolverConfig,
    accuracy,
    discretize,
    ipfp,
    probabilistic_solve,
    rrwm,
    spectral_match,
)

SOLVERS = ("dpgm", "spectral", "ipfp", "rrwm")
AFFINITY_SOURCES = ("handcrafted", "learned")
ABLATIONS = ("full", "tia", "wps")

_TRAIN_SEED_BASE = 10_000
_TEST_SEED_BASE = 20_000


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    # dataset
    n: int = 8
    noise_levels: tuple = (0.03,)
    instances: int = 50
    seed: int = 0
    rotation_max: float = 0.0
    translation_max: float = 0.05
    # pipeline
    solver: str = "dpgm"
    affinity_source: str = "handcrafted"
    ablation: str = "full"
    checkpoint: str | None = None
    # training
    train_instances: int = 500
    test_instances: int = 100
    epochs: int = 50
    lr: float = 1e-3
    batch_size: int = 8
    target_accuracy: float | None = None
    # sub-configs
    solver_cfg: SolverConfig = field(default_factory=SolverConfig)
    affinity_cfg: AffinityConfig = field(default_factory=AffinityConfig)
    predictor_cfg: PredictorConfig = field(default_factory=PredictorConfig)
    loss_cfg: LossConfig = field(default_factory=LossConfig)
    # execution
    out_dir: str = "runs"
    workers: int = 1

    def validate(self, need_checkpoint: bool = True):
        if self.solver not in SOLVERS:
            raise ConfigError(f"unknown solver {self.solver!r}")
        if self.affinity_source not in AFFINITY_SOURCES:
            raise ConfigError(f"unknown affinity source {self.affinity_source!r}")
        if self.ablation not in ABLATIONS:
            raise ConfigError(f"unknown ablation {self.ablation!r}")
        if self.ablation != "full" and self.affinity_source != "learned":
            raise ConfigError("ablations require the learned affinity source")
        if (need_checkpoint and self.affinity_source == "learned"
                and not self.checkpoint):
            raise ConfigError("learned affinity source requires a checkpoint path")

    def echo(self) -> dict:
        return asdict(self)


@dataclass
class RunReport:
    rows: list
    aggregates: dict
    config: dict
    version: str = __version__

    def rows_csv(self) -> str:
        buf = io.StringIO()
        # wall_ms is kept in the row dicts and aggregates but left out of the
        # emitted rows, which are contractually byte-identical across reruns
        fields = ["index", "noise", "accuracy", "objective", "binary_score",
                  "iterations"]
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(fields)
        for row in self.rows:
            writer.writerow([_fmt(row[f]) for f in fields])
        return buf.getvalue()

    def summary_json(self) -> str:
        return json.dumps({"aggregates": self.aggregates, "config": self.config,
                           "version": self.version},
                          indent=1, sort_keys=True, default=_jsonable)

    def write(self, out_dir, stem: str = "report"):
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / f"{stem}_rows.csv").write_text(self.rows_csv())
        (out / f"{stem}_summary.json").write_text(self.summary_json() + "\n")


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.12g}"
    return v


def _jsonable(v):
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating,)):
        return float(v)
    if isinstance(v, np.ndarray):
        return v.tolist()
    raise TypeError(f"not JSON serializable: {type(v)}")


def dataset_seeds(cfg: ExperimentConfig, split: str = "test") -> list:
    base = {"test": _TEST_SEED_BASE, "train": _TRAIN_SEED_BASE}[split]
    count = cfg.instances if split == "test" else cfg.train_instances
    return [cfg.seed + base + k for k in range(count)]


def _load_store(cfg: ExperimentConfig):
    store = init_params(cfg.predictor_cfg, seed=cfg.seed)
    store.load(cfg.checkpoint)
    return store


def _run_instance(cfg: ExperimentConfig, noise: float, index: int, inst_seed: int,
                  store=None) -> dict:
    pair = synthesize_pair(cfg.n, noise, rotation_max=cfg.rotation_max,
                           seed=inst_seed, translation_max=cfg.translation_max)
    n = cfg.n
    uniform = np.full((n, n), 1.0 / n)

    t0 = time.perf_counter()
    if cfg.affinity_source == "handcrafted":
        K = assemble_affinity(pair.g1, pair.g2, cfg.affinity_cfg)
        X_init = uniform
    else:
        aa = build_aa_graph(pair.g1, pair.g2)
        K, X_init = learned_affinity(aa, store, cfg.predictor_cfg)

    iterations = 0
    if cfg.ablation == "wps":
        X = X_init
    elif cfg.solver == "dpgm":
        start = uniform if cfg.ablation == "tia" else X_init
        X, trace = probabilistic_solve(K, start, cfg.solver_cfg)
        iterations = len(trace.assignments) - 1
    elif cfg.solver == "spectral":
        X = spectral_match(K).reshape(n, n)
        iterations = 100
    elif cfg.solver == "ipfp":
        X = ipfp(K, uniform.ravel()).reshape(n, n)
    else:
        X = rrwm(K).reshape(n, n)
    pred = discretize(X)
    wall_ms = (time.perf_counter() - t0) * 1e3

    return {
        "index": index,
        "noise": noise,
        "accuracy": accuracy(pred, pair.ground_truth),
        "objective": objective(K, perm_matrix(pred).ravel()),
        "binary_score": binary_score(np.asarray(X, dtype=np.float64)),
        "iterations": iterations,
        "wall_ms": wall_ms,
    }


def _run_instance_args(args):
    return _run_instance(*args)


def _aggregate(rows: list, noise_levels) -> dict:
    agg = {"overall": _stats(rows)}
    for noise in noise_levels:
        agg[f"noise={noise:g}"] = _stats([r for r in rows if r["noise"] == noise])
    return agg


def _stats(rows: list) -> dict:
    accs = np.array([r["accuracy"] for r in rows])
    return {
        "count": len(rows),
        "accuracy_mean": float(accs.mean()),
        "accuracy_std": float(accs.std()),
        "objective_mean": float(np.mean([r["objective"] for r in rows])),
        "binary_score_mean": float(np.mean([r["binary_score"] for r in rows])),
        "wall_ms_mean": float(np.mean([r["wall_ms"] for r in rows])),
    }


def run_experiment(cfg: ExperimentConfig) -> RunReport:
    """Evaluate the configured pipeline over the generated test split.

    Identical configuration and seed produce identical per-instance rows.
    Rows are ordered by instance index regardless of worker completion order.
    """
    cfg.validate()
    store = _load_store(cfg) if cfg.affinity_source == "learned" else None
    seeds = dataset_seeds(cfg, "test")
    tasks = []
    index = 0
    for noise in cfg.noise_levels:
        for k in range(cfg.instances):
            tasks.append((cfg, noise, index, seeds[k % len(seeds)] + 1_000_000 * list(cfg.noise_levels).index(noise), store))
            index += 1
    if cfg.workers > 1 and store is None:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            rows = list(pool.map(_run_instance_args, tasks))
    else:
        rows = [_run_instance(*t) for t in tasks]
    rows.sort(key=lambda r: r["index"])
    return RunReport(rows, _aggregate(rows, cfg.noise_levels), cfg.echo())


def compare_solvers(cfg: ExperimentConfig, solvers=SOLVERS,
                    sources=("learned",)) -> str:
    """Accuracy table over (solver, affinity source) combinations.

    Returns delimited text: one row per combination, one accuracy column per
    noise level plus the overall mean.
    """
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    header = ["solver", "source"] + [f"acc@noise={x:g}" for x in cfg.noise_levels] + ["acc_mean"]
    writer.writerow(header)
    for source in sources:
        for solver in solvers:
            sub = replace(cfg, solver=solver, affinity_source=source, ablation="full")
            report = run_experiment(sub)
            row = [solver, source]
            for noise in cfg.noise_levels:
                row.append(_fmt(report.aggregates[f"noise={noise:g}"]["accuracy_mean"]))
            row.append(_fmt(report.aggregates["overall"]["accuracy_mean"]))
            writer.writerow(row)
    return buf.getvalue()


def train_and_eval(cfg: ExperimentConfig):
    """Train on the train-seed split, evaluate on the disjoint test split.

    Returns (report, checkpoint_path, metrics). The checkpoint and learning
    curve are written under ``cfg.out_dir``.
    """
    cfg.validate(need_checkpoint=False)
    noise = cfg.noise_levels[0]
    train_pairs = [synthesize_pair(cfg.n, noise, rotation_max=cfg.rotation_max,
                                   seed=s, translation_max=cfg.translation_max)
                   for s in dataset_seeds(cfg, "train")]
    store, metrics = train(train_pairs, cfg.predictor_cfg, cfg.solver_cfg,
                           cfg.loss_cfg, epochs=cfg.epochs, lr=cfg.lr,
                           batch_size=cfg.batch_size, seed=cfg.seed,
                           target_accuracy=cfg.target_accuracy)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    ckpt = out / "predictor.ckpt"
    store.save(ckpt)
    with open(out / "learning_curve.csv", "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=sorted({k for m in metrics for k in m}))
        writer.writeheader()
        writer.writerows(metrics)
    eval_cfg = replace(cfg, affinity_source="learned", solver="dpgm",
                       checkpoint=str(ckpt), instances=cfg.test_instances)
    report = run_experiment(eval_cfg)
    return report, str(ckpt), metrics
