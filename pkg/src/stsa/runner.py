"""End-to-end experiment orchestration and verification oracles.

One run walks the incremental stages: partition the stage's data across
clients, extract payloads, aggregate spatially and temporally, update the
classifier in closed form, then evaluate on every task seen so far. With
``oracle_check`` enabled each stage is also compared against the pooled
centralized solution, which the aggregation is exactly equivalent to.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .client import ClientShard, add_noise, extract_payload
from .config import ExperimentConfig
from .core import (
    ClassifierWeights,
    RandomMap,
    SpatialStatistics,
    apply_map,
    local_statistics,
    make_random_map,
    predict,
)
from .data import (
    FeatureDataset,
    SynthSpec,
    TaskSchedule,
    dirichlet_partition,
    generate_synthetic,
    load_features,
    random_synth_spec,
    split_tasks,
)
from .errors import ConfigurationError, StsaError
from .metrics import (
    AccuracyMatrix,
    CommLedger,
    avg_incremental_accuracy,
    average_forgetting,
    final_average_accuracy,
)
from .prng import ChaChaStream, derive_seed
from .server import (
    TemporalState,
    estimate_gram,
    spatial_aggregate,
    temporal_aggregate,
    update_classifier,
)

REPORT_SCHEMA = "stsa-report/1"


@dataclass(frozen=True)
class StageOracleDelta:
    """Relative Frobenius gaps between the federated and pooled paths."""

    stage: int
    w_delta: float
    gram_delta: float
    corr_delta: float


@dataclass(frozen=True)
class ExperimentReport:
    config: ExperimentConfig
    accuracy: AccuracyMatrix
    a_avg_literal: float
    a_avg_normalized: float
    a_t: float
    f_t: float | None
    oracle: tuple[StageOracleDelta, ...] | None
    comm: CommLedger

    def to_text(self) -> str:
        lines = [f"schema = {REPORT_SCHEMA}", "", "[config]"]
        lines.append(self.config.to_text().rstrip("\n"))
        lines += ["", "[accuracy]"]
        for t, row in enumerate(self.accuracy.rows, start=1):
            for tau, value in enumerate(row, start=1):
                lines.append(f"A[{t}][{tau}] = {value!r}")
        lines += ["", "[metrics]"]
        lines.append(f"A_avg_literal = {self.a_avg_literal!r}")
        lines.append(f"A_avg_normalized = {self.a_avg_normalized!r}")
        lines.append(f"A_T = {self.a_t!r}")
        if self.f_t is not None:
            lines.append(f"F_T = {self.f_t!r}")
        if self.oracle is not None:
            lines += ["", "[oracle]"]
            for entry in self.oracle:
                lines.append(
                    f"stage {entry.stage}: w_delta = {entry.w_delta!r} "
                    f"gram_delta = {entry.gram_delta!r} corr_delta = {entry.corr_delta!r}"
                )
        lines += ["", "[comm]"]
        lines.append(f"mode = {self.comm.mode}")
        lines.append(f"elem_bytes = {self.comm.elem_bytes}")
        for (stage, client), nbytes in sorted(self.comm.entries.items()):
            lines.append(f"stage {stage} client {client}: {nbytes}")
        lines.append(f"total = {self.comm.total}")
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class EstimatorStudy:
    """Monte-Carlo gram-estimation error as a function of the client count."""

    k_values: tuple[int, ...]
    mean_sq_errors: tuple[float, ...]
    se_sq_errors: tuple[float, ...]
    reference: tuple[float, ...]  # ((K+1)/(K-1))^2 trend line
    trials: int

    def to_text(self) -> str:
        lines = ["schema = stsa-estimator-study/1", f"trials = {self.trials}"]
        for k, mean, se, ref in zip(
            self.k_values, self.mean_sq_errors, self.se_sq_errors, self.reference
        ):
            lines.append(
                f"K = {k}: mean_sq_error = {mean!r} se = {se!r} reference = {ref!r}"
            )
        return "\n".join(lines) + "\n"


def synth_spec_from_config(config: ExperimentConfig) -> SynthSpec:
    return random_synth_spec(
        class_count=config.synth_classes,
        dim=config.synth_dim,
        train_per_class=config.synth_train_per_class,
        test_per_class=config.synth_test_per_class,
        seed=derive_seed(config.seed, "synth"),
        mean_scale=config.synth_mean_scale,
        noise_std=config.synth_noise_std,
    )


def load_experiment_data(config: ExperimentConfig) -> tuple[FeatureDataset, FeatureDataset]:
    if config.data == "synthetic":
        return generate_synthetic(synth_spec_from_config(config))
    train = load_features(config.train_path)
    test = load_features(config.test_path)
    if train.class_count != test.class_count:
        raise ConfigurationError(
            f"train declares {train.class_count} classes, test {test.class_count}"
        )
    return train, test


def make_schedule(config: ExperimentConfig, class_count: int) -> TaskSchedule:
    shuffle_seed = (
        derive_seed(config.seed, "class-order") if config.shuffle_classes else None
    )
    return split_tasks(class_count, config.T, config.first_task_classes, shuffle_seed)


def _rel_frobenius(delta: np.ndarray, reference: np.ndarray) -> float:
    ref_norm = float(np.linalg.norm(reference, "fro"))
    delta_norm = float(np.linalg.norm(delta, "fro"))
    if ref_norm == 0.0:
        return 0.0 if delta_norm == 0.0 else float("inf")
    return delta_norm / ref_norm


def centralized_oracle(
    all_train: FeatureDataset,
    schedule: TaskSchedule,
    rmap: RandomMap,
    gamma: float,
) -> ClassifierWeights:
    """Ridge solution with unrestricted access to all pooled data.

    This is the equivalence reference for the federated-incremental path.
    It pools every sample of the schedule's classes, maps them once, and
    solves the regularized normal equations with a plain LU solve, a route
    independent of the SPD factorization used by the aggregation path.
    """
    class_ids = schedule.classes_through(schedule.stages)
    if not class_ids:
        raise ConfigurationError("schedule has no classes")
    idx = np.flatnonzero(np.isin(all_train.labels, class_ids))
    if idx.size == 0:
        raise ConfigurationError("no training samples match the schedule's classes")
    feat = apply_map(rmap, all_train.features[idx])
    stats = local_statistics(feat, all_train.labels[idx], class_ids)
    system = stats.gram + gamma * np.eye(rmap.output_dim)
    weights = np.linalg.solve(system, stats.corr)
    return ClassifierWeights(weights=weights, class_ids=tuple(class_ids))


def run_experiment(config: ExperimentConfig) -> ExperimentReport:
    """Execute the full federated class-incremental loop for one config."""
    config.validate()
    train, test = load_experiment_data(config)
    schedule = make_schedule(config, train.class_count)
    d = train.features.shape[1]
    rmap = make_random_map(
        derive_seed(config.seed, "map"),
        d,
        config.M if config.map_enabled else d,
        config.map_enabled,
        config.map_scale,
    )
    mapped_test = apply_map(rmap, test.features)
    test_rows = [
        np.flatnonzero(np.isin(test.labels, task)) for task in schedule.tasks
    ]
    mapped_train = apply_map(rmap, train.features) if config.oracle_check else None

    state = TemporalState.initial(rmap.output_dim, estimated=config.mode == "efficient")
    ledger = CommLedger(mode=config.mode, elem_bytes=config.elem_bytes)
    noise_on = config.noise_q > 0.0 and config.noise_s > 0.0
    global_parts = None
    if not config.repartition_each_task:
        global_parts = dirichlet_partition(
            train.labels, config.K, config.beta, derive_seed(config.seed, "partition")
        )

    acc_rows: list[tuple[float, ...]] = []
    oracle_deltas: list[StageOracleDelta] | None = [] if config.oracle_check else None

    for t in range(1, schedule.stages + 1):
        task_classes = schedule.tasks[t - 1]
        task_idx = np.flatnonzero(np.isin(train.labels, task_classes))
        if config.repartition_each_task:
            parts = dirichlet_partition(
                train.labels[task_idx],
                config.K,
                config.beta,
                derive_seed(config.seed, f"partition/stage={t}"),
            )
            client_rows = [task_idx[p] for p in parts]
        else:
            client_rows = [
                part[np.isin(train.labels[part], task_classes)] for part in global_parts
            ]

        payloads = []
        for k in range(config.K):
            try:
                shard = ClientShard(
                    client_id=k,
                    task_id=t,
                    features=train.features[client_rows[k]],
                    labels=train.labels[client_rows[k]],
                )
                payload = extract_payload(
                    shard,
                    rmap,
                    task_classes,
                    config.mode,
                    config.K_D,
                    derive_seed(config.seed, f"dummy/stage={t}/client={k}"),
                    config.stratified_dummy,
                    config.elem_bytes,
                )
                if noise_on:
                    payload = add_noise(
                        payload,
                        config.noise_q,
                        config.noise_s,
                        derive_seed(config.seed, f"noise/stage={t}/client={k}"),
                    )
            except StsaError as exc:
                raise type(exc)(f"stage {t}, client {k}: {exc}") from exc
            ledger.add(t, k, payload.byte_size)
            payloads.append(payload)

        try:
            agg = spatial_aggregate(payloads, task_classes)
            if config.mode == "efficient":
                stage_gram = estimate_gram(agg.records, task_classes)
            else:
                stage_gram = agg.gram
            state = temporal_aggregate(state, stage_gram, agg.corr, task_classes)
            model = update_classifier(state, config.gamma, rmap)
        except StsaError as exc:
            raise type(exc)(f"stage {t}: {exc}") from exc

        row = []
        for tau in range(1, t + 1):
            rows = test_rows[tau - 1]
            if rows.size == 0:
                row.append(0.0)
                continue
            preds = predict(model.weights, mapped_test[rows])
            row.append(float(np.mean(preds == test.labels[rows])))
        acc_rows.append(tuple(row))

        if config.oracle_check:
            prefix = TaskSchedule(tasks=schedule.tasks[:t])
            seen = prefix.classes_through(t)
            pooled_idx = np.flatnonzero(np.isin(train.labels, seen))
            pooled = local_statistics(
                mapped_train[pooled_idx], train.labels[pooled_idx], seen
            )
            w_star = centralized_oracle(train, prefix, rmap, config.gamma)
            oracle_deltas.append(
                StageOracleDelta(
                    stage=t,
                    w_delta=_rel_frobenius(
                        model.weights.weights - w_star.weights, w_star.weights
                    ),
                    gram_delta=_rel_frobenius(state.gram_acc - pooled.gram, pooled.gram),
                    corr_delta=_rel_frobenius(state.corr_acc - pooled.corr, pooled.corr),
                )
            )

    accuracy = AccuracyMatrix(rows=tuple(acc_rows))
    literal = avg_incremental_accuracy(accuracy)
    return ExperimentReport(
        config=config,
        accuracy=accuracy,
        a_avg_literal=literal,
        a_avg_normalized=literal / accuracy.stages,
        a_t=final_average_accuracy(accuracy),
        f_t=average_forgetting(accuracy) if accuracy.stages >= 2 else None,
        oracle=tuple(oracle_deltas) if oracle_deltas is not None else None,
        comm=ledger,
    )


def run_estimator_study(
    spec: SynthSpec, k_values, trials: int, seed: int
) -> EstimatorStudy:
    """Monte-Carlo sweep of the gram-estimation error over client counts.

    Each trial draws the per-class samples, splits them evenly across K
    clients (fixed total n), estimates the gram from the first-order records
    and measures the squared Frobenius gap to the realized gram.
    """
    k_values = tuple(int(k) for k in k_values)
    if trials < 100:
        raise ConfigurationError(f"estimator study needs >= 100 trials, got {trials}")
    for k in k_values:
        if k < 2:
            raise ConfigurationError(f"estimator study needs K >= 2, got {k}")
        if k > spec.train_per_class:
            raise ConfigurationError(
                f"K={k} exceeds the {spec.train_per_class} samples per class"
            )
    means, ses = [], []
    for k in k_values:
        stream = ChaChaStream(derive_seed(seed, f"study/K={k}"))
        errors = np.empty(trials)
        for trial in range(trials):
            errors[trial] = _estimation_trial(spec, k, stream)
        means.append(float(errors.mean()))
        ses.append(float(errors.std(ddof=1) / np.sqrt(trials)))
    reference = tuple(((k + 1) / (k - 1)) ** 2 for k in k_values)
    return EstimatorStudy(
        k_values=k_values,
        mean_sq_errors=tuple(means),
        se_sq_errors=tuple(ses),
        reference=reference,
        trials=trials,
    )


def _estimation_trial(spec: SynthSpec, k: int, stream: ChaChaStream) -> float:
    std = np.sqrt(spec.variances)
    c = spec.class_count
    m = spec.dim
    gram_true = np.zeros((m, m))
    corrs = np.zeros((k, m, c))
    counts = np.zeros((k, c), dtype=np.int64)
    n = spec.train_per_class
    for cls in range(c):
        x = spec.means[cls] + std[cls] * stream.standard_normal(n * m).reshape(n, m)
        gram_true += x.T @ x
        for j, rows in enumerate(np.array_split(np.arange(n), k)):
            corrs[j, :, cls] = x[rows].sum(axis=0)
            counts[j, cls] = rows.size
    records = [
        SpatialStatistics(
            gram=None,
            corr=corrs[j],
            label_freq=counts[j],
            task_id=1,
            client_id=j,
        )
        for j in range(k)
    ]
    g_hat = estimate_gram(records, range(c))
    return float(np.linalg.norm(g_hat - gram_true, "fro") ** 2)
