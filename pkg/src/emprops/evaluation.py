"""Metrics, the outer-CV evaluation protocol, and report generation.

The protocol: per seed, material-level k-fold splits; per fold, grid
search on the training portion (inner k-fold), refit the winning
configuration on the whole training fold, evaluate on the held-out fold.
Metrics are computed in each channel's reporting space, i.e. original
units after undoing standardization, except that log-transformed channels
(drop height h50) are reported in log units. Aggregation is mean and
sample standard deviation over the k x n_seeds fold values.
"""

from __future__ import annotations

import math
import itertools
from dataclasses import dataclass, field, replace

import numpy as np

from emprops import dataset as ds
from emprops import descriptors, forest as rf, mtnn
from emprops.errors import ConstantTargets, InvalidConfig, LengthMismatch
from emprops.rng import derive_seed

DEFAULT_SEEDS = (1, 2, 3)
DEFAULT_FOLDS = 5


def rmse(pred, actual) -> float:
    pred = np.asarray(pred, dtype=np.float64)
    actual = np.asarray(actual, dtype=np.float64)
    if pred.shape != actual.shape or pred.size == 0:
        raise LengthMismatch(f"rmse needs equal non-empty lengths, got {pred.shape} vs {actual.shape}")
    residual = pred - actual
    return math.sqrt(float(residual @ residual) / pred.size)


def r2(pred, actual) -> float:
    pred = np.asarray(pred, dtype=np.float64)
    actual = np.asarray(actual, dtype=np.float64)
    if pred.shape != actual.shape or pred.size == 0:
        raise LengthMismatch(f"r2 needs equal non-empty lengths, got {pred.shape} vs {actual.shape}")
    sst = float(np.sum((actual - actual.mean()) ** 2))
    if sst == 0.0:
        raise ConstantTargets("r2 is undefined for constant actuals")
    sse = float(np.sum((pred - actual) ** 2))
    return 1.0 - sse / sst


@dataclass
class ChannelMetrics:
    """Fold-level metric values for one channel; NaN marks folds where the
    metric was undefined (no test records, or constant actuals for R^2)."""

    rmse_values: list[float] = field(default_factory=list)
    r2_values: list[float] = field(default_factory=list)

    def _summary(self, values: list[float]) -> tuple[float, float, int]:
        finite = [v for v in values if not math.isnan(v)]
        if not finite:
            return math.nan, math.nan, 0
        mean = sum(finite) / len(finite)
        if len(finite) < 2:
            return mean, 0.0, len(finite)
        var = sum((v - mean) ** 2 for v in finite) / (len(finite) - 1)
        return mean, math.sqrt(var), len(finite)

    @property
    def rmse_mean_std(self) -> tuple[float, float, int]:
        return self._summary(self.rmse_values)

    @property
    def r2_mean_std(self) -> tuple[float, float, int]:
        return self._summary(self.r2_values)


@dataclass
class ProtocolReport:
    model_id: str
    density_mode: bool
    n_seeds: int
    k: int
    channels: dict[str, ChannelMetrics] = field(default_factory=dict)

    def metrics_for(self, channel_key: str) -> ChannelMetrics:
        return self.channels.setdefault(channel_key, ChannelMetrics())


MODEL_FAMILIES = ("st-rf", "st-nn", "mt-nn")


def model_identifier(family: str, subset_id: int) -> str:
    if family == "st-rf":
        return "ST-RF"
    if family == "st-nn":
        return "ST-NN"
    return "MT-NN-all" if subset_id == 6 else f"MT-NN-sub{subset_id}"


def run_protocol(family: str, dataset: ds.Dataset, subset_id: int,
                 density_mode: bool, seeds=DEFAULT_SEEDS, k: int = DEFAULT_FOLDS,
                 grid: mtnn.GridSpec | None = None,
                 forest_grid: "ForestGridSpec | None" = None,
                 base_train: mtnn.TrainConfig | None = None,
                 inner_k: int = 5) -> ProtocolReport:
    """Full evaluation protocol for one model family.

    Single-task families run one model per channel on that channel's
    records; the multi-task family trains one selector network per fold on
    every channel of the subset.
    """
    if family not in MODEL_FAMILIES:
        raise InvalidConfig(f"unknown model family {family!r}")
    subset = ds.subset_filter(dataset, subset_id)
    corpus = [subset.graphs[m] for m in sorted(subset.graphs)]
    schema = descriptors.fit_schema(corpus, include_density=density_mode)
    design = ds.assemble(subset, schema)
    grid = grid or mtnn.GridSpec()
    forest_grid = forest_grid or ForestGridSpec()
    base_train = base_train or mtnn.TrainConfig()

    report = ProtocolReport(
        model_id=model_identifier(family, subset_id),
        density_mode=density_mode,
        n_seeds=len(seeds),
        k=k,
    )
    for seed in seeds:
        plan = ds.kfold_by_material(design.material_ids, k, seed)
        for fold in range(k):
            train_mats, test_mats = plan.train_test(fold)
            if family == "mt-nn":
                _evaluate_mtnn_fold(report, design, train_mats, test_mats,
                                    grid, base_train, inner_k, derive_seed(seed, fold))
            else:
                _evaluate_st_fold(report, family, design, train_mats, test_mats,
                                  grid, forest_grid, base_train, inner_k,
                                  derive_seed(seed, fold))
    return report


def single_channel_design(design: ds.DesignMatrix, channel_pos: int) -> ds.DesignMatrix:
    mask = design.channel_idx == channel_pos
    registry = ds.PropertyRegistry(channels=(design.registry.channels[channel_pos],))
    return ds.DesignMatrix(
        features=design.features[mask],
        channel_idx=np.zeros(int(mask.sum()), dtype=np.int64),
        targets=design.targets[mask],
        material_ids=[m for m, keep in zip(design.material_ids, mask) if keep],
        registry=registry,
    )


def _fit_eval_net(design: ds.DesignMatrix, train_rows: np.ndarray, test_rows: np.ndarray,
                  cell: dict, base_train: mtnn.TrainConfig, seed: int) -> np.ndarray:
    """Refit one network on the full training fold; return test predictions
    in transformed-target units."""
    n_channels = len(design.registry)
    standardizer = ds.Standardizer.fit(
        design.features[train_rows], design.targets[train_rows],
        design.channel_idx[train_rows], n_channels,
    )
    x_train = standardizer.apply_features(design.features[train_rows])
    y_train = standardizer.apply_targets(design.targets[train_rows],
                                         design.channel_idx[train_rows])
    x_test = standardizer.apply_features(design.features[test_rows])

    selector_dim = n_channels if n_channels > 1 else 0
    s_train = s_test = None
    if selector_dim:
        eye = np.eye(n_channels)
        s_train = eye[design.channel_idx[train_rows]]
        s_test = eye[design.channel_idx[test_rows]]

    config = mtnn.MTNetConfig(
        input_dim=design.features.shape[1],
        selector_dim=selector_dim,
        hidden_sizes=cell["hidden_sizes"],
        selector_layer_index=cell["selector_layer_index"],
        l2_penalty=cell["l2_penalty"],
        seed=seed,
    )
    train_config = replace(base_train, learning_rate=cell["learning_rate"],
                           batch_size=cell["batch_size"], seed=derive_seed(seed, 11))
    result = mtnn.train(mtnn.init_network(config), x_train, s_train, y_train, train_config)
    pred_std = mtnn.forward(result.net, x_test, s_test)
    return standardizer.invert_targets(pred_std, design.channel_idx[test_rows])


def _record_channel_metrics(report: ProtocolReport, registry: ds.PropertyRegistry,
                            pred: np.ndarray, actual: np.ndarray,
                            channel_idx: np.ndarray) -> None:
    for pos, channel in enumerate(registry):
        metrics = report.metrics_for(channel.key)
        mask = channel_idx == pos
        if not np.any(mask):
            metrics.rmse_values.append(math.nan)
            metrics.r2_values.append(math.nan)
            continue
        metrics.rmse_values.append(rmse(pred[mask], actual[mask]))
        try:
            metrics.r2_values.append(r2(pred[mask], actual[mask]))
        except (ConstantTargets, LengthMismatch):
            metrics.r2_values.append(math.nan)


def _evaluate_mtnn_fold(report: ProtocolReport, design: ds.DesignMatrix,
                        train_mats: set[str], test_mats: set[str],
                        grid: mtnn.GridSpec, base_train: mtnn.TrainConfig,
                        inner_k: int, seed: int) -> None:
    train_rows = design.rows_for(train_mats)
    test_rows = design.rows_for(test_mats)
    train_design = _restrict(design, train_rows)
    search = mtnn.grid_search(grid, train_design, base_train, inner_k=inner_k, seed=seed)
    pred = _fit_eval_net(design, train_rows, test_rows, search.best_cell,
                         base_train, derive_seed(seed, 3))
    _record_channel_metrics(report, design.registry, pred,
                            design.targets[test_rows], design.channel_idx[test_rows])


def _evaluate_st_fold(report: ProtocolReport, family: str, design: ds.DesignMatrix,
                      train_mats: set[str], test_mats: set[str],
                      grid: mtnn.GridSpec, forest_grid: "ForestGridSpec",
                      base_train: mtnn.TrainConfig, inner_k: int, seed: int) -> None:
    for pos, channel in enumerate(design.registry):
        single = single_channel_design(design, pos)
        train_rows = single.rows_for(train_mats)
        test_rows = single.rows_for(test_mats)
        metrics = report.metrics_for(channel.key)
        if not np.any(test_rows) or not np.any(train_rows):
            metrics.rmse_values.append(math.nan)
            metrics.r2_values.append(math.nan)
            continue
        channel_seed = derive_seed(seed, pos + 17)
        train_design = _restrict(single, train_rows)
        if family == "st-nn":
            search = mtnn.grid_search(grid, train_design, base_train, inner_k=inner_k,
                                      seed=channel_seed)
            pred = _fit_eval_net(single, train_rows, test_rows, search.best_cell,
                                 base_train, derive_seed(channel_seed, 3))
        else:
            search = forest_grid_search(forest_grid, train_design, inner_k=inner_k,
                                        seed=channel_seed)
            config = search.best_config
            model = rf.fit_forest(single.features[train_rows], single.targets[train_rows],
                                  _with_seed(config, derive_seed(channel_seed, 3)))
            pred = rf.predict_forest(model, single.features[test_rows])
        actual = single.targets[test_rows]
        metrics.rmse_values.append(rmse(pred, actual))
        try:
            metrics.r2_values.append(r2(pred, actual))
        except (ConstantTargets, LengthMismatch):
            metrics.r2_values.append(math.nan)


def _restrict(design: ds.DesignMatrix, rows: np.ndarray) -> ds.DesignMatrix:
    return ds.DesignMatrix(
        features=design.features[rows],
        channel_idx=design.channel_idx[rows],
        targets=design.targets[rows],
        material_ids=[m for m, keep in zip(design.material_ids, rows) if keep],
        registry=design.registry,
    )


# ---------------------------------------------------------------------------
# Forest hyperparameter grid
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ForestGridSpec:
    n_trees: tuple[int, ...] = (100,)
    max_depth: tuple[int, ...] = (12,)
    min_samples_leaf: tuple[int, ...] = (1, 3)
    max_features: tuple = (None,)  # None resolves to ceil(d / 3)

    def cells(self) -> list[dict]:
        return [
            {
                "n_trees": t,
                "max_depth": d,
                "min_samples_leaf": leaf,
                "max_features": mf,
            }
            for t, d, leaf, mf in itertools.product(
                self.n_trees, self.max_depth, self.min_samples_leaf, self.max_features
            )
        ]

    @classmethod
    def from_json(cls, data: dict) -> "ForestGridSpec":
        kwargs = {}
        for axis in ("n_trees", "max_depth", "min_samples_leaf", "max_features"):
            if axis in data:
                kwargs[axis] = tuple(data[axis])
        return cls(**kwargs)


@dataclass
class ForestGridResult:
    best_config: rf.ForestConfig
    best_score: float
    table: list[dict]


def _with_seed(config: rf.ForestConfig, seed: int) -> rf.ForestConfig:
    return replace(config, seed=seed)


def forest_grid_search(grid: ForestGridSpec, design: ds.DesignMatrix,
                       inner_k: int = 5, seed: int = 0) -> ForestGridResult:
    """Grid search for the forest, scored by inner-CV RMSE in transformed
    target units (trees are scale-free, so no standardization)."""
    cells = grid.cells()
    if not cells:
        raise InvalidConfig("empty forest grid")
    plan = ds.kfold_by_material(design.material_ids, inner_k, seed)
    best_config = None
    best_score = math.inf
    table = []
    for cell_index, cell in enumerate(cells):
        config = rf.ForestConfig(seed=derive_seed(seed, cell_index + 1), **cell)
        fold_scores = []
        for fold in range(inner_k):
            train_mats, val_mats = plan.train_test(fold)
            train_rows = design.rows_for(train_mats)
            val_rows = design.rows_for(val_mats)
            if not train_rows.any() or not val_rows.any():
                continue
            model = rf.fit_forest(design.features[train_rows],
                                  design.targets[train_rows], config)
            pred = rf.predict_forest(model, design.features[val_rows])
            fold_scores.append(rmse(pred, design.targets[val_rows]))
        mean_score = float(np.mean(fold_scores)) if fold_scores else math.inf
        table.append({**cell, "mean_val_rmse": mean_score})
        if mean_score < best_score:
            best_score = mean_score
            best_config = config
    if best_config is None:
        best_config = rf.ForestConfig(**cells[0])
    return ForestGridResult(best_config=best_config, best_score=best_score, table=table)


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------

def format_mean_std(mean: float, std: float) -> str:
    """Three-decimal mean ± std cells, e.g. 0.238 ± 0.010."""
    if math.isnan(mean):
        return "n/a"
    return f"{mean:.3f} ± {std:.3f}"


def _fmt(value: float) -> str:
    return "nan" if math.isnan(value) else f"{value:.12g}"


def report_table(reports: list[ProtocolReport]) -> dict[str, str]:
    """Comparison artifacts: a long-form CSV, a Markdown comparison table per
    channel, grouped-bar data, and percent-improvement
    lines of the multi-task model over the best single-task model."""
    if not reports:
        raise InvalidConfig("report_table needs at least one report")

    channel_keys: list[str] = []
    for report in reports:
        for key in report.channels:
            if key not in channel_keys:
                channel_keys.append(key)

    csv_lines = ["model,channel,mean_rmse,std_rmse,mean_r2,std_r2,n_rmse,n_r2"]
    bar_lines = ["channel,model,mean_rmse,std_rmse"]
    md_lines = ["# Model comparison", ""]
    for key in channel_keys:
        md_lines += [f"## {key}", "", "| Model | Test RMSE | Test R² |", "| --- | --- | --- |"]
        for report in reports:
            metrics = report.channels.get(key)
            if metrics is None:
                continue
            rmse_mean, rmse_std, n_rmse = metrics.rmse_mean_std
            r2_mean, r2_std, n_r2 = metrics.r2_mean_std
            csv_lines.append(
                f"{report.model_id},{key},{_fmt(rmse_mean)},{_fmt(rmse_std)},"
                f"{_fmt(r2_mean)},{_fmt(r2_std)},{n_rmse},{n_r2}"
            )
            bar_lines.append(f"{key},{report.model_id},{_fmt(rmse_mean)},{_fmt(rmse_std)}")
            md_lines.append(
                f"| {report.model_id} | {format_mean_std(rmse_mean, rmse_std)} "
                f"| {format_mean_std(r2_mean, r2_std)} |"
            )
        md_lines.append("")

    improvement_lines = ["channel,best_st_model,best_st_rmse,best_mt_model,mt_rmse,percent_reduction"]
    for key in channel_keys:
        best_st = None
        best_mt = None
        for report in reports:
            metrics = report.channels.get(key)
            if metrics is None:
                continue
            mean = metrics.rmse_mean_std[0]
            if math.isnan(mean):
                continue
            if report.model_id.startswith("ST-"):
                if best_st is None or mean < best_st[1]:
                    best_st = (report.model_id, mean)
            else:
                if best_mt is None or mean < best_mt[1]:
                    best_mt = (report.model_id, mean)
        if best_st and best_mt:
            reduction = (best_st[1] - best_mt[1]) / best_st[1] * 100.0
            improvement_lines.append(
                f"{key},{best_st[0]},{_fmt(best_st[1])},{best_mt[0]},"
                f"{_fmt(best_mt[1])},{_fmt(reduction)}"
            )
            md_lines.append(
                f"- {key}: {best_mt[0]} changes RMSE by {reduction:.1f}% "
                f"versus {best_st[0]}"
            )

    return {
        "report.csv": "\n".join(csv_lines) + "\n",
        "report.md": "\n".join(md_lines) + "\n",
        "bars.csv": "\n".join(bar_lines) + "\n",
        "improvement.csv": "\n".join(improvement_lines) + "\n",
    }


def correlation_tables(labels: list[str], r_matrix: np.ndarray,
                       overlap: np.ndarray) -> dict[str, str]:
    """CSV matrix pair: Pearson r values and shared-material counts."""
    def matrix_csv(matrix, fmt) -> str:
        lines = ["channel," + ",".join(labels)]
        for i, label in enumerate(labels):
            lines.append(label + "," + ",".join(fmt(matrix[i, j]) for j in range(len(labels))))
        return "\n".join(lines) + "\n"

    return {
        "pearson_r.csv": matrix_csv(r_matrix, _fmt),
        "pearson_overlap.csv": matrix_csv(overlap, lambda v: str(int(v))),
    }
