"""Selector-vector multi-task dense network.

A single-output feed-forward net with rectified-linear hidden layers; the
one-hot selector saying which property channel to predict is concatenated
to the input of one hidden layer (a hyperparameter). With selector_dim=0
this is the plain single-task network. Gradients are analytic
backpropagation; training is Adam with early stopping on validation MSE.
Everything seeded is driven by splitmix64, so runs are bit-reproducible.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, replace

import numpy as np

from emprops import dataset as ds
from emprops.errors import (
    DimensionMismatch,
    InvalidConfig,
    NonFiniteLoss,
)
from emprops.rng import SplitMix64, derive_seed


@dataclass(frozen=True)
class MTNetConfig:
    input_dim: int
    selector_dim: int
    hidden_sizes: tuple[int, ...]
    selector_layer_index: int  # 1-based hidden layer fed by the selector
    l2_penalty: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.input_dim < 1:
            raise InvalidConfig("input_dim must be positive")
        if self.selector_dim < 0:
            raise InvalidConfig("selector_dim must be non-negative")
        if not self.hidden_sizes or any(h < 1 for h in self.hidden_sizes):
            raise InvalidConfig("hidden_sizes must be positive integers")
        if self.selector_dim > 0 and not (1 <= self.selector_layer_index <= len(self.hidden_sizes)):
            raise InvalidConfig(
                f"selector_layer_index {self.selector_layer_index} outside "
                f"1..{len(self.hidden_sizes)}"
            )
        if self.l2_penalty < 0:
            raise InvalidConfig("l2_penalty must be non-negative")


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    batch_size: int = 32
    max_epochs: int = 400
    patience: int = 40
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    seed: int = 0

    def __post_init__(self) -> None:
        if self.learning_rate <= 0 or self.batch_size < 1 or self.max_epochs < 1:
            raise InvalidConfig("learning_rate, batch_size, max_epochs must be positive")
        if self.patience < 0 or self.patience > self.max_epochs:
            raise InvalidConfig("need 0 <= patience <= max_epochs")


@dataclass
class MTNet:
    config: MTNetConfig
    weights: list[np.ndarray]  # per layer, shape (fan_out, fan_in)
    biases: list[np.ndarray]   # per layer, shape (fan_out,)

    def copy(self) -> "MTNet":
        return MTNet(
            config=self.config,
            weights=[w.copy() for w in self.weights],
            biases=[b.copy() for b in self.biases],
        )


def layer_shapes(config: MTNetConfig) -> list[tuple[int, int]]:
    """(fan_out, fan_in) per layer; the selector widens one hidden fan-in."""
    shapes = []
    prev = config.input_dim
    for i, width in enumerate(config.hidden_sizes, start=1):
        fan_in = prev + (config.selector_dim if i == config.selector_layer_index
                         and config.selector_dim > 0 else 0)
        shapes.append((width, fan_in))
        prev = width
    shapes.append((1, prev))
    return shapes


def init_network(config: MTNetConfig) -> MTNet:
    """Glorot-uniform weights from splitmix64(seed), zero biases."""
    rng = SplitMix64(config.seed)
    weights = []
    biases = []
    for fan_out, fan_in in layer_shapes(config):
        limit = math.sqrt(6.0 / (fan_in + fan_out))
        w = np.empty((fan_out, fan_in), dtype=np.float64)
        flat = w.reshape(-1)
        for i in range(flat.size):
            flat[i] = (2.0 * rng.next_float() - 1.0) * limit
        weights.append(w)
        biases.append(np.zeros(fan_out, dtype=np.float64))
    return MTNet(config=config, weights=weights, biases=biases)


def _layer_inputs(net: MTNet, features: np.ndarray, selector: np.ndarray | None):
    """Forward pass keeping per-layer inputs for backprop."""
    config = net.config
    if features.ndim == 1:
        features = features[None, :]
    if features.shape[1] != config.input_dim:
        raise DimensionMismatch(
            f"feature dim {features.shape[1]} != input_dim {config.input_dim}"
        )
    if config.selector_dim == 0:
        if selector is not None:
            raise DimensionMismatch("selector given but selector_dim is 0")
    else:
        if selector is None:
            raise DimensionMismatch("selector required but missing")
        if selector.ndim == 1:
            selector = selector[None, :]
        if selector.shape[1] != config.selector_dim:
            raise DimensionMismatch(
                f"selector dim {selector.shape[1]} != selector_dim {config.selector_dim}"
            )
        if selector.shape[0] != features.shape[0]:
            raise DimensionMismatch("feature/selector batch sizes differ")

    inputs: list[np.ndarray] = []
    activation = features
    n_hidden = len(config.hidden_sizes)
    for i in range(n_hidden):
        layer_in = activation
        if config.selector_dim > 0 and i + 1 == config.selector_layer_index:
            layer_in = np.concatenate([activation, selector], axis=1)
        inputs.append(layer_in)
        pre = layer_in @ net.weights[i].T + net.biases[i]
        activation = np.maximum(pre, 0.0)
    inputs.append(activation)
    output = activation @ net.weights[n_hidden].T + net.biases[n_hidden]
    return inputs, output[:, 0]


def forward(net: MTNet, features: np.ndarray, selector: np.ndarray | None = None) -> np.ndarray:
    """Scalar predictions (standardized target space), one per row."""
    _, out = _layer_inputs(net, features, selector)
    return out


def gradients(net: MTNet, features: np.ndarray, selector: np.ndarray | None,
              targets: np.ndarray) -> tuple[list[np.ndarray], list[np.ndarray], float]:
    """Mean-squared-error gradients plus the l2 weight penalty.

    Returns (dWeights, dBiases, loss). The l2 term is
    l2_penalty * sum(w^2) over weights only, so its gradient is
    2 * l2_penalty * w; biases are not penalized.
    """
    config = net.config
    if features.ndim == 1:
        features = features[None, :]
    n = features.shape[0]
    inputs, out = _layer_inputs(net, features, selector)
    residual = out - targets
    loss = float(residual @ residual) / n

    d_weights = [np.zeros_like(w) for w in net.weights]
    d_biases = [np.zeros_like(b) for b in net.biases]

    delta = (2.0 / n) * residual[:, None]  # gradient at the linear output
    n_hidden = len(config.hidden_sizes)
    for layer in range(n_hidden, -1, -1):
        layer_in = inputs[layer]
        d_weights[layer] = delta.T @ layer_in
        d_biases[layer] = delta.sum(axis=0)
        if layer == 0:
            break
        # relu gate: the layer input is the previous hidden activation
        # (selector columns are gated too, then dropped, which is harmless)
        back = (delta @ net.weights[layer]) * (inputs[layer] > 0.0)
        if config.selector_dim > 0 and layer == config.selector_layer_index - 1:
            back = back[:, : back.shape[1] - config.selector_dim]
        delta = back

    if config.l2_penalty > 0.0:
        for layer, w in enumerate(net.weights):
            loss += config.l2_penalty * float(np.sum(w * w))
            d_weights[layer] += 2.0 * config.l2_penalty * w
    return d_weights, d_biases, loss


@dataclass
class TrainResult:
    net: MTNet
    history: list[dict]
    best_epoch: int


def mse(net: MTNet, features: np.ndarray, selector: np.ndarray | None,
        targets: np.ndarray) -> float:
    residual = forward(net, features, selector) - targets
    return float(residual @ residual) / len(targets)


def train(net: MTNet, features: np.ndarray, selector: np.ndarray | None,
          targets: np.ndarray, config: TrainConfig,
          val: tuple[np.ndarray, np.ndarray | None, np.ndarray] | None = None) -> TrainResult:
    """Adam training with optional early stopping.

    With a validation triple, training stops after `patience` epochs
    without improvement and the parameters from the best validation epoch
    are returned. Without one it runs max_epochs and returns the final
    parameters. Batch order is shuffled per epoch by one splitmix64 stream
    seeded from config.seed, so identical seeds give identical histories.
    """
    if len(targets) == 0:
        raise InvalidConfig("empty training batch")
    rng = SplitMix64(config.seed)
    n = len(targets)

    m_w = [np.zeros_like(w) for w in net.weights]
    v_w = [np.zeros_like(w) for w in net.weights]
    m_b = [np.zeros_like(b) for b in net.biases]
    v_b = [np.zeros_like(b) for b in net.biases]
    step = 0

    best = net.copy()
    best_val = math.inf
    best_epoch = 0
    stale = 0
    history: list[dict] = []

    for epoch in range(1, config.max_epochs + 1):
        order = list(range(n))
        rng.shuffle(order)
        for start in range(0, n, config.batch_size):
            batch = order[start : start + config.batch_size]
            bx = features[batch]
            bs = selector[batch] if selector is not None else None
            by = targets[batch]
            d_w, d_b, loss = gradients(net, bx, bs, by)
            if not math.isfinite(loss):
                raise NonFiniteLoss(f"non-finite loss at epoch {epoch}")
            step += 1
            correction1 = 1.0 - config.beta1 ** step
            correction2 = 1.0 - config.beta2 ** step
            for i in range(len(net.weights)):
                m_w[i] = config.beta1 * m_w[i] + (1 - config.beta1) * d_w[i]
                v_w[i] = config.beta2 * v_w[i] + (1 - config.beta2) * d_w[i] ** 2
                net.weights[i] -= config.learning_rate * (m_w[i] / correction1) / (
                    np.sqrt(v_w[i] / correction2) + config.epsilon
                )
                m_b[i] = config.beta1 * m_b[i] + (1 - config.beta1) * d_b[i]
                v_b[i] = config.beta2 * v_b[i] + (1 - config.beta2) * d_b[i] ** 2
                net.biases[i] -= config.learning_rate * (m_b[i] / correction1) / (
                    np.sqrt(v_b[i] / correction2) + config.epsilon
                )

        train_mse = mse(net, features, selector, targets)
        if not math.isfinite(train_mse):
            raise NonFiniteLoss(f"non-finite training loss at epoch {epoch}")
        entry = {"epoch": epoch, "train_mse": train_mse}
        if val is not None:
            val_mse = mse(net, val[0], val[1], val[2])
            if not math.isfinite(val_mse):
                raise NonFiniteLoss(f"non-finite validation loss at epoch {epoch}")
            entry["val_mse"] = val_mse
            if val_mse < best_val:
                best_val = val_mse
                best = net.copy()
                best_epoch = epoch
                stale = 0
            else:
                stale += 1
            history.append(entry)
            if stale > config.patience:
                return TrainResult(net=best, history=history, best_epoch=best_epoch)
        else:
            history.append(entry)

    if val is not None:
        return TrainResult(net=best, history=history, best_epoch=best_epoch)
    return TrainResult(net=net, history=history, best_epoch=config.max_epochs)


# ---------------------------------------------------------------------------
# Grid search
# ---------------------------------------------------------------------------

GRID_AXES = ("hidden_sizes", "selector_layer_index", "learning_rate", "batch_size", "l2_penalty")


@dataclass(frozen=True)
class GridSpec:
    """Enumerable axes; cells are the Cartesian product in declaration order.

    selector_layer_index accepts integers or the tokens "last" /
    "second_to_last", which resolve against each hidden_sizes value. Cells
    that resolve identically are deduplicated, keeping the earliest.
    """

    hidden_sizes: tuple[tuple[int, ...], ...] = ((32,),)
    selector_layer_index: tuple = ("last", "second_to_last")
    learning_rate: tuple[float, ...] = (1e-3,)
    batch_size: tuple[int, ...] = (32,)
    l2_penalty: tuple[float, ...] = (0.0,)

    def cells(self, selector_dim: int) -> list[dict]:
        out: list[dict] = []
        seen = set()
        for hidden, sel_raw, lr, batch, l2 in itertools.product(
            self.hidden_sizes, self.selector_layer_index, self.learning_rate,
            self.batch_size, self.l2_penalty,
        ):
            hidden = tuple(hidden)
            if selector_dim == 0:
                sel_index = 0
            elif sel_raw == "last":
                sel_index = len(hidden)
            elif sel_raw == "second_to_last":
                sel_index = max(1, len(hidden) - 1)
            else:
                sel_index = int(sel_raw)
                if not 1 <= sel_index <= len(hidden):
                    continue
            cell = {
                "hidden_sizes": hidden,
                "selector_layer_index": sel_index,
                "learning_rate": lr,
                "batch_size": batch,
                "l2_penalty": l2,
            }
            key = tuple(sorted(cell.items()))
            if key not in seen:
                seen.add(key)
                out.append(cell)
        return out

    @classmethod
    def from_json(cls, data: dict) -> "GridSpec":
        kwargs = {}
        if "hidden_sizes" in data:
            kwargs["hidden_sizes"] = tuple(tuple(h) for h in data["hidden_sizes"])
        for axis in ("selector_layer_index", "learning_rate", "batch_size", "l2_penalty"):
            if axis in data:
                kwargs[axis] = tuple(data[axis])
        return cls(**kwargs)


@dataclass
class GridResult:
    best_cell: dict
    best_score: float
    table: list[dict]  # one row per cell: cell params + mean_val_rmse


def _channel_mean_rmse(pred: np.ndarray, actual: np.ndarray, channel_idx: np.ndarray,
                       n_channels: int) -> float:
    """Per-channel RMSE averaged over the channels present."""
    scores = []
    for c in range(n_channels):
        mask = channel_idx == c
        if not np.any(mask):
            continue
        residual = pred[mask] - actual[mask]
        scores.append(math.sqrt(float(residual @ residual) / int(mask.sum())))
    return float(np.mean(scores)) if scores else math.nan


def grid_search(grid: GridSpec, design: ds.DesignMatrix, base_train: TrainConfig,
                inner_k: int = 5, seed: int = 0) -> GridResult:
    """Exhaustive grid search scored by inner k-fold cross-validation.

    Per cell: material-level inner folds, train on each inner-train split
    with early stopping against the held-out split, score the held-out
    RMSE in standardized space averaged over channels, then average over
    folds. Lowest mean wins; ties break toward the earliest cell.
    """
    selector_dim = len(design.registry)
    cells = grid.cells(selector_dim if selector_dim > 1 else 0)
    if not cells:
        raise InvalidConfig("empty hyperparameter grid")
    plan = ds.kfold_by_material(design.material_ids, inner_k, seed)

    best_cell = None
    best_score = math.inf
    table = []
    for cell_index, cell in enumerate(cells):
        fold_scores = []
        for fold in range(inner_k):
            train_mats, val_mats = plan.train_test(fold)
            train_rows = design.rows_for(train_mats)
            val_rows = design.rows_for(val_mats)
            if not train_rows.any() or not val_rows.any():
                continue
            score = _run_cell(design, train_rows, val_rows, cell, base_train,
                              derive_seed(seed, cell_index + 1, fold + 1))
            if not math.isnan(score):
                fold_scores.append(score)
        mean_score = float(np.mean(fold_scores)) if fold_scores else math.inf
        table.append({**cell, "mean_val_rmse": mean_score})
        if mean_score < best_score:
            best_score = mean_score
            best_cell = cell
    if best_cell is None:
        best_cell = cells[0]
        best_score = math.inf
    return GridResult(best_cell=best_cell, best_score=best_score, table=table)


def _run_cell(design: ds.DesignMatrix, train_rows: np.ndarray, val_rows: np.ndarray,
              cell: dict, base_train: TrainConfig, seed: int) -> float:
    n_channels = len(design.registry)
    standardizer = ds.Standardizer.fit(
        design.features[train_rows], design.targets[train_rows],
        design.channel_idx[train_rows], n_channels,
    )
    x_train = standardizer.apply_features(design.features[train_rows])
    y_train = standardizer.apply_targets(design.targets[train_rows],
                                         design.channel_idx[train_rows])
    x_val = standardizer.apply_features(design.features[val_rows])
    y_val = standardizer.apply_targets(design.targets[val_rows],
                                       design.channel_idx[val_rows])
    selector_dim = n_channels if n_channels > 1 else 0
    s_train = s_val = None
    if selector_dim:
        eye = np.eye(n_channels)
        s_train = eye[design.channel_idx[train_rows]]
        s_val = eye[design.channel_idx[val_rows]]

    net_config = MTNetConfig(
        input_dim=design.features.shape[1],
        selector_dim=selector_dim,
        hidden_sizes=cell["hidden_sizes"],
        selector_layer_index=cell["selector_layer_index"],
        l2_penalty=cell["l2_penalty"],
        seed=seed,
    )
    train_config = replace(base_train, learning_rate=cell["learning_rate"],
                           batch_size=cell["batch_size"], seed=derive_seed(seed, 7))
    net = init_network(net_config)
    result = train(net, x_train, s_train, y_train, train_config,
                   val=(x_val, s_val, y_val))
    pred = forward(result.net, x_val, s_val)
    return _channel_mean_rmse(pred, y_val, design.channel_idx[val_rows], n_channels)
