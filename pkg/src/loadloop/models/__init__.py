"""Uniform model interface: training, prediction, persistence, and
configuration evaluation over dataset splits.

Linear and boosted-tree models fit one head per forecast step; the MLP is a
single network with one output unit per step. Inputs are standardized with
train-split statistics for linear and MLP; trees see raw features.
"""

from __future__ import annotations

import io
import json
import time
import zipfile
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from ..dataset import CleanDataset, TaskSpec
from ..features import DesignMatrix, FeatureConfig, FeatureSelection, assemble_design_matrix
from ..metrics import MetricSpec, evaluate as evaluate_metric
from . import gbt as _gbt
from . import linear as _linear
from . import mlp as _mlp
from .mlp import DivergedError, gradient_check  # noqa: F401  (re-export)

IMPLEMENTED_TYPES = ("linear", "mlp", "gbt")
RESERVED_TYPES = ("svr", "lstm", "gru", "cnn")
ALL_TYPES = IMPLEMENTED_TYPES + RESERVED_TYPES
SEQUENCE_FAMILIES = ("lstm", "gru", "cnn")

MODEL_FILE_VERSION = 1


class ModelError(ValueError):
    pass


class UnimplementedModelError(ModelError):
    """The model type is declared in the search-space schema but has no
    training implementation."""


def is_sequence_family(model_type: str) -> bool:
    return model_type in SEQUENCE_FAMILIES


def validate_hyperparams(model_type: str, hp: Dict) -> None:
    """Structural validity for training. Search-space membership is the
    optimizer's concern, so off-grid values (e.g. a depth-1 stump) train fine.
    """
    if model_type not in ALL_TYPES:
        raise ModelError(f"unknown model type {model_type!r}")
    if model_type not in IMPLEMENTED_TYPES:
        raise UnimplementedModelError(f"unimplemented model type {model_type!r}")
    if model_type == "linear":
        reg = hp.get("regularization", "none")
        if reg not in ("none", "ridge"):
            raise ModelError(f"unknown regularization {reg!r}")
        if reg == "ridge" and not float(hp.get("alpha", 0)) > 0:
            raise ModelError("ridge requires alpha > 0")
    elif model_type == "mlp":
        if int(hp["hidden_layers"]) < 1 or int(hp["hidden_size"]) < 1:
            raise ModelError("mlp needs at least one hidden layer and unit")
        if not float(hp["learning_rate"]) > 0:
            raise ModelError("learning_rate must be positive")
        if not 0.0 <= float(hp.get("dropout", 0.0)) < 1.0:
            raise ModelError("dropout must lie in [0, 1)")
    elif model_type == "gbt":
        if int(hp["n_estimators"]) < 1 or int(hp["max_depth"]) < 1:
            raise ModelError("gbt needs n_estimators >= 1 and max_depth >= 1")
        if not 0 < float(hp["learning_rate"]) <= 1:
            raise ModelError("learning_rate must lie in (0, 1]")


@dataclass
class Standardizer:
    """Column-wise z-scoring with train statistics. Binary indicator columns
    and zero-variance columns pass through unscaled."""

    mean: np.ndarray
    scale: np.ndarray

    @classmethod
    def fit(cls, X: np.ndarray) -> "Standardizer":
        mean = X.mean(axis=0)
        scale = X.std(axis=0)
        for j in range(X.shape[1]):
            col = X[:, j]
            if scale[j] == 0 or np.all((col == 0) | (col == 1)):
                mean[j] = 0.0
                scale[j] = 1.0
        return cls(mean=mean, scale=scale)

    def transform(self, X: np.ndarray) -> np.ndarray:
        return (X - self.mean) / self.scale

    def inverse(self, X: np.ndarray) -> np.ndarray:
        return X * self.scale + self.mean


@dataclass
class TrainReport:
    train_curve: List[float] = field(default_factory=list)
    val_curve: List[float] = field(default_factory=list)
    wall_time: float = 0.0
    early_stop_epoch: Optional[int] = None

    def to_dict(self) -> dict:
        return {
            "train_curve": self.train_curve,
            "val_curve": self.val_curve,
            "wall_time": self.wall_time,
            "early_stop_epoch": self.early_stop_epoch,
        }


@dataclass
class TrainedModel:
    model_type: str
    hyperparams: Dict
    feature_names: List[str]
    horizon: int
    seed: int
    x_standardizer: Optional[Standardizer]
    y_standardizer: Optional[Standardizer]
    fitted: Dict  # per-type payload, opaque outside this module

    def predict(self, rows: np.ndarray, feature_names: Optional[List[str]] = None) -> np.ndarray:
        if feature_names is not None and feature_names != self.feature_names:
            raise ModelError("feature names do not match the training design matrix")
        X = np.asarray(rows, dtype=float)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != len(self.feature_names):
            raise ModelError(
                f"expected {len(self.feature_names)} features, got {X.shape[1]}"
            )
        if self.x_standardizer is not None:
            X = self.x_standardizer.transform(X)
        if self.model_type == "linear":
            out = _linear.predict_linear(self.fitted, X)
        elif self.model_type == "mlp":
            out = _mlp.predict_mlp(self.fitted["params"], X)
        elif self.model_type == "gbt":
            out = np.column_stack([ens.predict(X) for ens in self.fitted["ensembles"]])
        else:
            raise UnimplementedModelError(self.model_type)
        if self.y_standardizer is not None:
            out = self.y_standardizer.inverse(out)
        if not np.all(np.isfinite(out)):
            raise ModelError("prediction produced non-finite values")
        return out


def train(
    model_type: str,
    hyperparams: Dict,
    train_dm: DesignMatrix,
    val_dm: DesignMatrix,
    seed: int = 0,
) -> Tuple[TrainedModel, TrainReport]:
    validate_hyperparams(model_type, hyperparams)
    if train_dm.feature_names != val_dm.feature_names:
        raise ModelError("train and val design matrices disagree on features")
    started = time.perf_counter()

    X_tr, Y_tr = train_dm.rows, train_dm.targets
    X_va, Y_va = val_dm.rows, val_dm.targets
    horizon = Y_tr.shape[1]

    x_std = y_std = None
    if model_type in ("linear", "mlp"):
        x_std = Standardizer.fit(X_tr)
        y_std = Standardizer.fit(Y_tr)
        X_tr, X_va = x_std.transform(X_tr), x_std.transform(X_va)
        Y_tr_s, Y_va_s = y_std.transform(Y_tr), y_std.transform(Y_va)
    else:
        Y_tr_s, Y_va_s = Y_tr, Y_va

    report = TrainReport()
    if model_type == "linear":
        fitted = _linear.fit_linear(
            X_tr,
            Y_tr_s,
            regularization=hyperparams.get("regularization", "none"),
            alpha=float(hyperparams.get("alpha", 0.0)),
        )
        report.train_curve = [float(np.mean((_linear.predict_linear(fitted, X_tr) - Y_tr_s) ** 2))]
        report.val_curve = [float(np.mean((_linear.predict_linear(fitted, X_va) - Y_va_s) ** 2))]
    elif model_type == "mlp":
        result = _mlp.train_mlp(
            X_tr,
            Y_tr_s,
            X_va,
            Y_va_s,
            hidden_layers=int(hyperparams["hidden_layers"]),
            hidden_size=int(hyperparams["hidden_size"]),
            learning_rate=float(hyperparams["learning_rate"]),
            dropout=float(hyperparams.get("dropout", 0.0)),
            seed=seed,
        )
        fitted = {"params": result["params"]}
        report.train_curve = result["train_curve"]
        report.val_curve = result["val_curve"]
        report.early_stop_epoch = result["early_stop_epoch"]
    elif model_type == "gbt":
        ensembles = []
        head_train_curves = []
        head_val_curves = []
        for h in range(horizon):
            ens, tr_curve, va_curve = _gbt.train_gbt(
                X_tr,
                Y_tr_s[:, h],
                n_estimators=int(hyperparams["n_estimators"]),
                max_depth=int(hyperparams["max_depth"]),
                learning_rate=float(hyperparams["learning_rate"]),
                X_val=X_va,
                y_val=Y_va_s[:, h],
            )
            ensembles.append(ens)
            head_train_curves.append(tr_curve)
            head_val_curves.append(va_curve)
        fitted = {"ensembles": ensembles}
        report.train_curve = list(np.mean(head_train_curves, axis=0))
        report.val_curve = list(np.mean(head_val_curves, axis=0))
    else:
        raise UnimplementedModelError(model_type)

    report.wall_time = time.perf_counter() - started
    model = TrainedModel(
        model_type=model_type,
        hyperparams=dict(hyperparams),
        feature_names=list(train_dm.feature_names),
        horizon=horizon,
        seed=seed,
        x_standardizer=x_std,
        y_standardizer=y_std,
        fitted=fitted,
    )
    return model, report


def predict(model: TrainedModel, dm: DesignMatrix) -> np.ndarray:
    """Per-origin H-vectors for every row of the design matrix."""
    return model.predict(dm.rows, dm.feature_names)


@dataclass
class EvalOutcome:
    loss: Optional[float]
    failed: bool = False
    error: Optional[str] = None
    report: Optional[TrainReport] = None
    model: Optional[TrainedModel] = None
    selection: Optional[FeatureSelection] = None

    @property
    def effective_loss(self) -> float:
        return float("inf") if self.failed or self.loss is None else self.loss


def _metric_over_origins(
    metric: MetricSpec,
    preds: np.ndarray,
    targets: np.ndarray,
    contexts: Optional[np.ndarray],
) -> float:
    values = []
    for i in range(preds.shape[0]):
        ctx = contexts[i] if contexts is not None else None
        values.append(evaluate_metric(metric, preds[i], targets[i], ctx))
    return float(np.mean(values))


def _context_windows(
    data: CleanDataset, task: TaskSpec, dm: DesignMatrix, role: str
) -> np.ndarray:
    series = data.series_for_role(role)
    if series is None:
        raise ModelError(f"metric requires a column with role {role!r}")
    delta, horizon = task.interval_delta, task.horizon
    return np.stack(
        [series[i + delta + 1 : i + delta + 1 + horizon] for i in dm.origin_indices]
    )


def evaluate_config(
    config: "Configuration",
    data: CleanDataset,
    task: TaskSpec,
    train_range: Tuple[int, int],
    val_range: Tuple[int, int],
    seed: int = 0,
) -> EvalOutcome:
    """Objective for one configuration: assemble features, train, score the
    validation split with the task metric. Divergence maps to a failed outcome
    instead of an exception. The test split is never touched here."""
    from ..optimizer.space import Configuration  # local import to avoid a cycle

    assert isinstance(config, Configuration)
    try:
        validate_hyperparams(config.model_type, config.hyperparams)
        fc = FeatureConfig.from_dict(config.features)
        train_dm = assemble_design_matrix(fc, data, task, train_range)
        val_dm = assemble_design_matrix(fc, data, task, val_range, selection=train_dm.selection)
        model, report = train(config.model_type, config.hyperparams, train_dm, val_dm, seed)
        preds = predict(model, val_dm)
        contexts = None
        if task.metric.kind == "condition_weighted":
            contexts = _context_windows(data, task, val_dm, task.metric.condition_rule.column_role)
        loss = _metric_over_origins(task.metric, preds, val_dm.targets, contexts)
        if not np.isfinite(loss):
            return EvalOutcome(loss=None, failed=True, error="non-finite validation loss")
        return EvalOutcome(
            loss=loss, report=report, model=model, selection=train_dm.selection
        )
    except UnimplementedModelError:
        raise
    except (DivergedError, ModelError) as exc:
        return EvalOutcome(loss=None, failed=True, error=str(exc))


def persistence_baseline(
    data: CleanDataset, task: TaskSpec, index_range: Tuple[int, int]
) -> float:
    """MAE of the 7-day persistence forecast over the range's valid origins."""
    fc = FeatureConfig(load_lags="none")
    dm = assemble_design_matrix(fc, data, task, index_range)
    load = data.load
    delta, horizon = task.interval_delta, task.horizon
    errs = []
    for row, i in enumerate(dm.origin_indices):
        target_idx = np.arange(i + delta + 1, i + delta + 1 + horizon)
        pred = load[target_idx - 168]
        errs.append(float(np.mean(np.abs(pred - dm.targets[row]))))
    return float(np.mean(errs))


def global_mean_baseline(
    data: CleanDataset, task: TaskSpec, train_range: Tuple[int, int], eval_range: Tuple[int, int]
) -> float:
    """MAE of predicting the train-split mean load everywhere."""
    fc = FeatureConfig(load_lags="none")
    train_mean = float(np.mean(data.load[train_range[0] : train_range[1]]))
    dm = assemble_design_matrix(fc, data, task, eval_range)
    return float(np.mean(np.abs(dm.targets - train_mean)))


def save_model(model: TrainedModel, path: str) -> None:
    """Versioned container: JSON header plus npz arrays; loads bit-exactly."""
    header = {
        "version": MODEL_FILE_VERSION,
        "model_type": model.model_type,
        "hyperparams": model.hyperparams,
        "feature_names": model.feature_names,
        "horizon": model.horizon,
        "seed": model.seed,
    }
    arrays: Dict[str, np.ndarray] = {}
    if model.x_standardizer is not None:
        arrays["x_mean"] = model.x_standardizer.mean
        arrays["x_scale"] = model.x_standardizer.scale
        arrays["y_mean"] = model.y_standardizer.mean
        arrays["y_scale"] = model.y_standardizer.scale
    if model.model_type == "linear":
        arrays["coef"] = model.fitted["coef"]
    elif model.model_type == "mlp":
        for i, (W, b) in enumerate(model.fitted["params"]):
            arrays[f"W{i}"] = W
            arrays[f"b{i}"] = b
        header["n_layers"] = len(model.fitted["params"])
    elif model.model_type == "gbt":
        header["ensembles"] = [
            {
                "base": ens.base,
                "learning_rate": ens.learning_rate,
                "trees": [_gbt.tree_to_dict(t) for t in ens.trees],
            }
            for ens in model.fitted["ensembles"]
        ]
    buf = io.BytesIO()
    np.savez(buf, **arrays)
    with zipfile.ZipFile(path, "w") as zf:
        zf.writestr("header.json", json.dumps(header, sort_keys=True))
        zf.writestr("arrays.npz", buf.getvalue())


def load_model(path: str) -> TrainedModel:
    with zipfile.ZipFile(path, "r") as zf:
        header = json.loads(zf.read("header.json"))
        if header["version"] != MODEL_FILE_VERSION:
            raise ModelError(f"unsupported model file version {header['version']}")
        with np.load(io.BytesIO(zf.read("arrays.npz"))) as npz:
            arrays = {k: npz[k] for k in npz.files}

    x_std = y_std = None
    if "x_mean" in arrays:
        x_std = Standardizer(mean=arrays["x_mean"], scale=arrays["x_scale"])
        y_std = Standardizer(mean=arrays["y_mean"], scale=arrays["y_scale"])

    model_type = header["model_type"]
    if model_type == "linear":
        fitted: Dict = {"coef": arrays["coef"]}
    elif model_type == "mlp":
        fitted = {
            "params": [
                (arrays[f"W{i}"], arrays[f"b{i}"]) for i in range(header["n_layers"])
            ]
        }
    elif model_type == "gbt":
        fitted = {
            "ensembles": [
                _gbt.GBTEnsemble(
                    base=float(e["base"]),
                    learning_rate=float(e["learning_rate"]),
                    trees=[_gbt.tree_from_dict(t) for t in e["trees"]],
                )
                for e in header["ensembles"]
            ]
        }
    else:
        raise UnimplementedModelError(model_type)

    return TrainedModel(
        model_type=model_type,
        hyperparams=header["hyperparams"],
        feature_names=header["feature_names"],
        horizon=header["horizon"],
        seed=header["seed"],
        x_standardizer=x_std,
        y_standardizer=y_std,
        fitted=fitted,
    )
