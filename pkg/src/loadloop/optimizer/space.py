"""Hierarchical search space: model types, each with feature and hyperparameter
dimensions, plus sampling and membership checks.

Dimensions may be conditional on another dimension's value (e.g. a selection
ratio only exists when its mode is "correlation"). Parents always precede
children in a dimension list.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

DIM_KINDS = ("uniform", "loguniform", "int", "logint", "categorical")


class SpaceError(ValueError):
    pass


@dataclass(frozen=True)
class Dimension:
    name: str
    kind: str
    low: float = 0.0
    high: float = 1.0
    step: int = 1
    choices: Tuple[Any, ...] = ()
    condition: Optional[Tuple[str, Any]] = None  # (parent dim, required value)

    def __post_init__(self) -> None:
        if self.kind not in DIM_KINDS:
            raise SpaceError(f"unknown dimension kind {self.kind!r}")
        if self.kind == "categorical":
            if not self.choices:
                raise SpaceError(f"dimension {self.name!r} has no choices")
        else:
            if not self.low < self.high:
                if not (self.kind in ("int", "logint") and self.low == self.high):
                    raise SpaceError(f"dimension {self.name!r} bounds must satisfy low < high")
            if self.kind in ("loguniform", "logint") and self.low <= 0:
                raise SpaceError(f"log dimension {self.name!r} requires low > 0")
            if self.kind == "int" and self.step < 1:
                raise SpaceError(f"int dimension {self.name!r} requires step >= 1")

    # --- warped space: TPE and samplers work on a monotone float axis ---

    def warp(self, value: Any) -> float:
        if self.kind in ("loguniform", "logint"):
            return math.log10(float(value))
        return float(value)

    def unwarp(self, x: float) -> Any:
        if self.kind == "uniform":
            return float(min(max(x, self.low), self.high))
        if self.kind == "loguniform":
            return float(min(max(10.0**x, self.low), self.high))
        if self.kind == "int":
            k = round((x - self.low) / self.step)
            k = min(max(k, 0), int((self.high - self.low) // self.step))
            return int(self.low + k * self.step)
        if self.kind == "logint":
            v = round(10.0**x)
            return int(min(max(v, self.low), self.high))
        raise SpaceError(f"unwarp undefined for {self.kind}")

    def warped_bounds(self) -> Tuple[float, float]:
        if self.kind in ("loguniform", "logint"):
            return math.log10(self.low), math.log10(self.high)
        return float(self.low), float(self.high)

    def sample(self, rng: np.random.Generator) -> Any:
        if self.kind == "categorical":
            return self.choices[int(rng.integers(len(self.choices)))]
        if self.kind == "int":
            n_steps = int((self.high - self.low) // self.step) + 1
            return int(self.low + self.step * int(rng.integers(n_steps)))
        lo, hi = self.warped_bounds()
        return self.unwarp(float(rng.uniform(lo, hi)))

    def contains(self, value: Any) -> bool:
        if self.kind == "categorical":
            return value in self.choices
        try:
            v = float(value)
        except (TypeError, ValueError):
            return False
        if not self.low <= v <= self.high:
            return False
        if self.kind == "int":
            offset = (v - self.low) / self.step
            return abs(offset - round(offset)) < 1e-9
        if self.kind == "logint":
            return abs(v - round(v)) < 1e-9
        return True

    def to_dict(self) -> dict:
        d: dict = {"name": self.name, "kind": self.kind}
        if self.kind == "categorical":
            d["choices"] = list(self.choices)
        else:
            d["low"] = self.low
            d["high"] = self.high
            if self.kind == "int":
                d["step"] = self.step
        if self.condition is not None:
            d["condition"] = list(self.condition)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Dimension":
        return cls(
            name=d["name"],
            kind=d["kind"],
            low=float(d.get("low", 0.0)),
            high=float(d.get("high", 1.0)),
            step=int(d.get("step", 1)),
            choices=tuple(d.get("choices", ())),
            condition=tuple(d["condition"]) if d.get("condition") else None,
        )


@dataclass(frozen=True)
class Configuration:
    """A point (model type, feature options, hyperparameters) in the space."""

    model_type: str
    features: Dict[str, Any] = field(default_factory=dict)
    hyperparams: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "model_type": self.model_type,
            "features": dict(self.features),
            "hyperparams": dict(self.hyperparams),
        }

    def canonical_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "Configuration":
        return cls(
            model_type=d["model_type"],
            features=dict(d.get("features", {})),
            hyperparams=dict(d.get("hyperparams", {})),
        )

    def values_for(self, group: str) -> Dict[str, Any]:
        return self.features if group == "features" else self.hyperparams


@dataclass
class SearchSpace:
    model_types: List[str]
    feature_dims: Dict[str, List[Dimension]]
    hyper_dims: Dict[str, List[Dimension]]

    def __post_init__(self) -> None:
        if not self.model_types:
            raise SpaceError("search space has no model types")
        for m in self.model_types:
            if not self.feature_dims.get(m):
                raise SpaceError(f"model type {m!r} has no feature dimensions")
            if not self.hyper_dims.get(m):
                raise SpaceError(f"model type {m!r} has no hyperparameter dimensions")

    def dims(self, model_type: str, group: str) -> List[Dimension]:
        table = self.feature_dims if group == "features" else self.hyper_dims
        return table[model_type]

    def dim_named(self, model_type: str, name: str) -> Tuple[str, Dimension]:
        """(group, dimension) carrying this name for the model type."""
        for group in ("features", "hyperparams"):
            for dim in self.dims(model_type, group):
                if dim.name == name:
                    return group, dim
        raise SpaceError(f"model type {model_type!r} has no dimension {name!r}")

    def _sample_group(
        self, dims: Sequence[Dimension], rng: np.random.Generator
    ) -> Dict[str, Any]:
        values: Dict[str, Any] = {}
        for dim in dims:
            if dim.condition is not None:
                parent, required = dim.condition
                if values.get(parent) != required:
                    continue
            values[dim.name] = dim.sample(rng)
        return values

    def sample_configuration(self, rng: np.random.Generator, model_type: Optional[str] = None) -> Configuration:
        m = model_type if model_type is not None else self.model_types[int(rng.integers(len(self.model_types)))]
        if m not in self.model_types:
            raise SpaceError(f"model type {m!r} not enabled")
        return Configuration(
            model_type=m,
            features=self._sample_group(self.feature_dims[m], rng),
            hyperparams=self._sample_group(self.hyper_dims[m], rng),
        )

    def contains(self, config: Configuration) -> bool:
        if config.model_type not in self.model_types:
            return False
        for group in ("features", "hyperparams"):
            dims = self.dims(config.model_type, group)
            values = config.values_for(group)
            known = {d.name for d in dims}
            if set(values) - known:
                return False
            for dim in dims:
                active = True
                if dim.condition is not None:
                    parent, required = dim.condition
                    active = values.get(parent) == required
                if active:
                    if dim.name not in values or not dim.contains(values[dim.name]):
                        return False
                elif dim.name in values:
                    return False
        return True

    def copy(self) -> "SearchSpace":
        return SearchSpace(
            model_types=list(self.model_types),
            feature_dims={m: list(ds) for m, ds in self.feature_dims.items()},
            hyper_dims={m: list(ds) for m, ds in self.hyper_dims.items()},
        )

    def to_dict(self) -> dict:
        return {
            "model_types": list(self.model_types),
            "feature_dims": {m: [d.to_dict() for d in ds] for m, ds in self.feature_dims.items()},
            "hyper_dims": {m: [d.to_dict() for d in ds] for m, ds in self.hyper_dims.items()},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SearchSpace":
        return cls(
            model_types=list(d["model_types"]),
            feature_dims={m: [Dimension.from_dict(x) for x in ds] for m, ds in d["feature_dims"].items()},
            hyper_dims={m: [Dimension.from_dict(x) for x in ds] for m, ds in d["hyper_dims"].items()},
        )


def _regression_feature_dims() -> List[Dimension]:
    return [
        Dimension("calendar", "categorical", choices=("none", "numerical", "categorical", "trigonometric")),
        Dimension("temp_lags", "categorical", choices=("none", "correlation")),
        Dimension("temp_top_ratio", "uniform", 0.0, 1.0, condition=("temp_lags", "correlation")),
        Dimension("interaction", "categorical", choices=("none", "all")),
        Dimension("load_lags", "categorical", choices=("none", "correlation", "fixed")),
        Dimension("load_top_ratio", "uniform", 0.0, 1.0, condition=("load_lags", "correlation")),
        Dimension("other_features", "categorical", choices=("none", "correlation")),
        Dimension("other_top_ratio", "uniform", 0.0, 1.0, condition=("other_features", "correlation")),
    ]


def _sequence_feature_dims() -> List[Dimension]:
    return [
        Dimension("calendar", "categorical", choices=("none", "numerical", "categorical", "trigonometric")),
        Dimension("temp_lags", "categorical", choices=("none", "correlation")),
        Dimension("temp_top_ratio", "uniform", 0.0, 1.0, condition=("temp_lags", "correlation")),
        Dimension("interaction", "categorical", choices=("none", "all")),
        Dimension("seq_frequency", "categorical", choices=(1, 2, 3, 4, 6, 12, 24)),
        Dimension("seq_length", "int", 1, 24, step=1),
        Dimension("other_features", "categorical", choices=("none", "correlation")),
        Dimension("other_top_ratio", "uniform", 0.0, 1.0, condition=("other_features", "correlation")),
    ]


_HYPER_TABLES: Dict[str, List[Dimension]] = {
    "linear": [
        Dimension("regularization", "categorical", choices=("none", "ridge")),
        Dimension("alpha", "loguniform", 1e-4, 1.0, condition=("regularization", "ridge")),
    ],
    "svr": [
        Dimension("C", "loguniform", 1e-3, 1e3),
        Dimension("gamma", "loguniform", 1e-3, 1e3),
    ],
    "mlp": [
        Dimension("hidden_layers", "int", 2, 5, step=1),
        Dimension("hidden_size", "logint", 16, 512),
        Dimension("learning_rate", "loguniform", 1e-4, 0.1),
        Dimension("dropout", "uniform", 0.0, 0.5),
    ],
    "gbt": [
        Dimension("n_estimators", "int", 10, 300, step=10),
        Dimension("max_depth", "int", 4, 16, step=2),
        Dimension("learning_rate", "loguniform", 1e-4, 0.1),
    ],
    "lstm": [
        Dimension("layers", "int", 1, 3, step=1),
        Dimension("hidden_size", "logint", 16, 512),
        Dimension("fc_size", "logint", 16, 512),
        Dimension("learning_rate", "loguniform", 1e-4, 0.1),
    ],
    "gru": [
        Dimension("layers", "int", 1, 3, step=1),
        Dimension("hidden_size", "logint", 16, 512),
        Dimension("fc_size", "logint", 16, 512),
        Dimension("learning_rate", "loguniform", 1e-4, 0.1),
    ],
    "cnn": [
        Dimension("layers", "int", 1, 3, step=1),
        Dimension("kernel_size", "int", 1, 5, step=1),
        Dimension("filters", "logint", 16, 128),
        Dimension("fc_size", "logint", 16, 512),
        Dimension("learning_rate", "loguniform", 1e-4, 0.1),
    ],
}

_SEQUENCE_TYPES = ("lstm", "gru", "cnn")


def default_search_space(full_schema: bool = False) -> SearchSpace:
    """The built-in space over the implemented model types. The full seven-type
    schema is opt-in and exists so space definitions round-trip."""
    types = list(_HYPER_TABLES) if full_schema else ["linear", "mlp", "gbt"]
    feature_dims = {
        m: (_sequence_feature_dims() if m in _SEQUENCE_TYPES else _regression_feature_dims())
        for m in types
    }
    hyper_dims = {m: list(_HYPER_TABLES[m]) for m in types}
    return SearchSpace(model_types=types, feature_dims=feature_dims, hyper_dims=hyper_dims)


def random_sample(space: SearchSpace, count: int, rng: np.random.Generator) -> List[Configuration]:
    """Uniform sampling: model type uniform over enabled types, each dimension
    per its scale."""
    if count < 1:
        raise SpaceError("count must be >= 1")
    return [space.sample_configuration(rng) for _ in range(count)]
