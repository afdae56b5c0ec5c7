"""Human/agent steering directives and their application to a running search."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

from .space import Configuration, Dimension, SearchSpace, SpaceError

DIRECTIVE_KINDS = ("prune_space", "allocate", "inject")


class GuidanceError(ValueError):
    pass


@dataclass
class GuidanceDirective:
    kind: str
    exclude_model_types: List[str] = field(default_factory=list)
    restrict: Dict[str, Dict[str, dict]] = field(default_factory=dict)
    counts: Dict[str, int] = field(default_factory=dict)
    configs: List[dict] = field(default_factory=list)

    def validate(self) -> None:
        if self.kind not in DIRECTIVE_KINDS:
            raise GuidanceError(f"unknown directive kind {self.kind!r}")
        if self.kind == "allocate":
            if not self.counts:
                raise GuidanceError("allocate directive needs counts")
            for m, c in self.counts.items():
                if int(c) < 0:
                    raise GuidanceError(f"allocation for {m!r} must be non-negative")
        if self.kind == "inject":
            if not self.configs:
                raise GuidanceError("inject directive needs configurations")
            for cfg in self.configs:
                if "model_type" not in cfg:
                    raise GuidanceError("injected configurations must name a model_type")
        if self.kind == "prune_space" and not self.exclude_model_types and not self.restrict:
            raise GuidanceError("prune directive is empty")

    def to_dict(self) -> dict:
        d: dict = {"kind": self.kind}
        if self.exclude_model_types:
            d["exclude_model_types"] = list(self.exclude_model_types)
        if self.restrict:
            d["restrict"] = self.restrict
        if self.counts:
            d["counts"] = dict(self.counts)
        if self.configs:
            d["configs"] = list(self.configs)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "GuidanceDirective":
        directive = cls(
            kind=d.get("kind", ""),
            exclude_model_types=list(d.get("exclude_model_types", [])),
            restrict={m: dict(r) for m, r in d.get("restrict", {}).items()},
            counts={m: int(c) for m, c in d.get("counts", {}).items()},
            configs=list(d.get("configs", [])),
        )
        directive.validate()
        return directive


@dataclass
class GuidanceContext:
    """One-batch steering state produced by apply_guidance."""

    allocations: Dict[str, int] = field(default_factory=dict)
    injections: List[Configuration] = field(default_factory=list)

    @property
    def empty(self) -> bool:
        return not self.allocations and not self.injections


def _restricted_dimension(dim: Dimension, spec: dict) -> Dimension:
    """A copy of the dimension narrowed by the restriction payload."""
    if dim.kind == "categorical":
        choices = spec.get("choices")
        if choices is None:
            raise GuidanceError(f"dimension {dim.name!r} is categorical; restrict with choices")
        new = tuple(c for c in dim.choices if c in set(choices))
        if not new:
            raise GuidanceError(f"restriction empties categorical dimension {dim.name!r}")
        if set(choices) - set(dim.choices):
            raise GuidanceError(f"choices {set(choices) - set(dim.choices)} not in dimension {dim.name!r}")
        return Dimension(dim.name, dim.kind, choices=new, condition=dim.condition)
    low = float(spec.get("low", dim.low))
    high = float(spec.get("high", dim.high))
    if low < dim.low or high > dim.high:
        raise GuidanceError(
            f"restriction [{low}, {high}] widens dimension {dim.name!r} [{dim.low}, {dim.high}]"
        )
    if low > high:
        raise GuidanceError(f"restriction empties dimension {dim.name!r}")
    if dim.kind == "int":
        # snap inward onto the step grid
        low_k = math.ceil((low - dim.low) / dim.step)
        high_k = math.floor((high - dim.low) / dim.step)
        if low_k > high_k:
            raise GuidanceError(f"restriction leaves no grid points in {dim.name!r}")
        low = dim.low + low_k * dim.step
        high = dim.low + high_k * dim.step
        if low == high:
            # degenerate single-point grid is allowed for int dims
            return Dimension(dim.name, dim.kind, low, high, step=dim.step, condition=dim.condition)
    elif low == high:
        raise GuidanceError(f"restriction collapses dimension {dim.name!r} to a point")
    return Dimension(dim.name, dim.kind, low, high, step=dim.step, condition=dim.condition)


def _complete_or_reject_injection(
    cfg_dict: dict, original: SearchSpace
) -> Configuration:
    """Validate the named entries of a (possibly partial) injected config
    against the original space."""
    m = cfg_dict.get("model_type")
    if m not in original.model_types:
        raise GuidanceError(f"injected model type {m!r} outside the original space")
    for group in ("features", "hyperparams"):
        for name, value in cfg_dict.get(group, {}).items():
            grp, dim = original.dim_named(m, name)
            if grp != group:
                raise GuidanceError(f"dimension {name!r} belongs to {grp}, not {group}")
            if not dim.contains(value):
                raise GuidanceError(
                    f"injected value {value!r} for {name!r} outside the original space"
                )
    return Configuration(
        model_type=m,
        features=dict(cfg_dict.get("features", {})),
        hyperparams=dict(cfg_dict.get("hyperparams", {})),
    )


def apply_guidance(
    space: SearchSpace,
    ledger: Sequence,
    directives: Sequence[GuidanceDirective],
    original_space: Optional[SearchSpace] = None,
) -> tuple[SearchSpace, GuidanceContext]:
    """Apply steering directives: prunes shrink the space permanently, allocate
    and inject populate a context consumed by exactly one batch. All-or-nothing:
    an invalid directive leaves the space untouched."""
    original = original_space if original_space is not None else space
    context = GuidanceContext()
    pruned = space.copy()

    for directive in directives:
        directive.validate()
        if directive.kind == "prune_space":
            remaining = [m for m in pruned.model_types if m not in set(directive.exclude_model_types)]
            if not remaining:
                raise GuidanceError("prune would exclude every model type")
            for m in directive.exclude_model_types:
                if m not in space.model_types:
                    raise GuidanceError(f"cannot exclude unknown model type {m!r}")
            pruned.model_types = remaining
            for m, dim_specs in directive.restrict.items():
                if m not in pruned.model_types:
                    raise GuidanceError(f"restriction targets excluded or unknown type {m!r}")
                for name, spec in dim_specs.items():
                    group, dim = pruned.dim_named(m, name)
                    table = pruned.feature_dims if group == "features" else pruned.hyper_dims
                    dims = list(table[m])
                    idx = next(i for i, d in enumerate(dims) if d.name == name)
                    dims[idx] = _restricted_dimension(dims[idx], spec)
                    table[m] = dims
        elif directive.kind == "allocate":
            for m, count in directive.counts.items():
                if m not in pruned.model_types:
                    raise GuidanceError(f"allocation targets unavailable model type {m!r}")
                context.allocations[m] = context.allocations.get(m, 0) + int(count)
        elif directive.kind == "inject":
            for cfg_dict in directive.configs:
                context.injections.append(_complete_or_reject_injection(cfg_dict, original))

    return pruned, context
