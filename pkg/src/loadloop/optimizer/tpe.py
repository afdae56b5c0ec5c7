"""Tree-structured Parzen estimator over the hierarchical space.

Trials split into good and bad sets at a loss quantile; numeric dimensions get
Gaussian kernel densities (log-warped where the dimension is log scaled) and
categoricals get smoothed frequency tables. Proposals draw candidates from the
good density and keep the candidate maximizing the good/bad density ratio.
Model types are chosen by a categorical TPE with a proposal-probability floor
so no enabled type starves.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .guidance import GuidanceContext, GuidanceError
from .space import Configuration, Dimension, SearchSpace

GAMMA = 0.25
N_CANDIDATES = 24
BANDWIDTH_FLOOR_FRACTION = 0.01
CATEGORICAL_PRIOR_WEIGHT = 1.0
MODEL_PROB_FLOOR = 0.05


_ERF = np.vectorize(math.erf)


def _phi(z: np.ndarray) -> np.ndarray:
    """Standard normal CDF."""
    return 0.5 * (1.0 + _ERF(z / math.sqrt(2.0)))


@dataclass
class NumericDensity:
    """Truncated-Gaussian KDE in warped space with one wide prior component.

    Two asymmetries are deliberately removed. Kernels renormalize to their
    in-range mass, otherwise the good/bad ratio spikes at the bounds and the
    search collapses onto a boundary atom. And the prior component must carry
    the same weight fraction in the good and bad densities, otherwise empty
    regions score ratio (n_bad+1)/(n_good+1) > 1 and the acquisition degrades
    into uniform exploration.
    """

    mids: np.ndarray
    widths: np.ndarray
    weights: np.ndarray
    masses: np.ndarray  # per-component in-range probability mass
    lo: float
    hi: float

    @property
    def prior_fraction(self) -> float:
        return float(self.weights[-1])

    @classmethod
    def fit(
        cls,
        values: Sequence[float],
        lo: float,
        hi: float,
        prior_fraction: Optional[float] = None,
    ) -> "NumericDensity":
        # one kernel per distinct value: repeated proposals of one point must
        # not pile up mass and freeze the search on a plateau
        pts = np.unique(np.asarray(values, dtype=float))
        span = max(hi - lo, 1e-12)
        if pts.size > 1:
            scott = float(np.std(pts)) * pts.size ** (-0.2)
        else:
            scott = span
        # span/(n+1) guards against duplicate observations collapsing the
        # sample std; the 1% floor is the hard minimum
        bw = max(scott, span / (pts.size + 1), BANDWIDTH_FLOOR_FRACTION * span, 1e-12)
        mids = np.append(pts, (lo + hi) / 2.0)
        widths = np.append(np.full(pts.shape, bw), span)
        if prior_fraction is None:
            prior_fraction = 1.0 / (pts.size + 1)
        if pts.size:
            weights = np.append(
                np.full(pts.shape, (1.0 - prior_fraction) / pts.size), prior_fraction
            )
        else:
            weights = np.array([1.0])
        masses = _phi((hi - mids) / widths) - _phi((lo - mids) / widths)
        masses = np.maximum(masses, 1e-12)
        return cls(mids=mids, widths=widths, weights=weights, masses=masses, lo=lo, hi=hi)

    def pdf(self, x: float) -> float:
        z = (x - self.mids) / self.widths
        vals = np.exp(-0.5 * z * z) / (self.widths * math.sqrt(2 * math.pi))
        return float(np.sum(self.weights * vals / self.masses))

    def sample(self, rng: np.random.Generator) -> float:
        i = int(rng.choice(self.mids.size, p=self.weights))
        for _ in range(64):
            x = float(rng.normal(self.mids[i], self.widths[i]))
            if self.lo <= x <= self.hi:
                return x
        return float(min(max(self.mids[i], self.lo), self.hi))


@dataclass
class CategoricalDensity:
    probs: Dict[Any, float]

    @classmethod
    def fit(cls, values: Sequence[Any], choices: Sequence[Any]) -> "CategoricalDensity":
        k = len(choices)
        n = len(values)
        w = CATEGORICAL_PRIOR_WEIGHT
        probs = {
            c: (sum(1 for v in values if v == c) + w / k) / (n + w) for c in choices
        }
        return cls(probs=probs)

    def pdf(self, value: Any) -> float:
        return self.probs.get(value, 0.0)

    def sample(self, rng: np.random.Generator, allowed: Sequence[Any]) -> Any:
        weights = np.array([self.probs.get(c, 0.0) for c in allowed], dtype=float)
        if weights.sum() <= 0:
            weights = np.ones(len(allowed))
        weights = weights / weights.sum()
        return allowed[int(rng.choice(len(allowed), p=weights))]


@dataclass
class DimDensities:
    good: Any
    bad: Any


@dataclass
class SurrogateState:
    """Per-model-type TPE state plus the model-type choice table."""

    gamma: float
    model_probs: Dict[str, float]
    per_type: Dict[str, Dict[str, DimDensities]] = field(default_factory=dict)

    def has_type(self, model_type: str) -> bool:
        return model_type in self.per_type


def _good_bad_split(records: List, gamma: float) -> Tuple[List, List]:
    """Split completed trials at the gamma quantile; failed trials go bad."""
    finite = [r for r in records if not r.failed]
    failed = [r for r in records if r.failed]
    n = len(records)
    n_good = max(1, math.ceil(gamma * n))
    n_good = min(n_good, len(finite))
    ranked = sorted(finite, key=lambda r: (r.loss, r.trial_index))
    good = ranked[:n_good]
    bad = ranked[n_good:] + failed
    return good, bad


def _dim_values(records: List, group: str, name: str) -> List[Any]:
    out = []
    for r in records:
        values = r.config.values_for(group)
        if name in values:
            out.append(values[name])
    return out


def fit_surrogate(
    ledger: Sequence, space: SearchSpace, gamma: float = GAMMA
) -> SurrogateState:
    """Build densities from the trial ledger. Types with fewer than 2 completed
    trials get no densities and fall back to prior sampling."""
    records = list(ledger)
    state = SurrogateState(gamma=gamma, model_probs={})

    # model-type table from the overall good/bad partition
    if len(records) >= 2:
        good, bad = _good_bad_split(records, gamma)
        types = space.model_types
        good_d = CategoricalDensity.fit([r.config.model_type for r in good], types)
        bad_d = CategoricalDensity.fit([r.config.model_type for r in bad], types)
        ratios = {m: good_d.pdf(m) / max(bad_d.pdf(m), 1e-12) for m in types}
        total = sum(ratios.values())
        probs = {m: ratios[m] / total for m in types}
        floored = {m: max(p, MODEL_PROB_FLOOR) for m, p in probs.items()}
        z = sum(floored.values())
        state.model_probs = {m: floored[m] / z for m in types}
    else:
        state.model_probs = {m: 1.0 / len(space.model_types) for m in space.model_types}

    for m in space.model_types:
        records_m = [r for r in records if r.config.model_type == m]
        if len(records_m) < 2 or not any(not r.failed for r in records_m):
            continue
        good, bad = _good_bad_split(records_m, gamma)
        dims_table: Dict[str, DimDensities] = {}
        for group in ("features", "hyperparams"):
            for dim in space.dims(m, group):
                good_vals = _dim_values(good, group, dim.name)
                bad_vals = _dim_values(bad, group, dim.name)
                if dim.kind == "categorical":
                    dims_table[dim.name] = DimDensities(
                        good=CategoricalDensity.fit(good_vals, dim.choices),
                        bad=CategoricalDensity.fit(bad_vals, dim.choices),
                    )
                else:
                    lo, hi = dim.warped_bounds()
                    good_d = NumericDensity.fit([dim.warp(v) for v in good_vals], lo, hi)
                    bad_d = NumericDensity.fit(
                        [dim.warp(v) for v in bad_vals], lo, hi,
                        prior_fraction=good_d.prior_fraction,
                    )
                    dims_table[dim.name] = DimDensities(good=good_d, bad=bad_d)
        state.per_type[m] = dims_table
    return state


def _sample_value(
    dim: Dimension, densities: Optional[DimDensities], rng: np.random.Generator
) -> Any:
    """One draw from the dimension's good density (prior when none exists)."""
    if densities is None:
        return dim.sample(rng)
    if dim.kind == "categorical":
        return densities.good.sample(rng, dim.choices)
    lo, hi = dim.warped_bounds()
    x = min(max(densities.good.sample(rng), lo), hi)
    return dim.unwarp(x)


def _log_ratio(dim: Dimension, densities: Optional[DimDensities], value: Any) -> float:
    if densities is None:
        return 0.0
    if dim.kind == "categorical":
        good = densities.good.pdf(value)
        bad = densities.bad.pdf(value)
    else:
        w = dim.warp(value)
        good = densities.good.pdf(w)
        bad = densities.bad.pdf(w)
    return math.log(max(good, 1e-300)) - math.log(max(bad, 1e-300))


def _propose_dim_value(
    dim: Dimension,
    densities: Optional[DimDensities],
    rng: np.random.Generator,
    n_candidates: int = N_CANDIDATES,
) -> Any:
    """Best single-dimension value by marginal ratio (injection completion)."""
    best_value, best_score = None, -math.inf
    for _ in range(n_candidates):
        value = _sample_value(dim, densities, rng)
        score = _log_ratio(dim, densities, value)
        if score > best_score:
            best_value, best_score = value, score
    return best_value


def _draw_candidate(
    space: SearchSpace,
    model_type: str,
    dims_table: Dict[str, DimDensities],
    rng: np.random.Generator,
) -> Tuple[Configuration, float]:
    """One full candidate configuration and its joint log density ratio."""
    groups: Dict[str, Dict[str, Any]] = {"features": {}, "hyperparams": {}}
    score = 0.0
    for group in ("features", "hyperparams"):
        values = groups[group]
        for dim in space.dims(model_type, group):
            if dim.condition is not None:
                parent, required = dim.condition
                if values.get(parent) != required:
                    continue
            value = _sample_value(dim, dims_table.get(dim.name), rng)
            values[dim.name] = value
            score += _log_ratio(dim, dims_table.get(dim.name), value)
    config = Configuration(
        model_type=model_type, features=groups["features"], hyperparams=groups["hyperparams"]
    )
    return config, score


def propose_configuration(
    space: SearchSpace,
    model_type: str,
    state: SurrogateState,
    rng: np.random.Generator,
    n_candidates: int = N_CANDIDATES,
) -> Configuration:
    """Best of n_candidates full-configuration draws by joint density ratio."""
    dims_table = state.per_type.get(model_type, {})
    best_config: Optional[Configuration] = None
    best_score = -math.inf
    for _ in range(n_candidates):
        config, score = _draw_candidate(space, model_type, dims_table, rng)
        if score > best_score:
            best_config, best_score = config, score
    return best_config


def _complete_injection(
    space: SearchSpace,
    partial: Configuration,
    state: SurrogateState,
    rng: np.random.Generator,
) -> Configuration:
    """Fill unspecified dimensions of an injected config by TPE proposal,
    forcing parent values consistent with any specified children."""
    m = partial.model_type
    groups: Dict[str, Dict[str, Any]] = {
        "features": dict(partial.features),
        "hyperparams": dict(partial.hyperparams),
    }
    dims_table = state.per_type.get(m, {})
    for group in ("features", "hyperparams"):
        values = groups[group]
        dims = space.dims(m, group)
        # specified children pin their parents
        for dim in dims:
            if dim.name in values and dim.condition is not None:
                parent, required = dim.condition
                if values.get(parent, required) != required:
                    raise GuidanceError(
                        f"injected {dim.name!r} conflicts with {parent!r}={values[parent]!r}"
                    )
                values.setdefault(parent, required)
        for dim in dims:
            if dim.condition is not None:
                parent, required = dim.condition
                if values.get(parent) != required:
                    values.pop(dim.name, None)
                    continue
            if dim.name not in values:
                values[dim.name] = _propose_dim_value(dim, dims_table.get(dim.name), rng)
    return Configuration(model_type=m, features=groups["features"], hyperparams=groups["hyperparams"])


def propose_batch(
    space: SearchSpace,
    ledger: Sequence,
    context: GuidanceContext,
    batch_size: int,
    rng: np.random.Generator,
    state: Optional[SurrogateState] = None,
    n_candidates: int = N_CANDIDATES,
) -> List[Tuple[Configuration, str]]:
    """B (configuration, origin) proposals: injections verbatim first, then
    allocation quotas, then free TPE slots."""
    if batch_size < len(context.injections):
        raise GuidanceError(
            f"batch size {batch_size} cannot hold {len(context.injections)} injected configs"
        )
    if state is None:
        state = fit_surrogate(ledger, space)

    out: List[Tuple[Configuration, str]] = []
    for partial in context.injections:
        full = _complete_injection(space, partial, state, rng)
        out.append((full, "user_injected"))

    remaining = batch_size - len(out)
    quota_types: List[str] = []
    for m in sorted(context.allocations):
        quota_types.extend([m] * context.allocations[m])
    quota_types = quota_types[:remaining]

    for m in quota_types:
        out.append((propose_configuration(space, m, state, rng, n_candidates), "acquisition"))

    types = space.model_types
    probs = np.array([state.model_probs.get(m, 0.0) for m in types], dtype=float)
    if probs.sum() <= 0:
        probs = np.ones(len(types))
    probs = probs / probs.sum()
    while len(out) < batch_size:
        m = types[int(rng.choice(len(types), p=probs))]
        out.append((propose_configuration(space, m, state, rng, n_candidates), "acquisition"))
    return out
