"""Natural-language guidance interpretation and the model manager's default
exploration strategy."""

from __future__ import annotations

import json
import re
from typing import List, Optional, Sequence, Tuple

from ..optimizer.analysis import TrialSummary
from ..optimizer.guidance import GuidanceDirective, GuidanceError

STARVED_FRACTION = 0.10

PARSE_INSTRUCTIONS = (
    "Translate the user's steering request into a JSON array of directives. "
    'Allowed forms: {"kind": "prune_space", "exclude_model_types": [...], '
    '"restrict": {"<model>": {"<dimension>": {"low": x, "high": y} | {"choices": [...]}}}}, '
    '{"kind": "allocate", "counts": {"<model>": n}}, '
    '{"kind": "inject", "configs": [{"model_type": "<model>", "features": {...}, '
    '"hyperparams": {...}}]}. Respond with the JSON array only.'
)


def _extract_json_array(text: str) -> Optional[list]:
    """The first parseable JSON array in the completion text."""
    stripped = text.strip()
    candidates = [stripped]
    match = re.search(r"\[.*\]", stripped, re.DOTALL)
    if match:
        candidates.append(match.group(0))
    for cand in candidates:
        try:
            parsed = json.loads(cand)
        except json.JSONDecodeError:
            continue
        if isinstance(parsed, list):
            return parsed
    return None


def _validate(parsed: list) -> List[GuidanceDirective]:
    return [GuidanceDirective.from_dict(d) for d in parsed]


def parse_guidance(
    user_text: str,
    summary: TrialSummary,
    backend,
    agent_id: str = "task_manager",
) -> Tuple[List[GuidanceDirective], Optional[str]]:
    """Map free text onto canonical directives via the backend, with one repair
    round. Failures degrade to an empty list plus a clarification message."""
    if not user_text.strip():
        return [], None

    prompt = [
        {"role": "system", "content": PARSE_INSTRUCTIONS},
        {"role": "system", "content": "Current search state:\n" + summary.render_text()},
        {"role": "user", "content": user_text},
    ]
    last_error = "no JSON array found"
    for attempt in range(2):
        response = backend.complete(prompt, tools=None, agent_id=agent_id)
        parsed = _extract_json_array(response.text)
        if parsed is not None:
            try:
                return _validate(parsed), None
            except (GuidanceError, KeyError, TypeError, ValueError) as exc:
                last_error = str(exc)
        if attempt == 0:
            prompt.append({"role": "system", "content": f"Invalid directives ({last_error}); reply with a corrected JSON array only."})
    clarification = (
        "I could not turn that into a concrete search directive. You can exclude "
        "or prioritize model types, narrow a parameter range, or give an exact "
        "configuration to try."
    )
    return [], clarification


def default_strategy(
    summary: TrialSummary,
    enabled_types: Sequence[str],
    batch_size: int = 10,
) -> List[GuidanceDirective]:
    """Balancing fallback when the user stays silent: if progress is flat and
    some enabled model type holds under 10% of the trials, allocate one batch
    spread across the starved types; otherwise leave the optimizer free."""
    if summary.trend != "flat" or summary.total == 0:
        return []
    starved = [
        m
        for m in enabled_types
        if summary.counts_per_type.get(m, 0) < STARVED_FRACTION * summary.total
    ]
    if not starved:
        return []
    starved.sort(key=lambda m: (summary.counts_per_type.get(m, 0), m))
    base = batch_size // len(starved)
    remainder = batch_size - base * len(starved)
    counts = {}
    for i, m in enumerate(starved):
        share = base + (1 if i < remainder else 0)
        if share > 0:
            counts[m] = share
    if not counts:
        return []
    return [GuidanceDirective(kind="allocate", counts=counts)]
