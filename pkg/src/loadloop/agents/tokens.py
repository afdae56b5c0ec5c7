"""Per-agent token accounting and cost reporting."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict


class TokenError(ValueError):
    pass


@dataclass
class TokenLedger:
    """Cumulative input/output token counters per agent, priced per million."""

    price_in_per_million: float = 2.50
    price_out_per_million: float = 10.00
    input_tokens: Dict[str, int] = field(default_factory=dict)
    output_tokens: Dict[str, int] = field(default_factory=dict)

    def record(self, agent_id: str, input_tokens: int, output_tokens: int) -> None:
        if input_tokens < 0 or output_tokens < 0:
            raise TokenError("token counts must be non-negative")
        self.input_tokens[agent_id] = self.input_tokens.get(agent_id, 0) + int(input_tokens)
        self.output_tokens[agent_id] = self.output_tokens.get(agent_id, 0) + int(output_tokens)

    @property
    def total_input(self) -> int:
        return sum(self.input_tokens.values())

    @property
    def total_output(self) -> int:
        return sum(self.output_tokens.values())

    def cost(self, input_tokens: int, output_tokens: int) -> float:
        return (
            input_tokens * self.price_in_per_million
            + output_tokens * self.price_out_per_million
        ) / 1_000_000.0

    def report(self) -> dict:
        """Counts, column percentages, and cost per agent plus totals."""
        total_in = self.total_input
        total_out = self.total_output
        agents = {}
        for agent_id in sorted(set(self.input_tokens) | set(self.output_tokens)):
            tin = self.input_tokens.get(agent_id, 0)
            tout = self.output_tokens.get(agent_id, 0)
            agents[agent_id] = {
                "input_tokens": tin,
                "output_tokens": tout,
                "input_pct": 100.0 * tin / total_in if total_in else 0.0,
                "output_pct": 100.0 * tout / total_out if total_out else 0.0,
                "cost": self.cost(tin, tout),
            }
        return {
            "price_per_million": {
                "input": self.price_in_per_million,
                "output": self.price_out_per_million,
            },
            "agents": agents,
            "total": {
                "input_tokens": total_in,
                "output_tokens": total_out,
                "input_pct": 100.0 if total_in else 0.0,
                "output_pct": 100.0 if total_out else 0.0,
                "cost": self.cost(total_in, total_out),
            },
        }

    def to_dict(self) -> dict:
        return self.report()
