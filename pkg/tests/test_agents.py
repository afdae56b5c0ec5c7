import json
import os
import urllib.error

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from loadloop.agents import (
    Agent,
    AgentMessage,
    AgentProfile,
    BackendError,
    BackendResponse,
    MessagePool,
    ScriptRule,
    ScriptedBackend,
    TokenLedger,
    ToolCall,
    ToolDescriptor,
    ToolParam,
    assemble_prompt,
    build_agent,
    default_strategy,
    estimate_tokens,
    parse_guidance,
    step,
)
from loadloop.agents.bus import REGISTERED_TOPICS, BusError
from loadloop.agents.backend import HTTPChatBackend
from loadloop.optimizer.analysis import TrialSummary

GOLDEN = os.path.join(os.path.dirname(__file__), "fixtures", "golden_prompt.txt")


def fixture_profile():
    return AgentProfile(
        agent_id="fixture_agent",
        profile_text="You are a fixture agent used for prompt golden-file tests.",
        workflow_text="Stage 1: read your memory. Stage 2: answer deterministically.",
        action_schema=(
            ToolDescriptor(
                "lookup",
                "Look a value up by key.",
                (ToolParam("key"), ToolParam("strict", "boolean", required=False)),
            ),
        ),
        subscriptions=("task.status",),
        home_topic="task.status",
        output_topic="user.io",
    )


def msg(sender, topics, role, content):
    return AgentMessage(sender=sender, topics=topics, role_marker=role, content=content)


class TestMessagePool:
    def test_register_and_deliver(self):
        pool = MessagePool()
        pool.register("a", ("task.status",))
        pool.register("sender", ("user.io",))
        count = pool.publish(msg("sender", ("task.status",), "agent", "hello"))
        assert count == 1
        assert [m.content for m in pool.drain("a")] == ["hello"]

    def test_non_matching_topic_not_delivered(self):
        pool = MessagePool()
        pool.register("a", ("task.status",))
        pool.register("sender", ("user.io",))
        pool.publish(msg("sender", ("user.io",), "agent", "x"))
        assert not pool.has_pending("a")

    def test_duplicate_registration_rejected(self):
        pool = MessagePool()
        pool.register("a", ("task.status",))
        with pytest.raises(BusError):
            pool.register("a", ("user.io",))

    def test_unknown_topic_rejected(self):
        pool = MessagePool()
        with pytest.raises(BusError):
            pool.register("a", ("not.a.topic",))

    def test_unregistered_sender_rejected(self):
        pool = MessagePool()
        with pytest.raises(BusError):
            pool.publish(msg("ghost", ("task.status",), "agent", "x"))

    def test_two_subscribers_two_deliveries(self):
        pool = MessagePool()
        pool.register("a", ("task.status",))
        pool.register("b", ("task.status",))
        assert pool.publish(msg("a", ("task.status",), "agent", "x")) == 2

    def test_multi_topic_message_delivered_once(self):
        pool = MessagePool()
        pool.register("a", ("task.status", "user.io"))
        assert pool.publish(msg("a", ("task.status", "user.io"), "agent", "x")) == 1
        assert len(pool.drain("a")) == 1

    def test_zero_subscribers_warns_and_retains(self):
        events = []
        pool = MessagePool(event_sink=lambda k, p: events.append((k, p)))
        pool.register("a", ("user.io",))
        count = pool.publish(msg("a", ("model.execute",), "agent", "orphan"))
        assert count == 0
        assert len(pool.messages) == 1
        assert events and events[0][0] == "warning"

    @given(
        st.lists(
            st.tuples(
                st.integers(0, 4),  # sender index
                st.sets(st.sampled_from(REGISTERED_TOPICS), min_size=1, max_size=3),
            ),
            min_size=1,
            max_size=200,
        ),
        st.lists(st.sets(st.sampled_from(REGISTERED_TOPICS), min_size=1, max_size=4), min_size=5, max_size=5),
    )
    @settings(max_examples=30, deadline=None)
    def test_exactly_once_and_ordered(self, schedule, subscriptions):
        pool = MessagePool()
        agents = [f"agent{i}" for i in range(5)]
        for agent_id, subs in zip(agents, subscriptions):
            pool.register(agent_id, tuple(subs))
        delivered = {a: [] for a in agents}
        for sender_idx, topics in schedule:
            pool.publish(msg(agents[sender_idx], tuple(topics), "agent", "m"))
        for a in agents:
            delivered[a] = pool.drain(a)
        for agent_id, subs in zip(agents, subscriptions):
            expected = [
                m.id for m in pool.messages if set(m.topics) & set(subs)
            ]
            got = [m.id for m in delivered[agent_id]]
            assert got == expected          # exactly-once + pool ordering
            assert len(set(got)) == len(got)  # no duplicates


class TestPrompts:
    def test_empty_memory_prompt_is_sections_only(self):
        text = assemble_prompt(fixture_profile(), [])
        assert text.endswith("# Message history\n(empty)")
        assert "# Profile" in text and "# Workflow" in text and "# Actions" in text

    def test_prompt_deterministic(self):
        memory = [msg("u", ("user.io",), "user", "hi")]
        assert assemble_prompt(fixture_profile(), memory) == assemble_prompt(fixture_profile(), memory)

    def test_golden_file(self):
        memory = [
            msg("user", ("user.io",), "user", "please look up alpha"),
            msg("fixture_agent", ("task.status",), "tool", 'lookup -> {"value": 41}'),
            msg("other_agent", ("task.status",), "agent", "status nominal"),
        ]
        text = assemble_prompt(fixture_profile(), memory)
        with open(GOLDEN) as fh:
            assert text == fh.read()


class TestStep:
    def make_pool_and_agent(self, handlers=None, responses=None):
        pool = MessagePool()
        profile = AgentProfile(
            agent_id="worker",
            profile_text="p",
            workflow_text="w",
            action_schema=(ToolDescriptor("do_thing", "does the thing", (ToolParam("x"),)),),
            subscriptions=("model.execute",),
            home_topic="model.execute",
            output_topic="task.status",
        )
        agent = Agent(profile, handlers or {"do_thing": lambda args: {"ok": args["x"]}})
        pool.register("worker", profile.subscriptions)
        pool.register("boss", ("task.status",))
        return pool, agent

    def test_valid_tool_call_dispatches_once(self):
        pool, agent = self.make_pool_and_agent()
        backend = ScriptedBackend([
            ScriptRule("worker", "run it", tool_calls=(ToolCall("do_thing", {"x": 7}),)),
        ])
        pool.publish(msg("boss", ("model.execute",), "agent", "run it"))
        published = step(agent, backend, pool)
        tool_msgs = [m for m in published if m.role_marker == "tool"]
        assert len(tool_msgs) == 1
        assert '"ok": 7' in tool_msgs[0].content

    def test_unknown_tool_produces_error_message(self):
        pool, agent = self.make_pool_and_agent()
        backend = ScriptedBackend([
            ScriptRule("worker", "run it", tool_calls=(ToolCall("not_a_tool", {}),)),
        ])
        pool.publish(msg("boss", ("model.execute",), "agent", "run it"))
        published = step(agent, backend, pool)
        assert any("unknown tool" in m.content for m in published)

    def test_handler_exception_becomes_tool_error(self):
        def boom(args):
            raise ValueError("bad arguments")

        pool, agent = self.make_pool_and_agent(handlers={"do_thing": boom})
        backend = ScriptedBackend([
            ScriptRule("worker", "run it", tool_calls=(ToolCall("do_thing", {"x": 1}),)),
        ])
        pool.publish(msg("boss", ("model.execute",), "agent", "run it"))
        published = step(agent, backend, pool)
        assert any("bad arguments" in m.content for m in published)

    def test_backend_failure_publishes_system_error(self):
        class FailingBackend:
            def complete(self, messages, tools=None, agent_id=None):
                raise BackendError("offline after 3 attempts")

        pool, agent = self.make_pool_and_agent()
        pool.register("watcher", ("system.error",))
        pool.publish(msg("boss", ("model.execute",), "agent", "run it"))
        step(agent, FailingBackend(), pool)
        errors = pool.drain("watcher")
        assert len(errors) == 1
        assert "offline" in errors[0].content

    def test_free_text_goes_to_output_topic(self):
        pool, agent = self.make_pool_and_agent()
        backend = ScriptedBackend([ScriptRule("worker", "run it", text="done and dusted")])
        pool.publish(msg("boss", ("model.execute",), "agent", "run it"))
        step(agent, backend, pool)
        boss_inbox = pool.drain("boss")
        assert [m.content for m in boss_inbox] == ["done and dusted"]

    def test_token_usage_recorded(self):
        pool, agent = self.make_pool_and_agent()
        ledger = TokenLedger()
        backend = ScriptedBackend([ScriptRule("worker", "run it", text="ok")])
        pool.publish(msg("boss", ("model.execute",), "agent", "run it"))
        step(agent, backend, pool, token_ledger=ledger)
        assert ledger.input_tokens["worker"] > 0
        assert ledger.output_tokens["worker"] > 0

    def test_memory_cap_preserves_preamble(self):
        pool, agent = self.make_pool_and_agent()
        first = msg("boss", ("model.execute",), "agent", "THE PREAMBLE")
        agent.remember([first])
        agent.remember([msg("boss", ("model.execute",), "agent", f"m{i}") for i in range(400)])
        assert len(agent.memory) == 200
        assert agent.memory[0].content == "THE PREAMBLE"
        assert agent.memory[-1].content == "m399"


class TestHttpBackend:
    def make_backend(self, **kw):
        return HTTPChatBackend(base_url="http://fake.test/v1", model="m", api_key="k", backoff=0.0, **kw)

    def test_retries_then_succeeds(self, monkeypatch):
        backend = self.make_backend()
        calls = {"n": 0}

        def fake_request(payload):
            calls["n"] += 1
            if calls["n"] < 3:
                raise urllib.error.URLError("down")
            return {
                "choices": [{"message": {"content": "hi", "tool_calls": [
                    {"function": {"name": "t", "arguments": '{"a": 1}'}}
                ]}}],
                "usage": {"prompt_tokens": 11, "completion_tokens": 3},
            }

        monkeypatch.setattr(backend, "_request_once", fake_request)
        resp = backend.complete([{"role": "user", "content": "x"}])
        assert calls["n"] == 3
        assert resp.text == "hi"
        assert resp.tool_calls == [ToolCall("t", {"a": 1})]
        assert (resp.prompt_tokens, resp.completion_tokens) == (11, 3)

    def test_three_failures_raise(self, monkeypatch):
        backend = self.make_backend()

        def always_down(payload):
            raise urllib.error.URLError("down")

        monkeypatch.setattr(backend, "_request_once", always_down)
        with pytest.raises(BackendError, match="3 attempts"):
            backend.complete([{"role": "user", "content": "x"}])

    def test_requires_configuration(self, monkeypatch):
        monkeypatch.delenv("LOADLOOP_LLM_BASE_URL", raising=False)
        monkeypatch.delenv("LOADLOOP_LLM_MODEL", raising=False)
        with pytest.raises(BackendError):
            HTTPChatBackend()


def make_summary(counts, trend="flat", total=None):
    total = total if total is not None else sum(counts.values())
    return TrialSummary(
        total=total,
        failed=0,
        counts_per_type=counts,
        best_per_type={},
        best_overall={"loss": 1.0, "trial_index": 0, "config": {"model_type": "linear"}} if total else None,
        trend=trend,
    )


class TestParseGuidance:
    def scripted(self):
        return ScriptedBackend([
            ScriptRule(
                None,
                "stop exploring gbt",
                text='[{"kind": "prune_space", "exclude_model_types": ["gbt"]}]',
            ),
            ScriptRule(
                None,
                "try mlp with learning rate 0.001",
                text='[{"kind": "inject", "configs": [{"model_type": "mlp", "hyperparams": {"learning_rate": 0.001}}]}]',
            ),
            ScriptRule(None, "gibberish", text="I cannot help with that."),
        ])

    def test_prune_mapping(self):
        directives, clarification = parse_guidance(
            "stop exploring gbt", make_summary({"gbt": 5}), self.scripted()
        )
        assert clarification is None
        assert len(directives) == 1
        assert directives[0].kind == "prune_space"
        assert directives[0].exclude_model_types == ["gbt"]

    def test_inject_mapping(self):
        directives, _ = parse_guidance(
            "try mlp with learning rate 0.001", make_summary({"mlp": 3}), self.scripted()
        )
        assert directives[0].kind == "inject"
        assert directives[0].configs[0]["hyperparams"]["learning_rate"] == 0.001

    def test_empty_input(self):
        directives, clarification = parse_guidance("", make_summary({}), self.scripted())
        assert directives == [] and clarification is None

    def test_unparseable_degrades_to_clarification(self):
        directives, clarification = parse_guidance(
            "gibberish", make_summary({"mlp": 1}), self.scripted()
        )
        assert directives == []
        assert clarification is not None

    def test_repair_round_fixes_invalid_payload(self):
        # rules consume in order: the first (invalid) completion is used once,
        # the repair re-prompt then gets the corrected payload
        backend = ScriptedBackend([
            ScriptRule(None, "prioritize mlp", text='[{"kind": "allocate"}]'),  # invalid: no counts
            ScriptRule(None, "prioritize mlp", text='[{"kind": "allocate", "counts": {"mlp": 5}}]'),
        ])
        directives, clarification = parse_guidance("prioritize mlp", make_summary({"mlp": 2}), backend)
        assert clarification is None
        assert directives[0].counts == {"mlp": 5}


class TestDefaultStrategy:
    def test_starved_type_gets_the_batch(self):
        summary = make_summary({"linear": 50, "mlp": 2, "gbt": 48}, trend="flat")
        directives = default_strategy(summary, ["linear", "mlp", "gbt"], batch_size=10)
        assert len(directives) == 1
        assert directives[0].counts == {"mlp": 10}

    def test_balanced_counts_do_nothing(self):
        summary = make_summary({"linear": 30, "mlp": 35, "gbt": 35}, trend="flat")
        assert default_strategy(summary, ["linear", "mlp", "gbt"], 10) == []

    def test_improving_trend_does_nothing(self):
        summary = make_summary({"linear": 90, "mlp": 1, "gbt": 9}, trend="improving")
        assert default_strategy(summary, ["linear", "mlp", "gbt"], 10) == []

    def test_two_starved_types_split_the_batch(self):
        summary = make_summary({"linear": 90, "mlp": 2, "gbt": 3}, trend="flat")
        directives = default_strategy(summary, ["linear", "mlp", "gbt"], batch_size=10)
        assert directives[0].counts == {"mlp": 5, "gbt": 5}


class TestTokenLedger:
    def test_paper_totals_cost(self):
        ledger = TokenLedger(price_in_per_million=2.50, price_out_per_million=10.00)
        ledger.record("task_manager", 95_183, 4_452)
        ledger.record("preparation_assistant", 20_761, 655)
        ledger.record("model_manager", 38_665, 14_267)
        ledger.record("model_developer", 28_890, 4_200)
        ledger.record("deployment_operator", 18_035, 1_158)
        report = ledger.report()
        assert report["total"]["input_tokens"] == 201_534
        assert report["total"]["output_tokens"] == 24_732
        assert report["total"]["cost"] == pytest.approx(0.751, abs=0.001)

    def test_zero_usage_zero_cost(self):
        assert TokenLedger().report()["total"]["cost"] == 0.0

    def test_percentages_sum_to_hundred(self):
        ledger = TokenLedger()
        ledger.record("a", 100, 7)
        ledger.record("b", 250, 13)
        report = ledger.report()
        assert sum(v["input_pct"] for v in report["agents"].values()) == pytest.approx(100, abs=0.1)
        assert sum(v["output_pct"] for v in report["agents"].values()) == pytest.approx(100, abs=0.1)

    def test_totals_equal_sum_of_rows(self):
        ledger = TokenLedger()
        for i in range(7):
            ledger.record(f"agent{i % 3}", i * 11, i * 3)
        report = ledger.report()
        assert report["total"]["input_tokens"] == sum(
            v["input_tokens"] for v in report["agents"].values()
        )

    def test_negative_rejected(self):
        with pytest.raises(Exception):
            TokenLedger().record("a", -1, 0)

    def test_estimate_tokens(self):
        assert estimate_tokens("one two three") == 4  # 3 words * 4/3


class TestRoles:
    def test_five_agents_register_on_a_pool(self):
        from loadloop.agents.roles import AGENT_IDS, PROFILE_BUILDERS

        pool = MessagePool()
        for agent_id in AGENT_IDS:
            profile = PROFILE_BUILDERS[agent_id]()
            pool.register(agent_id, profile.subscriptions)
            assert profile.home_topic in profile.subscriptions
        assert len(pool.subscriptions) == 5

    def test_profiles_validate_against_stub_handlers(self):
        for agent_id in ("task_manager", "model_developer"):
            agent = build_agent(agent_id)
            assert agent.agent_id == agent_id
