"""Agent specs, tool policy enforcement, and the turn loop."""

from __future__ import annotations

import itertools

import pytest

from coplan.agents import (
    ALL_TOOL_NAMES,
    ALLOWED_TOOLS,
    AgentRole,
    PromptPack,
    ToolHost,
    TurnMeta,
    assemble_context,
    build_agent_specs,
    enforce_tool_policy,
    run_agent_turn,
)
from coplan.backend import ChatResponse, Fixture, ScriptedBackend, ToolCall
from coplan.errors import PolicyViolation, ProtocolTimeout
from coplan.memo import NeedOrigin, NeedsMemo, WantStatus
from coplan.protocol import ControlToken


@pytest.fixture(scope="module")
def specs():
    return build_agent_specs(PromptPack.default())


class FakeSolutionStore:
    def __init__(self):
        self.body: str | None = None
        self.writes = 0

    def load_body(self):
        return self.body

    def write_body(self, body: str) -> dict:
        self.body = body
        self.writes += 1
        return {"ok": True, "length": len(body)}


def scripted(role: AgentRole, responses: list[ChatResponse], session="t") -> ScriptedBackend:
    return ScriptedBackend(
        [
            Fixture(session=session, role=role.value, call=i, request_digest="", response=r)
            for i, r in enumerate(responses)
        ]
    )


def meta(role: AgentRole, session="t") -> TurnMeta:
    counter = itertools.count()
    return TurnMeta(session=session, role=role, counter=lambda: next(counter))


def text(content: str) -> ChatResponse:
    return ChatResponse(text=content)


def tools(*calls: tuple[str, dict]) -> ChatResponse:
    return ChatResponse(tool_calls=[ToolCall(name=n, args=a) for n, a in calls])


class TestPolicyMatrix:
    def test_matrix_matches_declared_allow_lists(self):
        expected = {
            AgentRole.INQUIRY: {"fill_need_slot"},
            AgentRole.MILESTONE: {"get_all_needs", "load_solution"},
            AgentRole.NEEDS_DISCOVERY: {"add_need_slot", "get_all_needs"},
            AgentRole.RANKING: {"get_clarify_needs"},
            AgentRole.SOLUTION_CRAFT: {"get_user_want_needs", "write_solution"},
        }
        args_for = {
            "fill_need_slot": {"id": "000", "need": "x", "user_want": True},
            "add_need_slot": {"need": "x", "clarify": False, "user_want": True},
            "get_all_needs": {},
            "get_clarify_needs": {},
            "get_user_want_needs": {},
            "load_solution": {},
            "write_solution": {"solution": "x"},
        }
        for role, tool_name in itertools.product(AgentRole, sorted(ALL_TOOL_NAMES)):
            verdict = enforce_tool_policy(role, ToolCall(name=tool_name, args=args_for[tool_name]))
            if tool_name in expected[role]:
                assert verdict is None, (role, tool_name, verdict)
            else:
                assert verdict is not None, (role, tool_name)
        assert {r: set(v) for r, v in ALLOWED_TOOLS.items()} == expected

    def test_unknown_tool_and_bad_args(self):
        assert enforce_tool_policy(AgentRole.INQUIRY, ToolCall(name="rm_rf", args={})) is not None
        missing = ToolCall(name="fill_need_slot", args={"id": "000"})
        assert "missing required" in enforce_tool_policy(AgentRole.INQUIRY, missing)
        wrong_type = ToolCall(name="fill_need_slot", args={"id": 3, "need": "x", "user_want": True})
        assert "wrong type" in enforce_tool_policy(AgentRole.INQUIRY, wrong_type)
        extra = ToolCall(name="get_all_needs", args={"verbose": True})
        assert "unexpected argument" in enforce_tool_policy(AgentRole.MILESTONE, extra)


class TestAssembleContext:
    def test_fresh_session_has_system_plus_relay(self, specs):
        transcript = [{"source": "user", "text": "Plan a 5-day trip to Hawaii"}]
        messages = assemble_context(specs[AgentRole.MILESTONE], transcript)
        assert len(messages) == 2
        assert messages[0]["role"] == "system"
        assert messages[1] == {"role": "user", "content": "Plan a 5-day trip to Hawaii"}

    def test_every_role_context_starts_with_team_intro(self, specs):
        intro_head = PromptPack.default().team_intro[:40]
        for role in AgentRole:
            messages = assemble_context(specs[role], [])
            assert messages[0]["content"].startswith(intro_head)

    def test_agent_messages_are_attributed_and_directive_is_last(self, specs):
        transcript = [
            {"source": "user", "text": "hi"},
            {"source": "Milestone", "text": "Next milestone: lodging\n[MilestoneEnd]"},
        ]
        messages = assemble_context(
            specs[AgentRole.NEEDS_DISCOVERY], transcript, directive="Focus on lodging."
        )
        assert messages[-1] == {"role": "system", "content": "Focus on lodging."}
        assert messages[-2]["content"].startswith("[Milestone] ")


class TestRunAgentTurn:
    def test_solution_craft_happy_path(self, specs):
        memo = NeedsMemo()
        memo.add_need_slot(
            "The destination is Hawaii.",
            clarify=False,
            want=WantStatus.WANTED,
            origin=NeedOrigin.USER_EXPLICIT,
        )
        store = FakeSolutionStore()
        host = ToolHost(memo, store)
        role = AgentRole.SOLUTION_CRAFT
        backend = scripted(
            role,
            [
                tools(("get_user_want_needs", {})),
                tools(("write_solution", {"solution": "Plan. (Need ID: 000)"})),
                text("Your plan is saved!\n[SolutionEnd]"),
            ],
        )
        result = run_agent_turn(specs[role], [], backend, host, meta(role))
        assert result.tool_names() == ["get_user_want_needs", "write_solution"]
        assert result.tokens == [ControlToken.SOLUTION_END]
        assert result.retries_used == 0
        assert store.body == "Plan. (Need ID: 000)"

    def test_disallowed_tool_raises_policy_violation_after_retries(self, specs):
        role = AgentRole.INQUIRY
        bad = tools(("add_need_slot", {"need": "x", "clarify": False, "user_want": True}))
        backend = scripted(role, [bad, bad, bad, bad])
        host = ToolHost(NeedsMemo())
        with pytest.raises(PolicyViolation) as exc:
            run_agent_turn(specs[role], [], backend, host, meta(role))
        assert "allow-list" in exc.value.details["violation"]
        # initial call + max_retries corrective re-asks
        assert backend.calls == specs[role].max_retries + 1

    def test_milestone_turn_recovers_milestone_block(self, specs):
        role = AgentRole.MILESTONE
        block = (
            "Next milestone: Collect lodging preferences.\n"
            "    - Explanation: nothing about hotels yet.\n"
            "User query/feedback: plan my trip\n"
            "[MilestoneEnd]"
        )
        backend = scripted(role, [tools(("get_all_needs", {}), ("load_solution", {})), text(block)])
        host = ToolHost(NeedsMemo(), FakeSolutionStore())
        result = run_agent_turn(specs[role], [], backend, host, meta(role))
        assert result.tokens == [ControlToken.MILESTONE_END]
        assert "Next milestone: Collect lodging preferences." in result.visible_text

    def test_missing_token_is_corrected_then_times_out(self, specs):
        role = AgentRole.NEEDS_DISCOVERY
        backend = scripted(role, [text("forgot the token"), text("again"), text("and again")])
        host = ToolHost(NeedsMemo())
        with pytest.raises(ProtocolTimeout):
            run_agent_turn(specs[role], [], backend, host, meta(role))
        assert backend.calls == specs[role].max_retries + 1

    def test_corrective_note_lets_retry_succeed(self, specs):
        role = AgentRole.NEEDS_DISCOVERY
        backend = scripted(role, [text("oops no token"), text("[DISCOVEREND]")])
        host = ToolHost(NeedsMemo())
        result = run_agent_turn(specs[role], [], backend, host, meta(role))
        assert result.retries_used == 1
        assert result.tokens == [ControlToken.DISCOVER_END]

    def test_foreign_token_rejected(self, specs):
        role = AgentRole.SOLUTION_CRAFT
        backend = scripted(
            role,
            [
                tools(("write_solution", {"solution": "x"})),
                text("done [BeginPlan]"),
                text("done [SolutionEnd]"),
            ],
        )
        host = ToolHost(NeedsMemo(), FakeSolutionStore())
        result = run_agent_turn(specs[role], [], backend, host, meta(role))
        assert result.retries_used == 1

    def test_solution_end_without_write_is_invalid(self, specs):
        role = AgentRole.SOLUTION_CRAFT
        backend = scripted(
            role,
            [
                text("here you go [SolutionEnd]"),
                tools(("write_solution", {"solution": "plan"})),
                text("saved [SolutionEnd]"),
            ],
        )
        store = FakeSolutionStore()
        result = run_agent_turn(specs[role], [], backend, scripted_host(store), meta(role))
        assert result.retries_used == 1
        assert store.writes == 1

    def test_execution_errors_are_fed_back_not_fatal(self, specs):
        role = AgentRole.INQUIRY
        memo = NeedsMemo()
        backend = scripted(
            role,
            [
                tools(("fill_need_slot", {"id": "404", "need": "x", "user_want": True})),
                text("Sorry, I mis-keyed that. [Inquiry]"),
            ],
        )
        result = run_agent_turn(specs[role], [], backend, ToolHost(memo), meta(role))
        assert result.tool_calls_executed[0].result["error"]["code"] == "UnknownNeedId"
        assert result.retries_used == 0

    def test_tool_round_budget(self, specs):
        role = AgentRole.MILESTONE
        endless = [tools(("get_all_needs", {})) for _ in range(20)]
        backend = scripted(role, endless)
        host = ToolHost(NeedsMemo(), FakeSolutionStore())
        with pytest.raises(ProtocolTimeout):
            run_agent_turn(specs[role], [], backend, host, meta(role))
        assert backend.calls <= (specs[role].max_tool_rounds + 1) * (specs[role].max_retries + 1)

    def test_ranking_output_validated_against_memo(self, specs):
        role = AgentRole.RANKING
        memo = NeedsMemo()
        memo.add_need_slot(
            "Budget?", clarify=True, want=WantStatus.UNANSWERED, origin=NeedOrigin.AGENT_INFERRED
        )
        good = '{"Topic 1": {"question-1": {"need_id": "000", "need": "Budget?"}}}'
        backend = scripted(
            role,
            [
                tools(("get_clarify_needs", {})),
                text('{"Topic 1": {"question-1": {"need_id": "999", "need": "ghost"}}}'),
                text(good),
            ],
        )
        result = run_agent_turn(specs[role], [], backend, ToolHost(memo), meta(role))
        assert result.retries_used == 1
        assert result.tokens == []

    def test_deterministic_under_scripted_backend(self, specs):
        role = AgentRole.NEEDS_DISCOVERY

        def build():
            memo = NeedsMemo()
            backend = scripted(
                role,
                [
                    tools(("get_all_needs", {})),
                    tools(("add_need_slot", {"need": "The destination is Hawaii.", "clarify": False, "user_want": True})),
                    text("All recorded. [DISCOVEREND]"),
                ],
            )
            return run_agent_turn(specs[role], [], backend, ToolHost(memo), meta(role)), memo

        first, memo_a = build()
        second, memo_b = build()
        assert first.raw_text == second.raw_text
        assert [e.to_json() for e in first.tool_calls_executed] == [
            e.to_json() for e in second.tool_calls_executed
        ]
        assert memo_a.to_json() == memo_b.to_json()


def scripted_host(store: FakeSolutionStore) -> ToolHost:
    return ToolHost(NeedsMemo(), store)


class TestToolHost:
    def test_mutations_flow_through_commit(self):
        from coplan.agents import apply_memo_op

        seen = []
        memo = NeedsMemo()

        def commit(op, args):
            seen.append((op, args))
            return apply_memo_op(memo, op, args)

        host = ToolHost(memo, commit=commit)
        host.execute(
            AgentRole.NEEDS_DISCOVERY,
            ToolCall(name="add_need_slot", args={"need": "x", "clarify": False, "user_want": True}),
        )
        assert seen == [("add_need_slot", {"need": "x", "clarify": False, "user_want": True})]
        assert memo.slots["000"].origin == NeedOrigin.USER_EXPLICIT

    def test_views_use_prompt_vocabulary(self):
        memo = NeedsMemo()
        memo.add_need_slot(
            "The destination is Hawaii.",
            clarify=False,
            want=WantStatus.WANTED,
            origin=NeedOrigin.USER_EXPLICIT,
        )
        memo.add_need_slot(
            "Budget?", clarify=True, want=WantStatus.UNANSWERED, origin=NeedOrigin.AGENT_INFERRED
        )
        host = ToolHost(memo)
        views = host.execute(AgentRole.MILESTONE, ToolCall(name="get_all_needs", args={}))
        assert views["User Wants Needs"] == {"000": "The destination is Hawaii."}
        assert views["User Not Answered Needs"] == {"001": "Budget?"}
        clarify = host.execute(AgentRole.RANKING, ToolCall(name="get_clarify_needs", args={}))
        assert clarify == {"001": "Budget?"}

    def test_clarify_question_gets_inferred_origin(self):
        memo = NeedsMemo()
        host = ToolHost(memo)
        host.execute(
            AgentRole.NEEDS_DISCOVERY,
            ToolCall(name="add_need_slot", args={"need": "Budget?", "clarify": True, "user_want": None}),
        )
        slot = memo.slots["000"]
        assert slot.origin == NeedOrigin.AGENT_INFERRED
        assert slot.want == WantStatus.UNANSWERED
