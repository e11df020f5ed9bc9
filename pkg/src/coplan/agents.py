"""The five agent roles: prompts, tool policy, and turn execution.

Each role is described by an :class:`AgentSpec` — its system prompt, the
tools it may call, and the control tokens it may finish with. A turn
(:func:`run_agent_turn`) loops backend completions: tool calls are policy
checked and executed against the shared memo/solution store, text responses
are validated against the role's protocol, and violations trigger a bounded
number of corrective retries before the turn fails loudly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import Any, Callable

from .backend import Backend, ChatRequest, ChatResponse, ToolCall
from .errors import (
    CoplanError,
    EmptyRanking,
    MalformedJson,
    PolicyViolation,
    ProtocolTimeout,
)
from .memo import NeedOrigin, NeedsMemo, WantStatus, want_from_wire
from .protocol import ControlToken, parse_control_tokens, parse_ranking_output


class AgentRole(Enum):
    INQUIRY = "Inquiry"
    MILESTONE = "Milestone"
    NEEDS_DISCOVERY = "NeedsDiscovery"
    RANKING = "Ranking"
    SOLUTION_CRAFT = "SolutionCraft"


# Tool allow-lists are part of the inter-agent protocol, not a tunable.
ALLOWED_TOOLS: dict[AgentRole, frozenset[str]] = {
    AgentRole.INQUIRY: frozenset({"fill_need_slot"}),
    AgentRole.MILESTONE: frozenset({"get_all_needs", "load_solution"}),
    AgentRole.NEEDS_DISCOVERY: frozenset({"add_need_slot", "get_all_needs"}),
    AgentRole.RANKING: frozenset({"get_clarify_needs"}),
    AgentRole.SOLUTION_CRAFT: frozenset({"get_user_want_needs", "write_solution"}),
}

TERMINAL_TOKENS: dict[AgentRole, frozenset[ControlToken]] = {
    AgentRole.INQUIRY: frozenset({ControlToken.BEGIN_MILESTONE, ControlToken.INQUIRY}),
    AgentRole.MILESTONE: frozenset({ControlToken.MILESTONE_END, ControlToken.BEGIN_PLAN}),
    AgentRole.NEEDS_DISCOVERY: frozenset({ControlToken.DISCOVER_END}),
    AgentRole.RANKING: frozenset(),
    AgentRole.SOLUTION_CRAFT: frozenset({ControlToken.SOLUTION_END}),
}

# Rule text used in corrective notes; mirrors the wording in the prompt pack.
_ALLOW_RULE = {
    AgentRole.INQUIRY: "You can only call functions: `[fill_need_slot]`. YOU CANNOT CALL ANY OTHER FUNCTION NAME.",
    AgentRole.MILESTONE: "You may only call `get_all_needs` and `load_solution`.",
    AgentRole.NEEDS_DISCOVERY: "You can only call functions: `[add_need_slot, get_all_needs]`. YOU CANNOT CALL ANY OTHER FUNCTION NAME.",
    AgentRole.RANKING: "You may only call `get_clarify_needs`.",
    AgentRole.SOLUTION_CRAFT: "You may only call `get_user_want_needs` and `write_solution`.",
}

_TOKEN_RULE = {
    AgentRole.INQUIRY: "End every message with `[Inquiry]` when asking the user questions, or `[BeginMilestone]` when handing off to the Milestone-Agent.",
    AgentRole.MILESTONE: "When you are not calling functions, you must generate `[BeginPlan]` or `[MilestoneEnd]`.",
    AgentRole.NEEDS_DISCOVERY: "Only after adding all needs to the memo may you generate `[DISCOVEREND]`, and you must end with it.",
    AgentRole.RANKING: "Output exactly one json-formatted object following the grouped-question format.",
    AgentRole.SOLUTION_CRAFT: "Save the completed solution using the `write_solution` function, then conclude with `[SolutionEnd]`.",
}


TOOL_SCHEMAS: dict[str, dict] = {
    "fill_need_slot": {
        "name": "fill_need_slot",
        "description": "Resolve a clarification Need Slot with the user's detailed answer.",
        "parameters": {
            "type": "object",
            "properties": {
                "id": {"type": "string", "description": "The id of the need slot to fill."},
                "need": {"type": "string", "description": "Detailed description of the clarified need."},
                "user_want": {
                    "type": "boolean",
                    "description": "true if the user wants this need, false if they declined to answer.",
                },
            },
            "required": ["id", "need", "user_want"],
        },
    },
    "add_need_slot": {
        "name": "add_need_slot",
        "description": "Record a new user need in the User Needs Memo.",
        "parameters": {
            "type": "object",
            "properties": {
                "need": {"type": "string", "description": "The need text, or the clarification question."},
                "clarify": {"type": "boolean", "description": "true when the slot is a question to ask the user."},
                "user_want": {
                    "type": ["boolean", "null"],
                    "description": "true for explicit needs; null for clarification questions.",
                },
            },
            "required": ["need", "clarify"],
        },
    },
    "get_all_needs": {
        "name": "get_all_needs",
        "description": "Retrieve all recorded needs, partitioned by the user's answer status.",
        "parameters": {"type": "object", "properties": {}, "required": []},
    },
    "get_clarify_needs": {
        "name": "get_clarify_needs",
        "description": "Retrieve the Need Slots that still require clarification.",
        "parameters": {"type": "object", "properties": {}, "required": []},
    },
    "get_user_want_needs": {
        "name": "get_user_want_needs",
        "description": "Retrieve the needs the user confirmed; solutions build on these only.",
        "parameters": {"type": "object", "properties": {}, "required": []},
    },
    "load_solution": {
        "name": "load_solution",
        "description": "Load the current solution; may return empty if none exists yet.",
        "parameters": {"type": "object", "properties": {}, "required": []},
    },
    "write_solution": {
        "name": "write_solution",
        "description": "Save the completed solution text.",
        "parameters": {
            "type": "object",
            "properties": {"solution": {"type": "string", "description": "Full markdown solution."}},
            "required": ["solution"],
        },
    },
}

ALL_TOOL_NAMES = frozenset(TOOL_SCHEMAS)

PROMPT_FILES: dict[AgentRole, str] = {
    AgentRole.INQUIRY: "inquiry",
    AgentRole.MILESTONE: "milestone",
    AgentRole.NEEDS_DISCOVERY: "needs_discovery",
    AgentRole.RANKING: "ranking",
    AgentRole.SOLUTION_CRAFT: "solution_craft",
}
TEAM_INTRO_FILE = "team_intro"


class PromptPack:
    """Role prompts loaded from a directory, one markdown file per role.

    The team introduction is always placed at the very beginning of each
    role's system prompt. A role file may embed ``{team_intro}`` to position
    it manually; the default pack does not.
    """

    def __init__(self, team_intro: str, role_prompts: dict[AgentRole, str]):
        self.team_intro = team_intro
        self._prompts = role_prompts

    @classmethod
    def load(cls, directory: str | Path) -> "PromptPack":
        directory = Path(directory)
        team_intro = _read_prompt_file(directory, TEAM_INTRO_FILE)
        prompts = {
            role: _read_prompt_file(directory, stem) for role, stem in PROMPT_FILES.items()
        }
        return cls(team_intro, prompts)

    @classmethod
    def default(cls) -> "PromptPack":
        root = resources.files("coplan").joinpath("prompts")
        team_intro = root.joinpath(f"{TEAM_INTRO_FILE}.md").read_text(encoding="utf-8")
        prompts = {
            role: root.joinpath(f"{stem}.md").read_text(encoding="utf-8")
            for role, stem in PROMPT_FILES.items()
        }
        return cls(team_intro, prompts)

    def system_prompt(self, role: AgentRole) -> str:
        text = self._prompts[role]
        if "{team_intro}" in text:
            return text.replace("{team_intro}", self.team_intro)
        return f"{self.team_intro}\n\n{text}"


def _read_prompt_file(directory: Path, stem: str) -> str:
    from .errors import ConfigError

    for candidate in (directory / f"{stem}.md", directory / stem):
        if candidate.exists():
            return candidate.read_text(encoding="utf-8")
    raise ConfigError(f"prompt pack is missing file: {directory / (stem + '.md')}")


@dataclass
class AgentSpec:
    role: AgentRole
    system_prompt: str
    allowed_tools: frozenset[str]
    terminal_tokens: frozenset[ControlToken]
    max_tool_rounds: int = 8
    max_retries: int = 2


def build_agent_specs(
    pack: PromptPack, max_tool_rounds: int = 8, max_retries: int = 2
) -> dict[AgentRole, AgentSpec]:
    return {
        role: AgentSpec(
            role=role,
            system_prompt=pack.system_prompt(role),
            allowed_tools=ALLOWED_TOOLS[role],
            terminal_tokens=TERMINAL_TOKENS[role],
            max_tool_rounds=max_tool_rounds,
            max_retries=max_retries,
        )
        for role in AgentRole
    }


# --- tool policy -----------------------------------------------------------------


def _typecheck(value: Any, declared: Any) -> bool:
    types = declared if isinstance(declared, list) else [declared]
    for type_name in types:
        if type_name == "string" and isinstance(value, str):
            return True
        if type_name == "boolean" and isinstance(value, bool):
            return True
        if type_name == "null" and value is None:
            return True
        if type_name == "number" and isinstance(value, (int, float)):
            return True
    return False


def enforce_tool_policy(role: AgentRole, call: ToolCall) -> str | None:
    """None when the call is allowed and well-formed; a violation text otherwise."""
    if call.name not in ALL_TOOL_NAMES:
        return f"unknown function `{call.name}`"
    if call.name not in ALLOWED_TOOLS[role]:
        return f"function `{call.name}` is outside the {role.value}-Agent allow-list"
    schema = TOOL_SCHEMAS[call.name]["parameters"]
    for required in schema["required"]:
        if required not in call.args:
            return f"`{call.name}` call is missing required argument `{required}`"
    for key, value in call.args.items():
        declared = schema["properties"].get(key)
        if declared is None:
            return f"`{call.name}` got unexpected argument `{key}`"
        if "type" in declared and not _typecheck(value, declared["type"]):
            return f"`{call.name}` argument `{key}` has the wrong type"
    return None


# --- tool execution -----------------------------------------------------------------


class ToolHost:
    """Executes validated tool calls against one session's memo and solution.

    Mutating ops are funneled through ``commit`` so the orchestrator can log
    them for replay before they take effect; the default commit applies the
    op directly, which is what standalone use (and tests) want.
    """

    def __init__(
        self,
        memo: NeedsMemo,
        solution_store: Any = None,
        commit: Callable[[str, dict], Any] | None = None,
    ):
        self.memo = memo
        self.solution_store = solution_store
        self.commit = commit or (lambda op, args: apply_memo_op(self.memo, op, args))

    def execute(self, role: AgentRole, call: ToolCall) -> dict:
        # structural backstop: the turn loop refuses disallowed calls before
        # they get here, so reaching this guard means a programming error
        if call.name not in ALLOWED_TOOLS.get(role, frozenset()):
            raise PolicyViolation(
                f"{role.value} may not execute {call.name}", role=role.value
            )
        handler = getattr(self, f"_tool_{call.name}", None)
        if handler is None:
            raise PolicyViolation(f"no such tool: {call.name}")
        return handler(**call.args)

    # Read views return the memo in the vocabulary the prompts use.

    def _tool_get_all_needs(self) -> dict:
        views = self.memo.get_all_needs()
        return {
            "User Wants Needs": {s.id: s.need for s in views["wanted"]},
            "User do not want to answer needs": {s.id: s.need for s in views["declined"]},
            "User Not Answered Needs": {s.id: s.need for s in views["unanswered"]},
        }

    def _tool_get_clarify_needs(self) -> dict:
        return {s.id: s.need for s in self.memo.get_clarify_needs()}

    def _tool_get_user_want_needs(self) -> dict:
        return {s.id: s.need for s in self.memo.get_user_want_needs()}

    def _tool_load_solution(self) -> dict:
        body = self.solution_store.load_body() if self.solution_store else None
        return {"solution": body}

    def _tool_add_need_slot(self, need: str, clarify: bool, user_want: Any = None) -> dict:
        args = {"need": need, "clarify": clarify, "user_want": user_want}
        return {"ok": True, "id": self.commit("add_need_slot", args)}

    def _tool_fill_need_slot(self, id: str, need: str, user_want: Any) -> dict:
        args = {"id": id, "need": need, "user_want": user_want}
        return {"ok": True, "id": self.commit("fill_need_slot", args)}

    def _tool_write_solution(self, solution: str) -> dict:
        if self.solution_store is None:
            raise PolicyViolation("no solution store attached")
        return self.solution_store.write_body(solution)


def apply_memo_op(memo: NeedsMemo, op: str, args: dict) -> Any:
    """Apply one recorded memo mutation; shared by live tools and log replay."""
    from .memo import AddManual, Delete, Update

    if op == "add_need_slot":
        want = want_from_wire(args.get("user_want"))
        clarify = bool(args["clarify"])
        origin = NeedOrigin.AGENT_INFERRED if clarify else NeedOrigin.USER_EXPLICIT
        if want is WantStatus.UNANSWERED and not clarify:
            # models sometimes omit user_want for explicit needs; they meant true
            if "user_want" not in args or args.get("user_want") is None:
                want = WantStatus.WANTED
        return memo.add_need_slot(args["need"], clarify=clarify, want=want, origin=origin)
    if op == "fill_need_slot":
        slot = memo.fill_need_slot(args["id"], args["need"], want_from_wire(args["user_want"]))
        return slot.id
    if op == "add_manual":
        return memo.apply_user_edit(AddManual(args["text"]))
    if op == "update":
        return memo.apply_user_edit(Update(args["id"], args["text"]))
    if op == "delete":
        return memo.apply_user_edit(Delete(args["id"]))
    raise ValueError(f"unknown memo op: {op}")


# --- context assembly -----------------------------------------------------------------


def assemble_context(
    spec: AgentSpec,
    transcript: list[dict],
    directive: str | None = None,
) -> list[dict]:
    """Build the message list for a turn: system prompt, shared transcript,
    then any pending directive as the final steering message."""
    messages: list[dict] = [{"role": "system", "content": spec.system_prompt}]
    for entry in transcript:
        source = entry.get("source", "user")
        text = entry["text"]
        if source == "user":
            messages.append({"role": "user", "content": text})
        elif source == "engine":
            messages.append({"role": "system", "content": text})
        else:
            messages.append({"role": "assistant", "content": f"[{source}] {text}"})
    if directive:
        messages.append({"role": "system", "content": directive})
    return messages


# --- turn execution -----------------------------------------------------------------


@dataclass
class ExecutedToolCall:
    call: ToolCall
    result: dict

    def to_json(self) -> dict:
        return {"call": self.call.to_json(), "result": self.result}


@dataclass
class AgentTurnResult:
    visible_text: str
    raw_text: str
    tool_calls_executed: list[ExecutedToolCall]
    tokens: list[ControlToken]
    retries_used: int

    @property
    def token(self) -> ControlToken | None:
        return self.tokens[0] if self.tokens else None

    def tool_names(self) -> list[str]:
        return [e.call.name for e in self.tool_calls_executed]


@dataclass
class TurnMeta:
    """Fixture addressing for the backend: which session, role, and call."""

    session: str
    role: AgentRole
    counter: Callable[[], int]

    def request(self, messages: list[dict], schemas: list[dict], model: str, temperature: float) -> ChatRequest:
        return ChatRequest(
            messages=messages,
            tool_schemas=schemas,
            temperature=temperature,
            model=model,
            session=self.session,
            role=self.role.value,
            call=self.counter(),
        )


def _validate_text_output(
    spec: AgentSpec,
    tokens: list[ControlToken],
    body: str,
    memo: NeedsMemo,
    wrote_solution: bool,
) -> str | None:
    """None when the text response satisfies the role protocol."""
    if spec.role is AgentRole.RANKING:
        if tokens:
            return "the Ranking-Agent emits no control tokens, only the grouped-question JSON"
        try:
            parse_ranking_output(body, memo)
        except MalformedJson as exc:
            return f"ranking output must be one valid JSON object ({exc.message})"
        except EmptyRanking as exc:
            reasons = ", ".join(d["reason"] for d in exc.details.get("dropped", [])) or "no questions"
            return (
                "every question must carry the need_id of a live slot awaiting "
                f"clarification (dropped: {reasons})"
            )
        return None
    if not tokens:
        return f"missing control token. {_TOKEN_RULE[spec.role]}"
    if len(tokens) > 1:
        return "emit exactly one control token per message"
    if tokens[0] not in spec.terminal_tokens:
        allowed = ", ".join(sorted(t.surface for t in spec.terminal_tokens))
        return f"token {tokens[0].surface} is not valid for this role; use one of: {allowed}"
    if (
        spec.role is AgentRole.SOLUTION_CRAFT
        and tokens[0] is ControlToken.SOLUTION_END
        and not wrote_solution
    ):
        return _TOKEN_RULE[AgentRole.SOLUTION_CRAFT]
    return None


def run_agent_turn(
    spec: AgentSpec,
    context: list[dict],
    backend: Backend,
    tool_host: ToolHost,
    meta: TurnMeta,
    model: str = "",
    temperature: float = 0.0,
) -> AgentTurnResult:
    """Drive one agent turn to a protocol-valid text response.

    Tool rounds and corrective retries are both bounded, so the backend is
    called at most (max_tool_rounds + 1) * (max_retries + 1) times.
    """
    working = list(context)
    schemas = [TOOL_SCHEMAS[name] for name in sorted(spec.allowed_tools)]
    executed: list[ExecutedToolCall] = []
    retries = 0
    rounds = 0
    wrote_solution = False
    synthetic_id = 0

    while True:
        request = meta.request(working, schemas, model, temperature)
        response: ChatResponse = backend.complete(request)

        if response.tool_calls:
            rounds += 1
            if rounds > spec.max_tool_rounds:
                raise ProtocolTimeout(
                    f"{spec.role.value} turn exceeded {spec.max_tool_rounds} tool rounds",
                    role=spec.role.value,
                )
            working.append(_assistant_tool_message(response.tool_calls))
            violation: str | None = None
            for call in response.tool_calls:
                synthetic_id += 1
                call_id = call.call_id or f"call_{synthetic_id}"
                problem = enforce_tool_policy(spec.role, call)
                if problem is not None:
                    violation = problem
                    result = {"error": {"code": "PolicyViolation", "detail": problem}}
                else:
                    try:
                        result = tool_host.execute(spec.role, call)
                        if call.name == "write_solution":
                            wrote_solution = True
                    except CoplanError as exc:
                        # execution errors go back to the model; it can adapt
                        result = {"error": {"code": exc.code, "detail": exc.message}}
                executed.append(ExecutedToolCall(call=call, result=result))
                working.append(
                    {
                        "role": "tool",
                        "tool_call_id": call_id,
                        "content": json.dumps(result, ensure_ascii=False),
                    }
                )
            if violation is not None:
                retries += 1
                if retries > spec.max_retries:
                    raise PolicyViolation(
                        f"{spec.role.value} turn kept calling disallowed tools: {violation}",
                        role=spec.role.value,
                        violation=violation,
                    )
                working.append(_corrective_note(f"{violation}. Rule: {_ALLOW_RULE[spec.role]}"))
            continue

        text = response.text or ""
        tokens, body = parse_control_tokens(text)
        problem = _validate_text_output(spec, tokens, body, tool_host.memo, wrote_solution)
        if problem is None:
            return AgentTurnResult(
                visible_text=body,
                raw_text=text,
                tool_calls_executed=executed,
                tokens=tokens,
                retries_used=retries,
            )
        retries += 1
        if retries > spec.max_retries:
            raise ProtocolTimeout(
                f"{spec.role.value} turn never produced a valid response: {problem}",
                role=spec.role.value,
                problem=problem,
            )
        working.append({"role": "assistant", "content": text})
        working.append(_corrective_note(problem))


def _assistant_tool_message(calls: list[ToolCall]) -> dict:
    return {
        "role": "assistant",
        "content": None,
        "tool_calls": [
            {
                "id": call.call_id or f"call_{i}",
                "type": "function",
                "function": {
                    "name": call.name,
                    "arguments": json.dumps(call.args, ensure_ascii=False),
                },
            }
            for i, call in enumerate(calls, 1)
        ],
    }


def _corrective_note(problem: str) -> dict:
    return {
        "role": "system",
        "content": f"Protocol correction: {problem} Reply again following the rule exactly.",
    }
