"""Session state machine: routing between agents, milestones, question pacing,
solution lifecycle, and the feedback / manual-edit paths.

Every state change is expressed as a small JSON record and applied through
:meth:`SessionState.apply` — the live engine commits records as it works and
folding the same records back rebuilds the session exactly. That single
application path is what makes the persisted log an honest event-sourcing
contract instead of a best-effort mirror.

A session is one logical actor: callers must hold its lock for the duration
of a public operation (the service layer does). Distinct sessions share
nothing and run in parallel freely.
"""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable

from .agents import (
    AgentRole,
    AgentSpec,
    PromptPack,
    ToolHost,
    TurnMeta,
    apply_memo_op,
    assemble_context,
    build_agent_specs,
    run_agent_turn,
)
from .backend import Backend, ChatRequest
from .errors import (
    DuplicateMilestone,
    EmptyQuery,
    ProtocolTimeout,
    WriteOutsideDrafting,
    WrongPhase,
)
from .memo import AddManual, Delete, NeedsMemo, Update, UserEdit
from .protocol import (
    AnnotatedSolution,
    ControlToken,
    QuestionGroup,
    RankedQuestion,
    parse_milestone_block,
    parse_ranking_output,
    validate_solution_refs,
)


class Phase(Enum):
    AWAIT_USER_QUERY = "AwaitUserQuery"
    MILESTONE_DECISION = "MilestoneDecision"
    NEEDS_DISCOVERY = "NeedsDiscovery"
    RANKING = "Ranking"
    INQUIRING = "Inquiring"
    SOLUTION_DRAFTING = "SolutionDrafting"
    SOLUTION_READY = "SolutionReady"


AWAITING_PHASES = frozenset(
    {Phase.AWAIT_USER_QUERY, Phase.INQUIRING, Phase.SOLUTION_READY}
)

# Question batches never exceed this many questions per posting.
BATCH_LIMIT = 4

# Safety valve for the advance loop; a healthy flow needs far fewer steps.
_MAX_ADVANCE_STEPS = 24

BASELINE_SYSTEM_PROMPT = "You are a helpful assistant."
BASELINE_SOURCE = "Assistant"

SOLUTION_READY_NOTICE = (
    "The solution is ready — please check the Solution Panel. "
    "Let me know if you would like any adjustments."
)

_SKIP_DIRECTIVE = (
    "The user wants to stop answering questions and see the solution "
    "immediately. Notify the team to begin planning now."
)


@dataclass
class Milestone:
    text: str
    explanation: str
    seq: int

    def to_json(self) -> dict:
        return {"text": self.text, "explanation": self.explanation, "seq": self.seq}


@dataclass(frozen=True)
class UiEvent:
    seq: int
    kind: str
    payload: dict

    def to_json(self) -> dict:
        return {"seq": self.seq, "kind": self.kind, **self.payload}


@dataclass
class SessionState:
    """Everything the panels and the agents can observe about one session."""

    id: str
    baseline_mode: bool = False
    tag: str = ""
    created_at: float = 0.0
    phase: Phase = Phase.AWAIT_USER_QUERY
    memo: NeedsMemo = field(default_factory=NeedsMemo)
    milestones: list[Milestone] = field(default_factory=list)
    pending_groups: list[QuestionGroup] = field(default_factory=list)
    group_cursor: int = 0
    batch_cursor: int = 0
    posted_batch: list[RankedQuestion] = field(default_factory=list)
    solution: AnnotatedSolution | None = None
    transcript: list[dict] = field(default_factory=list)
    skip_requested: bool = False
    replan_pending: str | None = None
    event_seq: int = 0
    events: list[UiEvent] = field(default_factory=list)
    message_seq: int = 0

    def apply(self, record: dict) -> Any:
        """Apply one log record; the only way state ever changes."""
        kind = record["t"]
        if kind == "meta":
            self.id = record["id"]
            self.baseline_mode = record["baseline_mode"]
            self.tag = record.get("tag") or record["id"]
            self.created_at = record.get("created_at", 0.0)
            return None
        if kind == "message":
            self.transcript.append({"source": record["source"], "text": record["text"]})
            if record["source"] == "user":
                self.message_seq += 1
            return self.message_seq
        if kind == "memo":
            return apply_memo_op(self.memo, record["op"], record["args"])
        if kind == "milestone":
            milestone = Milestone(
                text=record["text"],
                explanation=record.get("explanation", ""),
                seq=len(self.milestones) + 1,
            )
            self.milestones.append(milestone)
            return milestone
        if kind == "groups":
            self.pending_groups = [
                QuestionGroup(
                    topic=g["topic"],
                    questions=tuple(
                        RankedQuestion(q["need_id"], q["question"]) for q in g["questions"]
                    ),
                )
                for g in record["groups"]
            ]
            self.group_cursor = 0
            self.batch_cursor = 0
            self.posted_batch = []
            return None
        if kind == "batch":
            self.posted_batch = [
                RankedQuestion(q["need_id"], q["question"]) for q in record["questions"]
            ]
            self.group_cursor = record["group_cursor"]
            self.batch_cursor = record["batch_cursor"]
            return None
        if kind == "phase":
            self.phase = Phase(record["phase"])
            return None
        if kind == "solution":
            self.solution = AnnotatedSolution.from_body(record["body"], self.memo.revision)
            return self.solution
        if kind == "flag":
            setattr(self, record["name"], record["value"])
            return None
        if kind == "event":
            payload = {
                k: v for k, v in record.items() if k not in ("t", "seq", "kind")
            }
            event = UiEvent(seq=record["seq"], kind=record["kind"], payload=payload)
            self.events.append(event)
            self.event_seq = event.seq
            return event
        raise ValueError(f"unknown record type: {kind}")


def replay_records(records: list[dict]) -> SessionState:
    """Fold a persisted log back into a session state."""
    state = SessionState(id="")
    for record in records:
        state.apply(record)
    return state


def build_panels(state: SessionState) -> dict:
    """One consistent snapshot of the three panels backing the UI.

    ``last_event_seq`` lets a client subscribe to the event stream from the
    exact point this snapshot was taken, with no gap and no replay overlap.
    ``question_batch`` and ``asked_need_ids`` are derived from the event
    history so a freshly attached client can resume mid-questioning.
    """
    asked: list[str] = []
    seen: set[str] = set()
    batch: dict | None = None
    for event in state.events:
        if event.kind != "questions_posted":
            continue
        questions = event.payload.get("questions", [])
        for question in questions:
            need_id = question.get("need_id")
            if need_id and need_id not in seen:
                seen.add(need_id)
                asked.append(need_id)
        batch = {"topic": event.payload.get("topic", ""), "questions": questions}
    return {
        "chat": [
            {"seq": i, "source": entry["source"], "text": entry["text"]}
            for i, entry in enumerate(state.transcript, 1)
        ],
        "solution": state.solution.to_json() if state.solution else None,
        "needs": {"slots": state.memo.to_json(), "revision": state.memo.revision},
        "phase": state.phase.value,
        "last_event_seq": state.event_seq,
        "question_batch": batch if state.phase is Phase.INQUIRING else None,
        "asked_need_ids": asked,
    }


class SolutionStore:
    """Single-current-solution store; history lives in the transcript/log."""

    def __init__(self, session: "Session"):
        self._session = session

    def load_body(self) -> str | None:
        solution = self._session.state.solution
        return solution.body if solution else None

    def load(self) -> AnnotatedSolution | None:
        return self._session.state.solution

    def write_body(self, body: str) -> dict:
        session = self._session
        if not session.in_solution_turn:
            raise WriteOutsideDrafting("write_solution is only valid while drafting")
        solution: AnnotatedSolution = session.commit({"t": "solution", "body": body})
        session.emit("solution_updated", {"revision_basis": solution.revision_basis})
        return {
            "ok": True,
            "refs": len(solution.refs),
            "revision_basis": solution.revision_basis,
        }


class Session:
    """One conversation: state, backend, and the workflow that ties them."""

    def __init__(
        self,
        session_id: str,
        backend: Backend,
        prompt_pack: PromptPack | None = None,
        *,
        baseline_mode: bool = False,
        tag: str | None = None,
        sink: Callable[[str, dict], None] | None = None,
        model: str = "",
        temperature: float = 0.0,
        max_tool_rounds: int = 8,
        max_retries: int = 2,
        clock: Callable[[], float] = time.time,
    ):
        self.backend = backend
        self.specs: dict[AgentRole, AgentSpec] = build_agent_specs(
            prompt_pack or PromptPack.default(),
            max_tool_rounds=max_tool_rounds,
            max_retries=max_retries,
        )
        self.model = model
        self.temperature = temperature
        self.lock = threading.RLock()
        self.state = SessionState(id=session_id)
        self._sink = sink or (lambda session_id, record: None)
        self._role_calls: dict[str, int] = {}
        self.solution_store = SolutionStore(self)
        self.in_solution_turn = False
        self.commit(
            {
                "t": "meta",
                "id": session_id,
                "baseline_mode": baseline_mode,
                "tag": tag or session_id,
                "created_at": clock(),
            }
        )

    @classmethod
    def resume(
        cls,
        state: SessionState,
        backend: Backend,
        prompt_pack: PromptPack | None = None,
        *,
        sink: Callable[[str, dict], None] | None = None,
        model: str = "",
        temperature: float = 0.0,
        max_tool_rounds: int = 8,
        max_retries: int = 2,
    ) -> "Session":
        """Adopt a state folded from a persisted log.

        Backend call counters restart at zero: a resumed session continues
        cleanly against a live backend, while scripted replay reconstructs
        whole runs from the start instead of continuing mid-fixture.
        """
        session = cls.__new__(cls)
        session.backend = backend
        session.specs = build_agent_specs(
            prompt_pack or PromptPack.default(),
            max_tool_rounds=max_tool_rounds,
            max_retries=max_retries,
        )
        session.model = model
        session.temperature = temperature
        session.lock = threading.RLock()
        session.state = state
        session._sink = sink or (lambda session_id, record: None)
        session._role_calls = {}
        session.solution_store = SolutionStore(session)
        session.in_solution_turn = False
        return session

    # -- record plumbing -----------------------------------------------------

    def commit(self, record: dict) -> Any:
        """Apply a record to live state and append it to the log.

        Application happens first: a record that raises never reaches the log,
        so replaying the log can never fail where the live run succeeded.
        """
        result = self.state.apply(record)
        self._sink(self.state.id, record)
        return result

    def emit(self, kind: str, payload: dict) -> UiEvent:
        record = {"t": "event", "seq": self.state.event_seq + 1, "kind": kind, **payload}
        return self.commit(record)

    def _commit_memo(self, op: str, args: dict) -> Any:
        result = self.commit({"t": "memo", "op": op, "args": args})
        self.emit("needs_updated", {"revision": self.state.memo.revision})
        return result

    def _say(self, source: str, text: str, event: bool = True) -> None:
        self.commit({"t": "message", "source": source, "text": text})
        if event:
            self.emit("agent_message", {"source": source, "text": text})

    def _set_phase(self, phase: Phase) -> None:
        self.commit({"t": "phase", "phase": phase.value})
        self.emit("phase_changed", {"phase": phase.value})

    def _set_flag(self, name: str, value: Any) -> None:
        self.commit({"t": "flag", "name": name, "value": value})

    # -- agent turn plumbing -----------------------------------------------------

    def _next_call(self, role_name: str) -> int:
        index = self._role_calls.get(role_name, 0)
        self._role_calls[role_name] = index + 1
        return index

    def _tool_host(self) -> ToolHost:
        return ToolHost(self.state.memo, self.solution_store, commit=self._commit_memo)

    def _run_turn(self, role: AgentRole, directive: str | None = None, extra: list[dict] | None = None):
        spec = self.specs[role]
        context = assemble_context(spec, self.state.transcript, directive)
        if extra:
            context.extend(extra)
        meta = TurnMeta(
            session=self.state.tag, role=role, counter=lambda: self._next_call(role.value)
        )
        if role is AgentRole.SOLUTION_CRAFT:
            self.in_solution_turn = True
            try:
                return run_agent_turn(
                    spec, context, self.backend, self._tool_host(), meta,
                    model=self.model, temperature=self.temperature,
                )
            finally:
                self.in_solution_turn = False
        return run_agent_turn(
            spec, context, self.backend, self._tool_host(), meta,
            model=self.model, temperature=self.temperature,
        )

    def _run_validated(
        self,
        role: AgentRole,
        directive: str | None,
        validate: Callable[[Any], str | None],
        attempts: int,
        exhausted: Callable[[str], Exception],
    ):
        """Run a turn, re-asking with a corrective note while ``validate`` objects."""
        extra: list[dict] = []
        for attempt in range(attempts + 1):
            turn = self._run_turn(role, directive, extra)
            problem = validate(turn)
            if problem is None:
                return turn
            if attempt == attempts:
                raise exhausted(problem)
            extra = extra + [
                {"role": "assistant", "content": turn.raw_text},
                {
                    "role": "system",
                    "content": f"Protocol correction: {problem} Reply again following the rule exactly.",
                },
            ]
        raise AssertionError("unreachable")

    # -- public operations -----------------------------------------------------

    def start(self, query: str) -> list[UiEvent]:
        """Kick off the session with the user's initial query."""
        with self.lock:
            if self.state.phase is not Phase.AWAIT_USER_QUERY:
                raise WrongPhase("session already started")
            query = (query or "").strip()
            if not query:
                raise EmptyQuery("query must not be empty")
            mark = len(self.state.events)
            self.commit({"t": "message", "source": "user", "text": query})
            if self.state.baseline_mode:
                self._baseline_completion()
            else:
                relay = self._run_turn(AgentRole.INQUIRY)
                self._say(AgentRole.INQUIRY.value, relay.visible_text)
                self._set_phase(Phase.MILESTONE_DECISION)
                self._advance_loop()
            return self.state.events[mark:]

    def advance(self) -> list[UiEvent]:
        """Drive agent phases until the session awaits user input again."""
        with self.lock:
            if self.state.phase in AWAITING_PHASES:
                raise WrongPhase(
                    f"phase {self.state.phase.value} awaits user input",
                    phase=self.state.phase.value,
                )
            mark = len(self.state.events)
            self._advance_loop()
            return self.state.events[mark:]

    def handle_user_message(self, text: str) -> list[UiEvent]:
        with self.lock:
            phase = self.state.phase
            if phase not in (Phase.INQUIRING, Phase.SOLUTION_READY):
                raise WrongPhase(
                    f"cannot accept messages in phase {phase.value}", phase=phase.value
                )
            text = (text or "").strip()
            if not text:
                raise EmptyQuery("message must not be empty")
            mark = len(self.state.events)
            self.commit({"t": "message", "source": "user", "text": text})
            if phase is Phase.INQUIRING:
                self._handle_answers()
            else:
                self._handle_feedback()
            return self.state.events[mark:]

    def apply_manual_edit(self, edit: UserEdit) -> list[UiEvent]:
        """Apply a needs-panel edit; any successful edit triggers a re-plan."""
        with self.lock:
            if self.state.baseline_mode:
                raise WrongPhase("baseline sessions have no needs memo")
            mark = len(self.state.events)
            op, args = _edit_record(edit)
            self._commit_memo(op, args)
            directive = (
                "The user has updated their requirements by themselves in the "
                "Needs Panel. Begin planning immediately with the updated memo."
            )
            self._set_flag("replan_pending", directive)
            if self.state.phase is not Phase.INQUIRING:
                self._set_phase(Phase.MILESTONE_DECISION)
                self._advance_loop()
            # during Inquiring the batch in flight finishes first; the replan
            # runs as soon as its answers are processed
            return self.state.events[mark:]

    def events_since(self, seq: int) -> list[UiEvent]:
        with self.lock:
            return [e for e in self.state.events if e.seq > seq]

    # -- workflow steps -----------------------------------------------------

    def _advance_loop(self) -> None:
        for _ in range(_MAX_ADVANCE_STEPS):
            phase = self.state.phase
            if phase in AWAITING_PHASES:
                return
            if phase is Phase.MILESTONE_DECISION:
                self._milestone_step()
            elif phase is Phase.NEEDS_DISCOVERY:
                self._discovery_step()
            elif phase is Phase.RANKING:
                self._ranking_step()
            elif phase is Phase.SOLUTION_DRAFTING:
                self._drafting_step()
        raise ProtocolTimeout("advance loop never reached an awaiting phase")

    def _milestone_step(self) -> None:
        state = self.state
        directive = None
        replanning = state.replan_pending is not None
        if replanning:
            directive = state.replan_pending
        elif state.skip_requested:
            directive = _SKIP_DIRECTIVE

        def validate(turn) -> str | None:
            token = turn.token
            if replanning and token is not ControlToken.BEGIN_PLAN:
                return (
                    "the user manually updated their requirements; you must "
                    "generate `[BeginPlan]` immediately, without setting a milestone"
                )
            if token is ControlToken.BEGIN_PLAN:
                if (
                    not state.memo.get_user_want_needs()
                    and not state.skip_requested
                    and not replanning
                ):
                    return (
                        "the memo records no confirmed needs yet; set a milestone "
                        "to collect them instead of starting the plan"
                    )
                return None
            # MilestoneEnd: enforce ledger uniqueness
            milestone, _ = parse_milestone_block(turn.visible_text)
            if _is_duplicate_milestone(state.milestones, milestone):
                return (
                    f"the milestone {milestone!r} has already been established; "
                    "you cannot set milestones that have already been established"
                )
            return None

        def exhausted(problem: str) -> Exception:
            if "already been established" in problem:
                return DuplicateMilestone(problem)
            return ProtocolTimeout(f"Milestone turn failed validation: {problem}")

        # duplicates get exactly one corrective retry; other validation uses
        # the standard retry budget
        turn = self._run_validated(
            AgentRole.MILESTONE,
            directive,
            validate,
            attempts=1 if not replanning else self.specs[AgentRole.MILESTONE].max_retries,
            exhausted=exhausted,
        )
        self._say(AgentRole.MILESTONE.value, turn.visible_text)
        if turn.token is ControlToken.BEGIN_PLAN:
            self._set_phase(Phase.SOLUTION_DRAFTING)
        else:
            milestone, explanation = parse_milestone_block(turn.visible_text)
            self.commit({"t": "milestone", "text": milestone, "explanation": explanation})
            self._set_phase(Phase.NEEDS_DISCOVERY)

    def _discovery_step(self) -> None:
        turn = self._run_turn(AgentRole.NEEDS_DISCOVERY)
        self._say(AgentRole.NEEDS_DISCOVERY.value, turn.visible_text)
        self._set_phase(Phase.RANKING)

    def _ranking_step(self) -> None:
        turn = self._run_turn(AgentRole.RANKING)
        parsed = parse_ranking_output(turn.visible_text, self.state.memo)
        self._say(AgentRole.RANKING.value, turn.visible_text)
        self.commit(
            {"t": "groups", "groups": [g.to_json() for g in parsed.groups]}
        )
        self._set_phase(Phase.INQUIRING)
        if not self._post_next_batch():
            # every parsed question got pruned in the meantime
            self.commit({"t": "groups", "groups": []})
            self._set_phase(Phase.MILESTONE_DECISION)

    def _drafting_step(self) -> None:
        state = self.state
        spec = self.specs[AgentRole.SOLUTION_CRAFT]
        directive = None
        turn = None
        for attempt in range(spec.max_retries + 1):
            turn = self._run_turn(AgentRole.SOLUTION_CRAFT, directive)
            report = validate_solution_refs(state.solution, state.memo)
            if report.grounded:
                break
            if attempt == spec.max_retries:
                self.emit("grounding_failure", {"dangling": list(report.dangling)})
                break
            dangling = ", ".join(report.dangling)
            directive = (
                "The previous draft cited Need IDs that do not exist in the "
                f"memo's wanted needs: {dangling}. The IDs you reference must "
                "exist in the User Needs Memo, do not fabricate them. Rewrite "
                "the solution citing only valid IDs and save it with write_solution."
            )
        self._say(AgentRole.SOLUTION_CRAFT.value, turn.visible_text)
        if state.skip_requested:
            self._set_flag("skip_requested", False)
        if state.replan_pending is not None:
            self._set_flag("replan_pending", None)
        self._say(AgentRole.INQUIRY.value, SOLUTION_READY_NOTICE, event=False)
        self.emit("solution_ready_notice", {})
        self._set_phase(Phase.SOLUTION_READY)

    def _handle_answers(self) -> None:
        state = self.state
        turn = self._run_turn(AgentRole.INQUIRY)
        self._say(AgentRole.INQUIRY.value, turn.visible_text)
        if state.replan_pending is not None:
            # manual edit arrived mid-batch: the answers are recorded, the
            # remaining questions stay in the memo for a later round
            self._leave_inquiring()
            self._advance_loop()
            return
        if turn.token is ControlToken.BEGIN_MILESTONE:
            if self._questions_remaining():
                self._set_flag("skip_requested", True)
            self._leave_inquiring()
            self._advance_loop()
            return
        if not self._post_next_batch():
            self._leave_inquiring()
            self._advance_loop()

    def _handle_feedback(self) -> None:
        if self.state.baseline_mode:
            self._baseline_completion()
            return
        turn = self._run_turn(AgentRole.INQUIRY)
        self._say(AgentRole.INQUIRY.value, turn.visible_text)
        self._set_phase(Phase.MILESTONE_DECISION)
        self._advance_loop()

    def _baseline_completion(self) -> None:
        """Single direct completion; no agents, tools, memo, or milestones."""
        messages: list[dict] = [{"role": "system", "content": BASELINE_SYSTEM_PROMPT}]
        for entry in self.state.transcript:
            role = "user" if entry["source"] == "user" else "assistant"
            messages.append({"role": role, "content": entry["text"]})
        request = ChatRequest(
            messages=messages,
            temperature=self.temperature,
            model=self.model,
            session=self.state.tag,
            role="Baseline",
            call=self._next_call("Baseline"),
        )
        response = self.backend.complete(request)
        if response.text is None:
            raise ProtocolTimeout("baseline completion returned tool calls")
        self._say(BASELINE_SOURCE, response.text)
        solution: AnnotatedSolution = self.commit({"t": "solution", "body": response.text})
        self.emit("solution_updated", {"revision_basis": solution.revision_basis})
        if self.state.phase is not Phase.SOLUTION_READY:
            self._set_phase(Phase.SOLUTION_READY)

    # -- question pacing -----------------------------------------------------

    def _live_clarify(self, need_id: str) -> bool:
        slot = self.state.memo.get(need_id)
        return slot is not None and slot.clarify

    def _collect_batch(self) -> tuple[str, list[RankedQuestion], int, int] | None:
        """Scan forward from the cursors for the next batch of live questions.

        Questions whose slots were clarified or deleted mid-flight are skipped
        silently — the memo is the source of truth, not the ranking snapshot.
        """
        state = self.state
        group_cursor, batch_cursor = state.group_cursor, state.batch_cursor
        while group_cursor < len(state.pending_groups):
            group = state.pending_groups[group_cursor]
            batch: list[RankedQuestion] = []
            while batch_cursor < len(group.questions) and len(batch) < BATCH_LIMIT:
                question = group.questions[batch_cursor]
                batch_cursor += 1
                if self._live_clarify(question.need_id):
                    batch.append(question)
            if batch:
                return group.topic, batch, group_cursor, batch_cursor
            if batch_cursor >= len(group.questions):
                group_cursor += 1
                batch_cursor = 0
        return None

    def _post_next_batch(self) -> bool:
        collected = self._collect_batch()
        if collected is None:
            return False
        topic, batch, group_cursor, batch_cursor = collected
        self.commit(
            {
                "t": "batch",
                "questions": [q.to_json() for q in batch],
                "group_cursor": group_cursor,
                "batch_cursor": batch_cursor,
            }
        )
        lines = [f"Questions posted to the user (topic: {topic}):"]
        lines += [f"{i}. [{q.need_id}] {q.question}" for i, q in enumerate(batch, 1)]
        self.commit({"t": "message", "source": "engine", "text": "\n".join(lines)})
        self.emit(
            "questions_posted",
            {"topic": topic, "questions": [q.to_json() for q in batch]},
        )
        return True

    def _questions_remaining(self) -> bool:
        return self._collect_batch() is not None

    def _leave_inquiring(self) -> None:
        self.commit({"t": "groups", "groups": []})
        self._set_phase(Phase.MILESTONE_DECISION)


def _is_duplicate_milestone(ledger: list[Milestone], text: str) -> bool:
    key = " ".join(text.split()).lower()
    return any(" ".join(m.text.split()).lower() == key for m in ledger)


def _edit_record(edit: UserEdit) -> tuple[str, dict]:
    if isinstance(edit, AddManual):
        return "add_manual", {"text": edit.text}
    if isinstance(edit, Update):
        return "update", {"id": edit.id, "text": edit.text}
    if isinstance(edit, Delete):
        return "delete", {"id": edit.id}
    raise TypeError(f"not a user edit: {edit!r}")


def start_session(
    query: str,
    baseline_mode: bool,
    backend: Backend,
    session_id: str = "local",
    **kwargs: Any,
) -> tuple[Session, list[UiEvent]]:
    """Create a session and run it up to the first awaiting phase."""
    session = Session(session_id, backend, baseline_mode=baseline_mode, **kwargs)
    events = session.start(query)
    return session, events
