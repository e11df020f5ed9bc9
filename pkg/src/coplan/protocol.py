"""Wire protocols spoken between the agents and the engine.

Three small grammars live here, all pure functions over immutable inputs:

* control tokens — exact bracketed strings an agent emits to signal a state
  transition (``[BeginPlan]``, ``[DISCOVEREND]``, ...). Each token has exactly
  one case-sensitive surface form; unknown bracketed strings are plain text.
* the ranking JSON schema — topic-keyed groups of clarification questions,
  each carrying the need id it resolves;
* need citations — ``Need ID: 001`` markers inside solution text that ground
  a recommendation in a memo slot.

Nothing here touches a backend or mutates a memo; enforcement policy lives in
the agents and orchestrator modules.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from enum import Enum

from .errors import EmptyRanking, MalformedJson, UnknownNeedId
from .memo import NeedId, NeedsMemo, normalize_need_id


class ControlToken(Enum):
    BEGIN_MILESTONE = "[BeginMilestone]"
    INQUIRY = "[Inquiry]"
    MILESTONE_END = "[MilestoneEnd]"
    BEGIN_PLAN = "[BeginPlan]"
    DISCOVER_END = "[DISCOVEREND]"
    SOLUTION_END = "[SolutionEnd]"

    @property
    def surface(self) -> str:
        return self.value


_SURFACE_TO_TOKEN = {t.value: t for t in ControlToken}
# Longest-first alternation is not needed (no surface is a prefix of another)
# but sorting keeps the pattern deterministic.
_TOKEN_RE = re.compile(
    "|".join(re.escape(s) for s in sorted(_SURFACE_TO_TOKEN, reverse=True))
)


@dataclass(frozen=True)
class TokenSpan:
    token: ControlToken
    start: int
    end: int


def scan_control_tokens(text: str) -> list[TokenSpan]:
    """All control-token occurrences with their character spans, in order."""
    return [
        TokenSpan(_SURFACE_TO_TOKEN[m.group(0)], m.start(), m.end())
        for m in _TOKEN_RE.finditer(text)
    ]


def parse_control_tokens(text: str) -> tuple[list[ControlToken], str]:
    """Split agent output into its control tokens and the visible body.

    Tokens are removed from the body; the whitespace that surrounded a token
    collapses to a single separator (newline if either side had one) so the
    remaining prose reads naturally. Bracketed strings that are not one of the
    six tokens stay in the body untouched.
    """
    spans = scan_control_tokens(text)
    if not spans:
        return [], text
    segments: list[str] = []
    cursor = 0
    for span in spans:
        segments.append(text[cursor : span.start])
        cursor = span.end
    segments.append(text[cursor:])

    body = segments[0]
    for segment in segments[1:]:
        core = body.rstrip()
        left_ws = body[len(core) :]
        stripped = segment.lstrip()
        right_ws = segment[: len(segment) - len(stripped)]
        if core and stripped:
            joiner = "\n" if ("\n" in left_ws or "\n" in right_ws) else " "
            body = core + joiner + stripped
        else:
            body = core + stripped
    return [span.token for span in spans], body.strip()


# --- ranking output -----------------------------------------------------------


@dataclass(frozen=True)
class RankedQuestion:
    need_id: NeedId
    question: str

    def to_json(self) -> dict:
        return {"need_id": self.need_id, "question": self.question}


@dataclass(frozen=True)
class QuestionGroup:
    topic: str
    questions: tuple[RankedQuestion, ...]

    def to_json(self) -> dict:
        return {
            "topic": self.topic,
            "questions": [q.to_json() for q in self.questions],
        }


@dataclass(frozen=True)
class DroppedQuestion:
    raw_id: str
    question: str
    reason: str

    def to_json(self) -> dict:
        return {"need_id": self.raw_id, "question": self.question, "reason": self.reason}


@dataclass
class RankingOutput:
    groups: list[QuestionGroup]
    dropped: list[DroppedQuestion] = field(default_factory=list)


_FENCE_RE = re.compile(r"```(?:json)?\s*\n?(.*?)```", re.DOTALL)


def _extract_json_object(text: str) -> str:
    """The first complete top-level JSON object in the text, fencing aside."""
    fenced = _FENCE_RE.search(text)
    if fenced:
        text = fenced.group(1)
    start = text.find("{")
    if start < 0:
        raise MalformedJson("no JSON object found in ranking output")
    depth = 0
    in_string = False
    escaped = False
    for i in range(start, len(text)):
        ch = text[i]
        if in_string:
            if escaped:
                escaped = False
            elif ch == "\\":
                escaped = True
            elif ch == '"':
                in_string = False
            continue
        if ch == '"':
            in_string = True
        elif ch == "{":
            depth += 1
        elif ch == "}":
            depth -= 1
            if depth == 0:
                return text[start : i + 1]
    raise MalformedJson("unbalanced JSON object in ranking output")


def parse_ranking_output(text: str, memo: NeedsMemo) -> RankingOutput:
    """Parse and validate the ranking agent's grouped-question JSON.

    Group order and question order follow the emitted key order. A question
    survives only if its need_id resolves to a live slot that still awaits
    clarification; everything else is dropped and reported. Zero surviving
    questions is an error — the orchestrator retries the turn.
    """
    try:
        payload = json.loads(_extract_json_object(text))
    except json.JSONDecodeError as exc:
        raise MalformedJson(f"ranking output is not valid JSON: {exc}") from exc
    if not isinstance(payload, dict):
        raise MalformedJson("ranking output must be a JSON object keyed by topic")

    groups: list[QuestionGroup] = []
    dropped: list[DroppedQuestion] = []
    seen: set[NeedId] = set()
    for topic, entries in payload.items():
        if not isinstance(entries, dict):
            dropped.append(DroppedQuestion("", str(entries), "topic value is not an object"))
            continue
        questions: list[RankedQuestion] = []
        for entry in entries.values():
            if not isinstance(entry, dict) or "need_id" not in entry:
                dropped.append(DroppedQuestion("", str(entry), "missing need_id"))
                continue
            raw_id = str(entry["need_id"])
            question = str(entry.get("need") or entry.get("question") or "").strip()
            try:
                need_id = normalize_need_id(raw_id)
            except UnknownNeedId:
                dropped.append(DroppedQuestion(raw_id, question, "unparseable need_id"))
                continue
            slot = memo.slots.get(need_id)
            if slot is None:
                dropped.append(DroppedQuestion(raw_id, question, "unknown need_id"))
                continue
            if not slot.clarify:
                dropped.append(DroppedQuestion(raw_id, question, "already clarified"))
                continue
            if need_id in seen:
                dropped.append(DroppedQuestion(raw_id, question, "duplicate need_id"))
                continue
            seen.add(need_id)
            questions.append(RankedQuestion(need_id, question or slot.need))
        if questions:
            groups.append(QuestionGroup(str(topic), tuple(questions)))
    if not groups:
        raise EmptyRanking(
            "ranking output yielded zero usable questions",
            dropped=[d.to_json() for d in dropped],
        )
    return RankingOutput(groups=groups, dropped=dropped)


# --- need citations -------------------------------------------------------------

# Case-sensitive; surrounding parentheses/backticks are accepted but not part
# of the span. Spans are byte offsets into the UTF-8 encoding of the body, so
# the pattern runs over bytes directly.
_REF_RE = re.compile(rb"Need ID:[ \t]*([0-9]+)")


@dataclass(frozen=True)
class NeedRef:
    id: NeedId
    start: int
    end: int

    def to_json(self) -> dict:
        return {"id": self.id, "start": self.start, "end": self.end}


def extract_need_refs(body: str) -> list[NeedRef]:
    """Every need citation in the solution body, in order of appearance.

    Clusters like ``(Need ID: 003, Need ID: 004)`` yield one ref each. Ids
    tolerate missing zero-padding; "Need ID: 1" cites slot "001".
    """
    data = body.encode("utf-8")
    return [
        NeedRef(
            id=normalize_need_id(m.group(1).decode("ascii")),
            start=m.start(),
            end=m.end(),
        )
        for m in _REF_RE.finditer(data)
    ]


@dataclass
class AnnotatedSolution:
    """Solution text plus the extracted citations linking it to the memo."""

    body: str
    refs: list[NeedRef]
    revision_basis: int

    @classmethod
    def from_body(cls, body: str, revision_basis: int) -> "AnnotatedSolution":
        return cls(body=body, refs=extract_need_refs(body), revision_basis=revision_basis)

    def to_json(self) -> dict:
        return {
            "body": self.body,
            "refs": [r.to_json() for r in self.refs],
            "revision_basis": self.revision_basis,
        }


@dataclass(frozen=True)
class RefReport:
    dangling: tuple[NeedId, ...]
    uncited_wanted: tuple[NeedId, ...]

    @property
    def grounded(self) -> bool:
        return not self.dangling


def validate_solution_refs(solution: AnnotatedSolution, memo: NeedsMemo) -> RefReport:
    """Check every citation against the memo's wanted set.

    ``dangling`` ids are fatal-grade (cited but unknown or not wanted);
    ``uncited_wanted`` is informational — full citation coverage is not
    required, sections may share one citation.
    """
    cited = {ref.id for ref in solution.refs}
    wanted = {slot.id for slot in memo.get_user_want_needs()}
    return RefReport(
        dangling=tuple(sorted(cited - wanted, key=int)),
        uncited_wanted=tuple(sorted(wanted - cited, key=int)),
    )


# --- milestone block ---------------------------------------------------------------

_MILESTONE_LINE = re.compile(r"Next milestone:\s*(.+)")
_EXPLANATION_LINE = re.compile(r"^\s*-?\s*Explanation:\s*(.+)$", re.MULTILINE)


def parse_milestone_block(body: str) -> tuple[str, str]:
    """Recover (milestone, explanation) from a coordination agent's hand-off.

    The milestone is taken from the ``Next milestone:`` line; when the agent
    deviates from the block shape, the whole body counts as the milestone so
    discovery still receives a directive.
    """
    match = _MILESTONE_LINE.search(body)
    if not match:
        return body.strip(), ""
    milestone = match.group(1).strip()
    explanation_match = _EXPLANATION_LINE.search(body)
    explanation = explanation_match.group(1).strip() if explanation_match else ""
    return milestone, explanation
