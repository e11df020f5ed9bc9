"""Control tokens, ranking JSON, and need-citation grammar."""

from __future__ import annotations

import json
from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from coplan.errors import EmptyRanking, MalformedJson
from coplan.memo import NeedOrigin, NeedsMemo, WantStatus
from coplan.protocol import (
    AnnotatedSolution,
    ControlToken,
    extract_need_refs,
    parse_control_tokens,
    parse_milestone_block,
    parse_ranking_output,
    scan_control_tokens,
    validate_solution_refs,
)

DATA = Path(__file__).parent / "data"
SAMPLE_SOLUTION = (DATA / "sample_solution.md").read_text(encoding="utf-8")

SURFACES = [t.value for t in ControlToken]


def naive_token_scan(text: str) -> list[str]:
    """Independent oracle: literal substring search per surface form."""
    hits: list[tuple[int, str]] = []
    for surface in SURFACES:
        start = 0
        while True:
            pos = text.find(surface, start)
            if pos < 0:
                break
            hits.append((pos, surface))
            start = pos + len(surface)
    return [surface for _, surface in sorted(hits)]


def ref_walk_oracle(body: str) -> list[tuple[str, int, int]]:
    """Independent citation oracle: byte walk, no regex."""
    data = body.encode("utf-8")
    literal = b"Need ID:"
    found: list[tuple[str, int, int]] = []
    i = 0
    while i <= len(data) - len(literal):
        if data[i : i + len(literal)] == literal:
            j = i + len(literal)
            while j < len(data) and data[j : j + 1] in (b" ", b"\t"):
                j += 1
            k = j
            while k < len(data) and data[k : k + 1].isdigit():
                k += 1
            if k > j:
                digits = data[j:k].decode("ascii")
                found.append((str(int(digits)).zfill(3), i, k))
                i = k
                continue
        i += 1
    return found


class TestControlTokens:
    def test_all_six_round_trip(self):
        for token in ControlToken:
            parsed, body = parse_control_tokens(token.surface)
            assert parsed == [token]
            assert body == ""
            assert token.surface.startswith("[") and token.surface.endswith("]")

    def test_exact_surface_forms(self):
        assert {t.surface for t in ControlToken} == {
            "[BeginMilestone]",
            "[Inquiry]",
            "[MilestoneEnd]",
            "[BeginPlan]",
            "[DISCOVEREND]",
            "[SolutionEnd]",
        }

    def test_relay_message_shape(self):
        tokens, body = parse_control_tokens("some text...\n[BeginMilestone]")
        assert tokens == [ControlToken.BEGIN_MILESTONE]
        assert body == "some text..."

    def test_plain_text_passes_through(self):
        assert parse_control_tokens("hello") == ([], "hello")

    def test_repeated_token_removal_collapses_whitespace(self):
        tokens, body = parse_control_tokens("[Inquiry] x [Inquiry]")
        assert tokens == [ControlToken.INQUIRY, ControlToken.INQUIRY]
        assert body == "x"

    def test_case_sensitivity(self):
        tokens, body = parse_control_tokens("[discoverend] then [DISCOVEREND]")
        assert tokens == [ControlToken.DISCOVER_END]
        assert "[discoverend]" in body

    def test_unknown_bracketed_strings_stay_in_body(self):
        tokens, body = parse_control_tokens("keep [NotAToken] here [BeginPlan]")
        assert tokens == [ControlToken.BEGIN_PLAN]
        assert body == "keep [NotAToken] here"

    def test_interior_newlines_preserved(self):
        _, body = parse_control_tokens("line1\nline2\n[MilestoneEnd]")
        assert body == "line1\nline2"

    @settings(max_examples=300, deadline=None)
    @given(
        pieces=st.lists(
            st.one_of(
                st.sampled_from(SURFACES),
                st.sampled_from(["[Unknown]", "[inquiry]", "x", " ", "\n", "a]b[", ""]),
                st.text(max_size=6),
            ),
            max_size=12,
        )
    )
    def test_scan_matches_naive_oracle(self, pieces: list[str]):
        text = "".join(pieces)
        assert [s.token.value for s in scan_control_tokens(text)] == naive_token_scan(text)

    @settings(max_examples=200, deadline=None)
    @given(
        pieces=st.lists(
            st.one_of(st.sampled_from(SURFACES), st.text(max_size=8)), max_size=10
        )
    )
    def test_spans_reinsert_to_original(self, pieces: list[str]):
        text = "".join(pieces)
        spans = scan_control_tokens(text)
        # removing by span then re-inserting at the recorded offsets is identity
        gutted = []
        cursor = 0
        for span in spans:
            gutted.append(text[cursor : span.start])
            cursor = span.end
        gutted.append(text[cursor:])
        rebuilt = ""
        for segment, span in zip(gutted, spans):
            rebuilt += segment + span.token.surface
        rebuilt += gutted[-1]
        assert rebuilt == text
        assert [s.token for s in scan_control_tokens(rebuilt)] == [s.token for s in spans]


def ranking_memo() -> NeedsMemo:
    memo = NeedsMemo()
    memo.add_need_slot(
        "The travel destination is Paris.",
        clarify=False,
        want=WantStatus.WANTED,
        origin=NeedOrigin.USER_EXPLICIT,
    )
    for question in (
        "What type of accommodation does the user prefer?",
        "Does the user need family-friendly amenities?",
        "What is the user's approximate budget?",
    ):
        memo.add_need_slot(
            question,
            clarify=True,
            want=WantStatus.UNANSWERED,
            origin=NeedOrigin.AGENT_INFERRED,
        )
    return memo


RANKING_SKELETON = {
    "Topic 1": {
        "question-1": {
            "need_id": "001",
            "need": "What type of accommodation does the user prefer?",
        },
        "question-2": {
            "need_id": "002",
            "need": "Does the user need family-friendly amenities?",
        },
    },
    "Topic 2": {
        "question-1": {
            "need_id": "003",
            "need": "What is the user's approximate budget?",
        },
    },
}


class TestRankingOutput:
    def test_skeleton_two_groups_sizes_2_and_1(self):
        parsed = parse_ranking_output(json.dumps(RANKING_SKELETON), ranking_memo())
        assert [g.topic for g in parsed.groups] == ["Topic 1", "Topic 2"]
        assert [len(g.questions) for g in parsed.groups] == [2, 1]
        assert parsed.groups[0].questions[0].need_id == "001"
        assert parsed.dropped == []

    def test_fenced_equals_unfenced(self):
        memo = ranking_memo()
        plain = parse_ranking_output(json.dumps(RANKING_SKELETON), memo)
        fenced = parse_ranking_output(
            "Step by step, the grouping is:\n```json\n"
            + json.dumps(RANKING_SKELETON, indent=2)
            + "\n```\n",
            memo,
        )
        assert fenced.groups == plain.groups

    def test_unknown_id_yields_empty_ranking_with_report(self):
        memo = ranking_memo()
        payload = {"Topic 1": {"question-1": {"need_id": "009", "need": "Missing?"}}}
        with pytest.raises(EmptyRanking) as exc:
            parse_ranking_output(json.dumps(payload), memo)
        dropped = exc.value.details["dropped"]
        assert len(dropped) == 1
        assert dropped[0]["need_id"] == "009"
        assert dropped[0]["reason"] == "unknown need_id"

    def test_clarified_ids_dropped_but_rest_survive(self):
        memo = ranking_memo()
        memo.fill_need_slot("001", "The user prefers a hotel.", WantStatus.WANTED)
        parsed = parse_ranking_output(json.dumps(RANKING_SKELETON), memo)
        assert [len(g.questions) for g in parsed.groups] == [1, 1]
        assert parsed.dropped[0].reason == "already clarified"

    def test_malformed_json(self):
        with pytest.raises(MalformedJson):
            parse_ranking_output("no json here at all", ranking_memo())
        with pytest.raises(MalformedJson):
            parse_ranking_output('{"Topic 1": {unquoted}}', ranking_memo())

    def test_loose_id_forms_resolve(self):
        memo = ranking_memo()
        payload = {"T": {"q1": {"need_id": "1", "need": "Accommodation?"}}}
        parsed = parse_ranking_output(json.dumps(payload), memo)
        assert parsed.groups[0].questions[0].need_id == "001"

    def test_duplicate_ids_dropped(self):
        memo = ranking_memo()
        payload = {
            "T": {
                "q1": {"need_id": "001", "need": "Accommodation?"},
                "q2": {"need_id": "001", "need": "Accommodation again?"},
            }
        }
        parsed = parse_ranking_output(json.dumps(payload), memo)
        assert [len(g.questions) for g in parsed.groups] == [1]
        assert parsed.dropped[0].reason == "duplicate need_id"

    def test_never_returns_unresolvable_question(self):
        memo = ranking_memo()
        payload = dict(RANKING_SKELETON)
        payload["Topic 3"] = {"question-1": {"need_id": "042", "need": "Ghost?"}}
        parsed = parse_ranking_output(json.dumps(payload), memo)
        for group in parsed.groups:
            for question in group.questions:
                slot = memo.slots[question.need_id]
                assert slot.clarify


class TestNeedRefs:
    def test_sample_solution_golden_id_set(self):
        refs = extract_need_refs(SAMPLE_SOLUTION)
        assert {r.id for r in refs} == {f"{i:03d}" for i in range(1, 11)}
        assert len(refs) == 11  # 010 is cited twice

    def test_no_citations(self):
        assert extract_need_refs("no citations here") == []

    def test_decoys_rejected(self):
        body = "Need ID 12 and need id: 3 are not citations, Need ID: 7 is."
        refs = extract_need_refs(body)
        assert [r.id for r in refs] == ["007"]

    def test_cluster_yields_one_ref_each(self):
        refs = extract_need_refs("ok `(Need ID: 003, Need ID: 004)` done")
        assert [r.id for r in refs] == ["003", "004"]

    def test_spans_are_byte_addressed_and_faithful(self):
        body = "émoji ✨ before (Need ID: 042) and after"
        refs = extract_need_refs(body)
        assert len(refs) == 1
        data = body.encode("utf-8")
        sliced = data[refs[0].start : refs[0].end].decode("utf-8")
        assert sliced == "Need ID: 042"

    @settings(max_examples=300, deadline=None)
    @given(
        pieces=st.lists(
            st.one_of(
                st.sampled_from(
                    [
                        "Need ID: 001",
                        "(Need ID: 7)",
                        "`Need ID: 12`",
                        "Need ID 12",
                        "need id: 3",
                        "Need ID:",
                        "Need ID:  42",
                        "✨",
                        "plain text",
                        "\n",
                    ]
                ),
                st.text(max_size=6),
            ),
            max_size=10,
        )
    )
    def test_extraction_matches_walk_oracle(self, pieces: list[str]):
        body = "".join(pieces)
        got = [(r.id, r.start, r.end) for r in extract_need_refs(body)]
        assert got == ref_walk_oracle(body)
        data = body.encode("utf-8")
        for ref_id, start, end in got:
            segment = data[start:end].decode("utf-8")
            assert segment.startswith("Need ID:")
            assert segment.rstrip("0123456789").rstrip() == "Need ID:" or segment
        # spans never overlap
        for (_, _, prev_end), (_, nxt_start, _) in zip(got, got[1:]):
            assert prev_end <= nxt_start


def memo_with_wanted(count: int, declined_first: bool = False) -> NeedsMemo:
    memo = NeedsMemo()
    if declined_first:
        memo.add_need_slot(
            "Placeholder question?",
            clarify=True,
            want=WantStatus.UNANSWERED,
            origin=NeedOrigin.AGENT_INFERRED,
        )
        memo.fill_need_slot("000", "User declined to answer.", WantStatus.DECLINED)
    for i in range(count):
        memo.add_need_slot(
            f"confirmed need {i}",
            clarify=False,
            want=WantStatus.WANTED,
            origin=NeedOrigin.USER_EXPLICIT,
        )
    return memo


class TestValidateRefs:
    def test_sample_against_fully_cited_memo(self):
        # slots 001..010 wanted, slot 000 declined: citation set covers wanted exactly
        memo = memo_with_wanted(10, declined_first=True)
        solution = AnnotatedSolution.from_body(SAMPLE_SOLUTION, memo.revision)
        report = validate_solution_refs(solution, memo)
        assert report.dangling == ()
        assert report.uncited_wanted == ()
        assert report.grounded

    def test_dangling_detected_by_set_difference(self):
        memo = memo_with_wanted(2)  # ids 000, 001
        solution = AnnotatedSolution.from_body("see (Need ID: 005)", memo.revision)
        report = validate_solution_refs(solution, memo)
        assert report.dangling == ("005",)

    def test_declined_citation_is_dangling(self):
        memo = memo_with_wanted(1, declined_first=True)  # 000 declined, 001 wanted
        solution = AnnotatedSolution.from_body(
            "core (Need ID: 001) extra (Need ID: 000)", memo.revision
        )
        report = validate_solution_refs(solution, memo)
        assert report.dangling == ("000",)

    def test_empty_body_reports_all_wanted_uncited(self):
        memo = memo_with_wanted(3)
        solution = AnnotatedSolution.from_body("", memo.revision)
        report = validate_solution_refs(solution, memo)
        assert report.dangling == ()
        assert report.uncited_wanted == ("000", "001", "002")

    @settings(max_examples=200, deadline=None)
    @given(
        cited=st.sets(st.integers(0, 12), max_size=8),
        wanted=st.sets(st.integers(0, 12), max_size=8),
    )
    def test_grounded_iff_cited_subset_of_wanted(self, cited: set[int], wanted: set[int]):
        memo = NeedsMemo()
        for i in range(13):
            memo.add_need_slot(
                f"q {i}?",
                clarify=True,
                want=WantStatus.UNANSWERED,
                origin=NeedOrigin.AGENT_INFERRED,
            )
        for i in wanted:
            memo.fill_need_slot(f"{i:03d}", f"answer {i}", WantStatus.WANTED)
        body = " ".join(f"(Need ID: {i:03d})" for i in sorted(cited))
        report = validate_solution_refs(
            AnnotatedSolution.from_body(body, memo.revision), memo
        )
        assert report.grounded == (set(f"{i:03d}" for i in cited) <= set(f"{i:03d}" for i in wanted))


class TestMilestoneBlock:
    def test_block_shape(self):
        body = (
            "Next milestone: Collect the traveler's accommodation preferences.\n"
            "    - Explanation: The memo lacks lodging details.\n"
            "User query/feedback: Plan a 5-day trip to Hawaii"
        )
        milestone, explanation = parse_milestone_block(body)
        assert milestone == "Collect the traveler's accommodation preferences."
        assert explanation == "The memo lacks lodging details."

    def test_fallback_to_whole_body(self):
        milestone, explanation = parse_milestone_block("just do lodging next")
        assert milestone == "just do lodging next"
        assert explanation == ""
