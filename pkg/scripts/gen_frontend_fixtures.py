"""Generate golden fixtures for the frontend test suite from the engine.

The frontend never re-derives citation spans or event payloads; its tests
replay exactly what the service would send.

    python3 scripts/gen_frontend_fixtures.py
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "tests"))

import flows  # noqa: E402
from coplan.memo import Delete, NeedOrigin, NeedsMemo, WantStatus  # noqa: E402
from coplan.orchestrator import Session, build_panels  # noqa: E402
from coplan.protocol import AnnotatedSolution  # noqa: E402

OUT = ROOT / "frontend" / "tests" / "fixtures"


def hawaii_delete_fixture() -> dict:
    script = flows.manual_delete_script("manual-delete")
    session = Session("manual-delete", script.backend(), tag="manual-delete")
    session.start(flows.HAWAII_QUERY)
    for text in flows.HAWAII_INPUTS:
        session.handle_user_message(text)
    panels_before = build_panels(session.state)
    events_before = [event.to_json() for event in session.state.events]
    delete_events = [event.to_json() for event in session.apply_manual_edit(Delete("004"))]
    return {
        "query": flows.HAWAII_QUERY,
        "panels_before": panels_before,
        "events_before": events_before,
        "delete_need_id": "004",
        "delete_events": delete_events,
        "panels_after": build_panels(session.state),
    }


def sample_anchor_fixture() -> dict:
    body = (ROOT / "tests" / "data" / "sample_solution.md").read_text(encoding="utf-8")
    memo = NeedsMemo()
    memo.add_need_slot(
        "Placeholder question?",
        clarify=True,
        want=WantStatus.UNANSWERED,
        origin=NeedOrigin.AGENT_INFERRED,
    )
    memo.fill_need_slot("000", "User declined to answer.", WantStatus.DECLINED)
    requirements = [
        "Family suite accommodation in central Paris.",
        "Unlimited public transportation for the stay.",
        "Classic tourist spots on the itinerary.",
        "Child-friendly activities for the kids.",
        "Authentic French dining options.",
        "A moderate, clearly broken-down budget.",
        "A balanced day-by-day itinerary.",
        "Advance bookings wherever possible.",
        "Easy navigation around the city.",
        "Hotel staff support for recommendations.",
    ]
    for text in requirements:
        memo.add_need_slot(
            text, clarify=False, want=WantStatus.WANTED, origin=NeedOrigin.USER_EXPLICIT
        )
    solution = AnnotatedSolution.from_body(body, memo.revision)
    return {
        "solution": solution.to_json(),
        "needs": {"slots": memo.to_json(), "revision": memo.revision},
    }


def main() -> None:
    from coplan.backend import save_fixtures

    OUT.mkdir(parents=True, exist_ok=True)
    (OUT / "hawaii.json").write_text(
        json.dumps(hawaii_delete_fixture(), ensure_ascii=False, indent=2) + "\n",
        encoding="utf-8",
    )
    (OUT / "sample_anchor.json").write_text(
        json.dumps(sample_anchor_fixture(), ensure_ascii=False, indent=2) + "\n",
        encoding="utf-8",
    )
    # backend fixtures for spinning up the real service under the UI tests
    save_fixtures(
        flows.manual_delete_script("manual-delete").fixtures(),
        OUT / "manual_delete.fixtures.jsonl",
    )
    print(f"wrote fixtures under {OUT}")


if __name__ == "__main__":
    main()
