"""Regenerate the shipped scripted fixture set and its replay expectation.

Run from the repository root after changing the canonical flow:

    python3 scripts/regen_fixtures.py
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "tests"))

import flows  # noqa: E402
from coplan.backend import save_fixtures  # noqa: E402
from coplan.orchestrator import Session, build_panels  # noqa: E402

FIXTURE_DIR = ROOT / "src" / "coplan" / "fixtures"


def main() -> None:
    script = flows.hawaii_script("hawaii")
    save_fixtures(script.fixtures(), FIXTURE_DIR / "hawaii.jsonl")

    session = Session("hawaii", script.backend(), tag="hawaii")
    session.start(flows.HAWAII_QUERY)
    for text in flows.HAWAII_INPUTS:
        session.handle_user_message(text)

    expectation = {
        "name": "hawaii",
        "query": flows.HAWAII_QUERY,
        "mode": "care",
        "session_tag": "hawaii",
        "inputs": [{"kind": "message", "text": text} for text in flows.HAWAII_INPUTS],
        "expected": {
            "events": [event.to_json() for event in session.state.events],
            "panels": build_panels(session.state),
        },
    }
    out = FIXTURE_DIR / "hawaii.expect.json"
    out.write_text(json.dumps(expectation, ensure_ascii=False, indent=2) + "\n", encoding="utf-8")
    print(f"wrote {FIXTURE_DIR / 'hawaii.jsonl'}")
    print(f"wrote {out} ({len(expectation['expected']['events'])} events)")


if __name__ == "__main__":
    main()
