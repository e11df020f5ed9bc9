"""coplan: collaborative needs-elicitation and grounded solution drafting.

Five cooperating chat-completion roles elicit a user's explicit, implicit,
and latent needs into a shared, user-editable needs memo, then draft
solutions whose sections cite the memo entries they satisfy. The engine is
backend-agnostic: any chat-completions endpoint works live, and a scripted
replay backend makes every flow deterministic for tests and demos.
"""

from .agents import (
    AgentRole,
    AgentSpec,
    AgentTurnResult,
    PromptPack,
    ToolHost,
    assemble_context,
    build_agent_specs,
    enforce_tool_policy,
    run_agent_turn,
)
from .backend import (
    Backend,
    BackendConfig,
    ChatRequest,
    ChatResponse,
    Fixture,
    HttpBackend,
    RecordingBackend,
    ScriptedBackend,
    ToolCall,
    load_fixtures,
    request_digest,
    save_fixtures,
)
from .errors import CoplanError
from .memo import (
    AddManual,
    Delete,
    NeedOrigin,
    NeedSlot,
    NeedsMemo,
    Update,
    WantStatus,
)
from .orchestrator import (
    Milestone,
    Phase,
    Session,
    SessionState,
    UiEvent,
    build_panels,
    replay_records,
    start_session,
)
from .protocol import (
    AnnotatedSolution,
    ControlToken,
    NeedRef,
    QuestionGroup,
    RankedQuestion,
    extract_need_refs,
    parse_control_tokens,
    parse_ranking_output,
    validate_solution_refs,
)
from .service import SessionService, build_server
from .storage import SessionLog, canonical_json

__version__ = "0.1.0"

__all__ = [
    "AgentRole",
    "AgentSpec",
    "AgentTurnResult",
    "AddManual",
    "AnnotatedSolution",
    "Backend",
    "BackendConfig",
    "ChatRequest",
    "ChatResponse",
    "ControlToken",
    "CoplanError",
    "Delete",
    "Fixture",
    "HttpBackend",
    "Milestone",
    "NeedOrigin",
    "NeedRef",
    "NeedSlot",
    "NeedsMemo",
    "Phase",
    "PromptPack",
    "QuestionGroup",
    "RankedQuestion",
    "RecordingBackend",
    "ScriptedBackend",
    "Session",
    "SessionLog",
    "SessionService",
    "SessionState",
    "ToolCall",
    "ToolHost",
    "UiEvent",
    "Update",
    "WantStatus",
    "assemble_context",
    "build_agent_specs",
    "build_panels",
    "build_server",
    "canonical_json",
    "enforce_tool_policy",
    "extract_need_refs",
    "load_fixtures",
    "parse_control_tokens",
    "parse_ranking_output",
    "replay_records",
    "request_digest",
    "run_agent_turn",
    "save_fixtures",
    "start_session",
    "validate_solution_refs",
]
