"""Authoritative store for user needs.

A :class:`NeedsMemo` is an ordered collection of :class:`NeedSlot` entries,
each either a confirmed need description or a pending clarification question
(``clarify=True``). The memo is the single source of truth shared by the
agent tools, the orchestrator, and the needs panel: agents read it through
the query views below and mutate it only through the three write operations
(:meth:`NeedsMemo.add_need_slot`, :meth:`NeedsMemo.fill_need_slot`,
:meth:`NeedsMemo.apply_user_edit`).

Invariants enforced on every mutation:

* ids are zero-padded decimal strings assigned incrementally and never reused;
* ``revision`` increases by exactly one per successful mutation;
* a slot with ``clarify=True`` always has ``want=UNANSWERED`` and vice versa
  for freshly added question slots;
* explicit/manual slots are created confirmed (``clarify=False``, wanted).
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterator, Union

from .errors import (
    AlreadyClarified,
    DuplicateNeed,
    EmptyNeed,
    InvalidCombination,
    InvalidWant,
    ReopenNotSupported,
    UnknownNeedId,
)

# Ids are rendered with at least three digits ("000", "001", ...) and widen
# naturally past 999. They sort numerically, not lexically.
NeedId = str

_ID_WIDTH = 3
_WS_RUN = re.compile(r"\s+")


def format_need_id(number: int) -> NeedId:
    if number < 0:
        raise ValueError(f"need id numbers are non-negative, got {number}")
    return str(number).zfill(_ID_WIDTH)


def normalize_need_id(raw: str | int) -> NeedId:
    """Canonicalize a loosely formatted id ("1", "01", 1) to "001" form.

    Models cannot be trusted to zero-pad, so every id crossing a protocol
    boundary goes through here before a memo lookup.
    """
    text = str(raw).strip()
    if not text.isdigit():
        raise UnknownNeedId(f"not a need id: {raw!r}", raw=str(raw))
    return format_need_id(int(text))


class WantStatus(Enum):
    WANTED = "Wanted"
    DECLINED = "Declined"
    UNANSWERED = "Unanswered"


class NeedOrigin(Enum):
    USER_EXPLICIT = "UserExplicit"
    AGENT_INFERRED = "AgentInferred"
    USER_MANUAL = "UserManual"


@dataclass
class NeedSlot:
    """One memo entry: a need description or a pending clarification question."""

    id: NeedId
    need: str
    clarify: bool
    want: WantStatus
    origin: NeedOrigin
    created_seq: int
    updated_seq: int

    def to_json(self) -> dict:
        """Canonical wire form; field order is part of the contract."""
        return {
            "need": self.need,
            "clarify": self.clarify,
            "user_want": _WANT_TO_WIRE[self.want],
            "origin": self.origin.value,
        }


_WANT_TO_WIRE = {
    WantStatus.WANTED: "true",
    WantStatus.DECLINED: "false",
    WantStatus.UNANSWERED: None,
}
_WIRE_TO_WANT = {v: k for k, v in _WANT_TO_WIRE.items()}


# User edits accepted by apply_user_edit; constructed by the service layer.

@dataclass(frozen=True)
class AddManual:
    text: str


@dataclass(frozen=True)
class Update:
    id: NeedId
    text: str


@dataclass(frozen=True)
class Delete:
    id: NeedId


UserEdit = Union[AddManual, Update, Delete]


def _dedupe_key(text: str) -> str:
    return _WS_RUN.sub(" ", text.strip()).lower()


@dataclass
class NeedsMemo:
    """Ordered, revisioned store of need slots for one session."""

    slots: dict[NeedId, NeedSlot] = field(default_factory=dict)
    next_id: int = 0
    revision: int = 0

    # -- write operations ----------------------------------------------------

    def add_need_slot(
        self,
        need: str,
        clarify: bool,
        want: WantStatus,
        origin: NeedOrigin,
    ) -> NeedId:
        """Append a new slot and return its fresh id.

        Exact duplicates (case-insensitive, whitespace-normalized) among live
        slots are rejected; semantic near-duplicates are the discovery role's
        problem, not the store's.
        """
        text = need.strip()
        if not text:
            raise EmptyNeed("need text is empty")
        if clarify and want is not WantStatus.UNANSWERED:
            raise InvalidCombination(
                f"a clarification question must be Unanswered, got {want.value}"
            )
        if not clarify and want is WantStatus.UNANSWERED:
            raise InvalidCombination("a confirmed need cannot be Unanswered")
        if origin in (NeedOrigin.USER_EXPLICIT, NeedOrigin.USER_MANUAL) and clarify:
            raise InvalidCombination(f"{origin.value} slots are created confirmed")
        if origin is NeedOrigin.USER_EXPLICIT and want is not WantStatus.WANTED:
            raise InvalidCombination("explicit needs are recorded as wanted")
        collision = self._find_duplicate(text)
        if collision is not None:
            raise DuplicateNeed(
                f"need duplicates slot {collision}", need_id=collision
            )
        need_id = format_need_id(self.next_id)
        self.next_id += 1
        self.revision += 1
        self.slots[need_id] = NeedSlot(
            id=need_id,
            need=text,
            clarify=clarify,
            want=want,
            origin=origin,
            created_seq=self.revision,
            updated_seq=self.revision,
        )
        return need_id

    def fill_need_slot(self, need_id: NeedId, answer: str, want: WantStatus) -> NeedSlot:
        """Resolve a clarification question with the user's detailed answer.

        The stored text becomes the answer itself (a full sentence, not a bare
        value), clarify flips off, and want records whether the user answered
        or declined.
        """
        slot = self._get(need_id)
        if not slot.clarify:
            raise AlreadyClarified(f"slot {slot.id} is not awaiting clarification")
        if want is WantStatus.UNANSWERED:
            raise InvalidWant("a filled slot must be Wanted or Declined")
        text = answer.strip()
        if not text:
            raise EmptyNeed("answer text is empty")
        self.revision += 1
        slot.need = text
        slot.clarify = False
        slot.want = want
        slot.updated_seq = self.revision
        return slot

    def apply_user_edit(self, edit: UserEdit) -> int:
        """Apply a needs-panel edit and return the new revision."""
        if isinstance(edit, AddManual):
            self.add_need_slot(
                edit.text,
                clarify=False,
                want=WantStatus.WANTED,
                origin=NeedOrigin.USER_MANUAL,
            )
        elif isinstance(edit, Update):
            slot = self._get(edit.id)
            text = edit.text.strip()
            if not text:
                raise EmptyNeed("need text is empty")
            self.revision += 1
            slot.need = text
            slot.updated_seq = self.revision
        elif isinstance(edit, Delete):
            slot = self._get(edit.id)
            self.revision += 1
            del self.slots[slot.id]
        else:
            raise TypeError(f"not a user edit: {edit!r}")
        return self.revision

    def reopen_need(self, need_id: NeedId) -> None:
        """Re-asking a resolved slot is deliberately unsupported."""
        slot = self._get(need_id)
        raise ReopenNotSupported(
            f"slot {slot.id} has want={slot.want.value}; reopening is not supported"
        )

    # -- query views ----------------------------------------------------------

    def get_all_needs(self) -> dict[str, list[NeedSlot]]:
        """Partition live slots by want status, each list in id order."""
        parts: dict[str, list[NeedSlot]] = {
            "wanted": [],
            "declined": [],
            "unanswered": [],
        }
        for slot in self:
            if slot.want is WantStatus.WANTED:
                parts["wanted"].append(slot)
            elif slot.want is WantStatus.DECLINED:
                parts["declined"].append(slot)
            else:
                parts["unanswered"].append(slot)
        return parts

    def get_clarify_needs(self) -> list[NeedSlot]:
        return [slot for slot in self if slot.clarify]

    def get_user_want_needs(self) -> list[NeedSlot]:
        return [slot for slot in self if slot.want is WantStatus.WANTED]

    def get(self, need_id: str | int) -> NeedSlot | None:
        try:
            return self.slots.get(normalize_need_id(need_id))
        except UnknownNeedId:
            return None

    # -- serialization ---------------------------------------------------------

    def to_json(self) -> dict:
        """Canonical memo serialization, keyed by id, ascending."""
        return {slot.id: slot.to_json() for slot in self}

    def snapshot(self) -> dict:
        """Slots plus counters, for panels and persistence checks."""
        return {
            "slots": self.to_json(),
            "next_id": self.next_id,
            "revision": self.revision,
        }

    def __iter__(self) -> Iterator[NeedSlot]:
        return iter(sorted(self.slots.values(), key=lambda s: int(s.id)))

    def __len__(self) -> int:
        return len(self.slots)

    # -- internals ---------------------------------------------------------------

    def _get(self, need_id: str | int) -> NeedSlot:
        canonical = normalize_need_id(need_id)
        slot = self.slots.get(canonical)
        if slot is None:
            raise UnknownNeedId(f"no slot with id {canonical}", need_id=canonical)
        return slot

    def _find_duplicate(self, text: str) -> NeedId | None:
        key = _dedupe_key(text)
        for slot in self.slots.values():
            if _dedupe_key(slot.need) == key:
                return slot.id
        return None


def want_from_wire(value: str | bool | None) -> WantStatus:
    """Map wire-level user_want (true/false/null, possibly stringly) to status."""
    if isinstance(value, bool):
        return WantStatus.WANTED if value else WantStatus.DECLINED
    if value is None:
        return WantStatus.UNANSWERED
    lowered = str(value).strip().lower()
    if lowered in ("true", "yes"):
        return WantStatus.WANTED
    if lowered in ("false", "no"):
        return WantStatus.DECLINED
    if lowered in ("null", "none", ""):
        return WantStatus.UNANSWERED
    raise InvalidWant(f"unrecognized user_want value: {value!r}")
