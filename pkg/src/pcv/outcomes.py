"""Protocol results."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

ACCEPT = "Accept"
REJECT = "Reject"


@dataclass
class Outcome:
    """Accept or Reject, with a reason for rejections and protocol details."""

    accepted: bool
    reason: str | None = None
    details: dict[str, Any] = field(default_factory=dict)

    @property
    def label(self) -> str:
        return ACCEPT if self.accepted else REJECT

    @classmethod
    def accept(cls, **details) -> Outcome:
        return cls(True, None, details)

    @classmethod
    def reject(cls, reason: str, **details) -> Outcome:
        return cls(False, reason, details)

    def __bool__(self):
        return self.accepted
