"""Exception types and violation records shared across modules."""

from __future__ import annotations

from dataclasses import dataclass


class InputError(ValueError):
    """Malformed or out-of-contract user input (CLI exit code 2)."""


@dataclass(frozen=True)
class Violation:
    """One violated invariant, naming the offending vertex/edge/field."""

    code: str
    subject: str
    message: str

    def to_dict(self) -> dict:
        return {"code": self.code, "subject": self.subject, "message": self.message}


class FlowValidationError(InputError):
    """A flow failed structural invariants; carries the full violation list."""

    def __init__(self, violations: list[Violation]):
        self.violations = tuple(violations)
        summary = "; ".join(f"{v.code}[{v.subject}]: {v.message}" for v in self.violations)
        super().__init__(f"invalid flow: {summary}")
