"""Domain errors raised across the package.

Every error carries a ``payload`` dict so the CLI can serialize it.
"""

from __future__ import annotations


class DomainError(Exception):
    """Base class for mathematical (non-usage) failures."""

    code = "DomainError"

    def __init__(self, message: str = "", **payload):
        super().__init__(message or self.code)
        self.payload = payload

    def to_json(self) -> dict:
        out = {"error": self.code, "message": str(self)}
        out.update(self.payload)
        return out


class NotPIntegral(DomainError):
    code = "NotPIntegral"


class UnreachableTarget(DomainError):
    code = "UnreachableTarget"


class MissingSquareRoot(DomainError):
    code = "MissingSquareRoot"


class FactorialNotInvertible(DomainError):
    code = "FactorialNotInvertible"


class NotNilpotent(DomainError):
    code = "NotNilpotent"


class NotUnipotent(DomainError):
    code = "NotUnipotent"


class InadmissiblePartition(DomainError):
    code = "InadmissiblePartition"


class UnequalTotals(DomainError):
    code = "UnequalTotals"


class NotInAlgebra(DomainError):
    code = "NotInAlgebra"


class NotInGroup(DomainError):
    code = "NotInGroup"


class NotInvertible(DomainError):
    code = "NotInvertible"


class NotConjugate(DomainError):
    code = "NotConjugate"
