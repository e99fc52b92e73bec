"""Structured results of identity and inequality checks, with CSV serialisation."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field, replace
from typing import Iterable

from .rational import exact_sign, format_rational

CSV_HEADER = ("identity", "model", "N", "k", "seed", "lhs", "rhs", "residual", "pass")

PASS, FAIL, SKIP = "pass", "fail", "boundary-skip"


@dataclass(frozen=True)
class VerificationReport:
    """One checked statement.

    ``kind`` is ``"identity"`` (pass iff ``residual == 0``), ``"inequality"``
    (``residual`` is the slack ``rhs - lhs``; pass iff it is ``>= 0``),
    ``"float"`` (pass iff ``|residual| <= tolerance``) or ``"predicate"``.
    """

    identity: str
    model: str
    N: int
    k: int
    lhs: object
    rhs: object
    residual: object
    status: str
    kind: str = "identity"
    seed: int | None = None
    tolerance: float | None = None
    details: dict = field(default_factory=dict, compare=False)

    @property
    def passed(self) -> bool:
        return self.status == PASS

    @property
    def skipped(self) -> bool:
        return self.status == SKIP

    @property
    def failed(self) -> bool:
        return self.status == FAIL

    def with_seed(self, seed: int | None) -> "VerificationReport":
        return replace(self, seed=seed)

    def row(self) -> tuple[str, ...]:
        def fmt(v):
            if v is None:
                return ""
            if isinstance(v, float):
                return format(v, ".17g")
            if isinstance(v, bool):
                return str(v).lower()
            return format_rational(v)

        flag = {PASS: "true", FAIL: "false", SKIP: "skip"}[self.status]
        return (
            self.identity,
            self.model,
            str(self.N),
            str(self.k),
            "" if self.seed is None else str(self.seed),
            fmt(self.lhs),
            fmt(self.rhs),
            fmt(self.residual),
            flag,
        )


def identity_report(identity: str, model: str, N: int, k: int, lhs, rhs, **details) -> VerificationReport:
    residual = lhs - rhs
    status = PASS if exact_sign(residual) == 0 else FAIL
    return VerificationReport(identity, model, N, k, lhs, rhs, residual, status, "identity", details=details)


def inequality_report(identity: str, model: str, N: int, k: int, lhs, rhs, **details) -> VerificationReport:
    """``lhs <= rhs``; the residual is the slack ``rhs - lhs``."""
    slack = rhs - lhs
    status = PASS if exact_sign(slack) >= 0 else FAIL
    return VerificationReport(identity, model, N, k, lhs, rhs, slack, status, "inequality", details=details)


def predicate_report(identity: str, model: str, N: int, k: int, ok: bool, lhs=None, rhs=None, residual=None,
                     **details) -> VerificationReport:
    return VerificationReport(identity, model, N, k, lhs, rhs, residual, PASS if ok else FAIL, "predicate",
                              details=details)


def skip_report(identity: str, model: str, N: int, k: int, reason: str) -> VerificationReport:
    return VerificationReport(identity, model, N, k, None, None, None, SKIP, "skip", details={"reason": reason})


def write_csv(reports: Iterable[VerificationReport], stream=None) -> str:
    """Write ``identity,model,N,k,seed,lhs,rhs,residual,pass`` rows; returns the text when no stream is given."""
    buf = io.StringIO() if stream is None else stream
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in reports:
        w.writerow(r.row())
    return buf.getvalue() if stream is None else ""
