"""Verdicts and deterministic report rendering."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

PASS = "pass"
FAIL = "fail"
INCONCLUSIVE = "inconclusive"

FORMAT_VERSION = 1


@dataclass
class Check:
    """One verdict with optional witnesses rendered as canonical text."""

    name: str
    status: str
    witness: dict[str, str] = field(default_factory=dict)

    @classmethod
    def passed(cls, name: str, **witness) -> Check:
        return cls(name, PASS, {k: str(v) for k, v in witness.items()})

    @classmethod
    def failed(cls, name: str, **witness) -> Check:
        return cls(name, FAIL, {k: str(v) for k, v in witness.items()})

    @classmethod
    def inconclusive(cls, name: str, **witness) -> Check:
        return cls(name, INCONCLUSIVE, {k: str(v) for k, v in witness.items()})

    @classmethod
    def of(cls, name: str, ok: bool, **witness) -> Check:
        return cls.passed(name, **witness) if ok else cls.failed(name, **witness)

    @property
    def ok(self) -> bool:
        return self.status == PASS

    def __bool__(self) -> bool:
        return self.ok

    def prefixed(self, prefix: str) -> Check:
        return Check(f"{prefix}.{self.name}", self.status, dict(self.witness))


@dataclass
class Report:
    """Ordered list of checks for one task."""

    task: str
    checks: list[Check] = field(default_factory=list)

    def add(self, check: Check, prefix: str | None = None) -> Check:
        self.checks.append(check.prefixed(prefix) if prefix else check)
        return check

    def extend(self, checks: Iterable[Check], prefix: str | None = None) -> None:
        for c in checks:
            self.add(c, prefix)

    @property
    def ok(self) -> bool:
        return all(c.ok for c in self.checks)

    @property
    def status(self) -> str:
        if any(c.status == FAIL for c in self.checks):
            return FAIL
        if any(c.status == INCONCLUSIVE for c in self.checks):
            return INCONCLUSIVE
        return PASS

    def counts(self) -> dict[str, int]:
        out = {PASS: 0, FAIL: 0, INCONCLUSIVE: 0}
        for c in self.checks:
            out[c.status] += 1
        return out

    def render_text(self, header: dict[str, str] | None = None) -> str:
        lines = [f"charp-hodge report (format {FORMAT_VERSION})"]
        for k, v in (header or {}).items():
            lines.append(f"{k}: {v}")
        lines.append(f"task: {self.task}")
        for c in self.checks:
            lines.append(f"[{c.status.upper():>12}] {c.name}")
            for k, v in c.witness.items():
                lines.append(f"    {k}: {v}")
        counts = self.counts()
        lines.append(
            f"summary: {counts[PASS]} passed, {counts[FAIL]} failed, "
            f"{counts[INCONCLUSIVE]} inconclusive -> {self.status.upper()}"
        )
        return "\n".join(lines) + "\n"

    def render_records(self, header: dict[str, str] | None = None) -> str:
        lines = [f"format_version = {FORMAT_VERSION}"]
        for k, v in (header or {}).items():
            lines.append(f"{k} = {v}")
        lines.append(f"task = {self.task}")
        lines.append(f"checks = {len(self.checks)}")
        for n, c in enumerate(self.checks):
            lines.append(f"check.{n}.name = {c.name}")
            lines.append(f"check.{n}.status = {c.status}")
            for k, v in c.witness.items():
                lines.append(f"check.{n}.witness.{k} = {v}")
        lines.append(f"status = {self.status}")
        return "\n".join(lines) + "\n"
