"""Monotonicity battery: binarisation can only help the classical model.

Any local/classical model for the multi-outcome object post-processes into a
model for its binarisation, so v_crit(binarised) >= v_crit(multi) must hold
on every paired instance. Failures are report entries, never exceptions.
"""

from dataclasses import dataclass, field

import numpy as np

from ..errors import InvalidScenario
from ..scenarios import VisibilityFamily, binarise_family

MONOTONICITY_TOL = 1e-6


@dataclass(frozen=True)
class BatteryInstance:
    name: str
    kind: str  # "bell" | "pm" | "steering"
    family: VisibilityFamily
    message_dim: int | None = None  # PM only


@dataclass
class BatteryEntry:
    name: str
    kind: str
    v_multi: float
    v_bin: float
    gap: float
    ok: bool


@dataclass
class MonotonicityReport:
    tolerance: float
    entries: list = field(default_factory=list)

    @property
    def n_failures(self) -> int:
        return sum(not e.ok for e in self.entries)

    @property
    def all_ok(self) -> bool:
        return self.n_failures == 0

    def gap_stats(self) -> dict:
        gaps = np.array([e.gap for e in self.entries]) if self.entries else np.zeros(0)
        if gaps.size == 0:
            return {"count": 0}
        return {
            "count": int(gaps.size),
            "min": float(gaps.min()),
            "max": float(gaps.max()),
            "mean": float(gaps.mean()),
            "zero_fraction": float(np.mean(np.abs(gaps) <= 1e-4)),
        }

    def __str__(self):
        lines = [
            f"{e.name}: v_multi={e.v_multi:.6f} v_bin={e.v_bin:.6f} "
            f"gap={e.gap:+.6f} {'ok' if e.ok else 'FAIL'}"
            for e in self.entries
        ]
        stats = self.gap_stats()
        lines.append(f"failures: {self.n_failures}/{len(self.entries)}, gaps: {stats}")
        return "\n".join(lines)


def _solve_instance(kind: str, family: VisibilityFamily, message_dim):
    from .bell import bell_critical_visibility
    from .pm import pm_critical_visibility
    from .steering import steering_critical_visibility

    if kind == "bell":
        return bell_critical_visibility(family)[0]
    if kind == "pm":
        if message_dim is None:
            raise InvalidScenario("PM battery instances need message_dim")
        return pm_critical_visibility(family, message_dim)[0]
    if kind == "steering":
        return steering_critical_visibility(family)[0]
    raise InvalidScenario(f"unknown instance kind {kind!r}")


def monotonicity_battery(
    instances, tol: float = MONOTONICITY_TOL
) -> MonotonicityReport:
    """Solve every instance in multi-outcome and binarised form and compare."""
    report = MonotonicityReport(tolerance=tol)
    for inst in instances:
        v_multi = _solve_instance(inst.kind, inst.family, inst.message_dim)
        v_bin = _solve_instance(inst.kind, binarise_family(inst.family), inst.message_dim)
        gap = v_bin - v_multi
        report.entries.append(
            BatteryEntry(
                name=inst.name,
                kind=inst.kind,
                v_multi=v_multi,
                v_bin=v_bin,
                gap=gap,
                ok=bool(v_bin >= v_multi - tol),
            )
        )
    return report
