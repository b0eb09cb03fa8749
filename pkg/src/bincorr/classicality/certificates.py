"""Witness certificates and their independent re-verification.

A certificate stores everything needed to check a classicality claim without
re-running the primal optimization: the functional coefficients, the
classical bound, the value achieved by the quantum object, and the critical
visibility. Verification recomputes the value from the coefficients and
re-derives the classical bound by exhaustive maximization over the classical
set, so a certificate cannot pass on solver say-so alone.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from ..errors import InvalidScenario
from ..scenarios import INDEX_CONVENTION, Assemblage, Behavior

VALUE_ATOL = 1e-7
BOUND_ATOL = 1e-6


@dataclass
class Certificate:
    kind: str  # "bell" | "pm" | "steering"
    scenario: dict
    coefficients: np.ndarray
    classical_bound: float
    achieved_value: float
    v_critical: float
    solver_stats: dict
    index_convention: str = INDEX_CONVENTION
    enumeration_order: str = "lex"

    def to_json_dict(self) -> dict:
        if self.kind == "steering":
            stacked = np.stack([self.coefficients.real, self.coefficients.imag], axis=-1)
            coeffs = stacked.tolist()
        else:
            coeffs = np.asarray(self.coefficients, dtype=float).tolist()
        return {
            "kind": self.kind,
            "scenario": self.scenario,
            "index_convention": self.index_convention,
            "coefficients": coeffs,
            "classical_bound": self.classical_bound,
            "achieved_value": self.achieved_value,
            "v_critical": self.v_critical,
            "enumeration_order": self.enumeration_order,
            "solver_stats": self.solver_stats,
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "Certificate":
        kind = doc["kind"]
        arr = np.array(doc["coefficients"], dtype=float)
        if kind == "steering":
            coefficients = arr[..., 0] + 1j * arr[..., 1]
        else:
            coefficients = arr
        return cls(
            kind=kind,
            scenario=doc["scenario"],
            coefficients=coefficients,
            classical_bound=float(doc["classical_bound"]),
            achieved_value=float(doc["achieved_value"]),
            v_critical=float(doc["v_critical"]),
            solver_stats=doc.get("solver_stats", {}),
            index_convention=doc.get("index_convention", INDEX_CONVENTION),
            enumeration_order=doc.get("enumeration_order", "lex"),
        )

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh, indent=1)

    @classmethod
    def load(cls, path) -> "Certificate":
        with open(path) as fh:
            return cls.from_json_dict(json.load(fh))


def _object_scenario_dict(obj) -> dict:
    if isinstance(obj, Behavior):
        return obj.to_json_dict()["scenario"]
    if isinstance(obj, Assemblage):
        return obj.to_json_dict()["scenario"]
    raise InvalidScenario(f"cannot verify against objects of type {type(obj).__name__}")


def certificate_value(cert: Certificate, obj) -> float:
    """Evaluate the certificate's functional on a behavior or assemblage."""
    if cert.kind in ("bell", "pm"):
        return float((cert.coefficients * obj.table).sum())
    arr = obj.as_array()  # (X, A, d, d)
    return float(np.einsum("xaij,xaji->", cert.coefficients, arr).real)


def _rederive_bound(cert: Certificate) -> float:
    from .bell import classical_max_bell
    from .pm import classical_max_pm
    from .steering import classical_max_steering

    if cert.kind == "bell":
        return classical_max_bell(cert.coefficients)
    if cert.kind == "pm":
        d = int(cert.scenario["message_dim"])
        return classical_max_pm(cert.coefficients, d)
    if cert.kind == "steering":
        return classical_max_steering(cert.coefficients)
    raise InvalidScenario(f"unknown certificate kind {cert.kind!r}")


@dataclass
class VerificationReport:
    passed: bool
    violated: bool
    achieved_recomputed: float
    value_residual: float
    bound_remax: float
    bound_residual: float
    messages: list = field(default_factory=list)

    def __str__(self):
        status = "PASS" if self.passed else "FAIL"
        flag = "violation" if self.violated else "no violation"
        lines = [
            f"{status} ({flag}): value residual {self.value_residual:.2e}, "
            f"bound residual {self.bound_residual:.2e}"
        ]
        lines.extend(self.messages)
        return "\n".join(lines)


def verify_certificate(cert: Certificate, obj) -> VerificationReport:
    """Re-check a certificate against the object it claims to witness.

    Raises InvalidScenario when the object lives in a different scenario from
    the certificate (that is an operator error, not a failed check).
    """
    obj_scenario = _object_scenario_dict(obj)
    cert_scenario = {
        k: v for k, v in cert.scenario.items() if k in obj_scenario
    }
    if cert_scenario != obj_scenario:
        raise InvalidScenario(
            f"certificate scenario {cert.scenario} does not match object {obj_scenario}"
        )
    expected_kind = "steering" if isinstance(obj, Assemblage) else (
        "bell" if obj.is_bell else "pm"
    )
    if cert.kind != expected_kind:
        raise InvalidScenario(
            f"certificate kind {cert.kind!r} does not match object kind {expected_kind!r}"
        )

    messages = []
    value = certificate_value(cert, obj)
    value_residual = abs(value - cert.achieved_value)
    ok = True
    if value_residual > VALUE_ATOL:
        ok = False
        messages.append(
            f"achieved_value mismatch: recomputed {value:.9f} vs stated "
            f"{cert.achieved_value:.9f}"
        )

    bound_remax = _rederive_bound(cert)
    bound_residual = abs(bound_remax - cert.classical_bound)
    if bound_remax > cert.classical_bound + BOUND_ATOL:
        ok = False
        messages.append(
            f"classical point exceeds stated bound: remax {bound_remax:.9f} vs "
            f"{cert.classical_bound:.9f}"
        )
    elif bound_residual > BOUND_ATOL:
        ok = False
        messages.append(
            f"stated bound not attained: remax {bound_remax:.9f} vs "
            f"{cert.classical_bound:.9f}"
        )

    violated = value > bound_remax + 1e-9
    if cert.v_critical < 1.0 - 1e-6 and cert.achieved_value <= cert.classical_bound + 1e-9:
        ok = False
        messages.append(
            "certificate claims v_critical < 1 but its value does not exceed the bound"
        )

    return VerificationReport(
        passed=ok,
        violated=violated,
        achieved_recomputed=value,
        value_residual=value_residual,
        bound_remax=bound_remax,
        bound_residual=bound_residual,
        messages=messages,
    )
