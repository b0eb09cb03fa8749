"""Scenario descriptors, behavior/assemblage containers, binarisation maps.

A binarised implementation replaces every N-outcome measurement by N
independent click/no-click measurements, one per outcome port. Statistically
this moves the experiment into an enlarged scenario with N times more inputs
and binary outcomes. The maps here perform that move on behaviors and
steering assemblages.

Index convention, used identically everywhere (including file formats):
the enlarged input is x_tilde = x*N + a, row-major over (x, a). Binarised
outcome 0 is the click, outcome 1 the no-click.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, InvalidScenario, SignalingBehavior
from .qcore import HermitianOperator

INDEX_CONVENTION = "x_tilde = x*N + a"

NORMALIZATION_ATOL = 1e-10
NO_SIGNALING_ATOL = 1e-9
# binarise_bell rejects inputs whose marginals disagree beyond this
SIGNALING_REJECT = 1e-8
# entrywise slack for container probabilities (Born-rule round-off only)
ENTRY_ATOL = 1e-9


@dataclass(frozen=True)
class BellScenario:
    inputs_a: int
    inputs_b: int
    outcomes_a: int
    outcomes_b: int

    def __post_init__(self):
        if min(self.inputs_a, self.inputs_b, self.outcomes_a, self.outcomes_b) < 1:
            raise InvalidScenario("all scenario fields must be >= 1")

    @property
    def shape(self):
        return (self.outcomes_a, self.outcomes_b, self.inputs_a, self.inputs_b)


@dataclass(frozen=True)
class PMScenario:
    preparations: int
    measurements: int
    outcomes: int

    def __post_init__(self):
        if min(self.preparations, self.measurements, self.outcomes) < 1:
            raise InvalidScenario("all scenario fields must be >= 1")

    @property
    def shape(self):
        return (self.outcomes, self.preparations, self.measurements)


class Behavior:
    """Conditional probability table for a Bell or prepare-and-measure scenario.

    Bell tables are indexed (a, b, x, y); PM tables (b, x, y). Normalization
    is enforced per input context; Bell behaviors are additionally checked
    (not assumed) to satisfy no-signaling.
    """

    __slots__ = ("scenario", "table")

    def __init__(self, scenario, table, validate: bool = True):
        table = np.asarray(table, dtype=float)
        if table.shape != scenario.shape:
            raise DimensionMismatch(
                f"table shape {table.shape} does not match scenario {scenario.shape}"
            )
        table = table.copy()
        table.setflags(write=False)
        object.__setattr__(self, "scenario", scenario)
        object.__setattr__(self, "table", table)
        if validate:
            self._validate()

    def __setattr__(self, name, value):
        raise AttributeError("Behavior is immutable")

    @property
    def is_bell(self) -> bool:
        return isinstance(self.scenario, BellScenario)

    def _validate(self):
        t = self.table
        if t.min() < -ENTRY_ATOL or t.max() > 1 + ENTRY_ATOL:
            raise ValueError("probabilities outside [0, 1] beyond tolerance")
        if self.is_bell:
            norms = t.sum(axis=(0, 1))
            if np.max(np.abs(norms - 1.0)) > NORMALIZATION_ATOL:
                raise ValueError("joint distribution not normalized per (x, y)")
            self._check_no_signaling(NO_SIGNALING_ATOL)
        else:
            norms = t.sum(axis=0)
            if np.max(np.abs(norms - 1.0)) > NORMALIZATION_ATOL:
                raise ValueError("distribution not normalized per (x, y)")

    def _check_no_signaling(self, atol: float):
        t = self.table
        pa = t.sum(axis=1)  # (A, X, Y)
        pb = t.sum(axis=0)  # (B, X, Y)
        dev_a = np.max(np.abs(pa - pa.mean(axis=2, keepdims=True)))
        dev_b = np.max(np.abs(pb - pb.mean(axis=1, keepdims=True)))
        if max(dev_a, dev_b) > atol:
            raise SignalingBehavior(
                f"no-signaling violated by {max(dev_a, dev_b):.3e} (> {atol:.1e})"
            )

    def signaling_deviation(self) -> float:
        t = self.table
        pa = t.sum(axis=1)
        pb = t.sum(axis=0)
        return float(
            max(
                np.max(np.abs(pa - pa.mean(axis=2, keepdims=True))),
                np.max(np.abs(pb - pb.mean(axis=1, keepdims=True))),
            )
        )

    def marginal_a(self) -> np.ndarray:
        """Alice marginal p(a|x), averaged over Bob's inputs after the NS check."""
        if not self.is_bell:
            raise InvalidScenario("marginal_a is only defined for Bell behaviors")
        return self.table.sum(axis=1).mean(axis=2)

    def marginal_b(self) -> np.ndarray:
        if not self.is_bell:
            raise InvalidScenario("marginal_b is only defined for Bell behaviors")
        return self.table.sum(axis=0).mean(axis=1)

    # -- serialization ------------------------------------------------------

    def to_json_dict(self) -> dict:
        if self.is_bell:
            s = self.scenario
            sc_doc = {
                "type": "bell",
                "inputs_a": s.inputs_a,
                "inputs_b": s.inputs_b,
                "outcomes_a": s.outcomes_a,
                "outcomes_b": s.outcomes_b,
            }
        else:
            s = self.scenario
            sc_doc = {
                "type": "pm",
                "preparations": s.preparations,
                "measurements": s.measurements,
                "outcomes": s.outcomes,
            }
        return {
            "scenario": sc_doc,
            "index_convention": INDEX_CONVENTION,
            "tensor": self.table.tolist(),
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "Behavior":
        sc = doc["scenario"]
        if sc["type"] == "bell":
            scenario = BellScenario(
                sc["inputs_a"], sc["inputs_b"], sc["outcomes_a"], sc["outcomes_b"]
            )
        elif sc["type"] == "pm":
            scenario = PMScenario(sc["preparations"], sc["measurements"], sc["outcomes"])
        else:
            raise InvalidScenario(f"unknown scenario type {sc['type']!r}")
        return cls(scenario, np.array(doc["tensor"], dtype=float))

    def __repr__(self):
        return f"Behavior({self.scenario})"


class Assemblage:
    """Subnormalized conditional states sigma_{a|x} steered onto Bob.

    The no-signaling condition fixes the reduced state: sum_a sigma_{a|x}
    must be the same rho_B for every input x, with unit trace.
    """

    __slots__ = ("ops", "rho_b")

    def __init__(self, ops, validate: bool = True):
        ops = tuple(
            tuple(o if isinstance(o, HermitianOperator) else HermitianOperator(o) for o in row)
            for row in ops
        )
        if not ops or not ops[0]:
            raise InvalidScenario("assemblage needs at least one input and outcome")
        n_out = len(ops[0])
        dim = ops[0][0].dim
        for row in ops:
            if len(row) != n_out:
                raise InvalidScenario("ragged assemblage")
            for o in row:
                if o.dim != dim:
                    raise DimensionMismatch("assemblage operators have mixed dimensions")
        rho_rows = [sum(o.mat for o in row) for row in ops]
        rho_b = HermitianOperator(sum(rho_rows) / len(ops))
        object.__setattr__(self, "ops", ops)
        object.__setattr__(self, "rho_b", rho_b)
        if validate:
            self._validate(rho_rows)

    def __setattr__(self, name, value):
        raise AttributeError("Assemblage is immutable")

    def _validate(self, rho_rows):
        for row in self.ops:
            for o in row:
                if not o.is_psd():
                    raise ValueError(
                        f"assemblage member not PSD (min eig {o.min_eigenvalue():.3e})"
                    )
        for r in rho_rows:
            if np.max(np.abs(r - self.rho_b.mat)) > NO_SIGNALING_ATOL:
                raise SignalingBehavior("sum_a sigma_{a|x} differs across inputs x")
        if abs(self.rho_b.trace() - 1.0) > NORMALIZATION_ATOL:
            raise ValueError(f"reduced state trace {self.rho_b.trace():.12f} != 1")

    @property
    def inputs(self) -> int:
        return len(self.ops)

    @property
    def outcomes(self) -> int:
        return len(self.ops[0])

    @property
    def dim(self) -> int:
        return self.ops[0][0].dim

    def as_array(self) -> np.ndarray:
        """Dense view with shape (inputs, outcomes, dim, dim)."""
        return np.array([[o.mat for o in row] for row in self.ops])

    def to_json_dict(self) -> dict:
        arr = self.as_array()
        stacked = np.stack([arr.real, arr.imag], axis=-1)
        return {
            "scenario": {
                "type": "assemblage",
                "inputs": self.inputs,
                "outcomes": self.outcomes,
                "dim": self.dim,
            },
            "index_convention": INDEX_CONVENTION,
            "operators": stacked.tolist(),
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "Assemblage":
        sc = doc["scenario"]
        if sc["type"] != "assemblage":
            raise InvalidScenario(f"expected an assemblage document, got {sc['type']!r}")
        arr = np.array(doc["operators"], dtype=float)
        mats = arr[..., 0] + 1j * arr[..., 1]
        return cls([[mats[x, a] for a in range(sc["outcomes"])] for x in range(sc["inputs"])])

    def __repr__(self):
        return f"Assemblage(inputs={self.inputs}, outcomes={self.outcomes}, dim={self.dim})"


@dataclass(frozen=True)
class VisibilityFamily:
    """Affine family object(v) = v*quantum + (1-v)*noise, v in [0, 1]."""

    quantum: object
    noise: object

    def __post_init__(self):
        q, n = self.quantum, self.noise
        if type(q) is not type(n):
            raise InvalidScenario("family endpoints must be the same kind of object")
        if isinstance(q, Behavior):
            if q.scenario != n.scenario:
                raise InvalidScenario("family endpoints live in different scenarios")
        elif isinstance(q, Assemblage):
            if (q.inputs, q.outcomes, q.dim) != (n.inputs, n.outcomes, n.dim):
                raise InvalidScenario("family endpoints live in different scenarios")
        else:
            raise InvalidScenario(f"unsupported family endpoint type {type(q).__name__}")

    @property
    def kind(self) -> str:
        return "behavior" if isinstance(self.quantum, Behavior) else "assemblage"

    def at(self, v: float):
        return family_at(self, v)


def family_at(family: VisibilityFamily, v: float):
    """Evaluate the family at visibility v (entrywise affine combination)."""
    if not 0.0 <= v <= 1.0:
        raise ValueError(f"visibility must be in [0, 1], got {v}")
    q, n = family.quantum, family.noise
    if isinstance(q, Behavior):
        return Behavior(q.scenario, v * q.table + (1.0 - v) * n.table)
    mix = v * q.as_array() + (1.0 - v) * n.as_array()
    return Assemblage([[mix[x, a] for a in range(q.outcomes)] for x in range(q.inputs)])


# ---------------------------------------------------------------------------
# Binarisation maps
# ---------------------------------------------------------------------------


def binarise_bell(p: Behavior) -> Behavior:
    """Map an (M, N) Bell behavior into the (M*N, 2) click/no-click scenario.

    For x_tilde = (x, a), y_tilde = (y, b):
        p_bin(1,1) = p(a,b|x,y)
        p_bin(1,n) = pA(a|x) - p(a,b|x,y)
        p_bin(n,1) = pB(b|y) - p(a,b|x,y)
        p_bin(n,n) = 1 - pA(a|x) - pB(b|y) + p(a,b|x,y)
    """
    if not p.is_bell:
        raise InvalidScenario("binarise_bell expects a Bell behavior")
    dev = p.signaling_deviation()
    if dev > SIGNALING_REJECT:
        raise SignalingBehavior(
            f"marginals ill-defined: signaling deviation {dev:.3e} > {SIGNALING_REJECT:.1e}"
        )
    s = p.scenario
    pa = p.marginal_a()  # (A, X)
    pb = p.marginal_b()  # (B, Y)
    t = p.table

    joint = t.transpose(2, 0, 3, 1).reshape(s.inputs_a * s.outcomes_a, s.inputs_b * s.outcomes_b)
    ma = pa.T.reshape(-1, 1)  # p^A(a|x) flattened over x_tilde
    mb = pb.T.reshape(1, -1)

    out = np.empty((2, 2, joint.shape[0], joint.shape[1]))
    out[0, 0] = joint
    out[0, 1] = ma - joint
    out[1, 0] = mb - joint
    out[1, 1] = 1.0 - ma - mb + joint
    scenario = BellScenario(s.inputs_a * s.outcomes_a, s.inputs_b * s.outcomes_b, 2, 2)
    return Behavior(scenario, out)


def binarise_pm(p: Behavior) -> Behavior:
    """Map a PM behavior with N outcomes into the (Y*N)-input binary scenario."""
    if p.is_bell:
        raise InvalidScenario("binarise_pm expects a prepare-and-measure behavior")
    s = p.scenario
    t = p.table  # (B, X, Y)
    clicks = t.transpose(1, 2, 0).reshape(s.preparations, s.measurements * s.outcomes)
    out = np.empty((2, s.preparations, s.measurements * s.outcomes))
    out[0] = clicks
    out[1] = 1.0 - clicks
    return Behavior(PMScenario(s.preparations, s.measurements * s.outcomes, 2), out)


def binarise_assemblage(s: Assemblage) -> Assemblage:
    """Map an assemblage into its click/no-click form with the same rho_B.

    sigma_bin(click | (x, a)) = sigma(a|x); the complement is rho_B - sigma(a|x).
    Negative eigenvalues of the complement down to -1e-8 are floored to PSD
    (Born-rule round-off); anything worse signals a malformed input.
    """
    rho = s.rho_b
    ops = []
    for row in s.ops:
        for sigma in row:
            comp = rho - sigma
            if not comp.is_psd():
                if comp.min_eigenvalue() < -1e-8:
                    raise ValueError(
                        "rho_B - sigma(a|x) is not PSD "
                        f"(min eig {comp.min_eigenvalue():.3e}); malformed assemblage"
                    )
                comp = comp.floored_to_psd()
            ops.append([sigma, comp])
    return Assemblage(ops)


def binarise_family(family: VisibilityFamily) -> VisibilityFamily:
    """Binarise both endpoints; commutes with evaluation at any visibility."""
    if family.kind == "behavior":
        fn = binarise_bell if family.quantum.is_bell else binarise_pm
    else:
        fn = binarise_assemblage
    return VisibilityFamily(fn(family.quantum), fn(family.noise))
