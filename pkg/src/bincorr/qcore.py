"""Complex linear algebra and quantum primitives.

Dense operators only: everything in scope lives in dimension <= 9 per tensor
factor, so dense eigensolvers are always the right tool. All containers are
immutable after construction and can be shared freely across threads.
"""

import numpy as np

from .errors import DimensionMismatch

# Construction-time tolerances. Symmetrization absorbs solver round-off up to
# HERMITICITY_REJECT on the anti-Hermitian part; anything worse is a bug in
# the caller and gets rejected rather than masked.
HERMITICITY_REJECT = 1e-8
PSD_FLOOR = -1e-9
POVM_ATOL = 1e-9


class HermitianOperator:
    """A dense Hermitian matrix, symmetrized at construction.

    The stored array is read-only. `require_psd=True` additionally checks
    that the minimum eigenvalue is >= -1e-9 (tolerant of dual-solver noise).
    """

    __slots__ = ("mat",)

    def __init__(self, entries, require_psd: bool = False):
        mat = np.asarray(entries, dtype=complex)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise DimensionMismatch(f"expected a square matrix, got shape {mat.shape}")
        anti = 0.5 * (mat - mat.conj().T)
        if np.max(np.abs(anti)) > HERMITICITY_REJECT:
            raise ValueError(
                f"anti-Hermitian part {np.max(np.abs(anti)):.3e} exceeds "
                f"{HERMITICITY_REJECT:.1e}"
            )
        mat = 0.5 * (mat + mat.conj().T)
        mat.setflags(write=False)
        object.__setattr__(self, "mat", mat)
        if require_psd and not self.is_psd():
            raise ValueError(f"operator is not PSD: min eigenvalue {self.min_eigenvalue():.3e}")

    def __setattr__(self, name, value):
        raise AttributeError("HermitianOperator is immutable")

    @property
    def dim(self) -> int:
        return self.mat.shape[0]

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(self.mat)[0])

    def is_psd(self, floor: float = PSD_FLOOR) -> bool:
        return self.min_eigenvalue() >= floor

    def trace(self) -> float:
        return float(np.trace(self.mat).real)

    def purity(self) -> float:
        return float(np.trace(self.mat @ self.mat).real)

    def floored_to_psd(self) -> "HermitianOperator":
        """Clip tiny negative eigenvalues to zero (round-off repair only)."""
        vals, vecs = np.linalg.eigh(self.mat)
        vals = np.clip(vals, 0.0, None)
        return HermitianOperator((vecs * vals) @ vecs.conj().T)

    @classmethod
    def identity(cls, dim: int) -> "HermitianOperator":
        return cls(np.eye(dim))

    @classmethod
    def from_ket(cls, ket) -> "HermitianOperator":
        v = np.asarray(ket, dtype=complex).reshape(-1)
        return cls(np.outer(v, v.conj()))

    def __add__(self, other):
        return HermitianOperator(self.mat + other.mat)

    def __sub__(self, other):
        return HermitianOperator(self.mat - other.mat)

    def __mul__(self, scalar):
        return HermitianOperator(self.mat * float(scalar))

    __rmul__ = __mul__

    def __repr__(self):
        return f"HermitianOperator(dim={self.dim})"


class Measurement:
    """An ordered POVM: PSD effects that sum to the identity."""

    __slots__ = ("effects",)

    def __init__(self, effects):
        effects = tuple(
            e if isinstance(e, HermitianOperator) else HermitianOperator(e) for e in effects
        )
        if not effects:
            raise ValueError("a measurement needs at least one effect")
        dim = effects[0].dim
        total = np.zeros((dim, dim), dtype=complex)
        for e in effects:
            if e.dim != dim:
                raise DimensionMismatch("effects have mixed dimensions")
            if not e.is_psd():
                raise ValueError(f"effect is not PSD (min eig {e.min_eigenvalue():.3e})")
            total = total + e.mat
        if np.max(np.abs(total - np.eye(dim))) > POVM_ATOL:
            raise ValueError("effects do not sum to the identity")
        object.__setattr__(self, "effects", effects)

    def __setattr__(self, name, value):
        raise AttributeError("Measurement is immutable")

    @property
    def dim(self) -> int:
        return self.effects[0].dim

    @property
    def n_outcomes(self) -> int:
        return len(self.effects)

    @classmethod
    def from_basis(cls, basis) -> "Measurement":
        """Rank-1 projective measurement from the columns of a unitary."""
        basis = np.asarray(basis, dtype=complex)
        return cls([HermitianOperator.from_ket(basis[:, k]) for k in range(basis.shape[1])])

    def __repr__(self):
        return f"Measurement(dim={self.dim}, outcomes={self.n_outcomes})"


class BinarisedBank:
    """Per-port click effects of a binarised measurement.

    Each port k carries a click effect F_k and its complement 1 - F_k. There
    is deliberately NO constraint that the clicks sum to the identity: whether
    they do is exactly the untrusted assumption this package quantifies.
    """

    __slots__ = ("clicks",)

    def __init__(self, clicks):
        clicks = tuple(
            f if isinstance(f, HermitianOperator) else HermitianOperator(f) for f in clicks
        )
        if not clicks:
            raise ValueError("a bank needs at least one click effect")
        dim = clicks[0].dim
        for f in clicks:
            if f.dim != dim:
                raise DimensionMismatch("click effects have mixed dimensions")
            if not f.is_psd():
                raise ValueError("click effect is not PSD")
            if not (HermitianOperator.identity(dim) - f).is_psd():
                raise ValueError("click effect exceeds the identity")
        object.__setattr__(self, "clicks", clicks)

    def __setattr__(self, name, value):
        raise AttributeError("BinarisedBank is immutable")

    @property
    def dim(self) -> int:
        return self.clicks[0].dim

    @property
    def complements(self):
        ident = HermitianOperator.identity(self.dim)
        return tuple(ident - f for f in self.clicks)

    @classmethod
    def from_measurement(cls, meas: Measurement) -> "BinarisedBank":
        return cls(meas.effects)


def binarisation_defect(bank: BinarisedBank) -> float:
    """Operator-norm distance of the summed clicks from the identity.

    Zero exactly when the click effects form a valid POVM, i.e. when the
    trust assumption behind substituting a multi-outcome measurement by its
    per-port binarisation actually holds.
    """
    total = sum(f.mat for f in bank.clicks) - np.eye(bank.dim)
    return float(np.max(np.abs(np.linalg.eigvalsh(total))))


# ---------------------------------------------------------------------------
# Born-rule evaluation
# ---------------------------------------------------------------------------


def _check_state(state: HermitianOperator, dim: int):
    if state.dim != dim:
        raise DimensionMismatch(f"state dimension {state.dim} != expected {dim}")
    if abs(state.trace() - 1.0) > 1e-9:
        raise ValueError(f"state trace {state.trace():.12f} deviates from 1")
    if not state.is_psd():
        raise ValueError("state is not PSD")


def born_bipartite(state: HermitianOperator, meas_a, meas_b):
    """Joint statistics p(a,b|x,y) = tr[rho (A_{a|x} x B_{b|y})].

    `meas_a` and `meas_b` are the per-input measurement lists of the two
    parties; the state lives on the tensor product of their spaces.
    """
    from .scenarios import Behavior, BellScenario

    meas_a = list(meas_a)
    meas_b = list(meas_b)
    da = meas_a[0].dim
    db = meas_b[0].dim
    _check_state(state, da * db)
    n_a = meas_a[0].n_outcomes
    n_b = meas_b[0].n_outcomes
    if any(m.dim != da or m.n_outcomes != n_a for m in meas_a):
        raise DimensionMismatch("inconsistent measurements for party A")
    if any(m.dim != db or m.n_outcomes != n_b for m in meas_b):
        raise DimensionMismatch("inconsistent measurements for party B")

    rho = state.mat.reshape(da, db, da, db)
    ea = np.array([[e.mat for e in m.effects] for m in meas_a])  # (X, A, da, da)
    eb = np.array([[e.mat for e in m.effects] for m in meas_b])  # (Y, B, db, db)
    # tr[rho (A x B)] with rho indexed (i j ; k l) on A x B row/col factors
    table = np.einsum("ijkl,xaki,yblj->abxy", rho, ea, eb).real
    scenario = BellScenario(len(meas_a), len(meas_b), n_a, n_b)
    return Behavior(scenario, table)


def born_prepare_measure(states, measurements):
    """Prepare-and-measure statistics p(b|x,y) = tr[rho_x E_{b|y}]."""
    from .scenarios import Behavior, PMScenario

    states = list(states)
    measurements = list(measurements)
    dim = states[0].dim
    for s in states:
        _check_state(s, dim)
    n_b = measurements[0].n_outcomes
    if any(m.dim != dim or m.n_outcomes != n_b for m in measurements):
        raise DimensionMismatch("inconsistent measurements")
    rho = np.array([s.mat for s in states])  # (X, d, d)
    eff = np.array([[e.mat for e in m.effects] for m in measurements])  # (Y, B, d, d)
    table = np.einsum("xij,ybji->bxy", rho, eff).real
    return Behavior(PMScenario(len(states), len(measurements), n_b), table)


def partial_trace_a(mat: np.ndarray, da: int, db: int) -> np.ndarray:
    """Trace out the first tensor factor of a (da*db) x (da*db) matrix."""
    return np.einsum("iajb->ab", mat.reshape(da, db, da, db))


def steered_assemblage(state: HermitianOperator, meas_a, dim_b: int):
    """Assemblage sigma_{a|x} = tr_A[(A_{a|x} x 1) rho] steered onto Bob."""
    from .scenarios import Assemblage

    meas_a = list(meas_a)
    da = meas_a[0].dim
    _check_state(state, da * dim_b)
    rho = state.mat.reshape(da, dim_b, da, dim_b)
    ops = []
    for m in meas_a:
        if m.dim != da:
            raise DimensionMismatch("measurement dimension mismatch")
        row = []
        for e in m.effects:
            sigma = np.einsum("iajb,ji->ab", rho, e.mat)
            row.append(HermitianOperator(sigma))
        ops.append(row)
    return Assemblage(ops)


# ---------------------------------------------------------------------------
# Haar-random sampling
# ---------------------------------------------------------------------------


def _ginibre(rng: np.random.Generator, rows: int, cols: int) -> np.ndarray:
    return rng.standard_normal((rows, cols)) + 1j * rng.standard_normal((rows, cols))


def haar_random_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed unitary via QR of a complex Ginibre matrix.

    The R diagonal is phase-corrected (Q <- Q * diag(r_ii/|r_ii|)) so the
    distribution is exactly Haar; this construction is part of the seed
    contract, so it must not change between releases.
    """
    q, r = np.linalg.qr(_ginibre(rng, dim, dim))
    d = np.diagonal(r)
    return q * (d / np.abs(d))


def haar_random_state(dim: int, rank: int, seed) -> HermitianOperator:
    """Induced-measure random state: partial trace of a Haar pure state on dim x rank."""
    if not 1 <= rank <= dim:
        raise ValueError(f"rank must be in [1, {dim}], got {rank}")
    rng = np.random.default_rng(seed)
    g = _ginibre(rng, dim, rank)
    rho = g @ g.conj().T
    return HermitianOperator(rho / np.trace(rho).real)


def haar_random_basis(dim: int, seed) -> Measurement:
    """Rank-1 projective measurement from the columns of a Haar-random unitary."""
    rng = np.random.default_rng(seed)
    return Measurement.from_basis(haar_random_unitary(dim, rng))
