"""Concrete quantum instances: CGLMP, random access codes, MUB steering.

Every construction returns a VisibilityFamily whose noise endpoint is the
white-noise statistics of the same measurements, so critical visibilities are
directly comparable between the multi-outcome and binarised analyses.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .errors import InvalidScenario, SolverFailure
from .qcore import (
    HermitianOperator,
    Measurement,
    born_bipartite,
    born_prepare_measure,
    haar_random_basis,
    haar_random_state,
    steered_assemblage,
)
from .scenarios import Assemblage, Behavior, VisibilityFamily

# ---------------------------------------------------------------------------
# CGLMP family
# ---------------------------------------------------------------------------

# Measurement phase convention (pinned: the functional value is sensitive to
# it). Alice's basis vectors for input x are
#   |a>_x = N^{-1/2} sum_j exp(2 pi i j (a + alpha_x)/N) |j>,
# Bob's for input y use exp(2 pi i j (-b + beta_y)/N).
CGLMP_ALPHAS = (0.0, 0.5)
CGLMP_BETAS = (0.25, -0.25)


def cglmp_bases(n: int):
    """The two Fourier-phase measurement bases per party, as Measurements."""
    j = np.arange(n)
    meas_a, meas_b = [], []
    for alpha in CGLMP_ALPHAS:
        cols = np.exp(2j * np.pi * np.outer(j, j + alpha) / n) / math.sqrt(n)
        meas_a.append(Measurement.from_basis(cols))
    for beta in CGLMP_BETAS:
        cols = np.exp(2j * np.pi * np.outer(j, -j + beta) / n) / math.sqrt(n)
        meas_b.append(Measurement.from_basis(cols))
    return meas_a, meas_b


def _cglmp_value_table(table: np.ndarray) -> float:
    n = table.shape[0]
    a = np.arange(n)[:, None]
    b = np.arange(n)[None, :]
    val = (table[:, :, 1, 1] * (a < b)).sum()
    val += (table[:, :, 0, 1] * (b < a)).sum()
    val += (table[:, :, 0, 0] * (a < b)).sum()
    val += (table[:, :, 1, 0] * (b <= a)).sum()
    return float(val)


def cglmp_value(p: Behavior) -> float:
    """P(A2<B2) + P(B2<A1) + P(A1<B1) + P(B1<=A2); local models give >= 1."""
    if not p.is_bell:
        raise InvalidScenario("cglmp_value expects a Bell behavior")
    s = p.scenario
    if s.inputs_a != 2 or s.inputs_b != 2 or s.outcomes_a != s.outcomes_b:
        raise InvalidScenario(f"need a (2 inputs, N outcomes) scenario, got {s}")
    return _cglmp_value_table(p.table)


def _schmidt_behavior_table(n: int, coeffs: np.ndarray) -> np.ndarray:
    """Behavior table of |psi> = sum_j c_j |jj> under the pinned bases.

    Amplitude form, kept cheap because the coefficient optimizer calls it
    thousands of times.
    """
    j = np.arange(n)
    amp_a = np.stack(
        [np.exp(2j * np.pi * np.outer(j, j + alpha) / n) / math.sqrt(n) for alpha in CGLMP_ALPHAS]
    )  # (x, j, a)
    amp_b = np.stack(
        [np.exp(2j * np.pi * np.outer(j, -j + beta) / n) / math.sqrt(n) for beta in CGLMP_BETAS]
    )
    amp = np.einsum("j,xja,yjb->abxy", coeffs, amp_a.conj(), amp_b.conj())
    return np.abs(amp) ** 2


_COEFF_CACHE: dict[int, np.ndarray] = {}


def cglmp_optimal_coefficients(n: int, n_starts: int = 8, seed: int = 20) -> np.ndarray:
    """Schmidt coefficients maximizing the CGLMP violation for dimension n.

    Derived by simplex-constrained local optimization from multiple starts
    (not copied from the literature), then cached. The functional is
    minimized, since local models are bounded below by 1.
    """
    if n in _COEFF_CACHE:
        return _COEFF_CACHE[n]
    rng = np.random.default_rng(seed)

    def objective(x):
        c = np.abs(x) / np.linalg.norm(x)
        return _cglmp_value_table(_schmidt_behavior_table(n, c))

    best = None
    for s in range(n_starts):
        x0 = np.ones(n) if s == 0 else rng.random(n) + 0.2
        res = minimize(
            objective,
            x0,
            method="Nelder-Mead",
            options={"xatol": 1e-12, "fatol": 1e-14, "maxiter": 40000, "maxfev": 80000},
        )
        if best is None or res.fun < best.fun:
            best = res
    coeffs = np.abs(best.x) / np.linalg.norm(best.x)
    coeffs.setflags(write=False)
    _COEFF_CACHE[n] = coeffs
    return coeffs


@dataclass(frozen=True)
class CGLMPInstance:
    dimension: int
    state_choice: str
    schmidt_coefficients: np.ndarray
    state: HermitianOperator
    meas_a: tuple
    meas_b: tuple
    family: VisibilityFamily


def cglmp_instance(n: int, state_choice: str = "optimal") -> CGLMPInstance:
    """CGLMP test instance: pinned bases and either the violation-optimal
    Schmidt state or the maximally entangled one, against white noise."""
    if not 2 <= n <= 8:
        raise ValueError(f"supported dimensions are 2..8, got {n}")
    if state_choice not in ("optimal", "maxent"):
        raise ValueError(f"state_choice must be 'optimal' or 'maxent', got {state_choice!r}")
    if state_choice == "optimal":
        coeffs = cglmp_optimal_coefficients(n)
    else:
        coeffs = np.full(n, 1.0 / math.sqrt(n))
    meas_a, meas_b = cglmp_bases(n)
    ket = np.zeros(n * n, dtype=complex)
    ket[:: n + 1] = coeffs
    state = HermitianOperator.from_ket(ket)
    quantum = born_bipartite(state, meas_a, meas_b)
    noise_state = HermitianOperator(np.eye(n * n) / (n * n))
    noise = born_bipartite(noise_state, meas_a, meas_b)
    return CGLMPInstance(
        dimension=n,
        state_choice=state_choice,
        schmidt_coefficients=coeffs,
        state=state,
        meas_a=tuple(meas_a),
        meas_b=tuple(meas_b),
        family=VisibilityFamily(quantum, noise),
    )


def maximally_entangled_state(d: int) -> HermitianOperator:
    ket = np.zeros(d * d, dtype=complex)
    ket[:: d + 1] = 1.0 / math.sqrt(d)
    return HermitianOperator.from_ket(ket)


# ---------------------------------------------------------------------------
# Random access code (prepare-and-measure)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RACInstance:
    dimension: int
    preparations: tuple
    measurements: tuple
    family: VisibilityFamily
    quantum_success: float
    seesaw_iterations: int = field(default=0)


def rac_success(p: Behavior) -> float:
    """Average success probability (1/2d^2) sum_{x,y} p(b = x_y | x, y).

    Preparations are indexed x = x1*d + x2, row-major over the two symbols.
    """
    if p.is_bell:
        raise InvalidScenario("rac_success expects a prepare-and-measure behavior")
    s = p.scenario
    d = s.outcomes
    if s.preparations != d * d or s.measurements != 2:
        raise InvalidScenario(f"need d^2 preparations and 2 measurements, got {s}")
    t = p.table
    total = 0.0
    for x1 in range(d):
        for x2 in range(d):
            x = x1 * d + x2
            total += t[x1, x, 0] + t[x2, x, 1]
    return total / (2 * d * d)


def _optimal_preparations(d: int, effects: np.ndarray) -> np.ndarray:
    """Best pure preparation per input: top eigenvector of E_{x1|0} + E_{x2|1}."""
    rho = np.zeros((d * d, d, d), dtype=complex)
    for x1 in range(d):
        for x2 in range(d):
            _, vecs = np.linalg.eigh(effects[0, x1] + effects[1, x2])
            psi = vecs[:, -1]
            rho[x1 * d + x2] = np.outer(psi, psi.conj())
    return rho


class _MeasurementSDP:
    """Reusable SDP: maximize sum_b tr(S_b E_b) over POVMs {E_b} on C^d."""

    def __init__(self, d: int):
        import cvxpy as cp

        self._cp = cp
        self.effects = [cp.Variable((d, d), hermitian=True) for _ in range(d)]
        self.weights = [cp.Parameter((d, d), hermitian=True) for _ in range(d)]
        obj = cp.real(sum(cp.trace(w @ e) for w, e in zip(self.weights, self.effects)))
        cons = [e >> 0 for e in self.effects]
        cons.append(sum(self.effects) == np.eye(d))
        self.problem = cp.Problem(cp.Maximize(obj), cons)

    def solve(self, weight_mats) -> list:
        for par, mat in zip(self.weights, weight_mats):
            par.value = 0.5 * (mat + mat.conj().T)
        self.problem.solve(solver=self._cp.CLARABEL)
        if self.problem.status != "optimal":
            raise SolverFailure(f"measurement update SDP ended with {self.problem.status}")
        return [e.value for e in self.effects]


def rac_instance(
    d: int = 3,
    restarts: int = 20,
    seed: int = 7,
    step_tol: float = 1e-9,
    max_iterations: int = 300,
    optimum_tol: float = 1e-6,
) -> RACInstance:
    """Seesaw-optimized quantum strategy for the 2-symbol random access code.

    Alternates optimal-preparation updates (top eigenvector) with
    measurement-update SDPs from random projective starts, keeping the best
    run. Raises SolverFailure if the best value stays more than
    `optimum_tol` below the known quantum optimum 1/2 + 1/(2 sqrt(d)).
    """
    if d < 2:
        raise ValueError("d must be >= 2")
    target = 0.5 + 0.5 / math.sqrt(d)
    sdp = _MeasurementSDP(d)
    seeds = np.random.SeedSequence(seed).spawn(restarts)
    best_val = -np.inf
    best = None
    best_iters = 0
    for ss in seeds:
        child = ss.spawn(2)
        effects = np.stack(
            [
                np.array([e.mat for e in haar_random_basis(d, child[y]).effects])
                for y in range(2)
            ]
        )  # (2, d, d, d)
        prev = -np.inf
        value = 0.0
        for it in range(max_iterations):
            rho = _optimal_preparations(d, effects)
            new_effects = []
            value = 0.0
            for y in range(2):
                weights = [
                    sum(rho[x1 * d + x2] for x1 in range(d) for x2 in range(d) if (x1, x2)[y] == b)
                    for b in range(d)
                ]
                sol = sdp.solve(weights)
                new_effects.append(np.stack(sol))
                value += sum(np.trace(w @ e).real for w, e in zip(weights, sol))
            value /= 2 * d * d
            effects = np.stack(new_effects)
            if abs(value - prev) < step_tol:
                break
            prev = value
        if value > best_val:
            best_val = value
            best = (rho, effects)
            best_iters = it + 1
        if best_val >= target - optimum_tol:
            break
    if best_val < target - optimum_tol:
        raise SolverFailure(
            f"seesaw reached {best_val:.9f} after {restarts} restarts, "
            f"more than {optimum_tol:.1e} below the known optimum {target:.9f}"
        )
    rho, effects = best
    preparations = [HermitianOperator(r) for r in rho]
    measurements = []
    for y in range(2):
        # repair solver round-off: symmetrize, floor, renormalize to a POVM
        mats = [0.5 * (e + e.conj().T) for e in effects[y]]
        mats = [HermitianOperator(m).floored_to_psd().mat for m in mats]
        total = sum(mats)
        vals, vecs = np.linalg.eigh(total)
        inv_sqrt = (vecs / np.sqrt(vals)) @ vecs.conj().T
        measurements.append(Measurement([inv_sqrt @ m @ inv_sqrt for m in mats]))
    quantum = born_prepare_measure(preparations, measurements)
    mixed = HermitianOperator(np.eye(d) / d)
    noise = born_prepare_measure([mixed] * (d * d), measurements)
    return RACInstance(
        dimension=d,
        preparations=tuple(preparations),
        measurements=tuple(measurements),
        family=VisibilityFamily(quantum, noise),
        quantum_success=rac_success(quantum),
        seesaw_iterations=best_iters,
    )


# ---------------------------------------------------------------------------
# Mutually unbiased bases and steering instances
# ---------------------------------------------------------------------------


def _is_prime(n: int) -> bool:
    if n < 2:
        return False
    return all(n % k for k in range(2, int(math.isqrt(n)) + 1))


MUB_OVERLAP_ATOL = 1e-10


@dataclass(frozen=True)
class MUBSet:
    """k mutually unbiased orthonormal bases in prime dimension d.

    bases[m][:, i] is the i-th vector of basis m; all cross-basis overlaps
    satisfy |<e_i^(m)|e_j^(m')>|^2 = 1/d.
    """

    dimension: int
    bases: tuple

    def __post_init__(self):
        d = self.dimension
        for m, bm in enumerate(self.bases):
            for mp in range(m + 1, len(self.bases)):
                overlaps = np.abs(bm.conj().T @ self.bases[mp]) ** 2
                if np.max(np.abs(overlaps - 1.0 / d)) > MUB_OVERLAP_ATOL:
                    raise ValueError(f"bases {m} and {mp} are not mutually unbiased")

    def measurements(self) -> list:
        return [Measurement.from_basis(b) for b in self.bases]


def mub_bases(d: int, k: int) -> MUBSet:
    """Computational basis plus Weyl-Heisenberg Fourier-quadratic bases.

    Restricted to prime d, where the power construction yields a full set of
    d+1 MUBs; k may be anything from 2 to d+1.
    """
    if not _is_prime(d):
        raise ValueError(f"MUB construction requires prime dimension, got {d}")
    if not 2 <= k <= d + 1:
        raise ValueError(f"k must be in [2, {d + 1}], got {k}")
    bases = [np.eye(d, dtype=complex)]
    if d == 2:
        bases.append(np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2))
        bases.append(np.array([[1, 1], [1j, -1j]], dtype=complex) / math.sqrt(2))
    else:
        omega = np.exp(2j * np.pi / d)
        kk = np.arange(d)
        for m in range(d):
            # basis m, vector j, component k: omega^(m k^2 + j k) / sqrt(d)
            expo = ((m * kk * kk)[:, None] + np.outer(kk, np.arange(d))) % d
            bases.append(omega**expo / math.sqrt(d))
    arr = tuple(b.copy() for b in bases[:k])
    for b in arr:
        b.setflags(write=False)
    return MUBSet(d, arr)


def _noise_assemblage(inputs: int, outcomes: int, dim: int) -> Assemblage:
    eye = np.eye(dim) / (dim * outcomes)
    return Assemblage([[eye for _ in range(outcomes)] for _ in range(inputs)])


def mub_assemblage(d: int, k: int, state: HermitianOperator | None = None) -> VisibilityFamily:
    """Steering family: Alice measures k MUBs on her share of `state`.

    The noise endpoint replaces the shared state by 1/d^2 before tracing,
    which sends every member to 1/(d*N).
    """
    if state is None:
        state = maximally_entangled_state(d)
    if state.dim != d * d:
        raise InvalidScenario(f"state must live on dimension {d * d}, got {state.dim}")
    meas = mub_bases(d, k).measurements()
    quantum = steered_assemblage(state, meas, d)
    noise = _noise_assemblage(k, d, d)
    return VisibilityFamily(quantum, noise)


def random_steering_instance(
    d: int, n_meas: int, seed, rank: int = 1
) -> VisibilityFamily:
    """Random state (pure for rank=1, induced-measure mixed otherwise) with
    independent Haar-random projective measurements; deterministic per seed."""
    if d < 2 or n_meas < 2:
        raise ValueError("need d >= 2 and n_meas >= 2")
    if not isinstance(seed, np.random.SeedSequence):
        seed = np.random.SeedSequence(seed)
    children = seed.spawn(n_meas + 1)
    state = haar_random_state(d * d, rank, children[0])
    meas = [haar_random_basis(d, children[1 + m]) for m in range(n_meas)]
    quantum = steered_assemblage(state, meas, d)
    noise = _noise_assemblage(n_meas, d, d)
    return VisibilityFamily(quantum, noise)
