"""Classicality of prepare-and-measure behaviors with a d-valued message.

The classical model routes each preparation x through a deterministic
encoding into one of d messages; shared randomness correlates the encoding
with Bob's (subnormalized) responses. Encodings that differ only by a
relabeling of messages simulate identical behaviors, so by default only
first-occurrence canonical representatives are enumerated; correctness of
that reduction is testable against the unreduced LP on small instances.
"""

import time
from fractions import Fraction

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

from ..errors import InvalidScenario, ScenarioTooLarge, SolverFailure
from ..scenarios import Behavior, VisibilityFamily
from .bell import CERTIFIED_GAP_TOL, FEASIBILITY_TOL
from .certificates import Certificate
from .strategies import (
    MAX_PRODUCT_STRATEGIES,
    all_encodings,
    canonical_encodings,
    response_tables,
)

MAX_LP_VARIABLES = 5_000_000


def _check_pm_family(family: VisibilityFamily):
    if family.kind != "behavior" or family.quantum.is_bell:
        raise InvalidScenario("expected a family of prepare-and-measure behaviors")


def _assemble_pm_lp(p_q: np.ndarray, p_n: np.ndarray, encodings: np.ndarray, d: int):
    """Equality system for sum_lam r_lam(b | E_lam(x), y) = v p_q + (1-v) p_n.

    Variable layout: r[lam, m, b, y], then w[lam], then v. Row layout:
    joint rows (b < B-1 suffice; normalization of the left side is implied
    by the consistency and total-weight rows), consistency, total weight.
    """
    n_b, n_x, n_y = p_q.shape
    n_enc = encodings.shape[0]
    n_r = n_enc * d * n_b * n_y
    n_var = n_r + n_enc + 1
    if n_var > MAX_LP_VARIABLES:
        raise ScenarioTooLarge(f"{n_var} LP variables exceed the cap of {MAX_LP_VARIABLES}")
    v_col = n_var - 1
    lam = np.arange(n_enc)

    # joint rows: enumerate (b, x, y) with b < B-1, C order
    bi, xi, yi = np.meshgrid(np.arange(n_b - 1), np.arange(n_x), np.arange(n_y), indexing="ij")
    bf, xf, yf = bi.ravel(), xi.ravel(), yi.ravel()
    n_joint = bf.size
    rows_j = np.repeat(np.arange(n_joint), n_enc)
    cols_j = (
        ((lam[None, :] * d + encodings[:, xf].T) * n_b + bf[:, None]) * n_y + yf[:, None]
    ).ravel()
    rhs_j = p_n[bf, xf, yf]
    vvals_j = -(p_q[bf, xf, yf] - p_n[bf, xf, yf])

    # consistency rows: (lam, m, y)
    n_cons = n_enc * d * n_y
    li, mi, yi2 = np.meshgrid(lam, np.arange(d), np.arange(n_y), indexing="ij")
    lf, mf, yf2 = li.ravel(), mi.ravel(), yi2.ravel()
    rows_c = np.repeat(np.arange(n_joint, n_joint + n_cons), n_b)
    cols_c = (
        ((lf[:, None] * d + mf[:, None]) * n_b + np.arange(n_b)[None, :]) * n_y + yf2[:, None]
    ).ravel()

    n_rows = n_joint + n_cons + 1
    rows = np.concatenate(
        [
            rows_j,
            np.arange(n_joint),
            rows_c,
            np.arange(n_joint, n_joint + n_cons),
            np.full(n_enc, n_rows - 1),
        ]
    )
    cols = np.concatenate(
        [cols_j, np.full(n_joint, v_col), cols_c, n_r + lf, n_r + lam]
    )
    vals = np.concatenate(
        [
            np.ones(rows_j.size),
            vvals_j,
            np.ones(rows_c.size),
            -np.ones(n_cons),
            np.ones(n_enc),
        ]
    )
    rhs = np.concatenate([rhs_j, np.zeros(n_cons), [1.0]])
    a_eq = sp.coo_matrix((vals, (rows, cols)), shape=(n_rows, n_var)).tocsc()
    return a_eq, rhs, (bf, xf, yf)


def classical_max_pm(
    coefficients: np.ndarray, d: int, cap: int = MAX_PRODUCT_STRATEGIES
) -> float:
    """Exact maximum of a PM functional over d-message classical models.

    For a fixed encoding the best deterministic response decouples per
    (message, input y); relabeled encodings give the same value, so the
    canonical set suffices.
    """
    n_b, n_x, n_y = coefficients.shape
    encodings = canonical_encodings(n_x, d, cap=cap)
    onehot = np.zeros((encodings.shape[0], n_x, d))
    onehot[np.arange(encodings.shape[0])[:, None], np.arange(n_x)[None, :], encodings] = 1.0
    # S[lam, m, b, y] = sum_x [E_lam(x) = m] c(b, x, y)
    s = np.einsum("lxm,bxy->lmby", onehot, coefficients)
    return float(s.max(axis=2).sum(axis=(1, 2)).max())


def pm_critical_visibility(
    family: VisibilityFamily,
    d: int,
    *,
    reduce_encodings: bool = True,
    method: str = "highs-ipm",
    progress=None,
) -> tuple[float, Certificate]:
    """Largest visibility compatible with a d-dimensional classical message.

    Returns the optimum together with a dual-derived witness whose classical
    bound is re-derived exactly by encoding enumeration.
    """
    _check_pm_family(family)
    if d < 1:
        raise ValueError("message alphabet size d must be >= 1")
    p_q = family.quantum.table
    p_n = family.noise.table
    n_b, n_x, n_y = p_q.shape

    if reduce_encodings:
        encodings = canonical_encodings(n_x, d)
    else:
        encodings = all_encodings(n_x, d, cap=MAX_PRODUCT_STRATEGIES)
    if progress:
        progress(f"assembling LP over {encodings.shape[0]} encodings")
    a_eq, rhs, joint_idx = _assemble_pm_lp(p_q, p_n, encodings, d)
    n_var = a_eq.shape[1]
    cost = np.zeros(n_var)
    cost[-1] = -1.0
    bounds = np.zeros((n_var, 2))
    bounds[:, 1] = np.inf
    bounds[-1, 1] = 1.0

    if progress:
        progress(f"solving LP: {a_eq.shape[0]} rows, {n_var} cols, {a_eq.nnz} nonzeros")
    t0 = time.perf_counter()
    res = linprog(
        cost,
        A_eq=a_eq,
        b_eq=rhs,
        bounds=bounds,
        method=method,
        options={
            "primal_feasibility_tolerance": FEASIBILITY_TOL,
            "dual_feasibility_tolerance": FEASIBILITY_TOL,
        },
    )
    solve_time = time.perf_counter() - t0
    if res.status == 2:
        raise InvalidScenario(
            "visibility LP infeasible: the noise endpoint itself is nonclassical"
        )
    if res.status != 0:
        raise SolverFailure(f"LP did not converge: {res.message}")
    v_raw = float(res.x[-1])
    residual = float(np.max(np.abs(a_eq @ res.x - rhs)))

    bf, xf, yf = joint_idx
    witness = np.zeros_like(p_q)
    witness[bf, xf, yf] = np.asarray(res.eqlin.marginals)[: bf.size]
    achieved = float((witness * p_q).sum())
    noise_val = float((witness * p_n).sum())
    if achieved < noise_val:
        witness = -witness
        achieved, noise_val = -achieved, -noise_val
    bound = classical_max_pm(witness, d)

    v_crit = min(v_raw, 1.0)
    at_boundary = v_raw >= 1.0 - 1e-9
    if at_boundary:
        certified_gap = 0.0
        v_crit = 1.0
    else:
        if achieved - noise_val <= 1e-12:
            raise SolverFailure("degenerate dual witness: no direction of violation")
        v_witness = (bound - noise_val) / (achieved - noise_val)
        certified_gap = v_witness - v_raw
        if not -CERTIFIED_GAP_TOL <= certified_gap <= CERTIFIED_GAP_TOL * max(1.0, v_raw):
            raise SolverFailure(
                f"primal/dual visibility gap {certified_gap:.3e} exceeds tolerance"
            )

    cert = Certificate(
        kind="pm",
        scenario={
            "type": "pm",
            "preparations": n_x,
            "measurements": n_y,
            "outcomes": n_b,
            "message_dim": d,
        },
        coefficients=witness,
        classical_bound=bound,
        achieved_value=achieved,
        v_critical=round(v_crit, 6),
        solver_stats={
            "method": method,
            "iterations": int(getattr(res, "nit", -1)),
            "solve_time": solve_time,
            "encodings": int(encodings.shape[0]),
            "reduced": bool(reduce_encodings),
            "lp_rows": int(a_eq.shape[0]),
            "lp_cols": int(n_var),
            "lp_nonzeros": int(a_eq.nnz),
            "residuals": {"constraint": residual, "certified_gap": certified_gap},
            "noise_value": noise_val,
            "v_raw": v_raw,
        },
    )
    return v_crit, cert


# ---------------------------------------------------------------------------
# Brute-force oracle over (encoding, decoding) vertices
# ---------------------------------------------------------------------------


def _pm_vertex_matrix(scenario, d: int, cap: int):
    n_b, n_x, n_y = scenario.outcomes, scenario.preparations, scenario.measurements
    encs = all_encodings(n_x, d)
    decs = response_tables(d * n_y, n_b)  # decoding input index = m*Y + y
    n_vert = encs.shape[0] * decs.shape[0]
    if n_vert > cap:
        raise ScenarioTooLarge(f"{n_vert} PM vertices exceed the cap of {cap}")
    rows_parts, cols_parts = [], []
    n_dec = decs.shape[0]
    for x in range(n_x):
        for y in range(n_y):
            # b for vertex (i_enc, j_dec): decs[j, encs[i, x]*Y + y]
            b = decs[:, encs[:, x] * n_y + y]  # (n_dec, n_enc)
            flat_rows = (b * n_x + x) * n_y + y
            cols = (np.arange(encs.shape[0])[None, :] * n_dec + np.arange(n_dec)[:, None])
            rows_parts.append(flat_rows.ravel())
            cols_parts.append(cols.ravel())
    rows = np.concatenate(rows_parts)
    cols = np.concatenate(cols_parts)
    return sp.coo_matrix(
        (np.ones(rows.size), (rows, cols)), shape=(n_b * n_x * n_y, n_vert)
    ).tocsc()


def _pm_membership_feasible(vert: sp.csc_matrix, p_flat: np.ndarray) -> bool:
    n_vert = vert.shape[1]
    a_eq = sp.vstack([vert, np.ones((1, n_vert))]).tocsc()
    b_eq = np.concatenate([p_flat, [1.0]])
    res = linprog(np.zeros(n_vert), A_eq=a_eq, b_eq=b_eq, bounds=(0, None), method="highs")
    if res.status == 0:
        return True
    if res.status == 2:
        return False
    raise SolverFailure(f"membership LP failed: {res.message}")


def bruteforce_visibility_pm(
    family: VisibilityFamily,
    d: int,
    tol: float = 1e-7,
    cap: int = MAX_PRODUCT_STRATEGIES,
) -> float:
    """Critical visibility by bisection over explicit (encoding, decoding) vertices."""
    _check_pm_family(family)
    vert = _pm_vertex_matrix(family.quantum.scenario, d, cap)
    p_q = family.quantum.table.ravel()
    p_n = family.noise.table.ravel()

    def is_classical(v: float) -> bool:
        return _pm_membership_feasible(vert, v * p_q + (1 - v) * p_n)

    if not is_classical(0.0):
        raise InvalidScenario("noise endpoint itself is nonclassical")
    if is_classical(1.0):
        return 1.0
    lo, hi = 0.0, 1.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if is_classical(mid):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# The binarised random-access-code witness
# ---------------------------------------------------------------------------

# Coefficient structure: +1 on the click matching the queried symbol,
# -5/8 on every other click of the same measurement block; classical bound 9.
RAC_WITNESS_PENALTY = Fraction(5, 8)
RAC_WITNESS_BOUND = 9


def rac_binarised_witness_coefficients(d: int = 3) -> np.ndarray:
    """Click-outcome coefficients on the binarised RAC scenario (d=3)."""
    n_x = d * d
    coeffs = np.zeros((2, n_x, 2 * d))
    for x1 in range(d):
        for x2 in range(d):
            x = x1 * d + x2
            for y, sym in enumerate((x1, x2)):
                for b in range(d):
                    coeffs[0, x, y * d + b] = 1.0 if b == sym else -float(RAC_WITNESS_PENALTY)
    return coeffs


def rac_binarised_witness_value(p: Behavior) -> float:
    """Value of the tailored binarised-RAC inequality on a binary PM behavior."""
    if p.is_bell:
        raise InvalidScenario("expected a prepare-and-measure behavior")
    s = p.scenario
    if (s.preparations, s.measurements, s.outcomes) != (9, 6, 2):
        raise InvalidScenario(
            f"need the binarised d=3 RAC scenario (9 preparations, 6 binary "
            f"measurements), got {s}"
        )
    return float((rac_binarised_witness_coefficients(3) * p.table).sum())


def rac_binarised_witness_classical_max(d: int = 3) -> tuple[Fraction, float]:
    """Exact classical maximum of the binarised-RAC witness, in integer arithmetic.

    Deterministic strategies in the binarised scenario pick a message per
    preparation and, independently per (message, port), click or not; there
    is no one-click-per-block constraint. Coefficients are scaled by 8 so
    every deterministic value is an integer.
    """
    n_x = d * d
    coeffs8 = np.rint(rac_binarised_witness_coefficients(d)[0] * 8).astype(np.int64)
    encodings = canonical_encodings(n_x, d)
    onehot = np.zeros((encodings.shape[0], n_x, d), dtype=np.int64)
    onehot[np.arange(encodings.shape[0])[:, None], np.arange(n_x)[None, :], encodings] = 1
    # per-(message, port) click totals; click iff the total is positive
    s = np.einsum("lxm,xt->lmt", onehot, coeffs8)
    best8 = int(np.maximum(s, 0).sum(axis=(1, 2)).max())
    exact = Fraction(best8, 8)
    return exact, float(exact)
