"""Local-polytope membership and critical visibility for Bell behaviors.

Two routes are kept deliberately independent:

* `bell_critical_visibility` solves one LP with the visibility as a variable,
  over deterministic strategies of Alice only (Bob's responses stay
  subnormalized continuous variables). This is the production path.
* `bell_membership_bruteforce` / `bruteforce_visibility_bell` enumerate the
  full product-strategy vertex set and decide membership by feasibility LP
  (bisected over v for visibilities). This is the oracle the efficient
  formulation is tested against.
"""

import time
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

from ..errors import InvalidScenario, ScenarioTooLarge, SolverFailure
from ..scenarios import Behavior, VisibilityFamily
from .certificates import Certificate
from .strategies import MAX_PRODUCT_STRATEGIES, response_tables

# LP feasibility tolerance; comfortably inside acceptance tolerances while
# above HiGHS noise.
FEASIBILITY_TOL = 1e-8
# |primal v - witness-implied v| must stay below this (relative) or the
# result is not trusted.
CERTIFIED_GAP_TOL = 1e-6


def _check_bell_family(family: VisibilityFamily):
    if family.kind != "behavior" or not family.quantum.is_bell:
        raise InvalidScenario("expected a family of Bell behaviors")


def _assemble_visibility_lp(p_q: np.ndarray, p_n: np.ndarray, tables: np.ndarray):
    """Sparse equality system for: exists weights/responses reproducing
    v*p_q + (1-v)*p_n, with v the last variable.

    Only the Collins-Gisin coordinates (joint entries with a < A-1, b < B-1,
    plus one-party marginals) are constrained; together with the
    subnormalization and total-weight rows they pin the full tensor for any
    no-signaling input.

    Variable layout: q[lam, b, y] (responses), then w[lam], then v.
    Row layout: joint, A-marginal, B-marginal, consistency, normalization.
    """
    n_a, n_b, n_x, n_y = p_q.shape
    n_lam = tables.shape[0]
    n_q = n_lam * n_b * n_y
    n_var = n_q + n_lam + 1
    v_col = n_var - 1

    lam_sets = {
        (a, x): np.nonzero(tables[:, x] == a)[0] for a in range(n_a) for x in range(n_x)
    }

    rows_parts, cols_parts, vals_parts, rhs_parts = [], [], [], []

    def q_cols(lams, b, y):
        return lams * (n_b * n_y) + b * n_y + y

    # joint rows
    n_joint = (n_a - 1) * (n_b - 1) * n_x * n_y
    ridx = 0
    vcol_vals = np.empty(n_joint)
    rhs_joint = np.empty(n_joint)
    jr, jc = [], []
    for a in range(n_a - 1):
        for b in range(n_b - 1):
            for x in range(n_x):
                lams = lam_sets[(a, x)]
                base = q_cols(lams, b, 0)
                for y in range(n_y):
                    jr.append(np.full(lams.size, ridx))
                    jc.append(base + y)
                    vcol_vals[ridx] = -(p_q[a, b, x, y] - p_n[a, b, x, y])
                    rhs_joint[ridx] = p_n[a, b, x, y]
                    ridx += 1
    rows_parts.append(np.concatenate(jr))
    cols_parts.append(np.concatenate(jc))
    vals_parts.append(np.ones(sum(c.size for c in jc)))
    rows_parts.append(np.arange(n_joint))
    cols_parts.append(np.full(n_joint, v_col))
    vals_parts.append(vcol_vals)
    rhs_parts.append(rhs_joint)
    offset = n_joint

    # Alice marginal rows: sum_lam D(a|x) w_lam
    pa_q = p_q.sum(axis=1).mean(axis=2)
    pa_n = p_n.sum(axis=1).mean(axis=2)
    n_ma = (n_a - 1) * n_x
    mr, mc = [], []
    vcol_vals = np.empty(n_ma)
    rhs_ma = np.empty(n_ma)
    ridx = 0
    for a in range(n_a - 1):
        for x in range(n_x):
            lams = lam_sets[(a, x)]
            mr.append(np.full(lams.size, offset + ridx))
            mc.append(n_q + lams)
            vcol_vals[ridx] = -(pa_q[a, x] - pa_n[a, x])
            rhs_ma[ridx] = pa_n[a, x]
            ridx += 1
    rows_parts.append(np.concatenate(mr))
    cols_parts.append(np.concatenate(mc))
    vals_parts.append(np.ones(sum(c.size for c in mc)))
    rows_parts.append(np.arange(offset, offset + n_ma))
    cols_parts.append(np.full(n_ma, v_col))
    vals_parts.append(vcol_vals)
    rhs_parts.append(rhs_ma)
    offset += n_ma

    # Bob marginal rows: sum_lam q_lam(b|y)
    pb_q = p_q.sum(axis=0).mean(axis=1)
    pb_n = p_n.sum(axis=0).mean(axis=1)
    n_mb = (n_b - 1) * n_y
    all_lams = np.arange(n_lam)
    mr, mc = [], []
    vcol_vals = np.empty(n_mb)
    rhs_mb = np.empty(n_mb)
    ridx = 0
    for b in range(n_b - 1):
        for y in range(n_y):
            mr.append(np.full(n_lam, offset + ridx))
            mc.append(q_cols(all_lams, b, y))
            vcol_vals[ridx] = -(pb_q[b, y] - pb_n[b, y])
            rhs_mb[ridx] = pb_n[b, y]
            ridx += 1
    rows_parts.append(np.concatenate(mr))
    cols_parts.append(np.concatenate(mc))
    vals_parts.append(np.ones(n_mb * n_lam))
    rows_parts.append(np.arange(offset, offset + n_mb))
    cols_parts.append(np.full(n_mb, v_col))
    vals_parts.append(vcol_vals)
    rhs_parts.append(rhs_mb)
    offset += n_mb

    # consistency: sum_b q_lam(b|y) - w_lam = 0, for every (lam, y)
    n_cons = n_lam * n_y
    li, yi = np.meshgrid(all_lams, np.arange(n_y), indexing="ij")
    lf, yf = li.ravel(), yi.ravel()
    rows_parts.append(np.repeat(np.arange(offset, offset + n_cons), n_b))
    cols_parts.append(
        (lf[:, None] * (n_b * n_y) + np.arange(n_b)[None, :] * n_y + yf[:, None]).ravel()
    )
    vals_parts.append(np.ones(n_cons * n_b))
    rows_parts.append(np.arange(offset, offset + n_cons))
    cols_parts.append(n_q + lf)
    vals_parts.append(-np.ones(n_cons))
    rhs_parts.append(np.zeros(n_cons))
    offset += n_cons

    # total weight
    rows_parts.append(np.full(n_lam, offset))
    cols_parts.append(n_q + all_lams)
    vals_parts.append(np.ones(n_lam))
    rhs_parts.append(np.array([1.0]))
    offset += 1

    a_eq = sp.coo_matrix(
        (
            np.concatenate(vals_parts),
            (np.concatenate(rows_parts), np.concatenate(cols_parts)),
        ),
        shape=(offset, n_var),
    ).tocsc()
    b_eq = np.concatenate(rhs_parts)
    row_blocks = {
        "joint": (0, n_joint),
        "marg_a": (n_joint, n_joint + n_ma),
        "marg_b": (n_joint + n_ma, n_joint + n_ma + n_mb),
    }
    return a_eq, b_eq, row_blocks


def _witness_from_duals(duals: np.ndarray, row_blocks, shape) -> np.ndarray:
    """Lift dual multipliers of the CG rows to a full-tensor Bell functional.

    A marginal coordinate p^A(a|x) equals (1/Y) sum_{y,b} p(a,b|x,y) on
    no-signaling behaviors, so its multiplier is spread uniformly; same for
    Bob and the constant row. The resulting functional agrees with the dual
    combination on every valid behavior.
    """
    n_a, n_b, n_x, n_y = shape
    c = np.zeros(shape)
    lo, hi = row_blocks["joint"]
    c[: n_a - 1, : n_b - 1, :, :] += duals[lo:hi].reshape(n_a - 1, n_b - 1, n_x, n_y)
    lo, hi = row_blocks["marg_a"]
    c[: n_a - 1, :, :, :] += duals[lo:hi].reshape(n_a - 1, 1, n_x, 1) / n_y
    lo, hi = row_blocks["marg_b"]
    c[:, : n_b - 1, :, :] += duals[lo:hi].reshape(1, n_b - 1, 1, n_y) / n_x
    return c


def classical_max_bell(
    coefficients: np.ndarray, cap: int = MAX_PRODUCT_STRATEGIES
) -> float:
    """Exact maximum of a Bell functional over the local polytope.

    The maximum sits on a product of deterministic strategies; for a fixed
    Alice table the best Bob response decouples per input y.
    """
    n_a, n_b, n_x, n_y = coefficients.shape
    tables = response_tables(n_x, n_a, cap=cap)
    totals = np.zeros((tables.shape[0], n_b, n_y))
    for x in range(n_x):
        totals += coefficients[tables[:, x], :, x, :]
    return float(totals.max(axis=1).sum(axis=1).max())


def bell_critical_visibility(
    family: VisibilityFamily,
    *,
    method: str = "highs-ipm",
    progress=None,
) -> tuple[float, Certificate]:
    """Largest visibility at which the family stays inside the local polytope.

    Returns the optimum and a dual-derived Bell-inequality certificate whose
    classical bound is re-derived exactly by strategy enumeration. The
    certificate's witness-implied critical visibility must agree with the
    primal optimum to CERTIFIED_GAP_TOL, otherwise SolverFailure is raised.

    `progress` receives stage messages (enumeration, assembly, solve);
    raising from the callback aborts the computation between stages.
    """
    _check_bell_family(family)
    p_q = family.quantum.table
    p_n = family.noise.table
    n_a, n_b, n_x, n_y = p_q.shape

    if progress:
        progress(f"enumerating {n_a}^{n_x} Alice strategies")
    tables = response_tables(n_x, n_a, cap=MAX_PRODUCT_STRATEGIES)
    if progress:
        progress(f"assembling LP over {tables.shape[0]} strategies")
    a_eq, b_eq, row_blocks = _assemble_visibility_lp(p_q, p_n, tables)
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
        b_eq=b_eq,
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
            "visibility LP infeasible: the noise endpoint itself is nonlocal"
        )
    if res.status != 0:
        raise SolverFailure(f"LP did not converge: {res.message}")

    v_raw = float(res.x[-1])
    residual = float(np.max(np.abs(a_eq @ res.x - b_eq)))
    if progress:
        progress(f"LP solved: v={v_raw:.6f}, residual={residual:.2e}")

    witness = _witness_from_duals(np.asarray(res.eqlin.marginals), row_blocks, p_q.shape)
    achieved = float((witness * p_q).sum())
    noise_val = float((witness * p_n).sum())
    if achieved < noise_val:
        witness = -witness
        achieved, noise_val = -achieved, -noise_val
    bound = classical_max_bell(witness)

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
        kind="bell",
        scenario={
            "type": "bell",
            "inputs_a": n_x,
            "inputs_b": n_y,
            "outcomes_a": n_a,
            "outcomes_b": n_b,
        },
        coefficients=witness,
        classical_bound=bound,
        achieved_value=achieved,
        v_critical=round(v_crit, 6),
        solver_stats={
            "method": method,
            "iterations": int(getattr(res, "nit", -1)),
            "solve_time": solve_time,
            "strategies": int(tables.shape[0]),
            "lp_rows": int(a_eq.shape[0]),
            "lp_cols": int(n_var),
            "lp_nonzeros": int(a_eq.nnz),
            "residuals": {
                "constraint": residual,
                "certified_gap": certified_gap,
            },
            "noise_value": noise_val,
            "v_raw": v_raw,
        },
    )
    return v_crit, cert


# ---------------------------------------------------------------------------
# Brute-force oracle over the full product-strategy vertex set
# ---------------------------------------------------------------------------


@dataclass
class BruteForceResult:
    local: bool
    violation: float
    witness: np.ndarray | None
    witness_bound: float | None


def _product_vertex_matrix(scenario, cap: int):
    n_x, n_y = scenario.inputs_a, scenario.inputs_b
    n_a, n_b = scenario.outcomes_a, scenario.outcomes_b
    count = (n_a**n_x) * (n_b**n_y)
    if count > cap:
        raise ScenarioTooLarge(f"{count} product strategies exceed the cap of {cap}")
    t_a = response_tables(n_x, n_a)
    t_b = response_tables(n_y, n_b)
    la, lb = t_a.shape[0], t_b.shape[0]
    tensor_size = n_a * n_b * n_x * n_y
    # vertex j = i_a * lb + i_b; one nonzero per (x, y)
    cols_parts, rows_parts = [], []
    for x in range(n_x):
        ax = t_a[:, x]
        for y in range(n_y):
            by = t_b[:, y]
            flat = ((ax[:, None] * n_b + by[None, :]) * n_x + x) * n_y + y
            rows_parts.append(flat.ravel())
            cols_parts.append(np.arange(la * lb))
    rows = np.concatenate(rows_parts)
    cols = np.concatenate(cols_parts)
    vert = sp.coo_matrix(
        (np.ones(rows.size), (rows, cols)), shape=(tensor_size, la * lb)
    ).tocsc()
    return vert


def _membership_feasible(vert: sp.csc_matrix, p_flat: np.ndarray) -> bool:
    n_vert = vert.shape[1]
    a_eq = sp.vstack([vert, np.ones((1, n_vert))]).tocsc()
    b_eq = np.concatenate([p_flat, [1.0]])
    res = linprog(
        np.zeros(n_vert),
        A_eq=a_eq,
        b_eq=b_eq,
        bounds=(0, None),
        method="highs",
    )
    if res.status == 0:
        return True
    if res.status == 2:
        return False
    raise SolverFailure(f"membership LP failed: {res.message}")


def bell_membership_bruteforce(
    p: Behavior, cap: int = MAX_PRODUCT_STRATEGIES, tol: float = 1e-9
) -> BruteForceResult:
    """Exact local-polytope membership via weights on all product strategies.

    When the behavior is nonlocal, a separating functional is recovered from
    the polytope-distance dual: maximize c.p - max_local(c) over |c| <= 1.
    """
    if not p.is_bell:
        raise InvalidScenario("expected a Bell behavior")
    vert = _product_vertex_matrix(p.scenario, cap)
    p_flat = p.table.ravel()
    if _membership_feasible(vert, p_flat):
        return BruteForceResult(local=True, violation=0.0, witness=None, witness_bound=None)

    # witness LP: variables (c, theta); c.V_j <= theta for all vertices
    tensor_size = vert.shape[0]
    n_vert = vert.shape[1]
    a_ub = sp.hstack([vert.T, -np.ones((n_vert, 1))]).tocsc()
    cost = np.concatenate([-p_flat, [1.0]])
    bounds = [(-1.0, 1.0)] * tensor_size + [(None, None)]
    res = linprog(cost, A_ub=a_ub, b_ub=np.zeros(n_vert), bounds=bounds, method="highs")
    if res.status != 0:
        raise SolverFailure(f"witness LP failed: {res.message}")
    witness = res.x[:tensor_size].reshape(p.table.shape)
    violation = float(-res.fun)
    if violation <= tol:
        # solver disagreement between the two LPs; treat as boundary-local
        return BruteForceResult(local=True, violation=violation, witness=None, witness_bound=None)
    return BruteForceResult(
        local=False,
        violation=violation,
        witness=witness,
        witness_bound=classical_max_bell(witness),
    )


def bruteforce_visibility_bell(
    family: VisibilityFamily,
    tol: float = 1e-7,
    cap: int = MAX_PRODUCT_STRATEGIES,
) -> float:
    """Critical visibility by bisection over brute-force membership tests."""
    _check_bell_family(family)
    vert = _product_vertex_matrix(family.quantum.scenario, cap)
    p_q = family.quantum.table.ravel()
    p_n = family.noise.table.ravel()

    def is_local(v: float) -> bool:
        return _membership_feasible(vert, v * p_q + (1 - v) * p_n)

    if not is_local(0.0):
        raise InvalidScenario("noise endpoint itself is nonlocal")
    if is_local(1.0):
        return 1.0
    lo, hi = 0.0, 1.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if is_local(mid):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
