"""Local-hidden-state membership and critical visibility for assemblages.

The LHS set is characterized by PSD operators sigma_lam, one per
deterministic response function of Alice, reproducing the assemblage. The
visibility enters the SDP as a variable, so one solve returns both the
critical visibility and (from the dual) an operator-valued steering
functional, whose classical bound is re-derived exactly by eigenvalue
maximization over all response functions.
"""

import time

import numpy as np

from ..errors import InvalidScenario, SolverFailure
from ..scenarios import VisibilityFamily
from .bell import CERTIFIED_GAP_TOL
from .certificates import Certificate
from .strategies import MAX_RESPONSE_FUNCTIONS, response_tables


def classical_max_steering(
    coefficients: np.ndarray, cap: int = MAX_RESPONSE_FUNCTIONS
) -> float:
    """Exact LHS bound of an operator functional sum_ax tr[F_ax sigma_ax].

    On LHS models the value is sum_lam tr[G_lam sigma_lam] with
    G_lam = sum_x F_{lam(x)|x}; with unit total trace the maximum is the
    largest eigenvalue among the G_lam.
    """
    n_x, n_a = coefficients.shape[:2]
    tables = response_tables(n_x, n_a, cap=cap)
    g = np.zeros((tables.shape[0],) + coefficients.shape[2:], dtype=complex)
    for x in range(n_x):
        g += coefficients[x, tables[:, x]]
    g = 0.5 * (g + np.conj(np.swapaxes(g, -1, -2)))
    return float(np.linalg.eigvalsh(g)[:, -1].max())


def _hermitize(mat: np.ndarray) -> np.ndarray:
    return 0.5 * (mat + mat.conj().T)


def _solve_sdp(problem, solver: str):
    import cvxpy as cp

    kwargs = {"CLARABEL": {}, "SCS": {"eps": 1e-9, "max_iters": 200_000}}
    order = [solver] + [s for s in ("CLARABEL", "SCS") if s != solver]
    last = None
    for name in order:
        try:
            problem.solve(solver=getattr(cp, name), **kwargs.get(name, {}))
        except cp.error.SolverError as exc:
            last = f"{name}: {exc}"
            continue
        if problem.status == "optimal":
            return name
        last = f"{name}: status {problem.status}"
    raise SolverFailure(f"LHS SDP did not reach an optimal solution ({last})")


def steering_critical_visibility(
    family: VisibilityFamily,
    *,
    solver: str = "CLARABEL",
    cap: int = MAX_RESPONSE_FUNCTIONS,
    progress=None,
) -> tuple[float, Certificate]:
    """Largest visibility at which the assemblage family admits an LHS model."""
    import cvxpy as cp

    if family.kind != "assemblage":
        raise InvalidScenario("expected a family of assemblages")
    sig_q = family.quantum.as_array()
    sig_n = family.noise.as_array()
    n_x, n_a, dim = sig_q.shape[:3]
    tables = response_tables(n_x, n_a, cap=cap)
    n_lam = tables.shape[0]
    rho_q = sig_q[0].sum(axis=0)
    rho_n = sig_n[0].sum(axis=0)

    if progress:
        progress(f"building LHS SDP over {n_lam} response functions (dim {dim})")
    sig_lam = [cp.Variable((dim, dim), hermitian=True) for _ in range(n_lam)]
    v = cp.Variable()
    constraints = [s >> 0 for s in sig_lam]
    cg_constraints = []
    for x in range(n_x):
        members = [np.nonzero(tables[:, x] == a)[0] for a in range(n_a)]
        for a in range(n_a - 1):
            lhs = cp.sum([sig_lam[l] for l in members[a]])
            con = lhs == v * sig_q[x, a] + (1 - v) * sig_n[x, a]
            cg_constraints.append((x, a, con))
            constraints.append(con)
    sum_con = cp.sum(sig_lam) == v * rho_q + (1 - v) * rho_n
    constraints.append(sum_con)
    constraints += [v >= 0, v <= 1]
    problem = cp.Problem(cp.Maximize(v), constraints)

    if progress:
        progress("solving LHS SDP")
    t0 = time.perf_counter()
    used = _solve_sdp(problem, solver)
    solve_time = time.perf_counter() - t0
    if problem.status == "infeasible":
        raise InvalidScenario("LHS SDP infeasible: the noise endpoint itself is steerable")
    v_raw = float(v.value)

    # dual witness lifted to the full assemblage: the sum row's multiplier is
    # spread over inputs since rho_B = sum_a sigma_{a|x} for every x
    witness = np.zeros((n_x, n_a, dim, dim), dtype=complex)
    if sum_con.dual_value is None or any(c.dual_value is None for _, _, c in cg_constraints):
        raise SolverFailure("solver returned no duals for the LHS SDP")
    for x, a, con in cg_constraints:
        witness[x, a] = _hermitize(np.asarray(con.dual_value))
    witness += _hermitize(np.asarray(sum_con.dual_value)) / n_x

    achieved = float(np.einsum("xaij,xaji->", witness, sig_q).real)
    noise_val = float(np.einsum("xaij,xaji->", witness, sig_n).real)
    if achieved < noise_val:
        witness = -witness
        achieved, noise_val = -achieved, -noise_val
    bound = classical_max_steering(witness, cap=cap)

    v_crit = min(v_raw, 1.0)
    at_boundary = v_raw >= 1.0 - 1e-7
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
        kind="steering",
        scenario={"type": "assemblage", "inputs": n_x, "outcomes": n_a, "dim": dim},
        coefficients=witness,
        classical_bound=bound,
        achieved_value=achieved,
        v_critical=round(v_crit, 6),
        solver_stats={
            "method": used,
            "iterations": int(getattr(problem.solver_stats, "num_iters", -1) or -1),
            "solve_time": solve_time,
            "response_functions": int(n_lam),
            "residuals": {"certified_gap": certified_gap},
            "noise_value": noise_val,
            "v_raw": v_raw,
        },
    )
    return v_crit, cert
