"""Dense convex QP solver with warm starts and KKT certification.

Solves  minimize 1/2 beta' H beta + f' beta
        subject to  Aeq beta = beq,  A beta <= b,  l <= beta <= u

for symmetric positive semidefinite H.  The workhorse is an operator
splitting (alternating direction) method on the stacked constraint system
lo <= C beta <= up, followed by an active-set polish that re-solves the
equality-reduced KKT system for near-exact multipliers.  Splitting tolerates
singular H (scorecard design matrices are rank deficient by construction)
and infeasible warm starts, and produces primal/dual infeasibility
certificates from the iterate differences.

Unconstrained and equality-only problems take direct least-squares paths.
All paths are deterministic: identical inputs and settings give bitwise
identical outputs.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import linalg

from .constraints import ConstraintSet
from .model import SpecError

__all__ = [
    "QpWarning",
    "QpSettings",
    "QpProblem",
    "QpSolution",
    "KktResiduals",
    "solve_qp",
    "kkt_residuals",
    "qp_objective",
]


class QpWarning(UserWarning):
    """Non-fatal solver conditions, e.g. rank-deficient unconstrained solves."""


@dataclass(frozen=True)
class QpSettings:
    """Solver tolerances and algorithm knobs.

    eps_abs/eps_rel terminate the splitting iteration; they are tight by
    default so the outer fitting loop is not solver-noise limited.  sigma is
    the diagonal regularization added to H inside subproblem solves only; it
    is absent from all reported KKT residuals.  alpha is the relaxation
    parameter; rho the base step penalty, scaled by rho_eq_scale on equality
    rows and adapted between refactorizations when adaptive_rho is set.
    """

    eps_abs: float = 1e-9
    eps_rel: float = 1e-9
    max_iters: int = 200_000
    sigma: float = 1e-6
    alpha: float = 1.6
    rho: float = 0.1
    rho_eq_scale: float = 1e3
    rho_min: float = 1e-6
    rho_max: float = 1e6
    check_interval: int = 25
    adaptive_rho: bool = True
    adaptive_rho_tolerance: float = 5.0
    eps_prim_inf: float = 1e-8
    eps_dual_inf: float = 1e-8
    polish: bool = True
    polish_delta: float = 1e-7
    polish_refine_iters: int = 10
    polish_max_rounds: int = 40


@dataclass(frozen=True, eq=False)
class QpProblem:
    """One convex QP instance over the full coefficient vector.

    h is symmetrized on construction and must be symmetric to within 1e-12
    relative; bounds default to -inf/+inf per coefficient; warm_start, when
    given, seeds the splitting iteration.
    """

    h: np.ndarray
    f: np.ndarray
    cs: ConstraintSet
    l: Optional[np.ndarray] = None
    u: Optional[np.ndarray] = None
    warm_start: Optional[np.ndarray] = None

    def __post_init__(self) -> None:
        h = np.asarray(self.h, dtype=float)
        f = np.asarray(self.f, dtype=float)
        if h.ndim != 2 or h.shape[0] != h.shape[1]:
            raise SpecError(f"H must be square, got shape {h.shape}")
        q = h.shape[0]
        if f.shape != (q,):
            raise SpecError(f"f must have length {q}, got {f.shape}")
        scale = 1.0 + (np.abs(h).max() if h.size else 0.0)
        asym = np.abs(h - h.T).max() if h.size else 0.0
        if asym > 1e-12 * scale:
            raise SpecError(f"H is not symmetric (max asymmetry {asym:.3e})")
        object.__setattr__(self, "h", (h + h.T) / 2.0)
        object.__setattr__(self, "f", f)
        if self.cs.q != q:
            raise SpecError(
                f"constraint set is over {self.cs.q} coefficients, H over {q}"
            )
        lower = np.full(q, -np.inf) if self.l is None else np.asarray(self.l, float)
        upper = np.full(q, np.inf) if self.u is None else np.asarray(self.u, float)
        if lower.shape != (q,) or upper.shape != (q,):
            raise SpecError("bounds must match the coefficient count")
        if (lower > upper).any():
            raise SpecError("lower bound exceeds upper bound")
        object.__setattr__(self, "l", lower)
        object.__setattr__(self, "u", upper)
        if self.warm_start is not None:
            ws = np.asarray(self.warm_start, dtype=float)
            if ws.shape != (q,):
                raise SpecError(f"warm start must have length {q}")
            object.__setattr__(self, "warm_start", ws)

    @property
    def q(self) -> int:
        return int(self.h.shape[0])


@dataclass(frozen=True)
class KktResiduals:
    """First-order optimality residuals of a (beta, multipliers) candidate.

    stationarity: max |H beta + f + Aeq' mu + A' nu + lam_u - lam_l|
    primal_eq:    max |Aeq beta - beq|
    primal_ineq:  max positive part of A beta - b and of bound violations
    dual:         magnitude of the most negative inequality/bound multiplier
    complementarity: max |multiplier * slack| over inequality and bound rows
    """

    stationarity: float
    primal_eq: float
    primal_ineq: float
    dual: float
    complementarity: float

    def max(self) -> float:
        return max(
            self.stationarity,
            self.primal_eq,
            self.primal_ineq,
            self.dual,
            self.complementarity,
        )


@dataclass(frozen=True, eq=False)
class QpSolution:
    """Solver output: point, multipliers, status, and certified residuals.

    status "optimal" means the KKT residuals passed the configured
    tolerances; "infeasible" and "unbounded" carry a certificate vector
    (Farkas direction, respectively descent ray) when one was found;
    "max_iterations" returns the best iterate with its honest residuals.
    """

    beta: np.ndarray
    eq_multipliers: np.ndarray
    ineq_multipliers: np.ndarray
    lower_multipliers: np.ndarray
    upper_multipliers: np.ndarray
    status: str
    kkt: KktResiduals
    objective: float
    iterations: int
    note: str = ""
    certificate: Optional[np.ndarray] = None


def _max_abs(v: np.ndarray) -> float:
    return float(np.abs(v).max()) if v.size else 0.0


def _max_pos(v: np.ndarray) -> float:
    return float(np.maximum(v, 0.0).max()) if v.size else 0.0


def qp_objective(p: QpProblem, beta: np.ndarray) -> float:
    """Objective value 1/2 beta' H beta + f' beta."""
    beta = np.asarray(beta, dtype=float)
    return float(0.5 * beta @ p.h @ beta + p.f @ beta)


def kkt_residuals(
    p: QpProblem,
    beta: np.ndarray,
    eq_multipliers: Optional[np.ndarray] = None,
    ineq_multipliers: Optional[np.ndarray] = None,
    lower_multipliers: Optional[np.ndarray] = None,
    upper_multipliers: Optional[np.ndarray] = None,
) -> KktResiduals:
    """Exact KKT residuals for a candidate point; pure certificate checker.

    Missing multiplier vectors are treated as zero.  Finite bounds enter the
    stationarity, primal, dual, and complementarity terms; infinite bounds
    contribute nothing.
    """
    q = p.q
    beta = np.asarray(beta, dtype=float)
    if beta.shape != (q,):
        raise SpecError(f"beta must have length {q}")
    mu = _as_mult(eq_multipliers, p.cs.m_e, "eq_multipliers")
    nu = _as_mult(ineq_multipliers, p.cs.m_i, "ineq_multipliers")
    lam_l = _as_mult(lower_multipliers, q, "lower_multipliers")
    lam_u = _as_mult(upper_multipliers, q, "upper_multipliers")

    grad = p.h @ beta + p.f
    if p.cs.m_e:
        grad = grad + p.cs.aeq.T @ mu
    if p.cs.m_i:
        grad = grad + p.cs.a.T @ nu
    grad = grad + lam_u - lam_l

    eq_res = p.cs.aeq @ beta - p.cs.beq if p.cs.m_e else np.zeros(0)
    ineq_slack = p.cs.a @ beta - p.cs.b if p.cs.m_i else np.zeros(0)

    lower_gap = np.where(np.isfinite(p.l), p.l - beta, -np.inf)
    upper_gap = np.where(np.isfinite(p.u), beta - p.u, -np.inf)
    primal_ineq = max(
        _max_pos(ineq_slack), _max_pos(lower_gap), _max_pos(upper_gap)
    )

    dual = max(
        _max_pos(-nu) if nu.size else 0.0,
        _max_pos(-lam_l),
        _max_pos(-lam_u),
    )
    comp_terms = [nu * ineq_slack] if p.cs.m_i else []
    with np.errstate(invalid="ignore"):
        comp_terms.append(np.where(np.isfinite(p.u), lam_u * (beta - p.u), 0.0))
        comp_terms.append(np.where(np.isfinite(p.l), lam_l * (p.l - beta), 0.0))
    complementarity = max(_max_abs(t) for t in comp_terms) if comp_terms else 0.0

    return KktResiduals(
        stationarity=_max_abs(grad),
        primal_eq=_max_abs(eq_res),
        primal_ineq=primal_ineq,
        dual=dual,
        complementarity=complementarity,
    )


def _as_mult(v: Optional[np.ndarray], m: int, name: str) -> np.ndarray:
    if v is None:
        return np.zeros(m)
    v = np.asarray(v, dtype=float)
    if v.shape != (m,):
        raise SpecError(f"{name} must have length {m}, got {v.shape}")
    return v


# ---------------------------------------------------------------------------
# Dispatch


def solve_qp(p: QpProblem, settings: Optional[QpSettings] = None) -> QpSolution:
    """Solve the QP, certifying the result through KKT residuals.

    Dispatch: no constraints or bounds -> direct (least squares on singular
    H); equalities only -> one KKT solve with infeasibility certificate;
    anything with inequality rows or finite bounds -> operator splitting
    with polish.  warm_start seeds the splitting iterate.
    """
    settings = settings or QpSettings()
    has_bounds = np.isfinite(p.l).any() or np.isfinite(p.u).any()
    if p.cs.m_e == 0 and p.cs.m_i == 0 and not has_bounds:
        return _solve_unconstrained(p, settings)
    if p.cs.m_i == 0 and not has_bounds:
        return _solve_equality_only(p, settings)
    return _solve_splitting(p, settings)


def _finish(
    p: QpProblem,
    beta: np.ndarray,
    mu: np.ndarray,
    nu: np.ndarray,
    lam_l: np.ndarray,
    lam_u: np.ndarray,
    status: str,
    iterations: int,
    note: str = "",
    certificate: Optional[np.ndarray] = None,
) -> QpSolution:
    kkt = kkt_residuals(p, beta, mu, nu, lam_l, lam_u)
    return QpSolution(
        beta=beta,
        eq_multipliers=mu,
        ineq_multipliers=nu,
        lower_multipliers=lam_l,
        upper_multipliers=lam_u,
        status=status,
        kkt=kkt,
        objective=qp_objective(p, beta),
        iterations=iterations,
        note=note,
        certificate=certificate,
    )


def _zero_mults(p: QpProblem) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    q = p.q
    return np.zeros(p.cs.m_e), np.zeros(p.cs.m_i), np.zeros(q), np.zeros(q)


# ---------------------------------------------------------------------------
# Unconstrained and equality-only direct paths


def _solve_unconstrained(p: QpProblem, settings: QpSettings) -> QpSolution:
    mu, nu, lam_l, lam_u = _zero_mults(p)
    try:
        c, low = linalg.cho_factor(p.h, check_finite=False)
        beta = linalg.cho_solve((c, low), -p.f, check_finite=False)
        if np.isfinite(beta).all():
            stat = _max_abs(p.h @ beta + p.f)
            if stat <= settings.eps_abs + settings.eps_rel * (1.0 + _max_abs(p.f)):
                return _finish(p, beta, mu, nu, lam_l, lam_u, "optimal", 0)
    except linalg.LinAlgError:
        pass
    # Singular or ill-conditioned H: minimum-norm stationary point if one
    # exists, otherwise the objective is unbounded below along a null ray.
    beta, _, rank, sv = linalg.lstsq(p.h, -p.f, check_finite=False)
    resid = _max_abs(p.h @ beta + p.f)
    tol = settings.eps_abs + settings.eps_rel * (1.0 + _max_abs(p.f))
    if resid <= max(tol, 1e-8 * (1.0 + _max_abs(p.f))):
        if rank < p.q:
            warnings.warn(
                "H is rank deficient; returning the minimum-norm minimizer "
                "(the optimum is not unique)",
                QpWarning,
                stacklevel=3,
            )
        return _finish(p, beta, mu, nu, lam_l, lam_u, "optimal", 0)
    # Certificate: a null direction of H with negative slope.
    _, _, vt = linalg.svd(p.h, check_finite=False)
    null = vt[rank:]
    slopes = null @ p.f
    k = int(np.argmax(np.abs(slopes)))
    ray = -np.sign(slopes[k]) * null[k]
    return _finish(
        p,
        beta,
        mu,
        nu,
        lam_l,
        lam_u,
        "unbounded",
        0,
        note="objective decreases without bound along a null direction of H",
        certificate=ray,
    )


def _solve_equality_only(p: QpProblem, settings: QpSettings) -> QpSolution:
    q, m_e = p.q, p.cs.m_e
    aeq, beq = p.cs.aeq, p.cs.beq
    kkt = np.zeros((q + m_e, q + m_e))
    kkt[:q, :q] = p.h
    kkt[:q, q:] = aeq.T
    kkt[q:, :q] = aeq
    rhs = np.concatenate([-p.f, beq])
    sol, _, rank, _ = linalg.lstsq(kkt, rhs, check_finite=False)
    beta, mu = sol[:q], sol[q:]
    _, nu, lam_l, lam_u = _zero_mults(p)

    prim_tol = settings.eps_abs + settings.eps_rel * (1.0 + _max_abs(beq))
    prim = _max_abs(aeq @ beta - beq)
    if prim > max(prim_tol, 1e-8 * (1.0 + _max_abs(beq))):
        # Farkas certificate: the least-squares residual y of Aeq x = beq
        # satisfies Aeq' y = 0 and beq' y > 0 when the system is inconsistent.
        x_ls, _, _, _ = linalg.lstsq(aeq, beq, check_finite=False)
        cert = beq - aeq @ x_ls
        norm = np.linalg.norm(cert)
        if norm > 0:
            cert = cert / norm
        return _finish(
            p,
            beta,
            mu,
            nu,
            lam_l,
            lam_u,
            "infeasible",
            0,
            note="equality system is inconsistent",
            certificate=cert,
        )
    stat = _max_abs(p.h @ beta + p.f + aeq.T @ mu)
    stat_tol = settings.eps_abs + settings.eps_rel * (1.0 + _max_abs(p.f))
    if stat > max(stat_tol, 1e-8 * (1.0 + _max_abs(p.f))):
        return _finish(
            p,
            beta,
            mu,
            nu,
            lam_l,
            lam_u,
            "unbounded",
            0,
            note="objective is unbounded below on the equality subspace",
            certificate=None,
        )
    if rank < q + m_e:
        _warn_nonunique(p)
    return _finish(p, beta, mu, nu, lam_l, lam_u, "optimal", 0)


def _warn_nonunique(p: QpProblem) -> None:
    # Unique iff Z' H Z is positive definite for Z spanning null(Aeq).
    aeq = p.cs.aeq
    if aeq.shape[0] == 0:
        null = np.eye(p.q)
    else:
        null = linalg.null_space(aeq)
    if null.shape[1] == 0:
        return
    reduced = null.T @ p.h @ null
    eigs = linalg.eigvalsh(reduced)
    scale = 1.0 + (np.abs(reduced).max() if reduced.size else 0.0)
    if eigs.size and eigs[0] < 1e-10 * scale:
        warnings.warn(
            "equality constraints do not pin the null space of H; the "
            "optimum is not unique and the minimum-norm solution is returned",
            QpWarning,
            stacklevel=4,
        )


# ---------------------------------------------------------------------------
# Operator splitting path


def _stack_constraints(
    p: QpProblem,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, int, np.ndarray]:
    """Stack equalities, inequalities, and finite bounds into lo <= C x <= up.

    Returns (C, lo, up, number of bound rows, bound coefficient indices).
    """
    q = p.q
    blocks = [p.cs.aeq, p.cs.a]
    los = [p.cs.beq, np.full(p.cs.m_i, -np.inf)]
    ups = [p.cs.beq, p.cs.b]
    bound_idx = np.flatnonzero(np.isfinite(p.l) | np.isfinite(p.u))
    if bound_idx.size:
        rows = np.zeros((bound_idx.size, q))
        rows[np.arange(bound_idx.size), bound_idx] = 1.0
        blocks.append(rows)
        los.append(p.l[bound_idx])
        ups.append(p.u[bound_idx])
    c = np.vstack([blk for blk in blocks if blk.shape[0]] or [np.zeros((0, q))])
    lo = np.concatenate(los)
    up = np.concatenate(ups)
    return c, lo, up, int(bound_idx.size), bound_idx


def _factor_kkt(h: np.ndarray, c: np.ndarray, sigma: float, rho_vec: np.ndarray):
    q, m = h.shape[0], c.shape[0]
    kkt = np.zeros((q + m, q + m))
    kkt[:q, :q] = h + sigma * np.eye(q)
    kkt[:q, q:] = c.T
    kkt[q:, :q] = c
    kkt[q + np.arange(m), q + np.arange(m)] = -1.0 / rho_vec
    return linalg.lu_factor(kkt, check_finite=False)


def _split_multipliers(
    p: QpProblem, y: np.ndarray, n_bound: int, bound_idx: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    m_e, m_i = p.cs.m_e, p.cs.m_i
    mu = y[:m_e].copy()
    nu = np.maximum(y[m_e : m_e + m_i], 0.0)
    lam_l = np.zeros(p.q)
    lam_u = np.zeros(p.q)
    if n_bound:
        yb = y[m_e + m_i :]
        lam_u[bound_idx] = np.maximum(yb, 0.0)
        lam_l[bound_idx] = np.maximum(-yb, 0.0)
    return mu, nu, lam_l, lam_u


def _solve_splitting(p: QpProblem, settings: QpSettings) -> QpSolution:
    q = p.q
    h, f = p.h, p.f
    c, lo, up, n_bound, bound_idx = _stack_constraints(p)
    m = c.shape[0]
    eq_mask = np.isfinite(lo) & np.isfinite(up) & (lo == up)

    rho_base = settings.rho
    rho_vec = np.where(eq_mask, rho_base * settings.rho_eq_scale, rho_base)
    factor = _factor_kkt(h, c, settings.sigma, rho_vec)

    x = p.warm_start.copy() if p.warm_start is not None else np.zeros(q)
    z = np.clip(c @ x, lo, up)
    y = np.zeros(m)

    f_norm = _max_abs(f)
    iteration = 0
    converged = False
    status = "max_iterations"
    note = ""
    certificate: Optional[np.ndarray] = None

    while iteration < settings.max_iters:
        iteration += 1
        rhs = np.concatenate([settings.sigma * x - f, z - y / rho_vec])
        sol = linalg.lu_solve(factor, rhs, check_finite=False)
        x_tilde = sol[:q]
        z_tilde = z + (sol[q:] - y) / rho_vec

        x_prev, y_prev = x, y
        x = settings.alpha * x_tilde + (1.0 - settings.alpha) * x
        v = settings.alpha * z_tilde + (1.0 - settings.alpha) * z + y / rho_vec
        z = np.clip(v, lo, up)
        y = rho_vec * (v - z)

        if iteration % settings.check_interval and iteration != settings.max_iters:
            continue

        cx = c @ x
        hx = h @ x
        cty = c.T @ y
        r_prim = _max_abs(cx - z)
        r_dual = _max_abs(hx + f + cty)
        prim_scale = max(_max_abs(cx), _max_abs(z))
        dual_scale = max(_max_abs(hx), _max_abs(cty), f_norm)
        eps_prim = settings.eps_abs + settings.eps_rel * prim_scale
        eps_dual = settings.eps_abs + settings.eps_rel * dual_scale
        if r_prim <= eps_prim and r_dual <= eps_dual:
            converged = True
            status = "optimal"
            break

        dy = y - y_prev
        cert = _primal_infeasibility(c, lo, up, dy, settings.eps_prim_inf)
        if cert is not None:
            status = "infeasible"
            note = "constraint system admits a Farkas certificate"
            certificate = cert
            break
        dx = x - x_prev
        cert = _dual_infeasibility(h, f, c, lo, up, dx, settings.eps_dual_inf)
        if cert is not None:
            status = "unbounded"
            note = "objective admits an unbounded descent ray"
            certificate = cert
            break

        if settings.adaptive_rho and r_dual > 0 and iteration < settings.max_iters:
            nr_prim = r_prim / max(prim_scale, 1e-30)
            nr_dual = r_dual / max(dual_scale, 1e-30)
            new_base = rho_base * np.sqrt(nr_prim / max(nr_dual, 1e-30))
            new_base = float(np.clip(new_base, settings.rho_min, settings.rho_max))
            ratio = new_base / rho_base
            if (
                ratio > settings.adaptive_rho_tolerance
                or ratio < 1.0 / settings.adaptive_rho_tolerance
            ):
                rho_base = new_base
                rho_vec = np.where(
                    eq_mask, rho_base * settings.rho_eq_scale, rho_base
                )
                factor = _factor_kkt(h, c, settings.sigma, rho_vec)

    if status in ("infeasible", "unbounded"):
        mu, nu, lam_l, lam_u = _split_multipliers(p, y, n_bound, bound_idx)
        return _finish(
            p, x, mu, nu, lam_l, lam_u, status, iteration, note, certificate
        )

    # Polish: equality-reduce on the guessed active set for exact multipliers.
    if settings.polish:
        polished = _polish(h, f, c, lo, up, eq_mask, x, y, settings)
        if polished is not None:
            x_pol, y_pol = polished
            mu0, nu0, ll0, lu0 = _split_multipliers(p, y, n_bound, bound_idx)
            mu1, nu1, ll1, lu1 = _split_multipliers(p, y_pol, n_bound, bound_idx)
            raw = kkt_residuals(p, x, mu0, nu0, ll0, lu0)
            pol = kkt_residuals(p, x_pol, mu1, nu1, ll1, lu1)
            if pol.max() <= raw.max():
                x, y = x_pol, y_pol
                if not converged:
                    # A certified polished point upgrades a timeout.
                    eps = settings.eps_abs + settings.eps_rel
                    converged = pol.max() <= eps
                    status = "optimal" if converged else status

    mu, nu, lam_l, lam_u = _split_multipliers(p, y, n_bound, bound_idx)
    if status == "max_iterations":
        note = "iteration limit reached before tolerances"
    return _finish(p, x, mu, nu, lam_l, lam_u, status, iteration, note)


def _primal_infeasibility(
    c: np.ndarray, lo: np.ndarray, up: np.ndarray, dy: np.ndarray, eps: float
) -> Optional[np.ndarray]:
    """Farkas certificate check on the dual iterate difference."""
    norm = _max_abs(dy)
    if norm <= 0:
        return None
    if _max_abs(c.T @ dy) > eps * norm:
        return None
    # Support function of the constraint box at dy; +inf means no certificate.
    pos, neg = np.maximum(dy, 0.0), np.minimum(dy, 0.0)
    with np.errstate(invalid="ignore"):
        up_term = np.where(pos > 0, up * pos, 0.0)
        lo_term = np.where(neg < 0, lo * neg, 0.0)
    if not (np.isfinite(up_term).all() and np.isfinite(lo_term).all()):
        return None
    if float(up_term.sum() + lo_term.sum()) <= -eps * norm:
        return dy / norm
    return None


def _dual_infeasibility(
    h: np.ndarray,
    f: np.ndarray,
    c: np.ndarray,
    lo: np.ndarray,
    up: np.ndarray,
    dx: np.ndarray,
    eps: float,
) -> Optional[np.ndarray]:
    """Unbounded-ray certificate check on the primal iterate difference."""
    norm = _max_abs(dx)
    if norm <= 0:
        return None
    if _max_abs(h @ dx) > eps * norm:
        return None
    if float(f @ dx) > -eps * norm:
        return None
    cdx = c @ dx
    ok_up = np.isfinite(up)
    ok_lo = np.isfinite(lo)
    if (cdx[ok_up] > eps * norm).any():
        return None
    if (cdx[ok_lo] < -eps * norm).any():
        return None
    return dx / norm


def _polish(
    h: np.ndarray,
    f: np.ndarray,
    c: np.ndarray,
    lo: np.ndarray,
    up: np.ndarray,
    eq_mask: np.ndarray,
    x: np.ndarray,
    y: np.ndarray,
    settings: QpSettings,
) -> Optional[tuple[np.ndarray, np.ndarray]]:
    """Re-solve on the active set with regularized KKT + iterative refinement.

    Active rows are treated as equalities at their active bound; rounds of
    adjustment add violated rows and drop rows with wrong-sign multipliers.
    Returns (x, full-length y) or None when the polish could not be trusted.
    """
    q = h.shape[0]
    m = c.shape[0]
    ptol = max(settings.eps_abs * 10.0, 1e-12)
    upper_active = (~eq_mask) & (y > 0)
    lower_active = (~eq_mask) & (y < 0)

    for _ in range(settings.polish_max_rounds):
        active = np.flatnonzero(eq_mask | upper_active | lower_active)
        n_act = active.size
        rhs_act = np.where(upper_active[active], up[active], lo[active])
        c_act = c[active]

        kkt = np.zeros((q + n_act, q + n_act))
        kkt[:q, :q] = h
        kkt[:q, q:] = c_act.T
        kkt[q:, :q] = c_act
        reg = np.concatenate(
            [np.full(q, settings.polish_delta), np.full(n_act, -settings.polish_delta)]
        )
        rhs = np.concatenate([-f, rhs_act])
        try:
            factor = linalg.lu_factor(kkt + np.diag(reg), check_finite=False)
        except linalg.LinAlgError:
            return None
        t = linalg.lu_solve(factor, rhs, check_finite=False)
        for _ in range(settings.polish_refine_iters):
            resid = rhs - kkt @ t
            t = t + linalg.lu_solve(factor, resid, check_finite=False)
        if not np.isfinite(t).all():
            return None
        if _max_abs(rhs - kkt @ t) > 1e-6 * (1.0 + _max_abs(rhs)):
            return None
        x_new = t[:q]
        y_act = t[q:]

        changed = False
        # Wrong-sign multipliers leave the active set.
        for pos, row in enumerate(active):
            if eq_mask[row]:
                continue
            if upper_active[row] and y_act[pos] < -ptol:
                upper_active[row] = False
                changed = True
            elif lower_active[row] and y_act[pos] > ptol:
                lower_active[row] = False
                changed = True
        # Violated inactive rows join it.
        cx = c @ x_new
        for row in range(m):
            if eq_mask[row] or upper_active[row] or lower_active[row]:
                continue
            if np.isfinite(up[row]) and cx[row] - up[row] > ptol:
                upper_active[row] = True
                changed = True
            elif np.isfinite(lo[row]) and lo[row] - cx[row] > ptol:
                lower_active[row] = True
                changed = True
        if not changed:
            y_full = np.zeros(m)
            y_full[active] = y_act
            return x_new, y_full
    return None
