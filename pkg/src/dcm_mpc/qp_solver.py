"""Dense convex QP solver for the condensed MPC problems.

Solves   min  1/2 x^T H x + f^T x
         s.t. C x + D = 0
              E x + F <= 0

with a dual active-set method (Goldfarb-Idnani): start at the
unconstrained minimizer, add the most violated constraint each
iteration, dropping blocking ones. Requires H positive definite
(the MPC side always regularizes). No phase-1 is needed and
infeasibility falls out as an unbounded dual step.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve


@dataclass
class QpProblem:
    """Standard-form dense QP data. C/D or E/F may be empty (0 rows)."""

    H: np.ndarray
    f: np.ndarray
    C: np.ndarray | None = None
    D: np.ndarray | None = None
    E: np.ndarray | None = None
    F: np.ndarray | None = None

    def __post_init__(self):
        self.H = np.asarray(self.H, dtype=float)
        self.f = np.asarray(self.f, dtype=float).ravel()
        n = self.f.shape[0]
        if self.C is None or np.size(self.C) == 0:
            self.C = np.zeros((0, n))
            self.D = np.zeros(0)
        else:
            self.C = np.atleast_2d(np.asarray(self.C, dtype=float))
            self.D = np.asarray(self.D, dtype=float).ravel()
        if self.E is None or np.size(self.E) == 0:
            self.E = np.zeros((0, n))
            self.F = np.zeros(0)
        else:
            self.E = np.atleast_2d(np.asarray(self.E, dtype=float))
            self.F = np.asarray(self.F, dtype=float).ravel()

    @property
    def n(self) -> int:
        return self.f.shape[0]

    def objective(self, x: np.ndarray) -> float:
        x = np.asarray(x, dtype=float)
        return float(0.5 * x @ self.H @ x + self.f @ x)


@dataclass
class QpSolution:
    x: np.ndarray
    eq_multipliers: np.ndarray
    ineq_multipliers: np.ndarray
    status: str  # "optimal" | "infeasible" | "max-iterations"
    iterations: int
    residuals: dict = field(default_factory=dict)
    violated_set: tuple = ()  # constraint ids witnessing infeasibility


def kkt_residual(p: QpProblem, s: QpSolution) -> dict:
    """Stationarity / primal-feasibility / complementarity residual norms."""
    x = s.x
    stat = p.H @ x + p.f
    if p.C.shape[0]:
        stat = stat + p.C.T @ s.eq_multipliers
    if p.E.shape[0]:
        stat = stat + p.E.T @ s.ineq_multipliers
    primal = 0.0
    if p.C.shape[0]:
        primal = max(primal, float(np.max(np.abs(p.C @ x + p.D))))
    comp = 0.0
    if p.E.shape[0]:
        viol = p.E @ x + p.F
        primal = max(primal, float(np.max(np.maximum(viol, 0.0))))
        comp = float(np.max(np.abs(s.ineq_multipliers * viol)))
    return {
        "stationarity": float(np.max(np.abs(stat))) if stat.size else 0.0,
        "primal": primal,
        "complementarity": comp,
    }


class ActiveSetQp:
    """Reusable solver front end; all workspace is per-solve."""

    def __init__(self, tol: float = 1e-10, iter_factor: int = 50):
        self.tol = tol
        self.iter_factor = iter_factor

    def solve(self, p: QpProblem, warm_start: np.ndarray | None = None) -> QpSolution:
        # warm_start is accepted for interface stability; the minimizer is
        # unique under PD regularization so it cannot change the result.
        n = p.n
        meq, mi = p.C.shape[0], p.E.shape[0]
        max_iter = max(200, self.iter_factor * (mi + meq + 1))
        scale = max(1.0, float(np.max(np.abs(p.f))) if p.f.size else 1.0)
        feas_tol = self.tol * scale

        chol = cho_factor(p.H, lower=True)
        x = -cho_solve(chol, p.f)

        # Working set entries: (kind, row, sigma); sigma flips the normal so the
        # entering constraint always looks violated from above. Equalities may
        # enter with either sign and never leave.
        active: list[tuple[str, int, float]] = []
        u = np.zeros(0)  # multipliers aligned with `active` (w.r.t. signed normals)
        A = np.zeros((0, n))  # stacked signed normals
        HiAT = np.zeros((n, 0))  # cached H^-1 A^T columns

        def normal(kind, row):
            return p.C[row] if kind == "eq" else p.E[row]

        def value(kind, row, xx):
            if kind == "eq":
                return float(p.C[row] @ xx + p.D[row])
            return float(p.E[row] @ xx + p.F[row])

        def step_direction(a):
            """z, r solving H z + A^T r = -a, A z = 0."""
            hia = cho_solve(chol, a)
            if A.shape[0] == 0:
                return -hia, np.zeros(0)
            S = A @ HiAT
            r = np.linalg.solve(S, -(A @ hia))
            z = -hia - HiAT @ r
            return z, r

        def add(kind, row, sigma, mult):
            nonlocal active, u, A, HiAT
            a = sigma * normal(kind, row)
            active.append((kind, row, sigma))
            A = np.vstack([A, a])
            HiAT = np.column_stack([HiAT, cho_solve(chol, a)])
            u = np.append(u, mult)

        def drop(i):
            nonlocal active, u, A, HiAT
            del active[i]
            u = np.delete(u, i)
            A = np.delete(A, i, axis=0)
            HiAT = np.delete(HiAT, i, axis=1)

        iterations = 0

        def take_constraint_in(kind, row):
            """Drive constraint (kind,row) onto its boundary. Returns one of
            None (added/satisfied), "redundant", "infeasible", "max-iterations"."""
            nonlocal x, u, iterations
            acc = 0.0  # accumulated multiplier of the entering constraint
            sigma = 0.0
            while True:
                iterations += 1
                if iterations > max_iter:
                    return "max-iterations"
                v = value(kind, row, x)
                if kind == "ineq" and v <= feas_tol and acc == 0.0:
                    return None  # became satisfied while dropping blockers
                if sigma == 0.0:
                    sigma = 1.0 if v >= 0 else -1.0
                a = sigma * normal(kind, row)
                z, r = step_direction(a)
                znorm = float(np.linalg.norm(z))
                curv = float(z @ p.H @ z)
                sv = sigma * v

                # Dual blocking step: active inequality multipliers stay >= 0.
                t1, blk = np.inf, -1
                for i, (k2, _, _) in enumerate(active):
                    if k2 == "ineq" and r.size and r[i] < -1e-14:
                        cand = u[i] / (-r[i])
                        if cand < t1:
                            t1, blk = cand, i
                # Primal step reaching the constraint boundary.
                t2 = np.inf
                if znorm > 1e-12 and curv > 1e-16:
                    t2 = sv / curv

                if znorm <= 1e-12:
                    # Constraint normal lies in the span of the working set.
                    if kind == "eq" and abs(v) <= feas_tol:
                        return "redundant"
                    if np.isinf(t1):
                        return "infeasible"
                    x_unchanged_dual_step = t1
                    u += x_unchanged_dual_step * r
                    acc += x_unchanged_dual_step
                    drop(blk)
                    continue

                t = min(t1, t2)
                if np.isinf(t):
                    return "infeasible"
                x += t * z
                if r.size:
                    u += t * r
                acc += t
                if t2 <= t1:
                    add(kind, row, sigma, acc)
                    return None
                drop(blk)

        # Equalities first: enter the working set up front.
        for j in range(meq):
            st = take_constraint_in("eq", j)
            if st == "infeasible":
                return self._infeasible(p, x, active, ("eq", j), iterations)
            if st == "max-iterations":
                return self._finish(p, x, active, u, "max-iterations", iterations)

        # Inequality loop: most violated enters first.
        while mi:
            viol = p.E @ x + p.F
            for kind, row, _ in active:
                if kind == "ineq":
                    viol[row] = -np.inf  # tight already, never re-enter
            worst = int(np.argmax(viol))
            if viol[worst] <= feas_tol:
                break
            st = take_constraint_in("ineq", worst)
            if st == "infeasible":
                return self._infeasible(p, x, active, ("ineq", worst), iterations)
            if st == "max-iterations":
                return self._finish(p, x, active, u, "max-iterations", iterations)

        return self._finish(p, x, active, u, "optimal", iterations)

    @staticmethod
    def _multipliers(p, active, u):
        lam = np.zeros(p.C.shape[0])
        mu = np.zeros(p.E.shape[0])
        for (kind, row, sigma), ui in zip(active, u):
            if kind == "eq":
                lam[row] += sigma * ui
            else:
                mu[row] += ui
        return lam, mu

    def _finish(self, p, x, active, u, status, iterations):
        lam, mu = self._multipliers(p, active, u)
        if status == "optimal":
            polished = self._polish(p, active, x, lam, mu)
            if polished is not None:
                x, lam, mu = polished
        sol = QpSolution(
            x=x, eq_multipliers=lam, ineq_multipliers=mu, status=status, iterations=iterations
        )
        sol.residuals = kkt_residual(p, sol)
        return sol

    def _polish(self, p, active, x, lam, mu):
        """One exact KKT re-solve on the final active set. The iteration
        leaves active constraints tight only to step-length round-off, which
        a large multiplier amplifies into a visible complementarity residual;
        the direct solve removes it. Returns None when the polished point is
        not clearly at least as good as the iterated one."""
        rows = [r for kind, r, _ in active if kind == "ineq"]
        A = np.vstack([p.C, p.E[rows]]) if rows else p.C
        b = np.concatenate([p.D, p.F[rows]]) if rows else p.D
        k = A.shape[0]
        if k == 0:
            return None
        KKT = np.block([[p.H, A.T], [A, np.zeros((k, k))]])
        rhs = np.concatenate([-p.f, -b])
        try:
            sol = np.linalg.solve(KKT, rhs)
            for _ in range(2):  # refinement: large multipliers magnify any
                sol += np.linalg.solve(KKT, rhs - KKT @ sol)  # residual left here
        except np.linalg.LinAlgError:
            sol, *_ = np.linalg.lstsq(KKT, rhs, rcond=None)
        if not np.all(np.isfinite(sol)):
            return None
        x2 = sol[: p.n]
        meq = p.C.shape[0]
        mults = sol[p.n :]
        mu2 = np.zeros(p.E.shape[0])
        mu2[rows] = mults[meq:]
        scale = max(1.0, float(np.max(np.abs(p.f))) if p.f.size else 1.0)
        tol = 1e3 * self.tol * scale
        if np.any(mu2 < -tol):
            return None
        if p.E.shape[0] and np.max(p.E @ x2 + p.F) > tol:
            return None
        return x2, mults[:meq], np.maximum(mu2, 0.0)

    @staticmethod
    def _infeasible(p, x, active, entering, iterations):
        ids = tuple((k, r) for k, r, _ in active) + (entering,)
        return QpSolution(
            x=x,
            eq_multipliers=np.zeros(p.C.shape[0]),
            ineq_multipliers=np.zeros(p.E.shape[0]),
            status="infeasible",
            iterations=iterations,
            violated_set=ids,
        )


def solve(p: QpProblem, warm_start: np.ndarray | None = None, tol: float = 1e-10) -> QpSolution:
    return ActiveSetQp(tol=tol).solve(p, warm_start=warm_start)
