"""Per-axis condensed MPC over the discrete DCM dynamics.

Each control tick and horizontal axis builds one dense QP over the decision
vector [momentum-rate_0, cop-rate_0, ..., momentum-rate_{N-1}, cop-rate_{N-1},
p_1..p_m] where the p_q are previewed foothold positions. State per axis is
psi = [dcm, com, hdot, cop]; the momentum variable is axis-mapped (the x-axis
QP carries Hdot_y, the y-axis QP carries -Hdot_x) so both axes share the same
scalar dynamics.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .gait_plan import (
    ConfigurationError,
    FootstepPlan,
    PhaseTimeline,
    ReferenceTrajectories,
    VerticalProfile,
    final_rest_ticks,
    reference_foothold_gain,
)
from .lip_model import GRAVITY, Omega
from .qp_solver import ActiveSetQp, QpProblem, QpSolution


class FallPredictedError(RuntimeError):
    """The tick QP is infeasible; carries the violated constraint set."""

    def __init__(self, axis: int, violated_set: tuple):
        super().__init__(f"axis {axis} QP infeasible")
        self.axis = axis
        self.violated_set = violated_set


@dataclass
class MpcConfig:
    horizon: int = 30  # N, control ticks
    preview_steps: int = 3  # m, max footholds treated as decision variables
    w_cop_rate: float = 0.1
    w_momentum: float = 1e-3
    w_momentum_rate: float = 1e-5
    w_cop_track: float = 1.0
    w_dcm_track: float = 10.0
    reach_bound: float = 0.35  # per-axis foothold-to-CoM box (m)
    step_adjust: bool = True
    cmp_modulation: bool = True
    lateral_clearance: float = 0.16  # min inter-foot y distance (m)
    hessian_reg: float = 1e-9
    min_terminal_horizon: int = 4  # never plan fewer ticks than this at gait end
    # Per-axis adjustment range of each previewed foothold relative to its
    # nominal position: ((xlo, xhi), (ylo, yhi)) in meters, or None for
    # unbounded adjustment.
    foothold_bounds: tuple | None = None

    def __post_init__(self):
        if self.horizon < 1 or self.preview_steps < 0 or self.reach_bound <= 0:
            raise ConfigurationError("invalid MPC dimensions")
        for w in (
            self.w_cop_rate,
            self.w_momentum,
            self.w_momentum_rate,
            self.w_cop_track,
            self.w_dcm_track,
        ):
            if w < 0:
                raise ConfigurationError("weights must be non-negative")


def discretize(w: Omega, zdd: float, mass: float, g: float, T: float):
    """Stage matrices of the discrete per-axis dynamics.

    psi_{k+1} = A psi_k + B u_k with psi = [dcm, com, hdot, cop] and
    u = [momentum-rate-rate, cop-rate].
    """
    fz = mass * (g + zdd)
    if fz <= 0:
        raise ValueError("vertical contact force must be positive")
    a = T * w.effective_rate_gain
    wT = w.value * T
    A = np.array(
        [
            [1.0 + a, 0.0, -a / fz, -a],
            [wT, 1.0 - wT, 0.0, 0.0],
            [0.0, 0.0, 1.0, 0.0],
            [0.0, 0.0, 0.0, 1.0],
        ]
    )
    B = np.array([[0.0, 0.0], [0.0, 0.0], [T, 0.0], [0.0, T]])
    return A, B


def condense(A_seq, B_seq):
    """Stack N stages into state-prediction matrices.

    Returns Phi (4N x 4) with block row j = A_{j} ... A_0 and Phi_u (4N x 2N),
    block lower triangular with B on the diagonal.
    """
    N = len(A_seq)
    Phi = np.zeros((4 * N, 4))
    Phi_u = np.zeros((4 * N, 2 * N))
    P = np.eye(4)
    for j in range(N):
        r = slice(4 * j, 4 * j + 4)
        if j > 0:
            prev = slice(4 * (j - 1), 4 * j)
            Phi_u[r, : 2 * j] = A_seq[j] @ Phi_u[prev, : 2 * j]
        Phi_u[r, 2 * j : 2 * j + 2] = B_seq[j]
        P = A_seq[j] @ P
        Phi[r] = P
    return Phi, Phi_u


def footstep_selection(owners, decision_ids):
    """0/1 assignment of horizon ticks to the fixed foothold track (phi0) and
    to each previewed foothold (phi_u2 column per decision id)."""
    N = len(owners)
    m = len(decision_ids)
    col = {fid: q for q, fid in enumerate(decision_ids)}
    phi0 = np.zeros(N)
    phi_u2 = np.zeros((N, m))
    for j, o in enumerate(owners):
        if o in col:
            phi_u2[j, col[o]] = 1.0
        else:
            phi0[j] = 1.0
    return phi0, phi_u2


@dataclass
class AxisSolution:
    u: np.ndarray  # (2N,) interleaved [hddot, cop_rate]
    footholds: dict  # decision foothold id -> adjusted coordinate
    predicted: np.ndarray  # (N, 4) predicted states
    cost: float
    iterations: int
    n_horizon: int


@dataclass
class ControlOutput:
    tick: int
    axes: list  # [AxisSolution, AxisSolution]
    decision_ids: list

    @property
    def hddot0(self) -> np.ndarray:
        return np.array([ax.u[0] for ax in self.axes])

    @property
    def cop_rate0(self) -> np.ndarray:
        return np.array([ax.u[1] for ax in self.axes])

    def adjusted_footholds(self) -> dict:
        out = {}
        for fid in self.decision_ids:
            out[fid] = np.array([self.axes[0].footholds[fid], self.axes[1].footholds[fid]])
        return out


class WalkingMpc:
    """Receding-horizon controller over a gait plan.

    The plan's foothold positions are read live each tick, so committing an
    adjusted foothold (and rebuilding references) immediately propagates.
    """

    def __init__(
        self,
        plan: FootstepPlan,
        timeline: PhaseTimeline,
        profile: VerticalProfile,
        refs: ReferenceTrajectories,
        cfg: MpcConfig,
        mass: float,
        g: float = GRAVITY,
        contact_half: tuple | None = None,
    ):
        self.plan = plan
        self.timeline = timeline
        self.profile = profile
        self.refs = refs
        self.cfg = cfg
        self.mass = mass
        self.g = g
        # Narrowed contact surface (half-extents per axis) around each
        # foothold; None keeps the full foot rectangle.
        self.contact_half = contact_half
        self.solver = ActiveSetQp()
        self._ref_gain = reference_foothold_gain(timeline)
        # The terminal rest anchor sits just inside the reference's settle
        # window: two free ticks to catch the arriving state, then the hold.
        self._rest_lead = max(4, final_rest_ticks(timeline) - 2)
        self._prev_support = {}
        for seg in timeline.segments:
            if seg.kind in ("dsp", "final_dsp"):
                self._prev_support[seg.owner] = seg.support[0]

    # -- helpers -----------------------------------------------------------

    def _half(self, axis: int) -> float:
        h = self.plan.half_extent(axis)
        if self.contact_half is not None and self.contact_half[axis] is not None:
            h = min(h, self.contact_half[axis])
        return h

    def _grid(self, k: int) -> int:
        return min(k, self.timeline.total_ticks)

    def horizon_length(self, k: int) -> int:
        K = self.timeline.total_ticks
        remaining = K - k
        return min(self.cfg.horizon, max(remaining, self.cfg.min_terminal_horizon))

    def decision_footholds(self, k: int, n_horizon: int) -> list:
        if not self.cfg.step_adjust:
            return []
        ids = []
        for j in range(1, n_horizon + 1):
            o = int(self.timeline.owner[self._grid(k + j)])
            if self.timeline.touchdown.get(o, 0) > k and o not in ids:
                ids.append(o)
        if len(ids) > self.cfg.preview_steps:
            raise ConfigurationError(
                f"horizon spans {len(ids)} future steps, more than preview_steps={self.cfg.preview_steps}"
            )
        return ids

    # -- per-axis QP -------------------------------------------------------

    def build_axis_qp(self, axis: int, k: int, psi0: np.ndarray) -> tuple[QpProblem, dict]:
        cfg = self.cfg
        T = self.timeline.T
        K = self.timeline.total_ticks
        N = self.horizon_length(k)
        terminal_final = (k + N) >= K

        A_seq, B_seq = [], []
        for j in range(N):
            g_idx = self._grid(k + j)
            w = Omega(float(self.profile.omega[g_idx]), float(self.profile.omega_dot[g_idx]))
            A, B = discretize(w, float(self.profile.zdd[g_idx]), self.mass, self.g, T)
            A_seq.append(A)
            B_seq.append(B)
        Phi, Phi_u = condense(A_seq, B_seq)
        c = Phi @ np.asarray(psi0, dtype=float)

        decision_ids = self.decision_footholds(k, N)
        m = len(decision_ids)
        col = {fid: 2 * N + q for q, fid in enumerate(decision_ids)}
        n = 2 * N + m
        G = np.hstack([Phi_u, np.zeros((4 * N, m))]) if m else Phi_u

        xi_rows = 4 * np.arange(N)
        x_rows = xi_rows + 1
        h_rows = xi_rows + 2
        cop_rows = xi_rows + 3

        gs = np.array([self._grid(k + j + 1) for j in range(N)])
        owners = [int(self.timeline.owner[g]) for g in gs]
        xi_ref = self.refs.xi_ref[gs, axis]
        cop_ref = self.refs.cop_ref[gs, axis]
        half = self._half(axis)
        pos = self.plan.positions[:, axis]

        # Terminal rest anchor: the plan must be at a zero-input equilibrium
        # from tick jA on (see the equality block below). Tracking costs stop
        # there too -- penalizing the long hold against a reference it cannot
        # reach would otherwise reward perpetually deferred braking.
        jN = N - 1
        if terminal_final:
            rest_j = K - self._rest_lead - (k + 1)
            # Keep two ticks of maneuvering room ahead of the anchor: gentler
            # corrections stay within the model's validity, while a one-tick
            # deadbeat would amplify the model-plant mismatch it corrects.
            jA = min(jN, max(2, rest_j))
            # Once the hold has begun (the anchor slides along two ticks
            # ahead), tracking has nothing left to steer; keeping it active
            # would drive a perpetual micro-crawl toward the reference that
            # re-injects model mismatch every tick.
            n_track = jA + 1 if rest_j >= 2 else 0
        else:
            jA = None
            n_track = N

        # Cost ---------------------------------------------------------
        H = np.zeros((n, n))
        f = np.zeros(n)
        hdd_idx = 2 * np.arange(N)
        cr_idx = hdd_idx + 1
        H[hdd_idx, hdd_idx] += 2.0 * cfg.w_momentum_rate
        H[cr_idx, cr_idx] += 2.0 * cfg.w_cop_rate

        def add_quadratic(weight, M, r):
            nonlocal H, f
            if weight > 0:
                H += 2.0 * weight * (M.T @ M)
                f += 2.0 * weight * (M.T @ r)

        add_quadratic(cfg.w_momentum, G[h_rows], c[h_rows])
        add_quadratic(
            cfg.w_dcm_track, G[xi_rows[:n_track]], c[xi_rows[:n_track]] - xi_ref[:n_track]
        )

        # CoP tracking, foothold-relative where the owning foothold is a
        # decision variable: the target shifts with the foothold by the same
        # gain the reference has (1 in SSP, blend fraction in DSP).
        M4 = G[cop_rows[:n_track]].copy()
        r4 = c[cop_rows[:n_track]].copy() - cop_ref[:n_track]
        for j, o in enumerate(owners[:n_track]):
            if o in col:
                wj = self._ref_gain[gs[j]]
                M4[j, col[o]] -= wj
                r4[j] += wj * pos[o]
        add_quadratic(cfg.w_cop_track, M4, r4)
        H[np.diag_indices(n)] += cfg.hessian_reg

        # Equalities -----------------------------------------------------
        Ceq, Deq = [], []
        if not cfg.cmp_modulation:
            for j in range(N):
                row = np.zeros(n)
                row[2 * j] = 1.0
                Ceq.append(row)
                Deq.append(0.0)
        if terminal_final:
            # Bring the plan to rest at a fixed anchor shortly before the
            # gait end and freeze the inputs afterwards: a resting state with
            # zero inputs is an exact fixed point of the prediction model, so
            # every plan ends in a true hold and the closed loop cannot keep
            # nudging the parked state (which would re-inject model mismatch).
            Ceq.append(G[xi_rows[jA]] - G[cop_rows[jA]])
            Deq.append(c[xi_rows[jA]] - c[cop_rows[jA]])
            Ceq.append(G[x_rows[jA]] - G[cop_rows[jA]])
            Deq.append(c[x_rows[jA]] - c[cop_rows[jA]])
            for j in range(jA + 1, N):
                row = np.zeros(n)
                row[2 * j + 1] = 1.0  # cop rate
                Ceq.append(row)
                Deq.append(0.0)
            if cfg.cmp_modulation:
                # Momentum is an exact integrator, so it can be brought to
                # zero on the executed grid tick (no two-tick maneuvering
                # room needed) and frozen from there on.
                jH = min(jN, max(0, rest_j))
                Ceq.append(G[h_rows[jH]].copy())
                Deq.append(c[h_rows[jH]])
                for j in range(jH + 1, N):
                    row = np.zeros(n)
                    row[2 * j] = 1.0  # momentum acceleration
                    Ceq.append(row)
                    Deq.append(0.0)
        else:
            # Mid-gait surrogate: pin the terminal DCM to its reference,
            # anchored to the terminal foothold when that one is previewed.
            row = G[xi_rows[jN]].copy()
            d = c[xi_rows[jN]] - xi_ref[jN]
            o = owners[jN]
            if o in col:
                row[col[o]] -= 1.0
                d += pos[o]
            Ceq.append(row)
            Deq.append(d)

        # Inequalities ---------------------------------------------------
        Ein, Fin = [], []

        for j, g_state in enumerate(gs):
            feet = self.timeline.feet[g_state]
            kind = self.timeline.kind[g_state]
            o = owners[j]
            grow = G[cop_rows[j]]
            cj = c[cop_rows[j]]
            if kind == "ssp" or len(feet) == 1:
                if o in col:
                    row = grow.copy()
                    row[col[o]] -= 1.0
                    Ein.append(row)
                    Fin.append(cj - half)
                    Ein.append(-row)
                    Fin.append(-cj - half)
                else:
                    center = pos[o]
                    Ein.append(grow.copy())
                    Fin.append(cj - (center + half))
                    Ein.append(-grow.copy())
                    Fin.append(-cj + (center - half))
            else:
                prev_sup, new_f = feet
                # Interval hull of both feet; linear in a previewed foothold
                # because the nominal ordering of the two feet is known.
                if new_f in col:
                    nom_new = self.plan.nominal[new_f, axis]
                    nom_prev = self.plan.nominal[prev_sup, axis]
                    if nom_new >= nom_prev:
                        row = grow.copy()
                        row[col[new_f]] -= 1.0
                        Ein.append(row)  # cop <= p + half
                        Fin.append(cj - half)
                        Ein.append(-grow.copy())  # cop >= prev - half
                        Fin.append(-cj + (pos[prev_sup] - half))
                    else:
                        row = -grow.copy()
                        row[col[new_f]] += 1.0
                        Ein.append(row)  # cop >= p - half
                        Fin.append(-cj - half)
                        Ein.append(grow.copy())  # cop <= prev + half
                        Fin.append(cj - (pos[prev_sup] + half))
                else:
                    lo = min(pos[prev_sup], pos[new_f]) - half
                    hi = max(pos[prev_sup], pos[new_f]) + half
                    Ein.append(grow.copy())
                    Fin.append(cj - hi)
                    Ein.append(-grow.copy())
                    Fin.append(-cj + lo)

        for fid in decision_ids:
            q = col[fid]
            j_land = owners.index(fid)
            # Reachability: |p - predicted CoM at the landing tick| <= l with
            # the CoM prediction kept as a linear function of the inputs (the
            # open-loop prediction diverges with the DCM and is unusable).
            gx = G[x_rows[j_land]]
            cx = c[x_rows[j_land]]
            row = -gx.copy()
            row[q] += 1.0
            Ein.append(row.copy())  # p - com <= l
            Fin.append(-cx - cfg.reach_bound)
            Ein.append(-row)  # com - p <= l
            Fin.append(cx - cfg.reach_bound)
            if cfg.foothold_bounds is not None:
                lo, hi = cfg.foothold_bounds[axis]
                nom = self.plan.nominal[fid, axis]
                r2 = np.zeros(n)
                r2[q] = 1.0
                Ein.append(r2.copy())  # p <= nominal + hi
                Fin.append(-(nom + hi))
                Ein.append(-r2)  # p >= nominal + lo
                Fin.append(nom + lo)
            if axis == 1:
                other = self._prev_support.get(fid)
                if other is not None:
                    y_other = pos[other]
                    r3 = np.zeros(n)
                    if self.plan.sides[fid] == "left":
                        r3[q] = -1.0  # p >= y_other + clearance
                        Ein.append(r3)
                        Fin.append(y_other + cfg.lateral_clearance)
                    else:
                        r3[q] = 1.0  # p <= y_other - clearance
                        Ein.append(r3)
                        Fin.append(-(y_other - cfg.lateral_clearance))

        problem = QpProblem(
            H=H,
            f=f,
            C=np.array(Ceq) if Ceq else None,
            D=np.array(Deq) if Deq else None,
            E=np.array(Ein) if Ein else None,
            F=np.array(Fin) if Fin else None,
        )
        meta = {
            "n_horizon": N,
            "decision_ids": decision_ids,
            "col": col,
            "G": G,
            "c": c,
            "terminal_final": terminal_final,
        }
        return problem, meta

    def solve_axis(self, axis: int, k: int, psi0: np.ndarray) -> AxisSolution:
        problem, meta = self.build_axis_qp(axis, k, psi0)
        sol: QpSolution = self.solver.solve(problem)
        if sol.status == "infeasible":
            raise FallPredictedError(axis, sol.violated_set)
        N = meta["n_horizon"]
        u = sol.x
        if not self.cfg.cmp_modulation:
            # The momentum rates are equality-pinned to zero; snap away the
            # solver's round-off so logged momentum stays exactly zero.
            u[2 * np.arange(N)] = 0.0
        predicted = (meta["c"] + meta["G"] @ u).reshape(N, 4)
        footholds = {fid: float(u[meta["col"][fid]]) for fid in meta["decision_ids"]}
        return AxisSolution(
            u=u[: 2 * N],
            footholds=footholds,
            predicted=predicted,
            cost=problem.objective(u),
            iterations=sol.iterations,
            n_horizon=N,
        )

    def solve_tick(self, k: int, psi0_x: np.ndarray, psi0_y: np.ndarray) -> ControlOutput:
        ax_x = self.solve_axis(0, k, psi0_x)
        ax_y = self.solve_axis(1, k, psi0_y)
        return ControlOutput(
            tick=k,
            axes=[ax_x, ax_y],
            decision_ids=self.decision_footholds(k, self.horizon_length(k)),
        )
