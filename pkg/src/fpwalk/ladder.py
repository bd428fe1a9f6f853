"""Bivariate ladder structure: epochs, heights, renewal functions.

Conventions (fixed throughout the package):

* strict ascending ladder time  tau   = min{n >= 1 : S_n > 0}
* weak descending ladder time   tau-  = min{n >= 1 : S_n <= 0}
* g(m, u)      = P(S_m = u,  tau- > m)   (mass of ascending ladder points)
* gminus(m, u) = P(S_m = -u, tau  > m)   (mass of weak descending points)
* U = renewal function of strict ascending heights, U(0) = 1
* V = renewal function of weak descending heights

Both table families come from the killed engine by duality: g through a
mirrored barrier sweep (stay strictly positive), gminus through the barrier-0
sweep (stay nonpositive).  Ladder-height pmfs use overshoot accumulation with
the time sum collapsed through the renewal identities
``sum_m g(m, u) = u_mass(u)`` and ``sum_m gminus(m, u) = v_mass(u)``: direct
time truncation converges like P(tau > M) ~ M^(-rho) and could never meet the
defect contract, while the collapsed sums need only a modest horizon plus an
asymptotic completion of the omitted time tail.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import AtomTooLarge, DefectTooLarge
from .exact import killed_sweep, mirror, suggest_window
from .steps import StepLaw

__all__ = [
    "LadderTables",
    "LadderHeightPmf",
    "RenewalTables",
    "build_ladder_tables",
    "ladder_height_pmfs",
    "renewal_functions",
    "decomposition_check",
    "decomposition_residuals",
    "constant_diagnostics",
    "uniform_ladder_bound",
    "export_ladder_csv",
    "export_renewal_csv",
]


# ---------------------------------------------------------------------------
# tables


@dataclass
class LadderTables:
    law: StepLaw
    M: int
    ucap: int
    g: np.ndarray              # (M+1, ucap+1); g[0,0] = 1, g[m,0] = 0 for m>=1
    gminus: np.ndarray         # (M+1, ucap+1); gminus[0,0] = 1
    tau_tail: np.ndarray       # P(tau > m), from the barrier-0 sweep
    tauminus_tail: np.ndarray  # P(tau- > m), from the mirrored sweep
    fp_tau: np.ndarray         # P(tau = m), m = 1..M
    fp_tauminus: np.ndarray    # P(tau- = m)
    row_sums_g: np.ndarray     # full-window row sums incl. tracked far mass
    row_sums_gminus: np.ndarray
    gamma: np.ndarray          # renewal mass sequence of ascending ladder times
    Gamma: np.ndarray          # Gamma[n] = sum_j P(tau_j <= n)


def build_ladder_tables(law: StepLaw, M: int, ucap: int | None = None, *,
                        site_abs_err: float = 1e-12,
                        mem_cap: int = 4 * 10**9) -> LadderTables:
    """Run the two killed sweeps to horizon M and assemble the tables."""
    if M < 1:
        raise ValueError("M must be >= 1")
    if ucap is None:
        ucap = min(4 * M, 512)
    mlaw = mirror(law)
    gspec = suggest_window(mlaw, -1, M, site_abs_err=site_abs_err,
                           readout_lo=-ucap, mem_cap=mem_cap)
    gres = killed_sweep(mlaw, -1, M, spec=gspec, first_step_init=True,
                        collect_rows=(-ucap, -1), mem_cap=mem_cap)
    gmspec = suggest_window(law, 0, M, site_abs_err=site_abs_err,
                            readout_lo=-ucap, mem_cap=mem_cap)
    gmres = killed_sweep(law, 0, M, spec=gmspec,
                         collect_rows=(-ucap, 0), mem_cap=mem_cap)

    g = np.zeros((M + 1, ucap + 1))
    g[0, 0] = 1.0
    # mirrored rows hold site -u at column -u - rows_lo; reversing puts u first
    g[1:, 1:] = gres.rows[1:, ::-1][:, :ucap]
    gminus = gmres.rows[:, ::-1][:, : ucap + 1].copy()

    q_tau = np.concatenate([[0.0], gmres.fp])
    gamma = np.zeros(M + 1)
    gamma[0] = 1.0
    for n in range(1, M + 1):
        gamma[n] = float(q_tau[1:n + 1] @ gamma[n - 1::-1])

    rs_g = gres.window_mass + gres.alive_defect
    rs_g[0] = 1.0  # the first-step init seeds the sweep at m = 1
    return LadderTables(
        law=law, M=M, ucap=ucap, g=g, gminus=gminus,
        tau_tail=gmres.surv.copy(), tauminus_tail=gres.surv.copy(),
        fp_tau=gmres.fp, fp_tauminus=gres.fp,
        row_sums_g=rs_g,
        row_sums_gminus=gmres.window_mass + gmres.alive_defect,
        gamma=gamma, Gamma=np.cumsum(gamma))


# ---------------------------------------------------------------------------
# ladder-height pmfs


@dataclass
class LadderHeightPmf:
    """Pmf of a ladder height on [0, ymax] with quantified truncation defect.

    ``values[y]`` is P(H = y); strict ascending heights have values[0] = 0.
    ``tail_beyond`` estimates P(H > ymax) analytically, and ``defect`` is the
    unaccounted remainder |1 - sum(values) - tail_beyond|.
    """

    kind: str                 # "strict-ascending" | "weak-descending"
    values: np.ndarray
    tail_beyond: float
    defect: float

    @property
    def ymax(self) -> int:
        return len(self.values) - 1

    def tail(self, w: int) -> float:
        """P(H > w) for 0 <= w <= ymax."""
        return float(np.sum(self.values[w + 1:])) + self.tail_beyond


def _skip_free_up(law: StepLaw) -> bool:
    return law.max_up == 1


def _time_tail_weight(law: StepLaw, M: int) -> float:
    """T(M) = sum_{m > M} 1 / (m c_m), the weight of the omitted time tail."""
    norm = law.norming()
    A = 64 * M
    ms = np.arange(M + 1, A + 1, dtype=float)
    cs = norm.array(ms)
    head = float(np.sum(1.0 / (ms * cs)))
    return head + law.alpha / float(norm.array(np.array([float(A)]))[0]) / A * A


def _f_zero(law: StepLaw) -> float:
    from . import stable
    return stable.limit_model(law).density(0.0)


def ladder_height_pmfs(law: StepLaw, horizon: int | None = None, *,
                       ymax: int = 512,
                       umax: int = 4096,
                       site_abs_err: float = 1e-11,
                       defect_cap: float = 1e-6,
                       mem_cap: int = 4 * 10**9):
    """Estimate (q_H, q_H-) for the strict ascending and weak descending heights.

    For skip-free-upward laws (largest positive step 1) both pmfs are exact:
    H is identically 1, the renewal masses are identically 1, and the weak
    descending overshoot sum collapses to the left tail of the step law.

    Otherwise two sweeps to ``horizon`` provide the column sums
    sum_{m <= M} g(m, u), completed by the local-limit time tail
    f(0) T(M) U(u-1), and the overshoot sums
    q_H(y) = sum_u v_mass(u) pmf(y + u) (and mirrored for q_H-) run over the
    completed renewal masses with a fitted power extension beyond ``umax``.

    Raises DefectTooLarge if more than ``defect_cap`` probability cannot be
    attributed to either the pmf on [0, ymax] or its analytic tail.
    """
    if _skip_free_up(law):
        q_h = np.zeros(ymax + 1)
        q_h[1] = 1.0
        qh = LadderHeightPmf("strict-ascending", q_h, 0.0, 0.0)
        ys = np.arange(0, ymax + 1)
        q_m = law.tail_below_array(-ys)
        tail_beyond = law.tail_below(-(ymax + 1))
        qm = LadderHeightPmf("weak-descending", q_m, tail_beyond,
                             abs(1.0 - float(np.sum(q_m)) - tail_beyond))
        return qh, qm

    M = horizon or 512
    u_mass, v_mass = _renewal_masses_from_sweeps(
        law, M, umax, site_abs_err=site_abs_err, mem_cap=mem_cap)
    a, rho = law.alpha, law.rho_nominal

    qh_vals = _overshoot_pmf(law, v_mass, a * (1 - rho), ymax, side=+1)
    qm_vals = _overshoot_pmf(law, u_mass, a * rho, ymax, side=-1)

    qh = _finish_pmf("strict-ascending", law, qh_vals, v_mass, a * (1 - rho),
                     ymax, side=+1)
    qm = _finish_pmf("weak-descending", law, qm_vals, u_mass, a * rho,
                     ymax, side=-1)
    for pmf in (qh, qm):
        if pmf.defect > defect_cap:
            raise DefectTooLarge(
                f"{pmf.kind} ladder pmf leaves {pmf.defect:.2e} unaccounted")
    return qh, qm


def _renewal_masses_from_sweeps(law, M, umax, *, site_abs_err, mem_cap):
    """u_mass and v_mass on [0, umax] from column sums plus time completion."""
    mlaw = mirror(law)
    gres = killed_sweep(mlaw, -1, M, site_abs_err=site_abs_err,
                        first_step_init=True, collect_rows=(-umax, -1),
                        mem_cap=mem_cap)
    gmres = killed_sweep(law, 0, M, site_abs_err=site_abs_err,
                         collect_rows=(-umax, 0), mem_cap=mem_cap)
    s_u = np.concatenate([[1.0], np.sum(gres.rows[1:, ::-1][:, :umax], axis=0)])
    s_v = np.sum(gmres.rows[:, ::-1][:, : umax + 1], axis=0)
    tw = _time_tail_weight(law, M) * _f_zero(law)
    # forward completion: u_mass(u) = S(u) + f0 T(M) U(u-1), V analogously
    u_mass = np.empty(umax + 1)
    u_mass[0] = 1.0
    acc = u_mass[0]
    for u in range(1, umax + 1):
        u_mass[u] = s_u[u] + tw * acc
        acc += u_mass[u]
    v_mass = np.empty(umax + 1)
    v_mass[0] = s_v[0] / (1.0 - tw)
    acc = v_mass[0]
    for u in range(1, umax + 1):
        v_mass[u] = (s_v[u] + tw * acc) / (1.0 - tw)
        acc += v_mass[u]
    return u_mass, v_mass


def _mass_tail_coeff(mass: np.ndarray, theta: float) -> float:
    """Fit C with mass(u) ~ C u^(theta-1) on the top half-decade."""
    umax = len(mass) - 1
    lead = np.arange(int(umax / 1.6), umax + 1)
    vals = mass[lead] * lead.astype(float) ** (1.0 - theta)
    return float(np.mean(vals))


def _pmf_power_coeff(law, side):
    """c with pmf(side * k) ~ c k^(-a-1) for large k."""
    a = law.alpha
    probe = 10**7
    t = law.tail_above(probe) if side > 0 else law.tail_below(-probe)
    return t * probe**a * a


def _overshoot_pmf(law, masses, theta, ymax, *, side):
    """q(y) = sum_u masses(u) pmf(side (y+u)), with a power-model u-tail."""
    umax = len(masses) - 1
    ys = np.arange(0, ymax + 1)
    us = np.arange(0, umax + 1)
    pm = law.pmf_array(side * np.add.outer(ys, us))
    vals = pm @ masses
    a = law.alpha
    c_tail = _mass_tail_coeff(masses, theta)
    c_pmf = _pmf_power_coeff(law, side)
    # integral completion of sum_{u > umax} C u^(theta-1) c (y+u)^(-a-1)
    vals += c_tail * c_pmf * float(umax) ** (theta - a - 1) / (a + 1 - theta)
    if side > 0:
        vals[0] = 0.0  # strict ascending heights are >= 1
    return vals


def _finish_pmf(kind, law, vals, masses, theta, ymax, *, side):
    tail_beyond = _height_tail(law, masses, theta, ymax, side=side)
    defect = abs(1.0 - float(np.sum(vals)) - tail_beyond)
    return LadderHeightPmf(kind, vals, tail_beyond, defect)


def _height_tail(law, masses, theta, w, *, side):
    """P(H > w) = sum_u masses(u) step_tail(w + u), evaluated analytically."""
    umax = len(masses) - 1
    us = np.arange(0, umax + 1)
    if side > 0:
        tails = law.tail_above_array(w + us)
    else:
        tails = law.tail_below_array(-(w + us) - 1)
    total = float(tails @ masses)
    a = law.alpha
    c_tail = _mass_tail_coeff(masses, theta)
    c_step = (law.tail_above(10**7) if side > 0
              else law.tail_below(-(10**7))) * (10**7) ** a
    total += c_tail * c_step * float(umax) ** (theta - a) / (a - theta)
    return total


# ---------------------------------------------------------------------------
# renewal recursions


@dataclass
class RenewalTables:
    U: np.ndarray       # U[x], x = 0..xmax, U[0] = 1
    u_mass: np.ndarray  # U[x] - U[x-1]
    V: np.ndarray
    v_mass: np.ndarray
    q_H: LadderHeightPmf
    q_Hm: LadderHeightPmf

    def A(self, y: int) -> float:
        """A(y) = sum_{w <= y} P(H > w), the truncated-mean functional of H."""
        return float(np.sum([self.q_H.tail(w) for w in range(0, y + 1)]))


def renewal_functions(q_H: LadderHeightPmf, q_Hm: LadderHeightPmf,
                      xmax: int) -> RenewalTables:
    """Solve the renewal recursions for U and V up to xmax.

    u_mass(y) = [y=0] + sum_{w=1..y} q_H(w) u_mass(y-w);
    v_mass(y) = ([y=0] + sum_{w=1..y} q_Hm(w) v_mass(y-w)) / (1 - q_Hm(0)).
    """
    atom = float(q_Hm.values[0])
    if atom >= 1.0 - 1e-9:
        raise AtomTooLarge("weak descending height atom at 0 is too close to 1")
    qh = np.zeros(xmax + 1)
    take = min(xmax, q_H.ymax)
    qh[: take + 1] = q_H.values[: take + 1]
    qm = np.zeros(xmax + 1)
    take = min(xmax, q_Hm.ymax)
    qm[: take + 1] = q_Hm.values[: take + 1]

    u_mass = np.zeros(xmax + 1)
    u_mass[0] = 1.0
    for y in range(1, xmax + 1):
        u_mass[y] = float(qh[1: y + 1] @ u_mass[y - 1:: -1])
    v_mass = np.zeros(xmax + 1)
    v_mass[0] = 1.0 / (1.0 - atom)
    for y in range(1, xmax + 1):
        v_mass[y] = float(qm[1: y + 1] @ v_mass[y - 1:: -1]) / (1.0 - atom)
    return RenewalTables(U=np.cumsum(u_mass), u_mass=u_mass,
                         V=np.cumsum(v_mass), v_mass=v_mass,
                         q_H=q_H, q_Hm=q_Hm)


# ---------------------------------------------------------------------------
# the decomposition identity


def decomposition_residuals(law: StepLaw, N: int, xmax: int, ymax: int, *,
                            site_abs_err: float = 1e-13,
                            mem_cap: int = 4 * 10**9):
    """Relative residuals of the max-decomposition identity on a full box.

    For every n <= N, x <= xmax, y <= ymax compares the killed snapshot
    P(S_n = x - y, T_x > n) against
    sum_{z=0}^{x ^ y} sum_{r=0}^{n} g(r, x-z) gminus(n-r, y-z).

    Returns (rel, lhs) arrays of shape (xmax+1, N+1, ymax+1); rel entries at
    sites with lhs = 0 hold the absolute residual instead.
    """
    ucap = max(xmax, ymax)
    tables = build_ladder_tables(law, N, ucap, site_abs_err=site_abs_err,
                                 mem_cap=mem_cap)
    rel = np.zeros((xmax + 1, N + 1, ymax + 1))
    lhs_all = np.zeros_like(rel)
    for x in range(0, xmax + 1):
        sweep = killed_sweep(law, x, N, site_abs_err=site_abs_err,
                             collect_rows=(x - ymax, x), mem_cap=mem_cap)
        lhs = sweep.rows[:, ::-1]  # column index y: site x - y
        rhs = _decomposition_rhs(tables, x, N, ymax)
        lhs_all[x] = lhs
        rel[x] = np.abs(lhs - rhs) / np.where(lhs > 0, lhs, 1.0)
    return rel, lhs_all


def _decomposition_rhs(tables: LadderTables, x: int, N: int, ymax: int):
    g, gm = tables.g, tables.gminus
    rhs = np.zeros((N + 1, ymax + 1))
    for y in range(0, ymax + 1):
        for z in range(0, min(x, y) + 1):
            a = g[: N + 1, x - z]
            b = gm[: N + 1, y - z]
            if not a.any() or not b.any():
                continue
            rhs[:, y] += np.convolve(a, b)[: N + 1]
    return rhs


def decomposition_check(law: StepLaw, n: int, x: int, y: int, *,
                        tables: LadderTables | None = None,
                        site_abs_err: float = 1e-13,
                        mem_cap: int = 4 * 10**9) -> float:
    """Relative residual of the decomposition identity at one (n, x, y)."""
    if tables is None or tables.M < n or tables.ucap < max(x, y):
        tables = build_ladder_tables(law, n, max(x, y),
                                     site_abs_err=site_abs_err, mem_cap=mem_cap)
    vec = killed_sweep(law, x, n, site_abs_err=site_abs_err,
                       snapshots=(n,), mem_cap=mem_cap).snapshots[n]
    lhs = vec.mass_at(x - y)
    rhs = 0.0
    for z in range(0, min(x, y) + 1):
        rhs += float(np.convolve(tables.g[: n + 1, x - z],
                                 tables.gminus[: n + 1, y - z])[n])
    return abs(lhs - rhs) / lhs if lhs > 0 else abs(rhs)


# ---------------------------------------------------------------------------
# diagnostics for the limiting constants


def _drift(values) -> float:
    """Largest relative deviation from the final value over the top octave."""
    v = np.asarray(values, dtype=float)
    if len(v) < 2:
        return math.nan
    lead = v[len(v) // 2:]
    return float(np.max(np.abs(lead / lead[-1] - 1.0)))


def constant_diagnostics(law: StepLaw, ngrid, *,
                         renewal: RenewalTables | None = None,
                         site_abs_err: float = 1e-12,
                         mem_cap: int = 4 * 10**9) -> dict:
    """Trend sequences for the limiting ladder constants.

    Statement slug -> {"n", "values", "drift"}:

    * ladder-survival-scale:  U(c_n) P(tau > n)
    * erickson-ratio:         U(c_n) A(c_n) / c_n
    * ladder-time-product:    n P(tau > n) P(tau- > n)
    * renewal-product:        U(c_n) V(c_n) / n

    All four tend to constants; the report carries the top-octave drift.
    """
    ngrid = sorted(int(n) for n in ngrid)
    n_max = ngrid[-1]
    tables = build_ladder_tables(law, n_max, ucap=8,
                                 site_abs_err=site_abs_err, mem_cap=mem_cap)
    cn = np.array([float(law.norming()(n)) for n in ngrid])
    xmax = int(np.ceil(cn[-1])) + 1
    if renewal is None:
        qh, qm = ladder_height_pmfs(law, ymax=max(512, xmax))
        renewal = renewal_functions(qh, qm, xmax)
    ns = np.array(ngrid)
    tau = tables.tau_tail[ns]
    taum = tables.tauminus_tail[ns]
    ci = np.floor(cn).astype(int)
    U, V = renewal.U[ci], renewal.V[ci]
    A = np.array([renewal.A(int(c)) for c in ci])
    out = {
        "ladder-survival-scale": U * tau,
        "erickson-ratio": U * A / cn,
        "ladder-time-product": ns * tau * taum,
        "renewal-product": U * V / ns,
    }
    return {k: {"n": ns, "values": v, "drift": _drift(v)} for k, v in out.items()}


def uniform_ladder_bound(law: StepLaw, ngrid, *, c1: float = 2.0,
                         renewal: RenewalTables | None = None,
                         site_abs_err: float = 1e-12,
                         mem_cap: int = 4 * 10**9) -> dict:
    """Fitted uniform constant for the local ladder bounds.

    For each n in the grid, the largest of g(n, u) n c_n / U(u) over
    1 <= u <= c1 c_n and gminus(n, u) n c_n / V(u) over 0 <= u <= c1 c_n.
    The sequence must stay bounded; the report carries its top-octave drift.
    """
    ngrid = sorted(int(n) for n in ngrid)
    n_max = ngrid[-1]
    ucap = int(math.ceil(c1 * float(law.norming()(n_max)))) + 1
    tables = build_ladder_tables(law, n_max, ucap,
                                 site_abs_err=site_abs_err, mem_cap=mem_cap)
    if renewal is None:
        qh, qm = ladder_height_pmfs(law, ymax=max(512, ucap))
        renewal = renewal_functions(qh, qm, ucap)
    c2 = []
    for n in ngrid:
        cn = float(law.norming()(n))
        cap = min(int(c1 * cn), ucap)
        us = np.arange(1, cap + 1)
        ncn = n * cn
        vals_g = tables.g[n, 1: cap + 1] * ncn / renewal.U[us]
        vals_m = tables.gminus[n, : cap + 1] * ncn / renewal.V[: cap + 1]
        c2.append(max(float(np.max(vals_g, initial=0.0)),
                      float(np.max(vals_m, initial=0.0))))
    c2 = np.array(c2)
    return {"n": np.array(ngrid), "C2": c2, "drift": _drift(c2)}


# ---------------------------------------------------------------------------
# CSV export


def export_ladder_csv(tables: LadderTables, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["m", "u", "g", "gminus"])
        for m in range(tables.M + 1):
            for u in range(tables.ucap + 1):
                w.writerow([m, u, repr(float(tables.g[m, u])),
                            repr(float(tables.gminus[m, u]))])


def export_renewal_csv(rt: RenewalTables, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "U", "V"])
        for x in range(len(rt.U)):
            w.writerow([x, repr(float(rt.U[x])), repr(float(rt.V[x]))])
