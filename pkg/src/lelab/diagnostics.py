"""Per-step diagnostics, the top-plane energy functional, and twin-run
stability experiments on the difference of two evolutions.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .evolve import EvolveConfig, rt_monitor, run, smallness_monitor
from .grid import VectorField
from .lagrangian import LagrangianState, cauchy_invariance_residual, lagrangian_divergence
from .sobolev import CutoffPair, QuotientSpec, aniso_norm, aniso_norm_array, shift_symbol

NORM_LABELS = ("v_2.5+d", "q_2.5+d", "chi_q_3+d", "chi_eta_3+d", "psi_q_3+d")
DEFAULT_ALPHA = (2, 1)
DEFAULT_QUOTIENT = QuotientSpec(direction=1, h=1e-2)


@dataclass(frozen=True)
class DiagnosticsReport:
    t: float
    det_dev: float
    cauchy_res: float
    div_res: float
    rt_margin: float
    smallness: tuple[float, float, float]
    norms: dict
    boundary_energy: float

    def row(self) -> dict:
        out = {
            "t": self.t,
            "det_dev": self.det_dev,
            "cauchy_res": self.cauchy_res,
            "div_res": self.div_res,
            "rt_margin": self.rt_margin,
            "d_a": self.smallness[0],
            "d_aat": self.smallness[1],
            "d_grad": self.smallness[2],
        }
        out.update(self.norms)
        out["boundary_energy"] = self.boundary_energy
        return out


def _localized(grid, values, cutoff, s):
    return aniso_norm_array(grid, grid.dealias(values * cutoff.values), s)


def report(state: LagrangianState, cutoffs: CutoffPair | None = None,
           cfg: EvolveConfig | None = None) -> DiagnosticsReport:
    """Every monitored quantity for a state that carries its pressure.

    Norms of eta are taken on the displacement eta - x, the only periodic
    part of the particle map.
    """
    cfg = cfg or EvolveConfig()
    grid = state.grid
    cutoffs = cutoffs or CutoffPair.build(grid)
    d = cfg.delta
    q = state.q.values
    small = smallness_monitor(state, cfg)
    norms = {
        "v_2.5+d": aniso_norm(state.v, 2.5 + d),
        "q_2.5+d": aniso_norm(state.q, 2.5 + d),
        "chi_q_3+d": _localized(grid, q, cutoffs.chi, 3 + d),
        "chi_eta_3+d": _localized(grid, state.displacement.values, cutoffs.chi, 3 + d),
        "psi_q_3+d": _localized(grid, q, cutoffs.psi, 3 + d),
    }
    return DiagnosticsReport(
        t=state.t,
        det_dev=float(np.abs(state.det.values - 1.0).max()),
        cauchy_res=aniso_norm(cauchy_invariance_residual(state), d),
        div_res=lagrangian_divergence(state).l2(),
        rt_margin=rt_monitor(state, cfg),
        smallness=(small.d_a, small.d_aat, small.d_grad),
        norms=norms,
        boundary_energy=boundary_energy(state),
    )


def boundary_energy(state: LagrangianState, alpha: tuple[int, int] = DEFAULT_ALPHA,
                    quotient: QuotientSpec = DEFAULT_QUOTIENT) -> float:
    """1/2 int_{top} (tau a_3i d^alpha D eta_i)^2 tau d3 q.

    ``alpha`` counts tangential derivatives (in x1, x2) and must total 3.
    Non-positive whenever d3 q < 0 on the top plane.
    """
    if len(alpha) != 2 or sum(alpha) != 3 or min(alpha) < 0:
        raise ValueError(f"alpha must be a tangential multi-index of order 3, got {alpha}")
    grid = state.grid
    tau = shift_symbol(grid, quotient)
    deriv = grid.multiplier(1) ** alpha[0] * grid.multiplier(2) ** alpha[1]
    # D x_i is constant, so only the displacement survives d^alpha
    d_eta = grid.apply_symbol(state.displacement.values, deriv * (tau - 1.0) / quotient.h)[..., -1]
    tau_a3 = grid.apply_symbol(state.a.values[2], tau)[..., -1]
    tau_dq3 = grid.apply_symbol(grid.d(state.q.values, 3), tau)[..., -1]
    inner = np.einsum("i...,i...->...", tau_a3, d_eta)
    return float(0.5 * (inner**2 * tau_dq3).mean() * grid.area)


@dataclass(frozen=True, eq=False)
class DifferenceState:
    V: VectorField
    E: VectorField
    A: np.ndarray
    Q: np.ndarray
    Y: float


def difference_state(s: LagrangianState, s_tilde: LagrangianState, cutoffs: CutoffPair,
                     delta: float) -> DifferenceState:
    grid = s.grid
    V = s.v - s_tilde.v
    E = s.displacement - s_tilde.displacement
    Y = aniso_norm(V, 1.5 + delta) + _localized(grid, E.values, cutoffs.chi, 2 + delta)
    return DifferenceState(V, E, s.a.values - s_tilde.a.values, s.q.values - s_tilde.q.values, Y)


@dataclass(frozen=True)
class TwinRecord:
    t: float
    Y: float
    Q_norm: float  # ||Q||_{1.5+d}
    psiQ_norm: float  # ||psi Q||_{2+d}
    V_l2: float
    V_norm: float  # ||V||_{1.5+d}
    E_norm: float  # ||E||_{1.5+d}
    chi2A_l2: float
    chiE_1: float
    At_norm: float  # ||A_t||_{0.5+d}


@dataclass(frozen=True)
class TwinRunResult:
    records: tuple[TwinRecord, ...]
    gronwall_c: float


class TwinRunError(RuntimeError):
    def __init__(self, message: str, reason: str | None = None):
        super().__init__(message)
        self.reason = reason


def _record(s, s_tilde, cutoffs, d) -> TwinRecord:
    grid = s.grid
    diff = difference_state(s, s_tilde, cutoffs, d)
    chi = cutoffs.chi.values
    At = s.a_t.values - s_tilde.a_t.values
    return TwinRecord(
        t=s.t,
        Y=diff.Y,
        Q_norm=aniso_norm_array(grid, diff.Q, 1.5 + d),
        psiQ_norm=_localized(grid, diff.Q, cutoffs.psi, 2 + d),
        V_l2=diff.V.l2(),
        V_norm=aniso_norm(diff.V, 1.5 + d),
        E_norm=aniso_norm(diff.E, 1.5 + d),
        chi2A_l2=aniso_norm_array(grid, grid.dealias(diff.A * chi**2), 0.0),
        chiE_1=_localized(grid, diff.E.values, cutoffs.chi, 1.0),
        At_norm=aniso_norm_array(grid, At, 0.5 + d),
    )


def twin_run_pair(datum: VectorField, other: VectorField, cfg: EvolveConfig,
                  cutoffs: CutoffPair | None = None) -> TwinRunResult:
    """Evolve two data in lockstep and record the difference quantities."""
    cutoffs = cutoffs or CutoffPair.build(datum.grid)
    runs = []
    for v0 in (datum, other):
        history, final = run(LagrangianState.initial(v0), cfg, cutoffs)
        if not final.accepted:
            raise TwinRunError(f"twin evolution rejected at t={final.state.t:.4g}: "
                               f"{final.rejection_reason}", final.rejection_reason)
        runs.append(history)
    records = tuple(_record(a.state, b.state, cutoffs, cfg.delta) for a, b in zip(*runs))
    return TwinRunResult(records, gronwall_constant(records))


def twin_run(datum: VectorField, perturbation: VectorField, kappa: float, cfg: EvolveConfig,
             cutoffs: CutoffPair | None = None) -> TwinRunResult:
    return twin_run_pair(datum, datum + perturbation * kappa, cfg, cutoffs)


def gronwall_constant(records, floor: float = 1e-13) -> float:
    """Least-squares C in log(Y(t)/Y(0)) = C t, skipping Y below ``floor``."""
    y0 = records[0].Y
    if y0 < floor:
        return math.nan
    pts = [(r.t, math.log(r.Y / y0)) for r in records[1:] if r.Y >= floor and r.t > 0]
    if not pts:
        return math.nan
    t, ly = np.array(pts).T
    return float((t * ly).sum() / (t * t).sum())


@dataclass(frozen=True)
class DifferenceIdentities:
    e_over_int_v: float
    a_over_e: float
    at_over_ve: float
    q_over_y: float


def _cumulative(t, y):
    out = np.zeros_like(y)
    out[1:] = np.cumsum(0.5 * (y[1:] + y[:-1]) * np.diff(t))
    return out


def _max_ratio(lhs, rhs, guard=1e-14):
    mask = rhs > guard
    if not mask.any():
        return 0.0
    return float((lhs[mask] / rhs[mask]).max())


def difference_identities(result: TwinRunResult) -> DifferenceIdentities:
    """Largest observed LHS/RHS ratio of each difference inequality over the run.

    e_over_int_v: ||E||_{1.5+d}    vs  int_0^t ||V||_{1.5+d}
    a_over_e:     ||chi^2 A||_0    vs  ||chi E||_1
    at_over_ve:   ||A_t||_{0.5+d}  vs  ||V||_{1.5+d} + ||E||_{1.5+d}
    q_over_y:     ||Q||_{1.5+d}    vs  Y + int_0^t Y
    """
    rec = result.records
    col = lambda name: np.array([getattr(r, name) for r in rec])  # noqa: E731
    t = col("t")
    V, E, Y = col("V_norm"), col("E_norm"), col("Y")
    return DifferenceIdentities(
        e_over_int_v=_max_ratio(E, _cumulative(t, V)),
        a_over_e=_max_ratio(col("chi2A_l2"), col("chiE_1")),
        at_over_ve=_max_ratio(col("At_norm"), V + E),
        q_over_y=_max_ratio(col("Q_norm"), Y + _cumulative(t, Y)),
    )
