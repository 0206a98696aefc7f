"""Classical RK4 integration of eta_t = v, v_t = -a^T grad q with a full
pressure solve at every stage, plus the Rayleigh-Taylor and smallness monitors.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Literal

import numpy as np

from .elliptic import (
    DEFAULT_MAX_ITER,
    DEFAULT_TOL,
    PressureNotConverged,
    PressureSolveReport,
    solve_pressure,
)
from .grid import ScalarField, TensorField, VectorField
from .lagrangian import LagrangianState
from .sobolev import aniso_norm

log = logging.getLogger(__name__)

Policy = Literal["warn", "abort"]

PRESSURE_FAILURE = "pressure non-convergence"
RT_ABORT = "RT abort"
SMALLNESS_EXCEEDED = "smallness exceeded"

# relative window treated as an exact zero margin in the RT monitor
RT_ROUNDOFF = 1e-12


@dataclass(frozen=True)
class EvolveConfig:
    dt: float = 1e-3
    t_end: float = 0.1
    b: float = 1.0
    rt_policy: Policy = "warn"
    epsilon: float = 0.25
    smallness_policy: Policy = "warn"
    delta: float = 0.25
    pressure_tol: float = DEFAULT_TOL
    pressure_max_iter: int = DEFAULT_MAX_ITER

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not self.b > 0:
            raise ValueError(f"RT threshold b must be positive, got {self.b}")
        if not 0 < self.epsilon <= 1:
            raise ValueError(f"epsilon must lie in (0, 1], got {self.epsilon}")
        if not 0 < self.delta <= 0.5:
            raise ValueError(f"delta must lie in (0, 0.5], got {self.delta}")
        for name in ("rt_policy", "smallness_policy"):
            if getattr(self, name) not in ("warn", "abort"):
                raise ValueError(f"{name} must be 'warn' or 'abort'")
        if self.t_end > 1.0:
            log.warning("t_end %.3g capped at 1", self.t_end)
            object.__setattr__(self, "t_end", 1.0)

    @property
    def n_steps(self) -> int:
        return int(round(self.t_end / self.dt))


@dataclass(frozen=True, eq=False)
class StepOutcome:
    state: LagrangianState
    report: object  # DiagnosticsReport; typed loosely to avoid an import cycle
    accepted: bool
    rejection_reason: str | None = None
    pressure: PressureSolveReport | None = None


def pressure_for(state: LagrangianState, cfg: EvolveConfig,
                 guess: ScalarField | None = None) -> tuple[ScalarField, PressureSolveReport]:
    return solve_pressure(state, tol=cfg.pressure_tol, max_iter=cfg.pressure_max_iter,
                          guess=guess if guess is not None else state.q)


def rhs(state: LagrangianState, cfg: EvolveConfig | None = None,
        guess: ScalarField | None = None):
    """(d eta/dt, dv/dt) = (v, -a_ki d_k q), plus the stage pressure.

    A state that already carries its solved pressure is not solved again.
    """
    cfg = cfg or EvolveConfig()
    if state.q is not None:
        q, report = state.q, None
    else:
        q, report = pressure_for(state, cfg, guess)
    grid = state.grid
    qh = grid.forward(q.values)
    grad_q = grid.backward(np.stack([grid.d_spectral(qh, k) for k in (1, 2, 3)]))
    dv = -grid.dealias(np.einsum("ki...,k...->i...", state.a.values, grad_q))
    return state.v, VectorField(grid, dv), q, report


def rt_monitor(state: LagrangianState, cfg: EvolveConfig) -> float:
    """max over the top plane of d3 q + b/2; the condition holds iff this is <= 0.

    Margins within differentiation round-off of zero are returned as 0, so a
    pressure sitting exactly on the threshold passes.
    """
    if state.q is None:
        raise ValueError("state carries no pressure")
    dq3_top = state.grid.d(state.q.values, 3)[..., -1]
    margin = float(dq3_top.max() + cfg.b / 2)
    scale = max(cfg.b, float(np.abs(dq3_top).max()))
    return 0.0 if abs(margin) <= RT_ROUNDOFF * scale else margin


@dataclass(frozen=True)
class Smallness:
    d_a: float
    d_aat: float
    d_grad: float
    eta_norm: float
    a_norm: float

    def exceeds(self, epsilon: float) -> bool:
        return max(self.d_a, self.d_aat, self.d_grad) > epsilon


def smallness_monitor(state: LagrangianState, cfg: EvolveConfig) -> Smallness:
    key = ("smallness", cfg.delta)
    if key not in state.extras:
        state.extras[key] = _smallness(state, cfg.delta)
    return state.extras[key]


def _smallness(state: LagrangianState, delta: float) -> Smallness:
    s = 1.5 + delta
    eye = TensorField.identity(state.grid)
    a = state.a
    return Smallness(
        d_a=aniso_norm(eye - a, s),
        d_aat=aniso_norm(eye - a @ a.T, s),
        d_grad=aniso_norm(eye - state.grad_eta, s),
        # the identity part of eta is not periodic; its displacement is measured
        eta_norm=aniso_norm(state.displacement, 2.5 + delta),
        a_norm=aniso_norm(a, s),
    )


def _combine(state, t, pairs, weights):
    disp = state.displacement.values.copy()
    v = state.v.values.copy()
    for (d_eta, d_v), w in zip(pairs, weights):
        disp += w * d_eta.values
        v += w * d_v.values
    grid = state.grid
    return state.advanced(t, VectorField(grid, disp), VectorField(grid, v))


def _check_monitors(state, cfg):
    margin = rt_monitor(state, cfg)
    small = smallness_monitor(state, cfg)
    if margin > 0:
        if cfg.rt_policy == "abort":
            return RT_ABORT
        log.debug("t=%.4g: Rayleigh-Taylor margin %.3g > 0", state.t, margin)
    if small.exceeds(cfg.epsilon) and cfg.smallness_policy == "abort":
        return SMALLNESS_EXCEEDED
    return None


def prepare(state: LagrangianState, cfg: EvolveConfig) -> tuple[LagrangianState, PressureSolveReport]:
    """Attach the solved pressure to a state."""
    q, report = pressure_for(state, cfg)
    return state.with_pressure(q), report


def step(state: LagrangianState, cfg: EvolveConfig, cutoffs=None) -> StepOutcome:
    """One RK4 step; on rejection the returned state is the input state."""
    from .diagnostics import report as make_report

    dt, t = cfg.dt, state.t
    try:
        if state.q is None:
            state, _ = prepare(state, cfg)
        e1, v1, q1, _ = rhs(state, cfg)
        s2 = _combine(state, t + dt / 2, [(e1, v1)], [dt / 2])
        e2, v2, q2, _ = rhs(s2, cfg, q1)
        s3 = _combine(state, t + dt / 2, [(e2, v2)], [dt / 2])
        e3, v3, q3, _ = rhs(s3, cfg, q2)
        s4 = _combine(state, t + dt, [(e3, v3)], [dt])
        e4, v4, q4, _ = rhs(s4, cfg, q3)
        new = _combine(state, t + dt, [(e1, v1), (e2, v2), (e3, v3), (e4, v4)],
                       [dt / 6, dt / 3, dt / 3, dt / 6])
        q_new, preport = pressure_for(new, cfg, q4)
    except PressureNotConverged as exc:
        log.warning("step from t=%.4g rejected: %s", t, exc)
        return StepOutcome(state, None, False, PRESSURE_FAILURE, exc.report)
    new = new.with_pressure(q_new)
    reason = _check_monitors(new, cfg)
    if reason is not None:
        return StepOutcome(state, None, False, reason, preport)
    return StepOutcome(new, make_report(new, cutoffs, cfg), True, None, preport)


def run(state: LagrangianState, cfg: EvolveConfig, cutoffs=None, callback=None):
    """Integrate to t_end; returns (accepted outcomes, final outcome).

    The initial state is checked against the monitors before the first step,
    so an abort policy can stop a run at t = 0.  ``callback`` sees every
    accepted outcome as it is produced.
    """
    from .diagnostics import report as make_report

    try:
        state, preport = prepare(state, cfg)
    except PressureNotConverged as exc:
        return [], StepOutcome(state, None, False, PRESSURE_FAILURE, exc.report)
    reason = _check_monitors(state, cfg)
    if reason is not None:
        return [], StepOutcome(state, None, False, reason, preport)
    first = StepOutcome(state, make_report(state, cutoffs, cfg), True, None, preport)
    history = [first]
    if callback:
        callback(first)
    outcome = first
    for _ in range(cfg.n_steps):
        outcome = step(outcome.state, cfg, cutoffs)
        if not outcome.accepted:
            return history, outcome
        history.append(outcome)
        if callback:
            callback(outcome)
    return history, outcome
