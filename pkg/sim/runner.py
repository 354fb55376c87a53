"""
Closed loop simulation of the filtered system.

The state is advanced with fixed step RK4 and the safety filter is solved
again at every stage, so the input is a function of the stage state rather
than held over the step.
"""
import logging

import numpy as np

from core.conf import barrier_settings
from core.exceptions import DimensionMismatch, InitialStateUnsafe, NonFiniteState
from filters.models import FilterDecision
from filters.qp import qp_filter
from synthesis.backstepping import build_cbf, cbf_relative_degree2
from systems.models import LagrangianSystem

from .models import InvarianceReport, Scenario, TrajectoryLog

logger = logging.getLogger(__name__)


def build_candidate(scenario: Scenario, gradient_plan=None, rank_plan=None):
    """
    Barrier candidate for ``scenario``.

    Configuration outputs of mechanical models use the relative degree 2
    form; everything else goes through the general recursion.
    """
    sys, y, gains = scenario.system, scenario.output, scenario.gains
    if isinstance(sys, LagrangianSystem) and y.domain_kind == 'configuration' and y.gamma == 2:
        return cbf_relative_degree2(sys, y, scenario.constraint, gains.alpha, mu=gains.mu[0],
                                    sigma=gains.sigma, rank_plan=rank_plan, verify=rank_plan is not None,
                                    gradient_plan=gradient_plan)
    return build_cbf(sys, y, scenario.constraint, gains.alpha, mu=gains.mu[:y.gamma - 1],
                     lam=gains.lambdas(y.gamma), sigma=gains.sigma,
                     gradient_plan=gradient_plan, rank_plan=rank_plan)


def step_count(horizon: float, dt: float) -> int:
    if not dt > 0 or horizon < 0:
        raise ValueError(f'Need dt > 0 and horizon >= 0, got dt={dt}, horizon={horizon}.')
    return int(np.floor(horizon / dt + 1e-9))


class ClosedLoop:
    """
    Vector field ``f + g u`` with ``u`` the filtered (or raw) nominal input.

    Unfiltered decisions carry no barrier value; ``simulate`` evaluates ``h``
    only at grid points then.
    """

    def __init__(self, cbf, nominal, filter_enabled=True):
        self.cbf = cbf
        self.nominal = nominal
        self.filter_enabled = filter_enabled

    def decide(self, x, drift=None, actuation=None) -> FilterDecision:
        u_desired = np.atleast_1d(np.asarray(self.nominal(x), dtype=float))
        m = self.cbf.system.m
        if u_desired.shape != (m,):
            raise DimensionMismatch(f'Nominal input must have length {m}, got shape {u_desired.shape}.',
                                    expected=m, got=u_desired.shape)
        if self.filter_enabled:
            return qp_filter(self.cbf, x, u_desired, drift=drift, actuation=actuation)
        return FilterDecision(u_desired, u_desired, float('nan'), False, float('nan'))

    def __call__(self, x):
        sys = self.cbf.system
        drift, actuation = sys.f(x), sys.g(x)
        decision = self.decide(x, drift, actuation)
        return np.asarray(drift + actuation @ decision.u_safe, dtype=float), decision


def rk4_step(field, x, dt):
    """One RK4 step; also returns whatever ``field`` reported at the start state."""
    k1, first = field(x)
    k2, _ = field(x + 0.5 * dt * k1)
    k3, _ = field(x + 0.5 * dt * k2)
    k4, _ = field(x + dt * k3)
    return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4), first


def simulate(scenario: Scenario, cbf=None) -> TrajectoryLog:
    cbf = cbf or build_candidate(scenario)
    x = np.asarray(scenario.initial_state, dtype=float)
    if x.shape != (cbf.system.n,):
        raise DimensionMismatch(f'Initial state must have length {cbf.system.n}, got shape {x.shape}.',
                                expected=cbf.system.n, got=x.shape)
    h0 = cbf.h(x)
    if h0 < 0:
        raise InitialStateUnsafe(f'h(x0) = {h0:.3e} < 0.', state=x.tolist(), h=float(h0))

    steps = step_count(scenario.horizon, scenario.dt)
    dt = scenario.dt
    loop = ClosedLoop(cbf, scenario.nominal, scenario.filter_enabled)
    n, m = cbf.system.n, cbf.system.m
    states = np.empty((steps + 1, n))
    u_desired = np.empty((steps + 1, m))
    u_safe = np.empty((steps + 1, m))
    h = np.empty(steps + 1)
    psi = np.empty(steps + 1)
    active = np.zeros(steps + 1, dtype=bool)

    logger.info('Simulating %s: %d steps of %.3g s, filter %s.', scenario.name, steps, dt,
                'on' if scenario.filter_enabled else 'off')
    for k in range(steps + 1):
        if k < steps:
            x_next, decision = rk4_step(loop, x, dt)
        else:
            x_next, decision = None, loop.decide(x)
        states[k] = x
        u_desired[k] = decision.u_desired
        u_safe[k] = decision.u_safe
        h[k] = decision.h if scenario.filter_enabled else cbf.h(x)
        psi[k] = cbf.psi_value(x)
        active[k] = decision.active
        if x_next is not None:
            if not np.all(np.isfinite(x_next)):
                raise NonFiniteState(f'State became non-finite at t = {(k + 1) * dt:.6g} s.',
                                     time=(k + 1) * dt, state=x.tolist())
            x = x_next

    names = cbf.system.state_domain.names
    return TrajectoryLog(np.arange(steps + 1) * dt, states, u_desired, u_safe, h, psi, active, tuple(names),
                         final_decision=decision)


def invariance_report(log: TrajectoryLog, tolerance=None) -> InvarianceReport:
    if len(log) == 0:
        raise ValueError('Cannot summarise an empty trajectory.')
    tolerance = barrier_settings.INVARIANCE_TOLERANCE if tolerance is None else tolerance
    min_h, min_psi = float(np.min(log.h)), float(np.min(log.psi))
    report = InvarianceReport(
        steps=len(log),
        min_h=min_h,
        min_psi=min_psi,
        max_violation=max(0.0, -min_psi),
        active_fraction=float(np.mean(log.active)),
        psi_dominates_h=bool(np.all(log.psi >= log.h)),
        tolerance=float(tolerance),
        final_state=log.states[-1].tolist(),
    )
    if report.passed:
        logger.info('Trajectory stays safe: min h %.3e, min psi %.3e.', min_h, min_psi)
    else:
        logger.warning('Trajectory leaves the safe set: min h %.3e, min psi %.3e.', min_h, min_psi)
    return report
