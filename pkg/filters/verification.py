import logging

import numpy as np

from core.conf import barrier_settings
from core.exceptions import BarrierError
from lie.verification import refine_minimum, smallest_singular_value
from synthesis.models import ConditionReport
from systems.domains import SamplingPlan

from .controllers import ExplicitController

logger = logging.getLogger(__name__)


def cbf_margin(cbf, controller: ExplicitController, x, rates=None) -> float:
    """``L_f h + L_g h k(x) + alpha(h)`` under the explicit controller."""
    u = controller(x, rates)
    h, lf, lg = cbf.lie_derivatives(x)
    return float(lf + lg @ u + cbf.alpha(h))


def verify_cbf_condition(cbf, plan: SamplingPlan, inflation=None) -> ConditionReport:
    """
    Check ``hdot(x, k(x)) > -alpha(h(x))`` on the samples with ``h >= -inflation``.

    States where the explicit controller is undefined count as violations. The
    smallest decoupling singular value is also refined around its sampled
    minimum so that isolated rank losses inside the set are not missed.
    """
    inflation = barrier_settings.SAFE_SET_INFLATION if inflation is None else inflation
    controller = ExplicitController(cbf)
    p = cbf.output.p
    margins, witnesses = [], []
    accepted_points, sigmas = [], []

    def fail(x, margin):
        margins.append(margin)
        if len(witnesses) < barrier_settings.MAX_WITNESSES:
            witnesses.append(np.asarray(x, dtype=float).tolist())

    points = plan.points()
    for x in points:
        try:
            if cbf.h(x) < -inflation:
                continue
        except BarrierError:
            continue
        accepted_points.append(x)
        try:
            rates = controller.split_rates(x)
            sigmas.append(smallest_singular_value(rates[1], p))
            margin = cbf_margin(cbf, controller, x, rates)
        except BarrierError as exc:
            logger.debug('Explicit controller undefined at %s: %s', x, exc)
            fail(x, -np.inf)
            continue
        if margin > 0:
            margins.append(margin)
        else:
            fail(x, margin)

    if accepted_points:
        def rank_objective(x):
            try:
                if cbf.h(x) < -inflation:
                    return np.inf
                return smallest_singular_value(controller.decoupling_matrix(x), p)
            except BarrierError:
                return np.inf

        start = int(np.argmin(sigmas)) if sigmas else 0
        point, value, _ = refine_minimum(rank_objective, accepted_points[start], plan.box, seed=plan.seed)
        if value < barrier_settings.PSEUDO_INVERSE_CUTOFF:
            logger.warning('Decoupling matrix loses rank inside the safe set near %s.', np.round(point, 4).tolist())
            fail(point, -np.inf)

    margins = np.array(margins, dtype=float)
    report = ConditionReport(
        sampled=len(points),
        accepted=len(accepted_points),
        min_margin=float(np.min(margins)) if margins.size else float('nan'),
        violations=int(np.sum(margins <= 0)),
        witnesses=witnesses,
        name=cbf.barrier.name,
    )
    if report.passed:
        logger.info('Barrier condition holds at %d of %d samples, min margin %.3e.',
                    report.accepted, report.sampled, report.min_margin)
    else:
        logger.warning('Barrier condition fails at %d of %d accepted samples.', report.violations, report.accepted)
    return report
