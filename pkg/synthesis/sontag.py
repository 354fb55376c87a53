"""
Universal formula for the first virtual controller.

``k_1(y) = phi(alpha(psi(y)), |dpsi/dy|^2) dpsi/dy^T`` satisfies
``dpsi/dy k_1 > -alpha(psi)`` wherever ``psi > 0`` or the gradient of ``psi``
does not vanish.
"""
from dataclasses import dataclass
import logging

import numpy as np

from autodiff import elementary as el
from autodiff.dual import primal
from autodiff.models import SmoothFn
from core.conf import barrier_settings
from core.exceptions import BarrierError, GradientConditionViolated, InvalidRegion
from systems.domains import SamplingPlan

from .models import ClassKInfinity, ConditionReport, OutputConstraint

logger = logging.getLogger(__name__)


def sontag_phi(a, b, sigma):
    """
    ``phi(a, b) = (-a + sqrt(a^2 + sigma b^2)) / (2b)``, extended by 0 at ``b = 0``.

    For ``a >= 0`` the rationalised form ``sigma b / (2(a + sqrt(a^2 + sigma b^2)))``
    is used: it has no cancellation and is smooth through ``b = 0``.
    """
    if not sigma > 0:
        raise ValueError('sigma must be positive.')
    if primal(b) < 0:
        raise InvalidRegion('phi needs b >= 0.', a=primal(a), b=primal(b))
    if primal(b) == 0 and primal(a) <= 0:
        raise InvalidRegion('phi is not smooth at b = 0 with a <= 0.', a=primal(a), b=primal(b))
    root = el.sqrt(a * a + sigma * b * b)
    if primal(a) >= 0:
        return sigma * b / (2 * (a + root))
    return (-a + root) / (2 * b)


@dataclass(frozen=True)
class SontagController:
    constraint: OutputConstraint
    alpha: ClassKInfinity
    sigma: float = 1.0

    def evaluate(self, y):
        grad = self.constraint.gradient(y)
        b = 0.0
        for g in grad:
            b = b + g * g
        phi = sontag_phi(self.alpha(self.constraint.psi(y)), b, self.sigma)
        return phi * grad

    __call__ = evaluate

    def as_fn(self) -> SmoothFn:
        p = self.constraint.p
        return SmoothFn(p, (p,), self.evaluate, name=f'k1[{self.constraint.name}]')

    def margin(self, y) -> float:
        """``dpsi/dy k_1(y) + alpha(psi(y))``, positive wherever the formula applies."""
        y = np.asarray(y, dtype=float)
        grad = self.constraint.gradient(y)
        return float(grad @ self.evaluate(y) + self.alpha(self.constraint.psi(y)))


def check_gradient_condition(constraint: OutputConstraint, plan: SamplingPlan, tol=None) -> int:
    """
    Sample the plan and require a non-vanishing gradient wherever ``psi <= 0``.

    Returns the number of points checked; raises GradientConditionViolated
    with the failing outputs as witnesses.
    """
    tol = barrier_settings.GRADIENT_TOLERANCE if tol is None else tol
    witnesses = []
    checked = 0
    for y in plan.points():
        if constraint.psi(y) > 0:
            continue
        checked += 1
        if np.linalg.norm(constraint.gradient(y)) <= tol:
            witnesses.append(y.tolist())
    if witnesses:
        logger.warning('Gradient of %s vanishes at %d sampled points outside its interior.',
                       constraint.name, len(witnesses))
        raise GradientConditionViolated(
            f'Gradient of {constraint.name} vanishes at {len(witnesses)} point(s) where psi <= 0.',
            witnesses=witnesses[:barrier_settings.MAX_WITNESSES])
    logger.debug('Gradient condition holds at %d boundary and exterior samples of %s.', checked, constraint.name)
    return checked


def sontag_controller(constraint, alpha, sigma=1.0, plan=None) -> SontagController:
    """Build ``k_1``; when ``plan`` is given the gradient condition is checked on it first."""
    if plan is not None:
        check_gradient_condition(constraint, plan)
    return SontagController(constraint, alpha, sigma)


def verify_sontag_condition(controller: SontagController, plan: SamplingPlan) -> ConditionReport:
    """Evaluate the controller margin at every sample of ``plan``."""
    margins, witnesses = [], []
    for y in plan.points():
        try:
            margin = controller.margin(y)
        except BarrierError:
            margin = -np.inf
        margins.append(margin)
        if margin <= 0 and len(witnesses) < barrier_settings.MAX_WITNESSES:
            witnesses.append(y.tolist())
    margins = np.array(margins)
    report = ConditionReport(
        sampled=len(margins),
        accepted=len(margins),
        min_margin=float(np.min(margins)),
        violations=int(np.sum(margins <= 0)),
        witnesses=witnesses,
        name=f'k1[{controller.constraint.name}]',
    )
    logger.info('Sontag margin for %s: min %.3e, %d violation(s) over %d samples.',
                controller.constraint.name, report.min_margin, report.violations, report.sampled)
    return report
