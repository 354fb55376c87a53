import logging

import numpy as np

from autodiff.dual import primal_array
from core.conf import barrier_settings
from core.exceptions import BarrierError
from systems.domains import Box, SamplingPlan, latin_hypercube
from systems.dynamics import to_control_affine
from systems.models import LagrangianSystem

from .derivatives import decoupling_matrix, lie_g_lie_f
from .models import RankReport

logger = logging.getLogger(__name__)

# Each refinement round searches a box this much smaller than the previous one.
REFINE_SHRINK = 0.1


def smallest_singular_value(A, p: int) -> float:
    """``sigma_min`` of a ``p x m`` matrix; zero when rank ``p`` is impossible."""
    A = primal_array(A)
    if A.shape[0] > A.shape[1]:
        return 0.0
    return float(np.linalg.svd(A, compute_uv=False)[-1])


def refine_minimum(objective, center, box: Box, rounds=None, count=None, seed=0):
    """
    Shrinking Latin hypercube search for the minimum of ``objective`` near ``center``.

    Returns ``(best_point, best_value, evaluations)``. The number of rounds is
    fixed, so the result does not depend on any tolerance.
    """
    rounds = barrier_settings.REFINE_ROUNDS if rounds is None else rounds
    count = barrier_settings.REFINE_SAMPLES if count is None else count
    best = np.asarray(center, dtype=float)
    best_value = objective(best)
    evaluations = 1
    half_width = REFINE_SHRINK * box.width
    for r in range(rounds):
        local = box.around(best, half_width)
        for point in latin_hypercube(local, count, seed + r):
            value = objective(point)
            evaluations += 1
            if value < best_value:
                best, best_value = point, value
        half_width = REFINE_SHRINK * half_width
    logger.debug('Refined minimum %.3e after %d evaluations.', best_value, evaluations)
    return best, best_value, evaluations


def _samplers(sys, y):
    """Pick the rank matrix and the lower order terms to check, on ``q`` or on ``x``."""
    if isinstance(sys, LagrangianSystem) and y.domain_kind == 'configuration':
        if y.gamma != 2:
            raise ValueError('Configuration outputs of Lagrangian systems have relative degree 2.')
        A = decoupling_matrix(sys, y)
        affine = to_control_affine(sys)
        lgy = lie_g_lie_f(affine, y, 0)

        def zero_terms(q):
            return [lgy(np.concatenate([q, np.zeros(sys.n)]))]

        return A, zero_terms
    if isinstance(sys, LagrangianSystem):
        sys = to_control_affine(sys)
    A = lie_g_lie_f(sys, y, y.gamma - 1)
    lower = [lie_g_lie_f(sys, y, i) for i in range(y.gamma - 1)]

    def zero_terms(x):
        return [term(x) for term in lower]

    return A, zero_terms


def verify_relative_degree(sys, y, plan: SamplingPlan, rank_tol=None, zero_tol=None) -> RankReport:
    """
    Check the relative degree claim of ``y`` over the points of ``plan``.

    Configuration outputs of Lagrangian systems are checked over ``q`` with the
    decoupling matrix; anything else is checked over the state. Failures are
    reported, not raised.
    """
    rank_tol = barrier_settings.RANK_TOLERANCE if rank_tol is None else rank_tol
    zero_tol = barrier_settings.ZERO_TOLERANCE if zero_tol is None else zero_tol
    A, zero_terms = _samplers(sys, y)

    def sigma(point):
        try:
            return smallest_singular_value(A(point), y.p)
        except BarrierError:
            return 0.0

    points = plan.points()
    sigmas = np.array([sigma(point) for point in points])
    max_zero = 0.0
    for point in points:
        for term in zero_terms(point):
            max_zero = max(max_zero, float(np.max(np.abs(primal_array(term)), initial=0.0)))

    start = int(np.argmin(sigmas))
    argmin, refined, extra = refine_minimum(sigma, points[start], plan.box, seed=plan.seed)
    min_sigma = float(refined)

    failing = [(s, point) for s, point in zip(sigmas, points) if s <= rank_tol]
    if refined <= rank_tol and refined < sigmas[start]:
        failing.append((refined, argmin))
    failing.sort(key=lambda item: item[0])
    witnesses = [np.asarray(point, dtype=float).tolist() for _, point in failing[:barrier_settings.MAX_WITNESSES]]

    report = RankReport(
        sampled_points=len(points) + extra,
        min_singular_value=min_sigma,
        rank_ok=min_sigma > rank_tol,
        witnesses=witnesses,
        zero_ok=max_zero <= zero_tol,
        max_zero_norm=max_zero,
        tolerance=rank_tol,
        argmin=np.asarray(argmin, dtype=float).tolist(),
    )
    if report.passed:
        logger.info('Relative degree %d verified for %s: sigma_min %.3e over %d points.',
                    y.gamma, y.name, min_sigma, report.sampled_points)
    else:
        logger.warning('Relative degree %d fails for %s: sigma_min %.3e, lower order norm %.3e.',
                       y.gamma, y.name, min_sigma, max_zero)
    return report
