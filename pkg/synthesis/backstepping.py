"""
Backstepped barrier candidates.

With ``e_i = eta_{i+1} - k_i(zeta_i)`` the candidate is
``h = psi(eta_1) - sum_i |e_i|^2 / (2 mu_i)``. The virtual controllers follow

    k_{i+1} = kdot_i + c_i - (lam_i / 2) e_i
    c_1 = mu_1 dpsi/deta_1^T,   c_i = -(mu_i / mu_{i-1}) e_{i-1}

where ``kdot_i`` is the derivative of ``k_i`` along ``eta_j' = eta_{j+1}``.
The ``mu_i / mu_{i-1}`` factor cancels the cross terms between consecutive
errors, so along the explicit controller
``hdot = dpsi k_1 + sum_i lam_i |e_i|^2 / (2 mu_i)``.
"""
import logging

from autodiff.derivatives import linearize
from autodiff.models import SmoothFn
from core.conf import barrier_settings
from core.exceptions import GainTooSmall, RankDeficientOnC
from lie.derivatives import output_coordinate_fn
from lie.models import OutputMap
from lie.verification import verify_relative_degree
from systems.domains import Box, SamplingPlan
from systems.dynamics import to_control_affine, velocity_box
from systems.models import LagrangianSystem

from .models import CbfCandidate, ClassKInfinity, OutputConstraint
from .sontag import check_gradient_condition, sontag_controller

logger = logging.getLogger(__name__)


def check_gains(alpha: ClassKInfinity, mu, lam, gamma: int) -> None:
    """Every ``mu_i`` must be positive and every ``lam_i`` at least the Lipschitz constant of ``alpha``."""
    if len(mu) != gamma - 1 or len(lam) != gamma - 1:
        raise GainTooSmall(f'Relative degree {gamma} needs {gamma - 1} values of mu and lambda, '
                           f'got {len(mu)} and {len(lam)}.', mu=list(mu), lam=list(lam))
    for i, value in enumerate(mu, start=1):
        if not value > 0:
            raise GainTooSmall(f'mu_{i} = {value} must be positive.', index=i, mu=list(mu))
    for i, value in enumerate(lam, start=1):
        if value < alpha.lipschitz_constant:
            raise GainTooSmall(f'lambda_{i} = {value} is below the Lipschitz constant '
                               f'{alpha.lipschitz_constant} of alpha.', index=i, lam=list(lam))


def _backstep(y: OutputMap, constraint: OutputConstraint, alpha, mu, lam, sigma):
    """Virtual controllers ``k_1 .. k_gamma``; ``k_i`` takes ``zeta_i`` of length ``p i``."""
    p, gamma = y.p, y.gamma
    k1 = sontag_controller(constraint, alpha, sigma).as_fn()
    controls = [k1]
    for i in range(1, gamma):
        controls.append(_next_control(i, p, controls, constraint, mu, lam))
    return controls


def _next_control(i: int, p: int, controls, constraint, mu, lam) -> SmoothFn:
    k_i = controls[i - 1]
    k_prev = controls[i - 2] if i >= 2 else None

    def evaluate(zeta):
        eta_next = zeta[p * i:p * (i + 1)]
        k_value, kdot = linearize(k_i, zeta[:p * i], zeta[p:p * (i + 1)])
        if i == 1:
            coupling = mu[0] * constraint.gradient(zeta[:p])
        else:
            error_prev = zeta[p * (i - 1):p * i] - k_prev(zeta[:p * (i - 1)])
            coupling = -(mu[i - 1] / mu[i - 2]) * error_prev
        return kdot + coupling - (lam[i - 1] / 2.0) * (eta_next - k_value)

    return SmoothFn(p * (i + 1), (p,), evaluate, name=f'k{i + 1}')


def virtual_controller_chain(sys, y, constraint, alpha, mu, lam, sigma=1.0, enforce_gains=True):
    """The virtual controllers ``k_1 .. k_{gamma-1}`` as functions of ``zeta_i``."""
    if enforce_gains:
        check_gains(alpha, tuple(mu), tuple(lam), y.gamma)
    return tuple(_backstep(y, constraint, alpha, tuple(mu), tuple(lam), sigma)[:y.gamma - 1])


def _penalised_barrier(p: int, gamma: int, psi: SmoothFn, chain, mu, eta_fn: SmoothFn, name: str) -> SmoothFn:
    def evaluate(x):
        eta = eta_fn(x)
        h = psi(eta[:p])
        for i in range(1, gamma):
            error = eta[p * i:p * (i + 1)] - chain[i - 1](eta[:p * i])
            total = 0.0
            for e in error:
                total = total + e * e
            h = h - total / (2.0 * mu[i - 1])
        return h

    return SmoothFn(eta_fn.arity, (), evaluate, name=name)


def rank_domain(system, output: OutputMap, constraint: OutputConstraint, inflation=None) -> Box:
    """
    Box on which the rank condition is checked.

    For coordinate outputs the output coordinates of the configuration (or
    state) domain are replaced by the constraint box, inflated by
    ``inflation`` of its width; other outputs use the whole domain, inflated.
    """
    inflation = barrier_settings.RANK_DOMAIN_INFLATION if inflation is None else inflation
    if isinstance(system, LagrangianSystem) and output.domain_kind == 'configuration':
        domain = system.configuration_domain
    elif isinstance(system, LagrangianSystem):
        domain = to_control_affine(system).state_domain
    else:
        domain = system.state_domain
    if not output.indices:
        return domain.inflate(inflation)
    c1 = constraint.c1_box.inflate(inflation)
    return domain.replace(output.indices, c1.low, c1.high)


def _check_rank(system, output, plan):
    report = verify_relative_degree(system, output, plan)
    if not report.passed:
        raise RankDeficientOnC(
            f'Relative degree {output.gamma} of {output.name} fails on the constraint set: '
            f'sigma_min {report.min_singular_value:.3e}.',
            report=report, witnesses=report.witnesses)
    return report


def build_cbf(sys, y: OutputMap, constraint: OutputConstraint, alpha: ClassKInfinity, mu=(), lam=(),
              sigma=1.0, gradient_plan=None, rank_plan=None, enforce_gains=True) -> CbfCandidate:
    """
    Candidate ``h = psi(eta_1) - sum |eta_{i+1} - k_i(zeta_i)|^2 / (2 mu_i)``.

    ``gradient_plan`` and ``rank_plan`` switch on the sampled checks that must
    hold before the candidate is meaningful.
    """
    mu, lam = tuple(float(v) for v in mu), tuple(float(v) for v in lam)
    if enforce_gains:
        check_gains(alpha, mu, lam, y.gamma)
    if gradient_plan is not None:
        check_gradient_condition(constraint, gradient_plan)
    rank_report = _check_rank(sys, y, rank_plan) if rank_plan is not None else None

    affine = to_control_affine(sys) if isinstance(sys, LagrangianSystem) else sys
    controls = _backstep(y, constraint, alpha, mu, lam, sigma)
    chain = tuple(controls[:y.gamma - 1])
    barrier = _penalised_barrier(y.p, y.gamma, constraint.psi, chain, mu, output_coordinate_fn(affine, y),
                                 name=f'h[{constraint.name}]')
    logger.info('Built barrier for %s on %s: relative degree %d, mu=%s, lambda=%s.',
                constraint.name, affine.name, y.gamma, mu, lam)
    return CbfCandidate(affine, y, constraint, alpha, mu, lam, float(sigma), chain, controls[-1], barrier,
                        form='general', rank_report=rank_report)


def cbf_relative_degree2(sys: LagrangianSystem, y: OutputMap, constraint: OutputConstraint,
                         alpha: ClassKInfinity, mu=1.0, sigma=1.0, rank_plan=None, verify=True,
                         gradient_plan=None) -> CbfCandidate:
    """
    Candidate ``h = psi(y(q)) - |dy/dq(q) qd - k_1(y(q))|^2 / (2 mu)`` for a configuration output.

    Without ``rank_plan`` the rank condition is checked on ``rank_domain``
    unless ``verify`` is off.
    """
    if y.domain_kind != 'configuration' or y.gamma != 2:
        raise ValueError('The relative degree 2 form needs a configuration output of relative degree 2.')
    mu = float(mu)
    if not mu > 0:
        raise GainTooSmall(f'mu = {mu} must be positive.', mu=[mu])
    if gradient_plan is not None:
        check_gradient_condition(constraint, gradient_plan)
    rank_report = None
    if verify:
        if rank_plan is None:
            rank_plan = SamplingPlan(rank_domain(sys, y, constraint), barrier_settings.RANK_SAMPLES, 'lhs')
        rank_report = _check_rank(sys, y, rank_plan)

    n = sys.n
    lam = (alpha.lipschitz_constant,)
    controls = _backstep(y, constraint, alpha, (mu,), lam, sigma)
    k1 = controls[0]

    def evaluate(x):
        q, qd = x[:n], x[n:]
        out = y.y(q)
        error = y.velocity(q, qd) - k1(out)
        total = 0.0
        for e in error:
            total = total + e * e
        return constraint.psi(out) - total / (2.0 * mu)

    affine = to_control_affine(sys)
    barrier = SmoothFn(2 * n, (), evaluate, name=f'h2[{constraint.name}]')
    logger.info('Built relative degree 2 barrier for %s on %s, mu=%s.', constraint.name, sys.name, mu)
    return CbfCandidate(affine, y, constraint, alpha, (mu,), lam, float(sigma), (k1,), controls[-1], barrier,
                        form='relative_degree_2', rank_report=rank_report)


def state_domain_for(sys, box: Box, velocity_limit=None) -> Box:
    """Extend a configuration box with velocities so it can be sampled as states."""
    if isinstance(sys, LagrangianSystem) and box.dim == sys.n:
        limit = barrier_settings.VELOCITY_LIMIT if velocity_limit is None else velocity_limit
        return box.product(velocity_box(sys.n, limit))
    return box
